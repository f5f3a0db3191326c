//! Empirical certification of the hidden-variable side.
//!
//! Campaigns sample many λ and check every chain link, outcome positivity
//! and the integrand lower bounds at every requested angle. The optimizer
//! searches the λ charts for the smallest left-hand side a hidden-variable
//! model can produce; since the left-hand side is linear in the mixture
//! weights, its minimum over any distribution of λ is attained at a single
//! pure-product λ, so searching single assignments is sufficient.
//!
//! Both are deterministic for a fixed seed: sample `i` (or restart `i`) is
//! seeded from `(seed, i)` and reductions run in index order.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{bound_for, lhs_for, Inequality, Mode};
use crate::lambda::{
    all_contexts, check_chain_with, derive_seed, family_one_moduli, family_two_moduli, moduli_sum_with,
    sample_lambda, swapped_family_one_moduli, visit_chain, ChainLink, Counterexample, FactoredCorrelations, LambdaAssignment,
    LambdaModel, PROBABILITY_FLOOR, SLACK_TOLERANCE,
};
use crate::nelder_mead::{minimize, NelderMeadOptions};
use crate::pauli::{Correlator, PureState};
use crate::settings::{BlochVector, SettingSet};

/// Integrand slack below this is a failure.
pub const INTEGRAND_TOLERANCE: f64 = -1e-9;
/// Outcome distributions must sum to one within this.
pub const TOTAL_TOLERANCE: f64 = 1e-10;
/// Search results may undershoot the analytic threshold by at most this.
pub const CERTIFICATION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_RESTARTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignFailure {
    pub sample_index: u64,
    pub alpha: f64,
    pub reason: String,
    pub counterexample: Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub model: LambdaModel,
    pub seed: u64,
    pub samples: u64,
    pub alphas: Vec<f64>,
    pub contexts_per_alpha: usize,
    pub min_chain_slack: f64,
    pub min_slack_by_link: BTreeMap<ChainLink, f64>,
    /// `moduli_sum - 4|sin 2α|`, and for model A also the single-qubit
    /// `Σ|<A_i> - <A'_i>| - 2|sin 2α|`, minimized together.
    pub min_integrand_slack: f64,
    pub min_pair_integrand_slack: f64,
    pub min_single_integrand_slack: Option<f64>,
    pub min_probability: f64,
    pub max_probability: f64,
    pub max_total_error: f64,
    pub failures: u64,
    pub first_failure: Option<CampaignFailure>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
struct SampleSummary {
    link_min: [f64; 8],
    pair_integrand: f64,
    single_integrand: f64,
    min_probability: f64,
    max_probability: f64,
    max_total_error: f64,
    failure: Option<(f64, String, Counterexample)>,
}

fn link_index(link: ChainLink) -> usize {
    link as usize
}

fn evaluate_sample(model: LambdaModel, seed: u64, index: u64, grid: &[(f64, Vec<SettingSet>)]) -> SampleSummary {
    let lambda = sample_lambda(model, seed, index);
    let corr = lambda.correlations();
    let mut s = SampleSummary {
        link_min: [f64::INFINITY; 8],
        pair_integrand: f64::INFINITY,
        single_integrand: f64::INFINITY,
        min_probability: f64::INFINITY,
        max_probability: f64::NEG_INFINITY,
        max_total_error: 0.0,
        failure: None,
    };
    for (alpha, contexts) in grid {
        let alpha = *alpha;
        for set in contexts {
            let mut worst = f64::INFINITY;
            let range = visit_chain(&corr, set, |ls| {
                let k = link_index(ls.link);
                s.link_min[k] = s.link_min[k].min(ls.slack);
                worst = worst.min(ls.slack);
            });
            s.min_probability = s.min_probability.min(range.min_probability);
            s.max_probability = s.max_probability.max(range.max_probability);
            s.max_total_error = s.max_total_error.max(range.max_total_error);
            if s.failure.is_none() && (worst < SLACK_TOLERANCE || range.min_probability < PROBABILITY_FLOOR) {
                let report = check_chain_with(&corr, set);
                let reason = format!(
                    "chain slack {:e}, min probability {:e} in set {}{}",
                    report.min_slack(),
                    report.min_probability,
                    set.id,
                    if set.swapped { " (swapped)" } else { "" }
                );
                s.failure = Some((alpha, reason, Counterexample::new(&lambda, set, &report)));
            }
        }
        let sin = (2.0 * alpha).sin().abs();
        let pair = moduli_sum_with(&corr, alpha) - 4.0 * sin;
        s.pair_integrand = s.pair_integrand.min(pair);
        let single = family_one_moduli(&corr, alpha) - 2.0 * sin;
        if model == LambdaModel::A {
            s.single_integrand = s.single_integrand.min(single);
        }
        let integrand_fails = pair < INTEGRAND_TOLERANCE || (model == LambdaModel::A && single < INTEGRAND_TOLERANCE);
        if s.failure.is_none() && integrand_fails {
            let set = &contexts[0];
            let report = check_chain_with(&corr, set);
            let reason = format!("integrand slack pair {pair:e}, single {single:e}");
            s.failure = Some((alpha, reason, Counterexample::new(&lambda, set, &report)));
        }
    }
    if s.failure.is_none()
        && (s.max_probability > 1.0 - PROBABILITY_FLOOR || s.max_total_error > TOTAL_TOLERANCE)
    {
        let (alpha, contexts) = &grid[0];
        let (alpha, set) = (*alpha, &contexts[0]);
        let report = check_chain_with(&corr, set);
        let reason = format!("max probability {:e}, total error {:e}", s.max_probability, s.max_total_error);
        s.failure = Some((alpha, reason, Counterexample::new(&lambda, set, &report)));
    }
    s
}

/// Samples `samples` λ values and checks them at every angle in `alphas`.
pub fn run_campaign_grid(model: LambdaModel, alphas: &[f64], samples: u64, seed: u64) -> Result<CampaignReport> {
    if samples == 0 {
        return Err(Error::Domain("campaign needs at least one sample".into()));
    }
    if alphas.is_empty() {
        return Err(Error::Grid("no angles given".into()));
    }
    let grid: Vec<(f64, Vec<SettingSet>)> = alphas.iter().map(|&a| (a, all_contexts(a))).collect();
    let summaries: Vec<SampleSummary> =
        (0..samples).into_par_iter().map(|i| evaluate_sample(model, seed, i, &grid)).collect();

    let mut link_min = [f64::INFINITY; 8];
    let mut report = CampaignReport {
        model,
        seed,
        samples,
        alphas: alphas.to_vec(),
        contexts_per_alpha: all_contexts(alphas[0]).len(),
        min_chain_slack: f64::INFINITY,
        min_slack_by_link: BTreeMap::new(),
        min_integrand_slack: f64::INFINITY,
        min_pair_integrand_slack: f64::INFINITY,
        min_single_integrand_slack: None,
        min_probability: f64::INFINITY,
        max_probability: f64::NEG_INFINITY,
        max_total_error: 0.0,
        failures: 0,
        first_failure: None,
    };
    let mut single = f64::INFINITY;
    for (index, s) in summaries.into_iter().enumerate() {
        for k in 0..8 {
            link_min[k] = link_min[k].min(s.link_min[k]);
        }
        report.min_pair_integrand_slack = report.min_pair_integrand_slack.min(s.pair_integrand);
        single = single.min(s.single_integrand);
        report.min_probability = report.min_probability.min(s.min_probability);
        report.max_probability = report.max_probability.max(s.max_probability);
        report.max_total_error = report.max_total_error.max(s.max_total_error);
        if let Some((alpha, reason, counterexample)) = s.failure {
            report.failures += 1;
            if report.first_failure.is_none() {
                report.first_failure =
                    Some(CampaignFailure { sample_index: index as u64, alpha, reason, counterexample });
            }
        }
    }
    report.min_chain_slack = link_min.iter().copied().fold(f64::INFINITY, f64::min);
    report.min_slack_by_link = ChainLink::ALL.iter().copied().zip(link_min).collect();
    if model == LambdaModel::A {
        report.min_single_integrand_slack = Some(single);
    }
    report.min_integrand_slack = report.min_pair_integrand_slack.min(single);
    Ok(report)
}

pub fn run_campaign(model: LambdaModel, alpha: f64, samples: u64, seed: u64) -> Result<CampaignReport> {
    run_campaign_grid(model, &[alpha], samples, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// The left-hand side itself, compared with the full bound at α.
    Lhs,
    /// Left-hand side minus the λ-dependent moduli, compared with the
    /// constant term of the bound.
    LhsMinusIntegrand,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lhs" => Ok(Self::Lhs),
            "lhs-minus-integrand" => Ok(Self::LhsMinusIntegrand),
            other => Err(Error::Unknown { kind: "objective", value: other.to_string() }),
        }
    }
}

pub fn model_for(which: Inequality) -> LambdaModel {
    match which {
        Inequality::One => LambdaModel::A,
        Inequality::Two => LambdaModel::B,
    }
}

/// λ-dependent right-hand side before the final lower bound is applied.
pub fn integrand<C: Correlator + ?Sized>(corr: &C, alpha: f64, which: Inequality, mode: Mode) -> f64 {
    match (which, mode) {
        (Inequality::One, _) => family_one_moduli(corr, alpha),
        (Inequality::Two, Mode::Rederived) => moduli_sum_with(corr, alpha),
        (Inequality::Two, Mode::Paper) => swapped_family_one_moduli(corr, alpha) + 2.0 * family_two_moduli(corr, alpha),
    }
}

pub fn constant_term(which: Inequality, mode: Mode) -> f64 {
    match which {
        Inequality::One => -6.0,
        Inequality::Two => mode.constant(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub alpha: f64,
    pub inequality: Inequality,
    pub mode: Mode,
    pub objective: Objective,
    pub restarts: usize,
    pub seed: u64,
    pub options: NelderMeadOptions,
}

impl SearchConfig {
    pub fn new(alpha: f64, inequality: Inequality, mode: Mode) -> Self {
        Self {
            alpha,
            inequality,
            mode,
            objective: Objective::Lhs,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            options: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub inequality: Inequality,
    pub mode: Mode,
    pub objective: Objective,
    pub model: LambdaModel,
    pub alpha: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Smallest objective value found.
    pub value: f64,
    pub lhs: f64,
    pub integrand: f64,
    /// Analytic value the search must not undershoot.
    pub threshold: f64,
    pub gap: f64,
    pub sound: bool,
    pub best_restart: usize,
    pub converged_restarts: usize,
    pub evaluations: usize,
    pub argmin: LambdaAssignment,
}

/// Decodes a point of the unconstrained chart into an assignment.
///
/// Model A: `(θ, φ)` per qubit. Model B: seven reals per pair state, the
/// first amplitude real (global phase fixed) and normalization applied after.
pub fn decode_chart(model: LambdaModel, x: &[f64]) -> Option<LambdaAssignment> {
    match model {
        LambdaModel::A => {
            let bloch = std::array::from_fn(|k| {
                let (t, p) = (x[2 * k], x[2 * k + 1]);
                BlochVector::normalized([t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]).expect("unit by construction")
            });
            Some(LambdaAssignment::ProductQubits { bloch })
        }
        LambdaModel::B => {
            let state = |p: &[f64]| {
                let amps = vec![
                    Complex64::new(p[0], 0.0),
                    Complex64::new(p[1], p[2]),
                    Complex64::new(p[3], p[4]),
                    Complex64::new(p[5], p[6]),
                ];
                PureState::normalized(amps).ok()
            };
            Some(LambdaAssignment::ProductPairs { front: state(&x[..7])?, back: state(&x[7..14])? })
        }
    }
}

pub fn chart_dimension(model: LambdaModel) -> usize {
    match model {
        LambdaModel::A => 8,
        LambdaModel::B => 14,
    }
}

fn random_chart_point(model: LambdaModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        LambdaModel::A => (0..4)
            .flat_map(|_| {
                let t = rng.random_range(0.0..std::f64::consts::PI);
                let p = rng.random_range(0.0..std::f64::consts::TAU);
                [t, p]
            })
            .collect(),
        LambdaModel::B => (0..14).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

fn objective_value(corr: &FactoredCorrelations, cfg: &SearchConfig) -> (f64, f64, f64) {
    let lhs = lhs_for(corr, cfg.alpha, cfg.inequality, cfg.mode);
    let integ = integrand(corr, cfg.alpha, cfg.inequality, cfg.mode);
    let value = match cfg.objective {
        Objective::Lhs => lhs,
        Objective::LhsMinusIntegrand => lhs - integ,
    };
    (value, lhs, integ)
}

struct RestartOutcome {
    value: f64,
    point: Vec<f64>,
    evaluations: usize,
    converged: bool,
}

fn run_restart(cfg: &SearchConfig, model: LambdaModel, restart: usize) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, restart as u64));
    let start = random_chart_point(model, &mut rng);
    let f = |x: &[f64]| match decode_chart(model, x) {
        Some(l) => objective_value(&l.correlations(), cfg).0,
        None => f64::INFINITY,
    };
    let first = minimize(f, &start, &cfg.options);
    // a second simplex from the first answer catches premature collapse
    let polish = NelderMeadOptions { initial_step: 0.05, ..cfg.options };
    let second = minimize(f, &first.point, &polish);
    let best = if second.value <= first.value { second.point } else { first.point.clone() };
    RestartOutcome {
        value: first.value.min(second.value),
        point: best,
        evaluations: first.evaluations + second.evaluations,
        converged: second.converged,
    }
}

/// Smallest objective value over hidden-variable assignments, by simplex
/// descent from `restarts` random starting points.
pub fn minimize_leggett_lhs(cfg: &SearchConfig) -> Result<SearchReport> {
    if cfg.restarts == 0 {
        return Err(Error::Domain("at least one restart is required".into()));
    }
    let model = model_for(cfg.inequality);
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts).into_par_iter().map(|r| run_restart(cfg, model, r)).collect();
    let (best_restart, best) = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(i.cmp(j)))
        .expect("nonempty");
    let argmin = decode_chart(model, &best.point).expect("finite optimum");
    let (value, lhs, integ) = objective_value(&argmin.correlations(), cfg);
    let threshold = match cfg.objective {
        Objective::Lhs => bound_for(cfg.alpha, cfg.inequality, cfg.mode),
        Objective::LhsMinusIntegrand => constant_term(cfg.inequality, cfg.mode),
    };
    let gap = value - threshold;
    Ok(SearchReport {
        inequality: cfg.inequality,
        mode: cfg.mode,
        objective: cfg.objective,
        model,
        alpha: cfg.alpha,
        restarts: cfg.restarts,
        seed: cfg.seed,
        value,
        lhs,
        integrand: integ,
        threshold,
        gap,
        sound: gap >= -CERTIFICATION_TOLERANCE,
        best_restart,
        converged_restarts: outcomes.iter().filter(|o| o.converged).count(),
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequalities::family_one_block;
    use crate::pauli::ghz_state;

    #[test]
    fn campaign_model_b_has_no_failures() {
        let r = run_campaign(LambdaModel::B, 0.05, 5_000, 7).unwrap();
        assert_eq!(r.failures, 0, "{:?}", r.first_failure);
        assert!(r.min_chain_slack >= SLACK_TOLERANCE);
        assert!(r.min_integrand_slack >= INTEGRAND_TOLERANCE);
        assert!(r.min_single_integrand_slack.is_none());
    }

    #[test]
    fn campaign_model_a_at_zero_is_tight() {
        let r = run_campaign(LambdaModel::A, 0.0, 1_000, 3).unwrap();
        assert_eq!(r.failures, 0);
        assert!(r.min_integrand_slack.abs() < 1e-9);
        assert_eq!(r.min_single_integrand_slack, Some(0.0));
    }

    #[test]
    fn campaign_is_deterministic_and_monotone() {
        let a = run_campaign(LambdaModel::B, 0.2, 300, 11).unwrap();
        let b = run_campaign(LambdaModel::B, 0.2, 300, 11).unwrap();
        assert_eq!(a, b);
        let longer = run_campaign(LambdaModel::B, 0.2, 600, 11).unwrap();
        assert!(longer.min_chain_slack <= a.min_chain_slack);
        assert!(longer.min_integrand_slack <= a.min_integrand_slack);
        assert!(longer.min_probability <= a.min_probability);
    }

    #[test]
    fn campaign_rejects_empty_input() {
        assert!(run_campaign(LambdaModel::A, 0.1, 0, 1).is_err());
        assert!(run_campaign_grid(LambdaModel::A, &[], 10, 1).is_err());
    }

    #[test]
    fn chart_decoding() {
        let l = decode_chart(LambdaModel::B, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
            .unwrap();
        match &l {
            LambdaAssignment::ProductPairs { front, .. } => assert!((front.norm() - 1.0).abs() < 1e-15),
            _ => panic!("wrong model"),
        }
        assert!(decode_chart(LambdaModel::B, &[0.0; 14]).is_none());
        let a = decode_chart(LambdaModel::A, &[0.0; 8]).unwrap();
        assert_eq!(a, LambdaAssignment::ProductQubits { bloch: [BlochVector::axis(3); 4] });
    }

    #[test]
    fn objective_invariant_under_global_phase() {
        let lambda = sample_lambda(LambdaModel::B, 4, 2);
        let LambdaAssignment::ProductPairs { front, back } = &lambda else { panic!() };
        let phase = Complex64::from_polar(1.0, 0.7);
        let rotate = |s: &PureState| PureState::new(s.amplitudes().iter().map(|a| a * phase).collect()).unwrap();
        let rotated = LambdaAssignment::product_pairs(rotate(front), rotate(back)).unwrap();
        let cfg = SearchConfig::new(0.0, Inequality::Two, Mode::Rederived);
        let (v1, ..) = objective_value(&lambda.correlations(), &cfg);
        let (v2, ..) = objective_value(&rotated.correlations(), &cfg);
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn family_one_block_symmetric_under_pair_exchange_at_zero() {
        for idx in 0..50 {
            let lambda = sample_lambda(LambdaModel::B, 6, idx);
            let LambdaAssignment::ProductPairs { front, back } = &lambda else { panic!() };
            let swapped = LambdaAssignment::product_pairs(back.clone(), front.clone()).unwrap();
            let x = family_one_block(&lambda.correlations(), 0.0);
            let y = family_one_block(&swapped.correlations(), 0.0);
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_is_not_a_hidden_variable_point() {
        // the quantum value sits on the bound at α = 0 but no product λ reaches it
        let t = crate::pauli::correlation_tensor(&ghz_state(4).unwrap().density()).unwrap();
        assert!((lhs_for(&t, 0.0, Inequality::Two, Mode::Rederived) + 44.0).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic_and_sound() {
        let mut cfg = SearchConfig::new(0.05, Inequality::Two, Mode::Rederived);
        cfg.restarts = 4;
        cfg.seed = 9;
        let a = minimize_leggett_lhs(&cfg).unwrap();
        let b = minimize_leggett_lhs(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.sound, "gap {}", a.gap);
        cfg.restarts = 0;
        assert!(minimize_leggett_lhs(&cfg).is_err());
    }

    #[test]
    fn search_one_qubit_inequality() {
        let mut cfg = SearchConfig::new(0.0, Inequality::One, Mode::Paper);
        cfg.restarts = 8;
        let r = minimize_leggett_lhs(&cfg).unwrap();
        assert_eq!(r.model, LambdaModel::A);
        assert!(r.sound);
    }
}
