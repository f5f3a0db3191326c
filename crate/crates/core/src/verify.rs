//! The property suites behind `leggett verify`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::lambda::{derive_seed, family_one_moduli, sample_lambda, taxi_norm, LambdaAssignment, LambdaModel};
use crate::pauli::{haar_pure_with, two_qubit_tensor, PureState};
use crate::search::{run_campaign_grid, CampaignReport};

pub const PURITY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_PURITY_STATES: usize = 10_000;
pub const DEFAULT_GRID_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub checks: u64,
    /// Largest deviation seen, in the suite's own units.
    pub worst_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub samples: u64,
    pub passed: bool,
    pub suites: Vec<SuiteOutcome>,
    pub campaigns: Vec<CampaignReport>,
}

/// `n` evenly spaced angles covering `[-π/4, π/4]`.
pub fn default_alpha_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| -FRAC_PI_4 + FRAC_PI_2 * k as f64 / (n - 1) as f64).collect()
}

fn maximally_entangled(u: &PureState) -> PureState {
    // (|0>|u> + |1>|u⊥>)/√2 with u⊥ = (-ū1, ū0)
    let a = u.amplitudes();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let perp = [-a[1].conj(), a[0].conj()];
    let amps = vec![a[0] * h, a[1] * h, perp[0] * h, perp[1] * h];
    PureState::normalized(amps).expect("nonzero")
}

/// `ΣT² = 4` for every pure two-qubit state, `1 ≤ Σ_{i,j≥1} T² ≤ 3`, with
/// product states at 1 and maximally entangled states at 3.
pub fn purity_suite(states: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut worst = 0.0f64;
    let mut passed = true;
    let mut checks = 0u64;
    for k in 0..states as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
        let t = two_qubit_tensor(&haar_pure_with(&mut rng, 4)?)?;
        let total = (t.square_sum() - 4.0).abs();
        let corr = t.correlation_square_sum();
        let outside = (1.0 - corr).max(corr - 3.0).max(0.0);
        worst = worst.max(total).max(outside);
        passed &= total < PURITY_TOLERANCE && outside <= PURITY_TOLERANCE;

        let u = haar_pure_with(&mut rng, 2)?;
        let v = haar_pure_with(&mut rng, 2)?;
        let product = (two_qubit_tensor(&u.tensor(&v)?)?.correlation_square_sum() - 1.0).abs();
        let bell = (two_qubit_tensor(&maximally_entangled(&u))?.correlation_square_sum() - 3.0).abs();
        worst = worst.max(product).max(bell);
        passed &= product < PURITY_TOLERANCE && bell < PURITY_TOLERANCE;
        checks += 4;
    }
    Ok(SuiteOutcome { name: "purity_identities", passed, checks, worst_deviation: worst })
}

/// For single-qubit λ the family-one moduli equal `2|sin 2α|` times the taxi
/// norm of the first Bloch vector, which is at least 1.
pub fn taxi_suite(samples: u64, seed: u64, alphas: &[f64]) -> Result<SuiteOutcome> {
    let mut worst = 0.0f64;
    let mut passed = true;
    let mut checks = 0u64;
    for k in 0..samples {
        let lambda = sample_lambda(LambdaModel::A, seed, k);
        let LambdaAssignment::ProductQubits { bloch } = &lambda else { unreachable!() };
        let taxi = taxi_norm(bloch[0].components())?;
        passed &= taxi >= 1.0 - PURITY_TOLERANCE;
        worst = worst.max(1.0 - taxi);
        let corr = lambda.correlations();
        for &alpha in alphas {
            let expected = 2.0 * (2.0 * alpha).sin().abs() * taxi;
            let dev = (family_one_moduli(&corr, alpha) - expected).abs();
            worst = worst.max(dev);
            passed &= dev < 1e-12;
            checks += 1;
        }
    }
    Ok(SuiteOutcome { name: "taxi_lemma", passed, checks, worst_deviation: worst })
}

fn campaign_outcome(name: &'static str, r: &CampaignReport) -> SuiteOutcome {
    SuiteOutcome {
        name,
        passed: r.passed(),
        checks: r.samples * r.alphas.len() as u64 * r.contexts_per_alpha as u64,
        worst_deviation: (-r.min_chain_slack).max(-r.min_integrand_slack).max(-r.min_probability).max(0.0),
    }
}

/// Chain theorems, positivity and integrand bounds for both λ models, then
/// the purity and taxi identities.
pub fn run_property_suites(samples: u64, seed: u64, alphas: &[f64]) -> Result<VerifyReport> {
    let a = run_campaign_grid(LambdaModel::A, alphas, samples, seed)?;
    let b = run_campaign_grid(LambdaModel::B, alphas, samples, seed)?;
    let suites = vec![
        campaign_outcome("chain_model_a", &a),
        campaign_outcome("chain_model_b", &b),
        purity_suite(DEFAULT_PURITY_STATES, seed)?,
        taxi_suite(samples.min(10_000), seed, alphas)?,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { seed, samples, passed, suites, campaigns: vec![a, b] })
}
