//! Angle sweeps, violation endpoints and noise thresholds.
//!
//! Every numeric answer is paired with a closed form. On `α ∈ [0, π/2]` the
//! margin of either inequality for any fixed state is `a + b cos 2α + c sin 2α`
//! (the bound's `|sin 2α|` is just `sin 2α` there), so three samples at
//! `α = 0, π/4, π/2` determine it completely. The closed forms below are
//! built from those samples alone and never see the root-finders' iterates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{bound_for, lhs_for, verdict_with, Inequality, Mode};
use crate::pauli::{correlation_tensor, ghz_state, mix_white_noise, CorrelationTensor, DensityOperator};

pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_NOISE_TOLERANCE: f64 = 1e-8;
/// Interval width at which the inner golden-section search stops.
pub const GOLDEN_TOLERANCE: f64 = 1e-12;
pub const NOISE_BRACKET: (f64, f64) = (0.0, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    Ghz,
    NoisyGhz { p: f64 },
    MaximallyMixed,
}

impl StateSpec {
    pub fn density(&self) -> Result<DensityOperator> {
        match *self {
            Self::Ghz => Ok(ghz_state(4)?.density()),
            Self::NoisyGhz { p } => mix_white_noise(&ghz_state(4)?.density(), p),
            Self::MaximallyMixed => DensityOperator::maximally_mixed(4),
        }
    }

    /// Correlation tensor computed from the simulated density matrix.
    pub fn tensor(&self) -> Result<CorrelationTensor> {
        correlation_tensor(&self.density()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl AlphaGrid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Grid(format!("need at least 2 steps, got {steps}")));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::Grid(format!("empty or inverted interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.hi } else { self.lo + (self.hi - self.lo) * k as f64 / last })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha_rad: f64,
    pub alpha_over_pi: f64,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub state: StateSpec,
    pub inequality: Inequality,
    pub mode: Mode,
    pub grid: AlphaGrid,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str = "alpha_rad,alpha_over_pi,lhs,bound,margin,violated";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.alpha_rad, r.alpha_over_pi, r.lhs, r.bound, r.margin, r.violated
            ));
        }
        out
    }
}

pub fn sweep_alpha(state: &StateSpec, which: Inequality, mode: Mode, grid: AlphaGrid) -> Result<SweepResult> {
    let grid = AlphaGrid::new(grid.lo, grid.hi, grid.steps)?;
    let t = state.tensor()?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|alpha| {
            let v = verdict_with(&t, alpha, which, mode);
            SweepRow {
                alpha_rad: alpha,
                alpha_over_pi: alpha / PI,
                lhs: v.lhs,
                bound: v.bound,
                margin: v.margin,
                violated: v.violated,
            }
        })
        .collect();
    Ok(SweepResult { state: *state, inequality: which, mode, grid, rows })
}

pub fn margin(t: &CorrelationTensor, alpha: f64, which: Inequality, mode: Mode) -> f64 {
    bound_for(alpha, which, mode) - lhs_for(t, alpha, which, mode)
}

/// `a + b cos θ + c sin θ` with `θ = 2α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sinusoid {
    /// Fits from values at `α = 0, π/4, π/2`.
    pub fn from_samples(f: impl Fn(f64) -> f64) -> Self {
        let (f0, f1, f2) = (f(0.0), f(FRAC_PI_4), f(FRAC_PI_2));
        let a = (f0 + f2) / 2.0;
        Self { a, b: (f0 - f2) / 2.0, c: f1 - a }
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let t = 2.0 * alpha;
        self.a + self.b * t.cos() + self.c * t.sin()
    }

    pub fn amplitude(&self) -> f64 {
        self.b.hypot(self.c)
    }

    pub fn argmax(&self) -> f64 {
        self.c.atan2(self.b) / 2.0
    }

    pub fn max(&self) -> f64 {
        self.a + self.amplitude()
    }

    /// Zero of the descending flank after the maximum.
    pub fn falling_root(&self) -> Option<f64> {
        let r = self.amplitude();
        if r == 0.0 || (self.a / r).abs() > 1.0 {
            return None;
        }
        Some((self.c.atan2(self.b) + (-self.a / r).acos()) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    AlphaEndpoint,
    NoiseP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub quantity: Quantity,
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub tolerance: f64,
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxViolation {
    pub alpha: f64,
    pub alpha_over_pi: f64,
    pub margin: f64,
    pub iterations: usize,
    pub closed_form_alpha: f64,
    pub closed_form_margin: f64,
}

/// Golden-section maximization of a unimodal function.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = (lo + hi) / 2.0;
    (x, f(x), iterations)
}

/// Bisection for the point where `f` turns from positive to non-positive.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64, usize)> {
    if !(f(lo) > 0.0 && f(hi) <= 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        let mid = (lo + hi) / 2.0;
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi, iterations))
}

pub fn max_violation_with(t: &CorrelationTensor, which: Inequality, mode: Mode, tol: f64) -> MaxViolation {
    let m = |a| margin(t, a, which, mode);
    let (alpha, value, iterations) = golden_max(m, 0.0, FRAC_PI_4, tol);
    let fit = Sinusoid::from_samples(m);
    MaxViolation {
        alpha,
        alpha_over_pi: alpha / PI,
        margin: value,
        iterations,
        closed_form_alpha: fit.argmax(),
        closed_form_margin: fit.max(),
    }
}

pub fn max_violation(state: &StateSpec, which: Inequality, mode: Mode, tol: f64) -> Result<MaxViolation> {
    Ok(max_violation_with(&state.tensor()?, which, mode, tol))
}

/// Upper end of the violated α-interval on `[0, π/4]`.
///
/// The search brackets between the margin's peak and `π/4`, so states whose
/// violation window does not start at `α = 0` are handled as well.
pub fn violation_range_with(t: &CorrelationTensor, which: Inequality, mode: Mode, tol: f64) -> Result<ThresholdResult> {
    let m = |a| margin(t, a, which, mode);
    let (peak, _, _) = golden_max(m, 0.0, FRAC_PI_4, GOLDEN_TOLERANCE);
    let (lo, hi, iterations) = bisect(m, peak, FRAC_PI_4, tol)?;
    Ok(ThresholdResult {
        quantity: Quantity::AlphaEndpoint,
        value: (lo + hi) / 2.0,
        bracket: (lo, hi),
        iterations,
        tolerance: tol,
        closed_form: Sinusoid::from_samples(m).falling_root(),
    })
}

pub fn violation_range(state: &StateSpec, which: Inequality, mode: Mode, tol: f64) -> Result<ThresholdResult> {
    violation_range_with(&state.tensor()?, which, mode, tol)
}

/// Largest violation over `α ∈ [0, π/4]` after mixing a fraction `p` of
/// white noise into the GHZ state, with the noise applied analytically.
pub fn noisy_peak_margin(ghz: &CorrelationTensor, p: f64, which: Inequality, mode: Mode) -> Result<f64> {
    let t = ghz.with_white_noise(p)?;
    Ok(golden_max(|a| margin(&t, a, which, mode), 0.0, FRAC_PI_4, GOLDEN_TOLERANCE).1)
}

/// Largest `|Δmargin|` over a few angles between analytic tensor scaling and
/// an explicit density-matrix mixture.
pub fn noise_path_discrepancy(p: f64, which: Inequality, mode: Mode) -> Result<f64> {
    let ghz = StateSpec::Ghz.tensor()?;
    let analytic = ghz.with_white_noise(p)?;
    let simulated = StateSpec::NoisyGhz { p }.tensor()?;
    Ok([0.0, 0.01, 0.05, 0.1, 0.3, FRAC_PI_4]
        .iter()
        .map(|&a| (margin(&analytic, a, which, mode) - margin(&simulated, a, which, mode)).abs())
        .fold(0.0, f64::max))
}

/// Smallest white-noise fraction that removes every violation.
pub fn noise_threshold(which: Inequality, mode: Mode, tol: f64) -> Result<ThresholdResult> {
    let ghz = StateSpec::Ghz.tensor()?;
    let peak = |p: f64| noisy_peak_margin(&ghz, p, which, mode).expect("p inside [0, 1]");
    let (lo, hi, iterations) = bisect(peak, NOISE_BRACKET.0, NOISE_BRACKET.1, tol)?;
    Ok(ThresholdResult {
        quantity: Quantity::NoiseP,
        value: (lo + hi) / 2.0,
        bracket: (lo, hi),
        iterations,
        tolerance: tol,
        closed_form: noise_closed_form(&ghz, which, mode),
    })
}

/// Solves `max_α margin = 0` for the noise fraction from sinusoid fits of the
/// left-hand side (which scales with `1 - p`) and of the bound.
fn noise_closed_form(ghz: &CorrelationTensor, which: Inequality, mode: Mode) -> Option<f64> {
    let l = Sinusoid::from_samples(|a| lhs_for(ghz, a, which, mode));
    let b0 = bound_for(0.0, which, mode);
    let bs = bound_for(FRAC_PI_4, which, mode) - b0;
    // (b0 - q l.a)² = (bs - q l.c)² + (q l.b)², with b0 - q l.a ≤ 0
    let qa = l.c * l.c + l.b * l.b - l.a * l.a;
    let qb = 2.0 * b0 * l.a - 2.0 * bs * l.c;
    let qc = bs * bs - b0 * b0;
    let roots: Vec<f64> = if qa.abs() < 1e-15 {
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        vec![(-qb + disc.sqrt()) / (2.0 * qa), (-qb - disc.sqrt()) / (2.0 * qa)]
    };
    roots
        .into_iter()
        .filter(|&q| q > 0.0 && q <= 1.0 && b0 - q * l.a <= 0.0)
        .map(|q| 1.0 - q)
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz() -> CorrelationTensor {
        StateSpec::Ghz.tensor().unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(AlphaGrid::new(0.0, 1.0, 1).is_err());
        assert!(AlphaGrid::new(1.0, 0.0, 10).is_err());
        assert!(AlphaGrid::new(0.5, 0.5, 10).is_err());
        let g = AlphaGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn sweep_ineq1_violated_below_endpoint() {
        let grid = AlphaGrid::new(0.0, FRAC_PI_4, 1000).unwrap();
        let r = sweep_alpha(&StateSpec::Ghz, Inequality::One, Mode::Paper, grid).unwrap();
        assert_eq!(r.rows.len(), 1000);
        assert!(r.rows.windows(2).all(|w| w[0].alpha_rad < w[1].alpha_rad));
        let star = (1.0f64 / 3.0).atan();
        for row in &r.rows {
            let expected = row.alpha_rad > 0.0 && row.alpha_rad < star;
            assert_eq!(row.violated, expected, "α = {}", row.alpha_rad);
        }
        assert!(r.rows[0].margin.abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_never_violates() {
        let grid = AlphaGrid::new(-FRAC_PI_4, FRAC_PI_4, 101).unwrap();
        for (which, mode) in [(Inequality::One, Mode::Paper), (Inequality::Two, Mode::Paper), (Inequality::Two, Mode::Rederived)] {
            let r = sweep_alpha(&StateSpec::MaximallyMixed, which, mode, grid).unwrap();
            assert!(r.rows.iter().all(|row| !row.violated && row.lhs.abs() < 1e-12));
        }
    }

    #[test]
    fn csv_layout() {
        let r = sweep_alpha(&StateSpec::Ghz, Inequality::One, Mode::Paper, AlphaGrid::new(0.0, 0.1, 3).unwrap()).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "alpha_rad,alpha_over_pi,lhs,bound,margin,violated");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 6);
    }

    #[test]
    fn endpoints() {
        let t = ghz();
        let cases = [
            (Inequality::One, Mode::Paper, (1.0f64 / 3.0).atan()),
            (Inequality::Two, Mode::Paper, (1.0f64 / 11.0).atan()),
            (Inequality::Two, Mode::Rederived, (1.0f64 / 7.0).atan()),
        ];
        for (which, mode, exact) in cases {
            let r = violation_range_with(&t, which, mode, DEFAULT_ROOT_TOLERANCE).unwrap();
            assert!((r.value - exact).abs() < 1e-9, "{which} {mode}: {}", r.value);
            assert!((r.closed_form.unwrap() - exact).abs() < 1e-12);
            assert!(r.bracket.1 - r.bracket.0 <= r.tolerance);
            assert!(margin(&t, r.bracket.0, which, mode) > 0.0);
            assert!(margin(&t, r.bracket.1, which, mode) <= 0.0);
        }
    }

    #[test]
    fn maxima() {
        let t = ghz();
        let cases = [
            (Inequality::One, Mode::Paper, 2.0 * 10f64.sqrt() - 6.0, (1.0f64 / 3.0).atan() / 2.0),
            (Inequality::Two, Mode::Paper, 4.0 * 122f64.sqrt() - 44.0, (4.0f64 / 44.0).atan() / 2.0),
            (Inequality::Two, Mode::Rederived, 20.0 * 2f64.sqrt() - 28.0, (4.0f64 / 28.0).atan() / 2.0),
        ];
        for (which, mode, value, at) in cases {
            let m = max_violation_with(&t, which, mode, DEFAULT_ROOT_TOLERANCE);
            assert!((m.margin - value).abs() < 1e-12, "{which} {mode}: {}", m.margin);
            assert!((m.closed_form_margin - value).abs() < 1e-12);
            assert!((m.alpha - at).abs() < 1e-8);
            assert!((m.closed_form_alpha - at).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_thresholds() {
        let one = noise_threshold(Inequality::One, Mode::Paper, DEFAULT_NOISE_TOLERANCE).unwrap();
        assert!((one.value - (1.0 - 2.0 * 2f64.sqrt() / 3.0)).abs() < 1e-8);
        assert!((one.closed_form.unwrap() - one.value).abs() < 1e-8);

        let paper = noise_threshold(Inequality::Two, Mode::Paper, DEFAULT_NOISE_TOLERANCE).unwrap();
        // 912 q² + 4864 q - 5760 = 0
        let q = (-4864.0 + (4864f64.powi(2) + 4.0 * 912.0 * 5760.0).sqrt()) / (2.0 * 912.0);
        assert!((paper.value - (1.0 - q)).abs() < 1e-8);
        assert!((paper.closed_form.unwrap() - paper.value).abs() < 1e-8);
        assert!((paper.value - 0.00239).abs() < 2e-4);

        let rederived = noise_threshold(Inequality::Two, Mode::Rederived, DEFAULT_NOISE_TOLERANCE).unwrap();
        assert!((rederived.closed_form.unwrap() - rederived.value).abs() < 1e-8);
    }

    #[test]
    fn full_noise_kills_violation() {
        let t = ghz();
        for (which, mode) in [(Inequality::One, Mode::Paper), (Inequality::Two, Mode::Rederived)] {
            assert!(noisy_peak_margin(&t, 1.0, which, mode).unwrap() < 0.0);
        }
    }

    #[test]
    fn noise_paths_agree() {
        for p in [0.0, 0.00239, 0.05, 0.5] {
            assert!(noise_path_discrepancy(p, Inequality::Two, Mode::Paper).unwrap() < 1e-10);
            assert!(noise_path_discrepancy(p, Inequality::One, Mode::Paper).unwrap() < 1e-10);
        }
    }

    #[test]
    fn no_violation_is_reported() {
        let t = StateSpec::MaximallyMixed.tensor().unwrap();
        assert!(matches!(
            violation_range_with(&t, Inequality::One, Mode::Paper, 1e-10),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx, _) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx.abs() < 1e-18);
    }
}
