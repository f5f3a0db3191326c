//! Quantum-side values of the one-qubit and two-qubit Leggett inequalities.
//!
//! Both inequalities are written `lhs ≥ bound(α)`; a state violates one when
//! `margin = bound - lhs` is positive. The left-hand sides are evaluated by
//! exact contraction against any [`Correlator`], so the same code serves the
//! quantum tensor and per-λ hidden-variable statistics.
//!
//! The two-qubit inequality has two constant conventions:
//!
//! * `Rederived`: family-two contexts enter with weight 2 and the bound is
//!   `-44 + 4|sin 2α|` (six family-one positivity constants of 2 plus eight
//!   family-two constants of 4).
//! * `Paper`: family-two contexts enter with weight 4 and the bound is
//!   `-76 + 4|sin 2α|`. For the GHZ state the left-hand side is then
//!   `-32 - 44 cos 2α`. It is a valid (looser) hidden-variable inequality:
//!   doubling the family-two block doubles its constant to 64 and its
//!   moduli, which only strengthens the right-hand side that is then
//!   dropped to `4|sin 2α|`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{correlation_tensor, Correlator, DensityOperator};
use crate::settings::{family_one, family_two, triangle_swap};

/// A margin above this counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inequality {
    /// One-qubit subsystem, family one only.
    #[serde(rename = "1")]
    One,
    /// Two-qubit subsystem, both families.
    #[serde(rename = "2")]
    Two,
}

impl std::str::FromStr for Inequality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::One),
            "2" => Ok(Self::Two),
            other => Err(Error::Unknown { kind: "inequality", value: other.to_string() }),
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "1",
            Self::Two => "2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paper,
    Rederived,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "rederived" => Ok(Self::Rederived),
            other => Err(Error::Unknown { kind: "mode", value: other.to_string() }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Rederived => "rederived",
        })
    }
}

impl Mode {
    fn family_two_weight(self) -> f64 {
        match self {
            Self::Paper => 4.0,
            Self::Rederived => 2.0,
        }
    }

    /// Constant term of the two-qubit bound.
    pub fn constant(self) -> f64 {
        match self {
            Self::Paper => -76.0,
            Self::Rederived => -44.0,
        }
    }
}

/// `Σ_i <A_i B_i C_i D_i> + <A'_i B_i C_i D_i>` over family one.
pub fn leggett1_lhs<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    family_one(alpha).iter().map(|s| corr.correlate(&[s.a_sum(), s.b.slot(), s.c.slot(), s.d.slot()])).sum()
}

pub fn leggett1_bound(alpha: f64) -> f64 {
    -6.0 + 2.0 * (2.0 * alpha).sin().abs()
}

/// Family-one part of the two-qubit left-hand side: plain and side-swapped.
pub fn family_one_block<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    family_one(alpha)
        .iter()
        .map(|s| {
            let t = triangle_swap(s).expect("family-one set");
            corr.correlate(&[s.a_sum(), s.b.slot(), s.c.slot(), s.d.slot()])
                + corr.correlate(&[t.a.slot(), t.b_sum(), t.c.slot(), t.d.slot()])
        })
        .sum()
}

/// `Σ_{i=4..7} <(A_i+A'_i)(B_i+B'_i)C_i D_i>` (unweighted).
pub fn family_two_block<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    family_two(alpha).iter().map(|s| corr.correlate(&[s.a_sum(), s.b_sum(), s.c.slot(), s.d.slot()])).sum()
}

/// Two-qubit left-hand side with family two at weight 2.
pub fn leggett2_lhs<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    leggett2_lhs_mode(corr, alpha, Mode::Rederived)
}

pub fn leggett2_lhs_mode<C: Correlator + ?Sized>(corr: &C, alpha: f64, mode: Mode) -> f64 {
    family_one_block(corr, alpha) + mode.family_two_weight() * family_two_block(corr, alpha)
}

pub fn leggett2_bound(alpha: f64, mode: Mode) -> f64 {
    mode.constant() + 4.0 * (2.0 * alpha).sin().abs()
}

/// GHZ left-hand side with family two at weight 4.
pub fn ghz_paper_closed_form(alpha: f64) -> f64 {
    -32.0 - 44.0 * (2.0 * alpha).cos()
}

/// GHZ left-hand side obtained by contracting the per-context averages.
pub fn ghz_rederived_closed_form(alpha: f64) -> f64 {
    -16.0 - 28.0 * (2.0 * alpha).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub inequality: Inequality,
    pub mode: Mode,
    pub alpha: f64,
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    pub violated: bool,
}

pub fn lhs_for<C: Correlator + ?Sized>(corr: &C, alpha: f64, which: Inequality, mode: Mode) -> f64 {
    match which {
        Inequality::One => leggett1_lhs(corr, alpha),
        Inequality::Two => leggett2_lhs_mode(corr, alpha, mode),
    }
}

pub fn bound_for(alpha: f64, which: Inequality, mode: Mode) -> f64 {
    match which {
        Inequality::One => leggett1_bound(alpha),
        Inequality::Two => leggett2_bound(alpha, mode),
    }
}

pub fn verdict_with<C: Correlator + ?Sized>(corr: &C, alpha: f64, which: Inequality, mode: Mode) -> InequalityVerdict {
    let lhs = lhs_for(corr, alpha, which, mode);
    let bound = bound_for(alpha, which, mode);
    let margin = bound - lhs;
    InequalityVerdict { inequality: which, mode, alpha, lhs, bound, margin, violated: margin > VIOLATION_TOLERANCE }
}

pub fn verdict(state: &DensityOperator, alpha: f64, which: Inequality, mode: Mode) -> Result<InequalityVerdict> {
    let t = correlation_tensor(state)?;
    Ok(verdict_with(&t, alpha, which, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{ghz_state, mix_white_noise, CorrelationTensor};
    use crate::settings::{BlochVector, IDENTITY_SLOT};
    use std::f64::consts::FRAC_PI_4;

    fn ghz() -> CorrelationTensor {
        correlation_tensor(&ghz_state(4).unwrap().density()).unwrap()
    }

    #[test]
    fn leggett1_ghz_values() {
        let t = ghz();
        for k in 0..50 {
            let alpha = -0.8 + 0.032 * k as f64;
            assert!((leggett1_lhs(&t, alpha) + 6.0 * (2.0 * alpha).cos()).abs() < 1e-12);
        }
        assert!((leggett1_lhs(&t, 0.0) + 6.0).abs() < 1e-12);
        let mixed = correlation_tensor(&DensityOperator::maximally_mixed(4).unwrap()).unwrap();
        assert_eq!(leggett1_lhs(&mixed, 0.3), 0.0);
    }

    #[test]
    fn leggett1_bound_values() {
        assert_eq!(leggett1_bound(0.0), -6.0);
        assert!((leggett1_bound(FRAC_PI_4) + 4.0).abs() < 1e-15);
    }

    #[test]
    fn leggett1_violation_range() {
        let t = ghz();
        let edge = (1.0f64 / 3.0).atan();
        for alpha in [0.01, 0.1, edge - 1e-6] {
            assert!(verdict_with(&t, alpha, Inequality::One, Mode::Paper).violated, "{alpha}");
        }
        for alpha in [0.0, edge + 1e-6, 0.5] {
            assert!(!verdict_with(&t, alpha, Inequality::One, Mode::Paper).violated, "{alpha}");
        }
    }

    #[test]
    fn swapped_family_one_term() {
        // <A(B+B')CD> with the side swap equals -2cos2α for GHZ
        let t = ghz();
        for alpha in [0.0, 0.13, 0.6] {
            for s in family_one(alpha) {
                let sw = triangle_swap(&s).unwrap();
                let v = t.correlate(&[sw.a.slot(), sw.b_sum(), sw.c.slot(), sw.d.slot()]);
                assert!((v + 2.0 * (2.0 * alpha).cos()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ghz_per_context_averages() {
        let t = ghz();
        let alpha: f64 = 0.27;
        let (c2, cos2) = ((2.0 * alpha).cos(), alpha.cos().powi(2));
        let f2 = family_two(alpha);
        let avg = |s: &crate::settings::SettingSet, a: BlochVector, b: BlochVector| {
            t.correlate(&[a.slot(), b.slot(), s.c.slot(), s.d.slot()])
        };
        let (s4, s5, s6, s7) = (&f2[0], &f2[1], &f2[2], &f2[3]);
        let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
        assert!(close(avg(s4, s4.a, s4.b_prime.unwrap()), -1.0));
        assert!(close(avg(s4, s4.a_prime.unwrap(), s4.b), -1.0));
        assert!(close(avg(s6, s6.a, s6.b), -1.0));
        assert!(close(avg(s6, s6.a_prime.unwrap(), s6.b_prime.unwrap()), -1.0));
        assert!(close(avg(s4, s4.a, s4.b), -c2));
        assert!(close(avg(s4, s4.a_prime.unwrap(), s4.b_prime.unwrap()), -c2));
        assert!(close(avg(s6, s6.a_prime.unwrap(), s6.b), -c2));
        assert!(close(avg(s6, s6.a, s6.b_prime.unwrap()), -c2));
        for s in [s5, s7] {
            for a in [s.a, s.a_prime.unwrap()] {
                for b in [s.b, s.b_prime.unwrap()] {
                    assert!(close(avg(s, a, b), -cos2));
                }
            }
        }
    }

    #[test]
    fn leggett2_ghz_closed_forms() {
        let t = ghz();
        assert!((leggett2_lhs(&t, 0.0) + 44.0).abs() < 1e-12);
        for k in 0..60 {
            let alpha = -0.9 + 0.03 * k as f64;
            assert!((leggett2_lhs(&t, alpha) - ghz_rederived_closed_form(alpha)).abs() < 1e-12);
            let paper = leggett2_lhs_mode(&t, alpha, Mode::Paper);
            assert!((paper - ghz_paper_closed_form(alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn leggett2_bounds() {
        assert_eq!(leggett2_bound(0.0, Mode::Paper), -76.0);
        assert_eq!(leggett2_bound(0.0, Mode::Rederived), -44.0);
        assert!("other".parse::<Mode>().is_err());
        assert!("3".parse::<Inequality>().is_err());
        let t = ghz();
        for mode in [Mode::Paper, Mode::Rederived] {
            let v = verdict_with(&t, 0.0, Inequality::Two, mode);
            assert!(v.margin.abs() < 1e-12);
            assert!(!v.violated);
        }
    }

    #[test]
    fn paper_mode_margin_identity_and_maximum() {
        let t = ghz();
        let mut best = f64::NEG_INFINITY;
        for k in 0..=20_000 {
            let alpha = 0.2 * k as f64 / 20_000.0;
            let v = verdict_with(&t, alpha, Inequality::Two, Mode::Paper);
            let expected = -44.0 + 4.0 * (2.0 * alpha).sin().abs() + 44.0 * (2.0 * alpha).cos();
            assert!((v.margin - expected).abs() < 1e-12);
            best = best.max(v.margin);
        }
        assert!((best - ((44.0f64).powi(2) + 16.0).sqrt() + 44.0).abs() < 1e-7);
    }

    #[test]
    fn verdict_at_paper_mode_optimum() {
        let rho = ghz_state(4).unwrap().density();
        let alpha = 0.5 * (1.0f64 / 11.0).atan();
        let v = verdict(&rho, alpha, Inequality::Two, Mode::Paper).unwrap();
        assert!((v.margin - (4.0 * 122f64.sqrt() - 44.0)).abs() < 1e-12);
        assert!((v.margin - 0.181444).abs() < 1e-6);
        let edge = (1.0f64 / 11.0).atan();
        assert!(verdict(&rho, edge - 1e-6, Inequality::Two, Mode::Paper).unwrap().violated);
        assert!(!verdict(&rho, edge + 1e-6, Inequality::Two, Mode::Paper).unwrap().violated);
        let edge = (1.0f64 / 7.0).atan();
        assert!(verdict(&rho, edge - 1e-6, Inequality::Two, Mode::Rederived).unwrap().violated);
        assert!(!verdict(&rho, edge + 1e-6, Inequality::Two, Mode::Rederived).unwrap().violated);
    }

    #[test]
    fn white_noise_scales_lhs() {
        let rho = ghz_state(4).unwrap().density();
        for p in [0.0, 0.003, 0.2, 1.0] {
            let noisy = mix_white_noise(&rho, p).unwrap();
            for alpha in [0.0, 0.05, 0.4] {
                for (which, mode) in
                    [(Inequality::One, Mode::Paper), (Inequality::Two, Mode::Paper), (Inequality::Two, Mode::Rederived)]
                {
                    let clean = verdict(&rho, alpha, which, mode).unwrap().lhs;
                    let mixed = verdict(&noisy, alpha, which, mode).unwrap().lhs;
                    assert!((mixed - (1.0 - p) * clean).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn identity_slots_reduce_to_marginals() {
        let t = ghz();
        let z = BlochVector::axis(3).slot();
        assert!((t.correlate(&[z, z, IDENTITY_SLOT, IDENTITY_SLOT]) - 1.0).abs() < 1e-12);
    }
}
