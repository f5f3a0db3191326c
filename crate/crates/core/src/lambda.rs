//! Hidden-variable statistics for a single value of the hidden parameter.
//!
//! Two model classes are supported. Model A assigns a pure state to every
//! qubit; model B assigns a pure two-qubit state to the pair (1, 2) and
//! another to (3, 4). In both cases the four-qubit correlator factorizes
//! over the split, so every average is a product of two small contractions.
//!
//! The chain checks below evaluate, for one λ and one setting set, every
//! positivity-derived inequality that the final Leggett bounds are built
//! from. Each check is reported as a slack (left side minus right side),
//! which must be non-negative for any physical λ.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pauli::{haar_pure_with, two_qubit_tensor, Correlator, PureState, TwoQubitTensor};
use crate::settings::{
    family_one, family_one_with_swaps, family_two, BlochVector, SettingSet, Slot, IDENTITY_SLOT,
    UNIT_TOLERANCE,
};

/// Slack below this is a genuine violation rather than round-off.
pub const SLACK_TOLERANCE: f64 = -1e-10;
/// Outcome probabilities below this count as negative.
pub const PROBABILITY_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LambdaModel {
    /// Four single-qubit pure states.
    A,
    /// Two two-qubit pure states on (1,2) and (3,4).
    B,
}

impl std::str::FromStr for LambdaModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Self::A),
            "b" | "B" => Ok(Self::B),
            other => Err(Error::Unknown { kind: "model", value: other.to_string() }),
        }
    }
}

impl fmt::Display for LambdaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
        })
    }
}

/// One value of the hidden parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum LambdaAssignment {
    #[serde(rename = "A")]
    ProductQubits { bloch: [BlochVector; 4] },
    #[serde(rename = "B")]
    ProductPairs { front: PureState, back: PureState },
}

impl LambdaAssignment {
    pub fn product_pairs(front: PureState, back: PureState) -> Result<Self> {
        for s in [&front, &back] {
            if s.qubits() != 2 {
                return Err(Error::Dimension { expected: 4, found: s.dim() });
            }
        }
        Ok(Self::ProductPairs { front, back })
    }

    pub fn model(&self) -> LambdaModel {
        match self {
            Self::ProductQubits { .. } => LambdaModel::A,
            Self::ProductPairs { .. } => LambdaModel::B,
        }
    }

    /// Uniform Bloch vectors (model A) or Haar-random pair states (model B).
    pub fn random<R: Rng + ?Sized>(model: LambdaModel, rng: &mut R) -> Self {
        match model {
            LambdaModel::A => Self::ProductQubits { bloch: std::array::from_fn(|_| uniform_sphere(rng)) },
            LambdaModel::B => Self::ProductPairs {
                front: haar_pure_with(rng, 4).expect("dimension 4"),
                back: haar_pure_with(rng, 4).expect("dimension 4"),
            },
        }
    }

    pub fn correlations(&self) -> FactoredCorrelations {
        match self {
            Self::ProductQubits { bloch: [u1, u2, u3, u4] } => FactoredCorrelations {
                front: TwoQubitTensor::product(u1, u2),
                back: TwoQubitTensor::product(u3, u4),
            },
            Self::ProductPairs { front, back } => FactoredCorrelations {
                front: two_qubit_tensor(front).expect("validated pair state"),
                back: two_qubit_tensor(back).expect("validated pair state"),
            },
        }
    }
}

pub fn uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let c: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(v) = BlochVector::normalized(c) {
            return v;
        }
    }
}

/// Seed for sample `index` of a campaign, independent of evaluation order.
pub fn derive_seed(campaign_seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined word
    let mut z = campaign_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_lambda(model: LambdaModel, campaign_seed: u64, index: u64) -> LambdaAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(campaign_seed, index));
    LambdaAssignment::random(model, &mut rng)
}

/// Correlator of a λ: `T_front(s1, s2) · T_back(s3, s4)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoredCorrelations {
    pub front: TwoQubitTensor,
    pub back: TwoQubitTensor,
}

impl Correlator for FactoredCorrelations {
    fn correlate(&self, slots: &[Slot; 4]) -> f64 {
        self.front.contract(&slots[0], &slots[1]) * self.back.contract(&slots[2], &slots[3])
    }

    fn correlation_set(&self, dirs: &[Slot; 4]) -> CorrelationSet {
        let id = IDENTITY_SLOT;
        // pair averages indexed by the two-bit sub-mask of each half
        let front = [1.0, self.front.contract(&dirs[0], &id), self.front.contract(&id, &dirs[1]), self.front.contract(&dirs[0], &dirs[1])];
        let back = [1.0, self.back.contract(&dirs[2], &id), self.back.contract(&id, &dirs[3]), self.back.contract(&dirs[2], &dirs[3])];
        let averages = std::array::from_fn(|mask| front[mask & 3] * back[mask >> 2]);
        CorrelationSet { averages }
    }
}

pub const OBS_A: usize = 1;
pub const OBS_B: usize = 2;
pub const OBS_C: usize = 4;
pub const OBS_D: usize = 8;

/// Averages of all products of the four observables of one context,
/// indexed by subset mask (bit 0 = A … bit 3 = D); mask 0 holds 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSet {
    averages: [f64; 16],
}

impl CorrelationSet {
    pub fn from_correlator<C: Correlator + ?Sized>(corr: &C, dirs: &[Slot; 4]) -> Self {
        corr.correlation_set(dirs)
    }

    /// Hand-built averages; entry 0 is forced to 1.
    pub fn from_averages(mut averages: [f64; 16]) -> Self {
        averages[0] = 1.0;
        Self { averages }
    }

    pub fn get(&self, mask: usize) -> f64 {
        self.averages[mask]
    }

    pub fn averages(&self) -> &[f64; 16] {
        &self.averages
    }
}

fn mask_label(mask: usize) -> String {
    if mask == 0 {
        return "1".to_string();
    }
    ["A", "B", "C", "D"].iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, s)| *s).collect()
}

impl Serialize for CorrelationSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(15))?;
        for mask in 1..16 {
            map.serialize_entry(&mask_label(mask), &self.averages[mask])?;
        }
        map.end()
    }
}

/// Which members of the primed pairs are in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Primes {
    pub a: bool,
    pub b: bool,
}

fn context_slots(set: &SettingSet, primes: Primes) -> [Slot; 4] {
    let pick = |plain: BlochVector, primed: Option<BlochVector>, use_primed: bool| {
        if use_primed { primed.unwrap_or(plain) } else { plain }.slot()
    };
    [
        pick(set.a, set.a_prime, primes.a),
        pick(set.b, set.b_prime, primes.b),
        set.c.slot(),
        set.d.slot(),
    ]
}

/// Averages of the unprimed context `(A, B, C, D)` under λ.
pub fn stats(lambda: &LambdaAssignment, set: &SettingSet) -> CorrelationSet {
    stats_with(lambda, set, Primes::default())
}

pub fn stats_with(lambda: &LambdaAssignment, set: &SettingSet, primes: Primes) -> CorrelationSet {
    CorrelationSet::from_correlator(&lambda.correlations(), &context_slots(set, primes))
}

/// `P(a,b,c,d) = (1/16) Σ_S (Π_{k∈S} s_k) <Π_{k∈S} O_k>`; outcomes are read by sign.
pub fn outcome_probability(cs: &CorrelationSet, outcomes: [i8; 4]) -> f64 {
    let signs = outcomes.map(|s| if s < 0 { -1.0 } else { 1.0 });
    let total: f64 = (0..16)
        .map(|mask| {
            let sign: f64 = (0..4).filter(|k| mask >> k & 1 == 1).map(|k| signs[k]).product();
            sign * cs.averages[mask]
        })
        .sum();
    total / 16.0
}

pub fn all_outcomes() -> impl Iterator<Item = [i8; 4]> {
    (0..16u8).map(|bits| std::array::from_fn(|k| if bits >> k & 1 == 1 { -1 } else { 1 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Positivity {
    pub min_probability: f64,
    pub max_probability: f64,
    pub total: f64,
    pub physical: bool,
}

/// All sixteen outcome probabilities, indexed like [`all_outcomes`].
///
/// The expansion is a Walsh-Hadamard transform of the averages, so it is
/// evaluated with the fast butterfly instead of sixteen separate sums.
pub fn outcome_distribution(cs: &CorrelationSet) -> [f64; 16] {
    let mut p = cs.averages;
    let mut h = 1;
    while h < 16 {
        for start in (0..16).step_by(2 * h) {
            for k in start..start + h {
                let (x, y) = (p[k], p[k + h]);
                p[k] = x + y;
                p[k + h] = x - y;
            }
        }
        h *= 2;
    }
    p.map(|v| v / 16.0)
}

pub fn check_positivity(cs: &CorrelationSet) -> Positivity {
    let probs = outcome_distribution(cs);
    let min_probability = probs.iter().copied().fold(f64::INFINITY, f64::min);
    Positivity {
        min_probability,
        max_probability: probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        total: probs.iter().sum(),
        physical: min_probability >= PROBABILITY_FLOOR,
    }
}

/// Links of the per-λ inequality chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainLink {
    /// `<ABCD> + <AB> + <CD> - |<A> + <BCD> + <B> + <ACD>| + 1 ≥ 0`
    EvenPairPositivity,
    /// `<ABCD> - <AB> - <CD> - |<A> + <BCD> - <B> - <ACD>| + 1 ≥ 0`
    OddPairPositivity,
    /// `<ABCD> - |<A> + <BCD>| + 1 ≥ 0`
    SingleMarginal,
    /// `<ABCD> + <A'BCD> - |<A> - <A'>| + 2 ≥ 0`
    PrimedMarginal,
    /// `<ABCD> + <AB'CD> - |<B> - <B'>| + 2 ≥ 0`, the side-swapped form
    PrimedMarginalSwapped,
    /// `<ABCD> - |<AB> + <CD>| + 1 ≥ 0`
    PairMarginal,
    /// `<(A+A')(B+B')CD> - |<(A+A')(B-B')>| + 4 ≥ 0`
    PrimedPairB,
    /// `<(A+A')(B+B')CD> - |<(A-A')(B+B')>| + 4 ≥ 0`
    PrimedPairA,
}

impl ChainLink {
    pub const ALL: [ChainLink; 8] = [
        Self::EvenPairPositivity,
        Self::OddPairPositivity,
        Self::SingleMarginal,
        Self::PrimedMarginal,
        Self::PrimedMarginalSwapped,
        Self::PairMarginal,
        Self::PrimedPairB,
        Self::PrimedPairA,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkSlack {
    pub link: ChainLink,
    pub primes: Primes,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub set_id: u8,
    pub swapped: bool,
    pub slacks: Vec<LinkSlack>,
    pub min_probability: f64,
    pub max_probability: f64,
    /// Largest `|Σ P - 1|` over the contexts' outcome distributions.
    pub max_total_error: f64,
}

impl ChainReport {
    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn min_slack_of(&self, link: ChainLink) -> Option<f64> {
        self.slacks.iter().filter(|s| s.link == link).map(|s| s.slack).reduce(f64::min)
    }

    pub fn holds(&self) -> bool {
        self.min_slack() >= SLACK_TOLERANCE && self.min_probability >= PROBABILITY_FLOOR
    }
}

fn single_context_slacks(cs: &CorrelationSet, primes: Primes, push: &mut impl FnMut(LinkSlack)) {
    let g = |m| cs.get(m);
    let abcd = g(OBS_A | OBS_B | OBS_C | OBS_D);
    let (ab, cd) = (g(OBS_A | OBS_B), g(OBS_C | OBS_D));
    let (a, b) = (g(OBS_A), g(OBS_B));
    let (bcd, acd) = (g(OBS_B | OBS_C | OBS_D), g(OBS_A | OBS_C | OBS_D));
    let mut emit = |link, slack| push(LinkSlack { link, primes, slack });
    emit(ChainLink::EvenPairPositivity, abcd + ab + cd - (a + bcd + b + acd).abs() + 1.0);
    emit(ChainLink::OddPairPositivity, abcd - ab - cd - (a + bcd - b - acd).abs() + 1.0);
    emit(ChainLink::SingleMarginal, abcd - (a + bcd).abs() + 1.0);
    emit(ChainLink::PairMarginal, abcd - (ab + cd).abs() + 1.0);
}

/// Outcome-distribution extremes over the contexts visited by a chain check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityRange {
    pub min_probability: f64,
    pub max_probability: f64,
    pub max_total_error: f64,
}

/// Evaluates every applicable chain link for one λ and one context, over all
/// combinations of primed observables the context defines.
pub fn check_chain(lambda: &LambdaAssignment, set: &SettingSet) -> ChainReport {
    check_chain_with(&lambda.correlations(), set)
}

pub fn check_chain_with<C: Correlator + ?Sized>(corr: &C, set: &SettingSet) -> ChainReport {
    let mut slacks = Vec::with_capacity(24);
    let range = visit_chain(corr, set, |s| slacks.push(s));
    ChainReport {
        set_id: set.id,
        swapped: set.swapped,
        slacks,
        min_probability: range.min_probability,
        max_probability: range.max_probability,
        max_total_error: range.max_total_error,
    }
}

/// Allocation-free core of [`check_chain_with`]: every slack goes to `sink`.
pub fn visit_chain<C: Correlator + ?Sized>(corr: &C, set: &SettingSet, mut sink: impl FnMut(LinkSlack)) -> ProbabilityRange {
    let a_choices: &[bool] = if set.a_prime.is_some() { &[false, true] } else { &[false] };
    let b_choices: &[bool] = if set.b_prime.is_some() { &[false, true] } else { &[false] };
    let mut range =
        ProbabilityRange { min_probability: f64::INFINITY, max_probability: f64::NEG_INFINITY, max_total_error: 0.0 };
    let mut sets = [[None::<CorrelationSet>; 2]; 2];
    for &pa in a_choices {
        for &pb in b_choices {
            let primes = Primes { a: pa, b: pb };
            let cs = corr.correlation_set(&context_slots(set, primes));
            single_context_slacks(&cs, primes, &mut sink);
            let pos = check_positivity(&cs);
            range.min_probability = range.min_probability.min(pos.min_probability);
            range.max_probability = range.max_probability.max(pos.max_probability);
            range.max_total_error = range.max_total_error.max((pos.total - 1.0).abs());
            sets[pa as usize][pb as usize] = Some(cs);
        }
    }
    let abcd = OBS_A | OBS_B | OBS_C | OBS_D;
    if set.a_prime.is_some() {
        for &pb in b_choices {
            let (plain, primed) = (sets[0][pb as usize].unwrap(), sets[1][pb as usize].unwrap());
            sink(LinkSlack {
                link: ChainLink::PrimedMarginal,
                primes: Primes { a: true, b: pb },
                slack: plain.get(abcd) + primed.get(abcd) - (plain.get(OBS_A) - primed.get(OBS_A)).abs() + 2.0,
            });
        }
    }
    if set.b_prime.is_some() {
        for &pa in a_choices {
            let (plain, primed) = (sets[pa as usize][0].unwrap(), sets[pa as usize][1].unwrap());
            sink(LinkSlack {
                link: ChainLink::PrimedMarginalSwapped,
                primes: Primes { a: pa, b: true },
                slack: plain.get(abcd) + primed.get(abcd) - (plain.get(OBS_B) - primed.get(OBS_B)).abs() + 2.0,
            });
        }
    }
    if set.a_prime.is_some() && set.b_prime.is_some() {
        let (c, d) = (set.c.slot(), set.d.slot());
        let both = Primes { a: true, b: true };
        let lead = corr.correlate(&[set.a_sum(), set.b_sum(), c, d]);
        let b_mod = corr.correlate(&[set.a_sum(), set.b_diff(), IDENTITY_SLOT, IDENTITY_SLOT]).abs();
        let a_mod = corr.correlate(&[set.a_diff(), set.b_sum(), IDENTITY_SLOT, IDENTITY_SLOT]).abs();
        sink(LinkSlack { link: ChainLink::PrimedPairB, primes: both, slack: lead - b_mod + 4.0 });
        sink(LinkSlack { link: ChainLink::PrimedPairA, primes: both, slack: lead - a_mod + 4.0 });
    }
    range
}

/// Every context the final inequalities use: family one, its side swaps,
/// and family two.
pub fn all_contexts(alpha: f64) -> Vec<SettingSet> {
    let mut sets = family_one_with_swaps(alpha);
    sets.extend(family_two(alpha));
    sets
}

/// `Σ_i |<A_i> - <A'_i>|` over family one: the integrand bounded by the
/// taxi metric of the first qubit's Bloch vector.
pub fn family_one_moduli<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    family_one(alpha)
        .iter()
        .map(|s| corr.correlate(&[s.a_diff(), IDENTITY_SLOT, IDENTITY_SLOT, IDENTITY_SLOT]).abs())
        .sum()
}

/// Sum of the fourteen moduli on the right-hand side of the two-qubit
/// inequality: six single-qubit differences from family one (plain and
/// side-swapped) and eight pair terms from family two.
pub fn moduli_sum_with<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    swapped_family_one_moduli(corr, alpha) + family_two_moduli(corr, alpha)
}

/// The six family-one moduli: `|<A_i> - <A'_i>|` and their side-swapped
/// counterparts `|<B_i> - <B'_i>|`.
pub fn swapped_family_one_moduli<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    let id = IDENTITY_SLOT;
    family_one(alpha)
        .iter()
        .map(|s| {
            let diff = s.a_diff();
            corr.correlate(&[diff, id, id, id]).abs() + corr.correlate(&[id, diff, id, id]).abs()
        })
        .sum()
}

/// `Σ_{i=4..7} |<(A+A')(B-B')>| + |<(A-A')(B+B')>|`.
pub fn family_two_moduli<C: Correlator + ?Sized>(corr: &C, alpha: f64) -> f64 {
    let id = IDENTITY_SLOT;
    family_two(alpha)
        .iter()
        .map(|s| {
            corr.correlate(&[s.a_sum(), s.b_diff(), id, id]).abs()
                + corr.correlate(&[s.a_diff(), s.b_sum(), id, id]).abs()
        })
        .sum()
}

pub fn moduli_sum(lambda: &LambdaAssignment, alpha: f64) -> f64 {
    moduli_sum_with(&lambda.correlations(), alpha)
}

/// `Σ |v_i|` of a unit vector; at least 1.
pub fn taxi_norm(v: [f64; 3]) -> Result<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NonUnitDirection(norm));
    }
    Ok(v.iter().map(|x| x.abs()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimedAverages {
    pub primes: Primes,
    pub averages: CorrelationSet,
}

/// Everything needed to replay a failed chain check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub lambda: LambdaAssignment,
    pub setting_set: SettingSet,
    pub averages: Vec<PrimedAverages>,
    pub slacks: Vec<LinkSlack>,
}

impl Counterexample {
    pub fn new(lambda: &LambdaAssignment, set: &SettingSet, report: &ChainReport) -> Self {
        let a_choices: &[bool] = if set.a_prime.is_some() { &[false, true] } else { &[false] };
        let b_choices: &[bool] = if set.b_prime.is_some() { &[false, true] } else { &[false] };
        let averages = a_choices
            .iter()
            .flat_map(|&a| b_choices.iter().map(move |&b| Primes { a, b }))
            .map(|primes| PrimedAverages { primes, averages: stats_with(lambda, set, primes) })
            .collect();
        Self { lambda: lambda.clone(), setting_set: *set, averages, slacks: report.slacks.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::ghz_state;
    use num_complex::Complex64;

    fn z_lambda() -> LambdaAssignment {
        LambdaAssignment::ProductQubits { bloch: [BlochVector::axis(3); 4] }
    }

    fn z_set() -> SettingSet {
        let z = BlochVector::axis(3);
        SettingSet { id: 0, alpha: 0.0, swapped: false, a: z, a_prime: Some(z), b: z, b_prime: None, c: z, d: z }
    }

    #[test]
    fn aligned_product_stats() {
        let cs = stats(&z_lambda(), &z_set());
        assert_eq!(cs.get(15), 1.0);
        for mask in [OBS_A, OBS_B, OBS_C, OBS_D] {
            assert_eq!(cs.get(mask), 1.0);
        }
        assert_eq!(outcome_probability(&cs, [1, 1, 1, 1]), 1.0);
        assert_eq!(outcome_probability(&cs, [1, -1, 1, 1]), 0.0);
    }

    #[test]
    fn orthogonal_marginal_vanishes() {
        let lambda = LambdaAssignment::ProductQubits {
            bloch: [BlochVector::axis(1), BlochVector::axis(3), BlochVector::axis(3), BlochVector::axis(3)],
        };
        assert_eq!(stats(&lambda, &z_set()).get(OBS_A), 0.0);
    }

    #[test]
    fn model_b_matches_full_state_vector() {
        let bell = ghz_state(2).unwrap();
        let lambda = LambdaAssignment::product_pairs(bell.clone(), bell.clone()).unwrap();
        let full = bell.tensor(&bell).unwrap();
        for set in family_two(0.21) {
            let cs = stats(&lambda, &set);
            // oracle: <ψ|A⊗B⊗C⊗D|ψ> expanded over the Pauli basis of the product state
            let dirs = context_slots(&set, Primes::default());
            let mut direct = 0.0;
            for i in 1..4 {
                for j in 1..4 {
                    for k in 1..4 {
                        for l in 1..4 {
                            let w = dirs[0][i] * dirs[1][j] * dirs[2][k] * dirs[3][l];
                            if w != 0.0 {
                                direct += w * full.pauli_expectation(&[i, j, k, l]).unwrap();
                            }
                        }
                    }
                }
            }
            assert!((cs.get(15) - direct).abs() < 1e-12, "set {}", set.id);
        }
    }

    #[test]
    fn flat_averages_give_uniform_distribution() {
        let cs = CorrelationSet::from_averages([0.0; 16]);
        for o in all_outcomes() {
            assert_eq!(outcome_probability(&cs, o), 1.0 / 16.0);
        }
    }

    #[test]
    fn ghz_level_correlations_sum_to_one() {
        // GHZ-like averages inserted directly: all pair and quadruple terms +1
        let mut avg = [0.0; 16];
        for (mask, v) in avg.iter_mut().enumerate() {
            if (mask as u32).count_ones() % 2 == 0 {
                *v = 1.0;
            }
        }
        let cs = CorrelationSet::from_averages(avg);
        let total: f64 = all_outcomes().map(|o| outcome_probability(&cs, o)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fast_distribution_matches_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let avg: [f64; 16] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let cs = CorrelationSet::from_averages(avg);
            let fast = outcome_distribution(&cs);
            for (o, p) in all_outcomes().zip(fast) {
                assert!((outcome_probability(&cs, o) - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn factored_set_matches_generic_contraction() {
        struct Plain(FactoredCorrelations);
        impl Correlator for Plain {
            fn correlate(&self, slots: &[Slot; 4]) -> f64 {
                self.0.correlate(slots)
            }
        }
        for idx in 0..100 {
            let f = sample_lambda(LambdaModel::B, 9, idx).correlations();
            for set in all_contexts(0.3) {
                let dirs = context_slots(&set, Primes { a: true, b: false });
                let fast = f.correlation_set(&dirs);
                let slow = Plain(f).correlation_set(&dirs);
                for m in 0..16 {
                    assert!((fast.get(m) - slow.get(m)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn positivity_examples() {
        let mut avg = [0.0; 16];
        avg[OBS_A | OBS_B] = 1.0;
        avg[OBS_A] = 1.0;
        avg[OBS_B] = -1.0;
        let p = check_positivity(&CorrelationSet::from_averages(avg));
        assert!(!p.physical);
        // (a, b) marginal P(-,+) = (1 - <A> + <B> - <AB>)/4 = -1/2
        let marginal = |a: f64, b: f64| (1.0 + a * 1.0 + b * -1.0 + a * b * 1.0) / 4.0;
        assert_eq!(marginal(-1.0, 1.0), -0.5);
        assert!(p.min_probability < 0.0);

        let mut avg = [0.0; 16];
        avg[15] = -1.0;
        let p = check_positivity(&CorrelationSet::from_averages(avg));
        assert!(p.physical);
        assert_eq!(p.min_probability, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let lambda = LambdaAssignment::random(LambdaModel::A, &mut rng);
            for set in all_contexts(0.37) {
                assert!(check_positivity(&stats(&lambda, &set)).physical);
            }
        }
    }

    #[test]
    fn chain_boundary_case_is_tight() {
        let report = check_chain(&z_lambda(), &z_set());
        assert_eq!(report.min_slack_of(ChainLink::SingleMarginal), Some(0.0));
        assert!(report.holds());
    }

    #[test]
    fn chain_holds_for_random_lambdas() {
        for model in [LambdaModel::A, LambdaModel::B] {
            for idx in 0..2_000 {
                let lambda = sample_lambda(model, 5, idx);
                for set in all_contexts(0.05 + 0.001 * idx as f64) {
                    let r = check_chain(&lambda, &set);
                    assert!(r.holds(), "{model} #{idx} set {}: {}", set.id, r.min_slack());
                }
            }
        }
    }

    #[test]
    fn chain_covers_expected_links() {
        let lambda = sample_lambda(LambdaModel::B, 1, 0);
        let contexts = all_contexts(0.1);
        let links = |s: &SettingSet| {
            let mut l: Vec<_> = check_chain(&lambda, s).slacks.iter().map(|x| x.link).collect();
            l.sort();
            l.dedup();
            l
        };
        assert!(links(&contexts[0]).contains(&ChainLink::PrimedMarginal));
        assert!(links(&contexts[3]).contains(&ChainLink::PrimedMarginalSwapped));
        let f2 = links(&contexts[6]);
        assert!(f2.contains(&ChainLink::PrimedPairA) && f2.contains(&ChainLink::PrimedPairB));
        // 4 combos × 4 single-context links + 2 + 2 + 2
        assert_eq!(check_chain(&lambda, &contexts[6]).slacks.len(), 22);
    }

    #[test]
    fn moduli_sum_examples() {
        let zero = PureState::basis(2, 0).unwrap();
        let bell = ghz_state(2).unwrap();
        for alpha in [0.0, 0.03, 0.4, -0.2] {
            let s = (2.0 * alpha as f64).sin().abs();
            let product = LambdaAssignment::product_pairs(zero.clone(), bell.clone()).unwrap();
            assert!((moduli_sum(&product, alpha) - 4.0 * s).abs() < 1e-12);
            let entangled = LambdaAssignment::product_pairs(bell.clone(), zero.clone()).unwrap();
            // Bell: |T11| + |T22| (|T33| excluded) = 2
            assert!((moduli_sum(&entangled, alpha) - 4.0 * s).abs() < 1e-12);
        }
        assert_eq!(moduli_sum(&LambdaAssignment::product_pairs(bell.clone(), bell).unwrap(), 0.0), 0.0);
    }

    #[test]
    fn moduli_sum_matches_tensor_formula() {
        for idx in 0..500 {
            let lambda = sample_lambda(LambdaModel::B, 77, idx);
            let alpha = -0.7 + 0.003 * idx as f64;
            let front = lambda.correlations().front;
            let expected = 2.0 * (2.0 * alpha).sin().abs() * front.abs_sum_without_zz();
            assert!((moduli_sum(&lambda, alpha) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn taxi_norm_examples() {
        assert_eq!(taxi_norm([1.0, 0.0, 0.0]).unwrap(), 1.0);
        let r3 = 3f64.sqrt();
        assert!((taxi_norm([1.0 / r3; 3]).unwrap() - r3).abs() < 1e-15);
        let h = 0.5f64.sqrt();
        assert!((taxi_norm([h, h, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(taxi_norm([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let seeds: std::collections::BTreeSet<u64> = (0..10_000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_eq!(sample_lambda(LambdaModel::B, 42, 17), sample_lambda(LambdaModel::B, 42, 17));
    }

    #[test]
    fn counterexample_serializes() {
        let lambda = sample_lambda(LambdaModel::B, 3, 0);
        let set = family_two(0.1)[0];
        let report = check_chain(&lambda, &set);
        let cx = Counterexample::new(&lambda, &set, &report);
        let json = serde_json::to_value(&cx).unwrap();
        for key in ["lambda", "setting_set", "averages", "slacks"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["lambda"]["model"], "B");
        assert_eq!(json["averages"].as_array().unwrap().len(), 4);
        assert!(json["averages"][0]["averages"].get("ABCD").is_some());
        let back: LambdaAssignment = serde_json::from_value(json["lambda"].clone()).unwrap();
        assert_eq!(back, lambda);
    }

    #[test]
    fn model_b_rejects_wrong_dimension() {
        let s = PureState::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(LambdaAssignment::product_pairs(s, ghz_state(2).unwrap()).is_err());
    }
}
