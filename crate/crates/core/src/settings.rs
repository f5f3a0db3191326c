//! Measurement settings as functions of the tilt angle.
//!
//! Family one holds three contexts in which only qubit 1 carries a primed
//! observable; family two holds four contexts (ids 4..=7) with primed pairs
//! on qubits 1 and 2. Every vector is a unit Bloch direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of a user-supplied direction.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Weights over the Pauli basis (identity, x, y, z) for one qubit slot.
///
/// A unit direction `v` maps to `(0, v)`, the identity marker to
/// `(1, 0, 0, 0)`. Sums and differences of directions stay in this space,
/// which is how composite observables like `A + A'` are contracted.
pub type Slot = [f64; 4];

pub const IDENTITY_SLOT: Slot = [1.0, 0.0, 0.0, 0.0];

pub fn slot_sum(x: &Slot, y: &Slot) -> Slot {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]
}

pub fn slot_diff(x: &Slot, y: &Slot) -> Slot {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2], x[3] - y[3]]
}

/// Unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector([f64; 3]);

impl BlochVector {
    pub fn new(components: [f64; 3]) -> Result<Self> {
        let norm = norm3(&components);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(Self(components))
    }

    /// Rescales any nonzero vector onto the sphere.
    pub fn normalized(components: [f64; 3]) -> Result<Self> {
        let norm = norm3(&components);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(Self(components.map(|c| c / norm)))
    }

    /// Coordinate axis `e_k` for `k` in 1..=3.
    pub fn axis(k: usize) -> Self {
        assert!((1..=3).contains(&k), "axis index {k} out of range");
        let mut c = [0.0; 3];
        c[k - 1] = 1.0;
        Self(c)
    }

    /// `cos t * e_i + sin t * e_j`; unit by construction when `i != j`.
    pub fn tilted(i: usize, j: usize, t: f64) -> Self {
        debug_assert_ne!(i, j);
        let mut c = [0.0; 3];
        c[i - 1] += t.cos();
        c[j - 1] += t.sin();
        Self(c)
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm3(&self.0)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(x, y)| x * y).sum()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.map(|c| -c))
    }

    pub fn slot(&self) -> Slot {
        [0.0, self.0[0], self.0[1], self.0[2]]
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;

    fn try_from(value: [f64; 3]) -> Result<Self> {
        Self::new(value)
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.0
    }
}

fn norm3(c: &[f64; 3]) -> f64 {
    c.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One experimental context: directions for qubits 1..4.
///
/// Family-one sets carry `a_prime` only; their side-swapped variants carry
/// `b_prime` only; family-two sets carry both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingSet {
    pub id: u8,
    pub alpha: f64,
    pub swapped: bool,
    pub a: BlochVector,
    pub a_prime: Option<BlochVector>,
    pub b: BlochVector,
    pub b_prime: Option<BlochVector>,
    pub c: BlochVector,
    pub d: BlochVector,
}

impl SettingSet {
    pub fn is_family_one(&self) -> bool {
        (1..=3).contains(&self.id)
    }

    /// Slots for `A + A'`, falling back to `2A` when no primed partner exists.
    pub fn a_sum(&self) -> Slot {
        slot_sum(&self.a.slot(), &self.a_prime.unwrap_or(self.a).slot())
    }

    pub fn a_diff(&self) -> Slot {
        slot_diff(&self.a.slot(), &self.a_prime.unwrap_or(self.a).slot())
    }

    pub fn b_sum(&self) -> Slot {
        slot_sum(&self.b.slot(), &self.b_prime.unwrap_or(self.b).slot())
    }

    pub fn b_diff(&self) -> Slot {
        slot_diff(&self.b.slot(), &self.b_prime.unwrap_or(self.b).slot())
    }

    pub fn vectors(&self) -> impl Iterator<Item = BlochVector> + '_ {
        [Some(self.a), self.a_prime, Some(self.b), self.b_prime, Some(self.c), Some(self.d)]
            .into_iter()
            .flatten()
    }
}

fn next_axis(i: usize) -> usize {
    i % 3 + 1
}

/// Three contexts: `a = cos2α e_i + sin2α e_{i+1}`, `a' = cos2α e_i - sin2α e_{i+1}`,
/// `b = -e_i`, `c = d = e_i`, with the axis index cyclic on {1, 2, 3}.
pub fn family_one(alpha: f64) -> [SettingSet; 3] {
    [1usize, 2, 3].map(|i| {
        let j = next_axis(i);
        let e = BlochVector::axis(i);
        SettingSet {
            id: i as u8,
            alpha,
            swapped: false,
            a: BlochVector::tilted(i, j, 2.0 * alpha),
            a_prime: Some(BlochVector::tilted(i, j, -2.0 * alpha)),
            b: e.neg(),
            b_prime: None,
            c: e,
            d: e,
        }
    })
}

/// Four contexts (ids 4..=7) with the primed pairs tilted by `±α`.
///
/// Each pair is `m e_i ± n e_j` with `m = cos α`, `n = sin α`, which keeps
/// every direction on the unit sphere.
pub fn family_two(alpha: f64) -> [SettingSet; 4] {
    // (id, a-plane, b-plane, c, d); a plane (i, j) means m e_i ± n e_j
    let table: [(u8, (usize, usize), (usize, usize), BlochVector, BlochVector); 4] = [
        (4, (1, 2), (1, 2), BlochVector::axis(1).neg(), BlochVector::axis(1)),
        (5, (1, 3), (1, 3), BlochVector::axis(2), BlochVector::axis(2)),
        (6, (1, 2), (2, 1), BlochVector::axis(2), BlochVector::axis(1)),
        (7, (2, 3), (2, 3), BlochVector::axis(2).neg(), BlochVector::axis(2)),
    ];
    table.map(|(id, (ai, aj), (bi, bj), c, d)| SettingSet {
        id,
        alpha,
        swapped: false,
        a: BlochVector::tilted(ai, aj, alpha),
        a_prime: Some(BlochVector::tilted(ai, aj, -alpha)),
        b: BlochVector::tilted(bi, bj, alpha),
        b_prime: Some(BlochVector::tilted(bi, bj, -alpha)),
        c,
        d,
    })
}

/// Exchanges the roles of qubits 1 and 2 in a family-one set: qubit 1 gets
/// the fixed `-e_i`, qubit 2 gets the tilted pair. `c` and `d` are kept.
pub fn triangle_swap(set: &SettingSet) -> Result<SettingSet> {
    if !set.is_family_one() || set.swapped {
        return Err(Error::SwapUndefined(set.id));
    }
    Ok(SettingSet {
        swapped: true,
        a: set.b,
        a_prime: None,
        b: set.a,
        b_prime: set.a_prime,
        ..*set
    })
}

/// Family one together with its three side-swapped variants.
pub fn family_one_with_swaps(alpha: f64) -> Vec<SettingSet> {
    let plain = family_one(alpha);
    let mut out = plain.to_vec();
    out.extend(plain.iter().map(|s| triangle_swap(s).expect("family-one set")));
    out
}

/// Norms obtained when the family-two table is read with `n = sin 2α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiteralDiagnostics {
    pub alpha: f64,
    pub m: f64,
    pub n_literal: f64,
    pub n_adopted: f64,
    pub literal_norm: f64,
    pub norm_defect: f64,
}

pub fn literal_diagnostics(alpha: f64) -> LiteralDiagnostics {
    let m = alpha.cos();
    let n_literal = (2.0 * alpha).sin();
    let literal_norm = (m * m + n_literal * n_literal).sqrt();
    LiteralDiagnostics {
        alpha,
        m,
        n_literal,
        n_adopted: alpha.sin(),
        literal_norm,
        norm_defect: literal_norm - 1.0,
    }
}
