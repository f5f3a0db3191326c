//! Dense states, density operators and Pauli correlation tensors for up to
//! four qubits.
//!
//! Basis ordering: qubit 1 is the most significant bit of a basis index, so
//! `|q1 q2 q3 q4>` reads left to right like the tensor subscripts `T_{ijkl}`.
//! Pauli index 0 is the identity, 1..=3 are x, y, z.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambda::CorrelationSet;
use crate::settings::{BlochVector, Slot, IDENTITY_SLOT};

pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
pub const MAX_QUBITS: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if !dim.is_power_of_two() {
        return Err(Error::Domain(format!("dimension {dim} is not a power of two")));
    }
    let n = dim.trailing_zeros() as usize;
    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(Error::QubitCount(n));
    }
    Ok(n)
}

/// Image of basis state `x` under a Pauli string: `P|x> = phase |x ^ flip>`.
fn pauli_action(indices: &[usize], x: usize) -> (usize, Complex64) {
    let n = indices.len();
    let mut flip = 0usize;
    let mut phase = ONE;
    for (k, &p) in indices.iter().enumerate() {
        let shift = n - 1 - k;
        let bit = (x >> shift) & 1;
        match p {
            0 => {}
            1 => flip |= 1 << shift,
            2 => {
                flip |= 1 << shift;
                phase *= if bit == 0 { Complex64::i() } else { -Complex64::i() };
            }
            3 => {
                if bit == 1 {
                    phase = -phase;
                }
            }
            _ => unreachable!("pauli index {p}"),
        }
    }
    (x ^ flip, phase)
}

/// Normalized amplitude vector on 2^n basis states.
///
/// Serializes as a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    qubits: usize,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let qubits = qubits_for_dim(amplitudes.len())?;
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > CONSTRUCTION_TOLERANCE {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { amplitudes, qubits })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let qubits = qubits_for_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized(norm * norm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes, qubits })
    }

    /// Computational basis state `|index>`.
    pub fn basis(qubits: usize, index: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return Err(Error::QubitCount(qubits));
        }
        let dim = 1 << qubits;
        if index >= dim {
            return Err(Error::Dimension { expected: dim, found: index });
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Ok(Self { amplitudes, qubits })
    }

    /// Tensor product `self ⊗ other` (self holds the leading qubits).
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let qubits = self.qubits + other.qubits;
        if qubits > MAX_QUBITS {
            return Err(Error::QubitCount(qubits));
        }
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|x| other.amplitudes.iter().map(move |y| x * y))
            .collect();
        Ok(Self { amplitudes, qubits })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<ψ| σ_{indices} |ψ>`.
    pub fn pauli_expectation(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() != self.qubits {
            return Err(Error::Dimension { expected: self.qubits, found: indices.len() });
        }
        Ok(self.pauli_expectation_unchecked(indices))
    }

    fn pauli_expectation_unchecked(&self, indices: &[usize]) -> f64 {
        let mut acc = ZERO;
        for (x, amp) in self.amplitudes.iter().enumerate() {
            let (y, phase) = pauli_action(indices, x);
            acc += self.amplitudes[y].conj() * phase * amp;
        }
        acc.re
    }

    pub fn density(&self) -> DensityOperator {
        let dim = self.dim();
        let matrix = DMatrix::from_fn(dim, dim, |r, c| self.amplitudes[r] * self.amplitudes[c].conj());
        DensityOperator { matrix, qubits: self.qubits }
    }
}

impl TryFrom<Vec<[f64; 2]>> for PureState {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<PureState> for Vec<[f64; 2]> {
    fn from(state: PureState) -> Self {
        state.amplitudes.iter().map(|a| [a.re, a.im]).collect()
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<Complex64>,
    qubits: usize,
}

impl DensityOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let qubits = qubits_for_dim(matrix.nrows())?;
        let rho = Self { matrix, qubits };
        rho.validate()?;
        Ok(rho)
    }

    pub fn maximally_mixed(qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&qubits) {
            return Err(Error::QubitCount(qubits));
        }
        let dim = 1 << qubits;
        let matrix = DMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        Ok(Self { matrix, qubits })
    }

    fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        let hermitian_defect = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if hermitian_defect > CONSTRUCTION_TOLERANCE {
            return Err(Error::InvalidDensity(format!("not Hermitian (defect {hermitian_defect:e})")));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > CONSTRUCTION_TOLERANCE || trace.im.abs() > CONSTRUCTION_TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {trace} differs from 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // symmetrize so round-off asymmetry cannot leak into the solver
        let h = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Tr(ρ σ_{indices})`.
    pub fn pauli_expectation(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() != self.qubits {
            return Err(Error::Dimension { expected: self.qubits, found: indices.len() });
        }
        let mut acc = ZERO;
        for x in 0..self.dim() {
            let (y, phase) = pauli_action(indices, x);
            acc += self.matrix[(x, y)] * phase;
        }
        Ok(acc.re)
    }

    /// Reduced operator on the listed qubits (0-based, kept in the given order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let n = self.qubits;
        if keep.is_empty() || keep.iter().any(|&q| q >= n) {
            return Err(Error::Domain(format!("cannot keep qubits {keep:?} of {n}")));
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let bit = |q: usize| n - 1 - q;
        let compose = |kept: usize, rest: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                let b = (kept >> (keep.len() - 1 - pos)) & 1;
                idx |= b << bit(q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                let b = (rest >> (traced.len() - 1 - pos)) & 1;
                idx |= b << bit(q);
            }
            idx
        };
        let dk = 1 << keep.len();
        let dt = 1 << traced.len();
        let matrix = DMatrix::from_fn(dk, dk, |r, c| {
            (0..dt).map(|t| self.matrix[(compose(r, t), compose(c, t))]).sum()
        });
        Ok(DensityOperator { matrix, qubits: keep.len() })
    }
}

/// `(1 - p) ρ + p · I / 2^n`.
pub fn mix_white_noise(rho: &DensityOperator, p: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::NoiseFraction(p));
    }
    let dim = rho.dim();
    let mut matrix = rho.matrix.scale(1.0 - p);
    for k in 0..dim {
        matrix[(k, k)] += Complex64::new(p / dim as f64, 0.0);
    }
    Ok(DensityOperator { matrix, qubits: rho.qubits })
}

/// `(|0…0> + |1…1>) / √2` on 2..=4 qubits.
pub fn ghz_state(qubits: usize) -> Result<PureState> {
    if !(2..=MAX_QUBITS).contains(&qubits) {
        return Err(Error::QubitCount(qubits));
    }
    let dim = 1 << qubits;
    let mut amplitudes = vec![ZERO; dim];
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amplitudes[0] = h;
    amplitudes[dim - 1] = h;
    Ok(PureState { amplitudes, qubits })
}

/// Anything that can evaluate a four-qubit correlator on slot weights.
///
/// `correlate` is multilinear in the four slots; unit directions give the
/// average of a product of ±1 observables.
pub trait Correlator {
    fn correlate(&self, slots: &[Slot; 4]) -> f64;

    /// Averages of every sub-product of one context.
    fn correlation_set(&self, dirs: &[Slot; 4]) -> CorrelationSet {
        let mut averages = [0.0; 16];
        for (mask, avg) in averages.iter_mut().enumerate() {
            let slots = std::array::from_fn(|k| if mask >> k & 1 == 1 { dirs[k] } else { IDENTITY_SLOT });
            *avg = self.correlate(&slots);
        }
        CorrelationSet::from_averages(averages)
    }
}

/// `T_{ijkl} = Tr(ρ σ_i ⊗ σ_j ⊗ σ_k ⊗ σ_l)` for a four-qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    entries: [f64; 256],
}

fn flat4(i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * 4 + j) * 4 + k) * 4 + l
}

fn unflat4(idx: usize) -> [usize; 4] {
    [idx >> 6, (idx >> 4) & 3, (idx >> 2) & 3, idx & 3]
}

impl CorrelationTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.entries[flat4(i, j, k, l)]
    }

    pub fn entries(&self) -> &[f64; 256] {
        &self.entries
    }

    /// All `(index, value)` pairs in lexicographic index order.
    pub fn indexed(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        self.entries.iter().enumerate().map(|(idx, &v)| (unflat4(idx), v))
    }

    /// Scales every entry of weight ≥ 1 by `1 - p`, the tensor-level image of
    /// [`mix_white_noise`].
    pub fn with_white_noise(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NoiseFraction(p));
        }
        let mut entries = self.entries.map(|v| v * (1.0 - p));
        entries[0] = self.entries[0];
        Ok(Self { entries })
    }

    /// `T_{ij00}`: the tensor of the reduced state of qubits 1 and 2.
    pub fn leading_pair(&self) -> TwoQubitTensor {
        let mut t = [[0.0; 4]; 4];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j, 0, 0);
            }
        }
        TwoQubitTensor(t)
    }
}

impl Correlator for CorrelationTensor {
    fn correlate(&self, slots: &[Slot; 4]) -> f64 {
        let [w1, w2, w3, w4] = slots;
        let mut acc = 0.0;
        for i in (0..4).filter(|&i| w1[i] != 0.0) {
            for j in (0..4).filter(|&j| w2[j] != 0.0) {
                let wij = w1[i] * w2[j];
                for k in (0..4).filter(|&k| w3[k] != 0.0) {
                    let wijk = wij * w3[k];
                    let base = flat4(i, j, k, 0);
                    for l in 0..4 {
                        acc += wijk * w4[l] * self.entries[base + l];
                    }
                }
            }
        }
        acc
    }
}

pub fn correlation_tensor(rho: &DensityOperator) -> Result<CorrelationTensor> {
    if rho.qubits != 4 {
        return Err(Error::Dimension { expected: 16, found: rho.dim() });
    }
    let mut entries = [0.0; 256];
    for (idx, e) in entries.iter_mut().enumerate() {
        *e = rho.pauli_expectation(&unflat4(idx))?;
    }
    Ok(CorrelationTensor { entries })
}

/// `Σ a_i b_j c_k d_l T_{ijkl}` where `None` marks an identity slot.
pub fn expectation(t: &CorrelationTensor, dirs: &[Option<[f64; 3]>; 4]) -> Result<f64> {
    let mut slots = [IDENTITY_SLOT; 4];
    for (slot, dir) in slots.iter_mut().zip(dirs.iter()) {
        if let Some(v) = dir {
            *slot = BlochVector::new(*v)?.slot();
        }
    }
    Ok(t.correlate(&slots))
}

/// `T_{ij} = <ψ| σ_i ⊗ σ_j |ψ>` of a two-qubit state; row and column 0 hold
/// the local Bloch vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitTensor(pub [[f64; 4]; 4]);

impl TwoQubitTensor {
    /// Tensor of the product state with Bloch vectors `u` and `v`.
    pub fn product(u: &BlochVector, v: &BlochVector) -> Self {
        let (x, y) = (u.slot_with_identity(), v.slot_with_identity());
        let mut t = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                t[i][j] = x[i] * y[j];
            }
        }
        Self(t)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn contract(&self, x: &Slot, y: &Slot) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            if x[i] == 0.0 {
                continue;
            }
            let row = &self.0[i];
            acc += x[i] * (row[0] * y[0] + row[1] * y[1] + row[2] * y[2] + row[3] * y[3]);
        }
        acc
    }

    /// Sum of squares of all sixteen entries (4 for pure states).
    pub fn square_sum(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum()
    }

    /// `Σ_{i,j=1..3} T_{ij}²`.
    pub fn correlation_square_sum(&self) -> f64 {
        (1..4).flat_map(|i| (1..4).map(move |j| (i, j))).map(|(i, j)| self.0[i][j].powi(2)).sum()
    }

    /// `Σ |T_{ij}|` over all entries except `(0,0)` and `(3,3)`.
    pub fn abs_sum_without_zz(&self) -> f64 {
        let total: f64 = self.0.iter().flatten().map(|v| v.abs()).sum();
        total - self.0[0][0].abs() - self.0[3][3].abs()
    }
}

impl BlochVector {
    /// `(1, v)`: weights that reproduce `P(+) - P(-)` style marginals when
    /// contracted against another slot.
    pub(crate) fn slot_with_identity(&self) -> Slot {
        let c = self.components();
        [1.0, c[0], c[1], c[2]]
    }
}

pub fn two_qubit_tensor(psi: &PureState) -> Result<TwoQubitTensor> {
    if psi.qubits != 2 {
        return Err(Error::Dimension { expected: 4, found: psi.dim() });
    }
    let mut t = [[0.0; 4]; 4];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = psi.pauli_expectation_unchecked(&[i, j]);
        }
    }
    Ok(TwoQubitTensor(t))
}

/// Unitarily invariant random pure state on 1 to 4 qubits (`dim` = 2..=16).
pub fn haar_pure(dim: usize, seed: u64) -> Result<PureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_pure_with(&mut rng, dim)
}

pub fn haar_pure_with<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<PureState> {
    if !dim.is_power_of_two() || !(2..=1 << MAX_QUBITS).contains(&dim) {
        return Err(Error::Dimension { expected: 16, found: dim });
    }
    let amplitudes: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::normalized(amplitudes)
}
