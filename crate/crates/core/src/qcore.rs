//! Dense complex linear algebra for few-qubit states and operators.
//!
//! Basis convention: the qubit basis is `(|H⟩, |V⟩)` at indices `(0, 1)` and
//! `Z|H⟩ = +|H⟩`. Composite systems use Kronecker ordering with the leftmost
//! factor as the most significant index. The Bloch vector uses the standard
//! `σ_y = [[0, -i], [i, 0]]`, so `|R⟩ = (|H⟩ - i|V⟩)/√2` sits at `(0, -1, 0)`
//! and `|L⟩` at `(0, +1, 0)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Absolute tolerance for exact algebra (hermiticity, trace, norm).
pub const EXACT_TOL: f64 = 1e-12;
/// Eigenvalues above `-EIGEN_TOL` are treated as zero and clipped.
pub const EIGEN_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn valid_dim(dim: usize) -> bool {
    dim == 6 || (dim > 0 && dim.is_power_of_two())
}

/// Kronecker product, leftmost factor most significant.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Tensor product over either kind of state.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Builds a normalized state from (possibly unnormalized) amplitudes.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        Self::from_vector(CVector::from_vec(amplitudes))
    }

    pub fn from_vector(v: CVector) -> Result<Self> {
        if !valid_dim(v.len()) {
            return Err(Error::InvalidDimension(v.len()));
        }
        let norm = v.norm();
        if norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut v = CVector::zeros(dim);
        v[index] = c64(1.0, 0.0);
        Self::from_vector(v)
    }

    pub fn h() -> Self {
        Self {
            amplitudes: CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]),
        }
    }

    pub fn v() -> Self {
        Self {
            amplitudes: CVector::from_vec(vec![c64(0.0, 0.0), c64(1.0, 0.0)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn vector(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies an operator and renormalizes.
    pub fn evolve(&self, op: &CMatrix) -> Result<PureState> {
        if op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.ncols(),
                found: self.dim(),
            });
        }
        Self::from_vector(op * &self.amplitudes)
    }

    pub fn projector(&self) -> MixedState {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        MixedState::from_matrix_unchecked(m)
    }
}

impl Tensor for PureState {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }
}

/// A validated density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    matrix: CMatrix,
}

impl MixedState {
    /// Validates hermiticity, unit trace and positivity. Eigenvalues in
    /// `[-EIGEN_TOL, 0)` are clipped to zero and the matrix renormalized.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if !valid_dim(matrix.nrows()) {
            return Err(Error::InvalidDimension(matrix.nrows()));
        }
        let dev = max_abs(&(&matrix - matrix.adjoint()));
        if dev > EXACT_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > EXACT_TOL || tr.im.abs() > EXACT_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let h = hermitize(&matrix);
        let eig = SymmetricEigen::new(h.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL {
            return Err(Error::NegativeEigenvalue(min));
        }
        if min < 0.0 {
            let clipped = eig.eigenvalues.map(|l| C64::from(l.max(0.0)));
            let v = &eig.eigenvectors;
            let rebuilt = v * CMatrix::from_diagonal(&clipped) * v.adjoint();
            let tr = rebuilt.trace().re;
            return Ok(Self {
                matrix: hermitize(&rebuilt.unscale(tr)),
            });
        }
        Ok(Self { matrix: h })
    }

    /// Internal constructor for matrices that are valid by construction.
    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self {
            matrix: hermitize(&matrix),
        }
    }

    /// Normalizes a positive semidefinite operator by its trace.
    pub fn from_unnormalized(matrix: CMatrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Self::new(matrix.unscale(tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn from_bloch(b: &BlochVector) -> Self {
        let m = Pauli::I.matrix()
            + Pauli::X.matrix().scale(b.x)
            + Pauli::Y.matrix().scale(b.y)
            + Pauli::Z.matrix().scale(b.z);
        Self::from_matrix_unchecked(m.scale(0.5))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `U ρ U†`.
    pub fn evolve(&self, u: &CMatrix) -> Result<MixedState> {
        if u.ncols() != self.dim() || u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.ncols(),
            });
        }
        Ok(Self::from_matrix_unchecked(u * &self.matrix * u.adjoint()))
    }

    /// Convex combination `p·a + (1-p)·b`.
    pub fn mix(p: f64, a: &MixedState, b: &MixedState) -> Result<MixedState> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "mixing weight must lie in [0, 1]",
            });
        }
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(Self::from_matrix_unchecked(
            a.matrix.scale(p) + b.matrix.scale(1.0 - p),
        ))
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &MixedState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let diff = hermitize(&(&self.matrix - &other.matrix));
        let eig = SymmetricEigen::new(diff);
        Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
    }

    pub fn partial_trace(&self, keep: &[usize], dims: &[usize]) -> Result<MixedState> {
        partial_trace(self, keep, dims)
    }

    pub fn fidelity_pure(&self, phi: &PureState) -> Result<f64> {
        fidelity_pure(self, phi)
    }

    pub fn bloch(&self) -> Result<BlochVector> {
        bloch_of(self)
    }
}

impl Tensor for MixedState {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: kron(&self.matrix, &other.matrix),
        }
    }
}

fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Traces out every subsystem not listed in `keep`.
pub fn partial_trace(rho: &MixedState, keep: &[usize], dims: &[usize]) -> Result<MixedState> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: total,
        });
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            found: bad,
        });
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let out_dim: usize = kept_dims.iter().product();

    let mut out = CMatrix::zeros(out_dim, out_dim);
    let all: Vec<Vec<usize>> = (0..total).map(|i| digits(i, dims)).collect();
    for (a, da) in all.iter().enumerate() {
        for (b, db) in all.iter().enumerate() {
            if traced.iter().all(|&t| da[t] == db[t]) {
                let ka: Vec<usize> = keep.iter().map(|&k| da[k]).collect();
                let kb: Vec<usize> = keep.iter().map(|&k| db[k]).collect();
                out[(compose(&ka, &kept_dims), compose(&kb, &kept_dims))] += rho.matrix[(a, b)];
            }
        }
    }
    MixedState::new(out)
}

/// `⟨φ|ρ|φ⟩`, clamped to `[0, 1]`.
pub fn fidelity_pure(rho: &MixedState, phi: &PureState) -> Result<f64> {
    if rho.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: phi.dim(),
        });
    }
    let v = phi.vector();
    let f = v.dotc(&(rho.matrix() * v)).re;
    Ok(f.clamp(0.0, 1.0))
}

pub fn bloch_of(rho: &MixedState) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let comp = |p: Pauli| (rho.matrix() * p.matrix()).trace().re;
    Ok(BlochVector {
        x: comp(Pauli::X),
        y: comp(Pauli::Y),
        z: comp(Pauli::Z),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Index order used by process matrices: `σ_0 = I, σ_1 = X, σ_2 = Y, σ_3 = Z`.
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        let (o, l, i) = (c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 1.0));
        let e = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        CMatrix::from_row_slice(2, 2, &e)
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = Self { x, y, z };
        if b.norm() > 1.0 + EIGEN_TOL {
            return Err(Error::InvalidParameter {
                name: "bloch radius",
                value: b.norm(),
                reason: "Bloch vector must lie inside the unit ball",
            });
        }
        Ok(b)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Row-major nested `[re, im]` pairs.
pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(n, cols, |r, c| {
        c64(rows[r][c][0], rows[r][c][1])
    }))
}

impl Serialize for MixedState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(&self.matrix).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixedState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let m = matrix_from_json(&rows).map_err(serde::de::Error::custom)?;
        MixedState::new(m).map_err(serde::de::Error::custom)
    }
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.amplitudes
            .iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }
}

/// Random states and unitaries for property tests and benchmarks.
pub mod random {
    use super::*;

    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Haar-random pure state.
    pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState {
        let v = CVector::from_fn(dim, |_, _| gaussian(rng));
        PureState::from_vector(v).expect("gaussian vector is nonzero")
    }

    /// Random density matrix `G G† / Tr` with a `dim × rank` Ginibre factor.
    pub fn mixed_state<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> MixedState {
        let g = CMatrix::from_fn(dim, rank.max(1), |_, _| gaussian(rng));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        MixedState::from_matrix_unchecked(m.unscale(tr))
    }

    /// Haar-random unitary via QR with phase correction.
    pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
        let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
        let qr = g.qr();
        let (q, r) = (qr.q(), qr.r());
        let phases = CMatrix::from_diagonal(&CVector::from_fn(dim, |i, _| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c64(1.0, 0.0)
            }
        }));
        q * phases
    }
}
