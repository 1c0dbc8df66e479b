//! Single-qubit state tomography, process tomography in the Pauli basis,
//! Bloch-sphere maps and Poissonian Monte Carlo error bars.
//!
//! Process matrices follow `ρ_out = Σ_{l,k} χ_lk σ_l ρ_in σ_k` with
//! `σ_0..σ_3 = I, X, Y, Z`.

use std::fmt;

use nalgebra::Matrix3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qcore::{c64, kron, matrix_to_json, BlochVector, CMatrix, CVector, MixedState, Pauli, PureState, C64};
use crate::{Error, Result};

/// Default number of Monte Carlo resamples.
pub const DEFAULT_MC_TRIALS: usize = 1000;

/// Projective measurement basis. The `plus` outcome is the first state of
/// each pair: `Z = (H, V)`, `X = (D, A)`, `Y = (R, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasurementBasis {
    Z,
    X,
    Y,
}

impl MeasurementBasis {
    pub const ALL: [MeasurementBasis; 3] = [MeasurementBasis::Z, MeasurementBasis::X, MeasurementBasis::Y];

    pub fn plus_state(self) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            MeasurementBasis::Z => vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            MeasurementBasis::X => vec![c64(s, 0.0), c64(s, 0.0)],
            MeasurementBasis::Y => vec![c64(s, 0.0), c64(0.0, -s)],
        };
        PureState::new(amps).expect("normalized")
    }

    pub fn minus_state(self) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            MeasurementBasis::Z => vec![c64(0.0, 0.0), c64(1.0, 0.0)],
            MeasurementBasis::X => vec![c64(s, 0.0), c64(-s, 0.0)],
            MeasurementBasis::Y => vec![c64(s, 0.0), c64(0.0, s)],
        };
        PureState::new(amps).expect("normalized")
    }

    /// Sign linking `p(plus) - p(minus)` to the Bloch component.
    fn bloch_sign(self) -> f64 {
        match self {
            MeasurementBasis::Y => -1.0,
            _ => 1.0,
        }
    }

    fn axis(self) -> usize {
        match self {
            MeasurementBasis::X => 0,
            MeasurementBasis::Y => 1,
            MeasurementBasis::Z => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            MeasurementBasis::Z => "Z",
            MeasurementBasis::X => "X",
            MeasurementBasis::Y => "Y",
        }
    }
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis: MeasurementBasis,
    pub outcome_plus_counts: u64,
    pub outcome_minus_counts: u64,
}

/// Real-valued counterpart of [`MeasurementRecord`] (exact proportions or
/// resampled counts).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisFrequencies {
    pub basis: MeasurementBasis,
    pub plus: f64,
    pub minus: f64,
}

impl From<&MeasurementRecord> for BasisFrequencies {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            basis: r.basis,
            plus: r.outcome_plus_counts as f64,
            minus: r.outcome_minus_counts as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QstOptions {
    /// Refine the linear estimate by likelihood maximization.
    pub maximum_likelihood: bool,
}

pub fn qst_reconstruct(records: &[MeasurementRecord], options: QstOptions) -> Result<MixedState> {
    let freqs: Vec<BasisFrequencies> = records.iter().map(BasisFrequencies::from).collect();
    qst_reconstruct_frequencies(&freqs, options)
}

fn aggregate(freqs: &[BasisFrequencies]) -> Result<[(f64, f64); 3]> {
    let mut acc = [(0.0, 0.0); 3];
    for f in freqs {
        if f.plus < 0.0 || f.minus < 0.0 {
            return Err(Error::InvalidParameter {
                name: "counts",
                value: f.plus.min(f.minus),
                reason: "counts must be non-negative",
            });
        }
        let slot = &mut acc[f.basis.axis()];
        slot.0 += f.plus;
        slot.1 += f.minus;
    }
    for b in MeasurementBasis::ALL {
        let (p, m) = acc[b.axis()];
        if p + m <= 0.0 {
            return Err(Error::MissingBasis(b.name()));
        }
    }
    Ok(acc)
}

/// Linear inversion to a Bloch vector, radially scaled back into the ball
/// when it lands outside, with optional likelihood refinement.
pub fn qst_reconstruct_frequencies(freqs: &[BasisFrequencies], options: QstOptions) -> Result<MixedState> {
    let acc = aggregate(freqs)?;
    let mut r = [0.0; 3];
    for b in MeasurementBasis::ALL {
        let (p, m) = acc[b.axis()];
        r[b.axis()] = b.bloch_sign() * (p - m) / (p + m);
    }
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if norm > 1.0 {
        r.iter_mut().for_each(|x| *x /= norm);
    }
    let linear = MixedState::from_bloch(&BlochVector {
        x: r[0],
        y: r[1],
        z: r[2],
    });
    if options.maximum_likelihood {
        maximum_likelihood(&acc, &linear)
    } else {
        Ok(linear)
    }
}

const ML_TOL: f64 = 1e-10;
const ML_MAX_ITER: usize = 10_000;
const ML_DILUTION: f64 = 0.5;

/// Diluted `RρR` iteration on the multinomial likelihood of the three bases.
fn maximum_likelihood(acc: &[(f64, f64); 3], start: &MixedState) -> Result<MixedState> {
    let projectors: Vec<(CMatrix, f64)> = MeasurementBasis::ALL
        .iter()
        .flat_map(|&b| {
            let (p, m) = acc[b.axis()];
            [
                (b.plus_state().projector().into_matrix(), p),
                (b.minus_state().projector().into_matrix(), m),
            ]
        })
        .collect();
    let total: f64 = projectors.iter().map(|(_, n)| n).sum();
    let id = CMatrix::identity(2, 2);

    // keep away from the boundary so every predicted probability is positive
    let mut rho = start.matrix().scale(0.999) + id.scale(0.0005);
    for _ in 0..ML_MAX_ITER {
        let mut r = CMatrix::zeros(2, 2);
        for (proj, n) in &projectors {
            if *n > 0.0 {
                let p = (&rho * proj).trace().re.max(1e-300);
                r += proj.scale(n / p);
            }
        }
        r.unscale_mut(total);
        let step = (&id + r.scale(ML_DILUTION)).unscale(1.0 + ML_DILUTION);
        let next = &step * &rho * step.adjoint();
        let next = next.unscale(next.trace().re);
        let delta = (&next - &rho).norm();
        rho = next;
        if delta < ML_TOL {
            break;
        }
    }
    MixedState::new((&rho + rho.adjoint()).scale(0.5))
}

/// Log-likelihood of the aggregated counts under `rho`.
pub fn log_likelihood(records: &[BasisFrequencies], rho: &MixedState) -> Result<f64> {
    let acc = aggregate(records)?;
    let mut ll = 0.0;
    for b in MeasurementBasis::ALL {
        let (p, m) = acc[b.axis()];
        let pp = rho.fidelity_pure(&b.plus_state())?;
        let pm = rho.fidelity_pure(&b.minus_state())?;
        if p > 0.0 {
            ll += p * pp.max(1e-300).ln();
        }
        if m > 0.0 {
            ll += m * pm.max(1e-300).ln();
        }
    }
    Ok(ll)
}

/// Exact outcome probabilities of `rho` scaled to `per_basis` events.
pub fn expected_frequencies(rho: &MixedState, per_basis: f64) -> Result<Vec<BasisFrequencies>> {
    MeasurementBasis::ALL
        .iter()
        .map(|&b| {
            Ok(BasisFrequencies {
                basis: b,
                plus: per_basis * rho.fidelity_pure(&b.plus_state())?,
                minus: per_basis * rho.fidelity_pure(&b.minus_state())?,
            })
        })
        .collect()
}

/// Binomially sampled tomography counts, `per_basis` events per basis.
pub fn sample_records<R: Rng + ?Sized>(rho: &MixedState, per_basis: u64, rng: &mut R) -> Result<Vec<MeasurementRecord>> {
    MeasurementBasis::ALL
        .iter()
        .map(|&b| {
            let p = rho.fidelity_pure(&b.plus_state())?;
            let plus = Binomial::new(per_basis, p)
                .map_err(|_| Error::InvalidParameter {
                    name: "probability",
                    value: p,
                    reason: "outcome probability out of range",
                })?
                .sample(rng);
            Ok(MeasurementRecord {
                basis: b,
                outcome_plus_counts: plus,
                outcome_minus_counts: per_basis - plus,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    chi: CMatrix,
}

const CHI_TOL: f64 = 1e-10;

impl ProcessMatrix {
    /// Validates hermiticity, unit trace and trace preservation.
    pub fn new(chi: CMatrix) -> Result<Self> {
        if chi.nrows() != 4 || chi.ncols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: chi.nrows(),
            });
        }
        let dev = (&chi - chi.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > CHI_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = chi.trace();
        if (tr.re - 1.0).abs() > CHI_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let p = Self {
            chi: (&chi + chi.adjoint()).scale(0.5),
        };
        let tp = p.trace_condition();
        let tp_dev = (&tp - CMatrix::identity(2, 2)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tp_dev > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "trace preservation",
                value: tp_dev,
                reason: "Σ χ_lk σ_k σ_l must equal the identity",
            });
        }
        Ok(p)
    }

    fn trace_condition(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(2, 2);
        for (l, pl) in Pauli::ALL.iter().enumerate() {
            for (k, pk) in Pauli::ALL.iter().enumerate() {
                acc += (pk.matrix() * pl.matrix()).scale(1.0) * self.chi[(l, k)];
            }
        }
        acc
    }

    pub fn chi(&self) -> &CMatrix {
        &self.chi
    }

    pub fn identity() -> Self {
        Self::pauli(Pauli::I)
    }

    /// Unitary Pauli channel `ρ → σρσ`.
    pub fn pauli(p: Pauli) -> Self {
        let i = Pauli::ALL.iter().position(|&q| q == p).unwrap();
        let mut chi = CMatrix::zeros(4, 4);
        chi[(i, i)] = c64(1.0, 0.0);
        Self { chi }
    }

    /// `ρ → (1-p)ρ + p·I/2`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        Self::from_map(|rho| rho.scale(1.0 - p) + CMatrix::identity(2, 2).scale(p * rho.trace().re / 2.0))
    }

    /// Builds χ for any linear map on 2×2 matrices via its Choi matrix.
    pub fn from_map<F: Fn(&CMatrix) -> CMatrix>(map: F) -> Result<Self> {
        let mut choi = CMatrix::zeros(4, 4);
        for m in 0..2 {
            for n in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(m, n)] = c64(1.0, 0.0);
                choi += kron(&e, &map(&e));
            }
        }
        Self::new(chi_from_choi(&choi))
    }

    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        Self::from_map(|rho| kraus.iter().fold(CMatrix::zeros(2, 2), |acc, k| acc + k * rho * k.adjoint()))
    }

    /// `Σ χ_lk σ_l ρ σ_k` on a raw matrix.
    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(2, 2);
        for (l, pl) in Pauli::ALL.iter().enumerate() {
            for (k, pk) in Pauli::ALL.iter().enumerate() {
                let c = self.chi[(l, k)];
                if c.norm() > 0.0 {
                    out += (pl.matrix() * rho * pk.matrix()) * c;
                }
            }
        }
        out
    }

    /// Fails when χ is not completely positive enough to yield a state.
    pub fn apply(&self, rho: &MixedState) -> Result<MixedState> {
        MixedState::new(self.apply_matrix(rho.matrix()))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &ProcessMatrix) -> Result<ProcessMatrix> {
        Self::from_map(|rho| self.apply_matrix(&first.apply_matrix(rho)))
    }

    /// Clips negative eigenvalues of χ and restores unit trace.
    pub fn cp_projected(&self) -> ProcessMatrix {
        let eig = nalgebra::SymmetricEigen::new(self.chi.clone());
        let clipped = eig.eigenvalues.map(|l| C64::from(l.max(0.0)));
        let v = &eig.eigenvectors;
        let chi = v * CMatrix::from_diagonal(&clipped) * v.adjoint();
        let tr = chi.trace().re;
        ProcessMatrix { chi: chi.unscale(tr) }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        nalgebra::SymmetricEigen::new(self.chi.clone()).eigenvalues.iter().cloned().collect()
    }
}

impl Serialize for ProcessMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(&self.chi).serialize(s)
    }
}

/// `χ_ab = ⟨v_a|J|v_b⟩ / 4` with `|v_a⟩ = (I ⊗ σ_a)|Ω⟩`.
fn chi_from_choi(choi: &CMatrix) -> CMatrix {
    let omega = CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
    let id = CMatrix::identity(2, 2);
    let vs: Vec<CVector> = Pauli::ALL.iter().map(|p| kron(&id, &p.matrix()) * &omega).collect();
    CMatrix::from_fn(4, 4, |a, b| vs[a].dotc(&(choi * &vs[b])) / 4.0)
}

fn vec_row_major(m: &CMatrix) -> CVector {
    CVector::from_vec(vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

/// Process tomography from four input/output pairs spanning the operator
/// space.
pub fn qpt_reconstruct(pairs: &[(MixedState, MixedState)], cp_projection: bool) -> Result<ProcessMatrix> {
    if pairs.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: pairs.len(),
        });
    }
    if let Some((i, o)) = pairs.iter().find(|(i, o)| i.dim() != 2 || o.dim() != 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: i.dim().max(o.dim()),
        });
    }
    let a = CMatrix::from_columns(&pairs.iter().map(|(i, _)| vec_row_major(i.matrix())).collect::<Vec<_>>());
    if a.determinant().norm() < 1e-9 {
        return Err(Error::RankDeficient);
    }
    let a_inv = a.try_inverse().ok_or(Error::RankDeficient)?;

    let mut choi = CMatrix::zeros(4, 4);
    for m in 0..2 {
        for n in 0..2 {
            let mut e = CMatrix::zeros(2, 2);
            e[(m, n)] = c64(1.0, 0.0);
            let coeffs = &a_inv * vec_row_major(&e);
            let image = pairs
                .iter()
                .zip(coeffs.iter())
                .fold(CMatrix::zeros(2, 2), |acc, ((_, out), c)| acc + out.matrix() * *c);
            choi += kron(&e, &image);
        }
    }
    let chi = chi_from_choi(&choi);
    let chi = (&chi + chi.adjoint()).scale(0.5);
    let raw = ProcessMatrix::new(chi)?;
    Ok(if cp_projection { raw.cp_projected() } else { raw })
}

/// The four inputs used for process tomography: H, V, D, L.
pub fn qpt_inputs() -> [MixedState; 4] {
    use crate::protocol::{prepare_input, InputLabel};
    [InputLabel::H, InputLabel::V, InputLabel::D, InputLabel::L].map(|l| prepare_input(l).projector())
}

/// `Re Tr(χ_ideal χ)`, clamped to `[0, 1]`.
pub fn process_fidelity(chi: &ProcessMatrix, chi_ideal: &ProcessMatrix) -> f64 {
    (chi_ideal.chi() * chi.chi()).trace().re.clamp(0.0, 1.0)
}

/// Affine action `r → M r + t` of a qubit channel on Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineBlochMap {
    pub linear: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl AffineBlochMap {
    pub fn identity() -> Self {
        Self {
            linear: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            offset: [0.0; 3],
        }
    }

    pub fn apply(&self, r: [f64; 3]) -> [f64; 3] {
        let mut out = self.offset;
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..3).map(|j| self.linear[i][j] * r[j]).sum::<f64>();
        }
        out
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &AffineBlochMap) -> AffineBlochMap {
        let a = Matrix3::from_fn(|i, j| self.linear[i][j]);
        let b = Matrix3::from_fn(|i, j| first.linear[i][j]);
        let m = a * b;
        let t = self.apply(first.offset);
        AffineBlochMap {
            linear: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
            offset: t,
        }
    }

    /// Largest image radius over `n` quasi-uniform sphere points.
    pub fn max_image_radius(&self, n: usize) -> f64 {
        sphere_points(n)
            .into_iter()
            .map(|p| {
                let q = self.apply(p);
                (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn maps_ball_into_ball(&self, n: usize) -> bool {
        self.max_image_radius(n) <= 1.0 + 1e-9
    }
}

/// Fibonacci lattice on the unit sphere.
pub fn sphere_points(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

pub fn bloch_map_of(chi: &ProcessMatrix) -> AffineBlochMap {
    let half_id = CMatrix::identity(2, 2).scale(0.5);
    let centre = chi.apply_matrix(&half_id);
    let axes = [Pauli::X, Pauli::Y, Pauli::Z];
    let offset = axes.map(|p| (p.matrix() * &centre).trace().re);
    let images = axes.map(|p| chi.apply_matrix(&p.matrix()));
    let linear = axes.map(|pi| std::array::from_fn(|j| 0.5 * (pi.matrix() * &images[j]).trace().re));
    AffineBlochMap { linear, offset }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Resamples every count as Poisson with mean equal to the observed count
/// and returns the sample mean and standard deviation of `statistic`.
/// Trial `i` draws from its own ChaCha stream, so results do not depend on
/// the number of worker threads.
pub fn monte_carlo_errors<F>(counts: &[u64], trials: usize, seed: u64, statistic: F) -> Result<McSummary>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if trials < 100 {
        return Err(Error::InvalidParameter {
            name: "trials",
            value: trials as f64,
            reason: "at least 100 Monte Carlo trials are required",
        });
    }
    if counts.iter().sum::<u64>() == 0 {
        return Err(Error::ZeroCounts);
    }
    let dists: Vec<Option<Poisson<f64>>> = counts
        .iter()
        .map(|&c| if c > 0 { Poisson::new(c as f64).ok() } else { None })
        .collect();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let sample: Vec<f64> = dists
                .iter()
                .map(|d| d.as_ref().map_or(0.0, |d| d.sample(&mut rng)))
                .collect();
            statistic(&sample)
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McSummary {
        mean,
        std: var.sqrt(),
        trials,
    })
}

/// Statistics the command line can resample by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `n_φ / (n_φ + n_⊥)` over two counts.
    StateFidelity,
    /// CHSH correlation over four counts `(++, +-, -+, --)`.
    Correlation,
    /// `|S|` over sixteen counts, four settings in order.
    ChshS,
}

impl Statistic {
    pub fn arity(self) -> usize {
        match self {
            Statistic::StateFidelity => 2,
            Statistic::Correlation => 4,
            Statistic::ChshS => 16,
        }
    }

    pub fn evaluate(self, c: &[f64]) -> f64 {
        let corr = |c: &[f64]| {
            let total: f64 = c.iter().sum();
            if total > 0.0 {
                (c[0] - c[1] - c[2] + c[3]) / total
            } else {
                0.0
            }
        };
        match self {
            Statistic::StateFidelity => {
                let t = c[0] + c[1];
                if t > 0.0 {
                    c[0] / t
                } else {
                    0.0
                }
            }
            Statistic::Correlation => corr(c),
            Statistic::ChshS => (corr(&c[0..4]) - corr(&c[4..8]) + corr(&c[8..12]) + corr(&c[12..16])).abs(),
        }
    }
}
