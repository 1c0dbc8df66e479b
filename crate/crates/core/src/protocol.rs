//! Two-photon three-qubit teleportation.
//!
//! Qubit roles: Q0 is the polarization of photon A (the input), Q1 the path
//! of photon A (`|l⟩ = 0`, `|r⟩ = 1`), Q2 the polarization of photon B which
//! is sent through the plasmonic channel. Three-qubit registers are ordered
//! `Q0 ⊗ Q1 ⊗ Q2`.
//!
//! The complete Bell-state measurement acts on the six optical modes of
//! photon A. Mode ordering is `(p₁H, p₁V, lH, lV, rH, rV)` where `p₁` is the
//! exit path of the analyser carrying ports CH3/CH4 and `l`, `r` are the two
//! beam-displacer paths. With this ordering the Bell vectors read
//! `Φ± = e₃ ± e₆`, `Ψ± = e₄ ± e₅` and the ports are `CH1 = e₃`, `CH2 = e₄`,
//! `CH3 = e₁`, `CH4 = e₂`.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelModel};
use crate::qcore::{c64, kron, CMatrix, CVector, MixedState, Pauli, PureState, Tensor, C64};
use crate::{Error, Result};

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The six prepared polarization states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl InputLabel {
    pub const ALL: [InputLabel; 6] = [
        InputLabel::H,
        InputLabel::V,
        InputLabel::D,
        InputLabel::A,
        InputLabel::R,
        InputLabel::L,
    ];

    /// `(α, β)` with `|φ⟩ = α|H⟩ + β|V⟩`.
    pub fn amplitudes(self) -> [C64; 2] {
        match self {
            InputLabel::H => [c64(1.0, 0.0), c64(0.0, 0.0)],
            InputLabel::V => [c64(0.0, 0.0), c64(1.0, 0.0)],
            InputLabel::D => [c64(S, 0.0), c64(S, 0.0)],
            InputLabel::A => [c64(S, 0.0), c64(-S, 0.0)],
            InputLabel::R => [c64(S, 0.0), c64(0.0, -S)],
            InputLabel::L => [c64(S, 0.0), c64(0.0, S)],
        }
    }

    pub fn state(self) -> PureState {
        prepare_input(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            InputLabel::H => "H",
            InputLabel::V => "V",
            InputLabel::D => "D",
            InputLabel::A => "A",
            InputLabel::R => "R",
            InputLabel::L => "L",
        }
    }
}

impl fmt::Display for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        InputLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown input state `{s}` (expected one of H, V, D, A, R, L)"))
    }
}

pub fn prepare_input(label: InputLabel) -> PureState {
    PureState::new(label.amplitudes().to_vec()).expect("input amplitudes are normalized")
}

/// Detector port of the Bell-state analyser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    #[serde(rename = "CH1")]
    Ch1,
    #[serde(rename = "CH2")]
    Ch2,
    #[serde(rename = "CH3")]
    Ch3,
    #[serde(rename = "CH4")]
    Ch4,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::Ch1, Port::Ch2, Port::Ch3, Port::Ch4];

    /// Index of the port's unit vector in the 6-mode basis.
    pub fn mode_index(self) -> usize {
        match self {
            Port::Ch1 => 2,
            Port::Ch2 => 3,
            Port::Ch3 => 0,
            Port::Ch4 => 1,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Port::Ch1 => 1,
            Port::Ch2 => 2,
            Port::Ch3 => 3,
            Port::Ch4 => 4,
        };
        write!(f, "CH{n}")
    }
}

/// Pauli flips applied by the feed-forward. `x` is applied before `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub flip_x: bool,
    pub flip_z: bool,
}

impl Correction {
    pub fn unitary(self) -> CMatrix {
        let mut u = Pauli::I.matrix();
        if self.flip_x {
            u = Pauli::X.matrix() * u;
        }
        if self.flip_z {
            u = Pauli::Z.matrix() * u;
        }
        u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PsiPlus,
    PsiMinus,
    PhiMinus,
    PhiPlus,
}

impl BellOutcome {
    /// Row order of the published fidelity tables.
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
        BellOutcome::PhiMinus,
        BellOutcome::PhiPlus,
    ];

    pub fn port(self) -> Port {
        match self {
            BellOutcome::PhiPlus => Port::Ch1,
            BellOutcome::PhiMinus => Port::Ch2,
            BellOutcome::PsiMinus => Port::Ch3,
            BellOutcome::PsiPlus => Port::Ch4,
        }
    }

    pub fn from_port(port: Port) -> BellOutcome {
        match port {
            Port::Ch1 => BellOutcome::PhiPlus,
            Port::Ch2 => BellOutcome::PhiMinus,
            Port::Ch3 => BellOutcome::PsiMinus,
            Port::Ch4 => BellOutcome::PsiPlus,
        }
    }

    /// `Φ⁺ → σ_z·σ_x`, `Φ⁻ → σ_x`, `Ψ⁺ → σ_z`, `Ψ⁻ → I`.
    pub fn correction(self) -> Correction {
        let (flip_x, flip_z) = match self {
            BellOutcome::PsiMinus => (false, false),
            BellOutcome::PsiPlus => (false, true),
            BellOutcome::PhiMinus => (true, false),
            BellOutcome::PhiPlus => (true, true),
        };
        Correction { flip_x, flip_z }
    }

    /// Bell state over `Q0 (pol) ⊗ Q1 (path)`:
    /// `Ψ± = (|V l⟩ ± |H r⟩)/√2`, `Φ± = (|H l⟩ ± |V r⟩)/√2`.
    pub fn bell_state(self) -> PureState {
        let mut v = [c64(0.0, 0.0); 4];
        let (a, b, sign) = match self {
            BellOutcome::PsiPlus => (2, 1, 1.0),
            BellOutcome::PsiMinus => (2, 1, -1.0),
            BellOutcome::PhiPlus => (0, 3, 1.0),
            BellOutcome::PhiMinus => (0, 3, -1.0),
        };
        v[a] = c64(S, 0.0);
        v[b] = c64(sign * S, 0.0);
        PureState::new(v.to_vec()).expect("Bell vector is normalized")
    }

    pub fn mode_vector(self) -> ModeVector {
        ModeVector::from_polarization_path(&self.bell_state()).expect("dimension 4")
    }

    pub fn name(self) -> &'static str {
        match self {
            BellOutcome::PsiPlus => "Psi+",
            BellOutcome::PsiMinus => "Psi-",
            BellOutcome::PhiMinus => "Phi-",
            BellOutcome::PhiPlus => "Phi+",
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BellOutcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        let found = match t {
            "Psi+" | "PsiPlus" | "Ψ+" | "Ψ⁺" => BellOutcome::PsiPlus,
            "Psi-" | "PsiMinus" | "Ψ-" | "Ψ⁻" => BellOutcome::PsiMinus,
            "Phi-" | "PhiMinus" | "Φ-" | "Φ⁻" => BellOutcome::PhiMinus,
            "Phi+" | "PhiPlus" | "Φ+" | "Φ⁺" => BellOutcome::PhiPlus,
            _ => return Err(format!("unknown Bell outcome `{s}`")),
        };
        Ok(found)
    }
}

/// Amplitudes over the six optical modes of photon A. Sub-normalized
/// vectors stand for post-selected branches.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeVector([C64; 6]);

impl ModeVector {
    pub fn new(amplitudes: [C64; 6]) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if n > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter {
                name: "mode vector norm",
                value: n.sqrt(),
                reason: "mode vectors must have norm at most 1",
            });
        }
        Ok(Self(amplitudes))
    }

    /// Embeds a `pol ⊗ path` two-qubit state into the mode basis.
    pub fn from_polarization_path(state: &PureState) -> Result<Self> {
        if state.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: state.dim(),
            });
        }
        let e = mode_embedding() * state.vector();
        let mut a = [c64(0.0, 0.0); 6];
        a.copy_from_slice(e.as_slice());
        Self::new(a)
    }

    pub fn amplitudes(&self) -> &[C64; 6] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Propagates the vector through the analyser matrix.
    pub fn through_analyser(&self) -> ModeVector {
        let v = bsm_matrix() * CVector::from_column_slice(&self.0);
        let mut a = [c64(0.0, 0.0); 6];
        a.copy_from_slice(v.as_slice());
        ModeVector(a)
    }

    pub fn port_amplitude(&self, port: Port) -> C64 {
        self.0[port.mode_index()]
    }
}

/// The Bell-state analyser as a 6×6 mode matrix, accumulated phases
/// dropped. Rows 5 and 6 vanish, so it is an isometry only on the span of
/// the four Bell vectors.
pub fn bsm_matrix() -> CMatrix {
    let (o, p, m) = (0.0, S, -S);
    #[rustfmt::skip]
    let rows = [
        o, o, o, p, m, o,
        o, o, o, m, m, o,
        o, o, m, o, o, m,
        o, o, p, o, o, m,
        o, o, o, o, o, o,
        o, o, o, o, o, o,
    ];
    nalgebra::DMatrix::<f64>::from_row_slice(6, 6, &rows).map(C64::from)
}

/// 6×4 embedding of `Q0 (pol) ⊗ Q1 (path)` into the mode basis:
/// `Hl → lH`, `Hr → rH`, `Vl → lV`, `Vr → rV`.
fn mode_embedding() -> CMatrix {
    let mut e = CMatrix::zeros(6, 4);
    for (two_qubit, mode) in [(0, 2), (1, 4), (2, 3), (3, 5)] {
        e[(mode, two_qubit)] = c64(1.0, 0.0);
    }
    e
}

/// Measurement row `⟨CH_k| 𝕌 E` acting on the `Q0 ⊗ Q1` space.
pub fn port_functional(port: Port) -> CMatrix {
    let full = bsm_matrix() * mode_embedding();
    full.rows(port.mode_index(), 1).into_owned()
}

/// Imperfect electro-optic modulators. A contrast `C` is read as an
/// intensity extinction ratio, i.e. each commanded flip fails with
/// probability `1/(1 + C)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EomModel {
    pub contrast_x: f64,
    pub contrast_z: f64,
}

impl EomModel {
    /// Contrasts of the σ_x and σ_z modulators used in the experiment.
    pub const MEASURED: EomModel = EomModel {
        contrast_x: 77.5,
        contrast_z: 29.7,
    };

    pub fn new(contrast_x: f64, contrast_z: f64) -> Result<Self> {
        let m = Self {
            contrast_x,
            contrast_z,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("contrast_x", self.contrast_x), ("contrast_z", self.contrast_z)] {
            if !(c > 1.0) || !c.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: c,
                    reason: "EOM contrast must be a finite number above 1",
                });
            }
        }
        Ok(())
    }

    pub fn epsilon_x(&self) -> f64 {
        1.0 / (1.0 + self.contrast_x)
    }

    pub fn epsilon_z(&self) -> f64 {
        1.0 / (1.0 + self.contrast_z)
    }
}

/// Beam displacer plus the two half-wave plates: `|H⟩_A|x⟩_B → |V⟩|l⟩|x⟩`,
/// `|V⟩_A|x⟩_B → |V⟩|r⟩|x⟩`, an 8×4 isometry into `Q0 ⊗ Q1 ⊗ Q2`.
fn swap_isometry() -> CMatrix {
    let mut w = CMatrix::zeros(8, 4);
    for pol_a in 0..2 {
        for pol_b in 0..2 {
            // Q0 = V (1), Q1 = path (H → l = 0, V → r = 1), Q2 = pol_b
            let row = 4 + pol_a * 2 + pol_b;
            w[(row, pol_a * 2 + pol_b)] = c64(1.0, 0.0);
        }
    }
    w
}

/// Moves source entanglement from the two polarizations onto
/// `Q1 (path) ⊗ Q2 (pol)`. The polarization of photon A factors out as `|V⟩`
/// and is traced away.
pub fn entanglement_swap(source: &MixedState) -> Result<MixedState> {
    if source.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: source.dim(),
        });
    }
    let w = swap_isometry();
    let full = MixedState::new(&w * source.matrix() * w.adjoint())?;
    full.partial_trace(&[1, 2], &[2, 2, 2])
}

/// `(|l⟩|V⟩ - |r⟩|H⟩)/√2` over `Q1 ⊗ Q2`, amplitudes `(lH, lV, rH, rV)`.
pub fn swapped_resource() -> PureState {
    let singlet = PureState::new(vec![
        c64(0.0, 0.0),
        c64(1.0, 0.0),
        c64(-1.0, 0.0),
        c64(0.0, 0.0),
    ])
    .expect("nonzero");
    let full = swap_isometry() * singlet.vector();
    // every amplitude lives in the Q0 = V block
    PureState::from_vector(full.rows(4, 4).into_owned()).expect("nonzero")
}

/// Multiplies by a phase so the largest amplitude is real and positive.
pub fn strip_global_phase(state: &PureState) -> PureState {
    let pivot = state
        .amplitudes()
        .iter()
        .cloned()
        .fold(c64(0.0, 0.0), |best, a| if a.norm() > best.norm() + 1e-12 { a } else { best });
    let phase = pivot.conj() / pivot.norm();
    PureState::from_vector(state.vector().map(|a| a * phase)).expect("nonzero")
}

#[derive(Clone, Debug)]
pub struct BellBranch {
    pub outcome: BellOutcome,
    /// Squared norm of the unnormalized branch.
    pub probability: f64,
    /// Normalized, phase-stripped state of Q2 before correction.
    pub state: PureState,
}

/// Expands `|φ⟩⁰ ⊗ resource¹²` in the Bell basis of `Q0 ⊗ Q1`.
pub fn bell_decompose(input: &PureState) -> Result<Vec<BellBranch>> {
    if input.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: input.dim(),
        });
    }
    let full = input.tensor(&swapped_resource());
    let amps = full.amplitudes();
    BellOutcome::ALL
        .into_iter()
        .map(|outcome| {
            let bell = outcome.bell_state();
            let mut cond = [c64(0.0, 0.0); 2];
            for (i, b) in bell.amplitudes().iter().enumerate() {
                for (q2, slot) in cond.iter_mut().enumerate() {
                    *slot += b.conj() * amps[i * 2 + q2];
                }
            }
            let probability = cond.iter().map(|a| a.norm_sqr()).sum();
            let state = strip_global_phase(&PureState::new(cond.to_vec())?);
            Ok(BellBranch {
                outcome,
                probability,
                state,
            })
        })
        .collect()
}

/// Feed-forward. Without a modulator model the exact Pauli correction is
/// applied; with one, every commanded flip `σ` becomes
/// `(1-ε)·σρσ† + ε·ρ`.
pub fn apply_correction(
    state: &MixedState,
    outcome: BellOutcome,
    eom: Option<&EomModel>,
) -> Result<MixedState> {
    if state.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: state.dim(),
        });
    }
    let corr = outcome.correction();
    let Some(eom) = eom else {
        return state.evolve(&corr.unitary());
    };
    let mut rho = state.clone();
    if corr.flip_x {
        rho = imperfect_flip(&rho, Pauli::X, eom.epsilon_x())?;
    }
    if corr.flip_z {
        rho = imperfect_flip(&rho, Pauli::Z, eom.epsilon_z())?;
    }
    Ok(rho)
}

fn imperfect_flip(rho: &MixedState, p: Pauli, eps: f64) -> Result<MixedState> {
    let flipped = rho.evolve(&p.matrix())?;
    MixedState::mix(1.0 - eps, &flipped, rho)
}

/// Exact (noisy) conditional output of every Bell outcome for an arbitrary
/// input state: source → swap → 6-mode BSM → plasmonic transit → feed-forward.
pub fn teleport_state(input: &PureState, channel: &ChannelModel) -> Result<Vec<ExactBranch>> {
    if input.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: input.dim(),
        });
    }
    channel.validate()?;
    let source = channel::werner(channel.werner_visibility)?;
    let resource = entanglement_swap(&source)?;
    let full = input.projector().tensor(&resource);
    let id2 = CMatrix::identity(2, 2);

    BellOutcome::ALL
        .into_iter()
        .map(|outcome| {
            let k = kron(&port_functional(outcome.port()), &id2);
            let branch = &k * full.matrix() * k.adjoint();
            let probability = branch.trace().re;
            let conditional = MixedState::from_unnormalized(branch)?;
            let transit = channel::apply_transit(&conditional, channel)?;
            let corrected = apply_correction(&transit, outcome, channel.eom.as_ref())?;
            Ok(ExactBranch {
                outcome,
                probability,
                state: corrected,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExactBranch {
    pub outcome: BellOutcome,
    pub probability: f64,
    pub state: MixedState,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeRecord {
    pub input: InputLabel,
    pub outcome: BellOutcome,
    pub port: Port,
    pub shots: u64,
    pub probability: f64,
    pub density_matrix: MixedState,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TeleportationRun {
    pub input: InputLabel,
    /// Heralding probability of the plasmonic link. Shots count detected
    /// coincidences, so states are conditioned on survival.
    pub survival_probability: f64,
    pub records: Vec<OutcomeRecord>,
}

impl TeleportationRun {
    pub fn total_shots(&self) -> u64 {
        self.records.iter().map(|r| r.shots).sum()
    }

    /// Mean over outcomes with equal 1/4 weights.
    pub fn mean_fidelity_uniform(&self) -> f64 {
        self.records.iter().map(|r| r.fidelity).sum::<f64>() / self.records.len() as f64
    }

    /// Mean over outcomes weighted by sampled occurrence.
    pub fn mean_fidelity_weighted(&self) -> f64 {
        let total = self.total_shots() as f64;
        self.records
            .iter()
            .map(|r| r.fidelity * r.shots as f64)
            .sum::<f64>()
            / total
    }

    /// Outcome-averaged output state (exact branch probabilities).
    pub fn average_output(&self) -> MixedState {
        let m = self
            .records
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, r| {
                acc + r.density_matrix.matrix().scale(r.probability)
            });
        MixedState::from_matrix_unchecked(m)
    }
}

/// Runs the protocol for one prepared state. Outcomes are sampled from the
/// exact branch probabilities with a seeded generator; every record carries
/// the exact conditional density matrix.
pub fn run_teleportation(
    input: InputLabel,
    channel: &ChannelModel,
    shots: u64,
    seed: u64,
) -> Result<TeleportationRun> {
    if shots == 0 {
        return Err(Error::InvalidParameter {
            name: "shots",
            value: 0.0,
            reason: "at least one shot is required",
        });
    }
    let phi = prepare_input(input);
    let branches = teleport_state(&phi, channel)?;

    let weights: Vec<f64> = branches.iter().map(|b| b.probability.max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::ZeroCounts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = [0u64; 4];
    for _ in 0..shots {
        tally[dist.sample(&mut rng)] += 1;
    }

    let records = branches
        .into_iter()
        .zip(tally)
        .map(|(b, shots)| {
            Ok(OutcomeRecord {
                input,
                outcome: b.outcome,
                port: b.outcome.port(),
                shots,
                probability: b.probability,
                fidelity: b.state.fidelity_pure(&phi)?,
                density_matrix: b.state,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(TeleportationRun {
        input,
        survival_probability: channel.transmittance,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn assert_state_eq(a: &PureState, b: &PureState) {
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-12, "{a:?} != {b:?}");
        }
    }

    #[test]
    fn prepared_inputs() {
        assert_eq!(prepare_input(InputLabel::H).amplitudes(), &[c64(1.0, 0.0), c64(0.0, 0.0)]);
        let d = prepare_input(InputLabel::D);
        assert_abs_diff_eq!(d.amplitudes()[0].re, S);
        assert_abs_diff_eq!(d.amplitudes()[1].re, S);
        let r = prepare_input(InputLabel::R);
        assert_abs_diff_eq!(r.amplitudes()[0].re, S);
        assert_abs_diff_eq!(r.amplitudes()[1].im, -S);
        assert_eq!("r".parse::<InputLabel>().unwrap(), InputLabel::R);
        assert!("Q".parse::<InputLabel>().is_err());
    }

    #[test]
    fn resource_amplitudes() {
        let res = swapped_resource();
        let expect = [0.0, S, -S, 0.0];
        for (a, e) in res.amplitudes().iter().zip(expect) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0);
        }
        let rho = res.projector();
        for keep in [0, 1] {
            let r = rho.partial_trace(&[keep], &[2, 2]).unwrap();
            assert!(max_abs(&(r.matrix() - MixedState::maximally_mixed(2).matrix())) < 1e-12);
        }
        let plus = PureState::new(vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)])
            .unwrap();
        assert!(res.inner(&plus).unwrap().norm() < 1e-15);
    }

    #[test]
    fn mixed_swap_matches_pure_swap() {
        let singlet = swapped_resource().projector(); // same amplitudes as the source singlet
        let swapped = entanglement_swap(&singlet).unwrap();
        assert!(max_abs(&(swapped.matrix() - swapped_resource().projector().matrix())) < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let h = prepare_input(InputLabel::H);
        let branches = bell_decompose(&h).unwrap();
        let get = |o| branches.iter().find(|b| b.outcome == o).unwrap();
        assert_state_eq(&get(BellOutcome::PsiMinus).state, &PureState::h());
        assert_state_eq(&get(BellOutcome::PhiMinus).state, &PureState::v());

        let d = prepare_input(InputLabel::D);
        let branches = bell_decompose(&d).unwrap();
        let psi_plus = &branches.iter().find(|b| b.outcome == BellOutcome::PsiPlus).unwrap().state;
        assert_state_eq(psi_plus, &strip_global_phase(&prepare_input(InputLabel::A)));
        for b in &branches {
            assert_abs_diff_eq!(b.probability, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn analyser_routes_bell_states_to_ports() {
        for outcome in BellOutcome::ALL {
            let out = outcome.mode_vector().through_analyser();
            for port in Port::ALL {
                let p = out.port_amplitude(port).norm_sqr();
                let expect = if port == outcome.port() { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn printed_bell_vectors() {
        let e = |v: &[f64; 6]| v.map(|x| c64(x * S, 0.0));
        assert_eq!(BellOutcome::PhiPlus.mode_vector().amplitudes(), &e(&[0., 0., 1., 0., 0., 1.]));
        assert_eq!(BellOutcome::PhiMinus.mode_vector().amplitudes(), &e(&[0., 0., 1., 0., 0., -1.]));
        assert_eq!(BellOutcome::PsiPlus.mode_vector().amplitudes(), &e(&[0., 0., 0., 1., 1., 0.]));
        assert_eq!(BellOutcome::PsiMinus.mode_vector().amplitudes(), &e(&[0., 0., 0., 1., -1., 0.]));
    }

    #[test]
    fn analyser_is_isometry_on_bell_subspace() {
        let images: Vec<CVector> = BellOutcome::ALL
            .iter()
            .map(|o| bsm_matrix() * CVector::from_column_slice(o.mode_vector().amplitudes()))
            .collect();
        for (i, a) in images.iter().enumerate() {
            for (j, b) in images.iter().enumerate() {
                let g = a.dotc(b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c64(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mode_vector_rejects_overnormalized() {
        assert!(ModeVector::new([c64(1.0, 0.0); 6]).is_err());
        assert!(ModeVector::new([c64(0.3, 0.0); 6]).is_ok());
    }

    #[test]
    fn correction_examples() {
        let v = PureState::v().projector();
        let out = apply_correction(&v, BellOutcome::PhiMinus, None).unwrap();
        assert!(max_abs(&(out.matrix() - PureState::h().projector().matrix())) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = crate::qcore::random::mixed_state(&mut rng, 2, 2);
        let out = apply_correction(&rho, BellOutcome::PsiMinus, None).unwrap();
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);

        let eom = EomModel::MEASURED;
        let eps = 1.0 / 78.5;
        let out = apply_correction(&v, BellOutcome::PhiMinus, Some(&eom)).unwrap();
        assert_abs_diff_eq!(out.matrix()[(0, 0)].re, 1.0 - eps, epsilon = 1e-15);
        assert_abs_diff_eq!(out.matrix()[(1, 1)].re, eps, epsilon = 1e-15);
    }

    #[test]
    fn eom_validation() {
        assert!(EomModel::new(1.0, 10.0).is_err());
        assert!(EomModel::new(f64::NAN, 10.0).is_err());
        let m = EomModel::new(77.5, 29.7).unwrap();
        assert!(m.epsilon_x() < 0.5 && m.epsilon_z() > 0.0);
    }

    #[test]
    fn ideal_run_reproduces_input() {
        for label in InputLabel::ALL {
            let run = run_teleportation(label, &ChannelModel::ideal(), 400, 1).unwrap();
            assert_eq!(run.total_shots(), 400);
            for r in &run.records {
                assert_abs_diff_eq!(r.fidelity, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(r.probability, 0.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn werner_run_fidelity() {
        let ch = ChannelModel::new(0.9, 1.0, None, 0.0).unwrap();
        let run = run_teleportation(InputLabel::D, &ch, 100, 2).unwrap();
        for r in &run.records {
            assert_abs_diff_eq!(r.fidelity, 0.95, epsilon = 1e-12);
        }
    }

    #[test]
    fn eom_run_fidelity_on_phi_minus() {
        let ch = ChannelModel::new(1.0, 1.0, Some(EomModel::MEASURED), 0.0).unwrap();
        let run = run_teleportation(InputLabel::H, &ch, 100, 2).unwrap();
        let r = run.records.iter().find(|r| r.outcome == BellOutcome::PhiMinus).unwrap();
        assert_abs_diff_eq!(r.fidelity, 1.0 - 1.0 / 78.5, epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let ch = ChannelModel::ideal();
        let a = run_teleportation(InputLabel::R, &ch, 1000, 77).unwrap();
        let b = run_teleportation(InputLabel::R, &ch, 1000, 77).unwrap();
        let c = run_teleportation(InputLabel::R, &ch, 1000, 78).unwrap();
        let shots = |r: &TeleportationRun| r.records.iter().map(|x| x.shots).collect::<Vec<_>>();
        assert_eq!(shots(&a), shots(&b));
        assert_ne!(shots(&a), shots(&c));
        assert!(run_teleportation(InputLabel::R, &ch, 0, 1).is_err());
    }

    #[test]
    fn record_json_fields() {
        let run = run_teleportation(InputLabel::H, &ChannelModel::ideal(), 8, 0).unwrap();
        let v = serde_json::to_value(&run.records[0]).unwrap();
        for key in ["input", "outcome", "port", "shots", "density_matrix", "fidelity"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["port"], "CH4");
    }
}
