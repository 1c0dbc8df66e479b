//! Plasmonic link models: Werner source noise, heralded loss, extra
//! depolarization, the multiplicative fidelity budget, the hole-array
//! resonance calculator and the SPP propagation decay fit.

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::protocol::EomModel;
use crate::qcore::{c64, MixedState, PureState, C64};
use crate::{Error, Result};

/// Hole period of the fabricated array.
pub const SAMPLE_PERIOD_NM: f64 = 700.0;
pub const SAMPLE_HOLE_DIAMETER_NM: f64 = 200.0;
/// Peak transmittance of the hole array near resonance.
pub const SAMPLE_TRANSMITTANCE: f64 = 0.008;
/// Measured 1/e intensity decay length along the diagonal.
pub const SPP_DECAY_LENGTH_UM: f64 = 4.48;
/// Crystalline quartz, ordinary ray, near 810 nm (n ≈ 1.5384).
pub const QUARTZ_PERMITTIVITY: f64 = 1.5384 * 1.5384;
pub const AIR_PERMITTIVITY: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Werner weight of the source state.
    pub werner_visibility: f64,
    /// Survival probability of the plasmonic link.
    pub transmittance: f64,
    /// `None` means ideal feed-forward.
    pub eom: Option<EomModel>,
    /// Extra depolarizing probability on photon B.
    pub depolarizing_extra: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelModel {
    pub fn ideal() -> Self {
        Self {
            werner_visibility: 1.0,
            transmittance: 1.0,
            eom: None,
            depolarizing_extra: 0.0,
        }
    }

    pub fn new(
        werner_visibility: f64,
        transmittance: f64,
        eom: Option<EomModel>,
        depolarizing_extra: f64,
    ) -> Result<Self> {
        let m = Self {
            werner_visibility,
            transmittance,
            eom,
            depolarizing_extra,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.werner_visibility) {
            return Err(Error::InvalidParameter {
                name: "werner_visibility",
                value: self.werner_visibility,
                reason: "must lie in [0, 1]",
            });
        }
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "transmittance",
                value: self.transmittance,
                reason: "must lie in (0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&self.depolarizing_extra) {
            return Err(Error::InvalidParameter {
                name: "depolarizing_extra",
                value: self.depolarizing_extra,
                reason: "must lie in [0, 1]",
            });
        }
        if let Some(eom) = &self.eom {
            eom.validate()?;
        }
        Ok(())
    }

    /// Bloch-vector shrink factor of the effective single-qubit channel.
    pub fn shrink_factor(&self) -> f64 {
        self.werner_visibility * (1.0 - self.depolarizing_extra)
    }

    /// Noise model calibrated on a fidelity budget plus the measured EOM
    /// contrasts.
    ///
    /// Budget components are read as Werner fidelities: the source weight
    /// comes from `f_source` alone and the remaining components are folded
    /// into `depolarizing_extra` so that the total Werner weight matches
    /// the product `F_tot`.
    pub fn calibrated(budget: &FidelityBudget, with_spp: bool) -> Result<Self> {
        budget.validate()?;
        let source = werner_weight_from_fidelity(budget.f_source);
        let total = werner_weight_from_fidelity(budget.total(with_spp));
        if source <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "f_source",
                value: budget.f_source,
                reason: "source fidelity must exceed 1/4",
            });
        }
        let extra = (1.0 - total.max(0.0) / source).clamp(0.0, 1.0);
        Self::new(
            source,
            if with_spp { SAMPLE_TRANSMITTANCE } else { 1.0 },
            Some(EomModel::MEASURED),
            extra,
        )
    }
}

fn singlet() -> PureState {
    PureState::new(vec![
        c64(0.0, 0.0),
        c64(1.0, 0.0),
        c64(-1.0, 0.0),
        c64(0.0, 0.0),
    ])
    .expect("nonzero")
}

/// `v|Ψ⁻⟩⟨Ψ⁻| + (1-v)·I/4`.
pub fn werner(visibility: f64) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter {
            name: "visibility",
            value: visibility,
            reason: "must lie in [0, 1]",
        });
    }
    MixedState::mix(visibility, &singlet().projector(), &MixedState::maximally_mixed(4))
}

/// Singlet fidelity of a Werner state with weight `v`.
pub fn werner_fidelity(visibility: f64) -> f64 {
    visibility + (1.0 - visibility) / 4.0
}

/// Inverse of [`werner_fidelity`].
pub fn werner_weight_from_fidelity(fidelity: f64) -> f64 {
    (4.0 * fidelity - 1.0) / 3.0
}

/// `λρ + (1-λ)·I/d`.
pub fn depolarize(rho: &MixedState, shrink: f64) -> Result<MixedState> {
    if !(0.0..=1.0).contains(&shrink) {
        return Err(Error::InvalidParameter {
            name: "shrink",
            value: shrink,
            reason: "must lie in [0, 1]",
        });
    }
    MixedState::mix(shrink, rho, &MixedState::maximally_mixed(rho.dim()))
}

/// Effective single-qubit channel seen by a teleported state: source
/// Werner noise composed with extra depolarization. Loss is heralded, so the
/// returned state is conditioned on survival and the survival probability is
/// reported alongside.
pub fn apply_channel(rho: &MixedState, model: &ChannelModel) -> Result<(MixedState, f64)> {
    model.validate()?;
    Ok((depolarize(rho, model.shrink_factor())?, model.transmittance))
}

/// What photon B picks up in transit (extra depolarization only; source
/// noise enters through the resource state).
pub fn apply_transit(rho: &MixedState, model: &ChannelModel) -> Result<MixedState> {
    depolarize(rho, 1.0 - model.depolarizing_extra)
}

/// Component fidelities of the noise budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityBudget {
    pub f_source: f64,
    pub f_bsm: f64,
    pub f_spp: f64,
    pub f_eom_x: f64,
    pub f_eom_z: f64,
    pub f_oe: f64,
}

impl FidelityBudget {
    /// Component values measured with the hole array removed.
    pub const WITHOUT_SPP: FidelityBudget = FidelityBudget {
        f_source: 0.9834,
        f_bsm: 0.9787,
        f_spp: 1.0,
        f_eom_x: 0.9763,
        f_eom_z: 0.9916,
        f_oe: 0.9847,
    };

    /// Component values measured with the plasmonic link in place.
    pub const WITH_SPP: FidelityBudget = FidelityBudget {
        f_source: 0.9834,
        f_bsm: 0.9787,
        f_spp: 0.9730,
        f_eom_x: 0.9561,
        f_eom_z: 0.9680,
        f_oe: 0.9847,
    };

    pub fn preset(with_spp: bool) -> FidelityBudget {
        if with_spp {
            Self::WITH_SPP
        } else {
            Self::WITHOUT_SPP
        }
    }

    /// Net component fidelities from raw averages that still include the
    /// other optical elements (`oe`), by dividing them out.
    pub fn from_raw_averages(
        source: f64,
        bsm: f64,
        spp_with_oe: f64,
        eom_x_with_oe: f64,
        eom_z_with_oe: f64,
        oe: f64,
    ) -> Result<Self> {
        let b = Self {
            f_source: source,
            f_bsm: bsm,
            f_spp: spp_with_oe / oe,
            f_eom_x: eom_x_with_oe / oe,
            f_eom_z: eom_z_with_oe / oe,
            f_oe: oe,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_source", self.f_source),
            ("f_bsm", self.f_bsm),
            ("f_spp", self.f_spp),
            ("f_eom_x", self.f_eom_x),
            ("f_eom_z", self.f_eom_z),
            ("f_oe", self.f_oe),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "component fidelity must lie in [0, 1]",
                });
            }
        }
        Ok(())
    }

    pub fn total(&self, with_spp: bool) -> f64 {
        fidelity_budget_total(self, with_spp)
    }
}

pub fn fidelity_budget_total(budget: &FidelityBudget, with_spp: bool) -> f64 {
    let spp = if with_spp { budget.f_spp } else { 1.0 };
    budget.f_source * budget.f_bsm * spp * budget.f_eom_x * budget.f_eom_z * budget.f_oe
}

/// Tabulated complex permittivity, linearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct DielectricTable {
    wavelengths_nm: Vec<f64>,
    eps: Vec<C64>,
}

#[derive(Deserialize)]
struct DielectricRow {
    wavelength_nm: f64,
    eps_re: f64,
    eps_im: f64,
}

const GOLD_JOHNSON_CHRISTY: &str = include_str!("../data/gold_johnson_christy.csv");

impl DielectricTable {
    pub fn new(mut rows: Vec<(f64, C64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::EmptyTable);
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Malformed {
                line: 0,
                column: "wavelength_nm".into(),
                message: "wavelengths must be distinct".into(),
            });
        }
        Ok(Self {
            wavelengths_nm: rows.iter().map(|r| r.0).collect(),
            eps: rows.iter().map(|r| r.1).collect(),
        })
    }

    /// CSV with header `wavelength_nm,eps_re,eps_im`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<DielectricRow>() {
            let row = rec.map_err(|e| csv_error(&e))?;
            rows.push((row.wavelength_nm, c64(row.eps_re, row.eps_im)));
        }
        Self::new(rows)
    }

    /// Gold, Johnson & Christy (1972), 188-1937 nm.
    pub fn gold_johnson_christy() -> Self {
        Self::from_csv(GOLD_JOHNSON_CHRISTY.as_bytes()).expect("bundled table is valid")
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap())
    }

    pub fn at(&self, wavelength_nm: f64) -> Option<C64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&wavelength_nm) {
            return None;
        }
        let i = self
            .wavelengths_nm
            .partition_point(|&w| w <= wavelength_nm)
            .clamp(1, self.wavelengths_nm.len() - 1);
        let (w0, w1) = (self.wavelengths_nm[i - 1], self.wavelengths_nm[i]);
        let t = (wavelength_nm - w0) / (w1 - w0);
        Some(self.eps[i - 1] * (1.0 - t) + self.eps[i] * t)
    }
}

pub(crate) fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let column = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err
            .field()
            .map_or_else(|| "?".to_string(), |f| format!("#{}", f + 1)),
        _ => "?".to_string(),
    };
    Error::Malformed {
        line,
        column,
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetalPermittivity {
    Constant(C64),
    Table(DielectricTable),
}

impl MetalPermittivity {
    fn at(&self, wavelength_nm: f64) -> Option<C64> {
        match self {
            MetalPermittivity::Constant(e) => Some(*e),
            MetalPermittivity::Table(t) => t.at(wavelength_nm),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interface {
    Substrate,
    Air,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoleArrayGeometry {
    pub period_nm: f64,
    pub hole_diameter_nm: f64,
    pub mode: (i32, i32),
    pub eps_substrate: f64,
    pub eps_air: f64,
    pub metal: MetalPermittivity,
}

impl HoleArrayGeometry {
    pub fn new(
        period_nm: f64,
        hole_diameter_nm: f64,
        mode: (i32, i32),
        eps_substrate: f64,
        eps_air: f64,
        metal: MetalPermittivity,
    ) -> Result<Self> {
        if !(hole_diameter_nm > 0.0 && period_nm > hole_diameter_nm) {
            return Err(Error::InvalidParameter {
                name: "period_nm",
                value: period_nm,
                reason: "period must exceed the hole diameter, which must be positive",
            });
        }
        if mode == (0, 0) {
            return Err(Error::InvalidParameter {
                name: "mode",
                value: 0.0,
                reason: "mode (0, 0) does not couple to a surface plasmon",
            });
        }
        Ok(Self {
            period_nm,
            hole_diameter_nm,
            mode,
            eps_substrate,
            eps_air,
            metal,
        })
    }

    /// The fabricated gold-on-quartz array at mode (1, 1).
    pub fn sample() -> Self {
        Self::new(
            SAMPLE_PERIOD_NM,
            SAMPLE_HOLE_DIAMETER_NM,
            (1, 1),
            QUARTZ_PERMITTIVITY,
            AIR_PERMITTIVITY,
            MetalPermittivity::Table(DielectricTable::gold_johnson_christy()),
        )
        .expect("sample geometry is valid")
    }

    pub fn with_mode(&self, mode: (i32, i32)) -> Result<Self> {
        Self::new(
            self.period_nm,
            self.hole_diameter_nm,
            mode,
            self.eps_substrate,
            self.eps_air,
            self.metal.clone(),
        )
    }

    pub fn with_period(&self, period_nm: f64) -> Result<Self> {
        Self::new(
            period_nm,
            self.hole_diameter_nm,
            self.mode,
            self.eps_substrate,
            self.eps_air,
            self.metal.clone(),
        )
    }

    fn dielectric(&self, interface: Interface) -> f64 {
        match interface {
            Interface::Substrate => self.eps_substrate,
            Interface::Air => self.eps_air,
        }
    }
}

/// Right-hand side of the resonance condition evaluated with the metal
/// permittivity at `wavelength_nm` (real part used).
pub fn resonance_rhs(geom: &HoleArrayGeometry, interface: Interface, wavelength_nm: f64) -> Result<f64> {
    let eps_m = geom
        .metal
        .at(wavelength_nm)
        .ok_or_else(|| Error::NoFixedPoint(format!("{wavelength_nm:.1} nm is outside the dielectric table")))?
        .re;
    let eps_d = geom.dielectric(interface);
    let denom = eps_d + eps_m;
    if denom.abs() < 1e-12 {
        return Err(Error::NoFixedPoint("ε_d + Re ε_M vanishes".into()));
    }
    let ratio = eps_d * eps_m / denom;
    if ratio <= 0.0 {
        return Err(Error::NoFixedPoint(format!(
            "no bound surface mode at {wavelength_nm:.1} nm (ε_d ε_M / (ε_d + ε_M) = {ratio:.3})"
        )));
    }
    let (m1, m2) = geom.mode;
    let order = ((m1 * m1 + m2 * m2) as f64).sqrt();
    Ok(geom.period_nm / order * ratio.sqrt())
}

/// Self-consistent resonance wavelength in nm.
pub fn resonance_wavelength(geom: &HoleArrayGeometry, interface: Interface) -> Result<f64> {
    let (m1, m2) = geom.mode;
    let order = ((m1 * m1 + m2 * m2) as f64).sqrt();
    let (lo, hi) = match &geom.metal {
        MetalPermittivity::Constant(_) => return resonance_rhs(geom, interface, 0.0),
        MetalPermittivity::Table(t) => t.range(),
    };
    // large-|ε_M| limit as a starting guess
    let mut lambda = (geom.period_nm / order * geom.dielectric(interface).sqrt()).clamp(lo, hi);
    for _ in 0..500 {
        let next = resonance_rhs(geom, interface, lambda)?;
        if (next - lambda).abs() < 1e-9 {
            return Ok(next);
        }
        lambda = next;
    }
    bisect_resonance(geom, interface, lo, hi)
}

fn bisect_resonance(geom: &HoleArrayGeometry, interface: Interface, lo: f64, hi: f64) -> Result<f64> {
    let g = |l: f64| resonance_rhs(geom, interface, l).map(|r| r - l);
    let steps = 2000;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let l = lo + (hi - lo) * i as f64 / steps as f64;
        let Ok(v) = g(l) else {
            prev = None;
            continue;
        };
        if let Some((pl, pv)) = prev {
            if pv.signum() != v.signum() {
                let (mut a, mut b, mut ga) = (pl, l, pv);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let gm = g(m)?;
                    if gm.signum() == ga.signum() {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                return Ok(0.5 * (a + b));
            }
        }
        prev = Some((l, v));
    }
    Err(Error::NoFixedPoint(format!(
        "no self-consistent wavelength in [{lo:.1}, {hi:.1}] nm"
    )))
}

/// `k_SPP = k_∥ + m₁b₁ + m₂b₂` with `|b| = 2π/a₀` along the lattice axes.
pub fn dispersion_match(geom: &HoleArrayGeometry, k_parallel: [f64; 2]) -> [f64; 2] {
    let b = 2.0 * PI / geom.period_nm;
    let (m1, m2) = geom.mode;
    [k_parallel[0] + m1 as f64 * b, k_parallel[1] + m2 as f64 * b]
}

/// `I₀·exp(-x/L)` at every position.
pub fn decay_profile(decay_length_um: f64, i0: f64, positions_um: &[f64]) -> Result<Vec<f64>> {
    if !(decay_length_um > 0.0) {
        return Err(Error::InvalidParameter {
            name: "decay_length_um",
            value: decay_length_um,
            reason: "must be positive",
        });
    }
    check_positions(positions_um)?;
    Ok(positions_um
        .iter()
        .map(|x| i0 * (-x / decay_length_um).exp())
        .collect())
}

fn check_positions(positions_um: &[f64]) -> Result<()> {
    if positions_um.first().is_some_and(|&x| x < 0.0) {
        return Err(Error::InvalidParameter {
            name: "positions",
            value: positions_um[0],
            reason: "positions must be non-negative",
        });
    }
    if positions_um.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "positions",
            value: f64::NAN,
            reason: "positions must be strictly increasing",
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub decay_length_um: f64,
    pub i0: f64,
}

/// Least squares on `ln I = ln I₀ - x/L`.
pub fn fit_decay(positions_um: &[f64], intensities: &[f64]) -> Result<DecayFit> {
    if positions_um.len() != intensities.len() {
        return Err(Error::DimensionMismatch {
            expected: positions_um.len(),
            found: intensities.len(),
        });
    }
    if positions_um.len() < 2 {
        return Err(Error::EmptyTable);
    }
    check_positions(positions_um)?;
    if let Some(&bad) = intensities.iter().find(|&&i| !(i > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "intensity",
            value: bad,
            reason: "intensities must be positive",
        });
    }
    let design = DMatrix::from_fn(positions_um.len(), 2, |r, c| if c == 0 { 1.0 } else { positions_um[r] });
    let y = nalgebra::DVector::from_iterator(intensities.len(), intensities.iter().map(|i| i.ln()));
    let beta = (design.transpose() * &design)
        .try_inverse()
        .ok_or(Error::RankDeficient)?
        * design.transpose()
        * y;
    let slope = beta[1];
    if !(slope < 0.0) {
        return Err(Error::InvalidParameter {
            name: "slope",
            value: slope,
            reason: "intensities do not decay",
        });
    }
    Ok(DecayFit {
        decay_length_um: -1.0 / slope,
        i0: beta[0].exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::CMatrix;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Normal;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn werner_limits() {
        let w1 = werner(1.0).unwrap();
        assert!(max_abs(&(w1.matrix() - singlet().projector().matrix())) < 1e-15);
        let w0 = werner(0.0).unwrap();
        assert!(max_abs(&(w0.matrix() - MixedState::maximally_mixed(4).matrix())) < 1e-15);
        assert!(werner(1.2).is_err());
        assert!(werner(-0.1).is_err());
    }

    #[test]
    fn werner_singlet_fidelity() {
        let w = werner(0.9734).unwrap();
        let f = w.fidelity_pure(&singlet()).unwrap();
        assert_abs_diff_eq!(f, 0.98005, epsilon = 1e-12);
        assert_abs_diff_eq!(werner_fidelity(0.9734), f, epsilon = 1e-12);
        assert_abs_diff_eq!(werner_weight_from_fidelity(f), 0.9734, epsilon = 1e-12);
    }

    #[test]
    fn werner_spectrum() {
        for v in [0.0, 0.25, 0.6, 0.9734, 1.0] {
            let mut eig = werner(v).unwrap().eigenvalues();
            eig.sort_by(f64::total_cmp);
            assert_abs_diff_eq!(eig[3], (1.0 + 3.0 * v) / 4.0, epsilon = 1e-12);
            for e in &eig[..3] {
                assert_abs_diff_eq!(*e, (1.0 - v) / 4.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn channel_examples() {
        let rho = PureState::h().projector();
        let (out, t) = apply_channel(&rho, &ChannelModel::ideal()).unwrap();
        assert_eq!(t, 1.0);
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);

        let lossy = ChannelModel::new(1.0, 0.008, None, 0.0).unwrap();
        let (out, t) = apply_channel(&rho, &lossy).unwrap();
        assert_eq!(t, 0.008);
        assert!(max_abs(&(out.matrix() - rho.matrix())) < 1e-15);

        let full = ChannelModel::new(1.0, 0.3, None, 1.0).unwrap();
        let (out, t) = apply_channel(&rho, &full).unwrap();
        assert_eq!(t, 0.3);
        assert!(max_abs(&(out.matrix() - MixedState::maximally_mixed(2).matrix())) < 1e-15);
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelModel::new(1.1, 1.0, None, 0.0).is_err());
        assert!(ChannelModel::new(1.0, 0.0, None, 0.0).is_err());
        assert!(ChannelModel::new(1.0, 1.0, None, -0.1).is_err());
        assert!(ChannelModel::new(1.0, 1.0, Some(EomModel { contrast_x: 0.5, contrast_z: 3.0 }), 0.0).is_err());
    }

    #[test]
    fn budget_products() {
        assert_abs_diff_eq!(FidelityBudget::WITHOUT_SPP.total(false), 0.9175, epsilon = 5e-5);
        assert_abs_diff_eq!(FidelityBudget::WITH_SPP.total(true), 0.8535, epsilon = 1e-4);
        let ones = FidelityBudget {
            f_source: 1.0,
            f_bsm: 1.0,
            f_spp: 1.0,
            f_eom_x: 1.0,
            f_eom_z: 1.0,
            f_oe: 1.0,
        };
        assert_eq!(ones.total(true), 1.0);
    }

    #[test]
    fn budget_from_raw_averages_rounds_to_printed_components() {
        let with = FidelityBudget::from_raw_averages(0.9834, 0.9787, 0.9581, 0.9415, 0.9532, 0.9847).unwrap();
        let without = FidelityBudget::from_raw_averages(0.9834, 0.9787, 0.9847, 0.9614, 0.9764, 0.9847).unwrap();
        let r = |x: f64| (x * 1e4).round() / 1e4;
        assert_eq!(r(with.f_spp), 0.9730);
        assert_eq!(r(with.f_eom_x), 0.9561);
        assert_eq!(r(with.f_eom_z), 0.9680);
        assert_eq!(r(without.f_eom_x), 0.9763);
        assert_eq!(r(without.f_eom_z), 0.9916);
    }

    #[test]
    fn budget_json_has_six_components() {
        let v = serde_json::to_value(FidelityBudget::WITH_SPP).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 6);
        assert_eq!(v["f_spp"], 0.973);
    }

    #[test]
    fn calibrated_model_reproduces_total_weight() {
        let m = ChannelModel::calibrated(&FidelityBudget::WITH_SPP, true).unwrap();
        let total = werner_weight_from_fidelity(FidelityBudget::WITH_SPP.total(true));
        assert_abs_diff_eq!(m.shrink_factor(), total, epsilon = 1e-12);
        assert_eq!(m.eom, Some(EomModel::MEASURED));
        assert_eq!(m.transmittance, SAMPLE_TRANSMITTANCE);
    }

    fn constant_geometry(mode: (i32, i32), period: f64) -> HoleArrayGeometry {
        HoleArrayGeometry::new(
            period,
            200.0,
            mode,
            2.25,
            1.0,
            MetalPermittivity::Constant(c64(-25.0, 1.5)),
        )
        .unwrap()
    }

    #[test]
    fn resonance_scaling_at_fixed_permittivity() {
        let l11 = resonance_wavelength(&constant_geometry((1, 1), 700.0), Interface::Substrate).unwrap();
        let l10 = resonance_wavelength(&constant_geometry((1, 0), 700.0), Interface::Substrate).unwrap();
        assert_abs_diff_eq!(l11 / l10, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        let l2 = resonance_wavelength(&constant_geometry((1, 1), 1400.0), Interface::Substrate).unwrap();
        assert_abs_diff_eq!(l2 / l11, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn sample_resonance_is_a_stable_fixed_point() {
        let geom = HoleArrayGeometry::sample();
        let l = resonance_wavelength(&geom, Interface::Substrate).unwrap();
        assert!((l - 809.0).abs() <= 40.0, "λ = {l}");
        let again = resonance_rhs(&geom, Interface::Substrate, l).unwrap();
        assert!((again - l).abs() < 0.1);
        for mode in [(1, -1), (-1, 1), (-1, -1)] {
            let lm = resonance_wavelength(&geom.with_mode(mode).unwrap(), Interface::Substrate).unwrap();
            assert_abs_diff_eq!(lm, l, epsilon = 1e-9);
        }
    }

    #[test]
    fn resonance_outside_table_is_an_error() {
        let geom = HoleArrayGeometry::sample().with_period(3000.0).unwrap();
        assert!(matches!(
            resonance_wavelength(&geom, Interface::Substrate),
            Err(Error::NoFixedPoint(_))
        ));
    }

    #[test]
    fn geometry_invariants() {
        let metal = MetalPermittivity::Constant(c64(-20.0, 1.0));
        assert!(HoleArrayGeometry::new(700.0, 200.0, (0, 0), 2.25, 1.0, metal.clone()).is_err());
        assert!(HoleArrayGeometry::new(200.0, 300.0, (1, 0), 2.25, 1.0, metal.clone()).is_err());
        assert!(HoleArrayGeometry::new(700.0, 0.0, (1, 0), 2.25, 1.0, metal).is_err());
    }

    #[test]
    fn dispersion_examples() {
        let geom = HoleArrayGeometry::sample();
        let k = dispersion_match(&geom, [0.0, 0.0]);
        let mag = (k[0] * k[0] + k[1] * k[1]).sqrt();
        assert_abs_diff_eq!(mag, 2.0 * PI * 2f64.sqrt() / 700.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k[0], k[1]);
        for mode in [(1, -1), (-1, 1), (-1, -1)] {
            let km = dispersion_match(&geom.with_mode(mode).unwrap(), [0.0, 0.0]);
            assert_abs_diff_eq!((km[0] * km[0] + km[1] * km[1]).sqrt(), mag, epsilon = 1e-15);
        }
    }

    #[test]
    fn decay_round_trip() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let ys = decay_profile(SPP_DECAY_LENGTH_UM, 3.0, &xs).unwrap();
        let fit = fit_decay(&xs, &ys).unwrap();
        assert_abs_diff_eq!(fit.decay_length_um, SPP_DECAY_LENGTH_UM, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.i0, 3.0, epsilon = 1e-9);
        let at_l = decay_profile(SPP_DECAY_LENGTH_UM, 1.0, &[SPP_DECAY_LENGTH_UM]).unwrap();
        assert_abs_diff_eq!(at_l[0], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn decay_fit_errors() {
        assert!(fit_decay(&[0.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(fit_decay(&[1.0, 0.5], &[1.0, 0.5]).is_err());
        assert!(decay_profile(4.0, 1.0, &[-1.0, 0.0]).is_err());
    }

    #[test]
    fn decay_fit_under_multiplicative_noise() {
        let xs: Vec<f64> = (0..50).map(|i| 15.0 * i as f64 / 49.0).collect();
        let clean = decay_profile(SPP_DECAY_LENGTH_UM, 1.0, &xs).unwrap();
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut inside = 0;
        for _ in 0..1000 {
            let ys: Vec<f64> = clean.iter().map(|y| y * (1.0 + rng.sample(noise))).collect();
            let l = fit_decay(&xs, &ys).unwrap().decay_length_um;
            if (l - SPP_DECAY_LENGTH_UM).abs() <= 0.5 {
                inside += 1;
            }
        }
        assert!(inside >= 950, "{inside}/1000");
    }

    #[test]
    fn dielectric_csv_errors_name_the_line() {
        let bad = "wavelength_nm,eps_re,eps_im\n700,-20,1\n710,abc,1\n";
        match DielectricTable::from_csv(bad.as_bytes()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let table = DielectricTable::gold_johnson_christy();
        assert!(table.at(100.0).is_none());
        let e = table.at(756.0).unwrap();
        assert_abs_diff_eq!(e.re, -20.610164, epsilon = 1e-9);
    }
}
