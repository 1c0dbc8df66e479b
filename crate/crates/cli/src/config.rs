use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spp_teleport::channel::{FidelityBudget, QUARTZ_PERMITTIVITY, SAMPLE_HOLE_DIAMETER_NM, SAMPLE_PERIOD_NM};
use spp_teleport::channel::Interface;
use spp_teleport::protocol::InputLabel;
use spp_teleport::tomo::DEFAULT_MC_TRIALS;
use spp_teleport::{ChannelModel, EomModel};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Analyze,
    Design,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub shots: u64,
    pub input_states: Vec<InputLabel>,
    pub output_dir: PathBuf,
    pub channel: ChannelConfig,
    pub tomography: TomographyConfig,
    pub analyze: AnalyzeConfig,
    pub design: DesignConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 1,
            shots: 100_000,
            input_states: InputLabel::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            channel: ChannelConfig::default(),
            tomography: TomographyConfig::default(),
            analyze: AnalyzeConfig::default(),
            design: DesignConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPreset {
    Ideal,
    WithoutSpp,
    WithSpp,
}

/// A preset, optionally overridden field by field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub preset: Option<ChannelPreset>,
    pub werner_visibility: Option<f64>,
    pub transmittance: Option<f64>,
    pub depolarizing_extra: Option<f64>,
    /// `false` turns the feed-forward into perfect Pauli gates.
    pub eom: Option<bool>,
    pub eom_contrast_x: Option<f64>,
    pub eom_contrast_z: Option<f64>,
}

impl ChannelConfig {
    pub fn budget(&self) -> Option<(FidelityBudget, bool)> {
        match self.preset {
            Some(ChannelPreset::WithoutSpp) => Some((FidelityBudget::WITHOUT_SPP, false)),
            Some(ChannelPreset::WithSpp) => Some((FidelityBudget::WITH_SPP, true)),
            _ => None,
        }
    }

    pub fn model(&self) -> Result<ChannelModel, CliError> {
        let mut m = match self.budget() {
            Some((b, with_spp)) => ChannelModel::calibrated(&b, with_spp).map_err(CliError::config)?,
            None => ChannelModel::ideal(),
        };
        if let Some(v) = self.werner_visibility {
            m.werner_visibility = v;
        }
        if let Some(t) = self.transmittance {
            m.transmittance = t;
        }
        if let Some(p) = self.depolarizing_extra {
            m.depolarizing_extra = p;
        }
        if self.eom_contrast_x.is_some() || self.eom_contrast_z.is_some() {
            let base = m.eom.unwrap_or(EomModel::MEASURED);
            m.eom = Some(EomModel {
                contrast_x: self.eom_contrast_x.unwrap_or(base.contrast_x),
                contrast_z: self.eom_contrast_z.unwrap_or(base.contrast_z),
            });
        }
        match self.eom {
            Some(false) => m.eom = None,
            Some(true) if m.eom.is_none() => m.eom = Some(EomModel::MEASURED),
            _ => {}
        }
        m.validate().map_err(CliError::config)?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    pub ml: bool,
    pub cp_projection: bool,
    pub mc_trials: usize,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            ml: false,
            cp_projection: false,
            mc_trials: DEFAULT_MC_TRIALS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Long-format count CSVs; the bundled tables are used when empty.
    pub counts: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    /// CSV `wavelength_nm,eps_re,eps_im`, or `builtin:gold`.
    pub dielectric_table: Option<String>,
    /// Wavelength-independent metal permittivity `[re, im]`.
    pub metal_permittivity: Option<[f64; 2]>,
    pub eps_substrate: f64,
    pub eps_air: f64,
    pub hole_diameter_nm: f64,
    pub periods_nm: Vec<f64>,
    pub modes: Vec<[i32; 2]>,
    pub interfaces: Vec<Interface>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            dielectric_table: None,
            metal_permittivity: None,
            eps_substrate: QUARTZ_PERMITTIVITY,
            eps_air: 1.0,
            hole_diameter_nm: SAMPLE_HOLE_DIAMETER_NM,
            periods_nm: vec![SAMPLE_PERIOD_NM],
            modes: vec![[1, 1], [1, 0]],
            interfaces: vec![Interface::Substrate],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::Config(format!("config mode {m:?} does not match the {mode:?} command")));
            }
        }
        match mode {
            Mode::Simulate => {
                if self.shots == 0 {
                    return Err(CliError::Config("shots must be at least 1".into()));
                }
                if self.input_states.is_empty() {
                    return Err(CliError::Config("input_states is empty".into()));
                }
                self.check_trials()?;
                self.channel.model()?;
            }
            Mode::Analyze => self.check_trials()?,
            Mode::Design => {
                if self.design.dielectric_table.is_none() && self.design.metal_permittivity.is_none() {
                    return Err(CliError::Config(
                        "design needs a dielectric_table (path or builtin:gold) or metal_permittivity".into(),
                    ));
                }
                if self.design.periods_nm.is_empty() || self.design.modes.is_empty() || self.design.interfaces.is_empty() {
                    return Err(CliError::Config("design needs periods_nm, modes and interfaces".into()));
                }
            }
        }
        Ok(())
    }

    fn check_trials(&self) -> Result<(), CliError> {
        if self.tomography.mc_trials < 100 {
            return Err(CliError::Config("tomography.mc_trials must be at least 100".into()));
        }
        Ok(())
    }
}
