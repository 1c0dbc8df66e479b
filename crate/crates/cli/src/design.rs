use std::fs::File;

use serde::Serialize;
use spp_teleport::channel::{
    dispersion_match, resonance_wavelength, DielectricTable, Interface, MetalPermittivity,
};
use spp_teleport::qcore::c64;
use spp_teleport::HoleArrayGeometry;

use crate::output::{ensure_dir, write_csv, write_json};
use crate::{CliError, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignPoint {
    pub period_nm: f64,
    pub mode: [i32; 2],
    pub interface: Interface,
    pub wavelength_nm: Option<f64>,
    /// Grating vector at normal incidence, rad/μm.
    pub k_grating: [f64; 2],
    pub k_spp: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignReport {
    pub points: Vec<DesignPoint>,
}

impl DesignReport {
    pub fn wavelength(&self, period_nm: f64, mode: [i32; 2], interface: Interface) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.period_nm == period_nm && p.mode == mode && p.interface == interface)
            .and_then(|p| p.wavelength_nm)
    }

    pub fn describe(&self) -> String {
        let lines: Vec<String> = self
            .points
            .iter()
            .map(|p| match p.wavelength_nm {
                Some(l) => format!("a0={} mode=({},{}) {:?}: {:.1} nm", p.period_nm, p.mode[0], p.mode[1], p.interface, l),
                None => format!(
                    "a0={} mode=({},{}) {:?}: {}",
                    p.period_nm,
                    p.mode[0],
                    p.mode[1],
                    p.interface,
                    p.error.as_deref().unwrap_or("no solution")
                ),
            })
            .collect();
        format!("design:\n  {}", lines.join("\n  "))
    }
}

fn metal(cfg: &RunConfig) -> Result<MetalPermittivity, CliError> {
    if let Some([re, im]) = cfg.design.metal_permittivity {
        return Ok(MetalPermittivity::Constant(c64(re, im)));
    }
    match cfg.design.dielectric_table.as_deref() {
        Some("builtin:gold") => Ok(MetalPermittivity::Table(DielectricTable::gold_johnson_christy())),
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            let table = DielectricTable::from_csv(file).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
            Ok(MetalPermittivity::Table(table))
        }
        None => Err(CliError::Config("missing dielectric table".into())),
    }
}

pub fn cmd_design(cfg: &RunConfig) -> Result<DesignReport, CliError> {
    let d = &cfg.design;
    let metal = metal(cfg)?;
    let mut points = Vec::new();
    for &period in &d.periods_nm {
        for &mode in &d.modes {
            let geom = HoleArrayGeometry::new(period, d.hole_diameter_nm, (mode[0], mode[1]), d.eps_substrate, d.eps_air, metal.clone())
                .map_err(CliError::config)?;
            let g = dispersion_match(&geom, [0.0, 0.0]).map(|k| k * 1e3);
            for &interface in &d.interfaces {
                let (wavelength_nm, error) = match resonance_wavelength(&geom, interface) {
                    Ok(l) => (Some(l), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                points.push(DesignPoint {
                    period_nm: period,
                    mode,
                    interface,
                    wavelength_nm,
                    k_grating: g,
                    k_spp: wavelength_nm.map(|_| g[0].hypot(g[1])),
                    error,
                });
            }
        }
    }

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_json(dir, "design.json", &points)?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.period_nm.to_string(),
                p.mode[0].to_string(),
                p.mode[1].to_string(),
                format!("{:?}", p.interface).to_lowercase(),
                opt(p.wavelength_nm),
                p.k_grating[0].to_string(),
                p.k_grating[1].to_string(),
                opt(p.k_spp),
            ]
        })
        .collect();
    write_csv(
        dir,
        "design.csv",
        &["period_nm", "m1", "m2", "interface", "wavelength_nm", "gx_per_um", "gy_per_um", "k_spp_per_um"],
        &rows,
    )?;
    Ok(DesignReport { points })
}
