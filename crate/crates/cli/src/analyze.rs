use std::fs::File;

use serde::Serialize;
use spp_teleport::counts::{
    bundled_tables, chsh_counts, chsh_errors, chsh_s, correlation, fidelity_table, parse_counts_csv, sigma_violation,
    FidelityTable, CHSH_SETTINGS, CLASSICAL_FIDELITY_BOUND, LOCAL_CHSH_BOUND,
};
use spp_teleport::{BellOutcome, CountsTable, InputLabel, TableBlock, TableKind};

use crate::output::{ensure_dir, write_csv, write_json};
use crate::{CliError, RunConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisEntry {
    pub statistic: String,
    pub block: TableBlock,
    pub value: f64,
    pub std: f64,
    pub bound: f64,
    pub sigma_vs_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeReport {
    pub entries: Vec<AnalysisEntry>,
    pub fidelity_tables: Vec<FidelityTable>,
}

impl AnalyzeReport {
    pub fn entry(&self, statistic: &str, block: TableBlock) -> Option<&AnalysisEntry> {
        self.entries.iter().find(|e| e.statistic == statistic && e.block == block)
    }

    pub fn describe(&self) -> String {
        let lines: Vec<String> = self
            .entries
            .iter()
            .map(|e| format!("{} [{}] = {:.4} ± {:.4}", e.statistic, e.block, e.value, e.std))
            .collect();
        format!("analyze:\n  {}", lines.join("\n  "))
    }
}

fn load_tables(cfg: &RunConfig) -> Result<Vec<CountsTable>, CliError> {
    if cfg.analyze.counts.is_empty() {
        let mut t = bundled_tables(TableKind::Chsh);
        t.extend(bundled_tables(TableKind::Fidelity));
        return Ok(t);
    }
    let mut tables = Vec::new();
    for path in &cfg.analyze.counts {
        let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let parsed = parse_counts_csv(file).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        tables.extend(parsed);
    }
    Ok(tables)
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeReport, CliError> {
    let tables = load_tables(cfg)?;
    let trials = cfg.tomography.mc_trials;
    let mut entries = Vec::new();
    let mut fidelity_tables = Vec::new();
    let mut chsh_rows = Vec::new();

    for table in &tables {
        match table.kind {
            TableKind::Chsh => {
                let s = chsh_s(table).map_err(CliError::data)?;
                let mc = chsh_errors(table, trials, cfg.seed).map_err(CliError::data)?;
                entries.push(AnalysisEntry {
                    statistic: "chsh_s".into(),
                    block: table.block,
                    value: s,
                    std: mc.std,
                    bound: LOCAL_CHSH_BOUND,
                    sigma_vs_bound: sigma_violation(s, LOCAL_CHSH_BOUND, mc.std).unwrap_or(f64::NAN),
                });
                let c = chsh_counts(table).map_err(CliError::data)?;
                for (i, setting) in CHSH_SETTINGS.iter().enumerate() {
                    let row = [c[4 * i], c[4 * i + 1], c[4 * i + 2], c[4 * i + 3]];
                    let e = correlation(row).map_err(CliError::data)?;
                    let mut line = vec![table.block.to_string(), setting.to_string()];
                    line.extend(row.iter().map(|n| n.to_string()));
                    line.push(e.to_string());
                    chsh_rows.push(line);
                }
            }
            TableKind::Fidelity => {
                let f = fidelity_table(table, trials, cfg.seed).map_err(CliError::data)?;
                entries.push(AnalysisEntry {
                    statistic: "mean_fidelity".into(),
                    block: table.block,
                    value: f.mean,
                    std: f.mean_std,
                    bound: CLASSICAL_FIDELITY_BOUND,
                    sigma_vs_bound: sigma_violation(f.mean, CLASSICAL_FIDELITY_BOUND, f.mean_std).unwrap_or(f64::NAN),
                });
                fidelity_tables.push(f);
            }
        }
    }

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_json(dir, "analysis.json", &entries)?;
    write_json(dir, "fidelity_tables.json", &fidelity_tables)?;
    write_csv(
        dir,
        "chsh_correlations.csv",
        &["block", "setting", "n_pp", "n_pm", "n_mp", "n_mm", "correlation"],
        &chsh_rows,
    )?;
    let mut cell_rows = Vec::new();
    for f in &fidelity_tables {
        for (r, o) in BellOutcome::ALL.iter().enumerate() {
            for (c, i) in InputLabel::ALL.iter().enumerate() {
                cell_rows.push(vec![
                    f.block.to_string(),
                    o.name().to_string(),
                    i.name().to_string(),
                    f.cells[r][c].to_string(),
                    f.cell_std[r][c].to_string(),
                ]);
            }
        }
    }
    write_csv(dir, "fidelity_cells.csv", &["block", "outcome", "input", "fidelity", "std"], &cell_rows)?;

    Ok(AnalyzeReport {
        entries,
        fidelity_tables,
    })
}
