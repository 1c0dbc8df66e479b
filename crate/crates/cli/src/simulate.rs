use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use spp_teleport::channel::fidelity_budget_total;
use spp_teleport::counts::{sigma_violation, CLASSICAL_FIDELITY_BOUND, CLASSICAL_PROCESS_BOUND};
use spp_teleport::protocol::{run_teleportation, TeleportationRun};
use spp_teleport::qcore::{matrix_to_json, CMatrix};
use spp_teleport::tomo::{
    bloch_map_of, monte_carlo_errors, process_fidelity, qpt_reconstruct, qst_reconstruct, qst_reconstruct_frequencies,
    sample_records, sphere_points, BasisFrequencies, QstOptions,
};
use spp_teleport::{
    AffineBlochMap, BellOutcome, ChannelModel, FidelityBudget, InputLabel, MeasurementRecord, MixedState, Port,
    ProcessMatrix,
};

use crate::output::{ensure_dir, write_csv, write_json};
use crate::{CliError, RunConfig};

const QPT_INPUTS: [InputLabel; 4] = [InputLabel::H, InputLabel::V, InputLabel::D, InputLabel::L];
const SURFACE_POINTS: usize = 400;
const TOMOGRAPHY_STREAM: u64 = 0x746f_6d6f;

#[derive(Clone, Debug, Serialize)]
pub struct TomographyResult {
    pub input: InputLabel,
    pub outcome: BellOutcome,
    pub port: Port,
    pub records: Vec<MeasurementRecord>,
    pub density_matrix: MixedState,
    pub fidelity: f64,
    pub error_std: f64,
    pub fidelity_exact: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProcessResult {
    pub chi: ProcessMatrix,
    pub fidelity: f64,
    pub error_std: f64,
    pub chi_exact: ProcessMatrix,
    pub fidelity_exact: f64,
    pub cp_projection: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BudgetSummary {
    pub preset: Option<crate::ChannelPreset>,
    pub components: Option<FidelityBudget>,
    pub product: Option<f64>,
    pub model: ChannelModel,
    pub shrink_factor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub shots: u64,
    pub inputs: Vec<InputLabel>,
    pub mean_fidelity_exact: f64,
    pub mean_fidelity_exact_weighted: f64,
    pub mean_fidelity: f64,
    pub mean_fidelity_std: f64,
    pub process_fidelity: f64,
    pub process_fidelity_std: f64,
    pub process_fidelity_exact: f64,
    pub sigma_vs_classical_fidelity: Option<f64>,
    pub sigma_vs_classical_process: Option<f64>,
    #[serde(skip)]
    pub tomography: Vec<TomographyResult>,
    #[serde(skip)]
    pub process: Option<ProcessResult>,
    #[serde(skip)]
    pub bloch_map: Option<AffineBlochMap>,
}

impl SimulateReport {
    pub fn describe(&self) -> String {
        format!(
            "simulate: mean fidelity {:.4} ± {:.4} (exact {:.4}), process fidelity {:.4} ± {:.4} (exact {:.4})",
            self.mean_fidelity,
            self.mean_fidelity_std,
            self.mean_fidelity_exact,
            self.process_fidelity,
            self.process_fidelity_std,
            self.process_fidelity_exact
        )
    }
}

fn flatten(records: &[MeasurementRecord]) -> Vec<u64> {
    records
        .iter()
        .flat_map(|r| [r.outcome_plus_counts, r.outcome_minus_counts])
        .collect()
}

fn unflatten(template: &[MeasurementRecord], counts: &[f64]) -> Vec<BasisFrequencies> {
    template
        .iter()
        .zip(counts.chunks(2))
        .map(|(r, c)| BasisFrequencies {
            basis: r.basis,
            plus: c[0],
            minus: c[1],
        })
        .collect()
}

fn reconstructed_fidelity(template: &[MeasurementRecord], counts: &[f64], input: InputLabel, opts: QstOptions) -> f64 {
    qst_reconstruct_frequencies(&unflatten(template, counts), opts)
        .and_then(|rho| rho.fidelity_pure(&input.state()))
        .unwrap_or(f64::NAN)
}

/// Outcome-averaged state with fixed weights.
fn weighted_state(states: &[&MixedState], weights: &[f64]) -> Result<MixedState, spp_teleport::Error> {
    let total: f64 = weights.iter().sum();
    let m = states
        .iter()
        .zip(weights)
        .fold(CMatrix::zeros(2, 2), |acc, (s, w)| acc + s.matrix().scale(w / total));
    MixedState::new(m)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateReport, CliError> {
    let model = cfg.channel.model()?;
    let opts = QstOptions {
        maximum_likelihood: cfg.tomography.ml,
    };
    let trials = cfg.tomography.mc_trials;

    let labels: Vec<InputLabel> = InputLabel::ALL
        .into_iter()
        .filter(|l| cfg.input_states.contains(l) || QPT_INPUTS.contains(l))
        .collect();
    let reported: Vec<InputLabel> = InputLabel::ALL
        .into_iter()
        .filter(|l| cfg.input_states.contains(l))
        .collect();

    let runs: Vec<TeleportationRun> = labels
        .par_iter()
        .map(|&l| {
            let idx = InputLabel::ALL.iter().position(|&x| x == l).unwrap() as u64;
            run_teleportation(l, &model, cfg.shots, cfg.seed.wrapping_add(idx))
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::data)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TOMOGRAPHY_STREAM);
    let mut tomography = Vec::new();
    for run in &runs {
        for rec in &run.records {
            let per_basis = (rec.shots / 3).max(1);
            let records = sample_records(&rec.density_matrix, per_basis, &mut rng).map_err(CliError::data)?;
            let rho = qst_reconstruct(&records, opts).map_err(CliError::data)?;
            let target = run.input.state();
            tomography.push(TomographyResult {
                input: run.input,
                outcome: rec.outcome,
                port: rec.port,
                fidelity: rho.fidelity_pure(&target).map_err(CliError::data)?,
                density_matrix: rho,
                error_std: 0.0,
                fidelity_exact: rec.fidelity,
                records,
            });
        }
    }
    for (i, t) in tomography.iter_mut().enumerate() {
        let input = t.input;
        let template = t.records.clone();
        t.error_std = monte_carlo_errors(&flatten(&t.records), trials, cfg.seed.wrapping_add(1000 + i as u64), |c| {
            reconstructed_fidelity(&template, c, input, opts)
        })
        .map_err(CliError::data)?
        .std;
    }

    let shown: Vec<&TomographyResult> = tomography.iter().filter(|t| reported.contains(&t.input)).collect();
    let shown_runs: Vec<&TeleportationRun> = runs.iter().filter(|r| reported.contains(&r.input)).collect();
    let mean_fidelity = shown.iter().map(|t| t.fidelity).sum::<f64>() / shown.len() as f64;
    let mean_fidelity_exact = shown.iter().map(|t| t.fidelity_exact).sum::<f64>() / shown.len() as f64;
    let mean_fidelity_exact_weighted =
        shown_runs.iter().map(|r| r.mean_fidelity_weighted()).sum::<f64>() / shown_runs.len() as f64;

    let templates: Vec<(InputLabel, Vec<MeasurementRecord>)> =
        shown.iter().map(|t| (t.input, t.records.clone())).collect();
    let all_counts: Vec<u64> = templates.iter().flat_map(|(_, r)| flatten(r)).collect();
    let mean_fidelity_std = monte_carlo_errors(&all_counts, trials, cfg.seed.wrapping_add(1), |c| {
        let mut off = 0;
        let mut sum = 0.0;
        for (input, tpl) in &templates {
            let n = 2 * tpl.len();
            sum += reconstructed_fidelity(tpl, &c[off..off + n], *input, opts);
            off += n;
        }
        sum / templates.len() as f64
    })
    .map_err(CliError::data)?
    .std;

    let process = process_tomography(cfg, &runs, &tomography, opts)?;
    let bloch_map = bloch_map_of(&process.chi);

    let report = SimulateReport {
        seed: cfg.seed,
        shots: cfg.shots,
        inputs: reported.clone(),
        mean_fidelity_exact,
        mean_fidelity_exact_weighted,
        mean_fidelity,
        mean_fidelity_std,
        process_fidelity: process.fidelity,
        process_fidelity_std: process.error_std,
        process_fidelity_exact: process.fidelity_exact,
        sigma_vs_classical_fidelity: sigma_violation(mean_fidelity, CLASSICAL_FIDELITY_BOUND, mean_fidelity_std).ok(),
        sigma_vs_classical_process: sigma_violation(process.fidelity, CLASSICAL_PROCESS_BOUND, process.error_std).ok(),
        tomography,
        process: Some(process),
        bloch_map: Some(bloch_map),
    };
    write_outputs(cfg, &model, &runs, &reported, &report)?;
    Ok(report)
}

fn process_tomography(
    cfg: &RunConfig,
    runs: &[TeleportationRun],
    tomography: &[TomographyResult],
    opts: QstOptions,
) -> Result<ProcessResult, CliError> {
    let mut exact_pairs = Vec::new();
    let mut qst_pairs = Vec::new();
    // per QPT input: shot weights and measurement templates of its four outcomes
    let mut layout: Vec<(Vec<f64>, Vec<Vec<MeasurementRecord>>)> = Vec::new();
    for l in QPT_INPUTS {
        let run = runs.iter().find(|r| r.input == l).expect("QPT inputs are always simulated");
        let parts: Vec<&TomographyResult> = tomography.iter().filter(|t| t.input == l).collect();
        let weights: Vec<f64> = run.records.iter().map(|r| r.shots as f64).collect();
        let input = l.state().projector();
        let states: Vec<&MixedState> = parts.iter().map(|t| &t.density_matrix).collect();
        let out = weighted_state(&states, &weights).map_err(CliError::data)?;
        exact_pairs.push((input.clone(), run.average_output()));
        qst_pairs.push((input, out));
        layout.push((weights, parts.iter().map(|t| t.records.clone()).collect()));
    }
    let ideal = ProcessMatrix::identity();
    let chi = qpt_reconstruct(&qst_pairs, cfg.tomography.cp_projection).map_err(CliError::data)?;
    let chi_exact = qpt_reconstruct(&exact_pairs, false).map_err(CliError::data)?;

    let counts: Vec<u64> = layout.iter().flat_map(|(_, t)| t.iter().flat_map(|r| flatten(r))).collect();
    let cp = cfg.tomography.cp_projection;
    let error_std = monte_carlo_errors(&counts, cfg.tomography.mc_trials, cfg.seed.wrapping_add(2), |c| {
        let mut off = 0;
        let mut pairs = Vec::with_capacity(4);
        for (l, (weights, templates)) in QPT_INPUTS.iter().zip(&layout) {
            let mut states = Vec::with_capacity(4);
            for tpl in templates {
                let n = 2 * tpl.len();
                match qst_reconstruct_frequencies(&unflatten(tpl, &c[off..off + n]), opts) {
                    Ok(s) => states.push(s),
                    Err(_) => return f64::NAN,
                }
                off += n;
            }
            let refs: Vec<&MixedState> = states.iter().collect();
            match weighted_state(&refs, weights) {
                Ok(s) => pairs.push((l.state().projector(), s)),
                Err(_) => return f64::NAN,
            }
        }
        qpt_reconstruct(&pairs, cp).map_or(f64::NAN, |chi| process_fidelity(&chi, &ideal))
    })
    .map_err(CliError::data)?
    .std;

    Ok(ProcessResult {
        fidelity: process_fidelity(&chi, &ideal),
        fidelity_exact: process_fidelity(&chi_exact, &ideal),
        chi,
        chi_exact,
        error_std,
        cp_projection: cp,
    })
}

#[derive(Serialize)]
struct ProcessJson<'a> {
    chi: Vec<Vec<[f64; 2]>>,
    chi_exact: Vec<Vec<[f64; 2]>>,
    fidelity: f64,
    error_std: f64,
    fidelity_exact: f64,
    cp_projection: bool,
    bloch_map: &'a AffineBlochMap,
}

fn write_outputs(
    cfg: &RunConfig,
    model: &ChannelModel,
    runs: &[TeleportationRun],
    reported: &[InputLabel],
    report: &SimulateReport,
) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;

    let shown_runs: Vec<&TeleportationRun> = runs.iter().filter(|r| reported.contains(&r.input)).collect();
    write_json(dir, "records.json", &shown_runs)?;

    let shown: Vec<&TomographyResult> = report.tomography.iter().filter(|t| reported.contains(&t.input)).collect();
    write_json(dir, "tomography.json", &shown)?;

    let rows: Vec<Vec<String>> = shown
        .iter()
        .map(|t| {
            let rec = runs
                .iter()
                .find(|r| r.input == t.input)
                .and_then(|r| r.records.iter().find(|x| x.outcome == t.outcome))
                .expect("record exists");
            vec![
                t.outcome.name().to_string(),
                t.input.name().to_string(),
                t.port.to_string(),
                rec.shots.to_string(),
                rec.probability.to_string(),
                t.fidelity_exact.to_string(),
                t.fidelity.to_string(),
                t.error_std.to_string(),
            ]
        })
        .collect();
    write_csv(
        dir,
        "fidelity_table.csv",
        &["outcome", "input", "port", "shots", "probability", "fidelity_exact", "fidelity", "fidelity_std"],
        &rows,
    )?;

    let process = report.process.as_ref().expect("process computed");
    let map = report.bloch_map.as_ref().expect("map computed");
    write_json(
        dir,
        "process.json",
        &ProcessJson {
            chi: matrix_to_json(process.chi.chi()),
            chi_exact: matrix_to_json(process.chi_exact.chi()),
            fidelity: process.fidelity,
            error_std: process.error_std,
            fidelity_exact: process.fidelity_exact,
            cp_projection: process.cp_projection,
            bloch_map: map,
        },
    )?;

    let surface: Vec<Vec<String>> = sphere_points(SURFACE_POINTS)
        .into_iter()
        .map(|p| {
            let q = map.apply(p);
            p.iter().chain(q.iter()).map(|x| x.to_string()).collect()
        })
        .collect();
    write_csv(dir, "bloch_surface.csv", &["x", "y", "z", "x_out", "y_out", "z_out"], &surface)?;

    let budget = cfg.channel.budget();
    write_json(
        dir,
        "budget.json",
        &BudgetSummary {
            preset: cfg.channel.preset,
            components: budget.map(|(b, _)| b),
            product: budget.map(|(b, s)| fidelity_budget_total(&b, s)),
            model: *model,
            shrink_factor: model.shrink_factor(),
        },
    )?;
    write_json(dir, "summary.json", report)
}
