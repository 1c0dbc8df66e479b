//! Coincidence-count tables and the statistics derived from them: CHSH
//! correlations, per-state fidelities, table means and σ-distances from
//! classical bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::channel::csv_error;
use crate::protocol::{BellOutcome, InputLabel};
use crate::qcore::{c64, CMatrix, MixedState};
use crate::tomo::{monte_carlo_errors, McSummary, Statistic};
use crate::{Error, Result};

pub const LOCAL_CHSH_BOUND: f64 = 2.0;
pub const CLASSICAL_FIDELITY_BOUND: f64 = 2.0 / 3.0;
pub const CLASSICAL_PROCESS_BOUND: f64 = 0.5;

pub const CHSH_OUTCOMES: [&str; 4] = ["++", "+-", "-+", "--"];
pub const FIDELITY_OUTCOMES: [&str; 2] = ["phi", "perp"];
/// Setting pairs in the order they enter `S`.
pub const CHSH_SETTINGS: [&str; 4] = ["t1_t2", "t1_t2p", "t1p_t2", "t1p_t2p"];

const BUNDLED_CHSH: &str = include_str!("../data/chsh_counts.csv");
const BUNDLED_FIDELITY: &str = include_str!("../data/fidelity_counts.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Chsh,
    Fidelity,
}

impl TableKind {
    pub fn outcomes(self) -> &'static [&'static str] {
        match self {
            TableKind::Chsh => &CHSH_OUTCOMES,
            TableKind::Fidelity => &FIDELITY_OUTCOMES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableBlock {
    WithoutSpp,
    WithSpp,
}

impl TableBlock {
    pub const ALL: [TableBlock; 2] = [TableBlock::WithoutSpp, TableBlock::WithSpp];

    pub fn name(self) -> &'static str {
        match self {
            TableBlock::WithoutSpp => "without_spp",
            TableBlock::WithSpp => "with_spp",
        }
    }
}

impl fmt::Display for TableBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountsRow {
    pub setting: String,
    pub counts: BTreeMap<String, u64>,
}

impl CountsRow {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// One block of one table. Every row carries the full outcome set of its
/// kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountsTable {
    pub kind: TableKind,
    pub block: TableBlock,
    rows: Vec<CountsRow>,
}

impl CountsTable {
    pub fn new(kind: TableKind, block: TableBlock, rows: Vec<CountsRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        for (i, row) in rows.iter().enumerate() {
            if rows[..i].iter().any(|r| r.setting == row.setting) {
                return Err(Error::Malformed {
                    line: 0,
                    column: "setting".into(),
                    message: format!("duplicate setting {}", row.setting),
                });
            }
            for o in kind.outcomes() {
                if !row.counts.contains_key(*o) {
                    return Err(Error::MissingRow(format!("{} outcome {}", row.setting, o)));
                }
            }
            if let Some(extra) = row.counts.keys().find(|k| !kind.outcomes().contains(&k.as_str())) {
                return Err(Error::Malformed {
                    line: 0,
                    column: "outcome".into(),
                    message: format!("unknown outcome {extra} for setting {}", row.setting),
                });
            }
        }
        Ok(Self { kind, block, rows })
    }

    pub fn rows(&self) -> &[CountsRow] {
        &self.rows
    }

    pub fn row(&self, setting: &str) -> Result<&CountsRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting)
            .ok_or_else(|| Error::MissingRow(format!("{} {}", self.block, setting)))
    }

    pub fn count(&self, setting: &str, outcome: &str) -> Result<u64> {
        Ok(self.row(setting)?.counts[outcome])
    }

    /// Counts of one setting in the kind's outcome order.
    pub fn ordered(&self, setting: &str) -> Result<Vec<u64>> {
        let row = self.row(setting)?;
        Ok(self.kind.outcomes().iter().map(|o| row.counts[*o]).collect())
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(CountsRow::total).sum()
    }

    /// Same table with every count multiplied by `k`.
    pub fn scaled(&self, k: u64) -> CountsTable {
        let rows = self
            .rows
            .iter()
            .map(|r| CountsRow {
                setting: r.setting.clone(),
                counts: r.counts.iter().map(|(o, n)| (o.clone(), n * k)).collect(),
            })
            .collect();
        CountsTable { rows, ..self.clone() }
    }
}

#[derive(Deserialize)]
struct CsvRow {
    kind: TableKind,
    block: TableBlock,
    setting: String,
    outcome: String,
    count: u64,
}

/// Reads long-format `kind,block,setting,outcome,count` records into one
/// table per `(kind, block)` pair, in order of first appearance.
pub fn parse_counts_csv<R: Read>(reader: R) -> Result<Vec<CountsTable>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    for need in ["kind", "block", "setting", "outcome", "count"] {
        if !headers.iter().any(|h| h == need) {
            return Err(Error::Malformed {
                line: 1,
                column: need.into(),
                message: format!("missing column {need}"),
            });
        }
    }

    let mut order: Vec<(TableKind, TableBlock)> = Vec::new();
    let mut grouped: BTreeMap<(TableKind, TableBlock), Vec<CountsRow>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record.deserialize(Some(&headers)).map_err(|e| {
            let mut err = csv_error(&e);
            if let Error::Malformed { line: l, .. } = &mut err {
                *l = line;
            }
            err
        })?;
        if !row.kind.outcomes().contains(&row.outcome.as_str()) {
            return Err(Error::Malformed {
                line,
                column: "outcome".into(),
                message: format!("unknown outcome {:?}", row.outcome),
            });
        }
        let key = (row.kind, row.block);
        if !order.contains(&key) {
            order.push(key);
        }
        let rows = grouped.entry(key).or_default();
        let entry = match rows.iter().position(|r| r.setting == row.setting) {
            Some(i) => &mut rows[i],
            None => {
                rows.push(CountsRow {
                    setting: row.setting.clone(),
                    counts: BTreeMap::new(),
                });
                rows.last_mut().unwrap()
            }
        };
        if entry.counts.insert(row.outcome.clone(), row.count).is_some() {
            return Err(Error::Malformed {
                line,
                column: "outcome".into(),
                message: format!("duplicate count for {} {}", row.setting, row.outcome),
            });
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyTable);
    }
    order
        .into_iter()
        .map(|key| CountsTable::new(key.0, key.1, grouped.remove(&key).unwrap()))
        .collect()
}

pub fn bundled_tables(kind: TableKind) -> Vec<CountsTable> {
    let text = match kind {
        TableKind::Chsh => BUNDLED_CHSH,
        TableKind::Fidelity => BUNDLED_FIDELITY,
    };
    parse_counts_csv(text.as_bytes()).expect("bundled counts are well formed")
}

pub fn bundled_table(kind: TableKind, block: TableBlock) -> CountsTable {
    bundled_tables(kind)
        .into_iter()
        .find(|t| t.block == block)
        .expect("bundled block present")
}

/// `(N₊₊ − N₊₋ − N₋₊ + N₋₋) / ΣN`.
pub fn correlation(counts: [u64; 4]) -> Result<f64> {
    let total: u128 = counts.iter().map(|&c| c as u128).sum();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let num = counts[0] as i128 - counts[1] as i128 - counts[2] as i128 + counts[3] as i128;
    Ok(num as f64 / total as f64)
}

/// Polarizer angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub theta1: f64,
    pub theta1_prime: f64,
    pub theta2: f64,
    pub theta2_prime: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        Self {
            theta1: 0.0,
            theta1_prime: 45.0,
            theta2: 22.5,
            theta2_prime: 67.5,
        }
    }
}

impl ChshSettings {
    /// Angle pairs matching [`CHSH_SETTINGS`].
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.theta1, self.theta2),
            (self.theta1, self.theta2_prime),
            (self.theta1_prime, self.theta2),
            (self.theta1_prime, self.theta2_prime),
        ]
    }
}

fn s_from_correlations(e: [f64; 4]) -> f64 {
    (e[0] - e[1] + e[2] + e[3]).abs()
}

/// The sixteen CHSH counts, setting-major in [`CHSH_SETTINGS`] order.
pub fn chsh_counts(table: &CountsTable) -> Result<[u64; 16]> {
    if table.kind != TableKind::Chsh {
        return Err(Error::MissingRow("CHSH table expected".into()));
    }
    let mut out = [0u64; 16];
    for (i, s) in CHSH_SETTINGS.iter().enumerate() {
        out[i * 4..i * 4 + 4].copy_from_slice(&table.ordered(s)?);
    }
    Ok(out)
}

/// `|E(θ₁,θ₂) − E(θ₁,θ₂′) + E(θ₁′,θ₂) + E(θ₁′,θ₂′)|`.
pub fn chsh_s(table: &CountsTable) -> Result<f64> {
    let c = chsh_counts(table)?;
    let mut e = [0.0; 4];
    for (i, slot) in e.iter_mut().enumerate() {
        *slot = correlation([c[4 * i], c[4 * i + 1], c[4 * i + 2], c[4 * i + 3]])?;
    }
    Ok(s_from_correlations(e))
}

fn polarizer(theta_deg: f64) -> CMatrix {
    let t = theta_deg.to_radians();
    let (s, c) = t.sin_cos();
    CMatrix::from_row_slice(2, 2, &[c64(c * c, 0.0), c64(c * s, 0.0), c64(c * s, 0.0), c64(s * s, 0.0)])
}

/// Joint outcome probabilities `(++, +-, -+, --)` for linear polarizers at
/// `theta1` on the first photon and `theta2` on the second.
pub fn analytic_probabilities(rho: &MixedState, theta1: f64, theta2: f64) -> Result<[f64; 4]> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let a = [polarizer(theta1), polarizer(theta1 + 90.0)];
    let b = [polarizer(theta2), polarizer(theta2 + 90.0)];
    let mut p = [0.0; 4];
    for i in 0..2 {
        for j in 0..2 {
            let proj = crate::qcore::kron(&a[i], &b[j]);
            p[2 * i + j] = (rho.matrix() * proj).trace().re;
        }
    }
    Ok(p)
}

pub fn analytic_correlation(rho: &MixedState, theta1: f64, theta2: f64) -> Result<f64> {
    let p = analytic_probabilities(rho, theta1, theta2)?;
    Ok(p[0] - p[1] - p[2] + p[3])
}

pub fn analytic_chsh(rho: &MixedState, settings: &ChshSettings) -> Result<f64> {
    let mut e = [0.0; 4];
    for (slot, (t1, t2)) in e.iter_mut().zip(settings.pairs()) {
        *slot = analytic_correlation(rho, t1, t2)?;
    }
    Ok(s_from_correlations(e))
}

/// `N_φ / (N_φ + N_φ⊥)`.
pub fn fidelity_from_counts(n_phi: u64, n_perp: u64) -> Result<f64> {
    let total = n_phi as u128 + n_perp as u128;
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    Ok(n_phi as f64 / total as f64)
}

pub fn fidelity_setting(outcome: BellOutcome, input: InputLabel) -> String {
    format!("{}:{}", outcome.name(), input.name())
}

/// Per-cell fidelities with rows in [`BellOutcome::ALL`] order and columns
/// in [`InputLabel::ALL`] order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityTable {
    pub block: TableBlock,
    pub cells: [[f64; 6]; 4],
    pub cell_std: [[f64; 6]; 4],
    /// Unweighted mean over the 24 cells.
    pub mean: f64,
    /// Monte Carlo std of the mean.
    pub mean_std: f64,
    /// Average of the per-cell stds.
    pub mean_cell_std: f64,
    pub trials: usize,
}

fn fidelity_counts(table: &CountsTable) -> Result<Vec<u64>> {
    if table.kind != TableKind::Fidelity {
        return Err(Error::MissingRow("fidelity table expected".into()));
    }
    let mut out = Vec::with_capacity(48);
    for o in BellOutcome::ALL {
        for i in InputLabel::ALL {
            out.extend(table.ordered(&fidelity_setting(o, i))?);
        }
    }
    Ok(out)
}

fn mean_fidelity(c: &[f64]) -> f64 {
    c.chunks(2).map(|p| Statistic::StateFidelity.evaluate(p)).sum::<f64>() / (c.len() / 2) as f64
}

pub fn fidelity_table(table: &CountsTable, trials: usize, seed: u64) -> Result<FidelityTable> {
    let counts = fidelity_counts(table)?;
    let mut cells = [[0.0; 6]; 4];
    let mut cell_std = [[0.0; 6]; 4];
    for r in 0..4 {
        for c in 0..6 {
            let k = 2 * (6 * r + c);
            cells[r][c] = fidelity_from_counts(counts[k], counts[k + 1])?;
            let mc = monte_carlo_errors(&counts[k..k + 2], trials, seed.wrapping_add(1 + (6 * r + c) as u64), |x| {
                Statistic::StateFidelity.evaluate(x)
            })?;
            cell_std[r][c] = mc.std;
        }
    }
    let mean = cells.iter().flatten().sum::<f64>() / 24.0;
    let mean_std = monte_carlo_errors(&counts, trials, seed, mean_fidelity)?.std;
    let mean_cell_std = cell_std.iter().flatten().sum::<f64>() / 24.0;
    Ok(FidelityTable {
        block: table.block,
        cells,
        cell_std,
        mean,
        mean_std,
        mean_cell_std,
        trials,
    })
}

/// Monte Carlo spread of `|S|`.
pub fn chsh_errors(table: &CountsTable, trials: usize, seed: u64) -> Result<McSummary> {
    let c = chsh_counts(table)?;
    monte_carlo_errors(&c, trials, seed, |x| Statistic::ChshS.evaluate(x))
}

/// `(value − bound) / std`.
pub fn sigma_violation(value: f64, bound: f64, std: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::InvalidParameter {
            name: "std",
            value: std,
            reason: "standard deviation must be positive",
        });
    }
    Ok((value - bound) / std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{tensor, PureState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn singlet() -> MixedState {
        BellOutcome::PsiMinus.bell_state().projector()
    }

    #[test]
    fn correlation_examples() {
        assert_abs_diff_eq!(correlation([71100, 5141100, 6729000, 275100]).unwrap(), -0.94332, epsilon = 5e-6);
        assert_eq!(correlation([7, 7, 7, 7]).unwrap(), 0.0);
        assert_eq!(correlation([9, 0, 0, 9]).unwrap(), 1.0);
        assert!(matches!(correlation([0; 4]), Err(Error::ZeroCounts)));
    }

    #[test]
    fn bundled_chsh_values() {
        let s0 = chsh_s(&bundled_table(TableKind::Chsh, TableBlock::WithoutSpp)).unwrap();
        let s1 = chsh_s(&bundled_table(TableKind::Chsh, TableBlock::WithSpp)).unwrap();
        assert!((s0 - 2.551).abs() <= 0.001, "{s0}");
        assert!((s1 - 2.281).abs() <= 0.003, "{s1}");
    }

    #[test]
    fn chsh_missing_row() {
        let t = bundled_table(TableKind::Chsh, TableBlock::WithoutSpp);
        let rows = t.rows()[..3].to_vec();
        let partial = CountsTable::new(TableKind::Chsh, TableBlock::WithoutSpp, rows).unwrap();
        assert!(matches!(chsh_s(&partial), Err(Error::MissingRow(_))));
    }

    #[test]
    fn singlet_reaches_tsirelson() {
        let s = analytic_chsh(&singlet(), &ChshSettings::default()).unwrap();
        assert_abs_diff_eq!(s, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        for t in [0.0, 10.0, 33.0] {
            let e = analytic_correlation(&singlet(), t, t + 17.0).unwrap();
            assert_abs_diff_eq!(e, -(2.0 * 17f64.to_radians()).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        assert_abs_diff_eq!(fidelity_from_counts(2746, 120).unwrap(), 0.9581, epsilon = 5e-5);
        assert_abs_diff_eq!(fidelity_from_counts(1890, 342).unwrap(), 0.8468, epsilon = 5e-5);
        assert_eq!(fidelity_from_counts(5, 0).unwrap(), 1.0);
        assert!(fidelity_from_counts(0, 0).is_err());
    }

    #[test]
    fn bundled_fidelity_means() {
        let t0 = fidelity_table(&bundled_table(TableKind::Fidelity, TableBlock::WithoutSpp), 200, 1).unwrap();
        let t1 = fidelity_table(&bundled_table(TableKind::Fidelity, TableBlock::WithSpp), 200, 1).unwrap();
        assert!((t0.mean - 0.9267).abs() <= 1e-4, "{}", t0.mean);
        assert!((t1.mean - 0.8891).abs() <= 1e-4, "{}", t1.mean);
    }

    #[test]
    fn perfect_table_has_zero_spread() {
        let rows = BellOutcome::ALL
            .iter()
            .flat_map(|&o| {
                InputLabel::ALL.iter().map(move |&i| CountsRow {
                    setting: fidelity_setting(o, i),
                    counts: [("phi".to_string(), 100), ("perp".to_string(), 0)].into(),
                })
            })
            .collect();
        let t = CountsTable::new(TableKind::Fidelity, TableBlock::WithSpp, rows).unwrap();
        let f = fidelity_table(&t, 100, 0).unwrap();
        assert_eq!(f.mean, 1.0);
        assert_eq!(f.mean_std, 0.0);
    }

    #[test]
    fn sigma_examples() {
        assert_abs_diff_eq!(sigma_violation(0.9267, 2.0 / 3.0, 0.0032).unwrap(), 81.3, epsilon = 0.05);
        assert_abs_diff_eq!(sigma_violation(0.820, 0.5, 0.005).unwrap(), 64.0, epsilon = 1e-9);
        assert_eq!(sigma_violation(0.5, 0.5, 0.1).unwrap(), 0.0);
        assert!(sigma_violation(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "kind,block,setting,outcome,count\nchsh,with_spp,t1_t2,++,1\nchsh,with_spp,t1_t2,+-,x\n";
        match parse_counts_csv(text.as_bytes()) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "kind,block,setting,outcome,count\nchsh,with_spp,t1_t2,+0,1\n";
        assert!(matches!(parse_counts_csv(text.as_bytes()), Err(Error::Malformed { line: 2, .. })));
        let text = "kind,block,setting,outcome,count\nchsh,with_spp,t1_t2,++,1\n";
        assert!(matches!(parse_counts_csv(text.as_bytes()), Err(Error::MissingRow(_))));
        let text = "kind,block,setting,outcome,count\n";
        assert!(matches!(parse_counts_csv(text.as_bytes()), Err(Error::EmptyTable)));
    }

    #[test]
    fn bundled_tables_shape() {
        for b in TableBlock::ALL {
            assert_eq!(bundled_table(TableKind::Chsh, b).rows().len(), 4);
            assert_eq!(bundled_table(TableKind::Fidelity, b).rows().len(), 24);
        }
        // every count of the CHSH table is a multiple of 300
        for t in bundled_tables(TableKind::Chsh) {
            assert!(t.rows().iter().flat_map(|r| r.counts.values()).all(|n| n % 300 == 0));
        }
    }

    fn qubit(theta: f64, phi: f64) -> PureState {
        let (s, c) = (theta / 2.0).sin_cos();
        PureState::new(vec![c64(c, 0.0), c64(s * phi.cos(), s * phi.sin())]).unwrap()
    }

    proptest! {
        #[test]
        fn correlation_is_scale_invariant(c in prop::array::uniform4(0u64..1_000_000), k in 1u64..1000) {
            prop_assume!(c.iter().sum::<u64>() > 0);
            let e = correlation(c).unwrap();
            let ek = correlation(c.map(|x| x * k)).unwrap();
            prop_assert_eq!(e, ek);
            prop_assert!((-1.0..=1.0).contains(&e));
        }

        #[test]
        fn product_states_obey_chsh(
            a in (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU),
            b in (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU),
            angles in prop::array::uniform4(0.0..180.0f64),
        ) {
            let rho = tensor(&qubit(a.0, a.1), &qubit(b.0, b.1)).projector();
            let settings = ChshSettings { theta1: angles[0], theta1_prime: angles[1], theta2: angles[2], theta2_prime: angles[3] };
            prop_assert!(analytic_chsh(&rho, &settings).unwrap() <= 2.0 + 1e-12);
        }

        #[test]
        fn fidelity_is_one_minus_perp_fraction(p in 0u64..100_000, q in 0u64..100_000) {
            prop_assume!(p + q > 0);
            let f = fidelity_from_counts(p, q).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - (1.0 - q as f64 / (p + q) as f64)).abs() < 1e-15);
        }
    }
}
