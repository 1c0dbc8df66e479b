use spp_teleport::channel::{fidelity_budget_total, FidelityBudget};
use spp_teleport::counts::{bundled_table, chsh_s, fidelity_table, sigma_violation, CLASSICAL_FIDELITY_BOUND};
use spp_teleport::{TableBlock, TableKind};

/// Printed fidelities in percent, rows Ψ⁺ Ψ⁻ Φ⁻ Φ⁺, columns H V D A R L.
const PRINTED_WITHOUT_SPP: [[f64; 6]; 4] = [
    [95.81, 97.22, 95.17, 95.90, 95.20, 97.98],
    [88.22, 91.25, 92.71, 88.37, 93.99, 96.85],
    [89.47, 91.48, 91.40, 87.50, 92.32, 94.03],
    [88.02, 86.46, 95.28, 96.83, 90.18, 92.43],
];

const PRINTED_WITH_SPP: [[f64; 6]; 4] = [
    [94.80, 93.62, 93.97, 97.44, 86.95, 85.75],
    [85.32, 89.25, 90.55, 84.50, 84.68, 85.34],
    [86.94, 89.04, 88.64, 81.09, 88.98, 88.88],
    [85.85, 84.66, 95.67, 97.04, 85.58, 89.31],
];

fn check_cells(block: TableBlock, printed: &[[f64; 6]; 4], mean: f64) {
    let table = fidelity_table(&bundled_table(TableKind::Fidelity, block), 100, 0).unwrap();
    for r in 0..4 {
        for c in 0..6 {
            let pct = (table.cells[r][c] * 1e4).round() / 100.0;
            assert!((pct - printed[r][c]).abs() < 1e-9, "{block} [{r}][{c}]: {pct} vs {}", printed[r][c]);
        }
    }
    assert!((table.mean * 100.0 - mean).abs() <= 0.01, "{}", table.mean);
}

#[test]
fn every_fidelity_cell_matches_print() {
    check_cells(TableBlock::WithoutSpp, &PRINTED_WITHOUT_SPP, 92.67);
    check_cells(TableBlock::WithSpp, &PRINTED_WITH_SPP, 88.91);
}

#[test]
fn chsh_values_match_print() {
    let s0 = chsh_s(&bundled_table(TableKind::Chsh, TableBlock::WithoutSpp)).unwrap();
    let s1 = chsh_s(&bundled_table(TableKind::Chsh, TableBlock::WithSpp)).unwrap();
    assert_eq!((s0 * 1e3).round() / 1e3, 2.551);
    assert_eq!((s1 * 1e3).round() / 1e3, 2.281);
}

#[test]
fn budget_products_match_print() {
    let a = fidelity_budget_total(&FidelityBudget::WITHOUT_SPP, false);
    let b = fidelity_budget_total(&FidelityBudget::WITH_SPP, true);
    assert!((a * 100.0 - 91.75).abs() <= 0.01, "{a}");
    assert!((b * 100.0 - 85.35).abs() <= 0.01, "{b}");
}

#[test]
fn sigma_distances_match_print() {
    assert!(sigma_violation(0.9267, CLASSICAL_FIDELITY_BOUND, 0.0032).unwrap() >= 81.0);
    assert!(sigma_violation(0.8891, CLASSICAL_FIDELITY_BOUND, 0.0038).unwrap() >= 58.0);
    assert!(sigma_violation(0.898, 0.5, 0.005).unwrap() >= 79.0);
    assert!((sigma_violation(0.820, 0.5, 0.005).unwrap() - 64.0).abs() <= 1.0);
}
