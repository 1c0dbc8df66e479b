use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spp_teleport::protocol::teleport_state;
use spp_teleport::qcore::random;
use spp_teleport::{ChannelModel, PureState};

type M = DMatrix<Complex64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

fn paulis() -> [M; 4] {
    let i = Complex64::i();
    [
        M::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(1.0)]),
        M::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]),
        M::from_row_slice(2, 2, &[re(0.0), -i, i, re(0.0)]),
        M::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]),
    ]
}

/// Textbook teleportation: Bell projection on (input, half of a Werner
/// pair), trace out, best Pauli fix. Returns the four output fidelities.
fn oracle(psi: &[Complex64], v: f64) -> Vec<f64> {
    let s = 0.5f64.sqrt();
    let singlet = DMatrix::from_column_slice(4, 1, &[re(0.0), re(s), re(-s), re(0.0)]);
    let werner = (&singlet * singlet.adjoint()).scale(v) + M::identity(4, 4).scale((1.0 - v) / 4.0);
    let ket = DMatrix::from_column_slice(2, 1, psi);
    let rho_in = &ket * ket.adjoint();
    let rho = kron(&rho_in, &werner);
    let bells = [[s, 0.0, 0.0, s], [s, 0.0, 0.0, -s], [0.0, s, s, 0.0], [0.0, s, -s, 0.0]];
    let mut out = Vec::new();
    for b in bells {
        let bv = DMatrix::from_column_slice(4, 1, &b.map(re));
        let proj = kron(&(&bv * bv.adjoint()), &M::identity(2, 2));
        let post = &proj * &rho * &proj;
        // trace out the first two qubits
        let mut red = M::zeros(2, 2);
        for k in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    red[(i, j)] += post[(2 * k + i, 2 * k + j)];
                }
            }
        }
        let p = red.trace().re;
        let red = red.unscale(p);
        let best = paulis()
            .iter()
            .map(|u| {
                let o = u * &red * u.adjoint();
                (ket.adjoint() * o * &ket)[(0, 0)].re
            })
            .fold(f64::MIN, f64::max);
        out.push(best);
    }
    out.sort_by(f64::total_cmp);
    out
}

fn library(psi: &PureState, v: f64) -> Vec<f64> {
    let model = ChannelModel {
        werner_visibility: v,
        ..ChannelModel::ideal()
    };
    let mut f: Vec<f64> = teleport_state(psi, &model)
        .unwrap()
        .iter()
        .map(|b| b.state.fidelity_pure(psi).unwrap())
        .collect();
    f.sort_by(f64::total_cmp);
    f
}

#[test]
fn werner_channel_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for v in [0.0, 0.5, 0.9, 1.0] {
        for _ in 0..5 {
            let psi = random::pure_state(&mut rng, 2);
            let lib = library(&psi, v);
            let brute = oracle(psi.amplitudes(), v);
            for (a, b) in lib.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-9, "v={v}: {a} vs {b}");
                assert!((a - (1.0 + v) / 2.0).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #[test]
    fn ideal_channel_teleports_any_state(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random::pure_state(&mut rng, 2);
        let branches = teleport_state(&psi, &ChannelModel::ideal()).unwrap();
        prop_assert_eq!(branches.len(), 4);
        for b in branches {
            prop_assert!((b.probability - 0.25).abs() < 1e-12);
            prop_assert!((b.state.fidelity_pure(&psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn werner_fidelity_is_input_independent(seed in any::<u64>(), v in 0.0..=1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random::pure_state(&mut rng, 2);
        for f in library(&psi, v) {
            prop_assert!((f - (1.0 + v) / 2.0).abs() < 1e-9);
        }
    }
}
