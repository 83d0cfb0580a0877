//! Independent numerical oracles and qualitative trends checked end to end.

use mll_core::eigen::{eig_right, eigenvalues};
use mll_core::lattice::build_hamiltonian;
use mll_core::observables::state_observables;
use mll_core::perturbation::{mbc_first_order_state, obc_skin_ansatz, MixingConvention};
use mll_core::{BoundaryCondition, Chain, Complex64, LadderParams};
use ndarray::{Array2, ArrayView1};

/// Characteristic polynomial coefficients `c[0..=n]` of `det(zI - A)`,
/// leading coefficient first, by the Faddeev–LeVerrier recursion.
fn characteristic_polynomial(a: &Array2<Complex64>) -> Vec<Complex64> {
    let n = a.nrows();
    let identity = Array2::<Complex64>::eye(n);
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    let mut m = Array2::<Complex64>::zeros((n, n));
    for k in 1..=n {
        m = a.dot(&m) + &identity * coeffs[k - 1];
        let am = a.dot(&m);
        let trace: Complex64 = (0..n).map(|i| am[[i, i]]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let radius = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32) * radius).collect();
    for _ in 0..5000 {
        let mut shift = 0.0f64;
        for i in 0..n {
            let denom: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| roots[i] - roots[j])
                .product();
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            shift = shift.max(step.norm());
        }
        if shift < 1e-15 {
            break;
        }
    }
    roots
}

fn matched_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    a.iter()
        .map(|x| {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            used[j] = true;
            d
        })
        .fold(0.0, f64::max)
}

#[test]
fn small_ladders_match_characteristic_polynomial_roots() {
    let cases = [
        LadderParams::new(2, 0.75, 0.25, -0.25, 0.01, 0.5),
        LadderParams::new(3, 0.75, 0.25, -0.1, 0.2, 0.5),
        LadderParams::new(4, 1.1, 0.4, 0.3, 0.05, -0.7),
        LadderParams::new(4, 0.75, 0.15, -0.15, 0.01, 1.6),
    ];
    for p in cases {
        for bc in BoundaryCondition::ALL {
            let h = build_hamiltonian(&p, bc).unwrap();
            let roots = polynomial_roots(&characteristic_polynomial(h.matrix()));
            let eigs = eigenvalues(&h).unwrap();
            let d = matched_distance(&eigs, &roots);
            assert!(d < 1e-8, "{bc} {p:?}: distance {d:e}");
        }
    }
}

fn mean_offset(p: &LadderParams, negative_energy: bool) -> f64 {
    let sys = eig_right(&build_hamiltonian(p, BoundaryCondition::Moebius).unwrap()).unwrap();
    let centre = (p.n_cells + 1) as f64 / 2.0;
    let offsets: Vec<f64> = state_observables(&sys, None)
        .unwrap()
        .into_iter()
        .filter(|s| (s.energy.re < 0.0) == negative_energy)
        .map(|s| s.mean_position - centre)
        .collect();
    offsets.iter().sum::<f64>() / offsets.len() as f64
}

#[test]
fn negative_energy_states_follow_chain_b_nonreciprocity() {
    let base = LadderParams::new(80, 0.75, 0.25, 0.0, 0.01, 0.5);
    let signs: Vec<(f64, f64)> = [-0.3, -0.15, 0.15, 0.3]
        .iter()
        .map(|&db| {
            let p = base.with_delta_b(db);
            (mean_offset(&p, true).signum(), mean_offset(&p, false).signum())
        })
        .collect();
    assert_eq!(signs[0].0, signs[1].0);
    assert_eq!(signs[2].0, signs[3].0);
    assert_ne!(signs[1].0, signs[2].0, "Re E < 0 side should flip with the sign of delta_b");
    assert!(signs.iter().all(|s| s.1 == signs[0].1), "Re E > 0 side should not move: {signs:?}");
}

fn best_overlap(vectors: &[ArrayView1<'_, Complex64>], state: ArrayView1<'_, Complex64>) -> f64 {
    vectors
        .iter()
        .map(|r| r.iter().zip(state.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm())
        .fold(0.0, f64::max)
}

#[test]
fn first_order_correction_moves_ansatz_towards_exact_states() {
    for n in [6, 8, 10, 12] {
        for v in [2.0, 5.0, 20.0] {
            let p = LadderParams::new(n, 0.75, 0.25, -0.25, 0.0, v);
            let sys = eig_right(&build_hamiltonian(&p, BoundaryCondition::Moebius).unwrap()).unwrap();
            let vectors: Vec<_> = (0..sys.len()).map(|j| sys.right_vector(j)).collect();
            for chain in Chain::BOTH {
                let bare = obc_skin_ansatz(&p, chain).unwrap();
                let corrected = mbc_first_order_state(&p, chain, MixingConvention::PerState).unwrap();
                let before = best_overlap(&vectors, bare.view());
                let after = best_overlap(&vectors, corrected.view());
                assert!(after > before, "N={n} V={v} chain {chain}: {after} <= {before}");
            }
        }
    }
}
