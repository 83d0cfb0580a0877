//! Randomized invariants of the model, the observables and the plumbing.

use mll_core::analytic::{bloch_energies, bloch_matrix, periodic_spectrum};
use mll_core::criticality::{spectrum_q, sweep, with_workers, SweepAxis, SweepOptions, SweepParameter};
use mll_core::eigen::{eig_biorthogonal, eig_right, eigenvalues};
use mll_core::io::RunConfig;
use mll_core::lattice::{build_hamiltonian, chain_swap_permutation};
use mll_core::observables::{
    average_profiles, biorthogonal_density, chain_profile, delta_rho, fit_localization_length, ipr, ChainProfile,
};
use mll_core::perturbation::{mbc_mixing_amplitude_from, obc_skin_ansatz, t0_first_order_element};
use mll_core::{BoundaryCondition, Chain, Complex64, LadderParams};
use ndarray::Array1;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ladder(max_n: usize) -> impl Strategy<Value = LadderParams> {
    (2..=max_n, 0.3f64..1.5, -0.8f64..0.8, -0.8f64..0.8, 0.0f64..0.3, -2.0f64..2.0)
        .prop_map(|(n, t1, a, b, t0, v)| LadderParams::new(n, t1, a * t1, b * t1, t0, v))
}

fn boundary() -> impl Strategy<Value = BoundaryCondition> {
    prop::sample::select(BoundaryCondition::ALL.to_vec())
}

fn unit_vector(len: usize) -> impl Strategy<Value = Array1<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_filter_map("zero vector", |parts| {
        let v: Array1<Complex64> = parts.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| v.mapv(|z| z / norm))
    })
}

fn max_pair_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_roots_diagonalize_bloch_matrix(p in ladder(4), k in 0.0f64..std::f64::consts::TAU) {
        let m = bloch_matrix(&p, k);
        let (e1, e2) = bloch_energies(&p, k);
        let scale = 1.0 + m[0][0].norm() + m[1][1].norm();
        prop_assert!(((e1 + e2) - (m[0][0] + m[1][1])).norm() < 1e-12 * scale);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        prop_assert!((e1 * e2 - det).norm() < 1e-12 * scale * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodic_ladder_spectrum_is_the_bloch_union(p in ladder(24)) {
        let numeric = eigenvalues(&build_hamiltonian(&p, BoundaryCondition::Periodic).unwrap()).unwrap();
        // Loose bound: isolated exceptional points lose half the digits.
        prop_assert!(max_pair_distance(&numeric, &periodic_spectrum(&p)) < 1e-6);
    }

    #[test]
    fn chain_relabelling_preserves_spectrum_and_flips_polarization(p in ladder(16), bc in boundary()) {
        let h = build_hamiltonian(&p, bc).unwrap();
        let hs = build_hamiltonian(&p.swapped(), bc).unwrap();
        let perm = chain_swap_permutation(p.n_cells);
        let (m, ms) = (h.matrix(), hs.matrix());
        for i in 0..perm.len() {
            for j in 0..perm.len() {
                prop_assert_eq!(m[[i, j]], ms[[perm[i], perm[j]]]);
            }
        }
        let q = spectrum_q(&p, bc).unwrap();
        let qs = spectrum_q(&p.swapped(), bc).unwrap();
        prop_assert!((q - qs).abs() <= 1e-8 * (1.0 + q));

        let sys = eig_right(&h).unwrap();
        let permuted: Array1<Complex64> = {
            let v = sys.right_vector(0);
            (0..v.len()).map(|i| v[perm[i]]).collect()
        };
        let rho = delta_rho(sys.right_vector(0)).unwrap();
        prop_assert!((delta_rho(permuted.view()).unwrap() + rho).abs() < 1e-12);
    }

    #[test]
    fn ipr_is_bounded(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Array1<Complex64> = (0..2 * n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let v = v.mapv(|z| z / norm);
        let value = ipr(v.view()).unwrap();
        prop_assert!(value >= 1.0 / (2 * n) as f64 - 1e-12 && value <= 1.0 + 1e-12);
    }

    #[test]
    fn profiles_are_idempotent(v in unit_vector(24)) {
        for chain in Chain::BOTH {
            let p = chain_profile(v.view(), chain).unwrap();
            prop_assert!((p.amplitudes.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
            let again = ChainProfile::from_amplitudes(chain, p.amplitudes.clone()).unwrap();
            prop_assert_eq!(&again, &p);
            let averaged = average_profiles(&[p.clone(), p.clone()]).unwrap();
            for (x, y) in averaged.amplitudes.iter().zip(&p.amplitudes) {
                prop_assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn noisy_exponential_fit_recovers_xi(xi in 2.0f64..12.0, n in 30usize..90, seed in any::<u64>(), right_end in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitudes: Vec<f64> = (1..=n)
            .map(|x| {
                let distance = if right_end { n - x } else { x - 1 } as f64;
                (-distance / xi).exp() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))
            })
            .collect();
        let profile = ChainProfile::from_amplitudes(Chain::A, amplitudes).unwrap();
        let fitted = fit_localization_length(&profile).unwrap().xi().unwrap();
        prop_assert!((fitted - xi).abs() / xi < 0.03, "xi {xi} fitted {fitted}");
    }

    #[test]
    fn single_chain_ansatz_is_blind_to_coupling(p in ladder(40)) {
        for chain in Chain::BOTH {
            let state = obc_skin_ansatz(&p, chain).unwrap();
            prop_assert!(t0_first_order_element(state.view(), &p).unwrap().norm() <= 1e-15);
            let amp = mbc_mixing_amplitude_from(&p, chain).unwrap();
            prop_assert!(amp.relative_difference() < 1e-12);
        }
    }

    #[test]
    fn biorthogonal_density_sums_to_one(p in ladder(10), bc in boundary()) {
        let sys = eig_biorthogonal(&build_hamiltonian(&p, bc).unwrap());
        // Defective spectra are refused by the pairing step; nothing to check then.
        prop_assume!(sys.is_ok());
        let sys = sys.unwrap();
        for j in 0..sys.len() {
            let d = biorthogonal_density(sys.left_vector(j).unwrap(), sys.right_vector(j)).unwrap();
            let total: f64 = d.biorthogonal.iter().sum();
            let imaginary: f64 = d.imaginary.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-8 && imaginary.abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sweeps_do_not_depend_on_worker_count(p in ladder(10), bc in boundary(), workers in 2usize..6) {
        let axes = [
            SweepAxis::new(SweepParameter::T0, vec![0.0, 0.01, 0.02, 0.03]),
            SweepAxis::new(SweepParameter::V, vec![0.2, 0.9]),
        ];
        let opts = SweepOptions::default();
        let serial = with_workers(1, || sweep(&p, bc, &axes, &opts)).unwrap().unwrap();
        let parallel = with_workers(workers, || sweep(&p, bc, &axes, &opts)).unwrap().unwrap();
        prop_assert_eq!(serde_json::to_string(&serial).unwrap(), serde_json::to_string(&parallel).unwrap());
    }
}

const STRICT_CONFIG: &str = r#"{
  "model": {"n_cells": 6, "t1": 0.75, "delta_a": 0.25, "delta_b": -0.25, "t0": 0.01, "v": 0.5},
  "boundary": "mbc",
  "output_dir": "out",
  "workers": 1,
  "tolerances": {"eigen": {}, "fit": {}, "regions": {}},
  "tasks": [
    {"task": "spectrum"},
    {"task": "states", "dir": "s"},
    {"task": "fit", "dir": "f", "sizes": [6]},
    {"task": "sweep", "dir": "w", "axes": [{"parameter": "v", "values": [0.1, 0.2]}], "options": {}},
    {"task": "scan", "dir": "c", "options": {"points": 5}},
    {"task": "perturb", "dir": "p"}
  ]
}"#;

/// Every object in the document, addressed by JSON pointer.
fn object_pointers(value: &serde_json::Value, at: String, out: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            out.push(at.clone());
            for (k, v) in map {
                object_pointers(v, format!("{at}/{k}"), out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                object_pointers(v, format!("{at}/{i}"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn strict_config_baseline_is_valid() {
    RunConfig::from_json(STRICT_CONFIG).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unknown_keys_are_rejected(slot in any::<prop::sample::Index>(), key in "[a-z_]{1,12}") {
        let mut doc: serde_json::Value = serde_json::from_str(STRICT_CONFIG).unwrap();
        let mut pointers = Vec::new();
        object_pointers(&doc, String::new(), &mut pointers);
        let pointer = slot.get(&pointers).clone();
        let target = doc.pointer_mut(&pointer).unwrap().as_object_mut().unwrap();
        prop_assume!(!target.contains_key(&key));
        target.insert(key.clone(), serde_json::json!(1));
        let text = serde_json::to_string(&doc).unwrap();
        prop_assert!(RunConfig::from_json(&text).is_err(), "key `{key}` accepted at `{pointer}`");
    }
}
