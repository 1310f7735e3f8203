use mpsenc::circuit::{
    equivalent, from_json, from_qasm, kak_decompose, layers_to_circuit, simulate, simulate_dense, to_json, to_qasm,
    Circuit, Gate, GateKind, Provenance,
};
use mpsenc::linalg::{fidelity, haar_unitary, C64};
use mpsenc::mpd::{chi2_disentangler, mpd_extract, LayerStack};
use mpsenc::mps::{
    self, canonicalize, inner_product, mps_from_statevector, read_binary, schmidt_spectrum, write_binary, Form, Mps,
    Truncation,
};
use mpsenc::target::{grid_point, random_mps, target_mps, Image, TargetSpec};
use mpsenc::tno::{self, Engine, OptimizeOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn sized_state(max_n: usize) -> impl Strategy<Value = Vec<C64>> {
    (1..=max_n).prop_flat_map(state)
}

fn normalised(v: &[C64]) -> Vec<C64> {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// (n, χ, seed) for a seeded random MPS.
fn random_params(max_n: usize, max_chi: usize) -> impl Strategy<Value = (usize, usize, u64)> {
    (2..=max_n, 1..=max_chi, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dense_round_trip_through_an_untruncated_mps(v in sized_state(10)) {
        let m = mps_from_statevector(&v, &Truncation::new(None, 0.0)).unwrap();
        let back = m.to_statevector();
        let want = normalised(&v);
        // Align the global phase on the largest amplitude.
        let k = (0..want.len()).max_by(|&i, &j| want[i].norm().total_cmp(&want[j].norm())).unwrap();
        let ph = want[k] / back[k];
        let ph = ph / ph.norm();
        for (a, b) in want.iter().zip(&back) {
            prop_assert!((a - b * ph).norm() <= 1e-10);
        }
    }

    #[test]
    fn canonical_forms_are_isometric((n, chi, seed) in random_params(10, 8), centre in 0usize..10) {
        let m = random_mps(n, chi, seed);
        let centre = centre % n;
        let left = canonicalize(&m, Form::Left).unwrap();
        for k in 0..n - 1 {
            prop_assert!(left.core(k).left_isometry_residual() <= 1e-12);
        }
        let right = canonicalize(&m, Form::Right).unwrap();
        for k in 1..n {
            prop_assert!(right.core(k).right_isometry_residual() <= 1e-12);
        }
        let mixed = canonicalize(&m, Form::Mixed(centre)).unwrap();
        for k in 0..centre {
            prop_assert!(mixed.core(k).left_isometry_residual() <= 1e-12);
        }
        for k in centre + 1..n {
            prop_assert!(mixed.core(k).right_isometry_residual() <= 1e-12);
        }
        for g in [&left, &right, &mixed] {
            prop_assert!((mps::fidelity(&m, g).unwrap() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in random_params(9, 6), seed in any::<u64>(), chi in 1usize..6) {
        let x = random_mps(a.0, a.1, a.2);
        let y = random_mps(a.0, chi, seed);
        let xy = inner_product(&x, &y).unwrap();
        let yx = inner_product(&y, &x).unwrap();
        prop_assert!((xy - yx.conj()).norm() <= 1e-12);
        prop_assert!((inner_product(&x, &x).unwrap() - C64::new(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn entropy_never_exceeds_log2_of_the_bond((n, chi, seed) in random_params(10, 8)) {
        let m = random_mps(n, chi, seed);
        for b in 1..n {
            let s = schmidt_spectrum(&m, b).unwrap();
            prop_assert!(s.entropy <= (m.bond_dims()[b - 1] as f64).log2() + 1e-10);
            prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let total: f64 = s.singular_values.iter().map(|x| x * x).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn truncation_matches_the_dense_tt_svd_oracle(v in (2usize..=10).prop_flat_map(state), chi in 1usize..6) {
        let m = mps_from_statevector(&v, &Truncation::new(None, 0.0)).unwrap();
        let (t, _) = mps::truncate(&m, chi, 0.0).unwrap();
        let oracle = mpsenc_testkit::tt_svd_truncation_fidelity(&v, chi);
        prop_assert!((mps::fidelity(&m, &t).unwrap() - oracle).abs() <= 1e-9);
        prop_assert!(t.max_bond() <= chi);
    }

    #[test]
    fn truncation_error_is_monotone_in_chi((n, chi, seed) in random_params(10, 8)) {
        let m = random_mps(n, chi, seed);
        let mut last = 0.0;
        for c in 1..=chi {
            let (t, rss) = mps::truncate(&m, c, 0.0).unwrap();
            let f = mps::fidelity(&m, &t).unwrap();
            prop_assert!(f >= last - 1e-12, "χ={c}: {f} < {last}");
            prop_assert!(rss >= 0.0);
            last = f;
        }
        prop_assert!((last - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn unitary_gates_preserve_the_norm((n, chi, seed) in random_params(8, 5), site in 0usize..7) {
        let m = random_mps(n, chi, seed);
        let site = site % (n - 1);
        let u = haar_unitary(4, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let out = mps::apply_two_qubit_gate(&m, &u, site, &Truncation::new(None, 0.0)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn mps_binary_round_trip_is_bit_exact((n, chi, seed) in random_params(10, 8)) {
        let m = random_mps(n, chi, seed);
        let bytes = write_binary(&m);
        let back = read_binary(&bytes).unwrap();
        prop_assert_eq!(write_binary(&back), bytes);
        for (a, b) in m.cores().iter().zip(back.cores()) {
            prop_assert_eq!(a.data(), b.data());
        }
    }
}

fn mpd_circuit(n: usize, chi: usize, seed: u64, layers: usize) -> (Mps, LayerStack, Circuit) {
    let target = random_mps(n, chi, seed);
    let stack = mpd_extract(&target, layers, usize::MAX, 1e-12).unwrap();
    let circuit = layers_to_circuit(&stack).unwrap();
    (target, stack, circuit)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn circuit_json_round_trip_is_bit_exact((n, chi, seed) in random_params(7, 4), layers in 1usize..3) {
        let (_, stack, circuit) = mpd_circuit(n, chi, seed, layers);
        let text = to_json(&circuit);
        let back = from_json(&text).unwrap();
        prop_assert_eq!(&back, &circuit);
        prop_assert_eq!(to_json(&back), text);
        let st = stack.to_json();
        prop_assert_eq!(LayerStack::from_json(&st).unwrap(), stack);
    }

    #[test]
    fn qasm_round_trip_preserves_the_state((n, chi, seed) in random_params(7, 4), layers in 1usize..3) {
        let (_, _, circuit) = mpd_circuit(n, chi, seed, layers);
        let back = from_qasm(&to_qasm(&circuit).unwrap()).unwrap();
        let f = fidelity(&simulate_dense(&circuit).unwrap(), &simulate_dense(&back).unwrap());
        prop_assert!((f - 1.0).abs() <= 1e-10, "{f}");
    }

    #[test]
    fn kak_reconstructs_any_two_qubit_unitary(seed in any::<u64>()) {
        let u = haar_unitary(4, &mut ChaCha8Rng::seed_from_u64(seed));
        let gates = kak_decompose(&u, 0, 1).unwrap();
        prop_assert!(gates.iter().filter(|g| matches!(g.kind, GateKind::Cnot)).count() <= 3);
        let mut opaque = Circuit::new(2, Provenance::Mpd);
        opaque.push(Gate::opaque(u, vec![0, 1])).unwrap();
        let mut synth = Circuit::new(2, Provenance::Mpd);
        synth.extend(gates).unwrap();
        prop_assert!(equivalent(&opaque, &synth, 1e-8).unwrap());
    }

    #[test]
    fn mps_and_dense_simulation_agree((n, chi, seed) in random_params(10, 5), layers in 1usize..4) {
        let (_, _, circuit) = mpd_circuit(n, chi, seed, layers);
        let dense = simulate_dense(&circuit).unwrap();
        let m = simulate(&circuit, None, 0.0).unwrap();
        prop_assert!(fidelity(&dense, &m.to_statevector()) >= 1.0 - 1e-8);
    }

    #[test]
    fn stack_fidelity_matches_dense_simulation((n, chi, seed) in random_params(10, 5), layers in 1usize..4) {
        let (target, stack, circuit) = mpd_circuit(n, chi, seed, layers);
        let f = fidelity(&target.to_statevector(), &simulate_dense(&circuit).unwrap());
        prop_assert!((f - stack.final_fidelity()).abs() <= 1e-8, "{f} vs {}", stack.final_fidelity());
    }

    #[test]
    fn mpd_never_falls_below_the_chi2_truncation((n, chi, seed) in random_params(10, 6), layers in 1usize..4) {
        let target = random_mps(n, chi, seed);
        let floor = mpsenc::target::truncation_fidelity(&target, 2, 0.0).unwrap();
        let stack = mpd_extract(&target, layers, usize::MAX, 1e-12).unwrap();
        prop_assert!(stack.final_fidelity() >= floor - 1e-9, "{} < {floor}", stack.final_fidelity());
    }

    /// Central-bond entropy of ψ_{k+1} = Û_k ψ_k may not exceed that of ψ_k
    /// whenever ψ_k's χ=2 truncation keeps more than half the weight.
    #[test]
    fn disentangling_does_not_raise_central_entropy((n, chi, seed) in (4usize..=10, 2usize..=8, any::<u64>()), layers in 1usize..5) {
        let exact = Truncation::new(None, 1e-14);
        let mut psi = random_mps(n, chi, seed);
        for _ in 0..layers {
            let d = chi2_disentangler(&psi).unwrap();
            let kept = mps::fidelity(&psi, &d.truncated).unwrap();
            let before = schmidt_spectrum(&psi, n / 2).unwrap().entropy;
            d.staircase.disentangle(&mut psi, &exact);
            let after = schmidt_spectrum(&psi, n / 2).unwrap().entropy;
            if kept > 0.5 {
                prop_assert!(after <= before + 1e-9, "S rose {before} -> {after} with χ=2 fidelity {kept}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn optimisation_never_worsens_the_start((n, chi, seed) in (3usize..=7, 2usize..=4, any::<u64>()), layers in 1usize..3) {
        let (target, _, circuit) = mpd_circuit(n, chi, seed, layers);
        let opts = OptimizeOptions { max_iters: 25, engine: Engine::Dense, ..OptimizeOptions::default() };
        let (_, r) = tno::optimize_with(&circuit, &target, &opts).unwrap();
        prop_assert!(r.final_cost <= r.initial_cost + 1e-15);
        prop_assert!(r.cost_trace.windows(2).all(|w| w[1].cost <= w[0].cost + 1e-15));
        prop_assert_eq!(tno::OptimizationReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn grids_at_n_and_n_plus_one_share_their_endpoints(a in -5.0f64..0.0, w in 0.1f64..5.0, n in 1usize..30) {
        let b = a + w;
        for m in [n, n + 1] {
            prop_assert_eq!(grid_point(a, b, 0, m), a);
            let last = grid_point(a, b, (1u64 << m) - 1, m);
            prop_assert!((last - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn image_round_trip_reproduces_the_pixels(side_log in 1usize..5, pixels in prop::collection::vec(0.0f64..=1.0, 256)) {
        let side = 1usize << side_log;
        let mut px: Vec<f64> = pixels[..side * side].to_vec();
        px[0] = 0.5;
        let img = Image::new(side, side, px.clone()).unwrap();
        let m = target_mps(&TargetSpec::image(img), &Truncation::new(None, 0.0)).unwrap();
        let norm = px.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (amp, p) in m.to_statevector().iter().zip(&px) {
            prop_assert!((amp.re.abs() - p / norm).abs() <= 1e-9 && amp.im.abs() <= 1e-9);
        }
    }
}
