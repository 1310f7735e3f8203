use super::*;
use crate::circuit::{layers_to_circuit, program_to_circuit, simulate, simulate_dense, CostModel};
use crate::linalg::fidelity;
use crate::target::{random_mps, target_mps, FunctionFamily, TargetSpec};

fn function_mps(family: FunctionFamily, n: usize) -> Mps {
    target_mps(&TargetSpec::function(family, (-1.0, 1.0), n), &Truncation::default()).unwrap()
}

#[test]
fn product_state_staircase_reproduces_it() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sites: Vec<[C64; 2]> = (0..5)
        .map(|k| {
            let t = 0.3 * k as f64;
            [C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), 0.2 * k as f64)]
        })
        .chain([[C64::new(s, 0.0), C64::new(0.0, s)]])
        .collect();
    let psi = Mps::product(&sites);
    let d = chi2_disentangler(&psi).unwrap();
    assert!(d.separable);
    let v = d.staircase.prepare_dense();
    assert!(fidelity(&v, &psi.to_statevector()) > 1.0 - 1e-10);
}

#[test]
fn staircase_prepares_the_chi2_truncation_exactly() {
    for seed in 0..5 {
        let psi = random_mps(6, 4, seed);
        let d = chi2_disentangler(&psi).unwrap();
        for g in &d.staircase.gates {
            assert!(is_unitary(g, 1e-10));
        }
        let v = d.staircase.prepare_dense();
        let ov = crate::linalg::vdot(&d.truncated.to_statevector(), &v).norm();
        assert!((ov - 1.0).abs() < 1e-9);
        // overlap with the original equals the truncation fidelity
        let tf = mps::fidelity(&psi, &d.truncated).unwrap();
        assert!((fidelity(&psi.to_statevector(), &v) - tf).abs() < 1e-9);
    }
}

#[test]
fn single_layer_exact_targets() {
    for family in [FunctionFamily::Sine { k: 1.0 }, FunctionFamily::Linear, FunctionFamily::HockeyStick { knee: 0.0 }] {
        let psi = function_mps(family, 12);
        let stack = mpd_extract(&psi, 1, 32, 1e-10).unwrap();
        assert!(stack.final_fidelity() >= 1.0 - 1e-10, "{}", stack.final_fidelity());
        let c = layers_to_circuit(&stack).unwrap();
        let out = simulate(&c, None, 1e-12).unwrap();
        assert!(mps::fidelity(&psi, &out).unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn early_stop_on_exact_preparation() {
    let psi = function_mps(FunctionFamily::Sine { k: 1.0 }, 8);
    let stack = mpd_extract(&psi, 5, 32, 1e-10).unwrap();
    assert_eq!(stack.layers.len(), 1);
}

#[test]
fn stack_fidelity_matches_dense_and_circuit_simulation() {
    for seed in 0..4 {
        let psi = random_mps(8, 5, 10 + seed);
        let stack = mpd_extract(&psi, 4, 64, 1e-12).unwrap();
        let dense = stack.prepare_dense().unwrap();
        let f_dense = fidelity(&psi.to_statevector(), &dense);
        assert!((f_dense - stack.final_fidelity()).abs() < 1e-8);
        let c = layers_to_circuit(&stack).unwrap();
        let f_mps = mps::fidelity(&psi, &simulate(&c, None, 1e-14).unwrap()).unwrap();
        assert!((f_mps - f_dense).abs() < 1e-8);
        let f_circ = fidelity(&psi.to_statevector(), &simulate_dense(&c).unwrap());
        assert!((f_circ - f_dense).abs() < 1e-8);
    }
}

#[test]
fn per_layer_fidelity_is_monotone_and_above_the_chi2_floor() {
    for seed in 0..6 {
        let psi = random_mps(10, 5, 40 + seed);
        let stack = mpd_extract(&psi, 6, 32, 1e-12).unwrap();
        let f = &stack.per_layer_fidelity;
        for w in f.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{f:?}");
        }
        let floor = crate::target::truncation_fidelity(&psi, 2, 1e-12).unwrap();
        assert!(f[0] >= floor - 1e-9 && stack.final_fidelity() >= floor - 1e-9);
    }
}

#[test]
fn json_round_trip() {
    let psi = random_mps(5, 3, 1);
    let stack = mpd_extract(&psi, 2, 8, 1e-12).unwrap();
    let back = LayerStack::from_json(&stack.to_json()).unwrap();
    assert_eq!(back, stack);
}

#[test]
fn rejects_bad_arguments() {
    let psi = random_mps(4, 2, 0);
    assert!(mpd_extract(&psi, 0, 8, 1e-10).is_err());
    assert!(mpd_extract(&random_mps(1, 1, 0), 1, 8, 1e-10).is_err());
}

#[test]
fn empty_stack_gives_empty_circuit() {
    let stack = LayerStack { n: 4, layers: vec![], chi_max_used: 1, per_layer_fidelity: vec![], diagnostics: vec![] };
    let c = layers_to_circuit(&stack).unwrap();
    assert!(c.gates.is_empty());
    assert_eq!(c.metrics().depth, 0);
}

#[test]
fn two_qubit_single_layer_circuit_is_within_kak_bounds() {
    let psi = random_mps(2, 2, 3);
    let stack = mpd_extract(&psi, 1, 4, 1e-12).unwrap();
    let m = layers_to_circuit(&stack).unwrap().metrics();
    assert!(m.cnot_count <= 3 && m.single_qubit_count <= 15);
}

#[test]
fn staircase_depth_law() {
    // pipelined regime: consecutive staircases overlap once L ≳ n
    for (n, l) in [(6, 8), (10, 12), (12, 16)] {
        let psi = random_mps(n, 6, n as u64);
        let stack = mpd_extract(&psi, l, 32, 1e-14).unwrap();
        let m = layers_to_circuit(&stack).unwrap().metrics();
        assert!(m.cnot_count <= 3 * l * (n - 1));
        let ratio = m.depth as f64 * n as f64 / m.total_gates as f64;
        assert!((0.8..=3.0).contains(&ratio), "n={n} L={l} ratio={ratio}");
    }
}

#[test]
fn exact_sequential_shapes_and_exactness() {
    // chi = 1: single-qubit blocks only
    let p = exact_sequential(&function_mps(FunctionFamily::Heaviside, 6)).unwrap();
    assert!(p.blocks.iter().all(|b| b.wires.len() == 1));

    // chi = 2: one staircase worth of two-qubit blocks
    let psi = random_mps(7, 2, 5);
    let p = exact_sequential(&psi).unwrap();
    assert_eq!(p.blocks.len(), 6);
    assert!(p.blocks.iter().all(|b| b.wires.len() == 2));
    let stack = mpd_extract(&psi, 1, 2, 1e-12).unwrap();
    assert_eq!(p.blocks.len(), stack.layers[0].gates.len());

    for (n, chi, seed) in [(8, 5, 1), (10, 3, 2), (9, 8, 3), (12, 6, 4)] {
        let psi = random_mps(n, chi, seed);
        let p = exact_sequential(&psi).unwrap();
        let limit = (chi as f64).log2().ceil() as usize + 1;
        assert!(p.max_block_qubits() <= limit);
        for b in &p.blocks {
            assert!(is_unitary(&b.unitary, 1e-10));
        }
        let v = p.prepare_dense().unwrap();
        let ov = crate::linalg::vdot(&psi.to_statevector(), &v).norm();
        assert!((ov - 1.0).abs() < 1e-9, "n={n} chi={chi}: {ov}");
        let c = program_to_circuit(&p).unwrap();
        assert!(c.metrics().depth <= c.metrics().total_gates);
        let f = fidelity(&psi.to_statevector(), &simulate_dense(&c).unwrap());
        assert!(f > 1.0 - 1e-9);
    }
}

#[test]
fn exact_sequential_modeled_costs() {
    let psi = random_mps(10, 16, 9);
    let c = program_to_circuit(&exact_sequential(&psi).unwrap()).unwrap();
    let m = c.metrics();
    assert!(m.modeled && m.opaque_blocks > 0);
    let shannon = c.metrics_with(Some(CostModel::Shannon));
    assert!(shannon.depth > m.depth);
}

#[test]
fn exact_sequential_capacity_guard() {
    let ok: Vec<usize> = (0..=22).map(|k: usize| 1usize << k.min(22 - k).min(11)).collect();
    assert_eq!(exact::block_plan(&ok).unwrap().into_iter().max(), Some(11));
    let big: Vec<usize> = (0..=24).map(|k: usize| 1usize << k.min(24 - k)).collect();
    assert!(matches!(exact::block_plan(&big), Err(crate::Error::Capacity(_))));
}
