use super::*;
use crate::linalg::{c, real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_vec(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..len).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let n = linalg::norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn random_cores(dims: &[usize], seed: u64) -> Mps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = dims
        .windows(2)
        .map(|w| {
            let data = (0..w[0] * 2 * w[1]).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
            Core::new(w[0], w[1], data).unwrap()
        })
        .collect();
    Mps::from_cores(cores).unwrap()
}

// dense gate on adjacent sites (s, s+1), site 0 = most significant bit
fn dense_apply(v: &[C64], n: usize, g: &CMat, s: usize) -> Vec<C64> {
    let shift = n - 2 - s;
    let mut out = vec![ZERO; v.len()];
    for (j, o) in out.iter_mut().enumerate() {
        let q = (j >> shift) & 3;
        let base = j & !(3 << shift);
        for p in 0..4 {
            *o += g[(q, p)] * v[base | (p << shift)];
        }
    }
    out
}

// dense singular values across the cut after `left_bits` sites
fn dense_schmidt(v: &[C64], left_bits: usize) -> Vec<f64> {
    let rows = 1 << left_bits;
    let m = CMat::from_row_slice(rows, v.len() / rows, v);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

fn max_diff_up_to_phase(a: &[C64], b: &[C64]) -> f64 {
    let ov = linalg::vdot(b, a);
    let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
    a.iter().zip(b).map(|(x, y)| (x - y * ph).norm()).fold(0.0, f64::max)
}

#[test]
fn basis_state_gives_product_cores() {
    let mut v = vec![ZERO; 16];
    v[0] = ONE;
    let m = mps_from_statevector(&v, &Truncation::default()).unwrap();
    assert_eq!(m.bond_dims(), vec![1, 1, 1]);
    for core in m.cores() {
        assert!((core.get(0, 0, 0).norm() - 1.0).abs() < 1e-14);
        assert!(core.get(0, 1, 0).norm() < 1e-14);
    }
}

#[test]
fn uniform_vector_is_separable() {
    let v = vec![real(0.25); 16];
    let m = mps_from_statevector(&v, &Truncation::default()).unwrap();
    assert_eq!(m.max_bond(), 1);
}

#[test]
fn dense_round_trip_no_truncation() {
    let v = random_vec(64, 11);
    let m = mps_from_statevector(&v, &Truncation::exact()).unwrap();
    assert_eq!(m.canonical(), Canonical::Left);
    assert!(m.check_canonical(1e-12));
    assert!(max_diff_up_to_phase(&m.to_statevector(), &v) < 1e-10);
}

#[test]
fn rejects_bad_vectors() {
    assert!(matches!(mps_from_statevector(&[ONE; 3], &Truncation::default()), Err(crate::Error::Shape(_))));
    assert!(matches!(mps_from_statevector(&[ZERO; 4], &Truncation::default()), Err(crate::Error::InvalidInput(_))));
}

#[test]
fn truncating_product_state_is_lossless() {
    let m = Mps::product(&[[real(0.6), real(0.8)], [ONE, ZERO], [real(0.0), c(0.0, 1.0)]]);
    let (t, err) = truncate(&m, 4, 1e-10).unwrap();
    assert_eq!(err, 0.0);
    assert!((fidelity(&m, &t).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn truncate_rejects_zero_chi() {
    let m = Mps::zero_state(3);
    assert!(matches!(truncate(&m, 0, 1e-10), Err(crate::Error::InvalidParameter(_))));
}

#[test]
fn truncation_error_is_discarded_weight() {
    // one cut only (n = 2): the discarded weight is exactly the dropped Schmidt mass
    let v = random_vec(4, 5);
    let m = mps_from_statevector(&v, &Truncation::exact()).unwrap();
    let s = dense_schmidt(&v, 1);
    let (t, err) = truncate(&m, 1, 0.0).unwrap();
    assert!((err - s[1]).abs() < 1e-12);
    assert!((fidelity(&m, &t).unwrap() - s[0] * s[0]).abs() < 1e-12);
    assert_eq!(t.max_bond(), 1);
}

#[test]
fn inner_product_examples() {
    let zero = Mps::zero_state(4);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = Mps::product(&vec![[real(h), real(h)]; 4]);
    assert!((inner_product(&zero, &plus).unwrap() - real(0.25)).norm() < 1e-14);
    assert!((inner_product(&plus, &plus).unwrap() - ONE).norm() < 1e-12);

    let a = random_cores(&[1, 2, 3, 4, 3, 2, 1], 1);
    let b = random_cores(&[1, 2, 4, 4, 2, 2, 1], 2);
    let dense = linalg::vdot(&a.to_statevector(), &b.to_statevector());
    let ab = inner_product(&a, &b).unwrap();
    assert!((ab - dense).norm() < 1e-10 * dense.norm().max(1.0));
    let ba = inner_product(&b, &a).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-12 * ab.norm().max(1.0));
    assert!(inner_product(&a, &Mps::zero_state(3)).is_err());
}

#[test]
fn identity_gate_is_noop() {
    let m = mps_from_statevector(&random_vec(32, 3), &Truncation::exact()).unwrap();
    let out = apply_two_qubit_gate(&m, &linalg::identity(4), 2, &Truncation::exact()).unwrap();
    assert!((fidelity(&m, &out).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn cnot_makes_bell_pair() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = Mps::product(&[[real(h), real(h)], [ONE, ZERO]]);
    let cx = CMat::from_row_slice(4, 4, &[ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO]);
    let out = apply_two_qubit_gate(&m, &cx, 0, &Truncation::default()).unwrap();
    let sp = schmidt_spectrum(&out, 1).unwrap();
    assert_eq!(sp.singular_values.len(), 2);
    for s in &sp.singular_values {
        assert!((s - h).abs() < 1e-12);
    }
    assert!((sp.entropy - 1.0).abs() < 1e-12);
}

#[test]
fn random_gate_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let v = random_vec(32, 8);
    let m = mps_from_statevector(&v, &Truncation::exact()).unwrap();
    for site in 0..4 {
        let g = linalg::haar_unitary(4, &mut rng);
        let out = apply_two_qubit_gate(&m, &g, site, &Truncation::exact()).unwrap();
        let expect = dense_apply(&v, 5, &g, site);
        assert!(max_diff_up_to_phase(&out.to_statevector(), &expect) < 1e-10);
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn gate_validation() {
    let m = Mps::zero_state(3);
    let bad = CMat::from_element(4, 4, ONE);
    assert!(matches!(apply_two_qubit_gate(&m, &bad, 0, &Truncation::default()), Err(crate::Error::Validation(_))));
    assert!(matches!(apply_two_qubit_gate(&m, &linalg::identity(4), 2, &Truncation::default()), Err(crate::Error::Shape(_))));
}

#[test]
fn spectrum_matches_dense_svd() {
    let v = random_vec(256, 21);
    let m = mps_from_statevector(&v, &Truncation::exact()).unwrap();
    for bond in 1..8 {
        let sp = schmidt_spectrum(&m, bond).unwrap();
        let dense = dense_schmidt(&v, bond);
        for (a, b) in sp.singular_values.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((entropy_bits(&dense) - sp.entropy).abs() < 1e-10);
    }
    assert!(schmidt_spectrum(&m, 0).is_err());
    assert!(schmidt_spectrum(&m, 8).is_err());
}

#[test]
fn product_state_spectrum() {
    let sp = schmidt_spectrum(&Mps::zero_state(4), 2).unwrap();
    assert_eq!(sp.singular_values, vec![1.0]);
    assert_eq!(sp.entropy, 0.0);
}

#[test]
fn canonical_forms() {
    let m = random_cores(&[1, 2, 4, 5, 4, 2, 1], 4);
    let dense = m.to_statevector();
    for form in [Form::Left, Form::Right, Form::Mixed(3)] {
        let c = canonicalize(&m, form).unwrap();
        assert!(c.check_canonical(1e-12), "{form:?}");
        let f = linalg::fidelity(&c.to_statevector(), &dense);
        assert!((f - 1.0).abs() < 1e-10);
    }
    let mixed = canonicalize(&m, Form::Mixed(3)).unwrap();
    for k in 0..3 {
        assert!(mixed.core(k).left_isometry_residual() < 1e-12);
    }
    for k in 4..6 {
        assert!(mixed.core(k).right_isometry_residual() < 1e-12);
    }
    assert!(canonicalize(&m, Form::Mixed(6)).is_err());
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let m = mps_from_statevector(&random_vec(64, 2), &Truncation::exact()).unwrap();
    let bytes = write_binary(&m);
    let back = read_binary(&bytes).unwrap();
    assert_eq!(back.cores(), m.cores());
    assert_eq!(write_binary(&back), bytes);
    assert!(read_binary(&bytes[..bytes.len() - 1]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(read_binary(&bad), Err(crate::Error::Format(_))));
}
