//! Dense statevector kernels; qubit 0 is the most significant index bit.

use crate::linalg::{CMat, C64, ONE, ZERO};

pub fn zero_state(n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 1usize << n];
    v[0] = ONE;
    v
}

fn bit(n: usize, q: usize) -> usize {
    1usize << (n - 1 - q)
}

pub fn apply_1q(psi: &mut [C64], n: usize, g: &CMat, q: usize) {
    let m = bit(n, q);
    let (a, b, c, d) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    for i in 0..psi.len() {
        if i & m == 0 {
            let (x, y) = (psi[i], psi[i | m]);
            psi[i] = a * x + b * y;
            psi[i | m] = c * x + d * y;
        }
    }
}

/// `g` acts on (q0, q1) with q0 the high bit of its 4-dim index.
pub fn apply_2q(psi: &mut [C64], n: usize, g: &CMat, q0: usize, q1: usize) {
    let (m0, m1) = (bit(n, q0), bit(n, q1));
    let idx = [0, m1, m0, m0 | m1];
    let mut buf = [ZERO; 4];
    for i in 0..psi.len() {
        if i & (m0 | m1) != 0 {
            continue;
        }
        for k in 0..4 {
            buf[k] = psi[i | idx[k]];
        }
        for r in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += g[(r, k)] * buf[k];
            }
            psi[i | idx[r]] = acc;
        }
    }
}

/// `g` acts on `qubits`, the first listed being the high bit of its index.
pub fn apply_kq(psi: &mut [C64], n: usize, g: &CMat, qubits: &[usize]) {
    let k = qubits.len();
    let dim = 1usize << k;
    let masks: Vec<usize> = qubits.iter().map(|&q| bit(n, q)).collect();
    let all: usize = masks.iter().fold(0, |a, m| a | m);
    let offs: Vec<usize> = (0..dim)
        .map(|s| (0..k).filter(|&j| s & (1 << (k - 1 - j)) != 0).fold(0, |a, j| a | masks[j]))
        .collect();
    let mut buf = vec![ZERO; dim];
    for i in 0..psi.len() {
        if i & all != 0 {
            continue;
        }
        for s in 0..dim {
            buf[s] = psi[i | offs[s]];
        }
        for r in 0..dim {
            let mut acc = ZERO;
            for s in 0..dim {
                acc += g[(r, s)] * buf[s];
            }
            psi[i | offs[r]] = acc;
        }
    }
}

pub fn cnot(psi: &mut [C64], n: usize, control: usize, target: usize) {
    let (mc, mt) = (bit(n, control), bit(n, target));
    for i in 0..psi.len() {
        if i & mc != 0 && i & mt == 0 {
            psi.swap(i, i | mt);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, kron, identity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full(n: usize, g: &CMat, first: usize) -> CMat {
        let k = (g.nrows() as f64).log2() as usize;
        let left = identity(1 << first);
        let right = identity(1 << (n - first - k));
        kron(&kron(&left, g), &right)
    }

    #[test]
    fn kernels_match_kronecker_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let psi0 = haar_unitary(16, &mut rng).column(0).iter().copied().collect::<Vec<_>>();
        let g1 = haar_unitary(2, &mut rng);
        let g2 = haar_unitary(4, &mut rng);
        let g3 = haar_unitary(8, &mut rng);

        let mut a = psi0.clone();
        apply_1q(&mut a, n, &g1, 2);
        let b = full(n, &g1, 2) * CMat::from_column_slice(16, 1, &psi0);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-13));

        let mut a = psi0.clone();
        apply_2q(&mut a, n, &g2, 1, 2);
        let mut c = psi0.clone();
        apply_kq(&mut c, n, &g2, &[1, 2]);
        let b = full(n, &g2, 1) * CMat::from_column_slice(16, 1, &psi0);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-13));
        assert!(c.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-13));

        let mut a = psi0.clone();
        apply_kq(&mut a, n, &g3, &[0, 1, 2]);
        let b = full(n, &g3, 0) * CMat::from_column_slice(16, 1, &psi0);
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn reversed_wires_swap_the_gate_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = haar_unitary(4, &mut rng);
        let swap = CMat::from_fn(4, 4, |i, j| {
            let t = [0, 2, 1, 3];
            if t[j] == i { ONE } else { ZERO }
        });
        let psi0: Vec<C64> = haar_unitary(8, &mut rng).column(0).iter().copied().collect();
        let mut a = psi0.clone();
        apply_2q(&mut a, 3, &g, 2, 1);
        let mut b = psi0;
        apply_2q(&mut b, 3, &(&swap * &g * &swap), 1, 2);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-13));
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        let mut v = vec![ZERO; 4];
        v[2] = ONE;
        cnot(&mut v, 2, 0, 1);
        assert_eq!(v[3], ONE);
    }
}
