//! Dense oracles that share no code with the library: plain reshapes and
//! nalgebra's SVD (the library factorises with faer).

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

/// |⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩).
pub fn fidelity(a: &[C], b: &[C]) -> f64 {
    let ov: C = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    ov.norm_sqr() / (na * nb)
}

/// Singular triplets sorted by decreasing value.
fn sorted_svd(m: &DMatrix<C>) -> (DMatrix<C>, Vec<f64>, DMatrix<C>) {
    let svd = m.clone().svd(true, true);
    let (u, s, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt = DMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    (u, order.iter().map(|&i| s[i]).collect(), vt)
}

/// Left-to-right TT-SVD of a 2^n vector (first index most significant)
/// keeping at most `chi` values per bond; returns the normalised dense
/// reconstruction.
pub fn tt_svd_truncate(v: &[C], chi: usize) -> Vec<C> {
    let n = v.len().trailing_zeros() as usize;
    assert_eq!(v.len(), 1 << n, "length must be a power of two");
    // `left` is the product of the kept isometries so far: 2^k × r.
    let mut left = DMatrix::<C>::identity(1, 1);
    let mut rest = DMatrix::from_row_slice(1, v.len(), v);
    for _ in 0..n.saturating_sub(1) {
        let (r, cols) = (rest.nrows(), rest.ncols() / 2);
        let m = DMatrix::from_fn(2 * r, cols, |i, j| rest[(i / 2, (i % 2) * cols + j)]);
        let (u, s, vt) = sorted_svd(&m);
        let keep = s.len().min(chi).max(1);
        let u = u.columns(0, keep).into_owned();
        rest = DMatrix::from_fn(keep, cols, |i, j| vt[(i, j)] * s[i]);
        // left ⊗ I2 then times u, index (prefix, bit) → prefix·2 + bit.
        let rows = left.nrows() * 2;
        let grown = DMatrix::from_fn(rows, 2 * r, |i, j| if i % 2 == j % 2 { left[(i / 2, j / 2)] } else { C::new(0.0, 0.0) });
        left = grown * u;
    }
    let out = left * rest;
    let flat: Vec<C> = (0..out.nrows()).flat_map(|i| (0..out.ncols()).map(move |j| (i, j))).map(|(i, j)| out[(i, j)]).collect();
    let norm = flat.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    flat.into_iter().map(|x| x / norm).collect()
}

pub fn tt_svd_truncation_fidelity(v: &[C], chi: usize) -> f64 {
    fidelity(v, &tt_svd_truncate(v, chi))
}

/// Schmidt values across the cut after the first `k` qubits.
pub fn schmidt_values(v: &[C], k: usize) -> Vec<f64> {
    let cols = v.len() >> k;
    let m = DMatrix::from_fn(1 << k, cols, |i, j| v[i * cols + j]);
    sorted_svd(&m).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_state_survives_chi_one() {
        let a = [C::new(0.6, 0.0), C::new(0.8, 0.0)];
        let v: Vec<C> = (0..8).map(|i| a[i >> 2] * a[(i >> 1) & 1] * a[i & 1]).collect();
        assert!((tt_svd_truncation_fidelity(&v, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_cut_is_eckart_young() {
        // Two qubits: the only bond; keeping one value leaves s0²/Σs².
        let v = [C::new(0.5, 0.0), C::new(0.5, 0.1), C::new(0.1, 0.0), C::new(-0.6, 0.2)];
        let s = schmidt_values(&v, 1);
        let want = s[0] * s[0] / s.iter().map(|x| x * x).sum::<f64>();
        assert!((tt_svd_truncation_fidelity(&v, 1) - want).abs() < 1e-14);
    }
}
