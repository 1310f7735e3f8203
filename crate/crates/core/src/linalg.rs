//! Small dense kernels shared by the tensor, circuit and optimizer layers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Thin SVD with singular values in descending order.
///
/// Equal values keep the backend order (stable sort), so truncation at a tie
/// is reproducible.
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub vt: CMat,
}

pub fn svd(m: &CMat) -> Svd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Svd { u: CMat::zeros(r, 0), s: vec![], vt: CMat::zeros(0, c) };
    }
    let fm = faer::Mat::<C64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm.thin_svd().expect("svd did not converge");
    let (fu, fs, fv) = (dec.U(), dec.S(), dec.V());
    let s: Vec<f64> = (0..k).map(|i| fs[i].re).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let u = CMat::from_fn(r, k, |i, j| fu[(i, order[j])]);
    let vt = CMat::from_fn(k, c, |i, j| fv[(j, order[i])].conj());
    let s = order.iter().map(|&j| s[j]).collect();
    Svd { u, s, vt }
}

/// Real thin SVD, descending: (u, s, vt).
pub fn svd_real(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let k = r.min(c);
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm.thin_svd().expect("svd did not converge");
    let (fu, fs, fv) = (dec.U(), dec.S(), dec.V());
    let s: Vec<f64> = (0..k).map(|i| fs[i]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let u = DMatrix::from_fn(r, k, |i, j| fu[(i, order[j])]);
    let vt = DMatrix::from_fn(k, c, |i, j| fv[(j, order[i])]);
    (u, order.iter().map(|&j| s[j]).collect(), vt)
}

/// Real symmetric eigendecomposition, ascending eigenvalues, orthonormal columns.
pub fn sym_eigen_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let dec = fm.self_adjoint_eigen(faer::Side::Lower).expect("eigensolver did not converge");
    let (fu, fs) = (dec.U(), dec.S());
    ((0..d).map(|i| fs[i]).collect(), DMatrix::from_fn(d, d, |i, j| fu[(i, j)]))
}

/// Thin QR: `m = q * r` with `q` having orthonormal columns.
pub fn qr(m: &CMat) -> (CMat, CMat) {
    let dec = m.clone().qr();
    (dec.q(), dec.r())
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Max-norm distance of `m† m` from the identity.
pub fn unitarity_residual(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let g = m.adjoint() * m;
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let t = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - t).norm());
        }
    }
    worst
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    unitarity_residual(m) <= tol
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).s[0]
}

/// `min_φ ‖u − e^{iφ} v‖₂`, the distance used for "equal up to global phase".
pub fn phase_distance(u: &CMat, v: &CMat) -> f64 {
    let t = (v.adjoint() * u).trace();
    let ph = if t.norm() > 0.0 { t / t.norm() } else { ONE };
    spectral_norm(&(u - v * ph))
}

/// Haar-distributed unitary from a complex Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let (q, r) = qr(&g);
    let mut q = q;
    for j in 0..d {
        let x = r[(j, j)];
        let ph = if x.norm() > 0.0 { x / x.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Extends orthonormal columns to a full unitary.
///
/// Completion vectors come from the computational basis in index order,
/// orthogonalised with two passes of modified Gram-Schmidt; candidates whose
/// residual falls under 1e-6 are skipped. The input columns are re-orthonormalised
/// the same way first, so the result is unitary to working precision.
pub fn complete_unitary(cols: &CMat) -> CMat {
    let d = cols.nrows();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..cols.ncols() {
        let v: Vec<C64> = cols.column(j).iter().copied().collect();
        if let Some(v) = orthonormalise(v, &basis, 0.0) {
            basis.push(v);
        }
    }
    let mut e = 0;
    while basis.len() < d && e < d {
        let mut v = vec![ZERO; d];
        v[e] = ONE;
        if let Some(v) = orthonormalise(v, &basis, 1e-6) {
            basis.push(v);
        }
        e += 1;
    }
    assert_eq!(basis.len(), d, "orthonormal completion ran out of candidates");
    CMat::from_fn(d, d, |i, j| basis[j][i])
}

fn orthonormalise(mut v: Vec<C64>, basis: &[Vec<C64>], min_norm: f64) -> Option<Vec<C64>> {
    let n0 = norm(&v);
    if n0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    let n = norm(&v);
    if n <= min_norm * n0 || n == 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Fidelity |⟨a|b⟩|² / (‖a‖²‖b‖²).
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    vdot(a, b).norm_sqr() / (na * na * nb * nb)
}

pub fn mat2(a: [[C64; 2]; 2]) -> CMat {
    CMat::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}
