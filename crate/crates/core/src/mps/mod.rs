//! Open-boundary matrix product states over qubits.
//!
//! Site 0 carries the most significant bit of the computational-basis index,
//! so `to_statevector()[j]` is the amplitude of the bitstring of `j` read
//! from site 0 to site n−1.

mod io;

pub use io::{read_binary, write_binary};

use crate::error::{bail, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SVD_THRESHOLD: f64 = 1e-10;

/// One site tensor A[l, p, r], stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    right: usize,
    data: Vec<C64>,
}

impl Core {
    pub fn new(left: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if left == 0 || right == 0 || data.len() != left * 2 * right {
            bail!(Shape, "core data of length {} does not fit ({left}, 2, {right})", data.len());
        }
        Ok(Core { left, right, data })
    }

    pub fn zeros(left: usize, right: usize) -> Self {
        Core { left, right, data: vec![ZERO; left * 2 * right] }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, l: usize, p: usize, r: usize) -> C64 {
        self.data[(l * 2 + p) * self.right + r]
    }

    #[inline]
    pub fn get_mut(&mut self, l: usize, p: usize, r: usize) -> &mut C64 {
        &mut self.data[(l * 2 + p) * self.right + r]
    }

    /// (left·2) × right view.
    pub fn left_matrix(&self) -> CMat {
        CMat::from_row_slice(self.left * 2, self.right, &self.data)
    }

    /// left × (2·right) view.
    pub fn right_matrix(&self) -> CMat {
        CMat::from_row_slice(self.left, 2 * self.right, &self.data)
    }

    fn from_left_matrix(m: &CMat) -> Self {
        let (r2, right) = m.shape();
        Core { left: r2 / 2, right, data: row_major(m) }
    }

    fn from_right_matrix(m: &CMat) -> Self {
        let (left, c2) = m.shape();
        Core { left, right: c2 / 2, data: row_major(m) }
    }

    /// The p-th physical slice as a left × right matrix.
    pub fn slice(&self, p: usize) -> CMat {
        CMat::from_fn(self.left, self.right, |l, r| self.get(l, p, r))
    }

    /// Max-norm residual of Σ_{l,p} conj(A[l,p,r]) A[l,p,r'] − δ_{rr'}.
    pub fn left_isometry_residual(&self) -> f64 {
        let m = self.left_matrix();
        identity_residual(&(m.adjoint() * m))
    }

    /// Max-norm residual of Σ_{p,r} A[l,p,r] conj(A[l',p,r]) − δ_{ll'}.
    pub fn right_isometry_residual(&self) -> f64 {
        let m = self.right_matrix();
        identity_residual(&(&m * m.adjoint()))
    }
}

fn identity_residual(g: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - t).norm());
        }
    }
    worst
}

pub(crate) fn row_major(m: &CMat) -> Vec<C64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Canonical {
    None,
    Left,
    Right,
    Mixed(usize),
}

/// Requested gauge for [`canonicalize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Left,
    Right,
    Mixed(usize),
}

/// Bond cap and singular-value cut applied at every SVD split.
///
/// The threshold compares singular values normalised by the norm of the split
/// tensor, so it means the same thing for normalised and unnormalised states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub chi_max: Option<usize>,
    pub threshold: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { chi_max: None, threshold: DEFAULT_SVD_THRESHOLD }
    }
}

impl Truncation {
    pub fn new(chi_max: Option<usize>, threshold: f64) -> Self {
        Truncation { chi_max, threshold }
    }

    pub fn exact() -> Self {
        Truncation { chi_max: None, threshold: 0.0 }
    }

    pub fn capped(chi_max: usize) -> Self {
        Truncation { chi_max: Some(chi_max), threshold: DEFAULT_SVD_THRESHOLD }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max == Some(0) {
            bail!(InvalidParameter, "chi_max must be at least 1");
        }
        if !(self.threshold >= 0.0) {
            bail!(InvalidParameter, "svd_threshold must be non-negative, got {}", self.threshold);
        }
        Ok(())
    }

    /// Number of leading singular values kept; never less than one.
    pub fn keep(&self, s: &[f64]) -> usize {
        let total = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cut = self.threshold * total;
        let mut k = s.iter().take_while(|&&x| x >= cut && x > 0.0).count();
        if let Some(c) = self.chi_max {
            k = k.min(c);
        }
        k.max(1).min(s.len().max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    cores: Vec<Core>,
    chi_max: usize,
    canonical: Canonical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum {
    pub bond_index: usize,
    pub singular_values: Vec<f64>,
    pub entropy: f64,
}

impl Mps {
    /// Builds an MPS from cores, checking bond consistency.
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            bail!(Shape, "an MPS needs at least one site");
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            bail!(Shape, "boundary bond dimensions must be 1");
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                bail!(Shape, "bond {} mismatch: {} vs {}", k + 1, w[0].right, w[1].left);
            }
        }
        let chi = cores.iter().map(|c| c.right).max().unwrap_or(1);
        Ok(Mps { cores, chi_max: chi.max(1), canonical: Canonical::None })
    }

    /// |0…0⟩ on n sites.
    pub fn zero_state(n: usize) -> Self {
        Self::product(&vec![[ONE, ZERO]; n])
    }

    /// Product state from per-site single-qubit amplitudes.
    pub fn product(sites: &[[C64; 2]]) -> Self {
        let unit = sites.iter().all(|a| ((a[0].norm_sqr() + a[1].norm_sqr()) - 1.0).abs() < 1e-14);
        let cores = sites.iter().map(|a| Core { left: 1, right: 1, data: a.to_vec() }).collect();
        let canonical = if unit { Canonical::Left } else { Canonical::None };
        Mps { cores, chi_max: 1, canonical }
    }

    pub fn n(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn canonical(&self) -> Canonical {
        self.canonical
    }

    /// Bond dimensions α_1..α_{n−1}.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores[..self.n() - 1].iter().map(|c| c.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub(crate) fn set_chi_max(&mut self, chi: usize) {
        self.chi_max = chi.max(self.max_bond());
    }

    fn center(&self) -> Option<usize> {
        match self.canonical {
            Canonical::None => None,
            Canonical::Left => Some(self.n() - 1),
            Canonical::Right => Some(0),
            Canonical::Mixed(c) => Some(c),
        }
    }

    fn set_center(&mut self, c: usize) {
        let n = self.n();
        self.canonical = if c == n - 1 {
            Canonical::Left
        } else if c == 0 {
            Canonical::Right
        } else {
            Canonical::Mixed(c)
        };
    }

    /// Moves the orthogonality centre to `to` with QR steps only.
    pub(crate) fn move_center(&mut self, to: usize) {
        let (lo, hi) = match self.center() {
            Some(c) => (c.min(to), c.max(to)),
            None => (0, self.n() - 1),
        };
        let from_none = self.center().is_none();
        if from_none || to > lo {
            for k in lo..to {
                self.qr_right(k);
            }
        }
        if from_none || to < hi {
            for k in ((to + 1)..=hi).rev() {
                self.lq_left(k);
            }
        }
        self.set_center(to);
    }

    fn qr_right(&mut self, k: usize) {
        let (q, r) = linalg::qr(&self.cores[k].left_matrix());
        self.cores[k] = Core::from_left_matrix(&q);
        let next = r * self.cores[k + 1].right_matrix();
        self.cores[k + 1] = Core::from_right_matrix(&next);
    }

    fn lq_left(&mut self, k: usize) {
        let (q, r) = linalg::qr(&self.cores[k].right_matrix().adjoint());
        self.cores[k] = Core::from_right_matrix(&q.adjoint());
        let prev = self.cores[k - 1].left_matrix() * r.adjoint();
        self.cores[k - 1] = Core::from_left_matrix(&prev);
    }

    /// ‖ψ‖ computed through the gauge centre when available.
    pub fn norm(&self) -> f64 {
        match self.center() {
            Some(c) => self.cores[c].data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
            None => inner_product_unchecked(self, self).re.max(0.0).sqrt(),
        }
    }

    /// Rescales to unit norm. Returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let nrm = self.norm();
        if nrm > 0.0 {
            let k = self.center().unwrap_or(0);
            self.cores[k].data.iter_mut().for_each(|x| *x /= nrm);
        }
        nrm
    }

    /// Dense amplitudes; intended for small n and test oracles.
    pub fn to_statevector(&self) -> Vec<C64> {
        let mut v = vec![ONE];
        let mut rows = 1usize;
        let mut r = 1usize;
        for core in &self.cores {
            let r2 = core.right;
            let mut out = vec![ZERO; rows * 2 * r2];
            for i in 0..rows {
                for l in 0..r {
                    let x = v[i * r + l];
                    if x == ZERO {
                        continue;
                    }
                    for p in 0..2 {
                        let base = (i * 2 + p) * r2;
                        let src = (l * 2 + p) * r2;
                        for j in 0..r2 {
                            out[base + j] += x * core.data[src + j];
                        }
                    }
                }
            }
            v = out;
            rows *= 2;
            r = r2;
        }
        v
    }

    /// Amplitude of one basis index given as bits, site 0 first.
    pub fn amplitude(&self, bits: &[u8]) -> C64 {
        let mut row = vec![ONE];
        for (core, &b) in self.cores.iter().zip(bits) {
            let mut next = vec![ZERO; core.right];
            for (l, &x) in row.iter().enumerate() {
                for (r, y) in next.iter_mut().enumerate() {
                    *y += x * core.get(l, b as usize, r);
                }
            }
            row = next;
        }
        row[0]
    }

    /// Applies a 2×2 matrix to the physical index of `site`.
    pub fn apply_one_qubit(&mut self, g: &CMat, site: usize) -> Result<()> {
        if site >= self.n() {
            bail!(Shape, "site {site} out of range for n={}", self.n());
        }
        if g.shape() != (2, 2) {
            bail!(Shape, "single-qubit gate must be 2x2");
        }
        let core = &mut self.cores[site];
        for l in 0..core.left {
            for r in 0..core.right {
                let a0 = core.get(l, 0, r);
                let a1 = core.get(l, 1, r);
                *core.get_mut(l, 0, r) = g[(0, 0)] * a0 + g[(0, 1)] * a1;
                *core.get_mut(l, 1, r) = g[(1, 0)] * a0 + g[(1, 1)] * a1;
            }
        }
        if !linalg::is_unitary(g, 1e-10) {
            self.canonical = Canonical::None;
        }
        Ok(())
    }

    /// In-place two-site update; returns the discarded weight (root-sum-square).
    pub(crate) fn apply_two_qubit_in_place(&mut self, g: &CMat, site: usize, trunc: &Truncation) -> f64 {
        self.move_center(site);
        let a = &self.cores[site];
        let b = &self.cores[site + 1];
        let (l, r) = (a.left, b.right);
        let theta = a.left_matrix() * b.right_matrix();
        // theta rows (l, p1), cols (p2, r)
        let mut out = CMat::zeros(l * 2, 2 * r);
        for li in 0..l {
            for ri in 0..r {
                let mut t = [ZERO; 4];
                for p1 in 0..2 {
                    for p2 in 0..2 {
                        t[p1 * 2 + p2] = theta[(li * 2 + p1, p2 * r + ri)];
                    }
                }
                for q in 0..4 {
                    let mut acc = ZERO;
                    for p in 0..4 {
                        acc += g[(q, p)] * t[p];
                    }
                    out[(li * 2 + q / 2, (q % 2) * r + ri)] = acc;
                }
            }
        }
        let dec = linalg::svd(&out);
        let keep = trunc.keep(&dec.s);
        let total: f64 = dec.s.iter().map(|x| x * x).sum();
        let kept: f64 = dec.s[..keep].iter().map(|x| x * x).sum();
        let discarded = (total - kept).max(0.0).sqrt();
        let scale = if kept > 0.0 { (total / kept).sqrt() } else { 1.0 };
        let u = dec.u.columns(0, keep).into_owned();
        let mut sv = dec.vt.rows(0, keep).into_owned();
        for i in 0..keep {
            let s = dec.s[i] * scale;
            sv.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        self.cores[site] = Core::from_left_matrix(&u);
        self.cores[site + 1] = Core::from_right_matrix(&sv);
        self.set_center(site + 1);
        discarded
    }
}

fn check_power_of_two(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        bail!(Shape, "amplitude vector length {len} is not a power of two >= 2");
    }
    Ok(len.trailing_zeros() as usize)
}

/// Sequential-SVD construction from dense amplitudes; the result is
/// normalised and left-canonical.
pub fn mps_from_statevector(amplitudes: &[C64], trunc: &Truncation) -> Result<Mps> {
    trunc.validate()?;
    let n = check_power_of_two(amplitudes.len())?;
    let nrm = linalg::norm(amplitudes);
    if !(nrm > 0.0) || !nrm.is_finite() {
        bail!(InvalidInput, "state vector has zero or non-finite norm");
    }
    let mut rest: Vec<C64> = amplitudes.iter().map(|x| x / nrm).collect();
    let mut cores = Vec::with_capacity(n);
    let mut left = 1usize;
    for _ in 0..n - 1 {
        let rows = left * 2;
        let cols = rest.len() / rows;
        let m = CMat::from_row_slice(rows, cols, &rest);
        let dec = linalg::svd(&m);
        let keep = trunc.keep(&dec.s);
        let u = dec.u.columns(0, keep).into_owned();
        cores.push(Core::from_left_matrix(&u));
        let mut sv = dec.vt.rows(0, keep).into_owned();
        for i in 0..keep {
            let s = dec.s[i];
            sv.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        rest = row_major(&sv);
        left = keep;
    }
    cores.push(Core { left, right: 1, data: rest });
    let mut mps = Mps::from_cores(cores)?;
    mps.set_center(n - 1);
    mps.normalize();
    if let Some(c) = trunc.chi_max {
        mps.set_chi_max(c);
    }
    Ok(mps)
}

/// Fixed-χ truncation by one left-to-right SVD sweep over a right-canonical
/// gauge. Returns the normalised left-canonical result and the root-sum-square
/// of every discarded singular value.
pub fn truncate(mps: &Mps, chi_max: usize, svd_threshold: f64) -> Result<(Mps, f64)> {
    let trunc = Truncation::new(Some(chi_max), svd_threshold);
    trunc.validate()?;
    let mut m = mps.clone();
    m.move_center(0);
    m.normalize();
    let n = m.n();
    let mut err2 = 0.0;
    for k in 0..n - 1 {
        let dec = linalg::svd(&m.cores[k].left_matrix());
        let keep = trunc.keep(&dec.s);
        err2 += dec.s[keep..].iter().map(|x| x * x).sum::<f64>();
        let u = dec.u.columns(0, keep).into_owned();
        let mut sv = dec.vt.rows(0, keep).into_owned();
        for i in 0..keep {
            let s = dec.s[i];
            sv.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        m.cores[k] = Core::from_left_matrix(&u);
        let next = sv * m.cores[k + 1].right_matrix();
        m.cores[k + 1] = Core::from_right_matrix(&next);
    }
    m.set_center(n - 1);
    m.normalize();
    m.chi_max = chi_max.max(1);
    Ok((m, err2.sqrt()))
}

/// ⟨a|b⟩ by left-to-right transfer matrices.
pub fn inner_product(a: &Mps, b: &Mps) -> Result<C64> {
    if a.n() != b.n() {
        bail!(Shape, "site count mismatch: {} vs {}", a.n(), b.n());
    }
    Ok(inner_product_unchecked(a, b))
}

fn inner_product_unchecked(a: &Mps, b: &Mps) -> C64 {
    let mut env = CMat::from_element(1, 1, ONE);
    for (ca, cb) in a.cores.iter().zip(&b.cores) {
        let mut next = CMat::zeros(ca.right, cb.right);
        for p in 0..2 {
            next += ca.slice(p).adjoint() * &env * cb.slice(p);
        }
        env = next;
    }
    env[(0, 0)]
}

/// 2×2 matrix M with M[a][b] = ⟨bra| (|a⟩⟨b| at `site`) |ket⟩, so that
/// ⟨bra| D_site |ket⟩ = Σ D[a][b]·M[a][b].
pub fn site_transition(bra: &Mps, ket: &Mps, site: usize) -> Result<CMat> {
    if bra.n() != ket.n() || site >= bra.n() {
        bail!(Shape, "site {site} for chains of {} and {} sites", bra.n(), ket.n());
    }
    let mut left = CMat::from_element(1, 1, ONE);
    for (ca, cb) in bra.cores[..site].iter().zip(&ket.cores[..site]) {
        let mut next = CMat::zeros(ca.right, cb.right);
        for p in 0..2 {
            next += ca.slice(p).adjoint() * &left * cb.slice(p);
        }
        left = next;
    }
    let mut right = CMat::from_element(1, 1, ONE);
    for (ca, cb) in bra.cores[site + 1..].iter().zip(&ket.cores[site + 1..]).rev() {
        let mut next = CMat::zeros(ca.left, cb.left);
        for p in 0..2 {
            next += ca.slice(p).conjugate() * &right * cb.slice(p).transpose();
        }
        right = next;
    }
    let (ca, cb) = (&bra.cores[site], &ket.cores[site]);
    let mut m = CMat::zeros(2, 2);
    for b in 0..2 {
        let w = &left * cb.slice(b) * right.transpose();
        for a in 0..2 {
            m[(a, b)] = ca.slice(a).conjugate().component_mul(&w).sum();
        }
    }
    Ok(m)
}

/// |⟨a|b⟩|² for normalised inputs.
pub fn fidelity(a: &Mps, b: &Mps) -> Result<f64> {
    let ov = inner_product(a, b)?;
    let na = inner_product_unchecked(a, a).re;
    let nb = inner_product_unchecked(b, b).re;
    Ok(ov.norm_sqr() / (na * nb))
}

/// Applies a 4×4 unitary to sites (site, site+1), re-splitting by SVD.
pub fn apply_two_qubit_gate(mps: &Mps, gate: &CMat, site: usize, trunc: &Truncation) -> Result<Mps> {
    trunc.validate()?;
    if gate.shape() != (4, 4) {
        bail!(Shape, "two-qubit gate must be 4x4");
    }
    if mps.n() < 2 || site > mps.n() - 2 {
        bail!(Shape, "site {site} out of range for n={}", mps.n());
    }
    if !linalg::is_unitary(gate, 1e-10) {
        bail!(Validation, "gate is not unitary (residual {:.3e})", linalg::unitarity_residual(gate));
    }
    let mut out = mps.clone();
    out.apply_two_qubit_in_place(gate, site, trunc);
    if let Some(c) = trunc.chi_max {
        out.set_chi_max(c);
    } else {
        out.chi_max = out.chi_max.max(out.max_bond());
    }
    Ok(out)
}

/// Schmidt values across the cut between sites `bond_index − 1` and `bond_index`.
pub fn schmidt_spectrum(mps: &Mps, bond_index: usize) -> Result<SchmidtSpectrum> {
    let n = mps.n();
    if bond_index < 1 || bond_index > n.saturating_sub(1) {
        bail!(Shape, "bond index {bond_index} outside [1, {}]", n.saturating_sub(1));
    }
    let mut m = mps.clone();
    m.move_center(bond_index - 1);
    let s = linalg::svd(&m.cores[bond_index - 1].left_matrix()).s;
    let entropy = entropy_bits(&s);
    Ok(SchmidtSpectrum { bond_index, singular_values: s, entropy })
}

/// −Σ p log₂ p over the normalised squared values.
pub fn entropy_bits(s: &[f64]) -> f64 {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return 0.0;
    }
    s.iter()
        .map(|x| x * x / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Returns the same state in the requested gauge.
pub fn canonicalize(mps: &Mps, form: Form) -> Result<Mps> {
    let n = mps.n();
    let c = match form {
        Form::Left => n - 1,
        Form::Right => 0,
        Form::Mixed(c) => {
            if c >= n {
                bail!(Shape, "centre {c} out of range for n={n}");
            }
            c
        }
    };
    let mut m = mps.clone();
    m.canonical = Canonical::None;
    m.move_center(c);
    if let Form::Mixed(c) = form {
        m.canonical = Canonical::Mixed(c);
    }
    Ok(m)
}

impl Mps {
    /// True when the cores match the recorded gauge to `tol`.
    pub fn check_canonical(&self, tol: f64) -> bool {
        match self.center() {
            None => true,
            Some(c) => {
                self.cores[..c].iter().all(|x| x.left_isometry_residual() <= tol)
                    && self.cores[c + 1..].iter().all(|x| x.right_isometry_residual() <= tol)
            }
        }
    }
}

#[cfg(test)]
mod tests;
