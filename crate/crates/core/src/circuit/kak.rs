//! Two-qubit Cartan (KAK) decomposition into at most three CNOTs.
//!
//! `u = e^{iφ} (A1⊗B1) · Can(a,b,c) · (A2⊗B2)` with
//! `Can(a,b,c) = exp(i(a XX + b YY + c ZZ))`. The magic basis turns local
//! gates into real orthogonal matrices and `Can` into a diagonal.

use super::{Gate, GateKind};
use crate::error::{bail, Result};
use crate::linalg::{c, dagger, kron, phase_distance, real, svd, sym_eigen_real, unitarity_residual, CMat, C64, I, ONE, ZERO};
use nalgebra::DMatrix;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Coordinates closer than this to 0 or π/4 are treated as exact when
/// choosing the CNOT class.
pub const CLASS_TOL: f64 = 1e-9;
/// Reconstruction bound every emitted decomposition is checked against.
pub const RECON_TOL: f64 = 1e-8;

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}
pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}
pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}
pub fn hadamard() -> CMat {
    let h = real(std::f64::consts::FRAC_1_SQRT_2);
    CMat::from_row_slice(2, 2, &[h, h, h, -h])
}

pub fn rx(t: f64) -> CMat {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMat::from_row_slice(2, 2, &[real(co), c(0.0, -si), c(0.0, -si), real(co)])
}
pub fn ry(t: f64) -> CMat {
    let (co, si) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMat::from_row_slice(2, 2, &[real(co), real(-si), real(si), real(co)])
}
pub fn rz(t: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[C64::from_polar(1.0, -t / 2.0), ZERO, ZERO, C64::from_polar(1.0, t / 2.0)])
}

/// `[[cos θ/2, −e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]`.
pub fn u3(theta: f64, phi: f64, lambda: f64) -> CMat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMat::from_row_slice(
        2,
        2,
        &[
            real(co),
            -C64::from_polar(si, lambda),
            C64::from_polar(si, phi),
            C64::from_polar(co, phi + lambda),
        ],
    )
}

/// Wraps into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// U3 angles and global phase δ with `g = e^{iδ} u3(θ, φ, λ)`.
///
/// When sin(θ/2) vanishes only φ+λ is defined; it is carried by λ and φ = 0.
/// When cos(θ/2) vanishes, δ is absorbed into φ.
pub fn u3_angles(g: &CMat) -> ([f64; 3], f64) {
    let (g00, g01, g10, g11) = (g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    let theta = 2.0 * g10.norm().atan2(g00.norm());
    // phases of the small pair are only read through combinations that the
    // small pair multiplies
    let (delta, phi, lambda) = if g00.norm() >= g10.norm() {
        let d = g00.arg();
        let phi = g10.arg() - d;
        (d, phi, g11.arg() - d - phi)
    } else {
        let (a, b) = (g10.arg(), (-g01).arg());
        let d = a + b - g11.arg();
        (d, a - d, b - d)
    };
    ([wrap_angle(theta), wrap_angle(phi), wrap_angle(lambda)], wrap_angle(delta))
}

/// CNOT with control on the high (first) index.
pub fn cx12() -> CMat {
    perm4([0, 1, 3, 2])
}
/// CNOT with control on the low (second) index.
pub fn cx21() -> CMat {
    perm4([0, 3, 2, 1])
}
/// Swap of the two tensor factors.
pub fn swap4() -> CMat {
    perm4([0, 2, 1, 3])
}

fn perm4(p: [usize; 4]) -> CMat {
    CMat::from_fn(4, 4, |i, j| if p[j] == i { ONE } else { ZERO })
}

fn magic() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (o, i) = (real(s), c(0.0, s));
    CMat::from_row_slice(
        4,
        4,
        &[o, i, ZERO, ZERO, ZERO, ZERO, i, o, ZERO, ZERO, i, -o, o, -i, ZERO, ZERO],
    )
}

/// Magic-basis phases of Can(a,b,c).
fn can_phases(a: f64, b: f64, cc: f64) -> [f64; 4] {
    [a - b + cc, -a + b + cc, a + b - cc, -a - b - cc]
}

/// exp(i(a XX + b YY + c ZZ)).
pub fn canonical_gate(a: f64, b: f64, cc: f64) -> CMat {
    let m = magic();
    let t = can_phases(a, b, cc);
    let d = CMat::from_fn(4, 4, |i, j| if i == j { C64::from_polar(1.0, t[i]) } else { ZERO });
    &m * d * m.adjoint()
}

/// `u = phase · k1 · Can(coords) · k2` with local 4×4 factors.
#[derive(Clone, Debug)]
pub struct Kak {
    pub phase: C64,
    pub k1: CMat,
    pub coords: [f64; 3],
    pub k2: CMat,
}

impl Kak {
    pub fn reconstruct(&self) -> CMat {
        let [a, b, cc] = self.coords;
        &self.k1 * canonical_gate(a, b, cc) * &self.k2 * self.phase
    }

    /// Minimal CNOT count of the equivalence class.
    pub fn cnot_class(&self) -> usize {
        cnot_class(self.coords)
    }
}

pub fn cnot_class(coords: [f64; 3]) -> usize {
    let zero = |x: f64| x.abs() < CLASS_TOL;
    let quarter = |x: f64| (x.abs() - FRAC_PI_4).abs() < CLASS_TOL;
    let zeros = coords.iter().filter(|&&x| zero(x)).count();
    let quarters = coords.iter().filter(|&&x| quarter(x)).count();
    match (zeros, quarters) {
        (3, _) => 0,
        (2, 1) => 1,
        (z, _) if z >= 1 => 2,
        _ => 3,
    }
}

/// Cartan decomposition with each coordinate folded into (−π/4, π/4].
pub fn kak(u: &CMat) -> Result<Kak> {
    if u.shape() != (4, 4) {
        bail!(Validation, "KAK needs a 4x4 matrix, got {:?}", u.shape());
    }
    let res = unitarity_residual(u);
    if res > 1e-10 {
        bail!(Validation, "matrix is not unitary (residual {res:.2e})");
    }
    let det = u.determinant();
    let mut phase = C64::from_polar(1.0, det.arg() / 4.0);
    let us = u / phase;
    let m = magic();
    let up = m.adjoint() * &us * &m;
    let m2 = up.transpose() * &up;
    let re = DMatrix::from_fn(4, 4, |i, j| m2[(i, j)].re);
    let im = DMatrix::from_fn(4, 4, |i, j| m2[(i, j)].im);

    let mut p = None;
    for (x, y) in [(1.0, 0.618_033_988_75), (0.314_159_265_4, 1.0), (1.0, -1.732_050_807_6), (0.2, 0.9)] {
        let (_, v) = sym_eigen_real(&(&re * x + &im * y));
        let vc = v.map(real);
        let d = vc.transpose() * &m2 * &vc;
        let off = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| d[(i, j)].norm()).fold(0.0, f64::max);
        if off < 1e-10 {
            p = Some(v);
            break;
        }
    }
    let Some(mut p) = p else {
        bail!(Validation, "could not diagonalise the magic-basis square");
    };
    if p.determinant() < 0.0 {
        for i in 0..4 {
            p[(i, 0)] = -p[(i, 0)];
        }
    }
    let pc = p.map(real);
    let d = pc.transpose() * &m2 * &pc;
    let mut theta = [0.0; 4];
    for j in 0..3 {
        theta[j] = d[(j, j)].arg() / 2.0;
    }
    theta[3] = -(theta[0] + theta[1] + theta[2]);
    let dinv = CMat::from_fn(4, 4, |i, j| if i == j { C64::from_polar(1.0, -theta[i]) } else { ZERO });
    let k1p = &up * &pc * dinv;
    let k1 = &m * k1p * m.adjoint();
    let k2 = &m * pc.transpose() * m.adjoint();
    let mut coords = [(theta[0] + theta[2]) / 2.0, (theta[1] + theta[2]) / 2.0, (theta[0] + theta[1]) / 2.0];

    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let mut k2 = k2;
    for (axis, x) in coords.iter_mut().enumerate() {
        let mut k = ((*x - FRAC_PI_4) / FRAC_PI_2).ceil() as i64;
        let mut y = *x - k as f64 * FRAC_PI_2;
        if y < -FRAC_PI_4 + CLASS_TOL {
            k -= 1;
            y += FRAC_PI_2;
        }
        *x = y;
        // Can(x) = Can(y)·(iP⊗P)^k
        if k.rem_euclid(2) == 1 {
            let pp = kron(&paulis[axis], &paulis[axis]);
            k2 = pp * k2;
        }
        phase *= I.powi(k.rem_euclid(4) as i32);
    }
    Ok(Kak { phase, k1, coords, k2 })
}

/// Splits a 4×4 local unitary into `a ⊗ b` with both factors unitary.
pub fn split_local(k: &CMat) -> Result<(CMat, CMat)> {
    // rearrangement R[(i1 j1), (i2 j2)] = A[i1 j1]·B[i2 j2] is rank one
    let r = CMat::from_fn(4, 4, |row, col| {
        let (i1, j1) = (row / 2, row % 2);
        let (i2, j2) = (col / 2, col % 2);
        k[(2 * i1 + i2, 2 * j1 + j2)]
    });
    let d = svd(&r);
    if d.s.len() < 2 || d.s[1] > 1e-6 * d.s[0].max(1e-300) {
        bail!(Validation, "factor is not a tensor product (second value {:.2e})", d.s.get(1).copied().unwrap_or(0.0));
    }
    let sq = d.s[0].sqrt();
    let mut a = CMat::from_fn(2, 2, |i, j| d.u[(2 * i + j, 0)] * sq);
    let mut b = CMat::from_fn(2, 2, |i, j| d.vt[(0, 2 * i + j)] * sq);
    let scale = a.determinant().norm().sqrt();
    a /= real(scale);
    b *= real(scale);
    Ok((a, b))
}

/// One time step of a two-wire template.
#[derive(Clone, Debug)]
pub enum Step {
    Local(CMat, CMat),
    Cx12,
    Cx21,
}

/// Product of time-ordered steps (later steps multiply on the left).
pub fn steps_matrix(steps: &[Step]) -> CMat {
    let mut m = CMat::identity(4, 4);
    for s in steps {
        let g = match s {
            Step::Local(a, b) => kron(a, b),
            Step::Cx12 => cx12(),
            Step::Cx21 => cx21(),
        };
        m = g * m;
    }
    m
}

fn id2() -> CMat {
    CMat::identity(2, 2)
}

/// Three-CNOT realisation of Can(a,b,c), exact up to global phase.
pub fn template3(a: f64, b: f64, cc: f64) -> Vec<Step> {
    vec![
        Step::Local(id2(), rz(FRAC_PI_2)),
        Step::Cx21,
        Step::Local(rz(-2.0 * cc - FRAC_PI_2), ry(-2.0 * a - FRAC_PI_2)),
        Step::Cx12,
        Step::Local(id2(), ry(2.0 * b + FRAC_PI_2)),
        Step::Cx21,
        Step::Local(rz(-FRAC_PI_2), id2()),
    ]
}

/// Two-CNOT realisation of Can(a,b,0).
pub fn template2(a: f64, b: f64) -> Vec<Step> {
    let w = rx(FRAC_PI_2);
    let wd = dagger(&w);
    vec![
        Step::Local(wd.clone(), wd),
        Step::Cx12,
        Step::Local(rx(-2.0 * a), rz(-2.0 * b)),
        Step::Cx12,
        Step::Local(w.clone(), w),
    ]
}

/// One-CNOT realisation of Can(π/4,0,0).
pub fn template1() -> Vec<Step> {
    let h = hadamard();
    vec![
        Step::Local(h.clone(), id2()),
        Step::Cx12,
        Step::Local(rz(-FRAC_PI_2), &rz(-FRAC_PI_2) * &h),
        Step::Local(h.clone(), h),
    ]
}

/// Moves the coordinate at `from` into slot `to` by local conjugation.
fn permute(k: &mut Kak, from: usize, to: usize) {
    if from == to {
        return;
    }
    let h = hadamard();
    let hh = kron(&h, &h);
    let v = rx(FRAC_PI_2);
    let vv = kron(&v, &v);
    // Can(a,b,c) = (H⊗H) Can(c,b,a) (H⊗H);  Can(a,b,c) = (V⊗V)† Can(a,c,b) (V⊗V)
    let swap_ac = |k: &mut Kak| {
        k.k1 = &k.k1 * &hh;
        k.k2 = &hh * &k.k2;
        k.coords.swap(0, 2);
    };
    let swap_bc = |k: &mut Kak| {
        k.k1 = &k.k1 * vv.adjoint();
        k.k2 = &vv * &k.k2;
        k.coords.swap(1, 2);
    };
    match (from.min(to), from.max(to)) {
        (0, 2) => swap_ac(k),
        (1, 2) => swap_bc(k),
        _ => {
            // a↔b = (b↔c)(a↔c)(b↔c)
            swap_bc(k);
            swap_ac(k);
            swap_bc(k);
        }
    }
}

fn argmin_abs(x: [f64; 3]) -> usize {
    (0..3).min_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap()
}

fn argmax_abs(x: [f64; 3]) -> usize {
    (0..3).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap()
}

/// Time-ordered steps realising `u` up to global phase with the minimal
/// CNOT count, plus the discarded phase.
pub fn kak_steps(u: &CMat) -> Result<(Vec<Step>, C64)> {
    let base = kak(u)?;
    let class = base.cnot_class();
    for attempt in [class, 3] {
        let mut k = base.clone();
        let core = match attempt {
            0 => {
                k.coords = [0.0; 3];
                vec![]
            }
            1 => {
                let i = argmax_abs(k.coords);
                permute(&mut k, i, 0);
                if k.coords[0] < 0.0 {
                    // Can(a) = Can(a+π/2)·(−i XX)
                    k.k2 = kron(&pauli_x(), &pauli_x()) * &k.k2;
                    k.phase *= -I;
                }
                k.coords = [FRAC_PI_4, 0.0, 0.0];
                template1()
            }
            2 => {
                let i = argmin_abs(k.coords);
                permute(&mut k, i, 2);
                k.coords[2] = 0.0;
                template2(k.coords[0], k.coords[1])
            }
            _ => template3(k.coords[0], k.coords[1], k.coords[2]),
        };
        let (a2, b2) = split_local(&k.k2)?;
        let (a1, b1) = split_local(&k.k1)?;
        let mut steps = vec![Step::Local(a2, b2)];
        steps.extend(core);
        steps.push(Step::Local(a1, b1));
        let steps = fuse_steps(steps);
        let m = steps_matrix(&steps);
        if phase_distance(u, &m) <= RECON_TOL {
            let t = (m.adjoint() * u).trace();
            let ph = if t.norm() > 0.0 { t / t.norm() } else { ONE };
            return Ok((steps, ph));
        }
    }
    bail!(Validation, "KAK reconstruction exceeded {RECON_TOL:e}")
}

fn fuse_steps(steps: Vec<Step>) -> Vec<Step> {
    let mut out: Vec<Step> = Vec::with_capacity(steps.len());
    for s in steps {
        match (out.last_mut(), s) {
            (Some(Step::Local(a, b)), Step::Local(c2, d2)) => {
                *a = &c2 * &*a;
                *b = &d2 * &*b;
            }
            (_, s) => out.push(s),
        }
    }
    out
}

/// Elementary gates for `u` acting on wires (w0, w1), w0 being the high
/// index of `u`. Identity factors are dropped; local factors become U3.
pub fn kak_decompose(u: &CMat, w0: usize, w1: usize) -> Result<Vec<Gate>> {
    Ok(kak_decompose_with_phase(u, w0, w1)?.0)
}

/// As [`kak_decompose`], also returning the discarded global phase angle.
pub fn kak_decompose_with_phase(u: &CMat, w0: usize, w1: usize) -> Result<(Vec<Gate>, f64)> {
    let (steps, ph) = kak_steps(u)?;
    let mut phase = ph.arg();
    let mut gates = Vec::new();
    for s in steps {
        match s {
            Step::Local(a, b) => {
                for (g, w) in [(a, w0), (b, w1)] {
                    if let Some((gate, d)) = u3_gate(&g, w) {
                        gates.push(gate);
                        phase += d;
                    }
                }
            }
            Step::Cx12 => gates.push(Gate::cnot(w0, w1)),
            Step::Cx21 => gates.push(Gate::cnot(w1, w0)),
        }
    }
    Ok((gates, wrap_angle(phase)))
}

/// U3 gate for a 2×2 unitary, or `None` when it is the identity up to phase.
pub fn u3_gate(g: &CMat, wire: usize) -> Option<(Gate, f64)> {
    if phase_distance(g, &id2()) < 1e-12 {
        return None;
    }
    let ([t, p, l], d) = u3_angles(g);
    Some((Gate { kind: GateKind::U3(t, p, l), wires: vec![wire] }, d))
}
