//! Elementary-gate circuits: KAK synthesis, metrics, simulation and export.

pub mod kak;
mod qasm;
mod sim;
mod synth;

pub use kak::{kak_decompose, u3, u3_angles, wrap_angle};
pub use qasm::{format_angle, from_json, from_qasm, to_json, to_qasm};
pub(crate) use qasm::{matrix_from_pairs, matrix_pairs};
pub use sim::{simulate, simulate_dense, simulate_with, SimOptions};
pub(crate) use sim::apply_gate;
pub use synth::{layers_to_circuit, program_to_circuit};

use crate::error::{bail, Result};
use crate::linalg::{is_unitary, phase_distance, CMat};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Rz(f64),
    U3(f64, f64, f64),
    /// wires = [control, target]
    Cnot,
    Opaque2Q(CMat),
    OpaqueKQ { matrix: CMat, modeled_cost: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
}

impl Gate {
    pub fn u3(wire: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate { kind: GateKind::U3(theta, phi, lambda), wires: vec![wire] }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cnot, wires: vec![control, target] }
    }

    pub fn rx(wire: usize, t: f64) -> Self {
        Gate { kind: GateKind::Rx(t), wires: vec![wire] }
    }

    pub fn ry(wire: usize, t: f64) -> Self {
        Gate { kind: GateKind::Ry(t), wires: vec![wire] }
    }

    pub fn rz(wire: usize, t: f64) -> Self {
        Gate { kind: GateKind::Rz(t), wires: vec![wire] }
    }

    /// Opaque block on `wires` (first wire is the high index) with the
    /// default c·4^q cost.
    pub fn opaque(matrix: CMat, wires: Vec<usize>) -> Self {
        if wires.len() == 2 {
            Gate { kind: GateKind::Opaque2Q(matrix), wires }
        } else {
            let modeled_cost = CostModel::default().cost(wires.len());
            Gate { kind: GateKind::OpaqueKQ { matrix, modeled_cost }, wires }
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(self.kind, GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Rz(_) | GateKind::U3(..))
    }

    pub fn is_elementary(&self) -> bool {
        self.is_single_qubit() || matches!(self.kind, GateKind::Cnot)
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => vec![t],
            GateKind::U3(a, b, c) => vec![a, b, c],
            _ => vec![],
        }
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Rz(_) => 1,
            GateKind::U3(..) => 3,
            _ => 0,
        }
    }

    pub(crate) fn set_params(&mut self, p: &[f64]) {
        match &mut self.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => *t = p[0],
            GateKind::U3(a, b, c) => (*a, *b, *c) = (p[0], p[1], p[2]),
            _ => {}
        }
    }

    /// Matrix on the gate's own wires, first wire as the high index.
    pub fn matrix(&self) -> CMat {
        match &self.kind {
            GateKind::Rx(t) => kak::rx(*t),
            GateKind::Ry(t) => kak::ry(*t),
            GateKind::Rz(t) => kak::rz(*t),
            GateKind::U3(a, b, c) => kak::u3(*a, *b, *c),
            GateKind::Cnot => kak::cx12(),
            GateKind::Opaque2Q(m) => m.clone(),
            GateKind::OpaqueKQ { matrix, .. } => matrix.clone(),
        }
    }

    /// Derivative of the matrix with respect to parameter `slot`.
    pub fn matrix_derivative(&self, slot: usize) -> CMat {
        use crate::linalg::{c, real};
        match self.kind {
            GateKind::Rx(t) => &kak::rx(t) * (kak::pauli_x() * c(0.0, -0.5)),
            GateKind::Ry(t) => &kak::ry(t) * (kak::pauli_y() * c(0.0, -0.5)),
            GateKind::Rz(t) => &kak::rz(t) * (kak::pauli_z() * c(0.0, -0.5)),
            GateKind::U3(theta, phi, lambda) => {
                let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let e = |x: f64, a: f64| crate::linalg::C64::from_polar(x, a);
                let i = crate::linalg::I;
                let v = match slot {
                    0 => [real(-si / 2.0), -e(co / 2.0, lambda), e(co / 2.0, phi), e(-si / 2.0, phi + lambda)],
                    1 => [real(0.0), real(0.0), i * e(si, phi), i * e(co, phi + lambda)],
                    _ => [real(0.0), -i * e(si, lambda), real(0.0), i * e(co, phi + lambda)],
                };
                CMat::from_row_slice(2, 2, &v)
            }
            _ => CMat::zeros(1, 1),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Some(w) = self.wires.iter().find(|&&w| w >= n) {
            bail!(Validation, "wire {w} out of range for {n} wires");
        }
        for (i, w) in self.wires.iter().enumerate() {
            if self.wires[..i].contains(w) {
                bail!(Validation, "gate repeats wire {w}");
            }
        }
        let want = match &self.kind {
            GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Rz(_) | GateKind::U3(..) => 1,
            GateKind::Cnot | GateKind::Opaque2Q(_) => 2,
            GateKind::OpaqueKQ { .. } => self.wires.len().max(1),
        };
        if self.wires.len() != want {
            bail!(Validation, "gate expects {want} wires, has {}", self.wires.len());
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            bail!(Validation, "non-finite angle");
        }
        if let GateKind::Opaque2Q(m) | GateKind::OpaqueKQ { matrix: m, .. } = &self.kind {
            let d = 1usize << self.wires.len();
            if m.shape() != (d, d) || !is_unitary(m, 1e-10) {
                bail!(Validation, "opaque block is not a {d}x{d} unitary");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Mpd,
    MpdTno,
    ExactSequential,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Mpd => "mpd",
            Provenance::MpdTno => "mpd-tno",
            Provenance::ExactSequential => "exact-sequential",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mpd" => Some(Provenance::Mpd),
            "mpd-tno" => Some(Provenance::MpdTno),
            "exact-sequential" | "exact" => Some(Provenance::ExactSequential),
            _ => None,
        }
    }
}

/// Gate list in application order; `global_phase` collects phases discarded
/// during synthesis and is kept for debugging only.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n: usize,
    pub gates: Vec<Gate>,
    pub provenance: Provenance,
    pub global_phase: f64,
}

/// Elementary-gate cost assigned to an opaque q-qubit block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// ⌈c·4^q⌉.
    Asymptotic { c: f64 },
    /// Unoptimised Shannon recursion G(q) = 4·G(q−1) + 3·2^q seeded with
    /// G(2) = 18 (three CNOTs and fifteen elementary rotations).
    Shannon,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::Asymptotic { c: 1.0 }
    }
}

impl CostModel {
    pub fn cost(self, q: usize) -> u64 {
        match self {
            CostModel::Asymptotic { c } => (c * 4f64.powi(q as i32)).ceil() as u64,
            CostModel::Shannon => {
                if q <= 1 {
                    return 3;
                }
                let mut g = 18u64;
                for k in 3..=q {
                    g = 4 * g + 3 * (1u64 << k);
                }
                g
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub cnot_count: usize,
    pub single_qubit_count: usize,
    /// Elementary gates plus modeled gates of opaque blocks.
    pub total_gates: u64,
    pub depth: u64,
    pub parameter_count: usize,
    pub opaque_blocks: usize,
    pub modeled_gates: u64,
    /// True when any count comes from the opaque-block cost model.
    pub modeled: bool,
}

impl Circuit {
    pub fn new(n: usize, provenance: Provenance) -> Self {
        Circuit { n, gates: Vec::new(), provenance, global_phase: 0.0 }
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.n)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.gates.iter().try_for_each(|g| g.validate(self.n))
    }

    pub fn is_elementary(&self) -> bool {
        self.gates.iter().all(Gate::is_elementary)
    }

    pub fn metrics(&self) -> CircuitMetrics {
        self.metrics_with(None)
    }

    /// Metrics with opaque blocks re-scored by `model`; `None` keeps the cost
    /// stored on each block.
    pub fn metrics_with(&self, model: Option<CostModel>) -> CircuitMetrics {
        let mut m = CircuitMetrics::default();
        let mut time = vec![0u64; self.n];
        for g in &self.gates {
            let cost = match &g.kind {
                GateKind::Cnot => {
                    m.cnot_count += 1;
                    1
                }
                GateKind::Opaque2Q(_) | GateKind::OpaqueKQ { .. } => {
                    let stored = match g.kind {
                        GateKind::OpaqueKQ { modeled_cost, .. } => modeled_cost,
                        _ => CostModel::default().cost(2),
                    };
                    let c = model.map_or(stored, |cm| cm.cost(g.wires.len()));
                    m.opaque_blocks += 1;
                    m.modeled_gates += c;
                    c
                }
                _ => {
                    m.single_qubit_count += 1;
                    m.parameter_count += g.n_params();
                    1
                }
            };
            let t = g.wires.iter().map(|&w| time[w]).max().unwrap_or(0) + cost;
            for &w in &g.wires {
                time[w] = t;
            }
        }
        m.depth = time.into_iter().max().unwrap_or(0);
        m.total_gates = (m.cnot_count + m.single_qubit_count) as u64 + m.modeled_gates;
        m.modeled = m.opaque_blocks > 0;
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.gates.iter().map(Gate::n_params).sum()
    }

    /// Rotation angles in gate order, slots in declaration order.
    pub fn parameters(&self) -> Vec<f64> {
        self.gates.iter().flat_map(Gate::params).collect()
    }

    pub fn with_parameters(&self, p: &[f64]) -> Result<Circuit> {
        if p.len() != self.parameter_count() {
            bail!(Shape, "{} parameters for a circuit with {}", p.len(), self.parameter_count());
        }
        let mut out = self.clone();
        let mut at = 0;
        for g in &mut out.gates {
            let k = g.n_params();
            g.set_params(&p[at..at + k]);
            at += k;
        }
        Ok(out)
    }

    /// Merges every run of single-qubit gates on a wire into one U3 and drops
    /// runs that multiply to the identity.
    pub fn fuse_single_qubit(&self) -> Circuit {
        let mut out = Circuit { gates: Vec::with_capacity(self.gates.len()), ..self.clone() };
        let mut pending: Vec<Option<CMat>> = vec![None; self.n];
        let flush = |w: usize, pending: &mut Vec<Option<CMat>>, out: &mut Circuit| {
            if let Some(m) = pending[w].take() {
                if let Some((g, d)) = kak::u3_gate(&m, w) {
                    out.gates.push(g);
                    out.global_phase += d;
                } else {
                    out.global_phase += ((CMat::identity(2, 2).adjoint() * &m).trace()).arg();
                }
            }
        };
        for g in &self.gates {
            if g.is_single_qubit() {
                let w = g.wires[0];
                let m = g.matrix();
                pending[w] = Some(match pending[w].take() {
                    Some(p) => m * p,
                    None => m,
                });
            } else {
                for &w in &g.wires {
                    flush(w, &mut pending, &mut out);
                }
                out.gates.push(g.clone());
            }
        }
        for w in 0..self.n {
            flush(w, &mut pending, &mut out);
        }
        out.global_phase = wrap_angle(out.global_phase);
        out
    }
}

/// Two circuits agree up to global phase on every input (dense check, n ≤ 10).
pub fn equivalent(a: &Circuit, b: &Circuit, tol: f64) -> Result<bool> {
    if a.n != b.n {
        return Ok(false);
    }
    let d = 1usize << a.n;
    let mut ua = CMat::zeros(d, d);
    let mut ub = CMat::zeros(d, d);
    for j in 0..d {
        let mut e = vec![crate::linalg::ZERO; d];
        e[j] = crate::linalg::ONE;
        let va = sim::run_dense(a, e.clone())?;
        let vb = sim::run_dense(b, e)?;
        for i in 0..d {
            ua[(i, j)] = va[i];
            ub[(i, j)] = vb[i];
        }
    }
    Ok(phase_distance(&ua, &ub) <= tol)
}
