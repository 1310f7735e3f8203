//! Tensor-network optimisation of the rotation angles of a fixed CNOT
//! skeleton against a target MPS.
//!
//! The cost is L(θ) = 1 − |⟨target|C(θ)|0…0⟩|² / ⟨target|target⟩. Gradients
//! come from one backward sweep: the output state is un-applied gate by gate
//! while the target is pulled back alongside it, so each rotation's
//! derivative is a single local contraction between the two.

mod lbfgs;

pub use lbfgs::{Lbfgs, Minimum, StopReason, TracePoint};

use crate::circuit::{Circuit, Gate, GateKind, Provenance};
use crate::dense;
use crate::error::{bail, Result};
use crate::linalg::{dagger, vdot, CMat, C64, ZERO};
use crate::mps::{self, Mps, Truncation};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Largest n the dense engine accepts.
pub const DENSE_ENGINE_MAX_QUBITS: usize = 16;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const IMAGE_MAX_ITERS: usize = 400;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;

/// Where contractions happen. `Dense` contracts the chains to full vectors
/// once and works on those; `Mps` never leaves the chain form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Dense up to [`DENSE_ENGINE_MAX_QUBITS`], chains beyond.
    #[default]
    Auto,
    Dense,
    Mps,
}

impl Engine {
    pub fn resolve(self, n: usize) -> Engine {
        match self {
            Engine::Auto if n <= DENSE_ENGINE_MAX_QUBITS => Engine::Dense,
            Engine::Auto => Engine::Mps,
            e => e,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(Engine::Auto),
            "dense" => Some(Engine::Dense),
            "mps" => Some(Engine::Mps),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub gate: usize,
    pub slot: usize,
}

/// Rotation angles in canonical circuit order: gates in list order, slots
/// (θ, φ, λ) within a U3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub binding: Vec<ParamSlot>,
}

impl ParamVector {
    pub fn from_circuit(c: &Circuit) -> Self {
        let mut values = Vec::with_capacity(c.parameter_count());
        let mut binding = Vec::with_capacity(values.capacity());
        for (gate, g) in c.gates.iter().enumerate() {
            for (slot, v) in g.params().into_iter().enumerate() {
                values.push(v);
                binding.push(ParamSlot { gate, slot });
            }
        }
        ParamVector { values, binding }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the binding against `c` and that every value is finite.
    pub fn check(&self, c: &Circuit) -> Result<()> {
        if self.values.len() != self.binding.len() || self.values.len() != c.parameter_count() {
            bail!(Shape, "{} parameters bound, circuit has {}", self.values.len(), c.parameter_count());
        }
        let expect = ParamVector::from_circuit(c).binding;
        if self.binding != expect {
            bail!(Shape, "parameter binding does not follow the circuit's canonical order");
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            bail!(InvalidParameter, "parameter {i} is not finite");
        }
        Ok(())
    }
}

/// L(θ) and ∇L(θ) for one (skeleton, target) pair.
pub struct Objective {
    circuit: Circuit,
    engine: Engine,
    target_mps: Mps,
    target_dense: Option<Vec<C64>>,
    target_norm2: f64,
    /// (gate index, first parameter index) of each rotation.
    slots: Vec<(usize, usize)>,
}

impl Objective {
    pub fn new(circuit: &Circuit, target: &Mps, engine: Engine) -> Result<Self> {
        circuit.validate()?;
        if circuit.n != target.n() {
            bail!(Shape, "circuit has {} wires, target {} sites", circuit.n, target.n());
        }
        if let Some(i) = circuit.gates.iter().position(|g| !g.is_elementary()) {
            bail!(Validation, "gate {i} is not elementary");
        }
        let engine = engine.resolve(circuit.n);
        match engine {
            Engine::Dense if circuit.n > DENSE_ENGINE_MAX_QUBITS => {
                bail!(Capacity, "dense engine limited to {DENSE_ENGINE_MAX_QUBITS} qubits, got {}", circuit.n)
            }
            Engine::Mps => {
                if let Some(i) = circuit.gates.iter().position(|g| g.wires.len() == 2 && g.wires[0].abs_diff(g.wires[1]) != 1) {
                    bail!(Validation, "gate {i} is not nearest-neighbour");
                }
            }
            _ => {}
        }
        let target_norm2 = mps::inner_product(target, target)?.re;
        if !(target_norm2 > 0.0) {
            bail!(InvalidTarget, "target has zero norm");
        }
        let mut slots = Vec::new();
        let mut at = 0;
        for (i, g) in circuit.gates.iter().enumerate() {
            if g.n_params() > 0 {
                slots.push((i, at));
                at += g.n_params();
            }
        }
        let target_dense = (engine == Engine::Dense).then(|| target.to_statevector());
        Ok(Objective { circuit: circuit.clone(), engine, target_mps: target.clone(), target_dense, target_norm2, slots })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn len(&self) -> usize {
        self.circuit.parameter_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn initial(&self) -> Vec<f64> {
        self.circuit.parameters()
    }

    /// The skeleton with `p` substituted.
    pub fn bind(&self, p: &[f64]) -> Result<Circuit> {
        self.circuit.with_parameters(p)
    }

    pub fn cost(&self, p: &[f64]) -> Result<f64> {
        let c = self.bind(p)?;
        let ov = match &self.target_dense {
            Some(t) => {
                let mut v = dense::zero_state(c.n);
                for g in &c.gates {
                    apply_dense(&mut v, c.n, g, false);
                }
                vdot(t, &v)
            }
            None => mps::inner_product(&self.target_mps, &run_mps(&c)?)?,
        };
        Ok(1.0 - ov.norm_sqr() / self.target_norm2)
    }

    pub fn cost_and_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = self.bind(p)?;
        match &self.target_dense {
            Some(t) => self.sweep_dense(&c, t),
            None => self.sweep_mps(&c),
        }
    }

    fn finish(&self, amp: C64, partials: Vec<(usize, [C64; 3], usize)>, len: usize) -> (f64, Vec<f64>) {
        // ∂L/∂θ = −2 Re(conj(A)·∂A) / ⟨t|t⟩
        let mut grad = vec![0.0; len];
        for (at, d, k) in partials {
            for s in 0..k {
                grad[at + s] = -2.0 * (amp.conj() * d[s]).re / self.target_norm2;
            }
        }
        (1.0 - amp.norm_sqr() / self.target_norm2, grad)
    }

    fn sweep_dense(&self, c: &Circuit, t: &[C64]) -> Result<(f64, Vec<f64>)> {
        let n = c.n;
        let mut phi = dense::zero_state(n);
        for g in &c.gates {
            apply_dense(&mut phi, n, g, false);
        }
        let amp = vdot(t, &phi);
        let mut chi = t.to_vec();
        let mut partials = Vec::with_capacity(self.slots.len());
        let mut slot_iter = self.slots.iter().rev().peekable();
        for (i, g) in c.gates.iter().enumerate().rev() {
            apply_dense(&mut phi, n, g, true);
            if let Some(&&(gi, at)) = slot_iter.peek() {
                if gi == i {
                    slot_iter.next();
                    let m = dense_transition(&chi, &phi, n, g.wires[0]);
                    partials.push((at, local_partials(g, &m), g.n_params()));
                }
            }
            apply_dense(&mut chi, n, g, true);
        }
        Ok(self.finish(amp, partials, c.parameter_count()))
    }

    fn sweep_mps(&self, c: &Circuit) -> Result<(f64, Vec<f64>)> {
        let mut phi = run_mps(c)?;
        let amp = mps::inner_product(&self.target_mps, &phi)?;
        let mut chi = self.target_mps.clone();
        let trunc = Truncation::new(None, 1e-14);
        let mut partials = Vec::with_capacity(self.slots.len());
        let mut slot_iter = self.slots.iter().rev().peekable();
        for (i, g) in c.gates.iter().enumerate().rev() {
            apply_mps(&mut phi, g, true, &trunc)?;
            if let Some(&&(gi, at)) = slot_iter.peek() {
                if gi == i {
                    slot_iter.next();
                    let m = mps::site_transition(&chi, &phi, g.wires[0])?;
                    partials.push((at, local_partials(g, &m), g.n_params()));
                }
            }
            apply_mps(&mut chi, g, true, &trunc)?;
        }
        Ok(self.finish(amp, partials, c.parameter_count()))
    }
}

/// ∂A for each slot of a single-qubit gate: Σ D_s[a][b]·M[a][b].
fn local_partials(g: &Gate, m: &CMat) -> [C64; 3] {
    let mut out = [ZERO; 3];
    for (s, o) in out.iter_mut().enumerate().take(g.n_params()) {
        let d = g.matrix_derivative(s);
        *o = d.component_mul(m).sum();
    }
    out
}

/// M[a][b] = Σ conj(bra[..a..])·ket[..b..] with the bit of qubit q open.
fn dense_transition(bra: &[C64], ket: &[C64], n: usize, q: usize) -> CMat {
    let mask = 1usize << (n - 1 - q);
    let mut m = CMat::zeros(2, 2);
    for i in (0..bra.len()).filter(|i| i & mask == 0) {
        let (b0, b1) = (bra[i].conj(), bra[i | mask].conj());
        let (k0, k1) = (ket[i], ket[i | mask]);
        m[(0, 0)] += b0 * k0;
        m[(0, 1)] += b0 * k1;
        m[(1, 0)] += b1 * k0;
        m[(1, 1)] += b1 * k1;
    }
    m
}

fn apply_dense(v: &mut [C64], n: usize, g: &Gate, inverse: bool) {
    match g.kind {
        GateKind::Cnot => dense::cnot(v, n, g.wires[0], g.wires[1]),
        _ => {
            let m = if inverse { dagger(&g.matrix()) } else { g.matrix() };
            dense::apply_1q(v, n, &m, g.wires[0]);
        }
    }
}

fn apply_mps(psi: &mut Mps, g: &Gate, inverse: bool, trunc: &Truncation) -> Result<()> {
    if g.is_single_qubit() {
        let m = if inverse { dagger(&g.matrix()) } else { g.matrix() };
        return psi.apply_one_qubit(&m, g.wires[0]);
    }
    crate::circuit::apply_gate(psi, g, trunc, false)
}

fn run_mps(c: &Circuit) -> Result<Mps> {
    let trunc = Truncation::new(None, 1e-14);
    let mut psi = Mps::zero_state(c.n);
    for g in &c.gates {
        apply_mps(&mut psi, g, false, &trunc)?;
    }
    Ok(psi)
}

/// L(θ) with θ bound into `circuit` by `params`.
pub fn cost(params: &ParamVector, circuit: &Circuit, target: &Mps) -> Result<f64> {
    params.check(circuit)?;
    Objective::new(circuit, target, Engine::Auto)?.cost(&params.values)
}

/// ∇L(θ) in canonical parameter order.
pub fn gradient(params: &ParamVector, circuit: &Circuit, target: &Mps) -> Result<Vec<f64>> {
    params.check(circuit)?;
    Ok(Objective::new(circuit, target, Engine::Auto)?.cost_and_gradient(&params.values)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub engine: Engine,
    pub lbfgs: Lbfgs,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_GRAD_TOL, engine: Engine::Auto, lbfgs: Lbfgs::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_evaluations: usize,
    pub final_gradient_norm: f64,
    pub cost_trace: Vec<TracePoint>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub engine: Engine,
    /// Seconds.
    pub wall_time: f64,
}

impl OptimizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `iteration,cost,gradient_norm,wall_time_ms` rows of accepted iterates.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,cost,gradient_norm,wall_time_ms\n");
        for t in &self.cost_trace {
            s.push_str(&format!("{},{:e},{:e},{:.3}\n", t.iteration, t.cost, t.gradient_norm, t.wall_time_ms));
        }
        s
    }
}

/// L-BFGS over the rotation angles, starting from the circuit's own.
pub fn optimize(circuit: &Circuit, target: &Mps, max_iters: usize, tol: f64) -> Result<(ParamVector, OptimizationReport)> {
    optimize_with(circuit, target, &OptimizeOptions { max_iters, tol, ..OptimizeOptions::default() })
}

pub fn optimize_with(circuit: &Circuit, target: &Mps, o: &OptimizeOptions) -> Result<(ParamVector, OptimizationReport)> {
    let start = Instant::now();
    let obj = Objective::new(circuit, target, o.engine)?;
    let lb = Lbfgs { max_iters: o.max_iters, grad_tol: o.tol, ..o.lbfgs };
    let m = lb.minimize(|p| obj.cost_and_gradient(p), obj.initial())?;
    let mut params = ParamVector::from_circuit(circuit);
    params.values = m.x;
    let report = OptimizationReport {
        initial_cost: m.trace[0].cost,
        final_cost: m.f,
        iterations: m.iterations,
        evaluations: m.evaluations,
        gradient_evaluations: m.evaluations,
        final_gradient_norm: m.gradient_norm,
        cost_trace: m.trace,
        converged: m.stop.converged(),
        stop_reason: m.stop,
        engine: obj.engine(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

/// The optimised circuit, labelled as MPD+TNO output.
pub fn bind(circuit: &Circuit, params: &ParamVector) -> Result<Circuit> {
    params.check(circuit)?;
    let mut c = circuit.with_parameters(&params.values)?;
    c.provenance = Provenance::MpdTno;
    Ok(c)
}
