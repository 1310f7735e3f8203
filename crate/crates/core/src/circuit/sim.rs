use super::{kak, Circuit, Gate, GateKind};
use crate::dense;
use crate::error::{bail, Result};
use crate::linalg::C64;
use crate::mps::{Mps, Truncation, DEFAULT_SVD_THRESHOLD};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub chi_max: Option<usize>,
    pub svd_threshold: f64,
    /// Route non-adjacent two-qubit gates through SWAP chains instead of
    /// rejecting them.
    pub route_swaps: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { chi_max: None, svd_threshold: DEFAULT_SVD_THRESHOLD, route_swaps: false }
    }
}

/// MPS state of the circuit applied to |0…0⟩.
pub fn simulate(circuit: &Circuit, chi_max: Option<usize>, svd_threshold: f64) -> Result<Mps> {
    simulate_with(circuit, &SimOptions { chi_max, svd_threshold, route_swaps: false })
}

pub fn simulate_with(circuit: &Circuit, opts: &SimOptions) -> Result<Mps> {
    circuit.validate()?;
    let trunc = Truncation::new(opts.chi_max, opts.svd_threshold);
    trunc.validate()?;
    let mut psi = Mps::zero_state(circuit.n);
    for (i, g) in circuit.gates.iter().enumerate() {
        apply_gate(&mut psi, g, &trunc, opts.route_swaps).map_err(|e| match e {
            crate::Error::Validation(m) => crate::Error::Validation(format!("gate {i}: {m}")),
            other => other,
        })?;
    }
    psi.normalize();
    let peak = psi.max_bond();
    psi.set_chi_max(opts.chi_max.unwrap_or(peak));
    Ok(psi)
}

pub(crate) fn apply_gate(psi: &mut Mps, g: &Gate, trunc: &Truncation, route: bool) -> Result<()> {
    match g.wires.len() {
        1 => psi.apply_one_qubit(&g.matrix(), g.wires[0]),
        2 => {
            let (w0, w1) = (g.wires[0], g.wires[1]);
            let m = g.matrix();
            let (lo, m) = if w0 < w1 { (w0, m) } else { (w1, kak::swap4() * m * kak::swap4()) };
            let hi = w0.max(w1);
            if hi == lo + 1 {
                psi.apply_two_qubit_in_place(&m, lo, trunc);
                return Ok(());
            }
            if !route {
                bail!(Validation, "two-qubit gate on non-adjacent wires {w0},{w1}");
            }
            // bring wire `hi` down next to `lo`, apply, then move it back
            let sw = kak::swap4();
            for k in (lo + 1..hi).rev() {
                psi.apply_two_qubit_in_place(&sw, k, trunc);
            }
            psi.apply_two_qubit_in_place(&m, lo, trunc);
            for k in lo + 1..hi {
                psi.apply_two_qubit_in_place(&sw, k, trunc);
            }
            Ok(())
        }
        q => bail!(Validation, "{q}-qubit opaque block needs the dense simulator"),
    }
}

/// Dense statevector of the circuit applied to |0…0⟩.
pub fn simulate_dense(circuit: &Circuit) -> Result<Vec<C64>> {
    if circuit.n > 24 {
        bail!(Capacity, "dense simulation of {} wires exceeds 24", circuit.n);
    }
    circuit.validate()?;
    run_dense(circuit, dense::zero_state(circuit.n))
}

pub(crate) fn run_dense(circuit: &Circuit, mut v: Vec<C64>) -> Result<Vec<C64>> {
    let n = circuit.n;
    for g in &circuit.gates {
        apply_dense(&mut v, n, g);
    }
    Ok(v)
}

pub(crate) fn apply_dense(v: &mut [C64], n: usize, g: &Gate) {
    match &g.kind {
        GateKind::Cnot => dense::cnot(v, n, g.wires[0], g.wires[1]),
        _ => match g.wires.len() {
            1 => dense::apply_1q(v, n, &g.matrix(), g.wires[0]),
            2 => dense::apply_2q(v, n, &g.matrix(), g.wires[0], g.wires[1]),
            _ => dense::apply_kq(v, n, &g.matrix(), &g.wires),
        },
    }
}
