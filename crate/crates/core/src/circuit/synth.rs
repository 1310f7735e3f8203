use super::{kak, Circuit, CostModel, Gate, GateKind, Provenance};
use crate::error::Result;
use crate::mpd::{ExactSequentialProgram, LayerStack};

/// Elementary circuit for Û_L†⋯Û_1†: layers from L down to 1, each block
/// KAK-decomposed, then single-qubit runs fused.
pub fn layers_to_circuit(stack: &LayerStack) -> Result<Circuit> {
    stack.validate()?;
    let mut c = Circuit::new(stack.n, Provenance::Mpd);
    for layer in stack.layers.iter().rev() {
        for (j, g) in layer.preparation_order() {
            let (gates, phase) = kak::kak_decompose_with_phase(&g, j, j + 1)?;
            c.extend(gates)?;
            c.global_phase += phase;
        }
    }
    Ok(c.fuse_single_qubit())
}

/// Circuit for an exact sequential program: one-qubit blocks become U3,
/// two-qubit blocks are KAK-decomposed, larger blocks stay opaque with the
/// default modeled cost.
pub fn program_to_circuit(p: &ExactSequentialProgram) -> Result<Circuit> {
    let mut c = Circuit::new(p.n, Provenance::ExactSequential);
    for b in &p.blocks {
        match b.wires.len() {
            1 => {
                if let Some((g, d)) = kak::u3_gate(&b.unitary, b.wires[0]) {
                    c.push(g)?;
                    c.global_phase += d;
                }
            }
            2 => {
                let (gates, phase) = kak::kak_decompose_with_phase(&b.unitary, b.wires[0], b.wires[1])?;
                c.extend(gates)?;
                c.global_phase += phase;
            }
            q => c.push(Gate {
                kind: GateKind::OpaqueKQ { matrix: b.unitary.clone(), modeled_cost: CostModel::default().cost(q) },
                wires: b.wires.clone(),
            })?,
        }
    }
    Ok(c.fuse_single_qubit())
}
