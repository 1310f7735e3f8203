use crate::dense;
use crate::error::{bail, Result};
use crate::linalg::{complete_unitary, kron, CMat, C64, ZERO};
use crate::mps::{self, Mps};

/// Largest block dimension (2^12) the exact program will build.
pub const MAX_BLOCK_DIM: usize = 1 << 12;

/// A unitary on the contiguous `wires`, the first wire being its high index.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqBlock {
    pub wires: Vec<usize>,
    pub unitary: CMat,
}

/// One sequential layer preparing the target exactly; `blocks` are in
/// application order, starting from the last site.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSequentialProgram {
    pub n: usize,
    pub blocks: Vec<SeqBlock>,
    /// Bond dimensions of the reduced left-canonical target, bonds 1..n−1.
    pub bond_dims: Vec<usize>,
}

impl ExactSequentialProgram {
    pub fn max_block_qubits(&self) -> usize {
        self.blocks.iter().map(|b| b.wires.len()).max().unwrap_or(0)
    }

    pub fn prepare_dense(&self) -> Result<Vec<C64>> {
        if self.n > 24 {
            bail!(Capacity, "dense preparation of {} qubits exceeds 24", self.n);
        }
        let mut v = dense::zero_state(self.n);
        for b in &self.blocks {
            match b.wires.len() {
                1 => dense::apply_1q(&mut v, self.n, &b.unitary, b.wires[0]),
                2 => dense::apply_2q(&mut v, self.n, &b.unitary, b.wires[0], b.wires[1]),
                _ => dense::apply_kq(&mut v, self.n, &b.unitary, &b.wires),
            }
        }
        Ok(v)
    }
}

fn qubits_for(d: usize) -> usize {
    d.next_power_of_two().trailing_zeros() as usize
}

/// Qubits carrying each bond (bonds 0..=n), checked against the block
/// capacity and the growth bound d_{k+1} ≤ 2·d_k.
pub(crate) fn block_plan(bonds: &[usize]) -> Result<Vec<usize>> {
    let q: Vec<usize> = bonds.iter().map(|&d| qubits_for(d)).collect();
    for k in 0..q.len().saturating_sub(1) {
        let dim = 1usize << (q[k] + 1);
        if dim > MAX_BLOCK_DIM {
            bail!(Capacity, "bond {} of dimension {} needs a {}-qubit block (limit {})", k, bonds[k], q[k] + 1, MAX_BLOCK_DIM.trailing_zeros());
        }
        if q[k + 1] > q[k] + 1 {
            bail!(Validation, "bond {} grows faster than the physical dimension allows", k + 1);
        }
    }
    Ok(q)
}

/// Sequential preparation from the left-canonical form.
///
/// The left bond of site k (dimension d_k) lives on the ⌈log₂ d_k⌉ qubits
/// just above k, so the block for site k spans k − ⌈log₂ d_k⌉ ..= k and maps
/// the incoming right-bond index β (low bits, upper bits |0⟩) to
/// Σ A_k[α, i, β] |α⟩|i⟩. Padding rows of non-power-of-two bonds stay zero.
pub fn exact_sequential(target: &Mps) -> Result<ExactSequentialProgram> {
    let n = target.n();
    // rank-revealing sweep: drops only numerically zero Schmidt values
    let (m, _) = mps::truncate(target, target.max_bond().max(1), 1e-14)?;
    let bonds: Vec<usize> = (0..=n).map(|k| if k == 0 { 1 } else { m.core(k - 1).right() }).collect();
    let q = block_plan(&bonds)?;
    let mut prep: Vec<SeqBlock> = Vec::with_capacity(n);
    for k in 0..n {
        let core = m.core(k);
        let (l, r) = (core.left(), core.right());
        let dim = 1usize << (q[k] + 1);
        let cols = CMat::from_fn(dim, r, |row, beta| {
            let (alpha, i) = (row / 2, row % 2);
            if alpha < l { core.get(alpha, i, beta) } else { ZERO }
        });
        prep.push(SeqBlock { wires: (k - q[k]..=k).collect(), unitary: complete_unitary(&cols) });
    }
    let mut blocks: Vec<SeqBlock> = Vec::with_capacity(n);
    let merge_first = n >= 2 && prep[1].wires[0] == 0;
    for k in (0..n).rev() {
        if k == 0 && merge_first {
            break;
        }
        let mut b = prep[k].clone();
        if k == 1 && merge_first {
            let rest = CMat::identity(1 << (b.wires.len() - 1), 1 << (b.wires.len() - 1));
            b.unitary = kron(&prep[0].unitary, &rest) * &b.unitary;
        }
        blocks.push(b);
    }
    Ok(ExactSequentialProgram { n, blocks, bond_dims: bonds[1..n].to_vec() })
}
