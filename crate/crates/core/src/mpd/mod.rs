//! Matrix product disentangler: layers of two-qubit staircases extracted from
//! χ=2 truncations, and the exact single-layer sequential baseline.

mod exact;

pub use exact::{exact_sequential, ExactSequentialProgram, SeqBlock, MAX_BLOCK_DIM};

use crate::circuit::{matrix_from_pairs, matrix_pairs};
use crate::dense;
use crate::error::{bail, Result};
use crate::linalg::{complete_unitary, dagger, is_unitary, kron, CMat, C64, ZERO};
use crate::mps::{self, Mps, Truncation, DEFAULT_SVD_THRESHOLD};
use serde::{Deserialize, Serialize};

/// Largest n for which per-layer fidelities are tracked on a dense vector.
pub const DENSE_TRACKING_MAX_QUBITS: usize = 20;

/// One disentangling layer Û_k as n−1 two-qubit blocks.
///
/// `gates[i]` acts on sites (n−2−i, n−1−i), so the list runs from the bottom
/// of the chain upward. Û_k applies `gates[n−2]` first and `gates[0]` last;
/// the preparation Û_k† applies `gates[0]†` first.
#[derive(Clone, Debug, PartialEq)]
pub struct Staircase {
    pub n: usize,
    pub gates: Vec<CMat>,
}

impl Staircase {
    /// Sites of `gates[i]`, upper site first.
    pub fn sites(&self, i: usize) -> (usize, usize) {
        (self.n - 2 - i, self.n - 1 - i)
    }

    /// (upper site, block) pairs of Û_k in application order.
    pub fn disentangling_order(&self) -> impl Iterator<Item = (usize, &CMat)> {
        (0..self.gates.len()).rev().map(move |i| (self.sites(i).0, &self.gates[i]))
    }

    /// (upper site, block) pairs of Û_k† in application order.
    pub fn preparation_order(&self) -> impl Iterator<Item = (usize, CMat)> + '_ {
        (0..self.gates.len()).map(move |i| (self.sites(i).0, dagger(&self.gates[i])))
    }

    /// ψ ← Û_k ψ, truncating after every block.
    pub fn disentangle(&self, psi: &mut Mps, trunc: &Truncation) {
        for (j, g) in self.disentangling_order() {
            psi.apply_two_qubit_in_place(g, j, trunc);
        }
    }

    /// Û_k† |0…0⟩ as a dense vector.
    pub fn prepare_dense(&self) -> Vec<C64> {
        let mut v = dense::zero_state(self.n);
        for (j, g) in self.preparation_order() {
            dense::apply_2q(&mut v, self.n, &g, j, j + 1);
        }
        v
    }
}

/// Output of [`chi2_disentangler`].
#[derive(Clone, Debug)]
pub struct Disentangler {
    pub staircase: Staircase,
    /// The normalised χ=2 truncation the staircase prepares exactly.
    pub truncated: Mps,
    /// Set when the truncation is a product state and χ=1 embedding was used.
    pub separable: bool,
}

/// Staircase whose inverse prepares the χ=2 truncation of `psi` exactly.
pub fn chi2_disentangler(psi: &Mps) -> Result<Disentangler> {
    chi2_disentangler_with(psi, DEFAULT_SVD_THRESHOLD)
}

pub fn chi2_disentangler_with(psi: &Mps, svd_threshold: f64) -> Result<Disentangler> {
    let n = psi.n();
    if n < 2 {
        bail!(InvalidParameter, "a staircase needs at least two sites, got {n}");
    }
    let (t, _) = mps::truncate(psi, 2, svd_threshold)?;
    let separable = t.max_bond() == 1;
    // prep[k] maps |0⟩|β⟩ on (k−1, k) to Σ A_k[α,i,β] |α⟩|i⟩
    let mut prep: Vec<CMat> = Vec::with_capacity(n);
    for k in 0..n {
        let core = t.core(k);
        let (l, r) = (core.left(), core.right());
        let rows = if k == 0 { 2 } else { 4 };
        let cols = CMat::from_fn(rows, r, |row, beta| {
            let (alpha, i) = (row / 2, row % 2);
            if alpha < l { core.get(alpha, i, beta) } else { ZERO }
        });
        prep.push(complete_unitary(&cols));
    }
    let merged = kron(&prep[0], &CMat::identity(2, 2)) * &prep[1];
    let mut gates = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let upper = n - 2 - i;
        let p = if upper == 0 { &merged } else { &prep[upper + 1] };
        gates.push(dagger(p));
    }
    Ok(Disentangler { staircase: Staircase { n, gates }, truncated: t, separable })
}

/// Layers Û_1..Û_L with Û_L†⋯Û_1†|0…0⟩ ≈ target.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    pub n: usize,
    pub layers: Vec<Staircase>,
    pub chi_max_used: usize,
    /// |⟨target| Û_1†⋯Û_k† |0…0⟩|² after each layer k.
    pub per_layer_fidelity: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl LayerStack {
    pub fn depth_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn final_fidelity(&self) -> f64 {
        self.per_layer_fidelity.last().copied().unwrap_or(0.0)
    }

    /// Dense preparation Û_L†⋯Û_1†|0…0⟩.
    pub fn prepare_dense(&self) -> Result<Vec<C64>> {
        if self.n > 24 {
            bail!(Capacity, "dense preparation of {} qubits exceeds 24", self.n);
        }
        let mut v = dense::zero_state(self.n);
        for layer in self.layers.iter().rev() {
            for (j, g) in layer.preparation_order() {
                dense::apply_2q(&mut v, self.n, &g, j, j + 1);
            }
        }
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.n != self.n || layer.gates.len() + 1 != self.n {
                bail!(Validation, "layer {} has {} blocks for n={}", k + 1, layer.gates.len(), self.n);
            }
            if let Some(i) = layer.gates.iter().position(|g| g.shape() != (4, 4) || !is_unitary(g, 1e-10)) {
                bail!(Validation, "layer {} block {i} is not a 4x4 unitary", k + 1);
            }
        }
        Ok(())
    }

    /// JSON: metadata plus, per layer, the n−1 blocks of Û_k listed bottom-up
    /// (block i on sites (n−2−i, n−1−i)), each row-major [re, im] pairs.
    pub fn to_json(&self) -> String {
        let rec = StackRecord {
            n: self.n,
            layers_count: self.layers.len(),
            chi_max: self.chi_max_used,
            per_layer_fidelity: self.per_layer_fidelity.clone(),
            diagnostics: self.diagnostics.clone(),
            layers: self.layers.iter().map(|l| l.gates.iter().map(matrix_pairs).collect()).collect(),
        };
        serde_json::to_string_pretty(&rec).expect("stack record serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: StackRecord = serde_json::from_str(text)?;
        let layers = rec
            .layers
            .iter()
            .map(|l| Ok(Staircase { n: rec.n, gates: l.iter().map(|g| matrix_from_pairs(g)).collect::<Result<_>>()? }))
            .collect::<Result<Vec<_>>>()?;
        if layers.len() != rec.layers_count {
            bail!(Format, "L={} but {} layers stored", rec.layers_count, layers.len());
        }
        let s = LayerStack {
            n: rec.n,
            layers,
            chi_max_used: rec.chi_max,
            per_layer_fidelity: rec.per_layer_fidelity,
            diagnostics: rec.diagnostics,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Serialize, Deserialize)]
struct StackRecord {
    n: usize,
    #[serde(rename = "L")]
    layers_count: usize,
    chi_max: usize,
    per_layer_fidelity: Vec<f64>,
    #[serde(default)]
    diagnostics: Vec<String>,
    layers: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Iterative disentangling: ψ_{k+1} = Û_k ψ_k with ψ_k capped at `chi_max`.
///
/// Stops after `layers` layers or once the preparation fidelity reaches
/// 1 − `svd_threshold`. Fidelities are exact (dense pullback of the target)
/// up to [`DENSE_TRACKING_MAX_QUBITS`], and read from ψ_{k+1}'s |0…0⟩
/// amplitude beyond.
pub fn mpd_extract(target: &Mps, layers: usize, chi_max: usize, svd_threshold: f64) -> Result<LayerStack> {
    if layers == 0 {
        bail!(InvalidParameter, "L must be at least 1");
    }
    let n = target.n();
    if n < 2 {
        bail!(InvalidParameter, "MPD needs at least two sites, got {n}");
    }
    let trunc = Truncation::new(Some(chi_max), svd_threshold);
    trunc.validate()?;
    let mut psi = target.clone();
    if psi.normalize() == 0.0 {
        bail!(InvalidTarget, "target has zero norm");
    }
    let mut pull = (n <= DENSE_TRACKING_MAX_QUBITS).then(|| psi.to_statevector());
    let mut stack = LayerStack { n, layers: Vec::new(), chi_max_used: psi.max_bond().min(chi_max), per_layer_fidelity: Vec::new(), diagnostics: Vec::new() };
    for k in 1..=layers {
        let d = chi2_disentangler_with(&psi, svd_threshold)?;
        if d.separable {
            stack.diagnostics.push(format!("layer {k}: chi=2 truncation is a product state; chi=1 embedding used"));
        }
        d.staircase.disentangle(&mut psi, &trunc);
        if let Some(v) = pull.as_mut() {
            for (j, g) in d.staircase.disentangling_order() {
                dense::apply_2q(v, n, g, j, j + 1);
            }
        }
        psi.normalize();
        stack.chi_max_used = stack.chi_max_used.max(psi.max_bond());
        let f = match &pull {
            Some(v) => v[0].norm_sqr(),
            None => psi.amplitude(&vec![0u8; n]).norm_sqr(),
        };
        stack.layers.push(d.staircase);
        stack.per_layer_fidelity.push(f.min(1.0));
        if f >= 1.0 - svd_threshold {
            break;
        }
    }
    Ok(stack)
}

/// Fidelity of a dense state against the normalised target MPS.
pub fn dense_fidelity(target: &Mps, v: &[C64]) -> f64 {
    crate::linalg::fidelity(&target.to_statevector(), v)
}

#[cfg(test)]
mod tests;
