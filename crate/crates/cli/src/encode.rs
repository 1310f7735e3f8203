use mpsenc::circuit::{
    layers_to_circuit, program_to_circuit, simulate, simulate_dense, to_json, to_qasm, Circuit, CostModel,
};
use mpsenc::linalg::{fidelity, vdot, C64};
use mpsenc::mpd::{exact_sequential, mpd_extract, LayerStack};
use mpsenc::mps::{self, Mps, Truncation};
use mpsenc::target::{target_mps, tci_build, Function, TargetKind, TciOptions};
use mpsenc::tno::{self, OptimizationReport, OptimizeOptions, StopReason};
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::config::{Method, RunConfig, Source};
use crate::output::{atomic_write, num, write_json};
use crate::CliError;

/// Largest n whose prepared state is checked on a dense vector.
pub const DENSE_VERIFY_MAX_QUBITS: usize = 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub target_s: f64,
    pub encode_s: f64,
    pub optimize_s: f64,
    pub verify_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_evaluations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub engine: tno::Engine,
    pub wall_time: f64,
}

impl From<&OptimizationReport> for OptimizationSummary {
    fn from(r: &OptimizationReport) -> Self {
        OptimizationSummary {
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            iterations: r.iterations,
            evaluations: r.evaluations,
            gradient_evaluations: r.gradient_evaluations,
            final_gradient_norm: r.final_gradient_norm,
            converged: r.converged,
            stop_reason: r.stop_reason,
            engine: r.engine,
            wall_time: r.wall_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TciSummary {
    pub chi: usize,
    pub error: f64,
    pub samples: usize,
    pub sample_fraction: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeReport {
    pub status: String,
    pub error: Option<String>,
    pub command: String,
    pub run_id: String,
    pub target: String,
    pub n_qubits: usize,
    pub method: String,
    #[serde(rename = "L")]
    pub layers: usize,
    pub layers_used: usize,
    pub chi_max: Option<usize>,
    pub chi_max_used: usize,
    pub svd_threshold: f64,
    pub target_max_bond: usize,
    pub working_max_bond: usize,
    /// Fidelity of the χ_max-capped working target against the full target.
    pub truncation_fidelity: f64,
    /// Fidelity of the χ=2 truncation, the MPD worst-case floor.
    pub chi2_fidelity: f64,
    /// Prepared state against the full target.
    pub fidelity: f64,
    pub infidelity: f64,
    pub fidelity_working_target: f64,
    pub cnot_count: usize,
    pub single_qubit_count: usize,
    pub total_gates: u64,
    pub depth: u64,
    pub parameter_count: usize,
    /// Counts include opaque blocks scored by ⌈4^q⌉.
    pub modeled: bool,
    pub opaque_blocks: usize,
    /// Depth with opaque blocks scored by the Shannon recursion instead.
    pub depth_shannon: Option<u64>,
    pub per_layer_fidelity: Vec<f64>,
    pub optimization: Option<OptimizationSummary>,
    pub tci: Option<TciSummary>,
    pub diagnostics: Vec<String>,
    pub files: Vec<String>,
    pub wall_times: WallTimes,
}

/// Result of a successful encoding, before anything is written.
pub struct Encoding {
    pub report: EncodeReport,
    pub circuit: Circuit,
    pub stack: Option<LayerStack>,
    pub trace: Option<OptimizationReport>,
    /// Phase-aligned real parts of the prepared amplitudes (images only).
    pub reconstruction: Option<Vec<f64>>,
}

pub struct Targets {
    pub exact: Mps,
    pub working: Mps,
    pub tci: Option<TciSummary>,
}

/// Full target (threshold only) and the χ_max-capped working copy.
pub fn build_targets(cfg: &RunConfig) -> Result<Targets, CliError> {
    let (exact, tci) = match cfg.source {
        Source::Dense => (target_mps(&cfg.target, &Truncation::new(None, cfg.svd_threshold)).map_err(CliError::from_run)?, None),
        Source::Tci => {
            let TargetKind::Function { family, domain } = &cfg.target.kind else {
                return Err(CliError::config("source=tci needs a function target".into()));
            };
            let f = Function::new(family.clone(), *domain).map_err(CliError::from_config)?;
            let n = cfg.target.n_qubits;
            let opts = TciOptions { chi_cap: cfg.tci_chi, seed: cfg.seed, ..TciOptions::default() };
            let r = tci_build(&|x| f.eval(x), *domain, n, &opts).map_err(CliError::from_run)?;
            let summary = TciSummary {
                chi: r.mps.max_bond(),
                error: r.est_error,
                samples: r.samples_used,
                sample_fraction: r.samples_used as f64 / 2f64.powi(n as i32),
                converged: r.converged,
            };
            (r.mps, Some(summary))
        }
    };
    let working = match cfg.chi_max {
        Some(c) if c < exact.max_bond() => mps::truncate(&exact, c, cfg.svd_threshold).map_err(CliError::from_run)?.0,
        _ => exact.clone(),
    };
    Ok(Targets { exact, working, tci })
}

pub fn encode(cfg: &RunConfig) -> Result<Encoding, (CliError, EncodeReport)> {
    let t0 = Instant::now();
    let mut report = EncodeReport {
        status: "failed".into(),
        command: cfg.command.name().into(),
        run_id: cfg.run_id.clone(),
        target: cfg.target.label(),
        n_qubits: cfg.target.n_qubits,
        method: cfg.method.name().into(),
        layers: cfg.layers,
        chi_max: cfg.chi_max,
        svd_threshold: cfg.svd_threshold,
        ..EncodeReport::default()
    };
    match encode_into(cfg, &mut report, t0) {
        Ok(e) => Ok(e),
        Err(e) => {
            report.error = Some(e.message.clone());
            report.wall_times.total_s = t0.elapsed().as_secs_f64();
            Err((e, report))
        }
    }
}

fn encode_into(cfg: &RunConfig, report: &mut EncodeReport, t0: Instant) -> Result<Encoding, CliError> {
    let targets = build_targets(cfg)?;
    let (exact, working) = (&targets.exact, &targets.working);
    report.tci = targets.tci.clone();
    report.target_max_bond = exact.max_bond();
    report.working_max_bond = working.max_bond();
    report.truncation_fidelity = mps::fidelity(exact, working).map_err(CliError::from_run)?;
    report.chi2_fidelity = mpsenc::target::truncation_fidelity(exact, 2, cfg.svd_threshold).map_err(CliError::from_run)?;
    report.wall_times.target_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut stack = None;
    let mut trace = None;
    let mut circuit = match cfg.method {
        Method::Mpd | Method::MpdTno => {
            if exact.n() < 2 {
                return Err(CliError::config("MPD needs at least two qubits".into()));
            }
            let s = mpd_extract(working, cfg.layers, cfg.chi_max.unwrap_or(usize::MAX), cfg.svd_threshold).map_err(CliError::from_run)?;
            report.layers_used = s.layers.len();
            report.chi_max_used = s.chi_max_used;
            report.per_layer_fidelity = s.per_layer_fidelity.clone();
            report.diagnostics.extend(s.diagnostics.iter().cloned());
            let c = layers_to_circuit(&s).map_err(CliError::from_run)?;
            stack = Some(s);
            c
        }
        Method::Exact => {
            let p = exact_sequential(working).map_err(CliError::from_run)?;
            report.layers_used = 1;
            report.chi_max_used = working.max_bond();
            report.diagnostics.push(format!("largest block spans {} qubits", p.max_block_qubits()));
            program_to_circuit(&p).map_err(CliError::from_run)?
        }
    };
    report.wall_times.encode_s = t1.elapsed().as_secs_f64();

    if cfg.method == Method::MpdTno {
        let t2 = Instant::now();
        let opts = OptimizeOptions { max_iters: cfg.max_iters, tol: cfg.tol, engine: cfg.engine, ..OptimizeOptions::default() };
        let (p, r) = tno::optimize_with(&circuit, working, &opts).map_err(CliError::from_run)?;
        circuit = tno::bind(&circuit, &p).map_err(CliError::from_run)?;
        if !r.converged {
            report.diagnostics.push(format!("optimizer stopped: {:?}", r.stop_reason));
        }
        report.optimization = Some(OptimizationSummary::from(&r));
        trace = Some(r);
        report.wall_times.optimize_s = t2.elapsed().as_secs_f64();
    }

    let t3 = Instant::now();
    let mut reconstruction = None;
    let n = exact.n();
    if n <= DENSE_VERIFY_MAX_QUBITS {
        let v = simulate_dense(&circuit).map_err(CliError::from_run)?;
        let t = exact.to_statevector();
        report.fidelity = fidelity(&t, &v);
        report.fidelity_working_target = fidelity(&working.to_statevector(), &v);
        if matches!(cfg.target.kind, TargetKind::Image(_)) {
            reconstruction = Some(align_phase(&t, &v));
        }
    } else {
        if !circuit.is_elementary() {
            return Err(CliError::run(format!("cannot verify a circuit with opaque blocks on {n} qubits")));
        }
        let psi = simulate(&circuit, None, 1e-14).map_err(CliError::from_run)?;
        report.fidelity = mps::fidelity(exact, &psi).map_err(CliError::from_run)?;
        report.fidelity_working_target = mps::fidelity(working, &psi).map_err(CliError::from_run)?;
    }
    report.fidelity = report.fidelity.clamp(0.0, 1.0);
    report.fidelity_working_target = report.fidelity_working_target.clamp(0.0, 1.0);
    report.infidelity = 1.0 - report.fidelity;
    report.wall_times.verify_s = t3.elapsed().as_secs_f64();

    let m = circuit.metrics();
    report.cnot_count = m.cnot_count;
    report.single_qubit_count = m.single_qubit_count;
    report.total_gates = m.total_gates;
    report.depth = m.depth;
    report.parameter_count = m.parameter_count;
    report.modeled = m.modeled;
    report.opaque_blocks = m.opaque_blocks;
    report.depth_shannon = m.modeled.then(|| circuit.metrics_with(Some(CostModel::Shannon)).depth);
    report.status = "ok".into();
    report.wall_times.total_s = t0.elapsed().as_secs_f64();
    Ok(Encoding { report: report.clone(), circuit, stack, trace, reconstruction })
}

fn align_phase(t: &[C64], v: &[C64]) -> Vec<f64> {
    let ov = vdot(t, v);
    let ph = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { C64::new(1.0, 0.0) };
    v.iter().map(|a| (a * ph).re).collect()
}

/// Writes the run directory; the report is written last and lists the files.
pub fn write_outputs(cfg: &RunConfig, e: &mut Encoding) -> Result<(), CliError> {
    let dir = cfg.run_dir();
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        atomic_write(&dir.join(name), bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    if cfg.formats.qasm {
        if e.circuit.is_elementary() {
            put("circuit.qasm", to_qasm(&e.circuit).map_err(CliError::from_run)?.as_bytes())?;
        } else {
            e.report.diagnostics.push("circuit.qasm skipped: opaque multi-qubit blocks have no u3/cx form".into());
        }
    }
    if cfg.formats.json {
        put("circuit.json", to_json(&e.circuit).as_bytes())?;
    }
    if cfg.formats.csv {
        if let Some(s) = &e.stack {
            let mut csv = String::from("layer,fidelity\n");
            for (k, f) in s.per_layer_fidelity.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", k + 1, num(*f)));
            }
            put("layers.csv", csv.as_bytes())?;
        }
        if let Some(t) = &e.trace {
            put("trace.csv", t.trace_csv().as_bytes())?;
        }
        if let (Some(r), TargetKind::Image(img)) = (&e.reconstruction, &cfg.target.kind) {
            let mut csv = String::new();
            for row in r.chunks(img.width) {
                csv.push_str(&row.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
                csv.push('\n');
            }
            put("reconstruction.csv", csv.as_bytes())?;
        }
    }
    e.report.files = files;
    e.report.files.push("report.json".into());
    write_json(&dir.join("report.json"), &e.report)
}

/// Writes a failed run's report only; no circuit files.
pub fn write_failure(cfg: &RunConfig, report: &EncodeReport) -> Result<(), CliError> {
    let mut r = report.clone();
    r.files = vec!["report.json".into()];
    write_json(&cfg.run_dir().join("report.json"), &r)
}
