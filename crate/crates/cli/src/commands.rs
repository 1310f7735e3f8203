use mpsenc::circuit::{from_json, from_qasm, Circuit};
use mpsenc::mpd::LayerStack;
use mpsenc::mps::{self, read_binary, write_binary};
use mpsenc::target::{parse_key_values, KeyValues, SweepRecord, TargetKind};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{self, Command, RunConfig, Source};
use crate::encode::{self, build_targets, EncodeReport};
use crate::output::{atomic_write, num, write_json};
use crate::CliError;

pub fn encode(command: Command, kv: &KeyValues, base: Option<&Path>) -> Result<(), CliError> {
    let cfg = RunConfig::from_keys(command, kv, base)?;
    match encode::encode(&cfg) {
        Ok(mut e) => {
            encode::write_outputs(&cfg, &mut e)?;
            let r = &e.report;
            say!("{}: fidelity {} cnots {} depth {} -> {}",
                r.run_id,
                num(r.fidelity),
                r.cnot_count,
                r.depth,
                cfg.run_dir().display()
            );
            Ok(())
        }
        Err((err, report)) => {
            encode::write_failure(&cfg, &report)?;
            Err(err)
        }
    }
}

#[derive(Serialize)]
struct TruncationRow {
    chi: usize,
    /// 1 − |⟨ψ|ψ̃⟩|².
    eps_t: f64,
    /// Root-sum-square of the discarded singular values.
    frobenius_error: f64,
}

#[derive(Serialize)]
struct TruncationReport {
    command: &'static str,
    run_id: String,
    target: String,
    n_qubits: usize,
    svd_threshold: f64,
    bond_dims: Vec<usize>,
    rows: Vec<TruncationRow>,
    spectra: Vec<mps::SchmidtSpectrum>,
    files: Vec<String>,
}

pub fn truncation_scan(kv: &KeyValues, base: Option<&Path>) -> Result<(), CliError> {
    let mut kv = kv.clone();
    kv.0.remove("chi_max");
    let cfg = RunConfig::from_keys(Command::TruncationScan, &kv, base)?;
    let exact = build_targets(&cfg)?.exact;
    let n = exact.n();
    let chis = match config::list::<usize>(&kv, "chis")? {
        Some(c) => c,
        None => std::iter::successors(Some(1usize), |c| (*c < exact.max_bond()).then(|| (2 * c).min(exact.max_bond()))).collect(),
    };
    if chis.contains(&0) {
        return Err(CliError::config("chis must be positive".into()));
    }
    let bonds = config::list::<usize>(&kv, "bonds")?.unwrap_or(if n >= 2 { vec![n / 2] } else { vec![] });

    let mut rows = Vec::with_capacity(chis.len());
    for &chi in &chis {
        let (t, rss) = mps::truncate(&exact, chi, cfg.svd_threshold).map_err(CliError::from_run)?;
        let f = mps::fidelity(&exact, &t).map_err(CliError::from_run)?;
        rows.push(TruncationRow { chi, eps_t: (1.0 - f).max(0.0), frobenius_error: rss });
    }
    let spectra = bonds
        .iter()
        .map(|&b| mps::schmidt_spectrum(&exact, b).map_err(CliError::from_config))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = cfg.run_dir();
    let mut csv = String::from("chi,eps_t,frobenius_error\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{}\n", r.chi, num(r.eps_t), num(r.frobenius_error)));
    }
    atomic_write(&dir.join("truncation.csv"), csv.as_bytes())?;
    let mut csv = String::from("bond,index,singular_value\n");
    for s in &spectra {
        for (i, v) in s.singular_values.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", s.bond_index, i, num(*v)));
        }
    }
    atomic_write(&dir.join("spectrum.csv"), csv.as_bytes())?;
    let report = TruncationReport {
        command: "truncation-scan",
        run_id: cfg.run_id.clone(),
        target: cfg.target.label(),
        n_qubits: n,
        svd_threshold: cfg.svd_threshold,
        bond_dims: exact.bond_dims(),
        rows,
        spectra,
        files: vec!["truncation.csv".into(), "spectrum.csv".into(), "report.json".into()],
    };
    write_json(&dir.join("report.json"), &report)?;
    say!("{}: {} truncation rows -> {}", cfg.run_id, report.rows.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct TciReport {
    command: &'static str,
    run_id: String,
    target: String,
    n_qubits: usize,
    chi: usize,
    chi_cap: usize,
    error: f64,
    samples: usize,
    sample_fraction: f64,
    total_calls: usize,
    holdout_samples: usize,
    converged: bool,
    cap_reached: bool,
    bond_dims: Vec<usize>,
    sweeps: Vec<SweepRecord>,
    files: Vec<String>,
}

pub fn tci_build(kv: &KeyValues, base: Option<&Path>) -> Result<(), CliError> {
    let mut kv = kv.clone();
    kv.set("source", "tci");
    let mut cfg = RunConfig::from_keys(Command::TciBuild, &kv, base)?;
    cfg.source = Source::Tci;
    let TargetKind::Function { family, domain } = &cfg.target.kind else {
        return Err(CliError::config("tci-build needs a function target".into()));
    };
    let f = mpsenc::target::Function::new(family.clone(), *domain).map_err(CliError::from_config)?;
    let n = cfg.target.n_qubits;
    let opts = mpsenc::target::TciOptions { chi_cap: cfg.tci_chi, seed: cfg.seed, ..Default::default() };
    let r = mpsenc::target::tci_build(&|x| f.eval(x), *domain, n, &opts).map_err(CliError::from_run)?;
    let dir = cfg.run_dir();
    atomic_write(&dir.join("mps.bin"), &write_binary(&r.mps))?;
    let report = TciReport {
        command: "tci-build",
        run_id: cfg.run_id.clone(),
        target: cfg.target.label(),
        n_qubits: n,
        chi: r.mps.max_bond(),
        chi_cap: cfg.tci_chi,
        error: r.est_error,
        samples: r.samples_used,
        sample_fraction: r.samples_used as f64 / 2f64.powi(n as i32),
        total_calls: r.total_calls,
        holdout_samples: r.holdout_samples,
        converged: r.converged,
        cap_reached: r.cap_reached,
        bond_dims: r.mps.bond_dims(),
        sweeps: r.sweeps,
        files: vec!["mps.bin".into(), "report.json".into()],
    };
    write_json(&dir.join("report.json"), &report)?;
    say!("{}: chi {} error {} samples {} -> {}", cfg.run_id, report.chi, num(report.error), report.samples, dir.display());
    Ok(())
}

/// One `[run-id]` section of a benchmark manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRun {
    pub run_id: String,
    pub keys: KeyValues,
}

/// INI-style manifest: `key=value` lines before the first `[section]` are
/// shared by every run; each section is one run named after it.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRun>, CliError> {
    let mut shared = String::new();
    let mut sections: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let t = line.split('#').next().unwrap_or("").trim();
        if let Some(name) = t.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| CliError::config(format!("bad manifest section header {t:?}")))?;
            if sections.iter().any(|(s, _)| s == name) {
                return Err(CliError::config(format!("duplicate manifest section [{name}]")));
            }
            sections.push((name.to_string(), String::new()));
        } else {
            let body = match sections.last_mut() {
                Some((_, b)) => b,
                None => &mut shared,
            };
            body.push_str(line);
            body.push('\n');
        }
    }
    let shared = parse_key_values(&shared).map_err(CliError::from_config)?;
    sections
        .into_iter()
        .map(|(run_id, body)| {
            let own = parse_key_values(&body).map_err(|e| CliError::config(format!("[{run_id}]: {e}")))?;
            let mut keys = shared.clone();
            keys.0.extend(own.0);
            Ok(ManifestRun { run_id, keys })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    pub group: String,
    pub target: String,
    pub method: String,
    pub layers: usize,
    pub status: String,
    pub report: Option<EncodeReport>,
    pub seconds: f64,
}

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        let field = |f: &dyn Fn(&EncodeReport) -> String| self.report.as_ref().filter(|r| r.status == "ok").map(f).unwrap_or_default();
        [
            csv_escape(&self.run_id),
            csv_escape(&self.target),
            self.method.clone(),
            self.layers.to_string(),
            field(&|r| num(r.fidelity)),
            field(&|r| num(r.chi2_fidelity)),
            field(&|r| r.cnot_count.to_string()),
            field(&|r| r.depth.to_string()),
            format!("{:.3}", self.seconds),
            self.status.clone(),
        ]
        .join(",")
    }
}

pub const SUMMARY_HEADER: &str = "run_id,target,method,L,fidelity,chi2_fidelity,cnots,depth,seconds,status";
pub const STATS_HEADER: &str =
    "group,runs,ok,fidelity_mean,fidelity_sd,chi2_fidelity_mean,chi2_fidelity_sd,cnots_mean,depth_mean";

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt() } else { 0.0 };
    Some((m, sd))
}

/// Per-group aggregates over successful runs, groups in first-seen order.
pub fn summary_stats(rows: &[SummaryRow]) -> String {
    let mut groups: Vec<&str> = Vec::new();
    for r in rows {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
    }
    let mut out = format!("{STATS_HEADER}\n");
    for g in groups {
        let members: Vec<&SummaryRow> = rows.iter().filter(|r| r.group == g).collect();
        let ok: Vec<&EncodeReport> = members.iter().filter_map(|r| r.report.as_ref()).filter(|r| r.status == "ok").collect();
        let col = |f: &dyn Fn(&EncodeReport) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
        let fmt = |v: Option<(f64, f64)>, sd: bool| v.map(|(m, s)| num(if sd { s } else { m })).unwrap_or_default();
        let fid = mean_sd(&col(&|r| r.fidelity));
        let chi2 = mean_sd(&col(&|r| r.chi2_fidelity));
        let cn = mean_sd(&col(&|r| r.cnot_count as f64));
        let dp = mean_sd(&col(&|r| r.depth as f64));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_escape(g),
            members.len(),
            ok.len(),
            fmt(fid, false),
            fmt(fid, true),
            fmt(chi2, false),
            fmt(chi2, true),
            fmt(cn, false),
            fmt(dp, false)
        ));
    }
    out
}

fn run_manifest_entry(run: &ManifestRun, out_dir: &Path, base: Option<&Path>) -> SummaryRow {
    let t0 = Instant::now();
    let group = run.keys.get_str("group").unwrap_or("all").to_string();
    let mut keys = run.keys.clone();
    keys.set("run_id", run.run_id.clone());
    keys.set("output_dir", out_dir.to_string_lossy().into_owned());
    let command = match keys.get_str("command") {
        Some(c) => Command::parse(c),
        None if keys.get_str("kind") == Some("image") => Some(Command::EncodeImage),
        None => Some(Command::EncodeFunction),
    };
    let invalid = |msg: String| {
        eprintln!("mpsenc: [{}] {msg}", run.run_id);
        SummaryRow {
            run_id: run.run_id.clone(),
            group: group.clone(),
            target: String::new(),
            method: keys.get_str("method").unwrap_or("").to_string(),
            layers: keys.get("layers").ok().flatten().unwrap_or(0),
            status: "invalid".into(),
            report: None,
            seconds: t0.elapsed().as_secs_f64(),
        }
    };
    let command = match command {
        Some(c @ (Command::EncodeFunction | Command::EncodeImage)) => c,
        _ => return invalid("benchmark runs must be encode-function or encode-image".into()),
    };
    let cfg = match RunConfig::from_keys(command, &keys, base) {
        Ok(c) => c,
        Err(e) => return invalid(e.message),
    };
    let (status, report) = match encode::encode(&cfg) {
        Ok(mut e) => match encode::write_outputs(&cfg, &mut e) {
            Ok(()) => ("ok", e.report),
            Err(err) => {
                eprintln!("mpsenc: [{}] {}", run.run_id, err.message);
                ("failed", e.report)
            }
        },
        Err((err, report)) => {
            eprintln!("mpsenc: [{}] {}", run.run_id, err.message);
            let _ = encode::write_failure(&cfg, &report);
            ("failed", report)
        }
    };
    SummaryRow {
        run_id: run.run_id.clone(),
        group,
        target: report.target.clone(),
        method: report.method.clone(),
        layers: report.layers,
        status: status.into(),
        report: Some(report),
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn benchmark(manifest: &Path, kv: &KeyValues) -> Result<(), CliError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| CliError::config(format!("cannot read manifest {}: {e}", manifest.display())))?;
    let mut runs = parse_manifest(&text)?;
    // Command-line keys override the manifest everywhere.
    for r in &mut runs {
        r.keys.0.extend(kv.0.iter().filter(|(k, _)| k.as_str() != "output_dir").map(|(k, v)| (k.clone(), v.clone())));
    }
    let out_dir = PathBuf::from(kv.get_str("output_dir").unwrap_or("out"));
    let base = manifest.parent().map(Path::to_path_buf);
    let threads = config::threads(kv)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::run(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SummaryRow> =
        pool.install(|| runs.par_iter().map(|r| run_manifest_entry(r, &out_dir, base.as_deref())).collect());

    let mut csv = format!("{SUMMARY_HEADER}\n");
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    atomic_write(&out_dir.join("summary.csv"), csv.as_bytes())?;
    atomic_write(&out_dir.join("summary_stats.csv"), summary_stats(&rows).as_bytes())?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    say!("benchmark: {ok}/{} runs ok -> {}", rows.len(), out_dir.join("summary.csv").display());
    Ok(())
}

fn circuit_summary(c: &Circuit, format: &str) -> serde_json::Value {
    json!({
        "kind": "circuit",
        "format": format,
        "n_qubits": c.n,
        "gates": c.gates.len(),
        "elementary": c.is_elementary(),
        "provenance": c.provenance.label(),
        "metrics": c.metrics(),
    })
}

/// Prints a JSON summary of a circuit, layer stack or MPS file.
pub fn inspect(path: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let text = || String::from_utf8(bytes.clone()).map_err(|_| CliError::config(format!("{} is not UTF-8", path.display())));
    let value = match ext.as_str() {
        "qasm" => circuit_summary(&from_qasm(&text()?).map_err(CliError::from_config)?, "qasm"),
        "json" => {
            let t = text()?;
            if let Ok(c) = from_json(&t) {
                circuit_summary(&c, "json")
            } else if let Ok(s) = LayerStack::from_json(&t) {
                json!({
                    "kind": "layer-stack",
                    "n_qubits": s.n,
                    "layers": s.layers.len(),
                    "chi_max_used": s.chi_max_used,
                    "per_layer_fidelity": s.per_layer_fidelity,
                    "final_fidelity": s.final_fidelity(),
                })
            } else {
                return Err(CliError::config(format!("{} is neither a circuit nor a layer stack", path.display())));
            }
        }
        "bin" | "mps" => {
            let m = read_binary(&bytes).map_err(CliError::from_config)?;
            json!({
                "kind": "mps",
                "n_qubits": m.n(),
                "bond_dims": m.bond_dims(),
                "max_bond": m.max_bond(),
                "norm": m.norm(),
            })
        }
        _ => return Err(CliError::config(format!("cannot tell the type of {} from its extension", path.display()))),
    };
    say!("{}", serde_json::to_string_pretty(&value).expect("serialisable"));
    Ok(())
}
