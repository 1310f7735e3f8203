use mpsenc::target::{parse_key_values, KeyValues, TargetKind, TargetSpec};
use mpsenc::tno::{Engine, DEFAULT_GRAD_TOL, DEFAULT_MAX_ITERS, IMAGE_MAX_ITERS};
use mpsenc::mps::DEFAULT_SVD_THRESHOLD;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Keys accepted both in config files and as `--kebab-case` flags.
pub const KEYS: &[(&str, &str)] = &[
    ("kind", "target kind: function | image | random"),
    ("family", "function family, e.g. sine, gaussian, cheby, hockey-stick"),
    ("n-qubits", "number of qubits (grid of 2^n points)"),
    ("domain-min", "left end of the function domain"),
    ("domain-max", "right end of the function domain"),
    ("sigma", "Gaussian width"),
    ("gamma", "Cauchy width"),
    ("k", "frequency multiplier of sine/cosine"),
    ("knee", "hockey-stick knee"),
    ("degree", "polynomial degree"),
    ("intervals", "number of piecewise intervals"),
    ("knots", "cubic-spline knots"),
    ("coeffs", "comma-separated polynomial coefficients, ascending"),
    ("eps", "log shift"),
    ("discontinuous", "piecewise polynomial without continuity"),
    ("chi", "bond dimension of a random target; TCI bond cap"),
    ("image-path", "image file (pgm, csv, raw)"),
    ("image-format", "pgm | csv | raw"),
    ("source", "dense | tci: how function targets are built"),
    ("method", "mpd | mpd-tno | exact"),
    ("layers", "number of MPD layers L"),
    ("chi-max", "bond cap of the working target and of the MPD iterate"),
    ("svd-threshold", "singular values below this are discarded"),
    ("max-iters", "TNO iteration cap"),
    ("tol", "TNO gradient-norm tolerance"),
    ("engine", "TNO contraction engine: auto | dense | mps"),
    ("seed", "seed for random targets and seeded families"),
    ("output-dir", "directory receiving <run-id>/"),
    ("run-id", "name of the run directory"),
    ("formats", "subset of qasm,json,csv"),
    ("chis", "truncation-scan bond dimensions, comma-separated"),
    ("bonds", "truncation-scan bonds for Schmidt spectra, comma-separated"),
    ("threads", "benchmark worker count (MPSENC_THREADS also caps it)"),
    ("group", "benchmark aggregation label"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    EncodeFunction,
    EncodeImage,
    TruncationScan,
    TciBuild,
    Benchmark,
    Inspect,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::EncodeFunction => "encode-function",
            Command::EncodeImage => "encode-image",
            Command::TruncationScan => "truncation-scan",
            Command::TciBuild => "tci-build",
            Command::Benchmark => "benchmark",
            Command::Inspect => "inspect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::EncodeFunction,
            Command::EncodeImage,
            Command::TruncationScan,
            Command::TciBuild,
            Command::Benchmark,
            Command::Inspect,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mpd,
    MpdTno,
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mpd => "mpd",
            Method::MpdTno => "mpd-tno",
            Method::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mpd" => Some(Method::Mpd),
            "mpd-tno" | "mpd+tno" => Some(Method::MpdTno),
            "exact" | "exact-sequential" => Some(Method::Exact),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Dense,
    Tci,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub qasm: bool,
    pub json: bool,
    pub csv: bool,
}

impl Formats {
    fn parse(s: &str) -> Result<Self, CliError> {
        let mut f = Formats { qasm: false, json: false, csv: false };
        for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match t {
                "qasm" => f.qasm = true,
                "json" => f.json = true,
                "csv" => f.csv = true,
                other => return Err(CliError::config(format!("unknown format {other:?}"))),
            }
        }
        Ok(f)
    }
}

/// Everything one encoding run needs, resolved from file keys and flags.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub target: TargetSpec,
    pub source: Source,
    pub method: Method,
    pub layers: usize,
    /// `None`: adaptive, only the threshold truncates.
    pub chi_max: Option<usize>,
    pub svd_threshold: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub engine: Engine,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub run_id: String,
    pub formats: Formats,
    pub tci_chi: usize,
}

pub const IMAGE_CHI_MAX: usize = 32;
pub const TCI_AUTO_QUBITS: usize = 24;

fn get<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>, CliError> {
    kv.get(key).map_err(CliError::from_config)
}

impl RunConfig {
    pub fn from_keys(command: Command, kv: &KeyValues, base: Option<&Path>) -> Result<Self, CliError> {
        let mut kv = kv.clone();
        match command {
            Command::EncodeImage => {
                if kv.get_str("kind").is_some_and(|k| k != "image") {
                    return Err(CliError::config("encode-image needs kind=image".into()));
                }
                kv.set("kind", "image");
            }
            Command::EncodeFunction => {
                if kv.get_str("kind").is_some_and(|k| k == "image") {
                    return Err(CliError::config("use encode-image for image targets".into()));
                }
            }
            _ => {}
        }
        let source = match kv.get_str("source") {
            None => None,
            Some("dense") => Some(Source::Dense),
            Some("tci") => Some(Source::Tci),
            Some(other) => return Err(CliError::config(format!("unknown source {other:?}"))),
        };
        let is_function = kv.get_str("kind").unwrap_or("function") == "function";
        let n: Option<usize> = get(&kv, "n_qubits")?;
        let source = source.unwrap_or(if is_function && n.is_some_and(|n| n > TCI_AUTO_QUBITS) { Source::Tci } else { Source::Dense });
        if source == Source::Tci && !is_function {
            return Err(CliError::config("source=tci needs a function target".into()));
        }
        let target = kv.target_spec(base).map_err(CliError::from_config)?;
        let image = matches!(target.kind, TargetKind::Image(_));
        let method = match kv.get_str("method") {
            None => Method::Mpd,
            Some(m) => Method::parse(m).ok_or_else(|| CliError::config(format!("unknown method {m:?}")))?,
        };
        let layers = get(&kv, "layers")?.or(get(&kv, "l")?).unwrap_or(1);
        if layers == 0 {
            return Err(CliError::config("layers must be at least 1".into()));
        }
        let chi_max = match get::<usize>(&kv, "chi_max")? {
            Some(0) => return Err(CliError::config("chi-max must be at least 1".into())),
            Some(c) => Some(c),
            None if image => Some(IMAGE_CHI_MAX),
            None => None,
        };
        let svd_threshold = get(&kv, "svd_threshold")?.unwrap_or(DEFAULT_SVD_THRESHOLD);
        if !(0.0..1.0).contains(&svd_threshold) {
            return Err(CliError::config(format!("svd-threshold {svd_threshold} outside [0, 1)")));
        }
        let max_iters = get(&kv, "max_iters")?.unwrap_or(if image { IMAGE_MAX_ITERS } else { DEFAULT_MAX_ITERS });
        let tol = get(&kv, "tol")?.unwrap_or(DEFAULT_GRAD_TOL);
        let engine = match kv.get_str("engine") {
            None => Engine::Auto,
            Some(e) => Engine::parse(e).ok_or_else(|| CliError::config(format!("unknown engine {e:?}")))?,
        };
        let seed = get(&kv, "seed")?.unwrap_or(0);
        let output_dir = PathBuf::from(kv.get_str("output_dir").unwrap_or("out"));
        let formats = Formats::parse(kv.get_str("formats").unwrap_or("qasm,json,csv"))?;
        let run_id = match kv.get_str("run_id") {
            Some(r) => r.to_string(),
            None => default_run_id(&target, method, layers),
        };
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
            return Err(CliError::config(format!("run-id {run_id:?} is not a plain directory name")));
        }
        let tci_chi = get(&kv, "chi")?.unwrap_or(16);
        Ok(RunConfig {
            command,
            target,
            source,
            method,
            layers,
            chi_max,
            svd_threshold,
            max_iters,
            tol,
            engine,
            seed,
            output_dir,
            run_id,
            formats,
            tci_chi,
        })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}

/// Readable, deterministic slug such as `sin-1pi-x-n12-mpd-L1`.
pub fn default_run_id(t: &TargetSpec, method: Method, layers: usize) -> String {
    let label = match &t.kind {
        TargetKind::Image(img) => format!("image{}", img.width),
        _ => t.label(),
    };
    let slug: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let slug = slug.split('-').filter(|s| !s.is_empty()).collect::<Vec<_>>().join("-");
    format!("{slug}-n{}-{}-L{layers}", t.n_qubits, method.name())
}

/// File keys, then flags on top.
pub fn merge(config_path: Option<&Path>, flags: &[(String, String)]) -> Result<KeyValues, CliError> {
    let mut kv = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            parse_key_values(&text).map_err(CliError::from_config)?
        }
        None => KeyValues::default(),
    };
    for (k, v) in flags {
        kv.set(k, v.clone());
    }
    Ok(kv)
}

pub fn list<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<Vec<T>>, CliError> {
    match kv.get_str(key) {
        None => Ok(None),
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<T>().map_err(|_| CliError::config(format!("cannot parse {key}={s}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
    }
}

/// Worker count: the `threads` key, else available parallelism, capped by
/// MPSENC_THREADS.
pub fn threads(kv: &KeyValues) -> Result<usize, CliError> {
    let requested: Option<usize> = get(kv, "threads")?;
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut t = requested.unwrap_or(avail).max(1);
    if let Ok(cap) = std::env::var("MPSENC_THREADS") {
        let cap: usize = cap.trim().parse().map_err(|_| CliError::config(format!("MPSENC_THREADS={cap} is not a count")))?;
        t = t.min(cap.max(1));
    }
    Ok(t)
}
