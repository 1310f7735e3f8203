//! Command-line driver: targets to encoders to optimizer to report files.

pub mod config;
pub mod encode;
pub mod output;

use clap::{Arg, ArgAction, ArgMatches, Command as ClapCommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use config::{Command, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: EXIT_CONFIG, message }
    }

    pub fn run(message: String) -> Self {
        CliError { code: EXIT_NUMERICAL, message }
    }

    /// Errors raised while resolving a configuration are the user's to fix.
    pub fn from_config(e: mpsenc::Error) -> Self {
        CliError::config(e.to_string())
    }

    /// Input-shaped errors stay exit 2 even when they surface mid-run; the
    /// rest are numerical or capacity failures.
    pub fn from_run(e: mpsenc::Error) -> Self {
        use mpsenc::Error::*;
        match e {
            InvalidInput(_) | InvalidTarget(_) | InvalidParameter(_) => CliError::config(e.to_string()),
            _ => CliError::run(e.to_string()),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::run(format!("{}: {e}", path.display()))
    }
}

/// `println!` that ignores a closed pipe instead of panicking.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub mod commands;

fn key_args() -> Vec<Arg> {
    let mut args: Vec<Arg> = KEYS
        .iter()
        .map(|(k, help)| Arg::new(*k).long(*k).value_name("VALUE").help(*help).action(ArgAction::Set).allow_negative_numbers(true))
        .collect();
    args.push(Arg::new("config").long("config").short('c').value_name("FILE").help("key=value file; flags override it"));
    args.push(
        Arg::new("set")
            .long("set")
            .value_name("KEY=VALUE")
            .action(ArgAction::Append)
            .help("extra key=value override, repeatable"),
    );
    args
}

pub fn cli() -> ClapCommand {
    let sub = |name: &'static str, about: &'static str| ClapCommand::new(name).about(about).args(key_args());
    ClapCommand::new("mpsenc")
        .about("Compile classical data into shallow CNOT+rotation state-preparation circuits")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(sub("encode-function", "Encode a sampled univariate function"))
        .subcommand(sub("encode-image", "Encode a square grayscale image"))
        .subcommand(sub("truncation-scan", "Truncation error against bond dimension, and Schmidt spectra"))
        .subcommand(sub("tci-build", "Build a target MPS by tensor cross interpolation"))
        .subcommand(
            sub("benchmark", "Run every section of an INI manifest")
                .arg(Arg::new("manifest").long("manifest").short('m').value_name("FILE").required(true)),
        )
        .subcommand(
            ClapCommand::new("inspect")
                .about("Summarise a circuit (qasm, json), layer stack (json) or MPS (bin) as JSON")
                .arg(Arg::new("path").required(true).value_name("FILE")),
        )
}

/// Config-file keys, then `--set`, then named flags.
fn collect_flags(m: &ArgMatches) -> Result<Vec<(String, String)>, CliError> {
    let mut flags = Vec::new();
    if let Some(sets) = m.get_many::<String>("set") {
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got {s:?}")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    for (k, _) in KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            flags.push((k.to_string(), v.clone()));
        }
    }
    Ok(flags)
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&matches) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mpsenc: {}", e.message);
            e.code
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<(), CliError> {
    let (name, m) = matches.subcommand().expect("subcommand required");
    let command = Command::parse(name).expect("registered subcommand");
    if command == Command::Inspect {
        let path = PathBuf::from(m.get_one::<String>("path").expect("required"));
        return commands::inspect(&path);
    }
    let config_path = m.get_one::<String>("config").map(PathBuf::from);
    let base = config_path.as_deref().and_then(Path::parent).map(Path::to_path_buf);
    let kv = config::merge(config_path.as_deref(), &collect_flags(m)?)?;
    match command {
        Command::EncodeFunction | Command::EncodeImage => commands::encode(command, &kv, base.as_deref()),
        Command::TruncationScan => commands::truncation_scan(&kv, base.as_deref()),
        Command::TciBuild => commands::tci_build(&kv, base.as_deref()),
        Command::Benchmark => {
            let manifest = PathBuf::from(m.get_one::<String>("manifest").expect("required"));
            commands::benchmark(&manifest, &kv)
        }
        Command::Inspect => unreachable!(),
    }
}
