//! Command-line driver. `run` parses arguments, executes one command and
//! returns the process exit code: 0 on success, 1 for configuration
//! problems, 2 for data problems.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use super::config::{load_config, ConfigError, Overrides};
use super::manifest::RunManifest;
use super::{fmt_f64, to_json_string};
use crate::backtest::{problem_at, run_walk_forward, select_at, BacktestConfig, BacktestError, BacktestResult, Strategy};
use crate::market_data::{load_prices, synth_prices, MarketError, SynthParams};
use crate::qaoa::{depth_sweep, DepthDiagnostic};

#[derive(Debug, Parser)]
#[command(name = "kardinal", version, about = "Cardinality-constrained portfolio selection backtests")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, env = "KARDINAL_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monthly walk-forward backtest of all three strategies.
    Backtest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Do not charge transaction costs on the first purchase.
        #[arg(long)]
        free_initial_fill: bool,
    },
    /// QAOA depth sweep on a single date.
    DepthDiag {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        asof: NaiveDate,
        #[arg(long)]
        out: PathBuf,
    },
    /// Both selection solvers plus allocation on a single date, printed as JSON.
    Select {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        asof: NaiveDate,
        /// Also write select.json and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic correlated price panel.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// JSON file with generator parameters; built-in defaults otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        drift_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        vol_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Price CSV (date column then one column per ticker).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p_max: Option<usize>,
    /// Ledoit-Wolf covariance inside HRP.
    #[arg(long)]
    pub hrp_shrinkage: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    BadParams(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::BadParams(_) => 1,
            CliError::Data(_) | CliError::Output { .. } => 2,
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Config(msg) => CliError::BadParams(format!("invalid configuration: {msg}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut buf = Vec::new();
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command, &mut buf)),
            Err(e) => Err(CliError::BadParams(format!("cannot start {n} worker threads: {e}"))),
        },
        None => execute(cli.command, &mut buf),
    };
    let outcome = outcome.and_then(|()| {
        stdout.write_all(&buf).map_err(|source| CliError::Output { path: "<stdout>".into(), source })
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "kardinal: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command; anything meant for standard output is appended to `stdout`.
pub fn execute(command: Command, stdout: &mut Vec<u8>) -> Result<(), CliError> {
    let started = Utc::now();
    match command {
        Command::Backtest { common, out, free_initial_fill } => {
            let (config, panel_path) = prepare(&common, free_initial_fill)?;
            let panel = load_prices(&panel_path, &[])?;
            let result = run_walk_forward(&panel, &config)?;
            let mut manifest = manifest_for("backtest", &config, started, &common)?;
            write_backtest(&out, &result, &mut manifest)?;
            finish(&out, manifest)
        }
        Command::DepthDiag { common, asof, out } => {
            let (config, panel_path) = prepare(&common, false)?;
            let panel = load_prices(&panel_path, &[])?;
            let problem = problem_at(&panel, &config, asof)?;
            let sweep = depth_sweep(&problem, config.qaoa.p_max, &config.qaoa)
                .map_err(|e| CliError::Data(format!("depth sweep failed: {e}")))?;
            let mut manifest = manifest_for("depth-diag", &config, started, &common)?;
            write_depth_diag(&out, asof, &sweep.diagnostics, &mut manifest)?;
            finish(&out, manifest)
        }
        Command::Select { common, asof, out } => {
            let (config, panel_path) = prepare(&common, false)?;
            let panel = load_prices(&panel_path, &[])?;
            let report = select_at(&panel, &config, asof)?;
            let text = json(&report)?;
            stdout.extend_from_slice(text.as_bytes());
            if let Some(out) = out {
                let mut manifest = manifest_for("select", &config, started, &common)?;
                create_dir(&out)?;
                write_file(&out.join("select.json"), &text, &mut manifest)?;
                finish(&out, manifest)?;
            }
            Ok(())
        }
        Command::Synth { seed, params, drift_scale, vol_scale, out } => {
            let base = match &params {
                None => SynthParams::default(),
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .map_err(|e| CliError::BadParams(format!("cannot read params file {}: {e}", p.display())))?;
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::BadParams(format!("invalid params file {}: {e}", p.display())))?
                }
            };
            let synth = base.scaled(drift_scale, vol_scale);
            let panel = synth_prices(seed, &synth).map_err(|e| CliError::BadParams(e.to_string()))?;
            let mut buf = Vec::new();
            panel.write_csv(&mut buf)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            let mut manifest = RunManifest::new("synth", seed, &synth, started).map_err(output_json(&out))?;
            if let Some(p) = &params {
                manifest.add_input(p).map_err(|source| CliError::Output { path: p.clone(), source })?;
            }
            fs::write(&out, &buf).map_err(|source| CliError::Output { path: out.clone(), source })?;
            manifest.add_output(&out).map_err(|source| CliError::Output { path: out.clone(), source })?;
            manifest.finish();
            let mpath = synth_manifest_path(&out);
            let text = json(&manifest)?;
            fs::write(&mpath, text).map_err(|source| CliError::Output { path: mpath, source })
        }
    }
}

/// Manifest location for `synth`, which writes a single file rather than a directory.
pub fn synth_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn prepare(common: &Common, free_initial_fill: bool) -> Result<(BacktestConfig, PathBuf), CliError> {
    let overrides = Overrides {
        seed: common.seed,
        p_max: common.p_max,
        free_initial_fill,
        hrp_shrinkage: common.hrp_shrinkage,
    };
    let config = load_config(common.config.as_deref(), &overrides)?;
    if !common.data.is_file() {
        return Err(CliError::Data(format!("price file {} not found", common.data.display())));
    }
    Ok((config, common.data.clone()))
}

fn manifest_for(command: &str, config: &BacktestConfig, started: chrono::DateTime<Utc>, common: &Common) -> Result<RunManifest, CliError> {
    let mut m = RunManifest::new(command, config.seed, config, started).map_err(output_json(Path::new("manifest.json")))?;
    if let Some(c) = &common.config {
        m.add_input(c).map_err(|source| CliError::Output { path: c.clone(), source })?;
    }
    m.add_input(&common.data).map_err(|source| CliError::Output { path: common.data.clone(), source })?;
    Ok(m)
}

fn output_json(path: &Path) -> impl Fn(serde_json::Error) -> CliError + '_ {
    move |e| CliError::Output { path: path.to_path_buf(), source: io::Error::other(e) }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json_string(value).map_err(output_json(Path::new("<json>")))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })
}

fn write_file(path: &Path, text: &str, manifest: &mut RunManifest) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Output { path: path.to_path_buf(), source })?;
    manifest.add_output(path).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

fn finish(out: &Path, mut manifest: RunManifest) -> Result<(), CliError> {
    manifest.finish();
    let path = out.join("manifest.json");
    let text = json(&manifest)?;
    fs::write(&path, text).map_err(|source| CliError::Output { path, source })
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

fn strategy_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain(Strategy::ALL.iter().map(|s| s.name().to_string())).collect()
}

/// Value path (one row per date, starting with the initial capital).
pub fn values_csv(result: &BacktestResult) -> String {
    let mut dates: Vec<NaiveDate> = result.per_month.first().map(|m| m.date).into_iter().collect();
    dates.extend(result.per_month.iter().map(|m| m.hold_until));
    let rows: Vec<Vec<String>> = dates
        .iter()
        .enumerate()
        .map(|(t, d)| {
            std::iter::once(d.to_string()).chain(Strategy::ALL.iter().map(|s| fmt_f64(result.values[s][t]))).collect()
        })
        .collect();
    csv_text(&strategy_header("date"), &rows)
}

/// Per-month turnover, one column per strategy.
pub fn turnover_csv(result: &BacktestResult) -> String {
    let rows: Vec<Vec<String>> = result
        .per_month
        .iter()
        .map(|m| {
            std::iter::once(m.date.to_string())
                .chain(Strategy::ALL.iter().map(|s| fmt_f64(m.strategies[s].turnover)))
                .collect()
        })
        .collect();
    csv_text(&strategy_header("date"), &rows)
}

/// Weight-allocation matrix: one row per (date, strategy).
pub fn weights_csv(result: &BacktestResult) -> String {
    let header: Vec<String> =
        ["date".to_string(), "strategy".to_string()].into_iter().chain(result.tickers.iter().cloned()).collect();
    let rows: Vec<Vec<String>> = result
        .per_month
        .iter()
        .flat_map(|m| {
            Strategy::ALL.iter().map(move |s| {
                [m.date.to_string(), s.name().to_string()]
                    .into_iter()
                    .chain(m.strategies[s].weights.iter().map(|w| fmt_f64(*w)))
                    .collect()
            })
        })
        .collect();
    csv_text(&header, &rows)
}

fn write_backtest(out: &Path, result: &BacktestResult, manifest: &mut RunManifest) -> Result<(), CliError> {
    create_dir(out)?;
    write_file(&out.join("result.json"), &json(result)?, manifest)?;
    write_file(&out.join("values.csv"), &values_csv(result), manifest)?;
    write_file(&out.join("turnover.csv"), &turnover_csv(result), manifest)?;
    write_file(&out.join("weights.csv"), &weights_csv(result), manifest)?;
    write_file(&out.join("diagnostics.json"), &json(&result.timing)?, manifest)
}

/// Per-depth table: p, initial/final cost, iterations, mean gradient norm, wall time.
pub fn depth_table_csv(diagnostics: &[DepthDiagnostic]) -> String {
    let header: Vec<String> = ["p", "initial_cost", "final_cost", "iterations", "grad_norm", "wall_ms", "best_bitstring", "error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = diagnostics
        .iter()
        .map(|d| {
            vec![
                d.p.to_string(),
                fmt_f64(d.initial_cost),
                fmt_f64(d.final_cost),
                d.iterations.to_string(),
                fmt_f64(d.grad_norm),
                fmt_f64(d.wall_ms),
                d.best_bitstring.map(|b| b.to_string()).unwrap_or_default(),
                d.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

/// Long-format optimizer traces: p, iteration, cost, grad_norm.
pub fn traces_csv(diagnostics: &[DepthDiagnostic]) -> String {
    let header: Vec<String> = ["p", "iteration", "cost", "grad_norm"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = diagnostics
        .iter()
        .flat_map(|d| {
            d.trace.costs.iter().zip(&d.trace.grad_norms).enumerate().map(move |(i, (c, g))| {
                vec![d.p.to_string(), i.to_string(), fmt_f64(*c), fmt_f64(*g)]
            })
        })
        .collect();
    csv_text(&header, &rows)
}

#[derive(Serialize)]
struct DepthReport<'a> {
    asof: NaiveDate,
    depths: &'a [DepthDiagnostic],
}

fn write_depth_diag(out: &Path, asof: NaiveDate, diagnostics: &[DepthDiagnostic], manifest: &mut RunManifest) -> Result<(), CliError> {
    create_dir(out)?;
    write_file(&out.join("depth_table.csv"), &depth_table_csv(diagnostics), manifest)?;
    write_file(&out.join("depth_table.json"), &json(&DepthReport { asof, depths: diagnostics })?, manifest)?;
    write_file(&out.join("traces.csv"), &traces_csv(diagnostics), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("kardinal").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("backtest"));
    }

    #[test]
    fn unknown_flag_is_a_config_error() {
        assert_eq!(run_args(&["backtest", "--bogus"]).0, 1);
    }

    #[test]
    fn missing_config_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("p.csv");
        fs::write(&data, "date,A\n2025-01-01,1\n").unwrap();
        let (code, _, err) = run_args(&[
            "backtest",
            "--config",
            "/no/such/config.json",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("/no/such/config.json"));
    }

    #[test]
    fn missing_data_is_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, err) = run_args(&["select", "--data", "/no/such/prices.csv", "--asof", "2025-01-02"]);
        assert_eq!(code, 2, "{err}");
        assert!(err.contains("/no/such/prices.csv"));
        drop(dir);
    }

    #[test]
    fn synth_manifest_sits_next_to_output() {
        assert_eq!(synth_manifest_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.manifest.json"));
    }
}
