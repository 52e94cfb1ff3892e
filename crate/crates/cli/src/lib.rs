//! Command-line front end: one TOML/JSON config, five verbs, results as
//! JSON and CSV in an output directory.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use sparse_confset::mc::{replication_sample, write_boundary_csv, write_replications_csv_file};
use sparse_confset::{
    l0_pls, run_boundary_scan, run_experiment, run_test, sample_split_cs, Procedure,
};

pub use config::{Config, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    /// Fit the l0-penalized estimator on one sample.
    Estimate,
    /// Run the sparsity test on one sample.
    Test,
    /// Build a confidence set on one sample.
    Confset,
    /// Monte Carlo coverage, diameter and rejection rates.
    Coverage,
    /// Testing error across a grid of separations.
    Boundary,
}

#[derive(Debug, Parser)]
#[command(name = "sparse-confset", version, about = "Confidence sets for sparse high-dimensional regression")]
struct Args {
    #[command(subcommand)]
    verb: VerbArgs,
}

#[derive(Debug, Subcommand)]
enum VerbArgs {
    Estimate(Common),
    Test(Common),
    Confset(Common),
    Coverage(Common),
    Boundary(Common),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML config, or JSON when the name ends in `.json`.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set design.n=400`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for the Monte Carlo verbs.
    #[arg(long, env = "SPARSE_CONFSET_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CliCommand {
    pub verb: Verb,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Vec<String>,
    pub threads: Option<usize>,
    pub config: Config,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    Usage(String),
    /// The computation itself failed; exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("invalid config: {e}"))
    }
}

impl From<sparse_confset::Error> for CliError {
    fn from(e: sparse_confset::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

/// Parse `argv` (program name first). The config is left at its defaults
/// until [`load_config`].
pub fn parse_and_validate<I, T>(argv: I) -> Result<CliCommand, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    let (verb, common) = match args.verb {
        VerbArgs::Estimate(c) => (Verb::Estimate, c),
        VerbArgs::Test(c) => (Verb::Test, c),
        VerbArgs::Confset(c) => (Verb::Confset, c),
        VerbArgs::Coverage(c) => (Verb::Coverage, c),
        VerbArgs::Boundary(c) => (Verb::Boundary, c),
    };
    Ok(CliCommand {
        verb,
        config_path: common.config,
        output_dir: common.out,
        overrides: common.overrides,
        threads: common.threads,
        config: Config::default(),
    })
}

/// Read the config file (if any), apply the overrides and check the result.
pub fn load_config(cmd: &mut CliCommand) -> Result<(), CliError> {
    let mut table = match &cmd.config_path {
        None => toml::Table::new(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            if path.extension().is_some_and(|e| e == "json") {
                let value: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                // serde_json -> toml through the shared data model
                toml::Table::try_from(value)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            } else {
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
        }
    };
    for o in &cmd.overrides {
        apply_override(&mut table, o)?;
    }
    let config: Config = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config: {}", e.message())))?;
    if cmd.threads == Some(0) {
        return Err(CliError::Usage("--threads: must be at least 1".into()));
    }
    // build everything the verb needs so that bad values fail before any work
    match cmd.verb {
        Verb::Boundary => {
            config.boundary_config(cmd.threads)?;
        }
        Verb::Coverage => {
            config.experiment(config.mc_procedure(), cmd.threads)?;
        }
        Verb::Confset => {
            config.experiment(confset_procedure(&config), cmd.threads)?;
        }
        Verb::Estimate | Verb::Test => {
            config.experiment(Procedure::TestOnly(config.test.kind), cmd.threads)?;
        }
    }
    cmd.config = config;
    Ok(())
}

/// `a.b.c=value`; the value is read as a TOML value, falling back to a
/// bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set {spec}: expected KEY=VALUE")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("--set {spec}: empty key segment")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("--set {spec}: {part} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn confset_procedure(config: &Config) -> Procedure {
    match config.confset.construction {
        config::ConstructionName::SampleSplit => Procedure::SampleSplit,
        config::ConstructionName::TwoRadius => Procedure::TwoRadius(config.test.kind),
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Run the verb and write its files. Returns the files written.
pub fn execute(cmd: &CliCommand) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cmd.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let cfg = &cmd.config;
    let effective = dir.join("effective_config.toml");
    let text = toml::to_string(cfg).map_err(|e| io_err(&effective, e))?;
    fs::write(&effective, text).map_err(|e| io_err(&effective, e))?;
    let mut written = vec![effective];

    match cmd.verb {
        Verb::Estimate => {
            let exp = cfg.experiment(Procedure::TestOnly(cfg.test.kind), cmd.threads)?;
            let sample = replication_sample(&exp, 0)?;
            let fit = l0_pls(&sample, &exp.solver)?;
            let mut out = fit.to_json();
            out["loss_sq"] = json!((&fit.theta_hat - &sample.theta_true).norm_squared());
            write_json(dir, "fit.json", &out)?;
            written.push(dir.join("fit.json"));
        }
        Verb::Test => {
            let exp = cfg.experiment(Procedure::TestOnly(cfg.test.kind), cmd.threads)?;
            let sample = replication_sample(&exp, 0)?;
            let outcome = run_test(cfg.test.kind, &sample, &exp.test, &exp.solver, None)?;
            write_json(dir, "test.json", &outcome.to_json())?;
            written.push(dir.join("test.json"));
        }
        Verb::Confset => {
            let procedure = confset_procedure(cfg);
            let exp = cfg.experiment(procedure, cmd.threads)?;
            let sample = replication_sample(&exp, 0)?;
            let (cs, outcome) = match procedure {
                Procedure::TwoRadius(_) => {
                    let (cs, t) = sparse_confset::confset::two_radius_cs_with_outcome(
                        &sample, &exp.cs, &exp.solver, &exp.test,
                    )?;
                    (cs, Some(t))
                }
                _ => (sample_split_cs(&sample, &exp.cs, &exp.solver)?, None),
            };
            let mut out = cs.to_json();
            out["covers_truth"] = json!(sparse_confset::contains(&cs, &sample.theta_true)?);
            if let Some(t) = outcome {
                out["test"] = t.to_json();
            }
            write_json(dir, "confset.json", &out)?;
            written.push(dir.join("confset.json"));
        }
        Verb::Coverage => {
            let exp = cfg.experiment(cfg.mc_procedure(), cmd.threads)?;
            let report = run_experiment(&exp)?;
            write_json(dir, "summary.json", &report.to_json())?;
            let csv = dir.join("replications.csv");
            write_replications_csv_file(&report.records, &csv)?;
            written.push(dir.join("summary.json"));
            written.push(csv);
        }
        Verb::Boundary => {
            let (bcfg, grid) = cfg.boundary_config(cmd.threads)?;
            let scan = run_boundary_scan(&bcfg, &grid)?;
            let path = dir.join("boundary.csv");
            let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_boundary_csv(&scan.rows, std::io::BufWriter::new(file))?;
            let summary = json!({
                "replications": bcfg.replications,
                "null": scan.null,
                "rows": scan.rows,
                "power": scan.power,
            });
            write_json(dir, "summary.json", &summary)?;
            written.push(path);
            written.push(dir.join("summary.json"));
        }
    }
    Ok(written)
}

/// Whole program: parse, load, run. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut cmd = match parse_and_validate(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = load_config(&mut cmd).and_then(|_| execute(&cmd));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
