//! Replicated experiments: coverage and diameter of the confidence sets,
//! error rates of the tests, and the detection-boundary scan.
//!
//! Replication `r` of an experiment with base seed `b` runs on the seed
//! `replication_seed(b, r) = mix64(b ^ r)`. From that seed the signal is
//! drawn on `substream(seed, 0)`, the sample (design and noise) on
//! `substream(seed, 1)` and a random row split on `substream(seed, 2)`.
//! Results are collected in replication order, so every aggregate and the
//! per-replication CSV are the same for any number of threads.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confset::{
    contains, diameter_sq, sample_split_cs, two_radius_cs_with_outcome, Branch, CsConfig, SplitRule,
};
use crate::dist::{nearest_rank, Proportion};
use crate::error::{invalid, Error, Result};
use crate::estimate::SolverConfig;
use crate::seed::{self, replication_seed, substream};
use crate::synth::{
    generate_separated_signal, generate_sparse_signal, sample_model, sample_prior,
    AmplitudeProfile, DesignSpec, LinearSample, PriorSpec, SignalSpec,
};
use crate::testing::{run_test, TestConfig, TestKind};

/// Where the true `theta` of each replication comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalSource {
    /// Exactly `k` nonzeros at random positions.
    Sparse { k: usize, profile: AmplitudeProfile },
    /// `k0` spikes plus `k1 - k0` small coordinates at distance `rho`.
    Separated(SignalSpec),
    Prior(PriorSpec),
    /// The same vector in every replication.
    Fixed(Vec<f64>),
}

impl SignalSource {
    pub fn draw(&self, p: usize, seed: u64) -> Result<DVector<f64>> {
        match self {
            SignalSource::Sparse { k, profile } => generate_sparse_signal(p, *k, *profile, seed),
            SignalSource::Separated(spec) => generate_separated_signal(spec, seed),
            SignalSource::Prior(prior) => Ok(sample_prior(prior, seed)),
            SignalSource::Fixed(v) => Ok(DVector::from_column_slice(v)),
        }
    }

    fn dimension(&self) -> Option<usize> {
        match self {
            SignalSource::Sparse { .. } => None,
            SignalSource::Separated(spec) => Some(spec.p),
            SignalSource::Prior(prior) => Some(prior.p),
            SignalSource::Fixed(v) => Some(v.len()),
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if let Some(d) = self.dimension() {
            if d != p {
                return Err(Error::DimensionMismatch(format!(
                    "signal has dimension {d}, design has p = {p}"
                )));
            }
        }
        match self {
            SignalSource::Sparse { k, .. } if *k > p => {
                Err(invalid("k", format!("k = {k} exceeds p = {p}")))
            }
            SignalSource::Separated(spec) => spec.validate(),
            SignalSource::Prior(prior) => prior.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    SampleSplit,
    TwoRadius(TestKind),
    TestOnly(TestKind),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    pub signal: SignalSource,
    pub replications: usize,
    pub base_seed: u64,
    pub procedure: Procedure,
    pub cs: CsConfig,
    pub test: TestConfig,
    pub solver: SolverConfig,
    /// Draw `theta` once (from the base seed) instead of per replication.
    pub fixed_signal: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub num_threads: Option<usize>,
    /// Write measured times to the `wall_ms` column. Off by default so that
    /// the CSV is a pure function of the configuration.
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(design: DesignSpec, signal: SignalSource, procedure: Procedure) -> Self {
        Self {
            design,
            signal,
            replications: 100,
            base_seed: 0,
            procedure,
            cs: CsConfig::new(0.05),
            test: TestConfig::new(0.05, 1, 2),
            solver: SolverConfig::greedy(crate::estimate::DEFAULT_C3, 50),
            fixed_signal: false,
            num_threads: None,
            record_wall_time: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if self.num_threads == Some(0) {
            return Err(invalid("num_threads", "must be at least 1"));
        }
        self.design.validate()?;
        self.signal.validate(self.design.p)?;
        match self.procedure {
            Procedure::SampleSplit => {
                self.cs.validate()?;
                let n1 = (self.cs.split_fraction * self.design.n as f64).ceil() as usize;
                self.solver.validate(n1, self.design.p)?;
            }
            Procedure::TwoRadius(_) => {
                self.cs.validate()?;
                self.test.validate()?;
                self.solver.validate(self.design.n, self.design.p)?;
            }
            Procedure::TestOnly(_) => {
                self.test.validate()?;
                self.solver.validate(self.design.n, self.design.p)?;
            }
        }
        Ok(())
    }
}

/// One row of the per-replication CSV. Fields that the procedure does not
/// produce are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    pub covered: Option<bool>,
    pub diameter_sq: Option<f64>,
    pub statistic: Option<f64>,
    pub reject: Option<bool>,
    pub branch: Option<Branch>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterQuantiles {
    pub q50: f64,
    pub q90: f64,
    pub q95: f64,
}

impl DiameterQuantiles {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            q50: nearest_rank(&v, 0.5),
            q90: nearest_rank(&v, 0.9),
            q95: nearest_rank(&v, 0.95),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub replications: usize,
    pub coverage: Option<Proportion>,
    pub diameter_sq: Option<DiameterQuantiles>,
    pub reject: Option<Proportion>,
    /// Share of replications on the `k1` radius.
    pub large_branch: Option<Proportion>,
    /// Not part of the deterministic output.
    pub mean_wall_ms: f64,
    #[serde(skip)]
    pub records: Vec<ReplicationRecord>,
}

impl Report {
    pub fn from_records(records: Vec<ReplicationRecord>, mean_wall_ms: f64) -> Self {
        let reps = records.len();
        let count = |f: &dyn Fn(&ReplicationRecord) -> Option<bool>| -> Option<Proportion> {
            let flags: Vec<bool> = records.iter().filter_map(f).collect();
            (!flags.is_empty())
                .then(|| Proportion::new(flags.iter().filter(|b| **b).count(), flags.len()))
        };
        let coverage = count(&|r| r.covered);
        let reject = count(&|r| r.reject);
        let large_branch = count(&|r| r.branch.map(|b| b == Branch::Large));
        let diams: Vec<f64> = records.iter().filter_map(|r| r.diameter_sq).collect();
        Self {
            replications: reps,
            coverage,
            diameter_sq: DiameterQuantiles::from_values(&diams),
            reject,
            large_branch,
            mean_wall_ms,
            records,
        }
    }

    pub fn coverage_rate(&self) -> Option<f64> {
        self.coverage.map(|p| p.rate)
    }

    pub fn reject_rate(&self) -> Option<f64> {
        self.reject.map(|p| p.rate)
    }

    pub fn branch_rate(&self) -> Option<f64> {
        self.large_branch.map(|p| p.rate)
    }

    /// Summary document: the report fields plus flat
    /// `coverage_rate`, `reject_rate` and `branch_rate`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("report is an object");
        obj.insert("coverage_rate".into(), serde_json::json!(self.coverage_rate()));
        obj.insert("reject_rate".into(), serde_json::json!(self.reject_rate()));
        obj.insert("branch_rate".into(), serde_json::json!(self.branch_rate()));
        v
    }
}

/// Runs `f(rep)` for every replication, on a private pool of
/// `num_threads` workers when given, and returns the results in order.
pub fn parallel_map<T, F>(reps: usize, num_threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = || (0..reps).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match num_threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?
            .install(run),
    }
}

fn draw_sample(cfg: &ExperimentConfig, rep_seed: u64, fixed: Option<&DVector<f64>>) -> Result<LinearSample> {
    let theta = match fixed {
        Some(t) => t.clone(),
        None => cfg
            .signal
            .draw(cfg.design.p, substream(rep_seed, seed::TAG_SIGNAL))?,
    };
    sample_model(&cfg.design, &theta, substream(rep_seed, seed::TAG_SAMPLE))
}

fn run_replication(
    cfg: &ExperimentConfig,
    rep: usize,
    fixed: Option<&DVector<f64>>,
) -> Result<ReplicationRecord> {
    let start = Instant::now();
    let rep_seed = replication_seed(cfg.base_seed, rep as u64);
    let sample = draw_sample(cfg, rep_seed, fixed)?;
    let mut rec = ReplicationRecord {
        rep,
        seed: rep_seed,
        covered: None,
        diameter_sq: None,
        statistic: None,
        reject: None,
        branch: None,
        wall_ms: 0.0,
    };
    match cfg.procedure {
        Procedure::SampleSplit => {
            let mut cs_cfg = cfg.cs;
            if let SplitRule::Seeded(_) = cs_cfg.split {
                cs_cfg.split = SplitRule::Seeded(substream(rep_seed, seed::TAG_SPLIT));
            }
            let cs = sample_split_cs(&sample, &cs_cfg, &cfg.solver)?;
            rec.covered = Some(contains(&cs, &sample.theta_true)?);
            rec.diameter_sq = Some(diameter_sq(&cs));
        }
        Procedure::TwoRadius(kind) => {
            let cs_cfg = CsConfig {
                test_strategy: kind,
                ..cfg.cs
            };
            let (cs, outcome) = two_radius_cs_with_outcome(&sample, &cs_cfg, &cfg.solver, &cfg.test)?;
            rec.covered = Some(contains(&cs, &sample.theta_true)?);
            rec.diameter_sq = Some(diameter_sq(&cs));
            rec.statistic = Some(outcome.statistic);
            rec.reject = Some(outcome.reject);
            rec.branch = cs.branch;
        }
        Procedure::TestOnly(kind) => {
            let outcome = run_test(kind, &sample, &cfg.test, &cfg.solver, None)?;
            rec.statistic = Some(outcome.statistic);
            rec.reject = Some(outcome.reject);
        }
    }
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

fn fixed_theta(cfg: &ExperimentConfig) -> Result<Option<DVector<f64>>> {
    if cfg.fixed_signal {
        let theta = cfg
            .signal
            .draw(cfg.design.p, substream(cfg.base_seed, seed::TAG_SIGNAL))?;
        Ok(Some(theta))
    } else {
        Ok(None)
    }
}

/// The sample that replication `rep` of `cfg` runs on.
pub fn replication_sample(cfg: &ExperimentConfig, rep: usize) -> Result<LinearSample> {
    cfg.validate()?;
    let rep_seed = replication_seed(cfg.base_seed, rep as u64);
    draw_sample(cfg, rep_seed, fixed_theta(cfg)?.as_ref())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let fixed = fixed_theta(cfg)?;
    let mut records = parallel_map(cfg.replications, cfg.num_threads, |rep| {
        run_replication(cfg, rep, fixed.as_ref())
    })?;
    let mut mean_wall_ms = records.iter().map(|r| r.wall_ms).sum::<f64>() / records.len() as f64;
    if !cfg.record_wall_time {
        mean_wall_ms = 0.0;
        for r in &mut records {
            r.wall_ms = 0.0;
        }
    }
    Ok(Report::from_records(records, mean_wall_ms))
}

/// CSV with header `rep,seed,covered,diameter_sq,statistic,reject,branch,wall_ms`.
pub fn write_replications_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "rep",
            "seed",
            "covered",
            "diameter_sq",
            "statistic",
            "reject",
            "branch",
            "wall_ms",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_replications_csv_file(records: &[ReplicationRecord], path: &Path) -> Result<()> {
    write_replications_csv(records, std::fs::File::create(path)?)
}

/// How alternatives are drawn at separation `rho` in a boundary scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// [`generate_separated_signal`] with `k0` spikes of the default size.
    Separated,
    /// The sparse product prior calibrated with `rho_bar = rho` and the
    /// given `c`.
    Prior { c: f64 },
}

#[derive(Debug, Clone)]
pub struct BoundaryConfig {
    pub design: DesignSpec,
    pub test_kind: TestKind,
    pub test: TestConfig,
    pub solver: SolverConfig,
    pub alternative: Alternative,
    /// Null signals: `k0` nonzeros of this profile.
    pub null_profile: AmplitudeProfile,
    pub replications: usize,
    pub base_seed: u64,
    pub num_threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub rho: f64,
    pub reject_rate_h0: f64,
    pub reject_rate_h1: f64,
    /// Type I error plus type II error.
    pub error_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryScan {
    /// Rejections over the null replications, shared by every grid point.
    pub null: Proportion,
    pub rows: Vec<BoundaryRow>,
    /// Rejections over the alternative replications, one per grid point.
    pub power: Vec<Proportion>,
}

/// `multiplier * n^{-1/4}` for each multiplier.
pub fn scaled_rho_grid(n: usize, multipliers: &[f64]) -> Vec<f64> {
    let unit = (n as f64).powf(-0.25);
    multipliers.iter().map(|m| m * unit).collect()
}

const NULL_STREAM: u64 = 0xB0;
const ALT_STREAM: u64 = 0xB1;

fn reject_count(
    cfg: &BoundaryConfig,
    stream_seed: u64,
    signal: &SignalSource,
) -> Result<Proportion> {
    let flags = parallel_map(cfg.replications, cfg.num_threads, |rep| {
        let rep_seed = replication_seed(stream_seed, rep as u64);
        let theta = signal.draw(cfg.design.p, substream(rep_seed, seed::TAG_SIGNAL))?;
        let sample = sample_model(&cfg.design, &theta, substream(rep_seed, seed::TAG_SAMPLE))?;
        Ok(run_test(cfg.test_kind, &sample, &cfg.test, &cfg.solver, None)?.reject)
    })?;
    Ok(Proportion::new(flags.iter().filter(|b| **b).count(), flags.len()))
}

/// Type I error under `k0`-sparse signals and type II error under
/// alternatives at each separation of `rho_grid`.
///
/// The null law of the statistic does not depend on `rho`, so one null run
/// serves every row. Grid point `g` draws its alternatives from the seed
/// `substream(substream(base_seed, 0xB1), g)`; the null run uses
/// `substream(base_seed, 0xB0)`.
pub fn run_boundary_scan(cfg: &BoundaryConfig, rho_grid: &[f64]) -> Result<BoundaryScan> {
    if rho_grid.is_empty() {
        return Err(invalid("rho_grid", "must be nonempty"));
    }
    if rho_grid.windows(2).any(|w| !(w[0] < w[1])) || !(rho_grid[0] >= 0.0) {
        return Err(invalid("rho_grid", "must be nonnegative and strictly increasing"));
    }
    if cfg.replications == 0 {
        return Err(invalid("replications", "must be at least 1"));
    }
    cfg.design.validate()?;
    cfg.test.validate()?;
    cfg.solver.validate(cfg.design.n, cfg.design.p)?;
    let p = cfg.design.p;
    let null_signal = SignalSource::Sparse {
        k: cfg.test.k0,
        profile: cfg.null_profile,
    };
    null_signal.validate(p)?;
    let null = reject_count(cfg, substream(cfg.base_seed, NULL_STREAM), &null_signal)?;
    let alt_base = substream(cfg.base_seed, ALT_STREAM);
    let mut rows = Vec::with_capacity(rho_grid.len());
    let mut power = Vec::with_capacity(rho_grid.len());
    for (g, &rho) in rho_grid.iter().enumerate() {
        let signal = match cfg.alternative {
            Alternative::Separated => {
                SignalSource::Separated(SignalSpec::new(p, cfg.test.k0, cfg.test.k1, rho))
            }
            Alternative::Prior { c } => {
                SignalSource::Prior(PriorSpec::least_favorable(p, cfg.test.k1, rho, c)?)
            }
        };
        signal.validate(p)?;
        let alt = reject_count(cfg, substream(alt_base, g as u64), &signal)?;
        rows.push(BoundaryRow {
            rho,
            reject_rate_h0: null.rate,
            reject_rate_h1: alt.rate,
            error_sum: null.rate + 1.0 - alt.rate,
        });
        power.push(alt);
    }
    Ok(BoundaryScan { null, rows, power })
}

/// CSV with header `rho,reject_rate_h0,reject_rate_h1,error_sum`.
pub fn write_boundary_csv<W: Write>(rows: &[BoundaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
