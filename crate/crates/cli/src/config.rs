//! Experiment configuration file.
//!
//! TOML (or JSON when the file name ends in `.json`). Every table and key is
//! optional; missing keys take the defaults below and unknown keys are
//! rejected. The effective configuration written next to the results holds
//! every key that has a value (unset optional keys keep their automatic
//! choice), so a run can be repeated from it alone.

use serde::{Deserialize, Serialize};
use sparse_confset::confset::{CsConfig, SplitRule, DEFAULT_L_PRIME};
use sparse_confset::estimate::DEFAULT_C3;
use sparse_confset::mc::{scaled_rho_grid, ExperimentConfig};
use sparse_confset::synth::{LrNorm, NormBall};
use sparse_confset::testing::{DEFAULT_D_CONST, DEFAULT_U_GAMMA_CONST};
use sparse_confset::{
    Alternative, AmplitudeProfile, BoundaryConfig, DesignSpec, Penalty, PriorSpec, Procedure,
    SignalSource, SignalSpec, SolverConfig, SolverMode, TestConfig, TestKind, ThresholdMode,
};

/// A configuration problem, tied to the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub design: DesignCfg,
    pub signal: SignalCfg,
    pub solver: SolverCfg,
    pub test: TestCfg,
    pub confset: ConfsetCfg,
    pub mc: McCfg,
    pub boundary: BoundaryCfg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKindName {
    IidGaussian,
    BoundedRademacher,
    Ar1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignCfg {
    pub n: usize,
    pub p: usize,
    pub kind: DesignKindName,
    /// Declared entry bound of `bounded_rademacher`.
    pub bound: f64,
    /// Correlation of neighbouring columns for `ar1`.
    pub ar1_rho: f64,
}

impl Default for DesignCfg {
    fn default() -> Self {
        Self {
            n: 200,
            p: 100,
            kind: DesignKindName::IidGaussian,
            bound: 1.0,
            ar1_rho: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKindName {
    Sparse,
    Separated,
    Prior,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Constant,
    Decaying,
    RandomGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormName {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalCfg {
    pub kind: SignalKindName,
    /// Nonzeros of a `sparse` signal.
    pub k: usize,
    pub profile: ProfileName,
    pub amplitude: f64,
    /// Separation of `separated` signals and `rho_bar` of the prior;
    /// sparsity levels come from `[test]`.
    pub rho: f64,
    pub spike: Option<f64>,
    /// Prior tuning constant in (0, 1).
    pub c: f64,
    pub values: Vec<f64>,
    pub ball_norm: Option<NormName>,
    pub ball_radius: Option<f64>,
}

impl Default for SignalCfg {
    fn default() -> Self {
        Self {
            kind: SignalKindName::Sparse,
            k: 3,
            profile: ProfileName::Constant,
            amplitude: 1.0,
            rho: 1.0,
            spike: None,
            c: 0.5,
            values: Vec::new(),
            ball_norm: None,
            ball_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverModeName {
    Greedy,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverCfg {
    pub mode: SolverModeName,
    pub c3: f64,
    /// Fixed `lambda^2`, replacing `c3 log(p) / n`.
    pub lambda_sq: Option<f64>,
    /// Defaults to `min(50, p)`.
    pub max_support: Option<usize>,
}

impl Default for SolverCfg {
    fn default() -> Self {
        Self {
            mode: SolverModeName::Greedy,
            c3: DEFAULT_C3,
            lambda_sq: None,
            max_support: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestCfg {
    pub kind: TestKind,
    pub gamma: f64,
    pub k0: usize,
    pub k1: usize,
    pub threshold_mode: ThresholdMode,
    pub d_const: f64,
    pub u_gamma_const: f64,
}

impl Default for TestCfg {
    fn default() -> Self {
        Self {
            kind: TestKind::ResidualChisq,
            gamma: 0.05,
            k0: 1,
            k1: 5,
            threshold_mode: ThresholdMode::ChiSqExact,
            d_const: DEFAULT_D_CONST,
            u_gamma_const: DEFAULT_U_GAMMA_CONST,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionName {
    SampleSplit,
    TwoRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfsetCfg {
    pub construction: ConstructionName,
    pub alpha: f64,
    pub l_prime: f64,
    pub split_fraction: f64,
    /// Random row split with this seed instead of first rows / last rows.
    pub split_seed: Option<u64>,
    /// Defaults to the design's smallest eigenvalue bound.
    pub lambda_min_sq: Option<f64>,
}

impl Default for ConfsetCfg {
    fn default() -> Self {
        Self {
            construction: ConstructionName::SampleSplit,
            alpha: 0.05,
            l_prime: DEFAULT_L_PRIME,
            split_fraction: 0.5,
            split_seed: None,
            lambda_min_sq: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureName {
    SampleSplit,
    TwoRadius,
    TestOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McCfg {
    pub replications: usize,
    pub base_seed: u64,
    pub procedure: ProcedureName,
    pub fixed_signal: bool,
    pub record_wall_time: bool,
}

impl Default for McCfg {
    fn default() -> Self {
        Self {
            replications: 100,
            base_seed: 0,
            procedure: ProcedureName::SampleSplit,
            fixed_signal: false,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternativeName {
    Separated,
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryCfg {
    pub alternative: AlternativeName,
    /// Separations as multiples of `n^{-1/4}`.
    pub rho_multipliers: Vec<f64>,
    /// Absolute separations; replaces `rho_multipliers` when nonempty.
    pub rho_grid: Vec<f64>,
    /// Amplitude of the `k0` nonzeros of null signals.
    pub null_amplitude: f64,
}

impl Default for BoundaryCfg {
    fn default() -> Self {
        Self {
            alternative: AlternativeName::Prior,
            rho_multipliers: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0],
            rho_grid: Vec::new(),
            null_amplitude: 1.0,
        }
    }
}

fn lib_err(e: sparse_confset::Error) -> ConfigError {
    let key = key_of(&e);
    match e {
        sparse_confset::Error::InvalidParameter { reason, .. } => ConfigError::new(key, reason),
        other => ConfigError::new(key, other.to_string()),
    }
}

impl Config {
    pub fn design_spec(&self) -> Result<DesignSpec, ConfigError> {
        let d = &self.design;
        let spec = match d.kind {
            DesignKindName::IidGaussian => DesignSpec::iid_gaussian(d.n, d.p),
            DesignKindName::BoundedRademacher => DesignSpec::bounded_rademacher(d.n, d.p, d.bound),
            DesignKindName::Ar1 => DesignSpec::ar1(d.n, d.p, d.ar1_rho),
        };
        spec.map_err(lib_err)
    }

    pub fn signal_source(&self) -> Result<SignalSource, ConfigError> {
        let s = &self.signal;
        let p = self.design.p;
        let (k0, k1) = (self.test.k0, self.test.k1);
        Ok(match s.kind {
            SignalKindName::Sparse => SignalSource::Sparse {
                k: s.k,
                profile: match s.profile {
                    ProfileName::Constant => AmplitudeProfile::Constant(s.amplitude),
                    ProfileName::Decaying => AmplitudeProfile::Decaying,
                    ProfileName::RandomGaussian => AmplitudeProfile::RandomGaussian,
                },
            },
            SignalKindName::Separated => {
                let mut spec = SignalSpec::new(p, k0, k1, s.rho);
                spec.spike = s.spike;
                spec.ball = match (s.ball_norm, s.ball_radius) {
                    (None, None) => None,
                    (Some(norm), Some(radius)) => Some(NormBall {
                        norm: match norm {
                            NormName::L1 => LrNorm::L1,
                            NormName::L2 => LrNorm::L2,
                        },
                        radius,
                    }),
                    _ => {
                        return Err(ConfigError::new(
                            "signal.ball_radius",
                            "ball_norm and ball_radius must be given together",
                        ))
                    }
                };
                SignalSource::Separated(spec)
            }
            SignalKindName::Prior => SignalSource::Prior(
                PriorSpec::least_favorable(p, k1, s.rho, s.c).map_err(lib_err)?,
            ),
            SignalKindName::Fixed => {
                if s.values.len() != p {
                    return Err(ConfigError::new(
                        "signal.values",
                        format!("has {} entries, design.p = {p}", s.values.len()),
                    ));
                }
                SignalSource::Fixed(s.values.clone())
            }
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            penalty: match s.lambda_sq {
                Some(l) => Penalty::LambdaSq(l),
                None => Penalty::Universal { c3: s.c3 },
            },
            mode: match s.mode {
                SolverModeName::Greedy => SolverMode::GreedyForward,
                SolverModeName::Exact => SolverMode::ExactEnumeration,
            },
            max_support: s.max_support.unwrap_or(self.design.p.min(50)),
        }
    }

    pub fn test_config(&self) -> TestConfig {
        let t = &self.test;
        TestConfig {
            gamma: t.gamma,
            k0: t.k0,
            k1: t.k1,
            threshold_mode: t.threshold_mode,
            d_const: t.d_const,
            u_gamma_const: t.u_gamma_const,
        }
    }

    pub fn cs_config(&self, design: &DesignSpec) -> CsConfig {
        let c = &self.confset;
        CsConfig {
            alpha: c.alpha,
            lambda_min_sq: c.lambda_min_sq.unwrap_or(design.lambda_min_sq),
            l_prime: c.l_prime,
            test_strategy: self.test.kind,
            split_fraction: c.split_fraction,
            split: match c.split_seed {
                Some(s) => SplitRule::Seeded(s),
                None => SplitRule::Deterministic,
            },
        }
    }

    /// The experiment behind every verb except `boundary`. Single-run verbs
    /// work on replication 0 of it.
    pub fn experiment(&self, procedure: Procedure, threads: Option<usize>) -> Result<ExperimentConfig, ConfigError> {
        let design = self.design_spec()?;
        let signal = self.signal_source()?;
        let cs = self.cs_config(&design);
        let mut cfg = ExperimentConfig::new(design, signal, procedure);
        cfg.replications = self.mc.replications;
        cfg.base_seed = self.mc.base_seed;
        cfg.cs = cs;
        cfg.test = self.test_config();
        cfg.solver = self.solver_config();
        cfg.fixed_signal = self.mc.fixed_signal;
        cfg.num_threads = threads;
        cfg.record_wall_time = self.mc.record_wall_time;
        cfg.validate().map_err(lib_err)?;
        Ok(cfg)
    }

    pub fn mc_procedure(&self) -> Procedure {
        match self.mc.procedure {
            ProcedureName::SampleSplit => Procedure::SampleSplit,
            ProcedureName::TwoRadius => Procedure::TwoRadius(self.test.kind),
            ProcedureName::TestOnly => Procedure::TestOnly(self.test.kind),
        }
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        if self.boundary.rho_grid.is_empty() {
            scaled_rho_grid(self.design.n, &self.boundary.rho_multipliers)
        } else {
            self.boundary.rho_grid.clone()
        }
    }

    pub fn boundary_config(&self, threads: Option<usize>) -> Result<(BoundaryConfig, Vec<f64>), ConfigError> {
        let design = self.design_spec()?;
        let cfg = BoundaryConfig {
            design,
            test_kind: self.test.kind,
            test: self.test_config(),
            solver: self.solver_config(),
            alternative: match self.boundary.alternative {
                AlternativeName::Separated => Alternative::Separated,
                AlternativeName::Prior => Alternative::Prior { c: self.signal.c },
            },
            null_profile: AmplitudeProfile::Constant(self.boundary.null_amplitude),
            replications: self.mc.replications,
            base_seed: self.mc.base_seed,
            num_threads: threads,
        };
        let grid = self.rho_grid();
        if grid.is_empty() {
            return Err(ConfigError::new("boundary.rho_multipliers", "grid is empty"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || !(grid[0] >= 0.0) {
            return Err(ConfigError::new(
                "boundary.rho_grid",
                "must be nonnegative and strictly increasing",
            ));
        }
        if cfg.replications == 0 {
            return Err(ConfigError::new("mc.replications", "must be at least 1"));
        }
        cfg.test.validate().map_err(lib_err)?;
        cfg.solver
            .validate(cfg.design.n, cfg.design.p)
            .map_err(lib_err)?;
        Ok((cfg, grid))
    }
}

/// Config key behind a library validation error.
fn key_of(e: &sparse_confset::Error) -> String {
    let name = match e {
        sparse_confset::Error::InvalidParameter { name, .. } => *name,
        sparse_confset::Error::BudgetExceeded { .. } => return "solver.max_support".into(),
        _ => return "config".into(),
    };
    let key = match name {
        "replications" | "base_seed" => format!("mc.{name}"),
        "num_threads" => "--threads".into(),
        "alpha" | "split_fraction" | "l_prime" | "lambda_min_sq" => format!("confset.{name}"),
        "gamma" | "k0" | "k1" | "d_const" | "u_gamma_const" => format!("test.{name}"),
        "max_support" | "lambda_sq" | "c3" => format!("solver.{name}"),
        "rho_bar" | "b_amp" | "h_prob" => "signal.rho".into(),
        "radius" => "signal.ball_radius".into(),
        "k" | "amplitude" | "rho" | "spike" | "c" => format!("signal.{name}"),
        other => format!("design.{other}"),
    };
    key
}
