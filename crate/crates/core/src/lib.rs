//! Sparse linear regression under Gaussian noise: an l0-penalized estimator,
//! tests of the sparsity level, and honest confidence balls for the
//! coefficient vector, together with the Monte Carlo harness used to check
//! their coverage, diameter and power.
//!
//! ```
//! use sparse_confset::{
//!     generate_sparse_signal, l0_pls, sample_model, AmplitudeProfile, DesignSpec, SolverConfig,
//! };
//!
//! let design = DesignSpec::iid_gaussian(200, 50).unwrap();
//! let theta = generate_sparse_signal(50, 3, AmplitudeProfile::Constant(1.0), 7).unwrap();
//! let sample = sample_model(&design, &theta, 11).unwrap();
//! let fit = l0_pls(&sample, &SolverConfig::greedy(3.0, 10)).unwrap();
//! assert_eq!(fit.support.len(), fit.k_hat);
//! ```

pub mod confset;
pub mod dist;
mod error;
pub mod estimate;
pub mod io;
pub mod mc;
pub mod seed;
pub mod synth;
pub mod testing;

mod linalg;

pub use confset::{
    contains, diameter_sq, sample_split_cs, two_radius_cs, BallConfidenceSet, Branch, Construction,
    CsConfig, SplitRule,
};
pub use error::{Error, Result};
pub use estimate::{
    l0_pls, select_lambda, sparse_ls_min_residual, PenalizedFit, Penalty, SolverConfig, SolverMode,
};
pub use linalg::binomial;
pub use mc::{
    run_boundary_scan, run_experiment, Alternative, BoundaryConfig, BoundaryRow, ExperimentConfig,
    Procedure, Report, SignalSource,
};
pub use synth::{
    distance_to_sparse, generate_design, generate_separated_signal, generate_sparse_signal,
    sample_model, sample_prior, AmplitudeProfile, DesignKind, DesignSpec, LinearSample, PriorSpec,
    SignalSpec,
};
pub use testing::{
    estimator_distance_test, residual_min_test, run_test, u_stat_min_test, TestConfig, TestKind,
    TestOutcome, ThresholdMode,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/estimator.md")]
    struct Estimator;
    #[doc = include_str!("../../../book/src/testing.md")]
    struct Testing;
    #[doc = include_str!("../../../book/src/confsets.md")]
    struct Confsets;
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    struct MonteCarlo;
}
