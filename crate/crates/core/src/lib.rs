//! Covariance estimation with a KL-divergence prior and l1 penalties for
//! predicting appearing (positive), disappearing (negative) and mixed links
//! in Gaussian graphical models.
//!
//! Node labels in supports, pairs and files are 1-based. Matrix accessors
//! are 0-based.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod ggm;
pub mod io;
pub mod predict;
pub mod solver;
pub mod symmat;
#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, GammaPoint, PenaltyKind, Scenario, SweepRow, SweepSettings, SweepSummary};
pub use ggm::{GaussianModel, ObservationSet, ScenarioSpec};
pub use predict::{PredictionReport, ScoreMatrix, ScoreVariant};
pub use solver::{solve, solve_known_support, PenaltySpec, SolveResult, SolverConfig, Termination};
pub use symmat::{Cholesky, Pair, SupportPattern, SymmetricMatrix};
