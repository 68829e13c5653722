//! Minimum density power divergence estimation for fixed-design regression,
//! with asymptotic breakdown bounds and contamination experiments.

pub mod breakdown;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod functional;
pub mod models;
pub mod optim;
pub mod quad;
pub mod report;
pub mod seed;
pub mod simulation;
pub mod special;

pub use breakdown::{BoundProblem, BoundRow, BreakdownPoint, SweepRow, SweepTable};
pub use divergence::{DpdConfig, UnivariateDensity};
pub use error::{Error, Result};
pub use estimation::{FitResult, OptimizerConfig};
pub use functional::{
    ContaminationRule, ContaminationScheme, FunctionalResult, IntegrationMode, Population,
};
pub use models::{Dataset, DesignMatrix, Link, MeanFunction, Model, ObservationFamily};
pub use simulation::{CellSummary, SimulationPlan};
