//! Standard, warm-start and classically preprocessed QAOA on
//! budget-constrained portfolio QUBOs, with exact statevector simulation and
//! brute-force scoring oracles.

pub mod bits;
pub mod error;
pub mod experiment;
pub mod instance_lab;
pub mod metrics;
pub mod nelder_mead;
pub mod portfolio;
pub mod preprocessing;
pub mod qaoa;
pub mod relaxation;
pub mod seeding;
pub mod statevector;
pub mod verify;

pub use error::{Error, Result};
pub use instance_lab::{appendix_instance, DeviationMeasure, InstanceEnsemble};
pub use metrics::FeasibleSpectrum;
pub use portfolio::{PortfolioInstance, QuboProblem};
pub use preprocessing::{ReducedProblem, RoundingBounds};
pub use qaoa::{AnsatzSpec, ExpectationMode, Mixer, OptimizationResult, OptimizerConfig};
pub use relaxation::RelaxedSolution;
pub use statevector::{DiagonalCost, Histogram, Statevector};
