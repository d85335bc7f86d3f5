//! Reduced-rank estimation for perturbed, ill-conditioned stochastic linear
//! models `y = Hx + sqrt(eps) * n` with white signal and noise.
//!
//! The crate builds the four classical linear estimators (MMSE / Wiener,
//! reduced-rank MMSE, truncated SVD, ridge) from a perturbed array response
//! matrix, evaluates their exact mean-square error against the true model,
//! and certifies, through closed-form expressions and singular value/vector
//! perturbation bounds, when rank reduction beats the full MMSE estimator.
//!
//! Modules map onto the pipeline:
//!
//! * [`model`]: the stochastic linear model, SVD plumbing, SNR, and the
//!   separation/ill-conditioning classification of a (model, perturbation)
//!   pair;
//! * [`estimators`]: construction and application of the estimator matrices;
//! * [`mse`]: the exact MSE functional, every closed-form MSE expression,
//!   and the per-index gain/loss landscape;
//! * [`bounds`]: singular value/vector perturbation machinery and the
//!   robustness certificates;
//! * [`ensembles`]: Gaussian random-matrix scenario generation, analytic
//!   tail formulas, and the Monte Carlo MSE oracle;
//! * [`json`]: the wire schemas used by the CLI.
//!
//! Everything is pure and deterministic: all randomness flows through
//! explicitly seeded generators.

pub mod bounds;
pub mod ensembles;
pub mod estimators;
pub mod json;
pub mod matrix;
pub mod model;
pub mod mse;

pub use bounds::{CertificateReport, SeparationData, VerdictAl};
pub use ensembles::{McResult, Scenario, ScenarioConfig};
pub use estimators::{EstimatorKind, EstimatorMatrix};
pub use matrix::Matrix;
pub use model::{LinearModel, PerturbedPair, SvdTriple};
pub use mse::{EstimatorFamily, MseBreakdown, PositivityRegions};
