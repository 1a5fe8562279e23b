//! Robust predictive runtime verification of bounded STL specifications.
//!
//! Given calibration trajectories from a training distribution and an
//! observed prefix of a test trajectory whose distribution may have drifted
//! by at most `epsilon` in an f-divergence, the monitors in [`rprv`] return a
//! lower bound `rho*` on the robustness of the full trajectory that holds
//! with probability at least `1 - delta`.
//!
//! Numeric code is generic over [`Scalar`] (`f32` / `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod conformal;
pub mod harness;
pub mod predictors;
pub mod rprv;
pub mod scalar;
pub mod serde_ext;
pub mod shift;
pub mod stl;

pub use scalar::Scalar;

pub type Trajectory = stl::Trajectory<f64>;
pub type Formula = stl::Formula<f64>;
pub type Predicate = stl::Predicate<f64>;
pub type PredicateBoundMap = stl::PredicateBoundMap<f64>;
pub type ScoreSet = conformal::ScoreSet<f64>;
pub type FDivergence = conformal::FDivergence<f64>;
pub type PredictionRegion = conformal::PredictionRegion<f64>;
pub type PredictorModel = predictors::PredictorModel<f64>;
pub type PredictedTrajectory = predictors::PredictedTrajectory<f64>;
pub type VerificationOutcome = rprv::VerificationOutcome<f64>;
pub type NormalizationConstants = rprv::NormalizationConstants<f64>;
pub type DensityModel = shift::DensityModel<f64>;
pub type ShiftEstimate = shift::ShiftEstimate<f64>;

pub type Trajectory32 = stl::Trajectory<f32>;
pub type Formula32 = stl::Formula<f32>;
pub type ScoreSet32 = conformal::ScoreSet<f32>;
