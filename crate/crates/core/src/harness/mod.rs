//! Synthetic data, trajectory files, experiment configuration and coverage
//! studies.

mod config;
mod experiment;
mod ingest;
mod synthetic;

use thiserror::Error;

pub use config::{DivergenceKind, EpsilonSetting, EstimateTag, ExperimentConfig};
pub use experiment::{
    estimate_score_shift, run_coverage_experiment, run_score_coverage, write_report_csvs, CoverageReport,
    ScoreCoverageReport, ScoreExperiment, ScoreLaw, TrialReport,
};
pub use ingest::{
    ingest_trajectories, read_trajectories_csv, read_trajectories_json, write_trajectories,
    write_trajectories_csv, write_trajectories_json, TrajectoryFormat,
};
pub use synthetic::{generate_synthetic, sample_around, stream_rng, BaseSource, Side, Sinusoid, SyntheticSpec};

use crate::conformal::{ConformalError, DivergenceError, ScoreIoError};
use crate::predictors::PredictorError;
use crate::rprv::RprvError;
use crate::shift::ShiftError;
use crate::stl::{EvalError, ParseError, TrajectoryError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Schema(String),
    #[error("line {line}, column {column}: '{text}' is not a number")]
    Cell { line: usize, column: String, text: String },
    #[error("duplicate row for trajectory '{id}' at time index {time}")]
    Duplicate { id: String, time: usize },
    #[error("trajectory '{id}' has {len} states of dimension {dim}; expected {expected_len} of dimension {expected_dim}")]
    Ragged {
        id: String,
        len: usize,
        dim: usize,
        expected_len: usize,
        expected_dim: usize,
    },
    #[error("formula: {0}")]
    Formula(#[from] ParseError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Rprv(#[from] RprvError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Scores(#[from] ScoreIoError),
}
