//! Experiment configuration as a flat TOML file of `key = value` lines.
//!
//! Every key is optional; omitted keys take the running-example value.
//!
//! ```text
//! method = "direct"              # direct | variant1 | variant2 | adaptive-direct
//! delta = 0.2
//! epsilon = "estimate"           # or a number
//! divergence = "tv"              # tv | kl | chi2
//! calibration = 2000             # K per trial
//! tests = 100                    # test trajectories per trial
//! trials = 50
//! t = 100
//! tau0 = 0
//! formula = "G[0,105] (x0 >= 60)"
//! predictor = "ar:3"             # hold-last | constant-velocity | ar:<p> | external:<path>
//! training = 500                 # predictor training trajectories
//! aux = 500                      # normalization / adaptive-weight trajectories
//! estimation_samples = 2000      # per side, for epsilon = "estimate"
//! seed = 7
//! sigma_train = 3.0
//! sigma_test = 3.5
//! length = 106
//! base = "waveform"              # or "file:<path>"
//! offsets = [300.0]
//! sinusoids = [[0, 230.0, 240.0, 0.0]]   # component, amplitude, period, phase
//! norm = "l2"                    # l2 | linf
//! knn_k = 10
//! knn_window = 10
//! histogram_bins = 30
//! downsample = 1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::{BaseSource, Sinusoid, SyntheticSpec};
use super::HarnessError;
use crate::conformal::FDivergence;
use crate::predictors::PredictorKind;
use crate::rprv::{Method, StateNorm};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateTag {
    Estimate,
}

/// A fixed divergence budget or one estimated from score samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSetting {
    Fixed(f64),
    Estimate(EstimateTag),
}

impl std::str::FromStr for EpsilonSetting {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "estimate" => Ok(Self::Estimate(EstimateTag::Estimate)),
            v => v
                .parse()
                .map(Self::Fixed)
                .map_err(|_| HarnessError::Config(format!("epsilon must be a number or 'estimate', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceKind {
    Tv,
    Kl,
    Chi2,
}

impl DivergenceKind {
    pub fn build<T: Scalar>(self, epsilon: T) -> Result<FDivergence<T>, HarnessError> {
        Ok(match self {
            Self::Tv => FDivergence::total_variation(epsilon)?,
            Self::Kl => FDivergence::kullback_leibler(epsilon)?,
            Self::Chi2 => FDivergence::chi_squared(epsilon)?,
        })
    }
}

impl std::str::FromStr for DivergenceKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "tv" => Ok(Self::Tv),
            "kl" => Ok(Self::Kl),
            "chi2" => Ok(Self::Chi2),
            _ => Err(HarnessError::Config(format!("unknown divergence '{s}' (tv, kl, chi2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub delta: f64,
    pub epsilon: EpsilonSetting,
    pub divergence: DivergenceKind,
    pub calibration: usize,
    pub tests: usize,
    pub trials: usize,
    pub t: usize,
    pub tau0: usize,
    pub formula: String,
    pub predictor: String,
    pub training: usize,
    pub aux: usize,
    pub estimation_samples: usize,
    pub seed: u64,
    pub sigma_train: f64,
    pub sigma_test: f64,
    pub length: usize,
    pub base: String,
    pub offsets: Vec<f64>,
    pub sinusoids: Vec<[f64; 4]>,
    pub norm: StateNorm,
    pub knn_k: usize,
    pub knn_window: usize,
    pub histogram_bins: usize,
    pub downsample: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Direct,
            delta: 0.2,
            epsilon: EpsilonSetting::Estimate(EstimateTag::Estimate),
            divergence: DivergenceKind::Tv,
            calibration: 2000,
            tests: 100,
            trials: 50,
            t: 100,
            tau0: 0,
            formula: "G[0,105] (x0 >= 60)".into(),
            predictor: "ar:3".into(),
            training: 500,
            aux: 500,
            estimation_samples: 2000,
            seed: 7,
            sigma_train: 3.0,
            sigma_test: 3.5,
            length: 106,
            base: "waveform".into(),
            offsets: vec![300.0],
            sinusoids: vec![[0.0, 230.0, 240.0, 0.0]],
            norm: StateNorm::L2,
            knn_k: crate::rprv::DEFAULT_K,
            knn_window: crate::rprv::DEFAULT_WINDOW,
            histogram_bins: 30,
            downsample: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if let EpsilonSetting::Fixed(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("epsilon must be >= 0, got {e}"));
            }
        }
        if matches!(self.epsilon, EpsilonSetting::Estimate(_)) && self.divergence != DivergenceKind::Tv {
            return bad("epsilon = \"estimate\" yields a total-variation budget; use divergence = \"tv\"".into());
        }
        if matches!(self.epsilon, EpsilonSetting::Estimate(_)) && self.estimation_samples < 2 {
            return bad("estimation_samples must be at least 2".into());
        }
        for (k, v) in [
            ("calibration", self.calibration),
            ("tests", self.tests),
            ("trials", self.trials),
            ("histogram_bins", self.histogram_bins),
            ("downsample", self.downsample),
        ] {
            if v == 0 {
                return bad(format!("{k} must be at least 1"));
            }
        }
        self.predictor_kind()?;
        Ok(())
    }

    pub fn predictor_kind(&self) -> Result<PredictorKind, HarnessError> {
        Ok(self.predictor.parse()?)
    }

    /// Data-generating spec for the synthetic surrogate.
    pub fn synthetic(&self) -> Result<SyntheticSpec, HarnessError> {
        let base = if self.base == "waveform" {
            let sinusoids = self
                .sinusoids
                .iter()
                .map(|&[c, amplitude, period, phase]| {
                    if c < 0.0 || c.fract() != 0.0 {
                        return Err(HarnessError::Config(format!("sinusoid component {c} is not an index")));
                    }
                    Ok(Sinusoid {
                        component: c as usize,
                        amplitude,
                        period,
                        phase,
                    })
                })
                .collect::<Result<_, _>>()?;
            BaseSource::Waveform {
                offsets: self.offsets.clone(),
                sinusoids,
            }
        } else if let Some(p) = self.base.strip_prefix("file:") {
            BaseSource::File {
                path: PathBuf::from(p),
            }
        } else {
            return Err(HarnessError::Config(format!(
                "base must be \"waveform\" or \"file:<path>\", got '{}'",
                self.base
            )));
        };
        Ok(SyntheticSpec {
            base,
            length: self.length,
            sigma_train: self.sigma_train,
            sigma_test: self.sigma_test,
            seed: self.seed,
        })
    }
}
