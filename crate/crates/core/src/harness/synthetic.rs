//! Synthetic trajectories: a base trajectory plus independent per-time
//! Gaussian noise, with a smaller noise scale on the training side.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ingest_trajectories, HarnessError};
use crate::scalar::Scalar;
use crate::stl::Trajectory;

/// `amplitude * cos(2 pi tau / period + phase)` added to one state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub component: usize,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSource {
    /// Per-component offsets plus sinusoids.
    Waveform {
        offsets: Vec<f64>,
        sinusoids: Vec<Sinusoid>,
    },
    /// First trajectory of a trajectories file.
    File { path: PathBuf },
}

impl BaseSource {
    /// Smooth stand-in for a descending-then-recovering altitude profile:
    /// `300 + 230 cos(2 pi tau / 240)`, minimum about 87.5 at `tau = 105`.
    pub fn altitude_surrogate() -> Self {
        Self::Waveform {
            offsets: vec![300.0],
            sinusoids: vec![Sinusoid {
                component: 0,
                amplitude: 230.0,
                period: 240.0,
                phase: 0.0,
            }],
        }
    }
}

/// Which distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Training / calibration distribution (noise `sigma_train`).
    Train,
    /// Shifted test distribution (noise `sigma_test`).
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub base: BaseSource,
    /// Number of states per trajectory.
    pub length: usize,
    pub sigma_train: f64,
    pub sigma_test: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Altitude surrogate with noise 3 (train) and 3.5 (test), 106 states.
    pub fn running_example(seed: u64) -> Self {
        Self {
            base: BaseSource::altitude_surrogate(),
            length: 106,
            sigma_train: 3.0,
            sigma_test: 3.5,
            seed,
        }
    }

    pub fn sigma(&self, side: Side) -> f64 {
        match side {
            Side::Train => self.sigma_train,
            Side::Test => self.sigma_test,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        for (name, v) in [("sigma_train", self.sigma_train), ("sigma_test", self.sigma_test)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.length == 0 {
            return Err(HarnessError::Config("length must be positive".into()));
        }
        Ok(())
    }

    /// The noiseless base trajectory `x_c`, truncated to `length`.
    pub fn base_trajectory<T: Scalar>(&self) -> Result<Trajectory<T>, HarnessError> {
        self.validate()?;
        match &self.base {
            BaseSource::Waveform { offsets, sinusoids } => {
                if offsets.is_empty() {
                    return Err(HarnessError::Config("waveform needs at least one offset".into()));
                }
                if let Some(s) = sinusoids.iter().find(|s| s.component >= offsets.len() || s.period == 0.0) {
                    return Err(HarnessError::Config(format!(
                        "sinusoid on component {} with period {} is invalid for {} components",
                        s.component,
                        s.period,
                        offsets.len()
                    )));
                }
                let states = (0..self.length)
                    .map(|tau| {
                        let mut x = offsets.clone();
                        for s in sinusoids {
                            x[s.component] += s.amplitude * (2.0 * PI * tau as f64 / s.period + s.phase).cos();
                        }
                        x.into_iter().map(T::lit).collect()
                    })
                    .collect();
                Ok(Trajectory::new(states)?)
            }
            BaseSource::File { path } => {
                let all = ingest_trajectories::<T>(path, None)?;
                let base = all.into_iter().next().ok_or_else(|| {
                    HarnessError::Config(format!("{}: no trajectories", path.display()))
                })?;
                if base.len() < self.length {
                    return Err(HarnessError::Config(format!(
                        "base trajectory has {} states, length {} requested",
                        base.len(),
                        self.length
                    )));
                }
                Ok(base.prefix(self.length))
            }
        }
    }
}

/// A generator with its own stream, so that independent pieces of an
/// experiment do not depend on the order in which they are drawn.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` trajectories `base + N(0, sigma^2)` per time and component,
/// with ids `"{prefix}{i}"`.
pub fn sample_around<T: Scalar, R: Rng>(
    base: &Trajectory<T>,
    sigma: f64,
    count: usize,
    prefix: &str,
    rng: &mut R,
) -> Vec<Trajectory<T>> {
    (0..count)
        .map(|i| {
            let data = base
                .as_flat()
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(rng);
                    c + T::lit(sigma * z)
                })
                .collect();
            Trajectory::from_flat(base.dim(), data)
                .expect("finite base and noise")
                .with_id(format!("{prefix}{i}"))
        })
        .collect()
}

/// `count` i.i.d. trajectories from one side, deterministic given
/// `spec.seed`.
pub fn generate_synthetic<T: Scalar>(
    spec: &SyntheticSpec,
    side: Side,
    count: usize,
) -> Result<Vec<Trajectory<T>>, HarnessError> {
    let base = spec.base_trajectory::<T>()?;
    let stream = match side {
        Side::Train => 0,
        Side::Test => 1,
    };
    let mut rng = stream_rng(spec.seed, stream);
    let prefix = match side {
        Side::Train => "train-",
        Side::Test => "test-",
    };
    Ok(sample_around(&base, spec.sigma(side), count, prefix, &mut rng))
}
