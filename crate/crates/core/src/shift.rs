//! Total-variation shift between score distributions, estimated from
//! samples with Gaussian kernel density estimates.
//!
//! Estimation serves validation: in deployment `epsilon` is a tuning
//! parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::{Provenance, ScoreSet};
use crate::scalar::Scalar;

pub const BANDWIDTH_FLOOR: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 10_000;
pub const DEFAULT_SPAN_BANDWIDTHS: f64 = 5.0;
/// Kernels are truncated beyond this many bandwidths (`phi(8) < 1e-14`).
const KERNEL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShiftError {
    #[error("density estimation needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("integration grid needs at least 2 points and a nonnegative span")]
    InvalidGrid,
    #[error("no score pairs to compare")]
    NoPairs,
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel<T> {
    /// Sorted sample points.
    samples: Vec<T>,
    bandwidth: T,
}

/// Silverman's rule `1.06 * sd * m^(-1/5)`, floored.
pub fn silverman_bandwidth<T: Scalar>(samples: &[T]) -> T {
    let m = T::from_count(samples.len());
    let mean = samples.iter().copied().sum::<T>() / m;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (m - T::one());
    let bw = T::lit(1.06) * var.sqrt() * m.powf(T::lit(-0.2));
    if bw.is_finite() {
        bw.max(T::lit(BANDWIDTH_FLOOR))
    } else {
        T::lit(BANDWIDTH_FLOOR)
    }
}

/// Fits a density; `bandwidth = None` selects Silverman's rule.
pub fn kde_density<T: Scalar>(samples: &[T], bandwidth: Option<T>) -> Result<DensityModel<T>, ShiftError> {
    if samples.len() < 2 {
        return Err(ShiftError::TooFewSamples(samples.len()));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(ShiftError::NonFinite(i));
    }
    let bandwidth = match bandwidth {
        Some(b) if b > T::zero() && b.is_finite() => b,
        Some(b) => return Err(ShiftError::InvalidBandwidth(b.to_f64_lossy())),
        None => silverman_bandwidth(samples),
    };
    let mut samples = samples.to_vec();
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    Ok(DensityModel { samples, bandwidth })
}

impl<T: Scalar> DensityModel<T> {
    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> T {
        self.samples[0]
    }

    pub fn max(&self) -> T {
        self.samples[self.samples.len() - 1]
    }

    /// Density at `x`.
    pub fn eval(&self, x: T) -> T {
        let h = self.bandwidth;
        let reach = h * T::lit(KERNEL_CUTOFF);
        let lo = self.samples.partition_point(|&s| s < x - reach);
        let hi = self.samples.partition_point(|&s| s <= x + reach);
        let half = T::lit(0.5);
        let sum: T = self.samples[lo..hi]
            .iter()
            .map(|&s| {
                let z = (x - s) / h;
                (-half * z * z).exp()
            })
            .sum();
        let norm = T::from_count(self.samples.len()) * h * T::lit((2.0 * std::f64::consts::PI).sqrt());
        sum / norm
    }
}

/// Trapezoid grid for the TV integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvGrid {
    pub points: usize,
    /// The grid extends this many (larger) bandwidths beyond the samples.
    pub span_bandwidths: f64,
}

impl Default for TvGrid {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            span_bandwidths: DEFAULT_SPAN_BANDWIDTHS,
        }
    }
}

/// `1/2 * integral |p - q|` for two fitted densities, clipped to `[0, 1]`.
pub fn tv_between<T: Scalar>(p: &DensityModel<T>, q: &DensityModel<T>, grid: TvGrid) -> Result<T, ShiftError> {
    if grid.points < 2 || grid.span_bandwidths.is_nan() || grid.span_bandwidths < 0.0 {
        return Err(ShiftError::InvalidGrid);
    }
    let pad = T::lit(grid.span_bandwidths) * p.bandwidth.max(q.bandwidth);
    let lo = p.min().min(q.min()) - pad;
    let hi = p.max().max(q.max()) + pad;
    let step = (hi - lo) / T::from_count(grid.points - 1);
    let diffs: Vec<T> = (0..grid.points)
        .into_par_iter()
        .map(|i| {
            let x = lo + step * T::from_count(i);
            (p.eval(x) - q.eval(x)).abs()
        })
        .collect();
    let interior: T = diffs[1..grid.points - 1].iter().copied().sum();
    let integral = step * (interior + T::lit(0.5) * (diffs[0] + diffs[grid.points - 1]));
    Ok((T::lit(0.5) * integral).max(T::zero()).min(T::one()))
}

/// TV estimate between two samples with Silverman bandwidths and the default grid.
pub fn tv_estimate<T: Scalar>(a: &[T], b: &[T]) -> Result<T, ShiftError> {
    tv_estimate_with(a, b, TvGrid::default())
}

pub fn tv_estimate_with<T: Scalar>(a: &[T], b: &[T], grid: TvGrid) -> Result<T, ShiftError> {
    tv_between(&kde_density(a, None)?, &kde_density(b, None)?, grid)
}

/// One compared pair of score sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftComponent<T> {
    pub provenance: Provenance,
    pub epsilon: T,
    pub calibration_size: usize,
    pub test_size: usize,
    pub calibration_bandwidth: T,
    pub test_bandwidth: T,
}

/// Per-score shift estimates combined by their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate<T> {
    pub components: Vec<ShiftComponent<T>>,
    pub epsilon: T,
    pub grid: TvGrid,
}

/// Estimates `epsilon = max_i TV(calibration_i, test_i)`.
pub fn estimate_epsilon<T: Scalar>(
    pairs: &[(ScoreSet<T>, ScoreSet<T>)],
    grid: TvGrid,
) -> Result<ShiftEstimate<T>, ShiftError> {
    if pairs.is_empty() {
        return Err(ShiftError::NoPairs);
    }
    let components = pairs
        .iter()
        .map(|(cal, test)| {
            let p = kde_density(cal.values(), None)?;
            let q = kde_density(test.values(), None)?;
            Ok(ShiftComponent {
                provenance: cal.provenance(),
                epsilon: tv_between(&p, &q, grid)?,
                calibration_size: cal.len(),
                test_size: test.len(),
                calibration_bandwidth: p.bandwidth(),
                test_bandwidth: q.bandwidth(),
            })
        })
        .collect::<Result<Vec<_>, ShiftError>>()?;
    let epsilon = components.iter().map(|c| c.epsilon).fold(T::zero(), T::max);
    Ok(ShiftEstimate {
        components,
        epsilon,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); mean + z })
            .collect::<Vec<f64>>()
    }

    #[test]
    fn density_normalizes_and_matches_normal_peak() {
        let s = normal(10_000, 0.0, 1);
        let d = kde_density(&s, None).unwrap();
        let step = 0.01;
        let total: f64 = (-1000..=1000).map(|i| d.eval(i as f64 * step) * step).sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        assert!((d.eval(0.0) - 0.398_942).abs() < 0.02);
    }

    #[test]
    fn symmetric_samples_give_symmetric_density() {
        let s = [-3.0f64, -1.0, -0.5, 0.5, 1.0, 3.0];
        let d = kde_density(&s, None).unwrap();
        for x in [0.1, 0.7, 2.0, 4.5] {
            assert!((d.eval(x) - d.eval(-x)).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(kde_density(&[1.0], None), Err(ShiftError::TooFewSamples(1)));
        let d = kde_density(&[2.0, 2.0, 2.0], None).unwrap();
        assert_eq!(d.bandwidth(), BANDWIDTH_FLOOR);
        assert!(kde_density(&[1.0, 2.0], Some(0.0)).is_err());
    }

    #[test]
    fn tv_extremes() {
        let a = normal(2_000, 0.0, 2);
        assert!(tv_estimate(&a, &a).unwrap() <= 0.01);
        let b: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        assert!(tv_estimate(&a, &b).unwrap() >= 0.99);
    }

    #[test]
    fn combined_is_max() {
        let a = ScoreSet::new(normal(500, 0.0, 3), Provenance::Direct).unwrap();
        let b = ScoreSet::new(normal(500, 0.5, 4), Provenance::Direct).unwrap();
        let one = estimate_epsilon(&[(a.clone(), b.clone())], TvGrid::default()).unwrap();
        assert_eq!(one.epsilon, one.components[0].epsilon);
        let two = estimate_epsilon(&[(a.clone(), b), (a.clone(), a)], TvGrid::default()).unwrap();
        assert_eq!(two.epsilon, one.epsilon);
        assert!(matches!(
            estimate_epsilon::<f64>(&[], TvGrid::default()),
            Err(ShiftError::NoPairs)
        ));
    }
}
