//! Distribution-function estimation for the random effects: Lagrange
//! interpolation of the empirical CDF at Chebyshev-Gauss nodes, a Gaussian
//! kernel baseline, support transforms, and cross-validated order selection.

mod chebyshev;
mod transform;

pub use chebyshev::{chebyshev_t, lebesgue_bound, lebesgue_constant, ChebyshevGrid, LEBESGUE_GRID};
pub use transform::SupportTransform;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats::{compensated_sum, normal_cdf, sample_sd};

/// Points of the integration grid used by the cross-validation score.
pub const CV_GRID: usize = 512;
pub const DEFAULT_FOLDS: usize = 5;

pub fn default_m_grid() -> Vec<usize> {
    (2..=30).collect()
}

/// Sorted sample with `F_N(y) = #{x_i <= y} / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = samples.iter().find(|x| x.is_nan()) {
            return Err(Error::Domain {
                value: bad,
                domain: "non-NaN samples",
            });
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= y) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(samples: &[f64], y: f64) -> Result<f64> {
    Ok(EmpiricalCdf::new(samples)?.eval(y))
}

/// Lagrange-interpolated CDF on `[-1, 1]` (the transformed scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimate {
    pub grid: ChebyshevGrid,
    pub node_values: Vec<f64>,
    pub transform: SupportTransform,
    /// Clip evaluations to `[0, 1]`. Off by default: the raw polynomial is the estimator.
    #[serde(default)]
    pub clip: bool,
}

impl CdfEstimate {
    pub fn order(&self) -> usize {
        self.grid.order()
    }

    /// Evaluates the interpolant at `x` on the transformed scale.
    pub fn eval(&self, x: f64) -> f64 {
        let v = self.grid.interpolate(&self.node_values, x);
        if self.clip {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    /// Evaluates at a point `z` of the original effect scale.
    pub fn eval_original(&self, z: f64) -> f64 {
        self.eval(self.transform.apply_saturating(z))
    }

    pub fn with_clip(mut self, clip: bool) -> Self {
        self.clip = clip;
        self
    }
}

/// Interpolant with prescribed node values (e.g. a known CDF at the nodes).
pub fn interpolate_cdf(m: usize, f: impl Fn(f64) -> f64, transform: SupportTransform) -> Result<CdfEstimate> {
    let grid = ChebyshevGrid::new(m)?;
    let node_values = grid.nodes().iter().map(|&x| f(x)).collect();
    Ok(CdfEstimate {
        grid,
        node_values,
        transform,
        clip: false,
    })
}

/// Maps effect estimates onto `[-1, 1]`, saturating points outside the support.
pub fn transform_sample(effects: &[f64], transform: &SupportTransform) -> Vec<f64> {
    effects.iter().map(|&z| transform.apply_saturating(z)).collect()
}

/// Fits the order-`m` estimator to effect estimates on their original scale.
pub fn fit_lagrange_cdf(effects: &[f64], m: usize, transform: SupportTransform) -> Result<CdfEstimate> {
    transform.validate()?;
    let ecdf = EmpiricalCdf::new(&transform_sample(effects, &transform))?;
    fit_transformed(&ecdf, m, transform)
}

fn fit_transformed(ecdf: &EmpiricalCdf, m: usize, transform: SupportTransform) -> Result<CdfEstimate> {
    interpolate_cdf(m, |x| ecdf.eval(x), transform)
}

/// Gaussian-kernel distribution function estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCdf {
    sample: Vec<f64>,
    bandwidth: f64,
}

impl KernelCdf {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let inv = 1.0 / self.bandwidth;
        compensated_sum(self.sample.iter().map(|&s| normal_cdf((x - s) * inv))) / self.sample.len() as f64
    }
}

pub fn fit_kernel_cdf(samples: &[f64], bandwidth: f64) -> Result<KernelCdf> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(KernelCdf {
        sample: samples.to_vec(),
        bandwidth,
    })
}

/// `1.06 s N^{-1/5}`
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let b = 1.06 * sample_sd(samples) * (samples.len() as f64).powf(-0.2);
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidBandwidth(b));
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthRule {
    #[default]
    Silverman,
    Fixed {
        value: f64,
    },
}

impl BandwidthRule {
    pub fn bandwidth(&self, samples: &[f64]) -> Result<f64> {
        match *self {
            BandwidthRule::Silverman => silverman_bandwidth(samples),
            BandwidthRule::Fixed { value } if value > 0.0 && value.is_finite() => Ok(value),
            BandwidthRule::Fixed { value } => Err(Error::InvalidBandwidth(value)),
        }
    }
}

fn cv_grid() -> impl Iterator<Item = f64> {
    let w = 2.0 / CV_GRID as f64;
    (0..CV_GRID).map(move |i| -1.0 + (i as f64 + 0.5) * w)
}

/// Cross-validation scores: mean over folds of the squared distance between
/// the training-fold fit and the held-out empirical CDF, integrated over
/// [`CV_GRID`] midpoints of `[-1, 1]`. `samples` are on the transformed scale.
pub fn cv_scores(samples: &[f64], m_grid: &[usize], folds: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    if m_grid.is_empty() {
        return Err(Error::InsufficientData("m grid is empty".into()));
    }
    if folds < 2 {
        return Err(Error::InsufficientData(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if samples.len() < folds {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill {folds} folds",
            samples.len()
        )));
    }
    if let Some(&m) = m_grid.iter().find(|&&m| m == 0) {
        return Err(Error::InvalidOrder(m));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut seed::rng_for(seed, seed::stream::CROSS_VALIDATION, 0));

    let xs: Vec<f64> = cv_grid().collect();
    let dx = 2.0 / CV_GRID as f64;
    let grids: Vec<ChebyshevGrid> = m_grid.iter().map(|&m| ChebyshevGrid::new(m)).collect::<Result<_>>()?;
    let mut totals = vec![0.0; m_grid.len()];

    for fold in 0..folds {
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (pos, &idx) in order.iter().enumerate() {
            if pos % folds == fold {
                held.push(samples[idx]);
            } else {
                train.push(samples[idx]);
            }
        }
        let train = EmpiricalCdf::new(&train)?;
        let held = EmpiricalCdf::new(&held)?;
        let held_on_grid: Vec<f64> = xs.iter().map(|&x| held.eval(x)).collect();
        for (total, grid) in totals.iter_mut().zip(&grids) {
            let values: Vec<f64> = grid.nodes().iter().map(|&x| train.eval(x)).collect();
            let ise = compensated_sum(xs.iter().zip(&held_on_grid).map(|(&x, &g)| {
                let d = grid.interpolate(&values, x) - g;
                d * d
            })) * dx;
            *total += ise;
        }
    }
    Ok(m_grid
        .iter()
        .zip(totals)
        .map(|(&m, t)| (m, t / folds as f64))
        .collect())
}

/// Lowest score wins; ties go to the smaller order.
pub fn argmin_order(scores: &[(usize, f64)]) -> Option<usize> {
    scores
        .iter()
        .copied()
        .filter(|(_, s)| !s.is_nan())
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(m, _)| m)
}

/// Order in `m_grid` minimizing the cross-validation score.
pub fn select_m_cv(samples: &[f64], m_grid: &[usize], folds: usize, seed: u64) -> Result<usize> {
    let scores = cv_scores(samples, m_grid, folds, seed)?;
    argmin_order(&scores).ok_or_else(|| Error::InsufficientData("all cross-validation scores are NaN".into()))
}
