//! The log-price model `Y_t = theta_i t + sigma B_t + gamma B^H_t` and panel
//! generation for `N` independent subjects.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, gamma::gamma_lr};

use crate::cdf::SupportTransform;
use crate::error::{Error, Result};
use crate::noise::{Backend, FgnSampler, FgnSpec};
use crate::seed;
use crate::stats::normal_cdf;

/// Increments stored beyond `n` so the look-ahead statistics stay in range.
pub const EXTRA_COLUMNS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub hurst: f64,
    /// `gamma^2`, weight of the fractional component.
    pub gamma_sq: f64,
    /// `sigma^2`, weight of the Brownian component.
    pub sigma_sq: f64,
    /// Observation step `h`.
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(hurst: f64, gamma_sq: f64, sigma_sq: f64, step: f64) -> Result<Self> {
        let p = Self {
            hurst,
            gamma_sq,
            sigma_sq,
            step,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters of the simulation study: `H = 0.7`, `gamma = 0.5`, `sigma = 0.2`, `h = 1`.
    pub fn study() -> Self {
        Self {
            hurst: 0.7,
            gamma_sq: 0.25,
            sigma_sq: 0.04,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::InvalidParams(format!("hurst must lie in (0,1), got {}", self.hurst)));
        }
        if !(self.gamma_sq >= 0.0 && self.gamma_sq.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma_sq must be >= 0, got {}", self.gamma_sq)));
        }
        if !(self.sigma_sq >= 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma_sq must be >= 0, got {}", self.sigma_sq)));
        }
        if self.gamma_sq == 0.0 && self.sigma_sq == 0.0 {
            return Err(Error::InvalidParams("gamma_sq and sigma_sq cannot both be zero".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

/// Distribution of the per-subject random effect `phi_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectsDistribution {
    Beta { alpha: f64, beta: f64 },
    /// Shape `k`, scale `theta`.
    Gamma { shape: f64, scale: f64 },
    Gaussian { mean: f64, variance: f64 },
    /// `w N(mean1, variance1) + (1 - w) N(mean2, variance2)`.
    GaussianMixture {
        weight: f64,
        mean1: f64,
        variance1: f64,
        mean2: f64,
        variance2: f64,
    },
    /// Every subject shares the same effect.
    PointMass { value: f64 },
}

impl Default for EffectsDistribution {
    fn default() -> Self {
        EffectsDistribution::Beta {
            alpha: 2.0,
            beta: 2.0,
        }
    }
}

impl EffectsDistribution {
    /// The four designs of the simulation study.
    pub fn study_designs() -> [EffectsDistribution; 4] {
        [
            EffectsDistribution::Beta { alpha: 2.0, beta: 2.0 },
            EffectsDistribution::Gamma { shape: 2.0, scale: 1.0 },
            EffectsDistribution::Gaussian { mean: 0.5, variance: 0.25 },
            EffectsDistribution::GaussianMixture {
                weight: 0.5,
                mean1: -2.0,
                variance1: 1.0,
                mean2: 3.0,
                variance2: 0.5,
            },
        ]
    }

    pub fn label(&self) -> String {
        match *self {
            EffectsDistribution::Beta { alpha, beta } => format!("Beta({alpha},{beta})"),
            EffectsDistribution::Gamma { shape, scale } => format!("Gamma({shape},{scale})"),
            EffectsDistribution::Gaussian { mean, variance } => format!("N({mean},{variance})"),
            EffectsDistribution::GaussianMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => format!(
                "{weight}N({mean1},{variance1})+{}N({mean2},{variance2})",
                1.0 - weight
            ),
            EffectsDistribution::PointMass { value } => format!("Delta({value})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistributionParams(msg));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            EffectsDistribution::Beta { alpha, beta } if !(pos(alpha) && pos(beta)) => {
                bad(format!("beta parameters must be positive, got ({alpha}, {beta})"))
            }
            EffectsDistribution::Gamma { shape, scale } if !(pos(shape) && pos(scale)) => {
                bad(format!("gamma parameters must be positive, got ({shape}, {scale})"))
            }
            EffectsDistribution::Gaussian { mean, variance } if !(pos(variance) && mean.is_finite()) => {
                bad(format!("gaussian needs finite mean and positive variance, got ({mean}, {variance})"))
            }
            EffectsDistribution::GaussianMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } if !((0.0..=1.0).contains(&weight)
                && pos(variance1)
                && pos(variance2)
                && mean1.is_finite()
                && mean2.is_finite()) =>
            {
                bad(format!("invalid mixture ({weight}, {mean1}, {variance1}, {mean2}, {variance2})"))
            }
            EffectsDistribution::PointMass { value } if !value.is_finite() => {
                bad(format!("point mass must be finite, got {value}"))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            EffectsDistribution::Beta { alpha, beta } => alpha / (alpha + beta),
            EffectsDistribution::Gamma { shape, scale } => shape * scale,
            EffectsDistribution::Gaussian { mean, .. } => mean,
            EffectsDistribution::GaussianMixture {
                weight,
                mean1,
                mean2,
                ..
            } => weight * mean1 + (1.0 - weight) * mean2,
            EffectsDistribution::PointMass { value } => value,
        }
    }

    /// Distribution function, closed form except for the regularized
    /// incomplete beta/gamma functions.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match *self {
            EffectsDistribution::Beta { alpha, beta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(alpha, beta, x)
                }
            }
            EffectsDistribution::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            EffectsDistribution::Gaussian { mean, variance } => {
                normal_cdf((x - mean) / variance.sqrt())
            }
            EffectsDistribution::GaussianMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => {
                weight * normal_cdf((x - mean1) / variance1.sqrt())
                    + (1.0 - weight) * normal_cdf((x - mean2) / variance2.sqrt())
            }
            EffectsDistribution::PointMass { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Transform to `[-1, 1]` matching the support of the distribution.
    pub fn natural_transform(&self) -> SupportTransform {
        match *self {
            EffectsDistribution::Beta { .. } => SupportTransform::Affine { lo: 0.0, hi: 1.0 },
            EffectsDistribution::Gamma { .. } => SupportTransform::PositiveHalfLine,
            EffectsDistribution::Gaussian { .. } | EffectsDistribution::GaussianMixture { .. } => {
                SupportTransform::RealLine
            }
            EffectsDistribution::PointMass { value } => SupportTransform::Affine {
                lo: value - 1.0,
                hi: value + 1.0,
            },
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EffectsDistribution::Beta { alpha, beta } => {
                Beta::new(alpha, beta).expect("validated").sample(rng)
            }
            EffectsDistribution::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("validated").sample(rng)
            }
            EffectsDistribution::Gaussian { mean, variance } => {
                Normal::new(mean, variance.sqrt()).expect("validated").sample(rng)
            }
            EffectsDistribution::GaussianMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => {
                let u: f64 = rng.random();
                let z: f64 = rng.sample(StandardNormal);
                if u < weight {
                    mean1 + variance1.sqrt() * z
                } else {
                    mean2 + variance2.sqrt() * z
                }
            }
            EffectsDistribution::PointMass { value } => value,
        }
    }
}

/// `count` i.i.d. draws of the random effect.
pub fn sample_effects(dist: &EffectsDistribution, count: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut rng = seed::rng_for(seed, seed::stream::EFFECTS, 0);
    Ok((0..count).map(|_| dist.sample_with(&mut rng)).collect())
}

/// Per-subject log-price increments, one row per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    increments: Vec<Vec<f64>>,
    /// `phi_i` when the panel was simulated.
    pub true_effects: Option<Vec<f64>>,
    pub params_truth: Option<ModelParams>,
    pub seed: Option<u64>,
    pub step: f64,
}

impl Panel {
    pub fn new(increments: Vec<Vec<f64>>, step: f64) -> Result<Self> {
        let cols = increments.first().map(Vec::len).ok_or_else(|| {
            Error::InsufficientData("a panel needs at least one subject".into())
        })?;
        if let Some((i, row)) = increments.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "subject {i} has {} increments, subject 0 has {cols}",
                row.len()
            )));
        }
        if cols < EXTRA_COLUMNS + 1 {
            return Err(Error::DimensionMismatch(format!(
                "a panel needs at least {} increments per subject, got {cols}",
                EXTRA_COLUMNS + 1
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
        }
        Ok(Self {
            increments,
            true_effects: None,
            params_truth: None,
            seed: None,
            step,
        })
    }

    pub fn subjects(&self) -> usize {
        self.increments.len()
    }

    /// Stored increments per subject (`n + 4` for simulated panels).
    pub fn columns(&self) -> usize {
        self.increments[0].len()
    }

    /// Largest `n` the moment statistics can use.
    pub fn max_observations(&self) -> usize {
        self.columns() - EXTRA_COLUMNS
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.increments[i]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.increments.iter().map(Vec::as_slice)
    }

    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be positive, got {step}")));
        }
        self.step = step;
        Ok(self)
    }

    /// Multiply every increment by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.increments {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Writes the `subject,k,dy` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "subject,k,dy")?;
        for (i, row) in self.increments.iter().enumerate() {
            for (k, dy) in row.iter().enumerate() {
                writeln!(w, "{i},{k},{dy:.16e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["subject", "k", "dy"] {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected header `subject,k,dy`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(Error::Parse {
                    line,
                    column: record.len().min(3) + 1,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let field = |c: usize| -> Result<&str> { Ok(&record[c]) };
            let subject: usize = field(0)?.parse().map_err(|e| Error::Parse {
                line,
                column: 1,
                message: format!("subject `{}`: {e}", &record[0]),
            })?;
            let k: usize = field(1)?.parse().map_err(|e| Error::Parse {
                line,
                column: 2,
                message: format!("k `{}`: {e}", &record[1]),
            })?;
            let dy: f64 = field(2)?.parse().map_err(|e| Error::Parse {
                line,
                column: 3,
                message: format!("dy `{}`: {e}", &record[2]),
            })?;
            if subject >= rows.len() {
                if subject != rows.len() {
                    return Err(Error::Parse {
                        line,
                        column: 1,
                        message: format!("subject {subject} out of order; expected {}", rows.len()),
                    });
                }
                rows.push(Vec::new());
            }
            let last = rows.len() - 1;
            let row = &mut rows[subject];
            if k != row.len() || subject != last {
                return Err(Error::Parse {
                    line,
                    column: 2,
                    message: format!("increment ({subject},{k}) out of order"),
                });
            }
            row.push(dy);
        }
        Panel::new(rows, 1.0)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PanelFormat {
    #[default]
    Csv,
}

/// Reads a panel written by [`save_panel`]. True effects are not part of the file.
pub fn load_panel(path: impl AsRef<Path>, format: PanelFormat) -> Result<Panel> {
    match format {
        PanelFormat::Csv => Panel::read_csv(std::fs::File::open(path)?),
    }
}

pub fn save_panel(panel: &Panel, path: impl AsRef<Path>, format: PanelFormat) -> Result<()> {
    match format {
        PanelFormat::Csv => panel.write_csv(std::fs::File::create(path)?),
    }
}

/// Reusable panel generator: the fGn factorization for `n + 4` increments is
/// built once and shared by every subject and replication.
#[derive(Debug, Clone)]
pub struct PanelSimulator {
    params: ModelParams,
    observations: usize,
    fgn: Option<FgnSampler>,
}

impl PanelSimulator {
    pub fn new(params: ModelParams, observations: usize, backend: Backend) -> Result<Self> {
        params.validate()?;
        if observations == 0 {
            return Err(Error::InsufficientData("n must be at least 1".into()));
        }
        let fgn = if params.gamma_sq > 0.0 {
            let spec = FgnSpec::new(params.hurst, params.step, observations + EXTRA_COLUMNS)?;
            Some(FgnSampler::new(spec, backend)?)
        } else {
            None
        };
        Ok(Self {
            params,
            observations,
            fgn,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Increments of one subject with drift `theta`, drawn from the streams
    /// keyed by `(seed, subject)`.
    pub fn subject_increments(&self, theta: f64, seed: u64, subject: u64) -> Vec<f64> {
        let len = self.observations + EXTRA_COLUMNS;
        let p = &self.params;
        let mut row = vec![theta * p.step; len];
        if p.sigma_sq > 0.0 {
            let scale = (p.sigma_sq * p.step).sqrt();
            let mut rng = seed::rng_for(seed, seed::stream::BROWNIAN, subject);
            for v in row.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += scale * z;
            }
        }
        if let Some(fgn) = &self.fgn {
            let gamma = p.gamma_sq.sqrt();
            let mut rng = seed::rng_for(seed, seed::stream::FRACTIONAL, subject);
            for (v, x) in row.iter_mut().zip(fgn.sample_with(&mut rng)) {
                *v += gamma * x;
            }
        }
        row
    }

    pub fn simulate(&self, dist: &EffectsDistribution, subjects: usize, seed: u64) -> Result<Panel> {
        if subjects == 0 {
            return Err(Error::InsufficientData("N must be at least 1".into()));
        }
        let effects = sample_effects(dist, subjects, seed)?;
        let half_sigma_sq = 0.5 * self.params.sigma_sq;
        let rows: Vec<Vec<f64>> = effects
            .par_iter()
            .enumerate()
            .map(|(i, &phi)| self.subject_increments(phi - half_sigma_sq, seed, i as u64))
            .collect();
        let mut panel = Panel::new(rows, self.params.step)?;
        panel.true_effects = Some(effects);
        panel.params_truth = Some(self.params);
        panel.seed = Some(seed);
        Ok(panel)
    }
}

/// Simulates `N` subjects with `n + 4` increments each; `theta_i = phi_i - sigma^2 / 2`.
pub fn simulate_panel(
    params: &ModelParams,
    dist: &EffectsDistribution,
    subjects: usize,
    observations: usize,
    seed: u64,
    backend: Backend,
) -> Result<Panel> {
    PanelSimulator::new(*params, observations, backend)?.simulate(dist, subjects, seed)
}

/// Price paths `X_t = exp(Y_t)` with `X_0 = 1`; one extra leading column.
pub fn panel_to_prices(panel: &Panel) -> Vec<Vec<f64>> {
    panel
        .rows()
        .map(|row| {
            let mut out = Vec::with_capacity(row.len() + 1);
            out.push(1.0);
            let mut y = crate::stats::CompensatedSum::new();
            for &dy in row {
                y.add(dy);
                out.push(y.value().exp());
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{compensated_sum, mean, sample_variance};
    use approx::assert_abs_diff_eq;

    #[test]
    fn effect_samples_match_moments() {
        let beta = sample_effects(&EffectsDistribution::default(), 100_000, 1).unwrap();
        assert!((mean(&beta) - 0.5).abs() < 0.01);

        let gauss = EffectsDistribution::Gaussian { mean: 0.5, variance: 0.25 };
        let g = sample_effects(&gauss, 100_000, 2).unwrap();
        assert!((sample_variance(&g) - 0.25).abs() < 0.02);

        let mix = EffectsDistribution::GaussianMixture {
            weight: 0.5,
            mean1: -2.0,
            variance1: 1.0,
            mean2: 3.0,
            variance2: 0.5,
        };
        let m = sample_effects(&mix, 100_000, 3).unwrap();
        assert!((mean(&m) - 0.5).abs() < 0.05);
    }

    #[test]
    fn invalid_distributions_rejected() {
        for d in [
            EffectsDistribution::Beta { alpha: 0.0, beta: 1.0 },
            EffectsDistribution::Gamma { shape: 2.0, scale: -1.0 },
            EffectsDistribution::Gaussian { mean: 0.0, variance: 0.0 },
            EffectsDistribution::GaussianMixture {
                weight: 1.5,
                mean1: 0.0,
                variance1: 1.0,
                mean2: 0.0,
                variance2: 1.0,
            },
        ] {
            assert!(matches!(
                sample_effects(&d, 10, 0),
                Err(Error::InvalidDistributionParams(_))
            ));
        }
    }

    #[test]
    fn distribution_functions() {
        let beta = EffectsDistribution::default();
        // Beta(2,2): F(x) = 3x^2 - 2x^3
        for x in [0.1, 0.3, 0.5, 0.9] {
            assert_abs_diff_eq!(beta.cdf(x), 3.0 * x * x - 2.0 * x * x * x, epsilon = 1e-12);
        }
        let gamma = EffectsDistribution::Gamma { shape: 2.0, scale: 1.0 };
        // Gamma(2,1): F(x) = 1 - (1 + x) e^{-x}
        for x in [0.1, 1.0, 2.5, 10.0] {
            assert_abs_diff_eq!(gamma.cdf(x), 1.0 - (1.0 + x) * (-x).exp(), epsilon = 1e-10);
        }
        assert_eq!(gamma.cdf(-1.0), 0.0);
        assert_eq!(gamma.cdf(f64::INFINITY), 1.0);
        let mix = EffectsDistribution::study_designs()[3];
        assert_abs_diff_eq!(mix.cdf(0.5), 0.5 * normal_cdf(2.5) + 0.5 * normal_cdf(-2.5 / 0.5f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn pure_brownian_rows_with_point_mass_effects() {
        let params = ModelParams::new(0.7, 0.0, 1.0, 1.0).unwrap();
        let panel = simulate_panel(
            &params,
            &EffectsDistribution::PointMass { value: 0.5 },
            1,
            100_000,
            9,
            Backend::Auto,
        )
        .unwrap();
        let row = panel.row(0);
        assert!(mean(row).abs() < 4.0 / (row.len() as f64).sqrt());
        assert!((sample_variance(row) - 1.0).abs() < 0.02);
    }

    #[test]
    fn pure_fgn_rows_have_fgn_lag_one_covariance() {
        let params = ModelParams::new(0.7, 1.0, 0.0, 1.0).unwrap();
        let panel = simulate_panel(
            &params,
            &EffectsDistribution::PointMass { value: 0.0 },
            1,
            100_000,
            4,
            Backend::Auto,
        )
        .unwrap();
        let row = panel.row(0);
        let n = row.len() - 1;
        let c1 = compensated_sum((0..n).map(|k| row[k] * row[k + 1])) / n as f64;
        assert!((c1 - 0.319_507_9).abs() < 0.01, "{c1}");
    }

    #[test]
    fn simulation_is_deterministic_and_shaped() {
        let params = ModelParams::study();
        let dist = EffectsDistribution::default();
        let a = simulate_panel(&params, &dist, 7, 20, 123, Backend::Cholesky).unwrap();
        let b = simulate_panel(&params, &dist, 7, 20, 123, Backend::Cholesky).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subjects(), 7);
        assert_eq!(a.columns(), 24);
        assert_eq!(a.true_effects.as_ref().unwrap().len(), 7);
    }

    #[test]
    fn rows_do_not_depend_on_generation_order() {
        let sim = PanelSimulator::new(ModelParams::study(), 30, Backend::Cholesky).unwrap();
        let panel = sim.simulate(&EffectsDistribution::default(), 5, 77).unwrap();
        let phi = panel.true_effects.clone().unwrap();
        for i in (0..5).rev() {
            let row = sim.subject_increments(phi[i] - 0.02, 77, i as u64);
            assert_eq!(row.as_slice(), panel.row(i));
        }
    }

    #[test]
    fn drift_is_recovered_in_row_means() {
        let params = ModelParams::study();
        let sim = PanelSimulator::new(params, 20_000, Backend::Circulant).unwrap();
        let panel = sim.simulate(&EffectsDistribution::default(), 8, 5).unwrap();
        let phi = panel.true_effects.as_ref().unwrap();
        let n = panel.columns() as f64;
        // Var of the mean of n mixed increments: (sigma^2 n h + gamma^2 (n h)^{2H}) / n^2
        let var_mean = (params.sigma_sq * n + params.gamma_sq * n.powf(2.0 * params.hurst)) / (n * n);
        for (i, row) in panel.rows().enumerate() {
            let theta = phi[i] - params.sigma_sq / 2.0;
            assert!((mean(row) - theta).abs() <= 4.0 * var_mean.sqrt());
        }
    }

    #[test]
    fn rows_are_uncorrelated_with_each_other() {
        let params = ModelParams::new(0.7, 0.25, 0.04, 1.0).unwrap();
        let panel = simulate_panel(&params, &EffectsDistribution::PointMass { value: 0.02 }, 2, 50_000, 31, Backend::Auto).unwrap();
        let (a, b) = (panel.row(0), panel.row(1));
        let (ma, mb) = (mean(a), mean(b));
        let cov = compensated_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / a.len() as f64;
        let corr = cov / (sample_variance(a) * sample_variance(b)).sqrt();
        assert!(corr.abs() < 4.0 / (a.len() as f64).sqrt(), "{corr}");
    }

    #[test]
    fn cumulative_sums_reproduce_log_prices() {
        let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 3, 10, 8, Backend::Auto).unwrap();
        let prices = panel_to_prices(&panel);
        for (row, path) in panel.rows().zip(&prices) {
            assert_eq!(path.len(), row.len() + 1);
            assert_eq!(path[0], 1.0);
            let mut y = 0.0;
            for (k, dy) in row.iter().enumerate() {
                y += dy;
                assert_abs_diff_eq!(path[k + 1].ln(), y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn prices_of_trivial_panels() {
        let zero = Panel::new(vec![vec![0.0; 5]], 1.0).unwrap();
        assert!(panel_to_prices(&zero)[0].iter().all(|&p| p == 1.0));
        let one = Panel::new(vec![vec![0.3, 0.0, 0.0, 0.0, 0.0]], 1.0).unwrap();
        assert_abs_diff_eq!(panel_to_prices(&one)[0][1], 0.3f64.exp(), epsilon = 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 4, 16, 2, Backend::Auto).unwrap();
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let back = Panel::read_csv(buf.as_slice()).unwrap();
        assert!(back.true_effects.is_none());
        for (a, b) in panel.rows().zip(back.rows()) {
            assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
        assert_eq!(panel_to_prices(&panel), panel_to_prices(&back));
    }

    #[test]
    fn csv_non_numeric_cell_reports_location() {
        let text = "subject,k,dy\n0,0,1.0\n0,1,abc\n";
        match Panel::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_ragged_rows_rejected() {
        let mut text = String::from("subject,k,dy\n");
        for k in 0..6 {
            text.push_str(&format!("0,{k},0.1\n"));
        }
        for k in 0..5 {
            text.push_str(&format!("1,{k},0.1\n"));
        }
        assert!(matches!(Panel::read_csv(text.as_bytes()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn panel_needs_five_columns() {
        assert!(matches!(Panel::new(vec![vec![0.0; 4]], 1.0), Err(Error::DimensionMismatch(_))));
        assert!(Panel::new(vec![], 1.0).is_err());
    }
}
