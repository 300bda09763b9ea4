//! Monte Carlo harness: parameter recovery, Lagrange-vs-kernel ISE
//! comparison, and normality diagnostics.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{
    default_m_grid, fit_kernel_cdf, interpolate_cdf, select_m_cv, transform_sample, BandwidthRule, EmpiricalCdf,
    SupportTransform, DEFAULT_FOLDS,
};
use crate::error::{Error, Result};
use crate::estimate::{estimate_effects, estimate_global, estimate_theta, GlobalEstimate};
use crate::model::{EffectsDistribution, ModelParams, Panel, PanelSimulator};
use crate::moments::summarize;
use crate::noise::Backend;
use crate::seed;
use crate::stats::{compensated_sum, ks_statistic, mean, normal_cdf, sample_sd, skewness_kurtosis};

/// Quadrature points for [`ise`].
pub const ISE_POINTS: usize = 1025;
pub const DEFAULT_REPLICATIONS: usize = 50;

/// `int_{-1}^{1} (estimate - truth)^2 dx` by composite Simpson on [`ISE_POINTS`] nodes.
pub fn ise(estimate: impl Fn(f64) -> f64, truth: impl Fn(f64) -> f64) -> f64 {
    let intervals = ISE_POINTS - 1;
    let dx = 2.0 / intervals as f64;
    let total = compensated_sum((0..ISE_POINTS).map(|i| {
        let x = if i == intervals { 1.0 } else { -1.0 + i as f64 * dx };
        let d = estimate(x) - truth(x);
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * d * d
    }));
    (total * dx / 3.0).max(0.0)
}

/// True CDF of the effects on the transformed scale, `F(T^{-1}(x))`.
pub fn transformed_truth<'a>(dist: &'a EffectsDistribution, transform: &SupportTransform) -> impl Fn(f64) -> f64 + 'a {
    let transform = *transform;
    move |x| dist.cdf(transform.invert(x.clamp(-1.0, 1.0)).expect("clamped to [-1, 1]"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub dist: EffectsDistribution,
    pub subjects: usize,
    pub observations: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    #[serde(default)]
    pub backend: Backend,
    /// Defaults to the natural transform of `dist`.
    #[serde(default)]
    pub transform: Option<SupportTransform>,
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

impl ExperimentConfig {
    /// Study design at `(N, n)` with the default harness settings.
    pub fn study(dist: EffectsDistribution, subjects: usize, observations: usize, seed: u64) -> Self {
        Self {
            params: ModelParams::study(),
            dist,
            subjects,
            observations,
            replications: DEFAULT_REPLICATIONS,
            seed,
            m_grid: default_m_grid(),
            folds: DEFAULT_FOLDS,
            bandwidth: BandwidthRule::Silverman,
            backend: Backend::Auto,
            transform: None,
        }
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn transform(&self) -> SupportTransform {
        self.transform.unwrap_or_else(|| self.dist.natural_transform())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.dist.validate()?;
        self.transform().validate()?;
        if self.subjects == 0 || self.observations == 0 {
            return Err(Error::InsufficientData("subjects and observations must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InsufficientData("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        seed::derive_seed(self.seed, seed::stream::REPLICATION, replication as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSdev {
    pub mean: f64,
    pub sdev: f64,
}

impl MeanSdev {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            sdev: sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerParameter {
    pub hurst: MeanSdev,
    pub gamma_sq: MeanSdev,
    pub sigma_sq: MeanSdev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectsSummary {
    /// Replication average of `mean_i phi_i`.
    pub mean_true: f64,
    /// Replication average of `mean_i phi_hat_i`.
    pub mean_hat: f64,
    /// Standard deviation across replications of `mean_i (phi_hat_i - phi_i)`.
    pub sdev: f64,
    /// Root mean square of `phi_hat_i - phi_i` pooled over subjects and replications.
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IseSummary {
    pub lagrange: f64,
    pub kernel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub per_parameter: PerParameter,
    pub effects: EffectsSummary,
    pub ise: Option<IseSummary>,
    pub m_opt_mean: Option<f64>,
    /// Replications whose global estimate was degenerate, or whose CDF step failed.
    pub failures: usize,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone)]
struct CdfOutcome {
    m_opt: usize,
    ise_lagrange: f64,
    ise_kernel: f64,
}

#[derive(Debug, Clone)]
struct Replication {
    global: GlobalEstimate,
    mean_true: f64,
    mean_hat: f64,
    mean_error: f64,
    sq_error_sum: f64,
    subjects: usize,
    cdf: Option<CdfOutcome>,
}

/// Global and per-subject estimates for one panel.
pub fn estimate_panel(panel: &Panel, n: usize) -> Result<(GlobalEstimate, Vec<f64>)> {
    let summary = summarize(panel, n)?;
    let global = estimate_global(&summary)?;
    let phi_hat = estimate_effects(panel, n, &global)?
        .into_iter()
        .map(|e| e.phi_hat)
        .collect();
    Ok((global, phi_hat))
}

fn cdf_step(config: &ExperimentConfig, phi_hat: &[f64], rep_seed: u64) -> Result<CdfOutcome> {
    let transform = config.transform();
    let u = transform_sample(phi_hat, &transform);
    let m_opt = if u.len() < config.folds {
        1
    } else {
        select_m_cv(&u, &config.m_grid, config.folds, rep_seed)?
    };
    let ecdf = EmpiricalCdf::new(&u)?;
    let lagrange = interpolate_cdf(m_opt, |x| ecdf.eval(x), transform)?;
    let kernel = fit_kernel_cdf(&u, config.bandwidth.bandwidth(&u)?)?;
    let truth = transformed_truth(&config.dist, &transform);
    Ok(CdfOutcome {
        m_opt,
        ise_lagrange: ise(|x| lagrange.eval(x), &truth),
        ise_kernel: ise(|x| kernel.eval(x), &truth),
    })
}

fn run_replication(
    config: &ExperimentConfig,
    sim: &PanelSimulator,
    replication: usize,
    with_cdf: bool,
) -> Result<Replication> {
    let rep_seed = config.replication_seed(replication);
    let panel = sim.simulate(&config.dist, config.subjects, rep_seed)?;
    let (global, phi_hat) = estimate_panel(&panel, config.observations)?;
    let phi = panel.true_effects.as_deref().expect("simulated panel");
    let errors: Vec<f64> = phi_hat.iter().zip(phi).map(|(a, b)| a - b).collect();
    let cdf = if with_cdf {
        Some(cdf_step(config, &phi_hat, rep_seed)?)
    } else {
        None
    };
    Ok(Replication {
        global,
        mean_true: mean(phi),
        mean_hat: mean(&phi_hat),
        mean_error: mean(&errors),
        sq_error_sum: compensated_sum(errors.iter().map(|e| e * e)),
        subjects: errors.len(),
        cdf,
    })
}

fn run(config: &ExperimentConfig, with_cdf: bool) -> Result<ExperimentReport> {
    config.validate()?;
    let started = Instant::now();
    let sim = PanelSimulator::new(config.params, config.observations, config.backend)?;
    let outcomes: Vec<Result<Replication>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, &sim, r, with_cdf))
        .collect();

    let mut reps = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => reps.push(rep),
            Err(e @ (Error::DegenerateDenominator(_) | Error::InvalidBandwidth(_))) => {
                log::warn!("replication {r} failed: {e}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }

    let column = |f: &dyn Fn(&Replication) -> f64| reps.iter().map(f).collect::<Vec<_>>();
    let per_parameter = PerParameter {
        hurst: MeanSdev::of(&column(&|r| r.global.hurst_hat)),
        gamma_sq: MeanSdev::of(&column(&|r| r.global.gamma_sq_hat)),
        sigma_sq: MeanSdev::of(&column(&|r| r.global.sigma_sq_hat)),
    };
    let pooled = compensated_sum(reps.iter().map(|r| r.sq_error_sum));
    let pooled_count: usize = reps.iter().map(|r| r.subjects).sum();
    let effects = EffectsSummary {
        mean_true: mean(&column(&|r| r.mean_true)),
        mean_hat: mean(&column(&|r| r.mean_hat)),
        sdev: sample_sd(&column(&|r| r.mean_error)),
        rmse: (pooled / pooled_count as f64).sqrt(),
    };
    let (ise, m_opt_mean) = if with_cdf {
        let cdf: Vec<&CdfOutcome> = reps.iter().filter_map(|r| r.cdf.as_ref()).collect();
        let ise_l: Vec<f64> = cdf.iter().map(|c| c.ise_lagrange).collect();
        let ise_k: Vec<f64> = cdf.iter().map(|c| c.ise_kernel).collect();
        let m: Vec<f64> = cdf.iter().map(|c| c.m_opt as f64).collect();
        (
            Some(IseSummary {
                lagrange: mean(&ise_l),
                kernel: mean(&ise_k),
            }),
            Some(mean(&m)),
        )
    } else {
        (None, None)
    };
    Ok(ExperimentReport {
        config: config.clone(),
        per_parameter,
        effects,
        ise,
        m_opt_mean,
        failures,
        runtime_s: Some(started.elapsed().as_secs_f64()),
    })
}

/// Replicated simulate -> estimate loop; reports means and S.devs of the estimators.
pub fn run_recovery_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run(config, false)
}

/// Recovery loop plus, per replication, CV-selected Lagrange and kernel CDF
/// fits scored by ISE against the true transformed CDF.
pub fn run_cdf_comparison(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run(config, true)
}

/// `sqrt(N) (F_hat(x) - F(x))` per replication for a fixed order `m`,
/// with `x` on the transformed scale.
pub fn cdf_point_errors(config: &ExperimentConfig, m: usize, x: f64) -> Result<Vec<f64>> {
    config.validate()?;
    let sim = PanelSimulator::new(config.params, config.observations, config.backend)?;
    let transform = config.transform();
    let truth = transformed_truth(&config.dist, &transform)(x);
    let root_n = (config.subjects as f64).sqrt();
    (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let panel = sim.simulate(&config.dist, config.subjects, config.replication_seed(r))?;
            let (_, phi_hat) = estimate_panel(&panel, config.observations)?;
            let ecdf = EmpiricalCdf::new(&transform_sample(&phi_hat, &transform))?;
            let fit = interpolate_cdf(m, |y| ecdf.eval(y), transform)?;
            Ok(root_n * (fit.eval(x) - truth))
        })
        .collect()
}

/// `sqrt(n) (theta_hat - theta)` over `replicates` independent subjects.
pub fn theta_errors(params: &ModelParams, theta: f64, n: usize, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let dist = EffectsDistribution::PointMass {
        value: theta + 0.5 * params.sigma_sq,
    };
    let sim = PanelSimulator::new(*params, n, Backend::Auto)?;
    let panel = sim.simulate(&dist, replicates, seed)?;
    let root_n = (n as f64).sqrt();
    panel
        .rows()
        .map(|row| Ok(root_n * (estimate_theta(row, n, params.step)? - theta)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostics {
    pub count: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance to the standard normal CDF.
    pub ks_statistic: f64,
}

pub const MIN_NORMALITY_SAMPLES: usize = 100;

/// Shape statistics of already standardized errors.
pub fn normality_diagnostics(samples: &[f64]) -> Result<NormalityDiagnostics> {
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "normality diagnostics need at least {MIN_NORMALITY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let (skewness, excess_kurtosis) = skewness_kurtosis(samples);
    Ok(NormalityDiagnostics {
        count: samples.len(),
        skewness,
        excess_kurtosis,
        ks_statistic: ks_statistic(samples, normal_cdf),
    })
}

pub const TABLE1_HEADER: &str = "distribution,N,n,mean_m_opt,ise_lagrange,ise_kernel";
pub const TABLE2_HEADER: &str = "distribution,N,n,H_mean,H_sdev,gamma_sq_mean,gamma_sq_sdev,sigma_sq_mean,sigma_sq_sdev,phi_mean_true,phi_mean_hat,phi_sdev";

impl ExperimentReport {
    /// Row in the layout of the ISE comparison table, if the CDF step ran.
    pub fn table1_row(&self) -> Option<String> {
        let ise = self.ise?;
        Some(format!(
            "\"{}\",{},{},{},{},{}",
            self.config.dist.label(),
            self.config.subjects,
            self.config.observations,
            self.m_opt_mean?,
            ise.lagrange,
            ise.kernel
        ))
    }

    /// Row in the layout of the parametric estimation table.
    pub fn table2_row(&self) -> String {
        let p = &self.per_parameter;
        format!(
            "\"{}\",{},{},{},{},{},{},{},{},{},{},{}",
            self.config.dist.label(),
            self.config.subjects,
            self.config.observations,
            p.hurst.mean,
            p.hurst.sdev,
            p.gamma_sq.mean,
            p.gamma_sq.sdev,
            p.sigma_sq.mean,
            p.sigma_sq.sdev,
            self.effects.mean_true,
            self.effects.mean_hat,
            self.effects.sdev
        )
    }
}
