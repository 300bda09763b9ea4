use std::io::Write;
use std::path::{Path, PathBuf};

use mixfrac::cdf::{
    cv_scores, argmin_order, fit_kernel_cdf, fit_lagrange_cdf, transform_sample, BandwidthRule, KernelCdf,
    SupportTransform,
};
use mixfrac::estimate::{estimate_effects, estimate_global, GlobalEstimate, SubjectEstimate};
use mixfrac::experiments::{
    ise, run_cdf_comparison, run_recovery_experiment, transformed_truth, ExperimentConfig, ExperimentReport,
    TABLE1_HEADER, TABLE2_HEADER,
};
use mixfrac::model::{load_panel, simulate_panel, PanelFormat, EXTRA_COLUMNS};
use mixfrac::moments::summarize;
use mixfrac::{DegeneracyReport, EffectsDistribution, ModelParams, Panel};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_atomic, write_json, write_lines};

/// Points of the exported CDF curve on `[-1, 1]`.
pub const CURVE_POINTS: usize = 513;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub params: ModelParams,
    pub effects: EffectsDistribution,
    pub seed: u64,
    pub subjects: usize,
    pub observations: usize,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentsOut {
    pub xi_bar: f64,
    pub eta_bar: f64,
    pub zeta_bar: f64,
    pub v_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Ok,
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub status: EstimateStatus,
    pub panel: PathBuf,
    pub subjects: usize,
    pub observations: usize,
    pub step: f64,
    pub moments: MomentsOut,
    pub global: Option<GlobalEstimate>,
    pub degeneracy: Option<DegeneracyReport>,
    pub effects: Vec<SubjectEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSelection {
    CrossValidation,
    Fixed,
    /// Too few subjects for cross-validation.
    Forced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IseOut {
    pub lagrange: f64,
    pub kernel: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutput {
    pub subjects: usize,
    pub m: usize,
    pub selection: OrderSelection,
    pub cv_scores: Vec<(usize, f64)>,
    pub bandwidth_rule: BandwidthRule,
    pub bandwidth: Option<f64>,
    pub transform: SupportTransform,
    pub nodes: Vec<f64>,
    pub node_values: Vec<f64>,
    pub ise: Option<IseOut>,
}

fn read_panel(path: &Path, step: f64) -> Result<Panel, CliError> {
    load_panel(path, PanelFormat::Csv)
        .map_err(CliError::at(path))?
        .with_step(step)
        .map_err(CliError::from)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let panel = simulate_panel(&cfg.model, &cfg.effects, s.subjects, s.observations, cfg.seed, cfg.backend)?;
    ensure_dir(&cfg.out)?;
    let panel_path = cfg.out.join("panel.csv");
    write_atomic(&panel_path, |w| panel.write_csv(w).map_err(CliError::at(&panel_path)))?;
    let truth = Truth {
        params: cfg.model,
        effects: cfg.effects,
        seed: cfg.seed,
        subjects: s.subjects,
        observations: s.observations,
        phi: panel.true_effects.clone().unwrap_or_default(),
    };
    write_json(&cfg.out.join("truth.json"), &truth)?;
    println!(
        "simulated N={} n={} ({} increments per subject) -> {}",
        s.subjects,
        s.observations,
        panel.columns(),
        panel_path.display()
    );
    Ok(())
}

fn run_estimate(cfg: &RunConfig, panel_path: &Path) -> Result<EstimateOutput, CliError> {
    let panel = read_panel(panel_path, cfg.model.step)?;
    let n = cfg
        .estimate
        .observations
        .unwrap_or(panel.columns() - EXTRA_COLUMNS);
    let summary = summarize(&panel, n)?;
    let mut out = EstimateOutput {
        status: EstimateStatus::Ok,
        panel: panel_path.to_path_buf(),
        subjects: panel.subjects(),
        observations: n,
        step: panel.step,
        moments: MomentsOut {
            xi_bar: summary.xi_bar,
            eta_bar: summary.eta_bar,
            zeta_bar: summary.zeta_bar,
            v_bar: summary.v_bar,
        },
        global: None,
        degeneracy: None,
        effects: Vec::new(),
    };
    match estimate_global(&summary) {
        Ok(global) => {
            out.effects = estimate_effects(&panel, n, &global)?;
            out.global = Some(global);
        }
        Err(mixfrac::Error::DegenerateDenominator(report)) => {
            out.status = EstimateStatus::Degenerate;
            out.degeneracy = Some(*report);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn degenerate(out: &EstimateOutput) -> CliError {
    CliError::Degenerate(Box::new(out.degeneracy.clone().expect("degenerate status carries a report")))
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = run_estimate(cfg, &cfg.estimate.panel)?;
    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join("estimate.json"), &out)?;
    match &out.global {
        Some(g) => {
            println!(
                "H_hat={:.6} gamma_sq_hat={:.6} sigma_sq_hat={:.6} (N={}, n={}, h={})",
                g.hurst_hat, g.gamma_sq_hat, g.sigma_sq_hat, out.subjects, out.observations, out.step
            );
            Ok(())
        }
        None => Err(degenerate(&out)),
    }
}

pub fn fit_cdf(cfg: &RunConfig) -> Result<(), CliError> {
    let f = &cfg.fit_cdf;
    let estimates = match &f.panel {
        Some(panel) => run_estimate(cfg, panel)?,
        None => read_json::<EstimateOutput>(&f.estimate)?,
    };
    if estimates.status == EstimateStatus::Degenerate {
        return Err(degenerate(&estimates));
    }
    let phi_hat: Vec<f64> = estimates.effects.iter().map(|e| e.phi_hat).collect();
    if phi_hat.is_empty() {
        return Err(CliError::Config("no effect estimates to fit".into()));
    }

    let default_truth = cfg.out.join("truth.json");
    let truth: Option<Truth> = match &f.truth {
        Some(path) => Some(read_json(path)?),
        None if default_truth.exists() => Some(read_json(&default_truth)?),
        None => None,
    };
    let dist = truth.as_ref().map_or(cfg.effects, |t| t.effects);
    let transform = f.transform.unwrap_or_else(|| dist.natural_transform());
    let u = transform_sample(&phi_hat, &transform);

    let (m, selection, scores) = if u.len() < f.folds {
        log::warn!("{} subject(s) cannot be split into {} folds; using m = 1", u.len(), f.folds);
        (1, OrderSelection::Forced, Vec::new())
    } else if let Some(m) = f.m {
        (m, OrderSelection::Fixed, Vec::new())
    } else {
        let scores = cv_scores(&u, &f.m_grid, f.folds, cfg.seed)?;
        let m = argmin_order(&scores).expect("nonempty grid");
        (m, OrderSelection::CrossValidation, scores)
    };
    let lagrange = fit_lagrange_cdf(&phi_hat, m, transform)?;
    let kernel: Option<KernelCdf> = match f.bandwidth.bandwidth(&u) {
        Ok(b) => Some(fit_kernel_cdf(&u, b)?),
        Err(e) => {
            log::warn!("kernel estimate skipped: {e}");
            None
        }
    };
    let truth_fn = truth.as_ref().map(|t| transformed_truth(&t.effects, &transform));

    let xs: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| if i + 1 == CURVE_POINTS { 1.0 } else { -1.0 + 2.0 * i as f64 / (CURVE_POINTS - 1) as f64 })
        .collect();
    let mut header = vec!["x", "f_hat"];
    if kernel.is_some() {
        header.push("f_kernel");
    }
    if truth_fn.is_some() {
        header.push("f_true");
    }
    let mut lines = vec![header.join(",")];
    for &x in &xs {
        let mut row = vec![x.to_string(), lagrange.eval(x).to_string()];
        if let Some(k) = &kernel {
            row.push(k.eval(x).to_string());
        }
        if let Some(t) = &truth_fn {
            row.push(t(x).to_string());
        }
        lines.push(row.join(","));
    }

    let fit = FitOutput {
        subjects: phi_hat.len(),
        m,
        selection,
        cv_scores: scores,
        bandwidth_rule: f.bandwidth,
        bandwidth: kernel.as_ref().map(KernelCdf::bandwidth),
        transform,
        nodes: lagrange.grid.nodes().to_vec(),
        node_values: lagrange.node_values.clone(),
        ise: truth_fn.as_ref().map(|t| IseOut {
            lagrange: ise(|x| lagrange.eval(x), t),
            kernel: kernel.as_ref().map(|k| ise(|x| k.eval(x), t)),
        }),
    };
    ensure_dir(&cfg.out)?;
    write_lines(&cfg.out.join("curve.csv"), &lines)?;
    write_json(&cfg.out.join("fit.json"), &fit)?;
    println!("m={m} ({selection:?}) N={} -> {}", fit.subjects, cfg.out.join("curve.csv").display());
    Ok(())
}

fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    s.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

pub fn report_name(dist: &EffectsDistribution, subjects: usize, observations: usize) -> String {
    format!("report_{}_N{subjects}_n{observations}.json", slug(&dist.label()))
}

pub fn experiment(cfg: &RunConfig, timing: bool) -> Result<(), CliError> {
    let x = &cfg.experiment;
    let dists: Vec<EffectsDistribution> = if x.all_distributions {
        EffectsDistribution::study_designs().to_vec()
    } else {
        vec![cfg.effects]
    };
    ensure_dir(&cfg.out)?;
    let mut table1 = vec![TABLE1_HEADER.to_string()];
    let mut table2 = vec![TABLE2_HEADER.to_string()];
    for dist in &dists {
        for &(subjects, observations) in &x.designs {
            let config = ExperimentConfig {
                params: cfg.model,
                dist: *dist,
                subjects,
                observations,
                replications: x.replications,
                seed: cfg.seed,
                m_grid: x.m_grid.clone(),
                folds: x.folds,
                bandwidth: x.bandwidth,
                backend: cfg.backend,
                transform: None,
            };
            let mut report: ExperimentReport = if x.cdf {
                run_cdf_comparison(&config)?
            } else {
                run_recovery_experiment(&config)?
            };
            if !timing {
                report.runtime_s = None;
            }
            write_json(&cfg.out.join(report_name(dist, subjects, observations)), &report)?;
            if let Some(row) = report.table1_row() {
                table1.push(row);
            }
            table2.push(report.table2_row());
            summarize_report(&report);
        }
    }
    if x.cdf {
        write_lines(&cfg.out.join("table1.csv"), &table1)?;
    }
    write_lines(&cfg.out.join("table2.csv"), &table2)?;
    Ok(())
}

fn summarize_report(r: &ExperimentReport) {
    let p = &r.per_parameter;
    let mut line = format!(
        "{} N={} n={}: H {:.4} ({:.4}) gamma_sq {:.4} ({:.4}) sigma_sq {:.4} ({:.4}) phi_sdev {:.4}",
        r.config.dist.label(),
        r.config.subjects,
        r.config.observations,
        p.hurst.mean,
        p.hurst.sdev,
        p.gamma_sq.mean,
        p.gamma_sq.sdev,
        p.sigma_sq.mean,
        p.sigma_sq.sdev,
        r.effects.sdev
    );
    if let (Some(ise), Some(m)) = (r.ise, r.m_opt_mean) {
        line.push_str(&format!(" | m_opt {m:.1} ISE lagrange {:.5} kernel {:.5}", ise.lagrange, ise.kernel));
    }
    if r.failures > 0 {
        line.push_str(&format!(" | {} failed replication(s)", r.failures));
    }
    if let Some(t) = r.runtime_s {
        line.push_str(&format!(" | {t:.2}s"));
    }
    let _ = writeln!(std::io::stdout(), "{line}");
}
