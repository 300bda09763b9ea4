//! Closed-form method-of-moments estimators for `(H, gamma^2, sigma^2)` and
//! plug-in recovery of the per-subject random effects.

use serde::{Deserialize, Serialize};

use crate::error::{DegeneracyReport, Error, Result};
use crate::model::{ModelParams, Panel};
use crate::moments::MomentSummary;
use crate::stats::compensated_sum;

/// Bounds applied to the Hurst estimate before it enters further powers.
pub const HURST_CLAMP: (f64, f64) = (0.01, 0.99);
/// Relative tolerance for the vanishing-denominator checks.
pub const DEGENERACY_RTOL: f64 = 1e-12;

/// Drift per unit time: `(1 / (n h)) sum_{k<n} dY_k`.
pub fn estimate_theta(row: &[f64], n: usize, h: f64) -> Result<f64> {
    if n == 0 || row.len() < n {
        return Err(Error::InsufficientData(format!(
            "theta needs {n} increments, row has {}",
            row.len()
        )));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParams(format!("step must be positive, got {h}")));
    }
    Ok(compensated_sum(row[..n].iter().copied()) / (n as f64 * h))
}

/// `log2(x)` for positive `x`, zero otherwise.
pub fn log2_plus(x: f64) -> f64 {
    if x > 0.0 {
        x.log2()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub ratio_numerator: f64,
    pub ratio_denominator: f64,
    /// The Hurst estimate hit [`HURST_CLAMP`] (including the `log2+` floor).
    pub clamped: bool,
    /// `gamma_sq_hat` or `sigma_sq_hat` came out negative; reported untruncated.
    pub negative_variance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalEstimate {
    pub hurst_hat: f64,
    pub gamma_sq_hat: f64,
    pub sigma_sq_hat: f64,
    pub step: f64,
    pub diagnostics: EstimateDiagnostics,
}

impl GlobalEstimate {
    pub fn as_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.hurst_hat,
            self.gamma_sq_hat.max(0.0),
            self.sigma_sq_hat.max(0.0),
            self.step,
        )
    }
}

/// Inverts the moment limits:
///
/// ```text
/// H      = log2+((zeta - 4 h^2 V) / (eta - h^2 V)) / 2
/// gamma2 = (eta - h^2 V) / (h^{2H} (2^{2H-1} - 1))
/// sigma2 = (xi - h^2 V - gamma2 h^{2H}) / h
/// ```
///
/// A non-positive ratio, a vanishing `eta - h^2 V`, or a vanishing
/// `2^{2H-1} - 1` is returned as [`Error::DegenerateDenominator`].
pub fn estimate_global(summary: &MomentSummary) -> Result<GlobalEstimate> {
    let h = summary.h;
    let h2v = h * h * summary.v_bar;
    let numerator = summary.zeta_bar - 4.0 * h2v;
    let denominator = summary.eta_bar - h2v;
    let tol = DEGENERACY_RTOL * 1f64.max(summary.zeta_bar.abs()).max(summary.eta_bar.abs());

    let report = |hurst_hat: Option<f64>, reason: String| {
        Error::DegenerateDenominator(Box::new(DegeneracyReport {
            ratio_numerator: numerator,
            ratio_denominator: denominator,
            tolerance: tol,
            hurst_hat,
            reason,
        }))
    };

    if denominator.is_nan() || denominator.abs() < tol {
        return Err(report(None, format!("|eta_bar - h^2 v_bar| = {:e} below tolerance", denominator.abs())));
    }
    let ratio = numerator / denominator;
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(report(
            Some(HURST_CLAMP.0),
            format!("moment ratio {ratio:e} is not positive; log2+ floors the Hurst estimate at 0"),
        ));
    }
    let raw = 0.5 * log2_plus(ratio);
    let hurst_hat = raw.clamp(HURST_CLAMP.0, HURST_CLAMP.1);
    let clamped = hurst_hat != raw;

    let corr = 2f64.powf(2.0 * hurst_hat - 1.0) - 1.0;
    if corr.abs() < tol {
        return Err(report(
            Some(hurst_hat),
            format!("2^(2H-1) - 1 = {corr:e} vanishes at H = {hurst_hat}"),
        ));
    }
    let scale = h.powf(2.0 * hurst_hat);
    let gamma_sq_hat = denominator / (scale * corr);
    let sigma_sq_hat = (summary.xi_bar - h2v - gamma_sq_hat * scale) / h;
    let negative_variance = gamma_sq_hat < 0.0 || sigma_sq_hat < 0.0;
    if negative_variance {
        log::warn!("negative variance estimate: gamma_sq_hat={gamma_sq_hat}, sigma_sq_hat={sigma_sq_hat}");
    }
    Ok(GlobalEstimate {
        hurst_hat,
        gamma_sq_hat,
        sigma_sq_hat,
        step: h,
        diagnostics: EstimateDiagnostics {
            ratio_numerator: numerator,
            ratio_denominator: denominator,
            clamped,
            negative_variance,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectEstimate {
    pub subject_index: usize,
    pub theta_hat: f64,
    /// `theta_hat + sigma_sq_hat / 2`
    pub phi_hat: f64,
}

/// Plug-in random effects `phi_i = theta_i + sigma^2 / 2` for every subject.
pub fn estimate_effects(panel: &Panel, n: usize, global: &GlobalEstimate) -> Result<Vec<SubjectEstimate>> {
    let half = 0.5 * global.sigma_sq_hat;
    panel
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let theta_hat = estimate_theta(row, n, panel.step)?;
            Ok(SubjectEstimate {
                subject_index: i,
                theta_hat,
                phi_hat: theta_hat + half,
            })
        })
        .collect()
}

/// `(sigma^2 + gamma^2 h^{2H-1}) / h`
pub fn asymptotic_variance_theta(params: &ModelParams) -> f64 {
    let h = params.step;
    (params.sigma_sq + params.gamma_sq * h.powf(2.0 * params.hurst - 1.0)) / h
}

/// Exact finite-sample variance of `sqrt(n) (theta_hat - theta)`:
/// `(sigma^2 / h) + gamma^2 (n h)^{2H-1} / h`.
pub fn exact_scaled_variance_theta(params: &ModelParams, n: usize) -> f64 {
    let h = params.step;
    let t = n as f64 * h;
    (params.sigma_sq + params.gamma_sq * t.powf(2.0 * params.hurst - 1.0)) / h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_panel, EffectsDistribution};
    use crate::moments::{summarize, theoretical_moments};
    use crate::noise::Backend;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn from_limits(p: &ModelParams, v: f64) -> MomentSummary {
        let (xi, eta, zeta) = theoretical_moments(p, v);
        MomentSummary::from_averages(xi, eta, zeta, v, 1000, p.step)
    }

    #[test]
    fn theta_examples() {
        assert_eq!(estimate_theta(&[0.25; 8], 8, 1.0).unwrap(), 0.25);
        assert_eq!(estimate_theta(&[1.0, 2.0, 3.0], 3, 0.5).unwrap(), 4.0);
        assert!(estimate_theta(&[1.0], 2, 1.0).is_err());
    }

    #[test]
    fn log2_plus_floors_non_positive() {
        assert_eq!(log2_plus(-1.0), 0.0);
        assert_eq!(log2_plus(0.0), 0.0);
        assert_eq!(log2_plus(8.0), 3.0);
    }

    #[test]
    fn noiseless_inversion() {
        let p = ModelParams::study();
        for v in [0.0, 0.3, 1.0] {
            let est = estimate_global(&from_limits(&p, v)).unwrap();
            assert_abs_diff_eq!(est.hurst_hat, 0.7, epsilon = 1e-10);
            assert_abs_diff_eq!(est.gamma_sq_hat, 0.25, epsilon = 1e-10);
            assert_abs_diff_eq!(est.sigma_sq_hat, 0.04, epsilon = 1e-10);
            assert!(!est.diagnostics.clamped);
        }
    }

    #[test]
    fn non_positive_ratio_is_degenerate() {
        let s = MomentSummary::from_averages(1.0, 0.5, 0.1, 0.2, 10, 1.0);
        match estimate_global(&s) {
            Err(Error::DegenerateDenominator(r)) => {
                assert_eq!(r.hurst_hat, Some(HURST_CLAMP.0));
                assert!(r.ratio_numerator <= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vanishing_denominators_are_degenerate() {
        let s = MomentSummary::from_averages(1.0, 0.2, 0.5, 0.2, 10, 1.0);
        assert!(matches!(estimate_global(&s), Err(Error::DegenerateDenominator(_))));
        // Brownian limits: ratio is exactly 2^{2H} = 2 -> H = 1/2 -> 2^{2H-1}-1 = 0.
        let s = MomentSummary::from_averages(1.0, 0.25, 0.5, 0.0, 10, 1.0);
        match estimate_global(&s) {
            Err(Error::DegenerateDenominator(r)) => assert_eq!(r.hurst_hat, Some(0.5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extreme_ratio_is_clamped() {
        let s = MomentSummary::from_averages(1.0, 0.1, 0.1 * 4f64.powf(0.999), 0.0, 10, 1.0);
        let est = estimate_global(&s).unwrap();
        assert_eq!(est.hurst_hat, HURST_CLAMP.1);
        assert!(est.diagnostics.clamped);
    }

    #[test]
    fn effects_examples() {
        let global = GlobalEstimate {
            hurst_hat: 0.7,
            gamma_sq_hat: 0.25,
            sigma_sq_hat: 0.04,
            step: 1.0,
            diagnostics: EstimateDiagnostics {
                ratio_numerator: 1.0,
                ratio_denominator: 1.0,
                clamped: false,
                negative_variance: false,
            },
        };
        let panel = Panel::new(vec![vec![0.48; 6]], 1.0).unwrap();
        let e = estimate_effects(&panel, 2, &global).unwrap();
        assert_abs_diff_eq!(e[0].phi_hat, 0.5, epsilon = 1e-15);
        let zero = GlobalEstimate { sigma_sq_hat: 0.0, ..global };
        let e = estimate_effects(&panel, 2, &zero).unwrap();
        assert_eq!(e[0].phi_hat, e[0].theta_hat);
    }

    #[test]
    fn asymptotic_variance_examples() {
        assert_eq!(asymptotic_variance_theta(&ModelParams::new(0.3, 0.0, 1.0, 1.0).unwrap()), 1.0);
        assert_abs_diff_eq!(asymptotic_variance_theta(&ModelParams::study()), 0.29, epsilon = 1e-15);
        assert_abs_diff_eq!(asymptotic_variance_theta(&ModelParams::new(0.5, 1.0, 0.0, 2.0).unwrap()), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exact_variance_agrees_with_asymptotic_formula_only_for_brownian_motion() {
        let bm = ModelParams::new(0.5, 0.3, 0.2, 0.5).unwrap();
        assert_abs_diff_eq!(exact_scaled_variance_theta(&bm, 1000), asymptotic_variance_theta(&bm), epsilon = 1e-12);
        let p = ModelParams::study();
        assert!(exact_scaled_variance_theta(&p, 1000) > 10.0 * asymptotic_variance_theta(&p));
    }

    #[test]
    fn theta_recovery_on_long_row() {
        let p = ModelParams::study();
        let n = 100_000;
        let panel = simulate_panel(&p, &EffectsDistribution::PointMass { value: 0.42 }, 1, n, 8, Backend::Auto).unwrap();
        let theta = estimate_theta(panel.row(0), n, 1.0).unwrap();
        // 4 sd of the exact finite-n variance; the asymptotic one undercounts the fGn part.
        let sd = (exact_scaled_variance_theta(&p, n) / n as f64).sqrt();
        assert!((theta - 0.4).abs() < 4.0 * sd, "{theta} sd {sd}");
    }

    #[test]
    fn phi_minus_theta_is_half_sigma_sq() {
        let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 20, 100, 3, Backend::Auto).unwrap();
        let s = summarize(&panel, 100).unwrap();
        let g = estimate_global(&s).unwrap();
        for e in estimate_effects(&panel, 100, &g).unwrap() {
            assert_abs_diff_eq!(e.phi_hat - e.theta_hat, g.sigma_sq_hat / 2.0, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn scale_equivariance(seed in 0u64..200, c in 0.2f64..5.0) {
            let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 10, 60, seed, Backend::Cholesky).unwrap();
            let a = summarize(&panel, 60).unwrap();
            let b = summarize(&panel.scaled(c), 60).unwrap();
            let c2 = c * c;
            for (x, y) in [(a.xi_bar, b.xi_bar), (a.eta_bar, b.eta_bar), (a.zeta_bar, b.zeta_bar), (a.v_bar, b.v_bar)] {
                prop_assert!((x * c2 - y).abs() <= 1e-12 * y.abs().max(1e-3));
            }
            if let (Ok(ga), Ok(gb)) = (estimate_global(&a), estimate_global(&b)) {
                prop_assert!((ga.hurst_hat - gb.hurst_hat).abs() < 1e-10);
                prop_assert!((ga.gamma_sq_hat * c2 - gb.gamma_sq_hat).abs() < 1e-9 * gb.gamma_sq_hat.abs().max(1.0));
                prop_assert!((ga.sigma_sq_hat * c2 - gb.sigma_sq_hat).abs() < 1e-9 * gb.sigma_sq_hat.abs().max(1.0));
            }
        }
    }
}
