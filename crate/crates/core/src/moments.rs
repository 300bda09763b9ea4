//! Per-subject quadratic statistics of the increments and their
//! cross-subject averages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::estimate_theta;
use crate::model::{ModelParams, Panel};
use crate::stats::{compensated_sum, CompensatedSum};

fn require(row: &[f64], needed: usize, what: &str) -> Result<()> {
    if row.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{what} needs {needed} increments, row has {}",
            row.len()
        )));
    }
    Ok(())
}

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InsufficientData("n must be at least 1".into()));
    }
    Ok(())
}

/// `xi = (1/n) sum_{k<n} dY_k^2`
pub fn subject_xi(row: &[f64], n: usize) -> Result<f64> {
    require_n(n)?;
    require(row, n, "xi")?;
    Ok(compensated_sum(row[..n].iter().map(|x| x * x)) / n as f64)
}

/// `eta = (1/n) sum_{k<n} dY_k dY_{k+1}`
pub fn subject_eta(row: &[f64], n: usize) -> Result<f64> {
    require_n(n)?;
    require(row, n + 1, "eta")?;
    Ok(compensated_sum((0..n).map(|k| row[k] * row[k + 1])) / n as f64)
}

/// `zeta = (1/n) sum_{k<n} (Y_{k+2} - Y_k)(Y_{k+4} - Y_{k+2})`, computed from
/// two-step increment sums.
pub fn subject_zeta(row: &[f64], n: usize) -> Result<f64> {
    require_n(n)?;
    require(row, n + 3, "zeta")?;
    Ok(compensated_sum((0..n).map(|k| (row[k] + row[k + 1]) * (row[k + 2] + row[k + 3]))) / n as f64)
}

/// Cross-subject averages feeding the moment estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub xi_bar: f64,
    pub eta_bar: f64,
    pub zeta_bar: f64,
    /// Mean of squared drift estimates.
    pub v_bar: f64,
    /// Rows of `(xi, eta, zeta, theta_hat^2)`.
    pub per_subject: Vec<[f64; 4]>,
    pub n_used: usize,
    pub h: f64,
}

impl MomentSummary {
    /// Builds a summary directly from averages, with no per-subject detail.
    pub fn from_averages(xi_bar: f64, eta_bar: f64, zeta_bar: f64, v_bar: f64, n_used: usize, h: f64) -> Self {
        Self {
            xi_bar,
            eta_bar,
            zeta_bar,
            v_bar,
            per_subject: Vec::new(),
            n_used,
            h,
        }
    }
}

fn subject_stats(row: &[f64], n: usize, h: f64) -> Result<[f64; 4]> {
    let theta = estimate_theta(row, n, h)?;
    Ok([
        subject_xi(row, n)?,
        subject_eta(row, n)?,
        subject_zeta(row, n)?,
        theta * theta,
    ])
}

/// Computes per-subject statistics over the first `n` increments (plus the
/// three look-ahead increments) and averages them in subject order.
pub fn summarize(panel: &Panel, n: usize) -> Result<MomentSummary> {
    require_n(n)?;
    if panel.columns() < n + 3 {
        return Err(Error::InsufficientData(format!(
            "n = {n} needs {} increments per subject, panel has {}",
            n + 3,
            panel.columns()
        )));
    }
    let h = panel.step;
    let per_subject: Vec<[f64; 4]> = (0..panel.subjects())
        .into_par_iter()
        .map(|i| subject_stats(panel.row(i), n, h))
        .collect::<Result<_>>()?;

    let count = per_subject.len() as f64;
    let mut acc = [CompensatedSum::new(); 4];
    for s in &per_subject {
        for (a, v) in acc.iter_mut().zip(s) {
            a.add(*v);
        }
    }
    Ok(MomentSummary {
        xi_bar: acc[0].value() / count,
        eta_bar: acc[1].value() / count,
        zeta_bar: acc[2].value() / count,
        v_bar: acc[3].value() / count,
        per_subject,
        n_used: n,
        h,
    })
}

/// Almost-sure limits of `(xi_bar, eta_bar, zeta_bar)` given `E[theta^2]`.
pub fn theoretical_moments(params: &ModelParams, second_moment_theta: f64) -> (f64, f64, f64) {
    let h = params.step;
    let two_h = 2.0 * params.hurst;
    let drift = second_moment_theta * h * h;
    let frac = params.gamma_sq * h.powf(two_h);
    let corr = 2f64.powf(two_h - 1.0) - 1.0;
    (
        drift + params.sigma_sq * h + frac,
        drift + frac * corr,
        4.0 * drift + frac * 2f64.powf(two_h) * corr,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_panel, EffectsDistribution};
    use crate::noise::Backend;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn xi_examples() {
        assert_eq!(subject_xi(&[1.0, 1.0, 1.0], 3).unwrap(), 1.0);
        assert_eq!(subject_xi(&[2.0, 0.0], 2).unwrap(), 2.0);
        assert!(matches!(subject_xi(&[1.0], 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(subject_eta(&[1.0, -1.0, 1.0, -1.0], 3).unwrap(), -1.0);
        assert_abs_diff_eq!(subject_eta(&[0.7; 9], 8).unwrap(), 0.49, epsilon = 1e-15);
        assert!(subject_eta(&[1.0, 1.0, 1.0], 3).is_err());
    }

    #[test]
    fn zeta_examples() {
        assert_abs_diff_eq!(subject_zeta(&[0.7; 10], 7).unwrap(), 4.0 * 0.49, epsilon = 1e-14);
        assert_eq!(subject_zeta(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0], 1).unwrap(), 1.0);
        assert!(subject_zeta(&[1.0; 5], 3).is_err());
    }

    #[test]
    fn constant_rows_are_consistent() {
        for c in [-2.0, 0.1, 3.5] {
            let row = vec![c; 12];
            let xi = subject_xi(&row, 8).unwrap();
            let eta = subject_eta(&row, 8).unwrap();
            let zeta = subject_zeta(&row, 8).unwrap();
            assert_abs_diff_eq!(zeta, 4.0 * eta, epsilon = 1e-12);
            assert_abs_diff_eq!(eta, xi, epsilon = 1e-12);
            assert_abs_diff_eq!(xi, c * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn theoretical_moment_examples() {
        let bm = ModelParams::new(0.5, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(theoretical_moments(&bm, 0.0), (1.0, 0.0, 0.0));

        let p = ModelParams::study();
        let (xi, eta, zeta) = theoretical_moments(&p, 0.0);
        assert_abs_diff_eq!(xi, 0.29, epsilon = 1e-15);
        assert_abs_diff_eq!(eta, 0.079_876_977_693_223_56, epsilon = 1e-15);
        assert_abs_diff_eq!(zeta, 0.210_796_607_909_677, epsilon = 1e-15);

        let (xi2, eta2, zeta2) = theoretical_moments(&p, 0.3);
        assert_abs_diff_eq!(xi2 - xi, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(eta2 - eta, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(zeta2 - zeta, 1.2, epsilon = 1e-15);
    }

    #[test]
    fn single_and_duplicate_subject_summaries() {
        let row: Vec<f64> = (0..12).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let one = summarize(&Panel::new(vec![row.clone()], 1.0).unwrap(), 8).unwrap();
        assert_eq!(one.xi_bar, subject_xi(&row, 8).unwrap());
        assert_eq!(one.eta_bar, subject_eta(&row, 8).unwrap());
        assert_eq!(one.zeta_bar, subject_zeta(&row, 8).unwrap());
        let two = summarize(&Panel::new(vec![row.clone(), row], 1.0).unwrap(), 8).unwrap();
        assert_abs_diff_eq!(two.xi_bar, one.xi_bar, epsilon = 1e-15);
        assert_abs_diff_eq!(two.zeta_bar, one.zeta_bar, epsilon = 1e-15);
        assert_abs_diff_eq!(two.v_bar, one.v_bar, epsilon = 1e-15);
    }

    #[test]
    fn summary_rejects_short_rows() {
        let panel = Panel::new(vec![vec![0.1; 6]], 1.0).unwrap();
        assert!(summarize(&panel, 3).is_ok());
        assert!(matches!(summarize(&panel, 4), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pure_fgn_limits() {
        let params = ModelParams::new(0.7, 1.0, 0.0, 1.0).unwrap();
        let panel = simulate_panel(&params, &EffectsDistribution::PointMass { value: 0.0 }, 1, 100_000, 21, Backend::Auto).unwrap();
        let row = panel.row(0);
        let n = 100_000;
        let eta = subject_eta(row, n).unwrap();
        let zeta = subject_zeta(row, n).unwrap();
        assert!((eta - (2f64.powf(0.4) - 1.0)).abs() < 0.01, "{eta}");
        assert!((zeta - 2f64.powf(1.4) * (2f64.powf(0.4) - 1.0)).abs() < 0.05, "{zeta}");

        let mixed = simulate_panel(&ModelParams::study(), &EffectsDistribution::PointMass { value: 0.02 }, 1, 100_000, 22, Backend::Auto).unwrap();
        assert!((subject_xi(mixed.row(0), n).unwrap() - 0.29).abs() < 0.01);
    }

    #[test]
    fn panel_average_matches_limit() {
        // Beta(2,2): theta = phi - 0.02, E[theta^2] = Var(phi) + (E phi - 0.02)^2 = 0.05 + 0.48^2
        let params = ModelParams::study();
        let panel = simulate_panel(&params, &EffectsDistribution::default(), 100, 250, 4, Backend::Auto).unwrap();
        let s = summarize(&panel, 250).unwrap();
        let (xi_inf, _, _) = theoretical_moments(&params, 0.05 + 0.48 * 0.48);
        let xi: Vec<f64> = s.per_subject.iter().map(|r| r[0]).collect();
        let se = crate::stats::sample_sd(&xi) / 10.0;
        assert!((s.xi_bar - xi_inf).abs() < 3.0 * se, "{} vs {xi_inf} (se {se})", s.xi_bar);
    }

    #[test]
    fn averages_are_column_means() {
        let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 13, 40, 1, Backend::Auto).unwrap();
        let s = summarize(&panel, 40).unwrap();
        for (c, bar) in [s.xi_bar, s.eta_bar, s.zeta_bar, s.v_bar].into_iter().enumerate() {
            let m = s.per_subject.iter().map(|r| r[c]).sum::<f64>() / 13.0;
            assert_abs_diff_eq!(m, bar, epsilon = 1e-12);
        }
        assert!(s.xi_bar >= 0.0);
    }

    proptest! {
        #[test]
        fn zeta_matches_level_differences(row in proptest::collection::vec(-3.0f64..3.0, 4..12)) {
            let n = row.len() - 3;
            prop_assume!(n <= 8);
            let mut y = vec![0.0];
            for dy in &row {
                y.push(y.last().unwrap() + dy);
            }
            let brute = (0..n).map(|k| (y[k + 2] - y[k]) * (y[k + 4] - y[k + 2])).sum::<f64>() / n as f64;
            prop_assert!((subject_zeta(&row, n).unwrap() - brute).abs() <= 1e-12);
        }

        #[test]
        fn summary_is_permutation_invariant(seed in 0u64..1000, shift in 1usize..6) {
            let panel = simulate_panel(&ModelParams::study(), &EffectsDistribution::default(), 6, 12, seed, Backend::Cholesky).unwrap();
            let mut rows: Vec<Vec<f64>> = panel.rows().map(<[f64]>::to_vec).collect();
            rows.rotate_left(shift);
            let a = summarize(&panel, 12).unwrap();
            let b = summarize(&Panel::new(rows, 1.0).unwrap(), 12).unwrap();
            for (x, y) in [(a.xi_bar, b.xi_bar), (a.eta_bar, b.eta_bar), (a.zeta_bar, b.zeta_bar), (a.v_bar, b.v_bar)] {
                prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
            }
        }
    }
}
