//! Likelihood-based inference for `τ`: ML, REML and DerSimonian–Laird point
//! estimates, the Q-profile confidence interval, and the BLUP slice at the
//! estimate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::mixture::check_level;
use crate::nnhm::{check_design, gls_fit, ConditionalFit};
use crate::optimize::{bisect_increasing, golden_section_min};
use crate::special::chi2_quantile;

const COARSE_SCAN_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Ml,
    Reml,
    /// DerSimonian–Laird moment estimator (intercept-only designs).
    Dl,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(Self::Ml),
            "reml" => Ok(Self::Reml),
            "dl" => Ok(Self::Dl),
            other => Err(Error::Domain(format!(
                "unknown estimator `{other}` (expected reml, ml or dl)"
            ))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ml => "ML",
            Self::Reml => "REML",
            Self::Dl => "DL",
        })
    }
}

/// Q-profile confidence interval for `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QProfile {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// `Q` value defining the lower bound (upper χ² quantile).
    pub q_target_lo: f64,
    /// `Q` value defining the upper bound (lower χ² quantile).
    pub q_target_hi: f64,
    /// Set when `Q(0)` already lies below the lower χ² quantile, so both
    /// bounds collapse to zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqResult {
    pub tau_hat: f64,
    pub estimator: Estimator,
    pub tau_ci95: QProfile,
    /// Conditional (BLUP) fit at `tau_hat`.
    pub fit_at_hat: ConditionalFit,
    pub q_at_zero: f64,
}

fn check_residual_dof(data: &Dataset, design: &DesignMatrix) -> Result<u32> {
    check_design(data, design)?;
    let (k, p) = (data.k(), design.p());
    if k <= p {
        return Err(Error::TooFewStudies {
            analysis: "frequentist heterogeneity estimation",
            k,
            needed: p + 1,
        });
    }
    Ok((k - p) as u32)
}

/// Generalized Q statistic `Q(τ)`.
pub fn q_statistic(data: &Dataset, design: &DesignMatrix, tau: f64) -> Result<f64> {
    Ok(gls_fit(data, design, tau)?.q_gls)
}

/// Log-likelihood of `τ`: the full likelihood at `β̂(τ)` for ML, the
/// coefficient-integrated (restricted) likelihood for REML.
pub fn log_likelihood(
    data: &Dataset,
    design: &DesignMatrix,
    tau: f64,
    estimator: Estimator,
) -> Result<f64> {
    let fit = gls_fit(data, design, tau)?;
    match estimator {
        Estimator::Reml => Ok(fit.log_marg_lik),
        Estimator::Ml => {
            let t2 = tau * tau;
            let log_var: f64 = data.se().iter().map(|s| (s * s + t2).ln()).sum();
            Ok(-0.5 * (data.k() as f64 * (2.0 * PI).ln() + log_var + fit.q_gls))
        }
        Estimator::Dl => Err(Error::Domain(
            "the DerSimonian-Laird estimator has no likelihood".into(),
        )),
    }
}

/// Point estimate of `τ`.
pub fn estimate_tau(data: &Dataset, design: &DesignMatrix, estimator: Estimator) -> Result<f64> {
    check_residual_dof(data, design)?;
    match estimator {
        Estimator::Dl => dersimonian_laird(data, design),
        Estimator::Ml | Estimator::Reml => maximize_likelihood(data, design, estimator),
    }
}

fn dersimonian_laird(data: &Dataset, design: &DesignMatrix) -> Result<f64> {
    if !design.is_intercept_only() {
        return Err(Error::UnsupportedDesign(
            "the DerSimonian-Laird estimator is only available for intercept-only models".into(),
        ));
    }
    let w = data.weights(0.0);
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|v| v * v).sum();
    let q0 = q_statistic(data, design, 0.0)?;
    let excess = q0 - (data.k() as f64 - 1.0);
    Ok((excess / (sw - sw2 / sw)).max(0.0).sqrt())
}

fn maximize_likelihood(data: &Dataset, design: &DesignMatrix, estimator: Estimator) -> Result<f64> {
    let ll = |t: f64| log_likelihood(data, design, t, estimator).unwrap_or(f64::NEG_INFINITY);

    // Upper end: start wide of the raw residual spread, then double while
    // the likelihood is still rising at the end.
    let fit0 = gls_fit(data, design, 0.0)?;
    let spread = data
        .y()
        .iter()
        .zip(&fit0.fitted)
        .map(|(y, f)| (y - f).abs())
        .fold(0.0, f64::max);
    let max_se = data.se().iter().cloned().fold(0.0, f64::max);
    let mut upper = 2.0 * (spread + max_se);
    for _ in 0..60 {
        if ll(upper) < ll(0.5 * upper) {
            break;
        }
        upper *= 2.0;
    }

    let step = upper / (COARSE_SCAN_POINTS - 1) as f64;
    let (best, _) = (0..COARSE_SCAN_POINTS)
        .map(|j| (j, ll(j as f64 * step)))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (j, v)| if v > acc.1 { (j, v) } else { acc },
        );
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1).min(COARSE_SCAN_POINTS - 1)) as f64 * step;
    if best == 0 && slope_at_zero(data, design, estimator)? <= 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-8 * upper;
    let mut tau = golden_section_min(|t| -ll(t), lo, hi, tol);

    // parabolic refinement through three points around the golden-section result
    let h = tol.max(1e-6 * tau);
    if tau - h > 0.0 {
        let (fl, fc, fr) = (ll(tau - h), ll(tau), ll(tau + h));
        let denom = fl - 2.0 * fc + fr;
        if denom < 0.0 {
            let candidate = tau + 0.5 * h * (fl - fr) / denom;
            if candidate > lo && candidate < hi && ll(candidate) > fc {
                tau = candidate;
            }
        }
    }
    if ll(0.0) >= ll(tau) {
        tau = 0.0;
    }
    Ok(tau)
}

/// Derivative of the log-likelihood with respect to `τ²` at `τ = 0`.
fn slope_at_zero(data: &Dataset, design: &DesignMatrix, estimator: Estimator) -> Result<f64> {
    let fit = gls_fit(data, design, 0.0)?;
    let mut score = 0.0;
    for i in 0..data.k() {
        let w = fit.weights[i];
        let r = data.y()[i] - fit.fitted[i];
        score += w * w * r * r - w;
        if estimator == Estimator::Reml {
            score += w * w * quad_form(&fit.v_beta, design.row(i));
        }
    }
    Ok(0.5 * score)
}

/// Q-profile confidence interval for `τ` with `k − p` degrees of freedom.
pub fn q_profile_ci(data: &Dataset, design: &DesignMatrix, level: f64) -> Result<QProfile> {
    let dof = check_residual_dof(data, design)?;
    check_level(level)?;
    let alpha = 1.0 - level;
    let q_target_lo = chi2_quantile(1.0 - 0.5 * alpha, dof)?;
    let q_target_hi = chi2_quantile(0.5 * alpha, dof)?;
    let q = |t: f64| q_statistic(data, design, t).unwrap_or(f64::NAN);
    let q0 = q(0.0);
    let max_se = data.se().iter().cloned().fold(0.0, f64::max);

    let solve = |target: f64| -> f64 {
        if q0 <= target {
            return 0.0;
        }
        let mut upper = max_se;
        for _ in 0..200 {
            if q(upper) < target {
                break;
            }
            upper *= 2.0;
        }
        bisect_increasing(|t| target - q(t), 0.0, upper, 1e-12 * upper)
    };
    let lo = solve(q_target_lo);
    let hi = solve(q_target_hi);
    Ok(QProfile {
        lo,
        hi,
        level,
        q_target_lo,
        q_target_hi,
        degenerate: hi == 0.0,
    })
}

/// Point estimate, Q-profile interval and BLUP fit at the estimate.
pub fn blup(data: &Dataset, design: &DesignMatrix, estimator: Estimator) -> Result<FreqResult> {
    let tau_hat = estimate_tau(data, design, estimator)?;
    Ok(FreqResult {
        tau_hat,
        estimator,
        tau_ci95: q_profile_ci(data, design, 0.95)?,
        fit_at_hat: gls_fit(data, design, tau_hat)?,
        q_at_zero: q_statistic(data, design, 0.0)?,
    })
}
