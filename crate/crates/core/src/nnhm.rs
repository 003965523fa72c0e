//! Conditional inference at a fixed heterogeneity `τ`.
//!
//! Given `τ`, the normal-normal hierarchical model (with a flat prior on the
//! regression coefficients) has closed-form normal conditionals for the
//! coefficients `β` and for every study's true effect `θ_i`. These are the
//! vertical slices of a trace plot, and they coincide with the frequentist
//! GLS estimates / BLUPs at that `τ`.

use std::f64::consts::PI;

use crate::data::{Contrast, Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{dot, quad_form};

/// Everything that is known once `τ` is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFit {
    pub tau: f64,
    /// Conditional mean of `β`.
    pub beta_hat: Vec<f64>,
    /// Conditional covariance of `β`, row-major `p × p`.
    pub v_beta: Vec<f64>,
    /// `w_i = 1 / (s_i² + τ²)`.
    pub weights: Vec<f64>,
    /// `B_i = s_i² / (s_i² + τ²)`.
    pub shrink_factor: Vec<f64>,
    /// Fitted values `x_iᵀ β̂(τ)`.
    pub fitted: Vec<f64>,
    pub theta_mean: Vec<f64>,
    pub theta_sd: Vec<f64>,
    /// Log-likelihood with `β` integrated out under a flat prior (the
    /// restricted likelihood).
    pub log_marg_lik: f64,
    /// `Q(τ) = Σ w_i (y_i − x_iᵀβ̂)²`.
    pub q_gls: f64,
}

impl ConditionalFit {
    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }

    /// Conditional standard deviation of `β_j`.
    pub fn beta_sd(&self, j: usize) -> f64 {
        self.v_beta[j * self.p() + j].sqrt()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "heterogeneity must be finite and nonnegative, got {tau}"
        )))
    }
}

pub(crate) fn check_design(data: &Dataset, design: &DesignMatrix) -> Result<()> {
    if design.k() != data.k() {
        return Err(Error::Dimension {
            expected: data.k(),
            found: design.k(),
        });
    }
    if data.k() < design.p() {
        return Err(Error::Dimension {
            expected: design.p(),
            found: data.k(),
        });
    }
    Ok(())
}

/// Generalized least-squares fit and shrinkage estimates at heterogeneity `tau`.
pub fn gls_fit(data: &Dataset, design: &DesignMatrix, tau: f64) -> Result<ConditionalFit> {
    check_tau(tau)?;
    check_design(data, design)?;
    let k = data.k();
    let p = design.p();
    let y = data.y();
    let se = data.se();
    let t2 = tau * tau;

    let weights = data.weights(tau);
    let (_, chol) = design.factor_gram(&weights)?;
    let beta_hat = chol.solve(&design.weighted_cross(&weights, y));
    let v_beta = chol.inverse();

    let mut shrink_factor = Vec::with_capacity(k);
    let mut fitted = Vec::with_capacity(k);
    let mut theta_mean = Vec::with_capacity(k);
    let mut theta_sd = Vec::with_capacity(k);
    let mut q_gls = 0.0;
    let mut log_var_sum = 0.0;
    for i in 0..k {
        let x = design.row(i);
        let s2 = se[i] * se[i];
        let total = s2 + t2;
        let b = s2 / total;
        let fit = dot(x, &beta_hat);
        let resid = y[i] - fit;
        q_gls += weights[i] * resid * resid;
        log_var_sum += total.ln();
        let mean = if b == 1.0 {
            fit
        } else {
            (1.0 - b) * y[i] + b * fit
        };
        let var = s2 * t2 / total + b * b * quad_form(&v_beta, x);
        shrink_factor.push(b);
        fitted.push(fit);
        theta_mean.push(mean);
        theta_sd.push(var.max(0.0).sqrt());
    }
    let log_marg_lik =
        -0.5 * ((k - p) as f64 * (2.0 * PI).ln() + log_var_sum + chol.log_det() + q_gls);

    Ok(ConditionalFit {
        tau,
        beta_hat,
        v_beta,
        weights,
        shrink_factor,
        fitted,
        theta_mean,
        theta_sd,
        log_marg_lik,
        q_gls,
    })
}

/// Conditional mean and standard deviation of `cᵀβ`.
pub fn conditional_contrast(fit: &ConditionalFit, contrast: &Contrast) -> Result<(f64, f64)> {
    if contrast.len() != fit.p() {
        return Err(Error::Dimension {
            expected: fit.p(),
            found: contrast.len(),
        });
    }
    let c = contrast.coefficients();
    Ok((
        dot(c, &fit.beta_hat),
        quad_form(&fit.v_beta, c).max(0.0).sqrt(),
    ))
}

/// Predictive distribution of a new study's true effect with covariates `x_new`.
pub fn predict_new_study(fit: &ConditionalFit, x_new: &[f64]) -> Result<(f64, f64)> {
    if x_new.len() != fit.p() {
        return Err(Error::Dimension {
            expected: fit.p(),
            found: x_new.len(),
        });
    }
    let var = quad_form(&fit.v_beta, x_new) + fit.tau * fit.tau;
    Ok((dot(x_new, &fit.beta_hat), var.max(0.0).sqrt()))
}

/// Analytic `τ = ∞` limits: study effects tend to `y_i`, coefficients to
/// their unweighted least-squares values.
#[derive(Debug, Clone, PartialEq)]
pub struct InfiniteTauLimits {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn infinite_tau_limits(data: &Dataset, design: &DesignMatrix) -> Result<InfiniteTauLimits> {
    check_design(data, design)?;
    Ok(InfiniteTauLimits {
        theta: data.y().to_vec(),
        beta: design.ols_coefficients(data.y())?,
    })
}
