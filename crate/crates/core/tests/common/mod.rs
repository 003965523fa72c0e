//! Brute-force reference computations shared by the integration tests.
//! These use nalgebra and plain grids, not the library's own linear algebra
//! or quadrature.
#![allow(dead_code)]

use metatrace::{Dataset, DesignMatrix};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

pub fn dataset(y: &[f64], se: &[f64]) -> Dataset {
    let labels = (0..y.len()).map(|i| format!("s{i}")).collect();
    Dataset::new(labels, y.to_vec(), se.to_vec()).unwrap()
}

pub fn bundled(name: &str) -> Dataset {
    metatrace::datasets::find(name).unwrap().load().unwrap()
}

pub fn design_matrix(design: &DesignMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(design.k(), design.p(), |i, j| design.row(i)[j])
}

/// Conditional fit at fixed `tau` by textbook GLS with an LU inverse.
pub struct OracleFit {
    pub beta: DVector<f64>,
    pub v_beta: DMatrix<f64>,
    pub theta_mean: Vec<f64>,
    pub theta_sd: Vec<f64>,
    pub log_marg_lik: f64,
    pub q: f64,
}

pub fn oracle_fit(data: &Dataset, design: &DesignMatrix, tau: f64) -> OracleFit {
    let x = design_matrix(design);
    let (k, p) = (data.k(), design.p());
    let y = DVector::from_column_slice(data.y());
    let var = DVector::from_iterator(k, data.se().iter().map(|s| s * s + tau * tau));
    let w = DMatrix::from_diagonal(&var.map(|v| 1.0 / v));
    let gram = x.transpose() * &w * &x;
    let v_beta = gram.clone().lu().try_inverse().unwrap();
    let beta = &v_beta * x.transpose() * &w * &y;
    let fitted = &x * &beta;
    let resid = &y - &fitted;
    let q = (resid.transpose() * &w * &resid)[(0, 0)];
    let log_det_gram = gram.lu().determinant().ln();
    let log_marg_lik = -0.5
        * ((k - p) as f64 * (2.0 * PI).ln()
            + var.iter().map(|v| v.ln()).sum::<f64>()
            + log_det_gram
            + q);
    let mut theta_mean = Vec::with_capacity(k);
    let mut theta_sd = Vec::with_capacity(k);
    for i in 0..k {
        let s2 = data.se()[i].powi(2);
        let b = s2 / (s2 + tau * tau);
        let xi = x.row(i).transpose();
        let h = (xi.transpose() * &v_beta * &xi)[(0, 0)];
        theta_mean.push((1.0 - b) * y[i] + b * fitted[i]);
        theta_sd.push((s2 * tau * tau / (s2 + tau * tau) + b * b * h).sqrt());
    }
    OracleFit {
        beta,
        v_beta,
        theta_mean,
        theta_sd,
        log_marg_lik,
        q,
    }
}

pub fn half_normal_log_density(scale: f64, tau: f64) -> f64 {
    (2.0 / (scale * (2.0 * PI).sqrt())).ln() - tau * tau / (2.0 * scale * scale)
}

/// Posterior of `tau` tabulated on a uniform grid and integrated with the
/// trapezoid rule.
pub struct TrapezoidPosterior {
    pub tau: Vec<f64>,
    pub weight: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl TrapezoidPosterior {
    pub fn new(upper: f64, points: usize, log_target: impl Fn(f64) -> f64) -> Self {
        let h = upper / (points - 1) as f64;
        let tau: Vec<f64> = (0..points).map(|j| j as f64 * h).collect();
        let logs: Vec<f64> = tau.iter().map(|&t| log_target(t)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let mut weight: Vec<f64> = dens.iter().map(|d| d * h).collect();
        weight[0] *= 0.5;
        weight[points - 1] *= 0.5;
        let total: f64 = weight.iter().sum();
        weight.iter_mut().for_each(|w| *w /= total);
        let mut cdf = vec![0.0; points];
        for j in 1..points {
            cdf[j] = cdf[j - 1] + 0.5 * h * (dens[j - 1] + dens[j]) / total;
        }
        Self { tau, weight, cdf }
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c < q).max(1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let (t0, t1) = (self.tau[j - 1], self.tau[j]);
        t0 + (t1 - t0) * (q - c0) / (c1 - c0)
    }

    /// Shortest interval of mass `level` by scanning the left tail mass.
    pub fn shortest(&self, level: f64) -> (f64, f64) {
        let alpha = 1.0 - level;
        let mut best = (0.0, self.quantile(level));
        for j in 1..=20_000 {
            let a = alpha * j as f64 / 20_000.0;
            let (lo, hi) = (
                self.quantile(a),
                self.quantile((a + level).min(1.0 - 1e-15)),
            );
            if hi - lo < best.1 - best.0 {
                best = (lo, hi);
            }
        }
        best
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.tau
            .iter()
            .zip(&self.weight)
            .map(|(&t, w)| w * f(t))
            .sum()
    }
}

/// Marginal posterior of a normal-mixture target, tabulated on a uniform
/// grid in the effect scale.
pub fn mixture_moments(weights: &[f64], means: &[f64], sds: &[f64]) -> (f64, f64) {
    let mean: f64 = weights.iter().zip(means).map(|(w, m)| w * m).sum();
    let second: f64 = weights
        .iter()
        .zip(means.iter().zip(sds))
        .map(|(w, (m, s))| w * (s * s + m * m))
        .sum();
    (mean, (second - mean * mean).sqrt())
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
