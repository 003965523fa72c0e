//! Posterior of the heterogeneity `τ` and marginal (τ-averaged) inference.
//!
//! The unnormalized posterior `p(τ) · p(y | τ)` is integrated by adaptive
//! Simpson quadrature on a truncated support `[0, tau_max]`. The accepted
//! Simpson panels give the CDF and quantiles, and their composite nodes and
//! weights form the grid over which conditional normal fits are mixed into
//! marginal posteriors.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{Contrast, Dataset, DesignMatrix};
use crate::error::{Error, Result};
use crate::mixture::{check_level, NormalMixture};
use crate::nnhm::{check_design, conditional_contrast, gls_fit, predict_new_study, ConditionalFit};
use crate::optimize::{bisect_increasing, golden_section_min};
use crate::prior::HeterogeneityPrior;
use crate::quadrature::{self, Panel};

/// Integrand at `tau_max` must be below this fraction of its maximum.
const SUPPORT_REL_DENSITY: f64 = 1e-12;
/// Tail mass allowed beyond `tau_max`.
const SUPPORT_TAIL_MASS: f64 = 1e-4;
/// Successive normalization estimates must agree to this relative tolerance.
const NORMALIZATION_TOL: f64 = 1e-8;
const MIN_INITIAL_PIECES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalMethod {
    /// Minimal-width interval.
    #[default]
    Shortest,
    /// Equal tail probabilities.
    Central,
}

impl FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shortest" => Ok(Self::Shortest),
            "central" => Ok(Self::Central),
            other => Err(Error::Domain(format!(
                "unknown interval method `{other}` (expected shortest or central)"
            ))),
        }
    }
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Shortest => "shortest",
            Self::Central => "central",
        })
    }
}

type LogTarget = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone)]
struct Model {
    data: Dataset,
    design: DesignMatrix,
}

/// Normalized posterior distribution of `τ`.
#[derive(Clone)]
pub struct TauPosterior {
    prior: Option<HeterogeneityPrior>,
    model: Option<Model>,
    log_target: LogTarget,
    log_norm_const: f64,
    tau_max: f64,
    /// Simpson panels holding the normalized density.
    panels: Vec<Panel>,
    /// `cum[i]` is the mass to the left of panel `i`; `cum[len] = 1`.
    cum: Vec<f64>,
    grid: Vec<(f64, f64)>,
    median: f64,
    ci95: (f64, f64),
}

impl fmt::Debug for TauPosterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TauPosterior")
            .field("prior", &self.prior)
            .field("log_norm_const", &self.log_norm_const)
            .field("tau_max", &self.tau_max)
            .field("grid_len", &self.grid.len())
            .field("median", &self.median)
            .field("ci95", &self.ci95)
            .finish()
    }
}

/// Builds the posterior of `τ` under `prior` and a flat prior on the
/// regression coefficients.
pub fn build_posterior(
    data: &Dataset,
    design: &DesignMatrix,
    prior: HeterogeneityPrior,
) -> Result<TauPosterior> {
    check_design(data, design)?;
    let (k, p) = (data.k(), design.p());
    if !prior.is_proper() && k < p + 2 {
        return Err(Error::ImproperPosterior { k, p });
    }
    if k < 2 {
        return Err(Error::TooFewStudies {
            analysis: "a heterogeneity posterior",
            k,
            needed: 2,
        });
    }
    // surfaces rank problems before any quadrature
    gls_fit(data, design, 0.0)?;

    let model = Model {
        data: data.clone(),
        design: design.clone(),
    };
    let captured = model.clone();
    let log_target: LogTarget =
        Arc::new(
            move |tau: f64| match gls_fit(&captured.data, &captured.design, tau) {
                Ok(fit) => prior.log_density_unchecked(tau) + fit.log_marg_lik,
                Err(_) => f64::NEG_INFINITY,
            },
        );
    let se = data.se();
    let start = se.iter().cloned().fold(0.0, f64::max);
    let fine = se.iter().cloned().fold(f64::INFINITY, f64::min);
    TauPosterior::from_parts(Some(prior), Some(model), log_target, start, fine)
}

/// Posterior on the dataset with the study `label` removed.
pub fn leave_one_out(
    data: &Dataset,
    design: &DesignMatrix,
    prior: HeterogeneityPrior,
    label: &str,
) -> Result<TauPosterior> {
    check_design(data, design)?;
    let index = data.index_of(label)?;
    if data.k() == 1 {
        return Err(Error::TooFewStudies {
            analysis: "leave-one-out",
            k: 0,
            needed: 2,
        });
    }
    let reduced = data.without_index(index)?;
    let reduced_design = design.without_row(index)?;
    build_posterior(&reduced, &reduced_design, prior)
}

impl TauPosterior {
    /// Normalizes an arbitrary log-density on `τ ≥ 0`. `scale` is a rough
    /// length scale of the distribution used to seed the support search.
    /// Such posteriors carry no model, so marginal effects are unavailable.
    pub fn from_log_density<F>(log_density: F, scale: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Self::from_parts(None, None, Arc::new(log_density), scale, scale)
    }

    fn from_parts(
        prior: Option<HeterogeneityPrior>,
        model: Option<Model>,
        log_target: LogTarget,
        start: f64,
        fine_scale: f64,
    ) -> Result<Self> {
        let (mut tau_max, log_shift) = support(&*log_target, start)?;
        let shifted = |t: f64| (log_target(t) - log_shift).exp();
        let mut extensions = 0;
        let (panels, total) = loop {
            let bp = breakpoints(tau_max, fine_scale);
            let (panels, total) = integrate(&shifted, &bp)?;
            let tail = tail_mass(&*log_target, log_shift, tau_max);
            if tail < SUPPORT_TAIL_MASS * total {
                break (panels, total);
            }
            extensions += 1;
            if extensions > 40 {
                return Err(Error::Numeric(
                    "posterior tail does not decay; support could not be truncated".into(),
                ));
            }
            tau_max *= 2.0;
        };

        let panels: Vec<Panel> = panels.iter().map(|p| p.scaled(1.0 / total)).collect();
        let mut cum = Vec::with_capacity(panels.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for p in &panels {
            acc += p.integral();
            cum.push(acc);
        }
        // absorb rounding so the last entry is exactly one
        let last = acc;
        for c in cum.iter_mut() {
            *c /= last;
        }
        let (nodes, weights) = quadrature::nodes_and_weights(&panels);
        let wsum: f64 = weights.iter().sum();
        let grid = nodes
            .into_iter()
            .zip(weights)
            .map(|(t, w)| (t, w / wsum))
            .collect();

        let mut post = Self {
            prior,
            model,
            log_target,
            log_norm_const: log_shift + total.ln(),
            tau_max,
            panels,
            cum,
            grid,
            median: f64::NAN,
            ci95: (f64::NAN, f64::NAN),
        };
        post.median = post.quantile_unchecked(0.5);
        post.ci95 = post.credible_interval(0.95, IntervalMethod::Shortest)?;
        Ok(post)
    }

    pub fn prior(&self) -> Option<HeterogeneityPrior> {
        self.prior
    }

    pub fn data(&self) -> Option<&Dataset> {
        self.model.as_ref().map(|m| &m.data)
    }

    pub fn design(&self) -> Option<&DesignMatrix> {
        self.model.as_ref().map(|m| &m.design)
    }

    /// Log of the normalizing constant `∫ p(τ) p(y|τ) dτ` over `[0, tau_max]`.
    pub fn log_norm_const(&self) -> f64 {
        self.log_norm_const
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// Quadrature nodes and normalized weights; the first node is `τ = 0`.
    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }

    pub fn median(&self) -> f64 {
        self.median
    }

    /// Shortest 95% credible interval.
    pub fn ci95(&self) -> (f64, f64) {
        self.ci95
    }

    pub fn mean(&self) -> f64 {
        self.grid.iter().map(|(t, w)| t * w).sum()
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        let second: f64 = self.grid.iter().map(|(t, w)| t * t * w).sum();
        (second - m * m).max(0.0).sqrt()
    }

    /// Normalized posterior density; zero for negative `tau`.
    pub fn density(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        let v = ((self.log_target)(tau) - self.log_norm_const).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    pub fn cdf(&self, tau: f64) -> f64 {
        if !(tau > 0.0) {
            return 0.0;
        }
        if tau >= self.tau_max {
            return 1.0;
        }
        let i = self.panels.partition_point(|p| p.b <= tau);
        let p = &self.panels[i];
        let h = tau - p.a;
        if h <= 0.0 {
            return self.cum[i];
        }
        let part = h / 6.0 * (p.fa + 4.0 * self.density(p.a + 0.5 * h) + self.density(tau));
        (self.cum[i] + part).clamp(self.cum[i], self.cum[i + 1])
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
        }
        Ok(self.quantile_unchecked(q))
    }

    /// Quantile for `q ∈ [0, 1]`, mapping the end points to `0` and `tau_max`.
    fn quantile_unchecked(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q >= 1.0 {
            return self.tau_max;
        }
        let i = self.cum[1..]
            .partition_point(|&c| c <= q)
            .min(self.panels.len() - 1);
        let p = &self.panels[i];
        bisect_increasing(|t| self.cdf(t) - q, p.a, p.b, 1e-15 * self.tau_max)
    }

    /// Credible interval holding posterior mass `level`.
    pub fn credible_interval(&self, level: f64, method: IntervalMethod) -> Result<(f64, f64)> {
        check_level(level)?;
        let alpha = 1.0 - level;
        Ok(match method {
            IntervalMethod::Central => (
                self.quantile_unchecked(0.5 * alpha),
                self.quantile_unchecked(1.0 - 0.5 * alpha),
            ),
            IntervalMethod::Shortest => {
                let width =
                    |a: f64| self.quantile_unchecked(a + level) - self.quantile_unchecked(a);
                let a = golden_section_min(width, 0.0, alpha, 1e-10 * alpha);
                let best = if width(0.0) <= width(a) { 0.0 } else { a };
                (
                    self.quantile_unchecked(best),
                    self.quantile_unchecked(best + level),
                )
            }
        })
    }

    fn model(&self) -> Result<&Model> {
        self.model.as_ref().ok_or_else(|| {
            Error::Domain("posterior was built from a bare density and has no model".into())
        })
    }

    /// Conditional fits at every grid node, in grid order.
    pub fn conditional_fits(&self) -> Result<Vec<ConditionalFit>> {
        let model = self.model()?;
        self.grid
            .par_iter()
            .map(|&(tau, _)| gls_fit(&model.data, &model.design, tau))
            .collect()
    }

    /// Marginal posteriors for several targets, sharing one pass of
    /// conditional fits over the grid.
    pub fn marginal_effects(
        &self,
        targets: &[MarginalTarget],
        method: IntervalMethod,
    ) -> Result<Vec<MarginalSummary>> {
        let model = self.model()?;
        for t in targets {
            t.validate(&model.data, &model.design)?;
        }
        let fits = self.conditional_fits()?;
        let weights: Vec<f64> = self.grid.iter().map(|&(_, w)| w).collect();
        targets
            .par_iter()
            .map(|target| {
                let mut means = Vec::with_capacity(fits.len());
                let mut sds = Vec::with_capacity(fits.len());
                for fit in &fits {
                    let (m, s) = target.conditional(fit)?;
                    means.push(m);
                    sds.push(s);
                }
                let mix = NormalMixture::new(weights.clone(), means, sds)?;
                MarginalSummary::from_mixture(target.label(&model.data), &mix, method)
            })
            .collect()
    }

    pub fn marginal_effect(
        &self,
        target: &MarginalTarget,
        method: IntervalMethod,
    ) -> Result<MarginalSummary> {
        Ok(self
            .marginal_effects(std::slice::from_ref(target), method)?
            .remove(0))
    }
}

/// Free-function form of [`TauPosterior::marginal_effect`].
pub fn marginal_effect(
    post: &TauPosterior,
    target: &MarginalTarget,
    method: IntervalMethod,
) -> Result<MarginalSummary> {
    post.marginal_effect(target, method)
}

/// Quantity whose marginal posterior is requested.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalTarget {
    /// True effect `θ_i` of the study at this index.
    Study(usize),
    Contrast(Contrast),
    /// True effect of a new study with covariate row `x`.
    Prediction {
        label: String,
        x: Vec<f64>,
    },
}

impl MarginalTarget {
    fn validate(&self, data: &Dataset, design: &DesignMatrix) -> Result<()> {
        let p = design.p();
        match self {
            Self::Study(i) if *i >= data.k() => Err(Error::Dimension {
                expected: data.k(),
                found: *i,
            }),
            Self::Contrast(c) if c.len() != p => Err(Error::Dimension {
                expected: p,
                found: c.len(),
            }),
            Self::Prediction { x, .. } if x.len() != p => Err(Error::Dimension {
                expected: p,
                found: x.len(),
            }),
            _ => Ok(()),
        }
    }

    fn label(&self, data: &Dataset) -> String {
        match self {
            Self::Study(i) => data.labels()[*i].clone(),
            Self::Contrast(c) => c.label().to_string(),
            Self::Prediction { label, .. } => label.clone(),
        }
    }

    /// Conditional mean and sd at one fit.
    pub fn conditional(&self, fit: &ConditionalFit) -> Result<(f64, f64)> {
        match self {
            Self::Study(i) => Ok((fit.theta_mean[*i], fit.theta_sd[*i])),
            Self::Contrast(c) => conditional_contrast(fit, c),
            Self::Prediction { x, .. } => predict_new_study(fit, x),
        }
    }
}

/// Summary of a marginal posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSummary {
    pub target: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub ci95: (f64, f64),
}

impl MarginalSummary {
    fn from_mixture(target: String, mix: &NormalMixture, method: IntervalMethod) -> Result<Self> {
        let median = mix.quantile(0.5)?;
        let (lo, hi) = mix.interval(0.95, method)?;
        Ok(Self {
            target,
            mean: mix.mean(),
            sd: mix.sd(),
            median,
            ci95: (lo.min(median), hi.max(median)),
        })
    }
}

/// Doubles the upper end from `start` until the integrand there has fallen
/// below `SUPPORT_REL_DENSITY` of the largest value seen. Returns the end
/// point and the log of that maximum.
fn support(log_target: &(dyn Fn(f64) -> f64 + Send + Sync), start: f64) -> Result<(f64, f64)> {
    let mut t = start;
    let mut log_max = log_target(0.0);
    for j in 1..=64 {
        log_max = log_max.max(log_target(t * j as f64 / 64.0));
    }
    for j in 1..=40 {
        log_max = log_max.max(log_target(t * 0.5f64.powi(j)));
    }
    let cutoff = SUPPORT_REL_DENSITY.ln();
    for _ in 0..400 {
        if !log_max.is_finite() {
            break;
        }
        if log_target(t) < log_max + cutoff {
            return Ok((t, log_max));
        }
        for j in 1..=32 {
            log_max = log_max.max(log_target(t + t * j as f64 / 32.0));
        }
        t *= 2.0;
    }
    Err(Error::Numeric(
        "could not locate the posterior support (integrand not finite or not decaying)".into(),
    ))
}

/// Rough tail mass beyond `t` from the local power-law decay rate,
/// in the same shifted scale as the quadrature.
fn tail_mass(log_target: &(dyn Fn(f64) -> f64 + Send + Sync), log_shift: f64, t: f64) -> f64 {
    let at = log_target(t);
    let before = log_target(0.5 * t);
    let decay = (before - at) / std::f64::consts::LN_2;
    if decay <= 1.0 {
        return f64::INFINITY;
    }
    (at - log_shift).exp() * t / (decay - 1.0)
}

/// Octave breakpoints from `tau_max` down to `1e-3 · fine_scale`, plus zero,
/// with each octave split evenly so there are at least
/// `MIN_INITIAL_PIECES` pieces.
fn breakpoints(tau_max: f64, fine_scale: f64) -> Vec<f64> {
    let floor = 1e-3 * fine_scale.min(tau_max);
    let mut edges = vec![tau_max];
    let mut t = tau_max;
    while t > floor {
        t *= 0.5;
        edges.push(t);
    }
    edges.push(0.0);
    edges.reverse();
    let per = MIN_INITIAL_PIECES.div_ceil(edges.len() - 1).max(2);
    let mut out = Vec::with_capacity((edges.len() - 1) * per + 1);
    for w in edges.windows(2) {
        for j in 0..per {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / per as f64);
        }
    }
    out.push(tau_max);
    out
}

fn integrate<F: Fn(f64) -> f64 + Sync>(f: &F, bp: &[f64]) -> Result<(Vec<Panel>, f64)> {
    let rough: f64 = bp
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1])))
        .sum();
    if !(rough > 0.0 && rough.is_finite()) {
        return Err(Error::Numeric(
            "posterior integrand vanishes on its support".into(),
        ));
    }
    let mut tol = 1e-10 * rough;
    let mut previous: Option<f64> = None;
    for _ in 0..8 {
        let panels = quadrature::adaptive_simpson(f, bp, tol);
        let total = quadrature::total(&panels);
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numeric("posterior normalization failed".into()));
        }
        if let Some(prev) = previous {
            if (total - prev).abs() <= NORMALIZATION_TOL * total {
                return Ok((panels, total));
            }
        }
        previous = Some(total);
        tol *= 0.1;
    }
    Err(Error::Numeric(
        "posterior normalization did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![-1.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn improper_uniform_is_rejected() {
        let d = Dataset::new(vec!["a".into(), "b".into()], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let err = build_posterior(
            &d,
            &DesignMatrix::intercept_only(2),
            HeterogeneityPrior::Uniform,
        )
        .unwrap_err();
        assert_eq!(err, Error::ImproperPosterior { k: 2, p: 1 });
        // a proper prior is fine with two studies
        build_posterior(
            &d,
            &DesignMatrix::intercept_only(2),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
        )
        .unwrap();
    }

    #[test]
    fn single_study_is_rejected() {
        let d = Dataset::new(vec!["a".into()], vec![0.0], vec![1.0]).unwrap();
        let err = build_posterior(
            &d,
            &DesignMatrix::intercept_only(1),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooFewStudies { .. }));
    }

    #[test]
    fn grid_contract() {
        let post = build_posterior(
            &toy(),
            &DesignMatrix::intercept_only(3),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
        )
        .unwrap();
        let grid = post.grid();
        assert!(grid.len() >= 401);
        assert_eq!(grid[0].0, 0.0);
        assert!(grid.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(grid.iter().all(|&(_, w)| w >= 0.0));
        assert!((grid.iter().map(|g| g.1).sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(post.cdf(post.tau_max()) >= 0.9999);
        assert_eq!(post.quantile(0.5).unwrap(), post.median());
        let (lo, hi) = post.ci95();
        assert!(lo >= 0.0 && lo <= post.median() && post.median() <= hi);
        assert!(post.quantile(0.0).is_err() && post.quantile(1.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let post = build_posterior(
            &toy(),
            &DesignMatrix::intercept_only(3),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
        )
        .unwrap();
        for j in 1..200 {
            let t = post.tau_max() * (j as f64 / 200.0).powi(3);
            let c = post.cdf(t);
            if c > 1e-9 && c < 1.0 - 1e-9 {
                let back = post.quantile(c).unwrap();
                assert!(
                    (back - t).abs() < 1e-6 * post.tau_max(),
                    "t {t} back {back}"
                );
            }
        }
    }

    #[test]
    fn interval_methods() {
        let post = build_posterior(
            &toy(),
            &DesignMatrix::intercept_only(3),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
        )
        .unwrap();
        let central = post
            .credible_interval(0.9, IntervalMethod::Central)
            .unwrap();
        assert_eq!(central.0, post.quantile(0.05).unwrap());
        assert_eq!(central.1, post.quantile(0.95).unwrap());
        let short = post
            .credible_interval(0.9, IntervalMethod::Shortest)
            .unwrap();
        assert!(short.1 - short.0 <= central.1 - central.0 + 1e-12);
        assert!((post.cdf(short.1) - post.cdf(short.0) - 0.9).abs() < 1e-6);
        assert!(post
            .credible_interval(1.0, IntervalMethod::Central)
            .is_err());
    }

    #[test]
    fn parses_interval_method() {
        assert_eq!(
            "central".parse::<IntervalMethod>().unwrap(),
            IntervalMethod::Central
        );
        assert_eq!(
            "Shortest".parse::<IntervalMethod>().unwrap(),
            IntervalMethod::Shortest
        );
        assert!("hpd".parse::<IntervalMethod>().is_err());
    }

    #[test]
    fn bare_density_has_no_model() {
        let post = TauPosterior::from_log_density(|t| -t, 1.0).unwrap();
        assert!((post.median() - 2f64.ln()).abs() < 1e-7);
        assert!(post
            .marginal_effect(&MarginalTarget::Study(0), IntervalMethod::Central)
            .is_err());
    }

    #[test]
    fn leave_one_out_unknown_label() {
        let err = leave_one_out(
            &toy(),
            &DesignMatrix::intercept_only(3),
            HeterogeneityPrior::half_normal(1.0).unwrap(),
            "zzz",
        )
        .unwrap_err();
        assert_eq!(err, Error::UnknownLabel("zzz".into()));
    }
}
