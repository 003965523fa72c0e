//! Conditional estimates as functions of the heterogeneity, sampled on a grid.

use metatrace::{
    conditional_contrast, gls_fit, infinite_tau_limits, Contrast, Dataset, DesignMatrix,
    FreqResult, TauPosterior,
};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 201;
pub const MIN_GRID_POINTS: usize = 21;

/// One line of a trace plot: conditional mean and sd at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Lower panel content.
#[derive(Debug, Clone, PartialEq)]
pub enum BottomPanel {
    Bayes {
        /// Present for proper priors only.
        prior_density: Option<Vec<f64>>,
        posterior_density: Vec<f64>,
        median: f64,
        ci95: (f64, f64),
    },
    Freq {
        q_values: Vec<f64>,
        /// Q values bounding the acceptance region, upper then lower target.
        chi2_band: (f64, f64),
        tau_hat: f64,
        tau_ci95: (f64, f64),
    },
    /// Traces only, for fits without inference on `τ`.
    None,
}

/// Values approached as `τ → ∞`: the raw estimates and the unweighted
/// least-squares contrasts.
#[derive(Debug, Clone, PartialEq)]
pub struct InfinityRefs {
    pub studies: Vec<f64>,
    pub contrasts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub tau_grid: Vec<f64>,
    pub study_traces: Vec<Series>,
    pub contrast_traces: Vec<Series>,
    pub bottom_panel: BottomPanel,
    pub infinity_refs: InfinityRefs,
}

/// Source of the lower panel.
#[derive(Debug, Clone, Copy)]
pub enum TraceMode<'a> {
    Bayes(&'a TauPosterior),
    Freq(&'a FreqResult),
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    /// Upper end of the grid; chosen from the mode when absent.
    pub tau_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            tau_max: None,
        }
    }
}

impl GridSpec {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            tau_max: None,
        }
    }

    /// Default extent: the 99.5% posterior quantile, or 1.1 times the
    /// Q-profile upper bound, at least 1.5 times the median or estimate.
    /// Falls back to the largest standard error when that is still zero.
    pub fn extent(&self, data: &Dataset, mode: TraceMode<'_>) -> Result<f64> {
        if let Some(t) = self.tau_max {
            return Ok(t);
        }
        let t = match mode {
            TraceMode::Bayes(post) => post.quantile(0.995)?.max(1.5 * post.median()),
            TraceMode::Freq(fr) => (1.1 * fr.tau_ci95.hi).max(1.5 * fr.tau_hat),
            TraceMode::Conditional => 0.0,
        };
        if t > 0.0 {
            Ok(t)
        } else {
            Ok(data.se().iter().cloned().fold(0.0, f64::max))
        }
    }

    pub fn nodes(&self, tau_max: f64) -> Result<Vec<f64>> {
        if self.points < MIN_GRID_POINTS {
            return Err(Error::GridTooSmall {
                min: MIN_GRID_POINTS,
                found: self.points,
            });
        }
        if !(tau_max > 0.0 && tau_max.is_finite()) {
            return Err(Error::GridExtent(tau_max));
        }
        let n = self.points - 1;
        Ok((0..=n).map(|j| tau_max * j as f64 / n as f64).collect())
    }
}

/// Evaluates every study and contrast trace on the grid, plus the lower
/// panel for `mode`.
pub fn compute_trace(
    data: &Dataset,
    design: &DesignMatrix,
    contrasts: &[Contrast],
    mode: TraceMode<'_>,
    grid: &GridSpec,
) -> Result<TraceData> {
    for c in contrasts {
        if c.len() != design.p() {
            return Err(metatrace::Error::Dimension {
                expected: design.p(),
                found: c.len(),
            }
            .into());
        }
    }
    let tau_grid = grid.nodes(grid.extent(data, mode)?)?;
    let fits = tau_grid
        .par_iter()
        .map(|&t| gls_fit(data, design, t))
        .collect::<metatrace::Result<Vec<_>>>()?;

    let study_traces = data
        .labels()
        .iter()
        .enumerate()
        .map(|(i, label)| Series {
            label: label.clone(),
            mean: fits.iter().map(|f| f.theta_mean[i]).collect(),
            sd: fits.iter().map(|f| f.theta_sd[i]).collect(),
        })
        .collect();
    let contrast_traces = contrasts
        .iter()
        .map(|c| {
            let (mean, sd) = fits
                .iter()
                .map(|f| conditional_contrast(f, c))
                .collect::<metatrace::Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(Series {
                label: c.label().to_string(),
                mean,
                sd,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let limits = infinite_tau_limits(data, design)?;
    let infinity_refs = InfinityRefs {
        studies: limits.theta,
        contrasts: contrasts.iter().map(|c| c.apply(&limits.beta)).collect(),
    };

    let bottom_panel = match mode {
        TraceMode::Bayes(post) => BottomPanel::Bayes {
            prior_density: post.prior().filter(|p| p.is_proper()).map(|p| {
                tau_grid
                    .iter()
                    .map(|&t| p.density(t).unwrap_or(0.0))
                    .collect()
            }),
            posterior_density: tau_grid.iter().map(|&t| post.density(t)).collect(),
            median: post.median(),
            ci95: post.ci95(),
        },
        TraceMode::Freq(fr) => BottomPanel::Freq {
            q_values: fits.iter().map(|f| f.q_gls).collect(),
            chi2_band: (fr.tau_ci95.q_target_lo, fr.tau_ci95.q_target_hi),
            tau_hat: fr.tau_hat,
            tau_ci95: (fr.tau_ci95.lo, fr.tau_ci95.hi),
        },
        TraceMode::Conditional => BottomPanel::None,
    };

    Ok(TraceData {
        tau_grid,
        study_traces,
        contrast_traces,
        bottom_panel,
        infinity_refs,
    })
}
