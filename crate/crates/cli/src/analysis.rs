//! Runs a configured analysis in memory.

use metatrace::csvio::parse_dataset;
use metatrace::{
    blup, build_posterior, conditional_contrast, predict_new_study, Contrast, Dataset,
    DesignMatrix, FreqResult, HeterogeneityPrior, MarginalSummary, MarginalTarget, TauPosterior,
    INTERCEPT,
};
use metatrace_plots::{compute_trace, GridSpec, TraceData, TraceMode};

use crate::config::{AnalysisConfig, DataSource, Mode, OutputKind};
use crate::error::{CliError, Result};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub enum TauSummary {
    Bayes {
        prior: HeterogeneityPrior,
        median: f64,
        mean: f64,
        sd: f64,
        ci95: (f64, f64),
        tau_max: f64,
    },
    Freq {
        estimator: metatrace::Estimator,
        estimate: f64,
        ci95: (f64, f64),
        q_targets: (f64, f64),
        degenerate: bool,
        q_at_zero: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub config: AnalysisConfig,
    pub source_name: String,
    /// Data as analysed, after any exclusion.
    pub data: Dataset,
    pub design: DesignMatrix,
    pub tau: TauSummary,
    pub studies: Vec<MarginalSummary>,
    pub contrasts: Vec<(Contrast, MarginalSummary)>,
    pub predictions: Vec<(Vec<f64>, MarginalSummary)>,
    pub trace: Option<TraceData>,
    pub warnings: Vec<String>,
}

pub fn load_data(source: &DataSource) -> Result<(Dataset, String)> {
    match source {
        DataSource::Bundled(name) => {
            let entry = metatrace::datasets::find(name)?;
            Ok((entry.load()?, entry.name.to_string()))
        }
        DataSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
            let data = parse_dataset(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            Ok((data, path.display().to_string()))
        }
    }
}

/// Contrasts to report: the intercept as `mu` for a plain meta-analysis or
/// every coefficient for a regression, followed by explicit ones.
fn contrasts_for(config: &AnalysisConfig, design: &DesignMatrix) -> Result<Vec<Contrast>> {
    let p = design.p();
    let mut out = Vec::new();
    if design.is_intercept_only() {
        out.push(Contrast::new("mu", vec![1.0])?);
    } else {
        out.extend((0..p).map(|j| Contrast::coefficient(design, j)));
    }
    for c in &config.contrasts {
        if c.coefficients.len() != p {
            return Err(CliError::Input(format!(
                "contrast `{}` has {} coefficients but the model has {p} ({})",
                c.label,
                c.coefficients.len(),
                design.column_labels().join(", ")
            )));
        }
        out.push(Contrast::new(c.label.clone(), c.coefficients.clone())?);
    }
    Ok(out)
}

/// Covariate rows for `--predict-at`; every regression covariate must be set.
fn prediction_rows(
    config: &AnalysisConfig,
    design: &DesignMatrix,
) -> Result<Vec<(String, Vec<f64>)>> {
    let labels = design.column_labels();
    config
        .predict_at
        .iter()
        .map(|p| {
            for (name, _) in &p.values {
                if !labels[1..].contains(name) {
                    return Err(CliError::Input(format!(
                        "`{name}` in --predict-at is not a regression covariate"
                    )));
                }
            }
            let row = labels
                .iter()
                .map(|col| {
                    if col == INTERCEPT {
                        return Ok(1.0);
                    }
                    p.values
                        .iter()
                        .find(|(n, _)| n == col)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| {
                            CliError::Input(format!(
                                "--predict-at `{}` does not set `{col}`",
                                p.label
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((p.label.clone(), row))
        })
        .collect()
}

pub fn run_analysis(config: &AnalysisConfig) -> Result<Analysis> {
    config.validate()?;
    let (full, source_name) = load_data(&config.source)?;
    let mut warnings = Vec::new();
    let data = match &config.exclude {
        Some(label) => full.without(label)?,
        None => full,
    };
    let design = DesignMatrix::from_covariates(&data, &config.regression)?;
    let mut contrasts = contrasts_for(config, &design)?;
    let rows = prediction_rows(config, &design)?;
    for (label, row) in &rows {
        contrasts.push(Contrast::new(label.clone(), row.clone())?);
    }
    // Explicit contrasts and prediction points replace the defaults in the trace.
    let defaults = contrasts.len() - config.contrasts.len() - rows.len();
    let traced = if defaults < contrasts.len() {
        &contrasts[defaults..]
    } else {
        &contrasts[..]
    };
    let mut prediction_points: Vec<(String, Vec<f64>)> = rows
        .into_iter()
        .map(|(label, row)| (format!("new study at {label}"), row))
        .collect();
    if design.is_intercept_only() {
        prediction_points.insert(0, ("prediction".into(), vec![1.0]));
    }
    for h in &config.highlight {
        let known = data.labels().contains(h) || contrasts.iter().any(|c| c.label() == h);
        if !known {
            return Err(CliError::Input(format!(
                "--highlight `{h}` is neither a study nor a contrast"
            )));
        }
    }

    let want_trace = config
        .outputs
        .iter()
        .any(|o| matches!(o, OutputKind::Trace | OutputKind::Csv));
    let grid = GridSpec::with_points(config.grid_points);

    let (tau, studies, contrast_summaries, predictions, trace) = match config.mode {
        Mode::Bayes => {
            let prior = config.prior.expect("validated").resolve(&data);
            let post = build_posterior(&data, &design, prior)?;
            let studies = (0..data.k()).map(MarginalTarget::Study);
            let cs = contrasts.iter().cloned().map(MarginalTarget::Contrast);
            let ps = prediction_points
                .iter()
                .map(|(label, x)| MarginalTarget::Prediction {
                    label: label.clone(),
                    x: x.clone(),
                });
            let targets: Vec<MarginalTarget> = studies.chain(cs).chain(ps).collect();
            let mut all = post.marginal_effects(&targets, config.interval)?;
            let preds = all.split_off(data.k() + contrasts.len());
            let cons = all.split_off(data.k());
            let trace = if want_trace {
                Some(compute_trace(
                    &data,
                    &design,
                    traced,
                    TraceMode::Bayes(&post),
                    &grid,
                )?)
            } else {
                None
            };
            (bayes_tau(&post, prior, config)?, all, cons, preds, trace)
        }
        Mode::Freq => {
            let estimator = config.estimator.expect("validated");
            if config.prior.is_some() {
                warnings.push("--prior is ignored in freq mode".into());
            }
            let fr = blup(&data, &design, estimator)?;
            if fr.tau_ci95.degenerate {
                warnings.push(
                    "Q-profile interval is degenerate: Q(0) is below the lower chi-square target"
                        .into(),
                );
            }
            let fit = &fr.fit_at_hat;
            let studies = (0..data.k())
                .map(|i| {
                    normal_summary(data.labels()[i].clone(), fit.theta_mean[i], fit.theta_sd[i])
                })
                .collect();
            let cons = contrasts
                .iter()
                .map(|c| {
                    let (m, s) = conditional_contrast(fit, c)?;
                    Ok(normal_summary(c.label().to_string(), m, s))
                })
                .collect::<Result<Vec<_>>>()?;
            let preds = prediction_points
                .iter()
                .map(|(label, x)| {
                    let (m, s) = predict_new_study(fit, x)?;
                    Ok(normal_summary(label.clone(), m, s))
                })
                .collect::<Result<Vec<_>>>()?;
            let trace = if want_trace {
                Some(compute_trace(
                    &data,
                    &design,
                    traced,
                    TraceMode::Freq(&fr),
                    &grid,
                )?)
            } else {
                None
            };
            (freq_tau(&fr), studies, cons, preds, trace)
        }
    };

    Ok(Analysis {
        config: config.clone(),
        source_name,
        data,
        design,
        tau,
        studies,
        contrasts: contrasts.into_iter().zip(contrast_summaries).collect(),
        predictions: prediction_points
            .into_iter()
            .map(|(_, x)| x)
            .zip(predictions)
            .collect(),
        trace,
        warnings,
    })
}

fn bayes_tau(
    post: &TauPosterior,
    prior: HeterogeneityPrior,
    config: &AnalysisConfig,
) -> Result<TauSummary> {
    Ok(TauSummary::Bayes {
        prior,
        median: post.median(),
        mean: post.mean(),
        sd: post.sd(),
        ci95: post.credible_interval(0.95, config.interval)?,
        tau_max: post.tau_max(),
    })
}

fn freq_tau(fr: &FreqResult) -> TauSummary {
    TauSummary::Freq {
        estimator: fr.estimator,
        estimate: fr.tau_hat,
        ci95: (fr.tau_ci95.lo, fr.tau_ci95.hi),
        q_targets: (fr.tau_ci95.q_target_lo, fr.tau_ci95.q_target_hi),
        degenerate: fr.tau_ci95.degenerate,
        q_at_zero: fr.q_at_zero,
    }
}

/// Normal summary with a `±1.96·sd` interval, for plug-in estimates.
fn normal_summary(target: String, mean: f64, sd: f64) -> MarginalSummary {
    MarginalSummary {
        target,
        mean,
        sd,
        median: mean,
        ci95: (mean - Z95 * sd, mean + Z95 * sd),
    }
}
