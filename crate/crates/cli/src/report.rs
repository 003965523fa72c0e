//! Text and JSON reports.

use std::fmt::Write;

use metatrace::MarginalSummary;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::analysis::{Analysis, TauSummary};
use crate::config::Mode;

pub const SCHEMA_VERSION: u32 = 1;

/// A number written with 17 significant digits; non-finite values become
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(format!("{:.16e}", self.0))
                .map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

fn pair(v: (f64, f64)) -> [Sig17; 2] {
    [Sig17(v.0), Sig17(v.1)]
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    generator: &'static str,
    version: &'static str,
    config: JsonConfig<'a>,
    data: JsonData<'a>,
    tau: JsonTau,
    studies: Vec<JsonStudy<'a>>,
    contrasts: Vec<JsonContrast<'a>>,
    predictions: Vec<JsonPrediction<'a>>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct JsonConfig<'a> {
    mode: &'static str,
    prior: Option<String>,
    estimator: Option<String>,
    regression: &'a [String],
    exclude: Option<&'a str>,
    interval: String,
    grid_points: usize,
}

#[derive(Serialize)]
struct JsonData<'a> {
    source: &'a str,
    k: usize,
    labels: &'a [String],
    design_columns: &'a [String],
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JsonTau {
    Bayes {
        prior: String,
        median: Sig17,
        mean: Sig17,
        sd: Sig17,
        ci95: [Sig17; 2],
        tau_max: Sig17,
    },
    Freq {
        estimator: String,
        estimate: Sig17,
        ci95: [Sig17; 2],
        q_targets: [Sig17; 2],
        degenerate: bool,
        q_at_zero: Sig17,
    },
}

#[derive(Serialize)]
struct JsonSummary {
    mean: Sig17,
    sd: Sig17,
    median: Sig17,
    ci95: [Sig17; 2],
}

impl From<&MarginalSummary> for JsonSummary {
    fn from(m: &MarginalSummary) -> Self {
        Self {
            mean: Sig17(m.mean),
            sd: Sig17(m.sd),
            median: Sig17(m.median),
            ci95: pair(m.ci95),
        }
    }
}

#[derive(Serialize)]
struct JsonStudy<'a> {
    label: &'a str,
    y: Sig17,
    se: Sig17,
    estimate: JsonSummary,
}

#[derive(Serialize)]
struct JsonContrast<'a> {
    label: &'a str,
    coefficients: Vec<Sig17>,
    estimate: JsonSummary,
}

#[derive(Serialize)]
struct JsonPrediction<'a> {
    label: &'a str,
    x: Vec<Sig17>,
    estimate: JsonSummary,
}

fn tau_json(tau: &TauSummary) -> JsonTau {
    match *tau {
        TauSummary::Bayes {
            prior,
            median,
            mean,
            sd,
            ci95,
            tau_max,
        } => JsonTau::Bayes {
            prior: prior.to_string(),
            median: Sig17(median),
            mean: Sig17(mean),
            sd: Sig17(sd),
            ci95: pair(ci95),
            tau_max: Sig17(tau_max),
        },
        TauSummary::Freq {
            estimator,
            estimate,
            ci95,
            q_targets,
            degenerate,
            q_at_zero,
        } => JsonTau::Freq {
            estimator: estimator.to_string(),
            estimate: Sig17(estimate),
            ci95: pair(ci95),
            q_targets: pair(q_targets),
            degenerate,
            q_at_zero: Sig17(q_at_zero),
        },
    }
}

pub fn json_report(a: &Analysis) -> String {
    let c = &a.config;
    let report = JsonReport {
        schema_version: SCHEMA_VERSION,
        generator: "metatrace",
        version: env!("CARGO_PKG_VERSION"),
        config: JsonConfig {
            mode: c.mode.as_str(),
            prior: match (c.mode, &a.tau) {
                (Mode::Bayes, TauSummary::Bayes { prior, .. }) => Some(prior.to_string()),
                _ => None,
            },
            estimator: c
                .estimator
                .filter(|_| c.mode == Mode::Freq)
                .map(|e| e.to_string()),
            regression: &c.regression,
            exclude: c.exclude.as_deref(),
            interval: c.interval.to_string(),
            grid_points: c.grid_points,
        },
        data: JsonData {
            source: &a.source_name,
            k: a.data.k(),
            labels: a.data.labels(),
            design_columns: a.design.column_labels(),
        },
        tau: tau_json(&a.tau),
        studies: a
            .studies
            .iter()
            .enumerate()
            .map(|(i, m)| JsonStudy {
                label: &a.data.labels()[i],
                y: Sig17(a.data.y()[i]),
                se: Sig17(a.data.se()[i]),
                estimate: m.into(),
            })
            .collect(),
        contrasts: a
            .contrasts
            .iter()
            .map(|(c, m)| JsonContrast {
                label: c.label(),
                coefficients: c.coefficients().iter().map(|v| Sig17(*v)).collect(),
                estimate: m.into(),
            })
            .collect(),
        predictions: a
            .predictions
            .iter()
            .map(|(x, m)| JsonPrediction {
                label: &m.target,
                x: x.iter().map(|v| Sig17(*v)).collect(),
                estimate: m.into(),
            })
            .collect(),
        warnings: &a.warnings,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

fn f(v: f64) -> String {
    format!("{v:.4}")
}

fn summary_table(
    out: &mut String,
    rows: &[(String, &MarginalSummary)],
    extra: Option<&[(f64, f64)]>,
) {
    let width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = write!(out, "  {:<width$}", "label");
    if extra.is_some() {
        let _ = write!(out, " {:>10} {:>10}", "y", "se");
    }
    let _ = writeln!(
        out,
        " {:>10} {:>10} {:>10}  95% interval",
        "mean", "median", "sd"
    );
    for (i, (label, m)) in rows.iter().enumerate() {
        let _ = write!(out, "  {label:<width$}");
        if let Some(e) = extra {
            let _ = write!(out, " {:>10} {:>10}", f(e[i].0), f(e[i].1));
        }
        let _ = writeln!(
            out,
            " {:>10} {:>10} {:>10}  [{}, {}]",
            f(m.mean),
            f(m.median),
            f(m.sd),
            f(m.ci95.0),
            f(m.ci95.1)
        );
    }
}

pub fn text_report(a: &Analysis) -> String {
    let c = &a.config;
    let mut out = String::new();
    let _ = writeln!(out, "metatrace {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "data: {} ({} studies)", a.source_name, a.data.k());
    if let Some(ex) = &c.exclude {
        let _ = writeln!(out, "excluded: {ex}");
    }
    if a.design.is_intercept_only() {
        let _ = writeln!(out, "model: normal-normal random effects, intercept only");
    } else {
        let _ = writeln!(out, "model: meta-regression on {}", c.regression.join(", "));
    }
    let (effect_kind, interval_kind) = match &a.tau {
        TauSummary::Bayes { prior, .. } => {
            let _ = writeln!(
                out,
                "mode: bayes, heterogeneity prior {prior}, flat prior on coefficients"
            );
            (
                "marginal posterior",
                format!("{} credible interval", c.interval),
            )
        }
        TauSummary::Freq { estimator, .. } => {
            let _ = writeln!(out, "mode: freq, {estimator} estimate of tau");
            (
                "conditional at the estimate (BLUP)",
                "Q-profile confidence interval".to_string(),
            )
        }
    };
    let _ = writeln!(out);
    let _ = writeln!(out, "heterogeneity tau");
    match &a.tau {
        TauSummary::Bayes {
            median,
            mean,
            sd,
            ci95,
            ..
        } => {
            let _ = writeln!(
                out,
                "  median {}  mean {}  sd {}",
                f(*median),
                f(*mean),
                f(*sd)
            );
            let _ = writeln!(out, "  95% {interval_kind} [{}, {}]", f(ci95.0), f(ci95.1));
        }
        TauSummary::Freq {
            estimate,
            ci95,
            q_targets,
            q_at_zero,
            ..
        } => {
            let _ = writeln!(out, "  estimate {}", f(*estimate));
            let _ = writeln!(out, "  95% {interval_kind} [{}, {}]", f(ci95.0), f(ci95.1));
            let _ = writeln!(
                out,
                "  Q(0) = {}, chi-square targets {} and {}",
                f(*q_at_zero),
                f(q_targets.0),
                f(q_targets.1)
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "study effects, {effect_kind}");
    let rows: Vec<(String, &MarginalSummary)> =
        a.studies.iter().map(|m| (m.target.clone(), m)).collect();
    let raw: Vec<(f64, f64)> = a
        .data
        .y()
        .iter()
        .cloned()
        .zip(a.data.se().iter().cloned())
        .collect();
    summary_table(&mut out, &rows, Some(&raw));
    if !a.contrasts.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "contrasts");
        let rows: Vec<(String, &MarginalSummary)> = a
            .contrasts
            .iter()
            .map(|(_, m)| (m.target.clone(), m))
            .collect();
        summary_table(&mut out, &rows, None);
    }
    if !a.predictions.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "predicted effect in a new study");
        let rows: Vec<(String, &MarginalSummary)> = a
            .predictions
            .iter()
            .map(|(_, m)| (m.target.clone(), m))
            .collect();
        summary_table(&mut out, &rows, None);
    }
    if !a.warnings.is_empty() {
        let _ = writeln!(out);
        for w in &a.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}
