//! Long-format CSV of a [`TraceData`]: `tau,series,kind,mean,sd`.
//!
//! Study and contrast rows carry one value per grid node. Panel rows carry
//! the lower-panel curves (`posterior_density`, `prior_density`,
//! `q_statistic`) per grid node, scalar summaries with an empty `tau`, and
//! the `τ → ∞` references at `tau = inf`.

use crate::error::{Error, Result};
use crate::trace::{BottomPanel, InfinityRefs, Series, TraceData};

const HEADER: [&str; 5] = ["tau", "series", "kind", "mean", "sd"];
const STUDY_LIMIT: &str = "study_limit:";
const CONTRAST_LIMIT: &str = "contrast_limit:";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Rows(csv::Writer<Vec<u8>>);

impl Rows {
    fn push(&mut self, tau: &str, series: &str, kind: &str, mean: f64, sd: Option<f64>) {
        let sd = sd.map(num).unwrap_or_default();
        self.0
            .write_record([tau, series, kind, &num(mean), &sd])
            .expect("in-memory write");
    }

    fn curve(&mut self, grid: &[f64], name: &str, values: &[f64]) {
        for (t, v) in grid.iter().zip(values) {
            self.push(&num(*t), name, "panel", *v, None);
        }
    }
}

pub fn export_trace_csv(trace: &TraceData) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    let mut rows = Rows(w);

    for (j, &t) in trace.tau_grid.iter().enumerate() {
        let tau = num(t);
        for s in &trace.study_traces {
            rows.push(&tau, &s.label, "study", s.mean[j], Some(s.sd[j]));
        }
        for s in &trace.contrast_traces {
            rows.push(&tau, &s.label, "contrast", s.mean[j], Some(s.sd[j]));
        }
    }

    let grid = &trace.tau_grid;
    match &trace.bottom_panel {
        BottomPanel::Bayes {
            prior_density,
            posterior_density,
            median,
            ci95,
        } => {
            rows.curve(grid, "posterior_density", posterior_density);
            if let Some(p) = prior_density {
                rows.curve(grid, "prior_density", p);
            }
            rows.push("", "median", "panel", *median, None);
            rows.push("", "ci95_lo", "panel", ci95.0, None);
            rows.push("", "ci95_hi", "panel", ci95.1, None);
        }
        BottomPanel::Freq {
            q_values,
            chi2_band,
            tau_hat,
            tau_ci95,
        } => {
            rows.curve(grid, "q_statistic", q_values);
            rows.push("", "q_target_lo", "panel", chi2_band.0, None);
            rows.push("", "q_target_hi", "panel", chi2_band.1, None);
            rows.push("", "tau_hat", "panel", *tau_hat, None);
            rows.push("", "ci95_lo", "panel", tau_ci95.0, None);
            rows.push("", "ci95_hi", "panel", tau_ci95.1, None);
        }
        BottomPanel::None => {}
    }
    for (s, v) in trace.study_traces.iter().zip(&trace.infinity_refs.studies) {
        rows.push(
            "inf",
            &format!("{STUDY_LIMIT}{}", s.label),
            "panel",
            *v,
            None,
        );
    }
    for (s, v) in trace
        .contrast_traces
        .iter()
        .zip(&trace.infinity_refs.contrasts)
    {
        rows.push(
            "inf",
            &format!("{CONTRAST_LIMIT}{}", s.label),
            "panel",
            *v,
            None,
        );
    }
    String::from_utf8(rows.0.into_inner().expect("in-memory flush")).expect("utf-8 labels")
}

#[derive(Default)]
struct Collected {
    grid: Vec<f64>,
    studies: Vec<Series>,
    contrasts: Vec<Series>,
    curves: Vec<(String, Vec<f64>)>,
    scalars: Vec<(String, f64)>,
    study_limits: Vec<(String, f64)>,
    contrast_limits: Vec<(String, f64)>,
}

/// Parses text produced by [`export_trace_csv`] back into a [`TraceData`].
pub fn parse_trace_csv(text: &str) -> Result<TraceData> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let bad = |line: u64, message: String| Error::TraceCsv { line, message };
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(bad(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut c = Collected::default();
    for record in reader.records() {
        let record = record.map_err(|e| bad(0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| bad(line, format!("`{s}` is not a number")))
        };
        let (tau, series, kind) = (&record[0], &record[1], &record[2]);
        let mean = parse(&record[3])?;
        match kind {
            "study" | "contrast" => {
                let t = parse(tau)?;
                let sd = parse(&record[4])?;
                if c.grid.last().is_none_or(|&g| g < t) {
                    c.grid.push(t);
                } else if c.grid.last() != Some(&t) {
                    return Err(bad(line, "grid values out of order".into()));
                }
                let list = if kind == "study" {
                    &mut c.studies
                } else {
                    &mut c.contrasts
                };
                match list.iter_mut().find(|s| s.label == series) {
                    Some(s) => {
                        s.mean.push(mean);
                        s.sd.push(sd);
                    }
                    None => list.push(Series {
                        label: series.to_string(),
                        mean: vec![mean],
                        sd: vec![sd],
                    }),
                }
            }
            "panel" if tau == "inf" => {
                if let Some(label) = series.strip_prefix(STUDY_LIMIT) {
                    c.study_limits.push((label.to_string(), mean));
                } else if let Some(label) = series.strip_prefix(CONTRAST_LIMIT) {
                    c.contrast_limits.push((label.to_string(), mean));
                } else {
                    return Err(bad(line, format!("unknown limit series `{series}`")));
                }
            }
            "panel" if tau.is_empty() => c.scalars.push((series.to_string(), mean)),
            "panel" => match c.curves.iter_mut().find(|(n, _)| n == series) {
                Some((_, v)) => v.push(mean),
                None => c.curves.push((series.to_string(), vec![mean])),
            },
            other => return Err(bad(line, format!("unknown kind `{other}`"))),
        }
    }
    assemble(c)
}

fn assemble(c: Collected) -> Result<TraceData> {
    let n = c.grid.len();
    let bad = |message: String| Error::TraceCsv { line: 0, message };
    for s in c.studies.iter().chain(&c.contrasts) {
        if s.mean.len() != n {
            return Err(bad(format!(
                "series `{}` has {} of {n} grid values",
                s.label,
                s.mean.len()
            )));
        }
    }
    let curve = |name: &str| -> Result<Option<Vec<f64>>> {
        match c.curves.iter().find(|(n2, _)| n2 == name) {
            Some((_, v)) if v.len() == n => Ok(Some(v.clone())),
            Some(_) => Err(bad(format!("panel curve `{name}` has the wrong length"))),
            None => Ok(None),
        }
    };
    let scalar = |name: &str| -> Result<f64> {
        c.scalars
            .iter()
            .find(|(n2, _)| n2 == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| bad(format!("missing panel value `{name}`")))
    };
    let bottom_panel = if let Some(posterior_density) = curve("posterior_density")? {
        BottomPanel::Bayes {
            prior_density: curve("prior_density")?,
            posterior_density,
            median: scalar("median")?,
            ci95: (scalar("ci95_lo")?, scalar("ci95_hi")?),
        }
    } else if let Some(q_values) = curve("q_statistic")? {
        BottomPanel::Freq {
            q_values,
            chi2_band: (scalar("q_target_lo")?, scalar("q_target_hi")?),
            tau_hat: scalar("tau_hat")?,
            tau_ci95: (scalar("ci95_lo")?, scalar("ci95_hi")?),
        }
    } else {
        BottomPanel::None
    };
    let limits = |series: &[Series], refs: &[(String, f64)]| -> Result<Vec<f64>> {
        if series.len() != refs.len() || series.iter().zip(refs).any(|(s, (l, _))| &s.label != l) {
            return Err(bad("limit rows do not match the series".into()));
        }
        Ok(refs.iter().map(|(_, v)| *v).collect())
    };
    Ok(TraceData {
        infinity_refs: InfinityRefs {
            studies: limits(&c.studies, &c.study_limits)?,
            contrasts: limits(&c.contrasts, &c.contrast_limits)?,
        },
        tau_grid: c.grid,
        study_traces: c.studies,
        contrast_traces: c.contrasts,
        bottom_panel,
    })
}
