//! Analysis configuration and the flag grammars for contrasts and
//! covariate-value predictions.

use std::path::PathBuf;
use std::str::FromStr;

use metatrace::{Estimator, IntervalMethod, PriorSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File(PathBuf),
    Bundled(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bayes,
    Freq,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Bayes => "bayes",
            Mode::Freq => "freq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputKind {
    Report,
    Trace,
    Forest,
    Csv,
}

impl OutputKind {
    pub const ALL: [OutputKind; 4] = [Self::Report, Self::Trace, Self::Forest, Self::Csv];
}

/// `label:c1,c2,...`
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSpec {
    pub label: String,
    pub coefficients: Vec<f64>,
}

impl FromStr for ContrastSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Input(format!("invalid contrast `{s}` (expected label:c1,c2,...)"));
        let (label, values) = s.rsplit_once(':').ok_or_else(bad)?;
        let label = label.trim();
        if label.is_empty() {
            return Err(bad());
        }
        let coefficients = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            label: label.to_string(),
            coefficients,
        })
    }
}

/// `name=value[,name=value...]`
#[derive(Debug, Clone, PartialEq)]
pub struct PredictAt {
    pub label: String,
    pub values: Vec<(String, f64)>,
}

impl FromStr for PredictAt {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Input(format!(
                "invalid prediction point `{s}` (expected covariate=value[,covariate=value])"
            ))
        };
        let values = s
            .split(',')
            .map(|part| {
                let (name, v) = part.split_once('=').ok_or_else(bad)?;
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                if name.trim().is_empty() || !v.is_finite() {
                    return Err(bad());
                }
                Ok((name.trim().to_string(), v))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let label = values
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        Ok(Self { label, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub source: DataSource,
    pub mode: Mode,
    pub prior: Option<PriorSpec>,
    pub estimator: Option<Estimator>,
    /// Covariate names; empty for an intercept-only model.
    pub regression: Vec<String>,
    pub contrasts: Vec<ContrastSpec>,
    pub predict_at: Vec<PredictAt>,
    pub exclude: Option<String>,
    pub interval: IntervalMethod,
    pub outputs: Vec<OutputKind>,
    pub grid_points: usize,
    pub highlight: Vec<String>,
    pub out_dir: PathBuf,
}

impl AnalysisConfig {
    pub fn new(source: DataSource, mode: Mode, out_dir: PathBuf) -> Self {
        Self {
            source,
            mode,
            prior: None,
            estimator: None,
            regression: Vec::new(),
            contrasts: Vec::new(),
            predict_at: Vec::new(),
            exclude: None,
            interval: IntervalMethod::Shortest,
            outputs: OutputKind::ALL.to_vec(),
            grid_points: metatrace_plots::DEFAULT_GRID_POINTS,
            highlight: Vec::new(),
            out_dir,
        }
    }

    /// Checks the mode-specific requirements.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.mode {
            Mode::Bayes if self.prior.is_none() => Err(CliError::Input(
                "bayes mode needs --prior (uniform, halfnormal:<scale>, dumouchel or dumouchel:<s0>)".into(),
            )),
            Mode::Freq if self.estimator.is_none() => {
                Err(CliError::Input("freq mode needs --estimator (reml, ml or dl)".into()))
            }
            _ if self.outputs.is_empty() => Err(CliError::Input("no outputs requested".into())),
            _ => Ok(()),
        }
    }
}
