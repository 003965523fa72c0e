//! Command-line grammar and dispatch.

use std::fmt::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use metatrace::{Estimator, IntervalMethod, PriorSpec};

use crate::analysis::run_analysis;
use crate::config::{AnalysisConfig, ContrastSpec, DataSource, Mode, OutputKind, PredictAt};
use crate::error::{CliError, Result, EXIT_INPUT};
use crate::output::{render, write_atomically};

#[derive(Debug, Parser)]
#[command(
    name = "metatrace",
    version,
    about = "Random-effects meta-analysis with trace plots"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write reports and plots.
    Run(RunArgs),
    /// List or export the bundled datasets.
    Datasets {
        #[command(subcommand)]
        command: DatasetsCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetsCommand {
    /// Print name, k, covariates and source of each dataset.
    List,
    /// Write a bundled dataset as CSV.
    Export { name: String, path: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Bayes,
    Freq,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutputArg {
    Report,
    Trace,
    Forest,
    Csv,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).multiple(false)))]
pub struct RunArgs {
    /// CSV file with header `label,y,se[,covariate...]`.
    #[arg(long, value_name = "PATH", group = "source")]
    pub data: Option<PathBuf>,
    /// Name of a bundled dataset.
    #[arg(long, value_name = "NAME", group = "source")]
    pub dataset: Option<String>,
    #[arg(long, value_enum, default_value = "bayes")]
    pub mode: ModeArg,
    /// uniform, halfnormal:<scale>, dumouchel or dumouchel:<s0>.
    #[arg(long, value_parser = parse_from_str::<PriorSpec>)]
    pub prior: Option<PriorSpec>,
    /// reml, ml or dl.
    #[arg(long, value_parser = parse_from_str::<Estimator>)]
    pub estimator: Option<Estimator>,
    /// Comma-separated covariate columns; empty for intercept only.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub regression: Vec<String>,
    /// `label:c1,c2,...` coefficient vector; repeatable.
    #[arg(long, value_parser = parse_from_str::<ContrastSpec>)]
    pub contrast: Vec<ContrastSpec>,
    /// `covariate=value[,covariate=value]`; repeatable.
    #[arg(long = "predict-at", value_parser = parse_from_str::<PredictAt>)]
    pub predict_at: Vec<PredictAt>,
    /// Study label to leave out.
    #[arg(long)]
    pub exclude: Option<String>,
    /// shortest or central.
    #[arg(long, default_value = "shortest", value_parser = parse_from_str::<IntervalMethod>)]
    pub interval: IntervalMethod,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "report,trace,forest,csv"
    )]
    pub outputs: Vec<OutputArg>,
    #[arg(long = "grid-points", default_value_t = metatrace_plots::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Study or contrast labels drawn with ±1.96·sd bounds in the trace plot.
    #[arg(long, value_delimiter = ',')]
    pub highlight: Vec<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn parse_from_str<T>(s: &str) -> std::result::Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

impl RunArgs {
    pub fn into_config(self) -> AnalysisConfig {
        let source = match (self.data, self.dataset) {
            (Some(path), _) => DataSource::File(path),
            (None, Some(name)) => DataSource::Bundled(name),
            (None, None) => unreachable!("clap enforces the source group"),
        };
        let mode = match self.mode {
            ModeArg::Bayes => Mode::Bayes,
            ModeArg::Freq => Mode::Freq,
        };
        let mut config = AnalysisConfig::new(source, mode, self.out);
        config.prior = self.prior;
        config.estimator = self.estimator;
        config.regression = self
            .regression
            .into_iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        config.contrasts = self.contrast;
        config.predict_at = self.predict_at;
        config.exclude = self.exclude;
        config.interval = self.interval;
        config.outputs = self
            .outputs
            .into_iter()
            .map(|o| match o {
                OutputArg::Report => OutputKind::Report,
                OutputArg::Trace => OutputKind::Trace,
                OutputArg::Forest => OutputKind::Forest,
                OutputArg::Csv => OutputKind::Csv,
            })
            .collect();
        config.grid_points = self.grid_points;
        config.highlight = self.highlight;
        config
    }
}

/// Runs an analysis and writes its artifacts; returns the text for stdout.
pub fn run(config: &AnalysisConfig) -> Result<String> {
    let analysis = run_analysis(config)?;
    let files = render(&analysis)?;
    let written = write_atomically(&config.out_dir, &files)?;
    let mut out = String::new();
    if let Some((_, text)) = files.iter().find(|(name, _)| *name == "report.txt") {
        out.push_str(text);
        out.push('\n');
    }
    for path in written {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(out)
}

pub fn datasets_list() -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:>3}  {:<16} {:<13} source",
        "name", "k", "covariates", "status"
    );
    for d in metatrace::datasets::bundled() {
        let covariates = if d.covariates.is_empty() {
            "-".to_string()
        } else {
            d.covariates.join(",")
        };
        let status = if d.is_available() {
            "bundled"
        } else {
            "not bundled"
        };
        let _ = writeln!(
            out,
            "{:<8} {:>3}  {:<16} {:<13} {}",
            d.name, d.k, covariates, status, d.source
        );
    }
    out
}

pub fn datasets_export(name: &str, path: &std::path::Path) -> Result<String> {
    let entry = metatrace::datasets::find(name)?;
    let csv = entry.csv()?;
    std::fs::write(path, csv)
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
    Ok(format!(
        "wrote {} ({} studies) to {}\n",
        entry.name,
        entry.k,
        path.display()
    ))
}

/// Result of one command-line invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub exit_code: u8,
    pub stdout: String,
    pub stderr: String,
}

/// Parses and executes a full command line (including the program name).
pub fn invoke<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Invocation {
                    exit_code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Invocation {
                    exit_code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match execute(cli) {
        Ok(stdout) => Invocation {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Invocation {
            exit_code: e.exit_code(),
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

/// Dispatches a parsed command line; returns the text for stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run(args) => run(&args.into_config()),
        Command::Datasets {
            command: DatasetsCommand::List,
        } => Ok(datasets_list()),
        Command::Datasets {
            command: DatasetsCommand::Export { name, path },
        } => datasets_export(&name, &path),
    }
}
