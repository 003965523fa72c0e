//! Rendering of the requested artifacts and their atomic placement.

use std::fs;
use std::path::{Path, PathBuf};

use metatrace_plots::{export_trace_csv, render_forest_svg, render_trace_svg, TraceSvgOptions};

use crate::analysis::Analysis;
use crate::config::OutputKind;
use crate::error::{CliError, Result};
use crate::report::{json_report, text_report};

/// File name and contents of every requested output, in a fixed order.
pub fn render(a: &Analysis) -> Result<Vec<(&'static str, String)>> {
    let mut files = Vec::new();
    let mut kinds = a.config.outputs.clone();
    kinds.sort();
    kinds.dedup();
    for kind in kinds {
        match kind {
            OutputKind::Report => {
                files.push(("report.txt", text_report(a)));
                files.push(("report.json", json_report(a)));
            }
            OutputKind::Trace => {
                let trace = a.trace.as_ref().expect("trace computed for trace output");
                let options = TraceSvgOptions {
                    title: Some(a.source_name.clone()),
                    highlight: a.config.highlight.clone(),
                };
                files.push(("trace.svg", render_trace_svg(trace, &options)));
            }
            OutputKind::Forest => {
                let overall = a.contrasts.first().map(|(_, m)| m);
                let prediction = a.predictions.first().map(|(_, m)| m);
                files.push((
                    "forest.svg",
                    render_forest_svg(&a.data, &a.studies, overall, prediction)?,
                ));
            }
            OutputKind::Csv => {
                let trace = a.trace.as_ref().expect("trace computed for csv output");
                files.push(("trace.csv", export_trace_csv(trace)));
            }
        }
    }
    Ok(files)
}

/// Writes all files into a staging directory inside `out_dir`, then renames
/// them into place, so a failure leaves no partial outputs behind.
pub fn write_atomically(out_dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io(format!("cannot create {}", out_dir.display()), e))?;
    let staging = tempfile::Builder::new()
        .prefix(".metatrace-staging-")
        .tempdir_in(out_dir)
        .map_err(|e| CliError::io(format!("cannot stage outputs in {}", out_dir.display()), e))?;
    for (name, contents) in files {
        let path = staging.path().join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, _) in files {
        let target = out_dir.join(name);
        fs::rename(staging.path().join(name), &target)
            .map_err(|e| CliError::io(format!("cannot move output to {}", target.display()), e))?;
        written.push(target);
    }
    Ok(written)
}
