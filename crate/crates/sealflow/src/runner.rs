//! Drives a simulation to completion with CSV, field, label-dump and
//! checkpoint outputs at the configured cadences.

use crate::config::OutputSection;
use crate::postproc::CsvWriter;
use crate::solver::{Simulation, SolverError, StepReport};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub struct RunSummary {
    pub steps_completed: u32,
    pub sealed_at: Option<u32>,
    pub final_k_eff: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io { path: path.display().to_string(), source }
}

/// Runs `sim` until it finishes. `fresh` selects whether the CSV starts with
/// a header (new run) or appends (restarted run).
pub fn run_simulation(
    sim: &mut Simulation,
    output: &OutputSection,
    fresh: bool,
    mut on_step: impl FnMut(&StepReport),
) -> Result<RunSummary, RunnerError> {
    let dir = PathBuf::from(&output.directory);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let csv_path = dir.join("results.csv");
    let mut csv = if fresh {
        CsvWriter::create(&csv_path).map_err(io_err(&csv_path))?
    } else {
        CsvWriter::append(&csv_path).map_err(io_err(&csv_path))?
    };
    let estar = sim.problem.material.effective_modulus();

    let mut final_k_eff = f64::NAN;
    while !sim.finished() {
        let report = if output.label_dumps {
            let dir2 = dir.clone();
            let step_no = sim.state.step + 1;
            sim.step_with_observer(|iter, labels, problem| {
                let path = dir2.join(format!("labels_{step_no:04}_{iter:03}.bin"));
                let _ = crate::postproc::write_label_dump(problem, labels, step_no, iter, &path);
            })?
        } else {
            sim.step()?
        };
        csv.write_row(&report.summary, estar).map_err(io_err(&csv_path))?;
        let step = report.summary.step;
        if output.field_every > 0 && step % output.field_every == 0 {
            let path = dir.join(format!("surface_{step:04}.vtk"));
            crate::postproc::write_surface_vtk(&sim.problem, &sim.state.v, &sim.state.labels, &path)
                .map_err(io_err(&path))?;
            if output.bulk_fields {
                let path = dir.join(format!("bulk_{step:04}.vtk"));
                crate::postproc::write_bulk_vtk(&sim.problem, &sim.state.v, &path)
                    .map_err(io_err(&path))?;
            }
        }
        if output.checkpoint_every > 0 && step % output.checkpoint_every == 0 {
            let path = dir.join(format!("checkpoint_{step:04}.ckpt"));
            sim.save_checkpoint(&path)?;
        }
        final_k_eff = report.summary.k_eff;
        on_step(&report);
    }
    Ok(RunSummary {
        steps_completed: sim.state.step,
        sealed_at: sim.sealed_at,
        final_k_eff,
    })
}
