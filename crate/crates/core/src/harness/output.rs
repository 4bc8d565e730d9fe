//! CSV and text reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::assembly::SimState;
use crate::error::Result;
use crate::rockfluid::RockFluidModel;
use crate::sfi::{IterationReport, RunOutput};
use crate::units::s_to_days;

/// One row per step attempt.
pub fn write_report_csv(path: &Path, report: &IterationReport) -> Result<()> {
    let mut out = String::from("step,attempt,time_days,dt_days,accepted,outer,pressure_iters,transport_iters,failure\n");
    for s in &report.steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.step,
            s.attempt,
            s.time / crate::units::DAY,
            s_to_days(s.dt),
            s.accepted,
            s.outer(),
            s.pressure_iterations(),
            s.transport_iterations(),
            s.failure.as_deref().unwrap_or("").replace(',', ";")
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// One row per inner Newton iterate: `k` is the iterate index, `r0` the
/// initial and `rk` the current normalised residual of that inner solve.
pub fn write_residuals_csv(path: &Path, report: &IterationReport) -> Result<()> {
    let mut out = String::from("step,attempt,nu,solver,k,r0,rk,tolerance\n");
    for s in &report.steps {
        for pass in &s.passes {
            for inner in std::iter::once(&pass.pressure).chain(pass.transport.as_ref()) {
                for (k, rk) in inner.history.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{:e},{:e},{:e}",
                        s.step,
                        s.attempt,
                        pass.nu,
                        inner.solver.name(),
                        k,
                        inner.r0(),
                        rk,
                        inner.tolerance
                    )
                    .unwrap();
                }
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_final_state_csv(path: &Path, state: &SimState, model: &RockFluidModel) -> Result<()> {
    let mut out = String::from("cell,p");
    for ph in &model.phases {
        write!(out, ",s_{}", ph.kind.name()).unwrap();
    }
    out.push('\n');
    for c in 0..state.n_cells() {
        write!(out, "{},{:e}", c, state.p[c]).unwrap();
        for v in state.sat(c) {
            write!(out, ",{v:e}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_summary(path: &Path, case: &str, strategy: &str, qn: bool, run: &RunOutput) -> Result<()> {
    let t = run.report.totals();
    let mut out = String::new();
    writeln!(out, "case: {case}").unwrap();
    writeln!(out, "strategy: {strategy}").unwrap();
    writeln!(out, "qn: {}", if qn { "on" } else { "off" }).unwrap();
    writeln!(out, "status: {}", run.aborted.as_deref().unwrap_or("completed")).unwrap();
    writeln!(out, "time_days: {}", s_to_days(run.time)).unwrap();
    writeln!(out, "accepted_steps: {}", t.accepted_steps).unwrap();
    writeln!(out, "cuts: {}", t.cuts).unwrap();
    writeln!(out, "outer_total: {}", t.outer).unwrap();
    writeln!(out, "pressure_total: {}", t.pressure).unwrap();
    writeln!(out, "transport_total: {}", t.transport).unwrap();
    writeln!(out, "wasted_outer: {}", t.wasted_outer).unwrap();
    writeln!(out, "wasted_pressure: {}", t.wasted_pressure).unwrap();
    writeln!(out, "wasted_transport: {}", t.wasted_transport).unwrap();
    fs::write(path, out)?;
    Ok(())
}

/// Writes all four report files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, case: &str, strategy: &str, qn: bool, model: &RockFluidModel, run: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_report_csv(&dir.join("report.csv"), &run.report)?;
    write_residuals_csv(&dir.join("residuals.csv"), &run.report)?;
    write_final_state_csv(&dir.join("final_state.csv"), &run.state, model)?;
    write_summary(&dir.join("summary.txt"), case, strategy, qn, run)?;
    Ok(())
}
