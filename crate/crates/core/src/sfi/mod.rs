//! Sequential fully implicit coupling: the outer pressure/transport loop,
//! its quasi-Newton acceleration and time-step control.

mod qn;
mod report;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use qn::{QnConfig, QnWorkspace, ThinQr};
pub use report::{InnerPass, IterationReport, OuterPass, StepReport, Totals};

use crate::assembly::{full_saturations, mass_imbalance, max_abs_diff, Problem, SimState};
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::newton::{newton_solve_with, Safeguard, Solver, TolerancePolicy};
use crate::rockfluid::RockFluidModel;
use crate::wells::Well;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterConfig {
    /// Pressure increment tolerance, relative to `p_scale`.
    pub eps_p: f64,
    /// Saturation increment tolerance.
    pub eps_t: f64,
    pub max_outer: usize,
    /// Coupled residual bound checked before a step is accepted.
    pub eps_final: f64,
    /// Pa; defaults to the largest initial pressure.
    pub p_scale: Option<f64>,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            eps_p: 1e-3,
            eps_t: 1e-3,
            max_outer: 30,
            eps_final: 1e-5,
            p_scale: None,
        }
    }
}

impl OuterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_p > 0.0 && self.eps_t > 0.0 && self.eps_final > 0.0) {
            return Err(Error::Config("outer tolerances must be positive".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        if let Some(p) = self.p_scale {
            if !(p > 0.0) {
                return Err(Error::Config("p_scale must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A time step that could not be completed; carries the passes spent on it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub reason: String,
    pub passes: Vec<OuterPass>,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} outer passes", self.reason, self.passes.len())
    }
}

impl std::error::Error for StepFailure {}

/// Advances one time step. On success returns the new state and the outer
/// passes it took.
pub fn sfi_step(
    problem: &Problem<'_>,
    policy: &TolerancePolicy,
    qn: &QnConfig,
    outer: &OuterConfig,
) -> std::result::Result<(SimState, Vec<OuterPass>), StepFailure> {
    let mut passes = Vec::new();
    match sfi_iterate(problem, policy, qn, outer, &mut passes) {
        Ok(state) => Ok((state, passes)),
        Err(reason) => Err(StepFailure { reason, passes }),
    }
}

fn sfi_iterate(
    problem: &Problem<'_>,
    policy: &TolerancePolicy,
    qn: &QnConfig,
    outer: &OuterConfig,
    passes: &mut Vec<OuterPass>,
) -> std::result::Result<SimState, String> {
    let old = problem.old_state();
    let np = old.n_phases;
    let p_scale = outer
        .p_scale
        .unwrap_or_else(|| old.p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .max(f64::MIN_POSITIVE);
    let mut p = old.p.clone();
    let mut x = old.transport_vector();
    let mut ws = QnWorkspace::new(*qn, np - 1);
    let mut r0_prev = [None::<f64>; 2];
    // after a failed residual check the inner solves must reach eps_final
    let mut cap = f64::INFINITY;

    for nu in 0..outer.max_outer {
        let s = full_saturations(&x, np);
        let pres = newton_solve_with(
            |p| problem.assemble_pressure(p, &s, true),
            p.clone(),
            |r0| policy.effective_tolerance(Solver::Pressure, r0, r0_prev[0], nu).min(cap),
            policy.max_iter(Solver::Pressure),
            Safeguard::None,
        )
        .map_err(|e| format!("pressure solve: {e}"))?;
        r0_prev[0] = Some(pres.initial_residual());
        let mut pass = OuterPass {
            nu,
            pressure: InnerPass::from_result(Solver::Pressure, &pres),
            transport: None,
            dp: max_abs_diff(&pres.x, &p) / p_scale,
            dx: 0.0,
            coupled_residual: None,
        };
        if !pres.converged {
            passes.push(pass);
            return Err("pressure solve did not converge".into());
        }
        let p_new = pres.x;

        let ut = problem.total_velocities(&p_new, &s).map_err(|e| e.to_string())?;
        let trans = newton_solve_with(
            |x| problem.assemble_transport(x, &p_new, &ut, true),
            x.clone(),
            |r0| policy.effective_tolerance(Solver::Transport, r0, r0_prev[1], nu).min(cap),
            policy.max_iter(Solver::Transport),
            Safeguard::transport(np, policy.chop),
        );
        let trans = match trans {
            Ok(t) => t,
            Err(e) => {
                passes.push(pass);
                return Err(format!("transport solve: {e}"));
            }
        };
        r0_prev[1] = Some(trans.initial_residual());
        pass.transport = Some(InnerPass::from_result(Solver::Transport, &trans));
        if !trans.converged {
            passes.push(pass);
            return Err("transport solve did not converge".into());
        }

        let x_new = if qn.enabled { ws.update(&x, &trans.x) } else { trans.x };
        pass.dx = max_abs_diff(&x_new, &x);
        p = p_new;
        x = x_new;

        if pass.dp <= outer.eps_p && pass.dx <= outer.eps_t {
            let fi = problem.assemble_fi(&p, &x, false).map_err(|e| e.to_string())?;
            let rp = fi.norm_where(|e| e == 0);
            let rt = fi.norm_where(|e| e > 0);
            pass.coupled_residual = Some((rp, rt));
            passes.push(pass);
            if rp <= outer.eps_final && rt <= outer.eps_final {
                return Ok(SimState::from_transport_vector(p, &x, np));
            }
            cap = outer.eps_final;
        } else {
            passes.push(pass);
        }
    }
    Err(format!("no outer convergence in {} passes", outer.max_outer))
}

/// Wells active over successive time intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    /// `(end, wells)`; each period starts where the previous one ended.
    periods: Vec<(f64, Vec<Well>)>,
}

impl Schedule {
    pub fn constant(wells: Vec<Well>) -> Self {
        Self {
            periods: vec![(f64::INFINITY, wells)],
        }
    }

    /// Periods must be given in increasing end time.
    pub fn from_periods(periods: Vec<(f64, Vec<Well>)>) -> Result<Self> {
        if periods.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::Config("schedule periods must be increasing".into()));
        }
        Ok(Self { periods })
    }

    fn index_at(&self, t: f64) -> usize {
        self.periods
            .iter()
            .position(|(end, _)| t < *end)
            .unwrap_or(self.periods.len().saturating_sub(1))
    }

    pub fn wells_at(&self, t: f64) -> &[Well] {
        self.periods.get(self.index_at(t)).map(|(_, w)| w.as_slice()).unwrap_or(&[])
    }

    /// End of the period containing `t`; past the last period the final
    /// wells stay active indefinitely.
    pub fn next_boundary(&self, t: f64) -> f64 {
        self.periods
            .iter()
            .map(|(e, _)| *e)
            .find(|e| t < *e)
            .unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeControl {
    /// s.
    pub dtmax: f64,
    /// s.
    pub t_end: f64,
    /// Smallest step as a fraction of `dtmax` before the run aborts.
    #[serde(default = "TimeControl::default_min_fraction")]
    pub min_dt_fraction: f64,
}

impl TimeControl {
    pub fn new(dtmax: f64, t_end: f64) -> Self {
        Self {
            dtmax,
            t_end,
            min_dt_fraction: Self::default_min_fraction(),
        }
    }

    fn default_min_fraction() -> f64 {
        1.0 / 64.0
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimState,
    pub report: IterationReport,
    /// Time reached, s.
    pub time: f64,
    pub aborted: Option<String>,
}

/// Settings shared by every step of a run.
#[derive(Debug, Clone, Copy)]
pub struct Solvers<'a> {
    pub policy: &'a TolerancePolicy,
    pub qn: &'a QnConfig,
    pub outer: &'a OuterConfig,
}

/// Marches from `initial` to `time.t_end`, halving the step on failure and
/// doubling it (up to `dtmax`) after each success.
pub fn run_simulation(
    grid: &StructuredGrid,
    model: &RockFluidModel,
    initial: SimState,
    schedule: &Schedule,
    solvers: Solvers<'_>,
    time: TimeControl,
) -> Result<RunOutput> {
    if !(time.dtmax > 0.0) || !(time.t_end >= 0.0) {
        return Err(Error::Config("dtmax must be positive and t_end non-negative".into()));
    }
    solvers.policy.validate()?;
    solvers.qn.validate()?;
    solvers.outer.validate()?;
    let mut outer = *solvers.outer;
    if outer.p_scale.is_none() {
        outer.p_scale = Some(initial.p.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    let eps_t = 1e-9 * time.dtmax;
    let dt_min = time.dtmax * time.min_dt_fraction;
    let mut state = initial;
    let mut report = IterationReport::default();
    let mut t = 0.0;
    let mut dt_try = time.dtmax;
    let mut step = 0;
    let mut attempt = 0;

    while time.t_end - t > eps_t {
        let boundary = schedule.next_boundary(t + eps_t);
        let dt = dt_try.min(time.t_end - t).min(boundary - t);
        let wells = schedule.wells_at(t + eps_t);
        let problem = Problem::new(grid, model, wells, &state, dt);
        match sfi_step(&problem, solvers.policy, solvers.qn, &outer) {
            Ok((new, passes)) => {
                let imbalance = mass_imbalance(&problem, &new)?;
                report.steps.push(StepReport {
                    step,
                    attempt,
                    time: t,
                    dt,
                    accepted: true,
                    passes,
                    failure: None,
                    mass_imbalance: imbalance,
                });
                state = new;
                t = if (boundary - (t + dt)).abs() <= eps_t { boundary } else { t + dt };
                step += 1;
                attempt = 0;
                dt_try = (2.0 * dt_try).min(time.dtmax);
            }
            Err(fail) => {
                report.steps.push(StepReport {
                    step,
                    attempt,
                    time: t,
                    dt,
                    accepted: false,
                    passes: fail.passes,
                    failure: Some(fail.reason.clone()),
                    mass_imbalance: Vec::new(),
                });
                attempt += 1;
                dt_try = 0.5 * dt;
                if dt_try < dt_min * (1.0 - 1e-12) {
                    return Ok(RunOutput {
                        state,
                        report,
                        time: t,
                        aborted: Some(format!(
                            "time step fell below {dt_min} s at t = {t} s: {}",
                            fail.reason
                        )),
                    });
                }
            }
        }
    }
    Ok(RunOutput {
        state,
        report,
        time: t.min(time.t_end),
        aborted: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_lookup() {
        let s = Schedule::from_periods(vec![(10.0, vec![]), (20.0, vec![])]).unwrap();
        assert_eq!(s.next_boundary(0.0), 10.0);
        assert_eq!(s.next_boundary(10.0), 20.0);
        assert_eq!(s.next_boundary(25.0), f64::INFINITY);
        assert!(Schedule::from_periods(vec![(10.0, vec![]), (5.0, vec![])]).is_err());
        assert_eq!(Schedule::constant(vec![]).next_boundary(1e9), f64::INFINITY);
    }
}
