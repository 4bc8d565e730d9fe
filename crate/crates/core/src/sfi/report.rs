//! Iteration bookkeeping.

use serde::Serialize;

use crate::newton::{InnerResult, Solver};

/// One inner solve within an outer pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerPass {
    pub solver: Solver,
    pub iterations: usize,
    pub tolerance: f64,
    pub converged: bool,
    /// `‖R_0‖ .. ‖R_k‖`.
    pub history: Vec<f64>,
}

impl InnerPass {
    pub fn from_result(solver: Solver, res: &InnerResult) -> Self {
        Self {
            solver,
            iterations: res.iterations,
            tolerance: res.tolerance,
            converged: res.converged,
            history: res.history.clone(),
        }
    }

    pub fn r0(&self) -> f64 {
        self.history[0]
    }

    pub fn r_final(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

/// One pressure-transport pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterPass {
    pub nu: usize,
    pub pressure: InnerPass,
    /// Absent when the pressure solve failed.
    pub transport: Option<InnerPass>,
    /// `‖Δp‖∞ / p_scale`.
    pub dp: f64,
    /// `‖Δx_t‖∞`.
    pub dx: f64,
    /// Coupled residual norms (pressure rows, transport rows), recorded when
    /// the increment test passed.
    pub coupled_residual: Option<(f64, f64)>,
}

/// One attempt at a time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    /// Index of the accepted step this attempt belongs to.
    pub step: usize,
    pub attempt: usize,
    /// Start time, s.
    pub time: f64,
    pub dt: f64,
    pub accepted: bool,
    pub passes: Vec<OuterPass>,
    pub failure: Option<String>,
    /// Per-phase global mass imbalance of an accepted step, surface m³.
    pub mass_imbalance: Vec<f64>,
}

impl StepReport {
    pub fn outer(&self) -> usize {
        self.passes.len()
    }

    pub fn pressure_iterations(&self) -> usize {
        self.passes.iter().map(|p| p.pressure.iterations).sum()
    }

    pub fn transport_iterations(&self) -> usize {
        self.passes.iter().filter_map(|p| p.transport.as_ref()).map(|t| t.iterations).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub outer: usize,
    pub pressure: usize,
    pub transport: usize,
    pub wasted_outer: usize,
    pub wasted_pressure: usize,
    pub wasted_transport: usize,
    pub accepted_steps: usize,
    pub cuts: usize,
}

/// All attempts of a run, in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationReport {
    pub steps: Vec<StepReport>,
}

impl IterationReport {
    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for s in &self.steps {
            let (o, p, tr) = (s.outer(), s.pressure_iterations(), s.transport_iterations());
            t.outer += o;
            t.pressure += p;
            t.transport += tr;
            if s.accepted {
                t.accepted_steps += 1;
            } else {
                t.cuts += 1;
                t.wasted_outer += o;
                t.wasted_pressure += p;
                t.wasted_transport += tr;
            }
        }
        t
    }

    pub fn accepted(&self) -> impl Iterator<Item = &StepReport> {
        self.steps.iter().filter(|s| s.accepted)
    }
}
