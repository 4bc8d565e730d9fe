//! Monolithic Newton solve of the coupled system whose root is the SFI fixed
//! point. Used as a reference for the sequential solver.

use crate::assembly::{Problem, SimState};
use crate::error::{Error, Result};
use crate::newton::{newton_solve, InnerResult, Safeguard};

pub const FI_TOLERANCE: f64 = 1e-10;
pub const FI_MAX_ITER: usize = 50;
pub const FI_CHOP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct FiResult {
    pub state: SimState,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Solves the step starting from the previous time level.
pub fn fi_solve_step(problem: &Problem<'_>) -> Result<FiResult> {
    fi_solve_from(problem, problem.old_state())
}

/// Solves the step from an arbitrary initial guess.
pub fn fi_solve_from(problem: &Problem<'_>, guess: &SimState) -> Result<FiResult> {
    let np = guess.n_phases;
    let x0 = interleave(guess);
    let res: InnerResult = newton_solve(
        |x| {
            let (p, xt) = split(x, np);
            problem.assemble_fi(&p, &xt, true)
        },
        x0,
        FI_TOLERANCE,
        FI_MAX_ITER,
        Safeguard::coupled(np, FI_CHOP),
    )?;
    if !res.converged {
        return Err(Error::Aborted {
            time: 0.0,
            reason: format!(
                "coupled Newton stopped at residual {:.3e} after {} iterations",
                res.final_residual(),
                res.iterations
            ),
        });
    }
    let (p, xt) = split(&res.x, np);
    Ok(FiResult {
        state: SimState::from_transport_vector(p, &xt, np),
        iterations: res.iterations,
        history: res.history,
    })
}

/// `(p, s_0, .., s_{n_p-2})` per cell.
fn interleave(state: &SimState) -> Vec<f64> {
    let np = state.n_phases;
    (0..state.n_cells())
        .flat_map(|c| std::iter::once(state.p[c]).chain(state.sat(c)[..np - 1].iter().copied()))
        .collect()
}

fn split(x: &[f64], np: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = Vec::with_capacity(x.len() / np);
    let mut xt = Vec::with_capacity(x.len() / np * (np - 1));
    for block in x.chunks(np) {
        p.push(block[0]);
        xt.extend_from_slice(&block[1..]);
    }
    (p, xt)
}
