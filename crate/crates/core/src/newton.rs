//! Newton driver for the inner sub-problems and the inner tolerance policies.

use serde::{Deserialize, Serialize};

use crate::assembly::ResidualSystem;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Tight,
    AbsoluteRelax,
    RelativeRelax,
    AdaptiveRelax,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Tight,
        Strategy::AbsoluteRelax,
        Strategy::RelativeRelax,
        Strategy::AdaptiveRelax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Tight => "tight",
            Strategy::AbsoluteRelax => "absolute",
            Strategy::RelativeRelax => "relative",
            Strategy::AdaptiveRelax => "adaptive",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Pressure,
    Transport,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Pressure => "pressure",
            Solver::Transport => "transport",
        }
    }
}

/// Inner termination rule. Fields not used by the active strategy are
/// ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancePolicy {
    pub strategy: Strategy,
    /// Absolute tolerances (tight and absolute strategies).
    pub eps_p: f64,
    pub eps_t: f64,
    /// Fixed relative factors.
    pub xi_p: f64,
    pub xi_t: f64,
    /// Adaptive base factors.
    pub beta_p: f64,
    pub beta_t: f64,
    pub xi_min: f64,
    /// Upper clamp for the adaptive factor; `None` means `β`.
    pub xi_max: Option<f64>,
    /// Lower bounds on the relative tolerances.
    pub floor_p: f64,
    pub floor_t: f64,
    pub max_iter_p: usize,
    pub max_iter_t: usize,
    /// Largest saturation change per Newton update.
    pub chop: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self::preset(Strategy::Tight)
    }
}

impl TolerancePolicy {
    /// Shipped presets.
    pub fn preset(strategy: Strategy) -> Self {
        let (eps_p, eps_t) = match strategy {
            Strategy::AbsoluteRelax => (1.0, 0.1),
            _ => (1e-7, 1e-5),
        };
        Self {
            strategy,
            eps_p,
            eps_t,
            xi_p: 0.1,
            xi_t: 0.1,
            beta_p: 0.5,
            beta_t: 0.5,
            xi_min: 0.01,
            xi_max: None,
            floor_p: 1e-8,
            floor_t: 1e-7,
            max_iter_p: 20,
            max_iter_t: 20,
            chop: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.eps_p,
            self.eps_t,
            self.floor_p,
            self.floor_t,
            self.chop,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        let factors = [self.xi_p, self.xi_t, self.beta_p, self.beta_t, self.xi_min];
        if factors.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::Config("relative factors must lie in (0, 1)".into()));
        }
        for beta in [self.beta_p, self.beta_t] {
            let hi = self.xi_max.unwrap_or(beta);
            if self.xi_min > hi {
                return Err(Error::Config(format!("xi_min {} exceeds xi_max {hi}", self.xi_min)));
            }
        }
        if self.max_iter_p == 0 || self.max_iter_t == 0 {
            return Err(Error::Config("inner iteration limits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_iter(&self, which: Solver) -> usize {
        match which {
            Solver::Pressure => self.max_iter_p,
            Solver::Transport => self.max_iter_t,
        }
    }

    /// Adaptive forcing factor `ξ^ν`.
    pub fn adaptive_xi(&self, which: Solver, r0: f64, r0_prev: Option<f64>, nu: usize) -> f64 {
        let beta = match which {
            Solver::Pressure => self.beta_p,
            Solver::Transport => self.beta_t,
        };
        if nu == 0 {
            return beta;
        }
        let prev = r0_prev.expect("previous outer R0 is required for ν > 0");
        let hi = self.xi_max.unwrap_or(beta);
        let ratio = if prev > 0.0 { r0 / prev } else { f64::INFINITY };
        (beta * ratio).clamp(self.xi_min, hi)
    }

    /// Termination tolerance of an inner solve whose initial residual is `r0`.
    pub fn effective_tolerance(&self, which: Solver, r0: f64, r0_prev: Option<f64>, nu: usize) -> f64 {
        let (eps, xi, floor) = match which {
            Solver::Pressure => (self.eps_p, self.xi_p, self.floor_p),
            Solver::Transport => (self.eps_t, self.xi_t, self.floor_t),
        };
        match self.strategy {
            Strategy::Tight | Strategy::AbsoluteRelax => eps,
            Strategy::RelativeRelax => (xi * r0).max(floor),
            Strategy::AdaptiveRelax => (self.adaptive_xi(which, r0, r0_prev, nu) * r0).max(floor),
        }
    }
}

/// Update limiter applied to each Newton increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Safeguard {
    None,
    /// Unknowns come in blocks of `block`; entries `first..first + n_sat` of
    /// each block are saturations whose complement is an eliminated phase.
    SaturationChop {
        block: usize,
        first: usize,
        n_sat: usize,
        max_change: f64,
    },
}

impl Safeguard {
    pub fn transport(n_phases: usize, max_change: f64) -> Self {
        Safeguard::SaturationChop {
            block: n_phases - 1,
            first: 0,
            n_sat: n_phases - 1,
            max_change,
        }
    }

    pub fn coupled(n_phases: usize, max_change: f64) -> Self {
        Safeguard::SaturationChop {
            block: n_phases,
            first: 1,
            n_sat: n_phases - 1,
            max_change,
        }
    }

    /// `x + δ` after limiting.
    pub fn apply(&self, x: &mut [f64], delta: &[f64]) {
        match *self {
            Safeguard::None => x.iter_mut().zip(delta).for_each(|(a, d)| *a += d),
            Safeguard::SaturationChop {
                block,
                first,
                n_sat,
                max_change,
            } => {
                for (xb, db) in x.chunks_mut(block).zip(delta.chunks(block)) {
                    let ds = &db[first..first + n_sat];
                    let implicit: f64 = -ds.iter().sum::<f64>();
                    let biggest = ds.iter().fold(implicit.abs(), |m, d| m.max(d.abs()));
                    let w = if biggest > max_change { max_change / biggest } else { 1.0 };
                    for k in 0..block {
                        let w = if (first..first + n_sat).contains(&k) { w } else { 1.0 };
                        xb[k] += w * db[k];
                    }
                    project_saturations(&mut xb[first..first + n_sat]);
                }
            }
        }
    }
}

/// Clamps explicit saturations to `[0, 1]` and rescales them when their sum
/// exceeds one, so the eliminated phase stays in `[0, 1]`.
pub fn project_saturations(s: &mut [f64]) {
    for v in s.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let sum: f64 = s.iter().sum();
    if sum > 1.0 {
        s.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Applies [`project_saturations`] to every cell block of a transport vector.
pub fn project_transport_vector(x: &mut [f64], n_sat: usize) {
    x.chunks_mut(n_sat).for_each(project_saturations);
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub x: Vec<f64>,
    /// Number of Newton updates taken.
    pub iterations: usize,
    /// `‖R_0‖ .. ‖R_k‖`.
    pub history: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
}

impl InnerResult {
    pub fn initial_residual(&self) -> f64 {
        self.history[0]
    }

    pub fn final_residual(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

/// Newton iteration with a fixed tolerance.
pub fn newton_solve<F>(assemble: F, x0: Vec<f64>, eps: f64, max_iter: usize, safeguard: Safeguard) -> Result<InnerResult>
where
    F: FnMut(&[f64]) -> Result<ResidualSystem>,
{
    newton_solve_with(assemble, x0, |_| eps, max_iter, safeguard)
}

/// Newton iteration whose tolerance is chosen from the initial residual.
///
/// Stops when `‖R_k‖ ≤ ε` (possibly before any update) or after `max_iter`
/// updates. A non-finite residual ends the solve unconverged.
pub fn newton_solve_with<F, T>(
    mut assemble: F,
    x0: Vec<f64>,
    tolerance: T,
    max_iter: usize,
    safeguard: Safeguard,
) -> Result<InnerResult>
where
    F: FnMut(&[f64]) -> Result<ResidualSystem>,
    T: FnOnce(f64) -> f64,
{
    assert!(max_iter >= 1, "max_iter must be at least 1");
    let mut x = x0;
    let mut rs = assemble(&x)?;
    let r0 = rs.norm();
    let eps = tolerance(r0);
    assert!(eps > 0.0, "tolerance must be positive");
    let mut history = vec![r0];
    let mut iterations = 0;
    loop {
        let norm = *history.last().unwrap();
        if !norm.is_finite() {
            break;
        }
        if norm <= eps {
            return Ok(InnerResult {
                x,
                iterations,
                history,
                converged: true,
                tolerance: eps,
            });
        }
        if iterations == max_iter {
            break;
        }
        let jac = rs.jacobian.take().expect("assembly must provide a Jacobian");
        let rhs: Vec<f64> = rs.residual.iter().map(|r| -r).collect();
        let delta = jac.solve(&rhs)?;
        safeguard.apply(&mut x, &delta);
        iterations += 1;
        rs = assemble(&x)?;
        history.push(rs.norm());
    }
    Ok(InnerResult {
        x,
        iterations,
        history,
        converged: false,
        tolerance: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BandedMatrix;

    fn scalar_system(r: f64, dr: f64) -> ResidualSystem {
        let mut j = BandedMatrix::zeros(1, 0, 0);
        j.set(0, 0, dr);
        ResidualSystem {
            residual: vec![r],
            jacobian: Some(j),
            scale: vec![1.0],
            block: 1,
            stagnant_faces: 0,
        }
    }

    fn quadratic(x: &[f64]) -> Result<ResidualSystem> {
        Ok(scalar_system(x[0] * x[0] - 4.0, 2.0 * x[0]))
    }

    #[test]
    fn quadratic_converges_fast() {
        let res = newton_solve(quadratic, vec![3.0], 1e-12, 20, Safeguard::None).unwrap();
        assert!(res.converged);
        assert!((res.x[0] - 2.0).abs() < 1e-12);
        assert!(res.history.len() <= 7, "{:?}", res.history);
        assert_eq!(res.history.len(), res.iterations + 1);
        // quadratic contraction on the tail
        let h = &res.history;
        let n = h.len();
        let c = h[n - 2] / (h[n - 3] * h[n - 3]);
        assert!(c < 1.0, "{h:?}");
    }

    #[test]
    fn early_exit_without_update() {
        let res = newton_solve(quadratic, vec![2.0], 1e-12, 5, Safeguard::None).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.x, vec![2.0]);
    }

    #[test]
    fn iteration_cap() {
        let res = newton_solve(quadratic, vec![100.0], 1e-12, 1, Safeguard::None).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.history.len(), 2);
        assert!((res.x[0] - (100.0 - 9996.0 / 200.0)).abs() < 1e-12);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let res = newton_solve(|_| Ok(scalar_system(1.0, 0.0)), vec![0.0], 1e-8, 3, Safeguard::None);
        assert!(matches!(res, Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn table_one_presets() {
        let t = TolerancePolicy::preset(Strategy::Tight);
        assert_eq!(t.effective_tolerance(Solver::Pressure, 3.0, None, 0), 1e-7);
        assert_eq!(t.effective_tolerance(Solver::Transport, 3.0, None, 0), 1e-5);
        let a = TolerancePolicy::preset(Strategy::AbsoluteRelax);
        assert_eq!(a.effective_tolerance(Solver::Pressure, 3.0, None, 0), 1.0);
        assert_eq!(a.effective_tolerance(Solver::Transport, 3.0, None, 0), 0.1);
        let r = TolerancePolicy::preset(Strategy::RelativeRelax);
        assert!((r.effective_tolerance(Solver::Transport, 2.0, None, 3) - 0.2).abs() < 1e-15);
        let d = TolerancePolicy::preset(Strategy::AdaptiveRelax);
        assert_eq!(d.adaptive_xi(Solver::Pressure, 1.0, None, 0), 0.5);
    }

    #[test]
    fn adaptive_factor_and_clamps() {
        let d = TolerancePolicy::preset(Strategy::AdaptiveRelax);
        let xi = d.adaptive_xi(Solver::Transport, 0.3, Some(1.0), 2);
        assert!((xi - 0.15).abs() < 1e-15);
        let eps = d.effective_tolerance(Solver::Transport, 0.3, Some(1.0), 2);
        assert!((eps - 0.045).abs() < 1e-15);
        assert_eq!(d.adaptive_xi(Solver::Transport, 1.4, Some(1.0), 2), 0.5);
        assert_eq!(d.adaptive_xi(Solver::Transport, 0.001, Some(1.0), 2), 0.01);
        // floor
        assert_eq!(d.effective_tolerance(Solver::Transport, 1e-9, Some(1e-9), 1), 1e-7);
    }

    #[test]
    fn relative_tolerance_scales_with_r0() {
        for strategy in [Strategy::RelativeRelax, Strategy::AdaptiveRelax] {
            let p = TolerancePolicy::preset(strategy);
            let a = p.effective_tolerance(Solver::Pressure, 0.01, None, 0);
            let b = p.effective_tolerance(Solver::Pressure, 0.02, None, 0);
            assert!((b - 2.0 * a).abs() < 1e-15);
        }
    }

    #[test]
    #[should_panic]
    fn adaptive_needs_previous_r0() {
        TolerancePolicy::preset(Strategy::AdaptiveRelax).effective_tolerance(Solver::Pressure, 1.0, None, 1);
    }

    #[test]
    fn chop_limits_and_projects() {
        let g = Safeguard::transport(3, 0.2);
        let mut x = vec![0.5, 0.3, 0.1, 0.1];
        g.apply(&mut x, &[0.8, 0.0, -0.4, 0.0]);
        // scaled by 0.25
        assert!((x[0] - 0.7).abs() < 1e-15);
        assert!((x[2] - 0.0).abs() < 1e-15);
        let mut y = vec![0.9, 0.05];
        Safeguard::transport(3, 1.0).apply(&mut y, &[0.3, 0.0]);
        assert!((y[0] + y[1] - 1.0).abs() < 1e-15 && y[0] <= 1.0);
    }

    #[test]
    fn coupled_chop_leaves_pressure_alone() {
        let g = Safeguard::coupled(2, 0.2);
        let mut x = vec![1e7, 0.5];
        g.apply(&mut x, &[5e5, 0.4]);
        assert_eq!(x[0], 1e7 + 5e5);
        assert!((x[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::from_name(s.name()), Some(s));
        }
        assert_eq!(Strategy::from_name("bogus"), None);
    }
}
