#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfi_core::grid::{build_cartesian_grid, PermeabilityField, StructuredGrid};
use sfi_core::harness::builtin_case;
use sfi_core::linalg::BandedMatrix;
use sfi_core::units::md_to_m2;
use sfi_core::{ResidualSystem, RockFluidModel, SimState};

pub const G: f64 = 9.80665;

/// Fluid of a registered case, optionally with gravity switched on.
pub fn fluid_of(case: &str, gravity: Option<f64>) -> RockFluidModel {
    let mut m = builtin_case(case).unwrap().fluid;
    if let Some(g) = gravity {
        m.gravity = g;
    }
    m
}

/// `nx × nz` grid of 10 m cells with permeability varying by cell.
pub fn small_grid(nx: usize, nz: usize) -> StructuredGrid {
    let n = nx * nz;
    let perm = (0..n).map(|c| md_to_m2(50.0 + 37.0 * ((c * 7) % 5) as f64)).collect();
    let porosity = (0..n).map(|c| 0.15 + 0.02 * (c % 3) as f64).collect();
    build_cartesian_grid(nx, nz, 10.0, 5.0, 10.0, PermeabilityField { perm, porosity }).unwrap()
}

/// Random state with saturations well inside the simplex and pressures
/// spread enough that no potential difference is near zero.
pub fn random_state(n: usize, np: usize, p0: f64, seed: u64) -> SimState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..n).map(|_| p0 + rng.random_range(-2e5..2e5)).collect();
    let mut s = Vec::with_capacity(n * np);
    for _ in 0..n {
        let raw: Vec<f64> = (0..np).map(|_| rng.random_range(0.3..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        s.extend(raw.iter().map(|v| v / sum));
    }
    SimState { n_phases: np, p, s }
}

/// Central-difference check of every Jacobian column. Entries are compared
/// relative to the largest analytic entry in their row.
pub fn check_jacobian<F>(assemble: F, x: &[f64], steps: &[f64], rel: f64) -> Result<(), String>
where
    F: Fn(&[f64]) -> ResidualSystem,
{
    let base = assemble(x);
    let jac: &BandedMatrix = base.jacobian.as_ref().expect("jacobian requested");
    let n = x.len();
    let dense = jac.to_dense();
    let row_max: Vec<f64> = dense.iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    for col in 0..n {
        let h = steps[col];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[col] += h;
        xm[col] -= h;
        let rp = assemble(&xp).residual;
        let rm = assemble(&xm).residual;
        for row in 0..n {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            let an = dense[row][col];
            let tol = rel * row_max[row].max(1e-300);
            if (fd - an).abs() > tol {
                return Err(format!("J[{row}][{col}]: analytic {an:e}, finite difference {fd:e}"));
            }
        }
    }
    Ok(())
}
