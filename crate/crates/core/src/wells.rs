//! Single-cell wells: rate-controlled injectors and pressure-controlled
//! producers with a Peaceman well index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StructuredGrid;

/// Wellbore radius, m.
pub const WELLBORE_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WellControl {
    /// Injects `surface_rate` (m³/s at surface conditions) of one phase.
    Rate { phase: usize, surface_rate: f64 },
    /// Produces every mobile phase at `WI · λ_l · (p - bhp)`.
    Bhp { pressure: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub cell: usize,
    pub control: WellControl,
    /// Peaceman index, m³.
    pub index: f64,
}

/// `WI = 2π K dz / ln(r_e / r_w)` with `r_e = 0.2 dx`.
pub fn peaceman_index(grid: &StructuredGrid, cell: usize) -> Result<f64> {
    let re = 0.2 * grid.dx;
    if re <= WELLBORE_RADIUS {
        return Err(Error::Config(format!(
            "cell width {} m is too small for a {WELLBORE_RADIUS} m wellbore",
            grid.dx
        )));
    }
    Ok(2.0 * std::f64::consts::PI * grid.perm(cell) * grid.dz / (re / WELLBORE_RADIUS).ln())
}

impl Well {
    pub fn new(grid: &StructuredGrid, cell: usize, control: WellControl) -> Result<Self> {
        if cell >= grid.n_cells() {
            return Err(Error::Config(format!(
                "well cell {cell} is outside the grid ({} cells)",
                grid.n_cells()
            )));
        }
        let index = match control {
            WellControl::Rate { .. } => 0.0,
            WellControl::Bhp { .. } => peaceman_index(grid, cell)?,
        };
        Ok(Self { cell, control, index })
    }

    pub fn injector(grid: &StructuredGrid, cell: usize, phase: usize, surface_rate: f64) -> Result<Self> {
        Self::new(grid, cell, WellControl::Rate { phase, surface_rate })
    }

    pub fn producer(grid: &StructuredGrid, cell: usize, bhp: f64) -> Result<Self> {
        Self::new(grid, cell, WellControl::Bhp { pressure: bhp })
    }
}
