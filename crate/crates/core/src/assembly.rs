//! Residual and Jacobian assembly.
//!
//! Three systems share one discretisation:
//!
//! * **pressure**: the volume-balance equation obtained by summing the phase
//!   conservation equations weighted by `1/b_l^{n+1}`; PPU fluxes, mobilities
//!   frozen at the current outer saturations, unknown `p`;
//! * **transport**: conservation of the first `n_p - 1` phases with HU fluxes
//!   at frozen pressure and total velocity, unknowns the first `n_p - 1`
//!   saturations (the last one is `1 - Σ`);
//! * **coupled**: pressure rows with live saturations plus transport rows
//!   whose total velocity is the live PPU sum. Its root is the fixed point of
//!   the sequential iteration.
//!
//! Residual rows are normalised by `φ_ref` (pressure) and `φ_ref · b_ref,l`
//! (phase `l`).

use crate::ad::Local;
use crate::error::{Error, Result};
use crate::flux::{hu_terms, lift_side, ppu_terms, ppu_total, CellVars, Side};
use crate::grid::StructuredGrid;
use crate::linalg::{norm_inf, BandedMatrix};
use crate::rockfluid::RockFluidModel;
use crate::wells::{Well, WellControl};
use crate::MAX_PHASES;

/// Pressure and saturations of every cell at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub n_phases: usize,
    /// Pa.
    pub p: Vec<f64>,
    /// Cell-major: `s[c * n_phases + l]`.
    pub s: Vec<f64>,
}

impl SimState {
    pub fn uniform(n_cells: usize, p: f64, s: &[f64]) -> Self {
        Self {
            n_phases: s.len(),
            p: vec![p; n_cells],
            s: s.iter().copied().cycle().take(n_cells * s.len()).collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    pub fn sat(&self, cell: usize) -> &[f64] {
        &self.s[cell * self.n_phases..(cell + 1) * self.n_phases]
    }

    pub fn sat_mut(&mut self, cell: usize) -> &mut [f64] {
        let np = self.n_phases;
        &mut self.s[cell * np..(cell + 1) * np]
    }

    /// First `n_p - 1` saturations of every cell.
    pub fn transport_vector(&self) -> Vec<f64> {
        let np = self.n_phases;
        (0..self.n_cells())
            .flat_map(|c| self.s[c * np..c * np + np - 1].iter().copied())
            .collect()
    }

    pub fn set_transport_vector(&mut self, x: &[f64]) {
        let np = self.n_phases;
        for c in 0..self.n_cells() {
            let xs = &x[c * (np - 1)..(c + 1) * (np - 1)];
            let sum: f64 = xs.iter().sum();
            let cell = self.sat_mut(c);
            cell[..np - 1].copy_from_slice(xs);
            cell[np - 1] = 1.0 - sum;
        }
    }

    pub fn from_transport_vector(p: Vec<f64>, x: &[f64], n_phases: usize) -> Self {
        let mut st = Self {
            n_phases,
            s: vec![0.0; p.len() * n_phases],
            p,
        };
        st.set_transport_vector(x);
        st
    }

    /// Saturations in `[0, 1]` summing to one within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for c in 0..self.n_cells() {
            let s = self.sat(c);
            for (l, &v) in s.iter().enumerate() {
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(Error::SaturationDomain { phase: l, value: v });
                }
            }
            let sum: f64 = s.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Config(format!("cell {c}: saturations sum to {sum}")));
            }
        }
        Ok(())
    }
}

/// Residual vector with its (optional) Jacobian and per-row normalisation.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    pub residual: Vec<f64>,
    pub jacobian: Option<BandedMatrix>,
    /// Each row is divided by its scale before taking norms.
    pub scale: Vec<f64>,
    /// Rows per cell.
    pub block: usize,
    /// Faces where the upwind total mobility vanished.
    pub stagnant_faces: usize,
}

impl ResidualSystem {
    pub fn norm(&self) -> f64 {
        normalized_residual_norm(self)
    }

    /// Normalised max-norm over the rows whose in-block index satisfies `keep`.
    pub fn norm_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.residual
            .iter()
            .zip(&self.scale)
            .enumerate()
            .filter(|(k, _)| keep(k % self.block))
            .fold(0.0f64, |m, (_, (r, s))| m.max((r / s).abs()))
    }
}

/// `max_row |r_row| / scale_row`.
pub fn normalized_residual_norm(rs: &ResidualSystem) -> f64 {
    rs.residual
        .iter()
        .zip(&rs.scale)
        .fold(0.0f64, |m, (r, s)| m.max((r / s).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Pressure,
    Transport,
    Coupled,
    /// Values only; every quantity constant.
    Values,
}

/// Everything fixed during one time step: geometry, fluids, active wells and
/// the previous time level.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub grid: &'a StructuredGrid,
    pub model: &'a RockFluidModel,
    pub wells: &'a [Well],
    pub dt: f64,
    old: &'a SimState,
    /// `φ^n` per cell.
    phi_old: Vec<f64>,
    /// `b_l^n` per cell, cell-major.
    b_old: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        grid: &'a StructuredGrid,
        model: &'a RockFluidModel,
        wells: &'a [Well],
        old: &'a SimState,
        dt: f64,
    ) -> Self {
        assert!(dt > 0.0, "time step must be positive");
        assert_eq!(old.n_cells(), grid.n_cells());
        let np = model.n_phases();
        let phi_old = (0..grid.n_cells())
            .map(|c| model.porosity(grid.porosity_ref(c), old.p[c]).0)
            .collect();
        let b_old = (0..grid.n_cells())
            .flat_map(|c| (0..np).map(move |l| (c, l)))
            .map(|(c, l)| model.b_of_p(l, old.p[c]).0)
            .collect();
        Self {
            grid,
            model,
            wells,
            dt,
            old,
            phi_old,
            b_old,
        }
    }

    pub fn old_state(&self) -> &SimState {
        self.old
    }

    fn np(&self) -> usize {
        self.model.n_phases()
    }

    fn block(&self, mode: Mode) -> usize {
        match mode {
            Mode::Pressure => 1,
            Mode::Transport => self.np() - 1,
            Mode::Coupled => self.np(),
            Mode::Values => 0,
        }
    }

    fn cell_vars(&self, mode: Mode, p: f64, s: &[f64]) -> CellVars {
        let np = self.np();
        let mut v = CellVars {
            p: Local::constant(p),
            s: [Local::ZERO; MAX_PHASES],
        };
        let sat_offset = match mode {
            Mode::Pressure | Mode::Values => {
                if mode == Mode::Pressure {
                    v.p = Local::variable(p, 0);
                }
                for l in 0..np {
                    v.s[l] = Local::constant(s[l]);
                }
                return v;
            }
            Mode::Transport => 0,
            Mode::Coupled => {
                v.p = Local::variable(p, 0);
                1
            }
        };
        let mut last = Local::constant(1.0);
        for m in 0..np - 1 {
            v.s[m] = Local::variable(s[m], sat_offset + m);
            last -= v.s[m];
        }
        // keep the value itself exact rather than 1 - Σ
        last.v = s[np - 1];
        v.s[np - 1] = last;
        v
    }

    fn bandwidth(&self, block: usize) -> usize {
        let reach = if self.grid.nz > 1 { self.grid.nx } else { 1 };
        block * reach + block - 1
    }

    fn new_system(&self, mode: Mode, with_jacobian: bool) -> ResidualSystem {
        let n = self.grid.n_cells();
        let block = self.block(mode);
        let scale = (0..n)
            .flat_map(|c| (0..block).map(move |e| (c, e)))
            .map(|(c, e)| {
                let phi = self.grid.porosity_ref(c);
                match mode {
                    Mode::Pressure => phi,
                    Mode::Transport => phi * self.model.phases[e].b_ref,
                    Mode::Coupled if e == 0 => phi,
                    Mode::Coupled => phi * self.model.phases[e - 1].b_ref,
                    Mode::Values => unreachable!(),
                }
            })
            .collect();
        let bw = self.bandwidth(block);
        ResidualSystem {
            residual: vec![0.0; n * block],
            jacobian: with_jacobian.then(|| BandedMatrix::zeros(n * block, bw, bw)),
            scale,
            block,
            stagnant_faces: 0,
        }
    }

    fn lift_all(&self, mode: Mode, p: &[f64], s: &[f64]) -> Result<Vec<Side>> {
        let np = self.np();
        (0..self.grid.n_cells())
            .map(|c| lift_side(self.model, &self.cell_vars(mode, p[c], &s[c * np..(c + 1) * np])))
            .collect()
    }

    /// Accumulation rows of cell `c` in `mode` (slots relative to the cell).
    fn pressure_accumulation(&self, c: usize, side: &Side) -> Local {
        let np = self.np();
        let (phi, dphi) = self.model.porosity(self.grid.porosity_ref(c), side.p.v);
        let phi_new = side.p.chain(phi, dphi);
        let sold = self.old.sat(c);
        let mut acc = phi_new;
        for l in 0..np {
            let w = self.phi_old[c] * self.b_old[c * np + l] * sold[l];
            acc -= Local::constant(w) / side.b[l];
        }
        acc
    }

    fn phase_accumulation(&self, c: usize, l: usize, side: &Side, sat: Local) -> Local {
        let np = self.np();
        let (phi, dphi) = self.model.porosity(self.grid.porosity_ref(c), side.p.v);
        let phi_new = side.p.chain(phi, dphi);
        let old = self.phi_old[c] * self.b_old[c * np + l] * self.old.sat(c)[l];
        phi_new * side.b[l] * sat + (-old)
    }

    /// Pressure residual at trial pressure `p` with saturations frozen at
    /// `s_frozen` (all phases, cell-major).
    pub fn assemble_pressure(&self, p: &[f64], s_frozen: &[f64], with_jacobian: bool) -> Result<ResidualSystem> {
        let mode = Mode::Pressure;
        let np = self.np();
        let mut rs = self.new_system(mode, with_jacobian);
        let sides = self.lift_all(mode, p, s_frozen)?;
        let k = self.dt / self.grid.cell_volume();

        for (c, side) in sides.iter().enumerate() {
            let acc = self.pressure_accumulation(c, side);
            scatter(&mut rs, c, 0, c, c, &acc, 1);
        }
        for face in self.grid.faces() {
            let a = &sides[face.cell_i];
            let b = &shift_side(&sides[face.cell_j], 1);
            let terms = ppu_terms(self.model, face, a, b);
            let mut out_i = Local::ZERO;
            let mut out_j = Local::ZERO;
            for l in 0..np {
                let b_up = if terms[l].from_i { a.b[l] } else { b.b[l] };
                let bf = b_up * terms[l].flux;
                out_i += bf / a.b[l];
                out_j -= bf / b.b[l];
            }
            scatter(&mut rs, face.cell_i, 0, face.cell_i, face.cell_j, &out_i.scale(k), 1);
            scatter(&mut rs, face.cell_j, 0, face.cell_i, face.cell_j, &out_j.scale(k), 1);
        }
        for well in self.wells {
            let c = well.cell;
            let side = &sides[c];
            let term = match well.control {
                WellControl::Rate { phase, surface_rate } => -(Local::constant(surface_rate) / side.b[phase]),
                WellControl::Bhp { pressure } => {
                    let lam_t = (0..np).fold(Local::ZERO, |acc, l| acc + side.lambda[l]);
                    lam_t * (side.p + (-pressure)) * well.index
                }
            };
            scatter(&mut rs, c, 0, c, c, &term.scale(k), 1);
        }
        Ok(rs)
    }

    /// Transport residual of the first `n_p - 1` phases at trial transport
    /// vector `x`, pressure `p` and per-face total velocity `u_t` held fixed.
    pub fn assemble_transport(&self, x: &[f64], p: &[f64], u_t: &[f64], with_jacobian: bool) -> Result<ResidualSystem> {
        let np = self.np();
        let s = full_saturations(x, np);
        self.assemble_hu(Mode::Transport, p, &s, Some(u_t), with_jacobian)
    }

    /// Coupled residual: unknowns per cell are `(p, s_0, .., s_{n_p-2})`.
    pub fn assemble_fi(&self, p: &[f64], x: &[f64], with_jacobian: bool) -> Result<ResidualSystem> {
        let np = self.np();
        let s = full_saturations(x, np);
        self.assemble_hu(Mode::Coupled, p, &s, None, with_jacobian)
    }

    fn assemble_hu(
        &self,
        mode: Mode,
        p: &[f64],
        s: &[f64],
        u_t: Option<&[f64]>,
        with_jacobian: bool,
    ) -> Result<ResidualSystem> {
        let np = self.np();
        let nv = self.block(mode);
        // first transport row inside the block
        let t0 = if mode == Mode::Coupled { 1 } else { 0 };
        let mut rs = self.new_system(mode, with_jacobian);
        let sides = self.lift_all(mode, p, s)?;
        let k = self.dt / self.grid.cell_volume();
        let cvars: Vec<CellVars> = (0..self.grid.n_cells())
            .map(|c| self.cell_vars(mode, p[c], &s[c * np..(c + 1) * np]))
            .collect();

        for (c, side) in sides.iter().enumerate() {
            if mode == Mode::Coupled {
                let acc = self.pressure_accumulation(c, side);
                scatter(&mut rs, c, 0, c, c, &acc, nv);
            }
            for l in 0..np - 1 {
                let acc = self.phase_accumulation(c, l, side, cvars[c].s[l]);
                scatter(&mut rs, c, t0 + l, c, c, &acc, nv);
            }
        }

        for (f, face) in self.grid.faces().iter().enumerate() {
            let a = &sides[face.cell_i];
            let b = &shift_side(&sides[face.cell_j], nv);
            let ut = match u_t {
                Some(u) => Local::constant(u[f]),
                None => {
                    let terms = ppu_terms(self.model, face, a, b);
                    if mode == Mode::Coupled {
                        let mut out_i = Local::ZERO;
                        let mut out_j = Local::ZERO;
                        for l in 0..np {
                            let b_up = if terms[l].from_i { a.b[l] } else { b.b[l] };
                            let bf = b_up * terms[l].flux;
                            out_i += bf / a.b[l];
                            out_j -= bf / b.b[l];
                        }
                        scatter(&mut rs, face.cell_i, 0, face.cell_i, face.cell_j, &out_i.scale(k), nv);
                        scatter(&mut rs, face.cell_j, 0, face.cell_i, face.cell_j, &out_j.scale(k), nv);
                    }
                    ppu_total(self.model, &terms)
                }
            };
            let hu = hu_terms(self.model, face, ut, a, b);
            if hu.stagnant {
                rs.stagnant_faces += 1;
            }
            for l in 0..np - 1 {
                let bf = hu.weighted_flux(l, np, a, b).scale(k);
                scatter(&mut rs, face.cell_i, t0 + l, face.cell_i, face.cell_j, &bf, nv);
                scatter(&mut rs, face.cell_j, t0 + l, face.cell_i, face.cell_j, &(-bf), nv);
            }
        }

        for well in self.wells {
            let c = well.cell;
            let side = &sides[c];
            match well.control {
                WellControl::Rate { phase, surface_rate } => {
                    if mode == Mode::Coupled {
                        let term = -(Local::constant(surface_rate) / side.b[phase]);
                        scatter(&mut rs, c, 0, c, c, &term.scale(k), nv);
                    }
                    if phase < np - 1 {
                        let term = Local::constant(-surface_rate * k);
                        scatter(&mut rs, c, t0 + phase, c, c, &term, nv);
                    }
                }
                WellControl::Bhp { pressure } => {
                    let drawdown = (side.p + (-pressure)) * well.index;
                    if mode == Mode::Coupled {
                        let lam_t = (0..np).fold(Local::ZERO, |acc, l| acc + side.lambda[l]);
                        scatter(&mut rs, c, 0, c, c, &(lam_t * drawdown).scale(k), nv);
                    }
                    for l in 0..np - 1 {
                        let term = side.b[l] * side.lambda[l] * drawdown;
                        scatter(&mut rs, c, t0 + l, c, c, &term.scale(k), nv);
                    }
                }
            }
        }
        Ok(rs)
    }

    /// PPU total velocity of every face at `(p, s)`.
    pub fn total_velocities(&self, p: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        let sides = self.lift_all(Mode::Values, p, s)?;
        Ok(self
            .grid
            .faces()
            .iter()
            .map(|face| {
                let terms = ppu_terms(self.model, face, &sides[face.cell_i], &sides[face.cell_j]);
                ppu_total(self.model, &terms).v
            })
            .collect())
    }

    /// Conservation residual of every phase (including the eliminated one),
    /// cell-major, without normalisation. Fluxes are HU with the given total
    /// velocity, or PPU when `u_t` is `None`.
    pub fn phase_residuals(&self, p: &[f64], s: &[f64], u_t: Option<&[f64]>) -> Result<Vec<f64>> {
        let np = self.np();
        let n = self.grid.n_cells();
        let sides = self.lift_all(Mode::Values, p, s)?;
        let k = self.dt / self.grid.cell_volume();
        let mut r = vec![0.0; n * np];
        for c in 0..n {
            for l in 0..np {
                let sat = Local::constant(s[c * np + l]);
                r[c * np + l] = self.phase_accumulation(c, l, &sides[c], sat).v;
            }
        }
        for (f, face) in self.grid.faces().iter().enumerate() {
            let (a, b) = (&sides[face.cell_i], &sides[face.cell_j]);
            for l in 0..np {
                let bf = match u_t {
                    Some(u) => hu_terms(self.model, face, Local::constant(u[f]), a, b).weighted_flux(l, np, a, b),
                    None => {
                        let t = ppu_terms(self.model, face, a, b)[l];
                        let b_up = if t.from_i { a.b[l] } else { b.b[l] };
                        b_up * t.flux
                    }
                };
                r[face.cell_i * np + l] += k * bf.v;
                r[face.cell_j * np + l] -= k * bf.v;
            }
        }
        for l in 0..np {
            for (c, q) in self.well_rates(p, s, l)? {
                r[c * np + l] -= k * q;
            }
        }
        Ok(r)
    }

    /// Surface-volume rate of phase `l` into each well cell (negative for
    /// production).
    pub fn well_rates(&self, p: &[f64], s: &[f64], l: usize) -> Result<Vec<(usize, f64)>> {
        let np = self.np();
        self.wells
            .iter()
            .map(|w| {
                let c = w.cell;
                let q = match w.control {
                    WellControl::Rate { phase, surface_rate } => {
                        if phase == l {
                            surface_rate
                        } else {
                            0.0
                        }
                    }
                    WellControl::Bhp { pressure } => {
                        let lam = self.model.mobility(&s[c * np..(c + 1) * np])?.lambda[l];
                        let b = self.model.b_of_p(l, p[c]).0;
                        -b * lam * w.index * (p[c] - pressure)
                    }
                };
                Ok((c, q))
            })
            .collect()
    }
}

/// Expands a transport vector into all saturations, cell-major.
pub fn full_saturations(x: &[f64], np: usize) -> Vec<f64> {
    let n = x.len() / (np - 1);
    let mut s = Vec::with_capacity(n * np);
    for c in 0..n {
        let xs = &x[c * (np - 1)..(c + 1) * (np - 1)];
        s.extend_from_slice(xs);
        s.push(1.0 - xs.iter().sum::<f64>());
    }
    s
}

fn shift_side(side: &Side, nv: usize) -> Side {
    let mut out = *side;
    out.p = side.p.shifted(nv, nv);
    for l in 0..MAX_PHASES {
        out.lambda[l] = side.lambda[l].shifted(nv, nv);
        out.b[l] = side.b[l].shifted(nv, nv);
        out.rho[l] = side.rho[l].shifted(nv, nv);
    }
    out
}

/// Adds `val` to row `(row_cell, eq)`; derivative slot `k < nv` maps to
/// unknown `k` of `cell_i`, slot `nv + k` to unknown `k` of `cell_j`.
fn scatter(rs: &mut ResidualSystem, row_cell: usize, eq: usize, cell_i: usize, cell_j: usize, val: &Local, nv: usize) {
    let row = row_cell * rs.block + eq;
    rs.residual[row] += val.v;
    if let Some(jac) = rs.jacobian.as_mut() {
        for k in 0..nv {
            if val.d[k] != 0.0 {
                jac.add(row, cell_i * nv + k, val.d[k]);
            }
            if cell_j != cell_i && val.d[nv + k] != 0.0 {
                jac.add(row, cell_j * nv + k, val.d[nv + k]);
            }
        }
    }
}

/// Per-phase global mass imbalance
/// `|Σ_i V_i [(φ b s)^{n+1} - (φ b s)^n]_i - Δt Σ_wells b q|` of a converged
/// step, in surface m³.
pub fn mass_imbalance(problem: &Problem<'_>, new: &SimState) -> Result<Vec<f64>> {
    let np = problem.model.n_phases();
    let grid = problem.grid;
    let v = grid.cell_volume();
    let mut out = vec![0.0; np];
    for (l, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in 0..grid.n_cells() {
            let phi_new = problem.model.porosity(grid.porosity_ref(c), new.p[c]).0;
            let b_new = problem.model.b_of_p(l, new.p[c]).0;
            acc += v * (phi_new * b_new * new.sat(c)[l] - problem.phi_old[c] * problem.b_old[c * np + l] * problem.old.sat(c)[l]);
        }
        let wells: f64 = problem.well_rates(&new.p, &new.s, l)?.iter().map(|(_, q)| q).sum();
        *slot = (acc - problem.dt * wells).abs();
    }
    Ok(out)
}

/// Infinity norm of a difference, convenience for convergence tests.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm_inf(&d)
}
