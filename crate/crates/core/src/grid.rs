//! Structured two-dimensional (x–z) cell-centred grids.
//!
//! Cells are numbered row-major with the horizontal index running fastest:
//! `cell = k * nx + i`, where `k = 0` is the top layer. Depth increases
//! downward. Every external boundary is closed (no flow).

use std::path::Path;

use crate::error::{Error, Result};
use crate::units;

/// An interior interface between two axis-adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub cell_i: usize,
    pub cell_j: usize,
    /// Two-point transmissibility K·A/d (m³ under SI Darcy scaling).
    pub trans: f64,
    /// Depth difference `h_j - h_i` in metres.
    pub dh: f64,
}

impl Face {
    /// The same face seen from the other side.
    pub fn flipped(&self) -> Face {
        Face {
            cell_i: self.cell_j,
            cell_j: self.cell_i,
            trans: self.trans,
            dh: -self.dh,
        }
    }
}

/// Per-cell scalar permeability (m²) and reference porosity.
#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    pub perm: Vec<f64>,
    pub porosity: Vec<f64>,
}

impl PermeabilityField {
    /// Porosity assigned to fields loaded from a permeability-only file.
    pub const DEFAULT_POROSITY: f64 = 0.1;

    pub fn uniform(n_cells: usize, perm: f64, porosity: f64) -> Self {
        Self {
            perm: vec![perm; n_cells],
            porosity: vec![porosity; n_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.perm.len() != self.porosity.len() {
            return Err(Error::Config(format!(
                "permeability has {} entries but porosity has {}",
                self.perm.len(),
                self.porosity.len()
            )));
        }
        if let Some((c, k)) = self.perm.iter().enumerate().find(|(_, k)| !(**k > 0.0)) {
            return Err(Error::Config(format!("cell {c}: permeability {k} is not positive")));
        }
        if let Some((c, phi)) = self
            .porosity
            .iter()
            .enumerate()
            .find(|(_, phi)| !(**phi > 0.0 && **phi < 1.0))
        {
            return Err(Error::Config(format!("cell {c}: porosity {phi} is outside (0, 1)")));
        }
        Ok(())
    }
}

/// Cell-centred NX×NZ vertical cross-section.
#[derive(Debug, Clone)]
pub struct StructuredGrid {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    perm: Vec<f64>,
    porosity: Vec<f64>,
    depth: Vec<f64>,
    faces: Vec<Face>,
    /// Face indices touching each cell.
    cell_faces: Vec<Vec<usize>>,
}

/// Builds the grid and its TPFA transmissibilities.
///
/// The transmissibility of a face is the harmonic combination of the two
/// half-cell transmissibilities `K·A / (d/2)`.
pub fn build_cartesian_grid(
    nx: usize,
    nz: usize,
    dx: f64,
    dy: f64,
    dz: f64,
    field: PermeabilityField,
) -> Result<StructuredGrid> {
    if nx == 0 || nz == 0 {
        return Err(Error::Config(format!("grid dimensions must be at least 1, got {nx}x{nz}")));
    }
    if !(dx > 0.0 && dy > 0.0 && dz > 0.0) {
        return Err(Error::Config(format!(
            "cell dimensions must be positive, got {dx} x {dy} x {dz}"
        )));
    }
    let n = nx * nz;
    if field.len() != n {
        return Err(Error::Config(format!(
            "permeability field has {} values but the grid has {} cells",
            field.len(),
            n
        )));
    }
    field.validate()?;

    let depth = (0..n).map(|c| (c / nx) as f64 * dz + 0.5 * dz).collect::<Vec<_>>();
    let half = |k: f64, area: f64, d: f64| k * area / (0.5 * d);

    let mut faces = Vec::with_capacity(2 * n);
    for k in 0..nz {
        for i in 0..nx {
            let c = k * nx + i;
            if i + 1 < nx {
                let area = dy * dz;
                let ti = half(field.perm[c], area, dx);
                let tj = half(field.perm[c + 1], area, dx);
                faces.push(Face {
                    cell_i: c,
                    cell_j: c + 1,
                    trans: ti * tj / (ti + tj),
                    dh: 0.0,
                });
            }
            if k + 1 < nz {
                let area = dx * dy;
                let ti = half(field.perm[c], area, dz);
                let tj = half(field.perm[c + nx], area, dz);
                faces.push(Face {
                    cell_i: c,
                    cell_j: c + nx,
                    trans: ti * tj / (ti + tj),
                    dh: depth[c + nx] - depth[c],
                });
            }
        }
    }

    let mut cell_faces = vec![Vec::with_capacity(4); n];
    for (f, face) in faces.iter().enumerate() {
        cell_faces[face.cell_i].push(f);
        cell_faces[face.cell_j].push(f);
    }

    Ok(StructuredGrid {
        nx,
        nz,
        dx,
        dy,
        dz,
        perm: field.perm,
        porosity: field.porosity,
        depth,
        faces,
        cell_faces,
    })
}

impl StructuredGrid {
    pub fn n_cells(&self) -> usize {
        self.nx * self.nz
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    pub fn depth(&self, cell: usize) -> f64 {
        self.depth[cell]
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn perm(&self, cell: usize) -> f64 {
        self.perm[cell]
    }

    pub fn porosity_ref(&self, cell: usize) -> f64 {
        self.porosity[cell]
    }

    pub fn porosities(&self) -> &[f64] {
        &self.porosity
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn faces_of(&self, cell: usize) -> &[usize] {
        &self.cell_faces[cell]
    }

    /// `(i, k)` indices of a cell.
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn cell_index(&self, i: usize, k: usize) -> usize {
        k * self.nx + i
    }

    pub fn pore_volume(&self) -> f64 {
        self.porosity.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.cell_faces[a]
            .iter()
            .any(|&f| self.faces[f].cell_i == b || self.faces[f].cell_j == b)
    }
}

/// Reads one positive value per cell from a comma- or whitespace-separated
/// file. Values are returned in file order.
pub fn read_cell_values(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_cell_values(&text, expected).map_err(|message| Error::Ingest {
        path: path.display().to_string(),
        message,
    })
}

fn parse_cell_values(text: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let mut values = Vec::with_capacity(expected);
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty());
        for (col, tok) in tokens.enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                format!("row {}, column {}: `{tok}` is not a number", line_no + 1, col + 1)
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!(
                    "row {}, column {}: value {tok} must be positive",
                    line_no + 1,
                    col + 1
                ));
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(format!("expected {expected} values, found {}", values.len()));
    }
    Ok(values)
}

/// Loads a permeability file given in millidarcy. Porosity is set to
/// [`PermeabilityField::DEFAULT_POROSITY`]; use [`load_porosity_csv`] to
/// override it.
pub fn load_permeability_csv(path: &Path, nx: usize, nz: usize) -> Result<PermeabilityField> {
    let perm = read_cell_values(path, nx * nz)?
        .into_iter()
        .map(units::md_to_m2)
        .collect::<Vec<_>>();
    let n = perm.len();
    Ok(PermeabilityField {
        perm,
        porosity: vec![PermeabilityField::DEFAULT_POROSITY; n],
    })
}

pub fn load_porosity_csv(path: &Path, n_cells: usize) -> Result<Vec<f64>> {
    let phi = read_cell_values(path, n_cells)?;
    if let Some((c, v)) = phi.iter().enumerate().find(|(_, v)| **v >= 1.0) {
        return Err(Error::Ingest {
            path: path.display().to_string(),
            message: format!("entry {}: porosity {v} must be below 1", c + 1),
        });
    }
    Ok(phi)
}
