//! Case definitions, configuration ingestion, runs and reports.

mod cases;
mod compare;
mod output;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use cases::{builtin_case, CASE_NAMES};
pub use compare::{compare_strategies, Comparison, ComparisonRow};
pub use output::{write_final_state_csv, write_outputs, write_report_csv, write_residuals_csv, write_summary};

use crate::assembly::SimState;
use crate::error::{Error, Result};
use crate::grid::{build_cartesian_grid, load_permeability_csv, load_porosity_csv, PermeabilityField, StructuredGrid};
use crate::newton::TolerancePolicy;
use crate::rockfluid::RockFluidModel;
use crate::sfi::{run_simulation, OuterConfig, QnConfig, RunOutput, Schedule, Solvers, TimeControl};
use crate::wells::{Well, WellControl};

/// Complete description of a run, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub grid: GridSpec,
    pub fluid: RockFluidModel,
    pub initial: InitialSpec,
    #[serde(default)]
    pub wells: Vec<WellSpec>,
    /// s.
    pub dtmax: f64,
    /// s.
    pub t_end: f64,
    #[serde(default)]
    pub policy: TolerancePolicy,
    #[serde(default)]
    pub qn: QnConfig,
    #[serde(default)]
    pub outer: OuterConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nz: usize,
    /// Domain extents, m.
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub permeability: PermeabilitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PermeabilitySpec {
    /// m².
    Uniform { perm: f64, porosity: f64 },
    /// `log10 K` normal around `log10(geometric_mean)`.
    LogNormal {
        geometric_mean: f64,
        sigma_log10: f64,
        seed: u64,
        porosity: f64,
    },
    /// Row-major values in mD; optional porosity file with one value per cell.
    File {
        path: PathBuf,
        #[serde(default)]
        porosity_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    /// Pa.
    pub pressure: f64,
    pub saturation: SaturationLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SaturationLayout {
    Uniform { s: Vec<f64> },
    /// `left` fills columns `i < nx / 2`.
    LeftRight { left: Vec<f64>, right: Vec<f64> },
    /// `top` fills the upper `fraction` of the layers.
    Layered { top: Vec<f64>, bottom: Vec<f64>, fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub name: String,
    /// Column and layer (layer 0 on top).
    pub i: usize,
    pub k: usize,
    pub control: WellControl,
    /// `[start, end)` intervals in s; empty means always open.
    #[serde(default)]
    pub active: Vec<[f64; 2]>,
}

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct BuiltCase {
    pub grid: StructuredGrid,
    pub model: RockFluidModel,
    pub initial: SimState,
    pub schedule: Schedule,
    pub time: TimeControl,
}

/// `n` permeabilities whose base-10 logarithm is normal with the given
/// geometric mean and standard deviation.
pub fn lognormal_permeability(n: usize, geometric_mean: f64, sigma_log10: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(geometric_mean.log10(), sigma_log10)
        .map_err(|e| Error::Config(format!("log-normal permeability: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| 10f64.powf(normal.sample(&mut rng))).collect())
}

impl CaseSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Ingest {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Changes the resolution by `factor` (domain kept), scaling `dtmax`
    /// proportionally and moving wells to the corresponding cells.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Config(format!("scale factor {factor} must be positive")));
        }
        if factor == 1.0 {
            return Ok(self.clone());
        }
        if matches!(self.grid.permeability, PermeabilitySpec::File { .. }) {
            return Err(Error::Config("grids read from files cannot be rescaled".into()));
        }
        let nx = ((self.grid.nx as f64 * factor).round() as usize).max(1);
        let nz = ((self.grid.nz as f64 * factor).round() as usize).max(1);
        let mut out = self.clone();
        out.grid.nx = nx;
        out.grid.nz = nz;
        out.dtmax = self.dtmax * factor;
        for w in &mut out.wells {
            w.i = (w.i * nx / self.grid.nx).min(nx - 1);
            w.k = (w.k * nz / self.grid.nz).min(nz - 1);
        }
        Ok(out)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        if let PermeabilitySpec::LogNormal { seed: s, .. } = &mut self.grid.permeability {
            *s = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx == 0 || g.nz == 0 {
            return Err(Error::Config("grid needs at least one cell in each direction".into()));
        }
        if !(g.lx > 0.0 && g.ly > 0.0 && g.lz > 0.0) {
            return Err(Error::Config("domain extents must be positive".into()));
        }
        self.fluid.validate()?;
        self.policy.validate()?;
        self.qn.validate()?;
        self.outer.validate()?;
        if !(self.dtmax > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::Config("dtmax must be positive and t_end non-negative".into()));
        }
        if !(self.initial.pressure > 0.0) {
            return Err(Error::Config("initial pressure must be positive".into()));
        }
        let np = self.fluid.n_phases();
        let check = |s: &[f64]| -> Result<()> {
            if s.len() != np {
                return Err(Error::Config(format!("saturation vector has {} entries, expected {np}", s.len())));
            }
            if s.iter().any(|v| !(0.0..=1.0).contains(v)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("saturations {s:?} must lie in [0, 1] and sum to 1")));
            }
            Ok(())
        };
        match &self.initial.saturation {
            SaturationLayout::Uniform { s } => check(s)?,
            SaturationLayout::LeftRight { left, right } => {
                check(left)?;
                check(right)?;
            }
            SaturationLayout::Layered { top, bottom, fraction } => {
                check(top)?;
                check(bottom)?;
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::Config("layer fraction must lie in [0, 1]".into()));
                }
            }
        }
        for w in &self.wells {
            if w.i >= g.nx || w.k >= g.nz {
                return Err(Error::Config(format!(
                    "well {} at ({}, {}) is outside the {}x{} grid",
                    w.name, w.i, w.k, g.nx, g.nz
                )));
            }
            if let WellControl::Rate { phase, .. } = w.control {
                if phase >= np {
                    return Err(Error::Config(format!("well {} injects unknown phase {phase}", w.name)));
                }
            }
            let mut iv = w.active.clone();
            iv.sort_by(|a, b| a[0].total_cmp(&b[0]));
            for pair in iv.windows(2) {
                if pair[1][0] < pair[0][1] {
                    return Err(Error::Config(format!("well {} has overlapping intervals", w.name)));
                }
            }
            if iv.iter().any(|[a, b]| !(a < b) || *a < 0.0 || *b > self.t_end * (1.0 + 1e-12)) {
                return Err(Error::Config(format!("well {} has intervals outside [0, t_end]", w.name)));
            }
        }
        self.check_tiling()
    }

    /// Scheduled wells together must cover `[0, t_end]` without gaps.
    fn check_tiling(&self) -> Result<()> {
        let mut iv: Vec<[f64; 2]> = self.wells.iter().flat_map(|w| w.active.iter().copied()).collect();
        if iv.is_empty() {
            return Ok(());
        }
        iv.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let tol = 1e-9 * self.t_end.max(1.0);
        let mut covered = 0.0;
        for [a, b] in iv {
            if a > covered + tol {
                return Err(Error::Config(format!("well schedule leaves [{covered}, {a}] uncovered")));
            }
            covered = covered.max(b);
        }
        if covered < self.t_end - tol {
            return Err(Error::Config(format!("well schedule ends at {covered} before t_end")));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<BuiltCase> {
        self.validate()?;
        let g = &self.grid;
        let n = g.nx * g.nz;
        let field = match &g.permeability {
            PermeabilitySpec::Uniform { perm, porosity } => PermeabilityField::uniform(n, *perm, *porosity),
            PermeabilitySpec::LogNormal {
                geometric_mean,
                sigma_log10,
                seed,
                porosity,
            } => PermeabilityField {
                perm: lognormal_permeability(n, *geometric_mean, *sigma_log10, *seed)?,
                porosity: vec![*porosity; n],
            },
            PermeabilitySpec::File { path, porosity_path } => {
                let mut f = load_permeability_csv(path, g.nx, g.nz)?;
                if let Some(pp) = porosity_path {
                    f.porosity = load_porosity_csv(pp, n)?;
                }
                f
            }
        };
        let (dx, dy, dz) = (g.lx / g.nx as f64, g.ly, g.lz / g.nz as f64);
        let grid = build_cartesian_grid(g.nx, g.nz, dx, dy, dz, field)?;

        let mut initial = SimState::uniform(n, self.initial.pressure, &vec![0.0; self.fluid.n_phases()]);
        for c in 0..n {
            let (i, k) = grid.coords(c);
            let s = match &self.initial.saturation {
                SaturationLayout::Uniform { s } => s,
                SaturationLayout::LeftRight { left, right } => {
                    if 2 * i < g.nx {
                        left
                    } else {
                        right
                    }
                }
                SaturationLayout::Layered { top, bottom, fraction } => {
                    if (k as f64) < fraction * g.nz as f64 {
                        top
                    } else {
                        bottom
                    }
                }
            };
            initial.sat_mut(c).copy_from_slice(s);
        }

        let schedule = self.schedule(&grid)?;
        Ok(BuiltCase {
            grid,
            model: self.fluid.clone(),
            initial,
            schedule,
            time: TimeControl::new(self.dtmax, self.t_end),
        })
    }

    fn schedule(&self, grid: &StructuredGrid) -> Result<Schedule> {
        let wells: Vec<(Well, &WellSpec)> = self
            .wells
            .iter()
            .map(|w| Ok((Well::new(grid, grid.cell_index(w.i, w.k), w.control)?, w)))
            .collect::<Result<_>>()?;
        let mut bounds: Vec<f64> = self
            .wells
            .iter()
            .flat_map(|w| w.active.iter().flat_map(|iv| iv.iter().copied()))
            .filter(|&t| t > 0.0 && t < self.t_end)
            .collect();
        if bounds.is_empty() {
            return Ok(Schedule::constant(wells.into_iter().map(|(w, _)| w).collect()));
        }
        bounds.sort_by(f64::total_cmp);
        bounds.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * self.t_end);
        let open_at = |t: f64| -> Vec<Well> {
            wells
                .iter()
                .filter(|(_, s)| s.active.is_empty() || s.active.iter().any(|[a, b]| *a <= t && t < *b))
                .map(|(w, _)| *w)
                .collect()
        };
        let mut periods = Vec::new();
        let mut start = 0.0;
        for &b in &bounds {
            periods.push((b, open_at(0.5 * (start + b))));
            start = b;
        }
        periods.push((f64::INFINITY, open_at(0.5 * (start + self.t_end))));
        Schedule::from_periods(periods)
    }
}

/// Builds and runs a case with its own solver settings.
pub fn run_case(case: &CaseSpec) -> Result<(BuiltCase, RunOutput)> {
    let built = case.build()?;
    let mut outer = case.outer;
    if outer.p_scale.is_none() {
        outer.p_scale = Some(case.initial.pressure);
    }
    let out = run_simulation(
        &built.grid,
        &built.model,
        built.initial.clone(),
        &built.schedule,
        Solvers {
            policy: &case.policy,
            qn: &case.qn,
            outer: &outer,
        },
        built.time,
    )?;
    Ok((built, out))
}
