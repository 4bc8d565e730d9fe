//! Rock and fluid properties with analytic derivatives.
//!
//! Fluids and rock follow a constant-compressibility law
//! `b(p) = b_ref · exp(c · (p - p0))`. Relative permeabilities are power laws
//! without residual saturations; in three-phase runs the oil curve is the
//! saturation-weighted (Baker) interpolation of the oil–water and oil–gas
//! curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MAX_PHASES;

/// Saturations may leave `[0, 1]` by this much (Newton rounding) before
/// [`RockFluidModel::relperm`] reports a domain error.
pub const SATURATION_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Water,
    Oil,
    Gas,
}

impl PhaseKind {
    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::Water => "water",
            PhaseKind::Oil => "oil",
            PhaseKind::Gas => "gas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProps {
    pub kind: PhaseKind,
    /// Inverse formation volume factor at the reference pressure.
    pub b_ref: f64,
    /// 1/Pa.
    pub compressibility: f64,
    /// Pa·s.
    pub viscosity: f64,
    /// kg/m³ at surface conditions.
    pub surface_density: f64,
    /// Relative permeability exponent.
    pub exponent: f64,
}

impl PhaseProps {
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_ref > 0.0
            && self.compressibility >= 0.0
            && self.viscosity > 0.0
            && self.surface_density > 0.0
            && self.exponent > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} properties: {self:?}", self.kind.name())))
        }
    }

    /// Inverse formation volume factor and its pressure derivative.
    pub fn b_of_p(&self, p: f64, p_ref: f64) -> (f64, f64) {
        let b = self.b_ref * ((p - p_ref) * self.compressibility).exp();
        (b, self.compressibility * b)
    }

    /// Phase density `b · ρ_S` and its pressure derivative.
    pub fn density(&self, p: f64, p_ref: f64) -> (f64, f64) {
        let (b, db) = self.b_of_p(p, p_ref);
        (b * self.surface_density, db * self.surface_density)
    }
}

/// Relative permeabilities of all phases with `dkr[l][m] = ∂k_rl/∂s_m`.
///
/// Saturations are treated as independent inputs; eliminating the last
/// phase through the saturation constraint is the caller's business.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelPerm {
    pub kr: [f64; MAX_PHASES],
    pub dkr: [[f64; MAX_PHASES]; MAX_PHASES],
}

/// Mobilities `λ_l = k_rl / μ_l` with saturation derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Mobility {
    pub lambda: [f64; MAX_PHASES],
    pub dlambda: [[f64; MAX_PHASES]; MAX_PHASES],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockFluidModel {
    /// Ordered water, oil[, gas] (two-phase runs may pair water with gas).
    pub phases: Vec<PhaseProps>,
    /// 1/Pa.
    pub rock_compressibility: f64,
    /// Pa.
    pub reference_pressure: f64,
    /// m/s²; zero switches buoyancy off.
    pub gravity: f64,
}

impl RockFluidModel {
    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let np = self.phases.len();
        if !(2..=MAX_PHASES).contains(&np) {
            return Err(Error::Config(format!("expected 2 or 3 phases, got {np}")));
        }
        if np == 3
            && (self.phases[0].kind != PhaseKind::Water
                || self.phases[1].kind != PhaseKind::Oil
                || self.phases[2].kind != PhaseKind::Gas)
        {
            return Err(Error::Config("three-phase models must be ordered water, oil, gas".into()));
        }
        if !(self.rock_compressibility >= 0.0) {
            return Err(Error::Config("rock compressibility must be non-negative".into()));
        }
        if !(self.gravity >= 0.0) {
            return Err(Error::Config("gravity must be non-negative".into()));
        }
        self.phases.iter().try_for_each(PhaseProps::validate)
    }

    pub fn phase_index(&self, kind: PhaseKind) -> Option<usize> {
        self.phases.iter().position(|p| p.kind == kind)
    }

    pub fn b_of_p(&self, phase: usize, p: f64) -> (f64, f64) {
        self.phases[phase].b_of_p(p, self.reference_pressure)
    }

    pub fn density(&self, phase: usize, p: f64) -> (f64, f64) {
        self.phases[phase].density(p, self.reference_pressure)
    }

    /// Porosity `φ_ref · exp(c_r (p - p0))` and its pressure derivative.
    pub fn porosity(&self, phi_ref: f64, p: f64) -> (f64, f64) {
        let phi = phi_ref * ((p - self.reference_pressure) * self.rock_compressibility).exp();
        (phi, self.rock_compressibility * phi)
    }

    pub fn relperm(&self, s: &[f64]) -> Result<RelPerm> {
        let np = self.n_phases();
        debug_assert_eq!(s.len(), np);
        let mut sat = [0.0; MAX_PHASES];
        for (l, &v) in s.iter().enumerate() {
            if !(-SATURATION_SLACK..=1.0 + SATURATION_SLACK).contains(&v) {
                return Err(Error::SaturationDomain { phase: l, value: v });
            }
            sat[l] = v.clamp(0.0, 1.0);
        }

        let mut out = RelPerm::default();
        if np == 2 {
            for l in 0..2 {
                let (k, dk) = power_law(sat[l], self.phases[l].exponent);
                out.kr[l] = k;
                out.dkr[l][l] = dk;
            }
            return Ok(out);
        }

        let (sw, so, sg) = (sat[0], sat[1], sat[2]);
        let (krw, dkrw) = power_law(sw, self.phases[0].exponent);
        let (krg, dkrg) = power_law(sg, self.phases[2].exponent);
        // k_row and k_rog share the oil power law.
        let (krow, dkrow) = power_law(so, self.phases[1].exponent);
        let (krog, dkrog) = (krow, dkrow);
        let baker = baker_interpolation(sw, sg, krow, dkrow, krog, dkrog);

        out.kr = [krw, baker.kro, krg];
        out.dkr[0][0] = dkrw;
        out.dkr[2][2] = dkrg;
        out.dkr[1] = [baker.d_sw, baker.d_so, baker.d_sg];
        Ok(out)
    }

    pub fn mobility(&self, s: &[f64]) -> Result<Mobility> {
        let kr = self.relperm(s)?;
        let mut out = Mobility::default();
        for (l, phase) in self.phases.iter().enumerate() {
            out.lambda[l] = kr.kr[l] / phase.viscosity;
            for m in 0..self.n_phases() {
                out.dlambda[l][m] = kr.dkr[l][m] / phase.viscosity;
            }
        }
        Ok(out)
    }
}

fn power_law(s: f64, n: f64) -> (f64, f64) {
    if s <= 0.0 {
        let d = if n == 1.0 { 1.0 } else if n > 1.0 { 0.0 } else { f64::INFINITY };
        return (0.0, d);
    }
    let k = s.powf(n);
    (k, n * k / s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BakerOil {
    pub kro: f64,
    pub d_sw: f64,
    pub d_so: f64,
    pub d_sg: f64,
}

/// Saturation-weighted oil relative permeability
/// `k_ro = (s_w·k_row + s_g·k_rog) / (s_w + s_g)`.
///
/// `krow`/`krog` are already evaluated at the oil saturation, with their
/// derivatives with respect to `s_o`. When `s_w + s_g` vanishes the two-phase
/// curves are averaged, which is the exact limit when they coincide.
pub fn baker_interpolation(
    sw: f64,
    sg: f64,
    krow: f64,
    dkrow: f64,
    krog: f64,
    dkrog: f64,
) -> BakerOil {
    let denom = sw + sg;
    if denom < 1e-12 {
        return BakerOil {
            kro: 0.5 * (krow + krog),
            d_sw: 0.0,
            d_so: 0.5 * (dkrow + dkrog),
            d_sg: 0.0,
        };
    }
    let d2 = denom * denom;
    BakerOil {
        kro: (sw * krow + sg * krog) / denom,
        d_sw: sg * (krow - krog) / d2,
        d_so: (sw * dkrow + sg * dkrog) / denom,
        d_sg: sw * (krog - krow) / d2,
    }
}
