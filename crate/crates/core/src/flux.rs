//! Face fluxes.
//!
//! Sign convention: a face `(i, j)` carries flux from `i` to `j` when
//! positive. The phase potential difference is
//! `ΔΦ_l = (p_i - p_j) - g_l` with gravity weight
//! `g_l = ρ̄_l · g · (h_i - h_j)`, where `ρ̄_l` is the arithmetic mean of the
//! two cell densities and `h` is depth.
//!
//! Two upwinding schemes are provided:
//!
//! * phase-potential upwinding (PPU) for the pressure equation and the total
//!   velocity;
//! * hybrid upwinding (HU) for transport: the viscous part is upwinded on the
//!   sign of the (frozen) total velocity, the buoyancy part takes the denser
//!   phase of each pair from the upper cell and the lighter one from the
//!   lower cell.
//!
//! Derivatives treat every upwind selector as frozen.

use crate::ad::{Local, MAX_LOCAL};
use crate::error::Result;
use crate::grid::Face;
use crate::rockfluid::RockFluidModel;
use crate::MAX_PHASES;

/// Lifted properties of one side of a face.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Side {
    pub p: Local,
    pub lambda: [Local; MAX_PHASES],
    pub b: [Local; MAX_PHASES],
    pub rho: [Local; MAX_PHASES],
}

/// Primary variables of one cell in `Local` form. `s` holds every phase
/// saturation; any elimination of the last phase is encoded in its
/// derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellVars {
    pub p: Local,
    pub s: [Local; MAX_PHASES],
}

pub(crate) fn lift_side(model: &RockFluidModel, vars: &CellVars) -> Result<Side> {
    let np = model.n_phases();
    let sat: Vec<f64> = vars.s[..np].iter().map(|x| x.v).collect();
    let mob = model.mobility(&sat)?;
    let mut side = Side {
        p: vars.p,
        lambda: [Local::ZERO; MAX_PHASES],
        b: [Local::ZERO; MAX_PHASES],
        rho: [Local::ZERO; MAX_PHASES],
    };
    for l in 0..np {
        let mut lam = Local::constant(mob.lambda[l]);
        for m in 0..np {
            let dl = mob.dlambda[l][m];
            if dl != 0.0 {
                for k in 0..MAX_LOCAL {
                    lam.d[k] += dl * vars.s[m].d[k];
                }
            }
        }
        side.lambda[l] = lam;
        let (b, db) = model.b_of_p(l, vars.p.v);
        side.b[l] = vars.p.chain(b, db);
        side.rho[l] = side.b[l] * model.phases[l].surface_density;
    }
    Ok(side)
}

fn gravity_weights(model: &RockFluidModel, face: &Face, a: &Side, b: &Side) -> [Local; MAX_PHASES] {
    let mut g = [Local::ZERO; MAX_PHASES];
    let factor = -model.gravity * face.dh;
    for l in 0..model.n_phases() {
        g[l] = (a.rho[l] + b.rho[l]) * (0.5 * factor);
    }
    g
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PpuTerm {
    pub flux: Local,
    /// Upwind cell is `cell_i`.
    pub from_i: bool,
}

pub(crate) fn ppu_terms(model: &RockFluidModel, face: &Face, a: &Side, b: &Side) -> [PpuTerm; MAX_PHASES] {
    let g = gravity_weights(model, face, a, b);
    let dp = a.p - b.p;
    let mut out = [PpuTerm { flux: Local::ZERO, from_i: true }; MAX_PHASES];
    for l in 0..model.n_phases() {
        let dphi = dp - g[l];
        let from_i = dphi.v >= 0.0;
        let lam = if from_i { a.lambda[l] } else { b.lambda[l] };
        out[l] = PpuTerm {
            flux: lam * dphi * face.trans,
            from_i,
        };
    }
    out
}

pub(crate) fn ppu_total(model: &RockFluidModel, terms: &[PpuTerm; MAX_PHASES]) -> Local {
    terms[..model.n_phases()].iter().fold(Local::ZERO, |acc, t| acc + t.flux)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HuTerms {
    pub viscous: [Local; MAX_PHASES],
    pub viscous_from_i: bool,
    /// `pair[l][m]`: buoyancy contribution of the pair `(l, m)` to phase `l`.
    pub pair: [[Local; MAX_PHASES]; MAX_PHASES],
    /// Whether phase `l`'s mobility in pair `(l, m)` came from `cell_i`.
    pub pair_from_i: [[bool; MAX_PHASES]; MAX_PHASES],
    pub stagnant: bool,
}

impl HuTerms {
    pub fn phase_flux(&self, l: usize, np: usize) -> Local {
        (0..np).fold(self.viscous[l], |acc, m| acc + self.pair[l][m])
    }

    /// `b_{l,ij} F_l` with each term's b-factor taken from the cell its
    /// mobility came from.
    pub fn weighted_flux(&self, l: usize, np: usize, a: &Side, b: &Side) -> Local {
        let pick = |from_i: bool| if from_i { a.b[l] } else { b.b[l] };
        let mut acc = pick(self.viscous_from_i) * self.viscous[l];
        for m in 0..np {
            if m != l {
                acc += pick(self.pair_from_i[l][m]) * self.pair[l][m];
            }
        }
        acc
    }
}

pub(crate) fn hu_terms(model: &RockFluidModel, face: &Face, u_t: Local, a: &Side, b: &Side) -> HuTerms {
    let np = model.n_phases();
    let mut out = HuTerms {
        viscous: [Local::ZERO; MAX_PHASES],
        viscous_from_i: true,
        pair: [[Local::ZERO; MAX_PHASES]; MAX_PHASES],
        pair_from_i: [[true; MAX_PHASES]; MAX_PHASES],
        stagnant: false,
    };

    let viscous_from_i = u_t.v >= 0.0;
    let up = if viscous_from_i { a } else { b };
    let lam_t = up.lambda[..np].iter().fold(Local::ZERO, |acc, x| acc + *x);
    out.viscous_from_i = viscous_from_i;
    if lam_t.v <= 0.0 {
        out.stagnant = true;
        return out;
    }
    for l in 0..np {
        out.viscous[l] = up.lambda[l] / lam_t * u_t;
    }

    let g = gravity_weights(model, face, a, b);
    // With dh == 0 every weight vanishes and the selection is immaterial.
    let i_is_upper = face.dh >= 0.0;
    for l in 0..np {
        for m in (l + 1)..np {
            let (heavy, light) = if a.rho[l].v + b.rho[l].v >= a.rho[m].v + b.rho[m].v {
                (l, m)
            } else {
                (m, l)
            };
            let equal = a.rho[l].v + b.rho[l].v == a.rho[m].v + b.rho[m].v;
            let heavy_from_i = equal || i_is_upper;
            let light_from_i = equal || !i_is_upper;
            let pick = |k: usize, from_i: bool| if from_i { a.lambda[k] } else { b.lambda[k] };
            let lam_heavy = pick(heavy, heavy_from_i);
            let lam_light = pick(light, light_from_i);
            let mut denom = lam_heavy + lam_light;
            for k in 0..np {
                if k != l && k != m {
                    denom += up.lambda[k];
                }
            }
            out.pair_from_i[heavy][light] = heavy_from_i;
            out.pair_from_i[light][heavy] = light_from_i;
            if denom.v <= 0.0 {
                continue;
            }
            let weight = lam_heavy * lam_light / denom * face.trans;
            // contribution to phase l is weight·(g_m - g_l); antisymmetric in (l, m)
            let term_l = weight * (g[m] - g[l]);
            out.pair[l][m] = term_l;
            out.pair[m][l] = -term_l;
        }
    }
    out
}

/// Fluxes of every phase across one face together with their derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaceFlux {
    pub flux: [f64; MAX_PHASES],
    /// `∂F_l/∂(p_i, p_j)`.
    pub d_pressure: [[f64; 2]; MAX_PHASES],
    /// `d_saturation[l][side][m] = ∂F_l/∂s_m` on side 0 (`cell_i`) or 1
    /// (`cell_j`), saturations treated as independent.
    pub d_saturation: [[[f64; MAX_PHASES]; 2]; MAX_PHASES],
    pub stagnant: bool,
}

/// Total velocity with its pressure derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TotalVelocity {
    pub value: f64,
    pub d_pressure: [f64; 2],
}

#[derive(Clone, Copy)]
enum Active {
    Pressure,
    Saturation,
}

fn vars(np: usize, p: f64, s: &[f64], side: usize, active: Active) -> CellVars {
    let mut v = CellVars {
        p: Local::constant(p),
        s: [Local::ZERO; MAX_PHASES],
    };
    match active {
        Active::Pressure => v.p = Local::variable(p, side),
        Active::Saturation => {
            for l in 0..np {
                v.s[l] = Local::variable(s[l], side * np + l);
            }
        }
    }
    if let Active::Pressure = active {
        for l in 0..np {
            v.s[l] = Local::constant(s[l]);
        }
    }
    v
}

fn sides(
    model: &RockFluidModel,
    p: [f64; 2],
    s: [&[f64]; 2],
    active: Active,
) -> Result<(Side, Side)> {
    let np = model.n_phases();
    let a = lift_side(model, &vars(np, p[0], s[0], 0, active))?;
    let b = lift_side(model, &vars(np, p[1], s[1], 1, active))?;
    Ok((a, b))
}

/// PPU total velocity `u_T = Σ_l Υ λ_{l,up} ΔΦ_l`.
pub fn total_velocity(
    model: &RockFluidModel,
    face: &Face,
    p: [f64; 2],
    s: [&[f64]; 2],
) -> Result<TotalVelocity> {
    let (a, b) = sides(model, p, s, Active::Pressure)?;
    let u = ppu_total(model, &ppu_terms(model, face, &a, &b));
    Ok(TotalVelocity {
        value: u.v,
        d_pressure: [u.d[0], u.d[1]],
    })
}

/// Phase-potential upwinded fluxes `F_l = Υ λ_{l,up(l)} ΔΦ_l`.
pub fn phase_flux_ppu(
    model: &RockFluidModel,
    face: &Face,
    p: [f64; 2],
    s: [&[f64]; 2],
) -> Result<FaceFlux> {
    let np = model.n_phases();
    let mut out = FaceFlux::default();
    let (a, b) = sides(model, p, s, Active::Pressure)?;
    let terms = ppu_terms(model, face, &a, &b);
    for l in 0..np {
        out.flux[l] = terms[l].flux.v;
        out.d_pressure[l] = [terms[l].flux.d[0], terms[l].flux.d[1]];
    }
    let (a, b) = sides(model, p, s, Active::Saturation)?;
    let terms = ppu_terms(model, face, &a, &b);
    for l in 0..np {
        for side in 0..2 {
            for m in 0..np {
                out.d_saturation[l][side][m] = terms[l].flux.d[side * np + m];
            }
        }
    }
    Ok(out)
}

/// Hybrid-upwinded fluxes for a frozen total velocity `u_t`.
///
/// Only saturation derivatives are reported: pressure and `u_t` are fixed in
/// transport.
pub fn phase_flux_hu(
    model: &RockFluidModel,
    face: &Face,
    u_t: f64,
    p: [f64; 2],
    s: [&[f64]; 2],
) -> Result<FaceFlux> {
    let np = model.n_phases();
    let mut out = FaceFlux::default();
    let (a, b) = sides(model, p, s, Active::Saturation)?;
    let terms = hu_terms(model, face, Local::constant(u_t), &a, &b);
    out.stagnant = terms.stagnant;
    for l in 0..np {
        let f = terms.phase_flux(l, np);
        out.flux[l] = f.v;
        for side in 0..2 {
            for m in 0..np {
                out.d_saturation[l][side][m] = f.d[side * np + m];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rockfluid::{PhaseKind, PhaseProps};
    use crate::units;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(np: usize, gravity: f64, c_oil: f64) -> RockFluidModel {
        let ph = |kind, mu_cp: f64, rho, c| PhaseProps {
            kind,
            b_ref: 1.0,
            compressibility: c,
            viscosity: units::cp_to_pa_s(mu_cp),
            surface_density: rho,
            exponent: 2.0,
        };
        let mut phases = vec![ph(PhaseKind::Water, 1.0, 1000.0, 0.0), ph(PhaseKind::Oil, 4.0, 500.0, c_oil)];
        if np == 3 {
            phases.push(ph(PhaseKind::Gas, 0.25, 150.0, 1e-8));
        }
        RockFluidModel {
            phases,
            rock_compressibility: 1e-10,
            reference_pressure: 1.4e7,
            gravity,
        }
    }

    /// Model whose mobilities are exactly 1/μ for unit saturations.
    fn unit_face(trans: f64, dh: f64) -> Face {
        Face { cell_i: 0, cell_j: 1, trans, dh }
    }

    #[test]
    fn zero_pressure_drop_without_gravity_gives_zero_velocity() {
        let m = model(2, 0.0, 0.0);
        let s = [0.3, 0.7];
        let u = total_velocity(&m, &unit_face(1e-13, 0.0), [2e7, 2e7], [&s, &s]).unwrap();
        assert_eq!(u.value, 0.0);
    }

    #[test]
    fn zero_mobility_gives_zero_velocity() {
        // water-only on both sides and water immobile is impossible with power
        // laws, so use a pure-oil state with zero oil potential drop instead
        let m = model(2, 0.0, 0.0);
        let s = [0.0, 1.0];
        let u = total_velocity(&m, &unit_face(1.0, 0.0), [1.0, 1.0], [&s, &s]).unwrap();
        assert_eq!(u.value, 0.0);
    }

    #[test]
    fn direct_substitution_total_velocity() {
        // λ_w = λ_o = 1 on both sides, ΔΦ_w = 3, ΔΦ_o = 1, Υ = 2 → u_T = 8.
        // Achieved with μ = 1 Pa·s phases at unit saturation sums via kr = 1
        // is not possible with two mobile phases, so evaluate the core terms.
        let m = model(2, 1.0, 0.0);
        let one = Local::constant(1.0);
        let side = |p: f64, rho_w: f64, rho_o: f64| Side {
            p: Local::constant(p),
            lambda: [one, one, Local::ZERO],
            b: [one, one, Local::ZERO],
            rho: [Local::constant(rho_w), Local::constant(rho_o), Local::ZERO],
        };
        // g_l = -ρ̄ g dh; with dh = 1 and g = 1: g_w = -2, g_o = 0 for the
        // densities below, and Δp = 1 → ΔΦ_w = 3, ΔΦ_o = 1.
        let face = unit_face(2.0, 1.0);
        let a = side(1.0, 2.0, 0.0);
        let b = side(0.0, 2.0, 0.0);
        let terms = ppu_terms(&m, &face, &a, &b);
        assert_eq!(terms[0].flux.v, 6.0);
        assert_eq!(terms[1].flux.v, 2.0);
        assert_eq!(ppu_total(&m, &terms).v, 8.0);
    }

    #[test]
    fn ppu_upwind_selection() {
        let m = model(2, 0.0, 0.0);
        let si = [0.5, 0.5];
        let sj = [0.9, 0.1];
        let face = unit_face(1.0, 0.0);
        let f = phase_flux_ppu(&m, &face, [4.0, 0.0], [&si, &sj]).unwrap();
        let lam_w_i = 0.25 / 1e-3;
        assert!((f.flux[0] - lam_w_i * 4.0).abs() < 1e-9);
        let f = phase_flux_ppu(&m, &face, [0.0, 4.0], [&si, &sj]).unwrap();
        let lam_w_j = 0.81 / 1e-3;
        assert!((f.flux[0] + lam_w_j * 4.0).abs() < 1e-9);
        let f = phase_flux_ppu(&m, &face, [1.0, 1.0], [&si, &sj]).unwrap();
        assert_eq!(f.flux[0], 0.0);
    }

    #[test]
    fn hu_equal_fractional_flow_without_gravity() {
        let m = model(2, 0.0, 0.0);
        // equal mobilities need s_w^2/1 = s_o^2/4 → s_o = 2 s_w
        let s = [1.0 / 3.0, 2.0 / 3.0];
        let f = phase_flux_hu(&m, &unit_face(1.0, 0.0), 2.0, [0.0, 0.0], [&s, &s]).unwrap();
        assert!((f.flux[0] - 1.0).abs() < 1e-12);
        assert!((f.flux[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hu_buoyancy_pair_term() {
        let m = model(2, 1.0, 0.0);
        let two = Local::constant(2.0);
        let side = Side {
            p: Local::ZERO,
            lambda: [two, two, Local::ZERO],
            b: [Local::constant(1.0); MAX_PHASES],
            rho: [Local::constant(1.0), Local::constant(4.0), Local::ZERO],
        };
        // dh = -1 → g_l = ρ̄_l: g_w = 1, g_o = 4, g_o - g_w = 3
        let face = unit_face(1.0, -1.0);
        let t = hu_terms(&m, &face, Local::ZERO, &side, &side);
        assert!((t.phase_flux(0, 2).v - 3.0).abs() < 1e-15);
        assert!((t.phase_flux(1, 2).v + 3.0).abs() < 1e-15);
    }

    #[test]
    fn hu_single_mobile_phase_carries_total_velocity() {
        let m = model(2, units::GRAVITY, 0.0);
        let s = [1.0, 0.0];
        let f = phase_flux_hu(&m, &unit_face(1e-13, 3.0), 5e-6, [2e7, 2e7], [&s, &s]).unwrap();
        assert!((f.flux[0] - 5e-6).abs() < 1e-20);
        assert_eq!(f.flux[1], 0.0);
    }

    fn random_sat(rng: &mut ChaCha8Rng, np: usize) -> Vec<f64> {
        if np == 2 {
            let a = rng.random_range(0.02..0.98);
            vec![a, 1.0 - a]
        } else {
            let a = rng.random_range(0.02..0.9);
            let b = rng.random_range(0.02..(0.96 - a));
            vec![a, b, 1.0 - a - b]
        }
    }

    #[test]
    fn ppu_phase_sum_equals_total_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for np in [2, 3] {
            let m = model(np, units::GRAVITY, 1e-9);
            for _ in 0..50 {
                let face = unit_face(rng.random_range(1e-14..1e-12), rng.random_range(-3.0..3.0));
                let p = [1.4e7 + rng.random_range(-1e5..1e5), 1.4e7 + rng.random_range(-1e5..1e5)];
                let si = random_sat(&mut rng, np);
                let sj = random_sat(&mut rng, np);
                let f = phase_flux_ppu(&m, &face, p, [&si, &sj]).unwrap();
                let u = total_velocity(&m, &face, p, [&si, &sj]).unwrap();
                let sum: f64 = f.flux[..np].iter().sum();
                assert!((sum - u.value).abs() <= 1e-12 * u.value.abs().max(f.flux[0].abs()));
            }
        }
    }

    #[test]
    fn hu_partition_and_antisymmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for np in [2, 3] {
            let m = model(np, units::GRAVITY, 1e-9);
            for _ in 0..100 {
                let face = unit_face(rng.random_range(1e-14..1e-12), rng.random_range(-3.0..3.0));
                let p = [1.4e7 + rng.random_range(-1e5..1e5), 1.4e7 + rng.random_range(-1e5..1e5)];
                let si = random_sat(&mut rng, np);
                let sj = random_sat(&mut rng, np);
                let ut = rng.random_range(-1e-5..1e-5);
                let f = phase_flux_hu(&m, &face, ut, p, [&si, &sj]).unwrap();
                let sum: f64 = f.flux[..np].iter().sum();
                assert!((sum - ut).abs() <= 1e-12 * ut.abs().max(1e-18), "{sum} vs {ut}");

                let back = phase_flux_hu(&m, &face.flipped(), -ut, [p[1], p[0]], [&sj, &si]).unwrap();
                for l in 0..np {
                    assert!((f.flux[l] + back.flux[l]).abs() <= 1e-12 * f.flux[l].abs().max(1e-18));
                }
                let fp = phase_flux_ppu(&m, &face, p, [&si, &sj]).unwrap();
                let bp = phase_flux_ppu(&m, &face.flipped(), [p[1], p[0]], [&sj, &si]).unwrap();
                for l in 0..np {
                    assert!((fp.flux[l] + bp.flux[l]).abs() <= 1e-12 * fp.flux[l].abs().max(1e-18));
                }
            }
        }
    }

    /// PPU fluxes for a prescribed total velocity: choose the upwind pair
    /// consistent with the signs of the resulting phase fluxes.
    fn ppu_fractional_flow(lam_i: [f64; 2], lam_j: [f64; 2], ut: f64, buoy: f64) -> f64 {
        // buoy = Υ (g_o - g_w)
        for up_w in [0usize, 1] {
            for up_o in [0usize, 1] {
                let lw = if up_w == 0 { lam_i[0] } else { lam_j[0] };
                let lo = if up_o == 0 { lam_i[1] } else { lam_j[1] };
                let fw = lw / (lw + lo) * (ut + lo * buoy);
                let fo = ut - fw;
                let ok_w = (fw >= 0.0) == (up_w == 0);
                let ok_o = (fo >= 0.0) == (up_o == 0);
                if ok_w && ok_o {
                    return fw;
                }
            }
        }
        f64::NAN
    }

    #[test]
    fn hu_is_continuous_where_ppu_flips() {
        // Vertical face with cell i on top. Along the path s_i = t, s_j = 1 - t
        // the PPU water direction reverses while HU stays Lipschitz.
        let m = model(2, units::GRAVITY, 0.0);
        let face = unit_face(1e-13, 3.0);
        let p = [1.4e7, 1.4e7 + 3e4];
        // counter-current: the total velocity opposes the buoyant water flux
        let ut = -1e-7;
        let g_o_minus_g_w = -(500.0 - 1000.0) * units::GRAVITY * 3.0;
        let sweep = |n: usize| {
            let mut hu_prev: Option<f64> = None;
            let mut hu_jump = 0.0f64;
            let mut signs = Vec::new();
            for k in 0..=n {
                let t = 0.05 + 0.9 * k as f64 / n as f64;
                let si = [t, 1.0 - t];
                let sj = [1.0 - t, t];
                let hu = phase_flux_hu(&m, &face, ut, p, [&si, &sj]).unwrap().flux[0];
                let mi = m.mobility(&si).unwrap().lambda;
                let mj = m.mobility(&sj).unwrap().lambda;
                let ppu = ppu_fractional_flow([mi[0], mi[1]], [mj[0], mj[1]], ut, face.trans * g_o_minus_g_w);
                if !ppu.is_nan() {
                    signs.push(ppu >= 0.0);
                }
                if let Some(prev) = hu_prev {
                    hu_jump = hu_jump.max((hu - prev).abs());
                }
                hu_prev = Some(hu);
            }
            let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
            (hu_jump, flips)
        };
        let (hu_coarse, flips) = sweep(1_000);
        let (hu_fine, _) = sweep(8_000);
        assert!(flips >= 1, "the path must cross a PPU upwind reversal");
        assert!(hu_fine < 0.2 * hu_coarse, "HU steps shrink with resolution: {hu_coarse} -> {hu_fine}");
    }

    #[test]
    fn flux_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for np in [2, 3] {
            let m = model(np, units::GRAVITY, 1e-9);
            let mut checked = 0;
            while checked < 40 {
                let face = unit_face(1e-13, rng.random_range(-3.0..3.0));
                let p = [1.4e7 + rng.random_range(-2e5..2e5), 1.4e7 + rng.random_range(-2e5..2e5)];
                let si = random_sat(&mut rng, np);
                let sj = random_sat(&mut rng, np);
                let hp = 1e-2;
                let f = phase_flux_ppu(&m, &face, p, [&si, &sj]).unwrap();
                // skip states near an upwind switch
                let fp = |pp: [f64; 2]| phase_flux_ppu(&m, &face, pp, [&si, &sj]).unwrap();
                let near_switch = (0..np).any(|l| {
                    let up = fp([p[0] + 1e3, p[1]]).flux[l].signum();
                    let dn = fp([p[0] - 1e3, p[1]]).flux[l].signum();
                    up != dn
                });
                if near_switch {
                    continue;
                }
                checked += 1;
                for side in 0..2 {
                    let mut pp = p;
                    let mut pm = p;
                    pp[side] += hp;
                    pm[side] -= hp;
                    for l in 0..np {
                        let fd = (fp(pp).flux[l] - fp(pm).flux[l]) / (2.0 * hp);
                        let an = f.d_pressure[l][side];
                        assert!((an - fd).abs() <= 1e-6 * an.abs().max(fd.abs()).max(1e-30), "p l={l}");
                    }
                }
                let ut = rng.random_range(-1e-5..1e-5);
                let hu = phase_flux_hu(&m, &face, ut, p, [&si, &sj]).unwrap();
                let hs = 1e-5;
                // below this size an FD derivative is dominated by rounding in F
                let hu_floor = 1e-4 * (0..np).fold(ut.abs(), |m, l| m.max(hu.flux[l].abs()));
                let ppu_floor = 1e-4 * (0..np).fold(0.0f64, |m, l| m.max(f.flux[l].abs()));
                for side in 0..2 {
                    for v in 0..np {
                        let (mut a, mut b) = (si.clone(), sj.clone());
                        let (mut c, mut d) = (si.clone(), sj.clone());
                        if side == 0 {
                            a[v] += hs;
                            c[v] -= hs;
                        } else {
                            b[v] += hs;
                            d[v] -= hs;
                        }
                        let up = phase_flux_hu(&m, &face, ut, p, [&a, &b]).unwrap();
                        let dn = phase_flux_hu(&m, &face, ut, p, [&c, &d]).unwrap();
                        let upp = phase_flux_ppu(&m, &face, p, [&a, &b]).unwrap();
                        let dnp = phase_flux_ppu(&m, &face, p, [&c, &d]).unwrap();
                        for l in 0..np {
                            let fd = (up.flux[l] - dn.flux[l]) / (2.0 * hs);
                            let an = hu.d_saturation[l][side][v];
                            let scale = an.abs().max(fd.abs()).max(1e-30);
                            assert!((an - fd).abs() <= 1e-6 * scale.max(hu_floor), "hu l={l}: {an} vs {fd}");
                            let fd = (upp.flux[l] - dnp.flux[l]) / (2.0 * hs);
                            let an = f.d_saturation[l][side][v];
                            let scale = an.abs().max(fd.abs()).max(1e-30);
                            assert!((an - fd).abs() <= 1e-6 * scale.max(ppu_floor), "ppu l={l}: {an} vs {fd}");
                        }
                    }
                }
            }
        }
    }
}
