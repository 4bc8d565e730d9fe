//! Built-in cases. Parameters are given in field units and converted.

use crate::error::{Error, Result};
use crate::newton::TolerancePolicy;
use crate::rockfluid::{PhaseKind, PhaseProps, RockFluidModel};
use crate::sfi::{OuterConfig, QnConfig};
use crate::units::*;
use crate::wells::WellControl;

use super::{CaseSpec, GridSpec, InitialSpec, PermeabilitySpec, SaturationLayout, WellSpec};

pub const CASE_NAMES: [&str; 7] = [
    "lock_exchange",
    "lock_exchange_hetero",
    "grav_segregation",
    "quarter_five_spot",
    "water_into_gas",
    "wag_3phase",
    "water_inject_3phase",
];

/// Surface density assumed for gas, kg/m³.
const GAS_DENSITY: f64 = 200.0;
const DEFAULT_SEED: u64 = 7;

fn phase(kind: PhaseKind, c_per_psi: f64, mu_cp: f64, rho: f64, n: f64) -> PhaseProps {
    PhaseProps {
        kind,
        b_ref: 1.0,
        compressibility: per_psi_to_per_pa(c_per_psi),
        viscosity: cp_to_pa_s(mu_cp),
        surface_density: rho,
        exponent: n,
    }
}

fn fluid(phases: Vec<PhaseProps>, gravity: f64) -> RockFluidModel {
    RockFluidModel {
        phases,
        rock_compressibility: per_psi_to_per_pa(1e-6),
        reference_pressure: psi_to_pa(2000.0),
        gravity,
    }
}

fn base(name: &str) -> CaseSpec {
    CaseSpec {
        name: name.into(),
        grid: GridSpec {
            nx: 60,
            nz: 60,
            lx: ft_to_m(600.0),
            ly: ft_to_m(10.0),
            lz: ft_to_m(600.0),
            permeability: PermeabilitySpec::Uniform {
                perm: md_to_m2(100.0),
                porosity: 0.1,
            },
        },
        fluid: fluid(
            vec![
                phase(PhaseKind::Water, 0.0, 1.0, 1000.0, 2.0),
                phase(PhaseKind::Oil, 6.9e-6, 4.0, 500.0, 2.0),
            ],
            GRAVITY,
        ),
        initial: InitialSpec {
            pressure: psi_to_pa(2000.0),
            saturation: SaturationLayout::LeftRight {
                left: vec![0.0, 1.0],
                right: vec![1.0, 0.0],
            },
        },
        wells: Vec::new(),
        dtmax: days_to_s(50.0),
        t_end: days_to_s(400.0),
        policy: TolerancePolicy::default(),
        qn: QnConfig::default(),
        outer: OuterConfig::default(),
    }
}

fn heterogeneous(mut c: CaseSpec) -> CaseSpec {
    c.fluid.phases[1].surface_density = 800.0;
    c.dtmax = days_to_s(20.0);
    c.t_end = days_to_s(200.0);
    c.grid.permeability = PermeabilitySpec::LogNormal {
        geometric_mean: md_to_m2(100.0),
        sigma_log10: 1.0,
        seed: DEFAULT_SEED,
        porosity: 0.1,
    };
    c
}

/// Cross-section with a centre injector and four corner producers; the
/// permeability defaults to uniform 100 mD and can be replaced by a file.
fn five_spot(mut c: CaseSpec, phase: usize, rate_ft3_day: f64) -> CaseSpec {
    c.grid.nx = 60;
    c.grid.nz = 220;
    c.grid.lz = ft_to_m(2200.0);
    c.dtmax = days_to_s(20.0);
    c.t_end = days_to_s(200.0);
    let (nx, nz) = (c.grid.nx, c.grid.nz);
    c.wells.push(WellSpec {
        name: "inj".into(),
        i: nx / 2,
        k: nz / 2,
        control: WellControl::Rate {
            phase,
            surface_rate: ft3_per_day_to_m3_per_s(rate_ft3_day),
        },
        active: Vec::new(),
    });
    for (n, (i, k)) in [(0, 0), (nx - 1, 0), (0, nz - 1), (nx - 1, nz - 1)].into_iter().enumerate() {
        c.wells.push(WellSpec {
            name: format!("prod{}", n + 1),
            i,
            k,
            control: WellControl::Bhp { pressure: psi_to_pa(500.0) },
            active: Vec::new(),
        });
    }
    c
}

fn three_phase(mut c: CaseSpec, mu_oil: f64, s: [f64; 3]) -> CaseSpec {
    c.fluid = fluid(
        vec![
            phase(PhaseKind::Water, 0.0, 1.0, 1000.0, 3.0),
            phase(PhaseKind::Oil, 6.9e-6, mu_oil, 500.0, 3.0),
            phase(PhaseKind::Gas, 6.9e-5, 0.25, GAS_DENSITY, 3.0),
        ],
        0.0,
    );
    c.initial.saturation = SaturationLayout::Uniform { s: s.to_vec() };
    c
}

/// Built-in case by name.
pub fn builtin_case(name: &str) -> Result<CaseSpec> {
    let case = match name {
        "lock_exchange" => base(name),
        "lock_exchange_hetero" => heterogeneous(base(name)),
        "grav_segregation" => {
            let mut c = heterogeneous(base(name));
            c.initial.saturation = SaturationLayout::Layered {
                top: vec![1.0, 0.0],
                bottom: vec![0.0, 1.0],
                fraction: 0.5,
            };
            c
        }
        "quarter_five_spot" => {
            let mut c = five_spot(base(name), 0, 664.0);
            c.initial.saturation = SaturationLayout::Uniform { s: vec![0.01, 0.99] };
            c
        }
        "water_into_gas" => {
            let mut c = five_spot(base(name), 0, 1328.0);
            c.fluid = fluid(
                vec![
                    phase(PhaseKind::Water, 0.0, 1.0, 1000.0, 3.0),
                    phase(PhaseKind::Gas, 6.9e-5, 0.25, GAS_DENSITY, 3.0),
                ],
                0.0,
            );
            c.initial.saturation = SaturationLayout::Uniform { s: vec![0.1, 0.9] };
            c
        }
        "wag_3phase" => {
            let mut c = three_phase(five_spot(base(name), 0, 1328.0), 1.0, [0.1, 0.9, 0.0]);
            c.t_end = days_to_s(400.0);
            let gas = WellSpec {
                name: "inj_gas".into(),
                control: WellControl::Rate {
                    phase: 2,
                    surface_rate: ft3_per_day_to_m3_per_s(1328.0),
                },
                ..c.wells[0].clone()
            };
            c.wells[0].name = "inj_water".into();
            let interval = days_to_s(20.0);
            let n = (c.t_end / interval).round() as usize;
            for k in 0..n {
                let iv = [k as f64 * interval, (k + 1) as f64 * interval];
                if k % 2 == 0 {
                    c.wells[0].active.push(iv);
                }
            }
            let mut gas = gas;
            gas.active = (0..n)
                .filter(|k| k % 2 == 1)
                .map(|k| [k as f64 * interval, (k + 1) as f64 * interval])
                .collect();
            c.wells.insert(1, gas);
            c
        }
        "water_inject_3phase" => three_phase(five_spot(base(name), 0, 2656.0), 4.0, [0.1, 0.2, 0.7]),
        _ => {
            return Err(Error::UnknownCase {
                name: name.into(),
                available: CASE_NAMES.join(", "),
            })
        }
    };
    Ok(case)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_case_builds() {
        for name in CASE_NAMES {
            let c = builtin_case(name).unwrap().scaled(0.1).unwrap();
            c.build().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn unknown_case_lists_registry() {
        let err = builtin_case("nope").unwrap_err().to_string();
        assert!(err.contains("lock_exchange") && err.contains("wag_3phase"), "{err}");
    }
}
