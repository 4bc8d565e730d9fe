//! Field-unit conversion factors. Everything inside the simulator is SI.

pub const PSI: f64 = 6894.757;
pub const FOOT: f64 = 0.3048;
pub const CUBIC_FOOT: f64 = FOOT * FOOT * FOOT;
pub const CENTIPOISE: f64 = 1e-3;
pub const MILLIDARCY: f64 = 9.869233e-16;
pub const DAY: f64 = 86_400.0;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

pub fn psi_to_pa(v: f64) -> f64 {
    v * PSI
}

pub fn pa_to_psi(v: f64) -> f64 {
    v / PSI
}

pub fn ft_to_m(v: f64) -> f64 {
    v * FOOT
}

pub fn m_to_ft(v: f64) -> f64 {
    v / FOOT
}

pub fn cp_to_pa_s(v: f64) -> f64 {
    v * CENTIPOISE
}

pub fn pa_s_to_cp(v: f64) -> f64 {
    v / CENTIPOISE
}

pub fn md_to_m2(v: f64) -> f64 {
    v * MILLIDARCY
}

pub fn m2_to_md(v: f64) -> f64 {
    v / MILLIDARCY
}

pub fn days_to_s(v: f64) -> f64 {
    v * DAY
}

pub fn s_to_days(v: f64) -> f64 {
    v / DAY
}

/// Compressibility given per psi, returned per Pa.
pub fn per_psi_to_per_pa(v: f64) -> f64 {
    v / PSI
}

pub fn per_pa_to_per_psi(v: f64) -> f64 {
    v * PSI
}

pub fn ft3_per_day_to_m3_per_s(v: f64) -> f64 {
    v * CUBIC_FOOT / DAY
}

pub fn m3_per_s_to_ft3_per_day(v: f64) -> f64 {
    v * DAY / CUBIC_FOOT
}
