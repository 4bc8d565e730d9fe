mod common;

use common::{fluid_of, small_grid};
use sfi_core::harness::builtin_case;
use sfi_core::newton::{Strategy, TolerancePolicy};
use sfi_core::sfi::{run_simulation, Schedule, Solvers, TimeControl};
use sfi_core::units::days_to_s;
use sfi_core::{OuterConfig, QnConfig, SimState};

fn quiet_run(t_end_over_dtmax: f64, schedule: Schedule) -> Vec<f64> {
    let mut model = fluid_of("lock_exchange", None);
    model.gravity = 0.0;
    let grid = small_grid(2, 2);
    let initial = SimState::uniform(4, 1.5e7, &[0.4, 0.6]);
    let dtmax = days_to_s(10.0);
    let policy = TolerancePolicy::preset(Strategy::Tight);
    let out = run_simulation(
        &grid,
        &model,
        initial,
        &schedule,
        Solvers {
            policy: &policy,
            qn: &QnConfig::default(),
            outer: &OuterConfig::default(),
        },
        TimeControl::new(dtmax, t_end_over_dtmax * dtmax),
    )
    .unwrap();
    assert!(out.aborted.is_none());
    assert!(out.report.steps.iter().all(|s| s.accepted));
    out.report.steps.iter().map(|s| s.dt / dtmax).collect()
}

fn assert_steps(got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len(), "{got:?}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
    }
}

#[test]
fn last_step_is_shortened_to_hit_the_end_time() {
    assert_steps(&quiet_run(2.5, Schedule::constant(vec![])), &[1.0, 1.0, 0.5]);
}

#[test]
fn zero_end_time_gives_an_empty_report() {
    assert!(quiet_run(0.0, Schedule::constant(vec![])).is_empty());
}

#[test]
fn steps_stop_at_schedule_boundaries() {
    let dtmax = days_to_s(10.0);
    let schedule = Schedule::from_periods(vec![(1.2 * dtmax, vec![]), (10.0 * dtmax, vec![])]).unwrap();
    assert_steps(&quiet_run(2.5, schedule), &[1.0, 0.2, 1.0, 0.3]);
}

#[test]
fn failing_steps_are_halved_until_the_run_aborts() {
    // the pressure solve gets a single iteration, which never suffices
    let case = builtin_case("lock_exchange").unwrap().scaled(0.1).unwrap();
    let built = case.build().unwrap();
    let policy = TolerancePolicy {
        max_iter_p: 1,
        ..TolerancePolicy::preset(Strategy::Tight)
    };
    let out = run_simulation(
        &built.grid,
        &built.model,
        built.initial.clone(),
        &built.schedule,
        Solvers {
            policy: &policy,
            qn: &QnConfig::default(),
            outer: &OuterConfig::default(),
        },
        built.time,
    )
    .unwrap();
    assert!(out.aborted.is_some());
    assert_eq!(out.time, 0.0);
    let dts: Vec<f64> = out.report.steps.iter().map(|s| s.dt / built.time.dtmax).collect();
    assert_steps(&dts, &[1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]);
    let t = out.report.totals();
    assert_eq!(t.cuts, 7);
    assert_eq!(t.accepted_steps, 0);
    assert_eq!(t.wasted_outer, t.outer);
    assert_eq!(t.wasted_pressure, t.pressure);
    assert!(t.pressure >= 7);
    assert_eq!(out.state, built.initial);
}

#[test]
fn recovered_cuts_count_as_wasted_work() {
    let case = builtin_case("lock_exchange").unwrap().scaled(0.1).unwrap();
    let built = case.build().unwrap();
    let policy = TolerancePolicy::preset(Strategy::Tight);
    let outer = OuterConfig {
        max_outer: 3,
        ..OuterConfig::default()
    };
    let out = run_simulation(
        &built.grid,
        &built.model,
        built.initial.clone(),
        &built.schedule,
        Solvers {
            policy: &policy,
            qn: &QnConfig::default(),
            outer: &outer,
        },
        TimeControl::new(days_to_s(100.0), days_to_s(200.0)),
    )
    .unwrap();
    let t = out.report.totals();
    assert!(t.cuts > 0, "expected the tight outer cap to force cuts");
    let wasted: usize = out.report.steps.iter().filter(|s| !s.accepted).map(|s| s.outer()).sum();
    assert_eq!(t.wasted_outer, wasted);
    assert!(t.outer > t.wasted_outer);
    if out.aborted.is_none() {
        assert!((out.time - days_to_s(200.0)).abs() < 1e-6);
    }
    // no accepted step exceeds the outer cap
    for s in out.report.accepted() {
        assert!(s.passes.len() <= 3);
    }
}
