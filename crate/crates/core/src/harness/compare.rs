//! Paired runs of one case under several inner-tolerance strategies.

use std::thread;

use crate::error::{Error, Result};
use crate::newton::{Strategy, TolerancePolicy};
use crate::sfi::{QnConfig, RunOutput, Totals};

use super::{run_case, CaseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub strategy: Strategy,
    pub totals: Totals,
    pub aborted: Option<String>,
    /// Saturation ∞-norm difference from the first row's final state.
    pub max_sat_diff: f64,
    /// Whether that difference is within the outer saturation tolerance.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub case: String,
    pub qn: bool,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, s: Strategy) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.strategy == s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,outer,pressure,transport,wasted_outer,wasted_pressure,wasted_transport,cuts,max_sat_diff,agrees,status\n",
        );
        for r in &self.rows {
            let t = &r.totals;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:e},{},{}\n",
                r.strategy.name(),
                t.outer,
                t.pressure,
                t.transport,
                t.wasted_outer,
                t.wasted_pressure,
                t.wasted_transport,
                t.cuts,
                r.max_sat_diff,
                r.agrees,
                r.aborted.as_deref().unwrap_or("ok").replace(',', ";")
            ));
        }
        out
    }
}

/// Runs `case` once per strategy (Table 1 presets, the case's other policy
/// settings kept) in parallel and tabulates the iteration totals.
pub fn compare_strategies(case: &CaseSpec, strategies: &[Strategy], qn: bool) -> Result<Comparison> {
    if strategies.len() < 2 {
        return Err(Error::Config("comparison needs at least two strategies".into()));
    }
    let runs: Vec<Result<RunOutput>> = thread::scope(|scope| {
        let handles: Vec<_> = strategies
            .iter()
            .map(|&s| {
                let mut c = case.clone();
                let base = c.policy;
                c.policy = TolerancePolicy {
                    max_iter_p: base.max_iter_p,
                    max_iter_t: base.max_iter_t,
                    chop: base.chop,
                    ..TolerancePolicy::preset(s)
                };
                c.qn = QnConfig {
                    enabled: qn,
                    ..case.qn
                };
                scope.spawn(move || run_case(&c).map(|(_, out)| out))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });

    let mut rows = Vec::new();
    let mut reference: Option<Vec<f64>> = None;
    for (&s, run) in strategies.iter().zip(runs) {
        let run = run?;
        let diff = match &reference {
            None => {
                reference = Some(run.state.s.clone());
                0.0
            }
            Some(r) => r.iter().zip(&run.state.s).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
        };
        rows.push(ComparisonRow {
            strategy: s,
            totals: run.report.totals(),
            agrees: run.aborted.is_none() && diff <= case.outer.eps_t,
            aborted: run.aborted,
            max_sat_diff: diff,
        });
    }
    Ok(Comparison {
        case: case.name.clone(),
        qn,
        rows,
    })
}
