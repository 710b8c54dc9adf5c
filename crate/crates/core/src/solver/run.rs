use serde::{Deserialize, Serialize};

use super::problem::Problem;
use super::state::State;
use super::step::{advance, check_admissible, stable_dt};
use crate::energy::{energy_e, Crossing, Monitor};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::model::Regime;
use crate::stencil::d2y;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub epsilon: f64,
    pub t_end: f64,
    pub max_steps: Option<usize>,
    /// Snapshot every this many accepted steps (0 = initial and final only).
    pub snapshot_every: usize,
    /// Integration stops once `E > stop_multiple * eps^2`.
    pub stop_multiple: f64,
}

impl RunSpec {
    pub fn new(epsilon: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            t_end,
            max_steps: None,
            snapshot_every: 0,
            stop_multiple: 8.0,
        }
    }
}

/// One row of the per-step energy log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub breach4: bool,
    pub breach8: bool,
    pub warmup: bool,
    /// Step that led to this row (0 for the initial row).
    pub dt: f64,
    /// `min h` (isentropic) or `min q` (non-isentropic).
    pub min_h_or_q: f64,
    /// Outflow smallness `f(t)` (0 for the isentropic system).
    pub f: f64,
    /// `max_x |d_y^2 u + (1/h) d_x h~|` at the wall (isentropic only).
    pub wall_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub comps: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Horizon,
    Breach,
    MaxSteps,
    Admissibility(String),
    StepFailure(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::Breach => "breach",
            Termination::MaxSteps => "max-steps",
            Termination::Admissibility(_) => "admissibility",
            Termination::StepFailure(_) => "step-failure",
        }
    }

    /// Breach, horizon and step limits are scientific outcomes; the rest are numerical failures.
    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self,
            Termination::Admissibility(_) | Termination::StepFailure(_)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<EnergyRow>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub breach4: Option<Crossing>,
    pub breach8: Option<Crossing>,
    pub steps: usize,
    pub final_state: State,
}

/// `max_x |d_y^2 u|_0 + (1/h) d_x h~|_0|` with the one-sided wall stencil.
pub fn wall_identity_residual(problem: &Problem, state: &State) -> f64 {
    let g = problem.grid;
    let (nx, dx, dy) = (g.nx, g.dx(), g.dy());
    let u = &state.comps[0];
    let h = &state.comps[1];
    (0..nx)
        .map(|i| {
            let uyy = d2y(u.column(i), 0, dy);
            let hx = (h.get((i + 1) % nx, 0) - h.get((i + nx - 1) % nx, 0)) / (2.0 * dx);
            (uyy + hx / (1.0 + h.get(i, 0))).abs()
        })
        .fold(0.0, f64::max)
}

fn row(problem: &Problem, state: &mut State, monitor: &mut Monitor, dt: f64) -> Result<EnergyRow> {
    let min_h_or_q = match problem.regime() {
        Regime::Isentropic => check_admissible(problem, state.t, &state.comps)?,
        Regime::NonIsentropic => check_admissible(problem, state.t, &state.comps)?,
    };
    let rep = energy_e(problem, state)?;
    let above = monitor.observe(state.t, rep.e);
    Ok(EnergyRow {
        t: state.t,
        e: rep.e,
        d: rep.d,
        breach4: above[0],
        breach8: above[1],
        warmup: rep.warmup,
        dt,
        min_h_or_q,
        f: problem
            .outflow
            .as_ref()
            .map_or(0.0, |o| o.envelope.f(state.t)),
        wall_residual: match problem.regime() {
            Regime::Isentropic => Some(wall_identity_residual(problem, state)),
            Regime::NonIsentropic => None,
        },
    })
}

/// Integrates from `initial` and calls `observer` on every energy row as it is produced.
pub fn run_observed(
    problem: &Problem,
    initial: State,
    spec: &RunSpec,
    observer: &mut dyn FnMut(&EnergyRow),
) -> Result<Trajectory> {
    if !(spec.t_end >= 0.0) || !(spec.epsilon >= 0.0) || !(spec.stop_multiple > 0.0) {
        return Err(Error::Config(vec![format!(
            "run needs t_end >= 0, eps >= 0 and stop_multiple > 0: {spec:?}"
        )]));
    }
    let mut monitor = Monitor::new(spec.epsilon, &[4.0, 8.0, spec.stop_multiple]);
    let mut state = initial;
    let mut rows = Vec::new();
    let mut snapshots = vec![Snapshot {
        step: 0,
        t: state.t,
        comps: state.comps.clone(),
    }];
    let first = row(problem, &mut state, &mut monitor, 0.0)?;
    observer(&first);
    rows.push(first);
    let eps2 = spec.epsilon * spec.epsilon;
    let stop = |r: &EnergyRow| spec.epsilon > 0.0 && r.e > spec.stop_multiple * eps2;
    let mut steps = 0;
    let t_end = spec.t_end;
    let termination = loop {
        if stop(rows.last().unwrap()) {
            break Termination::Breach;
        }
        if state.t >= t_end - 1e-12 * t_end.max(1.0) {
            break Termination::Horizon;
        }
        if spec.max_steps.is_some_and(|m| steps >= m) {
            break Termination::MaxSteps;
        }
        let dt = match stable_dt(problem, &state) {
            Ok(dt) => dt.min(t_end - state.t),
            Err(e) => break Termination::Admissibility(e.to_string()),
        };
        let (mut next, used) = match advance(problem, &state, dt) {
            Ok(v) => v,
            Err(e @ Error::StepFailure { .. }) => break Termination::StepFailure(e.to_string()),
            Err(e) => return Err(e),
        };
        steps += 1;
        let r = match row(problem, &mut next, &mut monitor, used) {
            Ok(r) => r,
            Err(e @ Error::Admissibility { .. }) => {
                state = next;
                break Termination::Admissibility(e.to_string());
            }
            Err(e) => return Err(e),
        };
        observer(&r);
        rows.push(r);
        state = next;
        if spec.snapshot_every > 0 && steps % spec.snapshot_every == 0 {
            snapshots.push(Snapshot {
                step: steps,
                t: state.t,
                comps: state.comps.clone(),
            });
        }
    };
    if snapshots.last().map(|s| s.step) != Some(steps) {
        snapshots.push(Snapshot {
            step: steps,
            t: state.t,
            comps: state.comps.clone(),
        });
    }
    Ok(Trajectory {
        rows,
        snapshots,
        termination,
        breach4: monitor.crossings[0],
        breach8: monitor.crossings[1],
        steps,
        final_state: state,
    })
}

pub fn run(problem: &Problem, initial: State, spec: &RunSpec) -> Result<Trajectory> {
    run_observed(problem, initial, spec, &mut |_| {})
}
