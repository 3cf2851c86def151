use std::fmt;

use log::{debug, info};

use crate::clf::{dissipation_residual, energy};
use crate::controllers::ControlInput;
use crate::dynamics::closed_loop_step;
use crate::error::Result;
use crate::geometry::{check_state_space, ensure_member, one_minus_cos, FleetState, Margins};
use crate::model::Model;

use super::metrics::{metrics_series, MetricsSeries};
use super::scenario::Scenario;

/// Recorded states and the controls applied at them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub states: Vec<FleetState>,
    pub controls: Vec<Vec<ControlInput>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, t: f64, w: &FleetState, u: &[ControlInput]) {
        self.t.push(t);
        self.states.push(w.clone());
        self.controls.push(u.to_vec());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorKind {
    /// The state left the state space or a control became undefined.
    StateSpace,
    /// The Lyapunov function increased beyond tolerance over a step.
    Clf,
    /// The measured Lyapunov derivative exceeded the analytic bound or
    /// departed from the closed-form dissipation.
    Dissipation,
}

impl fmt::Display for MonitorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonitorKind::StateSpace => "state-space",
            MonitorKind::Clf => "clf-monotonicity",
            MonitorKind::Dissipation => "dissipation",
        })
    }
}

/// The first monitor that fired, with the state at which it fired.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorViolation {
    pub kind: MonitorKind,
    pub step: usize,
    pub t: f64,
    pub detail: String,
    pub state: FleetState,
}

impl fmt::Display for MonitorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} monitor fired at step {} (t = {}): {}",
            self.kind, self.step, self.t, self.detail
        )
    }
}

/// Worst dissipation spot-check of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissipationSummary {
    pub checks: usize,
    /// Smallest `margin / max(1, |bound|)` seen.
    pub worst_relative_margin: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: TrajectoryRecord,
    pub metrics: MetricsSeries,
    pub violation: Option<MonitorViolation>,
    /// Smallest value of each state-space margin over every step.
    pub min_margins: Margins,
    /// Largest `|F_i| + |delta_i|` over every step and vehicle.
    pub max_effort: f64,
    pub dissipation: DissipationSummary,
    pub steps_taken: usize,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    pub fn final_state(&self) -> &FleetState {
        self.record.states.last().expect("record holds the initial state")
    }
}

/// Integrates the scenario to its horizon with every monitor active.
///
/// Configuration problems are returned as errors; a monitor violation ends
/// the run early and is reported in [`RunResult::violation`].
pub fn run_scenario(sc: &Scenario) -> Result<RunResult> {
    sc.validate()?;
    let model = sc.model()?;
    let w0 = sc.initial_fleet(&model.ring)?;
    run_from(sc, &model, w0)
}

pub(crate) fn run_from(sc: &Scenario, model: &Model, w0: FleetState) -> Result<RunResult> {
    let controller = sc.controller();
    let family = controller.family;
    let cfg = &sc.integrator;
    let mon = &sc.monitors;
    let steps = cfg.steps();
    info!(
        "running {} ({} vehicles, {} steps of {})",
        sc.name,
        model.n(),
        steps,
        cfg.dt
    );

    let mut record = TrajectoryRecord::default();
    let mut min_margins = Margins::UNBOUNDED;
    let mut max_effort = 0.0f64;
    let mut dissipation = DissipationSummary {
        checks: 0,
        worst_relative_margin: f64::INFINITY,
    };
    let mut violation = None;

    let mut w = w0;
    min_margins = min_margins.min(Margins::of(&w, &model.ring));
    let mut h = energy(family, &w, model)?.total;
    let mut step = 0;
    loop {
        let t = step as f64 * cfg.dt;
        let fire = |kind, detail: String, state: &FleetState| MonitorViolation {
            kind,
            step,
            t,
            detail,
            state: state.clone(),
        };
        let u = match controller.control_fleet(&w, model) {
            Ok(u) => u,
            Err(e) => {
                violation = Some(fire(MonitorKind::StateSpace, e.to_string(), &w));
                break;
            }
        };
        for ui in &u {
            max_effort = max_effort.max(ui.accel.abs() + ui.steering.abs());
        }
        if step % cfg.record_every == 0 {
            record.push(t, &w, &u);
        }
        if step == steps {
            break;
        }

        if mon.dissipation_every > 0 && step % mon.dissipation_every == 0 {
            match dissipation_residual(&w, model, &controller, mon.fd_step) {
                Ok(d) => {
                    dissipation.checks += 1;
                    let rel = d.margin / d.bound.abs().max(1.0);
                    dissipation.worst_relative_margin = dissipation.worst_relative_margin.min(rel);
                    let tol = mon.dissipation_tolerance;
                    // the bound has slack wherever gains exceed their floor, so a
                    // wrong control can hide under it; the identity cannot
                    if !d.respects_bound(tol) || !d.matches_identity(tol) {
                        let detail = format!(
                            "dH/dt = {} against bound {} and exact {}",
                            d.fd, d.bound, d.exact
                        );
                        violation = Some(fire(MonitorKind::Dissipation, detail, &w));
                        break;
                    }
                }
                Err(e) => {
                    violation = Some(fire(MonitorKind::Dissipation, e.to_string(), &w));
                    break;
                }
            }
        }

        let next = match closed_loop_step(&w, &u, cfg.dt, &controller, model, cfg.stage_control) {
            Ok(next) => next,
            Err(e) => {
                violation = Some(fire(MonitorKind::StateSpace, e.to_string(), &w));
                break;
            }
        };
        let membership = check_state_space(&next, &model.ring);
        if !membership.is_member() {
            violation = Some(fire(MonitorKind::StateSpace, membership.to_string(), &next));
            break;
        }
        min_margins = min_margins.min(Margins::of(&next, &model.ring));
        let h_next = energy(family, &next, model)?.total;
        if h_next > h + mon.clf_tolerance * h.max(1.0) {
            let detail = format!("H rose from {h} to {h_next}");
            violation = Some(fire(MonitorKind::Clf, detail, &next));
            break;
        }
        h = h_next;
        w = next;
        step += 1;
        if step % 10_000 == 0 {
            debug!("{}: t = {}, H = {h}", sc.name, step as f64 * cfg.dt);
        }
    }

    if dissipation.checks == 0 {
        dissipation.worst_relative_margin = 0.0;
    }
    if let Some(v) = &violation {
        info!("{}: {v}", sc.name);
    }
    let metrics = metrics_series(&record, model, family)?;
    Ok(RunResult {
        record,
        metrics,
        violation,
        min_margins,
        max_effort,
        dissipation,
        steps_taken: step,
    })
}

/// Distance of `w` from the equilibrium set: speed mismatch, orientation,
/// and unbalanced radial and tangential potential forces, summed over
/// vehicles. Zero exactly on the equilibrium set.
pub fn equilibrium_residual(w: &FleetState, model: &Model) -> Result<f64> {
    ensure_member(w, &model.ring)?;
    let ring = &model.ring;
    let mut total = 0.0;
    for (i, xi) in w.vehicles.iter().enumerate() {
        let mut radial = model.potentials.boundary(i, xi.r)?.d1;
        let mut tangential = 0.0;
        for (j, xj) in w.vehicles.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = w.distance(i, j, ring);
            let dv = model.potentials.pair(i, j, d, ring.min_gap.get(i, j))?.d1;
            if dv == 0.0 {
                continue;
            }
            let dphi = xi.phi - xj.phi;
            radial += (ring.weight.get(i, j) * (xi.r - xj.r) + xj.r * one_minus_cos(dphi)) * dv / d;
            tangential += dv * xj.r * dphi.sin() / d;
        }
        total += (xi.v - ring.omega_star * xi.r).abs() + xi.s.abs() + radial.abs() + tangential.abs();
    }
    Ok(total)
}
