//! Vehicle models, the fixed-step integrator and frame transforms.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControlInput, Controller};
use crate::error::{Error, Result};
use crate::geometry::{
    cartesian_from_polar, polar_from_cartesian_near, CartesianState, FleetState, RingConfig,
    VehicleState,
};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Re-evaluate the controls at every Runge-Kutta stage instead of
    /// holding the step-start value.
    #[serde(default)]
    pub stage_control: bool,
}

fn default_record_every() -> usize {
    1
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 200.0,
            record_every: 100,
            stage_control: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Scenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::Scenario(format!(
                "t_end must be at least dt, got {} < {}",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Scenario("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`, rounding to the nearest whole step.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// A state the integrator can advance.
pub trait Integrable: Sized {
    /// `self + a * k`.
    fn axpy(&self, a: f64, k: &Self) -> Self;
    fn is_finite(&self) -> bool;
}

impl Integrable for f64 {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        self + a * k
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Integrable for VehicleState {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        VehicleState::new(
            self.r + a * k.r,
            self.phi + a * k.phi,
            self.s + a * k.s,
            self.v + a * k.v,
        )
    }

    fn is_finite(&self) -> bool {
        VehicleState::is_finite(self)
    }
}

impl Integrable for CartesianState {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        CartesianState {
            x: self.x + a * k.x,
            y: self.y + a * k.y,
            theta: self.theta + a * k.theta,
            v: self.v + a * k.v,
        }
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.theta, self.v].iter().all(|c| c.is_finite())
    }
}

impl<T: Integrable> Integrable for Vec<T> {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        self.iter().zip(k).map(|(x, kx)| x.axpy(a, kx)).collect()
    }

    fn is_finite(&self) -> bool {
        self.iter().all(Integrable::is_finite)
    }
}

impl Integrable for FleetState {
    fn axpy(&self, a: f64, k: &Self) -> Self {
        FleetState::new(self.vehicles.axpy(a, &k.vehicles))
    }

    fn is_finite(&self) -> bool {
        self.vehicles.is_finite()
    }
}

/// One classical fourth-order Runge-Kutta step. Any non-finite stage
/// derivative aborts the step.
pub fn rk4_step<S, F>(state: &S, dt: f64, mut rhs: F) -> Result<S>
where
    S: Integrable,
    F: FnMut(&S) -> Result<S>,
{
    let mut eval = |x: &S| -> Result<S> {
        let k = rhs(x)?;
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::NonFinite)
        }
    };
    let k1 = eval(state)?;
    let k2 = eval(&state.axpy(0.5 * dt, &k1))?;
    let k3 = eval(&state.axpy(0.5 * dt, &k2))?;
    let k4 = eval(&state.axpy(dt, &k3))?;
    Ok(state
        .axpy(dt / 6.0, &k1)
        .axpy(dt / 3.0, &k2)
        .axpy(dt / 3.0, &k3)
        .axpy(dt / 6.0, &k4))
}

fn check_steering(vehicle: usize, delta: f64) -> Result<f64> {
    if delta.abs() < FRAC_PI_2 {
        Ok(delta.tan())
    } else {
        Err(Error::Steering { vehicle, delta })
    }
}

/// Time derivative of the fleet under the polar bicycle model. The
/// derivative is returned in a [`FleetState`] whose fields hold the rates
/// `(r', phi', s', v')`.
pub fn polar_rhs(w: &FleetState, u: &[ControlInput], ring: &RingConfig) -> Result<FleetState> {
    if u.len() != w.len() {
        return Err(Error::Scenario(format!(
            "{} control inputs for {} vehicles",
            u.len(),
            w.len()
        )));
    }
    let rates = w
        .vehicles
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (x, ui))| {
            let tan_delta = check_steering(i, ui.steering)?;
            let (sin, cos) = x.s.sin_cos();
            let yaw = x.v * cos / x.r;
            Ok(VehicleState::new(
                -x.v * sin,
                yaw,
                x.v / ring.lengths[i] * tan_delta - yaw,
                ui.accel,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FleetState::new(rates))
}

/// Time derivative of one vehicle under the Cartesian bicycle model.
pub fn cartesian_rhs(x: &CartesianState, u: &ControlInput, sigma: f64) -> Result<CartesianState> {
    let tan_delta = check_steering(0, u.steering)?;
    let (sin, cos) = x.theta.sin_cos();
    Ok(CartesianState {
        x: x.v * cos,
        y: x.v * sin,
        theta: x.v / sigma * tan_delta,
        v: u.accel,
    })
}

/// Expresses `w` in the frame rotating at the set-point angular speed.
pub fn corotating_transform(w: &FleetState, t: f64, ring: &RingConfig) -> FleetState {
    let shift = ring.omega_star * t;
    FleetState::new(
        w.vehicles
            .iter()
            .map(|x| VehicleState::new(x.r, x.phi - shift, x.s, x.v))
            .collect(),
    )
}

/// Advances the closed loop by one step from `w`, where `u0` are the
/// controls at `w`. With `stage_control` the controls are re-evaluated at
/// every intermediate stage; otherwise `u0` is held over the step.
pub fn closed_loop_step(
    w: &FleetState,
    u0: &[ControlInput],
    dt: f64,
    controller: &Controller,
    model: &Model,
    stage_control: bool,
) -> Result<FleetState> {
    let mut stage = 0;
    rk4_step(w, dt, |x| {
        stage += 1;
        if stage_control && stage > 1 {
            let u = controller.control_fleet(x, model)?;
            polar_rhs(x, &u, &model.ring)
        } else {
            polar_rhs(x, u0, &model.ring)
        }
    })
}

/// Integrates `w` under both vehicle models with the same inputs
/// `input(t, i)`, held over each step, and returns the largest state-wise
/// deviation after mapping the Cartesian states back to polar coordinates.
pub fn cross_model_deviation<F>(
    w: &FleetState,
    ring: &RingConfig,
    dt: f64,
    steps: usize,
    input: F,
) -> Result<f64>
where
    F: Fn(f64, usize) -> ControlInput,
{
    let mut polar = w.clone();
    let mut cart: Vec<CartesianState> = w.vehicles.iter().map(cartesian_from_polar).collect();
    let mut worst = 0.0f64;
    for step in 0..steps {
        let t = step as f64 * dt;
        let u: Vec<ControlInput> = (0..w.len()).map(|i| input(t, i)).collect();
        polar = rk4_step(&polar, dt, |x| polar_rhs(x, &u, ring))?;
        for (i, c) in cart.iter_mut().enumerate() {
            *c = rk4_step(c, dt, |y| cartesian_rhs(y, &u[i], ring.lengths[i]))?;
        }
        for (p, c) in polar.vehicles.iter().zip(&cart) {
            let m = polar_from_cartesian_near(c.x, c.y, c.theta, c.v, p.phi)?;
            for d in [p.r - m.r, p.phi - m.phi, p.s - m.s, p.v - m.v] {
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst)
}
