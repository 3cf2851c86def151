//! Sampling-based checks shared by the `verify` command and the test
//! suites: dissipation surveys over random states and equilibrium fixed
//! points.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clf::{dissipation_residual, Dissipation};
use crate::controllers::{ControlInput, Controller};
use crate::dynamics::cross_model_deviation;
use crate::error::{Error, Result};
use crate::geometry::{check_state_space, FleetState, RingConfig, VehicleState};
use crate::model::Model;

/// Margins used when drawing random states for dissipation checks.
///
/// The defaults keep each vehicle within half a metre of the potential-free
/// annulus, orientations below 0.14 rad, speeds 1 m/s inside the limits and
/// pairs 2 m beyond the minimum gap. Closer to the boundaries the energy and
/// its gradient grow so fast that a central difference with step `1e-6`
/// cannot resolve the derivative to `1e-6` in double precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSampler {
    pub margin_r: f64,
    pub margin_s: f64,
    pub margin_v: f64,
    pub margin_d: f64,
}

impl Default for StateSampler {
    fn default() -> Self {
        Self {
            margin_r: 9.5,
            margin_s: 0.03,
            margin_v: 1.0,
            margin_d: 2.0,
        }
    }
}

impl StateSampler {
    /// Draws a fleet clustered in an angular sector so that most pairs lie
    /// within the interaction radius.
    pub fn clustered(&self, rng: &mut ChaCha8Rng, ring: &RingConfig) -> Result<FleetState> {
        let n = ring.n();
        let (r_lo, r_hi) = (ring.r_in + self.margin_r, ring.r_out - self.margin_r);
        let s_hi = ring.theta - self.margin_s;
        let (v_lo, v_hi) = (self.margin_v, ring.v_max - self.margin_v);
        // sector wide enough for n vehicles at the mid radius, about lambda apart overall
        let sector = (n as f64 * ring.lambda / ring.r_mid()).min(TAU) * 0.6;
        let centre = rng.gen_range(0.0..TAU);
        let mut out: Vec<VehicleState> = Vec::with_capacity(n);
        for _ in 0..100_000 {
            if out.len() == n {
                break;
            }
            let x = VehicleState::new(
                rng.gen_range(r_lo..=r_hi),
                centre + rng.gen_range(-0.5 * sector..=0.5 * sector),
                rng.gen_range(-s_hi..=s_hi),
                rng.gen_range(v_lo..=v_hi),
            );
            let i = out.len();
            let clear = out.iter().enumerate().all(|(j, y)| {
                crate::geometry::weighted_distance(&x, y, ring.weight.get(i, j))
                    > ring.min_gap.get(i, j) + self.margin_d
            });
            if clear {
                out.push(x);
            }
        }
        if out.len() < n {
            return Err(Error::Packing {
                requested: n,
                placed: out.len(),
                attempts: 100_000,
            });
        }
        let w = FleetState::new(out);
        debug_assert!(check_state_space(&w, ring).is_member());
        Ok(w)
    }
}

/// Aggregate of many dissipation checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationSurvey {
    pub samples: usize,
    /// Largest `|fd - exact| / max(1, |exact|)`.
    pub worst_identity_error: f64,
    /// Largest `(fd - bound) / max(1, |bound|)`; non-positive when the bound
    /// holds everywhere.
    pub worst_bound_excess: f64,
    /// Largest `|fd - bound| / max(1, |bound|)`.
    pub worst_bound_gap: f64,
    /// Number of samples with at least one vehicle pair inside the
    /// interaction radius.
    pub interacting: usize,
}

impl DissipationSurvey {
    fn new() -> Self {
        Self {
            samples: 0,
            worst_identity_error: 0.0,
            worst_bound_excess: f64::NEG_INFINITY,
            worst_bound_gap: 0.0,
            interacting: 0,
        }
    }

    fn add(&mut self, d: &Dissipation, interacting: bool) {
        self.samples += 1;
        self.interacting += usize::from(interacting);
        let rel = |x: f64, scale: f64| x / Dissipation::scale(scale);
        self.worst_identity_error = self.worst_identity_error.max(rel((d.fd - d.exact).abs(), d.exact));
        self.worst_bound_excess = self.worst_bound_excess.max(rel(-d.margin, d.bound));
        self.worst_bound_gap = self.worst_bound_gap.max(rel(d.margin.abs(), d.bound));
    }
}

/// Runs [`dissipation_residual`] on `count` clustered random states.
pub fn dissipation_survey(
    model: &Model,
    controller: &Controller,
    sampler: &StateSampler,
    count: usize,
    seed: u64,
    h: f64,
) -> Result<DissipationSurvey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut survey = DissipationSurvey::new();
    for _ in 0..count {
        let w = sampler.clustered(&mut rng, &model.ring)?;
        let interacting = w.min_distance(&model.ring) < model.ring.lambda;
        let d = dissipation_residual(&w, model, controller, h)?;
        survey.add(&d, interacting);
    }
    Ok(survey)
}

/// An equilibrium fleet: vehicles spread evenly in angle, alternating
/// between two radii inside the potential-free band, each at the set-point
/// speed with zero orientation.
pub fn equilibrium_fleet(ring: &RingConfig, radii: (f64, f64)) -> FleetState {
    let n = ring.n();
    FleetState::new(
        (0..n)
            .map(|i| {
                let r = if i % 2 == 0 { radii.0 } else { radii.1 };
                VehicleState::new(r, TAU * i as f64 / n as f64, 0.0, ring.omega_star * r)
            })
            .collect(),
    )
}

/// Largest deviation of the controls at `w` from the equilibrium values
/// `F = 0`, `delta = atan(sigma / r)`.
pub fn equilibrium_control_error(w: &FleetState, model: &Model, controller: &Controller) -> Result<f64> {
    let u: Vec<ControlInput> = controller.control_fleet(w, model)?;
    Ok(w.vehicles
        .iter()
        .zip(&u)
        .enumerate()
        .map(|(i, (x, c))| {
            let steady = (model.ring.lengths[i] / x.r).atan();
            c.accel.abs().max((c.steering - steady).abs())
        })
        .fold(0.0, f64::max))
}

/// Held inputs for the cross-model comparison: each vehicle steers near its
/// steady-turn angle at the initial radius with small periodic perturbations
/// of both controls.
pub fn oracle_input(w0: &FleetState, ring: &RingConfig) -> impl Fn(f64, usize) -> ControlInput {
    let base: Vec<f64> = w0
        .vehicles
        .iter()
        .zip(&ring.lengths)
        .map(|(x, sigma)| (sigma / x.r).atan())
        .collect();
    move |t, i| {
        let k = i as f64 + 1.0;
        ControlInput::new(0.2 * (0.7 * k * t).sin(), base[i] + 0.02 * (1.3 * t / k).cos())
    }
}

/// Largest state-wise deviation between the polar and Cartesian models over
/// `horizon` seconds at step `dt`, driven by [`oracle_input`] from `w0`.
pub fn cross_model_check(w0: &FleetState, ring: &RingConfig, dt: f64, horizon: f64) -> Result<f64> {
    let steps = (horizon / dt).round() as usize;
    cross_model_deviation(w0, ring, dt, steps, oracle_input(w0, ring))
}
