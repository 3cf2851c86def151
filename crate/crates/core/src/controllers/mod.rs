//! Decentralized cruise controllers.
//!
//! Each vehicle computes its acceleration `F` and steering angle `delta`
//! from its own state, a range sensor reporting vehicles within the
//! interaction radius, their relative positions and (viscous variants
//! only) their speeds and orientations. Controllers read the fleet through
//! [`Measurements`] so that [`audit`] can record exactly what was used.

pub mod audit;
mod ncc;
mod prcc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    check_state_space, one_minus_cos, weighted_distance, Constraint, FleetState, Membership,
    RingConfig, VehicleState, Violation,
};
use crate::model::Model;

pub use audit::{permitted_information_audit, AccessReport, Field};
pub use ncc::{ncc_control, ncc_law, ncc_terms, NccTerms};
pub use prcc::{prcc_control, prcc_law, prcc_terms, PrccTerms};

/// Acceleration and steering angle of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub accel: f64,
    pub steering: f64,
}

impl ControlInput {
    pub fn new(accel: f64, steering: f64) -> Self {
        Self { accel, steering }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.steering.is_finite()
    }
}

/// What a vehicle can observe.
pub trait Measurements {
    /// Own full state.
    fn own(&self, i: usize) -> VehicleState;
    /// Range sensor: vehicles within the interaction radius of `i`, with
    /// their distances, in increasing index order.
    fn neighbors(&self, i: usize) -> Vec<(usize, f64)>;
    /// `(r, phi)` of vehicle `j`.
    fn position(&self, j: usize) -> (f64, f64);
    /// `(s, v)` of vehicle `j`.
    fn motion(&self, j: usize) -> (f64, f64);
}

/// Unrestricted view of a fleet snapshot.
#[derive(Debug, Clone, Copy)]
pub struct FleetView<'a> {
    pub fleet: &'a FleetState,
    pub ring: &'a RingConfig,
}

impl<'a> FleetView<'a> {
    pub fn new(fleet: &'a FleetState, ring: &'a RingConfig) -> Self {
        Self { fleet, ring }
    }
}

impl Measurements for FleetView<'_> {
    fn own(&self, i: usize) -> VehicleState {
        self.fleet.vehicles[i]
    }

    fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        let me = &self.fleet.vehicles[i];
        self.fleet
            .vehicles
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .filter_map(|(j, other)| {
                let d = weighted_distance(me, other, self.ring.weight.get(i, j));
                (d <= self.ring.lambda).then_some((j, d))
            })
            .collect()
    }

    fn position(&self, j: usize) -> (f64, f64) {
        let x = &self.fleet.vehicles[j];
        (x.r, x.phi)
    }

    fn motion(&self, j: usize) -> (f64, f64) {
        let x = &self.fleet.vehicles[j];
        (x.s, x.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Newtonian kinetic energy, state-dependent speed gain.
    Ncc,
    /// Pseudo-relativistic kinetic energy.
    Prcc,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Ncc => "ncc",
            Family::Prcc => "prcc",
        })
    }
}

/// Deliberate transcription faults, used as negative controls for the
/// dissipation certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Negates the radial gradient term (`Lambda` / `Z`) in the steering law.
    FlipRadialGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Controller {
    pub family: Family,
    pub fault: Option<Fault>,
}

impl Controller {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn control<M: Measurements>(&self, i: usize, meas: &M, model: &Model) -> Result<ControlInput> {
        let own = meas.own(i);
        let flip = self.fault == Some(Fault::FlipRadialGradient);
        match self.family {
            Family::Ncc => {
                let mut terms = ncc_terms(i, meas, model)?;
                if flip {
                    terms.lambda = -terms.lambda;
                }
                Ok(ncc_law(i, &own, &terms, model))
            }
            Family::Prcc => {
                let mut terms = prcc_terms(i, meas, model)?;
                if flip {
                    terms.z = -terms.z;
                }
                Ok(prcc_law(i, &own, &terms, model))
            }
        }
    }

    /// Controls for every vehicle, in index order.
    pub fn control_fleet(&self, w: &FleetState, model: &Model) -> Result<Vec<ControlInput>> {
        if w.len() != model.n() {
            return Err(Error::Scenario(format!(
                "fleet has {} vehicles, model expects {}",
                w.len(),
                model.n()
            )));
        }
        let view = FleetView::new(w, &model.ring);
        (0..w.len()).map(|i| self.control(i, &view, model)).collect()
    }
}

/// Neighbour sums shared by both controller families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coupling {
    /// Tangential potential force `Phi_i`.
    pub phi: f64,
    /// Viscous angular-speed coupling `G_i`.
    pub g: f64,
    /// Viscous orientation coupling `M_i`.
    pub m: f64,
    /// `sum_j (p_ij (r_i - r_j) + r_j (1 - cos dphi)) V'_ij / d_ij`.
    pub radial: f64,
}

fn outside(constraint: Constraint, margin: f64) -> Error {
    Error::OutsideStateSpace(Membership {
        violations: vec![Violation { constraint, margin }],
    })
}

/// Rejects an own state outside the per-vehicle bounds.
pub(crate) fn check_own(i: usize, x: &VehicleState, ring: &RingConfig) -> Result<()> {
    let single = FleetState::new(vec![*x]);
    let mut membership = check_state_space(&single, ring);
    if membership.is_member() {
        return Ok(());
    }
    for v in &mut membership.violations {
        v.constraint = match v.constraint {
            Constraint::InnerRadius(_) => Constraint::InnerRadius(i),
            Constraint::OuterRadius(_) => Constraint::OuterRadius(i),
            Constraint::MinSpeed(_) => Constraint::MinSpeed(i),
            Constraint::MaxSpeed(_) => Constraint::MaxSpeed(i),
            Constraint::Orientation(_) => Constraint::Orientation(i),
            other => other,
        };
    }
    Err(Error::OutsideStateSpace(membership))
}

pub(crate) fn coupling<M: Measurements>(i: usize, meas: &M, model: &Model) -> Result<Coupling> {
    let ring = &model.ring;
    let me = meas.own(i);
    let omega_star = ring.omega_star;
    let own_rate = me.v * me.s.cos() / me.r;
    let own_sin = me.s.sin();
    let (g1_own, g2_own) = (model.shaping.g1(own_rate).value, model.shaping.g2(own_sin).value);

    let mut out = Coupling::default();
    let mut tangential = 0.0;
    for (j, d) in meas.neighbors(i) {
        let l = ring.min_gap.get(i, j);
        if !(d > l) {
            return Err(outside(Constraint::Gap(i.min(j), i.max(j)), d - l));
        }
        let (rj, phij) = meas.position(j);
        let dphi = me.phi - phij;
        let dv = model.potentials.pair(i, j, d, l)?.d1 / d;
        tangential += dv * rj * dphi.sin();
        out.radial += (ring.weight.get(i, j) * (me.r - rj) + rj * one_minus_cos(dphi)) * dv;

        let kappa = model.potentials.viscosity(i, j, d, l)?.value;
        if kappa != 0.0 {
            let (sj, vj) = meas.motion(j);
            let rate = vj * sj.cos() / rj;
            out.g += kappa * (model.shaping.g1(rate).value - g1_own);
            out.m += kappa * (model.shaping.g2(sj.sin()).value - g2_own);
        }
    }
    out.phi = me.r / omega_star * tangential;
    out.g /= omega_star;
    Ok(out)
}

/// `A / (cos s - cos theta)^2`, the orientation-penalty curvature.
#[inline]
pub(crate) fn penalty_weight(s: f64, model: &Model) -> f64 {
    let gap = s.cos() - model.ring.theta.cos();
    model.params.a_weight / (gap * gap)
}

pub(crate) fn ensure_positive(quantity: &'static str, vehicle: usize, value: f64) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            quantity,
            vehicle,
            value,
        })
    }
}
