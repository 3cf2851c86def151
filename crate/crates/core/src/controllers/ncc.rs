//! Newtonian cruise controller.

use super::{check_own, coupling, ensure_positive, penalty_weight, ControlInput, Measurements};
use crate::error::Result;
use crate::geometry::VehicleState;
use crate::model::Model;

/// Intermediate quantities of the Newtonian law for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NccTerms {
    /// Steering denominator `a(r, s, v)`.
    pub a: f64,
    /// Radial Lyapunov-gradient aggregate `Lambda_i`.
    pub lambda: f64,
    pub phi: f64,
    pub g: f64,
    pub m: f64,
    /// State-dependent speed gain `k_i`.
    pub k: f64,
}

pub fn ncc_terms<M: Measurements>(i: usize, meas: &M, model: &Model) -> Result<NccTerms> {
    let ring = &model.ring;
    let p = &model.params;
    let x = meas.own(i);
    check_own(i, &x, ring)?;
    let c = coupling(i, meas, model)?;

    let cos = x.s.cos();
    let w = ring.omega_star;
    let rate_error = x.v * cos / x.r - w;
    let u = model.potentials.boundary(i, x.r)?;

    let lambda = rate_error * x.v * cos / (x.r * x.r) - u.d1 - c.radial;
    let a = (p.b - 1.0 / (x.r * x.r)) * x.v * x.v * cos + w * x.v / x.r + penalty_weight(x.s, model);
    ensure_positive("a", i, a)?;

    let net = c.phi - c.g;
    let lead = ring.v_max * cos;
    let k = p.mu1 + net + model.shaping.f(-lead / (lead - x.r * w) * net).value;

    Ok(NccTerms {
        a,
        lambda,
        phi: c.phi,
        g: c.g,
        m: c.m,
        k,
    })
}

/// Evaluates the Newtonian law from precomputed terms.
pub fn ncc_law(i: usize, x: &VehicleState, t: &NccTerms, model: &Model) -> ControlInput {
    let ring = &model.ring;
    let p = &model.params;
    let sigma = ring.lengths[i];
    let (sin, cos) = x.s.sin_cos();
    let target = x.r * ring.omega_star / cos;

    let accel = -t.k * (x.v - target) - target * (t.phi - t.g);
    let lateral = p.mu2 * sin + (p.b * accel * sin + t.lambda) * x.v - t.m;
    let tan_delta = sigma * cos / x.r - sigma / (x.v * t.a) * lateral;
    ControlInput::new(accel, tan_delta.atan())
}

pub fn ncc_control<M: Measurements>(i: usize, meas: &M, model: &Model) -> Result<ControlInput> {
    let terms = ncc_terms(i, meas, model)?;
    Ok(ncc_law(i, &meas.own(i), &terms, model))
}
