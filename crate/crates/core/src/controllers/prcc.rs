//! Pseudo-relativistic cruise controller.

use super::{check_own, coupling, ensure_positive, penalty_weight, ControlInput, Measurements};
use crate::error::Result;
use crate::geometry::VehicleState;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrccTerms {
    /// Speed-error weight `q(r, s, v)`; the acceleration is scaled by `1/q`.
    pub q: f64,
    /// Steering denominator `gamma(r, s, v)`.
    pub gamma: f64,
    /// Coupling of acceleration into the lateral equation, `zeta(s, v)`.
    pub zeta: f64,
    /// Radial Lyapunov-gradient aggregate `Z_i`.
    pub z: f64,
    pub phi: f64,
    pub g: f64,
    pub m: f64,
}

pub fn prcc_terms<M: Measurements>(i: usize, meas: &M, model: &Model) -> Result<PrccTerms> {
    let ring = &model.ring;
    let p = &model.params;
    let x = meas.own(i);
    check_own(i, &x, ring)?;
    let c = coupling(i, meas, model)?;

    let (sin, cos) = x.s.sin_cos();
    let w = ring.omega_star;
    let vm = ring.v_max;
    let slack = vm - x.v;
    let rate_error = x.v * cos / x.r - w;
    let u = model.potentials.boundary(i, x.r)?;

    let q = (vm * x.v * cos - 2.0 * x.r * x.v * w + x.r * w * vm)
        / (2.0 * x.r * slack * slack * x.v * x.v);
    let gamma = penalty_weight(x.s, model)
        + x.v * cos / slack * (p.b - 1.0 / (x.r * x.r))
        + w / (x.r * slack);
    let zeta = p.b * vm * sin / (2.0 * slack * slack * x.v);
    let z = rate_error * cos / (slack * x.r * x.r) - u.d1 - c.radial;
    ensure_positive("q", i, q)?;
    ensure_positive("gamma", i, gamma)?;

    Ok(PrccTerms {
        q,
        gamma,
        zeta,
        z,
        phi: c.phi,
        g: c.g,
        m: c.m,
    })
}

pub fn prcc_law(i: usize, x: &VehicleState, t: &PrccTerms, model: &Model) -> ControlInput {
    let ring = &model.ring;
    let sigma = ring.lengths[i];
    let (sin, cos) = x.s.sin_cos();
    let rate_error = x.v * cos / x.r - ring.omega_star;

    let accel = -(model.shaping.f1(rate_error).value + ring.omega_star * (t.phi - t.g)) / t.q;
    // `+ (zeta F + Z) v`: the sign that makes dH_R/dt = -e f1(e) - sin f2(sin) - viscous terms
    let lateral = model.shaping.f2(sin).value + (t.zeta * accel + t.z) * x.v - t.m;
    let tan_delta = sigma * cos / x.r - sigma / (t.gamma * x.v) * lateral;
    ControlInput::new(accel, tan_delta.atan())
}

pub fn prcc_control<M: Measurements>(i: usize, meas: &M, model: &Model) -> Result<ControlInput> {
    let terms = prcc_terms(i, meas, model)?;
    Ok(prcc_law(i, &meas.own(i), &terms, model))
}
