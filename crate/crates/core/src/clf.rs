//! Control Lyapunov functions and the numerical dissipation certificate.
//!
//! `H` is the Newtonian energy used by the NCC family and `H_R` its
//! pseudo-relativistic variant used by the PRCC family. The time derivative
//! along the closed loop is measured by central differences of the function
//! along short integrations of the held-input vector field, and compared to
//! the closed-form dissipation of each controller.

use crate::controllers::{ncc_terms, Controller, Family, FleetView};
use crate::dynamics::{polar_rhs, rk4_step};
use crate::error::{Error, Result};
use crate::geometry::{ensure_member, one_minus_cos, FleetState, VehicleState};
use crate::model::Model;

/// A Lyapunov-function value split into its non-negative parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClfValue {
    pub total: f64,
    /// Angular-speed error and lateral kinetic terms.
    pub kinetic: f64,
    pub potential_boundary: f64,
    pub potential_pairwise: f64,
    pub orientation_penalty: f64,
}

impl ClfValue {
    fn from_parts(kinetic: f64, boundary: f64, pairwise: f64, penalty: f64) -> Self {
        Self {
            total: kinetic + boundary + pairwise + penalty,
            kinetic,
            potential_boundary: boundary,
            potential_pairwise: pairwise,
            orientation_penalty: penalty,
        }
    }
}

fn rate_error(x: &VehicleState, omega_star: f64) -> f64 {
    x.v * x.s.cos() / x.r - omega_star
}

/// Potential and orientation terms shared by both functions.
fn common_terms(w: &FleetState, model: &Model) -> Result<(f64, f64, f64)> {
    let ring = &model.ring;
    let cos_theta = ring.theta.cos();
    let mut boundary = 0.0;
    let mut penalty = 0.0;
    for (i, x) in w.vehicles.iter().enumerate() {
        boundary += model.potentials.boundary(i, x.r)?.value;
        // 1/(cos s - cos T) - 1/(1 - cos T), rearranged to avoid cancellation near s = 0
        penalty += one_minus_cos(x.s) / ((x.s.cos() - cos_theta) * (1.0 - cos_theta));
    }
    let mut pairwise = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            if i != j {
                let d = w.distance(i, j, ring);
                pairwise += model.potentials.pair(i, j, d, ring.min_gap.get(i, j))?.value;
            }
        }
    }
    Ok((boundary, 0.5 * pairwise, model.params.a_weight * penalty))
}

/// The Newtonian energy `H`.
pub fn newtonian_energy(w: &FleetState, model: &Model) -> Result<ClfValue> {
    ensure_member(w, &model.ring)?;
    let b = model.params.b;
    let kinetic: f64 = w
        .vehicles
        .iter()
        .map(|x| {
            let e = rate_error(x, model.ring.omega_star);
            let lateral = x.v * x.s.sin();
            0.5 * e * e + 0.5 * b * lateral * lateral
        })
        .sum();
    let (boundary, pairwise, penalty) = common_terms(w, model)?;
    Ok(ClfValue::from_parts(kinetic, boundary, pairwise, penalty))
}

/// The pseudo-relativistic energy `H_R`, whose kinetic term blows up as a
/// speed approaches zero or the speed limit.
pub fn relativistic_energy(w: &FleetState, model: &Model) -> Result<ClfValue> {
    ensure_member(w, &model.ring)?;
    let b = model.params.b;
    let v_max = model.ring.v_max;
    let kinetic: f64 = w
        .vehicles
        .iter()
        .map(|x| {
            let e = rate_error(x, model.ring.omega_star);
            let lateral = x.v * x.s.sin();
            0.5 * (e * e + b * lateral * lateral) / ((v_max - x.v) * x.v)
        })
        .sum();
    let (boundary, pairwise, penalty) = common_terms(w, model)?;
    Ok(ClfValue::from_parts(kinetic, boundary, pairwise, penalty))
}

/// The Lyapunov function certifying `family`.
pub fn energy(family: Family, w: &FleetState, model: &Model) -> Result<ClfValue> {
    match family {
        Family::Ncc => newtonian_energy(w, model),
        Family::Prcc => relativistic_energy(w, model),
    }
}

/// Outcome of one dissipation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// Derivative of the Lyapunov function along the flow: the central
    /// differences with steps `h` and `2h`, Richardson-extrapolated.
    pub fd: f64,
    /// The plain central difference with step `2h`.
    pub fd_coarse: f64,
    /// Closed-form time derivative implied by the controller design,
    /// including the state-dependent gain and viscous terms.
    pub exact: f64,
    /// The gain-independent upper bound on the derivative.
    pub bound: f64,
    /// `bound - fd`; negative beyond tolerance means the certificate fails.
    pub margin: f64,
}

impl Dissipation {
    /// Relative tolerance scale `max(1, |x|)`.
    pub fn scale(x: f64) -> f64 {
        x.abs().max(1.0)
    }

    /// `fd <= bound` within `tol * max(1, |bound|)`.
    pub fn respects_bound(&self, tol: f64) -> bool {
        self.margin >= -tol * Self::scale(self.bound)
    }

    /// `fd == exact` within `tol * max(1, |exact|)`.
    pub fn matches_identity(&self, tol: f64) -> bool {
        (self.fd - self.exact).abs() <= tol * Self::scale(self.exact)
    }
}

/// Default finite-difference step for [`dissipation_residual`].
pub const FD_STEP: f64 = 1e-6;

/// Relative disagreement between the `h` and `2h` central differences above
/// which the step is reported as unresolved.
pub const RICHARDSON_TOLERANCE: f64 = 1e-4;

/// Measures the closed-loop derivative of the Lyapunov function at `w` and
/// compares it to the analytic dissipation.
///
/// The state is advanced by single Runge-Kutta steps of `+-h` and `+-2h`
/// with the controls held at their value at `w`. States whose held-input flow
/// is too fast for `h` to resolve are reported as [`Error::Unresolved`].
pub fn dissipation_residual(
    w: &FleetState,
    model: &Model,
    controller: &Controller,
    h: f64,
) -> Result<Dissipation> {
    ensure_member(w, &model.ring)?;
    let family = controller.family;
    let u = controller.control_fleet(w, model)?;
    let flow = |dt: f64| -> Result<f64> {
        let next = rk4_step(w, dt, |x| polar_rhs(x, &u, &model.ring))?;
        Ok(energy(family, &next, model)?.total)
    };
    let central = |k: f64| -> Result<f64> { Ok((flow(k * h)? - flow(-k * h)?) / (2.0 * k * h)) };
    let (fine, fd_coarse) = (central(1.0)?, central(2.0)?);
    // rounding in the differenced energies, amplified by 1/h
    let noise = 64.0 * energy(family, w, model)?.total.max(1.0) * f64::EPSILON / h;
    if (fine - fd_coarse).abs() > RICHARDSON_TOLERANCE * Dissipation::scale(fine) + noise {
        return Err(Error::Unresolved {
            step: h,
            coarse: fd_coarse,
            fine,
        });
    }
    // both estimates carry the same h^2 error term
    let fd = (4.0 * fine - fd_coarse) / 3.0;

    let (exact, bound) = analytic_dissipation(w, model, family)?;
    Ok(Dissipation {
        fd,
        fd_coarse,
        exact,
        bound,
        margin: bound - fd,
    })
}

/// `(exact, bound)` for the closed loop of `family` at `w`.
fn analytic_dissipation(w: &FleetState, model: &Model, family: Family) -> Result<(f64, f64)> {
    let ring = &model.ring;
    let p = &model.params;
    let shaping = &model.shaping;
    let omega_star = ring.omega_star;

    // Viscous exchange: sum_i sum_j kappa_ij [(g1(W_j) - g1(W_i)) e_i + (g2(sin s_j) - g2(sin s_i)) sin s_i]
    let mut viscous = 0.0;
    for (i, xi) in w.vehicles.iter().enumerate() {
        let wi = xi.v * xi.s.cos() / xi.r;
        let si = xi.s.sin();
        for (j, xj) in w.vehicles.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = w.distance(i, j, ring);
            let kappa = model.potentials.viscosity(i, j, d, ring.min_gap.get(i, j))?.value;
            if kappa == 0.0 {
                continue;
            }
            let wj = xj.v * xj.s.cos() / xj.r;
            let sj = xj.s.sin();
            viscous += kappa
                * ((shaping.g1(wj).value - shaping.g1(wi).value) * (wi - omega_star)
                    + (shaping.g2(sj).value - shaping.g2(si).value) * si);
        }
    }

    match family {
        Family::Ncc => {
            let view = FleetView::new(w, ring);
            let mut lateral = 0.0;
            let mut longitudinal = 0.0;
            let mut gained = 0.0;
            for (i, x) in w.vehicles.iter().enumerate() {
                let e = rate_error(x, omega_star);
                let sin = x.s.sin();
                lateral += p.mu2 * sin * sin;
                longitudinal += p.mu1 * e * e;
                gained += ncc_terms(i, &view, model)?.k * e * e;
            }
            Ok((-lateral - gained + viscous, -lateral - longitudinal))
        }
        Family::Prcc => {
            let mut shaped = 0.0;
            for x in &w.vehicles {
                let e = rate_error(x, omega_star);
                let sin = x.s.sin();
                shaped += e * shaping.f1(e).value + sin * shaping.f2(sin).value;
            }
            Ok((-shaped + viscous, -shaped))
        }
    }
}
