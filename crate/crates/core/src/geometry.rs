//! Ring-road domain types, the weighted inter-vehicle distance and
//! state-space membership.
//!
//! Positions are polar: `r` is the distance from the ring centre and `phi`
//! the angular coordinate. `phi` is stored unwrapped, so it grows without
//! bound along a trajectory; every formula uses it only through sines and
//! cosines of differences.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric per-pair parameter (minimum gaps, distance weights).
///
/// The diagonal is stored but never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    n: usize,
    values: Vec<f64>,
}

impl PairMatrix {
    pub fn uniform(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
        }
    }

    /// Builds from explicit rows. Symmetry is not enforced here; see
    /// [`validate_config`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|row| row.len() != n) {
            return Err(Error::Scenario(format!(
                "pair matrix must be square ({n} rows)"
            )));
        }
        Ok(Self {
            n,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[i * self.n + j] = value;
    }

    /// Iterates over off-diagonal entries as `(i, j, value)`.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| j != i)
                .map(move |j| (i, j, self.get(i, j)))
        })
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal()
            .map(|(_, _, v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Road geometry, speed limit, set-point and per-pair parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RingConfig {
    pub r_in: f64,
    pub r_out: f64,
    pub v_max: f64,
    /// Angular speed set-point.
    pub omega_star: f64,
    /// Bound on the relative orientation `|s|`.
    pub theta: f64,
    /// Interaction radius: potentials and viscosity vanish beyond it.
    pub lambda: f64,
    /// Minimum admissible distances `L_ij`.
    pub min_gap: PairMatrix,
    /// Radial weights `p_ij` of the distance metric.
    pub weight: PairMatrix,
    /// Vehicle lengths `sigma_i`.
    pub lengths: Vec<f64>,
}

impl RingConfig {
    /// Uniform-parameter ring with `n` vehicles.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n: usize,
        r_in: f64,
        r_out: f64,
        v_max: f64,
        omega_star: f64,
        theta: f64,
        lambda: f64,
        min_gap: f64,
        weight: f64,
        length: f64,
    ) -> Self {
        Self {
            r_in,
            r_out,
            v_max,
            omega_star,
            theta,
            lambda,
            min_gap: PairMatrix::uniform(n, min_gap),
            weight: PairMatrix::uniform(n, weight),
            lengths: vec![length; n],
        }
    }

    /// The reference ring: annulus 20..60 m, speed limit 10 m/s,
    /// set-point 0.15 rad/s, orientation bound 0.17 rad, L = 6 m,
    /// lambda = 20 m, p = 5.11, vehicle length 5 m.
    pub fn reference(n: usize) -> Self {
        Self::uniform(n, 20.0, 60.0, 10.0, 0.15, 0.17, 20.0, 6.0, 5.11, 5.0)
    }

    pub fn n(&self) -> usize {
        self.lengths.len()
    }

    /// Midpoint radius `(R_in + R_out) / 2`.
    pub fn r_mid(&self) -> f64 {
        0.5 * (self.r_in + self.r_out)
    }

    pub fn validate(&self) -> Result<()> {
        validate_config(self)
    }
}

/// One vehicle in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub r: f64,
    pub phi: f64,
    /// Heading relative to the tangent of the circle through the vehicle.
    pub s: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(r: f64, phi: f64, s: f64, v: f64) -> Self {
        Self { r, phi, s, v }
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.phi.is_finite() && self.s.is_finite() && self.v.is_finite()
    }
}

/// The full fleet, ordered by vehicle index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetState {
    pub vehicles: Vec<VehicleState>,
}

impl FleetState {
    pub fn new(vehicles: Vec<VehicleState>) -> Self {
        Self { vehicles }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize, cfg: &RingConfig) -> f64 {
        weighted_distance(&self.vehicles[i], &self.vehicles[j], cfg.weight.get(i, j))
    }

    /// Smallest distance over all pairs, `+inf` for a single vehicle.
    pub fn min_distance(&self, cfg: &RingConfig) -> f64 {
        let n = self.len();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                min = min.min(self.distance(i, j, cfg));
            }
        }
        min
    }
}

/// `1 - cos x` written without cancellation.
#[inline]
pub(crate) fn one_minus_cos(x: f64) -> f64 {
    let h = (0.5 * x).sin();
    2.0 * h * h
}

/// Distance between two vehicles under radial weight `p`.
///
/// `sqrt(p (r_a - r_b)^2 + 2 r_a r_b (1 - cos(phi_a - phi_b)))`; with
/// `p = 1` this is the Euclidean distance between the two points.
pub fn weighted_distance(a: &VehicleState, b: &VehicleState, p: f64) -> f64 {
    let dr = a.r - b.r;
    (p * dr * dr + 2.0 * a.r * b.r * one_minus_cos(a.phi - b.phi)).sqrt()
}

/// A state-space constraint, identified by the vehicle(s) it concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    InnerRadius(usize),
    OuterRadius(usize),
    MinSpeed(usize),
    MaxSpeed(usize),
    Orientation(usize),
    Gap(usize, usize),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::InnerRadius(i) => write!(f, "r[{i}] > R_in"),
            Constraint::OuterRadius(i) => write!(f, "r[{i}] < R_out"),
            Constraint::MinSpeed(i) => write!(f, "v[{i}] > 0"),
            Constraint::MaxSpeed(i) => write!(f, "v[{i}] < v_max"),
            Constraint::Orientation(i) => write!(f, "|s[{i}]| < theta"),
            Constraint::Gap(i, j) => write!(f, "d[{i},{j}] > L[{i},{j}]"),
        }
    }
}

/// A violated constraint with its (non-positive) slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub margin: f64,
}

/// Outcome of [`check_state_space`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Membership {
    pub violations: Vec<Violation>,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "member");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} (margin {:e})", v.constraint, v.margin)?;
        }
        Ok(())
    }
}

/// Smallest slack of each constraint family over the whole fleet.
///
/// All fields are positive iff the fleet is in the state space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    pub orientation: f64,
    pub gap: f64,
}

impl Margins {
    pub const UNBOUNDED: Margins = Margins {
        inner_radius: f64::INFINITY,
        outer_radius: f64::INFINITY,
        min_speed: f64::INFINITY,
        max_speed: f64::INFINITY,
        orientation: f64::INFINITY,
        gap: f64::INFINITY,
    };

    pub fn of(w: &FleetState, cfg: &RingConfig) -> Self {
        let mut m = Self::UNBOUNDED;
        for (i, x) in w.vehicles.iter().enumerate() {
            m.inner_radius = m.inner_radius.min(x.r - cfg.r_in);
            m.outer_radius = m.outer_radius.min(cfg.r_out - x.r);
            m.min_speed = m.min_speed.min(x.v);
            m.max_speed = m.max_speed.min(cfg.v_max - x.v);
            m.orientation = m.orientation.min(cfg.theta - x.s.abs());
            for j in (i + 1)..w.len() {
                m.gap = m.gap.min(w.distance(i, j, cfg) - cfg.min_gap.get(i, j));
            }
        }
        m
    }

    /// Componentwise minimum, for tracking over a trajectory.
    pub fn min(self, other: Margins) -> Margins {
        Margins {
            inner_radius: self.inner_radius.min(other.inner_radius),
            outer_radius: self.outer_radius.min(other.outer_radius),
            min_speed: self.min_speed.min(other.min_speed),
            max_speed: self.max_speed.min(other.max_speed),
            orientation: self.orientation.min(other.orientation),
            gap: self.gap.min(other.gap),
        }
    }

    pub fn all_positive(&self) -> bool {
        self.as_array().iter().all(|&m| m > 0.0)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.inner_radius,
            self.outer_radius,
            self.min_speed,
            self.max_speed,
            self.orientation,
            self.gap,
        ]
    }
}

/// Checks every strict inequality of the state space, listing all that fail.
///
/// Non-finite components count as violations.
pub fn check_state_space(w: &FleetState, cfg: &RingConfig) -> Membership {
    let mut violations = Vec::new();
    let mut push = |constraint, margin: f64| {
        // `!(margin > 0)` also catches NaN.
        if !(margin > 0.0) {
            violations.push(Violation { constraint, margin });
        }
    };
    for (i, x) in w.vehicles.iter().enumerate() {
        push(Constraint::InnerRadius(i), x.r - cfg.r_in);
        push(Constraint::OuterRadius(i), cfg.r_out - x.r);
        push(Constraint::MinSpeed(i), x.v);
        push(Constraint::MaxSpeed(i), cfg.v_max - x.v);
        push(Constraint::Orientation(i), cfg.theta - x.s.abs());
    }
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            push(
                Constraint::Gap(i, j),
                w.distance(i, j, cfg) - cfg.min_gap.get(i, j),
            );
        }
    }
    Membership { violations }
}

/// Like [`check_state_space`] but as a `Result`; also checks the vehicle count.
pub fn ensure_member(w: &FleetState, cfg: &RingConfig) -> Result<()> {
    if w.len() != cfg.n() {
        return Err(Error::Scenario(format!(
            "fleet has {} vehicles, configuration expects {}",
            w.len(),
            cfg.n()
        )));
    }
    let membership = check_state_space(w, cfg);
    if membership.is_member() {
        Ok(())
    } else {
        Err(Error::OutsideStateSpace(membership))
    }
}

/// A failed configuration inequality with both sides evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub condition: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConfigIssue {
    fn new(condition: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            condition: condition.into(),
            lhs,
            rhs,
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} does not hold (lhs = {}, rhs = {})",
            self.condition, self.lhs, self.rhs
        )
    }
}

/// Collects every violated inequality of `cfg`.
pub fn config_issues(cfg: &RingConfig) -> Vec<ConfigIssue> {
    let mut issues = Vec::new();
    let mut require = |ok: bool, condition: &str, lhs: f64, rhs: f64| {
        if !ok {
            issues.push(ConfigIssue::new(condition, lhs, rhs));
        }
    };
    let n = cfg.n();

    require(n >= 1, "n >= 1", n as f64, 1.0);
    require(cfg.r_in > 0.0, "R_in > 0", cfg.r_in, 0.0);
    require(cfg.r_out > cfg.r_in, "R_out > R_in", cfg.r_out, cfg.r_in);
    require(cfg.v_max > 0.0, "v_max > 0", cfg.v_max, 0.0);
    require(cfg.omega_star > 0.0, "omega_star > 0", cfg.omega_star, 0.0);
    let omega_cap = cfg.v_max / cfg.r_out;
    require(
        cfg.omega_star < omega_cap,
        "omega_star < v_max/R_out",
        cfg.omega_star,
        omega_cap,
    );
    require(cfg.theta > 0.0, "theta > 0", cfg.theta, 0.0);
    require(cfg.theta < FRAC_PI_2, "theta < pi/2", cfg.theta, FRAC_PI_2);
    let heading_cap = cfg.r_out * cfg.omega_star / cfg.v_max;
    require(
        cfg.theta.cos() > heading_cap,
        "cos(theta) > R_out*omega_star/v_max",
        cfg.theta.cos(),
        heading_cap,
    );

    for (name, m) in [("L", &cfg.min_gap), ("p", &cfg.weight)] {
        if m.len() != n {
            require(false, &format!("{name} is {n}x{n}"), m.len() as f64, n as f64);
            continue;
        }
        for (i, j, value) in m.off_diagonal() {
            require(value > 0.0, &format!("{name}[{i},{j}] > 0"), value, 0.0);
            if i < j {
                let mirror = m.get(j, i);
                require(
                    value == mirror,
                    &format!("{name}[{i},{j}] == {name}[{j},{i}]"),
                    value,
                    mirror,
                );
            }
        }
    }
    if cfg.min_gap.len() == n && n > 1 {
        let max_gap = cfg.min_gap.max_off_diagonal();
        require(cfg.lambda > max_gap, "lambda > max L", cfg.lambda, max_gap);
    }
    for (i, &sigma) in cfg.lengths.iter().enumerate() {
        require(sigma > 0.0, &format!("sigma[{i}] > 0"), sigma, 0.0);
    }
    issues
}

/// Accepts iff every configuration invariant holds.
///
/// Weights `p_ij < 1` are accepted with a logged warning.
pub fn validate_config(cfg: &RingConfig) -> Result<()> {
    let issues = config_issues(cfg);
    if !issues.is_empty() {
        return Err(Error::InvalidConfig(issues));
    }
    if cfg.weight.off_diagonal().any(|(_, _, p)| p < 1.0) {
        log::warn!("some distance weights p_ij are below 1");
    }
    Ok(())
}

/// Cartesian pose and speed of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    /// Heading with respect to the x axis.
    pub theta: f64,
    pub v: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Converts a Cartesian pose to polar form with `phi` in `(-pi, pi]`.
pub fn polar_from_cartesian(x: f64, y: f64, theta: f64, v: f64) -> Result<VehicleState> {
    polar_from_cartesian_near(x, y, theta, v, 0.0)
}

/// Like [`polar_from_cartesian`] but continues `phi` to the branch closest
/// to `phi_ref`, so an unwrapped angle can be recovered along a trajectory.
pub fn polar_from_cartesian_near(
    x: f64,
    y: f64,
    theta: f64,
    v: f64,
    phi_ref: f64,
) -> Result<VehicleState> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::Origin);
    }
    let r = x.hypot(y);
    let base = y.atan2(x);
    let phi = base + 2.0 * PI * ((phi_ref - base) / (2.0 * PI)).round();
    let s = wrap_angle(theta - phi - FRAC_PI_2);
    Ok(VehicleState { r, phi, s, v })
}

pub fn cartesian_from_polar(state: &VehicleState) -> CartesianState {
    let (sin, cos) = state.phi.sin_cos();
    CartesianState {
        x: state.r * cos,
        y: state.r * sin,
        theta: state.s + state.phi + FRAC_PI_2,
        v: state.v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at(r: f64, phi: f64) -> VehicleState {
        VehicleState::new(r, phi, 0.0, 5.0)
    }

    #[test]
    fn distance_examples() {
        let a = at(30.0, 1.0);
        assert_eq!(weighted_distance(&a, &a, 5.11), 0.0);
        assert_relative_eq!(
            weighted_distance(&at(30.0, PI), &at(30.0, 0.0), 1.0),
            60.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            weighted_distance(&at(40.0, 0.3), &at(30.0, 0.3), 5.11),
            511f64.sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(511f64.sqrt(), 22.6053, epsilon = 1e-4);
    }

    #[test]
    fn reference_config_validates() {
        let cfg = RingConfig::reference(10);
        validate_config(&cfg).unwrap();
        assert!(cfg.theta.cos() > 0.9);
        assert_relative_eq!(cfg.theta.cos(), 0.98558, epsilon = 1e-5);
    }

    #[test]
    fn wide_orientation_bound_is_rejected() {
        let mut cfg = RingConfig::reference(10);
        cfg.theta = 0.48;
        let issues = config_issues(&cfg);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].condition, "cos(theta) > R_out*omega_star/v_max");
        assert_relative_eq!(issues[0].lhs, 0.8870, epsilon = 1e-4);
        assert_relative_eq!(issues[0].rhs, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn set_point_at_cap_is_rejected() {
        let mut cfg = RingConfig::reference(10);
        cfg.omega_star = cfg.v_max / cfg.r_out;
        let issues = config_issues(&cfg);
        assert!(issues
            .iter()
            .any(|i| i.condition == "omega_star < v_max/R_out"));
        // cos(theta) > 1 * cos(theta) can no longer hold either
        assert!(issues
            .iter()
            .any(|i| i.condition == "cos(theta) > R_out*omega_star/v_max"));
        assert!(matches!(
            validate_config(&cfg),
            Err(Error::InvalidConfig(list)) if list.len() == issues.len()
        ));
    }

    #[test]
    fn asymmetric_and_short_range_configs_are_rejected() {
        let mut cfg = RingConfig::reference(3);
        cfg.min_gap.set(0, 1, 7.0);
        cfg.lambda = 6.5;
        let issues = config_issues(&cfg);
        let names: Vec<_> = issues.iter().map(|i| i.condition.as_str()).collect();
        assert!(names.contains(&"L[0,1] == L[1,0]"));
        assert!(names.contains(&"lambda > max L"));
    }

    #[test]
    fn membership_examples() {
        let cfg = RingConfig::reference(1);
        let single = FleetState::new(vec![VehicleState::new(40.0, 0.0, 0.0, 5.0)]);
        assert!(check_state_space(&single, &cfg).is_member());

        let at_limit = FleetState::new(vec![VehicleState::new(40.0, 0.0, 0.0, 10.0)]);
        let m = check_state_space(&at_limit, &cfg);
        assert_eq!(m.violations.len(), 1);
        assert_eq!(m.violations[0].constraint, Constraint::MaxSpeed(0));
        assert_eq!(m.violations[0].margin, 0.0);

        // two vehicles on the same circle, 5.9 m apart
        let mut cfg2 = RingConfig::reference(2);
        cfg2.weight = PairMatrix::uniform(2, 1.0);
        let dphi = 2.0 * (5.9f64 / 80.0).asin();
        let close = FleetState::new(vec![
            VehicleState::new(40.0, 0.0, 0.0, 5.0),
            VehicleState::new(40.0, dphi, 0.0, 5.0),
        ]);
        assert_relative_eq!(close.distance(0, 1, &cfg2), 5.9, epsilon = 1e-12);
        let m = check_state_space(&close, &cfg2);
        assert_eq!(m.violations.len(), 1);
        assert_eq!(m.violations[0].constraint, Constraint::Gap(0, 1));
        assert_relative_eq!(m.violations[0].margin, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn nan_is_never_a_member() {
        let cfg = RingConfig::reference(1);
        let w = FleetState::new(vec![VehicleState::new(f64::NAN, 0.0, 0.0, 5.0)]);
        assert!(!check_state_space(&w, &cfg).is_member());
    }

    #[test]
    fn polar_cartesian_examples() {
        let p = polar_from_cartesian(40.0, 0.0, FRAC_PI_2, 6.0).unwrap();
        assert_eq!(p, VehicleState::new(40.0, 0.0, 0.0, 6.0));

        let c = cartesian_from_polar(&VehicleState::new(30.0, FRAC_PI_2, 0.0, 1.0));
        assert_relative_eq!(c.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(c.y, 30.0, epsilon = 1e-12);
        assert_relative_eq!(c.theta, PI, epsilon = 1e-12);

        assert!(matches!(
            polar_from_cartesian(0.0, 0.0, 0.0, 1.0),
            Err(Error::Origin)
        ));
    }

    #[test]
    fn unwrapping_follows_the_reference_branch() {
        let state = VehicleState::new(35.0, 13.0, 0.05, 4.0);
        let c = cartesian_from_polar(&state);
        let back = polar_from_cartesian_near(c.x, c.y, c.theta, c.v, 12.9).unwrap();
        assert_relative_eq!(back.phi, 13.0, epsilon = 1e-12);
        assert_relative_eq!(back.s, 0.05, epsilon = 1e-12);
    }
}
