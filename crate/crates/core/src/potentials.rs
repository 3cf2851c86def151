//! Repulsive potentials, viscosity kernel and gain-shaping functions.
//!
//! Each function returns a [`Jet`] holding its value and first two
//! derivatives in closed form; the controllers consume the derivatives
//! directly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConfigIssue, RingConfig};

/// Parameters of the potential, viscosity and shaping families and the
/// Lyapunov-function weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// Scale of the vehicle-repulsive potential.
    pub q1: f64,
    /// Scale of the viscosity kernel; zero gives the inviscid controllers.
    pub q2: f64,
    /// Half-width of the potential-free annulus around the mid radius.
    pub c: f64,
    /// Smoothing width of the NCC gain-shaping function.
    pub epsilon: f64,
    /// Longitudinal gain.
    pub mu1: f64,
    /// Lateral gain.
    pub mu2: f64,
    /// Weight of the orientation penalty.
    #[serde(rename = "a")]
    pub a_weight: f64,
    /// Weight of the lateral kinetic term; must exceed `1 / R_in^2`.
    pub b: f64,
}

impl PotentialConfig {
    /// Reference gains for the Newtonian controller (`q2` as given).
    pub fn reference_ncc(q2: f64) -> Self {
        Self {
            q1: 3e-3,
            q2,
            c: 10.0,
            epsilon: 0.2,
            mu1: 0.3,
            mu2: 100.0,
            a_weight: 0.5,
            b: 1.0,
        }
    }

    /// Reference gains for the pseudo-relativistic controller.
    pub fn reference_prcc(q2: f64) -> Self {
        Self {
            q1: 3e-5,
            ..Self::reference_ncc(q2)
        }
    }

    pub fn issues(&self, ring: &RingConfig) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let mut require = |ok: bool, condition: &str, lhs: f64, rhs: f64| {
            if !ok {
                issues.push(ConfigIssue {
                    condition: condition.to_owned(),
                    lhs,
                    rhs,
                });
            }
        };
        require(self.q1 > 0.0, "q1 > 0", self.q1, 0.0);
        require(self.q2 >= 0.0, "q2 >= 0", self.q2, 0.0);
        require(self.c > 0.0, "c > 0", self.c, 0.0);
        let half_width = 0.5 * (ring.r_out - ring.r_in);
        require(self.c < half_width, "c < (R_out - R_in)/2", self.c, half_width);
        require(self.epsilon > 0.0, "epsilon > 0", self.epsilon, 0.0);
        require(self.mu1 > 0.0, "mu1 > 0", self.mu1, 0.0);
        require(self.mu2 > 0.0, "mu2 > 0", self.mu2, 0.0);
        require(self.a_weight > 0.0, "A > 0", self.a_weight, 0.0);
        let b_min = 1.0 / (ring.r_in * ring.r_in);
        require(self.b > b_min, "b > 1/R_in^2", self.b, b_min);
        issues
    }

    pub fn validate(&self, ring: &RingConfig) -> Result<()> {
        let issues = self.issues(ring);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }
}

/// Value with first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        value: 0.0,
        d1: 0.0,
        d2: 0.0,
    };

    pub fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    pub fn linear(slope: f64, x: f64) -> Self {
        Self::new(slope * x, slope, 0.0)
    }
}

/// `q1 (lambda - d)^3 / (d - L)` on `(L, lambda]`, zero beyond.
pub fn vehicle_potential(d: f64, l: f64, lambda: f64, q1: f64) -> Result<Jet> {
    if !(d > l) {
        return Err(Error::Domain {
            function: "vehicle potential",
            argument: d,
        });
    }
    if d >= lambda {
        return Ok(Jet::ZERO);
    }
    let u = lambda - d;
    let w = d - l;
    let (uw, uw2) = (u / w, (u / w) * (u / w));
    Ok(Jet::new(
        q1 * u * u * uw,
        -q1 * u * (3.0 * uw + uw2),
        q1 * (6.0 * uw + 6.0 * uw2 + 2.0 * uw2 * uw),
    ))
}

/// Zero on the free annulus `|r - R_m| <= c`, otherwise
/// `(r - R_m - c)^3 (r - R_m + c)^3 / ((r - R_in)(R_out - r))`.
pub fn boundary_potential(r: f64, r_in: f64, r_out: f64, c: f64) -> Result<Jet> {
    if !(r > r_in && r < r_out) {
        return Err(Error::Domain {
            function: "boundary potential",
            argument: r,
        });
    }
    let x = r - 0.5 * (r_in + r_out);
    if x.abs() <= c {
        return Ok(Jet::ZERO);
    }
    let e = x * x - c * c;
    let num = e * e * e;
    let num1 = 6.0 * x * e * e;
    let num2 = 6.0 * e * e + 24.0 * x * x * e;
    let den = (r - r_in) * (r_out - r);
    let den1 = -2.0 * x;
    let den2 = -2.0;
    Ok(Jet::new(
        num / den,
        num1 / den - num * den1 / (den * den),
        num2 / den - 2.0 * num1 * den1 / (den * den) - num * den2 / (den * den)
            + 2.0 * num * den1 * den1 / (den * den * den),
    ))
}

/// `q2 (lambda - d)^2` on `(L, lambda]`, zero beyond.
pub fn viscosity_kernel(d: f64, l: f64, lambda: f64, q2: f64) -> Result<Jet> {
    if !(d > l) {
        return Err(Error::Domain {
            function: "viscosity kernel",
            argument: d,
        });
    }
    if d >= lambda || q2 == 0.0 {
        return Ok(Jet::ZERO);
    }
    let u = lambda - d;
    Ok(Jet::new(q2 * u * u, -2.0 * q2 * u, 2.0 * q2))
}

/// C¹ smoothing of `max(0, x)` that dominates it everywhere.
pub fn gain_shaping_f(x: f64, epsilon: f64) -> Jet {
    if x <= -epsilon {
        Jet::ZERO
    } else if x < 0.0 {
        let y = x + epsilon;
        Jet::new(y * y / (2.0 * epsilon), y / epsilon, 1.0 / epsilon)
    } else {
        Jet::new(x + 0.5 * epsilon, 1.0, 0.0)
    }
}

/// Pair and boundary potentials plus viscosity, indexed by vehicle.
pub trait Potentials: fmt::Debug + Send + Sync {
    /// `V_ij(d)`; `l` is the pair's minimum gap.
    fn pair(&self, i: usize, j: usize, d: f64, l: f64) -> Result<Jet>;
    /// `kappa_ij(d)`.
    fn viscosity(&self, i: usize, j: usize, d: f64, l: f64) -> Result<Jet>;
    /// `U_i(r)`.
    fn boundary(&self, i: usize, r: f64) -> Result<Jet>;
    /// Radii where the boundary potential switches branch.
    fn boundary_joins(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// The shaping functions `g1, g2` (viscosity), `f` (NCC gain) and
/// `f1, f2` (PRCC feedback).
pub trait Shaping: fmt::Debug + Send + Sync {
    fn g1(&self, x: f64) -> Jet;
    fn g2(&self, x: f64) -> Jet;
    fn f(&self, x: f64) -> Jet;
    fn f1(&self, x: f64) -> Jet;
    fn f2(&self, x: f64) -> Jet;
}

/// The cubic/rational family used throughout, uniform over pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardPotentials {
    pub lambda: f64,
    pub q1: f64,
    pub q2: f64,
    pub c: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl StandardPotentials {
    pub fn new(ring: &RingConfig, params: &PotentialConfig) -> Self {
        Self {
            lambda: ring.lambda,
            q1: params.q1,
            q2: params.q2,
            c: params.c,
            r_in: ring.r_in,
            r_out: ring.r_out,
        }
    }
}

impl Potentials for StandardPotentials {
    fn pair(&self, _i: usize, _j: usize, d: f64, l: f64) -> Result<Jet> {
        vehicle_potential(d, l, self.lambda, self.q1)
    }

    fn viscosity(&self, _i: usize, _j: usize, d: f64, l: f64) -> Result<Jet> {
        viscosity_kernel(d, l, self.lambda, self.q2)
    }

    fn boundary(&self, _i: usize, r: f64) -> Result<Jet> {
        boundary_potential(r, self.r_in, self.r_out, self.c)
    }

    fn boundary_joins(&self) -> Vec<f64> {
        let mid = 0.5 * (self.r_in + self.r_out);
        vec![mid - self.c, mid + self.c]
    }
}

/// Identity `g1 = g2`, smoothed-ramp `f`, linear `f1 = mu1 x`, `f2 = mu2 x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardShaping {
    pub epsilon: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl StandardShaping {
    pub fn new(params: &PotentialConfig) -> Self {
        Self {
            epsilon: params.epsilon,
            mu1: params.mu1,
            mu2: params.mu2,
        }
    }
}

impl Shaping for StandardShaping {
    fn g1(&self, x: f64) -> Jet {
        Jet::linear(1.0, x)
    }

    fn g2(&self, x: f64) -> Jet {
        Jet::linear(1.0, x)
    }

    fn f(&self, x: f64) -> Jet {
        gain_shaping_f(x, self.epsilon)
    }

    fn f1(&self, x: f64) -> Jet {
        Jet::linear(self.mu1, x)
    }

    fn f2(&self, x: f64) -> Jet {
        Jet::linear(self.mu2, x)
    }
}

/// Which structural property a check concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Axiom {
    /// `V_ij >= 0` and `V_ij -> +inf` as `d -> L_ij+`.
    PairBlowUp,
    /// `V_ij(d) = 0` for `d >= lambda`.
    PairSupport,
    /// `V_ij = V_ji`.
    PairSymmetry,
    /// `U_i >= 0` and `U_i -> +inf` at both radii.
    BoundaryBlowUp,
    /// `kappa_ij = kappa_ji` and `kappa_ij >= 0`.
    ViscositySymmetry,
    /// `kappa_ij(d) = 0` for `d >= lambda`.
    ViscositySupport,
    /// `lambda > max L_ij`.
    InteractionRange,
    /// `f(x) >= max(0, x)`.
    GainDominance,
    /// `f_j(0) = 0` and `x f_j(x) > 0` for `x != 0`.
    FeedbackSign,
    /// `g1`, `g2` non-decreasing.
    ViscosityMonotone,
    /// C² at the potential branch joins, C¹ for the viscosity kernel.
    Smoothness,
    /// Analytic derivatives agree with central differences.
    Derivatives,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomFailure {
    pub axiom: Axiom,
    pub at: f64,
    pub detail: String,
}

impl fmt::Display for AxiomFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} fails at {}: {}", self.axiom, self.at, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub checked: Vec<Axiom>,
    pub failures: Vec<AxiomFailure>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn passed_axiom(&self, axiom: Axiom) -> bool {
        self.checked.contains(&axiom) && !self.failures.iter().any(|f| f.axiom == axiom)
    }

    fn fail(&mut self, axiom: Axiom, at: f64, detail: impl Into<String>) {
        self.failures.push(AxiomFailure {
            axiom,
            at,
            detail: detail.into(),
        });
    }
}

/// Step for the central differences used by the derivative check.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance of the derivative check.
pub const FD_TOLERANCE: f64 = 1e-5;

fn linspace(a: f64, b: f64, k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |m| a + (b - a) * m as f64 / (k - 1) as f64)
}

/// Samples the function families and checks the structural axioms the
/// controllers rely on. `samples` interior points are drawn from a fixed
/// low-discrepancy sequence for the derivative check.
pub fn check_axioms(
    potentials: &dyn Potentials,
    shaping: &dyn Shaping,
    ring: &RingConfig,
    samples: usize,
) -> AxiomReport {
    let mut report = AxiomReport {
        checked: vec![
            Axiom::PairBlowUp,
            Axiom::PairSupport,
            Axiom::PairSymmetry,
            Axiom::BoundaryBlowUp,
            Axiom::ViscositySymmetry,
            Axiom::ViscositySupport,
            Axiom::InteractionRange,
            Axiom::GainDominance,
            Axiom::FeedbackSign,
            Axiom::ViscosityMonotone,
            Axiom::Smoothness,
            Axiom::Derivatives,
        ],
        failures: Vec::new(),
    };
    let n = ring.n();
    let lambda = ring.lambda;
    let far = 2.0 * ring.r_out + lambda;

    if n > 1 {
        let max_gap = ring.min_gap.max_off_diagonal();
        if !(lambda > max_gap) {
            report.fail(Axiom::InteractionRange, lambda, format!("max L = {max_gap}"));
        }
    }

    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let l = ring.min_gap.get(i, j);
            check_pair(&mut report, potentials, i, j, l, lambda, far);
        }
    }

    check_boundary(&mut report, potentials, ring);
    check_shaping(&mut report, shaping, ring);
    check_derivatives(&mut report, potentials, shaping, ring, samples);
    report
}

fn check_pair(
    report: &mut AxiomReport,
    pot: &dyn Potentials,
    i: usize,
    j: usize,
    l: f64,
    lambda: f64,
    far: f64,
) {
    let eval = |d: f64| pot.pair(i, j, d, l).map(|jet| jet.value);
    // blow-up proxy: strictly increasing along d = L + 10^-k
    let mut previous = f64::NEG_INFINITY;
    for k in 1..=8 {
        let d = l + 10f64.powi(-k);
        match eval(d) {
            Ok(v) if v > previous && v >= 0.0 => previous = v,
            Ok(v) => {
                report.fail(Axiom::PairBlowUp, d, format!("V = {v} after {previous}"));
                break;
            }
            Err(e) => {
                report.fail(Axiom::PairBlowUp, d, e.to_string());
                break;
            }
        }
    }
    for d in linspace(l + 1e-3, far, 400) {
        let (v, vji) = match (pot.pair(i, j, d, l), pot.pair(j, i, d, l)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.fail(Axiom::PairSymmetry, d, e.to_string());
                continue;
            }
        };
        if v.value < 0.0 {
            report.fail(Axiom::PairBlowUp, d, format!("V = {} < 0", v.value));
        }
        if v != vji {
            report.fail(Axiom::PairSymmetry, d, format!("({i},{j}) vs ({j},{i})"));
        }
        if d >= lambda && v != Jet::ZERO {
            report.fail(Axiom::PairSupport, d, format!("V = {:?}", v));
        }
        let (k, kji) = match (pot.viscosity(i, j, d, l), pot.viscosity(j, i, d, l)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                report.fail(Axiom::ViscositySymmetry, d, e.to_string());
                continue;
            }
        };
        if k.value < 0.0 || k != kji {
            report.fail(Axiom::ViscositySymmetry, d, format!("kappa = {:?}", k));
        }
        if d >= lambda && (k.value != 0.0 || k.d1 != 0.0) {
            report.fail(Axiom::ViscositySupport, d, format!("kappa = {:?}", k));
        }
    }
    // the support boundary itself
    for d in [lambda, lambda * (1.0 + f64::EPSILON)] {
        if pot.pair(i, j, d, l).ok() != Some(Jet::ZERO) {
            report.fail(Axiom::PairSupport, d, "V not identically zero");
        }
    }
    // smoothness across d = lambda: one-sided limits of V, V', V'' vanish
    let h = 1e-7;
    if let (Ok(left), Ok(outer)) = (pot.pair(i, j, lambda - h, l), pot.pair(i, j, lambda, l)) {
        let scale = pot
            .pair(i, j, 0.5 * (l + lambda), l)
            .map(|jet| jet.d2.abs().max(1e-12))
            .unwrap_or(1.0);
        if (left.d2 - outer.d2).abs() > 1e-4 * scale
            || (left.d1 - outer.d1).abs() > 1e-4 * scale
        {
            report.fail(Axiom::Smoothness, lambda, format!("V jump {left:?} -> {outer:?}"));
        }
    }
    if let (Ok(left), Ok(outer)) = (
        pot.viscosity(i, j, lambda - h, l),
        pot.viscosity(i, j, lambda, l),
    ) {
        let scale = pot
            .viscosity(i, j, 0.5 * (l + lambda), l)
            .map(|jet| jet.d1.abs().max(1e-12))
            .unwrap_or(1.0);
        if (left.d1 - outer.d1).abs() > 1e-4 * scale || (left.value - outer.value).abs() > 1e-4 * scale
        {
            report.fail(Axiom::Smoothness, lambda, format!("kappa jump {left:?} -> {outer:?}"));
        }
    }
}

fn check_boundary(report: &mut AxiomReport, pot: &dyn Potentials, ring: &RingConfig) {
    for i in 0..ring.n() {
        for (edge, sign) in [(ring.r_in, 1.0), (ring.r_out, -1.0)] {
            let mut previous = f64::NEG_INFINITY;
            for k in 1..=8 {
                let r = edge + sign * 10f64.powi(-k);
                match pot.boundary(i, r) {
                    Ok(u) if u.value > previous => previous = u.value,
                    Ok(u) => {
                        report.fail(
                            Axiom::BoundaryBlowUp,
                            r,
                            format!("U = {} after {previous}", u.value),
                        );
                        break;
                    }
                    Err(e) => {
                        report.fail(Axiom::BoundaryBlowUp, r, e.to_string());
                        break;
                    }
                }
            }
        }
        let width = ring.r_out - ring.r_in;
        for r in linspace(ring.r_in + 1e-3 * width, ring.r_out - 1e-3 * width, 400) {
            match pot.boundary(i, r) {
                Ok(u) if u.value >= 0.0 => {}
                Ok(u) => report.fail(Axiom::BoundaryBlowUp, r, format!("U = {} < 0", u.value)),
                Err(e) => report.fail(Axiom::BoundaryBlowUp, r, e.to_string()),
            }
        }
        for join in pot.boundary_joins() {
            let h = 1e-7;
            if let (Ok(a), Ok(b)) = (pot.boundary(i, join - h), pot.boundary(i, join + h)) {
                let jump = (a.value - b.value)
                    .abs()
                    .max((a.d1 - b.d1).abs())
                    .max((a.d2 - b.d2).abs());
                if jump > 1e-4 {
                    report.fail(Axiom::Smoothness, join, format!("U jump {a:?} -> {b:?}"));
                }
            }
        }
    }
}

fn check_shaping(report: &mut AxiomReport, shaping: &dyn Shaping, ring: &RingConfig) {
    let span = 2.0 * (ring.v_max / ring.r_in + 1.0);
    let grid: Vec<f64> = linspace(-span, span, 2001).collect();
    for &x in &grid {
        let f = shaping.f(x).value;
        if !(f >= x.max(0.0)) {
            report.fail(Axiom::GainDominance, x, format!("f = {f}"));
        }
    }
    for (name, func) in [("f1", 1), ("f2", 2)] {
        let eval = |x: f64| {
            if func == 1 {
                shaping.f1(x).value
            } else {
                shaping.f2(x).value
            }
        };
        if eval(0.0) != 0.0 {
            report.fail(Axiom::FeedbackSign, 0.0, format!("{name}(0) = {}", eval(0.0)));
        }
        for &x in grid.iter().filter(|&&x| x != 0.0) {
            if !(x * eval(x) > 0.0) {
                report.fail(Axiom::FeedbackSign, x, format!("x {name}(x) <= 0"));
            }
        }
    }
    for (name, g) in [
        ("g1", &(|x| shaping.g1(x).value) as &dyn Fn(f64) -> f64),
        ("g2", &|x| shaping.g2(x).value),
    ] {
        for pair in grid.windows(2) {
            if g(pair[1]) < g(pair[0]) {
                report.fail(Axiom::ViscosityMonotone, pair[1], format!("{name} decreases"));
                break;
            }
        }
    }
}

/// Van der Corput sequence in base 2, used as a deterministic sampler.
fn van_der_corput(mut k: u32) -> f64 {
    let mut x = 0.0;
    let mut denom = 1.0;
    while k > 0 {
        denom *= 2.0;
        x += (k & 1) as f64 / denom;
        k >>= 1;
    }
    x
}

fn derivative_mismatch(analytic: f64, lower: f64, upper: f64, h: f64) -> Option<f64> {
    let fd = (upper - lower) / (2.0 * h);
    let err = (analytic - fd).abs();
    // absolute floor covers points where the derivative itself vanishes
    let scale = analytic.abs().max(fd.abs()).max(1e-9);
    (err > FD_TOLERANCE * scale).then_some(fd)
}

fn check_derivatives(
    report: &mut AxiomReport,
    pot: &dyn Potentials,
    shaping: &dyn Shaping,
    ring: &RingConfig,
    samples: usize,
) {
    let h = FD_STEP;
    let (i, j) = (0, ring.n().min(2) - 1);
    let l = if ring.n() > 1 {
        ring.min_gap.get(0, 1)
    } else {
        0.3 * ring.lambda
    };
    let joins = pot.boundary_joins();
    for k in 0..samples as u32 {
        let t = van_der_corput(k + 1);
        let d = l + 0.05 + t * (ring.lambda - l - 0.1);
        let r = ring.r_in + 0.05 + t * (ring.r_out - ring.r_in - 0.1);
        let mut check = |name: &str, x: f64, f: &dyn Fn(f64) -> Result<Jet>| {
            let (Ok(mid), Ok(lo), Ok(hi)) = (f(x), f(x - h), f(x + h)) else {
                report.fail(Axiom::Derivatives, x, format!("{name} undefined"));
                return;
            };
            if let Some(fd) = derivative_mismatch(mid.d1, lo.value, hi.value, h) {
                report.fail(Axiom::Derivatives, x, format!("{name}' = {} vs {fd}", mid.d1));
            }
            if let Some(fd) = derivative_mismatch(mid.d2, lo.d1, hi.d1, h) {
                report.fail(Axiom::Derivatives, x, format!("{name}'' = {} vs {fd}", mid.d2));
            }
        };
        check("V", d, &|x| pot.pair(i, j, x, l));
        check("kappa", d, &|x| pot.viscosity(i, j, x, l));
        if joins.iter().all(|&jn| (r - jn).abs() > 2.0 * h) {
            check("U", r, &|x| pot.boundary(i, x));
        }
        // offset keeps the dyadic samples off the kinks of f at 0 and -epsilon
        let x = (t - 0.5) * 4.0 + 0.0123;
        check("f", x, &|x| Ok(shaping.f(x)));
    }
}
