use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, Family, Fault};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::geometry::{check_state_space, FleetState, RingConfig, VehicleState};
use crate::model::Model;
use crate::potentials::PotentialConfig;

use super::sampler::{sample_initial_fleet, SamplerSpec};

/// Uniform ring parameters as written in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    pub n: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub v_max: f64,
    pub omega_star: f64,
    pub theta: f64,
    pub lambda: f64,
    /// Minimum admissible distance `L` for every pair.
    pub min_gap: f64,
    /// Radial weight `p` of the distance for every pair.
    pub weight: f64,
    /// Vehicle length `sigma`.
    pub length: f64,
}

impl RingSection {
    pub fn reference(n: usize) -> Self {
        Self {
            n,
            r_in: 20.0,
            r_out: 60.0,
            v_max: 10.0,
            omega_star: 0.15,
            theta: 0.17,
            lambda: 20.0,
            min_gap: 6.0,
            weight: 5.11,
            length: 5.0,
        }
    }

    pub fn to_ring(&self) -> RingConfig {
        RingConfig::uniform(
            self.n,
            self.r_in,
            self.r_out,
            self.v_max,
            self.omega_star,
            self.theta,
            self.lambda,
            self.min_gap,
            self.weight,
            self.length,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapingKind {
    /// Identity `g1`, `g2`; linear `f1`, `f2` with slopes `mu1`, `mu2`.
    #[default]
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub family: Family,
    /// Without viscosity the kernel scale `q2` is ignored.
    pub viscous: bool,
    #[serde(default)]
    pub shaping: ShapingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

/// Initial condition: seeded sampling or an explicit fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    Sampled(SamplerSpec),
    Explicit { vehicles: Vec<VehicleState> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// Allowed per-step increase of the Lyapunov function, relative to
    /// `max(1, H)`.
    pub clf_tolerance: f64,
    /// Steps between dissipation spot-checks; zero disables them.
    pub dissipation_every: usize,
    /// Allowed excess of the measured derivative over the analytic bound,
    /// relative to `max(1, |bound|)`.
    pub dissipation_tolerance: f64,
    /// Finite-difference step of the spot-checks.
    pub fd_step: f64,
    /// Threshold on the final angular-speed error, acceleration and
    /// orientation used by convergence checks.
    pub convergence_tolerance: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            clf_tolerance: 1e-6,
            dissipation_every: 100,
            dissipation_tolerance: 1e-6,
            fd_step: crate::clf::FD_STEP,
            convergence_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; relative paths resolve against the working
    /// directory. Defaults to `runs/<name>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub ring: RingSection,
    pub potentials: PotentialConfig,
    pub controller: ControllerSection,
    pub integrator: IntegratorConfig,
    pub init: InitSpec,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        Self::deserialize(toml::Value::Table(table)).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The resolved scenario in the input format.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Potential parameters with `q2` zeroed for inviscid controllers.
    pub fn effective_potentials(&self) -> PotentialConfig {
        let mut p = self.potentials;
        if !self.controller.viscous {
            p.q2 = 0.0;
        }
        p
    }

    pub fn model(&self) -> Result<Model> {
        if self.controller.viscous && !(self.potentials.q2 > 0.0) {
            return Err(Error::Scenario(
                "viscous controller requires potentials.q2 > 0".into(),
            ));
        }
        Model::standard(self.ring.to_ring(), self.effective_potentials())
    }

    pub fn controller(&self) -> Controller {
        let c = Controller::new(self.controller.family);
        match self.controller.fault {
            Some(f) => c.with_fault(f),
            None => c,
        }
    }

    pub fn initial_fleet(&self, ring: &RingConfig) -> Result<FleetState> {
        let w = match &self.init {
            InitSpec::Sampled(spec) => sample_initial_fleet(spec, ring)?,
            InitSpec::Explicit { vehicles } => FleetState::new(vehicles.clone()),
        };
        if w.len() != ring.n() {
            return Err(Error::Scenario(format!(
                "initial fleet has {} vehicles, ring.n = {}",
                w.len(),
                ring.n()
            )));
        }
        let membership = check_state_space(&w, ring);
        if !membership.is_member() {
            return Err(Error::Scenario(format!(
                "initial fleet is outside the state space: {membership}"
            )));
        }
        Ok(w)
    }

    /// Checks every section and the initial condition.
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let m = &self.monitors;
        if !(m.clf_tolerance >= 0.0 && m.dissipation_tolerance >= 0.0) {
            return Err(Error::Scenario("monitor tolerances must be non-negative".into()));
        }
        if !(m.fd_step > 0.0) {
            return Err(Error::Scenario("monitors.fd_step must be positive".into()));
        }
        let model = self.model()?;
        self.initial_fleet(&model.ring)?;
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.outputs
            .directory
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(&self.name))
    }
}

/// Sets the dotted `key` in `table` to `value`, parsing `value` as a TOML
/// literal and falling back to a bare string.
pub fn set_key(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("x = {value}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(value.to_owned()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::Scenario(format!("empty key `{key}`")))?;
    let mut cursor = table;
    for part in parts {
        cursor = cursor
            .get_mut(part)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::Scenario(format!("no section `{part}` in key `{key}`")))?;
    }
    cursor.insert(last.to_owned(), parsed);
    Ok(())
}
