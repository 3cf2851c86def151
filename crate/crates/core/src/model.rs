use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{config_issues, RingConfig};
use crate::potentials::{PotentialConfig, Potentials, Shaping, StandardPotentials, StandardShaping};

/// Everything a controller or Lyapunov function needs besides the state:
/// the ring, the scalar parameters and the function families.
#[derive(Debug, Clone)]
pub struct Model {
    pub ring: RingConfig,
    pub params: PotentialConfig,
    pub potentials: Arc<dyn Potentials>,
    pub shaping: Arc<dyn Shaping>,
}

impl Model {
    /// Validated model with the standard function families.
    pub fn standard(ring: RingConfig, params: PotentialConfig) -> Result<Self> {
        let potentials = Arc::new(StandardPotentials::new(&ring, &params));
        let shaping = Arc::new(StandardShaping::new(&params));
        Self::with_functions(ring, params, potentials, shaping)
    }

    pub fn with_functions(
        ring: RingConfig,
        params: PotentialConfig,
        potentials: Arc<dyn Potentials>,
        shaping: Arc<dyn Shaping>,
    ) -> Result<Self> {
        let mut issues = config_issues(&ring);
        issues.extend(params.issues(&ring));
        if !issues.is_empty() {
            return Err(Error::InvalidConfig(issues));
        }
        crate::geometry::validate_config(&ring)?;
        Ok(Self {
            ring,
            params,
            potentials,
            shaping,
        })
    }

    /// The reference ring and gains for `n` vehicles.
    pub fn reference(n: usize, params: PotentialConfig) -> Self {
        Self::standard(RingConfig::reference(n), params).expect("reference parameters are valid")
    }

    pub fn n(&self) -> usize {
        self.ring.n()
    }

    /// Whether neighbour speeds and orientations enter the feedback.
    pub fn is_viscous(&self) -> bool {
        self.params.q2 > 0.0
    }
}
