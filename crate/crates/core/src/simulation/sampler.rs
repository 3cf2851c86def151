use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{weighted_distance, FleetState, RingConfig, VehicleState};

/// Seeded rejection sampler for initial fleets. Each margin shrinks the
/// corresponding state-space bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub seed: u64,
    /// Distance kept from both ring edges.
    pub margin_r: f64,
    /// Distance kept from the orientation bound.
    pub margin_s: f64,
    /// Distance kept from zero speed and the speed limit.
    pub margin_v: f64,
    /// Extra clearance over the minimum gap.
    pub margin_d: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_attempts() -> usize {
    100_000
}

impl SamplerSpec {
    pub fn new(seed: u64, margin_r: f64, margin_s: f64, margin_v: f64, margin_d: f64) -> Self {
        Self {
            seed,
            margin_r,
            margin_s,
            margin_v,
            margin_d,
            max_attempts: default_attempts(),
        }
    }
}

/// Draws vehicles one at a time, redrawing any candidate that comes within
/// `L + margin_d` of an accepted vehicle. Deterministic for a given seed.
pub fn sample_initial_fleet(spec: &SamplerSpec, ring: &RingConfig) -> Result<FleetState> {
    let (r_lo, r_hi) = (ring.r_in + spec.margin_r, ring.r_out - spec.margin_r);
    let s_hi = ring.theta - spec.margin_s;
    let (v_lo, v_hi) = (spec.margin_v, ring.v_max - spec.margin_v);
    if !(r_lo < r_hi && s_hi >= 0.0 && v_lo > 0.0 && v_lo < v_hi && spec.margin_d >= 0.0) {
        return Err(Error::Scenario(format!(
            "sampler margins leave no room: r in [{r_lo}, {r_hi}], |s| <= {s_hi}, v in [{v_lo}, {v_hi}]"
        )));
    }
    let n = ring.n();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut accepted: Vec<VehicleState> = Vec::with_capacity(n);
    let mut attempts = 0;
    while accepted.len() < n {
        if attempts == spec.max_attempts {
            return Err(Error::Packing {
                requested: n,
                placed: accepted.len(),
                attempts,
            });
        }
        attempts += 1;
        let r = rng.gen_range(r_lo..=r_hi);
        let phi = rng.gen_range(0.0..TAU);
        let s = if s_hi > 0.0 { rng.gen_range(-s_hi..=s_hi) } else { 0.0 };
        let v = rng.gen_range(v_lo..=v_hi);
        let candidate = VehicleState::new(r, phi, s, v);
        let i = accepted.len();
        let clear = accepted.iter().enumerate().all(|(j, other)| {
            weighted_distance(&candidate, other, ring.weight.get(i, j))
                > ring.min_gap.get(i, j) + spec.margin_d
        });
        if clear {
            accepted.push(candidate);
        }
    }
    Ok(FleetState::new(accepted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::check_state_space;

    #[test]
    fn single_vehicle_respects_margins() {
        let ring = RingConfig::reference(1);
        let spec = SamplerSpec::new(7, 5.0, 0.05, 1.0, 0.0);
        for seed in 0..50 {
            let w = sample_initial_fleet(&SamplerSpec { seed, ..spec }, &ring).unwrap();
            let x = w.vehicles[0];
            assert!(x.r >= 25.0 && x.r <= 55.0);
            assert!(x.s.abs() <= 0.12 + 1e-15);
            assert!(x.v >= 1.0 && x.v <= 9.0);
        }
    }

    #[test]
    fn reference_fleet_is_admissible_and_reproducible() {
        let ring = RingConfig::reference(10);
        let spec = SamplerSpec::new(42, 1.0, 0.01, 0.5, 0.5);
        let w = sample_initial_fleet(&spec, &ring).unwrap();
        assert!(check_state_space(&w, &ring).is_member());
        assert!(w.min_distance(&ring) > 6.0);
        assert_eq!(w, sample_initial_fleet(&spec, &ring).unwrap());
    }

    #[test]
    fn overfull_ring_fails_with_packing_error() {
        let ring = RingConfig::reference(500);
        let spec = SamplerSpec {
            max_attempts: 20_000,
            ..SamplerSpec::new(1, 1.0, 0.01, 0.5, 0.0)
        };
        let err = sample_initial_fleet(&spec, &ring).unwrap_err();
        assert!(matches!(err, Error::Packing { requested: 500, attempts: 20_000, .. }));
    }

    #[test]
    fn infeasible_margins_are_rejected() {
        let ring = RingConfig::reference(1);
        let spec = SamplerSpec::new(1, 25.0, 0.0, 0.5, 0.0);
        assert!(matches!(sample_initial_fleet(&spec, &ring), Err(Error::Scenario(_))));
    }
}
