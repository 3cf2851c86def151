use crate::clf::energy;
use crate::controllers::Family;
use crate::error::Result;
use crate::model::Model;

use super::run::{equilibrium_residual, TrajectoryRecord};

/// Fleet-level summary on the recorded time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub t: Vec<f64>,
    /// `max_i |v_i / r_i - omega*|`.
    pub sup_angular_error: Vec<f64>,
    /// `max_i |F_i|`.
    pub sup_accel: Vec<f64>,
    /// `max_i |s_i|`.
    pub sup_orientation: Vec<f64>,
    /// Smallest pairwise distance (`+inf` for one vehicle).
    pub min_gap: Vec<f64>,
    /// `H` or `H_R`, matching the controller family.
    pub clf: Vec<f64>,
    pub equilibrium_residual: Vec<f64>,
}

impl MetricsSeries {
    pub const COLUMNS: [&'static str; 7] = [
        "t",
        "sup_angular_error",
        "sup_accel",
        "sup_orientation",
        "min_gap",
        "clf",
        "equilibrium_residual",
    ];

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, k: usize) -> [f64; 7] {
        [
            self.t[k],
            self.sup_angular_error[k],
            self.sup_accel[k],
            self.sup_orientation[k],
            self.min_gap[k],
            self.clf[k],
            self.equilibrium_residual[k],
        ]
    }

    /// Index of the last recorded time not after `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.t.iter().rposition(|&tk| tk <= t + tol)
    }

    /// Largest relative increase of the Lyapunov trace between consecutive
    /// records, `max_k (clf[k+1] - clf[k]) / max(1, clf[k])`. Non-positive
    /// for a non-increasing trace.
    pub fn worst_clf_increase(&self) -> f64 {
        self.clf
            .windows(2)
            .map(|p| (p[1] - p[0]) / p[0].max(1.0))
            .reduce(f64::max)
            .unwrap_or(0.0)
    }
}

/// Computes every metric at each recorded instant.
pub fn metrics_series(record: &TrajectoryRecord, model: &Model, family: Family) -> Result<MetricsSeries> {
    let omega_star = model.ring.omega_star;
    let mut m = MetricsSeries::default();
    for ((t, w), u) in record.t.iter().zip(&record.states).zip(&record.controls) {
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
        m.t.push(*t);
        m.sup_angular_error
            .push(max(&mut w.vehicles.iter().map(|x| (x.v / x.r - omega_star).abs())));
        m.sup_accel.push(max(&mut u.iter().map(|c| c.accel.abs())));
        m.sup_orientation.push(max(&mut w.vehicles.iter().map(|x| x.s.abs())));
        m.min_gap.push(w.min_distance(&model.ring));
        m.clf.push(energy(family, w, model)?.total);
        m.equilibrium_residual.push(equilibrium_residual(w, model)?);
    }
    Ok(m)
}
