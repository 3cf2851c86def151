//! Instrumented evaluation of a controller, recording which state fields of
//! which vehicles were read.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Controller, FleetView, Measurements};
use crate::geometry::{FleetState, VehicleState};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    R,
    Phi,
    S,
    V,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::R => "r",
            Field::Phi => "phi",
            Field::S => "s",
            Field::V => "v",
        })
    }
}

/// Fields read during one control evaluation for vehicle `vehicle`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccessReport {
    pub vehicle: usize,
    pub own: BTreeSet<Field>,
    pub neighbors: BTreeMap<usize, BTreeSet<Field>>,
    /// Human-readable description of every read the controller was not
    /// entitled to.
    pub violations: Vec<String>,
    /// Error returned by the controller, if any.
    pub error: Option<String>,
}

impl AccessReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn fields_of(&self, j: usize) -> BTreeSet<Field> {
        self.neighbors.get(&j).cloned().unwrap_or_default()
    }
}

struct AuditedView<'a> {
    inner: FleetView<'a>,
    own: RefCell<BTreeSet<Field>>,
    others: RefCell<BTreeMap<usize, BTreeSet<Field>>>,
}

impl AuditedView<'_> {
    fn record(&self, i: usize, fields: [Field; 2]) {
        self.others.borrow_mut().entry(i).or_default().extend(fields);
    }
}

impl Measurements for AuditedView<'_> {
    fn own(&self, i: usize) -> VehicleState {
        self.own
            .borrow_mut()
            .extend([Field::R, Field::Phi, Field::S, Field::V]);
        self.inner.own(i)
    }

    fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        self.inner.neighbors(i)
    }

    fn position(&self, j: usize) -> (f64, f64) {
        self.record(j, [Field::R, Field::Phi]);
        self.inner.position(j)
    }

    fn motion(&self, j: usize) -> (f64, f64) {
        self.record(j, [Field::S, Field::V]);
        self.inner.motion(j)
    }
}

/// Evaluates `controller` for vehicle `i` and checks the reads against the
/// information pattern: own state, positions of vehicles within the
/// interaction radius, and (viscous models only) their speeds and
/// orientations.
pub fn permitted_information_audit(
    controller: &Controller,
    i: usize,
    w: &FleetState,
    model: &Model,
) -> AccessReport {
    let view = AuditedView {
        inner: FleetView::new(w, &model.ring),
        own: RefCell::default(),
        others: RefCell::default(),
    };
    let error = controller.control(i, &view, model).err().map(|e| e.to_string());
    let own = view.own.into_inner();
    let mut neighbors = view.others.into_inner();
    // own-state reads through the neighbour accessors count as own reads
    let own = match neighbors.remove(&i) {
        Some(extra) => own.union(&extra).copied().collect(),
        None => own,
    };

    let violations = violations(i, w, model, &neighbors);

    AccessReport {
        vehicle: i,
        own,
        neighbors,
        violations,
        error,
    }
}

fn violations(
    i: usize,
    w: &FleetState,
    model: &Model,
    reads: &BTreeMap<usize, BTreeSet<Field>>,
) -> Vec<String> {
    let viscous = model.is_viscous();
    let mut out = Vec::new();
    for (&j, fields) in reads {
        let d = w.distance(i, j, &model.ring);
        if d > model.ring.lambda {
            out.push(format!(
                "read {} of vehicle {j} at distance {d} beyond the interaction radius",
                join(fields)
            ));
            continue;
        }
        let motion: BTreeSet<Field> = fields
            .iter()
            .copied()
            .filter(|f| matches!(f, Field::S | Field::V))
            .collect();
        if !viscous && !motion.is_empty() {
            out.push(format!("inviscid controller read {} of vehicle {j}", join(&motion)));
        }
    }
    out
}

fn join(fields: &BTreeSet<Field>) -> String {
    fields.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::Family;
    use crate::potentials::PotentialConfig;

    fn pair_at(d: f64) -> FleetState {
        let dphi = 2.0 * (d / 80.0).asin();
        FleetState::new(vec![
            VehicleState::new(40.0, 0.0, 0.02, 6.0),
            VehicleState::new(40.0, dphi, -0.03, 7.0),
        ])
    }

    fn all() -> BTreeSet<Field> {
        [Field::R, Field::Phi, Field::S, Field::V].into()
    }

    #[test]
    fn inviscid_reads_positions_only() {
        for family in [Family::Ncc, Family::Prcc] {
            let model = Model::reference(2, PotentialConfig::reference_ncc(0.0));
            let report = permitted_information_audit(&Controller::new(family), 0, &pair_at(10.0), &model);
            assert!(report.is_clean(), "{:?}", report.violations);
            assert_eq!(report.own, all());
            assert_eq!(report.fields_of(1), [Field::R, Field::Phi].into());
        }
    }

    #[test]
    fn viscous_reads_neighbour_motion() {
        let model = Model::reference(2, PotentialConfig::reference_ncc(0.1));
        let report = permitted_information_audit(&Controller::new(Family::Ncc), 0, &pair_at(10.0), &model);
        assert!(report.is_clean());
        assert_eq!(report.fields_of(1), all());
    }

    #[test]
    fn nothing_read_beyond_range() {
        for q2 in [0.0, 0.1] {
            let model = Model::reference(2, PotentialConfig::reference_prcc(q2));
            for family in [Family::Ncc, Family::Prcc] {
                let report =
                    permitted_information_audit(&Controller::new(family), 1, &pair_at(25.0), &model);
                assert!(report.neighbors.is_empty());
                assert!(report.is_clean());
                assert!(report.error.is_none());
            }
        }
    }

    #[test]
    fn forbidden_reads_are_reported() {
        let model = Model::reference(2, PotentialConfig::reference_ncc(0.0));
        let near = BTreeMap::from([(1, BTreeSet::from([Field::R, Field::V]))]);
        let v = violations(0, &pair_at(10.0), &model, &near);
        assert_eq!(v, vec!["inviscid controller read v of vehicle 1".to_string()]);

        let far = BTreeMap::from([(1, BTreeSet::from([Field::R]))]);
        assert_eq!(violations(0, &pair_at(25.0), &model, &far).len(), 1);
    }
}
