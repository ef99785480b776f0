use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::{one_minus_ln2, FractionalMatching, Instance, TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativeRate,
    NegativeWeight,
    NonFinite,
    DanglingEdge,
    DuplicateEdge,
    DuplicateTypeId,
    DuplicateOfflineId,
    TotalRateMismatch,
    NegativeFlow,
    FlowOffEdge,
    UnknownId,
    TypeCapacity,
    OfflineCapacity,
    JailletLu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Id (or `i->j` pair) the violation is about.
    pub subject: String,
    pub message: String,
}

/// List of violated invariants; empty iff the input is valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, subject: impl Into<String>, message: String) {
        self.violations.push(Violation { kind, subject: subject.into(), message });
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    use ViolationKind::*;
    let mut r = ValidationReport::default();

    let mut seen = HashSet::new();
    for j in inst.offline() {
        if !seen.insert(j.as_str()) {
            r.push(DuplicateOfflineId, j, format!("offline id {j:?} declared more than once"));
        }
    }

    let mut seen_types = HashSet::new();
    for t in inst.online_types() {
        if !seen_types.insert(t.id.as_str()) {
            r.push(DuplicateTypeId, &t.id, format!("online type id {:?} declared more than once", t.id));
        }
        if !t.rate.is_finite() {
            r.push(NonFinite, &t.id, format!("type {:?} has non-finite rate {}", t.id, t.rate));
        } else if t.rate < 0.0 {
            r.push(NegativeRate, &t.id, format!("type {:?} has negative rate {}", t.id, t.rate));
        }
        let mut seen_edges = HashSet::new();
        for e in &t.edges {
            let pair = format!("{}->{}", t.id, e.offline);
            if inst.offline_index(&e.offline).is_none() {
                r.push(DanglingEdge, &pair, format!("edge {pair} points to unknown offline vertex"));
            }
            if !seen_edges.insert(e.offline.as_str()) {
                r.push(DuplicateEdge, &pair, format!("edge {pair} listed more than once"));
            }
            if !e.weight.is_finite() {
                r.push(NonFinite, &pair, format!("edge {pair} has non-finite weight"));
            } else if e.weight < 0.0 {
                r.push(NegativeWeight, &pair, format!("edge {pair} has negative weight {}", e.weight));
            }
        }
    }

    let sum: f64 = inst.online_types().iter().map(|t| t.rate).sum();
    if (sum - inst.total_rate()).abs() > TOL {
        r.push(
            TotalRateMismatch,
            "",
            format!("cached total rate {} differs from sum {}", inst.total_rate(), sum),
        );
    }
    r
}

/// Checks the four Jaillet-Lu constraint families:
/// `x_i <= λ_i`, `x_j <= 1`, `Σ_i (2x_ij − λ_i)^+ <= 1 − ln 2` and `x >= 0`,
/// plus `x_ij = 0` off the edge set.
pub fn validate_matching(inst: &Instance, fm: &FractionalMatching) -> ValidationReport {
    use ViolationKind::*;
    let mut r = ValidationReport::default();
    let n_off = inst.offline().len();
    let mut xi = vec![0.0; inst.online_types().len()];
    let mut xj = vec![0.0; n_off];
    let mut excess = vec![0.0; n_off];

    for (i, j, f) in fm.iter() {
        let pair = format!("{i}->{j}");
        let (Some(a), Some(b)) = (inst.type_index(i), inst.offline_index(j)) else {
            if f != 0.0 {
                r.push(UnknownId, &pair, format!("flow {f} on {pair} names an unknown vertex"));
            }
            continue;
        };
        if !f.is_finite() {
            r.push(NonFinite, &pair, format!("flow on {pair} is not finite"));
            continue;
        }
        if f < -TOL {
            r.push(NegativeFlow, &pair, format!("flow on {pair} is negative ({f})"));
        }
        if inst.weight(i, j).is_none() {
            if f.abs() > TOL {
                r.push(FlowOffEdge, &pair, format!("flow {f} on {pair} which is not an edge"));
            }
            continue;
        }
        let rate = inst.online_types()[a].rate;
        xi[a] += f;
        xj[b] += f;
        excess[b] += (2.0 * f - rate).max(0.0);
    }

    for (t, &x) in inst.online_types().iter().zip(&xi) {
        if x > t.rate + TOL {
            r.push(TypeCapacity, &t.id, format!("x_i = {x} exceeds rate {} of type {:?}", t.rate, t.id));
        }
    }
    let cap = one_minus_ln2();
    for (k, j) in inst.offline().iter().enumerate() {
        if xj[k] > 1.0 + TOL {
            r.push(OfflineCapacity, j, format!("x_j = {} exceeds 1 at {j:?}", xj[k]));
        }
        if excess[k] > cap + TOL {
            r.push(
                JailletLu,
                j,
                format!("sum of (2x_ij - λ_i)^+ = {} exceeds 1 - ln 2 = {cap} at {j:?}", excess[k]),
            );
        }
    }
    r
}
