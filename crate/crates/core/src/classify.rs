use serde::{Deserialize, Serialize};

use crate::{
    is_dummy, one_minus_ln2, validate_instance, Error, FractionalMatching, Instance, Result, TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    /// `x_ij = λ_i`; the type has this single neighbor.
    First,
    /// `x_ij = λ_i / 2`; the type has exactly two such neighbors.
    Second,
}

impl EdgeClass {
    /// Class of a positive edge with flow `flow` out of a type with rate `rate`.
    pub fn of(rate: f64, flow: f64) -> Option<EdgeClass> {
        if (flow - rate).abs() <= TOL {
            Some(EdgeClass::First)
        } else if (flow - rate / 2.0).abs() <= TOL {
            Some(EdgeClass::Second)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::First => "first",
            EdgeClass::Second => "second",
        }
    }
}

/// Role of an online type after preprocessing. Offline vertices are indices
/// into the instance's offline list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeKind {
    /// No positive flow (and zero rate).
    Idle,
    First { offline: usize },
    Second { offline: [usize; 2] },
}

/// A positive-flow edge of a preprocessed instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifiedEdge {
    pub online: usize,
    pub offline: usize,
    pub class: EdgeClass,
    pub flow: f64,
    pub weight: f64,
}

/// An instance whose matching has the two-class structure the Multistage
/// policy needs, together with the stage boundaries `t0 <= t1`.
#[derive(Clone, Debug)]
pub struct PreprocessedInstance {
    instance: Instance,
    matching: FractionalMatching,
    kinds: Vec<TypeKind>,
    edges: Vec<ClassifiedEdge>,
    y: Vec<f64>,
    t0: f64,
    t1: f64,
}

impl PreprocessedInstance {
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn matching(&self) -> &FractionalMatching {
        &self.matching
    }

    pub fn kinds(&self) -> &[TypeKind] {
        &self.kinds
    }

    /// Positive edges in type order, then in each type's edge-list order.
    pub fn edges(&self) -> &[ClassifiedEdge] {
        &self.edges
    }

    /// `y_j`: total first-class flow into each offline vertex.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_of(&self, offline_id: &str) -> Option<f64> {
        self.instance.offline_index(offline_id).map(|k| self.y[k])
    }

    pub fn edge_class(&self, i: &str, j: &str) -> Option<EdgeClass> {
        let a = self.instance.type_index(i)?;
        let b = self.instance.offline_index(j)?;
        self.edges.iter().find(|e| e.online == a && e.offline == b).map(|e| e.class)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn with_times(mut self, t0: f64, t1: f64) -> Result<Self> {
        check_times(t0, t1)?;
        self.t0 = t0;
        self.t1 = t1;
        Ok(self)
    }

    pub fn is_dummy_type(&self, k: usize) -> bool {
        is_dummy(&self.instance.online_types()[k].id)
    }

    pub fn is_dummy_offline(&self, k: usize) -> bool {
        is_dummy(&self.instance.offline()[k])
    }

    /// For a second-class edge, the other neighbor of its type.
    pub fn partner(&self, edge: &ClassifiedEdge) -> Option<usize> {
        match self.kinds[edge.online] {
            TypeKind::Second { offline: [a, b] } => Some(if a == edge.offline { b } else { a }),
            _ => None,
        }
    }
}

pub(crate) fn check_times(t0: f64, t1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t0) || !(0.0..=1.0).contains(&t1) || t0 > t1 {
        return Err(Error::Domain(format!("need 0 <= t0 <= t1 <= 1, got t0={t0}, t1={t1}")));
    }
    Ok(())
}

/// Labels every positive edge as first or second class and computes `y_j`.
///
/// Fails unless the matching satisfies `x_i = λ_i`, `x_j = 1`,
/// `x_ij ∈ {0, λ_i/2, λ_i}` with the matching degree structure, and
/// `y_j <= 1 − ln 2`, all within [`TOL`].
pub fn classify(inst: &Instance, fm: &FractionalMatching, t0: f64, t1: f64) -> Result<PreprocessedInstance> {
    check_times(t0, t1)?;
    let report = validate_instance(inst);
    if !report.is_ok() {
        return Err(Error::InvalidInstance(report.violations[0].message.clone()));
    }
    for (i, j, f) in fm.iter() {
        if f != 0.0 && inst.weight(i, j).is_none() {
            return Err(Error::NotPreprocessed(format!("flow {f} on non-edge {i}->{j}")));
        }
    }

    let n_off = inst.offline().len();
    let mut kinds = Vec::with_capacity(inst.online_types().len());
    let mut edges = Vec::new();
    let mut y = vec![0.0; n_off];
    let mut xj = vec![0.0; n_off];

    for (k, t) in inst.online_types().iter().enumerate() {
        let positive: Vec<(usize, f64, f64)> = t
            .edges
            .iter()
            .filter_map(|e| {
                let f = fm.get(&t.id, &e.offline);
                (f > 0.0).then(|| (inst.offline_index(&e.offline).unwrap(), f, e.weight))
            })
            .collect();
        let xi: f64 = positive.iter().map(|p| p.1).sum();
        if (xi - t.rate).abs() > TOL {
            return Err(Error::NotPreprocessed(format!(
                "type {:?}: x_i = {xi} differs from rate {}",
                t.id, t.rate
            )));
        }
        for &(j, f, _) in &positive {
            if EdgeClass::of(t.rate, f).is_none() {
                return Err(Error::NotPreprocessed(format!(
                    "edge {}->{}: flow {f} is neither λ = {} nor λ/2",
                    t.id,
                    inst.offline()[j],
                    t.rate
                )));
            }
            xj[j] += f;
        }
        let kind = match positive.as_slice() {
            [] => TypeKind::Idle,
            [(j, f, w)] => {
                y[*j] += f;
                edges.push(ClassifiedEdge { online: k, offline: *j, class: EdgeClass::First, flow: *f, weight: *w });
                TypeKind::First { offline: *j }
            }
            [(a, fa, wa), (b, fb, wb)] => {
                for (j, f, w) in [(a, fa, wa), (b, fb, wb)] {
                    edges.push(ClassifiedEdge {
                        online: k,
                        offline: *j,
                        class: EdgeClass::Second,
                        flow: *f,
                        weight: *w,
                    });
                }
                TypeKind::Second { offline: [*a, *b] }
            }
            _ => {
                return Err(Error::NotPreprocessed(format!(
                    "type {:?} has {} positive edges",
                    t.id,
                    positive.len()
                )))
            }
        };
        kinds.push(kind);
    }

    let cap = one_minus_ln2();
    for (k, j) in inst.offline().iter().enumerate() {
        if (xj[k] - 1.0).abs() > TOL {
            return Err(Error::NotPreprocessed(format!("offline {j:?}: x_j = {} is not 1", xj[k])));
        }
        if y[k] > cap + TOL {
            return Err(Error::NotPreprocessed(format!("offline {j:?}: y_j = {} exceeds 1 - ln 2", y[k])));
        }
    }

    Ok(PreprocessedInstance {
        instance: inst.clone(),
        matching: fm.clone(),
        kinds,
        edges,
        y,
        t0,
        t1,
    })
}
