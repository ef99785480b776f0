//! Reduces any Jaillet-Lu-feasible solution to the two-class form.
//!
//! Three steps, each preserving the total weight and never increasing
//! `Σ_i (2x_ij − λ_i)^+` at any offline vertex:
//!
//! * [`pad_online`] gives every type `x_i = λ_i` by routing leftover rate to
//!   fresh zero-weight offline vertices (at least two, so none of them
//!   receives more than half of the type's rate);
//! * [`pad_offline`] gives every offline vertex `x_j = 1` with one extra
//!   zero-weight online type of rate at least 2;
//! * [`split_types`] splits each type into children whose flows are either a
//!   single edge with `x = λ` or two edges with `x = λ/2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{
    classify, validate_instance, validate_matching, EdgeSpec, Error, FractionalMatching, Instance,
    OnlineType, PreprocessedInstance, Result, DUMMY_PREFIX,
};

/// Interval boundaries closer than this are merged; children narrower than
/// this are dropped.
pub const SPLIT_EPS: f64 = 1e-12;

/// Tolerance used when rounding `λ_i − x_i` up to an integer.
const CEIL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitChild {
    pub child: String,
    pub rate: f64,
}

/// For every type that entered the split step, its children and their
/// rates. An arrival of type `i` is relabelled as child `c` with
/// probability `rate_c / λ_i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitMap {
    children: BTreeMap<String, Vec<SplitChild>>,
}

impl SplitMap {
    pub fn children(&self, parent: &str) -> &[SplitChild] {
        self.children.get(parent).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parents(&self) -> impl Iterator<Item = (&str, &[SplitChild])> {
        self.children.iter().map(|(p, c)| (p.as_str(), c.as_slice()))
    }

    /// Sum of the children's rates; equals the parent rate up to dropped slivers.
    pub fn parent_rate(&self, parent: &str) -> f64 {
        self.children(parent).iter().map(|c| c.rate).sum()
    }

    /// Relabelling probabilities `rate_c / λ_parent`.
    pub fn probabilities(&self, parent: &str) -> Vec<(&str, f64)> {
        let total = self.parent_rate(parent);
        self.children(parent)
            .iter()
            .map(|c| (c.child.as_str(), if total > 0.0 { c.rate / total } else { 0.0 }))
            .collect()
    }

    /// Child selected by a uniform draw `u ∈ [0, 1)`.
    pub fn pick(&self, parent: &str, u: f64) -> Option<&str> {
        let kids = self.children(parent);
        let total = self.parent_rate(parent);
        let mut acc = 0.0;
        for c in kids {
            acc += c.rate;
            if u * total < acc {
                return Some(&c.child);
            }
        }
        kids.last().map(|c| c.child.as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (1..).map(|n| format!("{base}~{n}")).find(|s| !taken(s)).unwrap()
}

fn ceil_tol(v: f64) -> usize {
    (v - CEIL_TOL).ceil().max(0.0) as usize
}

/// Number of dummy offline vertices used to absorb a gap of `gap`.
pub fn online_pad_count(gap: f64) -> usize {
    ceil_tol(gap).max(2)
}

/// Routes `λ_i − x_i` of every under-used type to
/// `max(⌈λ_i − x_i⌉, 2)` new zero-weight offline vertices.
pub fn pad_online(inst: &Instance, fm: &FractionalMatching) -> (Instance, FractionalMatching) {
    let (xi, _) = fm.totals(inst);
    let mut types = inst.online_types().to_vec();
    let mut offline = inst.offline().to_vec();
    let mut fm = fm.clone();
    let mut taken: std::collections::HashSet<String> = offline.iter().cloned().collect();

    for (k, t) in types.iter_mut().enumerate() {
        let gap = t.rate - xi[k];
        if gap <= SPLIT_EPS {
            continue;
        }
        let m = online_pad_count(gap);
        let share = gap / m as f64;
        for u in 0..m {
            let id = fresh_id(&format!("{DUMMY_PREFIX}pad/{}/{u}", t.id), |s| taken.contains(s));
            taken.insert(id.clone());
            offline.push(id.clone());
            t.edges.push(EdgeSpec { offline: id.clone(), weight: 0.0 });
            fm.set(t.id.clone(), id, share);
        }
    }
    (Instance::new(types, offline), fm)
}

/// Adds two zero-weight offline vertices and one zero-weight online type
/// sending `1 − x_j` to every offline vertex `j`.
pub fn pad_offline(inst: &Instance, fm: &FractionalMatching) -> (Instance, FractionalMatching) {
    let mut offline = inst.offline().to_vec();
    for n in 0..2 {
        let id = fresh_id(&format!("{DUMMY_PREFIX}sink/{n}"), |s| inst.offline_index(s).is_some());
        offline.push(id);
    }
    let extended = Instance::new(inst.online_types().to_vec(), offline.clone());
    let (_, xj) = fm.totals(&extended);

    let type_id = fresh_id(&format!("{DUMMY_PREFIX}filler"), |s| inst.type_index(s).is_some());
    let mut filler = OnlineType::new(type_id.clone(), 0.0);
    let mut fm = fm.clone();
    for (k, j) in offline.iter().enumerate() {
        let gap = 1.0 - xj[k];
        if gap > SPLIT_EPS {
            filler.edges.push(EdgeSpec { offline: j.clone(), weight: 0.0 });
            fm.set(type_id.clone(), j.clone(), gap);
            filler.rate += gap;
        }
    }
    let mut types = inst.online_types().to_vec();
    types.push(filler);
    (Instance::new(types, offline), fm)
}

/// Splits every type along the half-rate pairing of its flow intervals.
///
/// Edges of type `i` are laid out as consecutive intervals of `[0, x_i)`.
/// Position `θ` is paired with `θ + x_i/2`; every maximal piece of
/// `[0, x_i/2)` on which both ends stay in the same intervals becomes a
/// child type. A piece whose two ends land on the same edge collapses into a
/// single edge carrying the whole child rate.
pub fn split_types(inst: &Instance, fm: &FractionalMatching) -> (Instance, FractionalMatching, SplitMap) {
    let mut types = Vec::new();
    let mut out = FractionalMatching::new();
    let mut map = SplitMap::default();
    let mut taken: std::collections::HashSet<String> =
        inst.online_types().iter().map(|t| t.id.clone()).collect();

    for t in inst.online_types() {
        let edges: Vec<(&EdgeSpec, f64)> = t
            .edges
            .iter()
            .map(|e| (e, fm.get(&t.id, &e.offline)))
            .filter(|&(_, f)| f > 0.0)
            .collect();
        let mut cum = Vec::with_capacity(edges.len());
        let mut total = 0.0;
        for &(_, f) in &edges {
            total += f;
            cum.push(total);
        }
        let half = total / 2.0;
        // index of the edge whose interval contains θ
        let locate = |theta: f64| cum.iter().position(|&c| theta < c).unwrap_or(cum.len() - 1);

        let mut cuts = vec![0.0, half];
        for &c in &cum[..cum.len().saturating_sub(1)] {
            if c < half {
                cuts.push(c);
            } else {
                cuts.push(c - half);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|b, a| *b - *a <= SPLIT_EPS);
        if let Some(last) = cuts.last_mut() {
            *last = half;
        }

        let mut pieces = Vec::new();
        if total > SPLIT_EPS {
            for w in cuts.windows(2) {
                let (l, r) = (w[0], w[1]);
                if 2.0 * (r - l) < SPLIT_EPS {
                    continue;
                }
                let mid = 0.5 * (l + r);
                pieces.push((r - l, locate(mid), locate(mid + half)));
            }
        }

        let single = pieces.len() == 1;
        let mut kids = Vec::new();
        for (n, &(width, a, b)) in pieces.iter().enumerate() {
            let id = if single {
                t.id.clone()
            } else {
                let id = fresh_id(&format!("{}#{n}", t.id), |s| taken.contains(s));
                taken.insert(id.clone());
                id
            };
            let rate = 2.0 * width;
            let mut child = OnlineType::new(id.clone(), rate);
            if a == b {
                child.edges.push(edges[a].0.clone());
                out.set(id.clone(), edges[a].0.offline.clone(), rate);
            } else {
                for e in [a, b] {
                    child.edges.push(edges[e].0.clone());
                    out.set(id.clone(), edges[e].0.offline.clone(), width);
                }
            }
            kids.push(SplitChild { child: id, rate });
            types.push(child);
        }
        map.children.insert(t.id.clone(), kids);
    }
    (Instance::new(types, inst.offline().to_vec()), out, map)
}

/// Full reduction: `pad_online`, `pad_offline`, `split_types`, then
/// [`classify`] with the stage boundaries `t0 <= t1`.
pub fn preprocess(
    inst: &Instance,
    fm: &FractionalMatching,
    t0: f64,
    t1: f64,
) -> Result<(PreprocessedInstance, SplitMap)> {
    let report = validate_instance(inst);
    if let Some(v) = report.violations.first() {
        return Err(Error::InvalidInstance(v.message.clone()));
    }
    let report = validate_matching(inst, fm);
    if let Some(v) = report.violations.first() {
        return Err(Error::InfeasibleMatching(v.message.clone()));
    }
    let (inst, fm) = pad_online(inst, fm);
    let (inst, fm) = pad_offline(&inst, &fm);
    let (inst, fm, map) = split_types(&inst, &fm);
    let pinst = classify(&inst, &fm, t0, t1).map_err(|e| match e {
        Error::Domain(m) => Error::Domain(m),
        other => Error::Internal(format!("preprocessed output failed classification: {other}")),
    })?;
    Ok((pinst, map))
}
