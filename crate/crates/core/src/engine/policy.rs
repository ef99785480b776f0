use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arrivals::ArrivalSequence;
use super::rng::{stream, Domain};
use crate::{Error, FractionalMatching, Instance, PreprocessedInstance, Result, TypeKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Three-stage policy on a preprocessed instance.
    Multistage,
    /// Each arrival of type `i` proposes to `j` with probability `x_ij / λ_i`.
    Suggested,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Multistage => "multistage",
            Policy::Suggested => "suggested",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "multistage" => Ok(Policy::Multistage),
            "suggested" => Ok(Policy::Suggested),
            other => Err(format!("unknown policy {other:?} (expected multistage or suggested)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatchedPair {
    pub arrival: usize,
    pub offline: usize,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    /// Match time of each offline vertex, `+∞` if never matched.
    /// `A_j(t) = 1` iff `match_time[j] > t`.
    pub match_time: Vec<f64>,
    pub weight: f64,
}

/// Per-type decision rule. Edge ids index the caller's edge list.
#[derive(Clone, Debug)]
pub(crate) enum Rule {
    Idle,
    First { offline: usize, edge: usize },
    Second { offline: [usize; 2], edge: [usize; 2] },
    /// Cumulative proposal probabilities `(offline, edge, Σ x/λ)`.
    Suggest(Vec<(usize, usize, f64)>),
}

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub rules: Vec<Rule>,
    pub weights: Vec<f64>,
    pub n_offline: usize,
    pub t0: f64,
    pub t1: f64,
}

impl Compiled {
    /// Rules over `pinst.edges()` for either policy.
    pub fn from_preprocessed(pinst: &PreprocessedInstance, policy: Policy) -> Result<Self> {
        let inst = pinst.instance();
        let mut rules = vec![Rule::Idle; inst.online_types().len()];
        let edges = pinst.edges();
        let weights = edges.iter().map(|e| e.weight).collect();
        for (k, kind) in pinst.kinds().iter().enumerate() {
            let ids: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].online == k).collect();
            rules[k] = match (policy, *kind) {
                (_, TypeKind::Idle) => Rule::Idle,
                (Policy::Multistage, TypeKind::First { offline }) => Rule::First { offline, edge: ids[0] },
                (Policy::Multistage, TypeKind::Second { offline }) => {
                    if offline[0] == offline[1] {
                        return Err(Error::Internal(format!(
                            "second-class type {:?} has coinciding neighbors",
                            inst.online_types()[k].id
                        )));
                    }
                    Rule::Second { offline, edge: [ids[0], ids[1]] }
                }
                (Policy::Suggested, _) => {
                    let rate = inst.online_types()[k].rate;
                    let mut acc = 0.0;
                    Rule::Suggest(
                        ids.iter()
                            .map(|&e| {
                                acc += edges[e].flow / rate;
                                (edges[e].offline, e, acc)
                            })
                            .collect(),
                    )
                }
            };
        }
        Ok(Compiled { rules, weights, n_offline: inst.offline().len(), t0: pinst.t0(), t1: pinst.t1() })
    }

    /// Suggested Matching rules for an arbitrary feasible matching. Edge ids
    /// follow the positive-flow edges of `inst.edges()` in order.
    pub fn suggested(inst: &Instance, fm: &FractionalMatching) -> Self {
        let mut rules = Vec::with_capacity(inst.online_types().len());
        let mut weights = Vec::new();
        for t in inst.online_types() {
            let mut acc = 0.0;
            let mut targets = Vec::new();
            for e in &t.edges {
                let x = fm.get(&t.id, &e.offline);
                let Some(j) = inst.offline_index(&e.offline) else { continue };
                if x > 0.0 && t.rate > 0.0 {
                    acc += x / t.rate;
                    targets.push((j, weights.len(), acc));
                    weights.push(e.weight);
                }
            }
            rules.push(if targets.is_empty() { Rule::Idle } else { Rule::Suggest(targets) });
        }
        Compiled { rules, weights, n_offline: inst.offline().len(), t0: 0.0, t1: 1.0 }
    }
}

/// Reusable per-replication state.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    pub match_time: Vec<f64>,
    /// `(arrival index, offline, edge id)` of every match, in time order.
    pub matches: Vec<(usize, usize, usize)>,
}

impl Scratch {
    pub fn reset(&mut self, n_offline: usize) {
        self.match_time.clear();
        self.match_time.resize(n_offline, f64::INFINITY);
        self.matches.clear();
    }
}

/// Runs one replication. Returns the achieved weight.
pub(crate) fn simulate<R: Rng>(
    c: &Compiled,
    arrivals: &[super::arrivals::Arrival],
    rng: &mut R,
    s: &mut Scratch,
) -> f64 {
    s.reset(c.n_offline);
    let mut weight = 0.0;
    for (k, a) in arrivals.iter().enumerate() {
        let t = a.time;
        let target = match &c.rules[a.online] {
            Rule::Idle => None,
            Rule::First { offline, edge } => Some((*offline, *edge)),
            Rule::Second { offline, edge } => {
                if t <= c.t0 {
                    None
                } else {
                    let pick = if t <= c.t1 {
                        rng.random::<bool>() as usize
                    } else {
                        // status at t1: anything matched later still counts as unmatched then
                        let free = [s.match_time[offline[0]] > c.t1, s.match_time[offline[1]] > c.t1];
                        match free {
                            [true, false] => 0,
                            [false, true] => 1,
                            _ => rng.random::<bool>() as usize,
                        }
                    };
                    Some((offline[pick], edge[pick]))
                }
            }
            Rule::Suggest(targets) => {
                let u: f64 = rng.random();
                targets.iter().find(|&&(_, _, cum)| u < cum).map(|&(j, e, _)| (j, e))
            }
        };
        if let Some((j, e)) = target {
            if s.match_time[j].is_infinite() {
                s.match_time[j] = t;
                s.matches.push((k, j, e));
                weight += c.weights[e];
            }
        }
    }
    weight
}

fn result(s: Scratch, weight: f64, arr: &ArrivalSequence) -> MatchResult {
    let pairs = s
        .matches
        .iter()
        .map(|&(arrival, offline, _)| MatchedPair { arrival, offline, time: arr.arrivals[arrival].time })
        .collect();
    MatchResult { pairs, match_time: s.match_time, weight }
}

/// Multistage Suggested Matching on one arrival sequence. Coins come from
/// the policy stream of `(seed, arr.replication)`.
pub fn run_multistage(pinst: &PreprocessedInstance, arr: &ArrivalSequence, seed: u64) -> Result<MatchResult> {
    let c = Compiled::from_preprocessed(pinst, Policy::Multistage)?;
    let mut s = Scratch::default();
    let w = simulate(&c, &arr.arrivals, &mut stream(seed, arr.replication, Domain::Policy), &mut s);
    Ok(result(s, w, arr))
}

/// Suggested Matching driven by any matching feasible for the basic LP.
pub fn run_suggested(inst: &Instance, fm: &FractionalMatching, arr: &ArrivalSequence, seed: u64) -> MatchResult {
    let c = Compiled::suggested(inst, fm);
    let mut s = Scratch::default();
    let w = simulate(&c, &arr.arrivals, &mut stream(seed, arr.replication, Domain::Policy), &mut s);
    result(s, w, arr)
}
