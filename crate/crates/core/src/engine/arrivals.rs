use rand::distr::Open01;
use rand::Rng;
use serde::Serialize;

use super::rng::{stream, Domain};
use crate::preprocess::SplitMap;
use crate::{Instance, Result, Error};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Arrival {
    pub time: f64,
    /// Index into the instance's online types.
    pub online: usize,
}

/// One realization of the Poisson arrival process on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArrivalSequence {
    pub arrivals: Vec<Arrival>,
    pub seed: u64,
    pub replication: u64,
}

impl ArrivalSequence {
    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    pub fn type_id<'a>(&self, inst: &'a Instance, k: usize) -> &'a str {
        &inst.online_types()[self.arrivals[k].online].id
    }
}

/// Superposition sampler: exponential(Λ) gaps, each event typed with
/// probability `λ_i / Λ`.
#[derive(Clone, Debug)]
pub(crate) struct Sampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl Sampler {
    pub fn new(rates: impl IntoIterator<Item = f64>) -> Self {
        let mut total = 0.0;
        let cumulative = rates
            .into_iter()
            .map(|r| {
                total += r.max(0.0);
                total
            })
            .collect();
        Sampler { cumulative, total }
    }

    pub fn pick<R: Rng>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    pub fn fill<R: Rng>(&self, rng: &mut R, out: &mut Vec<Arrival>) {
        out.clear();
        if self.total.is_nan() || self.total <= 0.0 {
            return;
        }
        let mut t = 0.0;
        loop {
            let u: f64 = rng.sample(Open01);
            t += -u.ln() / self.total;
            if t > 1.0 {
                break;
            }
            let online = self.pick(rng);
            out.push(Arrival { time: t, online });
        }
    }
}

/// Samples the arrivals of replication `replication` under run seed `seed`.
pub fn sample_arrivals(inst: &Instance, seed: u64, replication: u64) -> ArrivalSequence {
    let sampler = Sampler::new(inst.online_types().iter().map(|t| t.rate));
    let mut arrivals = Vec::new();
    sampler.fill(&mut stream(seed, replication, Domain::Arrivals), &mut arrivals);
    ArrivalSequence { arrivals, seed, replication }
}

/// Samples arrivals of the pre-split types and relabels each one as a child
/// type with probability `λ_child / λ_parent`. Distributed identically to
/// [`sample_arrivals`] on the split instance.
#[derive(Clone, Debug)]
pub(crate) struct RelabelSampler {
    parents: Sampler,
    children: Vec<(Sampler, Vec<usize>)>,
}

impl RelabelSampler {
    pub fn new(split_inst: &Instance, map: &SplitMap) -> Result<Self> {
        let mut rates = Vec::new();
        let mut children = Vec::new();
        for (_, kids) in map.parents() {
            let mut idx = Vec::with_capacity(kids.len());
            for c in kids {
                let k = split_inst
                    .type_index(&c.child)
                    .ok_or_else(|| Error::Internal(format!("split child {:?} not in instance", c.child)))?;
                idx.push(k);
            }
            rates.push(kids.iter().map(|c| c.rate).sum());
            children.push((Sampler::new(kids.iter().map(|c| c.rate)), idx));
        }
        Ok(RelabelSampler { parents: Sampler::new(rates), children })
    }

    pub fn fill(&self, seed: u64, replication: u64, out: &mut Vec<Arrival>) {
        self.parents.fill(&mut stream(seed, replication, Domain::Arrivals), out);
        let mut rng = stream(seed, replication, Domain::Relabel);
        for a in out.iter_mut() {
            let (sampler, idx) = &self.children[a.online];
            a.online = idx[sampler.pick(&mut rng)];
        }
    }
}

/// Arrivals for the split instance drawn through the relabelling rule.
pub fn sample_arrivals_relabelled(
    split_inst: &Instance,
    map: &SplitMap,
    seed: u64,
    replication: u64,
) -> Result<ArrivalSequence> {
    let sampler = RelabelSampler::new(split_inst, map)?;
    let mut arrivals = Vec::new();
    sampler.fill(seed, replication, &mut arrivals);
    Ok(ArrivalSequence { arrivals, seed, replication })
}
