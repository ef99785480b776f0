use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use super::arrivals::{Arrival, RelabelSampler, Sampler};
use super::offline::OfflineOpt;
use super::policy::{simulate, Compiled, Policy, Scratch};
use super::rng::{stream, Domain};
use crate::bounds::{ratio_first, ratio_second};
use crate::parallel::{self, Execution};
use crate::preprocess::SplitMap;
use crate::{EdgeClass, Error, Instance, PreprocessedInstance, Result, TypeKind};

/// Replications per work item. Fixed so the reduction order, and with it
/// every floating-point sum, is independent of the thread count.
const BATCH: u64 = 4096;

/// Where arrivals come from.
#[derive(Clone, Debug, Default)]
pub enum ArrivalMode {
    /// Poisson arrivals of the preprocessed types.
    #[default]
    Direct,
    /// Arrivals of the pre-split types, relabelled through the split map.
    Relabel(SplitMap),
}

#[derive(Clone, Debug)]
pub struct McConfig {
    pub policy: Policy,
    pub trials: u64,
    pub seed: u64,
    pub time_grid: Vec<f64>,
    /// Also solve the offline optimum of every replication.
    pub with_opt: bool,
    /// Pre-preprocessing instance and split map. When set, the offline
    /// optimum is taken over this instance, with every split arrival
    /// counted as its parent type; otherwise over the preprocessed one.
    pub original: Option<(Instance, SplitMap)>,
    pub execution: Execution,
    pub arrivals: ArrivalMode,
}

impl McConfig {
    pub fn new(policy: Policy, trials: u64, seed: u64) -> Self {
        McConfig {
            policy,
            trials,
            seed,
            time_grid: uniform_grid(21),
            with_opt: false,
            original: None,
            execution: Execution::Parallel,
            arrivals: ArrivalMode::Direct,
        }
    }
}

/// `points` evenly spaced times from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| if k + 1 == n { 1.0 } else { k as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeStats {
    pub edge_i: String,
    pub edge_j: String,
    pub class: EdgeClass,
    pub x_ij: f64,
    pub weight: f64,
    /// First-class flow into `edge_j`.
    pub y_j: f64,
    pub dummy: bool,
    pub matched_count: u64,
    /// `matched_count / (N x_ij)`.
    pub ratio: f64,
    /// Binomial standard error of `ratio`.
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalCurve {
    pub offline: String,
    pub y: f64,
    /// Replications with the vertex still unmatched at each grid time.
    pub counts: Vec<u64>,
    /// Empirical `E[A_j(t)]`.
    pub values: Vec<f64>,
}

/// Survival of `offline` conditioned on the status of `partner` at `t1`.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionalCurve {
    pub offline: String,
    pub partner: String,
    /// Conditioning value `A_partner(t1)`.
    pub partner_unmatched: bool,
    pub trials: u64,
    pub counts: Vec<u64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunStats {
    pub policy: Policy,
    pub trials: u64,
    pub seed: u64,
    pub t0: f64,
    pub t1: f64,
    pub time_grid: Vec<f64>,
    pub mean_weight: f64,
    pub mean_offline_opt: Option<f64>,
    pub mean_arrivals: f64,
    pub edges: Vec<EdgeStats>,
    pub survival: Vec<SurvivalCurve>,
    pub conditional: Vec<ConditionalCurve>,
}

impl RunStats {
    /// `edge_i, edge_j, class, x_ij, matched_count, ratio, stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["edge_i", "edge_j", "class", "x_ij", "matched_count", "ratio", "stderr"])?;
        for e in &self.edges {
            out.write_record([
                e.edge_i.clone(),
                e.edge_j.clone(),
                e.class.as_str().to_string(),
                e.x_ij.to_string(),
                e.matched_count.to_string(),
                e.ratio.to_string(),
                e.stderr.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn survival_of(&self, offline: &str) -> Option<&SurvivalCurve> {
        self.survival.iter().find(|s| s.offline == offline)
    }

    pub fn conditional_of(&self, offline: &str, partner: &str, partner_unmatched: bool) -> Option<&ConditionalCurve> {
        self.conditional
            .iter()
            .find(|c| c.offline == offline && c.partner == partner && c.partner_unmatched == partner_unmatched)
    }
}

/// Closed-form ratio guaranteed on a classified edge.
pub fn analytic_ratio(pinst: &PreprocessedInstance, e: &crate::classify::ClassifiedEdge) -> Result<f64> {
    let y = pinst.y()[e.offline].min(crate::one_minus_ln2());
    match e.class {
        EdgeClass::First => ratio_first(y, pinst.t0(), pinst.t1()),
        EdgeClass::Second => ratio_second(y, pinst.t0(), pinst.t1()),
    }
}

#[derive(Clone, Debug)]
struct Tally {
    edge_counts: Vec<u64>,
    survive: Vec<u64>,
    cond_trials: Vec<u64>,
    cond_survive: Vec<u64>,
    weight: f64,
    opt: f64,
    arrivals: u64,
}

impl Tally {
    fn new(n_edges: usize, n_off: usize, n_pairs: usize, g: usize) -> Self {
        Tally {
            edge_counts: vec![0; n_edges],
            survive: vec![0; n_off * g],
            cond_trials: vec![0; n_pairs * 2],
            cond_survive: vec![0; n_pairs * 2 * g],
            weight: 0.0,
            opt: 0.0,
            arrivals: 0,
        }
    }

    fn merge(&mut self, o: &Tally) {
        let add = |a: &mut [u64], b: &[u64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.edge_counts, &o.edge_counts);
        add(&mut self.survive, &o.survive);
        add(&mut self.cond_trials, &o.cond_trials);
        add(&mut self.cond_survive, &o.cond_survive);
        self.weight += o.weight;
        self.opt += o.opt;
        self.arrivals += o.arrivals;
    }
}

enum Source {
    Direct(Sampler),
    Relabel(RelabelSampler),
}

/// Runs `cfg.trials` independent replications and aggregates per-edge and
/// per-vertex statistics. The output depends only on the instance and
/// `cfg`, not on the execution mode or thread count.
pub fn monte_carlo_with(pinst: &PreprocessedInstance, cfg: &McConfig) -> Result<RunStats> {
    if cfg.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if cfg.time_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Domain("time grid must lie in [0, 1]".into()));
    }
    let compiled = Compiled::from_preprocessed(pinst, cfg.policy)?;
    let inst = pinst.instance();
    let source = match &cfg.arrivals {
        ArrivalMode::Direct => Source::Direct(Sampler::new(inst.online_types().iter().map(|t| t.rate))),
        ArrivalMode::Relabel(map) => Source::Relabel(RelabelSampler::new(inst, map)?),
    };
    let opt = cfg.with_opt.then(|| match &cfg.original {
        Some((orig, map)) => OfflineOpt::lifted(inst, orig, map),
        None => OfflineOpt::new(inst),
    });

    let pairs: Vec<(usize, usize)> = pinst
        .kinds()
        .iter()
        .filter_map(|k| match k {
            TypeKind::Second { offline: [a, b] } => Some([(*a, *b), (*b, *a)]),
            _ => None,
        })
        .flatten()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let grid = &cfg.time_grid;
    let g = grid.len();
    let n_off = inst.offline().len();
    let n_edges = pinst.edges().len();
    let t1 = pinst.t1();

    let batches: Vec<(u64, u64)> = (0..cfg.trials.div_ceil(BATCH))
        .map(|b| (b * BATCH, ((b + 1) * BATCH).min(cfg.trials)))
        .collect();

    let run_batch = |&(lo, hi): &(u64, u64)| {
        let mut tally = Tally::new(n_edges, n_off, pairs.len(), g);
        let mut scratch = Scratch::default();
        let mut arrivals: Vec<Arrival> = Vec::new();
        for rep in lo..hi {
            match &source {
                Source::Direct(s) => s.fill(&mut stream(cfg.seed, rep, Domain::Arrivals), &mut arrivals),
                Source::Relabel(s) => s.fill(cfg.seed, rep, &mut arrivals),
            }
            let mut coins = stream(cfg.seed, rep, Domain::Policy);
            tally.weight += simulate(&compiled, &arrivals, &mut coins, &mut scratch);
            tally.arrivals += arrivals.len() as u64;
            if let Some(o) = &opt {
                tally.opt += o.solve(&arrivals);
            }
            for &(_, _, e) in &scratch.matches {
                tally.edge_counts[e] += 1;
            }
            let mt = &scratch.match_time;
            for (j, &m) in mt.iter().enumerate() {
                for (k, &t) in grid.iter().enumerate() {
                    tally.survive[j * g + k] += (m > t) as u64;
                }
            }
            for (p, &(j, partner)) in pairs.iter().enumerate() {
                let cond = p * 2 + (mt[partner] > t1) as usize;
                tally.cond_trials[cond] += 1;
                for (k, &t) in grid.iter().enumerate() {
                    tally.cond_survive[cond * g + k] += (mt[j] > t) as u64;
                }
            }
        }
        tally
    };

    let partials = parallel::map_with(cfg.execution, &batches, run_batch);
    let mut total = Tally::new(n_edges, n_off, pairs.len(), g);
    for p in &partials {
        total.merge(p);
    }

    let n = cfg.trials as f64;
    let edges = pinst
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let count = total.edge_counts[k];
            let p = count as f64 / n;
            EdgeStats {
                edge_i: inst.online_types()[e.online].id.clone(),
                edge_j: inst.offline()[e.offline].clone(),
                class: e.class,
                x_ij: e.flow,
                weight: e.weight,
                y_j: pinst.y()[e.offline],
                dummy: pinst.is_dummy_type(e.online) || pinst.is_dummy_offline(e.offline),
                matched_count: count,
                ratio: p / e.flow,
                stderr: (p * (1.0 - p) / n).sqrt() / e.flow,
            }
        })
        .collect();

    let survival = (0..n_off)
        .map(|j| {
            let counts = total.survive[j * g..(j + 1) * g].to_vec();
            SurvivalCurve {
                offline: inst.offline()[j].clone(),
                y: pinst.y()[j],
                values: counts.iter().map(|&c| c as f64 / n).collect(),
                counts,
            }
        })
        .collect();

    let conditional = pairs
        .iter()
        .enumerate()
        .flat_map(|(p, &(j, partner))| {
            let total = &total;
            [false, true].into_iter().map(move |unmatched| {
                let cond = p * 2 + unmatched as usize;
                let trials = total.cond_trials[cond];
                let counts = total.cond_survive[cond * g..(cond + 1) * g].to_vec();
                ConditionalCurve {
                    offline: inst.offline()[j].clone(),
                    partner: inst.offline()[partner].clone(),
                    partner_unmatched: unmatched,
                    trials,
                    values: counts
                        .iter()
                        .map(|&c| if trials > 0 { c as f64 / trials as f64 } else { f64::NAN })
                        .collect(),
                    counts,
                }
            })
        })
        .collect();

    Ok(RunStats {
        policy: cfg.policy,
        trials: cfg.trials,
        seed: cfg.seed,
        t0: pinst.t0(),
        t1: pinst.t1(),
        time_grid: grid.clone(),
        mean_weight: total.weight / n,
        mean_offline_opt: cfg.with_opt.then(|| total.opt / n),
        mean_arrivals: total.arrivals as f64 / n,
        edges,
        survival,
        conditional,
    })
}

/// [`monte_carlo_with`] with direct arrivals, no offline optimum and the
/// default execution mode.
pub fn monte_carlo(
    pinst: &PreprocessedInstance,
    policy: Policy,
    trials: u64,
    seed: u64,
    time_grid: &[f64],
) -> Result<RunStats> {
    let mut cfg = McConfig::new(policy, trials, seed);
    cfg.time_grid = time_grid.to_vec();
    monte_carlo_with(pinst, &cfg)
}
