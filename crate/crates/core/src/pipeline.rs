//! End-to-end run: Jaillet-Lu LP, preprocessing, then Monte Carlo of both
//! policies, with the closed-form ratio of every edge alongside.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::engine::{analytic_ratio, monte_carlo_with, McConfig, Policy, RunStats};
use crate::lp::{solve_jaillet_lu, LpStatus};
use crate::parallel::Execution;
use crate::preprocess::{preprocess, SplitMap};
use crate::{EdgeClass, Error, FractionalMatching, Instance, PreprocessedInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Lp,
    Preprocess,
    Simulate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Lp => "lp",
            Stage::Preprocess => "preprocess",
            Stage::Simulate => "simulate",
        })
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineError {}

fn at(stage: Stage) -> impl FnOnce(Error) -> PipelineError {
    move |error| PipelineError { stage, error }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub t0: f64,
    pub t1: f64,
    pub trials: u64,
    pub seed: u64,
    pub time_grid: Vec<f64>,
    pub with_opt: bool,
    pub execution: Execution,
}

impl PipelineConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        let mc = McConfig::new(Policy::Multistage, trials, seed);
        PipelineConfig {
            t0: crate::bounds::DEFAULT_T0,
            t1: crate::bounds::DEFAULT_T1,
            trials,
            seed,
            time_grid: mc.time_grid,
            with_opt: false,
            execution: mc.execution,
        }
    }

    fn mc(&self, policy: Policy, original: &Instance, map: &SplitMap) -> McConfig {
        let mut c = McConfig::new(policy, self.trials, self.seed);
        c.time_grid = self.time_grid.clone();
        c.with_opt = self.with_opt;
        if self.with_opt {
            c.original = Some((original.clone(), map.clone()));
        }
        c.execution = self.execution;
        c
    }
}

/// One row of the side-by-side table.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeComparison {
    pub edge_i: String,
    pub edge_j: String,
    pub class: EdgeClass,
    pub x_ij: f64,
    pub y_j: f64,
    pub analytic: f64,
    pub multistage_ratio: f64,
    pub multistage_stderr: f64,
    pub suggested_ratio: f64,
    pub suggested_stderr: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub lp_objective: f64,
    pub matching: FractionalMatching,
    pub preprocessed: PreprocessedInstance,
    pub split_map: SplitMap,
    pub multistage: RunStats,
    pub suggested: RunStats,
    pub comparison: Vec<EdgeComparison>,
}

impl PipelineOutput {
    pub fn write_comparison_csv<W: Write>(&self, w: W) -> crate::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.comparison {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn run_pipeline(inst: &Instance, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let (sol, matching) = solve_jaillet_lu(inst);
    if sol.status != LpStatus::Optimal {
        return Err(at(Stage::Lp)(Error::Internal(format!("Jaillet-Lu LP reported {:?}", sol.status))));
    }
    let (pinst, split_map) = preprocess(inst, &matching, cfg.t0, cfg.t1).map_err(at(Stage::Preprocess))?;
    let multistage = monte_carlo_with(&pinst, &cfg.mc(Policy::Multistage, inst, &split_map)).map_err(at(Stage::Simulate))?;
    let suggested = monte_carlo_with(&pinst, &cfg.mc(Policy::Suggested, inst, &split_map)).map_err(at(Stage::Simulate))?;

    let mut comparison = Vec::with_capacity(pinst.edges().len());
    for ((e, m), s) in pinst.edges().iter().zip(&multistage.edges).zip(&suggested.edges) {
        comparison.push(EdgeComparison {
            edge_i: m.edge_i.clone(),
            edge_j: m.edge_j.clone(),
            class: e.class,
            x_ij: e.flow,
            y_j: m.y_j,
            analytic: analytic_ratio(&pinst, e).map_err(at(Stage::Simulate))?,
            multistage_ratio: m.ratio,
            multistage_stderr: m.stderr,
            suggested_ratio: s.ratio,
            suggested_stderr: s.stderr,
        });
    }
    Ok(PipelineOutput {
        lp_objective: sol.objective,
        matching,
        preprocessed: pinst,
        split_map,
        multistage,
        suggested,
        comparison,
    })
}
