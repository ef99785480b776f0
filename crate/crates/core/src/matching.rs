use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Instance, Result};

#[derive(Serialize, Deserialize)]
struct RawFlow {
    i: String,
    j: String,
    flow: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMatching {
    x: Vec<RawFlow>,
}

/// Flow values `x_ij` keyed by `(online type id, offline id)`.
///
/// Pairs absent from the map have flow 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawMatching", into = "RawMatching")]
pub struct FractionalMatching {
    x: BTreeMap<(String, String), f64>,
}

impl From<RawMatching> for FractionalMatching {
    fn from(raw: RawMatching) -> Self {
        let mut fm = FractionalMatching::new();
        for f in raw.x {
            *fm.x.entry((f.i, f.j)).or_insert(0.0) += f.flow;
        }
        fm
    }
}

impl From<FractionalMatching> for RawMatching {
    fn from(fm: FractionalMatching) -> Self {
        RawMatching {
            x: fm.x.into_iter().map(|((i, j), flow)| RawFlow { i, j, flow }).collect(),
        }
    }
}

impl FractionalMatching {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, i: impl Into<String>, j: impl Into<String>, flow: f64) {
        self.x.insert((i.into(), j.into()), flow);
    }

    pub fn add(&mut self, i: &str, j: &str, flow: f64) {
        *self.x.entry((i.to_string(), j.to_string())).or_insert(0.0) += flow;
    }

    pub fn get(&self, i: &str, j: &str) -> f64 {
        // BTreeMap<(String, String)> cannot be queried by (&str, &str)
        self.x.get(&(i.to_string(), j.to_string())).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.x.iter().map(|((i, j), &f)| (i.as_str(), j.as_str(), f))
    }

    /// Flows aligned with `inst`: `out[k][e]` is the flow on edge `e` of type `k`.
    pub fn aligned(&self, inst: &Instance) -> Vec<Vec<f64>> {
        inst.online_types()
            .iter()
            .map(|t| t.edges.iter().map(|e| self.get(&t.id, &e.offline)).collect())
            .collect()
    }

    /// `(x_i per online type, x_j per offline vertex)` in instance order.
    /// Entries naming unknown ids are ignored.
    pub fn totals(&self, inst: &Instance) -> (Vec<f64>, Vec<f64>) {
        let mut xi = vec![0.0; inst.online_types().len()];
        let mut xj = vec![0.0; inst.offline().len()];
        for (i, j, f) in self.iter() {
            if let (Some(a), Some(b)) = (inst.type_index(i), inst.offline_index(j)) {
                xi[a] += f;
                xj[b] += f;
            }
        }
        (xi, xj)
    }

    /// Σ w_ij x_ij over edges of `inst`.
    pub fn objective(&self, inst: &Instance) -> f64 {
        inst.edges().map(|(_, t, e)| e.weight * self.get(&t.id, &e.offline)).sum()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
