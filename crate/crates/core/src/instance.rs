use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

/// An edge as seen from its online type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub offline: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineType {
    pub id: String,
    pub rate: f64,
    pub edges: Vec<EdgeSpec>,
}

impl OnlineType {
    pub fn new(id: impl Into<String>, rate: f64) -> Self {
        OnlineType { id: id.into(), rate, edges: Vec::new() }
    }

    pub fn edge(mut self, offline: impl Into<String>, weight: f64) -> Self {
        self.edges.push(EdgeSpec { offline: offline.into(), weight });
        self
    }
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    online_types: Vec<OnlineType>,
    offline: Vec<String>,
}

/// Bipartite instance: online types with Poisson rates, offline vertices and
/// weighted edges.
///
/// Construction never fails; malformed data (negative rates, dangling edges,
/// duplicates) is reported by [`crate::validate_instance`]. The total rate
/// and id lookups are cached and refreshed by the mutating methods.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    online_types: Vec<OnlineType>,
    offline: Vec<String>,
    total_rate: f64,
    type_index: HashMap<String, usize>,
    offline_index: HashMap<String, usize>,
}

impl From<RawInstance> for Instance {
    fn from(raw: RawInstance) -> Self {
        Instance::new(raw.online_types, raw.offline)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance { online_types: inst.online_types, offline: inst.offline }
    }
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.online_types == other.online_types && self.offline == other.offline
    }
}

impl Instance {
    pub fn new(online_types: Vec<OnlineType>, offline: Vec<String>) -> Self {
        let mut inst = Instance {
            online_types,
            offline,
            total_rate: 0.0,
            type_index: HashMap::new(),
            offline_index: HashMap::new(),
        };
        inst.reindex();
        inst
    }

    fn reindex(&mut self) {
        self.total_rate = self.online_types.iter().map(|t| t.rate).sum();
        self.type_index.clear();
        for (k, t) in self.online_types.iter().enumerate() {
            self.type_index.entry(t.id.clone()).or_insert(k);
        }
        self.offline_index.clear();
        for (k, j) in self.offline.iter().enumerate() {
            self.offline_index.entry(j.clone()).or_insert(k);
        }
    }

    pub fn push_online_type(&mut self, t: OnlineType) {
        self.online_types.push(t);
        self.reindex();
    }

    pub fn push_offline(&mut self, id: impl Into<String>) {
        self.offline.push(id.into());
        self.reindex();
    }

    pub fn online_types(&self) -> &[OnlineType] {
        &self.online_types
    }

    pub fn offline(&self) -> &[String] {
        &self.offline
    }

    /// Λ, the sum of all arrival rates.
    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn type_index(&self, id: &str) -> Option<usize> {
        self.type_index.get(id).copied()
    }

    pub fn offline_index(&self, id: &str) -> Option<usize> {
        self.offline_index.get(id).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.online_types.iter().map(|t| t.edges.len()).sum()
    }

    /// Weight of edge `(i, j)`, if present.
    pub fn weight(&self, i: &str, j: &str) -> Option<f64> {
        let t = &self.online_types[self.type_index(i)?];
        t.edges.iter().find(|e| e.offline == j).map(|e| e.weight)
    }

    /// Iterates `(type index, online type, edge)` over every edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, &OnlineType, &EdgeSpec)> {
        self.online_types
            .iter()
            .enumerate()
            .flat_map(|(k, t)| t.edges.iter().map(move |e| (k, t, e)))
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
