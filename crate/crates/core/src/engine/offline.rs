use super::arrivals::{Arrival, ArrivalSequence};
use crate::preprocess::SplitMap;
use crate::Instance;

/// Per-type adjacency `(offline index, weight)` for repeated optimum solves.
#[derive(Clone, Debug)]
pub(crate) struct OfflineOpt {
    adjacency: Vec<Vec<(usize, f64)>>,
    n_offline: usize,
}

impl OfflineOpt {
    pub fn new(inst: &Instance) -> Self {
        let adjacency = inst
            .online_types()
            .iter()
            .map(|t| {
                t.edges
                    .iter()
                    .filter_map(|e| Some((inst.offline_index(&e.offline)?, e.weight)))
                    .filter(|&(_, w)| w > 0.0)
                    .collect()
            })
            .collect();
        OfflineOpt { adjacency, n_offline: inst.offline().len() }
    }

    /// Optimum over `original` for arrivals of the split types of
    /// `split_inst`: each child arrival counts as an arrival of its parent.
    /// Padding types have no parent in `original` and never match.
    pub fn lifted(split_inst: &Instance, original: &Instance, map: &SplitMap) -> Self {
        let base = OfflineOpt::new(original);
        let mut adjacency = vec![Vec::new(); split_inst.online_types().len()];
        for (parent, kids) in map.parents() {
            let Some(p) = original.type_index(parent) else { continue };
            for c in kids {
                if let Some(k) = split_inst.type_index(&c.child) {
                    adjacency[k] = base.adjacency[p].clone();
                }
            }
        }
        OfflineOpt { adjacency, n_offline: base.n_offline }
    }

    pub fn solve(&self, arrivals: &[Arrival]) -> f64 {
        let rows: Vec<&[(usize, f64)]> = arrivals
            .iter()
            .map(|a| self.adjacency[a.online].as_slice())
            .filter(|adj| !adj.is_empty())
            .collect();
        if rows.is_empty() {
            return 0.0;
        }
        let mut w = vec![vec![0.0; self.n_offline]; rows.len()];
        for (r, adj) in rows.iter().enumerate() {
            for &(j, weight) in adj.iter() {
                w[r][j] = weight;
            }
        }
        max_weight_assignment(&w)
    }
}

/// Maximum total weight of a matching in the bipartite graph with
/// nonnegative weight matrix `w` (zero entries act as non-edges).
///
/// Hungarian method with potentials (shortest augmenting paths), O(n² m)
/// with `n <= m` after transposing if needed.
pub fn max_weight_assignment(w: &[Vec<f64>]) -> f64 {
    let n_rows = w.len();
    let n_cols = w.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return 0.0;
    }
    let transpose = n_rows > n_cols;
    let (n, m) = if transpose { (n_cols, n_rows) } else { (n_rows, n_cols) };
    let cost = |i: usize, j: usize| -> f64 {
        let x = if transpose { w[j][i] } else { w[i][j] };
        -x
    };

    // 1-based rows and columns; column 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| row_of[j] != 0).map(|j| -cost(row_of[j] - 1, j - 1)).sum()
}

/// Weight of the best matching between the realized arrivals (each usable
/// once) and the offline vertices.
pub fn offline_optimum(inst: &Instance, arr: &ArrivalSequence) -> f64 {
    OfflineOpt::new(inst).solve(&arr.arrivals)
}
