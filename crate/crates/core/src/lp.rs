//! Matching LPs and a dense tableau simplex solver.
//!
//! Both builders produce `maximize c·v subject to A v <= b, v >= 0`. The
//! first `|E|` variables are the edge flows `x_ij` in [`Instance::edges`]
//! order; the Jaillet-Lu LP appends one auxiliary `z_ij >= (2x_ij − λ_i)`
//! per edge so that `Σ_i z_ij <= 1 − ln 2` bounds the positive parts.

use std::fmt::Write as _;

use serde::Serialize;

use crate::{one_minus_ln2, FractionalMatching, Instance};

/// Pivot and feasibility tolerance of the simplex method.
pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// `maximize objective · v` subject to `row · v <= rhs` for every row, `v >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

impl LpProblem {
    pub fn new() -> Self {
        LpProblem { names: Vec::new(), objective: Vec::new(), rows: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(Row { coeffs, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    /// Checks that every row references a declared variable and all data is finite.
    pub fn check(&self) -> Result<(), String> {
        if self.objective.len() != self.names.len() {
            return Err("objective length differs from variable count".into());
        }
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(format!("non-finite objective coefficient {c}"));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(format!("row {r} has non-finite rhs"));
            }
            for &(v, a) in &row.coeffs {
                if v >= self.names.len() {
                    return Err(format!("row {r} references undeclared variable {v}"));
                }
                if !a.is_finite() {
                    return Err(format!("row {r} has a non-finite coefficient"));
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump for debugging.
    pub fn dump(&self) -> String {
        let term = |a: f64, v: usize| format!("{a:+} {}", self.names[v]);
        let mut s = String::new();
        writeln!(s, "variables {}", self.names.len()).unwrap();
        for n in &self.names {
            writeln!(s, "  {n} >= 0").unwrap();
        }
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(v, &c)| term(c, v))
            .collect();
        writeln!(s, "maximize\n  {}", if obj.is_empty() { "0".into() } else { obj.join(" ") }).unwrap();
        writeln!(s, "subject to").unwrap();
        for (r, row) in self.rows.iter().enumerate() {
            let lhs: Vec<String> = row.coeffs.iter().map(|&(v, a)| term(a, v)).collect();
            writeln!(s, "  r{r}: {} <= {}", lhs.join(" "), row.rhs).unwrap();
        }
        s
    }
}

impl Default for LpProblem {
    fn default() -> Self {
        Self::new()
    }
}

fn matching_rows(inst: &Instance, p: &mut LpProblem) -> Vec<Vec<usize>> {
    let mut by_offline: Vec<Vec<usize>> = vec![Vec::new(); inst.offline().len()];
    let mut by_type: Vec<Vec<usize>> = vec![Vec::new(); inst.online_types().len()];
    for (k, t, e) in inst.edges() {
        let v = p.add_var(format!("x[{},{}]", t.id, e.offline), e.weight);
        by_type[k].push(v);
        if let Some(j) = inst.offline_index(&e.offline) {
            by_offline[j].push(v);
        }
    }
    for (k, t) in inst.online_types().iter().enumerate() {
        p.add_row(by_type[k].iter().map(|&v| (v, 1.0)).collect(), t.rate);
    }
    for vars in &by_offline {
        p.add_row(vars.iter().map(|&v| (v, 1.0)).collect(), 1.0);
    }
    by_offline
}

/// The plain matching LP: `x_i <= λ_i`, `x_j <= 1`.
pub fn build_basic_matching(inst: &Instance) -> LpProblem {
    let mut p = LpProblem::new();
    matching_rows(inst, &mut p);
    p
}

/// The Jaillet-Lu LP.
pub fn build_jaillet_lu(inst: &Instance) -> LpProblem {
    let mut p = LpProblem::new();
    matching_rows(inst, &mut p);
    let n_edges = p.num_vars();
    let mut z_by_offline: Vec<Vec<usize>> = vec![Vec::new(); inst.offline().len()];
    for (x, (_, t, e)) in inst.edges().enumerate() {
        let z = p.add_var(format!("z[{},{}]", t.id, e.offline), 0.0);
        debug_assert_eq!(z, n_edges + x);
        p.add_row(vec![(x, 2.0), (z, -1.0)], t.rate);
        if let Some(j) = inst.offline_index(&e.offline) {
            z_by_offline[j].push(z);
        }
    }
    let cap = one_minus_ln2();
    for zs in &z_by_offline {
        p.add_row(zs.iter().map(|&z| (z, 1.0)).collect(), cap);
    }
    p
}

/// Reads the edge flows (the first `|E|` variables) back into a matching.
/// Auxiliary variables are dropped.
pub fn to_matching(inst: &Instance, sol: &LpSolution) -> FractionalMatching {
    let mut fm = FractionalMatching::new();
    for ((_, t, e), &v) in inst.edges().zip(&sol.values) {
        if v > 0.0 {
            fm.set(t.id.clone(), e.offline.clone(), v);
        }
    }
    fm
}

/// Solves the Jaillet-Lu LP for `inst` and returns the optimal matching.
pub fn solve_jaillet_lu(inst: &Instance) -> (LpSolution, FractionalMatching) {
    let sol = solve(&build_jaillet_lu(inst));
    let fm = to_matching(inst, &sol);
    (sol, fm)
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..w {
            self.a[pr * w + c] *= inv;
        }
        self.a[pr * w + pc] = 1.0;
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for (x, &p) in obj.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Reduced-cost row for `cost`: `obj[c] = cost[c] − c_B · column(c)`,
    /// and `obj[cols] = −c_B · rhs`.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (c, o) in obj.iter_mut().enumerate() {
                    *o -= cb * self.at(r, c);
                }
            }
        }
        obj
    }

    /// Primal simplex with Bland's rule, maximizing. Columns `>= allowed`
    /// never enter. Returns `false` if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> bool {
        loop {
            let Some(pc) = (0..allowed).find(|&c| obj[c] > PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    let better = match best {
                        None => true,
                        Some((b, _, bv)) => {
                            ratio < b - PIVOT_TOL || (ratio <= b + PIVOT_TOL && self.basis[r] < bv)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                Some((_, pr, _)) => self.pivot(pr, pc, obj),
                None => return false,
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Two-phase dense tableau simplex with Bland's anti-cycling rule.
///
/// Deterministic for identical input. An invalid problem (see
/// [`LpProblem::check`]) is reported as infeasible.
pub fn solve(p: &LpProblem) -> LpSolution {
    let n = p.num_vars();
    if p.check().is_err() {
        return LpSolution { status: LpStatus::Infeasible, objective: f64::NAN, values: vec![0.0; n] };
    }
    let m = p.rows.len();
    let negative: Vec<usize> = (0..m).filter(|&r| p.rows[r].rhs < 0.0).collect();
    let n_art = negative.len();
    let cols = n + m + n_art;
    let w = cols + 1;
    let mut t = Tableau { a: vec![0.0; m * w], rows: m, cols, basis: vec![0; m] };

    let mut art = 0;
    for (r, row) in p.rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(v, a) in &row.coeffs {
            t.a[r * w + v] += sign * a;
        }
        t.a[r * w + n + r] = sign;
        t.a[r * w + cols] = sign * row.rhs;
        if row.rhs < 0.0 {
            t.a[r * w + n + m + art] = 1.0;
            t.basis[r] = n + m + art;
            art += 1;
        } else {
            t.basis[r] = n + r;
        }
    }

    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in &mut cost[n + m..] {
            *c = -1.0;
        }
        let mut obj = t.reduced_costs(&cost);
        t.optimize(&mut obj, cols);
        // obj[cols] is the remaining sum of artificials
        if obj[cols] > PIVOT_TOL {
            return LpSolution { status: LpStatus::Infeasible, objective: f64::NAN, values: vec![0.0; n] };
        }
        // drive remaining (zero-level) artificials out of the basis
        let mut r = 0;
        while r < t.rows {
            if t.basis[r] >= n + m {
                match (0..n + m).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                    Some(c) => {
                        t.pivot(r, c, &mut obj);
                        r += 1;
                    }
                    None => t.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&p.objective);
    let mut obj = t.reduced_costs(&cost);
    if !t.optimize(&mut obj, n + m) {
        return LpSolution { status: LpStatus::Unbounded, objective: f64::INFINITY, values: vec![0.0; n] };
    }

    let mut values = vec![0.0; n];
    for r in 0..t.rows {
        let b = t.basis[r];
        if b < n {
            values[b] = t.rhs(r).max(0.0);
        }
    }
    for v in &mut values {
        if *v < 1e-13 {
            *v = 0.0;
        }
    }
    let objective = values.iter().zip(&p.objective).map(|(v, c)| v * c).sum();
    LpSolution { status: LpStatus::Optimal, objective, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{validate_matching, OnlineType};

    fn single(rate: f64, w: f64) -> Instance {
        Instance::new(vec![OnlineType::new("i", rate).edge("j", w)], vec!["j".into()])
    }

    fn complete(n_types: usize, n_off: usize) -> Instance {
        let offline: Vec<String> = (0..n_off).map(|j| format!("j{j}")).collect();
        let types = (0..n_types)
            .map(|i| offline.iter().fold(OnlineType::new(format!("i{i}"), 1.0), |t, j| t.edge(j, 1.0)))
            .collect();
        Instance::new(types, offline)
    }

    #[test]
    fn jaillet_lu_shape() {
        let p = build_jaillet_lu(&single(1.0, 1.0));
        assert_eq!((p.num_vars(), p.rows.len()), (2, 4));
        let p = build_jaillet_lu(&complete(2, 2));
        assert_eq!((p.num_vars(), p.rows.len()), (8, 10));
        let p = build_jaillet_lu(&Instance::new(vec![], vec![]));
        assert_eq!(p.num_vars(), 0);
        assert_eq!(solve(&p).objective, 0.0);
    }

    #[test]
    fn basic_matching_small_cases() {
        let s = solve(&build_basic_matching(&single(1.0, 1.0)));
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);

        let s = solve(&build_basic_matching(&single(0.3, 1.0)));
        assert!((s.values[0] - 0.3).abs() < 1e-12);

        let s = solve(&build_basic_matching(&single(1.0, 0.0)));
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn jaillet_lu_single_edge() {
        let s = solve(&build_jaillet_lu(&single(1.0, 1.0)));
        let expected = (2.0 - std::f64::consts::LN_2) / 2.0;
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - expected).abs() < 1e-7 * expected);
    }

    #[test]
    fn jaillet_lu_two_neighbors() {
        let inst = Instance::new(
            vec![OnlineType::new("i", 1.0).edge("a", 1.0).edge("b", 1.0)],
            vec!["a".into(), "b".into()],
        );
        let (s, fm) = solve_jaillet_lu(&inst);
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(validate_matching(&inst, &fm).is_ok());
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut p = LpProblem::new();
        let x = p.add_var("x", 1.0);
        p.add_row(vec![(x, 1.0)], -1.0);
        assert_eq!(solve(&p).status, LpStatus::Infeasible);

        let mut p = LpProblem::new();
        let x = p.add_var("x", 1.0);
        let y = p.add_var("y", 0.0);
        p.add_row(vec![(y, 1.0)], 1.0);
        let _ = x;
        assert_eq!(solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_feasible() {
        // max x + y  s.t.  x + y <= 4, -x <= -1 (x >= 1), y <= 2
        let mut p = LpProblem::new();
        let x = p.add_var("x", 1.0);
        let y = p.add_var("y", 2.0);
        p.add_row(vec![(x, 1.0), (y, 1.0)], 4.0);
        p.add_row(vec![(x, -1.0)], -1.0);
        p.add_row(vec![(y, 1.0)], 2.0);
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 6.0).abs() < 1e-12);
        assert!((s.values[x] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let mut p = LpProblem::new();
        p.add_var("x", 1.0);
        p.add_row(vec![(3, 1.0)], 1.0);
        assert!(p.check().is_err());
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn dump_lists_rows() {
        let d = build_jaillet_lu(&single(1.0, 1.0)).dump();
        assert!(d.contains("x[i,j]"));
        assert!(d.contains("z[i,j]"));
        assert_eq!(d.matches(" <= ").count(), 4);
    }
}
