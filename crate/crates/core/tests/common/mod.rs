//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stochmatch::{FractionalMatching, Instance, OnlineType};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `eps`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Integrates a piecewise-smooth `f` by splitting at the given breakpoints.
pub fn simpson_pieces<F: Fn(f64) -> f64>(f: &F, points: &[f64], eps: f64) -> f64 {
    points.windows(2).map(|w| simpson(f, w[0], w[1], eps)).sum()
}

/// Maximum-weight matching by exhaustive enumeration: every row is either
/// left unmatched or assigned to a free column.
pub fn brute_force_matching(w: &[Vec<f64>]) -> f64 {
    fn rec(w: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == w.len() {
            return 0.0;
        }
        let mut best = rec(w, row + 1, used);
        for j in 0..used.len() {
            if !used[j] && w[row][j] > 0.0 {
                used[j] = true;
                best = best.max(w[row][j] + rec(w, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    rec(w, 0, &mut vec![false; cols])
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random valid instance with up to `max_types` online types and
/// `max_offline` offline vertices. Rates in `(0, max_rate]`, weights in
/// `[0, 10)`, each possible edge present with probability `density`.
pub fn random_instance(r: &mut StdRng, max_types: usize, max_offline: usize, max_rate: f64, density: f64) -> Instance {
    let n_types = r.random_range(1..=max_types);
    let n_off = r.random_range(1..=max_offline);
    let offline: Vec<String> = (0..n_off).map(|j| format!("j{j}")).collect();
    let types = (0..n_types)
        .map(|i| {
            let rate = max_rate * (1.0 - r.random::<f64>());
            let mut t = OnlineType::new(format!("i{i}"), rate);
            for j in &offline {
                if r.random::<f64>() < density {
                    let w = if r.random::<f64>() < 0.1 { 0.0 } else { 10.0 * r.random::<f64>() };
                    t = t.edge(j, w);
                }
            }
            t
        })
        .collect();
    Instance::new(types, offline)
}

/// Random Jaillet-Lu-feasible matching on `inst`, not necessarily optimal:
/// random flows scaled down until every constraint holds.
pub fn random_feasible_matching(r: &mut StdRng, inst: &Instance) -> FractionalMatching {
    let mut fm = FractionalMatching::new();
    for t in inst.online_types() {
        for e in &t.edges {
            if r.random::<f64>() < 0.8 {
                fm.set(t.id.clone(), e.offline.clone(), r.random::<f64>() * t.rate);
            }
        }
    }
    let cap = 1.0 - std::f64::consts::LN_2;
    for _ in 0..200 {
        let (xi, xj) = fm.totals(inst);
        let mut excess = vec![0.0; inst.offline().len()];
        for (i, j, f) in fm.iter() {
            let t = inst.type_index(i).unwrap();
            excess[inst.offline_index(j).unwrap()] += (2.0 * f - inst.online_types()[t].rate).max(0.0);
        }
        let mut worst: f64 = 1.0;
        for (k, t) in inst.online_types().iter().enumerate() {
            if xi[k] > t.rate {
                worst = worst.min(t.rate / xi[k]);
            }
        }
        for k in 0..xj.len() {
            if xj[k] > 1.0 {
                worst = worst.min(1.0 / xj[k]);
            }
            if excess[k] > cap {
                worst = worst.min(0.9);
            }
        }
        if worst >= 1.0 {
            break;
        }
        let scaled: Vec<(String, String, f64)> =
            fm.iter().map(|(i, j, f)| (i.to_string(), j.to_string(), f * worst * (1.0 - 1e-12))).collect();
        for (i, j, f) in scaled {
            fm.set(i, j, f);
        }
    }
    fm
}

/// Random instance with exactly `n_edges` (1 or 2) edges, in one of the
/// shapes "one type, two vertices", "two types, one vertex" or "two
/// disjoint edges". Rates in `(0, 1.5]`, weights in `[0, 1)`.
pub fn tiny_instance(r: &mut StdRng, n_edges: usize) -> Instance {
    let rate = |r: &mut StdRng| 1.5 * (1.0 - r.random::<f64>());
    let w = |r: &mut StdRng| r.random::<f64>();
    if n_edges == 1 {
        return Instance::new(vec![OnlineType::new("a", rate(r)).edge("j", w(r))], vec!["j".into()]);
    }
    match r.random_range(0..3) {
        0 => Instance::new(
            vec![OnlineType::new("a", rate(r)).edge("j", w(r)).edge("k", w(r))],
            vec!["j".into(), "k".into()],
        ),
        1 => Instance::new(
            vec![OnlineType::new("a", rate(r)).edge("j", w(r)), OnlineType::new("b", rate(r)).edge("j", w(r))],
            vec!["j".into()],
        ),
        _ => Instance::new(
            vec![OnlineType::new("a", rate(r)).edge("j", w(r)), OnlineType::new("b", rate(r)).edge("k", w(r))],
            vec!["j".into(), "k".into()],
        ),
    }
}

/// Best objective over the grid `{0, step, 2 step, ...}^E` of points
/// feasible for the matching LP (and the Jaillet-Lu constraint when
/// `jaillet_lu`), written directly from the constraint definitions. Every
/// constraint is nondecreasing in each flow, so rounding an optimum down to
/// the grid stays feasible and the gap to the true optimum is at most
/// `step · Σ w`. At most two edges.
pub fn grid_lp_oracle(inst: &Instance, jaillet_lu: bool, step: f64) -> f64 {
    let edges: Vec<(usize, usize, f64, f64)> = inst
        .edges()
        .map(|(k, t, e)| (k, inst.offline_index(&e.offline).unwrap(), t.rate, e.weight))
        .collect();
    assert!(edges.len() <= 2, "grid oracle supports at most two edges");
    let cap = 1.0 - std::f64::consts::LN_2;
    let axis = |rate: f64| {
        let hi = rate.min(1.0);
        (0..=((hi / step).floor() as usize)).map(move |k| k as f64 * step)
    };
    let feasible = |x: &[f64]| {
        // at most two types and two offline vertices
        let mut per_type = [0.0; 2];
        let mut per_off = [0.0; 2];
        let mut excess = [0.0; 2];
        for (e, &v) in edges.iter().zip(x) {
            per_type[e.0] += v;
            per_off[e.1] += v;
            excess[e.1] += (2.0 * v - e.2).max(0.0);
        }
        let eps = 1e-12;
        inst.online_types().iter().zip(&per_type).all(|(t, s)| *s <= t.rate + eps)
            && per_off.iter().all(|s| *s <= 1.0 + eps)
            && (!jaillet_lu || excess.iter().all(|s| *s <= cap + eps))
    };
    let value = |x: &[f64]| edges.iter().zip(x).map(|(e, v)| e.3 * v).sum::<f64>();
    let mut best: f64 = 0.0;
    match edges.len() {
        0 => {}
        1 => {
            for a in axis(edges[0].2) {
                if feasible(&[a]) {
                    best = best.max(value(&[a]));
                }
            }
        }
        _ => {
            for a in axis(edges[0].2) {
                for b in axis(edges[1].2) {
                    let x = [a, b];
                    if feasible(&x) {
                        best = best.max(value(&x));
                    }
                }
            }
        }
    }
    best
}

/// Like [`random_instance`] but with integer weights in `1..10`, so every
/// matching weight is computed exactly in floating point.
pub fn random_integer_instance(r: &mut StdRng, max_types: usize, max_offline: usize, max_rate: f64, density: f64) -> Instance {
    let inst = random_instance(r, max_types, max_offline, max_rate, density);
    let types = inst
        .online_types()
        .iter()
        .map(|t| {
            t.edges.iter().fold(OnlineType::new(t.id.clone(), t.rate), |acc, e| {
                acc.edge(e.offline.clone(), r.random_range(1..10) as f64)
            })
        })
        .collect();
    Instance::new(types, inst.offline().to_vec())
}

/// Violations of the preprocessing guarantees for `(inst, fm)`, checked
/// from the definitions: `x_i = λ_i`, `x_j = 1` and the degree structure on
/// the output, `y_j <= 1 − ln 2`,
/// objective preserved within `1e-9 · |E|`, and for every original edge
/// the flows of its split children summing back to the original flow.
pub fn preprocess_violations(inst: &Instance, fm: &FractionalMatching) -> Vec<String> {
    let mut bad = Vec::new();
    let (p, map) = match stochmatch::preprocess::preprocess(inst, fm, 0.05, 0.75) {
        Ok(v) => v,
        Err(e) => return vec![format!("preprocess failed: {e}")],
    };
    let (out, ofm) = (p.instance(), p.matching());
    let cap = 1.0 - std::f64::consts::LN_2;
    let (xi, xj) = ofm.totals(out);
    let mut y = vec![0.0; out.offline().len()];
    for (k, t) in out.online_types().iter().enumerate() {
        if (xi[k] - t.rate).abs() > 1e-9 {
            bad.push(format!("x_i != λ_i for {}", t.id));
        }
        let flows: Vec<(usize, f64)> = t
            .edges
            .iter()
            .map(|e| (out.offline_index(&e.offline).unwrap(), ofm.get(&t.id, &e.offline)))
            .filter(|&(_, f)| f > 0.0)
            .collect();
        match flows.as_slice() {
            [] => {}
            [(j, f)] if (f - t.rate).abs() <= 1e-9 => y[*j] += f,
            [(a, f), (b, g)] if a != b && (f - t.rate / 2.0).abs() <= 1e-9 && (g - t.rate / 2.0).abs() <= 1e-9 => {}
            _ => bad.push(format!("type {} violates the degree structure", t.id)),
        }
    }
    for (k, j) in out.offline().iter().enumerate() {
        if (xj[k] - 1.0).abs() > 1e-9 {
            bad.push(format!("x_j != 1 at {j}"));
        }
        if y[k] > cap + 1e-9 {
            bad.push(format!("y_j > 1 - ln 2 at {j}"));
        }
    }
    let w_in: f64 = fm.iter().map(|(i, j, f)| f * inst.weight(i, j).unwrap()).sum();
    let w_out: f64 = ofm.iter().map(|(i, j, f)| f * out.weight(i, j).unwrap()).sum();
    if (w_in - w_out).abs() > 1e-9 * inst.edge_count().max(1) as f64 {
        bad.push(format!("weight changed {w_in} -> {w_out}"));
    }
    for t in inst.online_types() {
        let kids = map.children(&t.id);
        for e in &t.edges {
            let split: f64 = kids.iter().map(|c| ofm.get(&c.child, &e.offline)).sum();
            if (split - fm.get(&t.id, &e.offline)).abs() > 1e-9 {
                bad.push(format!("flow on {}->{} not conserved", t.id, e.offline));
            }
        }
        let rates: f64 = kids.iter().map(|c| c.rate).sum();
        if (rates - t.rate).abs() > 1e-9 {
            bad.push(format!("child rates of {} do not sum to λ", t.id));
        }
    }
    bad
}
