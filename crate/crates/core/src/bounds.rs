//! Closed-form survival bounds and per-edge competitive ratios of the
//! Multistage policy, plus the numeric certificate that both ratios are
//! minimized at `y = 1 − ln 2` for `(t0, t1) = (0.05, 0.75)`.
//!
//! `y` is the first-class flow into an offline vertex and ranges over
//! `[0, 1 − ln 2]`.

use serde::Serialize;

use crate::{classify::check_times, one_minus_ln2, parallel, Error, FractionalMatching, Instance, OnlineType, Result, TOL};

/// Default stage boundaries.
pub const DEFAULT_T0: f64 = 0.05;
pub const DEFAULT_T1: f64 = 0.75;

/// Below this `y` the removable singularity of `(1 − e^{−y t0}) / y` is
/// replaced by its limit `t0`.
const Y_LIMIT: f64 = 1e-12;

/// Tolerance on monotonicity checks over a grid.
pub const MONOTONE_TOL: f64 = 1e-12;

fn check_y(y: f64) -> Result<()> {
    if !(y >= 0.0 && y <= one_minus_ln2() + TOL) {
        return Err(Error::Domain(format!("y = {y} outside [0, 1 - ln 2]")));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

/// Lower bound on `E[A_j(t)]`, the probability that an offline vertex with
/// first-class flow `y` is still unmatched at time `t`. Exact for `t <= t1`.
pub fn survival_bound(y: f64, t: f64, t0: f64, t1: f64) -> Result<f64> {
    check_y(y)?;
    check_t(t)?;
    check_times(t0, t1)?;
    Ok(survival_unchecked(y, t, t0, t1))
}

pub(crate) fn survival_unchecked(y: f64, t: f64, t0: f64, t1: f64) -> f64 {
    if t <= t0 {
        (-y * t).exp()
    } else if t <= t1 {
        (-y * t0 - (t - t0)).exp()
    } else {
        (-y * t0 - (t1 - t0) - (2.0 - y) * (t - t1)).exp()
    }
}

/// `∫_0^{t0} e^{−y t} dt`.
fn early(y: f64, t0: f64) -> f64 {
    if y < Y_LIMIT {
        t0
    } else {
        -(-y * t0).exp_m1() / y
    }
}

/// `∫_{t0}^{t1} e^{−y t0 − (t − t0)} dt`.
fn middle(y: f64, t0: f64, t1: f64) -> f64 {
    (-y * t0).exp() * -(-(t1 - t0)).exp_m1()
}

/// `∫_{t1}^{1} e^{−y t0 − (t1 − t0) − (2 − y)(t − t1)} dt`.
fn late(y: f64, t0: f64, t1: f64) -> f64 {
    let r = 2.0 - y;
    (-y * t0 - (t1 - t0)).exp() * -(-r * (1.0 - t1)).exp_m1() / r
}

/// Competitive ratio guaranteed on a first-class edge into a vertex with
/// first-class flow `y`.
pub fn ratio_first(y: f64, t0: f64, t1: f64) -> Result<f64> {
    check_y(y)?;
    check_times(t0, t1)?;
    Ok(ratio_first_unchecked(y, t0, t1))
}

fn ratio_first_unchecked(y: f64, t0: f64, t1: f64) -> f64 {
    early(y, t0) + middle(y, t0, t1) + late(y, t0, t1)
}

/// Competitive ratio guaranteed on a second-class edge into a vertex with
/// first-class flow `y` (after bounding the partner's survival by
/// `e^{−(t1 − t0)}`).
pub fn ratio_second(y: f64, t0: f64, t1: f64) -> Result<f64> {
    check_y(y)?;
    check_times(t0, t1)?;
    Ok(ratio_second_unchecked(y, t0, t1))
}

fn ratio_second_unchecked(y: f64, t0: f64, t1: f64) -> f64 {
    middle(y, t0, t1) + (2.0 - (-(t1 - t0)).exp()) * late(y, t0, t1)
}

/// Ratio curves of both edge classes over a uniform `y` grid on `[0, 1 − ln 2]`.
#[derive(Clone, Debug, Serialize)]
pub struct RatioCurve {
    pub t0: f64,
    pub t1: f64,
    pub y: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub min_first: f64,
    pub argmin_first: f64,
    pub min_second: f64,
    pub argmin_second: f64,
    /// `min(min_first, min_second)`.
    pub min: f64,
    pub argmin: f64,
    /// Both curves are nonincreasing in `y` up to [`MONOTONE_TOL`].
    pub nonincreasing: bool,
}

impl RatioCurve {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["y", "ratio_first", "ratio_second"])?;
        for k in 0..self.y.len() {
            out.write_record([self.y[k].to_string(), self.first[k].to_string(), self.second[k].to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

fn argmin(xs: &[f64], vals: &[f64]) -> (f64, f64) {
    vals.iter()
        .zip(xs)
        .fold((f64::INFINITY, f64::NAN), |(m, a), (&v, &x)| if v < m { (v, x) } else { (m, a) })
}

fn nonincreasing(vals: &[f64], tol: f64) -> bool {
    vals.windows(2).all(|w| w[1] <= w[0] + tol)
}

fn max_increase(vals: &[f64]) -> f64 {
    vals.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

pub fn min_ratio(t0: f64, t1: f64, grid_size: usize) -> Result<RatioCurve> {
    check_times(t0, t1)?;
    if grid_size < 2 {
        return Err(Error::Domain(format!("grid size {grid_size} < 2")));
    }
    let y = uniform(0.0, one_minus_ln2(), grid_size);
    let first: Vec<f64> = y.iter().map(|&y| ratio_first_unchecked(y, t0, t1)).collect();
    let second: Vec<f64> = y.iter().map(|&y| ratio_second_unchecked(y, t0, t1)).collect();
    let (min_first, argmin_first) = argmin(&y, &first);
    let (min_second, argmin_second) = argmin(&y, &second);
    let (min, argmin) = if min_second < min_first { (min_second, argmin_second) } else { (min_first, argmin_first) };
    let nonincreasing = nonincreasing(&first, MONOTONE_TOL) && nonincreasing(&second, MONOTONE_TOL);
    Ok(RatioCurve {
        t0,
        t1,
        y,
        first,
        second,
        min_first,
        argmin_first,
        min_second,
        argmin_second,
        min,
        argmin,
        nonincreasing,
    })
}

/// Stage boundaries used by the appendix functions.
const APP_T0: f64 = 1.0 / 20.0;
const APP_T1: f64 = 3.0 / 4.0;

/// `a(x) = ∫_0^{t0} e^{−t x} dt`.
pub fn appendix_a(x: f64) -> f64 {
    early(x, APP_T0)
}

/// `b(x) = ∫_{t0}^{t1} e^{−t0 x − (t − t0)} dt`.
pub fn appendix_b(x: f64) -> f64 {
    middle(x, APP_T0, APP_T1)
}

/// `c(x) = ∫_{t1}^{1} e^{−t0 x − (t1 − t0) − (2 − x)(t − t1)} dt`.
pub fn appendix_c(x: f64) -> f64 {
    late(x, APP_T0, APP_T1)
}

/// Left side of the rearranged derivative inequality, `(2 − x)(e^{7/10} − 1)`.
pub fn appendix_lhs(x: f64) -> f64 {
    (2.0 - x) * (0.7f64.exp() - 1.0)
}

/// Right side of the rearranged derivative inequality.
pub fn appendix_rhs(x: f64) -> f64 {
    rhs_form(2.0 - x, 1.0 / (2.0 - x))
}

// 20 (2 − e^{−7/10}) ((1 − e^{−s/4}) (inv − 1/20) − e^{−s/4} / 4)
fn rhs_form(s: f64, inv: f64) -> f64 {
    let e = (-s / 4.0).exp();
    20.0 * (2.0 - (-0.7f64).exp()) * ((1.0 - e) * (inv - 1.0 / 20.0) - 0.25 * e)
}

/// Upper bound of [`appendix_rhs`] on `[0, (1 − ln 2)/2]`: the increasing
/// factor evaluated at the right end, the decreasing factor at `x = 0`.
pub fn appendix_rhs_bound_low() -> f64 {
    let mid = one_minus_ln2() / 2.0;
    rhs_form(2.0, 1.0 / (2.0 - mid))
}

/// Upper bound of [`appendix_rhs`] on `[(1 − ln 2)/2, 1 − ln 2]`.
pub fn appendix_rhs_bound_high() -> f64 {
    let mid = one_minus_ln2() / 2.0;
    rhs_form(2.0 - mid, 1.0 / (2.0 - one_minus_ln2()))
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixReport {
    pub grid_size: usize,
    /// `a + b + c` is nonincreasing on the grid.
    pub first_nonincreasing: bool,
    pub first_max_increase: f64,
    /// `b + (2 − e^{−7/10}) c` is nonincreasing on the grid.
    pub second_nonincreasing: bool,
    pub second_max_increase: f64,
    /// `LHS(x) > RHS(x)` at every grid point.
    pub inequality_holds: bool,
    pub min_gap: f64,
    pub lhs_min: f64,
    pub lhs_argmin: f64,
    pub rhs_bound_low: f64,
    pub rhs_max_low: f64,
    pub rhs_bound_high: f64,
    pub rhs_max_high: f64,
    /// Grid maxima of the RHS stay below the two stated bounds, and both
    /// bounds stay below the LHS minimum.
    pub bounds_hold: bool,
}

impl AppendixReport {
    pub fn passed(&self) -> bool {
        self.first_nonincreasing && self.second_nonincreasing && self.inequality_holds && self.bounds_hold
    }
}

/// Numerically certifies that both ratio formulas decrease in `y` at
/// `(t0, t1) = (1/20, 3/4)`.
pub fn appendix_check(grid_size: usize) -> Result<AppendixReport> {
    if grid_size < 2 {
        return Err(Error::Domain(format!("grid size {grid_size} < 2")));
    }
    let cap = one_minus_ln2();
    let mid = cap / 2.0;
    let xs = uniform(0.0, cap, grid_size);
    let factor = 2.0 - (-0.7f64).exp();
    let first: Vec<f64> = xs.iter().map(|&x| appendix_a(x) + appendix_b(x) + appendix_c(x)).collect();
    let second: Vec<f64> = xs.iter().map(|&x| appendix_b(x) + factor * appendix_c(x)).collect();
    let lhs: Vec<f64> = xs.iter().map(|&x| appendix_lhs(x)).collect();
    let rhs: Vec<f64> = xs.iter().map(|&x| appendix_rhs(x)).collect();

    let min_gap = lhs.iter().zip(&rhs).map(|(l, r)| l - r).fold(f64::INFINITY, f64::min);
    let (lhs_min, lhs_argmin) = argmin(&xs, &lhs);
    let max_on = |pred: &dyn Fn(f64) -> bool| {
        xs.iter().zip(&rhs).filter(|(x, _)| pred(**x)).map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max)
    };
    let rhs_max_low = max_on(&|x| x <= mid);
    let rhs_max_high = max_on(&|x| x >= mid);
    let rhs_bound_low = appendix_rhs_bound_low();
    let rhs_bound_high = appendix_rhs_bound_high();

    Ok(AppendixReport {
        grid_size,
        first_nonincreasing: nonincreasing(&first, MONOTONE_TOL),
        first_max_increase: max_increase(&first),
        second_nonincreasing: nonincreasing(&second, MONOTONE_TOL),
        second_max_increase: max_increase(&second),
        inequality_holds: min_gap > 0.0,
        min_gap,
        lhs_min,
        lhs_argmin,
        rhs_bound_low,
        rhs_max_low,
        rhs_bound_high,
        rhs_max_high,
        bounds_hold: rhs_max_low <= rhs_bound_low
            && rhs_max_high <= rhs_bound_high
            && rhs_bound_low.max(rhs_bound_high) < lhs_min,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub t0: f64,
    pub t1: f64,
    pub ratio: f64,
    pub cells: usize,
}

/// Number of `y` grid points used per cell by [`search_params`].
pub const SEARCH_Y_GRID: usize = 201;

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|k| ((lo + k as f64 * step).min(hi) * 1e12).round() / 1e12).collect()
}

/// Grid search for the stage boundaries maximizing the worst per-edge
/// ratio. Ties go to the smaller `t0`, then the smaller `t1`.
pub fn search_params(t0_range: (f64, f64), t1_range: (f64, f64), step: f64) -> Result<SearchResult> {
    for (lo, hi) in [t0_range, t1_range] {
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Domain(format!("range [{lo}, {hi}] not within [0, 1]")));
        }
    }
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Domain(format!("step {step} must be positive")));
    }
    let cells: Vec<(f64, f64)> = axis(t0_range.0, t0_range.1, step)
        .into_iter()
        .flat_map(|a| axis(t1_range.0, t1_range.1, step).into_iter().map(move |b| (a, b)))
        .filter(|(a, b)| a <= b)
        .collect();
    if cells.is_empty() {
        return Err(Error::Domain("parameter grid is empty (no cell with t0 <= t1)".into()));
    }
    let values = parallel::map(&cells, |&(a, b)| min_ratio(a, b, SEARCH_Y_GRID).map(|c| c.min).unwrap_or(f64::NAN));
    let mut best = 0;
    for k in 1..cells.len() {
        if values[k] > values[best] {
            best = k;
        }
    }
    Ok(SearchResult { t0: cells[best].0, t1: cells[best].1, ratio: values[best], cells: cells.len() })
}

/// Offline ids of the gadget.
pub const GADGET_OFFLINE: [&str; 2] = ["j", "j'"];

/// Two offline vertices, each fed by a first-class type of rate
/// `1 − ln 2`, plus one second-class type of rate `2 ln 2` split evenly
/// between them. Every vertex sits at the binding point `y_j = 1 − ln 2`.
///
/// First-class edges carry `first_weight`, second-class edges `second_weight`.
pub fn make_gadget(first_weight: f64, second_weight: f64) -> (Instance, FractionalMatching) {
    let [j, jp] = GADGET_OFFLINE;
    let y = one_minus_ln2();
    let ln2 = std::f64::consts::LN_2;
    let inst = Instance::new(
        vec![
            OnlineType::new("first/j", y).edge(j, first_weight),
            OnlineType::new("first/j'", y).edge(jp, first_weight),
            OnlineType::new("second", 2.0 * ln2).edge(j, second_weight).edge(jp, second_weight),
        ],
        vec![j.to_string(), jp.to_string()],
    );
    let mut fm = FractionalMatching::new();
    fm.set("first/j", j, y);
    fm.set("first/j'", jp, y);
    fm.set("second", j, ln2);
    fm.set("second", jp, ln2);
    (inst, fm)
}
