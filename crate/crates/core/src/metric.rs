//! Orbit distances and the constants relating closeness of orbits to
//! closeness of their points.
//!
//! Both distances are weighted series over unit time intervals,
//! `sum_i 2^-|i| I_i`, with `I_i` the integral (resp. supremum) of the
//! pointwise distance over `[i, i+1)`. The series is truncated at `i0` with the
//! closed-form tail `(2 d0 + 4 Z (i0 + 3)) / 2^i0`, which follows from the
//! per-interval bound `d0 + 2 Z (1 + |n|)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::Orbit;
use crate::system::distance as point_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Integral,
    Supremum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// The truncated series.
    pub value: f64,
    pub kind: DistanceKind,
    /// Intervals `i` in `[-i0, i0]` were summed.
    pub i0: u32,
    pub tail_bound: f64,
    pub quad_dt: f64,
    /// Estimated quadrature error (integral) or Lipschitz slack of the grid
    /// supremum (supremum), weighted like the series.
    pub quad_error_bound: f64,
}

impl DistanceReport {
    /// Upper end of the enclosure of the true distance.
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound + self.quad_error_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub rel_tol: f64,
    /// Absolute floor for the tail, used when the distance is (nearly) zero.
    pub abs_tol: f64,
    pub quad_dt: f64,
    pub max_i0: u32,
    /// Grid refinement stops once the interval supremum moves less than this.
    pub sup_refine_tol: f64,
    pub max_sup_refinements: u32,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            quad_dt: 1e-2,
            max_i0: 64,
            sup_refine_tol: 1e-9,
            max_sup_refinements: 4,
        }
    }
}

impl MetricOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        MetricOptions { rel_tol, ..MetricOptions::default() }
    }
}

/// Closed-form tail `sum_{|i| > i0} (d0 + 2Z(1+|i|)) / 2^|i|`.
pub fn tail_bound(d0: f64, z_bound: f64, i0: u32) -> f64 {
    (2.0 * d0 + 4.0 * z_bound * (i0 as f64 + 3.0)) / 2f64.powi(i0 as i32)
}

/// `d0 + 2Z(1 + |n|)`: bound on the pointwise distance over `[n, n+1)`.
pub fn sup_majoration_bound(d0: f64, n: i64, z_bound: f64) -> f64 {
    d0 + 2.0 * z_bound * (1.0 + n.unsigned_abs() as f64)
}

/// Time nodes splitting `[a, b]` at both orbits' arc breakpoints.
fn pieces(a: &Orbit, b: &Orbit, lo: f64, hi: f64) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    for t in a.breakpoints().into_iter().chain(b.breakpoints()) {
        if t > lo && t < hi {
            cuts.push(t);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
    cuts
}

/// Simpson integral of the pointwise distance over `[i, i+1]`, with the
/// summed |Simpson - trapezoid| differences as an error estimate.
fn interval_integral(a: &Orbit, b: &Orbit, i: i64, dt: f64) -> (f64, f64) {
    let f = |t: f64| point_distance(a.eval(t), b.eval(t));
    let cuts = pieces(a, b, i as f64, i as f64 + 1.0);
    let mut total = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        let n = (((r - l) / dt).ceil() as usize).max(1);
        let h = (r - l) / n as f64;
        let mut f0 = f(l);
        for k in 0..n {
            let x0 = l + h * k as f64;
            let x1 = if k + 1 == n { r } else { x0 + h };
            let fm = f(0.5 * (x0 + x1));
            let f1 = f(x1);
            let simpson = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            let trap = (x1 - x0) / 2.0 * (f0 + f1);
            total += simpson;
            err += (simpson - trap).abs();
            f0 = f1;
        }
    }
    (total, err)
}

/// Grid supremum of the pointwise distance over `[i, i+1)`, refined until it
/// settles, and the final grid step.
fn interval_sup(a: &Orbit, b: &Orbit, i: i64, opts: &MetricOptions) -> (f64, f64) {
    let f = |t: f64| point_distance(a.eval(t), b.eval(t));
    let cuts = pieces(a, b, i as f64, i as f64 + 1.0);
    let grid_sup = |dt: f64| -> (f64, f64) {
        let mut best: f64 = 0.0;
        let mut step: f64 = 0.0;
        for w in cuts.windows(2) {
            let (l, r) = (w[0], w[1]);
            let n = (((r - l) / dt).ceil() as usize).max(1);
            let h = (r - l) / n as f64;
            step = step.max(h);
            for k in 0..=n {
                let t = if k == n { r } else { l + h * k as f64 };
                best = best.max(f(t));
            }
        }
        (best, step)
    };
    let mut dt = opts.quad_dt;
    let (mut sup, mut step) = grid_sup(dt);
    for _ in 0..opts.max_sup_refinements {
        dt *= 0.5;
        let (s2, st2) = grid_sup(dt);
        let moved = (s2 - sup).abs();
        sup = s2;
        step = st2;
        if moved < opts.sup_refine_tol {
            break;
        }
    }
    (sup, step)
}

/// Index order `0, -1, 1, -2, 2, ...`.
fn ring(k: u32) -> Vec<i64> {
    if k == 0 {
        vec![0]
    } else {
        vec![-(k as i64), k as i64]
    }
}

fn series(
    a: &Orbit,
    b: &Orbit,
    z_bound: f64,
    opts: &MetricOptions,
    kind: DistanceKind,
) -> DistanceReport {
    let d0 = point_distance(a.eval(0.0), b.eval(0.0));
    let mut value = 0.0;
    let mut err = 0.0;
    let mut i0 = 0;
    loop {
        for i in ring(i0) {
            let w = 0.5f64.powi(i.unsigned_abs() as i32);
            match kind {
                DistanceKind::Integral => {
                    let (v, e) = interval_integral(a, b, i, opts.quad_dt);
                    value += w * v;
                    err += w * e;
                }
                DistanceKind::Supremum => {
                    let (v, step) = interval_sup(a, b, i, opts);
                    value += w * v;
                    err += w * 2.0 * z_bound * step / 2.0;
                }
            }
        }
        let tail = tail_bound(d0, z_bound, i0);
        if tail < opts.rel_tol * value || tail < opts.abs_tol || i0 >= opts.max_i0 {
            return DistanceReport {
                value,
                kind,
                i0,
                tail_bound: tail,
                quad_dt: opts.quad_dt,
                quad_error_bound: err,
            };
        }
        i0 += 1;
    }
}

/// Integral orbit distance.
pub fn distance_integral(a: &Orbit, b: &Orbit, z_bound: f64, opts: &MetricOptions) -> DistanceReport {
    series(a, b, z_bound, opts, DistanceKind::Integral)
}

/// Supremum orbit distance.
pub fn distance_sup(a: &Orbit, b: &Orbit, z_bound: f64, opts: &MetricOptions) -> DistanceReport {
    series(a, b, z_bound, opts, DistanceKind::Supremum)
}

pub fn distance(a: &Orbit, b: &Orbit, kind: DistanceKind, z_bound: f64, opts: &MetricOptions) -> DistanceReport {
    series(a, b, z_bound, opts, kind)
}

/// Grid supremum of the pointwise distance over `[n, n+1)`.
pub fn interval_supremum(a: &Orbit, b: &Orbit, n: i64, opts: &MetricOptions) -> f64 {
    interval_sup(a, b, n, opts).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstants {
    pub epsilon: f64,
    pub tau: f64,
    pub delta: f64,
}

/// Points to orbits: if two orbits stay within `delta` on `[-tau, tau]` then
/// their integral distance is below `epsilon`. `tau` is the smallest
/// nonnegative integer with `Z (tau + 3) / 2^(tau - 1) < epsilon`.
pub fn constants_points_to_orbits(epsilon: f64, z_bound: f64) -> Result<LemmaConstants> {
    if !(epsilon > 0.0) || !(z_bound > 0.0) {
        return Err(Error::InvalidArgument("epsilon and z_bound must be positive".into()));
    }
    let tail = |tau: u32| z_bound * (tau as f64 + 3.0) / 2f64.powi(tau as i32 - 1);
    let mut tau = 0u32;
    while tail(tau) >= epsilon {
        tau += 1;
    }
    Ok(LemmaConstants { epsilon, tau: tau as f64, delta: (epsilon - tail(tau)) / 3.0 })
}

/// Orbits to points: an integral distance below the returned `epsilon`
/// keeps the orbits within `delta` of each other on `(-tau, tau)`.
pub fn constants_orbits_to_points(tau: f64, delta: f64, z_bound: f64) -> Result<LemmaConstants> {
    if !(tau > 0.0) || !(delta > 0.0) || !(z_bound > 0.0) {
        return Err(Error::InvalidArgument("tau, delta and z_bound must be positive".into()));
    }
    let k = (tau + delta / (4.0 * z_bound)).ceil();
    let epsilon = delta * delta / (2f64.powf(k) * 2.0 * z_bound);
    Ok(LemmaConstants { epsilon, tau, delta })
}

/// Half-width `alpha / (2Z)` of the window around `t0` on which a separation
/// of at least `delta` at `t0` persists as at least `delta - alpha`.
pub fn separation_persistence(delta: f64, alpha: f64, z_bound: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha >= delta {
        return Err(Error::InvalidArgument(format!("need 0 < alpha < delta, got alpha = {alpha}, delta = {delta}")));
    }
    if !(z_bound > 0.0) {
        return Err(Error::InvalidArgument("z_bound must be positive".into()));
    }
    Ok(alpha / (2.0 * z_bound))
}

/// Right-hand side of the flow continuity estimate:
/// `d(shift(g0, s0), shift(g, s0)) + 3 Z |s - s0|`, an upper bound for
/// `d(shift(g0, s0), shift(g, s))`.
pub fn flow_continuity_gap(
    g0: &Orbit,
    g: &Orbit,
    s0: f64,
    s: f64,
    z_bound: f64,
    opts: &MetricOptions,
) -> f64 {
    let base = distance_integral(&g0.shift(s0), &g.shift(s0), z_bound, opts);
    base.value + 3.0 * z_bound * (s - s0).abs()
}
