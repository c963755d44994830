//! Orbits as values: dense piecewise trajectories with stationary extension,
//! the shift flow and the Σ-sequence encoding.
//!
//! Only orbits produced by the integrator (and their shifts, restrictions and
//! splices) are represented. Past the stored window an orbit is extended as
//! stationary at its window endpoint, which is exact when the maximal domain
//! ends there and a convention otherwise.

use std::fmt::Write as _;
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{Choice, Direction, SigmaAction, SigmaEvent};
use crate::system::{distance, vscale, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Plus,
    Minus,
    Sliding,
    Stationary,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Plus => "plus",
            Regime::Minus => "minus",
            Regime::Sliding => "sliding",
            Regime::Stationary => "stationary",
        }
    }
}

/// How an orbit's stored window ends on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The integration horizon was reached; the maximal domain continues.
    Horizon,
    Boundary,
    Equilibrium,
    PseudoEquilibrium,
    /// No admissible continuation at a tangency.
    TangencyStop,
}

impl Termination {
    pub fn is_finite(self) -> bool {
        self != Termination::Horizon
    }
}

/// A dense-output sample: time, state and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Point,
    pub v: Point,
}

/// A smooth piece of an orbit with cubic Hermite dense output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub regime: Regime,
    samples: Vec<Sample>,
}

fn hermite(a: &Sample, b: &Sample, t: f64) -> (Point, Point) {
    let h = b.t - a.t;
    if h <= 0.0 {
        return (a.x, a.v);
    }
    let s = ((t - a.t) / h).clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut x = [0.0; 3];
    let mut v = [0.0; 3];
    for i in 0..3 {
        x[i] = h00 * a.x[i] + h10 * h * a.v[i] + h01 * b.x[i] + h11 * h * b.v[i];
        let dx = (6.0 * s2 - 6.0 * s) * (a.x[i] - b.x[i]) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * a.v[i]
            + (3.0 * s2 - 2.0 * s) * b.v[i];
        v[i] = dx;
    }
    (x, v)
}

impl Arc {
    pub fn new(regime: Regime, samples: Vec<Sample>) -> Self {
        debug_assert!(!samples.is_empty());
        Arc { regime, samples }
    }

    pub fn stationary(p: Point, t0: f64, t1: f64) -> Self {
        let zero = [0.0; 3];
        Arc::new(
            Regime::Stationary,
            vec![Sample { t: t0, x: p, v: zero }, Sample { t: t1, x: p, v: zero }],
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub(crate) fn push(&mut self, s: Sample) {
        self.samples.push(s);
    }

    /// Replaces the terminal state, keeping its time and velocity.
    pub(crate) fn set_end(&mut self, x: Point) {
        if let Some(last) = self.samples.last_mut() {
            last.x = x;
        }
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn start(&self) -> Point {
        self.samples[0].x
    }

    pub fn end(&self) -> Point {
        self.samples[self.samples.len() - 1].x
    }

    /// State and velocity at `t`, clamped to the arc's time range.
    pub fn eval_full(&self, t: f64) -> (Point, Point) {
        let s = &self.samples;
        if t <= s[0].t {
            return (s[0].x, s[0].v);
        }
        let k = s.partition_point(|q| q.t <= t);
        if k >= s.len() {
            let last = &s[s.len() - 1];
            return (last.x, last.v);
        }
        hermite(&s[k - 1], &s[k], t)
    }

    pub fn eval(&self, t: f64) -> Point {
        self.eval_full(t).0
    }

    /// Reverses time: `t -> -t`, velocities negated.
    pub(crate) fn reversed(mut self) -> Self {
        self.samples.reverse();
        for s in &mut self.samples {
            s.t = -s.t;
            s.v = vscale(s.v, -1.0);
        }
        self
    }

    fn shifted(&self, dt: f64) -> Self {
        let mut a = self.clone();
        for s in &mut a.samples {
            s.t += dt;
        }
        a
    }

    /// Part of the arc inside `[a, b]`, with interpolated endpoints.
    fn clipped(&self, a: f64, b: f64) -> Option<Self> {
        let lo = a.max(self.t_start());
        let hi = b.min(self.t_end());
        if lo > hi {
            return None;
        }
        let (xa, va) = self.eval_full(lo);
        let mut samples = vec![Sample { t: lo, x: xa, v: va }];
        samples.extend(self.samples.iter().filter(|s| s.t > lo && s.t < hi).copied());
        if hi > lo {
            let (xb, vb) = self.eval_full(hi);
            samples.push(Sample { t: hi, x: xb, v: vb });
        }
        Some(Arc::new(self.regime, samples))
    }
}

/// One concrete Filippov solution over a stored time window.
///
/// The window is `[t_min, t_max]`; `eval` is defined for every real time by
/// the stationary extension. Arcs are stored once and shared between shifts.
#[derive(Debug, Clone)]
pub struct Orbit {
    dim: usize,
    arcs: Shared<Vec<Arc>>,
    events: Shared<Vec<SigmaEvent>>,
    start: Termination,
    end: Termination,
    offset: f64,
    forward_choices: Shared<Vec<Choice>>,
    backward_choices: Shared<Vec<Choice>>,
}

impl Orbit {
    pub(crate) fn from_parts(
        dim: usize,
        arcs: Vec<Arc>,
        events: Vec<SigmaEvent>,
        start: Termination,
        end: Termination,
        forward_choices: Vec<Choice>,
        backward_choices: Vec<Choice>,
    ) -> Self {
        debug_assert!(!arcs.is_empty());
        Orbit {
            dim,
            arcs: Shared::new(arcs),
            events: Shared::new(events),
            start,
            end,
            offset: 0.0,
            forward_choices: Shared::new(forward_choices),
            backward_choices: Shared::new(backward_choices),
        }
    }

    /// The equilibrium orbit at `p`, stored over `[-half_window, half_window]`.
    pub fn stationary(dim: usize, p: Point, half_window: f64) -> Self {
        Orbit::from_parts(
            dim,
            vec![Arc::stationary(p, -half_window, half_window)],
            Vec::new(),
            Termination::Horizon,
            Termination::Horizon,
            Vec::new(),
            Vec::new(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Arcs in stored (unshifted) time; add [`Orbit::offset`] to map to orbit time.
    pub fn raw_arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Arcs with times in orbit time.
    pub fn arcs(&self) -> Vec<Arc> {
        self.arcs.iter().map(|a| a.shifted(-self.offset)).collect()
    }

    /// Regimes with orbit-time ranges.
    pub fn arc_spans(&self) -> Vec<(Regime, f64, f64)> {
        self.arcs
            .iter()
            .map(|a| (a.regime, a.t_start() - self.offset, a.t_end() - self.offset))
            .collect()
    }

    /// Times where the integrand of an orbit distance may lose smoothness.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.arcs.iter().map(|a| a.t_start() - self.offset).collect();
        out.push(self.t_max());
        out
    }

    pub fn events(&self) -> Vec<SigmaEvent> {
        self.events
            .iter()
            .map(|e| SigmaEvent { time: e.time - self.offset, ..e.clone() })
            .collect()
    }

    pub fn t_min(&self) -> f64 {
        self.arcs[0].t_start() - self.offset
    }

    pub fn t_max(&self) -> f64 {
        self.arcs[self.arcs.len() - 1].t_end() - self.offset
    }

    pub fn start_termination(&self) -> Termination {
        self.start
    }

    pub fn end_termination(&self) -> Termination {
        self.end
    }

    /// Lower endpoint of the maximal domain, `-inf` when it was not reached.
    pub fn omega_minus(&self) -> f64 {
        if self.start.is_finite() {
            self.t_min()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn omega_plus(&self) -> f64 {
        if self.end.is_finite() {
            self.t_max()
        } else {
            f64::INFINITY
        }
    }

    pub fn x_omega_minus(&self) -> Option<Point> {
        self.start.is_finite().then(|| self.arcs[0].start())
    }

    pub fn x_omega_plus(&self) -> Option<Point> {
        self.end.is_finite().then(|| self.arcs[self.arcs.len() - 1].end())
    }

    /// Choices consumed by the forward half, in order.
    pub fn forward_choices(&self) -> &[Choice] {
        &self.forward_choices
    }

    /// Choices consumed by the backward half, in the order they were met
    /// going back in time.
    pub fn backward_choices(&self) -> &[Choice] {
        &self.backward_choices
    }

    fn raw_eval_full(&self, t: f64) -> (Point, Point) {
        let arcs = &self.arcs;
        if t <= arcs[0].t_start() {
            return (arcs[0].start(), [0.0; 3]);
        }
        let last = &arcs[arcs.len() - 1];
        if t >= last.t_end() {
            return (last.end(), [0.0; 3]);
        }
        let k = arcs.partition_point(|a| a.t_start() <= t).max(1);
        arcs[k - 1].eval_full(t)
    }

    /// State at orbit time `t`, with stationary extension outside the window.
    pub fn eval(&self, t: f64) -> Point {
        self.raw_eval_full(t + self.offset).0
    }

    /// Velocity at `t` (zero on the stationary extension).
    pub fn velocity(&self, t: f64) -> Point {
        self.raw_eval_full(t + self.offset).1
    }

    /// Regime at time `t`; stationary outside the window.
    pub fn regime_at(&self, t: f64) -> Regime {
        let r = t + self.offset;
        let arcs = &self.arcs;
        if r < arcs[0].t_start() || r > arcs[arcs.len() - 1].t_end() {
            return Regime::Stationary;
        }
        let k = arcs.partition_point(|a| a.t_start() <= r).max(1);
        arcs[k - 1].regime
    }

    /// The shift flow: `shift(t).eval(s) == eval(t + s)`.
    pub fn shift(&self, t: f64) -> Orbit {
        let mut o = self.clone();
        o.offset += t;
        o
    }

    /// Maximum distance between consecutive arcs' shared endpoints.
    pub fn continuity_defect(&self) -> f64 {
        self.arcs.windows(2).map(|w| distance(w[0].end(), w[1].start())).fold(0.0, f64::max)
    }

    /// Restriction to `[a, b]` (clipped to the window), in orbit time.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Orbit> {
        let (ra, rb) = (a + self.offset, b + self.offset);
        let arcs: Vec<Arc> = self
            .arcs
            .iter()
            .filter_map(|arc| arc.clipped(ra, rb))
            .map(|arc| arc.shifted(-self.offset))
            .collect();
        if arcs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "[{a}, {b}] misses the stored window [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        let events = self
            .events()
            .into_iter()
            .filter(|e| e.time >= a && e.time <= b)
            .collect();
        let start = if ra <= self.arcs[0].t_start() { self.start } else { Termination::Horizon };
        let end = if rb >= self.arcs[self.arcs.len() - 1].t_end() { self.end } else { Termination::Horizon };
        Ok(Orbit::from_parts(self.dim, arcs, events, start, end, Vec::new(), Vec::new()))
    }

    /// Concatenates orbit pieces that are already placed on a common time axis.
    /// Consecutive pieces must meet in time and state within `tol`.
    pub fn concat(pieces: &[Orbit], tol: f64) -> Result<Orbit> {
        let first = pieces.first().ok_or_else(|| Error::InvalidArgument("no pieces".into()))?;
        let mut arcs: Vec<Arc> = Vec::new();
        let mut events = Vec::new();
        for (k, piece) in pieces.iter().enumerate() {
            if k > 0 {
                let prev_t = arcs.last().map(Arc::t_end).unwrap_or(f64::NEG_INFINITY);
                let prev_x = arcs.last().map(Arc::end).unwrap_or([0.0; 3]);
                let gap_t = (piece.t_min() - prev_t).abs();
                let gap_x = distance(piece.eval(piece.t_min()), prev_x);
                if gap_t > tol || gap_x > tol {
                    return Err(Error::InvalidArgument(format!(
                        "piece {k} does not continue the previous one (time gap {gap_t:e}, state gap {gap_x:e})"
                    )));
                }
            }
            for arc in piece.arcs() {
                let zero_length = arc.t_end() <= arc.t_start();
                if zero_length && !(arcs.is_empty() && pieces.len() == 1) {
                    continue;
                }
                arcs.push(arc);
            }
            events.extend(piece.events());
        }
        if arcs.is_empty() {
            arcs.push(Arc::stationary(first.eval(first.t_min()), first.t_min(), first.t_min()));
        }
        let last = &pieces[pieces.len() - 1];
        Ok(Orbit::from_parts(
            first.dim,
            arcs,
            events,
            first.start,
            last.end,
            Vec::new(),
            Vec::new(),
        ))
    }

    /// CSV rows `t,x[,y[,z]],regime` at a uniform step across the window.
    pub fn to_csv(&self, step: f64) -> String {
        let names = ["x", "y", "z"];
        let mut out = String::from("t");
        for n in names.iter().take(self.dim) {
            let _ = write!(out, ",{n}");
        }
        out.push_str(",regime\n");
        let (a, b) = (self.t_min(), self.t_max());
        let n = (((b - a) / step).round() as usize).max(1);
        for k in 0..=n {
            let t = if k == n { b } else { a + step * k as f64 };
            let p = self.eval(t);
            let _ = write!(out, "{t:.6}");
            for c in p.iter().take(self.dim) {
                let _ = write!(out, ",{c:.10}");
            }
            let _ = writeln!(out, ",{}", self.regime_at(t).name());
        }
        out
    }

    /// Σ-sequence over `[-tau, tau]`.
    pub fn sigma_sequence(&self, tau: f64) -> Result<SigmaSequence> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        let mut forward = Vec::new();
        let mut backward = Vec::new();
        for e in self.events() {
            let sign = match e.action {
                SigmaAction::ExitToPlus => 1,
                SigmaAction::ExitToMinus => -1,
                _ => continue,
            };
            let departure = e.class.kind.is_sliding() || e.class.kind == crate::system::RegionKind::Tangency;
            if !departure {
                continue;
            }
            match e.direction {
                Direction::Forward if e.time >= 0.0 && e.time <= tau => {
                    forward.push(SigmaEntry { index: 0, time: e.time, point: e.point, sign })
                }
                Direction::Backward if e.time <= 0.0 && e.time >= -tau => {
                    backward.push(SigmaEntry { index: 0, time: e.time, point: e.point, sign })
                }
                _ => {}
            }
        }
        forward.sort_by(|a, b| a.time.total_cmp(&b.time));
        backward.sort_by(|a, b| b.time.total_cmp(&a.time));
        for (k, e) in forward.iter_mut().enumerate() {
            e.index = k as i64 + 1;
        }
        for (k, e) in backward.iter_mut().enumerate() {
            e.index = -(k as i64) - 1;
        }
        backward.reverse();
        let mut entries = backward;
        entries.extend(forward);
        Ok(SigmaSequence { tau, entries })
    }
}

/// Pointwise sup distance of two orbits sampled on `[a, b]` at step `dt`.
pub fn sampled_sup_distance(a: &Orbit, b: &Orbit, t0: f64, t1: f64, dt: f64) -> f64 {
    let n = (((t1 - t0) / dt).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            let t = t0 + (t1 - t0) * k as f64 / n as f64;
            distance(a.eval(t), b.eval(t))
        })
        .fold(0.0, f64::max)
}

/// One departure (`index > 0`) or backward arrival (`index < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEntry {
    pub index: i64,
    pub time: f64,
    pub point: Point,
    /// Region the orbit departs into (forward) or arrives from (backward).
    pub sign: i8,
}

/// Symbolic record of how an orbit travels through the switching manifold in `[-tau, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSequence {
    pub tau: f64,
    pub entries: Vec<SigmaEntry>,
}

impl SigmaSequence {
    pub fn k_plus(&self) -> usize {
        self.entries.iter().filter(|e| e.index > 0).count()
    }

    pub fn k_minus(&self) -> usize {
        self.entries.iter().filter(|e| e.index < 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Equal signs and points within `tol`, entry by entry.
    pub fn matches(&self, other: &SigmaSequence, tol: f64) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.index == b.index && a.sign == b.sign && distance(a.point, b.point) <= tol
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(t0: f64, t1: f64) -> Orbit {
        let n = 100;
        let samples = (0..=n)
            .map(|k| {
                let t = t0 + (t1 - t0) * k as f64 / n as f64;
                Sample { t, x: [t, 1.0, 0.0], v: [1.0, 0.0, 0.0] }
            })
            .collect();
        Orbit::from_parts(
            2,
            vec![Arc::new(Regime::Plus, samples)],
            Vec::new(),
            Termination::Horizon,
            Termination::Boundary,
            Vec::new(),
            Vec::new(),
        )
    }

    #[test]
    fn stationary_eval() {
        let o = Orbit::stationary(2, [0.5, -1.0, 0.0], 1.0);
        for t in [-100.0, -0.5, 0.0, 3.0, 1e6] {
            assert_eq!(o.eval(t), [0.5, -1.0, 0.0]);
        }
    }

    #[test]
    fn eval_and_extension() {
        let o = line(-3.0, 3.0);
        let p = o.eval(2.5);
        assert!((p[0] - 2.5).abs() < 1e-14 && p[1] == 1.0);
        assert_eq!(o.eval(10.0), [3.0, 1.0, 0.0]);
        assert_eq!(o.omega_plus(), 3.0);
        assert_eq!(o.omega_minus(), f64::NEG_INFINITY);
        assert_eq!(o.x_omega_plus(), Some([3.0, 1.0, 0.0]));
    }

    #[test]
    fn shift_group_law() {
        let o = line(-3.0, 3.0);
        let a = o.shift(0.7).shift(-0.2);
        let b = o.shift(0.5);
        for s in [-2.0, 0.0, 1.3] {
            assert!(distance(a.eval(s), b.eval(s)) < 1e-12);
            assert!((o.shift(0.7).eval(s)[0] - o.eval(0.7 + s)[0]).abs() < 1e-15);
        }
        assert_eq!(o.shift(0.0).eval(1.1), o.eval(1.1));
    }

    #[test]
    fn restrict_and_concat() {
        let o = line(-3.0, 3.0);
        let left = o.restrict(-3.0, 0.5).unwrap();
        let right = o.restrict(0.5, 3.0).unwrap();
        let joined = Orbit::concat(&[left, right], 1e-12).unwrap();
        for t in [-2.9, 0.5, 2.2] {
            assert!(distance(joined.eval(t), o.eval(t)) < 1e-14);
        }
        assert_eq!(joined.end_termination(), Termination::Boundary);
        let gap = o.restrict(1.0, 3.0).unwrap();
        assert!(Orbit::concat(&[o.restrict(-3.0, 0.0).unwrap(), gap], 1e-9).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let csv = line(0.0, 1.0).to_csv(0.5);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,regime");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with(",plus"));
    }

    #[test]
    fn empty_sequence_without_events() {
        let s = line(-2.0, 2.0).sigma_sequence(1.0).unwrap();
        assert!(s.is_empty());
        assert_eq!((s.k_minus(), s.k_plus()), (0, 0));
    }
}
