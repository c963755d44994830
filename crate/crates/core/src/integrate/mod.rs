//! Filippov solutions by fixed-step RK4 with bisection event localisation.
//!
//! Backward integration runs the time-reversed system `(-Z+, -Z-)`, which
//! swaps stable and escaping sliding regions and negates the sliding field.
//! Decisions at nonunique points are delegated to a [`Chooser`].

mod branch;

pub use branch::{enumerate_branches, enumerate_until, BranchLeaf, BranchPolicy, BranchTree};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{Arc, Orbit, Regime, Sample, Termination};
use crate::system::{
    distance, norm, sliding_combination, vadd, vdot, vscale, vsub, Field, NsvfSystem, Point, RegionClass,
    RegionKind,
};

/// Offset of the trial point used to decide whether sliding can start at a tangency.
const SLIDE_TRIAL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaAction {
    Cross,
    EnterSliding,
    ExitToPlus,
    ExitToMinus,
    StopAtTangency,
    StopAtBoundary,
    StopAtPseudoEquilibrium,
}

impl SigmaAction {
    pub fn name(self) -> &'static str {
        match self {
            SigmaAction::Cross => "cross",
            SigmaAction::EnterSliding => "enter_sliding",
            SigmaAction::ExitToPlus => "exit_to_plus",
            SigmaAction::ExitToMinus => "exit_to_minus",
            SigmaAction::StopAtTangency => "stop_at_tangency",
            SigmaAction::StopAtBoundary => "stop_at_boundary",
            SigmaAction::StopAtPseudoEquilibrium => "stop_at_pseudo_equilibrium",
        }
    }
}

/// Resolution of one nonunique point. With `dwell > 0` an exit action first
/// slides for `dwell` time units and then leaves the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub action: SigmaAction,
    #[serde(default)]
    pub dwell: f64,
}

impl Choice {
    pub fn new(action: SigmaAction) -> Self {
        Choice { action, dwell: 0.0 }
    }

    pub fn after(action: SigmaAction, dwell: f64) -> Self {
        Choice { action, dwell }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEvent {
    pub time: f64,
    pub point: Point,
    /// Class of the point for the original (forward-time) system.
    pub class: RegionClass,
    /// Action taken in the integration direction.
    pub action: SigmaAction,
    pub direction: Direction,
    /// Options that were available in the integration direction.
    pub options: Vec<SigmaAction>,
}

/// A nonunique point awaiting a choice. Times are measured from the start of
/// the half-orbit in its integration direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub time: f64,
    pub point: Point,
    pub options: Vec<SigmaAction>,
    /// Sliding from here runs through an escaping region.
    pub escaping: bool,
}

pub trait Chooser {
    fn choose(&mut self, decision: &Decision) -> Choice;
}

/// Takes choices from a list, then the first option of every later decision.
#[derive(Debug, Clone, Default)]
pub struct ListChooser {
    choices: Vec<Choice>,
    next: usize,
}

impl ListChooser {
    pub fn new(choices: &[Choice]) -> Self {
        ListChooser { choices: choices.to_vec(), next: 0 }
    }
}

impl Chooser for ListChooser {
    fn choose(&mut self, decision: &Decision) -> Choice {
        let c = self.choices.get(self.next).copied();
        self.next += 1;
        c.unwrap_or_else(|| Choice::new(decision.options[0]))
    }
}

/// Replays the branch structure of a recorded orbit forward from time `t0`.
pub struct FollowChooser<'a> {
    sys: &'a NsvfSystem,
    orbit: &'a Orbit,
    spans: Vec<(Regime, f64, f64)>,
    t0: f64,
}

impl<'a> FollowChooser<'a> {
    pub fn new(sys: &'a NsvfSystem, orbit: &'a Orbit, t0: f64) -> Self {
        FollowChooser { sys, orbit, spans: orbit.arc_spans(), t0 }
    }
}

impl Chooser for FollowChooser<'_> {
    fn choose(&mut self, d: &Decision) -> Choice {
        let u = self.t0 + d.time;
        let probe = u + 1e-7;
        let k = self.spans.iter().position(|s| s.1 <= probe && probe < s.2);
        let fallback = Choice::new(d.options[0]);
        let Some(k) = k else { return fallback };
        let want = match self.spans[k].0 {
            Regime::Plus => Choice::new(SigmaAction::ExitToPlus),
            Regime::Minus => Choice::new(SigmaAction::ExitToMinus),
            Regime::Stationary => return fallback,
            Regime::Sliding => {
                let end = self.spans[k].2;
                let next = self.spans.get(k + 1).map(|s| s.0);
                let junction = self.orbit.eval(end);
                let dwell_exit = matches!(
                    self.sys.classify_unchecked(junction).map(|c| c.kind),
                    Ok(RegionKind::SlidingUnstable)
                );
                match next {
                    Some(Regime::Plus) if dwell_exit => Choice::after(SigmaAction::ExitToPlus, end - u),
                    Some(Regime::Minus) if dwell_exit => Choice::after(SigmaAction::ExitToMinus, end - u),
                    _ => Choice::new(SigmaAction::EnterSliding),
                }
            }
        };
        let ok = if want.dwell > 0.0 {
            d.options.contains(&SigmaAction::EnterSliding)
        } else {
            d.options.contains(&want.action)
        };
        if ok {
            want
        } else {
            fallback
        }
    }
}

/// The system with time running in a chosen direction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Flow<'a> {
    pub sys: &'a NsvfSystem,
    pub dir: Direction,
}

impl<'a> Flow<'a> {
    pub fn new(sys: &'a NsvfSystem, dir: Direction) -> Self {
        Flow { sys, dir }
    }

    fn sign(&self) -> f64 {
        self.dir.sign()
    }

    fn field(&self, f: Field, p: Point) -> Result<Point> {
        Ok(vscale(self.sys.field(f, p)?, self.sign()))
    }

    fn lie(&self, f: Field, p: Point) -> Result<f64> {
        Ok(self.sign() * self.sys.lie_derivative(f, p)?)
    }

    fn lie_k(&self, f: Field, k: usize, p: Point) -> Result<f64> {
        let s = if k % 2 == 1 { self.sign() } else { 1.0 };
        Ok(s * self.sys.lie_derivative_k(f, k, p)?)
    }

    fn lies(&self, p: Point) -> Result<(f64, f64)> {
        Ok((self.lie(Field::Plus, p)?, self.lie(Field::Minus, p)?))
    }

    /// Sliding field in flow time; the mean of the fields where the
    /// denominator vanishes (two-fold points).
    pub fn sliding(&self, p: Point) -> Result<Point> {
        let (a, b) = self.lies(p)?;
        let zp = self.field(Field::Plus, p)?;
        let zm = self.field(Field::Minus, p)?;
        if (b - a).abs() <= self.sys.tolerances().tol {
            return Ok(vscale(vadd(zp, zm), 0.5));
        }
        Ok(sliding_combination(a, b, zp, zm))
    }

    fn velocity(&self, regime: Regime, p: Point) -> Result<Point> {
        match regime {
            Regime::Plus => self.field(Field::Plus, p),
            Regime::Minus => self.field(Field::Minus, p),
            Regime::Sliding => self.sliding(p),
            Regime::Stationary => Ok([0.0; 3]),
        }
    }

    fn rk4(&self, regime: Regime, x: Point, h: f64) -> Result<Point> {
        let k1 = self.velocity(regime, x)?;
        let k2 = self.velocity(regime, vadd(x, vscale(k1, h / 2.0)))?;
        let k3 = self.velocity(regime, vadd(x, vscale(k2, h / 2.0)))?;
        let k4 = self.velocity(regime, vadd(x, vscale(k3, h)))?;
        let incr = vadd(vadd(k1, k4), vscale(vadd(k2, k3), 2.0));
        let y = vadd(x, vscale(incr, h / 6.0));
        if regime == Regime::Sliding {
            self.sys.project_to_sigma(y)
        } else {
            Ok(y)
        }
    }

    /// Whether the field leaves into its own half-space at a tangency: the
    /// first non-vanishing `F^k h` points away from the manifold.
    fn departs(&self, f: Field, p: Point) -> Result<bool> {
        let tol = self.sys.tolerances();
        let want = f.side_sign();
        let first = self.lie(f, p)?;
        if first.abs() > tol.lie_zero_tol {
            return Ok(first * want > 0.0);
        }
        for k in 2..=tol.max_lie_order {
            let v = self.lie_k(f, k, p)?;
            if v.abs() > tol.tol {
                return Ok(v * want > 0.0);
            }
        }
        Err(Error::InfiniteMultiplicity { max_order: tol.max_lie_order })
    }

    /// Sliding admissibility at a tangency: a short step along the sliding
    /// field must land strictly inside a sliding region. Returns whether that
    /// region is escaping in flow time.
    fn slide_trial(&self, p: Point) -> Result<Option<bool>> {
        let zs = self.sliding(p)?;
        let n = norm(zs);
        if !(n > self.sys.tolerances().eq_tol) || !n.is_finite() {
            return Ok(None);
        }
        let q = vadd(p, vscale(zs, SLIDE_TRIAL / n));
        let Ok(q) = self.sys.project_to_sigma(q) else { return Ok(None) };
        if !self.sys.contains(q) {
            return Ok(None);
        }
        let (a, b) = self.lies(q)?;
        Ok((a * b < 0.0).then_some(a > 0.0))
    }

    /// Continuations from a point of the manifold, in flow time.
    pub fn options(&self, p: Point) -> Result<(Vec<SigmaAction>, bool)> {
        use SigmaAction::*;
        let (a, b) = self.lies(p)?;
        Ok(match RegionKind::from_lie(a, b, self.sys.tolerances().tol) {
            RegionKind::CrossingPositive | RegionKind::CrossingNegative => (vec![Cross], false),
            RegionKind::SlidingStable => (vec![EnterSliding], false),
            RegionKind::SlidingUnstable => (vec![EnterSliding, ExitToPlus, ExitToMinus], true),
            RegionKind::Tangency => {
                let mut v = Vec::new();
                let slide = self.slide_trial(p)?;
                if slide.is_some() {
                    v.push(EnterSliding);
                }
                if self.departs(Field::Plus, p)? {
                    v.push(ExitToPlus);
                }
                if self.departs(Field::Minus, p)? {
                    v.push(ExitToMinus);
                }
                if v.is_empty() {
                    v.push(StopAtTangency);
                }
                (v, slide == Some(true))
            }
        })
    }
}

/// Continuations available at a point of the switching manifold.
pub fn step_from_sigma(sys: &NsvfSystem, p: Point, direction: Direction) -> Result<Vec<SigmaAction>> {
    let hv = sys.h(p)?;
    if hv.abs() > sys.tolerances().surface_tol {
        return Err(Error::NotOnSigma { h_value: hv });
    }
    Ok(Flow::new(sys, direction).options(p)?.0)
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    Free(Field),
    Slide { stop: Option<(f64, SigmaAction)> },
    Decide(Decision),
    Done(Termination),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegmentEnd {
    Horizon,
    Dwell(SigmaAction),
    Sigma,
    Boundary,
    Stationary(Termination),
}

/// Which monitored quantity changed sign inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cut {
    Boundary,
    Monitor(usize),
    Graze,
}

/// Sign with a dead band; zero inside the band.
fn band_sign(v: f64, band: f64) -> i8 {
    if v > band {
        1
    } else if v < -band {
        -1
    } else {
        0
    }
}

/// One direction of an orbit under construction.
#[derive(Debug, Clone)]
pub(crate) struct Tracer<'a> {
    flow: Flow<'a>,
    horizon: f64,
    t: f64,
    x: Point,
    arcs: Vec<Arc>,
    events: Vec<SigmaEvent>,
    choices: Vec<Choice>,
    mode: Mode,
}

/// A finished half-orbit in flow time.
#[derive(Debug, Clone)]
pub(crate) struct Half {
    pub arcs: Vec<Arc>,
    pub events: Vec<SigmaEvent>,
    pub termination: Termination,
    pub choices: Vec<Choice>,
}

impl<'a> Tracer<'a> {
    pub fn start(flow: Flow<'a>, p: Point, horizon: f64) -> Result<Self> {
        let sys = flow.sys;
        if !sys.contains(p) {
            return Err(Error::InvalidArgument(format!("start point {p:?} is outside the domain")));
        }
        if !(horizon >= 0.0) {
            return Err(Error::InvalidArgument("horizon must be nonnegative".into()));
        }
        let mut tr = Tracer {
            flow,
            horizon,
            t: 0.0,
            x: p,
            arcs: Vec::new(),
            events: Vec::new(),
            choices: Vec::new(),
            mode: Mode::Done(Termination::Horizon),
        };
        let hv = sys.h(p)?;
        if hv.abs() <= sys.tolerances().surface_tol {
            tr.x = sys.project_to_sigma(p)?;
            tr.arrive(None)?;
        } else {
            let field = if hv > 0.0 { Field::Plus } else { Field::Minus };
            if norm(flow.field(field, p)?) <= sys.tolerances().eq_tol {
                tr.arcs.push(Arc::stationary(p, 0.0, horizon));
                tr.t = horizon;
            } else {
                tr.mode = Mode::Free(field);
            }
        }
        Ok(tr)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn events(&self) -> &[SigmaEvent] {
        &self.events
    }

    /// Runs until the next decision or the end of the half-orbit.
    pub fn advance(&mut self) -> Result<Option<Decision>> {
        loop {
            match &self.mode {
                Mode::Decide(d) => return Ok(Some(d.clone())),
                Mode::Done(_) => return Ok(None),
                Mode::Free(_) | Mode::Slide { .. } => {
                    let end = self.run_segment()?;
                    self.after_segment(end)?;
                }
            }
        }
    }

    pub fn decide(&mut self, choice: Choice) -> Result<()> {
        let Mode::Decide(d) = &self.mode else {
            return Err(Error::InvalidArgument("no pending decision".into()));
        };
        let d = d.clone();
        let exits = matches!(choice.action, SigmaAction::ExitToPlus | SigmaAction::ExitToMinus);
        let incompatible = || Error::ChoiceIncompatible {
            requested: format!("{} after {}", choice.action.name(), choice.dwell),
            options: d.options.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
            time: d.time,
        };
        if choice.dwell > 0.0 && exits {
            if !d.options.contains(&SigmaAction::EnterSliding) {
                return Err(incompatible());
            }
            self.push_event(SigmaAction::EnterSliding, d.options.clone())?;
            self.mode = Mode::Slide { stop: Some((self.t + choice.dwell, choice.action)) };
        } else {
            if !d.options.contains(&choice.action) {
                return Err(incompatible());
            }
            self.apply(choice.action, d.options.clone())?;
        }
        self.choices.push(choice);
        Ok(())
    }

    pub fn finish(self) -> Half {
        let termination = match self.mode {
            Mode::Done(t) => t,
            _ => Termination::Horizon,
        };
        let mut arcs = self.arcs;
        if arcs.is_empty() {
            arcs.push(Arc::stationary(self.x, 0.0, 0.0));
        }
        Half { arcs, events: self.events, termination, choices: self.choices }
    }

    fn push_event(&mut self, action: SigmaAction, options: Vec<SigmaAction>) -> Result<()> {
        let max = self.flow.sys.tolerances().max_events;
        if self.events.len() >= max {
            return Err(Error::Chattering { events: self.events.len() });
        }
        let class = self.flow.sys.classify_unchecked(self.x)?;
        self.events.push(SigmaEvent {
            time: self.t,
            point: self.x,
            class,
            action,
            direction: self.flow.dir,
            options,
        });
        Ok(())
    }

    fn apply(&mut self, action: SigmaAction, options: Vec<SigmaAction>) -> Result<()> {
        self.push_event(action, options)?;
        self.mode = match action {
            SigmaAction::Cross => {
                let a = self.flow.lie(Field::Plus, self.x)?;
                Mode::Free(if a > 0.0 { Field::Plus } else { Field::Minus })
            }
            SigmaAction::EnterSliding => Mode::Slide { stop: None },
            SigmaAction::ExitToPlus => Mode::Free(Field::Plus),
            SigmaAction::ExitToMinus => Mode::Free(Field::Minus),
            SigmaAction::StopAtTangency => Mode::Done(Termination::TangencyStop),
            SigmaAction::StopAtBoundary => Mode::Done(Termination::Boundary),
            SigmaAction::StopAtPseudoEquilibrium => Mode::Done(Termination::PseudoEquilibrium),
        };
        Ok(())
    }

    /// Moves an arrival within `merge_tol` of a known tangency onto it, so
    /// that near-tangent arrivals are classified at the tangency itself.
    fn snap_to_tangency(&mut self) {
        let sys = self.flow.sys;
        let Ok(tangencies) = sys.find_tangencies() else { return };
        let merge = sys.tolerances().merge_tol;
        let Some(&q) = tangencies.iter().find(|q| distance(**q, self.x) <= merge) else { return };
        self.x = q;
        if let Some(arc) = self.arcs.last_mut() {
            arc.set_end(q);
        }
    }

    /// Handles arrival on the manifold at the current state.
    fn arrive(&mut self, dwell_exit: Option<SigmaAction>) -> Result<()> {
        self.snap_to_tangency();
        let (options, escaping) = self.flow.options(self.x)?;
        if let Some(action) = dwell_exit {
            if !options.contains(&action) {
                return Err(Error::ChoiceIncompatible {
                    requested: action.name().into(),
                    options: options.iter().map(|o| o.name()).collect::<Vec<_>>().join(","),
                    time: self.t,
                });
            }
            return self.apply(action, options);
        }
        if options.len() == 1 {
            return self.apply(options[0], options);
        }
        self.mode = Mode::Decide(Decision { time: self.t, point: self.x, options, escaping });
        Ok(())
    }

    fn after_segment(&mut self, end: SegmentEnd) -> Result<()> {
        match end {
            SegmentEnd::Horizon => self.mode = Mode::Done(Termination::Horizon),
            SegmentEnd::Dwell(action) => self.arrive(Some(action))?,
            SegmentEnd::Sigma => self.arrive(None)?,
            SegmentEnd::Boundary => {
                self.push_event(SigmaAction::StopAtBoundary, Vec::new())?;
                self.mode = Mode::Done(Termination::Boundary);
            }
            SegmentEnd::Stationary(term) => {
                if term == Termination::PseudoEquilibrium {
                    self.push_event(SigmaAction::StopAtPseudoEquilibrium, Vec::new())?;
                }
                self.mode = Mode::Done(term);
            }
        }
        Ok(())
    }

    fn monitors(&self, regime: Regime, p: Point) -> Result<[f64; 3]> {
        let sys = self.flow.sys;
        if regime != Regime::Sliding {
            return Ok([sys.h(p)?, 0.0, 0.0]);
        }
        let (a, b) = self.flow.lies(p)?;
        let tangential = if sys.dim() == 2 {
            let g = sys.grad_h(p)?;
            let t = [-g[1], g[0], 0.0];
            vdot(self.flow.sliding(p)?, t) / norm(t)
        } else {
            0.0
        };
        Ok([a, b, tangential])
    }

    fn signs(&self, regime: Regime, p: Point) -> Result<[i8; 3]> {
        let tol = self.flow.sys.tolerances();
        let m = self.monitors(regime, p)?;
        Ok(if regime == Regime::Sliding {
            [band_sign(m[0], tol.tol), band_sign(m[1], tol.tol), band_sign(m[2], tol.eq_tol)]
        } else {
            [band_sign(m[0], tol.surface_tol), 0, 0]
        })
    }

    /// Integrates the current regime until an event, the horizon, or a dwell stop.
    fn run_segment(&mut self) -> Result<SegmentEnd> {
        let flow = self.flow;
        let sys = flow.sys;
        let tol = sys.tolerances().clone();
        let (regime, stop) = match self.mode {
            Mode::Free(Field::Plus) => (Regime::Plus, None),
            Mode::Free(Field::Minus) => (Regime::Minus, None),
            Mode::Slide { stop } => (Regime::Sliding, stop),
            _ => unreachable!("run_segment outside an integrating mode"),
        };
        let side = match regime {
            Regime::Plus => 1.0,
            _ => -1.0,
        };
        let free_field = if regime == Regime::Plus { Field::Plus } else { Field::Minus };
        let v0 = flow.velocity(regime, self.x)?;
        let mut arc = Arc::new(regime, vec![Sample { t: self.t, x: self.x, v: v0 }]);
        let stationary = if regime == Regime::Sliding {
            Termination::PseudoEquilibrium
        } else {
            Termination::Equilibrium
        };
        if norm(v0) <= tol.eq_tol {
            self.arcs.push(arc);
            return Ok(SegmentEnd::Stationary(stationary));
        }
        let mut last = self.signs(regime, self.x)?;
        let mut approach = if regime == Regime::Sliding {
            0.0
        } else {
            side * flow.lie(free_field, self.x)?
        };
        let t_stop = stop.map_or(self.horizon, |(s, _)| s.min(self.horizon));
        let end = loop {
            if self.t >= t_stop - 1e-12 {
                break match stop {
                    Some((s, action)) if s <= self.horizon => SegmentEnd::Dwell(action),
                    _ => SegmentEnd::Horizon,
                };
            }
            let h = tol.dt.min(t_stop - self.t);
            let x0 = self.x;
            let x1 = flow.rk4(regime, x0, h)?;
            let step = |s: f64| flow.rk4(regime, x0, s);
            let changed = |signs: [i8; 3]| -> Option<usize> {
                (0..3).find(|&i| last[i] != 0 && signs[i] != last[i])
            };
            let mut cut: Option<(f64, Cut)> = None;
            if !sys.contains(x1) {
                let s = bisect(h, tol.event_tol, |s| Ok(!sys.contains(step(s)?)))?;
                cut = Some((s, Cut::Boundary));
            }
            let s1 = self.signs(regime, x1)?;
            if let Some(i) = changed(s1) {
                let s = bisect(h, tol.event_tol, |s| Ok(changed(self.signs(regime, step(s)?)?).is_some()))?;
                if cut.map_or(true, |(sb, _)| s < sb) {
                    cut = Some((s, Cut::Monitor(i)));
                }
            } else if regime != Regime::Sliding && cut.is_none() && arc.samples().len() > 1 {
                let w1 = side * flow.lie(free_field, x1)?;
                if approach < 0.0 && w1 >= 0.0 {
                    let s = bisect(h, tol.event_tol, |s| Ok(side * flow.lie(free_field, step(s)?)? >= 0.0))?;
                    let hm = side * sys.h(step(s)?)?;
                    if hm.abs() <= tol.graze_tol {
                        cut = Some((s, Cut::Graze));
                    } else if hm < 0.0 {
                        // Crossed and came back within one step.
                        let sc = bisect(s, tol.event_tol, |u| Ok(changed(self.signs(regime, step(u)?)?).is_some()))?;
                        cut = Some((sc, Cut::Monitor(0)));
                    }
                }
                approach = w1;
            }
            match cut {
                None => {
                    self.t += h;
                    self.x = x1;
                    let v = flow.velocity(regime, x1)?;
                    arc.push(Sample { t: self.t, x: x1, v });
                    last = s1;
                    if norm(v) <= tol.eq_tol {
                        break SegmentEnd::Stationary(stationary);
                    }
                }
                Some((s, kind)) => {
                    let mut xe = step(s)?;
                    let end = match kind {
                        Cut::Boundary => {
                            let lo = step((s - tol.event_tol).max(0.0))?;
                            xe = clamp_into(sys, lo, xe);
                            SegmentEnd::Boundary
                        }
                        Cut::Graze => {
                            xe = sys.project_to_sigma(xe)?;
                            SegmentEnd::Sigma
                        }
                        Cut::Monitor(i) => {
                            let lo = step((s - tol.event_tol).max(0.0))?;
                            let ml = self.monitors(regime, lo)?[i];
                            let mh = self.monitors(regime, xe)?[i];
                            if regime == Regime::Sliding && (ml - mh).abs() > 0.0 && ml * mh <= 0.0 {
                                let w = ml / (ml - mh);
                                xe = sys.project_to_sigma(vadd(lo, vscale(vsub(xe, lo), w)))?;
                            } else {
                                xe = sys.project_to_sigma(xe)?;
                            }
                            if regime == Regime::Sliding && i == 2 {
                                SegmentEnd::Stationary(Termination::PseudoEquilibrium)
                            } else {
                                SegmentEnd::Sigma
                            }
                        }
                    };
                    self.t += s;
                    self.x = xe;
                    let v = flow.velocity(regime, xe)?;
                    arc.push(Sample { t: self.t, x: xe, v });
                    break end;
                }
            }
        };
        self.arcs.push(arc);
        Ok(end)
    }
}

/// Smallest step in `(0, h]` where `pred` holds, to `tol`; `pred(h)` is assumed true.
fn bisect<F: Fn(f64) -> Result<bool>>(h: f64, tol: f64, pred: F) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, h);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The last in-domain point on the segment `[inside, outside]`, snapped onto the box.
fn clamp_into(sys: &NsvfSystem, inside: Point, outside: Point) -> Point {
    let d = sys.domain();
    let mut p = if sys.contains(inside) { inside } else { outside };
    for i in 0..sys.dim() {
        p[i] = p[i].clamp(d.min[i], d.max[i]);
    }
    p
}

/// Runs one direction to completion.
pub(crate) fn run_half(
    sys: &NsvfSystem,
    p: Point,
    dir: Direction,
    chooser: &mut dyn Chooser,
    horizon: f64,
) -> Result<Half> {
    let mut tr = Tracer::start(Flow::new(sys, dir), p, horizon)?;
    while let Some(d) = tr.advance()? {
        let c = chooser.choose(&d);
        tr.decide(c)?;
    }
    Ok(tr.finish())
}

/// Joins a backward and a forward half into one orbit anchored at `t = 0`.
pub(crate) fn assemble(dim: usize, p: Point, backward: Half, forward: Half) -> Orbit {
    let mut arcs: Vec<Arc> = backward
        .arcs
        .into_iter()
        .rev()
        .map(Arc::reversed)
        .filter(|a| a.t_end() > a.t_start())
        .collect();
    arcs.extend(forward.arcs.into_iter().filter(|a| a.t_end() > a.t_start()));
    if arcs.is_empty() {
        arcs.push(Arc::stationary(p, 0.0, 0.0));
    }
    let mut events: Vec<SigmaEvent> = backward
        .events
        .into_iter()
        .rev()
        .map(|mut e| {
            e.time = -e.time;
            e
        })
        .collect();
    events.extend(forward.events);
    Orbit::from_parts(
        dim,
        arcs,
        events,
        backward.termination,
        forward.termination,
        forward.choices,
        backward.choices,
    )
}

/// One Filippov orbit through `p` over `[-horizon, horizon]`, resolving forward
/// decisions with `choices` and every other decision with its first option.
pub fn integrate_orbit(sys: &NsvfSystem, p: Point, choices: &[Choice], horizon: f64) -> Result<Orbit> {
    integrate_orbit_with(
        sys,
        p,
        &mut ListChooser::new(choices),
        &mut ListChooser::default(),
        horizon,
    )
}

pub fn integrate_orbit_with(
    sys: &NsvfSystem,
    p: Point,
    forward: &mut dyn Chooser,
    backward: &mut dyn Chooser,
    horizon: f64,
) -> Result<Orbit> {
    let f = run_half(sys, p, Direction::Forward, forward, horizon)?;
    let b = run_half(sys, p, Direction::Backward, backward, horizon)?;
    Ok(assemble(sys.dim(), p, b, f))
}

/// Integrates a single regime from `p` for at most `t_max`, stopping at the
/// first event. The event carries the default continuation at its point.
pub fn flow_smooth(
    sys: &NsvfSystem,
    regime: Regime,
    p: Point,
    t_max: f64,
) -> Result<(Arc, Option<SigmaEvent>)> {
    let mode = match regime {
        Regime::Plus => Mode::Free(Field::Plus),
        Regime::Minus => Mode::Free(Field::Minus),
        Regime::Sliding => Mode::Slide { stop: None },
        Regime::Stationary => return Ok((Arc::stationary(p, 0.0, t_max), None)),
    };
    if !sys.contains(p) {
        return Err(Error::InvalidArgument(format!("start point {p:?} is outside the domain")));
    }
    let x = if regime == Regime::Sliding { sys.project_to_sigma(p)? } else { p };
    let mut tr = Tracer {
        flow: Flow::new(sys, Direction::Forward),
        horizon: t_max,
        t: 0.0,
        x,
        arcs: Vec::new(),
        events: Vec::new(),
        choices: Vec::new(),
        mode,
    };
    let end = tr.run_segment()?;
    let arc = tr.arcs.pop().expect("segment pushes an arc");
    let event = match end {
        SegmentEnd::Horizon | SegmentEnd::Dwell(_) => None,
        SegmentEnd::Stationary(Termination::PseudoEquilibrium) | SegmentEnd::Boundary => {
            tr.after_segment(end)?;
            tr.events.pop()
        }
        SegmentEnd::Stationary(_) => None,
        SegmentEnd::Sigma => {
            let (options, _) = tr.flow.options(tr.x)?;
            let class = sys.classify_unchecked(tr.x)?;
            Some(SigmaEvent {
                time: tr.t,
                point: tr.x,
                class,
                action: options[0],
                direction: Direction::Forward,
                options,
            })
        }
    };
    Ok((arc, event))
}

#[cfg(test)]
mod tests;
