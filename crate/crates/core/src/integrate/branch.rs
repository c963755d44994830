//! Enumeration of the solution tree through nonunique points.
//!
//! The continuum of departures from an escaping arc is sampled every
//! `dep_step` time units of sliding, so the tree under-approximates the
//! solution set.

use serde::{Deserialize, Serialize};

use super::{assemble, run_half, Choice, Decision, Direction, Flow, Half, ListChooser, SigmaAction, Tracer};
use crate::error::{Error, Result};
use crate::orbit::Orbit;
use crate::system::{distance, NsvfSystem, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BranchPolicy {
    /// Sliding time between sampled departures from an escaping arc.
    pub dep_step: f64,
    /// Number of branching decisions expanded along one path.
    pub max_depth: usize,
    pub horizon: f64,
    /// Tree size cap; exceeding it truncates the expansion.
    pub node_cap: usize,
}

impl Default for BranchPolicy {
    fn default() -> Self {
        BranchPolicy { dep_step: 0.25, max_depth: 6, horizon: 20.0, node_cap: 10_000 }
    }
}

impl BranchPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.dep_step > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("dep_step and horizon must be positive".into()));
        }
        Ok(())
    }
}

/// First visit of a target point after the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub target: usize,
    /// Time from the start in the enumeration direction (always positive).
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct BranchLeaf {
    /// Choices along the branch in the enumeration direction.
    pub choices: Vec<Choice>,
    pub orbit: Orbit,
    pub hit: Option<Hit>,
}

#[derive(Debug, Clone)]
pub struct BranchTree {
    pub leaves: Vec<BranchLeaf>,
    pub nodes: usize,
    pub truncated: bool,
}

struct Expansion<'a, 'b> {
    sys: &'a NsvfSystem,
    p: Point,
    dir: Direction,
    policy: &'b BranchPolicy,
    targets: &'b [Point],
    match_tol: f64,
    other: Half,
    nodes: usize,
    truncated: bool,
    leaves: Vec<BranchLeaf>,
}

impl Expansion<'_, '_> {
    fn hit_of(&self, time: f64, point: Point) -> Option<Hit> {
        if time <= self.sys.tolerances().event_tol {
            return None;
        }
        self.targets
            .iter()
            .position(|t| distance(*t, point) <= self.match_tol)
            .map(|target| Hit { target, time })
    }

    fn leaf(&mut self, tr: Tracer<'_>, hit: Option<Hit>) {
        let half = tr.finish();
        let choices = half.choices.clone();
        let orbit = match self.dir {
            Direction::Forward => assemble(self.sys.dim(), self.p, self.other.clone(), half),
            Direction::Backward => assemble(self.sys.dim(), self.p, half, self.other.clone()),
        };
        self.leaves.push(BranchLeaf { choices, orbit, hit });
    }

    /// Candidate choices at a decision: every option, with exits from an
    /// escaping slide sampled across its duration.
    fn children(&self, tr: &Tracer<'_>, d: &Decision) -> Result<Vec<Choice>> {
        if !(d.escaping && d.options.contains(&SigmaAction::EnterSliding)) {
            return Ok(d.options.iter().map(|&o| Choice::new(o)).collect());
        }
        let mut trial = tr.clone();
        trial.decide(Choice::new(SigmaAction::EnterSliding))?;
        let _ = trial.advance_one_segment()?;
        let length = trial.time() - d.time;
        let mut out = vec![Choice::new(SigmaAction::EnterSliding)];
        let mut j = 0usize;
        loop {
            let dwell = self.policy.dep_step * j as f64;
            if j > 0 && dwell >= length - 1e-9 {
                break;
            }
            for exit in [SigmaAction::ExitToPlus, SigmaAction::ExitToMinus] {
                if j > 0 || d.options.contains(&exit) {
                    out.push(Choice::after(exit, dwell));
                }
            }
            j += 1;
        }
        Ok(out)
    }

    fn expand(&mut self, mut tr: Tracer<'_>, depth: usize) -> Result<()> {
        let mut seen = 0;
        loop {
            let next = tr.advance()?;
            let mut hit = None;
            for e in &tr.events()[seen..] {
                if hit.is_none() {
                    hit = self.hit_of(e.time, e.point);
                }
            }
            seen = tr.events().len();
            if hit.is_none() {
                if let Some(d) = &next {
                    hit = self.hit_of(d.time, d.point);
                }
            }
            if hit.is_some() || next.is_none() {
                self.leaf(tr, hit);
                return Ok(());
            }
            let d = next.expect("checked above");
            let kids = if depth < self.policy.max_depth && !self.truncated {
                self.children(&tr, &d)?
            } else {
                Vec::new()
            };
            if kids.len() <= 1 || self.nodes + kids.len() > self.policy.node_cap {
                if kids.len() > 1 {
                    self.truncated = true;
                }
                tr.decide(kids.first().copied().unwrap_or(Choice::new(d.options[0])))?;
                continue;
            }
            self.nodes += kids.len();
            for c in kids {
                let mut child = tr.clone();
                child.decide(c)?;
                self.expand(child, depth + 1)?;
            }
            return Ok(());
        }
    }
}

impl Tracer<'_> {
    /// Runs exactly one integrating segment (used to measure a slide).
    fn advance_one_segment(&mut self) -> Result<()> {
        if matches!(self.mode, super::Mode::Free(_) | super::Mode::Slide { .. }) {
            let end = self.run_segment()?;
            self.after_segment(end)?;
        }
        Ok(())
    }
}

/// The branch tree from `p` in one direction; the other direction follows
/// first options. Leaves come in choice-lexicographic order.
pub fn enumerate_branches(
    sys: &NsvfSystem,
    p: Point,
    policy: &BranchPolicy,
    direction: Direction,
) -> Result<BranchTree> {
    enumerate_until(sys, p, policy, direction, &[], 0.0)
}

/// As [`enumerate_branches`], but each branch stops at its first visit
/// (at positive time) of a point within `match_tol` of one of `targets`.
pub fn enumerate_until(
    sys: &NsvfSystem,
    p: Point,
    policy: &BranchPolicy,
    direction: Direction,
    targets: &[Point],
    match_tol: f64,
) -> Result<BranchTree> {
    policy.validate()?;
    let other = run_half(sys, p, direction.reverse(), &mut ListChooser::default(), policy.horizon)?;
    let mut ex = Expansion {
        sys,
        p,
        dir: direction,
        policy,
        targets,
        match_tol,
        other,
        nodes: 1,
        truncated: false,
        leaves: Vec::new(),
    };
    let tr = Tracer::start(Flow::new(sys, direction), p, policy.horizon)?;
    ex.expand(tr, 0)?;
    Ok(BranchTree { leaves: ex.leaves, nodes: ex.nodes, truncated: ex.truncated })
}
