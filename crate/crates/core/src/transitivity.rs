//! Transitivity machinery: tangency connections, recurrence evidence and the
//! cut-and-glue construction of an orbit that follows the past of one orbit
//! and the future of another.
//!
//! Recurrence is checked over the sampled branch tree from a finite seed set,
//! so a certificate is a semi-decision at desk scale and never a proof.
//! Connecting segments may use any regime sequence the integrator produces.

use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{enumerate_until, BranchPolicy, Choice, Direction};
use crate::metric::{constants_points_to_orbits, distance_integral, MetricOptions};
use crate::orbit::Orbit;
use crate::system::{distance, NsvfSystem, Point};

/// Default state-space tolerance for matching a tangency point.
pub const MATCH_TOL: f64 = 1e-6;

/// A connecting segment `theta` on `[-s, s]` with `theta(-s) = from`, `theta(s) = to`.
#[derive(Debug, Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub s: f64,
    pub theta: Orbit,
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeSummary {
    pub from: usize,
    pub to: usize,
    pub s: f64,
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone)]
pub struct TangencyGraph {
    pub nodes: Vec<Point>,
    pub edges: Vec<Edge>,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSummary {
    pub nodes: Vec<Point>,
    pub edges: Vec<EdgeSummary>,
    pub strongly_connected: bool,
    pub missing: Vec<(usize, usize)>,
    pub truncated: bool,
}

impl TangencyGraph {
    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    fn reach(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let mut r = vec![vec![false; n]; n];
        for e in &self.edges {
            r[e.from][e.to] = true;
        }
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }

    /// Ordered pairs with no chain of connecting segments.
    pub fn missing_connections(&self) -> Vec<(usize, usize)> {
        let r = self.reach();
        let n = self.nodes.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !r[i][j])
            .collect()
    }

    /// Vacuously true for an empty node set.
    pub fn strongly_connected(&self) -> bool {
        self.missing_connections().is_empty()
    }

    /// Concatenated segment from `from` to `to` along the path of least total
    /// time, placed on `[-S, S]`.
    pub fn connect(&self, from: usize, to: usize) -> Result<(f64, Orbit)> {
        let path = self.shortest_path(from, to).ok_or_else(|| Error::NoConnection {
            from: self.nodes[from],
            to: self.nodes[to],
        })?;
        let total: f64 = path.iter().map(|e| 2.0 * e.s).sum();
        let big_s = total / 2.0;
        let mut pieces = Vec::with_capacity(path.len());
        let mut cursor = -big_s;
        for e in &path {
            pieces.push(e.theta.shift(-(cursor + e.s)));
            cursor += 2.0 * e.s;
        }
        Ok((big_s, Orbit::concat(&pieces, 10.0 * MATCH_TOL)?))
    }

    fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<&Edge>> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> std::cmp::Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let n = self.nodes.len();
        let mut best = vec![f64::INFINITY; n];
        let mut prev: Vec<Option<usize>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        best[from] = 0.0;
        heap.push(Item(0.0, from));
        while let Some(Item(d, u)) = heap.pop() {
            if d > best[u] {
                continue;
            }
            if u == to {
                break;
            }
            for (k, e) in self.edges.iter().enumerate().filter(|(_, e)| e.from == u) {
                let nd = d + 2.0 * e.s;
                if nd < best[e.to] {
                    best[e.to] = nd;
                    prev[e.to] = Some(k);
                    heap.push(Item(nd, e.to));
                }
            }
        }
        if from == to {
            return self.edge(from, to).map(|e| vec![e]);
        }
        if !best[to].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = to;
        while v != from {
            let k = prev[v]?;
            path.push(&self.edges[k]);
            v = self.edges[k].from;
        }
        path.reverse();
        Some(path)
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSummary { from: e.from, to: e.to, s: e.s, choices: e.choices.clone() })
                .collect(),
            strongly_connected: self.strongly_connected(),
            missing: self.missing_connections(),
            truncated: self.truncated,
        }
    }
}

/// Searches the forward branch tree from each node for segments reaching the
/// other nodes. Every node carries the trivial self-loop with `s = 0`; among
/// several segments for one pair the shortest is kept, ties going to the
/// first in choice order.
pub fn build_tangency_graph(
    sys: &NsvfSystem,
    nodes: &[Point],
    policy: &BranchPolicy,
    match_tol: f64,
) -> Result<TangencyGraph> {
    let per_node: Vec<(Vec<Edge>, bool)> = (0..nodes.len())
        .into_par_iter()
        .map(|i| -> Result<(Vec<Edge>, bool)> {
            let tree = enumerate_until(sys, nodes[i], policy, Direction::Forward, nodes, match_tol)?;
            let mut best: Vec<Option<Edge>> = vec![None; nodes.len()];
            for leaf in &tree.leaves {
                let Some(hit) = leaf.hit else { continue };
                if hit.target == i {
                    continue;
                }
                let s = hit.time / 2.0;
                if best[hit.target].as_ref().is_some_and(|e| e.s <= s) {
                    continue;
                }
                let theta = leaf.orbit.restrict(0.0, hit.time)?.shift(s);
                best[hit.target] =
                    Some(Edge { from: i, to: hit.target, s, theta, choices: leaf.choices.clone() });
            }
            best[i] = Some(Edge {
                from: i,
                to: i,
                s: 0.0,
                theta: Orbit::stationary(sys.dim(), nodes[i], 0.0),
                choices: Vec::new(),
            });
            Ok((best.into_iter().flatten().collect(), tree.truncated))
        })
        .collect::<Result<_>>()?;
    let truncated = per_node.iter().any(|(_, t)| *t);
    let mut edges: Vec<Edge> = per_node.into_iter().flat_map(|(e, _)| e).collect();
    edges.sort_by_key(|e| (e.from, e.to));
    Ok(TangencyGraph { nodes: nodes.to_vec(), edges, truncated })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchHit {
    pub choices: Vec<Choice>,
    /// Tangency index and signed time of the first visit, if any.
    pub target: Option<usize>,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceEvidence {
    pub seed: Point,
    pub direction: Direction,
    pub branches: Vec<BranchHit>,
    pub truncated: bool,
}

impl RecurrenceEvidence {
    pub fn all_hit(&self) -> bool {
        self.branches.iter().all(|b| b.target.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    CertifiedAtDeskScale,
    CounterexampleCandidate,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub evidence: Vec<RecurrenceEvidence>,
    /// Some branch never reached a tangency within the horizon.
    pub counterexample_candidate: bool,
    pub truncated: bool,
}

/// First visit of the tangency set, at strictly positive time, along every
/// sampled branch from every seed in both time directions.
pub fn check_recurrence(
    sys: &NsvfSystem,
    nodes: &[Point],
    seeds: &[Point],
    policy: &BranchPolicy,
    match_tol: f64,
) -> Result<RecurrenceReport> {
    let jobs: Vec<(Point, Direction)> = seeds
        .iter()
        .flat_map(|&s| [(s, Direction::Forward), (s, Direction::Backward)])
        .collect();
    let evidence: Vec<RecurrenceEvidence> = jobs
        .par_iter()
        .map(|&(seed, direction)| -> Result<RecurrenceEvidence> {
            let tree = enumerate_until(sys, seed, policy, direction, nodes, match_tol)?;
            let branches = tree
                .leaves
                .iter()
                .map(|l| BranchHit {
                    choices: l.choices.clone(),
                    target: l.hit.map(|h| h.target),
                    time: l.hit.map(|h| h.time * direction.sign()),
                })
                .collect();
            Ok(RecurrenceEvidence { seed, direction, branches, truncated: tree.truncated })
        })
        .collect::<Result<_>>()?;
    let counterexample_candidate = evidence.iter().any(|e| !e.all_hit());
    let truncated = evidence.iter().any(|e| e.truncated);
    Ok(RecurrenceReport { evidence, counterexample_candidate, truncated })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitivityCertificate {
    pub graph: GraphSummary,
    pub recurrence: RecurrenceReport,
    pub status: CertificateStatus,
    pub reasons: Vec<String>,
}

/// Checks the three hypotheses at desk scale and assembles a certificate.
pub fn certify(
    sys: &NsvfSystem,
    nodes: &[Point],
    seeds: &[Point],
    policy: &BranchPolicy,
    match_tol: f64,
) -> Result<TransitivityCertificate> {
    let graph = build_tangency_graph(sys, nodes, policy, match_tol)?;
    let recurrence = check_recurrence(sys, nodes, seeds, policy, match_tol)?;
    let summary = graph.summary();
    let mut reasons = Vec::new();
    if nodes.is_empty() {
        reasons.push("no tangency points: recurrence to the tangency set cannot be tested".into());
    }
    if !summary.strongly_connected {
        reasons.push(format!("tangency graph is not strongly connected: missing {:?}", summary.missing));
    }
    if recurrence.counterexample_candidate {
        let misses = recurrence.evidence.iter().filter(|e| !e.all_hit()).count();
        reasons.push(format!("{misses} seed directions have a branch that never reaches the tangency set"));
    }
    if graph.truncated || recurrence.truncated {
        reasons.push("branch tree truncated at the node cap".into());
    }
    let status = if nodes.is_empty() {
        CertificateStatus::Inconclusive
    } else if !summary.strongly_connected || recurrence.counterexample_candidate {
        CertificateStatus::CounterexampleCandidate
    } else if graph.truncated || recurrence.truncated {
        CertificateStatus::Inconclusive
    } else {
        CertificateStatus::CertifiedAtDeskScale
    };
    Ok(TransitivityCertificate { graph: summary, recurrence, status, reasons })
}

#[derive(Debug, Clone, Serialize)]
pub struct GlueResult {
    #[serde(skip)]
    pub orbit: Orbit,
    pub epsilon: f64,
    pub tau: f64,
    pub delta: f64,
    pub t_alpha: f64,
    pub t_beta: f64,
    pub s: f64,
    pub node_alpha: usize,
    pub node_beta: usize,
    /// `d(alpha, shift(gamma, -t_alpha - s))`.
    pub achieved_alpha: f64,
    /// `d(beta, shift(gamma, t_beta + s))`.
    pub achieved_beta: f64,
    /// Largest state mismatch at the splice points.
    pub junction_defect: f64,
}

fn node_near(nodes: &[Point], p: Point, tol: f64) -> Option<usize> {
    nodes.iter().position(|n| distance(*n, p) <= tol)
}

/// Smallest `t >= tau` with `orbit(t)` in the tangency set.
pub fn forward_return(orbit: &Orbit, nodes: &[Point], tau: f64, tol: f64) -> Option<(f64, usize)> {
    orbit
        .events()
        .iter()
        .filter(|e| e.time >= tau)
        .find_map(|e| node_near(nodes, e.point, tol).map(|k| (e.time, k)))
}

/// Smallest `t >= tau` with `orbit(-t)` in the tangency set.
pub fn backward_return(orbit: &Orbit, nodes: &[Point], tau: f64, tol: f64) -> Option<(f64, usize)> {
    orbit
        .events()
        .iter()
        .rev()
        .filter(|e| e.time <= -tau)
        .find_map(|e| node_near(nodes, e.point, tol).map(|k| (-e.time, k)))
}

/// Builds `gamma` following `alpha` up to its return to the tangency set
/// after `tau`, then a connecting segment, then `beta` from its backward
/// return before `-tau`, and checks both orbit distances against `epsilon`.
pub fn glue(
    sys: &NsvfSystem,
    alpha: &Orbit,
    beta: &Orbit,
    epsilon: f64,
    graph: &TangencyGraph,
    opts: &MetricOptions,
) -> Result<GlueResult> {
    let z = sys.z_bound();
    let c = constants_points_to_orbits(epsilon, z)?;
    let (t_alpha, node_alpha) = forward_return(alpha, &graph.nodes, c.tau, MATCH_TOL)
        .ok_or_else(|| Error::NoRecurrence(format!("alpha has no forward tangency visit after {}", c.tau)))?;
    let (t_beta, node_beta) = backward_return(beta, &graph.nodes, c.tau, MATCH_TOL)
        .ok_or_else(|| Error::NoRecurrence(format!("beta has no backward tangency visit before -{}", c.tau)))?;
    let (s, theta) = graph.connect(node_alpha, node_beta)?;
    let head = alpha.restrict(alpha.t_min(), t_alpha)?.shift(s + t_alpha);
    let tail = beta.restrict(-t_beta, beta.t_max())?.shift(-s - t_beta);
    let junction_defect = distance(head.eval(-s), theta.eval(-s)).max(distance(theta.eval(s), tail.eval(s)));
    let pieces = if s > 0.0 { vec![head, theta, tail] } else { vec![head, tail] };
    let orbit = Orbit::concat(&pieces, 10.0 * MATCH_TOL)?;
    let achieved_alpha = distance_integral(alpha, &orbit.shift(-t_alpha - s), z, opts).value;
    let achieved_beta = distance_integral(beta, &orbit.shift(t_beta + s), z, opts).value;
    if !(achieved_alpha < epsilon && achieved_beta < epsilon) {
        return Err(Error::GlueVerification { alpha: achieved_alpha, beta: achieved_beta, eps: epsilon });
    }
    Ok(GlueResult {
        orbit,
        epsilon,
        tau: c.tau,
        delta: c.delta,
        t_alpha,
        t_beta,
        s,
        node_alpha,
        node_beta,
        achieved_alpha,
        achieved_beta,
        junction_defect,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub target: Point,
    pub time: Option<f64>,
    pub distance: f64,
}

/// For each target, the first sampled time at which `orbit` comes within `delta`.
pub fn base_transitivity_witness(orbit: &Orbit, targets: &[Point], delta: f64, dt: f64) -> Vec<Witness> {
    let (a, b) = (orbit.t_min(), orbit.t_max());
    let n = (((b - a) / dt).ceil() as usize).max(1);
    let samples: Vec<(f64, Point)> = (0..=n)
        .map(|k| {
            let t = a + (b - a) * k as f64 / n as f64;
            (t, orbit.eval(t))
        })
        .collect();
    targets
        .par_iter()
        .map(|&target| {
            let mut best = f64::INFINITY;
            let mut time = None;
            for &(t, p) in &samples {
                let d = distance(p, target);
                if d < best {
                    best = d;
                }
                if d < delta {
                    time = Some(t);
                    best = d;
                    break;
                }
            }
            Witness { target, time, distance: best }
        })
        .collect()
}

/// One representative orbit per distinct Σ-sequence over `[-horizon, horizon]`
/// among the forward branch trees of depth `depth` from each seed.
pub fn separable_skeleton(
    sys: &NsvfSystem,
    seeds: &[Point],
    depth: usize,
    policy: &BranchPolicy,
) -> Result<Vec<Orbit>> {
    let policy = BranchPolicy { max_depth: depth, ..policy.clone() };
    let per_seed: Vec<Vec<Orbit>> = seeds
        .par_iter()
        .map(|&p| -> Result<Vec<Orbit>> {
            let tree = crate::integrate::enumerate_branches(sys, p, &policy, Direction::Forward)?;
            if tree.truncated {
                return Err(Error::TreeCapExceeded { cap: policy.node_cap });
            }
            let mut reps: Vec<(crate::orbit::SigmaSequence, Orbit)> = Vec::new();
            for leaf in tree.leaves {
                let seq = leaf.orbit.sigma_sequence(policy.horizon)?;
                if !reps.iter().any(|(s, _)| s.matches(&seq, MATCH_TOL)) {
                    reps.push((seq, leaf.orbit));
                }
            }
            Ok(reps.into_iter().map(|(_, o)| o).collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}
