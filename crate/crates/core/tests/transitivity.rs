use filippov::integrate::{integrate_orbit, BranchPolicy};
use filippov::metric::MetricOptions;
use filippov::transitivity::{build_tangency_graph, certify, glue, separable_skeleton, MATCH_TOL};
use filippov::{builtin, CertificateStatus, Point};

fn policy(horizon: f64) -> BranchPolicy {
    BranchPolicy { dep_step: 0.25, max_depth: 3, horizon, node_cap: 10_000 }
}

#[test]
fn bean_graph_is_strongly_connected() {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    assert_eq!(nodes.len(), 3);
    let g = build_tangency_graph(&sys, &nodes, &policy(20.0), MATCH_TOL).unwrap();
    assert!(g.strongly_connected(), "{:?}", g.summary());
}

#[test]
fn two_island_graph_is_disconnected() {
    let named = builtin("two-island").unwrap();
    let sys = named.system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    let seeds = [[0.3, 0.5, 0.0], [-1.5, 1.0, 0.0]];
    let cert = certify(&sys, &nodes, &seeds, &policy(10.0), MATCH_TOL).unwrap();
    assert!(!cert.graph.strongly_connected);
    assert_eq!(cert.status, CertificateStatus::CounterexampleCandidate);
}

#[test]
fn empty_tangency_set_is_inconclusive() {
    let sys = builtin("linear-crossing").unwrap().system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    assert!(nodes.is_empty());
    let cert = certify(&sys, &nodes, &[[0.0, -1.0, 0.0]], &policy(5.0), MATCH_TOL).unwrap();
    assert!(cert.graph.strongly_connected);
    assert!(cert.recurrence.counterexample_candidate);
    assert_eq!(cert.status, CertificateStatus::Inconclusive);
}

#[test]
fn bean_certificate() {
    let named = builtin("bean-analogue").unwrap();
    let sys = named.system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    let b = named.seed_domain().unwrap();
    let seeds: Vec<Point> = (0..4)
        .map(|k| {
            let s = k as f64 / 3.0;
            [b.min[0] + s * (b.max[0] - b.min[0]), b.min[1] + (1.0 - s) * (b.max[1] - b.min[1]), 0.0]
        })
        .collect();
    let cert = certify(&sys, &nodes, &seeds, &policy(20.0), MATCH_TOL).unwrap();
    assert_eq!(cert.status, CertificateStatus::CertifiedAtDeskScale, "{:?}", cert.reasons);
}

#[test]
fn bean_glue() {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    let g = build_tangency_graph(&sys, &nodes, &policy(20.0), MATCH_TOL).unwrap();
    let alpha = integrate_orbit(&sys, [1.1, 0.7, 0.0], &[], 40.0).unwrap();
    let beta = integrate_orbit(&sys, [1.25, 1.3, 0.0], &[], 40.0).unwrap();
    let r = glue(&sys, &alpha, &beta, 0.1, &g, &MetricOptions::default()).unwrap();
    assert!(r.achieved_alpha < 0.1 && r.achieved_beta < 0.1);
    assert!(r.t_alpha >= r.tau && r.t_beta >= r.tau);
    assert!(r.junction_defect < 1e-8, "{}", r.junction_defect);
}

#[test]
fn crossing_skeleton_has_one_orbit_per_seed() {
    let sys = builtin("linear-crossing").unwrap().system().unwrap();
    let seeds = [[0.0, -1.0, 0.0], [0.5, 0.5, 0.0]];
    let sk = separable_skeleton(&sys, &seeds, 3, &policy(3.0)).unwrap();
    assert_eq!(sk.len(), 2);
}
