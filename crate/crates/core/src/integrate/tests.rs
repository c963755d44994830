use super::*;
use crate::builtin::builtin;
use crate::orbit::sampled_sup_distance;
use crate::system::{distance, Domain, Tolerances};

fn planar(zp: [&str; 2], zm: [&str; 2], bound: f64, half: [f64; 2]) -> NsvfSystem {
    NsvfSystem::from_strings(
        "y",
        &zp,
        &zm,
        Domain::new(&[-half[0], -half[1]], &[half[0], half[1]]).unwrap(),
        bound,
        Tolerances::default(),
    )
    .unwrap()
}

fn close(a: Point, b: Point, tol: f64) -> bool {
    distance(a, b) < tol
}

#[test]
fn smooth_flow_hits_manifold() {
    let sys = planar(["1", "1"], ["1", "0.5"], 1.5, [2.0, 2.0]);
    let (arc, ev) = flow_smooth(&sys, Regime::Plus, [0.0, -1.0, 0.0], 5.0).unwrap();
    let ev = ev.expect("event");
    assert!((ev.time - 1.0).abs() < 1e-9, "{}", ev.time);
    assert!(close(ev.point, [1.0, 0.0, 0.0], 1e-9));
    assert!((arc.t_end() - 1.0).abs() < 1e-9);
}

#[test]
fn smooth_slide_and_degenerate_arc() {
    let sys = builtin("stable-slide").unwrap().system().unwrap();
    let (arc, ev) = flow_smooth(&sys, Regime::Sliding, [0.0; 3], 2.0).unwrap();
    assert!(ev.is_none());
    assert!(close(arc.end(), [2.0, 0.0, 0.0], 1e-9));
    let (arc, ev) = flow_smooth(&sys, Regime::Plus, [0.0, 0.5, 0.0], 0.0).unwrap();
    assert!(ev.is_none());
    assert_eq!(arc.start(), arc.end());
    assert_eq!(arc.t_start(), arc.t_end());
}

#[test]
fn option_counts() {
    let esc = builtin("escape-fold").unwrap().system().unwrap();
    assert_eq!(step_from_sigma(&esc, [0.5, 0.0, 0.0], Direction::Forward).unwrap().len(), 3);
    assert_eq!(step_from_sigma(&esc, [0.5, 0.0, 0.0], Direction::Backward).unwrap().len(), 1);
    assert_eq!(step_from_sigma(&esc, [-0.5, 0.0, 0.0], Direction::Forward).unwrap(), vec![SigmaAction::Cross]);
    let lin = builtin("linear-crossing").unwrap().system().unwrap();
    assert_eq!(step_from_sigma(&lin, [0.3, 0.0, 0.0], Direction::Forward).unwrap(), vec![SigmaAction::Cross]);
    let st = builtin("stable-slide").unwrap().system().unwrap();
    assert_eq!(
        step_from_sigma(&st, [0.3, 0.0, 0.0], Direction::Forward).unwrap(),
        vec![SigmaAction::EnterSliding]
    );
    assert_eq!(step_from_sigma(&st, [0.3, 0.0, 0.0], Direction::Backward).unwrap().len(), 3);
}

#[test]
fn slide_then_fold_exit() {
    let sys = planar(["1", "x"], ["1", "1"], 2.5, [2.0, 2.0]);
    let o = integrate_orbit(&sys, [-1.0, -0.5, 0.0], &[], 2.0).unwrap();
    let fwd: Vec<Regime> = o.arc_spans().iter().filter(|s| s.2 > 0.0).map(|s| s.0).collect();
    assert_eq!(fwd, vec![Regime::Minus, Regime::Sliding, Regime::Plus]);
    assert!(o.continuity_defect() < 10.0 * sys.tolerances().event_tol);
    let spans = o.arc_spans();
    let slide = spans.iter().find(|s| s.0 == Regime::Sliding).unwrap();
    assert!((slide.1 - 0.5).abs() < 1e-8 && (slide.2 - 1.0).abs() < 1e-8);
    assert!(close(o.eval(2.0), [1.0, 0.5, 0.0], 1e-8));
}

#[test]
fn pseudo_equilibrium_gives_finite_end() {
    let sys = planar(["-x", "-1"], ["-x", "1"], 3.0, [2.0, 2.0]);
    let o = integrate_orbit(&sys, [0.5, 0.0, 0.0], &[], 40.0).unwrap();
    assert_eq!(o.end_termination(), Termination::PseudoEquilibrium);
    assert!(o.omega_plus().is_finite());
    assert!(norm(o.eval(100.0)) < 1e-8);
}

#[test]
fn regime_invariants_on_bean() {
    let named = builtin("bean-analogue").unwrap();
    let sys = named.system().unwrap();
    let o = integrate_orbit(&sys, [1.2, 1.0, 0.0], &[], 15.0).unwrap();
    let tol = sys.tolerances();
    assert!(o.continuity_defect() < 10.0 * tol.event_tol);
    for arc in o.raw_arcs() {
        for s in arc.samples() {
            let h = sys.h(s.x).unwrap();
            match arc.regime {
                Regime::Plus => assert!(h > -tol.surface_tol, "{h}"),
                Regime::Minus => assert!(h < tol.surface_tol, "{h}"),
                Regime::Sliding => assert!(h.abs() <= 10.0 * tol.surface_tol, "{h}"),
                Regime::Stationary => {}
            }
        }
    }
    let z = sys.z_bound();
    for k in 0..300 {
        let (t0, t1) = (-15.0 + 0.1 * k as f64, -15.0 + 0.1 * k as f64 + 0.037);
        assert!(distance(o.eval(t0), o.eval(t1)) <= z * (t1 - t0) + 1e-9);
    }
}

#[test]
fn forward_replay_matches() {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    let g = integrate_orbit(&sys, [1.2, 1.0, 0.0], &[], 12.0).unwrap();
    let t = 6.0;
    let mut follow = FollowChooser::new(&sys, &g, -t);
    let r = integrate_orbit_with(&sys, g.eval(-t), &mut follow, &mut ListChooser::default(), 2.0 * t).unwrap();
    let err = sampled_sup_distance(&g, &r.shift(t), -t, t, 1e-3);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn crossing_system_has_one_branch() {
    let sys = builtin("linear-crossing").unwrap().system().unwrap();
    let tree = enumerate_branches(&sys, [0.0, -1.0, 0.0], &BranchPolicy::default(), Direction::Forward).unwrap();
    assert_eq!(tree.leaves.len(), 1);
}

#[test]
fn escaping_branch_count() {
    let sys = builtin("escape-fold").unwrap().system().unwrap();
    // Sliding from x = 0.5 to the edge x = 2 takes (x + x^2/2) from 0.5 to 2 = 3.375.
    let policy = BranchPolicy { max_depth: 1, ..BranchPolicy::default() };
    let tree = enumerate_branches(&sys, [0.5, 0.0, 0.0], &policy, Direction::Forward).unwrap();
    let k = (3.375f64 / policy.dep_step).ceil() as usize;
    assert_eq!(tree.leaves.len(), 2 * k + 1);
    let root = BranchPolicy { max_depth: 0, ..policy };
    let tree = enumerate_branches(&sys, [0.5, 0.0, 0.0], &root, Direction::Forward).unwrap();
    assert_eq!(tree.leaves.len(), 1);
}

#[test]
fn incompatible_choice_is_rejected() {
    let sys = builtin("escape-fold").unwrap().system().unwrap();
    let r = integrate_orbit(&sys, [0.5, 0.0, 0.0], &[Choice::new(SigmaAction::StopAtBoundary)], 1.0);
    assert!(matches!(r, Err(Error::ChoiceIncompatible { .. })), "{:?}", r.map(|o| o.events()));
}

