mod common;

use filippov::metric::{distance_integral, distance_sup, MetricOptions};
use filippov::system::{Domain, Tolerances};
use filippov::{ExprTree, NsvfSystem, RegionKind};
use proptest::prelude::*;

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
        Just("x".to_string()),
        Just("y".to_string()),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("({a})^2")),
            inner.prop_map(|a| format!("-({a})^3")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivative_matches_finite_difference(src in expr(), x in -1.0f64..1.0, y in -1.0f64..1.0, var in 0usize..2) {
        let e = ExprTree::parse(&src).unwrap();
        let d = e.differentiate(var).evaluate(&[x, y]).unwrap();
        let step = 1e-5;
        let mut lo = [x, y];
        let mut hi = [x, y];
        lo[var] -= step;
        hi[var] += step;
        let fd = (e.evaluate(&hi).unwrap() - e.evaluate(&lo).unwrap()) / (2.0 * step);
        let scale = 1.0 + d.abs() + e.evaluate(&[x, y]).unwrap().abs();
        prop_assert!((d - fd).abs() <= 1e-5 * scale, "{src}: {d} vs {fd}");
    }

    #[test]
    fn print_parse_round_trip(src in expr()) {
        let e = ExprTree::parse(&src).unwrap();
        let again = ExprTree::parse(&e.to_string()).unwrap();
        prop_assert_eq!(&again, &e);
    }

    #[test]
    fn compiled_matches_tree(src in expr(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let e = ExprTree::parse(&src).unwrap();
        let a = e.evaluate(&[x, y]).unwrap();
        let b = e.compile().eval(&[x, y]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

fn coeff() -> impl Strategy<Value = String> {
    (-1.0f64..1.0).prop_map(|c| format!("{c:.3}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Sliding vector fields are tangent to a circular switching manifold.
    #[test]
    fn sliding_field_is_tangent(c in proptest::collection::vec(coeff(), 6), theta in 0.0f64..std::f64::consts::TAU) {
        let zp = [format!("{} + {}*x", c[0], c[1]), format!("{} + {}*y", c[2], c[3])];
        let zm = [format!("{} - x", c[4]), format!("{} + y", c[5])];
        let sys = NsvfSystem::from_strings(
            "x^2 + y^2 - 1",
            &zp,
            &zm,
            Domain::new(&[-1.5, -1.5], &[1.5, 1.5]).unwrap(),
            10.0,
            Tolerances { tangency_grid: 256, ..Tolerances::default() },
        );
        let Ok(sys) = sys else { return Ok(()) };
        let p = [theta.cos(), theta.sin(), 0.0];
        let class = sys.classify_point(p).unwrap();
        if class.kind.is_sliding() && (class.lie_plus - class.lie_minus).abs() > 1e-3 {
            let zs = sys.sliding_field(p).unwrap();
            let g = sys.grad_h(p).unwrap();
            let dot = zs[0] * g[0] + zs[1] * g[1];
            prop_assert!(dot.abs() <= 1e-9 * (1.0 + zs[0].abs() + zs[1].abs()), "{dot}");
        }
        prop_assert!(class.kind != RegionKind::Tangency || class.lie_plus * class.lie_minus <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_axioms(seed in any::<u64>(), which in 0usize..5) {
        let systems = common::systems();
        let (named, sys) = &systems[which];
        let mut rng = common::rng(seed);
        let a = common::random_orbit(named, sys, &mut rng, 6.0);
        let b = common::random_orbit(named, sys, &mut rng, 6.0);
        let c = common::random_orbit(named, sys, &mut rng, 6.0);
        let z = sys.z_bound();
        let o = MetricOptions::default();
        let d = |u: &filippov::Orbit, v: &filippov::Orbit| distance_integral(u, v, z, &o);
        let (ab, ba) = (d(&a, &b), d(&b, &a));
        prop_assert_eq!(ab.value, ba.value);
        prop_assert!(d(&a, &a).value <= 1e-9);
        let (bc, ac) = (d(&b, &c), d(&a, &c));
        let slack = 2.0 * (ab.tail_bound + ab.quad_error_bound + bc.tail_bound + bc.quad_error_bound
            + ac.tail_bound + ac.quad_error_bound);
        prop_assert!(ac.value <= ab.value + bc.value + slack);
        prop_assert!(ab.value <= distance_sup(&a, &b, z, &o).upper() + ab.quad_error_bound);
    }

    #[test]
    fn shift_group_law(seed in any::<u64>(), s in -3.0f64..3.0, t in -3.0f64..3.0, u in -8.0f64..8.0) {
        let systems = common::systems();
        let (named, sys) = &systems[3];
        let mut rng = common::rng(seed);
        let g = common::random_orbit(named, sys, &mut rng, 5.0);
        let lhs = g.shift(s).shift(t).eval(u);
        let rhs = g.shift(s + t).eval(u);
        prop_assert!(filippov::system::distance(lhs, rhs) < 1e-9);
        prop_assert!(filippov::system::distance(g.shift(s).eval(u), g.eval(s + u)) < 1e-9);
    }
}
