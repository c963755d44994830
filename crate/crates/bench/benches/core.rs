use criterion::{black_box, criterion_group, criterion_main, Criterion};
use filippov::integrate::{enumerate_branches, integrate_orbit, BranchPolicy, Direction};
use filippov::metric::{distance_integral, distance_sup, MetricOptions};
use filippov::transitivity::{build_tangency_graph, MATCH_TOL};
use filippov::{builtin, ExprTree};

fn expressions(c: &mut Criterion) {
    let e = ExprTree::parse("sin(x) * (y^3 - x) + tanh(x*y) - 0.5*cos(y)").unwrap();
    let prog = e.compile();
    c.bench_function("expr/tree_eval", |b| b.iter(|| e.evaluate(black_box(&[0.3, -0.7])).unwrap()));
    c.bench_function("expr/compiled_eval", |b| b.iter(|| prog.eval(black_box(&[0.3, -0.7])).unwrap()));
    c.bench_function("expr/differentiate", |b| b.iter(|| black_box(&e).differentiate(0)));
}

fn integration(c: &mut Criterion) {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    c.bench_function("integrate/bean_orbit_h20", |b| {
        b.iter(|| integrate_orbit(&sys, black_box([1.2, 1.0, 0.0]), &[], 20.0).unwrap())
    });
    let esc = builtin("escape-fold").unwrap().system().unwrap();
    let policy = BranchPolicy { max_depth: 1, horizon: 6.0, ..BranchPolicy::default() };
    c.bench_function("integrate/escape_fold_branches", |b| {
        b.iter(|| enumerate_branches(&esc, [0.5, 0.0, 0.0], &policy, Direction::Forward).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    let a = integrate_orbit(&sys, [1.2, 1.0, 0.0], &[], 10.0).unwrap();
    let o = integrate_orbit(&sys, [1.1, 0.8, 0.0], &[], 10.0).unwrap();
    let opts = MetricOptions::default();
    let z = sys.z_bound();
    c.bench_function("metric/integral", |b| b.iter(|| distance_integral(&a, &o, z, &opts)));
    c.bench_function("metric/sup", |b| b.iter(|| distance_sup(&a, &o, z, &opts)));
}

fn transitivity(c: &mut Criterion) {
    let sys = builtin("bean-analogue").unwrap().system().unwrap();
    let nodes = sys.find_tangencies().unwrap();
    let policy = BranchPolicy { max_depth: 3, ..BranchPolicy::default() };
    let mut group = c.benchmark_group("transitivity");
    group.sample_size(10);
    group.bench_function("bean_tangency_graph", |b| {
        b.iter(|| build_tangency_graph(&sys, &nodes, &policy, MATCH_TOL).unwrap())
    });
    group.finish();
}

criterion_group!(benches, expressions, integration, metrics, transitivity);
criterion_main!(benches);
