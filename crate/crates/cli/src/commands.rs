use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};
use filippov::builtin::{builtin, NamedSystem};
use filippov::integrate::{integrate_orbit, BranchPolicy, Direction};
use filippov::metric::{constants_points_to_orbits, distance, DistanceKind, MetricOptions};
use filippov::transitivity::{
    base_transitivity_witness, build_tangency_graph, certify, glue, CertificateStatus, TangencyGraph, MATCH_TOL,
};
use filippov::{Domain, NsvfSystem, Orbit, Point, RegionKind, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::svg::{region_color, Canvas};
use crate::{parse, Cli, Command, Kind};

/// Named outputs of one command; the extension selects `--format`.
struct Artifacts {
    stem: &'static str,
    files: Vec<(&'static str, String)>,
    code: u8,
}

impl Artifacts {
    fn new(stem: &'static str) -> Self {
        Artifacts { stem, files: Vec::new(), code: 0 }
    }

    fn json<T: Serialize>(mut self, value: &T) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.files.push(("json", text));
        self
    }

    fn with(mut self, ext: &'static str, text: String) -> Self {
        self.files.push((ext, text));
        self
    }
}

struct Ctx {
    sys: NsvfSystem,
    named: Option<NamedSystem>,
    rng: ChaCha8Rng,
}

impl Ctx {
    fn seed_domain(&self) -> Result<Domain> {
        match &self.named {
            Some(n) => Ok(n.seed_domain()?),
            None => Ok(*self.sys.domain()),
        }
    }

    fn random_point(&mut self) -> Result<Point> {
        let b = self.seed_domain()?;
        let mut p = [0.0; 3];
        for i in 0..self.sys.dim() {
            p[i] = self.rng.gen_range(b.min[i]..b.max[i]);
        }
        Ok(p)
    }

    fn orbit(&self, spec: &str, horizon: f64) -> Result<Orbit> {
        let (p, choices) = parse::orbit(spec, self.sys.dim())?;
        Ok(integrate_orbit(&self.sys, p, &choices, horizon)?)
    }

    fn canvas(&self) -> Canvas {
        Canvas::new(self.sys.domain())
    }
}

fn load(cli: &Cli) -> Result<Ctx> {
    let (sys, named) = match (&cli.config, &cli.builtin) {
        (Some(path), _) => (SystemConfig::load(path)?.build()?, None),
        (None, Some(name)) => {
            let named = builtin(name)?;
            (named.system()?, Some(named))
        }
        (None, None) => bail!("one of --config PATH or --builtin NAME is required"),
    };
    Ok(Ctx { sys, named, rng: ChaCha8Rng::seed_from_u64(cli.seed) })
}

pub fn run(cli: &Cli) -> Result<u8> {
    let mut ctx = load(cli)?;
    let out = match &cli.command {
        Command::Classify { grid } => classify(&ctx, *grid)?,
        Command::Simulate { orbit, step } => simulate(&ctx, orbit, cli.horizon, *step)?,
        Command::Branches { point, depth, dep_step, backward } => {
            branches(&ctx, point, cli.horizon, *depth, *dep_step, *backward)?
        }
        Command::Distance { a, b, kind, rel_tol } => distance_cmd(&ctx, a, b, cli.horizon, *kind, *rel_tol)?,
        Command::SigmaSeq { orbit, tau } => {
            let o = ctx.orbit(orbit, cli.horizon.max(*tau))?;
            Artifacts::new("sigma_seq").json(&o.sigma_sequence(*tau)?)
        }
        Command::Transitivity { seeds, depth, dep_step, glue } => {
            transitivity(&mut ctx, cli, *seeds, *depth, *dep_step, *glue)?
        }
        Command::Glue { a, b, depth } => glue_cmd(&ctx, cli, a, b, *depth)?,
        Command::Witness { count, targets, depth } => witness(&mut ctx, cli, *count, *targets, *depth)?,
    };
    emit(cli, out)
}

fn emit(cli: &Cli, out: Artifacts) -> Result<u8> {
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (ext, text) in &out.files {
            let path = dir.join(format!("{}.{ext}", out.stem));
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        return Ok(out.code);
    }
    let want = cli.format.extension();
    let Some((_, text)) = out.files.iter().find(|(ext, _)| *ext == want) else {
        let have: Vec<_> = out.files.iter().map(|(e, _)| *e).collect();
        bail!("this command does not produce {want} output (available: {})", have.join(", "));
    };
    print!("{text}");
    Ok(out.code)
}

fn sigma_samples(sys: &NsvfSystem, n: usize) -> Result<Vec<Point>> {
    let n = n.max(1);
    let mut pts = Vec::new();
    if sys.dim() == 2 {
        let segments = sys.sigma_segments()?;
        let every = segments.len().div_ceil(n).max(1);
        for seg in segments.iter().step_by(every) {
            pts.push(sys.project_to_sigma(seg.midpoint())?);
        }
    } else {
        let d = sys.domain();
        let side = (n as f64).sqrt().ceil() as usize;
        for j in 0..side {
            for i in 0..side {
                let u = (i as f64 + 0.5) / side as f64;
                let v = (j as f64 + 0.5) / side as f64;
                let mut p = d.center();
                p[0] = d.min[0] + u * (d.max[0] - d.min[0]);
                p[1] = d.min[1] + v * (d.max[1] - d.min[1]);
                if let Ok(q) = sys.project_to_sigma(p) {
                    if sys.contains(q) {
                        pts.push(q);
                    }
                }
            }
        }
    }
    Ok(pts)
}

fn kind_name(k: RegionKind) -> String {
    serde_json::to_value(k).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn classify(ctx: &Ctx, grid: usize) -> Result<Artifacts> {
    let sys = &ctx.sys;
    let samples = sigma_samples(sys, grid)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut canvas = ctx.canvas();
    for p in &samples {
        let k = sys.classify_point(*p)?.kind;
        *counts.entry(kind_name(k)).or_default() += 1;
        canvas.dot(*p, region_color(k), 2.0);
    }
    let fractions: BTreeMap<&String, f64> =
        counts.iter().map(|(k, v)| (k, *v as f64 / samples.len().max(1) as f64)).collect();
    let tangencies = sys.find_tangencies()?;
    for t in &tangencies {
        canvas.dot(*t, region_color(RegionKind::Tangency), 5.0);
    }
    let singularities = match sys.classify_sigma_singularities() {
        Ok(s) => json!(s),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let report = json!({
        "dimension": sys.dim(),
        "samples": samples.len(),
        "counts": counts,
        "fractions": fractions,
        "tangencies": tangencies,
        "singularities": singularities,
    });
    Ok(Artifacts::new("classify").json(&report).with("svg", canvas.finish()))
}

fn orbit_summary(o: &Orbit) -> serde_json::Value {
    let finite = |x: f64| if x.is_finite() { json!(x) } else { json!(null) };
    json!({
        "start": o.eval(0.0),
        "window": [o.t_min(), o.t_max()],
        "omega_minus": finite(o.omega_minus()),
        "omega_plus": finite(o.omega_plus()),
        "start_termination": o.start_termination(),
        "end_termination": o.end_termination(),
        "arcs": o.arc_spans().iter().map(|(r, a, b)| json!({"regime": r, "t_start": a, "t_end": b})).collect::<Vec<_>>(),
        "events": o.events(),
        "forward_choices": o.forward_choices(),
        "backward_choices": o.backward_choices(),
    })
}

fn simulate(ctx: &Ctx, spec: &str, horizon: f64, step: f64) -> Result<Artifacts> {
    if !(step > 0.0) {
        return Err(filippov::Error::InvalidArgument("step must be positive".into()).into());
    }
    let o = ctx.orbit(spec, horizon)?;
    let mut canvas = ctx.canvas();
    canvas.orbit(&o, step);
    Ok(Artifacts::new("orbit").json(&orbit_summary(&o)).with("csv", o.to_csv(step)).with("svg", canvas.finish()))
}

fn branches(ctx: &Ctx, spec: &str, horizon: f64, depth: usize, dep_step: f64, backward: bool) -> Result<Artifacts> {
    let p = parse::point(spec, ctx.sys.dim())?;
    let policy = BranchPolicy { dep_step, max_depth: depth, horizon, ..BranchPolicy::default() };
    let dir = if backward { Direction::Backward } else { Direction::Forward };
    let tree = filippov::enumerate_branches(&ctx.sys, p, &policy, dir)?;
    let mut canvas = ctx.canvas();
    let mut leaves = Vec::new();
    for leaf in &tree.leaves {
        canvas.orbit(&leaf.orbit, 0.02);
        leaves.push(json!({
            "choices": leaf.choices,
            "sigma_sequence": leaf.orbit.sigma_sequence(horizon)?,
            "end_termination": leaf.orbit.end_termination(),
        }));
    }
    let report = json!({ "nodes": tree.nodes, "truncated": tree.truncated, "leaves": leaves });
    Ok(Artifacts::new("branches").json(&report).with("svg", canvas.finish()))
}

fn distance_cmd(ctx: &Ctx, a: &str, b: &str, horizon: f64, kind: Kind, rel_tol: f64) -> Result<Artifacts> {
    let (oa, ob) = (ctx.orbit(a, horizon)?, ctx.orbit(b, horizon)?);
    let kind = match kind {
        Kind::Integral => DistanceKind::Integral,
        Kind::Sup => DistanceKind::Supremum,
    };
    let report = distance(&oa, &ob, kind, ctx.sys.z_bound(), &MetricOptions::with_rel_tol(rel_tol));
    Ok(Artifacts::new("distance").json(&report))
}

fn graph(ctx: &Ctx, horizon: f64, depth: usize, dep_step: f64) -> Result<TangencyGraph> {
    let nodes = ctx.sys.find_tangencies()?;
    let policy = BranchPolicy { dep_step, max_depth: depth, horizon, ..BranchPolicy::default() };
    Ok(build_tangency_graph(&ctx.sys, &nodes, &policy, MATCH_TOL)?)
}

/// Horizon long enough for a return to the tangency set after `tau`.
fn glue_horizon(cli: &Cli, z: f64) -> Result<f64> {
    let c = constants_points_to_orbits(cli.eps, z)?;
    Ok(cli.horizon.max(c.tau + cli.horizon))
}

fn transitivity(ctx: &mut Ctx, cli: &Cli, seeds: usize, depth: usize, dep_step: f64, with_glue: bool) -> Result<Artifacts> {
    let nodes = ctx.sys.find_tangencies()?;
    let seed_points: Vec<Point> = (0..seeds).map(|_| ctx.random_point()).collect::<Result<_>>()?;
    let policy = BranchPolicy { dep_step, max_depth: depth, horizon: cli.horizon, ..BranchPolicy::default() };
    let cert = certify(&ctx.sys, &nodes, &seed_points, &policy, MATCH_TOL)?;
    let code = if cert.status == CertificateStatus::CounterexampleCandidate { 4 } else { 0 };
    let glued = if with_glue && cert.status == CertificateStatus::CertifiedAtDeskScale {
        let g = build_tangency_graph(&ctx.sys, &nodes, &policy, MATCH_TOL)?;
        let h = glue_horizon(cli, ctx.sys.z_bound())?;
        let (pa, pb) = (ctx.random_point()?, ctx.random_point()?);
        let a = integrate_orbit(&ctx.sys, pa, &[], h)?;
        let b = integrate_orbit(&ctx.sys, pb, &[], h)?;
        match glue(&ctx.sys, &a, &b, cli.eps, &g, &MetricOptions::default()) {
            Ok(r) => json!(r),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        json!(null)
    };
    let mut out = Artifacts::new("transitivity").json(&json!({ "seeds": seed_points, "certificate": cert, "glue": glued }));
    out.code = code;
    Ok(out)
}

fn glue_cmd(ctx: &Ctx, cli: &Cli, a: &str, b: &str, depth: usize) -> Result<Artifacts> {
    let h = glue_horizon(cli, ctx.sys.z_bound())?;
    let g = graph(ctx, cli.horizon, depth, 0.25)?;
    let (oa, ob) = (ctx.orbit(a, h)?, ctx.orbit(b, h)?);
    let r = glue(&ctx.sys, &oa, &ob, cli.eps, &g, &MetricOptions::default())?;
    let mut canvas = ctx.canvas();
    canvas.orbit(&r.orbit, 0.02);
    Ok(Artifacts::new("glue").json(&r).with("csv", r.orbit.to_csv(0.01)).with("svg", canvas.finish()))
}

fn witness(ctx: &mut Ctx, cli: &Cli, count: usize, targets: usize, depth: usize) -> Result<Artifacts> {
    if count == 0 {
        return Err(filippov::Error::InvalidArgument("count must be positive".into()).into());
    }
    let z = ctx.sys.z_bound();
    let c = constants_points_to_orbits(cli.eps, z)?;
    let h = glue_horizon(cli, z)?;
    let g = graph(ctx, cli.horizon, depth, 0.25)?;
    let p0 = ctx.random_point()?;
    let mut gamma = integrate_orbit(&ctx.sys, p0, &[], h)?;
    let mut glued = 1;
    for _ in 1..count {
        let p = ctx.random_point()?;
        let next = integrate_orbit(&ctx.sys, p, &[], h)?;
        gamma = glue(&ctx.sys, &gamma, &next, cli.eps, &g, &MetricOptions::default())?.orbit;
        glued += 1;
    }
    let b = ctx.seed_domain()?;
    let n = targets.max(1);
    let grid: Vec<Point> = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let mut p = [0.0; 3];
            p[0] = b.min[0] + (i as f64 + 0.5) / n as f64 * (b.max[0] - b.min[0]);
            p[1] = b.min[1] + (j as f64 + 0.5) / n as f64 * (b.max[1] - b.min[1]);
            p
        })
        .collect();
    let found = base_transitivity_witness(&gamma, &grid, c.delta, 1e-3);
    let covered = found.iter().filter(|w| w.time.is_some()).count();
    let mut canvas = ctx.canvas();
    canvas.orbit(&gamma, 0.02);
    for w in &found {
        canvas.dot(w.target, if w.time.is_some() { "#1e8449" } else { "#c0392b" }, 4.0);
    }
    let report = json!({
        "epsilon": cli.eps,
        "delta": c.delta,
        "glued": glued,
        "window": [gamma.t_min(), gamma.t_max()],
        "covered": covered,
        "targets": found,
    });
    Ok(Artifacts::new("witness").json(&report).with("csv", gamma.to_csv(0.01)).with("svg", canvas.finish()))
}
