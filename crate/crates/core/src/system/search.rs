//! Grid scans over the switching manifold: validation, tracing, tangencies and
//! Σ-singularities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    distance, norm, sliding_combination, vadd, vdot, vscale, vsub, Field, NsvfSystem, Point,
    SigmaSingularity, SingularityKind,
};
use crate::error::{Error, Result};

/// Coarse cells per axis; active coarse cells are refined to the fine grid.
const COARSE: usize = 64;
/// Segments with a vanishing function at both ends before a continuum is reported.
const CONTINUUM_SEGMENTS: usize = 3;

/// A chord of the switching manifold between two points on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSegment {
    pub a: Point,
    pub b: Point,
}

impl SigmaSegment {
    pub fn midpoint(&self) -> Point {
        vscale(vadd(self.a, self.b), 0.5)
    }

    pub fn length(&self) -> f64 {
        distance(self.a, self.b)
    }
}

fn positive(v: f64) -> bool {
    v >= 0.0
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    vadd(a, vscale(vsub(b, a), s))
}

fn grid_point(sys: &NsvfSystem, idx: &[usize], n: usize) -> Point {
    let d = sys.domain();
    let mut p = [0.0; 3];
    for (i, &k) in idx.iter().enumerate() {
        p[i] = d.min[i] + (d.max[i] - d.min[i]) * k as f64 / n as f64;
    }
    p
}

/// Root of `h` on the segment `[p0, p1]` with `h(p0) < 0 <= h(p1)`.
fn edge_root(sys: &NsvfSystem, mut p0: Point, mut p1: Point) -> Result<Point> {
    let tol = sys.tolerances().root_tol * 0.1;
    for _ in 0..200 {
        if distance(p0, p1) <= tol {
            break;
        }
        let m = lerp(p0, p1, 0.5);
        if positive(sys.h(m)?) {
            p1 = m;
        } else {
            p0 = m;
        }
    }
    Ok(p1)
}

fn check_regular(sys: &NsvfSystem, p: Point) -> Result<()> {
    let g = norm(sys.grad_h(p)?);
    if g <= sys.tolerances().grad_tol {
        return Err(Error::SingularSwitching { grad_norm: g, at: p });
    }
    Ok(())
}

fn node_indices(dim: usize, n: usize) -> Vec<[usize; 3]> {
    let m = n + 1;
    let total = m.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut idx = [0; 3];
            for slot in idx.iter_mut().take(dim) {
                *slot = k % m;
                k /= m;
            }
            idx
        })
        .collect()
}

/// Checks `z_bound` and the regular-value hypothesis on the verification grid.
pub(super) fn verify_grid(sys: &NsvfSystem) -> Result<()> {
    let dim = sys.dim();
    let n = sys.tolerances().z_bound_grid.max(1);
    let nodes = node_indices(dim, n);
    let surface_tol = sys.tolerances().surface_tol;
    nodes
        .par_iter()
        .map(|idx| -> Result<()> {
            let p = grid_point(sys, &idx[..dim], n);
            for field in [Field::Plus, Field::Minus] {
                let observed = norm(sys.field(field, p)?);
                if observed > sys.z_bound() {
                    return Err(Error::ZBoundViolated { bound: sys.z_bound(), observed, at: p });
                }
            }
            let hp = sys.h(p)?;
            if hp.abs() <= surface_tol {
                check_regular(sys, p)?;
            }
            for axis in 0..dim {
                if idx[axis] == n {
                    continue;
                }
                let mut next = *idx;
                next[axis] += 1;
                let q = grid_point(sys, &next[..dim], n);
                let hq = sys.h(q)?;
                if positive(hp) != positive(hq) {
                    let root = if positive(hq) { edge_root(sys, p, q)? } else { edge_root(sys, q, p)? };
                    check_regular(sys, root)?;
                }
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()
        .map(|_| ())
}

fn require_planar(sys: &NsvfSystem) -> Result<()> {
    if sys.dim() != 2 {
        return Err(Error::Unsupported("Σ tracing is implemented for planar systems".into()));
    }
    Ok(())
}

/// Marching-squares trace of `h = 0` on the fine grid. Coarse cells are refined
/// when they show a sign change or a node close to the manifold.
pub(super) fn sigma_segments(sys: &NsvfSystem) -> Result<Vec<SigmaSegment>> {
    require_planar(sys)?;
    let fine = sys.tolerances().tangency_grid.max(COARSE);
    let sub = fine.div_ceil(COARSE);
    let fine = sub * COARSE;
    let d = sys.domain();
    let cell = [(d.max[0] - d.min[0]) / COARSE as f64, (d.max[1] - d.min[1]) / COARSE as f64];
    let cells: Vec<(usize, usize)> =
        (0..COARSE).flat_map(|j| (0..COARSE).map(move |i| (i, j))).collect();
    let per_cell: Vec<Vec<SigmaSegment>> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<SigmaSegment>> {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
                .map(|(a, b)| grid_point(sys, &[a, b], COARSE));
            let mut values = [0.0; 4];
            for (v, c) in values.iter_mut().zip(corners) {
                *v = sys.h(c)?;
            }
            let mixed = values.iter().any(|&v| positive(v)) && values.iter().any(|&v| !positive(v));
            let center = lerp(corners[0], corners[2], 0.5);
            let reach = 1.5 * norm(sys.grad_h(center)?) * (cell[0].hypot(cell[1]));
            let near = values.iter().any(|v| v.abs() <= reach);
            if !mixed && !near {
                return Ok(Vec::new());
            }
            march_block(sys, i * sub, j * sub, sub, fine)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

fn march_block(
    sys: &NsvfSystem,
    i0: usize,
    j0: usize,
    sub: usize,
    fine: usize,
) -> Result<Vec<SigmaSegment>> {
    let mut values = vec![0.0; (sub + 1) * (sub + 1)];
    let mut points = vec![[0.0; 3]; (sub + 1) * (sub + 1)];
    for b in 0..=sub {
        for a in 0..=sub {
            let p = grid_point(sys, &[i0 + a, j0 + b], fine);
            points[b * (sub + 1) + a] = p;
            values[b * (sub + 1) + a] = sys.h(p)?;
        }
    }
    let at = |a: usize, b: usize| b * (sub + 1) + a;
    let mut out = Vec::new();
    for b in 0..sub {
        for a in 0..sub {
            let ring = [at(a, b), at(a + 1, b), at(a + 1, b + 1), at(a, b + 1)];
            let mut crossings: Vec<Point> = Vec::with_capacity(4);
            for e in 0..4 {
                let (u, v) = (ring[e], ring[(e + 1) % 4]);
                let (hu, hv) = (values[u], values[v]);
                if positive(hu) != positive(hv) {
                    let root = if positive(hv) {
                        edge_root(sys, points[u], points[v])?
                    } else {
                        edge_root(sys, points[v], points[u])?
                    };
                    crossings.push(root);
                }
            }
            for pair in crossings.chunks_exact(2) {
                if distance(pair[0], pair[1]) > 0.0 {
                    out.push(SigmaSegment { a: pair[0], b: pair[1] });
                }
            }
        }
    }
    Ok(out)
}

/// Point at parameter `s` of a segment, projected onto the manifold.
fn on_segment(sys: &NsvfSystem, seg: &SigmaSegment, s: f64) -> Result<Point> {
    sys.project_to_sigma(lerp(seg.a, seg.b, s))
}

/// Roots of a function restricted to the traced manifold: strict sign changes along
/// each segment are bisected, and endpoints where it is within `zero_tol` count too.
fn roots_on_segments<F>(
    sys: &NsvfSystem,
    segments: &[SigmaSegment],
    zero_tol: f64,
    f: F,
    what: &str,
) -> Result<Vec<Point>>
where
    F: Fn(Point) -> Result<f64> + Sync,
{
    let root_tol = sys.tolerances().root_tol;
    let found: Vec<(Vec<Point>, bool)> = segments
        .par_iter()
        .map(|seg| -> Result<(Vec<Point>, bool)> {
            let fa = f(seg.a)?;
            let fb = f(seg.b)?;
            let mut pts = Vec::new();
            let za = fa.abs() <= zero_tol;
            let zb = fb.abs() <= zero_tol;
            if za {
                pts.push(seg.a);
            }
            if zb {
                pts.push(seg.b);
            }
            if !za && !zb && (fa > 0.0) != (fb > 0.0) {
                let (mut lo, mut hi) = (0.0, 1.0);
                let len = seg.length().max(f64::MIN_POSITIVE);
                let mut flo = fa;
                while (hi - lo) * len > root_tol {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(on_segment(sys, seg, mid)?)?;
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (fm > 0.0) == (flo > 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                pts.push(on_segment(sys, seg, 0.5 * (lo + hi))?);
            }
            Ok((pts, za && zb))
        })
        .collect::<Result<_>>()?;
    let flat = found.iter().filter(|(_, both)| *both).count();
    if flat >= CONTINUUM_SEGMENTS {
        return Err(Error::TangencyContinuum(format!("{what} vanishes along {flat} traced segments")));
    }
    Ok(found.into_iter().flat_map(|(p, _)| p).collect())
}

/// Sorts lexicographically and merges points closer than `merge_tol`.
pub(crate) fn dedupe(mut pts: Vec<Point>, merge_tol: f64) -> Vec<Point> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<Point> = Vec::new();
    for p in pts {
        if out.iter().all(|q| distance(*q, p) > merge_tol) {
            out.push(p);
        }
    }
    out
}

pub(super) fn find_tangencies(sys: &NsvfSystem) -> Result<Vec<Point>> {
    let tol = sys.tolerances();
    let mut pts = if sys.dim() == 2 {
        let segments = sigma_segments(sys)?;
        let mut pts = Vec::new();
        for (field, name) in [(Field::Plus, "Z+h"), (Field::Minus, "Z-h")] {
            pts.extend(roots_on_segments(
                sys,
                &segments,
                tol.tol,
                |p| sys.lie_derivative(field, p),
                name,
            )?);
        }
        pts
    } else {
        graph_tangencies(sys)?
    };
    pts.retain(|p| sys.contains(*p));
    Ok(dedupe(pts, tol.merge_tol))
}

pub(super) fn sigma_singularities(sys: &NsvfSystem) -> Result<Vec<SigmaSingularity>> {
    let tol = sys.tolerances();
    let mut out = Vec::new();
    for p in sys.find_tangencies()? {
        let zp = norm(sys.field(Field::Plus, p)?);
        let zm = norm(sys.field(Field::Minus, p)?);
        if zp <= tol.lie_zero_tol {
            out.push(SigmaSingularity { kind: SingularityKind::EquilibriumPlus, location: p });
        }
        if zm <= tol.lie_zero_tol {
            out.push(SigmaSingularity { kind: SingularityKind::EquilibriumMinus, location: p });
        }
        if zp > tol.lie_zero_tol && zm > tol.lie_zero_tol {
            out.push(SigmaSingularity { kind: SingularityKind::TangencyRegularFields, location: p });
        }
    }
    let pseudo = if sys.dim() == 2 { planar_pseudo_equilibria(sys)? } else { graph_pseudo_equilibria(sys)? };
    for p in pseudo {
        out.push(SigmaSingularity { kind: SingularityKind::PseudoEquilibrium, location: p });
    }
    Ok(out)
}

fn sliding_at(sys: &NsvfSystem, p: Point) -> Result<Option<Point>> {
    let class = sys.classify_unchecked(p)?;
    if !class.kind.is_sliding() {
        return Ok(None);
    }
    Ok(Some(sliding_combination(
        class.lie_plus,
        class.lie_minus,
        sys.field(Field::Plus, p)?,
        sys.field(Field::Minus, p)?,
    )))
}

fn planar_pseudo_equilibria(sys: &NsvfSystem) -> Result<Vec<Point>> {
    let tol = sys.tolerances();
    let segments: Vec<SigmaSegment> = sys
        .sigma_segments()?
        .into_iter()
        .filter(|s| {
            [s.a, s.b].iter().all(|&p| {
                matches!(sys.classify_unchecked(p), Ok(c) if c.kind.is_sliding())
            })
        })
        .collect();
    let tangential = |p: Point| -> Result<f64> {
        let g = sys.grad_h(p)?;
        let t = [-g[1], g[0], 0.0];
        let zs = sliding_at(sys, p)?.unwrap_or([0.0; 3]);
        Ok(vdot(zs, t) / norm(t))
    };
    let found = roots_on_segments(sys, &segments, tol.tol, tangential, "Z_s")
        .map_err(|_| Error::PseudoEquilibriumContinuum)?;
    Ok(dedupe(found, tol.merge_tol).into_iter().filter(|p| sys.contains(*p)).collect())
}

/// Graph data of `h = z - g(x, y)`: returns `g` evaluated through `h(x, y, 0) = -g`.
fn require_graph(sys: &NsvfSystem) -> Result<()> {
    let dz = sys.switching().differentiate(2);
    if dz.as_constant() != Some(1.0) {
        return Err(Error::Unsupported(
            "three-dimensional switching manifolds must have the form h = z - g(x, y)".into(),
        ));
    }
    Ok(())
}

fn graph_point(sys: &NsvfSystem, x: f64, y: f64) -> Result<Point> {
    let g = -sys.h([x, y, 0.0])?;
    Ok([x, y, g])
}

/// Nodes of the `(x, y)` grid whose lift lies inside the domain.
fn graph_nodes(sys: &NsvfSystem) -> Result<(usize, Vec<Option<Point>>)> {
    let n = sys.tolerances().tangency_grid.clamp(8, 512);
    let d = *sys.domain();
    let nodes: Vec<Option<Point>> = (0..(n + 1) * (n + 1))
        .into_par_iter()
        .map(|k| -> Result<Option<Point>> {
            let (i, j) = (k % (n + 1), k / (n + 1));
            let x = d.min[0] + (d.max[0] - d.min[0]) * i as f64 / n as f64;
            let y = d.min[1] + (d.max[1] - d.min[1]) * j as f64 / n as f64;
            let p = graph_point(sys, x, y)?;
            Ok(sys.contains(p).then_some(p))
        })
        .collect::<Result<_>>()?;
    Ok((n, nodes))
}

/// Local minima of a nonnegative function over the graph grid, refined by
/// compass search and kept when the refined value is within `accept`.
fn graph_minima<F>(sys: &NsvfSystem, accept: f64, f: F) -> Result<Vec<Point>>
where
    F: Fn(Point) -> Result<Option<f64>> + Sync,
{
    let (n, nodes) = graph_nodes(sys)?;
    let values: Vec<Option<f64>> = nodes
        .par_iter()
        .map(|p| match p {
            Some(p) => f(*p),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    let d = *sys.domain();
    let step0 = ((d.max[0] - d.min[0]) / n as f64).max((d.max[1] - d.min[1]) / n as f64);
    let mut out = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let Some(v) = values[j * (n + 1) + i] else { continue };
            let mut is_min = true;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii < 0 || jj < 0 || ii > n as i64 || jj > n as i64 {
                    continue;
                }
                if let Some(w) = values[jj as usize * (n + 1) + ii as usize] {
                    if w < v || (w == v && (dj, di) < (0, 0)) {
                        is_min = false;
                    }
                }
            }
            if !is_min || v > 10.0 * step0 * sys.z_bound().max(1.0) {
                continue;
            }
            let start = nodes[j * (n + 1) + i].expect("value implies node");
            if let Some(p) = compass(sys, start, v, step0, &f)? {
                if f(p)?.is_some_and(|fv| fv <= accept) {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}

fn compass<F>(sys: &NsvfSystem, start: Point, v0: f64, step0: f64, f: &F) -> Result<Option<Point>>
where
    F: Fn(Point) -> Result<Option<f64>>,
{
    let (mut x, mut y, mut v) = (start[0], start[1], v0);
    let mut step = step0;
    let floor = sys.tolerances().root_tol * 0.1;
    while step > floor {
        let mut improved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let p = graph_point(sys, x + dx * step, y + dy * step)?;
            if !sys.contains(p) {
                continue;
            }
            if let Some(w) = f(p)? {
                if w < v {
                    x = p[0];
                    y = p[1];
                    v = w;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(Some(graph_point(sys, x, y)?))
}

/// Tangencies on a graph surface. A sign change of a Lie derivative across the
/// grid means its zero set is a curve, which is reported as a continuum.
fn graph_tangencies(sys: &NsvfSystem) -> Result<Vec<Point>> {
    require_graph(sys)?;
    let tol = sys.tolerances();
    let (n, nodes) = graph_nodes(sys)?;
    let mut pts = Vec::new();
    for (field, name) in [(Field::Plus, "Z+h"), (Field::Minus, "Z-h")] {
        let values: Vec<Option<f64>> = nodes
            .par_iter()
            .map(|p| match p {
                Some(p) => sys.lie_derivative(field, *p).map(Some),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        let at = |i: usize, j: usize| if i <= n && j <= n { values[j * (n + 1) + i] } else { None };
        let opposite = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a > tol.tol && b < -tol.tol) || (a < -tol.tol && b > tol.tol),
            _ => false,
        };
        for j in 0..=n {
            for i in 0..=n {
                // Offsets of two catch a zero set passing exactly through a node.
                let hit = [(1, 0), (2, 0), (0, 1), (0, 2)]
                    .iter()
                    .any(|&(di, dj)| opposite(at(i, j), at(i + di, j + dj)));
                if hit {
                    return Err(Error::TangencyContinuum(format!(
                        "{name} changes sign on the surface, so its zero set is a curve"
                    )));
                }
            }
        }
        pts.extend(graph_minima(sys, tol.tol, |p| Ok(Some(sys.lie_derivative(field, p)?.abs())))?);
    }
    Ok(pts)
}

fn graph_pseudo_equilibria(sys: &NsvfSystem) -> Result<Vec<Point>> {
    require_graph(sys)?;
    let tol = sys.tolerances();
    let found = graph_minima(sys, tol.tol, |p| Ok(sliding_at(sys, p)?.map(norm)))?;
    if found.len() > 1000 {
        return Err(Error::PseudoEquilibriumContinuum);
    }
    Ok(dedupe(found, tol.merge_tol))
}

#[cfg(test)]
mod tests {
    use super::super::{Domain, Tolerances};
    use super::*;

    fn planar(h: &str, zp: [&str; 2], zm: [&str; 2], bound: f64) -> NsvfSystem {
        NsvfSystem::from_strings(
            h,
            &zp,
            &zm,
            Domain::new(&[-2.0, -2.0], &[2.0, 2.0]).unwrap(),
            bound,
            Tolerances::default(),
        )
        .unwrap()
    }

    fn close(a: Point, b: Point) -> bool {
        distance(a, b) < 1e-9
    }

    #[test]
    fn single_fold() {
        let s = planar("y", ["1", "-x"], ["0", "1"], 3.0);
        let t = s.find_tangencies().unwrap();
        assert_eq!(t.len(), 1);
        assert!(close(t[0], [0.0, 0.0, 0.0]));
    }

    #[test]
    fn no_tangencies() {
        let s = planar("y", ["1", "1"], ["1", "-1"], 2.0);
        assert!(s.find_tangencies().unwrap().is_empty());
    }

    #[test]
    fn two_folds() {
        let s = planar("y", ["1", "1-x^2"], ["0", "1"], 4.0);
        let t = s.find_tangencies().unwrap();
        assert_eq!(t.len(), 2);
        assert!(close(t[0], [-1.0, 0.0, 0.0]));
        assert!(close(t[1], [1.0, 0.0, 0.0]));
    }

    #[test]
    fn curved_manifold() {
        // Unit circle with a vertical field: folds at (-1, 0) and (1, 0).
        let s = planar("x^2 + y^2 - 1", ["0", "1"], ["0", "1"], 2.0);
        let t = s.find_tangencies().unwrap();
        assert_eq!(t.len(), 2);
        assert!((t[0][0] + 1.0).abs() < 1e-8 && t[0][1].abs() < 1e-4);
        assert!((t[1][0] - 1.0).abs() < 1e-8 && t[1][1].abs() < 1e-4);
        for p in t {
            assert!(s.h(p).unwrap().abs() <= 1e-9);
            assert!(s.lie_derivative(Field::Plus, p).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn continuum_is_reported() {
        let s = planar("y", ["1", "0"], ["0", "1"], 2.0);
        assert!(matches!(s.find_tangencies(), Err(Error::TangencyContinuum(_))));
    }

    #[test]
    fn singularities() {
        let s = planar("y", ["1", "-1"], ["1", "1"], 2.0);
        assert!(s.classify_sigma_singularities().unwrap().is_empty());
        let p = planar("y", ["-x", "-1"], ["-x", "1"], 3.0);
        let found = p.classify_sigma_singularities().unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, SingularityKind::PseudoEquilibrium);
        assert!(close(found[0].location, [0.0, 0.0, 0.0]));
        let f = planar("y", ["1", "-x"], ["0", "1"], 3.0);
        let found = f.classify_sigma_singularities().unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, SingularityKind::TangencyRegularFields);
        let cont = planar("y", ["-x", "-1"], ["x", "1"], 3.0);
        assert!(matches!(cont.classify_sigma_singularities(), Err(Error::PseudoEquilibriumContinuum)));
        let eq = planar("y", ["x", "x"], ["2", "1"], 3.0);
        let kinds: Vec<_> = eq.classify_sigma_singularities().unwrap().iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SingularityKind::EquilibriumPlus]);
    }

    #[test]
    fn graph_surface() {
        let dom = Domain::new(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]).unwrap();
        let tol = Tolerances { tangency_grid: 64, ..Tolerances::default() };
        // Z+h = x^2 + y^2 + ... vanishes only at the origin.
        let s = NsvfSystem::from_strings(
            "z",
            &["0", "0", "x^2 + y^2"],
            &["0", "0", "-1"],
            dom,
            3.0,
            tol.clone(),
        )
        .unwrap();
        let t = s.find_tangencies().unwrap();
        assert_eq!(t.len(), 1);
        assert!(norm(t[0]) < 1e-4);
        let curve =
            NsvfSystem::from_strings("z", &["0", "0", "x"], &["0", "0", "-1"], dom, 3.0, tol).unwrap();
        let r = curve.find_tangencies();
        assert!(matches!(r, Err(Error::TangencyContinuum(_))), "{r:?}");
    }
}
