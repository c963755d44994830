//! The nonsmooth vector field `Z = (Z+, Z-)` with switching function `h`.

mod search;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{ExprTree, Program, VectorExpr, MAX_VARS};

pub use search::SigmaSegment;

/// A point of the phase space. Coordinates past the system dimension are zero.
pub type Point = [f64; MAX_VARS];

pub(crate) fn vadd(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn vsub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn vscale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn vdot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Point) -> f64 {
    vdot(a, a).sqrt()
}

pub fn distance(a: Point, b: Point) -> f64 {
    norm(vsub(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Plus,
    Minus,
}

impl Field {
    pub fn index(self) -> usize {
        match self {
            Field::Plus => 0,
            Field::Minus => 1,
        }
    }

    /// Sign of `h` on the side governed by this field.
    pub fn side_sign(self) -> f64 {
        match self {
            Field::Plus => 1.0,
            Field::Minus => -1.0,
        }
    }
}

/// Numerical tolerances. Every field has a default, so a configuration file
/// may override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Membership in the switching manifold: `|h| <= surface_tol`.
    pub surface_tol: f64,
    /// Sign tests on products of Lie derivatives.
    pub tol: f64,
    pub root_tol: f64,
    pub merge_tol: f64,
    /// Minimum `|grad h|` at points of the switching manifold.
    pub grad_tol: f64,
    pub max_lie_order: usize,
    /// Cells per axis of the tangency search grid.
    pub tangency_grid: usize,
    /// Nodes per axis of the `z_bound` verification grid.
    pub z_bound_grid: usize,
    /// Fields with norm below this are treated as stationary.
    pub eq_tol: f64,
    /// Fixed Runge-Kutta step.
    pub dt: f64,
    pub event_tol: f64,
    /// A single Lie derivative is considered zero at a tangency-class point
    /// when its magnitude is below this.
    pub lie_zero_tol: f64,
    /// A smooth arc whose `|h|` has a local minimum below this touches the
    /// switching manifold (grazing contact).
    pub graze_tol: f64,
    pub max_events: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            surface_tol: 1e-9,
            tol: 1e-9,
            root_tol: 1e-10,
            merge_tol: 1e-6,
            grad_tol: 1e-8,
            max_lie_order: 6,
            tangency_grid: 2048,
            z_bound_grid: 64,
            eq_tol: 1e-9,
            dt: 1e-3,
            event_tol: 1e-10,
            lie_zero_tol: 3e-5,
            graze_tol: 1e-9,
            max_events: 100_000,
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Point,
    pub max: Point,
}

impl Domain {
    pub fn new(min: &[f64], max: &[f64]) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() || min.len() > MAX_VARS {
            return Err(Error::Config("domain min/max must have 1..=3 equal-length entries".into()));
        }
        let mut lo = [0.0; MAX_VARS];
        let mut hi = [0.0; MAX_VARS];
        for i in 0..min.len() {
            if !(min[i] < max[i]) || !min[i].is_finite() || !max[i].is_finite() {
                return Err(Error::Config(format!("domain axis {i} is empty or not finite")));
            }
            lo[i] = min[i];
            hi[i] = max[i];
        }
        Ok(Domain { min: lo, max: hi })
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        (0..dim).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn diameter(&self) -> f64 {
        distance(self.min, self.max)
    }

    pub fn center(&self) -> Point {
        vscale(vadd(self.min, self.max), 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    CrossingPositive,
    CrossingNegative,
    SlidingStable,
    SlidingUnstable,
    Tangency,
}

impl RegionKind {
    pub fn is_sliding(self) -> bool {
        matches!(self, RegionKind::SlidingStable | RegionKind::SlidingUnstable)
    }

    pub fn is_crossing(self) -> bool {
        matches!(self, RegionKind::CrossingPositive | RegionKind::CrossingNegative)
    }

    /// Classification from the two Lie derivatives of `h`.
    pub fn from_lie(lie_plus: f64, lie_minus: f64, tol: f64) -> Self {
        let product = lie_plus * lie_minus;
        if product > tol {
            if lie_plus > 0.0 {
                RegionKind::CrossingPositive
            } else {
                RegionKind::CrossingNegative
            }
        } else if product < -tol {
            if lie_plus < 0.0 {
                RegionKind::SlidingStable
            } else {
                RegionKind::SlidingUnstable
            }
        } else {
            RegionKind::Tangency
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionClass {
    pub kind: RegionKind,
    pub lie_plus: f64,
    pub lie_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    TangencyRegularFields,
    EquilibriumPlus,
    EquilibriumMinus,
    PseudoEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSingularity {
    pub kind: SingularityKind,
    pub location: Point,
}

/// `X^k h` for k = 1..=max_lie_order.
#[derive(Debug, Clone)]
struct LieTower {
    trees: Vec<ExprTree>,
    programs: Vec<Program>,
}

impl LieTower {
    fn build(h: &ExprTree, field: &VectorExpr, max_order: usize) -> Self {
        let mut trees = Vec::with_capacity(max_order);
        let mut current = h.clone();
        for _ in 0..max_order {
            current = current.lie(field.components());
            trees.push(current.clone());
        }
        let programs = trees.iter().map(ExprTree::compile).collect();
        LieTower { trees, programs }
    }
}

/// A Filippov system on a box. Immutable once built.
#[derive(Debug)]
pub struct NsvfSystem {
    dim: usize,
    h: ExprTree,
    h_prog: Program,
    grad_h: VectorExpr,
    zplus: VectorExpr,
    zminus: VectorExpr,
    domain: Domain,
    z_bound: f64,
    tol: Tolerances,
    lie: [LieTower; 2],
    tangencies: OnceLock<Result<Vec<Point>>>,
}

impl NsvfSystem {
    /// Builds and validates a system: dimensions agree, `z_bound` dominates the
    /// fields on a verification grid, and `grad h` does not vanish on the
    /// switching manifold at the grid's sign changes.
    pub fn new(
        h: ExprTree,
        zplus: VectorExpr,
        zminus: VectorExpr,
        domain: Domain,
        z_bound: f64,
        tol: Tolerances,
    ) -> Result<Self> {
        let dim = zplus.dim();
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if zminus.dim() != dim {
            return Err(Error::Config("Z+ and Z- have different dimensions".into()));
        }
        let arity = h.arity().max(zplus.arity()).max(zminus.arity());
        if arity > dim {
            return Err(Error::Config(format!(
                "expressions use variable `{}` beyond dimension {dim}",
                crate::expr::VAR_NAMES[arity - 1]
            )));
        }
        if (dim..MAX_VARS).any(|i| domain.min[i] != 0.0 || domain.max[i] != 0.0) {
            return Err(Error::Config("domain dimension does not match the fields".into()));
        }
        if !(z_bound > 0.0) || !z_bound.is_finite() {
            return Err(Error::Config("z_bound must be positive and finite".into()));
        }
        if tol.max_lie_order < 2 {
            return Err(Error::Config("max_lie_order must be at least 2".into()));
        }
        if !(tol.dt > 0.0) || !(tol.event_tol > 0.0) {
            return Err(Error::Config("dt and event_tol must be positive".into()));
        }
        let grad_h = VectorExpr::new(h.gradient(dim));
        let lie = [
            LieTower::build(&h, &zplus, tol.max_lie_order),
            LieTower::build(&h, &zminus, tol.max_lie_order),
        ];
        let sys = NsvfSystem {
            dim,
            h_prog: h.compile(),
            h,
            grad_h,
            zplus,
            zminus,
            domain,
            z_bound,
            tol,
            lie,
            tangencies: OnceLock::new(),
        };
        search::verify_grid(&sys)?;
        Ok(sys)
    }

    /// Convenience constructor from expression strings.
    pub fn from_strings<S: AsRef<str>>(
        h: &str,
        zplus: &[S],
        zminus: &[S],
        domain: Domain,
        z_bound: f64,
        tol: Tolerances,
    ) -> Result<Self> {
        NsvfSystem::new(
            ExprTree::parse(h)?,
            VectorExpr::parse(zplus)?,
            VectorExpr::parse(zminus)?,
            domain,
            z_bound,
            tol,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn z_bound(&self) -> f64 {
        self.z_bound
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn switching(&self) -> &ExprTree {
        &self.h
    }

    pub fn vector_field(&self, field: Field) -> &VectorExpr {
        match field {
            Field::Plus => &self.zplus,
            Field::Minus => &self.zminus,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.domain.contains(p, self.dim)
    }

    pub fn h(&self, p: Point) -> Result<f64> {
        Ok(self.h_prog.eval(&p)?)
    }

    pub fn grad_h(&self, p: Point) -> Result<Point> {
        Ok(self.grad_h.eval(&p)?)
    }

    pub fn field(&self, field: Field, p: Point) -> Result<Point> {
        Ok(self.vector_field(field).eval(&p)?)
    }

    /// `Z±h(p) = <grad h(p), Z±(p)>`.
    pub fn lie_derivative(&self, field: Field, p: Point) -> Result<f64> {
        Ok(vdot(self.grad_h(p)?, self.field(field, p)?))
    }

    /// `Z±^k h(p)` from the symbolic tower.
    pub fn lie_derivative_k(&self, field: Field, k: usize, p: Point) -> Result<f64> {
        if k == 0 || k > self.tol.max_lie_order {
            return Err(Error::LieOrderExceeded { k, max: self.tol.max_lie_order });
        }
        Ok(self.lie[field.index()].programs[k - 1].eval(&p)?)
    }

    pub fn lie_tree(&self, field: Field, k: usize) -> Result<&ExprTree> {
        if k == 0 || k > self.tol.max_lie_order {
            return Err(Error::LieOrderExceeded { k, max: self.tol.max_lie_order });
        }
        Ok(&self.lie[field.index()].trees[k - 1])
    }

    pub fn on_sigma(&self, p: Point) -> Result<bool> {
        Ok(self.h(p)?.abs() <= self.tol.surface_tol)
    }

    /// Region class of a point of the switching manifold.
    pub fn classify_point(&self, p: Point) -> Result<RegionClass> {
        let hv = self.h(p)?;
        if hv.abs() > self.tol.surface_tol {
            return Err(Error::NotOnSigma { h_value: hv });
        }
        Ok(self.classify_unchecked(p)?)
    }

    pub(crate) fn classify_unchecked(&self, p: Point) -> Result<RegionClass> {
        let lie_plus = self.lie_derivative(Field::Plus, p)?;
        let lie_minus = self.lie_derivative(Field::Minus, p)?;
        Ok(RegionClass {
            kind: RegionKind::from_lie(lie_plus, lie_minus, self.tol.tol),
            lie_plus,
            lie_minus,
        })
    }

    /// Sliding vector field at a sliding point.
    pub fn sliding_field(&self, p: Point) -> Result<Point> {
        let class = self.classify_point(p)?;
        let denominator = class.lie_minus - class.lie_plus;
        if !class.kind.is_sliding() || denominator.abs() <= self.tol.tol {
            return Err(Error::NotSliding { denominator });
        }
        Ok(sliding_combination(
            class.lie_plus,
            class.lie_minus,
            self.field(Field::Plus, p)?,
            self.field(Field::Minus, p)?,
        ))
    }

    /// Convex weight of `Z+` in the sliding field, `Z-h / (Z-h - Z+h)`.
    pub fn sliding_weight(&self, p: Point) -> Result<f64> {
        let class = self.classify_point(p)?;
        let denominator = class.lie_minus - class.lie_plus;
        if !class.kind.is_sliding() || denominator.abs() <= self.tol.tol {
            return Err(Error::NotSliding { denominator });
        }
        Ok(class.lie_minus / denominator)
    }

    /// Smallest `m` with `|Z±^m h(p)| > tol`; `m = 1` means `p` is not a tangency.
    pub fn multiplicity(&self, field: Field, p: Point) -> Result<usize> {
        let first = self.lie_derivative_k(field, 1, p)?;
        if first.abs() > self.tol.tol {
            return Err(Error::NotTangency { field, value: first });
        }
        for k in 2..=self.tol.max_lie_order {
            if self.lie_derivative_k(field, k, p)?.abs() > self.tol.tol {
                return Ok(k);
            }
        }
        Err(Error::InfiniteMultiplicity { max_order: self.tol.max_lie_order })
    }

    /// Tangency points of the switching manifold (cached after the first call).
    pub fn find_tangencies(&self) -> Result<Vec<Point>> {
        self.tangencies.get_or_init(|| search::find_tangencies(self)).clone()
    }

    /// Segments tracing the switching manifold (planar systems only).
    pub fn sigma_segments(&self) -> Result<Vec<SigmaSegment>> {
        search::sigma_segments(self)
    }

    pub fn classify_sigma_singularities(&self) -> Result<Vec<SigmaSingularity>> {
        search::sigma_singularities(self)
    }

    /// Newton projection onto `h = 0` along `grad h`.
    pub fn project_to_sigma(&self, mut p: Point) -> Result<Point> {
        for _ in 0..20 {
            let hv = self.h(p)?;
            if hv.abs() <= 0.01 * self.tol.surface_tol {
                break;
            }
            let g = self.grad_h(p)?;
            let gg = vdot(g, g);
            if gg <= self.tol.grad_tol * self.tol.grad_tol {
                return Err(Error::SingularSwitching { grad_norm: gg.sqrt(), at: p });
            }
            p = vsub(p, vscale(g, hv / gg));
        }
        Ok(p)
    }
}

/// `(Z-h Z+ - Z+h Z-) / (Z-h - Z+h)`.
pub(crate) fn sliding_combination(lie_plus: f64, lie_minus: f64, zp: Point, zm: Point) -> Point {
    let den = lie_minus - lie_plus;
    vscale(vsub(vscale(zp, lie_minus), vscale(zm, lie_plus)), 1.0 / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn planar(h: &str, zp: [&str; 2], zm: [&str; 2], bound: f64) -> NsvfSystem {
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

    const O: Point = [0.0, 0.0, 0.0];

    #[test]
    fn lie_derivatives() {
        let s = planar("y", ["1", "-1"], ["1", "1"], 2.0);
        assert_eq!(s.lie_derivative(Field::Plus, O).unwrap(), -1.0);
        assert_eq!(s.lie_derivative(Field::Minus, O).unwrap(), 1.0);
        let c = planar("x^2+y^2-1", ["0", "1"], ["0", "1"], 2.0);
        assert_eq!(c.lie_derivative(Field::Plus, [0.0, 1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn higher_lie_derivatives() {
        let s = planar("y", ["1", "-1"], ["1", "1"], 2.0);
        assert_eq!(s.lie_derivative_k(Field::Plus, 1, O).unwrap(), -1.0);
        assert_eq!(s.lie_derivative_k(Field::Plus, 2, O).unwrap(), 0.0);
        let fold = planar("y - x^2", ["1", "0"], ["1", "0"], 2.0);
        assert_eq!(fold.lie_derivative_k(Field::Plus, 1, O).unwrap(), 0.0);
        assert_eq!(fold.lie_derivative_k(Field::Plus, 2, O).unwrap(), -2.0);
        // Z = (y, x): Zh = x, Z^2 h = y.
        let rot = planar("y", ["y", "x"], ["y", "x"], 3.0);
        assert_eq!(rot.lie_derivative_k(Field::Plus, 2, [1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(rot.lie_derivative_k(Field::Plus, 2, [0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(
            rot.lie_derivative_k(Field::Plus, 7, O),
            Err(Error::LieOrderExceeded { k: 7, max: 6 })
        ));
    }

    #[test]
    fn classification() {
        let kind = |zp, zm| planar("y", zp, zm, 3.0).classify_point(O).unwrap().kind;
        assert_eq!(kind(["1", "-1"], ["1", "1"]), RegionKind::SlidingStable);
        assert_eq!(kind(["1", "1"], ["1", "-1"]), RegionKind::SlidingUnstable);
        assert_eq!(kind(["1", "1"], ["1", "1"]), RegionKind::CrossingPositive);
        assert_eq!(kind(["1", "-1"], ["1", "-1"]), RegionKind::CrossingNegative);
        assert_eq!(kind(["1", "-x"], ["0", "1"]), RegionKind::Tangency);
        let s = planar("y", ["1", "1"], ["1", "1"], 2.0);
        assert!(matches!(s.classify_point([0.0, 0.5, 0.0]), Err(Error::NotOnSigma { .. })));
    }

    #[test]
    fn sliding_field_values() {
        let s = planar("y", ["1", "-1"], ["1", "1"], 2.0);
        assert_eq!(s.sliding_field(O).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(s.sliding_weight(O).unwrap(), 0.5);
        let sym = planar("y", ["0", "-1"], ["0", "1"], 2.0);
        assert_eq!(sym.sliding_field(O).unwrap(), [0.0, 0.0, 0.0]);
        let cross = planar("y", ["1", "1"], ["1", "1"], 2.0);
        assert!(matches!(cross.sliding_field(O), Err(Error::NotSliding { .. })));
    }

    #[test]
    fn multiplicities() {
        let fold = planar("y - x^2", ["1", "0"], ["1", "0"], 2.0);
        assert_eq!(fold.multiplicity(Field::Plus, O).unwrap(), 2);
        let cusp = planar("y", ["1", "x^2"], ["1", "1"], 5.0);
        assert_eq!(cusp.multiplicity(Field::Plus, O).unwrap(), 3);
        let transversal = planar("y", ["1", "1"], ["1", "1"], 2.0);
        assert!(matches!(
            transversal.multiplicity(Field::Plus, [0.3, 0.0, 0.0]),
            Err(Error::NotTangency { .. })
        ));
        let flat = planar("y", ["1", "0"], ["1", "1"], 2.0);
        assert!(matches!(
            flat.multiplicity(Field::Plus, O),
            Err(Error::InfiniteMultiplicity { max_order: 6 })
        ));
    }

    #[test]
    fn construction_rejects_bad_configs() {
        let dom = Domain::new(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let t = Tolerances::default;
        let too_small = NsvfSystem::from_strings("y", &["x", "1"], &["1", "1"], dom, 1.0, t());
        assert!(matches!(too_small, Err(Error::ZBoundViolated { .. })));
        let uses_z = NsvfSystem::from_strings("z", &["1", "1"], &["1", "1"], dom, 2.0, t());
        assert!(matches!(uses_z, Err(Error::Config(_))));
        let singular = NsvfSystem::from_strings("y^2 - 1/4", &["1", "1"], &["1", "1"], dom, 2.0, t());
        assert!(singular.is_ok());
        let degenerate = NsvfSystem::from_strings("y^2", &["1", "1"], &["1", "1"], dom, 2.0, t());
        assert!(matches!(degenerate, Err(Error::SingularSwitching { .. })));
    }
}
