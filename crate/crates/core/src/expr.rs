//! Scalar expressions over the variables `x`, `y`, `z`.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)?
//! exponent:= '-'? integer | '(' '-'? integer ')'
//! atom    := number | 'x' | 'y' | 'z' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'tanh'
//! number  := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! There is no `abs` or `sign`; discontinuities belong in the switching function.

use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

/// Maximum number of spatial variables.
pub const MAX_VARS: usize = 3;

pub const VAR_NAMES: [&str; MAX_VARS] = ["x", "y", "z"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("empty expression")]
    Empty,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// An immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    root: Node,
}

impl ExprTree {
    pub fn constant(v: f64) -> Self {
        ExprTree { root: Node::Const(v) }
    }

    pub fn var(index: usize) -> Self {
        assert!(index < MAX_VARS, "variable index out of range");
        ExprTree { root: Node::Var(index) }
    }

    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        p.skip_ws();
        if p.pos == p.src.len() {
            return Err(ExprError::Empty);
        }
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.syntax("unexpected trailing input"));
        }
        Ok(ExprTree { root })
    }

    /// Returns the constant value if the tree is a literal.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    /// Number of variables needed to evaluate: one past the highest index used.
    pub fn arity(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Const(_) => 0,
                Node::Var(i) => i + 1,
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a).max(walk(b))
                }
            }
        }
        walk(&self.root)
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<f64, ExprError> {
        let v = eval_node(&self.root, p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite)
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> ExprTree {
        ExprTree { root: diff(&self.root, var) }
    }

    pub fn gradient(&self, dim: usize) -> Vec<ExprTree> {
        (0..dim).map(|i| self.differentiate(i)).collect()
    }

    /// Replace variable `var` by `with` everywhere.
    pub fn substitute(&self, var: usize, with: &ExprTree) -> ExprTree {
        fn walk(n: &Node, var: usize, with: &Node) -> Node {
            match n {
                Node::Const(v) => Node::Const(*v),
                Node::Var(i) if *i == var => with.clone(),
                Node::Var(i) => Node::Var(*i),
                Node::Neg(a) => neg(walk(a, var, with)),
                Node::Add(a, b) => add(walk(a, var, with), walk(b, var, with)),
                Node::Sub(a, b) => sub(walk(a, var, with), walk(b, var, with)),
                Node::Mul(a, b) => mul(walk(a, var, with), walk(b, var, with)),
                Node::Div(a, b) => div(walk(a, var, with), walk(b, var, with)),
                Node::Pow(a, k) => pow(walk(a, var, with), *k),
                Node::Call(f, a) => call(*f, walk(a, var, with)),
            }
        }
        ExprTree { root: walk(&self.root, var, &with.root) }
    }

    pub fn add(&self, other: &ExprTree) -> ExprTree {
        ExprTree { root: add(self.root.clone(), other.root.clone()) }
    }

    pub fn sub(&self, other: &ExprTree) -> ExprTree {
        ExprTree { root: sub(self.root.clone(), other.root.clone()) }
    }

    pub fn mul(&self, other: &ExprTree) -> ExprTree {
        ExprTree { root: mul(self.root.clone(), other.root.clone()) }
    }

    pub fn neg(&self) -> ExprTree {
        ExprTree { root: neg(self.root.clone()) }
    }

    /// Lie derivative `<grad self, field>` as a tree.
    pub fn lie(&self, field: &[ExprTree]) -> ExprTree {
        let mut acc = Node::Const(0.0);
        for (i, comp) in field.iter().enumerate() {
            let partial = diff(&self.root, i);
            acc = add(acc, mul(comp.root.clone(), partial));
        }
        ExprTree { root: acc }
    }

    pub fn node_count(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Const(_) | Node::Var(_) => 1,
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + walk(a),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    1 + walk(a) + walk(b)
                }
            }
        }
        walk(&self.root)
    }

    pub fn compile(&self) -> Program {
        let mut ops = Vec::new();
        emit(&self.root, &mut ops);
        Program { ops }
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

impl std::str::FromStr for ExprTree {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExprTree::parse(s)
    }
}

fn write_node(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match n {
        // `{:?}` is the shortest representation that parses back exactly.
        Node::Const(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
        Node::Const(v) => write!(f, "{v:?}"),
        Node::Var(i) => f.write_str(VAR_NAMES[*i]),
        Node::Neg(a) => {
            f.write_str("(-")?;
            write_node(a, f)?;
            f.write_str(")")
        }
        Node::Add(a, b) => binary(f, a, "+", b),
        Node::Sub(a, b) => binary(f, a, "-", b),
        Node::Mul(a, b) => binary(f, a, "*", b),
        Node::Div(a, b) => binary(f, a, "/", b),
        Node::Pow(a, k) => {
            f.write_str("(")?;
            write_node(a, f)?;
            write!(f, "^({k}))")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            f.write_str(")")
        }
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node) -> fmt::Result {
    f.write_str("(")?;
    write_node(a, f)?;
    write!(f, " {op} ")?;
    write_node(b, f)?;
    f.write_str(")")
}

fn eval_node(n: &Node, p: &[f64]) -> Result<f64, ExprError> {
    Ok(match n {
        Node::Const(v) => *v,
        Node::Var(i) => p.get(*i).copied().unwrap_or(0.0),
        Node::Neg(a) => -eval_node(a, p)?,
        Node::Add(a, b) => eval_node(a, p)? + eval_node(b, p)?,
        Node::Sub(a, b) => eval_node(a, p)? - eval_node(b, p)?,
        Node::Mul(a, b) => eval_node(a, p)? * eval_node(b, p)?,
        Node::Div(a, b) => {
            let den = eval_node(b, p)?;
            if den == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            eval_node(a, p)? / den
        }
        Node::Pow(a, k) => {
            let base = eval_node(a, p)?;
            if base == 0.0 && *k < 0 {
                return Err(ExprError::DivisionByZero);
            }
            base.powi(*k)
        }
        Node::Call(func, a) => func.apply(eval_node(a, p)?),
    })
}

// Smart constructors with constant folding.

fn is_const(n: &Node, v: f64) -> bool {
    matches!(n, Node::Const(c) if *c == v)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(v) => Node::Const(-v),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        (_, Node::Neg(inner)) => sub(a, (**inner).clone()),
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Node::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&a, -1.0) => neg(b),
        _ if is_const(&b, -1.0) => neg(a),
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (&a, &b) {
        (Node::Const(x), Node::Const(y)) if *y != 0.0 => Node::Const(x / y),
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&a, 0.0) && !is_const(&b, 0.0) => Node::Const(0.0),
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, k: i32) -> Node {
    match (&a, k) {
        (_, 0) => Node::Const(1.0),
        (_, 1) => a,
        (Node::Const(v), _) if *v != 0.0 || k > 0 => Node::Const(v.powi(k)),
        _ => Node::Pow(Box::new(a), k),
    }
}

fn call(f: Func, a: Node) -> Node {
    match a {
        Node::Const(v) => Node::Const(f.apply(v)),
        other => Node::Call(f, Box::new(other)),
    }
}

fn diff(n: &Node, var: usize) -> Node {
    match n {
        Node::Const(_) => Node::Const(0.0),
        Node::Var(i) => Node::Const(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(diff(a, var)),
        Node::Add(a, b) => add(diff(a, var), diff(b, var)),
        Node::Sub(a, b) => sub(diff(a, var), diff(b, var)),
        Node::Mul(a, b) => add(
            mul(diff(a, var), (**b).clone()),
            mul((**a).clone(), diff(b, var)),
        ),
        Node::Div(a, b) => div(
            sub(
                mul(diff(a, var), (**b).clone()),
                mul((**a).clone(), diff(b, var)),
            ),
            pow((**b).clone(), 2),
        ),
        Node::Pow(a, k) => mul(
            mul(Node::Const(*k as f64), pow((**a).clone(), k - 1)),
            diff(a, var),
        ),
        Node::Call(f, a) => {
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Exp => call(Func::Exp, inner),
                Func::Tanh => sub(Node::Const(1.0), pow(call(Func::Tanh, inner), 2)),
            };
            mul(outer, diff(a, var))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(i32),
    Call(Func),
}

fn emit(n: &Node, ops: &mut Vec<Op>) {
    match n {
        Node::Const(v) => ops.push(Op::Const(*v)),
        Node::Var(i) => ops.push(Op::Var(*i)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match n {
                Node::Add(..) => Op::Add,
                Node::Sub(..) => Op::Sub,
                Node::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
        Node::Pow(a, k) => {
            emit(a, ops);
            ops.push(Op::Pow(*k));
        }
        Node::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
    }
}

/// Postfix form of an [`ExprTree`] for the integrator's inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
}

impl Program {
    pub fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        let mut stack: SmallVec<[f64; 32]> = SmallVec::new();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Var(i) => stack.push(p.get(i).copied().unwrap_or(0.0)),
                Op::Neg => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(-a);
                }
                Op::Pow(k) => {
                    let a = stack.pop().expect("stack underflow");
                    if a == 0.0 && k < 0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    stack.push(a.powi(k));
                }
                Op::Call(f) => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(f.apply(a));
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    stack.push(match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => {
                            if b == 0.0 {
                                return Err(ExprError::DivisionByZero);
                            }
                            a / b
                        }
                    });
                }
            }
        }
        let v = stack.pop().expect("empty program");
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite)
        }
    }
}

/// A vector field given componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr {
    components: Vec<ExprTree>,
    programs: Vec<Program>,
}

impl VectorExpr {
    pub fn new(components: Vec<ExprTree>) -> Self {
        let programs = components.iter().map(ExprTree::compile).collect();
        VectorExpr { components, programs }
    }

    pub fn parse<S: AsRef<str>>(texts: &[S]) -> Result<Self, ExprError> {
        let comps = texts
            .iter()
            .map(|t| ExprTree::parse(t.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VectorExpr::new(comps))
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ExprTree] {
        &self.components
    }

    pub fn arity(&self) -> usize {
        self.components.iter().map(ExprTree::arity).max().unwrap_or(0)
    }

    /// Evaluates into a 3-vector; unused trailing components are zero.
    pub fn eval(&self, p: &[f64]) -> Result<[f64; MAX_VARS], ExprError> {
        let mut out = [0.0; MAX_VARS];
        for (o, prog) in out.iter_mut().zip(&self.programs) {
            *o = prog.eval(p)?;
        }
        Ok(out)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let mut k: i32 = digits
            .parse()
            .map_err(|_| ExprError::Syntax { offset: start, message: "exponent too large".into() })?;
        if negative {
            k = -k;
        }
        if paren && !self.eat(b')') {
            return Err(self.syntax("expected `)` after exponent"));
        }
        Ok(Node::Pow(Box::new(base), k))
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if exp_start == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .map(Node::Const)
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
        if let Some(i) = VAR_NAMES.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            _ => {
                return Err(ExprError::UnknownIdentifier { offset: start, name: name.to_string() })
            }
        };
        if !self.eat(b'(') {
            return Err(self.syntax("expected `(` after function name"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.syntax("expected `)`"));
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, p: &[f64]) -> f64 {
        ExprTree::parse(text).unwrap().evaluate(p).unwrap()
    }

    #[test]
    fn parse_and_evaluate_basics() {
        assert_eq!(ev("x^2 - y", &[2.0, 1.0]), 3.0);
        assert_eq!(ev("0", &[0.3, -7.0]), 0.0);
        assert_eq!(ev("sin(x)*y", &[0.0, 5.0]), 0.0);
        assert_eq!(ev("exp(0)", &[]), 1.0);
        assert_eq!(ev("x*y + 1", &[3.0, 4.0]), 13.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("8 / 2 / 2", &[]), 2.0);
        assert_eq!(ev("2 + 3 * 4", &[]), 14.0);
        assert_eq!(ev("x^(-1)", &[4.0]), 0.25);
        assert_eq!(ev("1.5e1 + 2E-1", &[]), 15.2);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = ExprTree::parse("x/y").unwrap();
        assert_eq!(e.evaluate(&[1.0, 0.0]), Err(ExprError::DivisionByZero));
        assert_eq!(e.compile().eval(&[1.0, 0.0]), Err(ExprError::DivisionByZero));
        assert!(ExprTree::parse("x^(-2)").unwrap().evaluate(&[0.0]).is_err());
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match ExprTree::parse("x + * y") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match ExprTree::parse("x + w") {
            Err(ExprError::UnknownIdentifier { offset, name }) => {
                assert_eq!(offset, 4);
                assert_eq!(name, "w");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ExprTree::parse("   "), Err(ExprError::Empty));
        assert!(ExprTree::parse("abs(x)").is_err());
        assert!(ExprTree::parse("(x").is_err());
        assert!(ExprTree::parse("x^y").is_err());
    }

    #[test]
    fn power_rule_and_constants() {
        let e = ExprTree::parse("x^2 - y").unwrap();
        assert_eq!(e.differentiate(0), ExprTree::parse("2*x").unwrap());
        assert_eq!(e.differentiate(1).as_constant(), Some(-1.0));
        assert_eq!(ExprTree::parse("7").unwrap().differentiate(0).as_constant(), Some(0.0));
        assert_eq!(ExprTree::parse("x").unwrap().differentiate(0).as_constant(), Some(1.0));
    }

    #[test]
    fn arity_and_lie() {
        assert_eq!(ExprTree::parse("1").unwrap().arity(), 0);
        assert_eq!(ExprTree::parse("x + z").unwrap().arity(), 3);
        let h = ExprTree::parse("x^2 + y^2 - 1").unwrap();
        let field = [ExprTree::constant(0.0), ExprTree::constant(1.0)];
        assert_eq!(h.lie(&field).evaluate(&[0.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn substitute_replaces_variable() {
        let e = ExprTree::parse("z - x*y").unwrap();
        let g = ExprTree::parse("x + 1").unwrap();
        let s = e.substitute(2, &g);
        assert_eq!(s.evaluate(&[2.0, 3.0, 100.0]).unwrap(), 3.0 - 6.0);
    }

    #[test]
    fn display_round_trips_negative_constants() {
        let e = ExprTree::constant(-2.5).mul(&ExprTree::var(0));
        let back = ExprTree::parse(&e.to_string()).unwrap();
        assert_eq!(back.evaluate(&[2.0]).unwrap(), -5.0);
    }
}
