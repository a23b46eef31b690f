//! Arithmetic expressions over named chart coordinates.
//!
//! Expressions are the input format for metric components and scalar fields.
//! Named constants (`lambda`, `A`, ...) are bound when the text is parsed, so
//! an [`Expression`] is a pure function of its chart coordinates. Evaluation
//! comes in two flavours: [`Expression::eval`] for values only and
//! [`Expression::eval_jet`] for value, gradient and Hessian by forward-mode
//! differentiation.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | ident | func "(" expr ")" | "(" expr ")" ;
//! func    = "exp" | "log" | "sin" | "cos" | "sqrt" | "abs" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```

mod jet;
mod parser;
mod print;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use jet::Jet;

/// Named constants bound at parse time.
pub type Constants = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("duplicate chart variable `{0}`")]
    DuplicateVariable(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree node.
///
/// `Num` literals are finite and non-negative; negation is always an explicit
/// `Neg` node so that printing and re-parsing reproduce the same tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Const { name: String, value: f64 },
    Neg(Box<Node>),
    Binary {
        op: BinOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    Call { func: Func, arg: Box<Node> },
}

impl Node {
    /// Literal node; negative values become `Neg(Num(|v|))`.
    pub fn num(v: f64) -> Node {
        debug_assert!(v.is_finite());
        if v.is_sign_negative() && v != 0.0 {
            Node::Neg(Box::new(Node::Num(-v)))
        } else {
            Node::Num(v.abs())
        }
    }

    pub fn binary(op: BinOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    fn remap_vars(&self, map: &[usize]) -> Node {
        match self {
            Node::Var(i) => Node::Var(map[*i]),
            Node::Num(_) | Node::Const { .. } => self.clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.remap_vars(map))),
            Node::Binary { op, lhs, rhs } => Node::Binary {
                op: *op,
                lhs: Box::new(lhs.remap_vars(map)),
                rhs: Box::new(rhs.remap_vars(map)),
            },
            Node::Call { func, arg } => Node::Call {
                func: *func,
                arg: Box::new(arg.remap_vars(map)),
            },
        }
    }

    fn depends_on_vars(&self) -> bool {
        match self {
            Node::Var(_) => true,
            Node::Num(_) | Node::Const { .. } => false,
            Node::Neg(a) => a.depends_on_vars(),
            Node::Binary { lhs, rhs, .. } => lhs.depends_on_vars() || rhs.depends_on_vars(),
            Node::Call { arg, .. } => arg.depends_on_vars(),
        }
    }
}

/// A parsed expression: tree, ordered chart variables and the constants that
/// were in scope when it was parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    vars: Vec<String>,
    consts: Constants,
}

impl Expression {
    /// Parses `text` over the chart variables `vars`, resolving any other
    /// identifier against `consts`.
    pub fn parse(text: &str, vars: &[&str], consts: &Constants) -> Result<Self, ExprError> {
        let vars: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(ExprError::DuplicateVariable(v.clone()));
            }
        }
        let root = parser::parse(text, &vars, consts)?;
        Ok(Self {
            root,
            vars,
            consts: consts.clone(),
        })
    }

    /// Parses with no named constants.
    pub fn parse_vars(text: &str, vars: &[&str]) -> Result<Self, ExprError> {
        Self::parse(text, vars, &Constants::new())
    }

    /// Wraps an already-built tree. Every `Var` index must be `< vars.len()`.
    pub fn from_node(root: Node, vars: Vec<String>, consts: Constants) -> Self {
        Self { root, vars, consts }
    }

    /// The constant `v` over the given chart.
    pub fn constant(v: f64, vars: &[String]) -> Self {
        Self::from_node(Node::num(v), vars.to_vec(), Constants::new())
    }

    /// The `index`-th coordinate function of the given chart.
    pub fn coordinate(index: usize, vars: &[String]) -> Self {
        Self::from_node(Node::Var(index), vars.to_vec(), Constants::new())
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn consts(&self) -> &Constants {
        &self.consts
    }

    /// True when the expression does not reference any chart variable.
    pub fn is_constant(&self) -> bool {
        !self.root.depends_on_vars()
    }

    /// Re-expresses this expression over a larger chart. `positions[i]` is the
    /// index in `new_vars` of this expression's `i`-th variable.
    pub fn embed(&self, new_vars: &[String], positions: &[usize]) -> Self {
        assert_eq!(positions.len(), self.vars.len());
        Self {
            root: self.root.remap_vars(positions),
            vars: new_vars.to_vec(),
            consts: self.consts.clone(),
        }
    }

    /// Combines two expressions over the same chart with a binary operator.
    pub fn combine(op: BinOp, lhs: &Expression, rhs: &Expression) -> Self {
        assert_eq!(lhs.vars, rhs.vars, "chart mismatch in Expression::combine");
        let mut consts = lhs.consts.clone();
        for (k, v) in &rhs.consts {
            consts.entry(k.clone()).or_insert(*v);
        }
        Self {
            root: Node::binary(op, lhs.root.clone(), rhs.root.clone()),
            vars: lhs.vars.clone(),
            consts,
        }
    }

    /// `k * self` as a new tree (no folding).
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            root: Node::binary(BinOp::Mul, Node::num(k), self.root.clone()),
            vars: self.vars.clone(),
            consts: self.consts.clone(),
        }
    }

    fn check_arity(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != self.vars.len() {
            return Err(ExprError::Arity {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Value at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_arity(point)?;
        eval_value(&self.root, point, &self.vars)
    }

    /// Value, gradient and Hessian at `point`.
    pub fn eval_jet(&self, point: &[f64]) -> Result<Jet, ExprError> {
        self.check_arity(point)?;
        eval_jet(&self.root, point, &self.vars)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::print(&self.root, &self.vars))
    }
}

fn domain_error(node: &Node, vars: &[String], reason: impl Into<String>) -> ExprError {
    ExprError::Domain {
        expr: print::print(node, vars),
        reason: reason.into(),
    }
}

fn check_value(node: &Node, vars: &[String], v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain_error(node, vars, "non-finite result"))
    }
}

/// Integer exponent small enough for repeated multiplication.
fn integer_exponent(p: f64) -> Option<i64> {
    (p.fract() == 0.0 && p.abs() <= 1.0e6).then_some(p as i64)
}

fn eval_value(node: &Node, p: &[f64], vars: &[String]) -> Result<f64, ExprError> {
    let v = match node {
        Node::Num(v) => *v,
        Node::Const { value, .. } => *value,
        Node::Var(i) => p[*i],
        Node::Neg(a) => -eval_value(a, p, vars)?,
        Node::Binary { op, lhs, rhs } => {
            let a = eval_value(lhs, p, vars)?;
            let b = eval_value(rhs, p, vars)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain_error(node, vars, "division by zero"));
                    }
                    a / b
                }
                BinOp::Pow => match integer_exponent(b) {
                    Some(k) => {
                        if a == 0.0 && k < 0 {
                            return Err(domain_error(node, vars, "zero raised to a negative power"));
                        }
                        a.powi(k as i32)
                    }
                    None => {
                        if a <= 0.0 {
                            return Err(domain_error(node, vars,
                                "non-integer power of a non-positive base",
                            ));
                        }
                        a.powf(b)
                    }
                },
            }
        }
        Node::Call { func, arg } => {
            let x = eval_value(arg, p, vars)?;
            match func {
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain_error(node, vars, "log of a non-positive value"));
                    }
                    x.ln()
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain_error(node, vars, "sqrt of a negative value"));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            }
        }
    };
    check_value(node, vars, v)
}

fn eval_jet(node: &Node, p: &[f64], vars: &[String]) -> Result<Jet, ExprError> {
    let n = p.len();
    let jet = match node {
        Node::Num(v) => Jet::constant(n, *v),
        Node::Const { value, .. } => Jet::constant(n, *value),
        Node::Var(i) => Jet::variable(n, *i, p[*i]),
        Node::Neg(a) => -&eval_jet(a, p, vars)?,
        Node::Binary { op, lhs, rhs } => {
            let a = eval_jet(lhs, p, vars)?;
            let b = eval_jet(rhs, p, vars)?;
            match op {
                BinOp::Add => &a + &b,
                BinOp::Sub => &a - &b,
                BinOp::Mul => &a * &b,
                BinOp::Div => {
                    if b.value() == 0.0 {
                        return Err(domain_error(node, vars, "division by zero"));
                    }
                    &a * &b.recip()
                }
                BinOp::Pow => pow_jet(node, &a, &b, vars)?,
            }
        }
        Node::Call { func, arg } => {
            let a = eval_jet(arg, p, vars)?;
            let x = a.value();
            match func {
                Func::Exp => {
                    let e = x.exp();
                    a.chain(e, e, e)
                }
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain_error(node, vars, "log of a non-positive value"));
                    }
                    a.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
                }
                Func::Sin => a.chain(x.sin(), x.cos(), -x.sin()),
                Func::Cos => a.chain(x.cos(), -x.sin(), -x.cos()),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain_error(node, vars, "sqrt of a negative value"));
                    }
                    if x == 0.0 && !a.is_constant() {
                        return Err(domain_error(node, vars, "sqrt is not differentiable at 0"));
                    }
                    let s = x.sqrt();
                    if x == 0.0 {
                        Jet::constant(n, 0.0)
                    } else {
                        a.chain(s, 0.5 / s, -0.25 / (s * x))
                    }
                }
                Func::Abs => {
                    if x == 0.0 && !a.is_constant() {
                        return Err(domain_error(node, vars, "abs is not differentiable at 0"));
                    }
                    a.chain(x.abs(), x.signum(), 0.0)
                }
            }
        }
    };
    if jet.is_finite() {
        Ok(jet)
    } else {
        Err(domain_error(node, vars, "non-finite result"))
    }
}

fn pow_jet(node: &Node, base: &Jet, exponent: &Jet, vars: &[String]) -> Result<Jet, ExprError> {
    let (a, b) = (base.value(), exponent.value());
    if exponent.is_constant() {
        if let Some(k) = integer_exponent(b) {
            if a == 0.0 && k < 0 {
                return Err(domain_error(node, vars, "zero raised to a negative power"));
            }
            return Ok(base.powi(k));
        }
        if a <= 0.0 {
            return Err(domain_error(node, vars,
                "non-integer power of a non-positive base",
            ));
        }
        return Ok(base.powf(b));
    }
    // variable exponent: a^b = exp(b ln a)
    if a <= 0.0 {
        return Err(domain_error(node, vars, "variable power of a non-positive base"));
    }
    let ln_a = base.chain(a.ln(), 1.0 / a, -1.0 / (a * a));
    let t = exponent * &ln_a;
    let e = t.value().exp();
    Ok(t.chain(e, e, e))
}
