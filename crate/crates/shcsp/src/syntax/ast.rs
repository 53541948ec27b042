//! Abstract syntax for SHCSP processes and the symbolic expressions they carry.
//!
//! Numeric literals, branch probabilities and interrupt weights are exact
//! rationals ([`Rational`]); floating point enters only at evaluation time.
//! This keeps weighted-choice thresholds and certificate premises exact.

use std::collections::BTreeSet;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational scalar used throughout the AST.
pub type Rational = BigRational;

/// Convenience constructor for small rationals.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Symbolic arithmetic expression.
///
/// `Piecewise` guards are evaluated in order; the first guard that holds
/// selects its branch, otherwise the default branch is taken.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    Const(Rational),
    Var(String),
    /// The circle constant. Kept symbolic so exact evaluation can refuse it.
    Pi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
    Abs(Box<Expr>),
    Sgn(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Piecewise(Vec<(BoolExpr, Expr)>, Box<Expr>),
}

/// Comparison operator of a relational atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn holds_f64(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    pub fn holds_rat(self, a: &Rational, b: &Rational) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Boolean expression over [`Expr`] comparisons.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoolExpr {
    True,
    False,
    Cmp(Box<Expr>, CmpOp, Box<Expr>),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

/// A continuous block `{d[s] = b dt + sigma dW & B}`.
///
/// `drift` has one entry per variable in `vars`; `diffusion` is a
/// `vars.len() x m` matrix driving an `m`-dimensional Brownian motion.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SdeBlock {
    pub vars: Vec<String>,
    pub drift: Vec<Expr>,
    pub diffusion: Vec<Vec<Expr>>,
    pub domain: BoolExpr,
}

impl SdeBlock {
    /// Dimension of the continuous state vector, `d(s)`.
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    /// Dimension of the driving Brownian motion.
    pub fn brownian_dim(&self) -> usize {
        self.diffusion.first().map_or(0, Vec::len)
    }
}

/// One communication event `ch?x` or `ch!e`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CommEvent {
    In { chan: String, var: String },
    Out { chan: String, expr: Expr },
}

impl CommEvent {
    pub fn chan(&self) -> &str {
        match self {
            CommEvent::In { chan, .. } | CommEvent::Out { chan, .. } => chan,
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self, CommEvent::In { .. })
    }
}

/// A weighted communication-interrupt branch `w: ch* -> { Q }`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct InterruptBranch {
    pub weight: Rational,
    pub event: CommEvent,
    pub body: Process,
}

/// SHCSP process terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Process {
    Skip,
    Assign(String, Expr),
    Input(String, String),
    Output(String, Expr),
    Seq(Box<Process>, Box<Process>),
    Cond(BoolExpr, Box<Process>),
    Repeat(Box<Process>),
    PChoice(Box<Process>, Rational, Box<Process>),
    Sde(SdeBlock),
    Interrupt(SdeBlock, Vec<InterruptBranch>),
    Parallel(Box<Process>, Box<Process>),
}

/// Evaluation failure for expressions and guards.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivByZero,
    #[error("non-finite result in `{0}`")]
    NonFinite(&'static str),
}

/// Variable lookup used by the evaluators. Returning `None` yields an
/// `EvalError::Unbound` at the point of use.
pub trait Lookup {
    fn get(&self, name: &str) -> Option<f64>;
}

impl Lookup for std::collections::BTreeMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        std::collections::BTreeMap::get(self, name).copied()
    }
}

impl<F: Fn(&str) -> Option<f64>> Lookup for F {
    fn get(&self, name: &str) -> Option<f64> {
        self(name)
    }
}

fn finite(x: f64, what: &'static str) -> Result<f64, EvalError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(EvalError::NonFinite(what))
    }
}

impl Expr {
    /// Evaluate to a binary64 value under `env`. Division by zero and
    /// non-finite intermediate results are errors, never silent values.
    pub fn eval(&self, env: &impl Lookup) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(c.to_f64().ok_or(EvalError::NonFinite("const"))?),
            Expr::Var(name) => env
                .get(name)
                .ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Add(a, b) => finite(a.eval(env)? + b.eval(env)?, "+"),
            Expr::Sub(a, b) => finite(a.eval(env)? - b.eval(env)?, "-"),
            Expr::Mul(a, b) => finite(a.eval(env)? * b.eval(env)?, "*"),
            Expr::Div(a, b) => {
                let d = b.eval(env)?;
                if d == 0.0 {
                    return Err(EvalError::DivByZero);
                }
                finite(a.eval(env)? / d, "/")
            }
            Expr::Sin(a) => Ok(a.eval(env)?.sin()),
            Expr::Cos(a) => Ok(a.eval(env)?.cos()),
            Expr::Exp(a) => finite(a.eval(env)?.exp(), "exp"),
            Expr::Sqrt(a) => finite(a.eval(env)?.sqrt(), "sqrt"),
            Expr::Abs(a) => Ok(a.eval(env)?.abs()),
            Expr::Sgn(a) => {
                let v = a.eval(env)?;
                Ok(if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                })
            }
            Expr::Min(a, b) => Ok(a.eval(env)?.min(b.eval(env)?)),
            Expr::Max(a, b) => Ok(a.eval(env)?.max(b.eval(env)?)),
            Expr::Piecewise(arms, default) => {
                for (guard, branch) in arms {
                    if guard.eval(env)? {
                        return branch.eval(env);
                    }
                }
                default.eval(env)
            }
        }
    }

    /// Exact rational evaluation. Returns `None` when the expression needs a
    /// transcendental function, `pi`, or a square root; callers fall back to
    /// binary64 in that case.
    pub fn eval_exact(
        &self,
        env: &std::collections::BTreeMap<String, Rational>,
    ) -> Result<Option<Rational>, EvalError> {
        // Small helper so `a op b` short-circuits on non-exact subterms.
        macro_rules! try2 {
            ($a:expr, $b:expr, $f:expr) => {
                match ($a.eval_exact(env)?, $b.eval_exact(env)?) {
                    (Some(x), Some(y)) => Ok(Some($f(x, y))),
                    _ => Ok(None),
                }
            };
        }
        match self {
            Expr::Const(c) => Ok(Some(c.clone())),
            Expr::Var(name) => match env.get(name) {
                Some(v) => Ok(Some(v.clone())),
                None => Err(EvalError::Unbound(name.clone())),
            },
            Expr::Pi => Ok(None),
            Expr::Neg(a) => Ok(a.eval_exact(env)?.map(|x| -x)),
            Expr::Add(a, b) => try2!(a, b, |x, y| x + y),
            Expr::Sub(a, b) => try2!(a, b, |x, y| x - y),
            Expr::Mul(a, b) => try2!(a, b, |x, y| x * y),
            Expr::Div(a, b) => match (a.eval_exact(env)?, b.eval_exact(env)?) {
                (_, Some(y)) if y.is_zero() => Err(EvalError::DivByZero),
                (Some(x), Some(y)) => Ok(Some(x / y)),
                _ => Ok(None),
            },
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) | Expr::Sqrt(_) => Ok(None),
            Expr::Abs(a) => Ok(a.eval_exact(env)?.map(|x| x.abs())),
            Expr::Sgn(a) => Ok(a.eval_exact(env)?.map(|x| {
                if x.is_positive() {
                    Rational::one()
                } else if x.is_negative() {
                    -Rational::one()
                } else {
                    Rational::zero()
                }
            })),
            Expr::Min(a, b) => try2!(a, b, |x: Rational, y: Rational| x.min(y)),
            Expr::Max(a, b) => try2!(a, b, |x: Rational, y: Rational| x.max(y)),
            Expr::Piecewise(arms, default) => {
                for (guard, branch) in arms {
                    match guard.eval_exact(env)? {
                        Some(true) => return branch.eval_exact(env),
                        Some(false) => continue,
                        None => return Ok(None),
                    }
                }
                default.eval_exact(env)
            }
        }
    }

    /// All variable names occurring in the expression.
    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) | Expr::Pi => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Sqrt(a)
            | Expr::Abs(a)
            | Expr::Sgn(a) => a.free_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Expr::Piecewise(arms, default) => {
                for (g, e) in arms {
                    g.free_vars(out);
                    e.free_vars(out);
                }
                default.free_vars(out);
            }
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        let mut set = BTreeSet::new();
        self.free_vars(&mut set);
        set.contains(var)
    }

    /// Capture-free substitution of `replacement` for every occurrence of `var`.
    pub fn subst(&self, var: &str, replacement: &Expr) -> Expr {
        let go = |e: &Expr| Box::new(e.subst(var, replacement));
        match self {
            Expr::Const(_) | Expr::Pi => self.clone(),
            Expr::Var(name) => {
                if name == var {
                    replacement.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Neg(a) => Expr::Neg(go(a)),
            Expr::Add(a, b) => Expr::Add(go(a), go(b)),
            Expr::Sub(a, b) => Expr::Sub(go(a), go(b)),
            Expr::Mul(a, b) => Expr::Mul(go(a), go(b)),
            Expr::Div(a, b) => Expr::Div(go(a), go(b)),
            Expr::Sin(a) => Expr::Sin(go(a)),
            Expr::Cos(a) => Expr::Cos(go(a)),
            Expr::Exp(a) => Expr::Exp(go(a)),
            Expr::Sqrt(a) => Expr::Sqrt(go(a)),
            Expr::Abs(a) => Expr::Abs(go(a)),
            Expr::Sgn(a) => Expr::Sgn(go(a)),
            Expr::Min(a, b) => Expr::Min(go(a), go(b)),
            Expr::Max(a, b) => Expr::Max(go(a), go(b)),
            Expr::Piecewise(arms, default) => Expr::Piecewise(
                arms.iter()
                    .map(|(g, e)| (g.subst(var, replacement), e.subst(var, replacement)))
                    .collect(),
                go(default),
            ),
        }
    }

    pub fn constant(&self) -> Option<&Rational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }
}

impl BoolExpr {
    pub fn eval(&self, env: &impl Lookup) -> Result<bool, EvalError> {
        match self {
            BoolExpr::True => Ok(true),
            BoolExpr::False => Ok(false),
            BoolExpr::Cmp(a, op, b) => Ok(op.holds_f64(a.eval(env)?, b.eval(env)?)),
            BoolExpr::Not(b) => Ok(!b.eval(env)?),
            BoolExpr::And(a, b) => Ok(a.eval(env)? && b.eval(env)?),
            BoolExpr::Or(a, b) => Ok(a.eval(env)? || b.eval(env)?),
        }
    }

    pub fn eval_exact(
        &self,
        env: &std::collections::BTreeMap<String, Rational>,
    ) -> Result<Option<bool>, EvalError> {
        match self {
            BoolExpr::True => Ok(Some(true)),
            BoolExpr::False => Ok(Some(false)),
            BoolExpr::Cmp(a, op, b) => match (a.eval_exact(env)?, b.eval_exact(env)?) {
                (Some(x), Some(y)) => Ok(Some(op.holds_rat(&x, &y))),
                _ => Ok(None),
            },
            BoolExpr::Not(b) => Ok(b.eval_exact(env)?.map(|v| !v)),
            BoolExpr::And(a, b) => match (a.eval_exact(env)?, b.eval_exact(env)?) {
                (Some(x), Some(y)) => Ok(Some(x && y)),
                _ => Ok(None),
            },
            BoolExpr::Or(a, b) => match (a.eval_exact(env)?, b.eval_exact(env)?) {
                (Some(x), Some(y)) => Ok(Some(x || y)),
                _ => Ok(None),
            },
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(a, _, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            BoolExpr::Not(b) => b.free_vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }

    pub fn subst(&self, var: &str, replacement: &Expr) -> BoolExpr {
        match self {
            BoolExpr::True | BoolExpr::False => self.clone(),
            BoolExpr::Cmp(a, op, b) => BoolExpr::Cmp(
                Box::new(a.subst(var, replacement)),
                *op,
                Box::new(b.subst(var, replacement)),
            ),
            BoolExpr::Not(b) => BoolExpr::Not(Box::new(b.subst(var, replacement))),
            BoolExpr::And(a, b) => BoolExpr::And(
                Box::new(a.subst(var, replacement)),
                Box::new(b.subst(var, replacement)),
            ),
            BoolExpr::Or(a, b) => BoolExpr::Or(
                Box::new(a.subst(var, replacement)),
                Box::new(b.subst(var, replacement)),
            ),
        }
    }

    /// Topological closure of the described region: strict comparisons become
    /// weak ones. Negations are pushed down to comparisons first.
    pub fn closure(&self) -> BoolExpr {
        match self.push_not(false) {
            BoolExpr::Cmp(a, op, b) => {
                let closed = match op {
                    CmpOp::Lt => CmpOp::Le,
                    CmpOp::Gt => CmpOp::Ge,
                    other => other,
                };
                BoolExpr::Cmp(a, closed, b)
            }
            BoolExpr::And(a, b) => BoolExpr::And(Box::new(a.closure()), Box::new(b.closure())),
            BoolExpr::Or(a, b) => BoolExpr::Or(Box::new(a.closure()), Box::new(b.closure())),
            other => other,
        }
    }

    /// Push negations down to comparison leaves (`negate` tracks parity).
    fn push_not(&self, negate: bool) -> BoolExpr {
        match self {
            BoolExpr::True => {
                if negate {
                    BoolExpr::False
                } else {
                    BoolExpr::True
                }
            }
            BoolExpr::False => {
                if negate {
                    BoolExpr::True
                } else {
                    BoolExpr::False
                }
            }
            BoolExpr::Cmp(a, op, b) => {
                if !negate {
                    return self.clone();
                }
                let flipped = match op {
                    CmpOp::Lt => CmpOp::Ge,
                    CmpOp::Le => CmpOp::Gt,
                    CmpOp::Ge => CmpOp::Lt,
                    CmpOp::Gt => CmpOp::Le,
                    // `not (a = b)` has no comparison form here; keep the negation.
                    CmpOp::Eq => {
                        return BoolExpr::Not(Box::new(self.clone()));
                    }
                };
                BoolExpr::Cmp(a.clone(), flipped, b.clone())
            }
            BoolExpr::Not(inner) => inner.push_not(!negate),
            BoolExpr::And(a, b) => {
                let (l, r) = (a.push_not(negate), b.push_not(negate));
                if negate {
                    BoolExpr::Or(Box::new(l), Box::new(r))
                } else {
                    BoolExpr::And(Box::new(l), Box::new(r))
                }
            }
            BoolExpr::Or(a, b) => {
                let (l, r) = (a.push_not(negate), b.push_not(negate));
                if negate {
                    BoolExpr::And(Box::new(l), Box::new(r))
                } else {
                    BoolExpr::Or(Box::new(l), Box::new(r))
                }
            }
        }
    }
}

impl Process {
    /// The syntactic channel alphabet of the process.
    pub fn channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_channels(&mut out);
        out
    }

    fn collect_channels(&self, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip | Process::Assign(..) | Process::Sde(_) => {}
            Process::Input(chan, _) | Process::Output(chan, _) => {
                out.insert(chan.clone());
            }
            Process::Seq(a, b) | Process::Parallel(a, b) => {
                a.collect_channels(out);
                b.collect_channels(out);
            }
            Process::PChoice(a, _, b) => {
                a.collect_channels(out);
                b.collect_channels(out);
            }
            Process::Cond(_, p) | Process::Repeat(p) => p.collect_channels(out),
            Process::Interrupt(_, branches) => {
                for br in branches {
                    out.insert(br.event.chan().to_string());
                    br.body.collect_channels(out);
                }
            }
        }
    }

    /// All variable names mentioned anywhere in the process: assignment and
    /// input targets, continuous variables, and every variable read by an
    /// expression or guard.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip => {}
            Process::Assign(x, e) => {
                out.insert(x.clone());
                e.free_vars(out);
            }
            Process::Input(_, x) => {
                out.insert(x.clone());
            }
            Process::Output(_, e) => e.free_vars(out),
            Process::Seq(a, b) | Process::Parallel(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
            Process::PChoice(a, _, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
            Process::Cond(g, p) => {
                g.free_vars(out);
                p.collect_variables(out);
            }
            Process::Repeat(p) => p.collect_variables(out),
            Process::Sde(block) => block.collect_variables(out),
            Process::Interrupt(block, branches) => {
                block.collect_variables(out);
                for br in branches {
                    match &br.event {
                        CommEvent::In { var, .. } => {
                            out.insert(var.clone());
                        }
                        CommEvent::Out { expr, .. } => expr.free_vars(out),
                    }
                    br.body.collect_variables(out);
                }
            }
        }
    }

    /// Variables the process can write: assignment targets, input-bound
    /// variables, and continuous variables of its SDE blocks.
    pub fn written_variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_written(&mut out);
        out
    }

    fn collect_written(&self, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip | Process::Output(..) => {}
            Process::Assign(x, _) => {
                out.insert(x.clone());
            }
            Process::Input(_, x) => {
                out.insert(x.clone());
            }
            Process::Seq(a, b) | Process::Parallel(a, b) => {
                a.collect_written(out);
                b.collect_written(out);
            }
            Process::PChoice(a, _, b) => {
                a.collect_written(out);
                b.collect_written(out);
            }
            Process::Cond(_, p) | Process::Repeat(p) => p.collect_written(out),
            Process::Sde(block) => out.extend(block.vars.iter().cloned()),
            Process::Interrupt(block, branches) => {
                out.extend(block.vars.iter().cloned());
                for br in branches {
                    if let CommEvent::In { var, .. } = &br.event {
                        out.insert(var.clone());
                    }
                    br.body.collect_written(out);
                }
            }
        }
    }

    /// Channels used for input (`ch?`) anywhere in the process.
    pub fn input_channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_dir_channels(true, &mut out);
        out
    }

    /// Channels used for output (`ch!`) anywhere in the process.
    pub fn output_channels(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_dir_channels(false, &mut out);
        out
    }

    fn collect_dir_channels(&self, input: bool, out: &mut BTreeSet<String>) {
        match self {
            Process::Skip | Process::Assign(..) | Process::Sde(_) => {}
            Process::Input(chan, _) => {
                if input {
                    out.insert(chan.clone());
                }
            }
            Process::Output(chan, _) => {
                if !input {
                    out.insert(chan.clone());
                }
            }
            Process::Seq(a, b) | Process::Parallel(a, b) => {
                a.collect_dir_channels(input, out);
                b.collect_dir_channels(input, out);
            }
            Process::PChoice(a, _, b) => {
                a.collect_dir_channels(input, out);
                b.collect_dir_channels(input, out);
            }
            Process::Cond(_, p) | Process::Repeat(p) => p.collect_dir_channels(input, out),
            Process::Interrupt(_, branches) => {
                for br in branches {
                    match &br.event {
                        CommEvent::In { chan, .. } if input => {
                            out.insert(chan.clone());
                        }
                        CommEvent::Out { chan, .. } if !input => {
                            out.insert(chan.clone());
                        }
                        _ => {}
                    }
                    br.body.collect_dir_channels(input, out);
                }
            }
        }
    }
}

impl SdeBlock {
    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        out.extend(self.vars.iter().cloned());
        for e in &self.drift {
            e.free_vars(out);
        }
        for row in &self.diffusion {
            for e in row {
                e.free_vars(out);
            }
        }
        self.domain.free_vars(out);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::pretty::pretty_expr(self))
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::pretty::pretty_bool(self))
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::syntax::pretty::pretty(self))
    }
}
