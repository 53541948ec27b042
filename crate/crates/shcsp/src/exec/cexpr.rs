//! Slot-compiled expressions for the executor's hot loop.
//!
//! `Expr::eval` resolves variables through a `BTreeMap` lookup per node —
//! fine for one-shot evaluation, far too slow for millions of integrator
//! steps. Compilation interns every variable into a dense slot table once,
//! after which evaluation reads a `&[f64]` by index. The arithmetic mirrors
//! `Expr::eval` operation for operation (same fold order, same division and
//! finiteness checks), so both paths compute identical bit patterns.

use std::collections::BTreeMap;

use num::ToPrimitive;

use crate::syntax::ast::{BoolExpr, CmpOp, EvalError, Expr};

/// Dense variable table mapping names to slots in a `Vec<f64>` environment.
#[derive(Clone, Debug, Default)]
pub(crate) struct Slots {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Slots {
    pub(crate) fn new() -> Self {
        Slots::default()
    }

    /// Intern `name`, returning its slot.
    pub(crate) fn slot(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub(crate) fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub(crate) fn len(&self) -> usize {
        self.names.len()
    }

    pub(crate) fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CExpr {
    Const(f64),
    Var(usize),
    Neg(Box<CExpr>),
    Add(Box<CExpr>, Box<CExpr>),
    Sub(Box<CExpr>, Box<CExpr>),
    Mul(Box<CExpr>, Box<CExpr>),
    Div(Box<CExpr>, Box<CExpr>),
    Sin(Box<CExpr>),
    Cos(Box<CExpr>),
    Exp(Box<CExpr>),
    Sqrt(Box<CExpr>),
    Abs(Box<CExpr>),
    Sgn(Box<CExpr>),
    Min(Box<CExpr>, Box<CExpr>),
    Max(Box<CExpr>, Box<CExpr>),
    Piecewise(Vec<(CBool, CExpr)>, Box<CExpr>),
}

#[derive(Clone, Debug)]
pub(crate) enum CBool {
    True,
    False,
    Cmp(Box<CExpr>, CmpOp, Box<CExpr>),
    Not(Box<CBool>),
    And(Box<CBool>, Box<CBool>),
    Or(Box<CBool>, Box<CBool>),
}

pub(crate) fn compile_expr(e: &Expr, slots: &mut Slots) -> CExpr {
    let bin = |a: &Expr, b: &Expr, slots: &mut Slots| {
        (
            Box::new(compile_expr(a, slots)),
            Box::new(compile_expr(b, slots)),
        )
    };
    match e {
        Expr::Const(c) => CExpr::Const(c.to_f64().unwrap_or(f64::NAN)),
        Expr::Var(name) => CExpr::Var(slots.slot(name)),
        Expr::Pi => CExpr::Const(std::f64::consts::PI),
        Expr::Neg(a) => CExpr::Neg(Box::new(compile_expr(a, slots))),
        Expr::Add(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Div(a, b)
        }
        Expr::Sin(a) => CExpr::Sin(Box::new(compile_expr(a, slots))),
        Expr::Cos(a) => CExpr::Cos(Box::new(compile_expr(a, slots))),
        Expr::Exp(a) => CExpr::Exp(Box::new(compile_expr(a, slots))),
        Expr::Sqrt(a) => CExpr::Sqrt(Box::new(compile_expr(a, slots))),
        Expr::Abs(a) => CExpr::Abs(Box::new(compile_expr(a, slots))),
        Expr::Sgn(a) => CExpr::Sgn(Box::new(compile_expr(a, slots))),
        Expr::Min(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Min(a, b)
        }
        Expr::Max(a, b) => {
            let (a, b) = bin(a, b, slots);
            CExpr::Max(a, b)
        }
        Expr::Piecewise(arms, default) => CExpr::Piecewise(
            arms.iter()
                .map(|(g, v)| (compile_bool(g, slots), compile_expr(v, slots)))
                .collect(),
            Box::new(compile_expr(default, slots)),
        ),
    }
}

pub(crate) fn compile_bool(b: &BoolExpr, slots: &mut Slots) -> CBool {
    match b {
        BoolExpr::True => CBool::True,
        BoolExpr::False => CBool::False,
        BoolExpr::Cmp(a, op, c) => CBool::Cmp(
            Box::new(compile_expr(a, slots)),
            *op,
            Box::new(compile_expr(c, slots)),
        ),
        BoolExpr::Not(inner) => CBool::Not(Box::new(compile_bool(inner, slots))),
        BoolExpr::And(a, c) => CBool::And(
            Box::new(compile_bool(a, slots)),
            Box::new(compile_bool(c, slots)),
        ),
        BoolExpr::Or(a, c) => CBool::Or(
            Box::new(compile_bool(a, slots)),
            Box::new(compile_bool(c, slots)),
        ),
    }
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(op))
    }
}

impl CExpr {
    pub(crate) fn eval(&self, env: &[f64]) -> Result<f64, EvalError> {
        match self {
            CExpr::Const(c) => finite(*c, "const"),
            CExpr::Var(slot) => Ok(env[*slot]),
            CExpr::Neg(a) => Ok(-a.eval(env)?),
            CExpr::Add(a, b) => finite(a.eval(env)? + b.eval(env)?, "+"),
            CExpr::Sub(a, b) => finite(a.eval(env)? - b.eval(env)?, "-"),
            CExpr::Mul(a, b) => finite(a.eval(env)? * b.eval(env)?, "*"),
            CExpr::Div(a, b) => {
                let d = b.eval(env)?;
                if d == 0.0 {
                    return Err(EvalError::DivByZero);
                }
                finite(a.eval(env)? / d, "/")
            }
            CExpr::Sin(a) => Ok(a.eval(env)?.sin()),
            CExpr::Cos(a) => Ok(a.eval(env)?.cos()),
            CExpr::Exp(a) => finite(a.eval(env)?.exp(), "exp"),
            CExpr::Sqrt(a) => finite(a.eval(env)?.sqrt(), "sqrt"),
            CExpr::Abs(a) => Ok(a.eval(env)?.abs()),
            CExpr::Sgn(a) => {
                let v = a.eval(env)?;
                Ok(if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                })
            }
            CExpr::Min(a, b) => Ok(a.eval(env)?.min(b.eval(env)?)),
            CExpr::Max(a, b) => Ok(a.eval(env)?.max(b.eval(env)?)),
            CExpr::Piecewise(arms, default) => {
                for (guard, branch) in arms {
                    if guard.eval(env)? {
                        return branch.eval(env);
                    }
                }
                default.eval(env)
            }
        }
    }
}

impl CBool {
    pub(crate) fn eval(&self, env: &[f64]) -> Result<bool, EvalError> {
        match self {
            CBool::True => Ok(true),
            CBool::False => Ok(false),
            CBool::Cmp(a, op, b) => Ok(op.holds_f64(a.eval(env)?, b.eval(env)?)),
            CBool::Not(b) => Ok(!b.eval(env)?),
            CBool::And(a, b) => Ok(a.eval(env)? && b.eval(env)?),
            CBool::Or(a, b) => Ok(a.eval(env)? || b.eval(env)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse_bool, parse_expr};

    /// Both evaluation paths must agree bit for bit.
    #[test]
    fn compiled_matches_interpreted() {
        let cases = [
            "2*x + 1",
            "x*y - y/x",
            "sin(x)*cos(y) + exp(x/4)",
            "sqrt(abs(x*y)) + sgn(x - y)",
            "min(x, y)*max(x, 2) + pi",
            "piece(x > 0 -> -pi/4, x < 0 -> pi/4, 0)",
            "1/3 + x*0.0002",
        ];
        let points = [(1.7, -0.3), (-2.5, 4.0), (0.0, 1.0), (3.25, 3.25)];
        for src in cases {
            let expr = parse_expr(src).unwrap();
            let mut slots = Slots::new();
            let compiled = compile_expr(&expr, &mut slots);
            for (x, y) in points {
                let mut env = vec![0.0; slots.len()];
                let mut map = std::collections::BTreeMap::new();
                map.insert("x".to_string(), x);
                map.insert("y".to_string(), y);
                for (name, val) in &map {
                    if let Some(i) = slots.get(name) {
                        env[i] = *val;
                    }
                }
                let a = expr.eval(&map);
                let b = compiled.eval(&env);
                match (a, b) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(a.to_bits(), b.to_bits(), "{src} at ({x}, {y})")
                    }
                    (a, b) => assert_eq!(a, b, "{src} at ({x}, {y})"),
                }
            }
        }
    }

    #[test]
    fn compiled_bool_matches() {
        let b = parse_bool("x < 1 & not (y >= 2) | x = y").unwrap();
        let mut slots = Slots::new();
        let compiled = compile_bool(&b, &mut slots);
        for (x, y) in [(0.5, 1.0), (1.5, 2.5), (2.0, 2.0)] {
            let mut map = std::collections::BTreeMap::new();
            map.insert("x".to_string(), x);
            map.insert("y".to_string(), y);
            let mut env = vec![0.0; slots.len()];
            for (name, val) in &map {
                if let Some(i) = slots.get(name) {
                    env[i] = *val;
                }
            }
            assert_eq!(b.eval(&map).unwrap(), compiled.eval(&env).unwrap());
        }
    }

    #[test]
    fn division_by_zero_is_preserved() {
        let expr = parse_expr("1/x").unwrap();
        let mut slots = Slots::new();
        let compiled = compile_expr(&expr, &mut slots);
        assert_eq!(compiled.eval(&[0.0]), Err(EvalError::DivByZero));
    }

    #[test]
    fn slots_intern_stably() {
        let mut slots = Slots::new();
        assert_eq!(slots.slot("a"), 0);
        assert_eq!(slots.slot("b"), 1);
        assert_eq!(slots.slot("a"), 0);
        assert_eq!(slots.names(), &["a".to_string(), "b".to_string()]);
    }
}
