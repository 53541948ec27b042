//! Symbolic differentiation, conservative canonical simplification, and the
//! Lie derivative of a certificate function along an SDE block.
//!
//! Simplification folds constants and drops 0/1 units but never factors,
//! expands, or rewrites trigonometry. Canonical products order factors as
//! constant · variables (alphabetical) · other factors; canonical sums put
//! the constant last, so `L(y²)` for the planar model prints as
//! `2*v*y*sin(theta) + 1`.
//!
//! `diff` refuses the non-smooth primitives (`abs`, `sgn`, `min`, `max`,
//! `piece`) rather than differentiating them silently. The partial variants
//! differentiate `abs`/`sgn` away from their kinks (`d|g| = sgn(g)·dg`,
//! `d sgn(g) = 0`) and report the singular arguments `g`, whose zero sets
//! the caller must exclude.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::syntax::ast::{BoolExpr, Expr, Rational, SdeBlock};
use crate::syntax::pretty_expr;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("`{node}` is not differentiable: {kind} is not C¹ in its argument")]
    NonDifferentiable { kind: &'static str, node: String },
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Strict,
    /// Differentiate `abs`/`sgn` away from their singular set.
    Partial,
}

/// Symbolic partial derivative `∂e/∂v`, simplified.
pub fn diff(e: &Expr, v: &str) -> Result<Expr, DiffError> {
    let mut singular = Vec::new();
    let raw = d(e, v, Mode::Strict, &mut singular)?;
    Ok(simplify(&raw))
}

/// Like [`diff`], but valid only away from the returned singular arguments'
/// zero sets.
pub fn diff_partial(e: &Expr, v: &str) -> Result<(Expr, Vec<Expr>), DiffError> {
    let mut singular = Vec::new();
    let raw = d(e, v, Mode::Partial, &mut singular)?;
    Ok((simplify(&raw), dedup_exprs(singular)))
}

fn d(e: &Expr, v: &str, mode: Mode, singular: &mut Vec<Expr>) -> Result<Expr, DiffError> {
    let zero = || Expr::Const(Rational::zero());
    Ok(match e {
        Expr::Const(_) | Expr::Pi => zero(),
        Expr::Var(name) => {
            if name == v {
                Expr::Const(Rational::one())
            } else {
                zero()
            }
        }
        Expr::Neg(a) => Expr::Neg(Box::new(d(a, v, mode, singular)?)),
        Expr::Add(a, b) => Expr::Add(
            Box::new(d(a, v, mode, singular)?),
            Box::new(d(b, v, mode, singular)?),
        ),
        Expr::Sub(a, b) => Expr::Sub(
            Box::new(d(a, v, mode, singular)?),
            Box::new(d(b, v, mode, singular)?),
        ),
        Expr::Mul(a, b) => Expr::Add(
            Box::new(Expr::Mul(Box::new(d(a, v, mode, singular)?), b.clone())),
            Box::new(Expr::Mul(a.clone(), Box::new(d(b, v, mode, singular)?))),
        ),
        Expr::Div(a, b) => Expr::Div(
            Box::new(Expr::Sub(
                Box::new(Expr::Mul(Box::new(d(a, v, mode, singular)?), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(d(b, v, mode, singular)?))),
            )),
            Box::new(Expr::Mul(b.clone(), b.clone())),
        ),
        Expr::Sin(a) => Expr::Mul(Box::new(Expr::Cos(a.clone())), Box::new(d(a, v, mode, singular)?)),
        Expr::Cos(a) => Expr::Neg(Box::new(Expr::Mul(
            Box::new(Expr::Sin(a.clone())),
            Box::new(d(a, v, mode, singular)?),
        ))),
        Expr::Exp(a) => Expr::Mul(Box::new(Expr::Exp(a.clone())), Box::new(d(a, v, mode, singular)?)),
        Expr::Sqrt(a) => Expr::Div(
            Box::new(d(a, v, mode, singular)?),
            Box::new(Expr::Mul(
                Box::new(Expr::Const(Rational::from_integer(2.into()))),
                Box::new(Expr::Sqrt(a.clone())),
            )),
        ),
        Expr::Abs(a) => match mode {
            Mode::Strict => return Err(non_diff("abs", e)),
            Mode::Partial => {
                singular.push(a.as_ref().clone());
                Expr::Mul(Box::new(Expr::Sgn(a.clone())), Box::new(d(a, v, mode, singular)?))
            }
        },
        Expr::Sgn(a) => match mode {
            Mode::Strict => return Err(non_diff("sgn", e)),
            Mode::Partial => {
                singular.push(a.as_ref().clone());
                zero()
            }
        },
        Expr::Min(..) => return Err(non_diff("min", e)),
        Expr::Max(..) => return Err(non_diff("max", e)),
        Expr::Piecewise(..) => return Err(non_diff("piece", e)),
    })
}

fn non_diff(kind: &'static str, node: &Expr) -> DiffError {
    DiffError::NonDifferentiable { kind, node: pretty_expr(node) }
}

fn dedup_exprs(v: Vec<Expr>) -> Vec<Expr> {
    let set: BTreeSet<Expr> = v.into_iter().map(|e| simplify(&e)).collect();
    set.into_iter().collect()
}

/// Does `e` contain a node that is not C² (so [`diff`] would refuse it)?
pub fn non_smooth_node(e: &Expr) -> Option<&'static str> {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Pi => None,
        Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Sqrt(a) => {
            non_smooth_node(a)
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            non_smooth_node(a).or_else(|| non_smooth_node(b))
        }
        Expr::Abs(_) => Some("abs"),
        Expr::Sgn(_) => Some("sgn"),
        Expr::Min(..) => Some("min"),
        Expr::Max(..) => Some("max"),
        Expr::Piecewise(..) => Some("piece"),
    }
}

/// The Lie derivative `Lf = Σᵢ bᵢ ∂f/∂sᵢ + ½ Σᵢⱼ (σσᵀ)ᵢⱼ ∂²f/∂sᵢ∂sⱼ`
/// of `f` along the block's drift and diffusion, simplified.
pub fn lie_derivative(f: &Expr, block: &SdeBlock) -> Result<Expr, DiffError> {
    lie_impl(f, block, Mode::Strict).map(|(e, _)| e)
}

/// Partial-mode Lie derivative: also returns the singular arguments from
/// `abs`/`sgn` nodes of `f`, away from whose zero sets the result is valid.
pub fn lie_derivative_partial(f: &Expr, block: &SdeBlock) -> Result<(Expr, Vec<Expr>), DiffError> {
    lie_impl(f, block, Mode::Partial)
}

fn lie_impl(f: &Expr, block: &SdeBlock, mode: Mode) -> Result<(Expr, Vec<Expr>), DiffError> {
    let mut singular = Vec::new();
    let grads: Vec<Expr> = block
        .vars
        .iter()
        .map(|v| Ok(simplify(&d(f, v, mode, &mut singular)?)))
        .collect::<Result<_, DiffError>>()?;

    let mut terms: Vec<Expr> = Vec::new();
    for (b_i, grad_i) in block.drift.iter().zip(&grads) {
        terms.push(Expr::Mul(Box::new(b_i.clone()), Box::new(grad_i.clone())));
    }
    let half = Expr::Const(Rational::new(1.into(), 2.into()));
    for (i, grad_i) in grads.iter().enumerate() {
        for (j, v_j) in block.vars.iter().enumerate() {
            let hess_ij = d(grad_i, v_j, mode, &mut singular)?;
            // (σσᵀ)ᵢⱼ = Σₖ σᵢₖ σⱼₖ
            let mut a_ij: Option<Expr> = None;
            for k in 0..block.brownian_dim() {
                let prod = Expr::Mul(
                    Box::new(block.diffusion[i][k].clone()),
                    Box::new(block.diffusion[j][k].clone()),
                );
                a_ij = Some(match a_ij {
                    None => prod,
                    Some(acc) => Expr::Add(Box::new(acc), Box::new(prod)),
                });
            }
            if let Some(a_ij) = a_ij {
                terms.push(Expr::Mul(
                    Box::new(half.clone()),
                    Box::new(Expr::Mul(Box::new(a_ij), Box::new(hess_ij))),
                ));
            }
        }
    }

    let total = terms
        .into_iter()
        .reduce(|acc, t| Expr::Add(Box::new(acc), Box::new(t)))
        .unwrap_or(Expr::Const(Rational::zero()));
    Ok((simplify(&total), dedup_exprs(singular)))
}

// --- canonical simplification -----------------------------------------------

/// Conservatively simplify: fold constants, drop 0/1 units, merge like
/// terms, and order factors/terms canonically.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Pi => e.clone(),
        Expr::Add(..) | Expr::Sub(..) | Expr::Neg(..) => {
            let mut acc = Rational::zero();
            let mut terms: BTreeMap<Vec<Expr>, Rational> = BTreeMap::new();
            collect_sum(e, true, Rational::one(), &mut acc, &mut terms);
            rebuild_sum(acc, terms)
        }
        Expr::Mul(..) | Expr::Div(..) => {
            let mut coeff = Rational::one();
            let mut factors = Vec::new();
            collect_product(e, true, &mut coeff, &mut factors);
            rebuild_product(coeff, factors)
        }
        Expr::Sin(a) => fold_unary(Expr::Sin, simplify(a), |c| c.is_zero().then(Rational::zero)),
        Expr::Cos(a) => fold_unary(Expr::Cos, simplify(a), |c| c.is_zero().then(Rational::one)),
        Expr::Exp(a) => fold_unary(Expr::Exp, simplify(a), |c| c.is_zero().then(Rational::one)),
        Expr::Sqrt(a) => fold_unary(Expr::Sqrt, simplify(a), |c| {
            (c.is_zero() || c.is_one()).then(|| c.clone())
        }),
        Expr::Abs(a) => fold_unary(Expr::Abs, simplify(a), |c| Some(c.abs())),
        Expr::Sgn(a) => fold_unary(Expr::Sgn, simplify(a), |c| Some(c.signum())),
        Expr::Min(a, b) => fold_binary(Expr::Min, simplify(a), simplify(b), |x, y| x.min(y)),
        Expr::Max(a, b) => fold_binary(Expr::Max, simplify(a), simplify(b), |x, y| x.max(y)),
        Expr::Piecewise(arms, default) => {
            let mut out = Vec::new();
            for (guard, value) in arms {
                match simplify_bool(guard) {
                    BoolExpr::False => continue,
                    BoolExpr::True => {
                        // This arm always fires (once reached): it becomes
                        // the default and later arms are dead.
                        let value = simplify(value);
                        return if out.is_empty() {
                            value
                        } else {
                            Expr::Piecewise(out, Box::new(value))
                        };
                    }
                    guard => out.push((guard, simplify(value))),
                }
            }
            let default = simplify(default);
            if out.is_empty() {
                default
            } else {
                Expr::Piecewise(out, Box::new(default))
            }
        }
    }
}

/// Simplify the expressions inside a boolean formula, folding constant
/// comparisons and boolean units.
pub fn simplify_bool(b: &BoolExpr) -> BoolExpr {
    match b {
        BoolExpr::True => BoolExpr::True,
        BoolExpr::False => BoolExpr::False,
        BoolExpr::Cmp(l, op, r) => {
            let (l, r) = (simplify(l), simplify(r));
            if let (Expr::Const(a), Expr::Const(b)) = (&l, &r) {
                if op.holds_rat(a, b) {
                    return BoolExpr::True;
                }
                return BoolExpr::False;
            }
            BoolExpr::Cmp(Box::new(l), *op, Box::new(r))
        }
        BoolExpr::Not(inner) => match simplify_bool(inner) {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            inner => BoolExpr::Not(Box::new(inner)),
        },
        BoolExpr::And(a, b) => match (simplify_bool(a), simplify_bool(b)) {
            (BoolExpr::False, _) | (_, BoolExpr::False) => BoolExpr::False,
            (BoolExpr::True, x) | (x, BoolExpr::True) => x,
            (a, b) => BoolExpr::And(Box::new(a), Box::new(b)),
        },
        BoolExpr::Or(a, b) => match (simplify_bool(a), simplify_bool(b)) {
            (BoolExpr::True, _) | (_, BoolExpr::True) => BoolExpr::True,
            (BoolExpr::False, x) | (x, BoolExpr::False) => x,
            (a, b) => BoolExpr::Or(Box::new(a), Box::new(b)),
        },
    }
}

fn fold_unary(
    make: fn(Box<Expr>) -> Expr,
    arg: Expr,
    fold: impl Fn(&Rational) -> Option<Rational>,
) -> Expr {
    if let Expr::Const(c) = &arg {
        if let Some(v) = fold(c) {
            return Expr::Const(v);
        }
    }
    make(Box::new(arg))
}

fn fold_binary(
    make: fn(Box<Expr>, Box<Expr>) -> Expr,
    a: Expr,
    b: Expr,
    fold: impl Fn(Rational, Rational) -> Rational,
) -> Expr {
    if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
        return Expr::Const(fold(x.clone(), y.clone()));
    }
    make(Box::new(a), Box::new(b))
}

/// Accumulate `sign · e` into a constant plus like-term map. `raw` marks
/// unsimplified input; canonical subtrees re-enter with `raw = false`.
fn collect_sum(
    e: &Expr,
    raw: bool,
    sign: Rational,
    acc: &mut Rational,
    terms: &mut BTreeMap<Vec<Expr>, Rational>,
) {
    match e {
        Expr::Add(a, b) => {
            collect_sum(a, raw, sign.clone(), acc, terms);
            collect_sum(b, raw, sign, acc, terms);
        }
        Expr::Sub(a, b) => {
            collect_sum(a, raw, sign.clone(), acc, terms);
            collect_sum(b, raw, -sign, acc, terms);
        }
        Expr::Neg(a) => collect_sum(a, raw, -sign, acc, terms),
        Expr::Const(c) => *acc += sign * c.clone(),
        _ => {
            let mut coeff = sign;
            let mut factors = Vec::new();
            collect_product(e, raw, &mut coeff, &mut factors);
            if coeff.is_zero() {
                return;
            }
            if factors.is_empty() {
                // A product that folded to a constant joins the constant term.
                *acc += coeff;
                return;
            }
            factors.sort_by_cached_key(factor_key);
            *terms.entry(factors).or_insert_with(Rational::zero) += coeff;
        }
    }
}

/// Accumulate the factors of `e` into `coeff · Πfactors`.
fn collect_product(e: &Expr, raw: bool, coeff: &mut Rational, factors: &mut Vec<Expr>) {
    match e {
        Expr::Mul(a, b) => {
            collect_product(a, raw, coeff, factors);
            collect_product(b, raw, coeff, factors);
        }
        Expr::Neg(a) => {
            *coeff = -coeff.clone();
            collect_product(a, raw, coeff, factors);
        }
        Expr::Const(c) => *coeff *= c.clone(),
        Expr::Div(a, b) => {
            let den = if raw { simplify(b) } else { b.as_ref().clone() };
            match den {
                Expr::Const(c) if !c.is_zero() => {
                    *coeff /= c;
                    collect_product(a, raw, coeff, factors);
                }
                den => {
                    let num = if raw { simplify(a) } else { a.as_ref().clone() };
                    if num == Expr::Const(Rational::zero()) {
                        *coeff = Rational::zero();
                    } else {
                        // Division by zero (or by a symbolic denominator)
                        // stays opaque; evaluation will surface any error.
                        factors.push(Expr::Div(Box::new(num), Box::new(den)));
                    }
                }
            }
        }
        _ if raw => {
            let s = simplify(e);
            collect_product(&s, false, coeff, factors);
        }
        _ => factors.push(e.clone()),
    }
}

/// Factor ordering: variables and `pi` first (alphabetical), then everything
/// else by its rendering.
fn factor_key(f: &Expr) -> (u8, String) {
    let class = match f {
        Expr::Var(_) | Expr::Pi => 0,
        _ => 1,
    };
    (class, pretty_expr(f))
}

fn rebuild_product(coeff: Rational, mut factors: Vec<Expr>) -> Expr {
    if coeff.is_zero() || factors.is_empty() {
        return Expr::Const(coeff);
    }
    factors.sort_by_cached_key(factor_key);
    // The coefficient leads a left-nested chain, `((c*f1)*f2)*…`, which is
    // what both the parser and the printer treat as the plain `c*f1*f2*…`.
    let mut iter = factors.into_iter();
    let negate = (-coeff.clone()).is_one();
    let mut acc = if coeff.is_one() || negate {
        iter.next().expect("nonempty")
    } else {
        Expr::Const(coeff)
    };
    for f in iter {
        acc = Expr::Mul(Box::new(acc), Box::new(f));
    }
    if negate {
        Expr::Neg(Box::new(acc))
    } else {
        acc
    }
}

fn rebuild_sum(acc: Rational, terms: BTreeMap<Vec<Expr>, Rational>) -> Expr {
    let mut entries: Vec<(Vec<Expr>, Rational)> = terms
        .into_iter()
        .filter(|(_, coeff)| !coeff.is_zero())
        .collect();
    entries.sort_by_cached_key(|(factors, _)| {
        factors.iter().map(factor_key).collect::<Vec<_>>()
    });

    let mut out: Option<Expr> = None;
    for (factors, coeff) in entries {
        out = Some(match out {
            None => rebuild_product(coeff, factors),
            Some(lhs) => {
                if coeff.is_negative() {
                    Expr::Sub(Box::new(lhs), Box::new(rebuild_product(-coeff, factors)))
                } else {
                    Expr::Add(Box::new(lhs), Box::new(rebuild_product(coeff, factors)))
                }
            }
        });
    }
    match out {
        None => Expr::Const(acc),
        Some(lhs) if acc.is_zero() => lhs,
        Some(lhs) => {
            if acc.is_negative() {
                Expr::Sub(Box::new(lhs), Box::new(Expr::Const(-acc)))
            } else {
                Expr::Add(Box::new(lhs), Box::new(Expr::Const(acc)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_expr, parse_bool};

    fn e(src: &str) -> Expr {
        parse_expr(src).unwrap()
    }

    fn show(x: &Expr) -> String {
        pretty_expr(x)
    }

    #[test]
    fn derivative_of_a_square_is_linear() {
        assert_eq!(show(&diff(&e("y*y"), "y").unwrap()), "2*y");
    }

    #[test]
    fn product_with_a_constant_symbol() {
        assert_eq!(show(&diff(&e("sin(theta)*v"), "theta").unwrap()), "v*cos(theta)");
    }

    #[test]
    fn abs_is_refused_strictly_but_handled_partially() {
        let err = diff(&e("abs(y)"), "y").unwrap_err();
        assert!(matches!(err, DiffError::NonDifferentiable { kind: "abs", .. }));
        let (g, singular) = diff_partial(&e("abs(y)"), "y").unwrap();
        assert_eq!(show(&g), "sgn(y)");
        assert_eq!(singular, vec![e("y")]);
    }

    #[test]
    fn quotient_and_chain_rules_compose() {
        // d/dx (sin(x)/x) = (x·cos(x) − sin(x)) / x²
        let g = diff(&e("sin(x)/x"), "x").unwrap();
        for x in [0.7, 1.3, -2.1_f64] {
            let env = [("x".to_string(), x)].into_iter().collect::<std::collections::BTreeMap<_, _>>();
            let want = (x * x.cos() - x.sin()) / (x * x);
            assert!((g.eval(&env).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn simplification_is_conservative_and_canonical() {
        assert_eq!(show(&simplify(&e("0 + x*1 + 0*y"), )), "x");
        assert_eq!(show(&simplify(&e("x - x"))), "0");
        assert_eq!(show(&simplify(&e("2*x + 3*x"))), "5*x");
        assert_eq!(show(&simplify(&e("y*2*v"))), "2*v*y");
        assert_eq!(show(&simplify(&e("1 + sin(x)*0 + y"))), "y + 1");
        assert_eq!(show(&simplify(&e("x/1"))), "x");
        assert_eq!(show(&simplify(&e("x/4"))), "0.25*x");
        assert_eq!(show(&simplify(&e("x/3"))), "1/3*x");
        // No distribution over sums and no trigonometric rewriting.
        assert_eq!(show(&simplify(&e("2*(x + y)"))), "2*(x + y)");
        assert_eq!(show(&simplify(&e("sin(x)*sin(x) + cos(x)*cos(x)"))),
                   "cos(x)*cos(x) + sin(x)*sin(x)");
    }

    #[test]
    fn simplify_is_idempotent_on_samples() {
        for src in ["2*x + 3*x - y/2", "sin(x)*v - v*sin(x)", "(x + 1)*(y - 2)", "piece(x > 0 -> 1, 0)/3"] {
            let once = simplify(&e(src));
            assert_eq!(simplify(&once), once, "{src}");
        }
    }

    #[test]
    fn piecewise_guards_fold() {
        assert_eq!(show(&simplify(&e("piece(1 > 0 -> x, y)"))), "x");
        assert_eq!(show(&simplify(&e("piece(1 < 0 -> x, y)"))), "y");
        let kept = simplify(&e("piece(z > 0 -> x, y)"));
        assert!(matches!(kept, Expr::Piecewise(..)));
        assert_eq!(simplify_bool(&parse_bool("1 < 2 & x < 1").unwrap()),
                   parse_bool("x < 1").unwrap());
    }

    #[test]
    fn lie_of_a_constant_vanishes() {
        let block = sde("{d[s] = 1 dt + 1 dW & true}");
        assert_eq!(show(&lie_derivative(&e("3"), &block).unwrap()), "0");
    }

    #[test]
    fn one_dimensional_drift_gives_mu() {
        let block = sde("{d[s] = mu dt + sigma0 dW & true}");
        assert_eq!(show(&lie_derivative(&e("s"), &block).unwrap()), "mu");
    }

    #[test]
    fn planar_model_oracle() {
        let block = sde("{d[x, y] = [v*cos(theta), v*sin(theta)] dt + I2 dW & 0 <= x & x <= 5}");
        let lf = lie_derivative(&e("y*y"), &block).unwrap();
        assert_eq!(show(&lf), "2*v*y*sin(theta) + 1");
    }

    #[test]
    fn lie_is_linear_at_sample_points() {
        let block = sde("{d[x, y] = [y, x*y] dt + [[1, 0], [x, 2]] dW & true}");
        let f = e("x*x*y");
        let g = e("sin(x)*y");
        let lf = lie_derivative(&f, &block).unwrap();
        let lg = lie_derivative(&g, &block).unwrap();
        let combo = e("3*(x*x*y) - 2*(sin(x)*y)");
        let lcombo = lie_derivative(&combo, &block).unwrap();
        for (x, y) in [(0.3, 1.2), (-1.1, 0.4), (2.0, -0.7)] {
            let env: std::collections::BTreeMap<String, f64> =
                [("x".to_string(), x), ("y".to_string(), y)].into_iter().collect();
            let want = 3.0 * lf.eval(&env).unwrap() - 2.0 * lg.eval(&env).unwrap();
            let got = lcombo.eval(&env).unwrap();
            assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "({x},{y})");
        }
    }

    fn sde(src: &str) -> SdeBlock {
        match crate::syntax::parser::parse(src).unwrap() {
            crate::syntax::ast::Process::Sde(block) => block,
            other => panic!("expected a bare block, got {other:?}"),
        }
    }
}
