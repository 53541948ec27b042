//! Grid-based sign evidence for certificate premises.
//!
//! A sign check samples an expression on a regular grid over a box,
//! restricted to the points satisfying the domain predicate, and tests the
//! required sign exactly at every sampled point (no tolerance slack: a
//! strictly negative value fails a nonnegativity check no matter how small).
//! Passing is *evidence*, not proof — the grid can miss a violation between
//! its points — and results are labelled accordingly.

use std::collections::BTreeMap;

use crate::syntax::ast::{BoolExpr, Expr};

use super::CertError;

/// Required sign on the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    NonNeg,
    NonPos,
}

impl Sign {
    fn violated_by(self, value: f64) -> bool {
        match self {
            Sign::NonNeg => value < 0.0,
            Sign::NonPos => value > 0.0,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Sign::NonNeg => ">= 0",
            Sign::NonPos => "<= 0",
        }
    }
}

/// Outcome of a grid scan. `points` counts the grid points inside the
/// domain that were actually tested; `skipped` counts those excluded by the
/// domain predicate or a singular set.
#[derive(Clone, Debug, PartialEq)]
pub enum SignCheck {
    Passes { points: usize, skipped: usize },
    Counterexample { point: BTreeMap<String, f64>, value: f64 },
}

impl SignCheck {
    pub fn passed(&self) -> bool {
        matches!(self, SignCheck::Passes { .. })
    }
}

/// Check `e {>= 0 | <= 0}` on the part of the grid over `bounds` where
/// `domain` holds. `grid` is the number of samples per non-degenerate axis.
pub fn check_sign(
    e: &Expr,
    sign: Sign,
    domain: &BoolExpr,
    bounds: &BTreeMap<String, (f64, f64)>,
    grid: usize,
) -> Result<SignCheck, CertError> {
    check_sign_excluding(e, sign, domain, bounds, grid, &[])
}

/// Like [`check_sign`], but also skips any grid point where some expression
/// in `exclude` evaluates to exactly zero (the singular set of a partial
/// derivative). Points are visited in row-major grid order and the first
/// violation is reported.
pub fn check_sign_excluding(
    e: &Expr,
    sign: Sign,
    domain: &BoolExpr,
    bounds: &BTreeMap<String, (f64, f64)>,
    grid: usize,
    exclude: &[Expr],
) -> Result<SignCheck, CertError> {
    if grid < 2 {
        return Err(CertError::BadRequest("grid must have at least 2 points per axis".into()));
    }
    let mut axes: Vec<(&str, f64, f64, usize)> = Vec::new();
    let mut total: usize = 1;
    for (name, &(lo, hi)) in bounds {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(CertError::BadRequest(format!(
                "box for `{name}` must be a finite interval, got [{lo}, {hi}]"
            )));
        }
        let steps = if lo == hi { 1 } else { grid };
        axes.push((name, lo, hi, steps));
        total = total
            .checked_mul(steps)
            .filter(|&n| n <= 10_000_000)
            .ok_or_else(|| CertError::BadRequest("grid is too large (over 10^7 points)".into()))?;
    }
    if axes.is_empty() {
        return Err(CertError::BadRequest("box must name at least one variable".into()));
    }

    let mut env: BTreeMap<String, f64> = BTreeMap::new();
    let mut index = vec![0usize; axes.len()];
    let mut points = 0usize;
    let mut skipped = 0usize;
    loop {
        for (pos, &(name, lo, hi, steps)) in index.iter().zip(&axes) {
            let value = if steps == 1 {
                lo
            } else {
                lo + (hi - lo) * (*pos as f64) / ((steps - 1) as f64)
            };
            env.insert(name.to_string(), value);
        }

        let inside = domain.eval(&env).map_err(CertError::Eval)?;
        let singular = inside
            && exclude
                .iter()
                .map(|g| g.eval(&env).map(|v| v == 0.0))
                .collect::<Result<Vec<bool>, _>>()
                .map_err(CertError::Eval)?
                .into_iter()
                .any(|hit| hit);
        if inside && !singular {
            points += 1;
            let value = e.eval(&env).map_err(CertError::Eval)?;
            if !value.is_finite() {
                return Err(CertError::BadRequest(format!(
                    "expression is not finite at {}", render_point(&env)
                )));
            }
            if sign.violated_by(value) {
                return Ok(SignCheck::Counterexample { point: env, value });
            }
        } else {
            skipped += 1;
        }

        // Row-major odometer over the grid indices.
        let mut carry = axes.len();
        while carry > 0 {
            let axis = carry - 1;
            index[axis] += 1;
            if index[axis] < axes[axis].3 {
                break;
            }
            index[axis] = 0;
            carry -= 1;
        }
        if carry == 0 {
            break;
        }
    }
    Ok(SignCheck::Passes { points, skipped })
}

pub(super) fn render_point(env: &BTreeMap<String, f64>) -> String {
    let parts: Vec<String> = env.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    parts.join(", ")
}
