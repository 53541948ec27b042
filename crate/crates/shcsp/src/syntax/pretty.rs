//! Canonical pretty-printer.
//!
//! The printer produces text that parses back to the same tree, so
//! `parse . pretty . parse == parse`. Output follows a fixed canon:
//!
//! * `*` and `/` print tight (`2*x`), `+` and `-` spaced (`x + 1`);
//! * left-associative chains print flat (`a - b - c`), while a
//!   right-nested tree keeps its parentheses (`a - (b - c)`);
//! * rationals print as exact decimals when the denominator is of the
//!   form 2^a·5^b (`0.125`), and as fractions otherwise (`1/3`);
//! * an identity diffusion matrix prints as `In`, a scaled identity as
//!   `e*In`, a single-column matrix as a vector, and anything else as a
//!   row-major matrix literal.

use num::{BigInt, One, Signed, Zero};

use super::ast::{BoolExpr, CommEvent, Expr, InterruptBranch, Process, Rational, SdeBlock};

// Expression precedence levels: additive < multiplicative < unary < atom.
const P_ADD: u8 = 1;
const P_MUL: u8 = 2;
const P_UNARY: u8 = 3;
const P_ATOM: u8 = 4;

/// Render a rational exactly: decimal when finite, `n/d` otherwise.
pub(crate) fn rational_string(r: &Rational) -> String {
    let numer = r.numer();
    let denom = r.denom();
    if denom.is_one() {
        return numer.to_string();
    }
    let mut rest = denom.clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if rest.is_one() {
        let places = twos.max(fives);
        let scale = num::pow(BigInt::from(10), places);
        let scaled = (numer.abs() * scale) / denom;
        let mut digits = scaled.to_string();
        if digits.len() <= places {
            digits = format!("{:0>width$}", digits, width = places + 1);
        }
        let split = digits.len() - places;
        let sign = if numer.is_negative() { "-" } else { "" };
        format!("{sign}{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("{numer}/{denom}")
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => P_ADD,
        Expr::Mul(..) | Expr::Div(..) => P_MUL,
        Expr::Neg(_) => P_UNARY,
        Expr::Const(c) if c.is_negative() => P_UNARY,
        _ => P_ATOM,
    }
}

/// A leading `-` on the right of a binary operator reads badly and, after
/// `a - -b`, is easy to mistake for a typo; parenthesize it.
fn leads_with_minus(e: &Expr) -> bool {
    matches!(e, Expr::Neg(_)) || matches!(e, Expr::Const(c) if c.is_negative())
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let prec = expr_prec(e);
    if prec < min_prec {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
        return;
    }
    match e {
        Expr::Const(c) => out.push_str(&rational_string(c)),
        Expr::Var(name) => out.push_str(name),
        Expr::Pi => out.push_str("pi"),
        Expr::Neg(inner) => {
            out.push('-');
            if leads_with_minus(inner) {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            } else {
                write_expr(out, inner, P_UNARY);
            }
        }
        Expr::Add(l, r) => {
            write_expr(out, l, P_ADD);
            out.push_str(" + ");
            write_rhs(out, r, P_MUL);
        }
        Expr::Sub(l, r) => {
            write_expr(out, l, P_ADD);
            out.push_str(" - ");
            write_rhs(out, r, P_MUL);
        }
        Expr::Mul(l, r) => {
            write_expr(out, l, P_MUL);
            out.push('*');
            write_rhs(out, r, P_UNARY);
        }
        Expr::Div(l, r) => {
            write_expr(out, l, P_MUL);
            out.push('/');
            write_rhs(out, r, P_UNARY);
        }
        Expr::Sin(a) => write_call(out, "sin", &[a]),
        Expr::Cos(a) => write_call(out, "cos", &[a]),
        Expr::Exp(a) => write_call(out, "exp", &[a]),
        Expr::Sqrt(a) => write_call(out, "sqrt", &[a]),
        Expr::Abs(a) => write_call(out, "abs", &[a]),
        Expr::Sgn(a) => write_call(out, "sgn", &[a]),
        Expr::Min(a, b) => write_call(out, "min", &[a, b]),
        Expr::Max(a, b) => write_call(out, "max", &[a, b]),
        Expr::Piecewise(arms, default) => {
            out.push_str("piece(");
            for (guard, value) in arms {
                write_bool(out, guard, 0);
                out.push_str(" -> ");
                write_expr(out, value, 0);
                out.push_str(", ");
            }
            write_expr(out, default, 0);
            out.push(')');
        }
    }
}

fn write_rhs(out: &mut String, e: &Expr, min_prec: u8) {
    if leads_with_minus(e) {
        out.push('(');
        write_expr(out, e, 0);
        out.push(')');
    } else {
        write_expr(out, e, min_prec);
    }
}

fn write_call(out: &mut String, name: &str, args: &[&Expr]) {
    out.push_str(name);
    out.push('(');
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, arg, 0);
    }
    out.push(')');
}

// Boolean precedence: or < and < not < atom.
const B_OR: u8 = 1;
const B_AND: u8 = 2;
const B_NOT: u8 = 3;
const B_ATOM: u8 = 4;

fn bool_prec(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => B_OR,
        BoolExpr::And(..) => B_AND,
        BoolExpr::Not(_) => B_NOT,
        _ => B_ATOM,
    }
}

fn write_bool(out: &mut String, b: &BoolExpr, min_prec: u8) {
    let prec = bool_prec(b);
    if prec < min_prec {
        out.push('(');
        write_bool(out, b, 0);
        out.push(')');
        return;
    }
    match b {
        BoolExpr::True => out.push_str("true"),
        BoolExpr::False => out.push_str("false"),
        BoolExpr::Cmp(l, op, r) => {
            write_expr(out, l, 0);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(out, r, 0);
        }
        BoolExpr::Not(inner) => {
            out.push_str("not ");
            write_bool(out, inner, B_NOT);
        }
        BoolExpr::And(l, r) => {
            write_bool(out, l, B_AND);
            out.push_str(" & ");
            write_bool(out, r, B_NOT);
        }
        BoolExpr::Or(l, r) => {
            write_bool(out, l, B_OR);
            out.push_str(" | ");
            write_bool(out, r, B_AND);
        }
    }
}

fn write_block(out: &mut String, block: &SdeBlock) {
    out.push_str("{d[");
    out.push_str(&block.vars.join(","));
    out.push_str("] = ");
    if block.dim() == 1 {
        write_expr(out, &block.drift[0], 0);
    } else {
        out.push('[');
        for (i, e) in block.drift.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_expr(out, e, 0);
        }
        out.push(']');
    }
    out.push_str(" dt + ");
    write_diffusion(out, block);
    out.push_str(" dW & ");
    write_bool(out, &block.domain, 0);
    out.push('}');
}

/// The diagonal entry shared by every row of a scaled identity, if the
/// matrix has that shape.
fn uniform_diagonal(block: &SdeBlock) -> Option<&Expr> {
    let n = block.dim();
    if block.brownian_dim() != n || n < 2 {
        return None;
    }
    let zero = Expr::Const(Rational::zero());
    let first = &block.diffusion[0][0];
    for (i, row) in block.diffusion.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            if i == j {
                if entry != first {
                    return None;
                }
            } else if entry != &zero {
                return None;
            }
        }
    }
    Some(first)
}

fn write_diffusion(out: &mut String, block: &SdeBlock) {
    if let Some(diag) = uniform_diagonal(block) {
        if diag == &Expr::Const(Rational::one()) {
            out.push_str(&format!("I{}", block.dim()));
        } else {
            write_expr(out, diag, 0);
            out.push_str(&format!("*I{}", block.dim()));
        }
        return;
    }
    if block.dim() == 1 && block.brownian_dim() == 1 {
        write_expr(out, &block.diffusion[0][0], 0);
    } else if block.brownian_dim() == 1 {
        out.push('[');
        for (i, row) in block.diffusion.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_expr(out, &row[0], 0);
        }
        out.push(']');
    } else {
        out.push('[');
        for (i, row) in block.diffusion.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push('[');
            for (j, e) in row.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                write_expr(out, e, 0);
            }
            out.push(']');
        }
        out.push(']');
    }
}

fn write_branch(out: &mut String, branch: &InterruptBranch) {
    out.push_str(&rational_string(&branch.weight));
    out.push_str(": ");
    match &branch.event {
        CommEvent::In { chan, var } => {
            out.push_str(chan);
            out.push('?');
            out.push_str(var);
        }
        CommEvent::Out { chan, expr } => {
            out.push_str(chan);
            out.push('!');
            write_expr(out, expr, 0);
        }
    }
    out.push_str(" -> { ");
    write_par(out, &branch.body);
    out.push_str(" }");
}

/// Atoms whose concrete syntax can take a postfix `*` directly. An
/// assignment or output cannot: their trailing expression would absorb
/// the star as a multiplication.
fn star_safe(p: &Process) -> bool {
    matches!(
        p,
        Process::Skip
            | Process::Input(..)
            | Process::Sde(_)
            | Process::Interrupt(..)
            | Process::PChoice(..)
    )
}

fn write_par(out: &mut String, p: &Process) {
    if let Process::Parallel(l, r) = p {
        write_par(out, l);
        out.push_str(" || ");
        write_seq(out, r);
    } else {
        write_seq(out, p);
    }
}

fn write_seq(out: &mut String, p: &Process) {
    match p {
        Process::Parallel(..) => {
            out.push('(');
            write_par(out, p);
            out.push(')');
        }
        Process::Seq(first, rest) => {
            write_step(out, first);
            out.push_str("; ");
            write_seq(out, rest);
        }
        _ => write_step(out, p),
    }
}

fn write_step(out: &mut String, p: &Process) {
    match p {
        Process::Seq(..) | Process::Parallel(..) => {
            out.push('(');
            write_par(out, p);
            out.push(')');
        }
        Process::Repeat(inner) => {
            if star_safe(inner) {
                write_atom(out, inner);
            } else {
                out.push('(');
                write_par(out, inner);
                out.push(')');
            }
            out.push('*');
        }
        _ => write_atom(out, p),
    }
}

fn write_atom(out: &mut String, p: &Process) {
    match p {
        Process::Skip => out.push_str("skip"),
        Process::Assign(x, e) => {
            out.push_str(x);
            out.push_str(" := ");
            write_expr(out, e, 0);
        }
        Process::Input(chan, x) => {
            out.push_str(chan);
            out.push('?');
            out.push_str(x);
        }
        Process::Output(chan, e) => {
            out.push_str(chan);
            out.push('!');
            write_expr(out, e, 0);
        }
        Process::Cond(guard, body) => {
            write_bool(out, guard, 0);
            out.push_str(" -> { ");
            write_par(out, body);
            out.push_str(" }");
        }
        Process::PChoice(l, prob, r) => {
            out.push('(');
            write_par(out, l);
            out.push_str(" |");
            out.push_str(&rational_string(prob));
            out.push_str("| ");
            write_par(out, r);
            out.push(')');
        }
        Process::Sde(block) => write_block(out, block),
        Process::Interrupt(block, branches) => {
            write_block(out, block);
            out.push_str(" |> [");
            for (i, branch) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_branch(out, branch);
            }
            out.push(']');
        }
        Process::Seq(..) | Process::Parallel(..) | Process::Repeat(..) => {
            // write_step handles these; keep the function total anyway.
            write_step(out, p)
        }
    }
}

/// Render a process in canonical concrete syntax.
pub fn pretty(p: &Process) -> String {
    let mut out = String::new();
    write_par(&mut out, p);
    out
}

/// Render an arithmetic expression.
pub fn pretty_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

/// Render a boolean expression.
pub fn pretty_bool(b: &BoolExpr) -> String {
    let mut out = String::new();
    write_bool(&mut out, b, 0);
    out
}
