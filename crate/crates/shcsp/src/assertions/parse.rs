//! Concrete syntax for assertion formulas.
//!
//! ```text
//! prob    ::= pand ('|' pand)*
//! pand    ::= pnot ('&' pnot)*
//! pnot    ::= 'not' pnot | 'P' '(' formula ')' ('<'|'<='|'>'|'>=') rational
//!           | '(' prob ')'
//! formula ::= fand ('|' fand)*
//! fand    ::= fnot ('&' fnot)*
//! fnot    ::= 'not' fnot | fatom
//! fatom   ::= 'forall' IDENT 'in' '[' expr ',' expr ']' ('step' expr)? '.' formula
//!           | state 'at' expr
//!           | state 'during' '[' expr ',' expr ']'
//!           | state 'in' '[' expr ',' expr ']'
//!           | 'false' | 'true' | '(' formula ')'
//! state   ::= sand ('|' sand)*
//! sand    ::= snot ('&' snot)*
//! snot    ::= 'not' snot | satom
//! satom   ::= 'false' | 'true' | '(' state ')'
//!           | trace '.' IDENT ('?' | '!')
//!           | term ('<'|'<='|'='|'>='|'>') term
//! term    ::= 'tr' | trace | expr
//! trace   ::= titem ('+' titem)*
//! titem   ::= ('eps' | '<' IDENT '.' expr ',' expr '>' | '(' trace ')') '*'*
//! ```
//!
//! `at`, `during`, and `in` bind looser than the state connectives, so
//! `A | B at T` places the whole disjunction at `T`; parenthesise the `at`
//! formulas to combine them at the formula level. A quantifier body extends
//! as far right as possible. `forall … step …` builds an explicit value
//! grid and requires constant bounds; without `step` the quantifier ranges
//! over the run's recorded sample times. The words `forall`, `at`, `during`,
//! `in`, `step`, `P`, `eps`, and `tr` are reserved in formulas.

use num::{One, Zero};

use crate::syntax::ast::{CmpOp, Expr, Rational};
use crate::syntax::lexer::TokenKind;
use crate::syntax::parser::{ParseResult, Parser};
use crate::syntax::ParseError;

use super::{Formula, ProbFormula, ProbRel, StateFormula, Term, TraceExpr};
use crate::exec::Direction;

/// Parse a probability formula, e.g. `P(x = 1 at 0) >= 0.9`.
pub fn parse_prob_formula(text: &str) -> Result<ProbFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = prob_or(&mut p)?;
    p.expect_eof()?;
    Ok(f)
}

/// Parse a run formula, e.g. `forall t in [0, 1] . s <= t at t`.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = formula_or(&mut p)?;
    p.expect_eof()?;
    Ok(f)
}

/// Parse a state formula, e.g. `eps.ch? & x < 2`.
pub fn parse_state_formula(text: &str) -> Result<StateFormula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = state_or(&mut p)?;
    p.expect_eof()?;
    Ok(f)
}

fn is_word(p: &Parser, word: &str) -> bool {
    matches!(p.peek(), TokenKind::Ident(s) if s == word)
}

fn eat_word(p: &mut Parser, word: &str) -> bool {
    if is_word(p, word) {
        p.bump();
        true
    } else {
        false
    }
}

// --- probability formulas -------------------------------------------------

fn prob_or(p: &mut Parser) -> ParseResult<ProbFormula> {
    let mut left = prob_and(p)?;
    while p.eat(&TokenKind::Pipe) {
        let right = prob_and(p)?;
        left = ProbFormula::Or(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn prob_and(p: &mut Parser) -> ParseResult<ProbFormula> {
    let mut left = prob_not(p)?;
    while p.eat(&TokenKind::Amp) {
        let right = prob_not(p)?;
        // Conjunction is sugar: a & b ≡ ¬(¬a ∨ ¬b).
        left = ProbFormula::Not(Box::new(ProbFormula::Or(
            Box::new(ProbFormula::Not(Box::new(left))),
            Box::new(ProbFormula::Not(Box::new(right))),
        )));
    }
    Ok(left)
}

fn prob_not(p: &mut Parser) -> ParseResult<ProbFormula> {
    if p.eat(&TokenKind::KwNot) {
        return Ok(ProbFormula::Not(Box::new(prob_not(p)?)));
    }
    if p.eat(&TokenKind::LParen) {
        let inner = prob_or(p)?;
        p.expect(TokenKind::RParen)?;
        return Ok(inner);
    }
    if eat_word(p, "P") {
        p.expect(TokenKind::LParen)?;
        let formula = formula_or(p)?;
        p.expect(TokenKind::RParen)?;
        let rel = match p.peek() {
            TokenKind::Lt => ProbRel::Lt,
            TokenKind::Le => ProbRel::Le,
            TokenKind::Gt => ProbRel::Gt,
            TokenKind::Ge => ProbRel::Ge,
            _ => return Err(p.error("a probability comparison (`<`, `<=`, `>`, `>=`)")),
        };
        p.bump();
        let q = p.rational()?;
        if q < Rational::zero() || q > Rational::one() {
            return Err(p.malformed(format!("probability threshold {q} lies outside [0, 1]")));
        }
        return Ok(ProbFormula::Atom { formula: Box::new(formula), rel, p: q });
    }
    Err(p.error("`P(...)`, `not`, or `(`"))
}

// --- run formulas ----------------------------------------------------------

fn formula_or(p: &mut Parser) -> ParseResult<Formula> {
    let mut left = formula_and(p)?;
    while p.eat(&TokenKind::Pipe) {
        let right = formula_and(p)?;
        left = Formula::Or(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn formula_and(p: &mut Parser) -> ParseResult<Formula> {
    let mut left = formula_not(p)?;
    while p.eat(&TokenKind::Amp) {
        let right = formula_not(p)?;
        left = Formula::and(left, right);
    }
    Ok(left)
}

fn formula_not(p: &mut Parser) -> ParseResult<Formula> {
    if p.eat(&TokenKind::KwNot) {
        return Ok(Formula::Not(Box::new(formula_not(p)?)));
    }
    formula_atom(p)
}

fn formula_atom(p: &mut Parser) -> ParseResult<Formula> {
    if is_word(p, "forall") {
        return forall_formula(p);
    }
    let mark = p.save();
    let paren_lead = p.peek() == &TokenKind::LParen;
    match state_or(p) {
        Ok(s) => {
            if eat_word(p, "at") {
                let t = p.expr()?;
                Ok(Formula::at(s, t))
            } else if eat_word(p, "during") {
                let (lo, hi) = bracket_range(p)?;
                Ok(Formula::during(s, lo, hi))
            } else if eat_word(p, "in") {
                let (lo, hi) = bracket_range(p)?;
                Ok(Formula::within(s, lo, hi))
            } else if s == StateFormula::False {
                Ok(Formula::False)
            } else if s == StateFormula::truth() {
                Ok(Formula::truth())
            } else if paren_lead {
                parenthesised_formula(p, mark)
            } else {
                Err(p.error("`at`, `during`, or `in` after a state formula"))
            }
        }
        Err(e) => {
            if paren_lead {
                parenthesised_formula(p, mark)
            } else {
                Err(e)
            }
        }
    }
}

fn parenthesised_formula(p: &mut Parser, mark: usize) -> ParseResult<Formula> {
    p.restore(mark);
    p.expect(TokenKind::LParen)?;
    let f = formula_or(p)?;
    p.expect(TokenKind::RParen)?;
    Ok(f)
}

fn forall_formula(p: &mut Parser) -> ParseResult<Formula> {
    p.bump(); // forall
    let var = p.expect_ident("a quantified variable")?;
    if !eat_word(p, "in") {
        return Err(p.error("`in`"));
    }
    let (lo, hi) = bracket_range(p)?;
    let step = if eat_word(p, "step") { Some(p.expr()?) } else { None };
    p.expect(TokenKind::Dot)?;
    let body = Box::new(formula_or(p)?);
    match step {
        None => Ok(Formula::ForallTime { var, lo, hi, body }),
        Some(step) => {
            let grid = constant_grid(p, &lo, &hi, &step)?;
            Ok(Formula::ForallNum { var, grid, body })
        }
    }
}

fn constant_grid(p: &Parser, lo: &Expr, hi: &Expr, step: &Expr) -> ParseResult<Vec<f64>> {
    let empty = std::collections::BTreeMap::new();
    let eval = |e: &Expr| {
        e.eval(&empty)
            .map_err(|_| p.malformed("grid bounds and step must be constant"))
    };
    let lo = eval(lo)?;
    let hi = eval(hi)?;
    let step = eval(step)?;
    if step.is_nan() || step <= 0.0 {
        return Err(p.malformed("grid step must be positive"));
    }
    if (hi - lo) / step > 1e6 {
        return Err(p.malformed("grid has more than 10^6 points"));
    }
    let tol = 1e-9 * hi.abs().max(1.0);
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let v = lo + (k as f64) * step;
        if v > hi + tol {
            break;
        }
        grid.push(v);
        k += 1;
    }
    Ok(grid)
}

fn bracket_range(p: &mut Parser) -> ParseResult<(Expr, Expr)> {
    p.expect(TokenKind::LBracket)?;
    let lo = p.expr()?;
    p.expect(TokenKind::Comma)?;
    let hi = p.expr()?;
    p.expect(TokenKind::RBracket)?;
    Ok((lo, hi))
}

// --- state formulas ---------------------------------------------------------

fn state_or(p: &mut Parser) -> ParseResult<StateFormula> {
    let mut left = state_and(p)?;
    while p.eat(&TokenKind::Pipe) {
        let right = state_and(p)?;
        left = StateFormula::Or(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn state_and(p: &mut Parser) -> ParseResult<StateFormula> {
    let mut left = state_not(p)?;
    while p.eat(&TokenKind::Amp) {
        let right = state_not(p)?;
        left = StateFormula::and(left, right);
    }
    Ok(left)
}

fn state_not(p: &mut Parser) -> ParseResult<StateFormula> {
    if p.eat(&TokenKind::KwNot) {
        return Ok(StateFormula::Not(Box::new(state_not(p)?)));
    }
    state_atom(p)
}

fn state_atom(p: &mut Parser) -> ParseResult<StateFormula> {
    match p.peek() {
        TokenKind::KwFalse => {
            p.bump();
            Ok(StateFormula::False)
        }
        TokenKind::KwTrue => {
            p.bump();
            Ok(StateFormula::truth())
        }
        TokenKind::LParen => {
            // `(` may open a parenthesised state formula or a grouped trace
            // expression (e.g. `(<a.1,0> + <b.2,1>)*.c?`); try the formula
            // reading first.
            let mark = p.save();
            let attempt: ParseResult<StateFormula> = (|| {
                p.expect(TokenKind::LParen)?;
                let s = state_or(p)?;
                p.expect(TokenKind::RParen)?;
                Ok(s)
            })();
            match attempt {
                Ok(s) => Ok(s),
                Err(_) => {
                    p.restore(mark);
                    relation_or_readiness(p)
                }
            }
        }
        _ => relation_or_readiness(p),
    }
}

/// The three sorts a term can take before type checking.
enum PTerm {
    Num(Expr),
    Trace(TraceExpr),
    Tr,
}

impl PTerm {
    fn is_trace(&self) -> bool {
        !matches!(self, PTerm::Num(_))
    }

    fn into_term(self) -> Term {
        match self {
            PTerm::Num(e) => Term::Num(e),
            PTerm::Trace(h) => Term::Trace(h),
            PTerm::Tr => Term::Tr,
        }
    }
}

fn relation_or_readiness(p: &mut Parser) -> ParseResult<StateFormula> {
    let lhs = assert_term(p)?;
    if p.peek() == &TokenKind::Dot {
        let PTerm::Trace(prefix) = lhs else {
            return Err(p.malformed("a readiness prefix must be a trace expression"));
        };
        p.bump();
        let chan = p.expect_ident("a channel name")?;
        let direction = match p.peek() {
            TokenKind::Question => Direction::Input,
            TokenKind::Bang => Direction::Output,
            _ => return Err(p.error("`?` or `!`")),
        };
        p.bump();
        return Ok(StateFormula::Ready { prefix, chan, direction });
    }
    let op = match p.peek() {
        TokenKind::Lt => CmpOp::Lt,
        TokenKind::Le => CmpOp::Le,
        TokenKind::EqSign => CmpOp::Eq,
        TokenKind::Ge => CmpOp::Ge,
        TokenKind::Gt => CmpOp::Gt,
        _ => return Err(p.error("a comparison operator or `.`")),
    };
    p.bump();
    let rhs = assert_term(p)?;
    if lhs.is_trace() != rhs.is_trace() {
        return Err(p.malformed("cannot compare a trace with a number"));
    }
    if lhs.is_trace() && op != CmpOp::Eq {
        return Err(p.malformed("traces admit only `=` comparison"));
    }
    Ok(StateFormula::Cmp(lhs.into_term(), op, rhs.into_term()))
}

fn assert_term(p: &mut Parser) -> ParseResult<PTerm> {
    if is_word(p, "tr") {
        p.bump();
        return Ok(PTerm::Tr);
    }
    if is_word(p, "eps") || p.peek() == &TokenKind::Lt {
        return Ok(PTerm::Trace(trace_concat(p)?));
    }
    if p.peek() == &TokenKind::LParen {
        // Grouping is ambiguous between numbers and traces; a numeric
        // reading wins when both parse.
        let mark = p.save();
        if let Ok(e) = p.expr() {
            return Ok(PTerm::Num(e));
        }
        p.restore(mark);
        return Ok(PTerm::Trace(trace_concat(p)?));
    }
    Ok(PTerm::Num(p.expr()?))
}

fn trace_concat(p: &mut Parser) -> ParseResult<TraceExpr> {
    let mut left = trace_atom(p)?;
    while p.eat(&TokenKind::Plus) {
        let right = trace_atom(p)?;
        left = TraceExpr::Concat(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn trace_atom(p: &mut Parser) -> ParseResult<TraceExpr> {
    let mut atom = if eat_word(p, "eps") {
        TraceExpr::Empty
    } else if p.eat(&TokenKind::LParen) {
        let inner = trace_concat(p)?;
        p.expect(TokenKind::RParen)?;
        inner
    } else {
        p.expect(TokenKind::Lt)?;
        let chan = p.expect_ident("a channel name")?;
        p.expect(TokenKind::Dot)?;
        let value = p.expr()?;
        p.expect(TokenKind::Comma)?;
        let time = p.expr()?;
        p.expect(TokenKind::Gt)?;
        TraceExpr::Item { chan, value, time }
    };
    while p.eat(&TokenKind::Star) {
        atom = TraceExpr::Star(Box::new(atom));
    }
    Ok(atom)
}
