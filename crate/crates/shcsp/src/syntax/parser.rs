//! Recursive-descent parser for the SHCSP concrete grammar.
//!
//! ```text
//! program   := parallel EOF
//! parallel  := sequence ("||" sequence)*
//! sequence  := step (";" sequence)?                 (right associative)
//! step      := atom "*"?                            (postfix repetition)
//! atom      := "skip"
//!            | IDENT ":=" expr
//!            | IDENT "?" IDENT
//!            | IDENT "!" expr
//!            | bool "->" "{" parallel "}"
//!            | "(" parallel "|" prob "|" parallel ")"
//!            | "(" parallel ")"
//!            | sde ("|>" "[" branch ("," branch)* "]")?
//! sde       := "{" "d" "[" IDENT ("," IDENT)* "]" "=" drift "dt"
//!                  "+" diffusion "dW" "&" bool "}"
//! drift     := "[" expr ("," expr)* "]" | expr ("*" "[" expr ("," expr)* "]")?
//! diffusion := "I" N | expr ("*" "I" N)? | "[" expr ("," expr)* "]"
//!            | "[" "[" expr... "]" ("," "[" expr... "]")* "]"
//! branch    := prob ":" (IDENT "?" IDENT | IDENT "!" expr) "->" "{" parallel "}"
//! prob      := NUMBER ("/" NUMBER)?
//! ```
//!
//! Expressions use the usual precedence (`+ -` < `* /` < unary `-`), with
//! functions `sin cos exp sqrt abs sgn min max`, the constant `pi`, and
//! `piece(guard -> expr, ..., default)`. Boolean expressions combine
//! comparisons (`< <= = >= >`) with `&`, `|`, and `not`.
//!
//! Two constructs need backtracking: an atom starting with `(` may be a
//! parenthesized process or the guard of a conditional, and a `piece` arm may
//! be a guarded branch or the trailing default expression. The parser saves
//! and restores its cursor in those places; everything else is LL(2).

use num::{One, Signed, Zero};
use thiserror::Error;

use super::ast::{
    BoolExpr, CmpOp, CommEvent, Expr, InterruptBranch, Process, Rational, SdeBlock,
};
use super::lexer::{tokenize, Token, TokenKind};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("{line}:{col}: unexpected character `{ch}`")]
    UnexpectedChar { ch: char, line: u32, col: u32 },
    #[error("{line}:{col}: invalid numeric literal `{text}`")]
    InvalidNumber { text: String, line: u32, col: u32 },
    #[error("{line}:{col}: expected {expected}, found {found}")]
    UnexpectedToken {
        expected: String,
        found: String,
        line: u32,
        col: u32,
    },
    #[error("{line}:{col}: unknown function name `{name}`")]
    UnknownFunction { name: String, line: u32, col: u32 },
    #[error("{line}:{col}: `{name}` expects {expected} argument(s), found {found}")]
    BadArity {
        name: String,
        expected: usize,
        found: usize,
        line: u32,
        col: u32,
    },
    #[error("{line}:{col}: {message}")]
    Malformed {
        message: String,
        line: u32,
        col: u32,
    },
}

pub type ParseResult<T> = Result<T, ParseError>;

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> ParseResult<Self> {
        Ok(Parser {
            tokens: tokenize(src)?,
            pos: 0,
        })
    }

    pub(crate) fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    pub(crate) fn peek_at(&self, offset: usize) -> &TokenKind {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.col)
    }

    pub(crate) fn bump(&mut self) -> TokenKind {
        let kind = self.tokens[self.pos].kind.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        kind
    }

    pub(crate) fn save(&self) -> usize {
        self.pos
    }

    pub(crate) fn restore(&mut self, mark: usize) {
        self.pos = mark;
    }

    pub(crate) fn error(&self, expected: &str) -> ParseError {
        let (line, col) = self.here();
        ParseError::UnexpectedToken {
            expected: expected.to_string(),
            found: self.peek().describe(),
            line,
            col,
        }
    }

    pub(crate) fn malformed(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Malformed {
            message: message.into(),
            line,
            col,
        }
    }

    pub(crate) fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, kind: TokenKind) -> ParseResult<()> {
        if self.peek() == &kind {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&kind.describe()))
        }
    }

    pub(crate) fn expect_ident(&mut self, what: &str) -> ParseResult<String> {
        match self.peek() {
            TokenKind::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => Err(self.error(what)),
        }
    }

    pub(crate) fn expect_eof(&mut self) -> ParseResult<()> {
        if self.peek() == &TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    // ---- processes ------------------------------------------------------

    pub(crate) fn parallel(&mut self) -> ParseResult<Process> {
        let mut p = self.sequence()?;
        while self.eat(&TokenKind::PipePipe) {
            let q = self.sequence()?;
            p = Process::Parallel(Box::new(p), Box::new(q));
        }
        Ok(p)
    }

    fn sequence(&mut self) -> ParseResult<Process> {
        let first = self.step()?;
        if self.eat(&TokenKind::Semi) {
            let rest = self.sequence()?;
            Ok(Process::Seq(Box::new(first), Box::new(rest)))
        } else {
            Ok(first)
        }
    }

    fn step(&mut self) -> ParseResult<Process> {
        let atom = self.atom()?;
        if self.eat(&TokenKind::Star) {
            Ok(Process::Repeat(Box::new(atom)))
        } else {
            Ok(atom)
        }
    }

    fn atom(&mut self) -> ParseResult<Process> {
        match self.peek().clone() {
            TokenKind::KwSkip => {
                self.bump();
                Ok(Process::Skip)
            }
            TokenKind::Ident(name) => match self.peek_at(1) {
                TokenKind::Assign => {
                    self.bump();
                    self.bump();
                    let e = self.expr()?;
                    Ok(Process::Assign(name, e))
                }
                TokenKind::Question => {
                    self.bump();
                    self.bump();
                    let var = self.expect_ident("input variable")?;
                    Ok(Process::Input(name, var))
                }
                TokenKind::Bang => {
                    self.bump();
                    self.bump();
                    let e = self.expr()?;
                    Ok(Process::Output(name, e))
                }
                _ => self.conditional(),
            },
            TokenKind::LParen => {
                // Either a parenthesized process / probabilistic choice, or
                // the guard of a conditional starting with `(`.
                let mark = self.save();
                match self.paren_process() {
                    Ok(p) => Ok(p),
                    Err(_) => {
                        self.restore(mark);
                        self.conditional()
                    }
                }
            }
            TokenKind::LBrace => self.sde_atom(),
            TokenKind::KwNot
            | TokenKind::KwTrue
            | TokenKind::KwFalse
            | TokenKind::Number(_)
            | TokenKind::KwPi
            | TokenKind::KwPiece
            | TokenKind::Minus => self.conditional(),
            _ => Err(self.error("a process")),
        }
    }

    fn conditional(&mut self) -> ParseResult<Process> {
        let guard = self.bool_expr()?;
        self.expect(TokenKind::Arrow)?;
        self.expect(TokenKind::LBrace)?;
        let body = self.parallel()?;
        self.expect(TokenKind::RBrace)?;
        Ok(Process::Cond(guard, Box::new(body)))
    }

    fn paren_process(&mut self) -> ParseResult<Process> {
        self.expect(TokenKind::LParen)?;
        let left = self.parallel()?;
        if self.eat(&TokenKind::Pipe) {
            let prob = self.rational()?;
            self.expect(TokenKind::Pipe)?;
            let right = self.parallel()?;
            self.expect(TokenKind::RParen)?;
            Ok(Process::PChoice(Box::new(left), prob, Box::new(right)))
        } else {
            self.expect(TokenKind::RParen)?;
            Ok(left)
        }
    }

    /// A probability or weight: `NUMBER` or `NUMBER / NUMBER`.
    pub(crate) fn rational(&mut self) -> ParseResult<Rational> {
        let num = match self.peek().clone() {
            TokenKind::Number(n) => {
                self.bump();
                n
            }
            _ => return Err(self.error("a number")),
        };
        if self.eat(&TokenKind::Slash) {
            match self.peek().clone() {
                TokenKind::Number(d) => {
                    self.bump();
                    if d.is_zero() {
                        return Err(self.malformed("zero denominator"));
                    }
                    Ok(num / d)
                }
                _ => Err(self.error("a denominator")),
            }
        } else {
            Ok(num)
        }
    }

    fn sde_atom(&mut self) -> ParseResult<Process> {
        let block = self.sde_block()?;
        if self.eat(&TokenKind::PipeGt) {
            self.expect(TokenKind::LBracket)?;
            let mut branches = Vec::new();
            loop {
                branches.push(self.interrupt_branch()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RBracket)?;
            Ok(Process::Interrupt(block, branches))
        } else {
            Ok(Process::Sde(block))
        }
    }

    fn interrupt_branch(&mut self) -> ParseResult<InterruptBranch> {
        let weight = self.rational()?;
        if !weight.is_positive() {
            return Err(self.malformed("interrupt weight must be positive"));
        }
        self.expect(TokenKind::Colon)?;
        let chan = self.expect_ident("channel name")?;
        let event = match self.peek() {
            TokenKind::Question => {
                self.bump();
                let var = self.expect_ident("input variable")?;
                CommEvent::In { chan, var }
            }
            TokenKind::Bang => {
                self.bump();
                let expr = self.expr()?;
                CommEvent::Out { chan, expr }
            }
            _ => return Err(self.error("`?` or `!`")),
        };
        self.expect(TokenKind::Arrow)?;
        self.expect(TokenKind::LBrace)?;
        let body = self.parallel()?;
        self.expect(TokenKind::RBrace)?;
        Ok(InterruptBranch {
            weight,
            event,
            body,
        })
    }

    pub(crate) fn sde_block(&mut self) -> ParseResult<SdeBlock> {
        self.expect(TokenKind::LBrace)?;
        match self.peek() {
            TokenKind::Ident(d) if d == "d" => {
                self.bump();
            }
            _ => return Err(self.error("`d[`")),
        }
        self.expect(TokenKind::LBracket)?;
        let mut vars = vec![self.expect_ident("continuous variable")?];
        while self.eat(&TokenKind::Comma) {
            vars.push(self.expect_ident("continuous variable")?);
        }
        self.expect(TokenKind::RBracket)?;
        self.expect(TokenKind::EqSign)?;
        let drift = self.drift_vector(vars.len())?;
        self.expect(TokenKind::KwDt)?;
        self.expect(TokenKind::Plus)?;
        let diffusion = self.diffusion_matrix(vars.len())?;
        self.expect(TokenKind::KwDW)?;
        self.expect(TokenKind::Amp)?;
        let domain = self.bool_expr()?;
        self.expect(TokenKind::RBrace)?;
        Ok(SdeBlock {
            vars,
            drift,
            diffusion,
            domain,
        })
    }

    fn expr_vector(&mut self) -> ParseResult<Vec<Expr>> {
        self.expect(TokenKind::LBracket)?;
        let mut out = vec![self.expr()?];
        while self.eat(&TokenKind::Comma) {
            out.push(self.expr()?);
        }
        self.expect(TokenKind::RBracket)?;
        Ok(out)
    }

    fn drift_vector(&mut self, dim: usize) -> ParseResult<Vec<Expr>> {
        let drift = if self.peek() == &TokenKind::LBracket {
            self.expr_vector()?
        } else {
            let scalar = self.expr()?;
            if self.peek() == &TokenKind::Star && self.peek_at(1) == &TokenKind::LBracket {
                // `v * [e1, ..., en]` distributes the scalar over the vector.
                self.bump();
                self.expr_vector()?
                    .into_iter()
                    .map(|e| Expr::Mul(Box::new(scalar.clone()), Box::new(e)))
                    .collect()
            } else {
                vec![scalar]
            }
        };
        if drift.len() != dim {
            return Err(self.malformed(format!(
                "drift has {} component(s) for {} variable(s)",
                drift.len(),
                dim
            )));
        }
        Ok(drift)
    }

    fn identity_matrix(dim: usize, scale: Option<Expr>) -> Vec<Vec<Expr>> {
        (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        if i == j {
                            scale
                                .clone()
                                .unwrap_or_else(|| Expr::Const(Rational::one()))
                        } else {
                            Expr::Const(Rational::zero())
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn diffusion_matrix(&mut self, dim: usize) -> ParseResult<Vec<Vec<Expr>>> {
        let matrix: Vec<Vec<Expr>> = match self.peek().clone() {
            TokenKind::IdentityMat(n) => {
                self.bump();
                if n != dim {
                    return Err(self.malformed(format!(
                        "identity diffusion I{n} does not match {dim} variable(s)"
                    )));
                }
                Self::identity_matrix(dim, None)
            }
            TokenKind::LBracket => {
                if self.peek_at(1) == &TokenKind::LBracket {
                    // Full matrix literal: one row per continuous variable.
                    self.bump();
                    let mut rows = vec![self.expr_vector()?];
                    while self.eat(&TokenKind::Comma) {
                        rows.push(self.expr_vector()?);
                    }
                    self.expect(TokenKind::RBracket)?;
                    rows
                } else {
                    // Column vector: d rows, one Brownian dimension.
                    self.expr_vector()?.into_iter().map(|e| vec![e]).collect()
                }
            }
            _ => {
                let scalar = self.expr()?;
                if self.peek() == &TokenKind::Star
                    && matches!(self.peek_at(1), TokenKind::IdentityMat(_))
                {
                    self.bump();
                    let n = match self.bump() {
                        TokenKind::IdentityMat(n) => n,
                        _ => unreachable!("checked above"),
                    };
                    if n != dim {
                        return Err(self.malformed(format!(
                            "identity diffusion I{n} does not match {dim} variable(s)"
                        )));
                    }
                    Self::identity_matrix(dim, Some(scalar))
                } else {
                    // A bare scalar is the 1x1 matrix.
                    vec![vec![scalar]]
                }
            }
        };
        if matrix.len() != dim {
            return Err(self.malformed(format!(
                "diffusion has {} row(s) for {} variable(s)",
                matrix.len(),
                dim
            )));
        }
        let width = matrix[0].len();
        if width == 0 || matrix.iter().any(|row| row.len() != width) {
            return Err(self.malformed("diffusion rows must have equal, nonzero length"));
        }
        Ok(matrix)
    }

    // ---- boolean expressions --------------------------------------------

    pub(crate) fn bool_expr(&mut self) -> ParseResult<BoolExpr> {
        let mut left = self.bool_and()?;
        while self.eat(&TokenKind::Pipe) {
            let right = self.bool_and()?;
            left = BoolExpr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn bool_and(&mut self) -> ParseResult<BoolExpr> {
        let mut left = self.bool_not()?;
        while self.eat(&TokenKind::Amp) {
            let right = self.bool_not()?;
            left = BoolExpr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn bool_not(&mut self) -> ParseResult<BoolExpr> {
        if self.eat(&TokenKind::KwNot) {
            Ok(BoolExpr::Not(Box::new(self.bool_not()?)))
        } else {
            self.bool_primary()
        }
    }

    fn bool_primary(&mut self) -> ParseResult<BoolExpr> {
        match self.peek() {
            TokenKind::KwTrue => {
                self.bump();
                Ok(BoolExpr::True)
            }
            TokenKind::KwFalse => {
                self.bump();
                Ok(BoolExpr::False)
            }
            TokenKind::LParen => {
                // `(x + 1) < 2` needs the comparison route; `(x < 1)` the
                // grouping route. Try grouping first, then back off.
                let mark = self.save();
                self.bump();
                if let Ok(inner) = self.bool_expr() {
                    if self.eat(&TokenKind::RParen) && !self.at_cmp_op() {
                        return Ok(inner);
                    }
                }
                self.restore(mark);
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn at_cmp_op(&self) -> bool {
        matches!(
            self.peek(),
            TokenKind::Lt | TokenKind::Le | TokenKind::EqSign | TokenKind::Ge | TokenKind::Gt
        )
    }

    fn comparison(&mut self) -> ParseResult<BoolExpr> {
        let left = self.expr()?;
        let op = match self.peek() {
            TokenKind::Lt => CmpOp::Lt,
            TokenKind::Le => CmpOp::Le,
            TokenKind::EqSign => CmpOp::Eq,
            TokenKind::Ge => CmpOp::Ge,
            TokenKind::Gt => CmpOp::Gt,
            _ => return Err(self.error("a comparison operator")),
        };
        self.bump();
        let right = self.expr()?;
        Ok(BoolExpr::Cmp(Box::new(left), op, Box::new(right)))
    }

    // ---- arithmetic expressions -----------------------------------------

    pub(crate) fn expr(&mut self) -> ParseResult<Expr> {
        let mut left = self.term()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                let right = self.term()?;
                left = Expr::Add(Box::new(left), Box::new(right));
            } else if self.peek() == &TokenKind::Minus {
                self.bump();
                let right = self.term()?;
                left = Expr::Sub(Box::new(left), Box::new(right));
            } else {
                return Ok(left);
            }
        }
    }

    fn term(&mut self) -> ParseResult<Expr> {
        let mut left = self.unary()?;
        loop {
            if self.peek() == &TokenKind::Star {
                // Leave `* [` and `* In` to the drift/diffusion parsers.
                if matches!(
                    self.peek_at(1),
                    TokenKind::LBracket | TokenKind::IdentityMat(_)
                ) {
                    return Ok(left);
                }
                self.bump();
                let right = self.unary()?;
                left = Expr::Mul(Box::new(left), Box::new(right));
            } else if self.peek() == &TokenKind::Slash {
                self.bump();
                let right = self.unary()?;
                left = fold_div(left, right);
            } else {
                return Ok(left);
            }
        }
    }

    fn unary(&mut self) -> ParseResult<Expr> {
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary()?;
            // Fold so `-0.5` round-trips as a constant.
            Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            })
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> ParseResult<Expr> {
        match self.peek().clone() {
            TokenKind::Number(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            TokenKind::KwPi => {
                self.bump();
                Ok(Expr::Pi)
            }
            TokenKind::KwPiece => {
                self.bump();
                self.piecewise()
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if self.peek_at(1) == &TokenKind::LParen {
                    self.function_call()
                } else {
                    self.bump();
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.error("an expression")),
        }
    }

    fn function_call(&mut self) -> ParseResult<Expr> {
        let (line, col) = self.here();
        let name = self.expect_ident("function name")?;
        self.expect(TokenKind::LParen)?;
        let mut args = vec![self.expr()?];
        while self.eat(&TokenKind::Comma) {
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RParen)?;
        let arity = |expected: usize| -> ParseResult<()> {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ParseError::BadArity {
                    name: name.clone(),
                    expected,
                    found: args.len(),
                    line,
                    col,
                })
            }
        };
        let take2 = |args: &mut Vec<Expr>| {
            let b = Box::new(args.pop().expect("arity checked"));
            let a = Box::new(args.pop().expect("arity checked"));
            (a, b)
        };
        match name.as_str() {
            "sin" => {
                arity(1)?;
                Ok(Expr::Sin(Box::new(args.pop().expect("one arg"))))
            }
            "cos" => {
                arity(1)?;
                Ok(Expr::Cos(Box::new(args.pop().expect("one arg"))))
            }
            "exp" => {
                arity(1)?;
                Ok(Expr::Exp(Box::new(args.pop().expect("one arg"))))
            }
            "sqrt" => {
                arity(1)?;
                Ok(Expr::Sqrt(Box::new(args.pop().expect("one arg"))))
            }
            "abs" => {
                arity(1)?;
                Ok(Expr::Abs(Box::new(args.pop().expect("one arg"))))
            }
            "sgn" => {
                arity(1)?;
                Ok(Expr::Sgn(Box::new(args.pop().expect("one arg"))))
            }
            "min" => {
                arity(2)?;
                let (a, b) = take2(&mut args);
                Ok(Expr::Min(a, b))
            }
            "max" => {
                arity(2)?;
                let (a, b) = take2(&mut args);
                Ok(Expr::Max(a, b))
            }
            _ => Err(ParseError::UnknownFunction { name, line, col }),
        }
    }

    fn piecewise(&mut self) -> ParseResult<Expr> {
        self.expect(TokenKind::LParen)?;
        let mut arms = Vec::new();
        loop {
            // Guarded arm `B -> e`, or the trailing default expression.
            let mark = self.save();
            let guarded = match self.bool_expr() {
                Ok(guard) if self.peek() == &TokenKind::Arrow => {
                    self.bump();
                    let value = self.expr()?;
                    Some((guard, value))
                }
                _ => None,
            };
            match guarded {
                Some(arm) => {
                    arms.push(arm);
                    self.expect(TokenKind::Comma)?;
                }
                None => {
                    self.restore(mark);
                    let default = self.expr()?;
                    self.expect(TokenKind::RParen)?;
                    if arms.is_empty() {
                        return Err(self.malformed("piece needs at least one guarded arm"));
                    }
                    return Ok(Expr::Piecewise(arms, Box::new(default)));
                }
            }
        }
    }
}

/// Fold `Const / Const` at parse time so fractional literals like `1/3`
/// round-trip through the pretty-printer as a single exact constant.
fn fold_div(left: Expr, right: Expr) -> Expr {
    match (&left, &right) {
        (Expr::Const(a), Expr::Const(b)) if !b.is_zero() => Expr::Const(a.clone() / b.clone()),
        _ => Expr::Div(Box::new(left), Box::new(right)),
    }
}

/// Parse a complete SHCSP program.
pub fn parse(text: &str) -> ParseResult<Process> {
    let mut p = Parser::new(text)?;
    let process = p.parallel()?;
    p.expect_eof()?;
    Ok(process)
}

/// Parse a single arithmetic expression (used for certificate functions and
/// drift/diffusion entries supplied as strings).
pub fn parse_expr(text: &str) -> ParseResult<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parse a single boolean expression.
pub fn parse_bool(text: &str) -> ParseResult<BoolExpr> {
    let mut p = Parser::new(text)?;
    let b = p.bool_expr()?;
    p.expect_eof()?;
    Ok(b)
}

/// Parse an exact rational from either decimal (`0.25`) or fraction
/// (`1/4`) notation.
pub fn parse_rational(text: &str) -> ParseResult<Rational> {
    let mut p = Parser::new(text)?;
    let negative = p.eat(&TokenKind::Minus);
    let r = p.rational()?;
    p.expect_eof()?;
    Ok(if negative { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::rat;

    fn var(name: &str) -> Box<Expr> {
        Box::new(Expr::Var(name.to_string()))
    }

    #[test]
    fn skip_parses() {
        assert_eq!(parse("skip").unwrap(), Process::Skip);
    }

    #[test]
    fn pchoice_probability_carried_verbatim() {
        let p = parse("(skip |0.5| skip)").unwrap();
        assert_eq!(
            p,
            Process::PChoice(Box::new(Process::Skip), rat(1, 2), Box::new(Process::Skip))
        );
    }

    #[test]
    fn aircraft_program_shape() {
        let text = "x := xs; y := y0; {d[x,y] = v*[cos(theta), sin(theta)] dt + I2 dW & xs <= x & x <= xe}";
        let p = parse(text).unwrap();
        let Process::Seq(first, rest) = p else {
            panic!("expected Seq, got {p:?}");
        };
        assert_eq!(*first, Process::Assign("x".into(), Expr::Var("xs".into())));
        let Process::Seq(second, sde) = *rest else {
            panic!("expected nested Seq");
        };
        assert_eq!(*second, Process::Assign("y".into(), Expr::Var("y0".into())));
        let Process::Sde(block) = *sde else {
            panic!("expected Sde");
        };
        assert_eq!(block.vars, vec!["x".to_string(), "y".to_string()]);
        // v*[cos(theta), sin(theta)] distributes the scalar.
        assert_eq!(
            block.drift[0],
            Expr::Mul(var("v"), Box::new(Expr::Cos(var("theta"))))
        );
        assert_eq!(
            block.drift[1],
            Expr::Mul(var("v"), Box::new(Expr::Sin(var("theta"))))
        );
        // I2 produces the 2x2 identity.
        assert_eq!(block.diffusion.len(), 2);
        assert_eq!(block.diffusion[0][0], Expr::Const(rat(1, 1)));
        assert_eq!(block.diffusion[0][1], Expr::Const(rat(0, 1)));
        assert_eq!(
            block.domain,
            BoolExpr::And(
                Box::new(BoolExpr::Cmp(var("xs"), CmpOp::Le, var("x"))),
                Box::new(BoolExpr::Cmp(var("x"), CmpOp::Le, var("xe")))
            )
        );
    }

    #[test]
    fn sequence_is_right_associative() {
        let p = parse("skip; skip; skip").unwrap();
        assert_eq!(
            p,
            Process::Seq(
                Box::new(Process::Skip),
                Box::new(Process::Seq(
                    Box::new(Process::Skip),
                    Box::new(Process::Skip)
                ))
            )
        );
    }

    #[test]
    fn conditional_with_parenthesized_guard() {
        let p = parse("(x + 1) < 2 -> { skip }").unwrap();
        let Process::Cond(guard, body) = p else {
            panic!("expected Cond");
        };
        assert_eq!(*body, Process::Skip);
        assert_eq!(
            guard,
            BoolExpr::Cmp(
                Box::new(Expr::Add(var("x"), Box::new(Expr::Const(rat(1, 1))))),
                CmpOp::Lt,
                Box::new(Expr::Const(rat(2, 1)))
            )
        );
    }

    #[test]
    fn interrupt_with_weighted_branches() {
        let p = parse("{d[s] = 0 dt + 0 dW & true} |> [1: a?u -> {skip}, 3: b!2 -> {skip}]")
            .unwrap();
        let Process::Interrupt(_, branches) = p else {
            panic!("expected Interrupt");
        };
        assert_eq!(branches.len(), 2);
        assert_eq!(branches[0].weight, rat(1, 1));
        assert_eq!(
            branches[0].event,
            CommEvent::In {
                chan: "a".into(),
                var: "u".into()
            }
        );
        assert_eq!(branches[1].weight, rat(3, 1));
    }

    #[test]
    fn repeat_binds_postfix() {
        let p = parse("(x := x + 1)*").unwrap();
        assert!(matches!(p, Process::Repeat(_)));
    }

    #[test]
    fn fraction_literals_fold() {
        let e = parse_expr("1/3").unwrap();
        assert_eq!(e, Expr::Const(rat(1, 3)));
        // Division by a variable stays symbolic.
        assert!(matches!(parse_expr("1/x").unwrap(), Expr::Div(..)));
    }

    #[test]
    fn unary_minus_folds_constants() {
        assert_eq!(parse_expr("-0.5").unwrap(), Expr::Const(rat(-1, 2)));
        assert_eq!(parse_expr("-pi/4").unwrap(), {
            Expr::Div(
                Box::new(Expr::Neg(Box::new(Expr::Pi))),
                Box::new(Expr::Const(rat(4, 1))),
            )
        });
    }

    #[test]
    fn unknown_function_is_reported() {
        let err = parse_expr("frob(1)").unwrap_err();
        assert!(matches!(err, ParseError::UnknownFunction { .. }));
    }

    #[test]
    fn arity_is_checked() {
        let err = parse_expr("min(1)").unwrap_err();
        assert!(matches!(
            err,
            ParseError::BadArity {
                expected: 2,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn drift_dimension_mismatch_is_an_error() {
        let err = parse("{d[x,y] = [1] dt + I2 dW & true}").unwrap_err();
        assert!(matches!(err, ParseError::Malformed { .. }));
    }

    #[test]
    fn piecewise_theta() {
        let e = parse_expr("piece(y > 0 -> -pi/4, y < 0 -> pi/4, 0)").unwrap();
        let Expr::Piecewise(arms, default) = e else {
            panic!("expected Piecewise");
        };
        assert_eq!(arms.len(), 2);
        assert_eq!(*default, Expr::Const(rat(0, 1)));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse("skip;\n  ?").unwrap_err();
        match err {
            ParseError::UnexpectedToken { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 3);
            }
            other => panic!("expected UnexpectedToken, got {other:?}"),
        }
    }

    #[test]
    fn nested_pchoice_requires_parens() {
        let p = parse("((skip |1/3| skip) |0.25| x := 1)").unwrap();
        let Process::PChoice(left, prob, _) = p else {
            panic!("expected PChoice");
        };
        assert_eq!(prob, rat(1, 4));
        assert!(matches!(*left, Process::PChoice(_, _, _)));
    }

    #[test]
    fn scalar_identity_diffusion() {
        let p = parse("{d[x,y] = [0, 0] dt + 0.4*I2 dW & true}").unwrap();
        let Process::Sde(block) = p else {
            panic!("expected Sde");
        };
        assert_eq!(block.diffusion[0][0], Expr::Const(rat(2, 5)));
        assert_eq!(block.diffusion[1][0], Expr::Const(rat(0, 1)));
    }

    #[test]
    fn column_vector_diffusion() {
        let p = parse("{d[x,y] = [0, 0] dt + [1, 2] dW & true}").unwrap();
        let Process::Sde(block) = p else {
            panic!("expected Sde");
        };
        assert_eq!(block.brownian_dim(), 1);
        assert_eq!(block.diffusion[1][0], Expr::Const(rat(2, 1)));
    }
}
