//! Hand-rolled lexer for the SHCSP concrete syntax and the assertion
//! language. `//` starts a comment that runs to end of line.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;

use super::ast::Rational;
use super::parser::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Number(Rational),
    /// Identity-matrix shorthand `I1`, `I2`, ... (reserved identifiers).
    IdentityMat(usize),
    KwSkip,
    KwNot,
    KwTrue,
    KwFalse,
    KwDt,
    KwDW,
    KwPi,
    KwPiece,
    Assign,   // :=
    Arrow,    // ->
    PipePipe, // ||
    PipeGt,   // |>
    Pipe,     // |
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Question,
    Bang,
    Amp,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    AtSign,
    Dot,
    Lt,
    Le,
    EqSign,
    Ge,
    Gt,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Number(_) => "number".to_string(),
            TokenKind::IdentityMat(n) => format!("`I{n}`"),
            TokenKind::KwSkip => "`skip`".to_string(),
            TokenKind::KwNot => "`not`".to_string(),
            TokenKind::KwTrue => "`true`".to_string(),
            TokenKind::KwFalse => "`false`".to_string(),
            TokenKind::KwDt => "`dt`".to_string(),
            TokenKind::KwDW => "`dW`".to_string(),
            TokenKind::KwPi => "`pi`".to_string(),
            TokenKind::KwPiece => "`piece`".to_string(),
            TokenKind::Assign => "`:=`".to_string(),
            TokenKind::Arrow => "`->`".to_string(),
            TokenKind::PipePipe => "`||`".to_string(),
            TokenKind::PipeGt => "`|>`".to_string(),
            TokenKind::Pipe => "`|`".to_string(),
            TokenKind::LParen => "`(`".to_string(),
            TokenKind::RParen => "`)`".to_string(),
            TokenKind::LBrace => "`{`".to_string(),
            TokenKind::RBrace => "`}`".to_string(),
            TokenKind::LBracket => "`[`".to_string(),
            TokenKind::RBracket => "`]`".to_string(),
            TokenKind::Comma => "`,`".to_string(),
            TokenKind::Semi => "`;`".to_string(),
            TokenKind::Colon => "`:`".to_string(),
            TokenKind::Question => "`?`".to_string(),
            TokenKind::Bang => "`!`".to_string(),
            TokenKind::Amp => "`&`".to_string(),
            TokenKind::Plus => "`+`".to_string(),
            TokenKind::Minus => "`-`".to_string(),
            TokenKind::Star => "`*`".to_string(),
            TokenKind::Slash => "`/`".to_string(),
            TokenKind::Caret => "`^`".to_string(),
            TokenKind::AtSign => "`@`".to_string(),
            TokenKind::Dot => "`.`".to_string(),
            TokenKind::Lt => "`<`".to_string(),
            TokenKind::Le => "`<=`".to_string(),
            TokenKind::EqSign => "`=`".to_string(),
            TokenKind::Ge => "`>=`".to_string(),
            TokenKind::Gt => "`>`".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub col: u32,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

/// Parse a decimal literal such as `0.0002` or `1.5e-3` into an exact
/// rational. Also used for rational strings in request files.
pub fn decimal_to_rational(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => {
            let exp: i64 = text[i + 1..].parse().ok()?;
            (&text[..i], exp)
        }
        None => (text, 0_i64),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let mut value = BigRational::new(num, BigInt::one());
    let scale = exponent - frac_part.len() as i64;
    let ten = BigRational::new(BigInt::from(10), BigInt::one());
    match scale.cmp(&0) {
        std::cmp::Ordering::Greater => {
            for _ in 0..scale {
                value *= ten.clone();
            }
        }
        std::cmp::Ordering::Less => {
            for _ in 0..(-scale) {
                value /= ten.clone();
            }
        }
        std::cmp::Ordering::Equal => {}
    }
    Some(value)
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn lex_number(&mut self) -> Result<TokenKind, ParseError> {
        let (line, col) = (self.line, self.col);
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some(b'.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let after_sign = if matches!(self.peek2(), Some(b'+' | b'-')) {
                self.src.get(self.pos + 2).copied()
            } else {
                self.peek2()
            };
            if after_sign.is_some_and(|c| c.is_ascii_digit()) {
                self.bump(); // e
                if matches!(self.peek(), Some(b'+' | b'-')) {
                    self.bump();
                }
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        decimal_to_rational(text)
            .map(TokenKind::Number)
            .ok_or(ParseError::InvalidNumber {
                text: text.to_string(),
                line,
                col,
            })
    }

    fn lex_ident(&mut self) -> TokenKind {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.bump();
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
        match text {
            "skip" => TokenKind::KwSkip,
            "not" => TokenKind::KwNot,
            "true" => TokenKind::KwTrue,
            "false" => TokenKind::KwFalse,
            "dt" => TokenKind::KwDt,
            "dW" => TokenKind::KwDW,
            "pi" => TokenKind::KwPi,
            "piece" => TokenKind::KwPiece,
            _ => {
                if let Some(rest) = text.strip_prefix('I') {
                    if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                        if let Ok(n) = rest.parse::<usize>() {
                            return TokenKind::IdentityMat(n);
                        }
                    }
                }
                TokenKind::Ident(text.to_string())
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let kind = match self.peek() {
            None => TokenKind::Eof,
            Some(c) if c.is_ascii_digit() => self.lex_number()?,
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.lex_ident(),
            Some(c) => {
                self.bump();
                match c {
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    b'{' => TokenKind::LBrace,
                    b'}' => TokenKind::RBrace,
                    b'[' => TokenKind::LBracket,
                    b']' => TokenKind::RBracket,
                    b',' => TokenKind::Comma,
                    b';' => TokenKind::Semi,
                    b'?' => TokenKind::Question,
                    b'!' => TokenKind::Bang,
                    b'&' => TokenKind::Amp,
                    b'+' => TokenKind::Plus,
                    b'*' => TokenKind::Star,
                    b'/' => TokenKind::Slash,
                    b'^' => TokenKind::Caret,
                    b'@' => TokenKind::AtSign,
                    b'.' => TokenKind::Dot,
                    b'=' => TokenKind::EqSign,
                    b':' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            TokenKind::Assign
                        } else {
                            TokenKind::Colon
                        }
                    }
                    b'-' => {
                        if self.peek() == Some(b'>') {
                            self.bump();
                            TokenKind::Arrow
                        } else {
                            TokenKind::Minus
                        }
                    }
                    b'|' => match self.peek() {
                        Some(b'|') => {
                            self.bump();
                            TokenKind::PipePipe
                        }
                        Some(b'>') => {
                            self.bump();
                            TokenKind::PipeGt
                        }
                        _ => TokenKind::Pipe,
                    },
                    b'<' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            TokenKind::Le
                        } else {
                            TokenKind::Lt
                        }
                    }
                    b'>' => {
                        if self.peek() == Some(b'=') {
                            self.bump();
                            TokenKind::Ge
                        } else {
                            TokenKind::Gt
                        }
                    }
                    other => {
                        return Err(ParseError::UnexpectedChar {
                            ch: other as char,
                            line,
                            col,
                        });
                    }
                }
            }
        };
        Ok(Token { kind, line, col })
    }
}

/// Tokenize a full source string; the final token is always `Eof`.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lexer = Lexer::new(src);
    let mut tokens = Vec::new();
    loop {
        let tok = lexer.next_token()?;
        let done = tok.kind == TokenKind::Eof;
        tokens.push(tok);
        if done {
            return Ok(tokens);
        }
    }
}
