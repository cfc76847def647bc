//! A small arithmetic language for user-defined source terms.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          right-associative
//! atom   := number | ident | '(' expr ')'
//! ident  := 'u' digits                 component u1..uL
//!         | name                       parameter bound at evaluation time
//! ```
//!
//! Exponentiation binds tighter than negation, so `-u1^2` is `-(u1^2)`, and
//! `2^-1` is accepted. The Unicode minus sign `−` is read as `-`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Named real parameters (`p`, `q`, ...).
pub type Params = BTreeMap<String, f64>;

/// Exponents within this distance of an integer count as integers when the
/// base is negative.
pub const INTEGER_EXPONENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based component index (`u1` is `Var(0)`).
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// Parses `text` for a system with `dim` components and the given parameter names.
pub fn parse(text: &str, dim: usize, param_names: &BTreeSet<String>) -> Result<Expr> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        at: 0,
        dim,
        params: param_names,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(Error::Syntax {
            pos: tok.pos,
            msg: format!("unexpected {}", tok.kind),
        });
    }
    Ok(expr)
}

/// Real power with the conventions used throughout the crate: a negative base
/// needs an integral exponent and a zero base needs a non-negative exponent.
pub fn checked_pow(base: f64, exp: f64) -> Result<f64> {
    let rounded = exp.round();
    let integral =
        (exp - rounded).abs() <= INTEGER_EXPONENT_TOL && rounded.abs() <= i32::MAX as f64;
    if base == 0.0 && exp < 0.0 {
        return Err(Error::ExprDomain(format!("0^{exp} divides by zero")));
    }
    let value = if integral {
        base.powi(rounded as i32)
    } else if base < 0.0 {
        return Err(Error::ExprDomain(format!(
            "negative base {base} with non-integer exponent {exp}"
        )));
    } else {
        base.powf(exp)
    };
    Ok(value)
}

impl Expr {
    pub fn eval(&self, u: &[f64], params: &Params) -> Result<f64> {
        let value = match self {
            Expr::Num(x) => *x,
            Expr::Var(i) => *u.get(*i).ok_or_else(|| {
                Error::InvalidInput(format!("u{} requested from a {}-vector", i + 1, u.len()))
            })?,
            Expr::Param(name) => *params
                .get(name)
                .ok_or_else(|| Error::MissingParam(name.clone()))?,
            Expr::Neg(a) => -a.eval(u, params)?,
            Expr::Add(a, b) => a.eval(u, params)? + b.eval(u, params)?,
            Expr::Sub(a, b) => a.eval(u, params)? - b.eval(u, params)?,
            Expr::Mul(a, b) => a.eval(u, params)? * b.eval(u, params)?,
            Expr::Div(a, b) => {
                let num = a.eval(u, params)?;
                let den = b.eval(u, params)?;
                if den == 0.0 {
                    return Err(Error::ExprDomain("division by zero".into()));
                }
                num / den
            }
            Expr::Pow(a, b) => checked_pow(a.eval(u, params)?, b.eval(u, params)?)?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::ExprDomain(format!("non-finite value {value}")))
        }
    }

    /// Replaces every parameter by its numeric value.
    pub fn bind(&self, params: &Params) -> Result<Expr> {
        let b = |e: &Expr| e.bind(params).map(Box::new);
        Ok(match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Param(name) => Expr::Num(
                *params
                    .get(name)
                    .ok_or_else(|| Error::MissingParam(name.clone()))?,
            ),
            Expr::Neg(a) => Expr::Neg(b(a)?),
            Expr::Add(x, y) => Expr::Add(b(x)?, b(y)?),
            Expr::Sub(x, y) => Expr::Sub(b(x)?, b(y)?),
            Expr::Mul(x, y) => Expr::Mul(b(x)?, b(y)?),
            Expr::Div(x, y) => Expr::Div(b(x)?, b(y)?),
            Expr::Pow(x, y) => Expr::Pow(b(x)?, b(y)?),
        })
    }

    /// Largest component index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Param(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.arity().max(b.arity()),
        }
    }
}

/// Fully parenthesised; reparses to the same tree as long as literals are non-negative.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "(-{:?})", -x),
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(i) => write!(f, "u{}", i + 1),
            Expr::Param(name) => f.write_str(name),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(x) => write!(f, "number {x}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Caret => f.write_str("`^`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        let single = match c {
            '+' => Some(TokenKind::Plus),
            '-' | '\u{2212}' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '/' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            tokens.push(Token { kind, pos });
            continue;
        }
        if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() || c == '.' {
            let mut end = pos;
            let mut seen_exp = false;
            let mut prev = ' ';
            while let Some(&(i, d)) = chars.peek() {
                let accept = d.is_ascii_digit()
                    || d == '.'
                    || (!seen_exp && (d == 'e' || d == 'E'))
                    || ((d == '+' || d == '-') && (prev == 'e' || prev == 'E'));
                if !accept {
                    break;
                }
                if d == 'e' || d == 'E' {
                    seen_exp = true;
                }
                prev = d;
                end = i + d.len_utf8();
                chars.next();
            }
            let lit = &text[pos..end];
            let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                pos,
                msg: format!("malformed number `{lit}`"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Num(value),
                pos,
            });
        } else if c.is_alphabetic() || c == '_' {
            let mut end = pos;
            while let Some(&(i, d)) = chars.peek() {
                if !(d.is_alphanumeric() || d == '_') {
                    break;
                }
                end = i + d.len_utf8();
                chars.next();
            }
            tokens.push(Token {
                kind: TokenKind::Ident(text[pos..end].to_string()),
                pos,
            });
        } else {
            return Err(Error::Syntax {
                pos,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    at: usize,
    dim: usize,
    params: &'a BTreeSet<String>,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&TokenKind::Minus) {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&TokenKind::Star) {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(&TokenKind::Slash) {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.at).cloned() else {
            return Err(Error::Syntax {
                pos: self.end,
                msg: "unexpected end of expression".into(),
            });
        };
        self.at += 1;
        match tok.kind {
            TokenKind::Num(x) => Ok(Expr::Num(x)),
            TokenKind::Ident(name) => self.resolve(name),
            TokenKind::LParen => {
                let inner = self.expr()?;
                if !self.eat(&TokenKind::RParen) {
                    let pos = self.peek().map_or(self.end, |t| t.pos);
                    return Err(Error::Syntax {
                        pos,
                        msg: "expected `)`".into(),
                    });
                }
                Ok(inner)
            }
            other => Err(Error::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {other}"),
            }),
        }
    }

    fn resolve(&self, name: String) -> Result<Expr> {
        if let Some(digits) = name.strip_prefix('u') {
            if let Ok(index) = digits.parse::<usize>() {
                if index >= 1 && index <= self.dim && !digits.starts_with('0') {
                    return Ok(Expr::Var(index - 1));
                }
                if !self.params.contains(&name) {
                    return Err(Error::UnknownIdentifier(name));
                }
            }
        }
        if self.params.contains(&name) {
            Ok(Expr::Param(name))
        } else {
            Err(Error::UnknownIdentifier(name))
        }
    }
}
