//! Random expression trees and an independent string evaluator for them.

use radshoot::expr::Expr;
use radshoot::Params;
use rand::Rng;

pub const PARAM_NAMES: [&str; 2] = ["p", "q"];

pub fn random_expr<R: Rng>(rng: &mut R, depth: usize, dim: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => Expr::Num((rng.gen_range(0.0..4.0f64) * 8.0).round() / 8.0),
            1 => Expr::Var(rng.gen_range(0..dim)),
            _ => Expr::Param(PARAM_NAMES[rng.gen_range(0..PARAM_NAMES.len())].to_string()),
        };
    }
    let sub = |rng: &mut R| Box::new(random_expr(rng, depth - 1, dim));
    match rng.gen_range(0..6) {
        0 => Expr::Neg(sub(rng)),
        1 => Expr::Add(sub(rng), sub(rng)),
        2 => Expr::Sub(sub(rng), sub(rng)),
        3 => Expr::Mul(sub(rng), sub(rng)),
        4 => Expr::Div(sub(rng), sub(rng)),
        // small integer exponents keep values finite for any base
        _ => Expr::Pow(sub(rng), Box::new(Expr::Num(rng.gen_range(0..4) as f64))),
    }
}

/// Recursive-descent evaluation straight from the text, no tree in between.
/// `None` marks a domain failure.
pub fn reference_eval(text: &str, u: &[f64], params: &Params) -> Option<f64> {
    let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut ev = RefEval {
        s: chars,
        i: 0,
        u,
        params,
    };
    let v = ev.expr()?;
    (ev.i == ev.s.len() && v.is_finite()).then_some(v)
}

struct RefEval<'a> {
    s: Vec<char>,
    i: usize,
    u: &'a [f64],
    params: &'a Params,
}

impl RefEval<'_> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.i).copied()
    }

    fn expr(&mut self) -> Option<f64> {
        let mut v = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.i += 1;
            let t = self.term()?;
            v = if c == '+' { v + t } else { v - t };
        }
        Some(v)
    }

    fn term(&mut self) -> Option<f64> {
        let mut v = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.i += 1;
            let t = self.unary()?;
            if c == '/' && t == 0.0 {
                return None;
            }
            v = if c == '*' { v * t } else { v / t };
        }
        Some(v)
    }

    fn unary(&mut self) -> Option<f64> {
        if self.peek() == Some('-') {
            self.i += 1;
            return Some(-self.unary()?);
        }
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.i += 1;
            let e = self.unary()?;
            return pow(base, e);
        }
        Some(base)
    }

    fn atom(&mut self) -> Option<f64> {
        let c = self.peek()?;
        if c == '(' {
            self.i += 1;
            let v = self.expr()?;
            if self.peek() != Some(')') {
                return None;
            }
            self.i += 1;
            return Some(v);
        }
        let start = self.i;
        if c.is_ascii_digit() || c == '.' {
            while let Some(d) = self.peek() {
                let exp_sign =
                    (d == '-' || d == '+') && matches!(self.s.get(self.i - 1), Some('e' | 'E'));
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    self.i += 1;
                } else {
                    break;
                }
            }
            return self.s[start..self.i]
                .iter()
                .collect::<String>()
                .parse()
                .ok();
        }
        while matches!(self.peek(), Some(d) if d.is_alphanumeric() || d == '_') {
            self.i += 1;
        }
        let name: String = self.s[start..self.i].iter().collect();
        if let Some(idx) = name.strip_prefix('u').and_then(|d| d.parse::<usize>().ok()) {
            return self.u.get(idx.checked_sub(1)?).copied();
        }
        self.params.get(&name).copied()
    }
}

fn pow(base: f64, e: f64) -> Option<f64> {
    if e.fract() == 0.0 {
        if base == 0.0 && e < 0.0 {
            return None;
        }
        Some(base.powi(e as i32))
    } else if base < 0.0 {
        None
    } else {
        Some(base.powf(e))
    }
}
