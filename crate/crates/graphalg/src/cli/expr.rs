//! Word expressions over named generators.
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('·' | '.') unary)*
//! unary   := '-' unary | postfix
//! postfix := atom '*'*
//! atom    := number | 'i' | name '@' label | '(' sum ')'
//! ```
//!
//! `name@q` is the basis element `name` of the algebra at vertex `q` and `u@e`
//! the edge unitary of `e`; both are conjugated into the base vertex along the
//! maximal subtree.

use thiserror::Error;

use crate::fundamental::{Fundamental, FundamentalError, ReducedWordSum, Word};
use crate::graphcore::AlgebraGraph;
use crate::linalg::{CVec, C64};

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("expression error at character {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("unknown generator `{name}`")]
    UnknownGenerator { name: String },
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Imaginary,
    Generator(String, String),
    Plus,
    Minus,
    Dot,
    Star,
    Open,
    Close,
}

fn is_ident(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || (!c.is_ascii() && c != '·')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |position: usize, reason: &str| ExprError::Syntax { position, reason: reason.into() };
    while i < chars.len() {
        let ch = chars[i];
        let start = i;
        let simple = match ch {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '·' | '.' => Some(Token::Dot),
            '*' => Some(Token::Star),
            '(' => Some(Token::Open),
            ')' => Some(Token::Close),
            _ => None,
        };
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if let Some(t) = simple {
            out.push((start, t));
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_ident(chars[j]) {
            j += 1;
        }
        let named = chars.get(j) == Some(&'@');
        if ch.is_ascii_digit() && !named {
            let digits = |i: &mut usize| {
                while *i < chars.len() && chars[*i].is_ascii_digit() {
                    *i += 1;
                }
            };
            digits(&mut i);
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
                digits(&mut i);
            }
            if chars.get(i) == Some(&'e') {
                let sign = usize::from(matches!(chars.get(i + 1), Some('+' | '-')));
                if chars.get(i + 1 + sign).is_some_and(|c| c.is_ascii_digit()) {
                    i += 1 + sign;
                    digits(&mut i);
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let v: f64 = lit.parse().map_err(|_| syntax(start, "malformed number"))?;
            out.push((start, Token::Number(v)));
            continue;
        }
        if is_ident(ch) {
            while i < chars.len() && is_ident(chars[i]) {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            if chars.get(i) == Some(&'@') {
                i += 1;
                let ls = i;
                while i < chars.len() && is_ident(chars[i]) {
                    i += 1;
                }
                if ls == i {
                    return Err(syntax(ls, "expected a label after `@`"));
                }
                out.push((start, Token::Generator(name, chars[ls..i].iter().collect())));
            } else if name == "i" {
                out.push((start, Token::Imaginary));
            } else {
                return Err(syntax(start, &format!("`{name}` needs `@vertex` or `@edge`")));
            }
            continue;
        }
        return Err(syntax(start, &format!("unexpected `{ch}`")));
    }
    Ok(out)
}

struct Parser<'a, 'g> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    f: &'a Fundamental<'g>,
}

impl<'a, 'g> Parser<'a, 'g> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn sum(&mut self) -> Result<ReducedWordSum, ExprError> {
        let mut x = self.product()?;
        while let Some(t) = self.peek() {
            let sign = match t {
                Token::Plus => 1.0,
                Token::Minus => -1.0,
                _ => break,
            };
            self.pos += 1;
            let y = self.product()?;
            x = x.add(&y.scale(C64::new(sign, 0.0)));
        }
        Ok(x)
    }

    fn product(&mut self) -> Result<ReducedWordSum, ExprError> {
        let mut x = self.unary()?;
        while self.peek() == Some(&Token::Dot) {
            self.pos += 1;
            let y = self.unary()?;
            x = self.f.multiply(&x, &y)?;
        }
        Ok(x)
    }

    fn unary(&mut self) -> Result<ReducedWordSum, ExprError> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            return Ok(self.unary()?.scale(C64::new(-1.0, 0.0)));
        }
        let mut x = self.atom()?;
        while self.peek() == Some(&Token::Star) {
            self.pos += 1;
            x = self.f.adjoint(&x);
        }
        Ok(x)
    }

    fn atom(&mut self) -> Result<ReducedWordSum, ExprError> {
        let at = self.here();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ExprError::Syntax { position: at, reason: "unexpected end of expression".into() });
        };
        self.pos += 1;
        match tok {
            Token::Number(v) => Ok(self.f.scalar(C64::new(v, 0.0))),
            Token::Imaginary => Ok(self.f.scalar(C64::new(0.0, 1.0))),
            Token::Generator(name, label) => generator(self.f, &name, &label),
            Token::Open => {
                let x = self.sum()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(ExprError::Syntax { position: self.here(), reason: "expected `)`".into() });
                }
                self.pos += 1;
                Ok(x)
            }
            other => Err(ExprError::Syntax { position: at, reason: format!("unexpected {other:?}") }),
        }
    }
}

/// Raw loop at the base running out along the tree, through the middle
/// letters, and back.
fn conjugated(g: &AlgebraGraph, middle: &[usize], leg: Option<(usize, CVec)>) -> Word {
    let gr = &g.graph;
    let p0 = g.base();
    let (s, r) = match middle {
        [] => {
            let q = leg.as_ref().map_or(p0, |(q, _)| *q);
            (q, q)
        }
        _ => (gr.source(middle[0]), gr.range(*middle.last().expect("nonempty"))),
    };
    let down = g.geodesic(p0, s);
    let mut path = down.clone();
    path.extend_from_slice(middle);
    path.extend(g.geodesic(r, p0));
    let verts: Vec<usize> = std::iter::once(p0).chain(path.iter().map(|&e| gr.range(e))).collect();
    let mut legs: Vec<CVec> = verts.iter().map(|&v| g.vertex_algebra(v).unit().clone()).collect();
    if let Some((_, a)) = leg {
        legs[down.len()] = a;
    }
    Word { start: p0, path, legs }
}

fn generator(f: &Fundamental, name: &str, label: &str) -> Result<ReducedWordSum, ExprError> {
    let g = f.graph();
    let gr = &g.graph;
    if name == "u" {
        if let Some(e) = gr.edge_id(label) {
            return Ok(f.reduce(&conjugated(g, &[e], None))?);
        }
    }
    if let Some(q) = gr.vertex_id(label) {
        if let Some(i) = g.vertices[q].names.iter().position(|n| n == name) {
            let b = g.vertex_algebra(q).basis_vector(i);
            return Ok(f.reduce(&conjugated(g, &[], Some((q, b))))?);
        }
    }
    Err(ExprError::UnknownGenerator { name: format!("{name}@{label}") })
}

/// Parses and evaluates an expression to its normal form at the base vertex.
pub fn evaluate(f: &Fundamental, text: &str) -> Result<ReducedWordSum, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, end: text.chars().count(), f };
    let x = p.sum()?;
    if p.pos != p.tokens.len() {
        return Err(ExprError::Syntax { position: p.here(), reason: "trailing input".into() });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn free_product_element_has_binomial_moments() {
        let g = fixtures::z2_free_product();
        let f = Fundamental::new(&g);
        let x = evaluate(&f, "g@p + u@e·h@q·u@ē").unwrap();
        let m = f.moments(&x, 4).unwrap();
        // m[n - 1] = φ(xⁿ)
        assert!((m[1] - C64::new(2.0, 0.0)).norm() < 1e-10);
        assert!((m[3] - C64::new(6.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn adjoints_scalars_and_parentheses() {
        let g = fixtures::integer_loop();
        let f = Fundamental::new(&g);
        let x = evaluate(&f, "u@e · (u@e)*").unwrap();
        assert!(f.distance(&x, &f.one()).unwrap() < 1e-12);
        let y = evaluate(&f, "2.5 - 0.5 + i.i").unwrap();
        assert!(f.distance(&y, &f.scalar(C64::new(1.0, 0.0))).unwrap() < 1e-12);
    }

    #[test]
    fn errors_point_at_the_problem() {
        let g = fixtures::integer_loop();
        let f = Fundamental::new(&g);
        assert!(matches!(evaluate(&f, "u@e +"), Err(ExprError::Syntax { position: 5, .. })));
        assert!(matches!(evaluate(&f, "w@e"), Err(ExprError::UnknownGenerator { .. })));
        assert!(matches!(evaluate(&f, "(u@e"), Err(ExprError::Syntax { .. })));
        let z = fixtures::z2_free_product();
        let fz = Fundamental::new(&z);
        assert!(fz.distance(&evaluate(&fz, "2·1@p").unwrap(), &fz.scalar(C64::new(2.0, 0.0))).unwrap() < 1e-12);
    }
}
