use crate::model::{Coeff, MultilinearExpr};

use super::ParseError;

/// Parses `a/b`, an integer or a plain decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Coeff> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        return (d != Coeff::from_integer(0)).then(|| n / d);
    }
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 18
    {
        return None;
    }
    let scale = 10i64.checked_pow(frac.len() as u32)?;
    let whole: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let part: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    let numer = whole.checked_mul(scale)?.checked_add(part)?;
    let r = Coeff::new(numer, scale);
    Some(if neg { -r } else { r })
}

/// Parses `a/b` or any float literal.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().ok()?;
        let d: f64 = d.trim().parse().ok()?;
        return (d != 0.0).then(|| n / d);
    }
    s.parse().ok().filter(|x: &f64| x.is_finite())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Coeff),
    Ident(String),
    Op(char),
}

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = col0 + i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if "+-*/()".contains(c) {
            out.push((Tok::Op(c), col));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let lit = &text[start..i];
            let v = parse_rational(lit)
                .ok_or_else(|| ParseError::new(line, col, format!("bad number `{lit}`")))?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), col));
        } else {
            return Err(ParseError::new(
                line,
                col,
                format!("unexpected character `{c}`"),
            ));
        }
    }
    Ok(out)
}

struct Parser<'a, F> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
    resolve: &'a mut F,
}

impl<F: FnMut(&str) -> u32> Parser<'_, F> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col(), msg)
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn lift<T>(&self, col: usize, r: Result<T, crate::model::ExprError>) -> Result<T, ParseError> {
        r.map_err(|e| ParseError::new(self.line, col, e.to_string()))
    }

    fn expr(&mut self) -> Result<MultilinearExpr, ParseError> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            let col = self.col();
            self.pos += 1;
            let rhs = self.term()?;
            acc = self.lift(
                col,
                if op == '+' {
                    acc.add(&rhs)
                } else {
                    acc.sub(&rhs)
                },
            )?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<MultilinearExpr, ParseError> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            let col = self.col();
            self.pos += 1;
            let rhs = self.unary()?;
            acc = self.lift(
                col,
                if op == '*' {
                    acc.mul(&rhs)
                } else {
                    acc.div(&rhs)
                },
            )?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<MultilinearExpr, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<MultilinearExpr, ParseError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err("expression ends early"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(c) => Ok(MultilinearExpr::constant(c)),
            Tok::Ident(name) => Ok(MultilinearExpr::var((self.resolve)(&name))),
            Tok::Op('(') => {
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Tok::Op(c) => {
                self.pos -= 1;
                Err(self.err(format!("unexpected `{c}`")))
            }
        }
    }
}

/// Parses a multilinear expression. `resolve` maps identifiers to parameter
/// indices; `col0` is the 1-based column of the first character.
pub fn parse_expr<F>(
    text: &str,
    line: usize,
    col0: usize,
    resolve: &mut F,
) -> Result<MultilinearExpr, ParseError>
where
    F: FnMut(&str) -> u32,
{
    let toks = tokenize(text, line, col0)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        end_col: col0 + text.len(),
        resolve,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}
