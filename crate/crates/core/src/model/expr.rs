//! Multilinear polynomials with exact rational coefficients.
//!
//! Transition probabilities and state rewards of a parametric MDP are stored
//! as [`MultilinearExpr`]. Every monomial is a set of parameter indices, so no
//! parameter appears with degree above one. The term list is kept canonical at
//! all times: sorted by monomial, no duplicate monomials, no zero coefficients.

use std::fmt;

use num_rational::Ratio;
use num_rational::Rational64;
use thiserror::Error;

use super::region::{Interval, Region};

/// Exact coefficient type.
pub type Coeff = Rational64;

/// Largest number of distinct parameters for which [`MultilinearExpr::range`]
/// enumerates box vertices; above this it falls back to interval arithmetic.
pub const MAX_VERTEX_PARAMS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("parameter x{0} appears twice in one monomial")]
    NotMultilinear(u32),
    #[error("rational overflow in coefficient arithmetic")]
    Overflow,
    #[error("division by a non-constant or zero expression")]
    BadDivisor,
}

/// A sorted set of parameter indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(index: u32) -> Self {
        Monomial(vec![index])
    }

    /// Builds a monomial from arbitrary indices; repeated indices are rejected.
    pub fn from_indices(mut indices: Vec<u32>) -> Result<Self, ExprError> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(ExprError::NotMultilinear(w[0]));
        }
        Ok(Monomial(indices))
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn product(&self, other: &Monomial) -> Result<Monomial, ExprError> {
        let mut merged = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    merged.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => return Err(ExprError::NotMultilinear(self.0[i])),
            }
        }
        merged.extend_from_slice(&self.0[i..]);
        merged.extend_from_slice(&other.0[j..]);
        Ok(Monomial(merged))
    }

    fn eval(&self, point: &[f64]) -> f64 {
        self.0.iter().map(|&k| point[k as usize]).product()
    }
}

/// A multilinear polynomial over the parameters of one model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultilinearExpr {
    terms: Vec<(Monomial, Coeff)>,
}

impl MultilinearExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Coeff::from_integer(1))
    }

    pub fn constant(c: Coeff) -> Self {
        let mut terms = Vec::new();
        if c != Coeff::from_integer(0) {
            terms.push((Monomial::one(), c));
        }
        MultilinearExpr { terms }
    }

    pub fn var(index: u32) -> Self {
        MultilinearExpr {
            terms: vec![(Monomial::var(index), Coeff::from_integer(1))],
        }
    }

    /// Canonicalizes an arbitrary term list: sorts, merges equal monomials and
    /// drops zero coefficients.
    pub fn from_terms<I>(terms: I) -> Result<Self, ExprError>
    where
        I: IntoIterator<Item = (Coeff, Vec<u32>)>,
    {
        let mut raw = Vec::new();
        for (c, idx) in terms {
            raw.push((Monomial::from_indices(idx)?, c));
        }
        Self::canonicalize(raw)
    }

    fn canonicalize(mut raw: Vec<(Monomial, Coeff)>) -> Result<Self, ExprError> {
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        let mut terms: Vec<(Monomial, Coeff)> = Vec::with_capacity(raw.len());
        for (m, c) in raw {
            match terms.last_mut() {
                Some((last, acc)) if *last == m => {
                    *acc = checked_add(*acc, c)?;
                }
                _ => terms.push((m, c)),
            }
        }
        terms.retain(|(_, c)| *c.numer() != 0);
        Ok(MultilinearExpr { terms })
    }

    pub fn terms(&self) -> &[(Monomial, Coeff)] {
        &self.terms
    }

    /// Re-canonicalizes the term list. A no-op on any value built through the
    /// public constructors.
    pub fn canonicalized(&self) -> Result<Self, ExprError> {
        Self::canonicalize(self.terms.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.is_one())
    }

    pub fn constant_value(&self) -> Option<Coeff> {
        match self.terms.as_slice() {
            [] => Some(Coeff::from_integer(0)),
            [(m, c)] if m.is_one() => Some(*c),
            _ => None,
        }
    }

    /// Distinct parameter indices, sorted.
    pub fn params(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .terms
            .iter()
            .flat_map(|(m, _)| m.indices().iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn max_param(&self) -> Option<u32> {
        self.terms
            .iter()
            .filter_map(|(m, _)| m.indices().last().copied())
            .max()
    }

    pub fn add(&self, other: &Self) -> Result<Self, ExprError> {
        let mut raw = self.terms.clone();
        raw.extend(other.terms.iter().cloned());
        Self::canonicalize(raw)
    }

    pub fn neg(&self) -> Self {
        MultilinearExpr {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -*c)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ExprError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, ExprError> {
        let mut raw = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                raw.push((ma.product(mb)?, checked_mul(*ca, *cb)?));
            }
        }
        Self::canonicalize(raw)
    }

    /// Division by a nonzero constant expression.
    pub fn div(&self, other: &Self) -> Result<Self, ExprError> {
        let d = other.constant_value().ok_or(ExprError::BadDivisor)?;
        if *d.numer() == 0 {
            return Err(ExprError::BadDivisor);
        }
        let inv = d.recip();
        let raw = self
            .terms
            .iter()
            .map(|(m, c)| Ok((m.clone(), checked_mul(*c, inv)?)))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Self::canonicalize(raw)
    }

    /// Evaluates at a full parameter point.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| to_f64(*c) * m.eval(point))
            .sum()
    }

    /// Range of the expression over a rectangular region.
    ///
    /// Exact (vertex enumeration) when at most [`MAX_VERTEX_PARAMS`] parameters
    /// occur, otherwise a sound per-monomial interval enclosure.
    pub fn range(&self, region: &Region) -> Interval {
        let params = self.params();
        let free: Vec<u32> = params
            .iter()
            .copied()
            .filter(|&k| region.interval(k as usize).width() > 0.0)
            .collect();
        if free.len() <= MAX_VERTEX_PARAMS {
            let mut point = region.center();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for mask in 0u64..(1u64 << free.len()) {
                for (bit, &k) in free.iter().enumerate() {
                    let iv = region.interval(k as usize);
                    point[k as usize] = if mask >> bit & 1 == 1 { iv.hi } else { iv.lo };
                }
                let v = self.eval(&point);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            Interval::new(lo, hi)
        } else {
            let mut acc = Interval::point(0.0);
            for (m, c) in &self.terms {
                let mut iv = Interval::point(to_f64(*c));
                for &k in m.indices() {
                    iv = iv.mul(region.interval(k as usize));
                }
                acc = acc.add(iv);
            }
            acc
        }
    }

    /// Formats with the given parameter names.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

fn checked_add(a: Coeff, b: Coeff) -> Result<Coeff, ExprError> {
    let n = *a.numer() as i128 * *b.denom() as i128 + *b.numer() as i128 * *a.denom() as i128;
    let d = *a.denom() as i128 * *b.denom() as i128;
    reduce128(n, d)
}

fn checked_mul(a: Coeff, b: Coeff) -> Result<Coeff, ExprError> {
    let n = *a.numer() as i128 * *b.numer() as i128;
    let d = *a.denom() as i128 * *b.denom() as i128;
    reduce128(n, d)
}

fn reduce128(n: i128, d: i128) -> Result<Coeff, ExprError> {
    let g = gcd128(n.unsigned_abs(), d.unsigned_abs()).max(1) as i128;
    let (n, d) = (n / g, d / g);
    match (i64::try_from(n), i64::try_from(d)) {
        (Ok(n), Ok(d)) => Ok(Ratio::new(n, d)),
        _ => Err(ExprError::Overflow),
    }
}

fn gcd128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn to_f64(c: Coeff) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

pub struct ExprDisplay<'a> {
    expr: &'a MultilinearExpr,
    names: &'a [String],
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expr.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.expr.terms.iter().enumerate() {
            let negative = *c.numer() < 0;
            let abs = if negative { -*c } else { *c };
            if i == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative { '-' } else { '+' })?;
            }
            let unit = abs == Coeff::from_integer(1);
            if m.is_one() {
                write_coeff(f, abs)?;
                continue;
            }
            if !unit {
                write_coeff(f, abs)?;
                write!(f, "*")?;
            }
            for (j, &k) in m.indices().iter().enumerate() {
                if j > 0 {
                    write!(f, "*")?;
                }
                match self.names.get(k as usize) {
                    Some(name) => write!(f, "{name}")?,
                    None => write!(f, "x{k}")?,
                }
            }
        }
        Ok(())
    }
}

fn write_coeff(f: &mut fmt::Formatter<'_>, c: Coeff) -> fmt::Result {
    if *c.denom() == 1 {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Coeff {
        Coeff::new(n, d)
    }

    #[test]
    fn one_minus_p_plus_p_is_one() {
        let p = MultilinearExpr::var(0);
        let q = MultilinearExpr::one().sub(&p).unwrap();
        assert_eq!(q.add(&p).unwrap(), MultilinearExpr::one());
    }

    #[test]
    fn squares_are_rejected() {
        let p = MultilinearExpr::var(3);
        assert_eq!(p.mul(&p), Err(ExprError::NotMultilinear(3)));
        assert!(MultilinearExpr::from_terms([(r(1, 1), vec![1, 1])]).is_err());
    }

    #[test]
    fn zero_coefficients_vanish() {
        let e = MultilinearExpr::from_terms([(r(1, 2), vec![0]), (r(-1, 2), vec![0])]).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn range_over_box_is_vertex_exact() {
        // p*q - p over [0.2,0.4] x [0.1,0.9]
        let e = MultilinearExpr::from_terms([(r(1, 1), vec![0, 1]), (r(-1, 1), vec![0])]).unwrap();
        let region = Region::new(vec![0.2, 0.1], vec![0.4, 0.9]).unwrap();
        let iv = e.range(&region);
        assert!((iv.lo - (-0.36)).abs() < 1e-12);
        assert!((iv.hi - (-0.02)).abs() < 1e-12);
    }

    #[test]
    fn display_uses_names() {
        let names = vec!["p".to_string(), "q".to_string()];
        let e = MultilinearExpr::from_terms([
            (r(1, 1), vec![]),
            (r(-1, 1), vec![0]),
            (r(3, 4), vec![0, 1]),
        ])
        .unwrap();
        assert_eq!(e.display(&names).to_string(), "1 - p + 3/4*p*q");
    }

    #[test]
    fn large_coefficients_overflow_cleanly() {
        let big = MultilinearExpr::constant(r(i64::MAX, 1));
        assert_eq!(big.mul(&big), Err(ExprError::Overflow));
    }
}
