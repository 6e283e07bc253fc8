use serde::{Deserialize, Serialize};

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_valid(&self) -> bool {
        self.lo <= self.hi && !self.lo.is_nan() && !self.hi.is_nan()
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lo - tol <= x && x <= self.hi + tol
    }

    pub fn hull(&self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn add(&self, other: Interval) -> Interval {
        Interval::new(self.lo + other.lo, self.hi + other.hi)
    }

    pub fn mul(&self, other: Interval) -> Interval {
        let c = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        Interval::new(
            c.iter().copied().fold(f64::INFINITY, f64::min),
            c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// `[1 - hi, 1 - lo]`
    pub fn complement(&self) -> Interval {
        Interval::new(1.0 - self.hi, 1.0 - self.lo)
    }

    pub fn widen(&self, by: f64) -> Interval {
        Interval::new(self.lo - by, self.hi + by)
    }
}

/// A point in parameter space, indexed like the owning model's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valuation(Vec<f64>);

impl Valuation {
    pub fn new(values: Vec<f64>) -> Self {
        Valuation(values)
    }

    pub fn empty() -> Self {
        Valuation(Vec::new())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Bitwise key, used to memoize analyses of identical valuations.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegionError {
    #[error("bound vectors have different lengths ({0} vs {1})")]
    Arity(usize, usize),
    #[error("lower bound exceeds upper bound for parameter x{0}")]
    Inverted(usize),
    #[error("non-finite bound for parameter x{0}")]
    NonFinite(usize),
}

/// A rectangular parameter region `[[lower, upper]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, RegionError> {
        if lower.len() != upper.len() {
            return Err(RegionError::Arity(lower.len(), upper.len()));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(RegionError::NonFinite(k));
            }
            if lo > hi {
                return Err(RegionError::Inverted(k));
            }
        }
        Ok(Region { lower, upper })
    }

    pub fn from_intervals(intervals: &[Interval]) -> Result<Self, RegionError> {
        Self::new(
            intervals.iter().map(|iv| iv.lo).collect(),
            intervals.iter().map(|iv| iv.hi).collect(),
        )
    }

    pub fn point(v: &Valuation) -> Self {
        Region {
            lower: v.values().to_vec(),
            upper: v.values().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn interval(&self, k: usize) -> Interval {
        Interval::new(self.lower[k], self.upper[k])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, v: &Valuation) -> bool {
        v.len() == self.dim()
            && v.values()
                .iter()
                .enumerate()
                .all(|(k, x)| self.lower[k] <= *x && *x <= self.upper[k])
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|k| self.lower[k] <= other.lower[k] && other.upper[k] <= self.upper[k])
    }

    /// Corners of the region projected onto `params`. Parameters outside
    /// `params` sit at the center; degenerate axes contribute one value only.
    pub fn local_vertices(&self, params: &[u32]) -> Vec<Vec<f64>> {
        let free: Vec<usize> = params
            .iter()
            .map(|&k| k as usize)
            .filter(|&k| self.upper[k] > self.lower[k])
            .collect();
        let base: Vec<f64> = (0..self.dim())
            .map(|k| {
                if params.contains(&(k as u32)) {
                    self.lower[k]
                } else {
                    0.5 * (self.lower[k] + self.upper[k])
                }
            })
            .collect();
        let mut out = Vec::with_capacity(1 << free.len());
        for mask in 0u64..(1u64 << free.len()) {
            let mut v = base.clone();
            for (bit, &k) in free.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    v[k] = self.upper[k];
                }
            }
            out.push(v);
        }
        out
    }
}
