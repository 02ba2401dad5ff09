//! Closed axis-aligned boxes, products of boxes, and the point/segment
//! geometry every checker is built on.

use std::fmt;
use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Most corners forced into a sampling campaign.
pub const MAX_CORNERS: usize = 64;

/// Default relative inward margin used to approximate an open box.
pub const DEFAULT_OPEN_MARGIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("interval bounds must be finite with lo <= hi, got [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("a domain needs at least one coordinate")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("segment parameter lambda = {0} lies outside [0, 1]")]
    LambdaOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DomainError> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(DomainError::BadInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    /// Point at fraction `s` of the way from `lo` to `hi`, exact at both ends.
    pub fn lerp(&self, s: f64) -> f64 {
        if s <= 0.0 {
            self.lo
        } else if s >= 1.0 {
            self.hi
        } else {
            self.lo + s * (self.hi - self.lo)
        }
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = DomainError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// A point in R^n. Dimension is checked against a domain only where the two meet.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Point>) -> Point {
        Point(
            parts
                .into_iter()
                .flat_map(|p| p.0.iter().copied())
                .collect(),
        )
    }

    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        dist_sq(&self.0, other)
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `lambda * xbar + (1 - lambda) * y`, written into `out`.
///
/// The endpoints are reproduced exactly, so `lambda = 1` gives `xbar` and
/// `lambda = 0` gives `y` bit for bit. Callers guarantee `out.len()` matches.
pub fn segment_into(xbar: &[f64], y: &[f64], lambda: f64, out: &mut [f64]) {
    for ((o, &a), &b) in out.iter_mut().zip(xbar).zip(y) {
        *o = if lambda == 1.0 {
            a
        } else if lambda == 0.0 {
            b
        } else {
            // clamp so rounding never leaves the segment's bounding box
            (lambda * a + (1.0 - lambda) * b).clamp(a.min(b), a.max(b))
        };
    }
}

pub fn segment_point(xbar: &Point, y: &Point, lambda: f64) -> Result<Point, DomainError> {
    if xbar.dim() != y.dim() {
        return Err(DomainError::DimensionMismatch {
            expected: xbar.dim(),
            got: y.dim(),
        });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(DomainError::LambdaOutOfRange(lambda));
    }
    let mut out = vec![0.0; xbar.dim()];
    segment_into(xbar, y, lambda, &mut out);
    Ok(Point(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct BoxDomain {
    intervals: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for BoxDomain {
    type Error = DomainError;

    fn try_from(v: Vec<Interval>) -> Result<Self, Self::Error> {
        BoxDomain::new(v)
    }
}

impl From<BoxDomain> for Vec<Interval> {
    fn from(b: BoxDomain) -> Self {
        b.intervals
    }
}

impl BoxDomain {
    pub fn new(intervals: Vec<Interval>) -> Result<Self, DomainError> {
        if intervals.is_empty() {
            return Err(DomainError::Empty);
        }
        Ok(Self { intervals })
    }

    /// Convenience constructor from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, DomainError> {
        let intervals = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(intervals)
    }

    /// The same interval repeated `dim` times.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self, DomainError> {
        Self::new(vec![Interval::new(lo, hi)?; dim])
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn lower_corner(&self) -> Point {
        Point(self.intervals.iter().map(Interval::lo).collect())
    }

    pub fn upper_corner(&self) -> Point {
        Point(self.intervals.iter().map(Interval::hi).collect())
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool, DomainError> {
        if p.len() != self.dim() {
            return Err(DomainError::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(self.intervals.iter().zip(p).all(|(i, &t)| i.contains(t)))
    }

    /// Corners in binary counting order: bit `k` of the index selects the
    /// upper bound of coordinate `k`. At most [`MAX_CORNERS`] are produced.
    pub fn corners(&self) -> Vec<Point> {
        let count = self.corner_count();
        (0..count)
            .map(|idx| {
                Point(
                    self.intervals
                        .iter()
                        .enumerate()
                        .map(|(k, i)| {
                            if k < usize::BITS as usize && (idx >> k) & 1 == 1 {
                                i.hi
                            } else {
                                i.lo
                            }
                        })
                        .collect(),
                )
            })
            .collect()
    }

    pub fn corner_count(&self) -> usize {
        if self.dim() >= 7 {
            MAX_CORNERS
        } else {
            (1usize << self.dim()).min(MAX_CORNERS)
        }
    }

    /// `n` points of the box, deterministic in `seed`. When `n` covers the
    /// (capped) corner set, the corners come first.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut out = Vec::with_capacity(n);
        if n >= self.corner_count() {
            out.extend(self.corners());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < n {
            out.push(self.random_point(&mut rng));
        }
        out
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Point {
        Point(
            self.intervals
                .iter()
                .map(|i| i.lerp(rng.gen::<f64>()))
                .collect(),
        )
    }

    /// Tensor grid with `per_axis` points on every axis, endpoints included.
    /// The per-axis count is reduced so the total stays within `cap`; if even
    /// two points per axis exceed the cap, the corners are returned instead.
    pub fn grid(&self, per_axis: usize, cap: usize) -> Vec<Point> {
        let per_axis = self.grid_resolution(per_axis, cap);
        if per_axis < 2 {
            return self.corners();
        }
        let dim = self.dim();
        let total = per_axis.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            out.push(Point(
                self.intervals
                    .iter()
                    .zip(&idx)
                    .map(|(i, &k)| i.lerp(k as f64 / (per_axis - 1) as f64))
                    .collect(),
            ));
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        out
    }

    /// Largest per-axis count `<= per_axis` whose tensor grid fits in `cap`.
    /// Returns 1 when no grid with at least two points per axis fits.
    pub fn grid_resolution(&self, per_axis: usize, cap: usize) -> usize {
        let dim = self.dim() as u32;
        let mut k = per_axis.max(1);
        while k >= 2 {
            match k.checked_pow(dim) {
                Some(total) if total <= cap => return k,
                _ => k -= 1,
            }
        }
        1
    }

    /// Shrinks every interval inward by `margin * width` on each side.
    pub fn shrink(&self, margin: f64) -> BoxDomain {
        BoxDomain {
            intervals: self
                .intervals
                .iter()
                .map(|i| {
                    let d = margin * i.width();
                    Interval {
                        lo: i.lo + d,
                        hi: i.hi - d,
                    }
                })
                .collect(),
        }
    }

    /// Largest `t >= 0` with `origin + t * dir` inside the box (origin assumed inside).
    pub fn ray_exit(&self, origin: &[f64], dir: &[f64]) -> f64 {
        let mut t_max = f64::INFINITY;
        for ((i, &o), &d) in self.intervals.iter().zip(origin).zip(dir) {
            if d > 0.0 {
                t_max = t_max.min((i.hi - o) / d);
            } else if d < 0.0 {
                t_max = t_max.min((i.lo - o) / d);
            }
        }
        t_max.max(0.0)
    }
}

/// A product of boxes, one block per separable factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProductDomainRepr", into = "ProductDomainRepr")]
pub struct ProductDomain {
    blocks: Vec<BoxDomain>,
    flat: BoxDomain,
}

#[derive(Serialize, Deserialize)]
struct ProductDomainRepr {
    blocks: Vec<BoxDomain>,
}

impl TryFrom<ProductDomainRepr> for ProductDomain {
    type Error = DomainError;

    fn try_from(r: ProductDomainRepr) -> Result<Self, Self::Error> {
        ProductDomain::new(r.blocks)
    }
}

impl From<ProductDomain> for ProductDomainRepr {
    fn from(p: ProductDomain) -> Self {
        ProductDomainRepr { blocks: p.blocks }
    }
}

impl ProductDomain {
    pub fn new(blocks: Vec<BoxDomain>) -> Result<Self, DomainError> {
        if blocks.is_empty() {
            return Err(DomainError::Empty);
        }
        let flat = BoxDomain::new(
            blocks
                .iter()
                .flat_map(|b| b.intervals.iter().copied())
                .collect(),
        )?;
        Ok(Self { blocks, flat })
    }

    pub fn single(block: BoxDomain) -> Self {
        Self {
            flat: block.clone(),
            blocks: vec![block],
        }
    }

    /// One scalar block per interval.
    pub fn scalar_blocks(intervals: &[Interval]) -> Result<Self, DomainError> {
        Self::new(
            intervals
                .iter()
                .map(|&i| BoxDomain::new(vec![i]))
                .collect::<Result<_, _>>()?,
        )
    }

    pub fn blocks(&self) -> &[BoxDomain] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(BoxDomain::dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.flat.dim()
    }

    /// All blocks flattened into one box over the concatenated coordinates.
    pub fn flat(&self) -> &BoxDomain {
        &self.flat
    }

    /// Coordinate ranges `[start, end)` of each block.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.dim();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool, DomainError> {
        self.flat.contains(p)
    }
}
