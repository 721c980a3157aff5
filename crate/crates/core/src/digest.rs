//! Centroid storage, buffered ingestion, merge-compaction and estimation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::ScaleSpec;

/// Weights are integral counts; beyond 2^53 they stop being exact in `f64`.
pub const MAX_EXACT_WEIGHT: f64 = 9_007_199_254_740_992.0;

/// A `(mean, weight)` pair summarizing a contiguous run of samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    mean: f64,
    weight: f64,
}

impl Centroid {
    pub fn new(mean: f64, weight: f64) -> Result<Self> {
        let integral = weight.fract() == 0.0;
        if !mean.is_finite() || weight.is_nan() || weight < 1.0 || !integral || weight > MAX_EXACT_WEIGHT {
            return Err(Error::InvalidCentroid { mean, weight });
        }
        Ok(Self { mean, weight })
    }

    pub(crate) fn unit(mean: f64) -> Self {
        Self { mean, weight: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn absorb(&mut self, other: Centroid) {
        let total = self.weight + other.weight;
        let (lo, hi) = if self.mean <= other.mean {
            (self.mean, other.mean)
        } else {
            (other.mean, self.mean)
        };
        let mean = self.mean * (self.weight / total) + other.mean * (other.weight / total);
        self.mean = mean.clamp(lo, hi);
        self.weight = total;
    }
}

/// Quantile interval covered by one centroid, plus its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub q1: f64,
    pub q2: f64,
    pub weight: f64,
}

/// `(left / n, (left + weight) / n)`. Cumulative weights are exact integers,
/// so adjacent spans share their boundary bit for bit.
pub(crate) fn span_of(left: f64, weight: f64, total: f64) -> (f64, f64) {
    (left / total, (left + weight) / total)
}

fn fits(spec: &ScaleSpec, left: f64, weight: f64, n: u64) -> bool {
    let (q1, q2) = span_of(left, weight, n as f64);
    // Spans touching an end where k diverges can never hold more than one sample.
    spec.k_size(q1, q2, n).is_ok_and(|k| k <= 1.0)
}

/// Greedy single pass over centroids sorted by mean: each next centroid is
/// folded into the current cluster iff the merged cluster has k-size <= 1
/// with respect to `n`.
fn compress(spec: &ScaleSpec, sorted: Vec<Centroid>, n: u64, reverse: bool) -> Vec<Centroid> {
    let mut out = Vec::with_capacity(sorted.len().min(1024));
    let total = n as f64;
    if reverse {
        let mut iter = sorted.into_iter().rev();
        let Some(mut cur) = iter.next() else {
            return out;
        };
        let mut right = 0.0;
        for c in iter {
            let weight = cur.weight + c.weight;
            if fits(spec, total - right - weight, weight, n) {
                cur.absorb(c);
            } else {
                right += cur.weight;
                out.push(cur);
                cur = c;
            }
        }
        out.push(cur);
        out.reverse();
    } else {
        let mut iter = sorted.into_iter();
        let Some(mut cur) = iter.next() else {
            return out;
        };
        let mut left = 0.0;
        for c in iter {
            if fits(spec, left, cur.weight + c.weight, n) {
                cur.absorb(c);
            } else {
                left += cur.weight;
                out.push(cur);
                cur = c;
            }
        }
        out.push(cur);
    }
    out
}

fn by_mean(a: &Centroid, b: &Centroid) -> Ordering {
    a.mean.total_cmp(&b.mean)
}

/// Stable merge of two mean-sorted runs; `first` wins ties.
fn merge_sorted(first: Vec<Centroid>, second: Vec<Centroid>) -> Vec<Centroid> {
    let mut out = Vec::with_capacity(first.len() + second.len());
    let mut a = first.into_iter().peekable();
    let mut b = second.into_iter().peekable();
    loop {
        let take_a = match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => by_mean(x, y) != Ordering::Greater,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        out.push(if take_a { a.next() } else { b.next() }.unwrap());
    }
    out
}

/// A t-digest: centroids sorted by mean, a buffer of unmerged samples and
/// the running sample count, min and max.
#[derive(Debug, Clone, PartialEq)]
pub struct Digest {
    spec: ScaleSpec,
    centroids: Vec<Centroid>,
    buffer: Vec<f64>,
    capacity: usize,
    count: u64,
    min: f64,
    max: f64,
    reverse_next: bool,
}

impl Digest {
    /// Default buffer size, `10 * ceil(delta)` samples.
    pub fn default_capacity(spec: &ScaleSpec) -> usize {
        let cap = 10.0 * spec.delta().ceil();
        if cap >= usize::MAX as f64 {
            usize::MAX
        } else {
            (cap as usize).max(1)
        }
    }

    pub fn new(spec: ScaleSpec) -> Self {
        let capacity = Self::default_capacity(&spec);
        Self::empty(spec, capacity)
    }

    pub fn with_capacity(spec: ScaleSpec, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::ZeroCapacity);
        }
        Ok(Self::empty(spec, capacity))
    }

    fn empty(spec: ScaleSpec, capacity: usize) -> Self {
        Self {
            spec,
            centroids: Vec::new(),
            buffer: Vec::new(),
            capacity,
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            reverse_next: false,
        }
    }

    /// Builds a compacted digest from explicit centroids. Structural
    /// invariants are checked; the size constraint is not, so the result
    /// may fail an audit.
    pub fn from_parts(spec: ScaleSpec, centroids: Vec<Centroid>, min: f64, max: f64) -> Result<Self> {
        let mut count: u64 = 0;
        for (i, c) in centroids.iter().enumerate() {
            Centroid::new(c.mean, c.weight)?;
            if i > 0 && centroids[i - 1].mean > c.mean {
                return Err(Error::InvalidDigest(format!("centroid {i} is out of order")));
            }
            count = count
                .checked_add(c.weight as u64)
                .ok_or_else(|| Error::InvalidDigest("total weight overflows".into()))?;
        }
        if centroids.is_empty() {
            if min != f64::INFINITY || max != f64::NEG_INFINITY {
                return Err(Error::InvalidDigest("empty digest must have min = +inf, max = -inf".into()));
            }
        } else {
            let (first, last) = (centroids[0].mean, centroids[centroids.len() - 1].mean);
            if !min.is_finite() || !max.is_finite() || min > first || max < last {
                return Err(Error::InvalidDigest(format!(
                    "bounds [{min}, {max}] do not enclose centroid means [{first}, {last}]"
                )));
            }
        }
        let mut digest = Self::new(spec);
        digest.centroids = centroids;
        digest.count = count;
        digest.min = min;
        digest.max = max;
        Ok(digest)
    }

    pub fn spec(&self) -> &ScaleSpec {
        &self.spec
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of samples seen, buffered ones included.
    pub fn total_weight(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_compacted(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Smallest sample seen, or `+inf` when empty.
    pub fn min(&self) -> f64 {
        self.min
    }

    /// Largest sample seen, or `-inf` when empty.
    pub fn max(&self) -> f64 {
        self.max
    }

    /// Buffers `x`, compacting once the buffer reaches capacity.
    pub fn insert(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.buffer.push(x);
        self.count += 1;
        if self.buffer.len() >= self.capacity {
            self.compact();
        }
        Ok(())
    }

    /// Inserts every sample, stopping at the first non-finite one.
    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, samples: I) -> Result<()> {
        samples.into_iter().try_for_each(|x| self.insert(x))
    }

    /// Folds the buffer into the centroid list. Successive compactions sweep
    /// in alternating directions.
    pub fn compact(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let mut incoming: Vec<Centroid> = self.buffer.drain(..).map(Centroid::unit).collect();
        incoming.sort_by(by_mean);
        let existing = std::mem::take(&mut self.centroids);
        let sorted = merge_sorted(existing, incoming);
        self.centroids = compress(&self.spec, sorted, self.count, self.reverse_next);
        self.reverse_next = !self.reverse_next;
    }

    /// Digest of the union of both inputs' samples.
    pub fn merge(&self, other: &Digest) -> Result<Digest> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch {
                left: self.spec,
                right: other.spec,
            });
        }
        if other.is_empty() || self.is_empty() {
            let mut out = if other.is_empty() { self.clone() } else { other.clone() };
            out.compact();
            return Ok(out);
        }
        let mut items = Vec::with_capacity(
            self.centroids.len() + self.buffer.len() + other.centroids.len() + other.buffer.len(),
        );
        for d in [self, other] {
            items.extend_from_slice(&d.centroids);
            let mut pending: Vec<Centroid> = d.buffer.iter().copied().map(Centroid::unit).collect();
            pending.sort_by(by_mean);
            items.extend(pending);
        }
        // Stable: ties keep the order above.
        items.sort_by(by_mean);
        let mut out = Digest::empty(self.spec, self.capacity);
        out.count = self.count + other.count;
        out.min = self.min.min(other.min);
        out.max = self.max.max(other.max);
        out.centroids = compress(&self.spec, items, out.count, false);
        out.reverse_next = true;
        Ok(out)
    }

    /// Merges any number of digests left to right.
    pub fn merge_all<'a, I: IntoIterator<Item = &'a Digest>>(digests: I) -> Result<Option<Digest>> {
        let mut iter = digests.into_iter();
        let Some(first) = iter.next() else {
            return Ok(None);
        };
        let mut acc = first.clone();
        acc.compact();
        for d in iter {
            acc = acc.merge(d)?;
        }
        Ok(Some(acc))
    }

    /// Runs `f` on a compacted view without touching `self`.
    fn with_compacted<T>(&self, f: impl FnOnce(&Digest) -> T) -> T {
        if self.buffer.is_empty() {
            f(self)
        } else {
            let mut tmp = self.clone();
            tmp.compact();
            f(&tmp)
        }
    }

    /// Estimated value at quantile `q`. `quantile(0)` and `quantile(1)` are
    /// the exact min and max.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::QuantileOutOfRange(q));
        }
        if self.is_empty() {
            return Err(Error::EmptyDigest);
        }
        Ok(self.with_compacted(|d| d.knots().value_at(q)))
    }

    /// Estimated fraction of samples at or below `x`. Where the estimate is
    /// flat (repeated values), the midpoint of the flat range is returned.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.cdf_range(x)?;
        Ok(lo + (hi - lo) / 2.0)
    }

    /// Range of quantiles whose estimate equals `x`. A single point unless
    /// `x` is a value the piecewise-linear estimate dwells on.
    pub fn cdf_range(&self, x: f64) -> Result<(f64, f64)> {
        if x.is_nan() {
            return Err(Error::NonFinite(x));
        }
        if self.is_empty() {
            return Err(Error::EmptyDigest);
        }
        Ok(self.with_compacted(|d| d.knots().rank_range(x)))
    }

    /// Quantile interval of each centroid: `q1` is the weight strictly to the
    /// left over `n`, `q2 = q1 + weight / n`.
    pub fn centroid_spans(&self) -> Vec<Span> {
        self.with_compacted(|d| {
            let total = d.count as f64;
            let mut left = 0.0;
            d.centroids
                .iter()
                .map(|c| {
                    let (q1, q2) = span_of(left, c.weight, total);
                    left += c.weight;
                    Span {
                        q1,
                        q2,
                        weight: c.weight,
                    }
                })
                .collect()
        })
    }

    fn knots(&self) -> Knots<'_> {
        Knots {
            centroids: &self.centroids,
            min: self.min,
            max: self.max,
            total: self.count as f64,
        }
    }
}

/// The piecewise-linear estimate: `(0, min)`, one knot per centroid at its
/// cumulative-weight midpoint, then `(n, max)`. Knot positions are strictly
/// increasing and values non-decreasing.
struct Knots<'a> {
    centroids: &'a [Centroid],
    min: f64,
    max: f64,
    total: f64,
}

impl Knots<'_> {
    fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut left = 0.0;
        let inner = self.centroids.iter().map(move |c| {
            let mid = left + c.weight / 2.0;
            left += c.weight;
            (mid, c.mean)
        });
        std::iter::once((0.0, self.min))
            .chain(inner)
            .chain(std::iter::once((self.total, self.max)))
    }

    fn value_at(&self, q: f64) -> f64 {
        if q == 0.0 {
            return self.min;
        }
        if q == 1.0 {
            return self.max;
        }
        let t = q * self.total;
        let mut prev = (0.0, self.min);
        for (pos, value) in self.points() {
            if pos == t {
                return value;
            }
            if pos > t {
                let (p0, v0) = prev;
                let frac = (t - p0) / (pos - p0);
                return (v0 + (value - v0) * frac).clamp(v0, value);
            }
            prev = (pos, value);
        }
        self.max
    }

    fn rank_range(&self, x: f64) -> (f64, f64) {
        if x < self.min {
            return (0.0, 0.0);
        }
        if x > self.max {
            return (1.0, 1.0);
        }
        let points: Vec<(f64, f64)> = self.points().collect();
        let interpolate = |(p0, v0): (f64, f64), (p1, v1): (f64, f64)| {
            let frac = (x - v0) / (v1 - v0);
            (p0 + (p1 - p0) * frac).clamp(p0, p1)
        };
        // First knot with value >= x.
        let j = points.partition_point(|&(_, v)| v < x);
        let lo = if j == 0 {
            0.0
        } else {
            interpolate(points[j - 1], points[j])
        };
        // Last knot with value <= x.
        let k = points.partition_point(|&(_, v)| v <= x) - 1;
        let hi = if k + 1 == points.len() {
            self.total
        } else {
            interpolate(points[k], points[k + 1])
        };
        (lo / self.total, hi / self.total)
    }
}
