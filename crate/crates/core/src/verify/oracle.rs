use serde::Serialize;

use crate::digest::Digest;
use crate::error::{Error, Result};

/// Samples sorted once for exact empirical quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSamples {
    values: Vec<f64>,
}

impl SortedSamples {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation between order statistics at position `q (m - 1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::QuantileOutOfRange(q));
        }
        let last = self.values.len() - 1;
        let mut pos = q * last as f64;
        // k / (m - 1) * (m - 1) can land an ulp short of k.
        let nearest = pos.round();
        if (pos - nearest).abs() <= 4.0 * f64::EPSILON * nearest {
            pos = nearest;
        }
        let lo = (pos.floor() as usize).min(last);
        let hi = (pos.ceil() as usize).min(last);
        let (a, b) = (self.values[lo], self.values[hi]);
        if lo == hi || a == b {
            return Ok(a);
        }
        Ok((a + (b - a) * (pos - lo as f64)).clamp(a, b))
    }
}

/// Exact empirical quantile of `samples`.
pub fn oracle_quantile(samples: &[f64], q: f64) -> Result<f64> {
    SortedSamples::new(samples.to_vec())?.quantile(q)
}

/// Distance from `q` to the digest's rank range for `value`. Equal to
/// `|cdf(value) - q|` wherever the estimate is strictly increasing.
pub fn q_space_error(digest: &Digest, value: f64, q: f64) -> Result<f64> {
    let (lo, hi) = digest.cdf_range(value)?;
    Ok(if q < lo {
        lo - q
    } else if q > hi {
        q - hi
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub q: f64,
    pub estimate: f64,
    pub oracle: f64,
    pub error: f64,
}

/// Estimate, exact value and q-space error of the digest at each `q`.
pub fn accuracy_table(digest: &Digest, oracle: &SortedSamples, qs: &[f64]) -> Result<Vec<AccuracyRow>> {
    qs.iter()
        .map(|&q| {
            let estimate = digest.quantile(q)?;
            let exact = oracle.quantile(q)?;
            Ok(AccuracyRow {
                q,
                estimate,
                oracle: exact,
                error: q_space_error(digest, exact, q)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::{ScaleKind, ScaleSpec};
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(oracle_quantile(&[3.0, 1.0, 2.0], 0.5).unwrap(), 2.0);
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(oracle_quantile(&[5.0], q).unwrap(), 5.0);
        }
        assert_eq!(oracle_quantile(&[0.0, 10.0], 0.5).unwrap(), 5.0);
        assert_eq!(oracle_quantile(&[], 0.5), Err(Error::EmptySamples));
        assert!(matches!(oracle_quantile(&[1.0], 2.0), Err(Error::QuantileOutOfRange(_))));
    }

    #[test]
    fn constant_stream_has_zero_error() {
        let spec = ScaleSpec::new(ScaleKind::K1, 100.0).unwrap();
        let mut d = Digest::new(spec);
        d.extend(std::iter::repeat_n(5.0, 10_000)).unwrap();
        let oracle = SortedSamples::new(vec![5.0; 10_000]).unwrap();
        let qs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for row in accuracy_table(&d, &oracle, &qs).unwrap() {
            assert_eq!(row.error, 0.0);
            assert_eq!(row.estimate, 5.0);
        }
    }

    proptest! {
        #[test]
        fn monotone_and_exact_on_grid(mut data in prop::collection::vec(-1e9f64..1e9, 1..200)) {
            let s = SortedSamples::new(data.clone()).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=300 {
                let v = s.quantile(i as f64 / 300.0).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
            data.sort_by(f64::total_cmp);
            let m = data.len();
            if m > 1 {
                for (k, &x) in data.iter().enumerate() {
                    let q = k as f64 / (m - 1) as f64;
                    prop_assert_eq!(s.quantile(q).unwrap(), x);
                }
            }
            prop_assert_eq!(s.quantile(0.0).unwrap(), data[0]);
            prop_assert_eq!(s.quantile(1.0).unwrap(), data[m - 1]);
        }
    }
}
