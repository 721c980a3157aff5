//! The four scale functions `k0..k3`, their closed-form inverses and the
//! normalizer `Z(n)` shared by `k2` and `k3`.
//!
//! A scale function maps a quantile `q` to an index `k`. The k-size of a
//! centroid spanning `[q1, q2]` is `k(q2) - k(q1)`; the digest keeps this at
//! or below 1 for every centroid holding more than one sample.
//!
//! `k2` and `k3` diverge at `q = 0` and `q = 1`. Evaluating them there is a
//! [`Error::Unbounded`] error rather than an infinity, so callers must treat
//! a span touching either end as unmergeable.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on image bounds when inverting, so that `k_inverse(k_value(1))`
/// does not trip over the last ulp of `asin(1)`.
const IMAGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    K0,
    K1,
    K2,
    K3,
}

impl ScaleKind {
    pub const ALL: [ScaleKind; 4] = [ScaleKind::K0, ScaleKind::K1, ScaleKind::K2, ScaleKind::K3];

    /// Wire code used by the binary format.
    pub fn code(self) -> u8 {
        match self {
            ScaleKind::K0 => 0,
            ScaleKind::K1 => 1,
            ScaleKind::K2 => 2,
            ScaleKind::K3 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ScaleKind::K0),
            1 => Some(ScaleKind::K1),
            2 => Some(ScaleKind::K2),
            3 => Some(ScaleKind::K3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleKind::K0 => "k0",
            ScaleKind::K1 => "k1",
            ScaleKind::K2 => "k2",
            ScaleKind::K3 => "k3",
        }
    }

    /// Whether `k(q)` diverges at `q = 0` and `q = 1`.
    pub fn unbounded_at_ends(self) -> bool {
        matches!(self, ScaleKind::K2 | ScaleKind::K3)
    }

    fn uses_normalizer(self) -> bool {
        self.unbounded_at_ends()
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "k0" => Ok(ScaleKind::K0),
            "k1" => Ok(ScaleKind::K1),
            "k2" => Ok(ScaleKind::K2),
            "k3" => Ok(ScaleKind::K3),
            other => Err(format!("unknown scale function `{other}` (expected k0, k1, k2 or k3)")),
        }
    }
}

/// Scale function selector together with the compression `delta` and the
/// lower clamp applied to `Z(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    kind: ScaleKind,
    delta: f64,
    normalizer_floor: f64,
}

impl ScaleSpec {
    pub const DEFAULT_NORMALIZER_FLOOR: f64 = 1.0;

    pub fn new(kind: ScaleKind, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidDelta(delta));
        }
        Ok(Self {
            kind,
            delta,
            normalizer_floor: Self::DEFAULT_NORMALIZER_FLOOR,
        })
    }

    pub fn with_normalizer_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor.is_finite() && floor >= 1.0) {
            return Err(Error::InvalidNormalizerFloor(floor));
        }
        self.normalizer_floor = floor;
        Ok(self)
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn normalizer_floor(&self) -> f64 {
        self.normalizer_floor
    }

    /// `Z(n) = max(floor, 4 ln(n / delta) + 24)`, non-decreasing in `n`.
    pub fn normalizer(&self, n: u64) -> f64 {
        let raw = 4.0 * (n as f64 / self.delta).ln() + 24.0;
        // ln(0) = -inf, so n = 0 lands on the floor as well.
        raw.max(self.normalizer_floor)
    }

    fn factor(&self, n: u64) -> f64 {
        match self.kind {
            ScaleKind::K0 => self.delta / 2.0,
            ScaleKind::K1 => self.delta / (2.0 * PI),
            ScaleKind::K2 | ScaleKind::K3 => self.delta / self.normalizer(n),
        }
    }

    /// Maps quantile `q` to the scale index `k`. `n` only matters for `k2`
    /// and `k3`, through `Z(n)`.
    pub fn k_value(&self, q: f64, n: u64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::QuantileOutOfRange(q));
        }
        if self.kind.unbounded_at_ends() && (q == 0.0 || q == 1.0) {
            return Err(Error::Unbounded { kind: self.kind, q });
        }
        let shape = match self.kind {
            ScaleKind::K0 => q,
            ScaleKind::K1 => (2.0 * q - 1.0).asin(),
            ScaleKind::K2 => (q / (1.0 - q)).ln(),
            ScaleKind::K3 => {
                if q <= 0.5 {
                    (2.0 * q).ln()
                } else {
                    -(2.0 * (1.0 - q)).ln()
                }
            }
        };
        Ok(self.factor(n) * shape)
    }

    /// Closed-form inverse of [`k_value`](Self::k_value), clamped to `[0, 1]`.
    pub fn k_inverse(&self, k: f64, n: u64) -> Result<f64> {
        if !k.is_finite() {
            return Err(Error::KOutOfRange { kind: self.kind, k });
        }
        let factor = self.factor(n);
        let out_of_range = |lo: f64, hi: f64| {
            let slack = IMAGE_SLACK * hi.abs().max(lo.abs()).max(1.0);
            k < lo - slack || k > hi + slack
        };
        let q = match self.kind {
            ScaleKind::K0 => {
                if out_of_range(0.0, factor) {
                    return Err(Error::KOutOfRange { kind: self.kind, k });
                }
                k / factor
            }
            ScaleKind::K1 => {
                let half_pi = factor * PI / 2.0;
                if out_of_range(-half_pi, half_pi) {
                    return Err(Error::KOutOfRange { kind: self.kind, k });
                }
                let s = (k / factor).clamp(-PI / 2.0, PI / 2.0);
                (1.0 + s.sin()) / 2.0
            }
            ScaleKind::K2 => {
                let x = k / factor;
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            ScaleKind::K3 => {
                let x = k / factor;
                if x <= 0.0 {
                    x.exp() / 2.0
                } else {
                    1.0 - (-x).exp() / 2.0
                }
            }
        };
        Ok(q.clamp(0.0, 1.0))
    }

    /// `k(q2) - k(q1)`, the quantity the size constraint bounds by 1.
    pub fn k_size(&self, q1: f64, q2: f64, n: u64) -> Result<f64> {
        if q1.is_nan() || q2.is_nan() || q1 > q2 {
            return Err(Error::InvalidInterval { q1, q2 });
        }
        let lo = self.k_value(q1, n)?;
        let hi = self.k_value(q2, n)?;
        Ok(hi - lo)
    }

    /// Whether `k` depends on `n`. Only `k2` and `k3` do.
    pub fn depends_on_count(&self) -> bool {
        self.kind.uses_normalizer()
    }
}

impl fmt::Display for ScaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(delta={}", self.kind, self.delta)?;
        if self.normalizer_floor != Self::DEFAULT_NORMALIZER_FLOOR {
            write!(f, ", floor={}", self.normalizer_floor)?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(kind: ScaleKind, delta: f64) -> ScaleSpec {
        ScaleSpec::new(kind, delta).unwrap()
    }

    #[test]
    fn k_value_examples() {
        assert_eq!(spec(ScaleKind::K0, 100.0).k_value(0.5, 1).unwrap(), 25.0);
        assert_eq!(spec(ScaleKind::K1, 10.0).k_value(0.5, 1).unwrap(), 0.0);
        assert_relative_eq!(spec(ScaleKind::K1, 10.0).k_value(1.0, 1).unwrap(), 2.5, max_relative = 1e-15);
        for n in [1, 100, 1_000_000] {
            assert_eq!(spec(ScaleKind::K2, 37.0).k_value(0.5, n).unwrap(), 0.0);
            assert_eq!(spec(ScaleKind::K3, 37.0).k_value(0.5, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn k_value_domain_errors() {
        let s = spec(ScaleKind::K1, 100.0);
        assert!(matches!(s.k_value(-0.1, 10), Err(Error::QuantileOutOfRange(_))));
        assert!(matches!(s.k_value(1.5, 10), Err(Error::QuantileOutOfRange(_))));
        assert!(matches!(s.k_value(f64::NAN, 10), Err(Error::QuantileOutOfRange(_))));
        for kind in [ScaleKind::K2, ScaleKind::K3] {
            let s = spec(kind, 100.0);
            assert!(matches!(s.k_value(0.0, 10), Err(Error::Unbounded { .. })));
            assert!(matches!(s.k_value(1.0, 10), Err(Error::Unbounded { .. })));
        }
        // k0 and k1 are bounded at the ends.
        assert_eq!(spec(ScaleKind::K0, 100.0).k_value(0.0, 1).unwrap(), 0.0);
        assert_relative_eq!(spec(ScaleKind::K1, 100.0).k_value(0.0, 1).unwrap(), -25.0, max_relative = 1e-15);
    }

    #[test]
    fn k_inverse_examples() {
        assert_eq!(spec(ScaleKind::K0, 100.0).k_inverse(25.0, 1).unwrap(), 0.5);
        assert_eq!(spec(ScaleKind::K1, 10.0).k_inverse(0.0, 1).unwrap(), 0.5);
        let s = spec(ScaleKind::K2, 100.0);
        let k = s.k_value(0.9, 1000).unwrap();
        assert_relative_eq!(s.k_inverse(k, 1000).unwrap(), 0.9, max_relative = 1e-12);
    }

    #[test]
    fn k_inverse_range_errors() {
        assert!(matches!(
            spec(ScaleKind::K0, 100.0).k_inverse(50.1, 1),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            spec(ScaleKind::K1, 100.0).k_inverse(-25.5, 1),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(spec(ScaleKind::K2, 100.0).k_inverse(f64::INFINITY, 1).is_err());
        // The ends of the image invert to the ends of [0, 1].
        let s = spec(ScaleKind::K1, 100.0);
        assert_eq!(s.k_inverse(s.k_value(1.0, 1).unwrap(), 1).unwrap(), 1.0);
        assert_eq!(s.k_inverse(s.k_value(0.0, 1).unwrap(), 1).unwrap(), 0.0);
    }

    #[test]
    fn normalizer_examples() {
        // 4 ln(1e6 / 100) + 24, evaluated in 30-digit arithmetic.
        assert_relative_eq!(
            spec(ScaleKind::K2, 100.0).normalizer(1_000_000),
            60.841_361_487_904_73,
            max_relative = 1e-14
        );
        // The clamp is active once 4 ln(n / delta) + 24 < 1, i.e. n / delta < e^-5.75.
        assert_eq!(spec(ScaleKind::K2, 1000.0).normalizer(1), 1.0);
        assert_eq!(spec(ScaleKind::K2, 10.0).normalizer(0), 1.0);
        let floored = spec(ScaleKind::K3, 1000.0).with_normalizer_floor(3.0).unwrap();
        assert_eq!(floored.normalizer(1), 3.0);
        for delta in [10.0, 100.0, 1000.0] {
            let s = spec(ScaleKind::K2, delta);
            for n in [1u64, 10, 1_000_000] {
                assert!(s.normalizer(2 * n) >= s.normalizer(n));
                assert!(s.normalizer(n) >= s.normalizer_floor());
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(ScaleSpec::new(ScaleKind::K0, 0.0), Err(Error::InvalidDelta(_))));
        assert!(matches!(ScaleSpec::new(ScaleKind::K0, -1.0), Err(Error::InvalidDelta(_))));
        assert!(ScaleSpec::new(ScaleKind::K0, f64::NAN).is_err());
        assert!(ScaleSpec::new(ScaleKind::K0, f64::INFINITY).is_err());
        assert!(matches!(
            spec(ScaleKind::K2, 10.0).with_normalizer_floor(0.5),
            Err(Error::InvalidNormalizerFloor(_))
        ));
    }

    /// Composite Simpson's rule over `dk/dq`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = f(a) + f(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn k_size_examples() {
        assert_eq!(spec(ScaleKind::K0, 4.0).k_size(0.0, 0.5, 2).unwrap(), 1.0);
        for kind in ScaleKind::ALL {
            assert_eq!(spec(kind, 100.0).k_size(0.3, 0.3, 50).unwrap(), 0.0);
        }
        assert!(matches!(
            spec(ScaleKind::K0, 4.0).k_size(0.6, 0.5, 2),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(matches!(
            spec(ScaleKind::K2, 4.0).k_size(0.0, 0.5, 2),
            Err(Error::Unbounded { .. })
        ));

        // k1 over [0.4, 0.6] against quadrature of dk/dq = delta / (pi sqrt(1 - (2q-1)^2)).
        let delta = 100.0;
        let direct = spec(ScaleKind::K1, delta).k_size(0.4, 0.6, 12345).unwrap();
        let quad = simpson(|q| delta / (PI * (1.0 - (2.0 * q - 1.0).powi(2)).sqrt()), 0.4, 0.6, 2000);
        assert_relative_eq!(direct, quad, max_relative = 1e-12);
        // Frozen from a 30-digit quadrature.
        assert_relative_eq!(direct, 6.409_421_684_897_494, max_relative = 1e-14);
    }

    #[test]
    fn k3_branches_meet_at_half() {
        let s = spec(ScaleKind::K3, 100.0);
        let below = s.k_value(0.5 - 1e-12, 1000).unwrap();
        let above = s.k_value(0.5 + 1e-12, 1000).unwrap();
        assert!(below < 0.0 && above > 0.0);
        assert!(above - below < 1e-9);
    }

    #[test]
    fn k1_shrinks_as_count_grows() {
        // Finite difference in n of k1(n2/n) - k1(n1/n) with n1, n2 fixed.
        let s = spec(ScaleKind::K1, 100.0);
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        use rand::{Rng, SeedableRng};
        for _ in 0..100 {
            let n: u64 = rng.random_range(3..1_000_000);
            let n2: u64 = rng.random_range(1..n);
            let n1: u64 = rng.random_range(0..n2);
            let size = |m: u64| s.k_size(n1 as f64 / m as f64, n2 as f64 / m as f64, m).unwrap();
            assert!(size(n + 1) < size(n), "n={n} n1={n1} n2={n2}");
        }
    }

    #[test]
    fn k3_straddle_log_term_falls_with_count() {
        // log(n^2 / (n1 (n - n2))) is decreasing in n while n2 > n / 2.
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(29);
        let log_term = |n: f64, n1: f64, n2: f64| (n * n / (n1 * (n - n2))).ln();
        for _ in 0..100 {
            let n: u64 = rng.random_range(8..1_000_000);
            let n2: u64 = rng.random_range(n / 2 + 2..n);
            let n1: u64 = rng.random_range(1..n / 2);
            let (nf, n1f, n2f) = (n as f64, n1 as f64, n2 as f64);
            assert!(log_term(nf + 1.0, n1f, n2f) < log_term(nf, n1f, n2f));
            // The sign of (n - 2 n2) decides the derivative's sign.
            assert!(nf * (nf - 2.0 * n2f) / (n1f * (nf - n2f).powi(2)) < 0.0);
            // The k-size itself is delta / Z(n) * (log term - ln 4); the constant
            // comes from the 2q and 2(1 - q) inside the logs and leaves the slope alone.
            let s = spec(ScaleKind::K3, 100.0);
            let ks = s.k_size(n1f / nf, n2f / nf, n).unwrap();
            let closed = 100.0 / s.normalizer(n) * (log_term(nf, n1f, n2f) - 4f64.ln());
            assert_relative_eq!(ks, closed, max_relative = 1e-9);
        }
    }

    fn any_kind() -> impl Strategy<Value = ScaleKind> {
        prop_oneof![Just(ScaleKind::K0), Just(ScaleKind::K1), Just(ScaleKind::K2), Just(ScaleKind::K3)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn monotone_in_q(kind in any_kind(), delta in 10.0f64..1000.0, n in 1u64..10_000_000,
                         a in 1e-9f64..1.0, b in 1e-9f64..1.0) {
            prop_assume!(a != b && a < 1.0 && b < 1.0);
            let (qa, qb) = if a < b { (a, b) } else { (b, a) };
            let s = spec(kind, delta);
            prop_assert!(s.k_value(qa, n).unwrap() < s.k_value(qb, n).unwrap());
        }

        #[test]
        fn antisymmetric_about_half(kind in any_kind(), delta in 10.0f64..1000.0,
                                    n in 1u64..10_000_000, q in 1e-6f64..0.999_999) {
            let s = spec(kind, delta);
            let centered = match kind {
                // k0 is symmetric about delta / 4.
                ScaleKind::K0 => s.k_value(q, n).unwrap() - delta / 4.0,
                _ => s.k_value(q, n).unwrap(),
            };
            let mirror = match kind {
                ScaleKind::K0 => s.k_value(1.0 - q, n).unwrap() - delta / 4.0,
                _ => s.k_value(1.0 - q, n).unwrap(),
            };
            prop_assert!((centered + mirror).abs() <= 1e-9 * centered.abs().max(1.0));
        }

        #[test]
        fn inverse_round_trip(kind in any_kind(), delta in 10.0f64..1000.0,
                              n in 1u64..10_000_000, q in 1e-6f64..0.999_999) {
            let s = spec(kind, delta);
            let k = s.k_value(q, n).unwrap();
            prop_assert!((s.k_inverse(k, n).unwrap() - q).abs() <= 1e-10);
        }

        #[test]
        fn normalizer_non_decreasing(delta in 1e-3f64..1e6, n in 0u64..u32::MAX as u64, step in 0u64..1_000_000) {
            let s = spec(ScaleKind::K2, delta);
            prop_assert!(s.normalizer(n + step) >= s.normalizer(n));
            prop_assert!(s.normalizer(n) >= 1.0);
        }
    }
}
