//! Perturbation harness: take a centroid spanning counts `(n1, n2]` out of
//! `n`, add `delta_n` samples strictly to its left or right, and compare its
//! k-size before and after. For all four scale functions the k-size must
//! not grow.
//!
//! Case families follow the reduction by symmetry: `k0`, `k1` and `k2` only
//! need right-side additions; `k3` needs its first branch from both sides
//! plus a centroid straddling `q = 1/2`, whose left-side case is generated
//! by mirroring a right-side one.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_indices, Execution};
use crate::scale::{ScaleKind, ScaleSpec};

/// Allowed floating-point growth of a k-size under perturbation.
pub const PROOF_TOLERANCE: f64 = 1e-12;

/// Sampling range for `n`.
pub const MIN_COUNT: u64 = 10;
pub const MAX_COUNT: u64 = 1_000_000;

/// Failing cases kept per family in a report.
const MAX_REPORTED_FAILURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PerturbationCase {
    pub kind: ScaleKind,
    pub n: u64,
    pub n1: u64,
    pub n2: u64,
    pub delta_n: u64,
    pub side: Side,
}

impl PerturbationCase {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidCase(format!("{msg}: {self:?}")));
        if !(self.n1 < self.n2 && self.n2 <= self.n) {
            return fail("need 0 <= n1 < n2 <= n");
        }
        if self.delta_n == 0 {
            return fail("need delta_n >= 1");
        }
        if self.kind.unbounded_at_ends() && (self.n1 == 0 || self.n2 == self.n) {
            return fail("k diverges at the ends, the centroid must be interior");
        }
        if self.n.checked_add(self.delta_n).is_none() {
            return fail("n + delta_n overflows");
        }
        Ok(())
    }

    /// The same centroid seen through `q -> 1 - q`, with the addition on the
    /// opposite side.
    pub fn mirrored(&self) -> Self {
        Self {
            n1: self.n - self.n2,
            n2: self.n - self.n1,
            side: match self.side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            },
            ..*self
        }
    }
}

/// `(before, after)` k-sizes of the case's centroid, each evaluated with the
/// normalizer at its own total count.
pub fn perturbed_ksize(case: &PerturbationCase, spec: &ScaleSpec) -> Result<(f64, f64)> {
    case.validate()?;
    if case.kind != spec.kind() {
        return Err(Error::InvalidCase(format!(
            "case is for {} but the scale is {}",
            case.kind, spec
        )));
    }
    let n = case.n as f64;
    let (n1, n2, dn) = (case.n1 as f64, case.n2 as f64, case.delta_n as f64);
    let before = spec.k_size(n1 / n, n2 / n, case.n)?;
    let grown = case.n + case.delta_n;
    let total = n + dn;
    let after = match case.side {
        Side::Right => spec.k_size(n1 / total, n2 / total, grown)?,
        Side::Left => spec.k_size((n1 + dn) / total, (n2 + dn) / total, grown)?,
    };
    Ok((before, after))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    K0Right,
    K1Right,
    K2Right,
    K3FirstRight,
    K3FirstLeft,
    K3StraddleRight,
    K3StraddleLeftMirrored,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::K0Right,
        Family::K1Right,
        Family::K2Right,
        Family::K3FirstRight,
        Family::K3FirstLeft,
        Family::K3StraddleRight,
        Family::K3StraddleLeftMirrored,
    ];

    pub fn for_kind(kind: ScaleKind) -> &'static [Family] {
        match kind {
            ScaleKind::K0 => &[Family::K0Right],
            ScaleKind::K1 => &[Family::K1Right],
            ScaleKind::K2 => &[Family::K2Right],
            ScaleKind::K3 => &[
                Family::K3FirstRight,
                Family::K3FirstLeft,
                Family::K3StraddleRight,
                Family::K3StraddleLeftMirrored,
            ],
        }
    }

    pub fn kind(self) -> ScaleKind {
        match self {
            Family::K0Right => ScaleKind::K0,
            Family::K1Right => ScaleKind::K1,
            Family::K2Right => ScaleKind::K2,
            _ => ScaleKind::K3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::K0Right => "k0-right",
            Family::K1Right => "k1-right",
            Family::K2Right => "k2-right",
            Family::K3FirstRight => "k3-first-right",
            Family::K3FirstLeft => "k3-first-left",
            Family::K3StraddleRight => "k3-straddle-right",
            Family::K3StraddleLeftMirrored => "k3-straddle-left-mirrored",
        }
    }

    /// Right-side additions to `k0..k2` centroids strictly shrink the k-size.
    pub fn expects_strict_decrease(self) -> bool {
        matches!(self, Family::K0Right | Family::K1Right | Family::K2Right)
    }

    fn index(self) -> u64 {
        Family::ALL.iter().position(|&f| f == self).unwrap() as u64
    }

    /// Draws a random valid case: `n` log-uniform in `[10, 1e6]`, the pair
    /// `(n1, n2)` uniform over the family's valid region, `delta_n`
    /// log-uniform in `[1, n]`.
    pub fn generate<R: Rng>(self, rng: &mut R) -> PerturbationCase {
        let n = log_uniform(rng, MIN_COUNT, MAX_COUNT);
        let delta_n = log_uniform(rng, 1, n);
        let (n1, n2, side) = match self {
            Family::K0Right | Family::K1Right => {
                let (a, b) = distinct_pair(rng, 0, n);
                (a, b, Side::Right)
            }
            Family::K2Right => {
                let (a, b) = distinct_pair(rng, 1, n - 1);
                (a, b, Side::Right)
            }
            // First branch: q2 <= 1/2, boundary included.
            Family::K3FirstRight | Family::K3FirstLeft => {
                let (a, b) = distinct_pair(rng, 1, n / 2);
                let side = if self == Family::K3FirstRight {
                    Side::Right
                } else {
                    Side::Left
                };
                (a, b, side)
            }
            // 2 n1 < n < 2 n2, interior.
            Family::K3StraddleRight | Family::K3StraddleLeftMirrored => {
                let a = rng.random_range(1..=(n - 1) / 2);
                let b = rng.random_range(n / 2 + 1..=n - 1);
                (a, b, Side::Right)
            }
        };
        let case = PerturbationCase {
            kind: self.kind(),
            n,
            n1,
            n2,
            delta_n,
            side,
        };
        if self == Family::K3StraddleLeftMirrored {
            case.mirrored()
        } else {
            case
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    if lo >= hi {
        return lo;
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64 + 1.0).ln());
    let x = rng.random_range(a..b).exp().floor() as u64;
    x.clamp(lo, hi)
}

/// Two distinct integers from `[lo, hi]`, uniform over unordered pairs, sorted.
fn distinct_pair<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> (u64, u64) {
    debug_assert!(lo < hi);
    let a = rng.random_range(lo..=hi);
    let mut b = rng.random_range(lo..hi);
    if b >= a {
        b += 1;
    }
    (a.min(b), a.max(b))
}

fn trial_rng(seed: u64, family: Family, trial: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the three coordinates.
    let mut z = seed
        ^ family.index().wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED69);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub trial: u64,
    pub case: PerturbationCase,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub family: Family,
    pub trials: u64,
    pub violations: u64,
    /// Trials with `n1 >= 1`, where strict shrinkage is expected for the
    /// right-side families of `k0..k2`.
    pub strict_eligible: u64,
    pub strict_decreases: u64,
    /// Largest `after - before` seen; negative when every case shrank.
    pub worst_excess: f64,
    pub failures: Vec<CaseOutcome>,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn strict_fraction(&self) -> f64 {
        if self.strict_eligible == 0 {
            1.0
        } else {
            self.strict_decreases as f64 / self.strict_eligible as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub scale: ScaleKind,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub families: Vec<FamilyReport>,
    pub worst_excess: f64,
    pub passed: bool,
}

/// Runs `trials` random cases of `family`, flagging every case where
/// `holds(before, after)` is false. Trials are independent and seeded by
/// index, so the report does not depend on `exec`.
pub fn run_family<F>(spec: &ScaleSpec, family: Family, trials: u64, seed: u64, exec: Execution, holds: F) -> FamilyReport
where
    F: Fn(f64, f64) -> bool + Sync + Send,
{
    let outcomes = map_indices(exec, trials as usize, |i| {
        let mut rng = trial_rng(seed, family, i as u64);
        let case = family.generate(&mut rng);
        let (before, after) = perturbed_ksize(&case, spec).expect("generated cases are valid");
        CaseOutcome {
            trial: i as u64,
            case,
            before,
            after,
        }
    });
    let mut report = FamilyReport {
        family,
        trials,
        violations: 0,
        strict_eligible: 0,
        strict_decreases: 0,
        worst_excess: f64::NEG_INFINITY,
        failures: Vec::new(),
    };
    for o in outcomes {
        report.worst_excess = report.worst_excess.max(o.after - o.before);
        if o.case.n1 >= 1 {
            report.strict_eligible += 1;
            if o.after < o.before {
                report.strict_decreases += 1;
            }
        }
        if !holds(o.before, o.after) {
            report.violations += 1;
            if report.failures.len() < MAX_REPORTED_FAILURES {
                report.failures.push(o);
            }
        }
    }
    report
}

/// `after <= before + PROOF_TOLERANCE`.
pub fn does_not_grow(before: f64, after: f64) -> bool {
    after <= before + PROOF_TOLERANCE
}

pub fn proof_property_suite(spec: &ScaleSpec, trials: u64, seed: u64) -> SuiteReport {
    proof_property_suite_with(spec, trials, seed, Execution::default())
}

/// Every case family for `spec`'s scale function, `trials` cases each.
pub fn proof_property_suite_with(spec: &ScaleSpec, trials: u64, seed: u64, exec: Execution) -> SuiteReport {
    let families: Vec<FamilyReport> = Family::for_kind(spec.kind())
        .iter()
        .map(|&family| run_family(spec, family, trials, seed, exec, does_not_grow))
        .collect();
    let worst_excess = families
        .iter()
        .map(|f| f.worst_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = families.iter().all(FamilyReport::passed);
    SuiteReport {
        scale: spec.kind(),
        delta: spec.delta(),
        trials,
        seed,
        families,
        worst_excess,
        passed,
    }
}
