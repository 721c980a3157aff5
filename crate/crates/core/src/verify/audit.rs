use serde::Serialize;

use crate::digest::Digest;
use crate::error::{Error, Result};

/// Slack on the `k-size <= 1` bound, absorbing rounding in `k` evaluation.
pub const AUDIT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub index: usize,
    pub q1: f64,
    pub q2: f64,
    pub weight: f64,
    /// `+inf` where the span touches an end at which `k` diverges.
    pub k_size: f64,
    pub exempt: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSizeReport {
    pub entries: Vec<AuditEntry>,
    /// Largest `k_size - 1` over non-exempt centroids, floored at 0.
    pub worst_excess: f64,
    pub passed: bool,
}

impl KSizeReport {
    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

/// Checks that every centroid either holds a single sample or has
/// k-size at most `1 + AUDIT_EPSILON`.
pub fn audit(digest: &Digest) -> Result<KSizeReport> {
    if !digest.is_compacted() {
        return Err(Error::Uncompacted(digest.buffered()));
    }
    let spec = digest.spec();
    let n = digest.total_weight();
    let mut worst_excess: f64 = 0.0;
    let entries: Vec<AuditEntry> = digest
        .centroid_spans()
        .into_iter()
        .enumerate()
        .map(|(index, span)| {
            let k_size = match spec.k_size(span.q1, span.q2, n) {
                Ok(k) => k,
                Err(Error::Unbounded { .. }) => f64::INFINITY,
                Err(e) => unreachable!("spans of a valid digest lie in [0, 1]: {e}"),
            };
            let exempt = span.weight == 1.0;
            if !exempt {
                worst_excess = worst_excess.max(k_size - 1.0);
            }
            AuditEntry {
                index,
                q1: span.q1,
                q2: span.q2,
                weight: span.weight,
                k_size,
                exempt,
                pass: exempt || k_size <= 1.0 + AUDIT_EPSILON,
            }
        })
        .collect();
    let passed = entries.iter().all(|e| e.pass);
    Ok(KSizeReport {
        entries,
        worst_excess,
        passed,
    })
}

/// Outcome of [`ingest_audited`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestAudit {
    pub compactions: usize,
    pub worst_excess: f64,
    /// First failing report and the sample count at which it occurred.
    pub first_failure: Option<(u64, KSizeReport)>,
}

impl IngestAudit {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Inserts `samples` one at a time and audits the digest after every
/// compaction, including a final one.
pub fn ingest_audited<I: IntoIterator<Item = f64>>(digest: &mut Digest, samples: I) -> Result<IngestAudit> {
    let mut out = IngestAudit {
        compactions: 0,
        worst_excess: 0.0,
        first_failure: None,
    };
    let record = |d: &Digest, out: &mut IngestAudit| -> Result<()> {
        let report = audit(d)?;
        out.compactions += 1;
        out.worst_excess = out.worst_excess.max(report.worst_excess);
        if !report.passed && out.first_failure.is_none() {
            out.first_failure = Some((d.total_weight(), report));
        }
        Ok(())
    };
    for x in samples {
        digest.insert(x)?;
        if digest.is_compacted() {
            record(digest, &mut out)?;
        }
    }
    if !digest.is_compacted() {
        digest.compact();
        record(digest, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::Centroid;
    use crate::scale::{ScaleKind, ScaleSpec};

    #[test]
    fn overweight_centroid_fails() {
        let spec = ScaleSpec::new(ScaleKind::K0, 4.0).unwrap();
        let d = Digest::from_parts(spec, vec![Centroid::new(1.0, 100.0).unwrap()], 1.0, 1.0).unwrap();
        let report = audit(&d).unwrap();
        assert_eq!(report.entries[0].k_size, 2.0);
        assert!(!report.passed);
        assert_eq!(report.worst_excess, 1.0);
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn unit_weights_are_exempt() {
        let spec = ScaleSpec::new(ScaleKind::K2, 100.0).unwrap();
        let centroids = (0..5).map(|i| Centroid::new(i as f64, 1.0).unwrap()).collect();
        let d = Digest::from_parts(spec, centroids, 0.0, 4.0).unwrap();
        let report = audit(&d).unwrap();
        assert!(report.passed);
        assert!(report.entries.iter().all(|e| e.exempt));
        assert_eq!(report.entries[0].k_size, f64::INFINITY);
        assert_eq!(report.worst_excess, 0.0);
    }

    #[test]
    fn multi_weight_end_centroid_under_k2_fails() {
        let spec = ScaleSpec::new(ScaleKind::K2, 100.0).unwrap();
        let centroids = vec![Centroid::new(0.5, 2.0).unwrap(), Centroid::new(3.0, 1.0).unwrap()];
        let d = Digest::from_parts(spec, centroids, 0.0, 3.0).unwrap();
        let report = audit(&d).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst_excess, f64::INFINITY);
    }

    #[test]
    fn uncompacted_is_an_error() {
        let mut d = Digest::new(ScaleSpec::new(ScaleKind::K1, 100.0).unwrap());
        d.insert(1.0).unwrap();
        assert_eq!(audit(&d), Err(Error::Uncompacted(1)));
    }

    #[test]
    fn batched_ingest_passes_for_every_kind() {
        use rand::{Rng, SeedableRng};
        for kind in ScaleKind::ALL {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(kind.code() as u64);
            let mut d = Digest::with_capacity(ScaleSpec::new(kind, 100.0).unwrap(), 1000).unwrap();
            let mut remaining = 100_000usize;
            for batch in 0..100 {
                let size = if batch == 99 {
                    remaining
                } else {
                    rng.random_range(0..=remaining.min(2000))
                };
                remaining -= size;
                let samples: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
                let result = ingest_audited(&mut d, samples).unwrap();
                assert!(result.passed(), "{kind}: {:?}", result.first_failure.map(|f| f.0));
            }
            assert_eq!(d.total_weight(), 100_000);
        }
    }
}
