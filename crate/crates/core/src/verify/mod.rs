//! Executable checks of the size constraint: a per-centroid auditor, a
//! perturbation harness showing that added data never grows a centroid's
//! k-size, and an exact sorted-array quantile oracle.

mod audit;
mod oracle;
mod proofs;

pub use audit::{audit, ingest_audited, AuditEntry, IngestAudit, KSizeReport, AUDIT_EPSILON};
pub use oracle::{accuracy_table, oracle_quantile, q_space_error, AccuracyRow, SortedSamples};
pub use proofs::{
    does_not_grow, perturbed_ksize, proof_property_suite, proof_property_suite_with, run_family, CaseOutcome,
    Family, FamilyReport, PerturbationCase, Side, SuiteReport, MAX_COUNT, MIN_COUNT, PROOF_TOLERANCE,
};
