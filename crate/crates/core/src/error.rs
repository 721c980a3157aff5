use thiserror::Error;

use crate::io::DecodeError;
use crate::scale::{ScaleKind, ScaleSpec};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quantile {0} is outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("{kind} is unbounded at q = {q}")]
    Unbounded { kind: ScaleKind, q: f64 },
    #[error("k = {k} is outside the image of {kind}")]
    KOutOfRange { kind: ScaleKind, k: f64 },
    #[error("invalid quantile interval [{q1}, {q2}]")]
    InvalidInterval { q1: f64, q2: f64 },
    #[error("compression must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("normalizer floor must be finite and >= 1, got {0}")]
    InvalidNormalizerFloor(f64),
    #[error("buffer capacity must be at least 1")]
    ZeroCapacity,
    #[error("value must be finite, got {0}")]
    NonFinite(f64),
    #[error("invalid centroid (mean {mean}, weight {weight})")]
    InvalidCentroid { mean: f64, weight: f64 },
    #[error("invalid digest: {0}")]
    InvalidDigest(String),
    #[error("digest is empty")]
    EmptyDigest,
    #[error("digest has {0} buffered samples, compact it first")]
    Uncompacted(usize),
    #[error("scale mismatch: {left} vs {right}")]
    SpecMismatch { left: ScaleSpec, right: ScaleSpec },
    #[error("invalid perturbation case: {0}")]
    InvalidCase(String),
    #[error("no samples")]
    EmptySamples,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
