//! Fixed little-endian wire format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TDIG"
//!      4     1  version (1)
//!      5     1  scale kind (0..=3)
//!      6     8  delta, f64
//!     14     8  total weight, u64
//!     22     8  min, f64
//!     30     8  max, f64
//!     38     4  centroid count, u32
//!     42  16*c  (mean f64, weight f64) per centroid, sorted by mean
//! ```
//!
//! An empty digest stores `min = +inf` and `max = -inf`. Every structural
//! invariant is checked on load; the size constraint is left to
//! [`audit`](crate::verify::audit) so that violating files can be inspected.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::digest::{Centroid, Digest, MAX_EXACT_WEIGHT};
use crate::error::{Error, Result};
use crate::scale::{ScaleKind, ScaleSpec};

pub const MAGIC: [u8; 4] = *b"TDIG";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 42;
pub const CENTROID_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown scale kind {0}")]
    UnknownScale(u8),
    #[error("delta must be positive and finite")]
    BadDelta,
    #[error("centroid {0} has a non-finite mean or a weight that is not an integer >= 1")]
    BadCentroid(usize),
    #[error("centroid {0} is out of order")]
    Unsorted(usize),
    #[error("centroid weights sum to {actual}, header says {expected}")]
    WeightSum { expected: u64, actual: u64 },
    #[error("min/max do not enclose the centroid means")]
    BadBounds,
}

pub fn serialized_len(centroids: usize) -> usize {
    HEADER_LEN + CENTROID_LEN * centroids
}

pub fn serialize(digest: &Digest) -> Result<Vec<u8>> {
    if !digest.is_compacted() {
        return Err(Error::Uncompacted(digest.buffered()));
    }
    let centroids = digest.centroids();
    let count = u32::try_from(centroids.len())
        .map_err(|_| Error::InvalidDigest("more than u32::MAX centroids".into()))?;
    let spec = digest.spec();
    let mut out = Vec::with_capacity(serialized_len(centroids.len()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(spec.kind().code());
    out.extend_from_slice(&spec.delta().to_le_bytes());
    out.extend_from_slice(&digest.total_weight().to_le_bytes());
    out.extend_from_slice(&digest.min().to_le_bytes());
    out.extend_from_slice(&digest.max().to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for c in centroids {
        out.extend_from_slice(&c.mean().to_le_bytes());
        out.extend_from_slice(&c.weight().to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Digest, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Length {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take();
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = r.u8();
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let code = r.u8();
    let kind = ScaleKind::from_code(code).ok_or(DecodeError::UnknownScale(code))?;
    let delta = r.f64();
    let spec = ScaleSpec::new(kind, delta).map_err(|_| DecodeError::BadDelta)?;
    let total_weight = r.u64();
    let min = r.f64();
    let max = r.f64();
    let count = r.u32() as usize;
    let expected = serialized_len(count);
    if bytes.len() != expected {
        return Err(DecodeError::Length {
            expected,
            actual: bytes.len(),
        });
    }

    let mut centroids = Vec::with_capacity(count);
    let mut sum: u64 = 0;
    for i in 0..count {
        let mean = r.f64();
        let weight = r.f64();
        let c = Centroid::new(mean, weight).map_err(|_| DecodeError::BadCentroid(i))?;
        if i > 0 && centroids.last().is_some_and(|p: &Centroid| p.mean() > mean) {
            return Err(DecodeError::Unsorted(i));
        }
        debug_assert!(weight <= MAX_EXACT_WEIGHT);
        sum = sum.saturating_add(weight as u64);
        centroids.push(c);
    }
    if sum != total_weight {
        return Err(DecodeError::WeightSum {
            expected: total_weight,
            actual: sum,
        });
    }
    Digest::from_parts(spec, centroids, min, max).map_err(|_| DecodeError::BadBounds)
}

pub fn write_file(path: impl AsRef<Path>, digest: &Digest) -> Result<(), FileError> {
    let bytes = serialize(digest)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| FileError::Io(path.as_ref().display().to_string(), e))
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Digest, FileError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| FileError::Io(path.as_ref().display().to_string(), e))?;
    Ok(deserialize(&bytes).map_err(Error::from)?)
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Digest(#[from] Error),
}

/// Human-readable mirror of the wire fields. Not guaranteed to round-trip.
#[derive(Debug, Clone, Serialize)]
pub struct DigestJson {
    pub version: u8,
    pub scale: ScaleKind,
    pub delta: f64,
    pub total_weight: u64,
    /// `None` for an empty digest.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub centroids: Vec<Centroid>,
}

pub fn to_json(digest: &Digest) -> Result<DigestJson> {
    if !digest.is_compacted() {
        return Err(Error::Uncompacted(digest.buffered()));
    }
    let bounded = !digest.is_empty();
    Ok(DigestJson {
        version: VERSION,
        scale: digest.spec().kind(),
        delta: digest.spec().delta(),
        total_weight: digest.total_weight(),
        min: bounded.then(|| digest.min()),
        max: bounded.then(|| digest.max()),
        centroids: digest.centroids().to_vec(),
    })
}
