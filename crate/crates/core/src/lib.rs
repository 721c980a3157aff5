//! A mergeable t-digest for streaming quantile estimation.
//!
//! Samples are summarized by centroids ordered by mean. A scale function
//! `k(q)` ([`scale`]) decides how much of the quantile range a centroid may
//! cover: every centroid holding more than one sample must have
//! `k(q2) - k(q1) <= 1`. Compaction enforces this on every merge, and the
//! [`verify`] module checks that adding data never breaks it.
//!
//! ```
//! use tdigest_core::{Digest, ScaleKind, ScaleSpec};
//!
//! let mut digest = Digest::new(ScaleSpec::new(ScaleKind::K1, 100.0).unwrap());
//! digest.extend((0..1000).map(f64::from)).unwrap();
//! let median = digest.quantile(0.5).unwrap();
//! assert!((median - 499.5).abs() < 5.0);
//! assert!(tdigest_core::verify::audit(&{ digest.compact(); digest }).unwrap().passed);
//! ```

pub mod cli;
pub mod digest;
mod error;
pub mod io;
pub mod par;
pub mod scale;
pub mod verify;

pub use digest::{Centroid, Digest, Span};
pub use error::{Error, Result};
pub use par::Execution;
pub use scale::{ScaleKind, ScaleSpec};
