//! Data-parallel helpers. With the `parallel` feature off, every
//! [`Execution`] runs sequentially.

use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::error::Result;
use crate::scale::ScaleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `(0..len).map(f).collect()`, in index order regardless of execution mode.
pub fn map_indices<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// `items.iter().map(f).collect()`, in input order.
pub fn map_slice<S, T, F>(exec: Execution, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indices(exec, items.len(), |i| f(&items[i]))
}

/// Builds one digest per chunk of `samples` and merges them left to right.
/// The result depends only on `shards`, not on `exec`.
pub fn build_sharded(
    spec: ScaleSpec,
    capacity: usize,
    samples: &[f64],
    shards: usize,
    exec: Execution,
) -> Result<Digest> {
    let shards = shards.max(1);
    let chunk = samples.len().div_ceil(shards).max(1);
    let chunks: Vec<&[f64]> = samples.chunks(chunk).collect();
    let built = map_slice(exec, &chunks, |part| -> Result<Digest> {
        let mut d = Digest::with_capacity(spec, capacity)?;
        d.extend(part.iter().copied())?;
        d.compact();
        Ok(d)
    });
    let built = built.into_iter().collect::<Result<Vec<_>>>()?;
    match Digest::merge_all(&built)? {
        Some(d) => Ok(d),
        None => Digest::with_capacity(spec, capacity),
    }
}
