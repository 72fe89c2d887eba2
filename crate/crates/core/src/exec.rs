//! Execution policy and deterministic vector kernels.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added in
//! index order, so serial and parallel runs give bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Chunk length used by every reduction and chunked map.
pub const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Serial,
    /// Data-parallel over rayon's pool; falls back to serial when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

fn chunk_sums(exec: Exec, n: usize, f: impl Fn(std::ops::Range<usize>) -> f64 + Sync) -> f64 {
    let chunks = n.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(n);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && chunks > 1 {
        let partial: Vec<f64> = (0..chunks).into_par_iter().map(|c| f(range(c))).collect();
        return partial.iter().sum();
    }
    let _ = exec;
    let mut total = 0.0;
    for c in 0..chunks {
        total += f(range(c));
    }
    total
}

pub fn dot(exec: Exec, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    chunk_sums(exec, a.len(), |r| {
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x * y).sum()
    })
}

pub fn norm(exec: Exec, a: &[f64]) -> f64 {
    dot(exec, a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(exec: Exec, alpha: f64, x: &[f64], y: &mut [f64]) {
    for_each_chunk(exec, y, |offset, ys| {
        for (k, v) in ys.iter_mut().enumerate() {
            *v += alpha * x[offset + k];
        }
    });
}

pub fn scale(exec: Exec, alpha: f64, y: &mut [f64]) {
    for_each_chunk(exec, y, |_, ys| ys.iter_mut().for_each(|v| *v *= alpha));
}

/// Runs `f(offset, chunk)` over fixed-size chunks of `y`.
pub fn for_each_chunk(exec: Exec, y: &mut [f64], f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && y.len() > CHUNK {
        y.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, ys)| f(c * CHUNK, ys));
        return;
    }
    let _ = exec;
    for (c, ys) in y.chunks_mut(CHUNK).enumerate() {
        f(c * CHUNK, ys);
    }
}

/// Order-preserving map over independent work items.
pub fn map<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 1 {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
