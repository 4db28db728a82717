//! Execution strategy for the data-parallel kernels.
//!
//! With the default `parallel` feature the heavy loops fan out over rayon;
//! without it the same closures run on plain sequential iterators. Work is
//! always partitioned into disjoint output chunks with a fixed per-chunk
//! evaluation order, so results are bit-identical regardless of thread
//! count or feature selection.

#[cfg(feature = "parallel")]
use crate::error::Error;
use crate::error::Result;

/// Runs `f` over disjoint mutable chunks of `data`, passing the chunk index.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Like [`for_each_chunk`] but over two buffers chunked in lockstep
/// (chunk i of `a` pairs with chunk i of `b`).
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_pair<A, B, F>(a: &mut [A], ca: usize, b: &mut [B], cb: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    use rayon::prelude::*;
    a.par_chunks_mut(ca)
        .zip(b.par_chunks_mut(cb))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_pair<A, B, F>(a: &mut [A], ca: usize, b: &mut [B], cb: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    a.chunks_mut(ca)
        .zip(b.chunks_mut(cb))
        .enumerate()
        .for_each(|(i, (x, y))| f(i, x, y));
}

/// Runs `f` under a worker cap.
///
/// `None` keeps the ambient configuration (rayon's default pool, or plain
/// sequential execution without the `parallel` feature). `Some(n)` installs
/// a dedicated n-thread pool for the duration of the call; `Some(0)` lets
/// the pool pick its own width. Sequential builds accept and ignore the cap.
#[cfg(feature = "parallel")]
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain(format!("failed to build {}-thread pool: {}", n, e)))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let _ = threads;
    Ok(f())
}
