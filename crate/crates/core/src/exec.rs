//! Execution helpers: data-parallel loops under the `parallel` feature,
//! plain loops otherwise. Work is always split at fixed boundaries, so
//! results are identical whichever backend runs them.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Matrices below this element count get sequential row loops even in
/// parallel builds: a rank-one update does one flop per element, and the
/// per-call fork/join barrier only amortizes on large matrices.
pub(crate) const PAR_MIN_ELEMS: usize = 1 << 18;

/// Target elements per parallel task when rows are coalesced.
const TASK_ELEMS: usize = 8192;

/// Caps the global thread pool. `None` leaves the backend default.
///
/// In sequential builds this is a no-op.
#[cfg(feature = "parallel")]
pub fn configure_thread_cap(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_thread_cap(_threads: Option<usize>) {}

/// Applies `f(row_index, row)` to every row of a row-major `m x m` buffer.
pub(crate) fn for_rows(data: &mut [f64], m: usize, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    debug_assert_eq!(data.len(), m * m);
    #[cfg(feature = "parallel")]
    {
        if data.len() >= PAR_MIN_ELEMS {
            let rows_per_task = (TASK_ELEMS / m).max(1);
            data.par_chunks_mut(m * rows_per_task)
                .enumerate()
                .for_each(|(t, block)| {
                    for (r, row) in block.chunks_mut(m).enumerate() {
                        f(t * rows_per_task + r, row);
                    }
                });
            return;
        }
    }
    for (i, row) in data.chunks_mut(m).enumerate() {
        f(i, row);
    }
}

/// Applies `f(chunk_index, chunk)` over fixed-size chunks of a buffer.
/// The final chunk may be shorter.
pub(crate) fn for_chunks(
    data: &mut [f64],
    chunk_len: usize,
    f: impl Fn(usize, &mut [f64]) + Sync + Send,
) {
    debug_assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, chunk)| f(c, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (c, chunk) in data.chunks_mut(chunk_len).enumerate() {
            f(c, chunk);
        }
    }
}

/// Maps `f` over chunk indices `0..n_chunks`, preserving index order.
pub(crate) fn map_chunks<T: Send>(n_chunks: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..n_chunks).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(f).collect()
    }
}
