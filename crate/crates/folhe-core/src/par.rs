//! Execution-mode shim: data-parallel loops over rayon with a sequential
//! fallback.
//!
//! With the `parallel` feature (default) the mode is selectable at runtime so
//! benchmarks can compare both paths in one binary; without it everything
//! runs sequentially. The `FOLHE_THREADS` environment variable caps the
//! worker count. Reductions are kept sequential elsewhere so that results are
//! bit-identical across modes and thread counts.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

pub fn set_exec_mode(mode: ExecMode) {
    MODE.store(
        match mode {
            ExecMode::Sequential => 0,
            ExecMode::Parallel => 1,
        },
        Ordering::Relaxed,
    );
}

pub fn exec_mode() -> ExecMode {
    if !cfg!(feature = "parallel") || MODE.load(Ordering::Relaxed) == 0 {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

/// Initialize the global worker pool, honoring FOLHE_THREADS. Safe to call
/// more than once; later calls are no-ops.
pub fn init_threads() {
    #[cfg(feature = "parallel")]
    {
        use std::sync::Once;
        static ONCE: Once = Once::new();
        ONCE.call_once(|| {
            if let Ok(v) = std::env::var("FOLHE_THREADS") {
                if let Ok(nt) = v.parse::<usize>() {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(nt.max(1))
                        .build_global();
                }
            }
        });
    }
}

/// Apply `f` to disjoint chunks of `data`, with the chunk's starting offset.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec_mode() == ExecMode::Parallel {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i * chunk, c));
        return;
    }
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i * chunk, c);
    }
}
