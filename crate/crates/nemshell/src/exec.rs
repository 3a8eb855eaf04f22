//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the map-style helpers dispatch to
//! rayon; without it they run sequentially. Parallelism is used only for
//! order-preserving maps whose elements are computed independently, so
//! results are bit-identical regardless of thread count. Reductions are
//! always summed in index order for the same reason.
//!
//! [`sequential`] forces the sequential path at runtime on the current
//! thread; the benchmark suite uses it to compare both paths in one binary.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQ: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with the parallel helpers forced onto their sequential path.
pub fn sequential<T>(f: impl FnOnce() -> T) -> T {
    FORCE_SEQ.with(|flag| {
        let prev = flag.get();
        flag.set(true);
        let out = f();
        flag.set(prev);
        out
    })
}

fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQ.with(|flag| flag.get())
}

/// `(0..n).map(f)` collected in order.
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel_enabled();
    (0..n).map(f).collect()
}

/// In-place update of every element, parallel over elements.
pub fn for_each_mut<T: Send>(data: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        data.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
        return;
    }
    let _ = parallel_enabled();
    for (i, v) in data.iter_mut().enumerate() {
        f(i, v);
    }
}

/// Sum of `f(i)` accumulated strictly in index order.
pub fn sum_indexed(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    // Terms may be produced in parallel, but the reduction order is fixed.
    let terms = map_indexed(n, f);
    terms.iter().sum()
}
