//! Order-preserving parallel maps with a sequential fallback.
//!
//! With the `parallel` feature the maps run on the rayon pool unless
//! [`set_sequential`] has been switched on; without it they always run
//! sequentially. Results come back in input order either way, so callers see
//! identical output regardless of scheduling.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces sequential execution at runtime (used by benchmarks).
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Caps the global pool size. Has no effect once the pool exists.
pub fn init_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Number of items worth handing to [`map`] at once.
pub fn width() -> usize {
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return rayon::current_num_threads().max(1);
    }
    1
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Index and value of the first item (in input order) for which `f`
/// returns `Some`. Evaluation may stop early; the answer does not depend on
/// scheduling.
pub fn find_first<T, R, F>(items: &[T], f: F) -> Option<(usize, R)>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && items.len() > 1 {
        use rayon::prelude::*;
        return items
            .par_iter()
            .enumerate()
            .filter_map(|(i, t)| f(t).map(|r| (i, r)))
            .find_first(|_| true);
    }
    items.iter().enumerate().find_map(|(i, t)| f(t).map(|r| (i, r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved_both_ways() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map(&v, |x| x * x);
        set_sequential(true);
        let b = map(&v, |x| x * x);
        set_sequential(false);
        assert_eq!(a, b);
        assert_eq!(find_first(&v, |&x| (x > 500 && x % 7 == 0).then_some(x)), Some((504, 504)));
    }
}
