//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in input order, so reductions performed on
//! the returned vectors are bit-identical regardless of thread count.

/// How a data-parallel loop is executed.
///
/// `Parallel` silently degrades to `Sequential` when the crate is built
/// without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Ordered map over a slice.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Deterministic sum: values are produced in parallel, added in index order.
pub fn ordered_sum<T, F>(exec: Exec, items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    map(exec, items, f).into_iter().sum()
}

/// Maximum of `f` over the items, ignoring `None`.
pub fn max_by<T, F>(exec: Exec, items: &[T], f: F) -> Option<f64>
where
    T: Sync,
    F: Fn(&T) -> Option<f64> + Sync + Send,
{
    // max is order independent, so no ordered collection is needed
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items
            .par_iter()
            .filter_map(&f)
            .reduce_with(f64::max);
    }
    let _ = exec;
    items.iter().filter_map(f).reduce(f64::max)
}

/// Configure the global thread pool. Only the first call has an effect.
pub fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = ordered_sum(Exec::Sequential, &xs, |x| x * x);
        let b = ordered_sum(Exec::Parallel, &xs, |x| x * x);
        assert_eq!(a.to_bits(), b.to_bits());
        let m1 = max_by(Exec::Sequential, &xs, |&x| Some(x));
        let m2 = max_by(Exec::Parallel, &xs, |&x| Some(x));
        assert_eq!(m1, m2);
    }
}
