//! Execution policy for the data-parallel loops (element and site assembly,
//! study sweeps).
//!
//! Every parallel loop collects per-item results in index order and reduces
//! them sequentially afterwards, so the parallel and sequential paths produce
//! bitwise-identical output.

/// How data-parallel loops are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Parallel when the `parallel` feature is compiled in, sequential otherwise.
    #[default]
    Auto,
    Sequential,
    /// Falls back to sequential without the `parallel` feature.
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        match self {
            Execution::Sequential => false,
            Execution::Auto | Execution::Parallel => cfg!(feature = "parallel"),
        }
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
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

/// Maps `f` over a slice, returning results in slice order.
pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
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

/// Splits `0..n` into chunks of `chunk` indices, maps each chunk to a
/// vector and concatenates the results in index order.
pub fn map_chunks<R, F>(exec: Execution, n: usize, chunk: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> Vec<R> + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    let parts = map_range(exec, count, |c| f(c * chunk..((c + 1) * chunk).min(n)));
    parts.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for exec in [Execution::Sequential, Execution::Parallel, Execution::Auto] {
            let v = map_range(exec, 1000, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
            let w = map_slice(exec, &v, |&x| x + 1);
            assert_eq!(w[999], 999 * 999 + 1);
            let c = map_chunks(exec, 1001, 64, |r| r.map(|i| 2 * i).collect());
            assert_eq!(c, (0..1001).map(|i| 2 * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sequential_is_never_parallel() {
        assert!(!Execution::Sequential.is_parallel());
        assert_eq!(Execution::Parallel.is_parallel(), cfg!(feature = "parallel"));
    }
}
