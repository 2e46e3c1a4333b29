//! Execution helpers: data-parallel maps with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the `map_*` functions run on
//! the rayon thread pool; without it they degrade to plain iteration.  The
//! `*_seq` variants are always sequential and always compiled, so the two
//! paths can be compared in one binary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential variant of [`map_slice`].
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential variant of [`map_indices`].
pub fn map_indices_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let items: Vec<i64> = (0..1000).collect();
        let sq = |x: &i64| x * x;
        assert_eq!(map_slice(&items, sq), map_slice_seq(&items, sq));
        let cube = |i: usize| (i * i * i) as u64;
        assert_eq!(map_indices(1000, cube), map_indices_seq(1000, cube));
    }

    #[test]
    fn empty_inputs() {
        let items: Vec<f64> = vec![];
        assert!(map_slice(&items, |x| x + 1.0).is_empty());
        assert!(map_indices(0, |i| i).is_empty());
    }
}
