//! Execution helpers for the data-parallel passes.
//!
//! Every parallel section in this crate is an order-preserving map over an
//! index range followed by a sequential reduction, so results are bitwise
//! identical across thread counts and across the sequential fallback.

/// Selects the execution path at runtime. `Auto` follows the crate feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Auto,
    Sequential,
}

/// Maps `f` over `0..len`, preserving index order in the result.
#[cfg(feature = "parallel")]
pub fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_seq(len, f)
}

/// Sequential twin of [`map`]; kept unconditionally for benchmarks.
pub fn map_seq<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

impl Exec {
    pub fn run<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Auto => map(len, f),
            Exec::Sequential => map_seq(len, f),
        }
    }
}

/// Sequential sum in index order. Reductions go through this so that the
/// parallel feature cannot change rounding.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_matches_sequential() {
        let f = |i: usize| (i as f64).sin() * (i as f64 + 0.5).sqrt();
        let a = map(1000, f);
        let b = map_seq(1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn exec_modes_agree() {
        let f = |i: usize| 1.0 / (i as f64 + 1.0);
        assert_eq!(Exec::Auto.run(100, f), Exec::Sequential.run(100, f));
    }
}
