//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the [`Execution::Parallel`] mode fans work out
//! over the rayon pool; without it every mode runs sequentially. Reductions
//! always pick the minimum by `(key, index)`, so results never depend on the
//! mode or the thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Evaluates `f` on `0..n` and returns the entry with the smallest key;
/// ties go to the lowest index. `None` results are skipped.
pub fn min_by_key_indexed<T, K, F>(exec: Execution, n: usize, f: F) -> Option<(usize, K, T)>
where
    T: Send,
    K: Ord + Send,
    F: Fn(usize) -> Option<(K, T)> + Sync + Send,
{
    fn better<K: Ord, T>(a: (usize, K, T), b: (usize, K, T)) -> (usize, K, T) {
        if (&b.1, b.0) < (&a.1, a.0) {
            b
        } else {
            a
        }
    }

    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .filter_map(|i| f(i).map(|(k, t)| (i, k, t)))
            .reduce_with(better);
    }
    let _ = exec;
    (0..n).filter_map(|i| f(i).map(|(k, t)| (i, k, t))).reduce(better)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_prefers_lowest_index_on_ties() {
        for exec in [Execution::Parallel, Execution::Sequential] {
            let keys = [5, 3, 7, 3, 3];
            let got = min_by_key_indexed(exec, keys.len(), |i| Some((keys[i], ())));
            assert_eq!(got.map(|(i, k, _)| (i, k)), Some((1, 3)));
        }
    }

    #[test]
    fn map_preserves_order() {
        let seq = map_indexed(Execution::Sequential, 100, |i| i * i);
        let par = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn skips_none() {
        let got = min_by_key_indexed(Execution::Parallel, 10, |i| (i % 4 == 3).then_some((10 - i, i)));
        assert_eq!(got.map(|(i, _, _)| i), Some(7));
        let none = min_by_key_indexed::<(), u8, _>(Execution::Sequential, 3, |_| None);
        assert!(none.is_none());
    }
}
