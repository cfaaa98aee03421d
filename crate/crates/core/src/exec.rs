//! Execution policy for the data-parallel loops.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] runs on rayon's
//! pool. Without it, every policy runs sequentially. Outputs are always
//! collected in index order, so both policies produce identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this policy will actually use more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// `(0..n).map(f)` collected in order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps over consecutive chunks of `items`; chunk boundaries depend only on
    /// `chunk_len`, never on scheduling.
    pub fn map_chunks<I, T, F>(self, items: &[I], chunk_len: usize, f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(usize, &[I]) -> T + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        let chunks = items.len().div_ceil(chunk_len);
        self.map_range(chunks, |c| {
            let lo = c * chunk_len;
            let hi = (lo + chunk_len).min(items.len());
            f(c, &items[lo..hi])
        })
    }

    /// Runs `f` inside a pool limited to `jobs` threads (0 = rayon default).
    pub fn with_jobs<T: Send>(self, jobs: usize, f: impl FnOnce() -> T + Send) -> T {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel && jobs > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                return pool.install(f);
            }
        }
        let _ = jobs;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        assert_eq!(Exec::Sequential.map_range(1000, f), Exec::Parallel.map_range(1000, f));
        let items: Vec<u32> = (0..103).collect();
        let g = |c: usize, s: &[u32]| (c, s.iter().sum::<u32>());
        assert_eq!(
            Exec::Sequential.map_chunks(&items, 10, g),
            Exec::Parallel.map_chunks(&items, 10, g)
        );
        assert_eq!(Exec::Parallel.map_chunks(&items, 10, g).len(), 11);
    }
}
