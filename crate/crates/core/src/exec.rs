//! Execution policy for independent work items (seeds, data pairs, sweeps).
//!
//! Each item runs a sequential solve; only the batch is spread over threads.
//! Without the `parallel` feature every policy runs sequentially, and results
//! are identical in both modes because items never share mutable state.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.into_iter().map(f).collect(),
            Exec::Parallel => par_map(items, f),
        }
    }

    /// Runs `f` inside a pool of `workers` threads (ignored when sequential).
    pub fn with_workers<R: Send>(self, workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let (Exec::Parallel, Some(n)) = (self, workers) {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        let _ = workers;
        f()
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..64).collect();
        let a = Exec::Sequential.map(items.clone(), |x| x * x + 1);
        let b = Exec::Parallel.map(items, |x| x * x + 1);
        assert_eq!(a, b);
    }
}
