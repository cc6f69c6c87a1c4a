//! Parallel/sequential execution switch.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] maps work
//! items on the current rayon pool; without it every mode runs sequentially.
//! Output order always follows input order.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Runs `f` on a dedicated pool of `jobs` threads when parallel, else inline.
    pub fn install<R: Send>(self, jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let (Execution::Parallel, Some(n)) = (self, jobs) {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        let _ = jobs;
        f()
    }
}
