//! Bounded worker pools. Results are always collected in task order, so
//! the worker count changes wall time only.

use rayon::prelude::*;

use crate::RunError;

pub fn pool(workers: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .thread_name(|i| format!("collisim-{i}"))
        .build()
        .map_err(|e| RunError::Usage(format!("cannot start {workers} workers: {e}")))
}

/// Maps `f` over `items` inside the current pool, keeping input order.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Like [`ordered_map`] for fallible tasks; the first error in task order
/// wins.
pub fn try_ordered_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>, RunError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, RunError> + Sync + Send,
{
    ordered_map(items, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_workers() {
        let items: Vec<u64> = (0..200).collect();
        let run = |w| pool(w).unwrap().install(|| ordered_map(&items, |&x| x * x + 1));
        assert_eq!(run(1), run(4));
        assert_eq!(run(3)[17], 290);
    }

    #[test]
    fn first_error_in_task_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = pool(4).unwrap().install(|| {
            try_ordered_map(&items, |&x| if x % 7 == 3 { Err(RunError::Usage(x.to_string())) } else { Ok(x) })
        });
        assert!(matches!(out, Err(RunError::Usage(m)) if m == "3"));
    }
}
