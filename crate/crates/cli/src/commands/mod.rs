pub mod eval;
pub mod gen_demo;
pub mod predict;
pub mod project;
pub mod rile;
pub mod text;
pub mod train;

use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Maps `f` over `items` on a pool of `threads` workers (all cores when
/// `None`), keeping input order.
pub fn par_map<T, U, F>(items: &[T], threads: Option<usize>, f: F) -> CliResult<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> CliResult<U> + Sync,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::usage(e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}
