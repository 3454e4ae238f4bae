// Order-preserving map over work items. With the `std` feature the items run
// on the rayon pool; results always come back in input order, so callers that
// reduce them sequentially get the same bits either way.

use alloc::vec::Vec;

#[cfg(feature = "std")]
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
