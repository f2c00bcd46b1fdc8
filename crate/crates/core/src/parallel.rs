//! Order-preserving parallel map used by the assembly loops.

use alloc::vec::Vec;

/// `(0..n).map(f)` collected in index order, in parallel when the `std`
/// feature is enabled.
#[cfg(feature = "std")]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}
