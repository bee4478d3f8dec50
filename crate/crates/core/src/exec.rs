//! Data-parallel helpers over grid-point slices.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! the same chunked loops sequentially. Floating-point reductions always sum
//! fixed-size chunks first and then combine the partial sums in index order,
//! so results do not depend on the thread count or on the feature set.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for reductions and fallible loops.
pub const CHUNK: usize = 1024;

/// Applies `f` to every element in place.
pub fn for_each_mut<T, F>(xs: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    xs.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    #[cfg(not(feature = "parallel"))]
    xs.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Fallible in-place map. On failure the error with the lowest chunk index
/// is returned, independent of scheduling.
pub fn try_for_each_mut<T, E, F>(xs: &mut [T], f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut T) -> Result<(), E> + Sync + Send,
{
    let run = |(ci, chunk): (usize, &mut [T])| -> Result<(), E> {
        for (j, x) in chunk.iter_mut().enumerate() {
            f(ci * CHUNK + j, x)?;
        }
        Ok(())
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<(), E>> = xs.par_chunks_mut(CHUNK).enumerate().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(), E>> = xs.chunks_mut(CHUNK).enumerate().map(run).collect();
    results.into_iter().collect()
}

/// Builds a vector by evaluating `f` at every index in `0..n`, in order.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Deterministic sum of `f(i, x)` over a slice.
pub fn sum_by<T, F>(xs: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(usize, &T) -> f64 + Sync + Send,
{
    let partial = |(ci, chunk): (usize, &[T])| -> f64 {
        let mut s = 0.0;
        for (j, x) in chunk.iter().enumerate() {
            s += f(ci * CHUNK + j, x);
        }
        s
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = xs.par_chunks(CHUNK).enumerate().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = xs.chunks(CHUNK).enumerate().map(partial).collect();
    parts.into_iter().sum()
}

/// Deterministic complex sum of `f(i, x)` over a slice.
pub fn sum_complex_by<T, F>(xs: &[T], f: F) -> num_complex::Complex64
where
    T: Sync,
    F: Fn(usize, &T) -> num_complex::Complex64 + Sync + Send,
{
    use num_complex::Complex64;
    let partial = |(ci, chunk): (usize, &[T])| -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (j, x) in chunk.iter().enumerate() {
            s += f(ci * CHUNK + j, x);
        }
        s
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Complex64> = xs.par_chunks(CHUNK).enumerate().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Complex64> = xs.chunks(CHUNK).enumerate().map(partial).collect();
    parts.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Maximum of `f(x)` over a slice (0 for an empty slice).
pub fn max_by<T, F>(xs: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return xs.par_iter().map(f).reduce(|| 0.0, f64::max);
    #[cfg(not(feature = "parallel"))]
    return xs.iter().map(f).fold(0.0, f64::max);
}
