//! Maximum variance unfolding (MVU): the discrete program over an
//! r-neighborhood graph, its continuum counterpart, exact geometric oracles
//! for benchmark domains, and the experiments that compare the two.

pub mod analysis;
pub mod eigen;
pub mod experiments;
pub mod energy;
pub mod error;
pub mod graph;
pub mod manifolds;
pub mod points;
pub mod quadrature;
pub mod solver;

pub use error::{MvuError, Result};
pub use points::Points;

/// Independent child seed `k` of `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seconds since the call, as a closure. Reads zero on wasm32, which has no
/// monotonic clock in the standard library.
pub(crate) fn stopwatch() -> impl Fn() -> f64 {
    #[cfg(not(target_arch = "wasm32"))]
    {
        let t0 = std::time::Instant::now();
        move || t0.elapsed().as_secs_f64()
    }
    #[cfg(target_arch = "wasm32")]
    {
        || 0.0
    }
}
