use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Real;

use super::TimeGrid;

/// Seed of one simulated path.
///
/// The generator state is a pure function of this pair: `master_seed` keys
/// the whole experiment and `path_index` selects an independent stream, so a
/// path's draws do not depend on which thread produced it or on how many
/// other paths were drawn before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self { master_seed, path_index }
    }

    /// Stream cipher RNG positioned at the start of this path's stream.
    pub(crate) fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        rng
    }
}

/// Draws the Brownian increment matrix for one path: `n_steps` rows of `d`
/// independent `N(0, Δt)` entries, filled row by row.
///
/// Normals are sampled in `f64` and scaled by `√Δt` before conversion to the
/// target scalar, so every scalar type sees the same underlying draw
/// sequence.
pub fn brownian_increments<T: Real>(
    seed: SeedSpec,
    grid: &TimeGrid<T>,
    d: usize,
) -> Array2<T> {
    assert!(d >= 1, "increment matrix needs at least one component");
    let mut rng = seed.rng();
    let sqrt_dt = grid.dt().to_f64_lossy().sqrt();
    Array2::from_shape_fn((grid.n_steps(), d), |_| {
        let z: f64 = rng.sample(StandardNormal);
        T::of(z * sqrt_dt)
    })
}
