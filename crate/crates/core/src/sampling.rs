//! Seeded random test fields.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, ScalarField};

/// Random linear combinations of tensor-product sine modes, masked to the Dirichlet class.
///
/// Each field first draws a bandwidth `K` uniformly from `1..=max_wavenumber`, then
/// `modes_per_field` modes with every wavenumber uniform in `1..=K`, so smooth and rough
/// fields are both common.
#[derive(Debug, Clone, Copy)]
pub struct SineModeFamily {
    pub modes_per_field: usize,
    pub max_wavenumber: u32,
}

impl Default for SineModeFamily {
    fn default() -> Self {
        Self {
            modes_per_field: 4,
            max_wavenumber: 8,
        }
    }
}

impl SineModeFamily {
    pub fn sample<R: Rng>(&self, grid: &Arc<Grid>, rng: &mut R) -> ScalarField {
        let dim = grid.dim();
        let band = rng.gen_range(1..=self.max_wavenumber);
        let modes: Vec<(f64, Vec<u32>)> = (0..self.modes_per_field)
            .map(|_| {
                let c = rng.gen_range(-1.0..1.0);
                let k = (0..dim).map(|_| rng.gen_range(1..=band)).collect();
                (c, k)
            })
            .collect();
        let lo = grid.lo().to_vec();
        let len: Vec<f64> = (0..dim).map(|k| grid.hi()[k] - grid.lo()[k]).collect();
        ScalarField::from_fn(grid.clone(), |x| {
            modes
                .iter()
                .map(|(c, ks)| {
                    c * ks
                        .iter()
                        .enumerate()
                        .map(|(axis, &m)| (PI * m as f64 * (x[axis] - lo[axis]) / len[axis]).sin())
                        .product::<f64>()
                })
                .sum()
        })
        .mask_boundary()
    }

    /// `n` fields from a ChaCha stream seeded with `seed`; prefixes are nested.
    pub fn fields(&self, grid: &Arc<Grid>, n: usize, seed: u64) -> Vec<ScalarField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(grid, &mut rng)).collect()
    }
}

/// `C^∞` step: 0 for `z ≤ 0`, 1 for `z ≥ 1`.
pub fn smooth_step(z: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        f(z) / (f(z) + f(1.0 - z))
    }
}

/// Radial bump: 1 for `r ≤ inner`, 0 for `r ≥ outer`, smooth in between.
pub fn bump(r: f64, inner: f64, outer: f64) -> f64 {
    smooth_step((outer - r) / (outer - inner))
}
