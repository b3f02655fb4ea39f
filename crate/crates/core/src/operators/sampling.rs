use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::space::{Domain, Vector};

pub type Pair = (Vector, Vector);

/// Half-width of the cube sampled when the domain is the whole space.
pub const WHOLE_SPACE_HALF_WIDTH: f64 = 10.0;

/// Deterministic pseudo-random pairs of points of `domain`.
///
/// Boxes are sampled uniformly, balls uniformly by radial sampling, and the
/// whole space through the cube `[-10, 10]^dim`. Same `(domain, dim, count,
/// seed)` gives the same list on every platform (ChaCha8 stream).
pub fn sample_pairs(domain: &Domain, dim: usize, count: usize, seed: u64) -> Result<Vec<Pair>> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    if let Some(d) = domain.dim() {
        if d != dim {
            return Err(Error::DimensionMismatch { left: d, right: dim });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let x = sample_point(domain, dim, &mut rng);
            let y = sample_point(domain, dim, &mut rng);
            (x, y)
        })
        .collect())
}

fn sample_point(domain: &Domain, dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    match domain {
        Domain::WholeSpace => Vector::from_fn(dim, |_| {
            rng.random_range(-WHOLE_SPACE_HALF_WIDTH..=WHOLE_SPACE_HALF_WIDTH)
        }),
        Domain::Box { lo, hi } => Vector::from_fn(dim, |i| {
            if lo[i] == hi[i] {
                lo[i]
            } else {
                rng.random_range(lo[i]..=hi[i])
            }
        }),
        Domain::Ball { center, radius } => {
            let dir = loop {
                let g = Vector::from_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
                let n = g.norm();
                if n > 1e-12 {
                    break (1.0 / n) * &g;
                }
            };
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / dim as f64);
            // keep the point inside despite rounding
            let p = Vector::lincomb(1.0, center, r.min(*radius), &dir);
            domain.project(&p)
        }
    }
}
