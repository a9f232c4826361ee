use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TimeGrid;
use crate::error::{Error, Result};

/// Increments `dW_k = W_{t_{k+1}} - W_{t_k}`, stored row-major (`H` rows of `dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianIncrements {
    dim: usize,
    data: Vec<f64>,
}

impl BrownianIncrements {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot be split into increments of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of increments (`H`).
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Draws `H` i.i.d. `N(0, dt·I)` increments of dimension `dim_w`.
pub fn sample_brownian<R: Rng + ?Sized>(
    grid: &TimeGrid,
    dim_w: usize,
    rng: &mut R,
) -> Result<BrownianIncrements> {
    if dim_w == 0 {
        return Err(Error::InvalidArgument("Brownian dimension must be ≥ 1".into()));
    }
    let scale = grid.dt().sqrt();
    let data = (0..grid.steps() * dim_w)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    Ok(BrownianIncrements { dim: dim_w, data })
}

/// Purpose of a random stream; each domain gets an independent key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamDomain {
    Rollout,
    Validation,
    Init,
    Shuffle,
    Custom(u64),
}

impl StreamDomain {
    fn key(self) -> u64 {
        match self {
            StreamDomain::Rollout => 1,
            StreamDomain::Validation => 2,
            StreamDomain::Init => 3,
            StreamDomain::Shuffle => 4,
            StreamDomain::Custom(k) => 0x1000 + k,
        }
    }
}

/// One root seed fanned out into independent ChaCha streams keyed by
/// `(domain, index)`. Rollout `i` always sees the same stream no matter
/// which thread runs it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStreams {
    root: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn rng(&self, domain: StreamDomain, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.root ^ splitmix64(domain.key())));
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
