use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sde_core::{TimeGrid, Trajectory};

/// On-policy trajectory store for one outer iteration.
///
/// Holds trajectories of a single policy generation on a single grid. Filling
/// it again discards the previous contents.
#[derive(Clone, Debug)]
pub struct Buffer {
    capacity: usize,
    generation: Option<usize>,
    trajectories: Vec<Trajectory>,
}

impl Buffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            generation: None,
            trajectories: Vec::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn generation(&self) -> Option<usize> {
        self.generation
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn grid(&self) -> Option<&TimeGrid> {
        self.trajectories.first().map(|t| &t.grid)
    }

    /// Replaces the contents with rollouts of policy generation `generation`.
    pub fn fill(&mut self, generation: usize, trajectories: Vec<Trajectory>) -> Result<()> {
        if trajectories.is_empty() {
            return Err(Error::InvalidArgument("cannot fill buffer with no trajectories".into()));
        }
        if trajectories.len() > self.capacity {
            return Err(Error::InvalidArgument(format!(
                "{} trajectories exceed buffer capacity {}",
                trajectories.len(),
                self.capacity
            )));
        }
        let grid = trajectories[0].grid;
        let dims = (trajectories[0].dim_x(), trajectories[0].dim_w());
        if trajectories
            .iter()
            .any(|t| t.grid != grid || (t.dim_x(), t.dim_w()) != dims)
        {
            return Err(Error::InvalidArgument(
                "buffer trajectories must share grid and dimensions".into(),
            ));
        }
        self.generation = Some(generation);
        self.trajectories = trajectories;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.generation = None;
        self.trajectories.clear();
    }

    /// Fails unless the buffer holds data of exactly `generation`.
    pub fn require_generation(&self, generation: usize) -> Result<()> {
        match self.generation {
            Some(g) if g == generation && !self.is_empty() => Ok(()),
            other => Err(Error::State(format!(
                "buffer holds generation {other:?}, expected {generation}"
            ))),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&Trajectory> {
        indices.iter().map(|&i| &self.trajectories[i]).collect()
    }

    /// Minibatch sampler over the stored trajectories.
    pub fn sampler<R: Rng>(&self, batch_size: usize, rng: R) -> Result<EpochSampler<R>> {
        if self.is_empty() {
            return Err(Error::State("sampling from an empty buffer".into()));
        }
        EpochSampler::new(self.len(), batch_size, rng)
    }
}

/// Uniform sampling without replacement within an epoch: each epoch is a
/// fresh permutation cut into chunks of `batch_size` (the last chunk of an
/// epoch may be shorter).
pub struct EpochSampler<R> {
    len: usize,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: R,
}

impl<R: Rng> EpochSampler<R> {
    /// `batch_size` larger than `len` is clamped to `len`.
    pub fn new(len: usize, batch_size: usize, rng: R) -> Result<Self> {
        if len == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument(
                "sampler needs a non-empty population and positive batch size".into(),
            ));
        }
        Ok(Self {
            len,
            batch_size: batch_size.min(len),
            order: Vec::new(),
            cursor: 0,
            rng,
        })
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order = (0..self.len).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let out = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        out
    }
}
