//! Class-balanced few-shot exemplar selection by random under-sampling.
//!
//! Quotas are filled round-robin over the classes in schema order, one
//! example per class per round, skipping classes whose stock is exhausted.
//! This keeps the counts of any two classes that still have stock within
//! one of each other. When fewer shots than classes are requested, one
//! example is drawn from each class in schema order and the first
//! `n_shots` are kept. Within a class, examples are drawn uniformly at random.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Example};
use crate::rng::{self, Stream};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("shot pool is empty")]
    EmptyPool,
    #[error("n_shots must be at least 1")]
    ZeroShots,
}

/// The exemplars selected for one trial, in prompt order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSet {
    pub shots: Vec<Example>,
    pub n_requested: usize,
    pub seed: u64,
    /// Set when more shots were requested than the pool holds; `shots` is
    /// then the whole pool.
    pub truncated: bool,
}

impl ShotSet {
    /// The zero-shot set.
    pub fn empty(seed: u64) -> Self {
        Self {
            shots: Vec::new(),
            n_requested: 0,
            seed,
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.shots.iter().map(|e| e.id.as_str())
    }
}

/// Per-class quotas, in the order of `stock`.
pub fn quotas(stock: &[usize], n_shots: usize) -> Vec<usize> {
    let mut quota = vec![0; stock.len()];
    let non_empty = stock.iter().filter(|&&s| s > 0).count();
    let mut remaining = n_shots.min(stock.iter().sum());
    if remaining < non_empty {
        for (q, _) in quota.iter_mut().zip(stock).filter(|(_, &s)| s > 0).take(remaining) {
            *q = 1;
        }
        return quota;
    }
    while remaining > 0 {
        for (q, &s) in quota.iter_mut().zip(stock) {
            if remaining == 0 {
                break;
            }
            if *q < s {
                *q += 1;
                remaining -= 1;
            }
        }
    }
    quota
}

/// Selects `n_shots` class-balanced exemplars from `pool`.
///
/// The result is a pure function of `(pool, n_shots, seed)`. Shots are
/// emitted round by round, with classes visited in a seeded order inside
/// each round, so classes interleave in the prompt.
pub fn rus_select(pool: &Dataset, n_shots: usize, seed: u64) -> Result<ShotSet, SamplerError> {
    if pool.is_empty() {
        return Err(SamplerError::EmptyPool);
    }
    if n_shots == 0 {
        return Err(SamplerError::ZeroShots);
    }
    let mut rng = rng::seeded(seed, Stream::Shots);
    let mut by_class: Vec<Vec<&Example>> = pool
        .schema()
        .labels()
        .iter()
        .map(|label| pool.examples().iter().filter(|e| &e.gold == label).collect())
        .collect();
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let stock: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quota = quotas(&stock, n_shots);

    let mut visit: Vec<usize> = (0..by_class.len()).collect();
    visit.shuffle(&mut rng);
    let rounds = quota.iter().copied().max().unwrap_or(0);
    let mut shots = Vec::with_capacity(quota.iter().sum());
    for round in 0..rounds {
        for &class in &visit {
            if let Some(example) = by_class[class].get(round).filter(|_| round < quota[class]) {
                shots.push((*example).clone());
            }
        }
    }
    if n_shots > pool.len() {
        log::warn!(
            "requested {n_shots} shots from a pool of {}; using the whole pool",
            pool.len()
        );
    }
    Ok(ShotSet {
        shots,
        n_requested: n_shots,
        seed,
        truncated: n_shots > pool.len(),
    })
}
