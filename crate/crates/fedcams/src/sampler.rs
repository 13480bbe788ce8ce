//! Uniform without-replacement selection of the participating subset for
//! each round. A partial Fisher-Yates pass over the id range gives a
//! uniformly distributed n-subset in O(n) swaps; the result is sorted so
//! every downstream loop sees clients in id order.

use crate::error::{Error, Result};
use crate::rng::{SeedSpec, StreamPurpose};
use crate::vector::ParamVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Cohort shape: `m` clients total, `n` drawn per round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipationSpec {
    pub m: usize,
    pub n: usize,
}

impl ParticipationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("participation.m must be >= 1".into()));
        }
        if self.n == 0 || self.n > self.m {
            return Err(Error::Config(format!(
                "participation.n must satisfy 1 <= n <= m, got n={} m={}",
                self.n, self.m
            )));
        }
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        self.n == self.m
    }
}

/// Draw the round-`t` participant set: sorted, distinct, uniform over
/// n-subsets, and a pure function of (seed, t).
pub fn sample(spec: ParticipationSpec, t: u64, seed: &SeedSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    let mut rng = seed.stream(StreamPurpose::Sampling, 0, t);
    let mut ids: Vec<usize> = (0..spec.m).collect();
    // Partial Fisher-Yates: after i swaps the prefix ids[..i] is a uniform
    // i-permutation of the pool, so the first n entries form a uniform
    // n-subset.
    for i in 0..spec.n {
        let j = rng.gen_range(i..spec.m);
        ids.swap(i, j);
    }
    ids.truncate(spec.n);
    ids.sort_unstable();
    Ok(ids)
}

/// Monte Carlo gap between the expected subset average and the full
/// average: draws `draws` rounds, averages the per-round subset means, and
/// returns the L2 distance to the mean of all m deltas. Contract: tends to
/// zero at the Monte Carlo rate, certifying the sampler is unbiased.
pub fn participation_unbiasedness_check(
    deltas: &[ParamVector],
    spec: ParticipationSpec,
    draws: u64,
    seed: &SeedSpec,
) -> Result<f64> {
    spec.validate()?;
    if deltas.len() != spec.m {
        return Err(Error::Config(format!(
            "need one delta per client: got {} for m={}",
            deltas.len(),
            spec.m
        )));
    }
    if draws == 0 {
        return Err(Error::Config("draws must be >= 1".into()));
    }
    let dim = deltas[0].dim();
    let mut full = ParamVector::zeros(dim);
    for d in deltas {
        full = full.add(d)?;
    }
    full = full.scale(1.0 / spec.m as f64);

    let mut acc = ParamVector::zeros(dim);
    for t in 0..draws {
        let subset = sample(spec, t, seed)?;
        let mut round = ParamVector::zeros(dim);
        for &i in &subset {
            round = round.add(&deltas[i])?;
        }
        acc = acc.add(&round.scale(1.0 / spec.n as f64))?;
    }
    acc = acc.scale(1.0 / draws as f64);
    Ok(acc.sub(&full)?.l2_norm())
}
