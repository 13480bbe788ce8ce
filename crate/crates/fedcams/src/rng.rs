//! Counter-based random streams. Each consumer derives its own ChaCha
//! stream from (master_seed, purpose, client, round), so the draw order
//! of one client can never perturb another and replays are bit-identical
//! under any thread schedule.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// What a stream is consumed for. The tag is part of the stream key, so
/// two subsystems can never alias each other's randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Data shared by every client (common design matrix, common targets).
    DataCommon = 1,
    /// Per-client dataset perturbations (heterogeneity offsets, labels).
    DataClient = 2,
    /// Mini-batch indices and gradient noise inside one local run.
    LocalSgd = 3,
    /// Participant-subset sampling, keyed by round only.
    Sampling = 4,
    /// Draws used by the variance estimator.
    Variance = 5,
}

/// Master seed plus the derivation rule for per-(purpose, client, round)
/// streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec { master_seed }
    }

    /// Independent stream for (purpose, client, round). The 256-bit ChaCha
    /// key is the label tuple itself, so distinct labels give distinct
    /// streams with no birthday collisions.
    pub fn stream(&self, purpose: StreamPurpose, client: u64, round: u64) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
        seed[16..24].copy_from_slice(&client.to_le_bytes());
        seed[24..32].copy_from_slice(&round.to_le_bytes());
        ChaCha12Rng::from_seed(seed)
    }
}
