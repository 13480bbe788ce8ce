//! Error-feedback memory: each client compresses delta + carried error,
//! transmits the compressed part, and keeps the residual for its next
//! participation. Non-participants hold their error unchanged (stale
//! errors), which is what makes partial participation sound.

use crate::compressors::{compress, CompressedDelta, CompressorSpec};
use crate::error::{Error, Result};
use crate::vector::ParamVector;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Per-client error memory, all zeros at round one.
#[derive(Clone, Debug)]
pub struct ClientErrorBank {
    errors: Vec<ParamVector>,
    round: u64,
}

impl ClientErrorBank {
    pub fn new(num_clients: usize, dim: usize) -> Self {
        ClientErrorBank {
            errors: (0..num_clients).map(|_| ParamVector::zeros(dim)).collect(),
            round: 0,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.errors.len()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn error(&self, client: usize) -> Result<&ParamVector> {
        self.errors.get(client).ok_or(Error::UnknownClient {
            id: client,
            num_clients: self.errors.len(),
        })
    }
}

/// One client's error-feedback step: compress delta + e, return the wire
/// payload and the next error. The residual is computed against the
/// decoded payload, so what accumulates is exactly what was transmitted.
pub fn ef_step(
    spec: &CompressorSpec,
    delta: &ParamVector,
    e: &ParamVector,
) -> Result<(CompressedDelta, ParamVector)> {
    let corrected = delta.add(e)?;
    let hat = compress(spec, &corrected);
    let e_next = corrected.sub(&hat.decode()?)?;
    Ok((hat, e_next))
}

/// Run ef_step for every participant, committing new errors in client-id
/// order. Participants fan out to the ambient worker pool; the merge is
/// deterministic. Non-participants' entries are untouched.
pub fn apply_round(
    bank: &mut ClientErrorBank,
    participants: &[usize],
    deltas: &BTreeMap<usize, ParamVector>,
    spec: &CompressorSpec,
) -> Result<BTreeMap<usize, CompressedDelta>> {
    for &i in participants {
        if i >= bank.errors.len() {
            return Err(Error::UnknownClient {
                id: i,
                num_clients: bank.errors.len(),
            });
        }
        if !deltas.contains_key(&i) {
            return Err(Error::MissingDelta(i));
        }
    }
    if deltas.len() != participants.len() {
        let extra = deltas.keys().find(|k| !participants.contains(k));
        return Err(Error::Config(format!(
            "deltas map must hold exactly the participants (unexpected client {:?})",
            extra
        )));
    }

    let stepped: Result<Vec<(usize, CompressedDelta, ParamVector)>> = participants
        .par_iter()
        .map(|&i| {
            let (hat, e_next) = ef_step(spec, &deltas[&i], &bank.errors[i])?;
            Ok((i, hat, e_next))
        })
        .collect();

    let mut out = BTreeMap::new();
    for (i, hat, e_next) in stepped? {
        bank.errors[i] = e_next;
        out.insert(i, hat);
    }
    bank.round += 1;
    Ok(out)
}
