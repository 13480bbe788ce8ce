//! Biased compression operators with exact error accounting: identity,
//! top-k magnitude sparsification, and scaled sign. Both real compressors
//! are deterministic, so the contraction bound ||C(x) - x|| <= q*||x||
//! holds pathwise, not just in expectation.

use crate::error::{Error, Result};
use crate::vector::{norms, sign0, ParamVector};
use serde::{Deserialize, Serialize};

/// Which operator to apply to an outgoing update.
///
/// For top-k the config carries the ratio r; the kept count is
/// k = max(1, floor(r*d)) at the dimension seen at compress time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompressorSpec {
    Identity,
    Topk { ratio: f64 },
    ScaledSign,
}

impl CompressorSpec {
    /// Config-level sanity: top-k ratio must lie in (0, 1].
    pub fn validate(&self) -> Result<()> {
        if let CompressorSpec::Topk { ratio } = self {
            if !(ratio.is_finite() && *ratio > 0.0 && *ratio <= 1.0) {
                return Err(Error::Config(format!(
                    "topk ratio must be in (0, 1], got {ratio}"
                )));
            }
        }
        Ok(())
    }
}

/// Kept-entry count for a top-k ratio at dimension d.
pub fn topk_count(ratio: f64, d: usize) -> usize {
    ((ratio * d as f64).floor() as usize).max(1)
}

/// Wire form of a compressed update. Bit costs follow the 32-bit float /
/// 32-bit index model of the accounting module even though decoded values
/// stay f64 in memory.
#[derive(Clone, Debug, PartialEq)]
pub enum CompressedDelta {
    Dense(Vec<f64>),
    TopK {
        dim: usize,
        indices: Vec<u32>,
        values: Vec<f64>,
    },
    SignScaled {
        dim: usize,
        scale: f64,
        signs: Vec<i8>,
    },
}

const TAG_DENSE: u8 = 0;
const TAG_TOPK: u8 = 1;
const TAG_SIGN: u8 = 2;

impl CompressedDelta {
    pub fn dim(&self) -> usize {
        match self {
            CompressedDelta::Dense(v) => v.len(),
            CompressedDelta::TopK { dim, .. } => *dim,
            CompressedDelta::SignScaled { dim, .. } => *dim,
        }
    }

    /// Dense vector this payload represents.
    pub fn decode(&self) -> Result<ParamVector> {
        match self {
            CompressedDelta::Dense(v) => Ok(ParamVector::from_vec(v.clone())),
            CompressedDelta::TopK {
                dim,
                indices,
                values,
            } => {
                if indices.len() != values.len() {
                    return Err(Error::MalformedPayload(format!(
                        "index/value length mismatch: {} vs {}",
                        indices.len(),
                        values.len()
                    )));
                }
                let mut out = vec![0.0; *dim];
                let mut prev: Option<u32> = None;
                for (&i, &v) in indices.iter().zip(values.iter()) {
                    if i as usize >= *dim {
                        return Err(Error::MalformedPayload(format!(
                            "index {i} out of range for dim {dim}"
                        )));
                    }
                    if let Some(p) = prev {
                        if i <= p {
                            return Err(Error::MalformedPayload(
                                "indices not strictly increasing".into(),
                            ));
                        }
                    }
                    prev = Some(i);
                    out[i as usize] = v;
                }
                Ok(ParamVector::from_vec(out))
            }
            CompressedDelta::SignScaled { dim, scale, signs } => {
                if signs.len() != *dim {
                    return Err(Error::MalformedPayload(format!(
                        "sign count {} does not match dim {dim}",
                        signs.len()
                    )));
                }
                Ok(ParamVector::from_vec(
                    signs.iter().map(|&s| scale * f64::from(s)).collect(),
                ))
            }
        }
    }

    /// Bits this payload costs on the wire under the 32-bit model:
    /// dense 32d, top-k 64 per kept entry, scaled sign 32 + d.
    pub fn bit_cost(&self) -> u64 {
        match self {
            CompressedDelta::Dense(v) => 32 * v.len() as u64,
            CompressedDelta::TopK { indices, .. } => 64 * indices.len() as u64,
            CompressedDelta::SignScaled { dim, .. } => 32 + *dim as u64,
        }
    }

    /// Little-endian wire encoding: tag byte, dim as u32, then the
    /// variant payload (values as f32, indices as u32, signs packed two
    /// bits per entry). Stable across platforms for golden tests.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            CompressedDelta::Dense(v) => {
                out.push(TAG_DENSE);
                out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                for &x in v {
                    out.extend_from_slice(&(x as f32).to_le_bytes());
                }
            }
            CompressedDelta::TopK {
                dim,
                indices,
                values,
            } => {
                out.push(TAG_TOPK);
                out.extend_from_slice(&(*dim as u32).to_le_bytes());
                out.extend_from_slice(&(indices.len() as u32).to_le_bytes());
                for &i in indices {
                    out.extend_from_slice(&i.to_le_bytes());
                }
                for &x in values {
                    out.extend_from_slice(&(x as f32).to_le_bytes());
                }
            }
            CompressedDelta::SignScaled { dim, scale, signs } => {
                out.push(TAG_SIGN);
                out.extend_from_slice(&(*dim as u32).to_le_bytes());
                out.extend_from_slice(&(*scale as f32).to_le_bytes());
                let mut packed = vec![0u8; dim.div_ceil(4)];
                for (j, &s) in signs.iter().enumerate() {
                    let code: u8 = match s {
                        0 => 0b00,
                        1 => 0b01,
                        -1 => 0b10,
                        other => unreachable!("sign entry {other} outside {{-1,0,1}}"),
                    };
                    packed[j / 4] |= code << ((j % 4) * 2);
                }
                out.extend_from_slice(&packed);
            }
        }
        out
    }

    /// Inverse of to_bytes with full validation of tags, lengths, index
    /// ordering and sign codes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::MalformedPayload(msg);
        if bytes.len() < 5 {
            return Err(bad("payload shorter than tag + dim header".into()));
        }
        let tag = bytes[0];
        let dim = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
        let body = &bytes[5..];
        match tag {
            TAG_DENSE => {
                if body.len() != 4 * dim {
                    return Err(bad(format!("dense body length {} != 4*{dim}", body.len())));
                }
                let values = body
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                    .collect();
                Ok(CompressedDelta::Dense(values))
            }
            TAG_TOPK => {
                if body.len() < 4 {
                    return Err(bad("top-k body missing count".into()));
                }
                let k = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
                if k > dim {
                    return Err(bad(format!("top-k count {k} exceeds dim {dim}")));
                }
                if body.len() != 4 + 8 * k {
                    return Err(bad(format!(
                        "top-k body length {} != 4 + 8*{k}",
                        body.len()
                    )));
                }
                let mut indices = Vec::with_capacity(k);
                for c in body[4..4 + 4 * k].chunks_exact(4) {
                    indices.push(u32::from_le_bytes(c.try_into().unwrap()));
                }
                let values: Vec<f64> = body[4 + 4 * k..]
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                    .collect();
                let delta = CompressedDelta::TopK {
                    dim,
                    indices,
                    values,
                };
                delta.decode()?; // validates ordering and range
                Ok(delta)
            }
            TAG_SIGN => {
                let packed_len = dim.div_ceil(4);
                if body.len() != 4 + packed_len {
                    return Err(bad(format!(
                        "scaled-sign body length {} != 4 + {packed_len}",
                        body.len()
                    )));
                }
                let scale = f64::from(f32::from_le_bytes(body[0..4].try_into().unwrap()));
                let mut signs = Vec::with_capacity(dim);
                for j in 0..dim {
                    let code = (body[4 + j / 4] >> ((j % 4) * 2)) & 0b11;
                    signs.push(match code {
                        0b00 => 0i8,
                        0b01 => 1,
                        0b10 => -1,
                        _ => return Err(bad(format!("invalid sign code at entry {j}"))),
                    });
                }
                // Trailing bits beyond dim must be zero padding.
                if !dim.is_multiple_of(4) {
                    let last = body[4 + packed_len - 1];
                    if last >> ((dim % 4) * 2) != 0 {
                        return Err(bad("nonzero padding bits in sign payload".into()));
                    }
                }
                Ok(CompressedDelta::SignScaled { dim, scale, signs })
            }
            other => Err(bad(format!("unknown variant tag {other}"))),
        }
    }
}

/// Apply the operator. Pure function; ties in top-k go to the lower index
/// so replays are exact.
pub fn compress(spec: &CompressorSpec, x: &ParamVector) -> CompressedDelta {
    match spec {
        CompressorSpec::Identity => CompressedDelta::Dense(x.as_slice().to_vec()),
        CompressorSpec::Topk { ratio } => {
            let d = x.dim();
            let k = topk_count(*ratio, d);
            let vals = x.as_slice();
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| {
                vals[b]
                    .abs()
                    .partial_cmp(&vals[a].abs())
                    .expect("finite entries")
                    .then(a.cmp(&b))
            });
            let mut kept: Vec<usize> = order[..k].to_vec();
            kept.sort_unstable();
            CompressedDelta::TopK {
                dim: d,
                indices: kept.iter().map(|&i| i as u32).collect(),
                values: kept.iter().map(|&i| vals[i]).collect(),
            }
        }
        CompressorSpec::ScaledSign => {
            let d = x.dim();
            let scale = norms(x).l1 / d as f64;
            CompressedDelta::SignScaled {
                dim: d,
                scale,
                signs: x.as_slice().iter().map(|&v| sign0(v) as i8).collect(),
            }
        }
    }
}

/// Contraction factor guaranteed for this input: 0 for identity, the
/// uniform sqrt(1 - k/d) for top-k, and the exact per-input
/// sqrt(1 - ||x||_1^2 / (d*||x||^2)) for scaled sign (0 for the zero
/// vector, where C(0) = 0 makes any q work).
pub fn contraction_q(spec: &CompressorSpec, x: &ParamVector) -> f64 {
    match spec {
        CompressorSpec::Identity => 0.0,
        CompressorSpec::Topk { ratio } => {
            let d = x.dim() as f64;
            let k = topk_count(*ratio, x.dim()) as f64;
            (1.0 - k / d).max(0.0).sqrt()
        }
        CompressorSpec::ScaledSign => {
            let n = norms(x);
            if n.l2 == 0.0 {
                return 0.0;
            }
            let d = x.dim() as f64;
            (1.0 - n.l1 * n.l1 / (d * n.l2 * n.l2)).max(0.0).sqrt()
        }
    }
}

/// ||C(x) - x||_2 computed from the actual decoded payload.
pub fn compression_error(spec: &CompressorSpec, x: &ParamVector) -> f64 {
    let decoded = compress(spec, x)
        .decode()
        .expect("compress produces well-formed payloads");
    decoded
        .sub(x)
        .expect("dims match by construction")
        .l2_norm()
}
