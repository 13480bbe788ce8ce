//! Global update rules. The adaptive families share the moment recursions
//! m <- b1*m + (1-b1)*delta and v <- b2*v + (1-b2)*delta^2; they differ
//! only in how the denominator is stabilized. None of them apply bias
//! correction. The max-stabilized family keeps epsilon inside the max and
//! divides by sqrt(v_hat) alone; the others add epsilon after the root.

use crate::error::{Error, Result};
use crate::vector::{axpy, elementwise_max3, sign0, ParamVector};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// Server optimizer family. `fedams` is the max-stabilized member the
/// compressed path builds on; `fedyogi` is an optional extra baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerFamily {
    Fedavg,
    Fedadam,
    Fedamsgrad,
    Fedams,
    Fedyogi,
}

impl OptimizerFamily {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerFamily::Fedavg => "fedavg",
            OptimizerFamily::Fedadam => "fedadam",
            OptimizerFamily::Fedamsgrad => "fedamsgrad",
            OptimizerFamily::Fedams => "fedams",
            OptimizerFamily::Fedyogi => "fedyogi",
        }
    }

    fn tag(self) -> u8 {
        match self {
            OptimizerFamily::Fedavg => 0,
            OptimizerFamily::Fedadam => 1,
            OptimizerFamily::Fedamsgrad => 2,
            OptimizerFamily::Fedams => 3,
            OptimizerFamily::Fedyogi => 4,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => OptimizerFamily::Fedavg,
            1 => OptimizerFamily::Fedadam,
            2 => OptimizerFamily::Fedamsgrad,
            3 => OptimizerFamily::Fedams,
            4 => OptimizerFamily::Fedyogi,
            other => {
                return Err(Error::MalformedPayload(format!(
                    "unknown family tag {other}"
                )))
            }
        })
    }

    /// Default epsilon per family: the max-stabilized member wants a much
    /// smaller floor than the additive-epsilon members.
    pub fn default_epsilon(self) -> f64 {
        match self {
            OptimizerFamily::Fedams => 1e-3,
            _ => 1e-1,
        }
    }
}

/// Hyperparameters shared by every family (fedavg reads only eta).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl ServerHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Mutable optimizer state; exactly one step per round, strictly
/// sequential.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerOptState {
    family: OptimizerFamily,
    hyper: ServerHyper,
    m: ParamVector,
    v: ParamVector,
    v_hat: ParamVector,
    t: u64,
}

/// Mean of the participants' updates, in the caller's (client-id) order.
pub fn aggregate(deltas: &[ParamVector]) -> Result<ParamVector> {
    let first = deltas.first().ok_or(Error::EmptyAggregate)?;
    let mut acc = ParamVector::zeros(first.dim());
    for d in deltas {
        acc = acc.add(d)?;
    }
    Ok(acc.scale(1.0 / deltas.len() as f64))
}

impl ServerOptState {
    pub fn new(family: OptimizerFamily, dim: usize, hyper: ServerHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(ServerOptState {
            family,
            hyper,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            v_hat: ParamVector::zeros(dim),
            t: 0,
        })
    }

    pub fn family(&self) -> OptimizerFamily {
        self.family
    }

    pub fn hyper(&self) -> ServerHyper {
        self.hyper
    }

    pub fn rounds_taken(&self) -> u64 {
        self.t
    }

    pub fn momentum(&self) -> &ParamVector {
        &self.m
    }

    pub fn variance(&self) -> &ParamVector {
        &self.v
    }

    pub fn variance_max(&self) -> &ParamVector {
        &self.v_hat
    }

    /// Apply one global update with the aggregated delta and return the
    /// next iterate.
    pub fn server_step(&mut self, delta: &ParamVector, x: &ParamVector) -> Result<ParamVector> {
        if !delta.is_finite() {
            return Err(Error::NonFiniteDelta);
        }
        let h = self.hyper;
        let next = match self.family {
            OptimizerFamily::Fedavg => axpy(h.eta, delta, x)?,
            OptimizerFamily::Fedadam => {
                self.update_moments(delta)?;
                let denom = self.v.sqrt_elem().add_scalar(h.epsilon);
                axpy(h.eta, &self.m.div_elem(&denom)?, x)?
            }
            OptimizerFamily::Fedamsgrad => {
                self.update_moments(delta)?;
                self.v_hat = self.v_hat.max_elem(&self.v)?;
                let denom = self.v_hat.sqrt_elem().add_scalar(h.epsilon);
                axpy(h.eta, &self.m.div_elem(&denom)?, x)?
            }
            OptimizerFamily::Fedams => {
                self.update_moments(delta)?;
                self.v_hat = elementwise_max3(&self.v_hat, &self.v, h.epsilon)?;
                axpy(h.eta, &self.m.div_elem(&self.v_hat.sqrt_elem())?, x)?
            }
            OptimizerFamily::Fedyogi => {
                self.m = axpy(1.0 - h.beta1, &delta.sub(&self.m)?, &self.m)?;
                let sq = delta.squared();
                let signs = ParamVector::from_vec(
                    self.v
                        .as_slice()
                        .iter()
                        .zip(sq.as_slice())
                        .map(|(&v, &s)| sign0(v - s))
                        .collect(),
                );
                let step = ParamVector::from_vec(
                    sq.as_slice()
                        .iter()
                        .zip(signs.as_slice())
                        .map(|(&s, &sg)| -(1.0 - h.beta2) * s * sg)
                        .collect(),
                );
                self.v = self.v.add(&step)?;
                let denom = self.v.sqrt_elem().add_scalar(h.epsilon);
                axpy(h.eta, &self.m.div_elem(&denom)?, x)?
            }
        };
        self.t += 1;
        Ok(next)
    }

    fn update_moments(&mut self, delta: &ParamVector) -> Result<()> {
        let h = self.hyper;
        self.m = axpy(1.0 - h.beta1, &delta.sub(&self.m)?, &self.m)?;
        let sq = delta.squared();
        self.v = axpy(1.0 - h.beta2, &sq.sub(&self.v)?, &self.v)?;
        Ok(())
    }

    /// Smallest coordinate of v_hat; by the max rule this is >= epsilon
    /// from the first step on. Only meaningful for the max-stabilized
    /// family.
    pub fn denominator_floor(&self) -> Result<f64> {
        if self.family != OptimizerFamily::Fedams {
            return Err(Error::WrongFamily {
                expected: "fedams".into(),
                actual: self.family.name().into(),
            });
        }
        if self.t == 0 {
            return Err(Error::NoStepTaken);
        }
        Ok(self
            .v_hat
            .as_slice()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
    }

    /// Flat little-endian checkpoint: family tag, t, the four
    /// hyperparameters, then m, v, v_hat as f64 arrays.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(41 + 24 * self.m.dim());
        bytes.push(self.family.tag());
        bytes.extend_from_slice(&self.t.to_le_bytes());
        for v in [
            self.hyper.beta1,
            self.hyper.beta2,
            self.hyper.epsilon,
            self.hyper.eta,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for vec in [&self.m, &self.v, &self.v_hat] {
            for &v in vec.as_slice() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, bytes).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        if bytes.len() < 41 || (bytes.len() - 41) % 24 != 0 {
            return Err(Error::MalformedPayload(format!(
                "checkpoint length {} does not fit header + three f64 arrays",
                bytes.len()
            )));
        }
        let family = OptimizerFamily::from_tag(bytes[0])?;
        let t = u64::from_le_bytes(bytes[1..9].try_into().unwrap());
        let mut fields = [0.0; 4];
        for (i, f) in fields.iter_mut().enumerate() {
            *f = f64::from_le_bytes(bytes[9 + 8 * i..17 + 8 * i].try_into().unwrap());
        }
        let dim = (bytes.len() - 41) / 24;
        let mut arrays = Vec::with_capacity(3);
        for a in 0..3 {
            let start = 41 + a * 8 * dim;
            let values: Vec<f64> = bytes[start..start + 8 * dim]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push(ParamVector::from_vec(values));
        }
        let v_hat = arrays.pop().unwrap();
        let v = arrays.pop().unwrap();
        let m = arrays.pop().unwrap();
        Ok(ServerOptState {
            family,
            hyper: ServerHyper {
                beta1: fields[0],
                beta2: fields[1],
                epsilon: fields[2],
                eta: fields[3],
            },
            m,
            v,
            v_hat,
            t,
        })
    }
}
