//! Dense 64-bit parameter vectors and the handful of element-wise
//! operations the optimizer family needs. All arithmetic stays in f64;
//! the 32-bit wire-cost model lives in the accounting module and never
//! touches in-memory precision.

use crate::error::{Error, Result};

/// Dense real vector holding models, updates, moments, and error memory.
///
/// Values are immutable once shared; every operation returns a new vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

/// The three norms used across the compressors and lemma checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector {
            values: vec![0.0; dim],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ParamVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &ParamVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn scale(&self, a: f64) -> ParamVector {
        self.map(|v| a * v)
    }

    /// Element-wise square, the v_t ingredient.
    pub fn squared(&self) -> ParamVector {
        self.map(|v| v * v)
    }

    pub fn sqrt_elem(&self) -> ParamVector {
        self.map(f64::sqrt)
    }

    pub fn add_scalar(&self, c: f64) -> ParamVector {
        self.map(|v| v + c)
    }

    pub fn div_elem(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a / b))
    }

    pub fn max_elem(&self, other: &ParamVector) -> Result<ParamVector> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, f64::max))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> ParamVector {
        ParamVector {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &ParamVector, f: impl Fn(f64, f64) -> f64) -> ParamVector {
        ParamVector {
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// a*x + y element-wise.
pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
    x.check_dim(y)?;
    Ok(ParamVector {
        values: x
            .values
            .iter()
            .zip(y.values.iter())
            .map(|(&xi, &yi)| a * xi + yi)
            .collect(),
    })
}

/// Per-coordinate max(a_j, b_j, c) with a scalar floor. This is the max
/// stabilization step; c is the epsilon that lives inside the max rather
/// than in the denominator.
pub fn elementwise_max3(a: &ParamVector, b: &ParamVector, c: f64) -> Result<ParamVector> {
    a.check_dim(b)?;
    Ok(ParamVector {
        values: a
            .values
            .iter()
            .zip(b.values.iter())
            .map(|(&ai, &bi)| ai.max(bi).max(c))
            .collect(),
    })
}

/// l1, l2 and l-infinity norms in one pass.
pub fn norms(x: &ParamVector) -> Norms {
    let mut l1 = 0.0;
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    for &v in &x.values {
        l1 += v.abs();
        sq += v * v;
        linf = linf.max(v.abs());
    }
    Norms {
        l1,
        l2: sq.sqrt(),
        linf,
    }
}

/// Sign with sign(0) = 0, shared by the scaled-sign compressor and the
/// yogi variance rule.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
