//! K-step local SGD. Each call owns a private copy of the global model,
//! walks it with stochastic gradients, and returns only the difference,
//! never touching shared state.

use crate::error::Result;
use crate::objectives::Objective;
use crate::vector::{axpy, ParamVector};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Local-run shape: K steps of SGD at rate eta_l on mini-batches of the
/// given size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalRunConfig {
    #[serde(rename = "K")]
    pub steps: usize,
    #[serde(rename = "eta_l")]
    pub lr: f64,
    pub batch: usize,
}

impl LocalRunConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.steps < 1 {
            return Err(crate::error::Error::Config("K must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(crate::error::Error::Config(
                "eta_l must be finite and > 0".into(),
            ));
        }
        if self.batch < 1 {
            return Err(crate::error::Error::Config("batch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Run K local steps from x_global for client i and return the model
/// difference x_K - x_global.
pub fn local_sgd(
    obj: &Objective,
    i: usize,
    x_global: &ParamVector,
    cfg: &LocalRunConfig,
    rng: &mut ChaCha12Rng,
) -> Result<ParamVector> {
    let mut x = x_global.clone();
    for _ in 0..cfg.steps {
        let g = obj.stochastic_gradient(i, &x, cfg.batch, rng)?;
        x = axpy(-cfg.lr, &g, &x)?;
    }
    x.sub(x_global)
}

/// Check the update-norm bound that holds whenever gradients are clipped
/// at g_max: K steps of size at most eta_l * g_max each.
pub fn delta_norm_check(delta: &ParamVector, cfg: &LocalRunConfig, g_max: f64) -> bool {
    delta.l2_norm() <= cfg.lr * cfg.steps as f64 * g_max + 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ClientDataset, ObjectiveKind, ObjectiveSpec};
    use crate::rng::{SeedSpec, StreamPurpose};
    use approx::assert_abs_diff_eq;

    /// Single client, F(x) = x^2/2 via one sample with unit feature.
    fn scalar_quadratic() -> Objective {
        Objective::from_datasets(
            ObjectiveKind::Quadratic,
            1,
            vec![ClientDataset {
                client: 0,
                feature_dim: 1,
                features: vec![1.0],
                targets: vec![0.0],
            }],
            0.0,
            None,
        )
        .unwrap()
    }

    fn rng_for(round: u64) -> ChaCha12Rng {
        SeedSpec::new(17).stream(StreamPurpose::LocalSgd, 0, round)
    }

    #[test]
    fn single_step_is_negative_scaled_gradient() {
        let spec = ObjectiveSpec {
            kind: ObjectiveKind::Quadratic,
            dim: 4,
            num_clients: 2,
            heterogeneity: 0.7,
            noise: 0.0,
            samples_per_client: 9,
            clip_threshold: None,
        };
        let obj = Objective::build(&spec, &SeedSpec::new(3)).unwrap();
        let x = ParamVector::from_vec(vec![0.4, -0.2, 0.0, 1.0]);
        let cfg = LocalRunConfig {
            steps: 1,
            lr: 0.05,
            batch: 9,
        };
        let delta = local_sgd(&obj, 1, &x, &cfg, &mut rng_for(0)).unwrap();
        let expected = obj.client_gradient(1, &x).unwrap().scale(-0.05);
        assert!(delta.sub(&expected).unwrap().l2_norm() < 1e-15);
    }

    #[test]
    fn delta_scales_linearly_in_lr_for_one_step() {
        let obj = scalar_quadratic();
        let x = ParamVector::from_vec(vec![1.0]);
        let d1 = local_sgd(
            &obj,
            0,
            &x,
            &LocalRunConfig {
                steps: 1,
                lr: 0.1,
                batch: 1,
            },
            &mut rng_for(0),
        )
        .unwrap();
        let d2 = local_sgd(
            &obj,
            0,
            &x,
            &LocalRunConfig {
                steps: 1,
                lr: 0.2,
                batch: 1,
            },
            &mut rng_for(0),
        )
        .unwrap();
        assert_abs_diff_eq!(2.0 * d1.as_slice()[0], d2.as_slice()[0], epsilon = 1e-15);
    }

    #[test]
    fn three_steps_geometric_contraction() {
        // x <- 0.9 x on F(x) = x^2/2, so delta = 0.9^3 - 1 = -0.271.
        let obj = scalar_quadratic();
        let x = ParamVector::from_vec(vec![1.0]);
        let cfg = LocalRunConfig {
            steps: 3,
            lr: 0.1,
            batch: 1,
        };
        let delta = local_sgd(&obj, 0, &x, &cfg, &mut rng_for(0)).unwrap();
        assert_abs_diff_eq!(delta.as_slice()[0], -0.271, epsilon = 1e-12);
    }

    #[test]
    fn global_model_never_mutated_and_calls_are_pure() {
        let obj = scalar_quadratic();
        let x = ParamVector::from_vec(vec![2.0]);
        let cfg = LocalRunConfig {
            steps: 4,
            lr: 0.1,
            batch: 1,
        };
        let a = local_sgd(&obj, 0, &x, &cfg, &mut rng_for(5)).unwrap();
        let b = local_sgd(&obj, 0, &x, &cfg, &mut rng_for(5)).unwrap();
        assert_eq!(x.as_slice(), &[2.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn norm_check_holds_under_clipping() {
        let spec = ObjectiveSpec {
            kind: ObjectiveKind::Quadratic,
            dim: 6,
            num_clients: 3,
            heterogeneity: 1.0,
            noise: 1.0,
            samples_per_client: 12,
            clip_threshold: Some(1.0),
        };
        let obj = Objective::build(&spec, &SeedSpec::new(4)).unwrap();
        let x = ParamVector::from_vec(vec![3.0; 6]);
        let cfg = LocalRunConfig {
            steps: 5,
            lr: 0.05,
            batch: 2,
        };
        for round in 0..40 {
            for i in 0..3 {
                let mut rng = SeedSpec::new(5).stream(StreamPurpose::LocalSgd, i, round);
                let delta = local_sgd(&obj, i as usize, &x, &cfg, &mut rng).unwrap();
                assert!(delta_norm_check(&delta, &cfg, 1.0));
            }
        }
    }

    #[test]
    fn norm_bound_tight_for_single_full_strength_step() {
        // One clipped step of norm exactly G: ||delta|| = eta_l * G.
        let obj = Objective::from_datasets(
            ObjectiveKind::Quadratic,
            1,
            vec![ClientDataset {
                client: 0,
                feature_dim: 1,
                features: vec![1.0],
                targets: vec![0.0],
            }],
            0.0,
            Some(1.0),
        )
        .unwrap();
        let x = ParamVector::from_vec(vec![50.0]); // raw gradient 50, clipped to 1
        let cfg = LocalRunConfig {
            steps: 1,
            lr: 0.1,
            batch: 1,
        };
        let delta = local_sgd(&obj, 0, &x, &cfg, &mut rng_for(0)).unwrap();
        assert_abs_diff_eq!(delta.l2_norm(), 0.1, epsilon = 1e-12);
        assert!(delta_norm_check(&delta, &cfg, 1.0));
    }

    #[test]
    fn zero_gradient_zero_delta() {
        let obj = scalar_quadratic();
        let x = ParamVector::from_vec(vec![0.0]); // minimizer
        let cfg = LocalRunConfig {
            steps: 7,
            lr: 0.1,
            batch: 1,
        };
        let delta = local_sgd(&obj, 0, &x, &cfg, &mut rng_for(1)).unwrap();
        assert_eq!(delta.l2_norm(), 0.0);
    }
}
