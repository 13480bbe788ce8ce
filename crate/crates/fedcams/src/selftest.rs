//! A fast self-contained invariant battery for the `selftest` CLI
//! subcommand: each check exercises one load-bearing property end to end
//! and reports pass/fail with a one-line diagnostic. The full evidence
//! lives in the test suites; this is the five-second field check.

use crate::client::LocalRunConfig;
use crate::compressors::{compression_error, contraction_q, CompressorSpec};
use crate::config::{ExperimentConfig, OptimizerConfig};
use crate::feedback::{apply_round, ClientErrorBank};
use crate::harness::{csv_string, run};
use crate::objectives::{ObjectiveKind, ObjectiveSpec};
use crate::rng::{SeedSpec, StreamPurpose};
use crate::sampler::{sample, ParticipationSpec};
use crate::server::{OptimizerFamily, ServerHyper, ServerOptState};
use crate::vector::ParamVector;
use rand::Rng;
use std::collections::BTreeMap;

/// Outcome of one named invariant check.
#[derive(Clone, Debug)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: std::result::Result<String, String>) -> SelfCheck {
    match outcome {
        Ok(detail) => SelfCheck {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SelfCheck {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_vector(rng: &mut impl Rng, d: usize, nonzero: bool) -> ParamVector {
    let values: Vec<f64> = (0..d)
        .map(|_| {
            let mut v: f64 = rng.gen_range(-2.0..2.0);
            if nonzero {
                while v.abs() < 1e-3 {
                    v = rng.gen_range(-2.0..2.0);
                }
            }
            v
        })
        .collect();
    ParamVector::from_vec(values)
}

fn reference_table() -> std::result::Result<String, String> {
    let checks = crate::accounting::reference_table_checks(
        crate::accounting::REFERENCE_TABLE_DIM,
        crate::accounting::REFERENCE_TABLE_ROUNDS,
    )
    .map_err(|e| e.to_string())?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}/{} rel err {:.4}", c.scheme, c.column, c.relative_error))
        .collect();
    if failed.is_empty() {
        Ok(format!("all {} cost-table cells within 1%", checks.len()))
    } else {
        Err(format!("cells out of tolerance: {}", failed.join(", ")))
    }
}

fn topk_contraction() -> std::result::Result<String, String> {
    let seed = SeedSpec::new(1001);
    let mut rng = seed.stream(StreamPurpose::Variance, 0, 0);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let d = rng.gen_range(2..40);
        let ratio = rng.gen_range(0.05..1.0);
        let spec = CompressorSpec::Topk { ratio };
        let x = random_vector(&mut rng, d, false);
        let q = contraction_q(&spec, &x);
        let err = compression_error(&spec, &x);
        let bound = q * x.l2_norm() + 1e-9;
        if err > bound {
            return Err(format!(
                "trial {trial}: error {err} exceeds q bound {bound} (d={d}, r={ratio})"
            ));
        }
        if bound > 0.0 {
            worst = worst.max(err / bound);
        }
    }
    Ok(format!(
        "200 random draws obey the q contraction bound (worst ratio {worst:.3})"
    ))
}

fn scaled_sign_exactness() -> std::result::Result<String, String> {
    let seed = SeedSpec::new(1002);
    let mut rng = seed.stream(StreamPurpose::Variance, 0, 1);
    for trial in 0..200 {
        let d = rng.gen_range(1..40);
        let x = random_vector(&mut rng, d, true);
        let err = compression_error(&CompressorSpec::ScaledSign, &x);
        let lhs = err * err;
        let l1 = x.as_slice().iter().map(|v| v.abs()).sum::<f64>();
        let rhs = x.l2_norm_sq() - l1 * l1 / d as f64;
        if (lhs - rhs).abs() > 1e-9 * x.l2_norm_sq().max(1.0) {
            return Err(format!("trial {trial}: |{lhs} - {rhs}| too large (d={d})"));
        }
    }
    Ok("sign-compression error matches its closed form on 200 draws".into())
}

fn error_feedback_telescopes() -> std::result::Result<String, String> {
    let (m, d, rounds) = (6usize, 12usize, 40u64);
    let spec = CompressorSpec::Topk { ratio: 0.25 };
    let seed = SeedSpec::new(1003);
    let mut bank = ClientErrorBank::new(m, d);
    let mut sum_raw = vec![ParamVector::zeros(d); m];
    let mut sum_decoded = vec![ParamVector::zeros(d); m];
    for r in 0..rounds {
        let participants =
            sample(ParticipationSpec { m, n: 3 }, r, &seed).map_err(|e| e.to_string())?;
        let mut deltas = BTreeMap::new();
        for &i in &participants {
            let mut rng = seed.stream(StreamPurpose::LocalSgd, i as u64, r);
            let delta = random_vector(&mut rng, d, false).scale(0.1);
            sum_raw[i] = sum_raw[i].add(&delta).unwrap();
            deltas.insert(i, delta);
        }
        let hats =
            apply_round(&mut bank, &participants, &deltas, &spec).map_err(|e| e.to_string())?;
        for (i, hat) in hats {
            sum_decoded[i] = sum_decoded[i]
                .add(&hat.decode().map_err(|e| e.to_string())?)
                .unwrap();
        }
    }
    let mut worst = 0.0f64;
    for i in 0..m {
        let reconstructed = sum_decoded[i].add(bank.error(i).unwrap()).unwrap();
        let gap = reconstructed.sub(&sum_raw[i]).unwrap().l2_norm();
        let scale = sum_raw[i].l2_norm().max(1.0);
        worst = worst.max(gap / scale);
    }
    if worst <= 1e-6 {
        Ok(format!(
            "decoded sums + residual errors rebuild raw sums (worst rel gap {worst:.2e})"
        ))
    } else {
        Err(format!("telescoping broke: worst relative gap {worst:.2e}"))
    }
}

fn identity_feedback_stays_zero() -> std::result::Result<String, String> {
    let (m, d) = (4usize, 8usize);
    let seed = SeedSpec::new(1004);
    let mut bank = ClientErrorBank::new(m, d);
    for r in 0..10u64 {
        let participants: Vec<usize> = (0..m).collect();
        let mut deltas = BTreeMap::new();
        for &i in &participants {
            let mut rng = seed.stream(StreamPurpose::LocalSgd, i as u64, r);
            deltas.insert(i, random_vector(&mut rng, d, false));
        }
        apply_round(&mut bank, &participants, &deltas, &CompressorSpec::Identity)
            .map_err(|e| e.to_string())?;
    }
    for i in 0..m {
        let norm = bank.error(i).unwrap().l2_norm();
        if norm != 0.0 {
            return Err(format!(
                "client {i} accumulated error {norm} under identity"
            ));
        }
    }
    Ok("identity compression leaves every error buffer exactly zero".into())
}

fn vhat_monotone_and_floored() -> std::result::Result<String, String> {
    let eps = 1e-3;
    let hyper = ServerHyper {
        beta1: 0.9,
        beta2: 0.99,
        epsilon: eps,
        eta: 1.0,
    };
    let mut st =
        ServerOptState::new(OptimizerFamily::Fedams, 5, hyper).map_err(|e| e.to_string())?;
    let seed = SeedSpec::new(1005);
    let mut x = ParamVector::zeros(5);
    let mut prev = vec![0.0; 5];
    for r in 0..100u64 {
        let mut rng = seed.stream(StreamPurpose::LocalSgd, 0, r);
        let delta = random_vector(&mut rng, 5, false).scale(0.2);
        x = st.server_step(&delta, &x).map_err(|e| e.to_string())?;
        for (j, (&new, &old)) in st.variance_max().as_slice().iter().zip(&prev).enumerate() {
            if new < old {
                return Err(format!("round {r}: v_hat[{j}] decreased {old} -> {new}"));
            }
            if new < eps {
                return Err(format!("round {r}: v_hat[{j}] = {new} below floor {eps}"));
            }
        }
        prev = st.variance_max().as_slice().to_vec();
    }
    let floor = st.denominator_floor().map_err(|e| e.to_string())?;
    Ok(format!(
        "v_hat stayed monotone with floor {floor:.3e} >= {eps:.0e} over 100 rounds"
    ))
}

fn quad_config(m: usize, n: usize, rounds: u64) -> ExperimentConfig {
    ExperimentConfig {
        objective: ObjectiveSpec {
            kind: ObjectiveKind::Quadratic,
            dim: 6,
            num_clients: m,
            heterogeneity: 0.5,
            noise: 0.0,
            samples_per_client: 8,
            clip_threshold: None,
        },
        optimizer: OptimizerConfig {
            family: OptimizerFamily::Fedams,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: None,
            eta: None,
        },
        local: LocalRunConfig {
            steps: 3,
            lr: 0.05,
            batch: 8,
        },
        participation: ParticipationSpec { m, n },
        compressor: None,
        rounds,
        master_seed: 23,
        eval_every: 1,
        output_path: None,
    }
}

fn fedavg_model_average() -> std::result::Result<String, String> {
    let mut cfg = quad_config(3, 3, 4);
    cfg.optimizer.family = OptimizerFamily::Fedavg;
    let result = crate::harness::run_traced(&cfg).map_err(|e| e.to_string())?;
    let seed = cfg.seed_spec();
    let obj =
        crate::objectives::Objective::build(&cfg.objective, &seed).map_err(|e| e.to_string())?;
    let mut x = ParamVector::zeros(obj.dim());
    for r in 0..cfg.rounds {
        let mut avg = ParamVector::zeros(obj.dim());
        for i in 0..3usize {
            let mut rng = seed.stream(StreamPurpose::LocalSgd, i as u64, r);
            let delta = crate::client::local_sgd(&obj, i, &x, &cfg.local, &mut rng)
                .map_err(|e| e.to_string())?;
            avg = avg.add(&x.add(&delta).unwrap()).unwrap();
        }
        avg = avg.scale(1.0 / 3.0);
        let gap = avg.sub(&result.models[r as usize]).unwrap().l2_norm();
        if gap > 1e-12 {
            return Err(format!(
                "round {r}: harness deviates from model average by {gap}"
            ));
        }
        x = avg;
    }
    Ok("averaging-family global model equals the direct local-model average".into())
}

fn sampler_inclusion() -> std::result::Result<String, String> {
    let spec = ParticipationSpec { m: 10, n: 3 };
    let seed = SeedSpec::new(1006);
    let draws = 20_000u64;
    let mut counts = vec![0u64; spec.m];
    for t in 0..draws {
        for i in sample(spec, t, &seed).map_err(|e| e.to_string())? {
            counts[i] += 1;
        }
    }
    let p = 0.3;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    let mut worst = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        let dev = (c as f64 / draws as f64 - p).abs();
        worst = worst.max(dev);
        if dev > 5.0 * se {
            return Err(format!(
                "client {i} inclusion rate off by {dev:.4} (> 5 SE)"
            ));
        }
    }
    Ok(format!(
        "inclusion rates within 5 SE of 0.3 (worst dev {worst:.4})"
    ))
}

fn replay_determinism() -> std::result::Result<String, String> {
    let cfg = quad_config(5, 2, 10);
    let a = run(&cfg).map_err(|e| e.to_string())?;
    let b = run(&cfg).map_err(|e| e.to_string())?;
    if csv_string(&a.records) == csv_string(&b.records) {
        Ok("two replays emit byte-identical CSV".into())
    } else {
        Err("replays disagreed".into())
    }
}

fn identity_run_reduction() -> std::result::Result<String, String> {
    let plain = quad_config(4, 2, 12);
    let mut wrapped = plain.clone();
    wrapped.compressor = Some(CompressorSpec::Identity);
    let a = run(&plain).map_err(|e| e.to_string())?;
    let b = run(&wrapped).map_err(|e| e.to_string())?;
    if csv_string(&a.records) == csv_string(&b.records) {
        Ok("identity-compressed run reproduces the plain run bit-for-bit".into())
    } else {
        Err("identity-compressed run diverged from the plain run".into())
    }
}

/// Run every check; the CLI turns any failure into a nonzero exit.
pub fn run_all() -> Vec<SelfCheck> {
    vec![
        check("reference_cost_table", reference_table()),
        check("topk_contraction_bound", topk_contraction()),
        check("scaled_sign_error_identity", scaled_sign_exactness()),
        check("error_feedback_telescoping", error_feedback_telescopes()),
        check(
            "identity_feedback_zero_error",
            identity_feedback_stays_zero(),
        ),
        check("vhat_monotone_floor", vhat_monotone_and_floored()),
        check("averaging_model_equivalence", fedavg_model_average()),
        check("sampler_inclusion_rates", sampler_inclusion()),
        check("replay_determinism", replay_determinism()),
        check("identity_compression_reduction", identity_run_reduction()),
    ]
}
