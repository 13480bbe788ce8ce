//! The round loop tying everything together: sample a participant set,
//! fan local training out to the worker pool, optionally push every update
//! through the compression/feedback path, average in client-id order, and
//! take one server step. The loop is a pure function of the config — the
//! CSV it produces is byte-identical across replays and across worker-pool
//! sizes, because all randomness comes from labeled streams and all merges
//! happen in client-id order.

use crate::accounting;
use crate::client::local_sgd;
use crate::compressors::CompressorSpec;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::feedback::{apply_round, ClientErrorBank};
use crate::objectives::Objective;
use crate::rng::StreamPurpose;
use crate::sampler::sample;
use crate::server::{aggregate, OptimizerFamily, ServerOptState};
use crate::vector::ParamVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Metrics captured after a round's server step.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number; round r reports the model after r updates.
    pub round: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub participants: Vec<usize>,
    /// Uplink bits spent this round, summed over participants.
    pub round_bits: u64,
    /// Uplink bits spent so far, over all rounds (not just recorded ones).
    pub cum_bits: u64,
}

/// Run-level digest, serialized next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub final_loss: f64,
    pub min_grad_norm_sq: f64,
    pub total_bits: u64,
    pub wall_time_s: f64,
}

/// Everything a run produces. `models` is filled only by [`run_traced`]
/// and holds the iterate after each round.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub initial_loss: f64,
    pub final_model: ParamVector,
    pub models: Vec<ParamVector>,
}

/// Execute the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunResult> {
    run_internal(config, false)
}

/// Like [`run`], additionally recording the model after every round.
pub fn run_traced(config: &ExperimentConfig) -> Result<RunResult> {
    run_internal(config, true)
}

fn run_internal(config: &ExperimentConfig, trace: bool) -> Result<RunResult> {
    config.validate()?;
    let started = std::time::Instant::now();
    let seed = config.seed_spec();
    let obj = Objective::build(&config.objective, &seed)?;
    let d = obj.dim();
    let hyper = config.optimizer.server_hyper();
    let mut opt = ServerOptState::new(config.optimizer.family, d, hyper)?;
    let mut bank = config
        .compressor
        .as_ref()
        .map(|_| ClientErrorBank::new(config.participation.m, d));
    let mut x = ParamVector::zeros(d);
    let initial_loss = obj.loss(&x)?;

    let mut records = Vec::new();
    let mut models = Vec::new();
    let mut cum_bits: u64 = 0;
    let mut min_gns = f64::INFINITY;
    for r in 0..config.rounds {
        let participants = sample(config.participation, r, &seed)?;

        // Local training fans out; the ordered collect keeps results in
        // client-id order no matter how the pool schedules them.
        let deltas: Vec<(usize, ParamVector)> = participants
            .par_iter()
            .map(|&i| {
                let mut rng = seed.stream(StreamPurpose::LocalSgd, i as u64, r);
                local_sgd(&obj, i, &x, &config.local, &mut rng).map(|delta| (i, delta))
            })
            .collect::<Result<_>>()?;

        let (mean_delta, round_bits) = match (&config.compressor, bank.as_mut()) {
            (Some(spec), Some(bank)) => {
                let map: BTreeMap<usize, ParamVector> = deltas.into_iter().collect();
                let hats = apply_round(bank, &participants, &map, spec)?;
                let mut decoded = Vec::with_capacity(hats.len());
                let mut bits = 0u64;
                for hat in hats.values() {
                    bits += hat.bit_cost();
                    decoded.push(hat.decode()?);
                }
                (aggregate(&decoded)?, bits)
            }
            _ => {
                let per_client = accounting::per_round_uplink_bits(&CompressorSpec::Identity, d)?;
                let raw: Vec<ParamVector> = deltas.into_iter().map(|(_, v)| v).collect();
                (aggregate(&raw)?, per_client * participants.len() as u64)
            }
        };
        cum_bits += round_bits;
        x = opt.server_step(&mean_delta, &x)?;
        if trace {
            models.push(x.clone());
        }

        let round = r + 1;
        if round % config.eval_every == 0 || round == config.rounds {
            let loss = obj.loss(&x)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { round, loss });
            }
            let grad_norm_sq = obj.full_gradient(&x)?.l2_norm_sq();
            min_gns = min_gns.min(grad_norm_sq);
            records.push(RoundRecord {
                round,
                loss,
                grad_norm_sq,
                participants,
                round_bits,
                cum_bits,
            });
        }
    }

    let (final_loss, min_grad_norm_sq) = match records.last() {
        Some(last) => (last.loss, min_gns),
        None => (initial_loss, obj.full_gradient(&x)?.l2_norm_sq()),
    };
    let summary = RunSummary {
        config: config.clone(),
        final_loss,
        min_grad_norm_sq,
        total_bits: cum_bits,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        records,
        summary,
        initial_loss,
        final_model: x,
        models,
    })
}

/// Render records as CSV. Floats use the shortest round-trip decimal form,
/// so equal runs give equal bytes.
pub fn csv_string(records: &[RoundRecord]) -> String {
    let mut out = String::from("round,loss,grad_norm_sq,participants,round_bits,cum_bits\n");
    for rec in records {
        let ids: Vec<String> = rec.participants.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.round,
            rec.loss,
            rec.grad_norm_sq,
            ids.join(";"),
            rec.round_bits,
            rec.cum_bits
        ));
    }
    out
}

/// Where `emit` puts the JSON digest for a given CSV path.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Write the CSV and its sibling JSON digest, overwriting both.
pub fn emit(records: &[RoundRecord], summary: &RunSummary, csv_path: &Path) -> Result<()> {
    let io_err = |e: std::io::Error, p: &Path| Error::Io {
        path: p.display().to_string(),
        source: e,
    };
    std::fs::write(csv_path, csv_string(records)).map_err(|e| io_err(e, csv_path))?;
    let sp = summary_path(csv_path);
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(&sp, text).map_err(|e| io_err(e, &sp))?;
    Ok(())
}

/// First recorded round whose loss is at or below `threshold`.
pub fn rounds_to_threshold(records: &[RoundRecord], threshold: f64) -> Option<u64> {
    records
        .iter()
        .find(|r| r.loss <= threshold)
        .map(|r| r.round)
}

/// Which knob a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Participants per round.
    N,
    /// Top-k compression ratio.
    R,
    /// Local steps per round.
    K,
    /// Server optimizer family.
    Optimizer,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "r" => Ok(SweepAxis::R),
            "K" | "k" => Ok(SweepAxis::K),
            "optimizer" => Ok(SweepAxis::Optimizer),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other:?} (expected n, r, K, or optimizer)"
            ))),
        }
    }
}

/// One sweep point's digest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: String,
    pub value: String,
    pub final_loss: f64,
    pub min_grad_norm_sq: f64,
    pub rounds_to_threshold: Option<u64>,
    pub total_bits: u64,
}

fn apply_axis(base: &ExperimentConfig, axis: SweepAxis, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let bad = |what: &str| Error::Config(format!("sweep value {value:?} is not a valid {what}"));
    match axis {
        SweepAxis::N => {
            cfg.participation.n = value.parse().map_err(|_| bad("participant count"))?;
        }
        SweepAxis::R => {
            let ratio: f64 = parse_ratio(value).ok_or_else(|| bad("compression ratio"))?;
            cfg.compressor = Some(CompressorSpec::Topk { ratio });
        }
        SweepAxis::K => {
            cfg.local.steps = value.parse().map_err(|_| bad("local step count"))?;
        }
        SweepAxis::Optimizer => {
            let family: OptimizerFamily =
                serde_json::from_value(serde_json::Value::String(value.to_string()))
                    .map_err(|_| bad("optimizer family"))?;
            cfg.optimizer.family = family;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Accept plain floats ("0.25") and fraction shorthand ("1/4").
fn parse_ratio(value: &str) -> Option<f64> {
    if let Some((num, den)) = value.split_once('/') {
        let n: f64 = num.trim().parse().ok()?;
        let d: f64 = den.trim().parse().ok()?;
        if d == 0.0 {
            return None;
        }
        return Some(n / d);
    }
    value.trim().parse().ok()
}

/// Run one experiment per value, sharing the base seed so points differ
/// only along the chosen axis.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    threshold: Option<f64>,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let axis_name = match axis {
        SweepAxis::N => "n",
        SweepAxis::R => "r",
        SweepAxis::K => "K",
        SweepAxis::Optimizer => "optimizer",
    };
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let cfg = apply_axis(base, axis, value)?;
        let result = run(&cfg)?;
        points.push(SweepPoint {
            axis: axis_name.to_string(),
            value: value.clone(),
            final_loss: result.summary.final_loss,
            min_grad_norm_sq: result.summary.min_grad_norm_sq,
            rounds_to_threshold: threshold
                .and_then(|thr| rounds_to_threshold(&result.records, thr)),
            total_bits: result.summary.total_bits,
        });
    }
    Ok(points)
}
