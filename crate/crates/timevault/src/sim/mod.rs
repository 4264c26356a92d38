//! Discrete-event scenarios that drive the ledger end to end.
//!
//! A scenario wires client and holder agents to a fresh ledger: holders
//! register with deposits, the client posts a time-locked request, blocks
//! tick on a fixed cadence, and agents react to chain state through their
//! configured behaviors. Time is simulated, so a week-long lock runs in
//! milliseconds. Everything is deterministic given (config, seed).
//!
//! An honest holder submits its share at whichever comes later: its local
//! clock reaching the decryption time, or the first block whose timestamp
//! reaches it. Honest holders also verify the first `threshold`
//! submissions they observe and dispute any that fail the pairing check.

mod engine;

use crate::group::BackendId;
use crate::ledger::LedgerParams;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    ConfigInvalid(String),
    #[error("no completed requests to aggregate")]
    EmptyReport,
    #[error("simulated transaction failed: {0}")]
    Ledger(String),
}

/// Network delay distribution for share submissions. Samplers never
/// return negative values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed { delay_s: f64 },
    /// Mean and standard deviation of the delay itself (the underlying
    /// normal's parameters are derived); heavy right tail, never negative.
    LogNormal { mean_s: f64, jitter_s: f64 },
    Exponential { mean_s: f64 },
}

impl LatencyModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LatencyModel::Fixed { delay_s } => delay_s,
            LatencyModel::Exponential { mean_s } => {
                if mean_s <= 0.0 {
                    return 0.0;
                }
                let u: f64 = rng.gen();
                -mean_s * (1.0 - u).max(f64::MIN_POSITIVE).ln()
            }
            LatencyModel::LogNormal { mean_s, jitter_s } => {
                if mean_s <= 0.0 {
                    return 0.0;
                }
                if jitter_s <= 0.0 {
                    return mean_s;
                }
                let sigma_sq = (1.0 + (jitter_s / mean_s).powi(2)).ln();
                let mu = mean_s.ln() - sigma_sq / 2.0;
                let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                let u2: f64 = rng.gen();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (mu + sigma_sq.sqrt() * z).exp()
            }
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            LatencyModel::Fixed { delay_s } => delay_s >= 0.0 && delay_s.is_finite(),
            LatencyModel::LogNormal { mean_s, jitter_s } => {
                mean_s >= 0.0 && jitter_s >= 0.0 && mean_s.is_finite() && jitter_s.is_finite()
            }
            LatencyModel::Exponential { mean_s } => mean_s >= 0.0 && mean_s.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::ConfigInvalid("latency parameters must be finite and nonnegative".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HolderBehavior {
    /// Submits on time, verifies others, disputes bad shares.
    Honest,
    /// Submits `lead_s` seconds before its local clock reaches the
    /// decryption time.
    EarlySubmitter { lead_s: f64 },
    /// Submits on honest timing but with a perturbed share value.
    WrongShare,
    /// Never submits.
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientBehavior {
    Honest,
    /// Publishes commitments built from two different exponents, so every
    /// holder's correct share fails the pairing check.
    Framing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub behavior: HolderBehavior,
    /// Local clock minus true time, in seconds. Honest holders must stay
    /// within `clock_offset_bound_s`.
    #[serde(default)]
    pub clock_offset_s: f64,
    /// Overrides the scenario-wide latency model for this holder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyModel>,
}

impl AgentConfig {
    pub fn honest() -> Self {
        AgentConfig { behavior: HolderBehavior::Honest, clock_offset_s: 0.0, latency: None }
    }
}

fn default_backend() -> BackendId {
    BackendId::Toy
}

fn default_message() -> String {
    "sealed until the appointed hour".into()
}

fn default_block_interval() -> f64 {
    1.0
}

fn default_verify_cost() -> f64 {
    0.05
}

fn default_clock_bound() -> f64 {
    1.0
}

fn default_client() -> ClientBehavior {
    ClientBehavior::Honest
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_backend")]
    pub backend: BackendId,
    /// Toy backend parameters; defaults match the worked examples (23, 11).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy_modulus: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy_generator: Option<u64>,
    pub threshold: u32,
    /// Seconds between posting the request and the decryption time.
    pub decrypt_delay_s: u64,
    #[serde(default = "default_message")]
    pub message: String,
    #[serde(default = "default_block_interval")]
    pub block_interval_s: f64,
    /// Simulated seconds each holder spends checking one submission.
    #[serde(default = "default_verify_cost")]
    pub verify_cost_s: f64,
    pub latency: LatencyModel,
    /// Maximum |clock_offset_s| an honest holder may declare.
    #[serde(default = "default_clock_bound")]
    pub clock_offset_bound_s: f64,
    pub holders: Vec<AgentConfig>,
    #[serde(default = "default_client")]
    pub client: ClientBehavior,
    /// Holder index whose proposed blocks claim the maximum forward drift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accelerating_proposer: Option<u32>,
    #[serde(default)]
    pub ledger: LedgerParams,
    /// Simulated seconds to run; derived from the other timings if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_s: Option<f64>,
}

impl ScenarioConfig {
    pub fn holder_count(&self) -> u32 {
        self.holders.len() as u32
    }

    fn horizon(&self) -> f64 {
        self.horizon_s.unwrap_or_else(|| {
            self.decrypt_delay_s as f64
                + self.ledger.dispute_window_s as f64
                + 40.0 * self.block_interval_s
                + 5.0
        })
    }

    fn validate(&self) -> Result<(), SimError> {
        let n = self.holders.len() as u32;
        let fail = |msg: String| Err(SimError::ConfigInvalid(msg));
        if n == 0 {
            return fail("at least one holder is required".into());
        }
        if self.threshold == 0 || self.threshold > n {
            return fail(format!("threshold {} invalid for {n} holders", self.threshold));
        }
        if self.decrypt_delay_s == 0 {
            return fail("decrypt_delay_s must be positive".into());
        }
        if !(self.block_interval_s > 0.0 && self.block_interval_s.is_finite()) {
            return fail("block_interval_s must be positive".into());
        }
        if !(self.verify_cost_s >= 0.0 && self.verify_cost_s.is_finite()) {
            return fail("verify_cost_s must be nonnegative".into());
        }
        self.latency.validate()?;
        for (i, agent) in self.holders.iter().enumerate() {
            if let Some(model) = &agent.latency {
                model.validate()?;
            }
            if matches!(agent.behavior, HolderBehavior::Honest)
                && agent.clock_offset_s.abs() > self.clock_offset_bound_s
            {
                return fail(format!(
                    "honest holder {} declares clock offset {} beyond the {} bound",
                    i + 1,
                    agent.clock_offset_s,
                    self.clock_offset_bound_s
                ));
            }
        }
        if let Some(p) = self.accelerating_proposer {
            if p == 0 || p > n {
                return fail(format!("accelerating proposer {p} outside 1..={n}"));
            }
        }
        if let Some(h) = self.horizon_s {
            if !(h > self.decrypt_delay_s as f64) {
                return fail("horizon_s must exceed decrypt_delay_s".into());
            }
        }
        Ok(())
    }
}

/// On-disk scenario file: either one scenario or a scalability sweep over
/// holder counts, discriminated by a `mode` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScenarioFile {
    Single(ScenarioConfig),
    Sweep { n_list: Vec<u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlashCause {
    EarlySubmission,
    UpheldDispute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlashEvent {
    pub holder_index: u32,
    pub cause: SlashCause,
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisputeResolution {
    Dismissed,
    Upheld,
    ClientFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisputeEvent {
    pub submission_id: u64,
    pub challenger: u32,
    pub resolution: DisputeResolution,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub index: u32,
    pub rewards: u64,
    pub deposit: u64,
    pub slashed: bool,
    /// True simulation time the holder's share landed on the ledger.
    pub submitted_at_s: Option<f64>,
    /// Paid as one of the first `threshold` accepted submitters.
    pub share_rewarded: bool,
    pub verifications: u32,
    pub verification_busy_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub backend: BackendId,
    pub holder_count: u32,
    pub threshold: u32,
    /// Absolute decryption time the client requested.
    pub requested_time: u64,
    pub encryption_duration_s: u64,
    /// True simulation time (chain-absolute) the threshold-completing
    /// share landed, if the reveal happened.
    pub reveal_time_s: Option<f64>,
    /// reveal_time_s - requested_time.
    pub deviation_s: Option<f64>,
    pub reconstructed: bool,
    /// The reconstructed key decrypted the ciphertext back to the
    /// original message.
    pub message_recovered: bool,
    pub request_voided: bool,
    pub escrow_refunded: u64,
    pub slashes: Vec<SlashEvent>,
    pub disputes: Vec<DisputeEvent>,
    pub holders: Vec<HolderReport>,
    pub blocks_accepted: u64,
    pub final_state_hash: String,
}

/// Report plus the ledger's transaction log for replay or archival.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub report: ScenarioReport,
    pub tx_log_jsonl: String,
}

pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioReport, SimError> {
    Ok(run_scenario_with_log(config, seed)?.report)
}

pub fn run_scenario_with_log(
    config: &ScenarioConfig,
    seed: u64,
) -> Result<ScenarioOutput, SimError> {
    config.validate()?;
    match config.backend {
        BackendId::Toy => {
            let group = crate::group::ToyGroup::new(
                config.toy_modulus.unwrap_or(23),
                config.toy_generator.unwrap_or(11),
                None,
            )
            .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
            engine::run(group, config, seed)
        }
        BackendId::Curve => {
            let group = crate::group::Bls12381Group::new(crate::group::CURVE_ID)
                .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
            engine::run(group, config, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationBucket {
    pub duration_s: u64,
    pub requests: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub requests: usize,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub buckets: Vec<DurationBucket>,
}

/// Aggregates reveal deviations across completed requests, bucketed by
/// encryption duration.
pub fn measure_deviation(reports: &[ScenarioReport]) -> Result<DeviationStats, SimError> {
    let completed: Vec<(u64, f64)> = reports
        .iter()
        .filter_map(|r| r.deviation_s.map(|d| (r.encryption_duration_s, d)))
        .collect();
    if completed.is_empty() {
        return Err(SimError::EmptyReport);
    }
    let mut by_duration = std::collections::BTreeMap::<u64, Vec<f64>>::new();
    for (duration, dev) in &completed {
        by_duration.entry(*duration).or_default().push(*dev);
    }
    let summarize = |devs: &[f64]| {
        let mean = devs.iter().sum::<f64>() / devs.len() as f64;
        let min = devs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = devs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, min, max)
    };
    let all: Vec<f64> = completed.iter().map(|(_, d)| *d).collect();
    let (mean_s, min_s, max_s) = summarize(&all);
    let buckets = by_duration
        .iter()
        .map(|(duration, devs)| {
            let (mean, min, max) = summarize(devs);
            DurationBucket {
                duration_s: *duration,
                requests: devs.len(),
                mean_s: mean,
                min_s: min,
                max_s: max,
            }
        })
        .collect();
    Ok(DeviationStats { requests: completed.len(), mean_s, min_s, max_s, buckets })
}

pub fn deviation_csv(stats: &DeviationStats) -> String {
    let mut out = String::from("duration_s,requests,mean_deviation_s,min_deviation_s,max_deviation_s\n");
    for b in &stats.buckets {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            b.duration_s, b.requests, b.mean_s, b.min_s, b.max_s
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub n: u32,
    pub t: u32,
    /// Mean reveal deviation: how long share accumulation delays the
    /// reveal past the requested time.
    pub publish_latency_s: f64,
    /// Mean simulated seconds one holder spends verifying submissions.
    pub verification_latency_s: f64,
}

/// Holder counts the scalability experiments sweep by default.
pub const SCALABILITY_HOLDER_COUNTS: [u32; 5] = [3, 10, 20, 30, 40];

const SWEEP_REPEATS: u64 = 20;

/// Runs an all-honest scenario per holder count with `t = n/2 + 1`,
/// averaging over derived seeds. Uses a larger toy modulus so 40 holders
/// fit in the key space.
pub fn scalability_sweep(n_list: &[u32], seed: u64) -> Result<Vec<ScalePoint>, SimError> {
    n_list
        .iter()
        .map(|&n| {
            let t = n / 2 + 1;
            let config = ScenarioConfig {
                backend: BackendId::Toy,
                toy_modulus: Some(101),
                toy_generator: Some(2),
                threshold: t,
                decrypt_delay_s: 20,
                message: "scalability probe".into(),
                block_interval_s: 1.0,
                verify_cost_s: 0.05,
                latency: LatencyModel::Exponential { mean_s: 2.0 },
                clock_offset_bound_s: 1.0,
                holders: vec![AgentConfig::honest(); n as usize],
                client: ClientBehavior::Honest,
                accelerating_proposer: None,
                ledger: LedgerParams { dispute_window_s: 30, ..LedgerParams::default() },
                horizon_s: None,
            };
            let mut deviations = Vec::new();
            let mut busy = Vec::new();
            for i in 0..SWEEP_REPEATS {
                let run_seed = seed ^ (u64::from(n) << 32) ^ i;
                let report = run_scenario(&config, run_seed)?;
                deviations.push(
                    report
                        .deviation_s
                        .ok_or_else(|| SimError::Ledger(format!("n={n} run never revealed")))?,
                );
                let per_holder: f64 = report
                    .holders
                    .iter()
                    .map(|h| h.verification_busy_s)
                    .sum::<f64>()
                    / report.holders.len() as f64;
                busy.push(per_holder);
            }
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            Ok(ScalePoint {
                n,
                t,
                publish_latency_s: mean(&deviations),
                verification_latency_s: mean(&busy),
            })
        })
        .collect()
}

pub fn scalability_csv(points: &[ScalePoint]) -> String {
    let mut out = String::from("n,t,publish_latency_s,verification_latency_s\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            p.n, p.t, p.publish_latency_s, p.verification_latency_s
        ));
    }
    out
}
