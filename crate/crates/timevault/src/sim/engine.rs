//! Event loop behind `run_scenario`.
//!
//! Simulation time is `f64` seconds with 0 at the ledger's genesis;
//! reported times add the genesis timestamp so they are chain-absolute.
//! Events execute in (time, schedule order), so identical configs and
//! seeds replay identically.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::group::PairingBackend;
use crate::ledger::{
    possession_proof, HolderStatus, LedgerError, LedgerState, RewardReport, SubmissionStatus,
    Transaction, TxOutcome,
};
use crate::timelock::wire::derive_request_id;
use crate::timelock::{
    build_request, decrypt_message, derive_share, keygen, reconstruct_key, verify_share, KeyPair,
    ShareVerdict, TimelockRequest,
};

use super::{
    ClientBehavior, DisputeEvent, DisputeResolution, HolderBehavior, HolderReport,
    ScenarioConfig, ScenarioOutput, ScenarioReport, SimError, SlashCause, SlashEvent,
};

#[derive(Clone, Copy, Debug, PartialEq)]
enum EventKind {
    ProposeBlock { counter: u64 },
    Submit { holder: u32 },
    VerifyDone { verifier: u32, submission_id: u64 },
}

#[derive(Clone, Copy, Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Engine<'c, B: PairingBackend> {
    backend: B,
    config: &'c ScenarioConfig,
    seed: u64,
    ledger: LedgerState<B>,
    keys: Vec<KeyPair<B>>,
    holder_pks: Vec<B::G1>,
    request: TimelockRequest<B>,
    request_id: String,
    /// Chain-absolute decryption time of the posted request.
    decrypt_time: u64,
    horizon: f64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    rng: ChaCha8Rng,
    /// Whether each holder's one submission has been scheduled (or ruled
    /// out, for silent holders).
    triggered: Vec<bool>,
    /// End of each holder's current verification backlog.
    busy_until: Vec<f64>,
    verifications: Vec<u32>,
    verify_busy: Vec<f64>,
    provisional_seen: u64,
    /// Submission id to the true simulation time it landed.
    landing: BTreeMap<u64, f64>,
    slashes: Vec<SlashEvent>,
    disputes: Vec<DisputeEvent>,
    finalize: Option<RewardReport>,
    voided: bool,
    voided_refund: u64,
}

pub(super) fn run<B: PairingBackend>(
    backend: B,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<ScenarioOutput, SimError> {
    let mut engine = Engine::new(backend, config, seed)?;
    engine.run_loop()?;
    engine.into_output()
}

impl<'c, B: PairingBackend> Engine<'c, B> {
    fn new(backend: B, config: &'c ScenarioConfig, seed: u64) -> Result<Self, SimError> {
        let n = config.holders.len() as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ledger = LedgerState::new(backend.clone(), config.ledger.clone());

        let keys = draw_distinct_keys(&backend, &mut rng, n)?;
        for kp in &keys {
            let sig = possession_proof(&backend, ledger.challenge(), &kp.sk);
            ledger
                .apply(Transaction::RegisterHolder {
                    deposit: config.ledger.deposit_min,
                    pk_hex: hex::encode(backend.g1_to_bytes(&kp.pk)),
                    possession_sig_hex: hex::encode(backend.g2_to_bytes(&sig)),
                })
                .map_err(|e| SimError::Ledger(e.to_string()))?;
        }
        let holder_pks: Vec<B::G1> = keys.iter().map(|kp| kp.pk.clone()).collect();

        let decrypt_time = config.ledger.genesis_time + config.decrypt_delay_s;
        let k = backend.random_coord(&mut rng);
        let r = backend.random_scalar(&mut rng);
        let mut request = build_request(
            &backend,
            &k,
            &r,
            config.message.as_bytes(),
            decrypt_time,
            &holder_pks,
            config.threshold,
        )
        .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        if config.client == ClientBehavior::Framing {
            // Commit `b` to a different exponent than `a`, so every
            // correctly derived share fails the holder-side check.
            let mut decoy = backend.random_scalar(&mut rng);
            let mut attempts = 0u32;
            while decoy == r {
                decoy = backend.random_scalar(&mut rng);
                attempts += 1;
                if attempts > 1_000 {
                    return Err(SimError::ConfigInvalid(
                        "group too small to pick a second exponent".into(),
                    ));
                }
            }
            request.commitment_b = backend.pow_g2(&backend.g2(), &decoy);
            request.request_id = derive_request_id(&request.to_wire(&backend));
        }
        let request_id = request.request_id.clone();
        let fee = u64::from(config.threshold) * config.ledger.reward_per_share;
        ledger
            .apply(Transaction::PostRequest {
                client_id: "client".into(),
                fee,
                request: request.to_wire(&backend),
            })
            .map_err(|e| SimError::Ledger(e.to_string()))?;

        let mut engine = Engine {
            backend,
            config,
            seed,
            ledger,
            keys,
            holder_pks,
            request,
            request_id,
            decrypt_time,
            horizon: config.horizon(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            rng,
            triggered: vec![false; n as usize],
            busy_until: vec![0.0; n as usize],
            verifications: vec![0; n as usize],
            verify_busy: vec![0.0; n as usize],
            provisional_seen: 0,
            landing: BTreeMap::new(),
            slashes: Vec::new(),
            disputes: Vec::new(),
            finalize: None,
            voided: false,
            voided_refund: 0,
        };

        engine.schedule(config.block_interval_s, EventKind::ProposeBlock { counter: 1 });
        let delay_f = config.decrypt_delay_s as f64;
        for (i, agent) in config.holders.iter().enumerate() {
            match agent.behavior {
                HolderBehavior::EarlySubmitter { lead_s } => {
                    engine.triggered[i] = true;
                    let local = (delay_f - lead_s - agent.clock_offset_s).max(0.0);
                    let at = local + engine.sample_latency(i);
                    engine.schedule(at, EventKind::Submit { holder: i as u32 + 1 });
                }
                HolderBehavior::Silent => engine.triggered[i] = true,
                HolderBehavior::Honest | HolderBehavior::WrongShare => {}
            }
        }
        Ok(engine)
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq, kind }));
    }

    fn abs_time(&self, sim: f64) -> f64 {
        self.config.ledger.genesis_time as f64 + sim
    }

    fn sample_latency(&mut self, holder_slot: usize) -> f64 {
        let model = self.config.holders[holder_slot].latency.unwrap_or(self.config.latency);
        model.sample(&mut self.rng)
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.queue.pop() {
            if ev.time > self.horizon {
                break;
            }
            match ev.kind {
                EventKind::ProposeBlock { counter } => self.on_propose(ev.time, counter)?,
                EventKind::Submit { holder } => self.on_submit(ev.time, holder)?,
                EventKind::VerifyDone { verifier, submission_id } => {
                    self.on_verify(ev.time, verifier, submission_id)?
                }
            }
        }
        Ok(())
    }

    fn on_propose(&mut self, now: f64, counter: u64) -> Result<(), SimError> {
        if self.finalize.is_some() || self.voided {
            return Ok(());
        }
        let n = self.config.holders.len() as u32;
        let start = ((counter - 1) % u64::from(n)) as u32;
        let proposer = (0..n)
            .map(|k| (start + k) % n + 1)
            .find(|idx| self.ledger.holders()[*idx as usize - 1].status == HolderStatus::Active);
        // A chain with no active holders stops producing blocks.
        let Some(proposer) = proposer else { return Ok(()) };

        let reference = self.config.ledger.genesis_time + now.floor() as u64;
        let claimed = if self.config.accelerating_proposer == Some(proposer) {
            reference + self.config.ledger.max_forward_drift_s
        } else {
            reference
        };
        let outcome = self
            .ledger
            .apply(Transaction::AdvanceBlock {
                claimed_timestamp: claimed,
                proposer,
                reference_time: reference,
            })
            .map_err(|e| SimError::Ledger(e.to_string()))?;
        if matches!(outcome, TxOutcome::BlockAccepted { .. }) {
            self.trigger_submissions(now);
            self.try_finalize()?;
        }

        let next = now + self.config.block_interval_s;
        if next <= self.horizon && self.finalize.is_none() && !self.voided {
            self.schedule(next, EventKind::ProposeBlock { counter: counter + 1 });
        }
        Ok(())
    }

    /// Once the chain clock reaches the decryption time, every honest or
    /// wrong-share holder schedules its one submission: no earlier than
    /// its own clock says is allowed, plus network latency.
    fn trigger_submissions(&mut self, now: f64) {
        if self.ledger.tip_time() < self.decrypt_time {
            return;
        }
        let config = self.config;
        let delay_f = config.decrypt_delay_s as f64;
        for (i, agent) in config.holders.iter().enumerate() {
            if self.triggered[i] {
                continue;
            }
            self.triggered[i] = true;
            let local_ready = delay_f - agent.clock_offset_s;
            let at = now.max(local_ready) + self.sample_latency(i);
            self.schedule(at, EventKind::Submit { holder: i as u32 + 1 });
        }
    }

    fn try_finalize(&mut self) -> Result<(), SimError> {
        match self
            .ledger
            .apply(Transaction::FinalizeRequest { request_id: self.request_id.clone() })
        {
            Ok(TxOutcome::RequestFinalized { report }) => {
                self.finalize = Some(report);
                Ok(())
            }
            Ok(_) => Err(SimError::Ledger("finalize produced a foreign outcome".into())),
            Err(LedgerError::NotReady(_)) | Err(LedgerError::RequestNotActive(_)) => Ok(()),
            Err(e) => Err(SimError::Ledger(e.to_string())),
        }
    }

    fn on_submit(&mut self, now: f64, holder: u32) -> Result<(), SimError> {
        if self.finalize.is_some() || self.voided {
            return Ok(());
        }
        let slot = holder as usize - 1;
        let share = derive_share(&self.backend, &self.request, &self.keys[slot])
            .map_err(|e| SimError::Ledger(e.to_string()))?;
        let value = match self.config.holders[slot].behavior {
            HolderBehavior::WrongShare => self.backend.mul_g1(&share.value, &self.backend.g1()),
            _ => share.value,
        };
        let tx = Transaction::SubmitShare {
            holder_index: holder,
            request_id: self.request_id.clone(),
            share_hex: hex::encode(self.backend.g1_to_bytes(&value)),
        };
        match self.ledger.apply(tx) {
            Ok(TxOutcome::SubmissionProvisional { submission_id, .. }) => {
                self.landing.insert(submission_id, now);
                self.provisional_seen += 1;
                if self.provisional_seen <= u64::from(self.config.threshold) {
                    self.queue_verifications(now, submission_id);
                }
                Ok(())
            }
            Ok(TxOutcome::SubmissionSlashedEarly { holder_index, .. }) => {
                self.slashes.push(SlashEvent {
                    holder_index,
                    cause: SlashCause::EarlySubmission,
                    time_s: self.abs_time(now),
                });
                Ok(())
            }
            Ok(TxOutcome::SubmissionRejectedInactive { .. }) => Ok(()),
            Ok(_) => Err(SimError::Ledger("submission produced a foreign outcome".into())),
            // The request can be voided by a dispute that resolves while
            // this submission is in flight.
            Err(LedgerError::RequestNotActive(_)) => Ok(()),
            Err(e) => Err(SimError::Ledger(e.to_string())),
        }
    }

    /// Every honest holder checks each of the first `threshold`
    /// submissions, serially per holder at `verify_cost_s` apiece.
    fn queue_verifications(&mut self, now: f64, submission_id: u64) {
        let config = self.config;
        for (i, agent) in config.holders.iter().enumerate() {
            if !matches!(agent.behavior, HolderBehavior::Honest) {
                continue;
            }
            let done = self.busy_until[i].max(now) + config.verify_cost_s;
            self.busy_until[i] = done;
            self.verifications[i] += 1;
            self.verify_busy[i] += config.verify_cost_s;
            self.schedule(done, EventKind::VerifyDone { verifier: i as u32 + 1, submission_id });
        }
    }

    fn on_verify(&mut self, now: f64, verifier: u32, submission_id: u64) -> Result<(), SimError> {
        if self.finalize.is_some() || self.voided {
            return Ok(());
        }
        let verdict = {
            let sub = &self.ledger.submissions()[submission_id as usize];
            if sub.status != SubmissionStatus::Provisional {
                return Ok(());
            }
            let holder_pk = &self.ledger.holders()[sub.holder_index as usize - 1].pk;
            verify_share(&self.backend, &sub.share, holder_pk, &self.request)
        };
        if verdict == ShareVerdict::Valid {
            return Ok(());
        }
        match self
            .ledger
            .apply(Transaction::RaiseDispute { challenger_index: verifier, submission_id })
        {
            Ok(TxOutcome::DisputeDismissed { .. }) => {
                self.disputes.push(DisputeEvent {
                    submission_id,
                    challenger: verifier,
                    resolution: DisputeResolution::Dismissed,
                    time_s: self.abs_time(now),
                });
                Ok(())
            }
            Ok(TxOutcome::DisputeUpheld { .. }) => {
                let submitter = self.ledger.submissions()[submission_id as usize].holder_index;
                self.disputes.push(DisputeEvent {
                    submission_id,
                    challenger: verifier,
                    resolution: DisputeResolution::Upheld,
                    time_s: self.abs_time(now),
                });
                self.slashes.push(SlashEvent {
                    holder_index: submitter,
                    cause: SlashCause::UpheldDispute,
                    time_s: self.abs_time(now),
                });
                Ok(())
            }
            Ok(TxOutcome::DisputeClientFault { refunded, .. }) => {
                self.disputes.push(DisputeEvent {
                    submission_id,
                    challenger: verifier,
                    resolution: DisputeResolution::ClientFault,
                    time_s: self.abs_time(now),
                });
                self.voided = true;
                self.voided_refund = refunded;
                Ok(())
            }
            Ok(_) => Err(SimError::Ledger("dispute produced a foreign outcome".into())),
            Err(LedgerError::NotProvisional(_))
            | Err(LedgerError::DisputeWindowClosed(_))
            | Err(LedgerError::InactiveChallenger(_)) => Ok(()),
            Err(e) => Err(SimError::Ledger(e.to_string())),
        }
    }

    fn into_output(self) -> Result<ScenarioOutput, SimError> {
        let rewarded: Vec<u32> =
            self.finalize.as_ref().map(|r| r.rewarded.clone()).unwrap_or_default();
        let reconstructed = self.finalize.as_ref().is_some_and(|r| r.reconstructed);

        let (reveal_time_s, deviation_s, message_recovered) = if reconstructed {
            let mut reveal_sim = f64::NEG_INFINITY;
            let mut shares = Vec::new();
            for sub in self.ledger.submissions() {
                if sub.request_id == self.request_id && rewarded.contains(&sub.holder_index) {
                    if let Some(t) = self.landing.get(&sub.id) {
                        reveal_sim = reveal_sim.max(*t);
                    }
                    shares.push(sub.share.clone());
                }
            }
            let reveal_abs = self.abs_time(reveal_sim);
            let recovered =
                reconstruct_key(&self.backend, &self.request, &shares, &self.holder_pks)
                    .ok()
                    .and_then(|key| {
                        decrypt_message(&self.backend, &key, &self.request.ciphertext).ok()
                    })
                    .map(|plain| plain == self.config.message.as_bytes())
                    .unwrap_or(false);
            (Some(reveal_abs), Some(reveal_abs - self.decrypt_time as f64), recovered)
        } else {
            (None, None, false)
        };

        let holders: Vec<HolderReport> = self
            .ledger
            .holders()
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let submitted_at_s = self
                    .ledger
                    .submissions()
                    .iter()
                    .find(|s| s.holder_index == h.index && s.request_id == self.request_id)
                    .and_then(|s| self.landing.get(&s.id))
                    .map(|t| self.abs_time(*t));
                HolderReport {
                    index: h.index,
                    rewards: h.rewards,
                    deposit: h.deposit,
                    slashed: h.status == HolderStatus::Slashed,
                    submitted_at_s,
                    share_rewarded: rewarded.contains(&h.index),
                    verifications: self.verifications[i],
                    verification_busy_s: self.verify_busy[i],
                }
            })
            .collect();

        let escrow_refunded = self
            .finalize
            .as_ref()
            .map(|r| r.escrow_refunded)
            .unwrap_or(self.voided_refund);

        let report = ScenarioReport {
            seed: self.seed,
            backend: self.config.backend,
            holder_count: self.config.holders.len() as u32,
            threshold: self.config.threshold,
            requested_time: self.decrypt_time,
            encryption_duration_s: self.config.decrypt_delay_s,
            reveal_time_s,
            deviation_s,
            reconstructed,
            message_recovered,
            request_voided: self.voided,
            escrow_refunded,
            slashes: self.slashes,
            disputes: self.disputes,
            holders,
            blocks_accepted: self.ledger.blocks().len() as u64,
            final_state_hash: self.ledger.state_hash(),
        };
        Ok(ScenarioOutput { report, tx_log_jsonl: self.ledger.export_log_jsonl() })
    }
}

/// Draws `n` keypairs with pairwise distinct public keys, redrawing on
/// collision. Fails when the group's key space cannot supply them.
fn draw_distinct_keys<B: PairingBackend>(
    backend: &B,
    rng: &mut ChaCha8Rng,
    n: u32,
) -> Result<Vec<KeyPair<B>>, SimError> {
    let mut keys = Vec::with_capacity(n as usize);
    let mut seen = HashSet::new();
    for index in 1..=n {
        let mut attempts = 0u32;
        let kp = loop {
            let kp = keygen(backend, rng, index);
            if seen.insert(backend.g1_to_bytes(&kp.pk)) {
                break kp;
            }
            attempts += 1;
            if attempts > 1_000 {
                return Err(SimError::ConfigInvalid(format!(
                    "cannot draw {n} distinct holder keys from this group"
                )));
            }
        };
        keys.push(kp);
    }
    Ok(keys)
}
