//! Deterministic simulation of the coordination contract.
//!
//! The ledger is a replayable state machine: every accepted transaction is
//! appended to a log, and replaying the log from genesis reproduces the
//! state hash bit-exactly. Holders stake a deposit to register, clients
//! escrow a fee to post a request, and share submissions are optimistic:
//! they sit in a dispute window during which anyone still staked can force
//! an on-chain pairing check. Block timestamps are supplied by proposers
//! and accepted only if they are strictly increasing and at most a fixed
//! drift ahead of the reference clock, which bounds how far a dishonest
//! proposer can accelerate a release.

use crate::group::PairingBackend;
use crate::timelock::wire::{derive_request_id, to_canonical_json, RequestWire};
use crate::timelock::{verify_share, SecretShare, ShareVerdict, TimelockError, TimelockRequest};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerParams {
    /// Minimum stake required to register as a share holder.
    pub deposit_min: u64,
    /// Paid to each of the first `threshold` accepted submissions.
    pub reward_per_share: u64,
    /// Seconds a submission stays open to disputes, in block time.
    pub dispute_window_s: u64,
    /// How far ahead of the reference clock a proposed timestamp may run.
    pub max_forward_drift_s: u64,
    /// Timestamp before the first block.
    pub genesis_time: u64,
    /// Derives the registration challenge point.
    pub challenge_seed: u64,
}

impl Default for LedgerParams {
    fn default() -> Self {
        LedgerParams {
            deposit_min: 1_000,
            reward_per_share: 10,
            dispute_window_s: 3_600,
            max_forward_drift_s: 15,
            genesis_time: 0,
            challenge_seed: 0x74696d65,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderStatus {
    Active,
    Slashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderRecord<B: PairingBackend> {
    pub index: u32,
    pub pk: B::G1,
    pub deposit: u64,
    pub rewards: u64,
    pub status: HolderStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Active,
    Finalized,
    /// Closed early because a dispute proved the client broadcast
    /// inconsistent commitments.
    Voided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRequest<B: PairingBackend> {
    pub request: TimelockRequest<B>,
    pub client_id: String,
    pub fee: u64,
    pub escrow: u64,
    pub status: RequestStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmissionStatus {
    /// Within or awaiting its dispute window.
    Provisional,
    /// Survived the window (or arrived after the reveal was already
    /// decided); counted as valid.
    Accepted,
    /// Removed by an upheld dispute or a voided request.
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission<B: PairingBackend> {
    pub id: u64,
    pub request_id: String,
    pub holder_index: u32,
    pub share: SecretShare<B>,
    pub block_height: u64,
    pub block_time: u64,
    pub dispute_deadline: u64,
    pub status: SubmissionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub timestamp: u64,
    pub proposer: u32,
}

/// Cumulative token flows. Inflow must always equal held plus outflow:
/// `deposited_total + fees_total == holder deposits + request escrow +
/// rewards_paid + burned + refunded`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenAccounts {
    pub deposited_total: u64,
    pub fees_total: u64,
    pub rewards_paid: u64,
    pub burned: u64,
    pub refunded: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transaction {
    RegisterHolder { deposit: u64, pk_hex: String, possession_sig_hex: String },
    AdvanceBlock { claimed_timestamp: u64, proposer: u32, reference_time: u64 },
    PostRequest { client_id: String, fee: u64, request: RequestWire },
    SubmitShare { holder_index: u32, request_id: String, share_hex: String },
    RaiseDispute { challenger_index: u32, submission_id: u64 },
    FinalizeRequest { request_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRejection {
    NonMonotonicTimestamp,
    ExcessiveForwardDrift,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardReport {
    pub request_id: String,
    /// First `threshold` accepted submitters in block order.
    pub rewarded: Vec<u32>,
    /// Accepted but beyond the threshold, so unpaid.
    pub unrewarded: Vec<u32>,
    /// Block time of the submission that completed the threshold.
    pub reveal_block_time: Option<u64>,
    pub reconstructed: bool,
    pub escrow_refunded: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxOutcome {
    HolderRegistered { index: u32 },
    BlockAccepted { height: u64, timestamp: u64 },
    BlockRejected { reason: BlockRejection },
    RequestPosted { request_id: String },
    SubmissionProvisional { submission_id: u64, block_time: u64 },
    SubmissionSlashedEarly { holder_index: u32, burned: u64 },
    SubmissionRejectedInactive { holder_index: u32 },
    DisputeDismissed { submission_id: u64 },
    DisputeUpheld { submission_id: u64, bounty: u64, burned: u64 },
    DisputeClientFault { request_id: String, compensation_per_holder: u64, refunded: u64 },
    RequestFinalized { report: RewardReport },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub tx: Transaction,
    pub outcome: TxOutcome,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("deposit {got} below the {required} minimum")]
    InsufficientDeposit { required: u64, got: u64 },
    #[error("public key already registered")]
    DuplicateKey,
    #[error("possession proof does not match the public key")]
    BadPossessionProof,
    #[error("no holder with index {0}")]
    UnknownHolder(u32),
    #[error("proposer {0} is not an active holder")]
    InactiveProposer(u32),
    #[error("no request with id {0:?}")]
    UnknownRequest(String),
    #[error("request {0:?} already posted")]
    DuplicateRequest(String),
    #[error("request rejected: {0}")]
    MalformedRequest(String),
    #[error("fee {got} below the {required} escrow minimum")]
    InsufficientFee { required: u64, got: u64 },
    #[error("request {0:?} is no longer active")]
    RequestNotActive(String),
    #[error("holder {holder_index} already submitted for request {request_id:?}")]
    DuplicateSubmission { holder_index: u32, request_id: String },
    #[error("holder index {holder_index} outside the request's 1..={holder_count}")]
    ShareOutsideRequest { holder_index: u32, holder_count: u32 },
    #[error("no submission with id {0}")]
    UnknownSubmission(u64),
    #[error("submission {0} is not provisional")]
    NotProvisional(u64),
    #[error("dispute window for submission {0} has closed")]
    DisputeWindowClosed(u64),
    #[error("challenger {0} is not an active holder")]
    InactiveChallenger(u32),
    #[error("request {0:?} is not ready to finalize")]
    NotReady(String),
    #[error("replayed transaction {seq} produced a different outcome")]
    ReplayDivergence { seq: u64 },
    #[error(transparent)]
    Timelock(#[from] TimelockError),
}

/// Computes the proof a holder presents at registration: the challenge
/// point raised to the holder's secret key.
pub fn possession_proof<B: PairingBackend>(backend: &B, challenge: &B::G2, sk: &B::Scalar) -> B::G2 {
    backend.pow_g2(challenge, sk)
}

pub struct LedgerState<B: PairingBackend> {
    backend: B,
    params: LedgerParams,
    challenge: B::G2,
    holders: Vec<HolderRecord<B>>,
    requests: BTreeMap<String, StoredRequest<B>>,
    submissions: Vec<Submission<B>>,
    blocks: Vec<BlockRecord>,
    accounts: TokenAccounts,
    log: Vec<LogEntry>,
}

/// Serialized view the state hash is computed over. The log is excluded:
/// it is the input that reproduces everything below.
#[derive(Serialize)]
struct StateView<'a> {
    accounts: &'a TokenAccounts,
    blocks: &'a [BlockRecord],
    challenge_hex: String,
    holders: Vec<HolderView>,
    params: &'a LedgerParams,
    requests: Vec<RequestView>,
    submissions: Vec<SubmissionView>,
}

#[derive(Serialize)]
struct HolderView {
    deposit: u64,
    index: u32,
    pk_hex: String,
    rewards: u64,
    status: HolderStatus,
}

#[derive(Serialize)]
struct RequestView {
    client_id: String,
    escrow: u64,
    fee: u64,
    request: RequestWire,
    status: RequestStatus,
}

#[derive(Serialize)]
struct SubmissionView {
    block_height: u64,
    block_time: u64,
    dispute_deadline: u64,
    holder_index: u32,
    id: u64,
    request_id: String,
    share_hex: String,
    status: SubmissionStatus,
}

impl<B: PairingBackend> LedgerState<B> {
    pub fn new(backend: B, params: LedgerParams) -> Self {
        let mut exponent = backend.scalar_from_u64(params.challenge_seed);
        if backend.scalar_is_zero(&exponent) {
            exponent = backend.scalar_from_u64(1);
        }
        let challenge = backend.pow_g2(&backend.g2(), &exponent);
        LedgerState {
            backend,
            params,
            challenge,
            holders: Vec::new(),
            requests: BTreeMap::new(),
            submissions: Vec::new(),
            blocks: Vec::new(),
            accounts: TokenAccounts::default(),
            log: Vec::new(),
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn params(&self) -> &LedgerParams {
        &self.params
    }

    /// Challenge point holders sign at registration.
    pub fn challenge(&self) -> &B::G2 {
        &self.challenge
    }

    pub fn holders(&self) -> &[HolderRecord<B>] {
        &self.holders
    }

    pub fn requests(&self) -> impl Iterator<Item = &StoredRequest<B>> {
        self.requests.values()
    }

    pub fn request(&self, request_id: &str) -> Option<&StoredRequest<B>> {
        self.requests.get(request_id)
    }

    pub fn submissions(&self) -> &[Submission<B>] {
        &self.submissions
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    pub fn accounts(&self) -> &TokenAccounts {
        &self.accounts
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn tip_height(&self) -> u64 {
        self.blocks.last().map_or(0, |b| b.height)
    }

    /// Chain time: the last accepted block's timestamp.
    pub fn tip_time(&self) -> u64 {
        self.blocks.last().map_or(self.params.genesis_time, |b| b.timestamp)
    }

    /// Token inflow and (held + outflow); the two must always agree.
    pub fn token_totals(&self) -> (u64, u64) {
        let inflow = self.accounts.deposited_total + self.accounts.fees_total;
        let held_deposits: u64 = self.holders.iter().map(|h| h.deposit).sum();
        let held_escrow: u64 = self.requests.values().map(|r| r.escrow).sum();
        let outflow =
            self.accounts.rewards_paid + self.accounts.burned + self.accounts.refunded;
        (inflow, held_deposits + held_escrow + outflow)
    }

    pub fn conservation_holds(&self) -> bool {
        let (inflow, accounted) = self.token_totals();
        inflow == accounted
    }

    /// SHA-256 over the canonical serialization of everything but the log.
    pub fn state_hash(&self) -> String {
        let view = StateView {
            accounts: &self.accounts,
            blocks: &self.blocks,
            challenge_hex: hex::encode(self.backend.g2_to_bytes(&self.challenge)),
            holders: self
                .holders
                .iter()
                .map(|h| HolderView {
                    deposit: h.deposit,
                    index: h.index,
                    pk_hex: hex::encode(self.backend.g1_to_bytes(&h.pk)),
                    rewards: h.rewards,
                    status: h.status,
                })
                .collect(),
            params: &self.params,
            requests: self
                .requests
                .values()
                .map(|r| RequestView {
                    client_id: r.client_id.clone(),
                    escrow: r.escrow,
                    fee: r.fee,
                    request: r.request.to_wire(&self.backend),
                    status: r.status,
                })
                .collect(),
            submissions: self
                .submissions
                .iter()
                .map(|s| SubmissionView {
                    block_height: s.block_height,
                    block_time: s.block_time,
                    dispute_deadline: s.dispute_deadline,
                    holder_index: s.holder_index,
                    id: s.id,
                    request_id: s.request_id.clone(),
                    share_hex: hex::encode(self.backend.g1_to_bytes(&s.share.value)),
                    status: s.status,
                })
                .collect(),
        };
        hex::encode(Sha256::digest(to_canonical_json(&view).as_bytes()))
    }

    /// Applies one transaction. On success the transaction and its outcome
    /// are appended to the log; errors leave both state and log untouched.
    pub fn apply(&mut self, tx: Transaction) -> Result<TxOutcome, LedgerError> {
        let outcome = match &tx {
            Transaction::RegisterHolder { deposit, pk_hex, possession_sig_hex } => {
                self.register_holder(*deposit, pk_hex, possession_sig_hex)?
            }
            Transaction::AdvanceBlock { claimed_timestamp, proposer, reference_time } => {
                self.advance_block(*claimed_timestamp, *proposer, *reference_time)?
            }
            Transaction::PostRequest { client_id, fee, request } => {
                self.post_request(client_id, *fee, request)?
            }
            Transaction::SubmitShare { holder_index, request_id, share_hex } => {
                self.submit_share(*holder_index, request_id, share_hex)?
            }
            Transaction::RaiseDispute { challenger_index, submission_id } => {
                self.raise_dispute(*challenger_index, *submission_id)?
            }
            Transaction::FinalizeRequest { request_id } => self.finalize_request(request_id)?,
        };
        let seq = self.log.len() as u64;
        self.log.push(LogEntry { seq, tx, outcome: outcome.clone() });
        debug_assert!(self.conservation_holds());
        Ok(outcome)
    }

    fn decode_hex(field: &str) -> Result<Vec<u8>, LedgerError> {
        hex::decode(field).map_err(|_| LedgerError::Timelock(TimelockError::MalformedHex))
    }

    fn register_holder(
        &mut self,
        deposit: u64,
        pk_hex: &str,
        sig_hex: &str,
    ) -> Result<TxOutcome, LedgerError> {
        if deposit < self.params.deposit_min {
            return Err(LedgerError::InsufficientDeposit {
                required: self.params.deposit_min,
                got: deposit,
            });
        }
        let pk = self
            .backend
            .g1_from_bytes(&Self::decode_hex(pk_hex)?)
            .map_err(TimelockError::from)?;
        if self.holders.iter().any(|h| h.pk == pk) {
            return Err(LedgerError::DuplicateKey);
        }
        let sig = self
            .backend
            .g2_from_bytes(&Self::decode_hex(sig_hex)?)
            .map_err(TimelockError::from)?;
        let lhs = self.backend.pairing(&pk, &self.challenge);
        let rhs = self.backend.pairing(&self.backend.g1(), &sig);
        if lhs != rhs {
            return Err(LedgerError::BadPossessionProof);
        }
        let index = self.holders.len() as u32 + 1;
        self.holders.push(HolderRecord {
            index,
            pk,
            deposit,
            rewards: 0,
            status: HolderStatus::Active,
        });
        self.accounts.deposited_total += deposit;
        Ok(TxOutcome::HolderRegistered { index })
    }

    fn advance_block(
        &mut self,
        claimed: u64,
        proposer: u32,
        reference: u64,
    ) -> Result<TxOutcome, LedgerError> {
        let holder = self
            .holders
            .get(proposer as usize - 1)
            .ok_or(LedgerError::UnknownHolder(proposer))?;
        if holder.status != HolderStatus::Active {
            return Err(LedgerError::InactiveProposer(proposer));
        }
        if claimed <= self.tip_time() {
            return Ok(TxOutcome::BlockRejected { reason: BlockRejection::NonMonotonicTimestamp });
        }
        if claimed > reference + self.params.max_forward_drift_s {
            return Ok(TxOutcome::BlockRejected { reason: BlockRejection::ExcessiveForwardDrift });
        }
        let height = self.tip_height() + 1;
        self.blocks.push(BlockRecord { height, timestamp: claimed, proposer });
        Ok(TxOutcome::BlockAccepted { height, timestamp: claimed })
    }

    fn post_request(
        &mut self,
        client_id: &str,
        fee: u64,
        wire: &RequestWire,
    ) -> Result<TxOutcome, LedgerError> {
        let request = TimelockRequest::from_wire(&self.backend, wire)?;
        let n = request.holder_count;
        let t = request.threshold;
        if t == 0 || t > n {
            return Err(LedgerError::MalformedRequest(format!(
                "threshold {t} invalid for {n} holders"
            )));
        }
        if n as usize != self.holders.len() {
            return Err(LedgerError::MalformedRequest(format!(
                "request names {n} holders but {} are registered",
                self.holders.len()
            )));
        }
        let expected_masks: Vec<u32> = (t..=n).collect();
        let mut mask_indices: Vec<u32> = request.masks.iter().map(|m| m.index).collect();
        mask_indices.sort_unstable();
        if mask_indices != expected_masks {
            return Err(LedgerError::MalformedRequest("mask indices must cover threshold..=holder_count".into()));
        }
        if derive_request_id(wire) != wire.request_id {
            return Err(LedgerError::MalformedRequest("request id does not match contents".into()));
        }
        let required = u64::from(t) * self.params.reward_per_share;
        if fee < required {
            return Err(LedgerError::InsufficientFee { required, got: fee });
        }
        if self.requests.contains_key(&request.request_id) {
            return Err(LedgerError::DuplicateRequest(request.request_id));
        }
        let request_id = request.request_id.clone();
        self.requests.insert(
            request_id.clone(),
            StoredRequest {
                request,
                client_id: client_id.to_string(),
                fee,
                escrow: fee,
                status: RequestStatus::Active,
            },
        );
        self.accounts.fees_total += fee;
        Ok(TxOutcome::RequestPosted { request_id })
    }

    fn submit_share(
        &mut self,
        holder_index: u32,
        request_id: &str,
        share_hex: &str,
    ) -> Result<TxOutcome, LedgerError> {
        let share_value = self
            .backend
            .g1_from_bytes(&Self::decode_hex(share_hex)?)
            .map_err(TimelockError::from)?;
        let holder_pos = holder_index as usize - 1;
        if holder_index == 0 || holder_pos >= self.holders.len() {
            return Err(LedgerError::UnknownHolder(holder_index));
        }
        let stored = self
            .requests
            .get(request_id)
            .ok_or_else(|| LedgerError::UnknownRequest(request_id.to_string()))?;
        if stored.status != RequestStatus::Active {
            return Err(LedgerError::RequestNotActive(request_id.to_string()));
        }
        if holder_index > stored.request.holder_count {
            return Err(LedgerError::ShareOutsideRequest {
                holder_index,
                holder_count: stored.request.holder_count,
            });
        }
        if self.holders[holder_pos].status != HolderStatus::Active {
            return Ok(TxOutcome::SubmissionRejectedInactive { holder_index });
        }
        if self
            .submissions
            .iter()
            .any(|s| s.request_id == request_id && s.holder_index == holder_index)
        {
            return Err(LedgerError::DuplicateSubmission {
                holder_index,
                request_id: request_id.to_string(),
            });
        }
        let now = self.tip_time();
        if now < stored.request.decrypt_time {
            let holder = &mut self.holders[holder_pos];
            let burned = holder.deposit;
            holder.deposit = 0;
            holder.status = HolderStatus::Slashed;
            self.accounts.burned += burned;
            return Ok(TxOutcome::SubmissionSlashedEarly { holder_index, burned });
        }
        let id = self.submissions.len() as u64;
        let block_time = now;
        self.submissions.push(Submission {
            id,
            request_id: request_id.to_string(),
            holder_index,
            share: SecretShare { holder_index, value: share_value },
            block_height: self.tip_height(),
            block_time,
            dispute_deadline: block_time + self.params.dispute_window_s,
            status: SubmissionStatus::Provisional,
        });
        Ok(TxOutcome::SubmissionProvisional { submission_id: id, block_time })
    }

    fn raise_dispute(
        &mut self,
        challenger_index: u32,
        submission_id: u64,
    ) -> Result<TxOutcome, LedgerError> {
        let challenger_pos = challenger_index as usize - 1;
        if challenger_index == 0 || challenger_pos >= self.holders.len() {
            return Err(LedgerError::UnknownHolder(challenger_index));
        }
        if self.holders[challenger_pos].status != HolderStatus::Active {
            return Err(LedgerError::InactiveChallenger(challenger_index));
        }
        let submission = self
            .submissions
            .get(submission_id as usize)
            .ok_or(LedgerError::UnknownSubmission(submission_id))?;
        if submission.status != SubmissionStatus::Provisional {
            return Err(LedgerError::NotProvisional(submission_id));
        }
        if self.tip_time() > submission.dispute_deadline {
            return Err(LedgerError::DisputeWindowClosed(submission_id));
        }
        let stored = self
            .requests
            .get(&submission.request_id)
            .unwrap_or_else(|| unreachable!("submission references a stored request"));
        let submitter_index = submission.holder_index;
        let submitter_pk = &self.holders[submitter_index as usize - 1].pk;
        let verdict = verify_share(&self.backend, &submission.share, submitter_pk, &stored.request);
        match verdict {
            ShareVerdict::Valid => Ok(TxOutcome::DisputeDismissed { submission_id }),
            ShareVerdict::InvalidShare => {
                let submitter = &mut self.holders[submitter_index as usize - 1];
                let bounty = self.params.reward_per_share.min(submitter.deposit);
                let burned = submitter.deposit - bounty;
                submitter.deposit = 0;
                submitter.status = HolderStatus::Slashed;
                self.accounts.burned += burned;
                self.accounts.rewards_paid += bounty;
                self.holders[challenger_pos].rewards += bounty;
                self.submissions[submission_id as usize].status = SubmissionStatus::Rejected;
                Ok(TxOutcome::DisputeUpheld { submission_id, bounty, burned })
            }
            ShareVerdict::DishonestClient => {
                let request_id = submission.request_id.clone();
                let submitters: Vec<u32> = self
                    .submissions
                    .iter()
                    .filter(|s| s.request_id == request_id)
                    .map(|s| s.holder_index)
                    .collect();
                for s in self.submissions.iter_mut().filter(|s| s.request_id == request_id) {
                    s.status = SubmissionStatus::Rejected;
                }
                let stored = self.requests.get_mut(&request_id).unwrap();
                stored.status = RequestStatus::Voided;
                let escrow = stored.escrow;
                let per_holder = escrow / submitters.len() as u64;
                let refunded = escrow - per_holder * submitters.len() as u64;
                stored.escrow = 0;
                for idx in &submitters {
                    self.holders[*idx as usize - 1].rewards += per_holder;
                }
                self.accounts.rewards_paid += per_holder * submitters.len() as u64;
                self.accounts.refunded += refunded;
                Ok(TxOutcome::DisputeClientFault {
                    request_id,
                    compensation_per_holder: per_holder,
                    refunded,
                })
            }
        }
    }

    fn finalize_request(&mut self, request_id: &str) -> Result<TxOutcome, LedgerError> {
        let stored = self
            .requests
            .get(request_id)
            .ok_or_else(|| LedgerError::UnknownRequest(request_id.to_string()))?;
        if stored.status != RequestStatus::Active {
            return Err(LedgerError::RequestNotActive(request_id.to_string()));
        }
        let now = self.tip_time();
        let threshold = stored.request.threshold as usize;
        let provisional: Vec<u64> = self
            .submissions
            .iter()
            .filter(|s| s.request_id == request_id && s.status == SubmissionStatus::Provisional)
            .map(|s| s.id)
            .collect();
        let matured: Vec<u64> = provisional
            .iter()
            .copied()
            .filter(|id| now > self.submissions[*id as usize].dispute_deadline)
            .collect();

        let enough = matured.len() >= threshold;
        // The failure path only opens once a timely reveal plus a full
        // dispute window can no longer happen.
        let expired = matured.len() == provisional.len()
            && now > stored.request.decrypt_time + self.params.dispute_window_s;
        if !enough && !expired {
            return Err(LedgerError::NotReady(request_id.to_string()));
        }

        let reward = self.params.reward_per_share;
        let mut rewarded = Vec::new();
        let mut unrewarded = Vec::new();
        let mut reveal_block_time = None;
        let mut escrow_spent = 0u64;
        if enough {
            for (pos, id) in matured.iter().enumerate() {
                let holder_index = self.submissions[*id as usize].holder_index;
                self.submissions[*id as usize].status = SubmissionStatus::Accepted;
                if pos < threshold {
                    rewarded.push(holder_index);
                    self.holders[holder_index as usize - 1].rewards += reward;
                    escrow_spent += reward;
                    if pos + 1 == threshold {
                        reveal_block_time = Some(self.submissions[*id as usize].block_time);
                    }
                } else {
                    unrewarded.push(holder_index);
                }
            }
            // Late arrivals whose windows are still open: the reveal is
            // already decided, so they count as accepted but unpaid.
            for id in provisional.iter().copied().filter(|id| !matured.contains(id)) {
                self.submissions[id as usize].status = SubmissionStatus::Accepted;
                unrewarded.push(self.submissions[id as usize].holder_index);
            }
        } else {
            for id in &provisional {
                self.submissions[*id as usize].status = SubmissionStatus::Accepted;
                unrewarded.push(self.submissions[*id as usize].holder_index);
            }
        }

        let stored = self.requests.get_mut(request_id).unwrap();
        let refund = stored.escrow - escrow_spent;
        stored.escrow = 0;
        stored.status = RequestStatus::Finalized;
        self.accounts.rewards_paid += escrow_spent;
        self.accounts.refunded += refund;
        let report = RewardReport {
            request_id: request_id.to_string(),
            rewarded,
            unrewarded,
            reveal_block_time,
            reconstructed: enough,
            escrow_refunded: refund,
        };
        Ok(TxOutcome::RequestFinalized { report })
    }

    /// One transaction per line, in application order.
    pub fn export_log_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.log {
            out.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Parses a JSON-lines transaction log.
pub fn parse_log_jsonl(text: &str) -> Result<Vec<LogEntry>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// Rebuilds a ledger by replaying a log from genesis. Fails if any replayed
/// transaction errors or produces an outcome different from the recorded
/// one.
pub fn replay<B: PairingBackend>(
    backend: B,
    params: LedgerParams,
    log: &[LogEntry],
) -> Result<LedgerState<B>, LedgerError> {
    let mut state = LedgerState::new(backend, params);
    for entry in log {
        let outcome = state.apply(entry.tx.clone())?;
        if outcome != entry.outcome {
            return Err(LedgerError::ReplayDivergence { seq: entry.seq });
        }
    }
    Ok(state)
}
