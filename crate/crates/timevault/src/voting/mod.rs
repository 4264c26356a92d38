//! Winner-change resilience of preferential elections against strategic
//! ballot truncation.
//!
//! A voter who has seen the sincere population's aggregate ranking can
//! drop every alternative ranked above their own first choice, promoting
//! it without breaking the strict-order ballot format. This module
//! ingests strict-order ballot files, determines winners under plurality,
//! truncated Borda, or instant-runoff counting, applies that
//! transformation to a sampled malicious minority, and estimates how
//! often the election winner flips.
//!
//! Small sample spaces are enumerated exhaustively, so results at tiny
//! electorate sizes are exact rather than sampled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoteError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: ballot repeats alternative {alternative}")]
    DuplicateAlternativeInBallot { line: usize, alternative: u32 },
    #[error("profile has no ballots")]
    EmptyProfile,
    #[error("sincere percentage {0} outside 1..=100")]
    BadPercent(u32),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// One ballot line: a strict, possibly truncated ranking and how many
/// voters cast it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub ranking: Vec<u32>,
    pub weight: u64,
}

/// An election: `alternatives` ids 1..=K and weighted ballots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceProfile {
    pub alternatives: u32,
    pub ballots: Vec<Ballot>,
}

impl PreferenceProfile {
    /// Total number of voters across all multiplicities.
    pub fn voter_count(&self) -> u64 {
        self.ballots.iter().map(|b| b.weight).sum()
    }

    pub fn validate(&self) -> Result<(), VoteError> {
        for ballot in &self.ballots {
            if ballot.ranking.is_empty() {
                return Err(VoteError::Invalid("ballot with an empty ranking".into()));
            }
            if ballot.weight == 0 {
                return Err(VoteError::Invalid("ballot with zero weight".into()));
            }
            let mut seen = vec![false; self.alternatives as usize + 1];
            for &id in &ballot.ranking {
                if id == 0 || id > self.alternatives {
                    return Err(VoteError::Invalid(format!(
                        "alternative {id} outside 1..={}",
                        self.alternatives
                    )));
                }
                if seen[id as usize] {
                    return Err(VoteError::Invalid(format!("alternative {id} ranked twice")));
                }
                seen[id as usize] = true;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotingRule {
    /// First choices only.
    #[default]
    Plurality,
    /// Position p earns K-1-p points; unranked alternatives earn 0.
    BordaTruncated,
    /// Repeated elimination of the weakest first-choice tally.
    Irv,
}

impl std::str::FromStr for VotingRule {
    type Err = VoteError;

    fn from_str(s: &str) -> Result<Self, VoteError> {
        match s {
            "plurality" => Ok(VotingRule::Plurality),
            "borda_truncated" => Ok(VotingRule::BordaTruncated),
            "irv" => Ok(VotingRule::Irv),
            other => Err(VoteError::Invalid(format!("unknown voting rule {other:?}"))),
        }
    }
}

impl std::fmt::Display for VotingRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VotingRule::Plurality => "plurality",
            VotingRule::BordaTruncated => "borda_truncated",
            VotingRule::Irv => "irv",
        })
    }
}

/// Outcome of the winner-change experiment at one sincere percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub l: u32,
    pub iterations: u64,
    pub winner_change_count: u64,
    pub probability: f64,
}

pub const DEFAULT_ITERATIONS: u64 = 100;
/// Sample spaces up to this size are enumerated instead of sampled.
pub const EXHAUSTIVE_CAP: u64 = 4096;

/// Parses the strict-order ballot text format: `#`-prefixed header lines
/// (only `# NUMBER ALTERNATIVES: K` is load-bearing, the rest are
/// metadata), then one `count: a,b,c` line per distinct ballot. When no
/// header declares K, the largest id seen defines it.
pub fn parse_ballot_file(bytes: &[u8]) -> Result<PreferenceProfile, VoteError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| VoteError::ParseError { line: 0, reason: "file is not valid UTF-8".into() })?;
    let fail = |line: usize, reason: &str| {
        Err(VoteError::ParseError { line, reason: reason.into() })
    };
    let mut declared: Option<u32> = None;
    let mut ballots: Vec<Ballot> = Vec::new();
    let mut max_id = 0u32;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if !ballots.is_empty() {
                return fail(line_no, "header lines must precede all ballots");
            }
            if let Some((key, value)) = header.split_once(':') {
                if key.trim().eq_ignore_ascii_case("NUMBER ALTERNATIVES") {
                    let k: u32 = match value.trim().parse() {
                        Ok(k) => k,
                        Err(_) => return fail(line_no, "alternative count is not a number"),
                    };
                    if k == 0 {
                        return fail(line_no, "at least one alternative is required");
                    }
                    declared = Some(k);
                }
            }
            continue;
        }
        let Some((count_str, ranking_str)) = line.split_once(':') else {
            return fail(line_no, "expected 'count: a,b,c'");
        };
        let weight: u64 = match count_str.trim().parse() {
            Ok(w) => w,
            Err(_) => return fail(line_no, "ballot multiplicity is not a number"),
        };
        if weight == 0 {
            return fail(line_no, "ballot multiplicity must be positive");
        }
        let mut ranking = Vec::new();
        for token in ranking_str.split(',') {
            let token = token.trim();
            if token.is_empty() {
                return fail(line_no, "empty alternative id");
            }
            let id: u32 = match token.parse() {
                Ok(id) => id,
                Err(_) => return fail(line_no, "alternative id is not a number"),
            };
            if id == 0 {
                return fail(line_no, "alternative ids start at 1");
            }
            if let Some(k) = declared {
                if id > k {
                    return fail(line_no, "alternative id exceeds the declared count");
                }
            }
            if ranking.contains(&id) {
                return Err(VoteError::DuplicateAlternativeInBallot {
                    line: line_no,
                    alternative: id,
                });
            }
            ranking.push(id);
            max_id = max_id.max(id);
        }
        ballots.push(Ballot { ranking, weight });
    }
    Ok(PreferenceProfile { alternatives: declared.unwrap_or(max_id), ballots })
}

/// Writes the normalized text form: declared alternative count, then one
/// line per distinct ranking with multiplicities merged, ordered by
/// descending weight and lexicographic ranking. Serializing a parse of
/// this output reproduces it byte for byte.
pub fn serialize_profile(profile: &PreferenceProfile) -> String {
    let mut merged: BTreeMap<&[u32], u64> = BTreeMap::new();
    for ballot in &profile.ballots {
        *merged.entry(ballot.ranking.as_slice()).or_insert(0) += ballot.weight;
    }
    let mut rows: Vec<(&[u32], u64)> = merged.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut out = format!("# NUMBER ALTERNATIVES: {}\n", profile.alternatives);
    for (ranking, weight) in rows {
        let ids: Vec<String> = ranking.iter().map(ToString::to_string).collect();
        out.push_str(&format!("{}: {}\n", weight, ids.join(",")));
    }
    out
}

fn ballot_refs(profile: &PreferenceProfile) -> Vec<(&[u32], u64)> {
    profile.ballots.iter().map(|b| (b.ranking.as_slice(), b.weight)).collect()
}

fn positional_scores(ballots: &[(&[u32], u64)], k: u32, rule: VotingRule) -> Vec<u64> {
    let mut scores = vec![0u64; k as usize + 1];
    for (ranking, weight) in ballots {
        match rule {
            VotingRule::Plurality => scores[ranking[0] as usize] += weight,
            VotingRule::BordaTruncated => {
                for (pos, id) in ranking.iter().enumerate() {
                    scores[*id as usize] += weight * (u64::from(k) - 1 - pos as u64);
                }
            }
            VotingRule::Irv => unreachable!("instant runoff has no positional score"),
        }
    }
    scores
}

/// Full instant-runoff ordering: eliminate the weakest first-choice
/// tally each round (highest id on ties, so lower ids survive longer)
/// and list alternatives in reverse elimination order. The survivor
/// equals the majority-based winner because a majority holder can never
/// have the minimum tally.
fn irv_ranking(ballots: &[(&[u32], u64)], k: u32) -> Vec<u32> {
    let mut active = vec![true; k as usize + 1];
    let mut eliminated: Vec<u32> = Vec::new();
    while eliminated.len() + 1 < k as usize {
        let mut tallies = vec![0u64; k as usize + 1];
        for (ranking, weight) in ballots {
            // A ballot whose ranked alternatives are all eliminated is
            // exhausted and counts for nobody.
            if let Some(id) = ranking.iter().find(|id| active[**id as usize]) {
                tallies[*id as usize] += weight;
            }
        }
        let loser = (1..=k)
            .filter(|id| active[*id as usize])
            .min_by(|a, b| {
                tallies[*a as usize].cmp(&tallies[*b as usize]).then_with(|| b.cmp(a))
            })
            .expect("at least two alternatives remain");
        active[loser as usize] = false;
        eliminated.push(loser);
    }
    let survivor = (1..=k).find(|id| active[*id as usize]).expect("one survivor");
    std::iter::once(survivor).chain(eliminated.into_iter().rev()).collect()
}

fn aggregate_refs(ballots: &[(&[u32], u64)], k: u32, rule: VotingRule) -> Vec<u32> {
    match rule {
        VotingRule::Plurality | VotingRule::BordaTruncated => {
            let scores = positional_scores(ballots, k, rule);
            let mut ids: Vec<u32> = (1..=k).collect();
            ids.sort_by(|a, b| {
                scores[*b as usize].cmp(&scores[*a as usize]).then_with(|| a.cmp(b))
            });
            ids
        }
        VotingRule::Irv => irv_ranking(ballots, k),
    }
}

/// All alternatives ordered best to worst under `rule`; ties broken by
/// lowest id.
pub fn aggregate_ranking(
    profile: &PreferenceProfile,
    rule: VotingRule,
) -> Result<Vec<u32>, VoteError> {
    profile.validate()?;
    if profile.ballots.is_empty() || profile.alternatives == 0 {
        return Err(VoteError::EmptyProfile);
    }
    Ok(aggregate_refs(&ballot_refs(profile), profile.alternatives, rule))
}

pub fn winner(profile: &PreferenceProfile, rule: VotingRule) -> Result<u32, VoteError> {
    Ok(aggregate_ranking(profile, rule)?[0])
}

/// The strategic rewrite: drop every alternative the sincere aggregate
/// ranks strictly above the voter's own first choice, keeping the
/// survivors in their original order. The first choice always survives.
pub fn malicious_transform(true_ballot: &[u32], sincere_aggregate: &[u32]) -> Vec<u32> {
    let Some(&first) = true_ballot.first() else { return Vec::new() };
    let position = |id: u32| {
        sincere_aggregate.iter().position(|x| *x == id).unwrap_or(usize::MAX)
    };
    let cutoff = position(first);
    true_ballot.iter().copied().filter(|id| position(*id) >= cutoff).collect()
}

/// `min(C(n, k), cap + 1)`, so callers can test `<= cap` without
/// overflow.
fn binomial_capped(n: u64, k: u64, cap: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc holds C(n, i), so the division below is exact.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(cap) {
            return cap + 1;
        }
    }
    acc as u64
}

/// Lexicographic m-subset enumeration over 0..n. Returns false once the
/// last combination has been visited.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let m = combo.len();
    for i in (0..m).rev() {
        if combo[i] < n - m + i {
            combo[i] += 1;
            for j in i + 1..m {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Estimates the probability that a malicious minority flips the winner.
///
/// Voters are expanded to multiplicity one; `(100 - l_percent)%` of them
/// (floored) turn malicious, learn the sincere remainder's aggregate
/// ranking, and rewrite their ballots with [`malicious_transform`]. A
/// winner change means the full electorate's winner differs from the
/// sincere-only winner. All `C(N, m)` malicious sets are enumerated when
/// that count is at most [`EXHAUSTIVE_CAP`]; otherwise `iterations` sets
/// are sampled without replacement, deterministically per seed.
pub fn simulate(
    profile: &PreferenceProfile,
    l_percent: u32,
    iterations: u64,
    rule: VotingRule,
    seed: u64,
) -> Result<SimResult, VoteError> {
    profile.validate()?;
    if !(1..=100).contains(&l_percent) {
        return Err(VoteError::BadPercent(l_percent));
    }
    if iterations == 0 {
        return Err(VoteError::Invalid("iterations must be positive".into()));
    }
    let voters: Vec<&[u32]> = profile
        .ballots
        .iter()
        .flat_map(|b| std::iter::repeat(b.ranking.as_slice()).take(b.weight as usize))
        .collect();
    let n = voters.len();
    if n == 0 {
        return Err(VoteError::EmptyProfile);
    }
    let k = profile.alternatives;
    let m = (u64::from(100 - l_percent) * n as u64 / 100) as usize;

    let changes_winner = |malicious: &[usize]| -> bool {
        let mut is_malicious = vec![false; n];
        for &i in malicious {
            is_malicious[i] = true;
        }
        let sincere: Vec<(&[u32], u64)> = voters
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_malicious[*i])
            .map(|(_, ranking)| (*ranking, 1))
            .collect();
        let sincere_aggregate = aggregate_refs(&sincere, k, rule);
        let sincere_winner = sincere_aggregate[0];
        let rewritten: Vec<Vec<u32>> = malicious
            .iter()
            .map(|&i| malicious_transform(voters[i], &sincere_aggregate))
            .collect();
        let mut everyone = sincere;
        everyone.extend(rewritten.iter().map(|r| (r.as_slice(), 1)));
        aggregate_refs(&everyone, k, rule)[0] != sincere_winner
    };

    let mut done = 0u64;
    let mut changes = 0u64;
    if binomial_capped(n as u64, m as u64, EXHAUSTIVE_CAP) <= EXHAUSTIVE_CAP {
        let mut combo: Vec<usize> = (0..m).collect();
        loop {
            done += 1;
            if changes_winner(&combo) {
                changes += 1;
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..iterations {
            let picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
            done += 1;
            if changes_winner(&picked) {
                changes += 1;
            }
        }
    }
    Ok(SimResult {
        l: l_percent,
        iterations: done,
        winner_change_count: changes,
        probability: changes as f64 / done as f64,
    })
}

/// Runs [`simulate`] for every sincere percentage 1..=100 in parallel,
/// deriving one seed per percentage from the master seed.
pub fn sweep(
    profile: &PreferenceProfile,
    rule: VotingRule,
    seed: u64,
) -> Result<Vec<SimResult>, VoteError> {
    (1u32..=100)
        .into_par_iter()
        .map(|l| {
            let l_seed = seed.wrapping_add(u64::from(l).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            simulate(profile, l, DEFAULT_ITERATIONS, rule, l_seed)
        })
        .collect()
}

pub fn sweep_csv(results: &[SimResult]) -> String {
    let mut out = String::from("l,iterations,changes,probability\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            r.l, r.iterations, r.winner_change_count, r.probability
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(k: u32, ballots: &[(&[u32], u64)]) -> PreferenceProfile {
        PreferenceProfile {
            alternatives: k,
            ballots: ballots
                .iter()
                .map(|(ranking, weight)| Ballot { ranking: ranking.to_vec(), weight: *weight })
                .collect(),
        }
    }

    /// First-choice counts k3 > k4 > k5 > k2 > k1 across 80 voters, the
    /// aggregate used by the strategic-rewrite walkthrough.
    fn eighty_voters() -> PreferenceProfile {
        profile(
            5,
            &[
                (&[3, 4, 5, 2, 1][..], 30),
                (&[4, 3, 5, 2, 1][..], 20),
                (&[5, 1, 3, 2, 4][..], 15),
                (&[2, 5, 3, 1, 4][..], 10),
                (&[1, 5, 2, 3, 4][..], 5),
            ],
        )
    }

    #[test]
    fn parses_headers_weights_and_truncated_rankings() {
        let text = "# TITLE: tiny fixture\n# NUMBER ALTERNATIVES: 3\n2: 1,3\n1: 2\n";
        let parsed = parse_ballot_file(text.as_bytes()).unwrap();
        assert_eq!(parsed.alternatives, 3);
        assert_eq!(parsed.voter_count(), 3);
        assert_eq!(
            parsed.ballots,
            vec![
                Ballot { ranking: vec![1, 3], weight: 2 },
                Ballot { ranking: vec![2], weight: 1 },
            ]
        );

        let inferred = parse_ballot_file(b"2: 1,3\n1: 2\n").unwrap();
        assert_eq!(inferred.alternatives, 3);
    }

    #[test]
    fn parser_reports_line_numbers_and_duplicates() {
        let err = |text: &str| parse_ballot_file(text.as_bytes()).unwrap_err();
        assert!(matches!(err("x: 1\n"), VoteError::ParseError { line: 1, .. }));
        assert!(matches!(err("1: 1\nbroken\n"), VoteError::ParseError { line: 2, .. }));
        assert!(matches!(err("1: 0\n"), VoteError::ParseError { line: 1, .. }));
        assert!(matches!(err("0: 1\n"), VoteError::ParseError { line: 1, .. }));
        assert!(matches!(err("1:\n"), VoteError::ParseError { line: 1, .. }));
        assert!(matches!(
            err("# NUMBER ALTERNATIVES: 2\n1: 3\n"),
            VoteError::ParseError { line: 2, .. }
        ));
        assert!(matches!(
            err("1: 1\n# NUMBER ALTERNATIVES: 2\n"),
            VoteError::ParseError { line: 2, .. }
        ));
        assert!(matches!(
            err("# NUMBER ALTERNATIVES: x\n"),
            VoteError::ParseError { line: 1, .. }
        ));
        assert_eq!(
            err("2: 1,3\n1: 2,2\n"),
            VoteError::DuplicateAlternativeInBallot { line: 2, alternative: 2 }
        );
        assert!(matches!(
            parse_ballot_file(&[0xff, 0xfe]).unwrap_err(),
            VoteError::ParseError { line: 0, .. }
        ));
    }

    #[test]
    fn serialization_is_idempotent_and_normalizing() {
        let normalized = "# NUMBER ALTERNATIVES: 3\n2: 1,3\n1: 2\n";
        let parsed = parse_ballot_file(normalized.as_bytes()).unwrap();
        assert_eq!(serialize_profile(&parsed), normalized);

        // Duplicate rankings merge; rows order by weight, then ranking.
        let messy = "# NUMBER ALTERNATIVES: 3\n1: 2\n1: 1,3\n1: 1,3\n";
        let merged = parse_ballot_file(messy.as_bytes()).unwrap();
        let first_pass = serialize_profile(&merged);
        assert_eq!(first_pass, normalized);
        let second_pass = serialize_profile(&parse_ballot_file(first_pass.as_bytes()).unwrap());
        assert_eq!(second_pass, first_pass);
    }

    #[test]
    fn plurality_winner_counts_first_choices_and_breaks_ties_low() {
        let p = profile(2, &[(&[1][..], 2), (&[2][..], 1)]);
        assert_eq!(winner(&p, VotingRule::Plurality).unwrap(), 1);

        let tie = profile(2, &[(&[2][..], 1), (&[1][..], 1)]);
        assert_eq!(winner(&tie, VotingRule::Plurality).unwrap(), 1);

        let empty = profile(3, &[]);
        assert_eq!(winner(&empty, VotingRule::Plurality), Err(VoteError::EmptyProfile));
    }

    #[test]
    fn eighty_voter_profile_elects_alternative_three() {
        let p = eighty_voters();
        assert_eq!(winner(&p, VotingRule::Plurality).unwrap(), 3);
        assert_eq!(aggregate_ranking(&p, VotingRule::Plurality).unwrap(), vec![3, 4, 5, 2, 1]);
    }

    #[test]
    fn truncated_borda_scores_prefix_positions() {
        // K=4: 2 ballots <1,2,3> give 1:6, 2:4, 3:2; one <4,2> gives
        // 4:3, 2:2. Totals 1:6, 2:6, 3:2, 4:3; the 1-2 tie breaks low.
        let p = profile(4, &[(&[1, 2, 3][..], 2), (&[4, 2][..], 1)]);
        assert_eq!(
            aggregate_ranking(&p, VotingRule::BordaTruncated).unwrap(),
            vec![1, 2, 4, 3]
        );

        // A lone truncated ballot ranks its listed alternatives first
        // and leaves the rest trailing by id.
        let single = profile(4, &[(&[2, 4][..], 1)]);
        assert_eq!(
            aggregate_ranking(&single, VotingRule::BordaTruncated).unwrap(),
            vec![2, 4, 1, 3]
        );
    }

    #[test]
    fn instant_runoff_transfers_eliminated_votes() {
        // Plurality picks 1 (4 firsts), but 3's elimination transfers
        // both of its votes to 2, which then beats 1 5 to 4.
        let p = profile(3, &[(&[1][..], 4), (&[2, 3][..], 3), (&[3, 2][..], 2)]);
        assert_eq!(winner(&p, VotingRule::Plurality).unwrap(), 1);
        assert_eq!(winner(&p, VotingRule::Irv).unwrap(), 2);
        assert_eq!(aggregate_ranking(&p, VotingRule::Irv).unwrap(), vec![2, 1, 3]);
    }

    #[test]
    fn transform_drops_everything_the_aggregate_ranks_above_the_first_choice() {
        assert_eq!(
            malicious_transform(&[5, 1, 3, 2, 4], &[3, 4, 5, 2, 1]),
            vec![5, 1, 2]
        );
        // First choice on top of the aggregate: nothing outranks it.
        assert_eq!(malicious_transform(&[3, 1, 2], &[3, 4, 5, 2, 1]), vec![3, 1, 2]);
        assert_eq!(malicious_transform(&[4], &[3, 4, 5, 2, 1]), vec![4]);
    }

    #[test]
    fn fully_sincere_population_never_changes_the_winner() {
        for rule in [VotingRule::Plurality, VotingRule::BordaTruncated, VotingRule::Irv] {
            let result = simulate(&eighty_voters(), 100, 100, rule, 7).unwrap();
            assert_eq!(result.winner_change_count, 0);
            assert_eq!(result.probability, 0.0);
        }
    }

    #[test]
    fn simulate_validates_percent_and_profile() {
        let p = eighty_voters();
        assert_eq!(
            simulate(&p, 0, 100, VotingRule::Plurality, 1),
            Err(VoteError::BadPercent(0))
        );
        assert_eq!(
            simulate(&p, 101, 100, VotingRule::Plurality, 1),
            Err(VoteError::BadPercent(101))
        );
        let empty = profile(3, &[]);
        assert_eq!(
            simulate(&empty, 50, 100, VotingRule::Plurality, 1),
            Err(VoteError::EmptyProfile)
        );
    }

    /// Independent oracle: enumerate malicious sets as bitmasks with an
    /// independently coded plurality tally, and compare exact counts.
    #[test]
    fn small_electorates_match_a_bitmask_enumeration_oracle() {
        let p = profile(3, &[(&[1, 3, 2][..], 4), (&[2, 1, 3][..], 3), (&[3, 2, 1][..], 2)]);
        let voters: Vec<&[u32]> = p
            .ballots
            .iter()
            .flat_map(|b| std::iter::repeat(b.ranking.as_slice()).take(b.weight as usize))
            .collect();
        let n = voters.len();
        assert_eq!(n, 9);

        let oracle_plurality = |ballots: &[Vec<u32>]| -> u32 {
            let mut firsts = [0u64; 4];
            for b in ballots {
                firsts[b[0] as usize] += 1;
            }
            (1..=3).max_by_key(|id| (firsts[*id as usize], std::cmp::Reverse(*id))).unwrap()
        };

        for rule in [VotingRule::Plurality, VotingRule::BordaTruncated] {
            for l in 1..=100u32 {
                let m = ((100 - l) as usize * n) / 100;
                let mut oracle_iterations = 0u64;
                let mut oracle_changes = 0u64;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != m {
                        continue;
                    }
                    oracle_iterations += 1;
                    let sincere: Vec<Vec<u32>> = (0..n)
                        .filter(|i| mask & (1 << i) == 0)
                        .map(|i| voters[i].to_vec())
                        .collect();
                    let sincere_pairs: Vec<(&[u32], u64)> =
                        sincere.iter().map(|r| (r.as_slice(), 1)).collect();
                    let agg = aggregate_refs(&sincere_pairs, 3, rule);
                    let rewritten: Vec<Vec<u32>> = (0..n)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| malicious_transform(voters[i], &agg))
                        .collect();
                    let mut everyone = sincere.clone();
                    everyone.extend(rewritten);
                    let sincere_winner = match rule {
                        VotingRule::Plurality => oracle_plurality(&sincere),
                        _ => agg[0],
                    };
                    let full_winner = match rule {
                        VotingRule::Plurality => oracle_plurality(&everyone),
                        _ => {
                            let pairs: Vec<(&[u32], u64)> =
                                everyone.iter().map(|r| (r.as_slice(), 1)).collect();
                            aggregate_refs(&pairs, 3, rule)[0]
                        }
                    };
                    if full_winner != sincere_winner {
                        oracle_changes += 1;
                    }
                }
                let result = simulate(&p, l, 100, rule, 99).unwrap();
                assert_eq!(result.iterations, oracle_iterations, "l={l} rule={rule}");
                assert_eq!(result.winner_change_count, oracle_changes, "l={l} rule={rule}");
            }
        }
    }

    #[test]
    fn monte_carlo_path_is_seed_deterministic() {
        // N=30 with l=50 gives C(30,15) sets, far past the exhaustive
        // cap, so sampling takes over.
        let p = profile(3, &[(&[1, 2, 3][..], 10), (&[2, 3, 1][..], 10), (&[3, 1, 2][..], 10)]);
        let a = simulate(&p, 50, 40, VotingRule::Plurality, 1234).unwrap();
        let b = simulate(&p, 50, 40, VotingRule::Plurality, 1234).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iterations, 40);
    }

    #[test]
    fn sweep_covers_every_percentage_and_ends_at_zero() {
        let p = profile(2, &[(&[1, 2][..], 6), (&[2, 1][..], 5)]);
        let results = sweep(&p, VotingRule::Plurality, 7).unwrap();
        assert_eq!(results.len(), 100);
        assert_eq!(results.first().unwrap().l, 1);
        assert_eq!(results.last().unwrap().l, 100);
        assert_eq!(results.last().unwrap().winner_change_count, 0);

        let low: f64 = results[..20].iter().map(|r| r.probability).sum::<f64>() / 20.0;
        let high: f64 = results[80..].iter().map(|r| r.probability).sum::<f64>() / 20.0;
        assert!(
            low >= high,
            "fewer sincere voters should flip the winner at least as often: {low} vs {high}"
        );

        let csv = sweep_csv(&results);
        assert!(csv.starts_with("l,iterations,changes,probability\n"));
        assert_eq!(csv.lines().count(), 101);
    }

    fn arbitrary_profile() -> impl Strategy<Value = PreferenceProfile> {
        (1u32..=5).prop_flat_map(|k| {
            let ranking = proptest::sample::subsequence((1..=k).collect::<Vec<u32>>(), 1..=k as usize)
                .prop_shuffle();
            let ballot = (ranking, 1u64..=4)
                .prop_map(|(ranking, weight)| Ballot { ranking, weight });
            proptest::collection::vec(ballot, 1..6)
                .prop_map(move |ballots| PreferenceProfile { alternatives: k, ballots })
        })
    }

    proptest! {
        #[test]
        fn rankings_survive_permutation_and_weight_splitting(p in arbitrary_profile()) {
            for rule in [VotingRule::Plurality, VotingRule::BordaTruncated, VotingRule::Irv] {
                let base = aggregate_ranking(&p, rule).unwrap();

                let mut permuted = p.clone();
                permuted.ballots.reverse();
                prop_assert_eq!(aggregate_ranking(&permuted, rule).unwrap(), base.clone());

                let split = PreferenceProfile {
                    alternatives: p.alternatives,
                    ballots: p
                        .ballots
                        .iter()
                        .flat_map(|b| {
                            let low = b.weight / 2;
                            let mut parts =
                                vec![Ballot { ranking: b.ranking.clone(), weight: b.weight - low }];
                            if low > 0 {
                                parts.push(Ballot { ranking: b.ranking.clone(), weight: low });
                            }
                            parts
                        })
                        .collect(),
                };
                prop_assert_eq!(aggregate_ranking(&split, rule).unwrap(), base.clone());
            }
        }

        #[test]
        fn transform_always_keeps_the_first_choice_on_top(p in arbitrary_profile()) {
            let aggregate = aggregate_ranking(&p, VotingRule::Plurality).unwrap();
            for ballot in &p.ballots {
                let rewritten = malicious_transform(&ballot.ranking, &aggregate);
                prop_assert_eq!(rewritten.first(), ballot.ranking.first());
                // Survivors keep their original relative order.
                let mut cursor = ballot.ranking.iter();
                for id in &rewritten {
                    prop_assert!(cursor.any(|x| x == id));
                }
            }
        }
    }
}
