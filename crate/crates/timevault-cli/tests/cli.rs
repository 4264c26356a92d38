//! End-to-end runs of the `timevault` binary: golden outputs for the
//! worked toy example, determinism under a fixed seed, scenario and vote
//! file layouts, and the exit-code contract (2 = rejected input, 3 = I/O).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timevault"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn read_json(path: &Path) -> Value {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

/// Runs keygen with pinned toy keys and returns the output directory.
fn worked_keys(dir: &Path) -> PathBuf {
    let keys = dir.join("keys");
    let out = run(&[
        "keygen",
        "--count",
        "4",
        "--sks",
        "3,4,5,6",
        "--out",
        keys.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "keygen failed: {}", stderr(&out));
    keys
}

#[test]
fn keygen_reproduces_the_worked_key_set() {
    let dir = tempfile::tempdir().unwrap();
    let keys = worked_keys(dir.path());

    let manifest = read_json(&keys.join("manifest.json"));
    assert_eq!(manifest["backend"], "toy");
    assert_eq!(manifest["toy_modulus"], 23);
    assert_eq!(manifest["toy_generator"], 11);
    let pks: Vec<&str> =
        manifest["holder_pks_hex"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    // Secret exponents 3,4,5,6 under generator 11 mod 23 give 20,13,5,9.
    assert_eq!(pks, ["14", "0d", "05", "09"]);

    let holder2 = read_json(&keys.join("holder_2.json"));
    assert_eq!(holder2["backend"], "toy");
    assert_eq!(holder2["index"], 2);
    assert_eq!(holder2["sk_hex"], "04");
    assert_eq!(holder2["pk_hex"], "0d");
}

#[test]
fn keygen_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = run(&["keygen", "--count", "3", "--seed", "99", "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        (
            std::fs::read(out_dir.join("manifest.json")).unwrap(),
            std::fs::read(out_dir.join("holder_1.json")).unwrap(),
        )
    };
    assert_eq!(run_once("a"), run_once("b"));
}

#[test]
fn keygen_rejects_bad_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().join("k");
    let out = run(&["keygen", "--count", "0", "--seed", "1", "--out", out_arg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let out = run(&["keygen", "--count", "2", "--out", out_arg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--seed"), "unexpected: {}", stderr(&out));

    let out = run(&[
        "keygen", "--count", "3", "--sks", "1,2", "--out", out_arg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn encrypt_reproduces_the_worked_request() {
    let dir = tempfile::tempdir().unwrap();
    let keys = worked_keys(dir.path());
    let msg = dir.path().join("msg.txt");
    std::fs::write(&msg, b"open the vault").unwrap();
    let req_path = dir.path().join("request.json");

    let out = run(&[
        "encrypt",
        "--message",
        msg.to_str().unwrap(),
        "--manifest",
        keys.join("manifest.json").to_str().unwrap(),
        "--threshold",
        "3",
        "--decrypt-time",
        "500",
        "--k",
        "22",
        "--r",
        "7",
        "--out",
        req_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let req = read_json(&req_path);
    assert_eq!(req["backend"], "toy");
    assert_eq!(req["threshold"], 3);
    assert_eq!(req["holder_count"], 4);
    assert_eq!(req["decrypt_time"], 500);
    // g^7 mod 23 = 7 in both source groups of the toy pairing.
    assert_eq!(req["commitment_a_hex"], "07");
    assert_eq!(req["commitment_b_hex"], "07");
    let masks = req["masks"].as_array().unwrap();
    assert_eq!(masks.len(), 2);
    assert_eq!(masks[0]["index"], 3);
    assert_eq!(masks[0]["alpha_hex"], "18"); // 24 = 9 xor 17
    assert_eq!(masks[1]["index"], 4);
    assert_eq!(masks[1]["alpha_hex"], "11"); // 17 = 21 xor 4
}

#[test]
fn encrypt_with_threshold_equal_to_holders_still_carries_one_mask() {
    let dir = tempfile::tempdir().unwrap();
    let keys = worked_keys(dir.path());
    let msg = dir.path().join("msg.txt");
    std::fs::write(&msg, b"x").unwrap();
    let req_path = dir.path().join("request.json");

    let out = run(&[
        "encrypt",
        "--message",
        msg.to_str().unwrap(),
        "--manifest",
        keys.join("manifest.json").to_str().unwrap(),
        "--threshold",
        "4",
        "--decrypt-time",
        "500",
        "--seed",
        "5",
        "--out",
        req_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let req = read_json(&req_path);
    let masks = req["masks"].as_array().unwrap();
    // The last holder always needs a mask, even when every share is a
    // polynomial anchor point except its own.
    assert_eq!(masks.len(), 1);
    assert_eq!(masks[0]["index"], 4);
}

#[test]
fn encrypt_is_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let keys = worked_keys(dir.path());
    let msg = dir.path().join("msg.txt");
    std::fs::write(&msg, b"same message, same seed").unwrap();

    let run_once = |name: &str| {
        let req_path = dir.path().join(name);
        let out = run(&[
            "encrypt",
            "--message",
            msg.to_str().unwrap(),
            "--manifest",
            keys.join("manifest.json").to_str().unwrap(),
            "--threshold",
            "2",
            "--decrypt-time",
            "900",
            "--seed",
            "42",
            "--out",
            req_path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read(req_path).unwrap()
    };
    assert_eq!(run_once("a.json"), run_once("b.json"));
}

#[test]
fn scenario_single_writes_report_log_and_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig5a");
    let out = run(&[
        "scenario",
        "--config",
        fixture("scenarios/fig5a.json").to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["reconstructed"], true);
    assert_eq!(report["message_recovered"], true);
    assert_eq!(report["slashes"].as_array().unwrap().len(), 0);
    let rewarded = report["holders"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|h| h["share_rewarded"] == true)
        .count();
    assert_eq!(rewarded, 3);

    let log = std::fs::read_to_string(out_dir.join("ledger_log.jsonl")).unwrap();
    assert!(log.lines().count() > 10);
    for line in log.lines() {
        serde_json::from_str::<Value>(line).expect("each log line is one JSON record");
    }

    let csv = std::fs::read_to_string(out_dir.join("deviation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("duration_s,requests,mean_deviation_s,min_deviation_s,max_deviation_s")
    );
    assert!(lines.next().unwrap().starts_with("20,1,"));
}

#[test]
fn scenario_flags_the_early_submitter() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("fig5b");
    let out = run(&[
        "scenario",
        "--config",
        fixture("scenarios/fig5b.json").to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report = read_json(&out_dir.join("report.json"));
    let slashes = report["slashes"].as_array().unwrap();
    assert_eq!(slashes.len(), 1);
    assert_eq!(slashes[0]["holder_index"], 4);
    assert_eq!(slashes[0]["cause"], "early_submission");
    let rewarded: Vec<u64> = report["holders"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|h| h["share_rewarded"] == true)
        .map(|h| h["index"].as_u64().unwrap())
        .collect();
    assert_eq!(rewarded, [1, 2, 3]);
    assert_eq!(report["reconstructed"], true);
}

#[test]
fn scenario_sweep_writes_five_points() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "scenario",
        "--config",
        fixture("scenarios/sweep.json").to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let csv = std::fs::read_to_string(out_dir.join("scalability.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,t,publish_latency_s,verification_latency_s");
    assert_eq!(lines.len(), 6);

    let points = read_json(&out_dir.join("scalability.json"));
    let ns: Vec<u64> =
        points.as_array().unwrap().iter().map(|p| p["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [3, 10, 20, 30, 40]);
}

#[test]
fn vote_sweep_covers_all_percentages() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("tiny.csv");
    let out = run(&[
        "vote",
        "--ballots",
        fixture("ballots/tiny.txt").to_str().unwrap(),
        "--rule",
        "plurality",
        "--seed",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "l,iterations,changes,probability");
    // A fully sincere electorate never flips the winner.
    assert_eq!(lines[100], "100,1,0,0.000000");
}

#[test]
fn vote_sweep_is_the_library_sweep_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("nine.csv");
    let ballots = fixture("ballots/nine_voters.txt");
    let out = run(&[
        "vote",
        "--ballots",
        ballots.to_str().unwrap(),
        "--rule",
        "borda_truncated",
        "--seed",
        "7",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let profile =
        timevault::voting::parse_ballot_file(&std::fs::read(&ballots).unwrap()).unwrap();
    let expected = timevault::voting::sweep_csv(
        &timevault::voting::sweep(&profile, timevault::voting::VotingRule::BordaTruncated, 7)
            .unwrap(),
    );
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), expected);
}

#[test]
fn missing_input_files_exit_three_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.csv");
    let out = run(&[
        "vote",
        "--ballots",
        "/nonexistent/ballots.txt",
        "--seed",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("/nonexistent/ballots.txt"), "{}", stderr(&out));

    let msg = dir.path().join("msg.txt");
    std::fs::write(&msg, b"x").unwrap();
    let out = run(&[
        "encrypt",
        "--message",
        msg.to_str().unwrap(),
        "--manifest",
        "/nonexistent/manifest.json",
        "--threshold",
        "1",
        "--decrypt-time",
        "10",
        "--seed",
        "1",
        "--out",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("/nonexistent/manifest.json"), "{}", stderr(&out));
}

#[test]
fn malformed_inputs_exit_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();

    let bad_config = dir.path().join("bad.json");
    std::fs::write(&bad_config, b"{ \"mode\": \"single\" ").unwrap();
    let out = run(&[
        "scenario",
        "--config",
        bad_config.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.json"), "{}", stderr(&out));

    let bad_ballots = dir.path().join("bad.txt");
    std::fs::write(&bad_ballots, b"# NUMBER ALTERNATIVES: 2\n3: 1,1\n").unwrap();
    let out = run(&[
        "vote",
        "--ballots",
        bad_ballots.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.txt"), "{}", stderr(&out));
}

#[test]
fn invalid_scenario_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("zero_threshold.json");
    std::fs::write(
        &config,
        br#"{
  "mode": "single",
  "threshold": 0,
  "decrypt_delay_s": 20,
  "latency": { "kind": "fixed", "delay_s": 1.0 },
  "holders": [ { "behavior": { "kind": "honest" } } ]
}"#,
    )
    .unwrap();
    let out = run(&[
        "scenario",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("threshold"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["no-such-command"]);
    assert_eq!(code(&out), 2);
    let out = run(&["vote", "--ballots", "b.txt", "--rule", "banana", "--seed", "1", "--out", "x"]);
    assert_eq!(code(&out), 2);
}
