//! `timevault` command line: holder key generation, request construction,
//! coordination scenario runs, and the voting resilience sweep.
//!
//! Every command is deterministic given its input files and `--seed`.
//! Exit code 2 marks rejected input (bad flags, malformed files, invalid
//! parameters); exit code 3 marks filesystem failures and names the path.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use timevault::group::{BackendId, Bls12381Group, PairingBackend, ToyGroup, CURVE_ID};
use timevault::sim::{
    deviation_csv, measure_deviation, run_scenario_with_log, scalability_csv, scalability_sweep,
    DeviationStats, ScenarioFile, SimError,
};
use timevault::timelock::wire::{to_canonical_json, ManifestWire};
use timevault::timelock::{build_request, keygen, KeyPair};
use timevault::voting::{parse_ballot_file, sweep, sweep_csv, VotingRule};

#[derive(Parser)]
#[command(
    name = "timevault",
    version,
    about = "Threshold time-locked release: keys, sealed requests, coordination scenarios, voting sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate holder keypairs plus a public manifest.
    Keygen {
        /// Number of holders; files are holder_1.json .. holder_<count>.json.
        #[arg(long)]
        count: u32,
        #[arg(long, default_value = "toy")]
        backend: BackendId,
        /// RNG seed; required unless --sks pins every secret key.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated secret exponents, one per holder, instead of
        /// drawing them from the seed.
        #[arg(long, value_delimiter = ',')]
        sks: Option<Vec<u64>>,
        #[arg(long, default_value_t = 23)]
        toy_modulus: u64,
        #[arg(long, default_value_t = 11)]
        toy_generator: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Seal a message file into a broadcast request.
    Encrypt {
        /// File holding the plaintext to seal.
        #[arg(long)]
        message: PathBuf,
        /// manifest.json produced by keygen.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        threshold: u32,
        /// Chain timestamp after which holders may publish shares.
        #[arg(long)]
        decrypt_time: u64,
        /// RNG seed; required unless both --k and --r are pinned.
        #[arg(long)]
        seed: Option<u64>,
        /// Pin the symmetric key coordinate instead of drawing it.
        #[arg(long)]
        k: Option<u64>,
        /// Pin the blinding exponent instead of drawing it.
        #[arg(long)]
        r: Option<u64>,
        /// Output file for the request JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file: one coordination run or a scalability sweep.
    Scenario {
        /// JSON scenario file with a "mode" field ("single" or "sweep").
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the sincere-voter percentage and report winner-change rates.
    Vote {
        /// Ballot file: `# NUMBER ALTERNATIVES: K` header then `count: a,b,c` lines.
        #[arg(long)]
        ballots: PathBuf,
        #[arg(long, default_value_t = VotingRule::Plurality)]
        rule: VotingRule,
        #[arg(long)]
        seed: u64,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    /// Input rejected: bad parameters or malformed file contents.
    Validation(String),
    /// Filesystem failure on the named path.
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => f.write_str(msg),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
        }
    }
}

fn invalid(msg: impl fmt::Display) -> CliError {
    CliError::Validation(msg.to_string())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Parses JSON with the file path prefixed onto any syntax/shape error.
fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Keygen { count, backend, seed, sks, toy_modulus, toy_generator, out } => {
            cmd_keygen(count, backend, seed, sks, toy_modulus, toy_generator, &out)
        }
        Command::Encrypt { message, manifest, threshold, decrypt_time, seed, k, r, out } => {
            cmd_encrypt(&message, &manifest, threshold, decrypt_time, seed, k, r, &out)
        }
        Command::Scenario { config, seed, out } => cmd_scenario(&config, seed, &out),
        Command::Vote { ballots, rule, seed, out } => cmd_vote(&ballots, rule, seed, &out),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_keygen(
    count: u32,
    backend: BackendId,
    seed: Option<u64>,
    sks: Option<Vec<u64>>,
    toy_modulus: u64,
    toy_generator: u64,
    out: &Path,
) -> Result<(), CliError> {
    if count == 0 {
        return Err(invalid("--count must be at least 1"));
    }
    match backend {
        BackendId::Toy => {
            let group = ToyGroup::new(toy_modulus, toy_generator, None).map_err(invalid)?;
            let manifest_extra = Some((toy_modulus, toy_generator));
            keygen_with(&group, count, seed, sks, manifest_extra, out)
        }
        BackendId::Curve => {
            let group = Bls12381Group::new(CURVE_ID).map_err(invalid)?;
            keygen_with(&group, count, seed, sks, None, out)
        }
    }
}

fn keygen_with<B: PairingBackend>(
    backend: &B,
    count: u32,
    seed: Option<u64>,
    sks: Option<Vec<u64>>,
    toy_params: Option<(u64, u64)>,
    out: &Path,
) -> Result<(), CliError> {
    let keys: Vec<KeyPair<B>> = match sks {
        Some(list) => {
            if list.len() != count as usize {
                return Err(invalid(format!(
                    "--sks lists {} keys but --count is {count}",
                    list.len()
                )));
            }
            list.iter()
                .enumerate()
                .map(|(i, sk)| {
                    KeyPair::from_sk(backend, backend.scalar_from_u64(*sk), i as u32 + 1)
                })
                .collect()
        }
        None => {
            let seed =
                seed.ok_or_else(|| invalid("--seed is required unless --sks pins every key"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (1..=count).map(|i| keygen(backend, &mut rng, i)).collect()
        }
    };

    for kp in &keys {
        let wire = kp.to_wire(backend);
        let path = out.join(format!("holder_{}.json", kp.index));
        write_file(&path, to_canonical_json(&wire).as_bytes())?;
    }
    let manifest = ManifestWire {
        backend: backend.id(),
        curve_id: matches!(backend.id(), BackendId::Curve).then(|| CURVE_ID.to_string()),
        holder_pks_hex: keys.iter().map(|kp| hex::encode(backend.g1_to_bytes(&kp.pk))).collect(),
        toy_generator: toy_params.map(|(_, g)| g),
        toy_modulus: toy_params.map(|(m, _)| m),
    };
    write_file(&out.join("manifest.json"), to_canonical_json(&manifest).as_bytes())?;
    println!("wrote {count} keypairs and manifest.json under {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_encrypt(
    message: &Path,
    manifest_path: &Path,
    threshold: u32,
    decrypt_time: u64,
    seed: Option<u64>,
    k: Option<u64>,
    r: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let plaintext = read_file(message)?;
    let manifest: ManifestWire = parse_json(manifest_path, &read_file(manifest_path)?)?;
    match manifest.backend {
        BackendId::Toy => {
            let group = ToyGroup::new(
                manifest.toy_modulus.unwrap_or(23),
                manifest.toy_generator.unwrap_or(11),
                None,
            )
            .map_err(invalid)?;
            encrypt_with(&group, &manifest, &plaintext, threshold, decrypt_time, seed, k, r, out)
        }
        BackendId::Curve => {
            let group = Bls12381Group::new(manifest.curve_id.as_deref().unwrap_or(CURVE_ID))
                .map_err(invalid)?;
            encrypt_with(&group, &manifest, &plaintext, threshold, decrypt_time, seed, k, r, out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn encrypt_with<B: PairingBackend>(
    backend: &B,
    manifest: &ManifestWire,
    plaintext: &[u8],
    threshold: u32,
    decrypt_time: u64,
    seed: Option<u64>,
    k: Option<u64>,
    r: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let pks = manifest
        .holder_pks_hex
        .iter()
        .map(|h| {
            let bytes = hex::decode(h).map_err(invalid)?;
            backend.g1_from_bytes(&bytes).map_err(invalid)
        })
        .collect::<Result<Vec<B::G1>, CliError>>()?;

    let mut rng = match (k, r) {
        (Some(_), Some(_)) => None,
        _ => {
            let seed = seed
                .ok_or_else(|| invalid("--seed is required unless both --k and --r are pinned"))?;
            Some(ChaCha8Rng::seed_from_u64(seed))
        }
    };
    let key = match k {
        Some(v) => backend.coord_from_u64(v),
        None => backend.random_coord(rng.as_mut().expect("rng present when k is drawn")),
    };
    let blind = match r {
        Some(v) => backend.scalar_from_u64(v),
        None => backend.random_scalar(rng.as_mut().expect("rng present when r is drawn")),
    };

    let request = build_request(backend, &key, &blind, plaintext, decrypt_time, &pks, threshold)
        .map_err(invalid)?;
    write_file(out, to_canonical_json(&request.to_wire(backend)).as_bytes())?;
    println!("wrote request {} to {}", request.request_id, out.display());
    Ok(())
}

fn sim_error(err: SimError) -> CliError {
    invalid(err)
}

fn cmd_scenario(config_path: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let file: ScenarioFile = parse_json(config_path, &read_file(config_path)?)?;
    std::fs::create_dir_all(out)
        .map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    match file {
        ScenarioFile::Single(config) => {
            let output = run_scenario_with_log(&config, seed).map_err(sim_error)?;
            write_file(&out.join("report.json"), to_canonical_json(&output.report).as_bytes())?;
            write_file(&out.join("ledger_log.jsonl"), output.tx_log_jsonl.as_bytes())?;
            let csv = match measure_deviation(std::slice::from_ref(&output.report)) {
                Ok(stats) => deviation_csv(&stats),
                // Nothing revealed: keep the column header so downstream
                // tooling still sees a well-formed file.
                Err(SimError::EmptyReport) => deviation_csv(&DeviationStats {
                    requests: 0,
                    mean_s: 0.0,
                    min_s: 0.0,
                    max_s: 0.0,
                    buckets: Vec::new(),
                }),
                Err(other) => return Err(sim_error(other)),
            };
            write_file(&out.join("deviation.csv"), csv.as_bytes())?;
            match output.report.deviation_s {
                Some(dev) => println!(
                    "revealed at {:.3} ({dev:+.3}s past the requested time); report under {}",
                    output.report.reveal_time_s.unwrap_or(f64::NAN),
                    out.display()
                ),
                None => println!("no reveal before the horizon; report under {}", out.display()),
            }
        }
        ScenarioFile::Sweep { n_list } => {
            let points = scalability_sweep(&n_list, seed).map_err(sim_error)?;
            write_file(&out.join("scalability.csv"), scalability_csv(&points).as_bytes())?;
            let mut json = serde_json::to_string_pretty(&points)
                .expect("scale points serialize");
            json.push('\n');
            write_file(&out.join("scalability.json"), json.as_bytes())?;
            println!("swept {} holder counts; results under {}", points.len(), out.display());
        }
    }
    Ok(())
}

fn cmd_vote(ballots: &Path, rule: VotingRule, seed: u64, out: &Path) -> Result<(), CliError> {
    let bytes = read_file(ballots)?;
    let profile = parse_ballot_file(&bytes)
        .map_err(|e| invalid(format!("{}: {e}", ballots.display())))?;
    let results = sweep(&profile, rule, seed).map_err(invalid)?;
    write_file(out, sweep_csv(&results).as_bytes())?;
    println!("wrote {} sweep rows to {}", results.len(), out.display());
    Ok(())
}
