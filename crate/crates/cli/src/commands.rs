use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use svp_core::group::{generate_safe_prime_params, validate_production};
use svp_core::wire::{run_prover, serve_verifier, ProveRequest, VerifierPolicy, DEFAULT_TIMEOUT};
use svp_core::{
    derive_witness, generate_evidence, run_protocol, verify_transcript, Clock, ContractContent, Error, FixedClock,
    GroupParams, Ledger, ProofTranscript, Prover, Salt, SystemClock, Target, ValidityReport, Verdict,
};

use crate::output::{Failure, Output};
use crate::{Cli, Command, Global, Profile};

pub const SALT_ENV: &str = "SVP_SALT";

type CmdResult = Result<ExitCode, Failure>;

pub fn run(cli: &Cli, out: &Output) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::ParamsGen { profile, bits, out: path } => params_gen(g, out, *profile, *bits, path),
        Command::Register { content, contract_id } => register(g, out, content, contract_id),
        Command::Prove { connect, content, contract_id, target } => {
            prove(g, out, connect, content, contract_id, target)
        }
        Command::VerifyServe { listen, max_sessions, transcript_dir, timeout } => {
            let policy = VerifierPolicy {
                rounds: g.rounds,
                timeout: Duration::from_secs(*timeout),
                transcript_dir: transcript_dir.clone(),
                seed: g.seed,
                max_sessions: *max_sessions,
                ..Default::default()
            };
            verify_serve(g, out, *listen, policy)
        }
        Command::VerifyTranscript { path } => verify_stored(g, out, path),
        Command::Audit => audit(g, out),
        Command::SimulateCheater { contract_id, trials } => simulate_cheater(g, out, contract_id, *trials),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_params(g: &Global) -> Result<GroupParams, Failure> {
    let params = match GroupParams::builtin(&g.params) {
        Some(p) => p,
        None => {
            let path = Path::new(&g.params);
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            GroupParams::from_file_str(&text)?
        }
    };
    if g.seed.is_some() && params.id() != "toy" {
        return Err(Failure::Usage("--seed is only accepted with the toy group".into()));
    }
    Ok(params)
}

/// Seeded stream `stream` when a seed is set, OS entropy otherwise.
fn rng(g: &Global, stream: u64) -> ChaCha20Rng {
    match g.seed {
        Some(seed) => ChaCha20Rng::seed_from_u64(seed.wrapping_add(stream)),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn clock(g: &Global) -> Box<dyn Clock> {
    match g.seed {
        Some(_) => Box::new(FixedClock(0)),
        None => Box::new(SystemClock),
    }
}

fn load_ledger(path: &Path) -> Result<Ledger, Failure> {
    Ledger::load(path).map_err(|e| match e {
        Error::Io(io) => io_failure(path, io),
        other => other.into(),
    })
}

fn read_content(path: &Path) -> Result<ContractContent, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    Ok(ContractContent::from_file_bytes(&bytes)?)
}

/// Salt from the environment, or prompted for on stdin.
fn read_salt() -> Result<Salt, Failure> {
    let hex = match std::env::var(SALT_ENV) {
        Ok(v) => v,
        Err(_) => {
            if io::stdin().is_terminal() {
                eprint!("salt (hex): ");
                let _ = io::stderr().flush();
            }
            let mut line = String::new();
            io::stdin().lock().read_line(&mut line).map_err(|e| Failure::Io(e.to_string()))?;
            line
        }
    };
    let hex = hex.trim();
    if hex.is_empty() {
        return Err(Failure::Usage(format!("no salt: set {SALT_ENV} or enter it on stdin")));
    }
    Ok(Salt::from_hex(hex)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn params_gen(g: &Global, out: &Output, profile: Profile, bits: Option<u64>, path: &Path) -> CmdResult {
    let params = match (profile, bits) {
        (Profile::Toy, None) => GroupParams::toy(),
        (Profile::Production, None) => GroupParams::modp2048(),
        (profile, Some(bits)) => {
            let p = generate_safe_prime_params(bits, &mut rng(g, 0))?;
            if profile == Profile::Production {
                if let ValidityReport::Invalid(v) = validate_production(p.p(), p.q(), p.g()) {
                    return Err(Failure::Usage(format!("not usable as production parameters: {v}")));
                }
            }
            p
        }
    };
    write_file(path, params.to_file_string().as_bytes())?;
    out.emit(
        format!("wrote {} ({}-bit p) to {}", params.id(), params.p().bits(), path.display()),
        json!({"ok": true, "params_id": params.id(), "bits": params.p().bits(), "path": path.display().to_string()}),
    );
    Ok(ExitCode::SUCCESS)
}

fn register(g: &Global, out: &Output, content: &Path, contract_id: &str) -> CmdResult {
    let params = load_params(g)?;
    let mut ledger = match Ledger::load_or_empty(&g.ledger) {
        Err(Error::Io(e)) => return Err(io_failure(&g.ledger, e)),
        other => other?,
    };
    let content = read_content(content)?;
    let salt = read_salt()?;
    let clock = clock(g);
    let witness = derive_witness(&content, &salt, &params);
    let record = generate_evidence(&witness, &params, contract_id, clock.now());
    let e = svp_core::hexint::encode(record.e.value());
    let terms: Vec<&str> = record.labels().collect();
    let terms = terms.join(",");
    let at = ledger.append_evidence(record, clock.as_ref())?;
    ledger.save(&g.ledger).map_err(|err| match err {
        Error::Io(e) => io_failure(&g.ledger, e),
        other => other.into(),
    })?;
    out.emit(
        format!("registered {contract_id} in block {}\ne = {e}", at.block),
        json!({"ok": true, "contract_id": contract_id, "block": at.block, "e": e, "terms": terms, "params_id": params.id()}),
    );
    Ok(ExitCode::SUCCESS)
}

fn verdict_code(v: Verdict) -> ExitCode {
    if v.is_accept() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn prove(g: &Global, out: &Output, connect: &str, content: &Path, contract_id: &str, target: &Target) -> CmdResult {
    let params = load_params(g)?;
    let content = read_content(content)?;
    let salt = read_salt()?;
    let witness = derive_witness(&content, &salt, &params);
    witness.for_target(target)?;

    let mut session_id = [0u8; 16];
    rng(g, 2).fill_bytes(&mut session_id);
    let request =
        ProveRequest { contract_id: contract_id.into(), target: target.clone(), rounds: g.rounds, session_id };
    let mut prover = Prover::new(params.clone(), rng(g, 0)).with_witness(&witness);
    let outcome = run_prover(connect, &mut prover, &params, &request, DEFAULT_TIMEOUT)?;
    let t = &outcome.transcript;
    if let Some(path) = &g.transcript {
        write_file(path, t.to_json().as_bytes())?;
    }
    out.emit(
        format!(
            "{} {target} of {contract_id}: {} rounds, {}",
            verdict_word(outcome.verdict),
            t.k,
            session_hex(&session_id)
        ),
        json!({
            "ok": outcome.verdict.is_accept(),
            "contract_id": contract_id,
            "target": target.to_string(),
            "k": t.k,
            "verdict": verdict_word(outcome.verdict),
            "session_id": hex::encode(session_id),
            "transcript": g.transcript.as_ref().map(|p| p.display().to_string()),
        }),
    );
    Ok(verdict_code(outcome.verdict))
}

fn verdict_word(v: Verdict) -> &'static str {
    if v.is_accept() {
        "accept"
    } else {
        "reject"
    }
}

fn session_hex(id: &[u8; 16]) -> String {
    format!("session {}", hex::encode(id))
}

fn verify_serve(g: &Global, out: &Output, listen: std::net::SocketAddr, policy: VerifierPolicy) -> CmdResult {
    let params = load_params(g)?;
    let ledger = load_ledger(&g.ledger)?;
    let listener = TcpListener::bind(listen).map_err(|e| Failure::Io(format!("{listen}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?;
    out.emit(
        format!("listening on {local} ({} contracts, k >= {})", ledger.contract_ids().count(), policy.rounds),
        json!({"listening": local.to_string(), "k": policy.rounds}),
    );

    let mut all_accepted = true;
    for outcome in serve_verifier(listener, Arc::new(ledger), params, policy) {
        let peer = outcome.peer.map(|p| p.to_string()).unwrap_or_else(|| "?".into());
        let path = outcome.transcript_path.as_ref().map(|p| p.display().to_string());
        match &outcome.result {
            Ok(t) => {
                all_accepted &= t.accepted();
                out.emit(
                    format!("{peer}: {} {} of {} ({} rounds)", verdict_word(t.overall), t.target, t.contract_id, t.k),
                    json!({
                        "peer": peer,
                        "contract_id": t.contract_id,
                        "target": t.target.to_string(),
                        "k": t.k,
                        "verdict": verdict_word(t.overall),
                        "transcript": path,
                    }),
                );
            }
            Err(e) => {
                all_accepted = false;
                out.emit(format!("{peer}: {e}"), json!({"peer": peer, "error": e.to_string()}));
            }
        }
    }
    Ok(if all_accepted { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn verify_stored(g: &Global, out: &Output, path: &Path) -> CmdResult {
    let params = load_params(g)?;
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    let t = ProofTranscript::from_json(&bytes)?;
    let ledger = load_ledger(&g.ledger)?;
    let record = ledger.get_evidence(&t.contract_id)?;
    if t.k < g.rounds {
        return Err(Failure::Rejected(format!("transcript has {} rounds, at least {} required", t.k, g.rounds)));
    }
    let verdict = verify_transcript(&t, record, &params)?;
    out.emit(
        format!("{} {} of {} ({} rounds)", verdict_word(verdict), t.target, t.contract_id, t.k),
        json!({
            "ok": verdict.is_accept(),
            "contract_id": t.contract_id,
            "target": t.target.to_string(),
            "k": t.k,
            "verdict": verdict_word(verdict),
        }),
    );
    Ok(verdict_code(verdict))
}

fn audit(g: &Global, out: &Output) -> CmdResult {
    match Ledger::load(&g.ledger) {
        Ok(ledger) => {
            out.emit(format!("ledger valid: {} blocks", ledger.len()), json!({"ok": true, "blocks": ledger.len()}));
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Integrity { block, reason }) => {
            out.emit(
                format!("ledger invalid at block {block}: {reason}"),
                json!({"ok": false, "block": block, "reason": reason}),
            );
            Ok(ExitCode::from(1))
        }
        Err(Error::Io(e)) => Err(io_failure(&g.ledger, e)),
        Err(other) => Err(other.into()),
    }
}

fn simulate_cheater(g: &Global, out: &Output, contract_id: &str, trials: u64) -> CmdResult {
    let params = load_params(g)?;
    let ledger = load_ledger(&g.ledger)?;
    let record = ledger.get_evidence(contract_id)?;
    let k = g.rounds;
    let mut cheater = Prover::new(params.clone(), rng(g, 0)).with_public_evidence(record);
    let mut verifier_rng = rng(g, 1);
    let (mut rounds_accepted, mut accepted) = (0u64, 0u64);
    for _ in 0..trials {
        let t = run_protocol(&mut cheater, record, &params, &Target::Contract, k, &mut verifier_rng)?;
        rounds_accepted += t.rounds.iter().filter(|r| r.verdict.is_accept()).count() as u64;
        accepted += t.accepted() as u64;
    }
    let per_round = rounds_accepted as f64 / (trials * k as u64) as f64;
    let overall = accepted as f64 / trials as f64;
    let bound = 0.5f64.powi(k as i32);
    out.emit(
        format!(
            "{trials} trials, k = {k}\nper-round acceptance {per_round:.4}\noverall acceptance {overall:.6} ({accepted} accepted)\nbound 2^-{k} = {bound:.3e}"
        ),
        json!({
            "trials": trials,
            "k": k,
            "accepted": accepted,
            "per_round_rate": per_round,
            "overall_rate": overall,
            "bound": bound,
        }),
    );
    Ok(ExitCode::SUCCESS)
}
