//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use svp_core::group::random_below;
use svp_core::sigma::simulate_with_response;
use svp_core::wire::{run_prover, run_prover_on, serve_verifier, ProveRequest, VerifierPolicy};
use svp_core::{
    derive_witness, extract_witness, generate_evidence, run_protocol, verify_round, verify_transcript, Challenge,
    ContractContent, Error, EvidenceRecord, FixedClock, GroupParams, Ledger, ProofTranscript, Prover, ProverSession,
    RoundTranscript, Salt, Scalar, SecretWitness, Target, Verdict,
};

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn sc(v: u64, p: &GroupParams) -> Scalar {
    Scalar::from_u64(v, p).unwrap()
}

fn toy_record(x: u64) -> EvidenceRecord {
    let p = GroupParams::toy();
    let w = SecretWitness::from_scalars(sc(x, &p), vec![], Salt::new(vec![0; 16]).unwrap());
    generate_evidence(&w, &p, "toy-contract", 0)
}

fn completeness() -> Check {
    let start = Instant::now();
    let p = GroupParams::toy();
    let mut cases = 0;
    for x in 0..11 {
        let e = p.exp_g(&sc(x, &p));
        for r in 0..11 {
            for c in [Challenge::Zero, Challenge::One] {
                let mut s = ProverSession::new(p.clone(), 1).map_err(|e| e.to_string())?;
                let commitment = s.commit_with_nonce(sc(r, &p)).map_err(|e| e.to_string())?;
                let z = s.respond(&sc(x, &p), c).map_err(|e| e.to_string())?;
                let v = verify_round(&commitment, c, &z, &e, &p).map_err(|e| e.to_string())?;
                ensure(v.is_accept(), || format!("x={x} r={r} i={} rejected", c.bit()))?;
                cases += 1;
            }
        }
    }
    ensure(cases == 242, || format!("{cases} cases"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("{cases}/242 accepted in {:.2?}", start.elapsed()))
}

fn soundness() -> Check {
    let start = Instant::now();
    let p = GroupParams::toy();
    let record = toy_record(7);
    let mut cheater = Prover::new(p.clone(), ChaCha20Rng::seed_from_u64(1001)).with_public_evidence(&record);
    let mut verifier_rng = ChaCha20Rng::seed_from_u64(2002);
    let trials = 10_000;
    let mut run = |k: u32| -> Result<usize, String> {
        let mut accepted = 0;
        for _ in 0..trials {
            let t = run_protocol(&mut cheater, &record, &p, &Target::Contract, k, &mut verifier_rng)
                .map_err(|e| e.to_string())?;
            accepted += t.accepted() as usize;
        }
        Ok(accepted)
    };
    let single = run(1)? as f64 / trials as f64;
    ensure((0.48..=0.52).contains(&single), || format!("k=1 acceptance {single}"))?;
    let twenty = run(20)?;
    ensure(twenty == 0, || format!("k=20: {twenty} accepts"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "k=1 rate {single:.4}, k=20 accepts {twenty}/{trials} (bound {:.1e}) in {:.2?}",
        0.5f64.powi(20),
        start.elapsed()
    ))
}

fn zero_knowledge() -> Check {
    let start = Instant::now();
    let p = GroupParams::toy();
    for x in 0..11 {
        let e = p.exp_g(&sc(x, &p));
        for c in [Challenge::Zero, Challenge::One] {
            let mut honest = BTreeMap::new();
            let mut simulated = BTreeMap::new();
            for r in 0..11 {
                let mut s = ProverSession::new(p.clone(), 1).map_err(|e| e.to_string())?;
                let commitment = s.commit_with_nonce(sc(r, &p)).map_err(|e| e.to_string())?;
                let z = s.respond(&sc(x, &p), c).map_err(|e| e.to_string())?;
                *honest.entry((commitment.0.value().clone(), z.0.value().clone())).or_insert(0u32) += 1;
            }
            for z in 0..11 {
                let t = simulate_with_response(&e, c, sc(z, &p), &p);
                let v = verify_round(&t.commitment, c, &t.response, &e, &p).map_err(|e| e.to_string())?;
                ensure(v.is_accept(), || format!("simulated round rejected x={x} z={z}"))?;
                *simulated.entry((t.commitment.0.value().clone(), t.response.0.value().clone())).or_insert(0u32) += 1;
            }
            ensure(honest == simulated, || format!("multisets differ for x={x}, i={}", c.bit()))?;
        }
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("22 multiset pairs identical in {:.2?}", start.elapsed()))
}

fn extraction() -> Check {
    let p = GroupParams::toy();
    let mut cases = 0;
    for x in 0..11 {
        let e = p.exp_g(&sc(x, &p));
        for r in 0..11 {
            let mut rounds = Vec::new();
            for c in [Challenge::Zero, Challenge::One] {
                let mut s = ProverSession::new(p.clone(), 1).map_err(|e| e.to_string())?;
                let commitment = s.commit_with_nonce(sc(r, &p)).map_err(|e| e.to_string())?;
                let response = s.respond(&sc(x, &p), c).map_err(|e| e.to_string())?;
                rounds.push(RoundTranscript { commitment, challenge: c, response, verdict: Verdict::Accept });
            }
            let got = extract_witness(&rounds[0], &rounds[1], &e, &p).map_err(|e| e.to_string())?;
            ensure(got == sc(x, &p), || format!("x={x} r={r} extracted {got:?}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases}/121 witnesses recovered"))
}

fn ledger_tamper() -> Check {
    let start = Instant::now();
    let mut ledger = Ledger::new();
    for (i, x) in [3u64, 5, 9].into_iter().enumerate() {
        let mut record = toy_record(x);
        record.contract_id = format!("toy-{i}");
        ledger.append_evidence(record, &FixedClock(1_700_000_000 + i as u64)).map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("ledger.jsonl");
    ledger.save(&path).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    Ledger::from_bytes(&bytes).map_err(|e| format!("pristine ledger rejected: {e}"))?;

    let ends: Vec<usize> = bytes.iter().enumerate().filter(|(_, &b)| b == b'\n').map(|(i, _)| i).collect();
    ensure(ends.len() == 3, || format!("{} lines", ends.len()))?;
    let mut mutations = 0u64;
    let mut buf = bytes.clone();
    for pos in 0..bytes.len() {
        let expected = ends.iter().position(|&e| pos <= e).unwrap_or(ends.len() - 1);
        for value in 0..=255u8 {
            if value == bytes[pos] {
                continue;
            }
            buf[pos] = value;
            match Ledger::from_bytes(&buf) {
                Err(Error::Integrity { block, .. }) if block == expected => {}
                Err(other) => {
                    return Err(format!("byte {pos} -> {value:#04x}: expected block {expected}, got {other}"))
                }
                Ok(_) => return Err(format!("byte {pos} -> {value:#04x} undetected")),
            }
            mutations += 1;
        }
        buf[pos] = bytes[pos];
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("{mutations}/{mutations} mutations over {} bytes detected in {:.2?}", bytes.len(), start.elapsed()))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let p = GroupParams::modp2048();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ledger_path = dir.path().join("ledger.jsonl");
    let transcripts = dir.path().join("transcripts");

    let content = ContractContent::new(
        b"Supply agreement: 400 units at the quoted price, delivery within 30 days.".to_vec(),
        [("quantity", b"400".to_vec()), ("delivery", b"30 days".to_vec())],
    )
    .map_err(|e| e.to_string())?;
    let salt = Salt::new(*b"0123456789abcdef0123").map_err(|e| e.to_string())?;
    let witness = derive_witness(&content, &salt, &p);

    let mut ledger = Ledger::load_or_empty(&ledger_path).map_err(|e| e.to_string())?;
    ledger
        .append_evidence(generate_evidence(&witness, &p, "supply-2024", 1_700_000_000), &FixedClock(1_700_000_000))
        .map_err(|e| e.to_string())?;
    ledger.save(&ledger_path).map_err(|e| e.to_string())?;

    let served = Ledger::load(&ledger_path).map_err(|e| e.to_string())?;
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let policy = VerifierPolicy {
        rounds: 40,
        transcript_dir: Some(transcripts.clone()),
        max_sessions: Some(2),
        ..Default::default()
    };
    let outcomes = serve_verifier(listener, Arc::new(served), p.clone(), policy);
    let request = ProveRequest {
        contract_id: "supply-2024".into(),
        target: Target::Contract,
        rounds: 40,
        session_id: *b"e2e-session-0001",
    };

    let mut honest = Prover::new(p.clone(), ChaCha20Rng::from_entropy()).with_witness(&witness);
    let out = run_prover(addr, &mut honest, &p, &request, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    ensure(out.verdict == Verdict::Accept && out.transcript.k == 40, || format!("honest prover: {:?}", out.verdict))?;
    let server_side = outcomes.recv().map_err(|e| e.to_string())?;
    let path = server_side.transcript_path.ok_or("no transcript stored")?;

    // offline: only the ledger file and the transcript file
    let offline_ledger = Ledger::load(&ledger_path).map_err(|e| e.to_string())?;
    let stored =
        ProofTranscript::from_json(&std::fs::read(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let record = offline_ledger.get_evidence(&stored.contract_id).map_err(|e| e.to_string())?;
    let offline = verify_transcript(&stored, record, &p).map_err(|e| e.to_string())?;
    ensure(offline == Verdict::Accept, || "stored transcript does not re-verify".into())?;

    let wrong = derive_witness(&content, &Salt::new(*b"0123456789abcdef0124").unwrap(), &p);
    let mut impostor = Prover::new(p.clone(), ChaCha20Rng::from_entropy()).with_witness(&wrong);
    let request = ProveRequest { session_id: *b"e2e-session-0002", ..request };
    let out = run_prover(addr, &mut impostor, &p, &request, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    ensure(out.verdict == Verdict::Reject, || "wrong-salt prover accepted".into())?;
    let rejected = outcomes.recv().map_err(|e| e.to_string())?;
    ensure(matches!(rejected.result, Ok(ref t) if !t.accepted()), || "server did not record rejection".into())?;

    within(start, Duration::from_secs(60))?;
    Ok(format!("k=40 accepted, offline re-verify ok, wrong salt rejected in {:.2?}", start.elapsed()))
}

/// Stream wrapper recording every byte in both directions.
struct Capture<'a> {
    inner: TcpStream,
    log: &'a mut Vec<u8>,
}

impl Read for Capture<'_> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.log.extend_from_slice(&buf[..n]);
        Ok(n)
    }
}

impl Write for Capture<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.log.extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn find_leak(haystack: &[u8], content: &ContractContent, salt: &Salt) -> Option<String> {
    let contains = |needle: &[u8]| haystack.windows(needle.len()).any(|w| w == needle);
    let salt_hex = hex::encode(salt.as_bytes());
    if contains(salt.as_bytes()) || contains(salt_hex.as_bytes()) {
        return Some("salt".into());
    }
    let mut fields: Vec<&[u8]> = vec![content.body()];
    fields.extend(content.terms().iter().map(|t| t.value.as_slice()));
    for field in fields {
        if let Some(w) = field.windows(4).find(|w| contains(w)) {
            return Some(format!("content window {}", hex::encode(w)));
        }
    }
    None
}

fn secrecy() -> Check {
    let start = Instant::now();
    let p = GroupParams::modp2048();
    let mut rng = ChaCha20Rng::seed_from_u64(7070);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let transcript_dir = dir.path().join("transcripts");
    let mut contracts = Vec::new();
    let mut ledger = Ledger::new();
    for i in 0..100 {
        let mut bytes = |lo: usize, hi: usize| {
            let n = rng.gen_range(lo..hi);
            (0..n).map(|_| rng.gen::<u8>()).collect::<Vec<u8>>()
        };
        let body = bytes(64, 160);
        let terms = [("amount", bytes(4, 24)), ("party", bytes(8, 32))];
        let content = ContractContent::new(body, terms).map_err(|e| e.to_string())?;
        let salt = Salt::new(bytes(16, 33)).map_err(|e| e.to_string())?;
        let id = format!("c-{i:04}");
        let w = derive_witness(&content, &salt, &p);
        ledger.append_evidence(generate_evidence(&w, &p, &id, i), &FixedClock(i)).map_err(|e| e.to_string())?;
        contracts.push((id, content, salt, w));
    }
    let ledger_path = dir.path().join("ledger.jsonl");
    ledger.save(&ledger_path).map_err(|e| e.to_string())?;

    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    let policy = VerifierPolicy {
        rounds: 2,
        transcript_dir: Some(transcript_dir.clone()),
        max_sessions: Some(contracts.len()),
        ..Default::default()
    };
    let outcomes = serve_verifier(listener, Arc::new(ledger), p.clone(), policy);

    let mut frames = Vec::new();
    for (i, (id, _, _, w)) in contracts.iter().enumerate() {
        let target = if i % 2 == 0 { Target::Contract } else { Target::Term("amount".into()) };
        let mut session_id = [0u8; 16];
        session_id[..8].copy_from_slice(&(i as u64).to_be_bytes());
        let request = ProveRequest { contract_id: id.clone(), target, rounds: 2, session_id };
        let mut log = Vec::new();
        let stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
        let mut capture = Capture { inner: stream, log: &mut log };
        let mut prover = Prover::new(p.clone(), ChaCha20Rng::seed_from_u64(i as u64)).with_witness(w);
        let out = run_prover_on(&mut capture, &mut prover, &p, &request).map_err(|e| e.to_string())?;
        ensure(out.verdict.is_accept(), || format!("{id} rejected"))?;
        frames.push(log);
        outcomes.recv().map_err(|e| e.to_string())?;
    }

    let mut haystacks: Vec<(String, Vec<u8>)> =
        vec![("ledger".into(), std::fs::read(&ledger_path).map_err(|e| e.to_string())?)];
    for entry in std::fs::read_dir(&transcript_dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        haystacks.push((path.display().to_string(), std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    ensure(haystacks.len() == 101, || format!("{} transcript files", haystacks.len() - 1))?;
    haystacks.extend(frames.into_iter().enumerate().map(|(i, f)| (format!("frames {i}"), f)));
    let scanned: usize = haystacks.iter().map(|(_, h)| h.len()).sum();

    for (id, content, salt, _) in &contracts {
        for (name, h) in &haystacks {
            if let Some(what) = find_leak(h, content, salt) {
                return Err(format!("{what} of {id} found in {name}"));
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("100 contracts, {scanned} bytes scanned, no leaks in {:.2?}", start.elapsed()))
}

fn homomorphism() -> Check {
    let mut report = Vec::new();
    for p in [GroupParams::toy(), GroupParams::modp2048()] {
        let start = Instant::now();
        let mut rng = ChaCha20Rng::seed_from_u64(808);
        for n in 0..1000 {
            // squares of nonzero residues are exactly the subgroup members
            let v = random_below(&(p.p() - 1u8), &mut rng).map_err(|e| e.to_string())? + 1u8;
            let a = p.check_member(&(&v * &v % p.p())).map_err(|e| e.to_string())?;
            let x = p.random_scalar(&mut rng).map_err(|e| e.to_string())?;
            let y = p.random_scalar(&mut rng).map_err(|e| e.to_string())?;
            let lhs = p.mul(&p.mod_exp(&a, &x), &p.mod_exp(&a, &y));
            let rhs = p.mod_exp(&a, &x.add(&y, &p));
            // independent of reduction mod q: a^(x+y) over the integers
            let raw = a.value().modpow(&(x.value() + y.value()), p.p());
            ensure(lhs == rhs && rhs.value() == &raw, || format!("{} check {n} failed", p.id()))?;
        }
        report.push(format!("{}: 1000/1000 in {:.2?}", p.id(), start.elapsed()));
    }
    Ok(report.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("completeness", completeness),
        ("soundness", soundness),
        ("zero-knowledge", zero_knowledge),
        ("extraction", extraction),
        ("ledger tamper evidence", ledger_tamper),
        ("end-to-end over the wire", end_to_end),
        ("secrecy hygiene", secrecy),
        ("group algebra", homomorphism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", n + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
