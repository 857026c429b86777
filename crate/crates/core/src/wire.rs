//! The interactive proof over a byte stream.
//!
//! Frames are a 4-byte big-endian length followed by a canonical-JSON body of
//! at most [`MAX_FRAME`] bytes. The verifier listens; a session runs
//!
//! ```text
//! P -> V  hello        (contract_id, target, requested rounds)      round 0
//! V -> P  hello        (same fields, rounds = rounds actually run)   round 0
//! repeat for r = 1..=k:
//!   P -> V  commit       s                                          round r
//!   V -> P  challenge    bit                                        round r
//!   P -> V  response     z                                          round r
//!   V -> P  round-result verdict                                    round r
//! V -> P  final-result  verdict                                      round k
//! ```
//!
//! Either side may send `abort` with a reason at any point; any unexpected
//! message ends the session with an abort.

use std::fs;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Map, Value};

use crate::canonical;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupParams, Scalar};
use crate::hexint;
use crate::ledger::Ledger;
use crate::sigma::{
    Challenge, Commitment, Phase, ProofTranscript, ProverStrategy, Response, RoundTranscript, Target, Verdict,
    VerifierSession,
};

pub const MAX_FRAME: usize = 1 << 20;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const SESSION_ID_LEN: usize = 16;

pub type SessionId = [u8; SESSION_ID_LEN];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Hello { contract_id: String, target: Target, rounds: u32 },
    Commit(Commitment),
    Challenge(Challenge),
    Response(Response),
    RoundResult(Verdict),
    FinalResult(Verdict),
    Abort(String),
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Hello { .. } => "hello",
            Body::Commit(_) => "commit",
            Body::Challenge(_) => "challenge",
            Body::Response(_) => "response",
            Body::RoundResult(_) => "round-result",
            Body::FinalResult(_) => "final-result",
            Body::Abort(_) => "abort",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub session_id: SessionId,
    pub round: u32,
    pub body: Body,
}

impl WireMessage {
    pub fn new(session_id: SessionId, round: u32, body: Body) -> Self {
        WireMessage { session_id, round, body }
    }

    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("kind".into(), json!(self.body.kind()));
        m.insert("session_id".into(), json!(hex::encode(self.session_id)));
        m.insert("round".into(), json!(self.round));
        match &self.body {
            Body::Hello { contract_id, target, rounds } => {
                m.insert("contract_id".into(), json!(contract_id));
                m.insert("target".into(), json!(target.to_string()));
                m.insert("rounds".into(), json!(rounds));
            }
            Body::Commit(c) => {
                m.insert("s".into(), json!(hexint::encode(c.0.value())));
            }
            Body::Challenge(c) => {
                m.insert("bit".into(), json!(c.bit()));
            }
            Body::Response(r) => {
                m.insert("z".into(), json!(hexint::encode(r.0.value())));
            }
            Body::RoundResult(v) | Body::FinalResult(v) => {
                m.insert("verdict".into(), json!(v.to_string()));
            }
            Body::Abort(reason) => {
                m.insert("reason".into(), json!(reason));
            }
        }
        Value::Object(m)
    }
}

fn body_fields(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "hello" => &["contract_id", "rounds", "target"],
        "commit" => &["s"],
        "challenge" => &["bit"],
        "response" => &["z"],
        "round-result" | "final-result" => &["verdict"],
        "abort" => &["reason"],
        _ => return None,
    })
}

fn decode_err(msg: impl Into<String>) -> Error {
    Error::Decode(msg.into())
}

fn get_str<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    m.get(key).and_then(Value::as_str).ok_or_else(|| decode_err(format!("field `{key}` must be a string")))
}

fn get_u32(m: &Map<String, Value>, key: &str) -> Result<u32> {
    m.get(key)
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| decode_err(format!("field `{key}` must be a 32-bit unsigned integer")))
}

fn get_verdict(m: &Map<String, Value>) -> Result<Verdict> {
    match get_str(m, "verdict")? {
        "accept" => Ok(Verdict::Accept),
        "reject" => Ok(Verdict::Reject),
        other => Err(decode_err(format!("unknown verdict `{other}`"))),
    }
}

fn decode_body(bytes: &[u8]) -> Result<WireMessage> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| decode_err(e.to_string()))?;
    let Value::Object(m) = value else {
        return Err(decode_err("message is not a JSON object"));
    };
    let kind = get_str(&m, "kind")?;
    let fields = body_fields(kind).ok_or_else(|| decode_err(format!("unknown message kind `{kind}`")))?;
    for key in m.keys() {
        let common = matches!(key.as_str(), "kind" | "session_id" | "round");
        if !common && !fields.contains(&key.as_str()) {
            return Err(decode_err(format!("field `{key}` is not allowed in a {kind} message")));
        }
    }
    for key in fields {
        if !m.contains_key(*key) {
            return Err(decode_err(format!("{kind} message is missing `{key}`")));
        }
    }
    let sid = hex::decode(get_str(&m, "session_id")?).map_err(|e| decode_err(format!("session_id: {e}")))?;
    let session_id: SessionId = sid.try_into().map_err(|_| decode_err("session_id must be 16 bytes"))?;
    let round = get_u32(&m, "round")?;
    let body = match kind {
        "hello" => Body::Hello {
            contract_id: get_str(&m, "contract_id")?.to_string(),
            target: get_str(&m, "target")?.parse()?,
            rounds: get_u32(&m, "rounds")?,
        },
        "commit" => Body::Commit(Commitment(GroupElement::from_raw(hexint::decode(get_str(&m, "s")?)?))),
        "challenge" => {
            let bit = m.get("bit").and_then(Value::as_u64).ok_or_else(|| decode_err("field `bit` must be 0 or 1"))?;
            Body::Challenge(
                Challenge::from_bit(u8::try_from(bit).unwrap_or(u8::MAX)).map_err(|e| decode_err(e.to_string()))?,
            )
        }
        "response" => Body::Response(Response(Scalar::from_raw(hexint::decode(get_str(&m, "z")?)?))),
        "round-result" => Body::RoundResult(get_verdict(&m)?),
        "final-result" => Body::FinalResult(get_verdict(&m)?),
        "abort" => Body::Abort(get_str(&m, "reason")?.to_string()),
        _ => unreachable!("kind validated above"),
    };
    let msg = WireMessage { session_id, round, body };
    if canonical::to_vec(&msg.to_value()) != bytes {
        return Err(decode_err("message body is not in canonical form"));
    }
    Ok(msg)
}

pub fn encode_message(msg: &WireMessage) -> Result<Vec<u8>> {
    let body = canonical::to_vec(&msg.to_value());
    if body.len() > MAX_FRAME {
        return Err(Error::Frame(format!("{} byte body exceeds {MAX_FRAME}", body.len())));
    }
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes one complete frame (length prefix included).
pub fn decode_message(frame: &[u8]) -> Result<WireMessage> {
    if frame.len() < 4 {
        return Err(Error::Frame("frame shorter than its length prefix".into()));
    }
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    if len > MAX_FRAME {
        return Err(Error::Frame(format!("declared length {len} exceeds {MAX_FRAME}")));
    }
    if frame.len() - 4 != len {
        return Err(Error::Frame(format!("declared length {len}, got {} bytes", frame.len() - 4)));
    }
    decode_body(&frame[4..])
}

fn io_error(e: io::Error) -> Error {
    match e.kind() {
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => Error::Timeout,
        _ => Error::Transport(e),
    }
}

pub fn write_message<W: Write + ?Sized>(w: &mut W, msg: &WireMessage) -> Result<()> {
    let frame = encode_message(msg)?;
    w.write_all(&frame).map_err(io_error)?;
    w.flush().map_err(io_error)
}

/// Reads one frame. Oversized frames are refused before the body is read.
pub fn read_message<R: Read + ?Sized>(r: &mut R) -> Result<WireMessage> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(io_error)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Frame(format!("declared length {len} exceeds {MAX_FRAME}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(io_error)?;
    decode_body(&body)
}

#[derive(Debug, Clone)]
pub struct VerifierPolicy {
    /// Minimum rounds per proof; a prover may ask for more.
    pub rounds: u32,
    /// Targets a prover may ask about; `None` allows any.
    pub targets: Option<Vec<Target>>,
    pub timeout: Duration,
    pub transcript_dir: Option<PathBuf>,
    /// Seeds every session's challenge rng. Test use only.
    pub seed: Option<u64>,
    /// Stop accepting after this many connections.
    pub max_sessions: Option<usize>,
}

impl Default for VerifierPolicy {
    fn default() -> Self {
        VerifierPolicy {
            rounds: crate::sigma::DEFAULT_ROUNDS,
            targets: None,
            timeout: DEFAULT_TIMEOUT,
            transcript_dir: None,
            seed: None,
            max_sessions: None,
        }
    }
}

fn session_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

struct Peer<'a, S: ?Sized> {
    stream: &'a mut S,
    session_id: SessionId,
}

impl<S: Read + Write + ?Sized> Peer<'_, S> {
    fn send(&mut self, round: u32, body: Body) -> Result<()> {
        write_message(self.stream, &WireMessage::new(self.session_id, round, body))
    }

    /// Next message of the current session and round. An `abort` from the
    /// peer surfaces as [`Error::Aborted`].
    fn recv(&mut self, round: u32) -> Result<Body> {
        let msg = read_message(self.stream)?;
        if let Body::Abort(reason) = msg.body {
            return Err(Error::Aborted { reason: format!("peer aborted: {reason}"), partial: None });
        }
        if msg.session_id != self.session_id {
            return Err(Error::OutOfOrder("message for a different session".into()));
        }
        if msg.round != round {
            return Err(Error::OutOfOrder(format!("expected round {round}, got {}", msg.round)));
        }
        Ok(msg.body)
    }

    /// Best-effort abort notice, then the error carrying `partial`.
    fn abort(&mut self, round: u32, err: Error, partial: Option<ProofTranscript>) -> Error {
        let (reason, partial) = match err {
            Error::Aborted { reason, partial: p } => {
                return Error::Aborted { reason, partial: p.or(partial.map(Box::new)) }
            }
            other => (other.to_string(), partial),
        };
        let _ = self.send(round, Body::Abort(reason.clone()));
        Error::Aborted { reason, partial: partial.map(Box::new) }
    }
}

fn unexpected(expected: &str, got: &Body) -> Error {
    Error::OutOfOrder(format!("expected {expected}, got {}", got.kind()))
}

/// Runs the verifier side of one session over `stream`.
pub fn handle_verifier_connection<S, R>(
    stream: &mut S,
    ledger: &Ledger,
    params: &GroupParams,
    policy: &VerifierPolicy,
    rng: &mut R,
) -> Result<ProofTranscript>
where
    S: Read + Write + ?Sized,
    R: RngCore + ?Sized,
{
    let hello = match read_message(stream) {
        Ok(m) => m,
        Err(e @ (Error::Decode(_) | Error::Frame(_))) => {
            let mut peer = Peer { stream, session_id: [0; SESSION_ID_LEN] };
            return Err(peer.abort(0, e, None));
        }
        Err(e) => return Err(e),
    };
    let mut peer = Peer { stream, session_id: hello.session_id };
    let Body::Hello { contract_id, target, rounds } = hello.body else {
        return Err(peer.abort(0, unexpected("hello", &hello.body), None));
    };
    if hello.round != 0 {
        return Err(peer.abort(0, Error::OutOfOrder("hello must carry round 0".into()), None));
    }
    let record = match ledger.get_evidence(&contract_id) {
        Ok(r) => r,
        Err(_) => return Err(peer.abort(0, Error::NotFound(contract_id), None)),
    };
    if let Some(allowed) = &policy.targets {
        if !allowed.contains(&target) {
            let err = Error::Malformed(format!("target {target} is not offered by this verifier"));
            return Err(peer.abort(0, err, None));
        }
    }
    let rounds = rounds.max(policy.rounds).max(1);
    let mut session = match VerifierSession::new(params.clone(), record, target.clone(), rounds) {
        Ok(s) => s,
        Err(e) => return Err(peer.abort(0, e, None)),
    };
    let result = (|| {
        peer.send(0, Body::Hello { contract_id: contract_id.clone(), target: target.clone(), rounds })?;
        for round in 1..=rounds {
            match peer.recv(round)? {
                Body::Commit(c) => session.receive_commitment(c)?,
                other => return Err(unexpected("commit", &other)),
            }
            let challenge = session.challenge(rng)?;
            peer.send(round, Body::Challenge(challenge))?;
            let verdict = match peer.recv(round)? {
                Body::Response(z) => session.receive_response(z)?.verdict,
                other => return Err(unexpected("response", &other)),
            };
            peer.send(round, Body::RoundResult(verdict))?;
        }
        let transcript = session.transcript();
        peer.send(rounds, Body::FinalResult(transcript.overall))?;
        Ok(transcript)
    })();
    match result {
        Ok(t) => Ok(t),
        Err(err) => {
            let round = session_round(&session);
            Err(peer.abort(round, err, Some(session.transcript())))
        }
    }
}

fn session_round(session: &VerifierSession) -> u32 {
    let done = session.transcript().rounds.len() as u32;
    if session.phase() == Phase::Done {
        done
    } else {
        done + 1
    }
}

/// Result of one accepted connection.
#[derive(Debug)]
pub struct SessionOutcome {
    pub peer: Option<SocketAddr>,
    pub result: Result<ProofTranscript>,
    pub transcript_path: Option<PathBuf>,
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Writes `transcript` as canonical JSON into `dir`.
pub fn persist_transcript(dir: &std::path::Path, transcript: &ProofTranscript, tag: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let name =
        format!("{}.{}.{}.json", file_safe(&transcript.contract_id), file_safe(&transcript.target.to_string()), tag);
    let path = dir.join(name);
    fs::write(&path, transcript.to_json())?;
    Ok(path)
}

/// Accepts connections on `listener`, one thread per session, and yields
/// each session's outcome. Sessions share `ledger` read-only. The stream
/// ends once `policy.max_sessions` connections have been handled.
pub fn serve_verifier(
    listener: TcpListener,
    ledger: Arc<Ledger>,
    params: GroupParams,
    policy: VerifierPolicy,
) -> mpsc::Receiver<SessionOutcome> {
    let (tx, rx) = mpsc::channel();
    let policy = Arc::new(policy);
    thread::spawn(move || {
        let mut workers = Vec::new();
        for (n, conn) in listener.incoming().enumerate() {
            if policy.max_sessions.is_some_and(|max| n >= max) {
                break;
            }
            let tx = tx.clone();
            let (ledger, params, session_policy) = (ledger.clone(), params.clone(), policy.clone());
            workers.push(thread::spawn(move || {
                let outcome = match conn {
                    Ok(stream) => serve_one(stream, &ledger, &params, &session_policy, n),
                    Err(e) => SessionOutcome { peer: None, result: Err(Error::Transport(e)), transcript_path: None },
                };
                let _ = tx.send(outcome);
            }));
            if policy.max_sessions.is_some_and(|max| n + 1 >= max) {
                break;
            }
        }
        for w in workers {
            let _ = w.join();
        }
    });
    rx
}

fn serve_one(
    mut stream: TcpStream,
    ledger: &Ledger,
    params: &GroupParams,
    policy: &VerifierPolicy,
    n: usize,
) -> SessionOutcome {
    let peer = stream.peer_addr().ok();
    if let Err(e) =
        stream.set_read_timeout(Some(policy.timeout)).and_then(|_| stream.set_write_timeout(Some(policy.timeout)))
    {
        return SessionOutcome { peer, result: Err(Error::Transport(e)), transcript_path: None };
    }
    let mut rng = session_rng(policy.seed);
    let result = handle_verifier_connection(&mut stream, ledger, params, policy, &mut rng);
    let mut transcript_path = None;
    if let (Ok(t), Some(dir)) = (&result, &policy.transcript_dir) {
        match persist_transcript(dir, t, &format!("s{n}")) {
            Ok(p) => transcript_path = Some(p),
            Err(e) => return SessionOutcome { peer, result: Err(e), transcript_path: None },
        }
    }
    SessionOutcome { peer, result, transcript_path }
}

#[derive(Debug, Clone)]
pub struct ProveRequest {
    pub contract_id: String,
    pub target: Target,
    pub rounds: u32,
    pub session_id: SessionId,
}

#[derive(Debug, Clone)]
pub struct ProverOutcome {
    pub verdict: Verdict,
    pub transcript: ProofTranscript,
}

/// Connects to a verifier and proves with `strategy`.
pub fn run_prover<A: ToSocketAddrs, P: ProverStrategy + ?Sized>(
    address: A,
    strategy: &mut P,
    params: &GroupParams,
    request: &ProveRequest,
    timeout: Duration,
) -> Result<ProverOutcome> {
    let addr = address
        .to_socket_addrs()
        .map_err(Error::Transport)?
        .next()
        .ok_or_else(|| Error::Transport(io::Error::new(io::ErrorKind::NotFound, "address did not resolve")))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout).map_err(Error::Transport)?;
    stream.set_read_timeout(Some(timeout)).map_err(Error::Transport)?;
    stream.set_write_timeout(Some(timeout)).map_err(Error::Transport)?;
    run_prover_on(&mut stream, strategy, params, request)
}

/// Prover side of one session over an established stream.
pub fn run_prover_on<S, P>(
    stream: &mut S,
    strategy: &mut P,
    params: &GroupParams,
    request: &ProveRequest,
) -> Result<ProverOutcome>
where
    S: Read + Write + ?Sized,
    P: ProverStrategy + ?Sized,
{
    let mut peer = Peer { stream, session_id: request.session_id };
    peer.send(
        0,
        Body::Hello {
            contract_id: request.contract_id.clone(),
            target: request.target.clone(),
            rounds: request.rounds,
        },
    )?;
    let rounds = match peer.recv(0) {
        Ok(Body::Hello { contract_id, target, rounds })
            if contract_id == request.contract_id && target == request.target && rounds >= 1 =>
        {
            rounds
        }
        Ok(other) => return Err(peer.abort(0, unexpected("hello", &other), None)),
        Err(e) => return Err(peer.abort(0, e, None)),
    };
    let mut transcript = ProofTranscript {
        contract_id: request.contract_id.clone(),
        target: request.target.clone(),
        params_id: params.id().to_string(),
        k: rounds,
        rounds: Vec::new(),
        overall: Verdict::Reject,
    };
    if let Err(e) = strategy.begin(&request.target, rounds) {
        return Err(peer.abort(0, e, Some(transcript)));
    }
    for round in 1..=rounds {
        let step = (|| {
            let commitment = strategy.commit()?;
            peer.send(round, Body::Commit(commitment.clone()))?;
            let challenge = match peer.recv(round)? {
                Body::Challenge(c) => c,
                other => return Err(unexpected("challenge", &other)),
            };
            let response = strategy.respond(challenge)?;
            peer.send(round, Body::Response(response.clone()))?;
            let verdict = match peer.recv(round)? {
                Body::RoundResult(v) => v,
                other => return Err(unexpected("round-result", &other)),
            };
            Ok(RoundTranscript { commitment, challenge, response, verdict })
        })();
        match step {
            Ok(r) => transcript.rounds.push(r),
            Err(e) => return Err(peer.abort(round, e, Some(transcript))),
        }
    }
    let verdict = match peer.recv(rounds) {
        Ok(Body::FinalResult(v)) => v,
        Ok(other) => return Err(peer.abort(rounds, unexpected("final-result", &other), Some(transcript))),
        Err(e) => return Err(peer.abort(rounds, e, Some(transcript))),
    };
    let all_ok = transcript.rounds.iter().all(|r| r.verdict.is_accept());
    if verdict.is_accept() && !all_ok {
        let err = Error::Malformed("final verdict contradicts round results".into());
        return Err(peer.abort(rounds, err, Some(transcript)));
    }
    transcript.overall = verdict;
    Ok(ProverOutcome { verdict, transcript })
}
