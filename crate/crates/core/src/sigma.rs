//! Interactive proof of knowledge of `x` such that `e = g^x mod p`.
//!
//! One round:
//!
//! 1. the prover samples `r` from `Z_q` and sends `s = g^r`;
//! 2. the verifier replies with a random bit `i`;
//! 3. the prover answers `z = r` when `i = 0` and `z = r + x mod q` when `i = 1`;
//! 4. the verifier accepts iff `g^z = s * e^i mod p`.
//!
//! A prover without `x` can prepare for at most one value of `i`, so each
//! round halves its chance; `k` rounds leave `2^-k`. Accepting transcripts
//! can be produced without `x` (see [`simulate_transcript`]), and two
//! accepting answers to the same commitment reveal `x` (see
//! [`extract_witness`]).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceRecord, SecretWitness};
use crate::group::{GroupElement, GroupParams, Scalar};

/// Default number of rounds; soundness error `2^-40`.
pub const DEFAULT_ROUNDS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Challenge {
    Zero,
    One,
}

impl Challenge {
    pub fn bit(self) -> u8 {
        match self {
            Challenge::Zero => 0,
            Challenge::One => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Challenge::Zero),
            1 => Ok(Challenge::One),
            other => Err(Error::Malformed(format!("challenge bit must be 0 or 1, got {other}"))),
        }
    }

    /// Low bit of one byte drawn from `rng`.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Result<Self> {
        let mut b = [0u8; 1];
        rng.try_fill_bytes(&mut b).map_err(|e| Error::Entropy(e.to_string()))?;
        Self::from_bit(b[0] & 1)
    }
}

impl Serialize for Challenge {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.bit())
    }
}

impl<'de> Deserialize<'de> for Challenge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bit = u8::deserialize(d)?;
        Challenge::from_bit(bit).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Commitment(pub GroupElement);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Response(pub Scalar);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        })
    }
}

/// What a proof is about: the whole contract or one named term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Contract,
    Term(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Contract => f.write_str("contract"),
            Target::Term(label) => write!(f, "term:{label}"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contract" => Ok(Target::Contract),
            _ => match s.strip_prefix("term:") {
                Some(label) if !label.is_empty() => Ok(Target::Term(label.to_string())),
                _ => Err(Error::Decode(format!("unknown proof target `{s}`"))),
            },
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundTranscript {
    #[serde(rename = "s")]
    pub commitment: Commitment,
    pub challenge: Challenge,
    #[serde(rename = "z")]
    pub response: Response,
    pub verdict: Verdict,
}

/// The auditable record of a multi-round proof. Serialized as canonical
/// JSON it can be re-verified offline against the ledger's evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofTranscript {
    pub contract_id: String,
    pub target: Target,
    pub params_id: String,
    pub k: u32,
    pub rounds: Vec<RoundTranscript>,
    pub overall: Verdict,
}

impl ProofTranscript {
    pub fn accepted(&self) -> bool {
        self.overall.is_accept()
    }

    pub fn to_json(&self) -> String {
        crate::canonical::to_string(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        crate::canonical::from_slice_strict(bytes)
    }
}

/// The verifier's decision for one round, from public values only.
/// Non-members of the subgroup and out-of-range responses are malformed.
pub fn verify_round(
    commitment: &Commitment,
    challenge: Challenge,
    response: &Response,
    e: &GroupElement,
    params: &GroupParams,
) -> Result<Verdict> {
    if !params.is_member(commitment.0.value()) {
        return Err(Error::Malformed("commitment is not a subgroup member".into()));
    }
    if !params.is_member(e.value()) {
        return Err(Error::Malformed("evidence is not a subgroup member".into()));
    }
    if response.0.value() >= params.q() {
        return Err(Error::Malformed("response is not reduced mod q".into()));
    }
    let lhs = params.exp_g(&response.0);
    let rhs = match challenge {
        Challenge::Zero => commitment.0.clone(),
        Challenge::One => params.mul(&commitment.0, e),
    };
    Ok(Verdict::from_bool(lhs == rhs))
}

/// Re-checks every round of a stored transcript against the published
/// evidence and returns the recomputed overall verdict. Any disagreement
/// between stored and recomputed verdicts is reported as malformed.
pub fn verify_transcript(
    transcript: &ProofTranscript,
    record: &EvidenceRecord,
    params: &GroupParams,
) -> Result<Verdict> {
    if transcript.contract_id != record.contract_id {
        return Err(Error::Malformed(format!(
            "transcript is for `{}`, record is `{}`",
            transcript.contract_id, record.contract_id
        )));
    }
    if transcript.params_id != params.id() || record.params_id != params.id() {
        return Err(Error::Malformed("parameter set mismatch".into()));
    }
    if transcript.k == 0 || transcript.rounds.len() != transcript.k as usize {
        return Err(Error::Malformed(format!(
            "transcript declares k = {} but holds {} rounds",
            transcript.k,
            transcript.rounds.len()
        )));
    }
    let e = record.evidence_for(&transcript.target)?;
    let mut overall = Verdict::Accept;
    for (i, round) in transcript.rounds.iter().enumerate() {
        let v = verify_round(&round.commitment, round.challenge, &round.response, e, params)?;
        if v != round.verdict {
            return Err(Error::Malformed(format!("round {i} verdict does not match recomputation")));
        }
        if !v.is_accept() {
            overall = Verdict::Reject;
        }
    }
    if overall != transcript.overall {
        return Err(Error::Malformed("overall verdict does not match rounds".into()));
    }
    Ok(overall)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    AwaitingCommit,
    AwaitingChallenge,
    AwaitingResponse,
    Done,
}

/// Prover-side state machine. Each nonce is used for exactly one response
/// and dropped immediately after.
#[derive(Debug)]
pub struct ProverSession {
    params: GroupParams,
    rounds: u32,
    completed: u32,
    phase: Phase,
    nonce: Option<Scalar>,
}

impl ProverSession {
    pub fn new(params: GroupParams, rounds: u32) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::Malformed("a proof needs at least one round".into()));
        }
        Ok(ProverSession { params, rounds, completed: 0, phase: Phase::AwaitingCommit, nonce: None })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn completed_rounds(&self) -> u32 {
        self.completed
    }

    pub fn commit<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<Commitment> {
        self.expect(Phase::AwaitingCommit, "commit")?;
        let r = self.params.random_scalar(rng)?;
        self.commit_with_nonce(r)
    }

    /// Commits with a caller-chosen nonce. Reusing a nonce across rounds
    /// leaks the witness; only deterministic tests should call this.
    pub fn commit_with_nonce(&mut self, r: Scalar) -> Result<Commitment> {
        self.expect(Phase::AwaitingCommit, "commit")?;
        if r.value() >= self.params.q() {
            return Err(Error::ScalarRange);
        }
        let s = self.params.exp_g(&r);
        self.nonce = Some(r);
        self.phase = Phase::AwaitingChallenge;
        Ok(Commitment(s))
    }

    pub fn respond(&mut self, witness: &Scalar, challenge: Challenge) -> Result<Response> {
        self.expect(Phase::AwaitingChallenge, "respond")?;
        let r = self.nonce.take().expect("nonce present while awaiting challenge");
        let z = match challenge {
            Challenge::Zero => r,
            Challenge::One => r.add(witness, &self.params),
        };
        self.completed += 1;
        self.phase = if self.completed == self.rounds { Phase::Done } else { Phase::AwaitingCommit };
        Ok(Response(z))
    }

    fn expect(&self, phase: Phase, action: &str) -> Result<()> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(Error::OutOfOrder(format!("prover cannot {action} while {:?}", self.phase)))
        }
    }
}

/// Verifier-side state machine for one target.
#[derive(Debug)]
pub struct VerifierSession {
    params: GroupParams,
    contract_id: String,
    target: Target,
    e: GroupElement,
    rounds: u32,
    phase: Phase,
    commitment: Option<Commitment>,
    challenge: Option<Challenge>,
    transcript: Vec<RoundTranscript>,
}

impl VerifierSession {
    pub fn new(params: GroupParams, record: &EvidenceRecord, target: Target, rounds: u32) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::Malformed("a proof needs at least one round".into()));
        }
        record.check(&params)?;
        let e = record.evidence_for(&target)?.clone();
        Ok(VerifierSession {
            params,
            contract_id: record.contract_id.clone(),
            target,
            e,
            rounds,
            phase: Phase::AwaitingCommit,
            commitment: None,
            challenge: None,
            transcript: Vec::new(),
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn evidence(&self) -> &GroupElement {
        &self.e
    }

    pub fn receive_commitment(&mut self, commitment: Commitment) -> Result<()> {
        self.expect(Phase::AwaitingCommit, "accept a commitment")?;
        if !self.params.is_member(commitment.0.value()) {
            return Err(Error::Malformed("commitment is not a subgroup member".into()));
        }
        self.commitment = Some(commitment);
        self.phase = Phase::AwaitingChallenge;
        Ok(())
    }

    pub fn challenge<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<Challenge> {
        self.expect(Phase::AwaitingChallenge, "issue a challenge")?;
        let c = Challenge::random(rng)?;
        self.challenge = Some(c);
        self.phase = Phase::AwaitingResponse;
        Ok(c)
    }

    pub fn receive_response(&mut self, response: Response) -> Result<RoundTranscript> {
        self.expect(Phase::AwaitingResponse, "accept a response")?;
        let commitment = self.commitment.take().expect("commitment recorded");
        let challenge = self.challenge.take().expect("challenge recorded");
        let verdict = verify_round(&commitment, challenge, &response, &self.e, &self.params)?;
        let round = RoundTranscript { commitment, challenge, response, verdict };
        self.transcript.push(round.clone());
        self.phase = if self.transcript.len() == self.rounds as usize { Phase::Done } else { Phase::AwaitingCommit };
        Ok(round)
    }

    /// The transcript so far. `overall` is accept only for a finished,
    /// fully accepting run.
    pub fn transcript(&self) -> ProofTranscript {
        let complete = self.phase == Phase::Done;
        let all_ok = self.transcript.iter().all(|r| r.verdict.is_accept());
        ProofTranscript {
            contract_id: self.contract_id.clone(),
            target: self.target.clone(),
            params_id: self.params.id().to_string(),
            k: self.rounds,
            rounds: self.transcript.clone(),
            overall: Verdict::from_bool(complete && all_ok),
        }
    }

    fn expect(&self, phase: Phase, action: &str) -> Result<()> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(Error::OutOfOrder(format!("verifier cannot {action} while {:?}", self.phase)))
        }
    }
}

/// The prover side as seen by a driver: in-process or across a socket.
pub trait ProverStrategy {
    /// Starts a proof of `rounds` rounds for `target`.
    fn begin(&mut self, target: &Target, rounds: u32) -> Result<()>;
    fn commit(&mut self) -> Result<Commitment>;
    fn respond(&mut self, challenge: Challenge) -> Result<Response>;
}

enum Mode {
    Idle,
    Honest { x: Scalar, session: ProverSession },
    Guess { e: GroupElement, pending: Option<(Challenge, Scalar)> },
}

/// A prover that answers honestly for targets whose witness it holds and,
/// for targets where it only has the public evidence, prepares for a
/// guessed challenge bit: `s = g^z * e^-b` with `z` random, answering `z`.
/// That guess is right with probability one half per round.
pub struct Prover<R> {
    params: GroupParams,
    rng: R,
    known: BTreeMap<Target, Scalar>,
    public: BTreeMap<Target, GroupElement>,
    mode: Mode,
}

impl<R: RngCore> Prover<R> {
    pub fn new(params: GroupParams, rng: R) -> Self {
        Prover { params, rng, known: BTreeMap::new(), public: BTreeMap::new(), mode: Mode::Idle }
    }

    /// Knows the whole-contract witness and every term witness.
    pub fn with_witness(mut self, witness: &SecretWitness) -> Self {
        self.known.insert(Target::Contract, witness.x().clone());
        for (label, w) in witness.term_witnesses() {
            self.known.insert(Target::Term(label.clone()), w.clone());
        }
        self
    }

    pub fn with_target_witness(mut self, target: Target, x: Scalar) -> Self {
        self.known.insert(target, x);
        self
    }

    /// Public evidence for every target, used to bluff where no witness is held.
    pub fn with_public_evidence(mut self, record: &EvidenceRecord) -> Self {
        self.public.insert(Target::Contract, record.e.clone());
        for t in &record.term_evidence {
            self.public.insert(Target::Term(t.label.clone()), t.e.clone());
        }
        self
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

impl<R: RngCore> ProverStrategy for Prover<R> {
    fn begin(&mut self, target: &Target, rounds: u32) -> Result<()> {
        self.mode = if let Some(x) = self.known.get(target) {
            Mode::Honest { x: x.clone(), session: ProverSession::new(self.params.clone(), rounds)? }
        } else if let Some(e) = self.public.get(target) {
            Mode::Guess { e: e.clone(), pending: None }
        } else {
            return Err(match target {
                Target::Term(label) => Error::UnknownLabel(label.clone()),
                Target::Contract => Error::Malformed("prover has nothing for the contract target".into()),
            });
        };
        Ok(())
    }

    fn commit(&mut self) -> Result<Commitment> {
        match &mut self.mode {
            Mode::Idle => Err(Error::OutOfOrder("commit before begin".into())),
            Mode::Honest { session, .. } => session.commit(&mut self.rng),
            Mode::Guess { e, pending } => {
                if pending.is_some() {
                    return Err(Error::OutOfOrder("prover cannot commit twice".into()));
                }
                let guess = Challenge::random(&mut self.rng)?;
                let z = self.params.random_scalar(&mut self.rng)?;
                let gz = self.params.exp_g(&z);
                let s = match guess {
                    Challenge::Zero => gz,
                    Challenge::One => self.params.mul(&gz, &self.params.invert(e)),
                };
                *pending = Some((guess, z));
                Ok(Commitment(s))
            }
        }
    }

    fn respond(&mut self, challenge: Challenge) -> Result<Response> {
        match &mut self.mode {
            Mode::Idle => Err(Error::OutOfOrder("respond before begin".into())),
            Mode::Honest { x, session } => session.respond(x, challenge),
            Mode::Guess { pending, .. } => {
                let (_, z) = pending
                    .take()
                    .ok_or_else(|| Error::OutOfOrder("prover cannot respond before committing".into()))?;
                Ok(Response(z))
            }
        }
    }
}

/// Runs `rounds` sequential rounds in-process. A prover failure aborts the
/// session and returns the rounds completed so far.
pub fn run_protocol<P, R>(
    prover: &mut P,
    record: &EvidenceRecord,
    params: &GroupParams,
    target: &Target,
    rounds: u32,
    verifier_rng: &mut R,
) -> Result<ProofTranscript>
where
    P: ProverStrategy + ?Sized,
    R: RngCore + ?Sized,
{
    let mut verifier = VerifierSession::new(params.clone(), record, target.clone(), rounds)?;
    let abort = |verifier: &VerifierSession, err: Error| Error::Aborted {
        reason: err.to_string(),
        partial: Some(Box::new(verifier.transcript())),
    };
    if let Err(err) = prover.begin(target, rounds) {
        return Err(abort(&verifier, err));
    }
    while verifier.phase() != Phase::Done {
        let step = (|| {
            let commitment = prover.commit()?;
            verifier.receive_commitment(commitment)?;
            let challenge = verifier.challenge(verifier_rng)?;
            let response = prover.respond(challenge)?;
            verifier.receive_response(response)
        })();
        if let Err(err) = step {
            return Err(abort(&verifier, err));
        }
    }
    Ok(verifier.transcript())
}

/// Independent proofs for several terms of one contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermReport {
    pub transcripts: Vec<ProofTranscript>,
}

impl TermReport {
    pub fn verdicts(&self) -> Vec<(String, Verdict)> {
        self.transcripts
            .iter()
            .map(|t| {
                let label = match &t.target {
                    Target::Term(l) => l.clone(),
                    Target::Contract => "contract".into(),
                };
                (label, t.overall)
            })
            .collect()
    }

    pub fn verdict(&self, label: &str) -> Option<Verdict> {
        self.verdicts().into_iter().find(|(l, _)| l == label).map(|(_, v)| v)
    }
}

pub fn run_term_protocol<P, R>(
    prover: &mut P,
    record: &EvidenceRecord,
    params: &GroupParams,
    labels: &[&str],
    rounds_per_term: u32,
    verifier_rng: &mut R,
) -> Result<TermReport>
where
    P: ProverStrategy + ?Sized,
    R: RngCore + ?Sized,
{
    for label in labels {
        if !record.labels().any(|l| l == *label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
    }
    let transcripts = labels
        .iter()
        .map(|label| {
            let target = Target::Term(label.to_string());
            run_protocol(prover, record, params, &target, rounds_per_term, verifier_rng)
        })
        .collect::<Result<_>>()?;
    Ok(TermReport { transcripts })
}

/// Accepting transcript for challenge `challenge` built from `z` alone.
pub fn simulate_with_response(
    e: &GroupElement,
    challenge: Challenge,
    z: Scalar,
    params: &GroupParams,
) -> RoundTranscript {
    let gz = params.exp_g(&z);
    let s = match challenge {
        Challenge::Zero => gz,
        Challenge::One => params.mul(&gz, &params.invert(e)),
    };
    RoundTranscript { commitment: Commitment(s), challenge, response: Response(z), verdict: Verdict::Accept }
}

/// Produces an accepting round for `challenge` without any witness.
pub fn simulate_transcript<R: RngCore + ?Sized>(
    e: &GroupElement,
    challenge: Challenge,
    params: &GroupParams,
    rng: &mut R,
) -> Result<RoundTranscript> {
    if !params.is_member(e.value()) {
        return Err(Error::NotInSubgroup);
    }
    let z = params.random_scalar(rng)?;
    Ok(simulate_with_response(e, challenge, z, params))
}

/// Recovers `x = z1 - z0 mod q` from two accepting rounds that share a
/// commitment and answer different challenges.
pub fn extract_witness(
    a: &RoundTranscript,
    b: &RoundTranscript,
    e: &GroupElement,
    params: &GroupParams,
) -> Result<Scalar> {
    if a.commitment != b.commitment {
        return Err(Error::Malformed("rounds do not share a commitment".into()));
    }
    let (zero, one) = match (a.challenge, b.challenge) {
        (Challenge::Zero, Challenge::One) => (a, b),
        (Challenge::One, Challenge::Zero) => (b, a),
        _ => return Err(Error::Malformed("rounds must answer both challenges".into())),
    };
    for round in [zero, one] {
        let v = verify_round(&round.commitment, round.challenge, &round.response, e, params)?;
        if !v.is_accept() {
            return Err(Error::Malformed("extraction needs accepting rounds".into()));
        }
    }
    Ok(one.response.0.sub(&zero.response.0, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{generate_evidence, Salt};
    use num_bigint::BigUint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> GroupParams {
        GroupParams::toy()
    }

    fn sc(v: u64) -> Scalar {
        Scalar::from_u64(v, &toy()).unwrap()
    }

    fn el(v: u64) -> GroupElement {
        toy().check_member(&BigUint::from(v)).unwrap()
    }

    fn toy_record(x: u64) -> EvidenceRecord {
        let w = SecretWitness::from_scalars(sc(x), vec![], Salt::new(vec![0; 16]).unwrap());
        generate_evidence(&w, &toy(), "toy", 0)
    }

    #[test]
    fn commit_with_forced_nonce() {
        let mut s = ProverSession::new(toy(), 2).unwrap();
        assert_eq!(s.commit_with_nonce(sc(4)).unwrap().0.value(), &BigUint::from(16u8));
        let mut s = ProverSession::new(toy(), 2).unwrap();
        assert_eq!(s.commit_with_nonce(sc(0)).unwrap().0.value(), &BigUint::from(1u8));
    }

    #[test]
    fn second_commit_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut s = ProverSession::new(toy(), 3).unwrap();
        s.commit(&mut rng).unwrap();
        assert!(matches!(s.commit(&mut rng), Err(Error::OutOfOrder(_))));
    }

    #[test]
    fn respond_examples() {
        let cases = [(4, 3, Challenge::One, 7), (4, 3, Challenge::Zero, 4), (10, 3, Challenge::One, 2)];
        for (r, x, i, z) in cases {
            let mut s = ProverSession::new(toy(), 1).unwrap();
            s.commit_with_nonce(sc(r)).unwrap();
            assert_eq!(s.respond(&sc(x), i).unwrap().0, sc(z));
            assert_eq!(s.phase(), Phase::Done);
            assert!(s.nonce.is_none());
        }
    }

    #[test]
    fn respond_without_commit_rejected() {
        let mut s = ProverSession::new(toy(), 1).unwrap();
        assert!(matches!(s.respond(&sc(1), Challenge::One), Err(Error::OutOfOrder(_))));
    }

    #[test]
    fn verify_round_examples() {
        let p = toy();
        let v = |s, i, z, e| verify_round(&Commitment(el(s)), i, &Response(sc(z)), &el(e), &p).unwrap();
        // 2^7 mod 23 = 13 = 16 * 8 mod 23
        assert_eq!(v(16, Challenge::One, 7, 8), Verdict::Accept);
        assert_eq!(v(16, Challenge::Zero, 4, 8), Verdict::Accept);
        // 2^6 mod 23 = 18
        assert_eq!(v(16, Challenge::One, 6, 8), Verdict::Reject);
    }

    #[test]
    fn verify_round_rejects_non_members() {
        let p = toy();
        // 5 generates all of Z_23^*, so it lies outside the order-11 subgroup
        let outsider = GroupElement::from_raw(BigUint::from(5u8));
        let r = verify_round(&Commitment(outsider.clone()), Challenge::Zero, &Response(sc(0)), &el(8), &p);
        assert!(matches!(r, Err(Error::Malformed(_))));
        let r = verify_round(&Commitment(el(16)), Challenge::Zero, &Response(sc(4)), &outsider, &p);
        assert!(matches!(r, Err(Error::Malformed(_))));
    }

    #[test]
    fn challenge_follows_seeded_stream() {
        let mut a = ChaCha20Rng::seed_from_u64(99);
        let mut b = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..64 {
            let mut byte = [0u8; 1];
            b.fill_bytes(&mut byte);
            assert_eq!(Challenge::random(&mut a).unwrap().bit(), byte[0] & 1);
        }
    }

    #[test]
    fn challenge_frequency() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let ones = (0..10_000).filter(|_| Challenge::random(&mut rng).unwrap() == Challenge::One).count();
        let frac = ones as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn verifier_phase_machine() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut v = VerifierSession::new(toy(), &toy_record(3), Target::Contract, 1).unwrap();
        assert!(matches!(v.challenge(&mut rng), Err(Error::OutOfOrder(_))));
        assert!(matches!(v.receive_response(Response(sc(1))), Err(Error::OutOfOrder(_))));
        v.receive_commitment(Commitment(el(16))).unwrap();
        assert!(matches!(v.receive_commitment(Commitment(el(16))), Err(Error::OutOfOrder(_))));
        v.challenge(&mut rng).unwrap();
        assert!(matches!(v.challenge(&mut rng), Err(Error::OutOfOrder(_))));
    }

    #[test]
    fn simulator_examples() {
        let p = toy();
        // 8^-1 mod 23 = 3 by enumeration; s = 13 * 3 mod 23 = 16
        assert_eq!((1..23).find(|k| 8 * k % 23 == 1), Some(3));
        let t = simulate_with_response(&el(8), Challenge::One, sc(7), &p);
        assert_eq!(t.commitment.0.value(), &BigUint::from(16u8));
        assert_eq!(verify_round(&t.commitment, t.challenge, &t.response, &el(8), &p).unwrap(), Verdict::Accept);
        let t = simulate_with_response(&el(8), Challenge::Zero, sc(4), &p);
        assert_eq!(t.commitment.0.value(), &BigUint::from(16u8));
    }

    #[test]
    fn honest_runs_accept() {
        let p = toy();
        let record = toy_record(3);
        for k in [1, 20] {
            let mut prover = Prover::new(p.clone(), ChaCha20Rng::seed_from_u64(k as u64))
                .with_target_witness(Target::Contract, sc(3));
            let mut vr = ChaCha20Rng::seed_from_u64(100 + k as u64);
            let t = run_protocol(&mut prover, &record, &p, &Target::Contract, k, &mut vr).unwrap();
            assert!(t.accepted());
            assert_eq!(t.rounds.len(), k as usize);
            assert_eq!(verify_transcript(&t, &record, &p).unwrap(), Verdict::Accept);
        }
    }

    #[test]
    fn tampered_transcript_fails_audit() {
        let p = toy();
        let record = toy_record(5);
        let mut prover =
            Prover::new(p.clone(), ChaCha20Rng::seed_from_u64(1)).with_target_witness(Target::Contract, sc(5));
        let mut vr = ChaCha20Rng::seed_from_u64(2);
        let mut t = run_protocol(&mut prover, &record, &p, &Target::Contract, 8, &mut vr).unwrap();
        let z = t.rounds[3].response.0.add(&sc(1), &p);
        t.rounds[3].response = Response(z);
        assert!(verify_transcript(&t, &record, &p).is_err());
    }

    #[test]
    fn prover_failure_returns_partial_transcript() {
        struct Flaky(u32);
        impl ProverStrategy for Flaky {
            fn begin(&mut self, _: &Target, _: u32) -> Result<()> {
                Ok(())
            }
            fn commit(&mut self) -> Result<Commitment> {
                if self.0 == 0 {
                    return Err(Error::Transport(std::io::ErrorKind::BrokenPipe.into()));
                }
                self.0 -= 1;
                Ok(Commitment(GroupParams::toy().identity()))
            }
            fn respond(&mut self, _: Challenge) -> Result<Response> {
                Ok(Response(Scalar::zero()))
            }
        }
        let p = toy();
        let mut vr = ChaCha20Rng::seed_from_u64(0);
        let err = run_protocol(&mut Flaky(2), &toy_record(0), &p, &Target::Contract, 5, &mut vr).unwrap_err();
        let partial = err.partial_transcript().expect("partial transcript");
        assert_eq!(partial.rounds.len(), 2);
        assert_eq!(partial.overall, Verdict::Reject);
    }

    #[test]
    fn extraction_recovers_witness() {
        let p = toy();
        let e = el(8);
        let mut s = ProverSession::new(p.clone(), 1).unwrap();
        let c = s.commit_with_nonce(sc(6)).unwrap();
        let z1 = s.respond(&sc(3), Challenge::One).unwrap();
        let a = RoundTranscript {
            commitment: c.clone(),
            challenge: Challenge::Zero,
            response: Response(sc(6)),
            verdict: Verdict::Accept,
        };
        let b = RoundTranscript { commitment: c, challenge: Challenge::One, response: z1, verdict: Verdict::Accept };
        assert_eq!(extract_witness(&a, &b, &e, &p).unwrap(), sc(3));
        assert!(extract_witness(&a, &a, &e, &p).is_err());
    }

    #[test]
    fn transcript_json_is_canonical() {
        let p = toy();
        let record = toy_record(2);
        let mut prover =
            Prover::new(p.clone(), ChaCha20Rng::seed_from_u64(3)).with_target_witness(Target::Contract, sc(2));
        let mut vr = ChaCha20Rng::seed_from_u64(4);
        let t = run_protocol(&mut prover, &record, &p, &Target::Contract, 2, &mut vr).unwrap();
        let json = t.to_json();
        assert!(json.starts_with(r#"{"contract_id":"toy","k":2,"overall":"accept","params_id":"toy","rounds":[{"#));
        assert_eq!(ProofTranscript::from_json(json.as_bytes()).unwrap(), t);
    }

    #[test]
    fn target_strings() {
        assert_eq!("contract".parse::<Target>().unwrap(), Target::Contract);
        assert_eq!("term:period".parse::<Target>().unwrap(), Target::Term("period".into()));
        assert!("term:".parse::<Target>().is_err());
        assert!("period".parse::<Target>().is_err());
    }
}
