//! Confidential contracts with public, verifiable evidence.
//!
//! Contract content is hashed into a secret exponent `x`; only `e = g^x mod p`
//! is published, on an append-only hash-chained [`ledger`]. A party holding
//! the content proves knowledge of `x` to any verifier with the interactive
//! protocol in [`sigma`], optionally over TCP via [`wire`], without revealing
//! the content. Individual contract terms carry their own evidence so they
//! can be proven separately.

pub mod canonical;
pub mod error;
pub mod evidence;
pub mod group;
pub mod hexint;
pub mod ledger;
pub mod sigma;
pub mod wire;

pub use error::{Error, Result};
pub use evidence::{
    derive_witness, generate_evidence, verify_binding, BindingReport, ContractContent, EvidenceRecord, Salt,
    SecretWitness, TermEvidence,
};
pub use group::{validate_params, GroupElement, GroupParams, Scalar, ValidityReport, Violation};
pub use ledger::{BlockRef, ChainReport, Clock, FixedClock, Ledger, LedgerBlock, SystemClock};
pub use sigma::{
    extract_witness, run_protocol, run_term_protocol, simulate_transcript, verify_round, verify_transcript, Challenge,
    Commitment, Phase, ProofTranscript, Prover, ProverSession, ProverStrategy, Response, RoundTranscript, Target,
    TermReport, Verdict, VerifierSession, DEFAULT_ROUNDS,
};
