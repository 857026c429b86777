//! Witness derivation from confidential contract content and the public
//! evidence values derived from it.
//!
//! The whole-contract witness is `x = H(salt || body)` and each term gets its
//! own `x_j = H(salt || label_j || value_j)`, where `H` is SHA-256 reduced
//! mod `q` and every field is prefixed with its length as an 8-byte
//! big-endian integer. Evidence is `g^x` (and `g^x_j` per term). Neither the
//! salt nor any content byte is ever part of an [`EvidenceRecord`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupParams, Scalar};
use crate::sigma::Target;

pub const MIN_SALT_LEN: usize = 16;

const CONTENT_MAGIC: &str = "svp-contract 1";

/// Private randomness shared among the contract parties.
#[derive(Clone, PartialEq, Eq)]
pub struct Salt(Vec<u8>);

impl Salt {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.len() < MIN_SALT_LEN {
            return Err(Error::Salt { min: MIN_SALT_LEN, got: bytes.len() });
        }
        Ok(Salt(bytes))
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| Error::Decode(format!("salt: {e}")))?;
        Self::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Salt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Salt(<{} bytes>)", self.0.len())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Term {
    pub label: String,
    pub value: Vec<u8>,
}

/// The confidential contract: full text plus the individually provable terms.
#[derive(Clone, PartialEq, Eq)]
pub struct ContractContent {
    body: Vec<u8>,
    terms: Vec<Term>,
}

impl fmt::Debug for ContractContent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.terms.iter().map(|t| t.label.as_str()).collect();
        f.debug_struct("ContractContent").field("body_len", &self.body.len()).field("terms", &labels).finish()
    }
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label.len() <= 64
        && label.bytes().all(|b| b.is_ascii_alphanumeric() || b"_-.".contains(&b));
    if ok {
        Ok(())
    } else {
        Err(Error::Content(format!("term label `{label}` must be 1-64 characters of [A-Za-z0-9_.-]")))
    }
}

impl ContractContent {
    pub fn new<L, V>(body: impl Into<Vec<u8>>, terms: impl IntoIterator<Item = (L, V)>) -> Result<Self>
    where
        L: Into<String>,
        V: Into<Vec<u8>>,
    {
        let body = body.into();
        if body.is_empty() {
            return Err(Error::Content("contract body is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (label, value) in terms {
            let label = label.into();
            check_label(&label)?;
            if !seen.insert(label.clone()) {
                return Err(Error::Content(format!("duplicate term label `{label}`")));
            }
            out.push(Term { label, value: value.into() });
        }
        Ok(ContractContent { body, terms: out })
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }

    /// Serializes to the plain-text container:
    ///
    /// ```text
    /// svp-contract 1
    /// body <len>
    /// <len raw bytes>
    /// term <label> <len>
    /// <len raw bytes>
    /// ```
    ///
    /// Every payload is followed by a single newline.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.body.len() + 64);
        out.extend_from_slice(CONTENT_MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(format!("body {}\n", self.body.len()).as_bytes());
        out.extend_from_slice(&self.body);
        out.push(b'\n');
        for t in &self.terms {
            out.extend_from_slice(format!("term {} {}\n", t.label, t.value.len()).as_bytes());
            out.extend_from_slice(&t.value);
            out.push(b'\n');
        }
        out
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rest = bytes;
        let magic = take_line(&mut rest)?;
        if magic != CONTENT_MAGIC {
            return Err(Error::Content("missing `svp-contract 1` header".into()));
        }
        let mut body = None;
        let mut terms: Vec<(String, Vec<u8>)> = Vec::new();
        while !rest.is_empty() {
            let header = take_line(&mut rest)?;
            let fields: Vec<&str> = header.split(' ').collect();
            let (label, len) = match fields.as_slice() {
                ["body", len] if body.is_none() && terms.is_empty() => (None, *len),
                ["term", label, len] if body.is_some() => (Some(*label), *len),
                _ => return Err(Error::Content(format!("unexpected field header `{header}`"))),
            };
            let len: usize = len.parse().map_err(|_| Error::Content(format!("bad length in `{header}`")))?;
            if rest.len() < len + 1 || rest[len] != b'\n' {
                return Err(Error::Content(format!("field `{header}` is truncated")));
            }
            let payload = rest[..len].to_vec();
            rest = &rest[len + 1..];
            match label {
                None => body = Some(payload),
                Some(l) => terms.push((l.to_string(), payload)),
            }
        }
        let body = body.ok_or_else(|| Error::Content("missing body field".into()))?;
        ContractContent::new(body, terms)
    }
}

fn take_line<'a>(rest: &mut &'a [u8]) -> Result<&'a str> {
    let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Content("unterminated header line".into()))?;
    let line = std::str::from_utf8(&rest[..end]).map_err(|_| Error::Content("header line is not UTF-8".into()))?;
    *rest = &rest[end + 1..];
    Ok(line)
}

/// Length-prefixed concatenation: each part is preceded by its length as an
/// 8-byte big-endian integer.
fn encode_parts(parts: &[&[u8]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len() + 8).sum());
    for part in parts {
        out.extend_from_slice(&(part.len() as u64).to_be_bytes());
        out.extend_from_slice(part);
    }
    out
}

/// Secret exponents known to the contract parties. Never serialized.
#[derive(Clone)]
pub struct SecretWitness {
    x: Scalar,
    term_witnesses: Vec<(String, Scalar)>,
    salt: Salt,
}

impl fmt::Debug for SecretWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.term_witnesses.iter().map(|(l, _)| l.as_str()).collect();
        f.debug_struct("SecretWitness").field("terms", &labels).finish_non_exhaustive()
    }
}

impl SecretWitness {
    pub fn x(&self) -> &Scalar {
        &self.x
    }

    pub fn term_witnesses(&self) -> &[(String, Scalar)] {
        &self.term_witnesses
    }

    pub fn term_witness(&self, label: &str) -> Option<&Scalar> {
        self.term_witnesses.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }

    pub fn salt(&self) -> &Salt {
        &self.salt
    }

    /// The exponent that answers for `target`.
    pub fn for_target(&self, target: &Target) -> Result<&Scalar> {
        match target {
            Target::Contract => Ok(&self.x),
            Target::Term(label) => self.term_witness(label).ok_or_else(|| Error::UnknownLabel(label.clone())),
        }
    }

    /// Builds a witness from raw exponents. Intended for tests and
    /// demonstrations in small groups.
    pub fn from_scalars(x: Scalar, term_witnesses: Vec<(String, Scalar)>, salt: Salt) -> Self {
        SecretWitness { x, term_witnesses, salt }
    }
}

pub fn derive_witness(content: &ContractContent, salt: &Salt, params: &GroupParams) -> SecretWitness {
    let s = salt.as_bytes();
    let x = params.hash_to_scalar(&encode_parts(&[s, &content.body]));
    let term_witnesses = content
        .terms
        .iter()
        .map(|t| {
            let w = params.hash_to_scalar(&encode_parts(&[s, t.label.as_bytes(), &t.value]));
            (t.label.clone(), w)
        })
        .collect();
    SecretWitness { x, term_witnesses, salt: salt.clone() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEvidence {
    pub label: String,
    pub e: GroupElement,
}

/// The public value published to the ledger for one contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRecord {
    pub contract_id: String,
    pub e: GroupElement,
    pub term_evidence: Vec<TermEvidence>,
    pub params_id: String,
    pub created_at: u64,
}

impl EvidenceRecord {
    pub fn evidence_for(&self, target: &Target) -> Result<&GroupElement> {
        match target {
            Target::Contract => Ok(&self.e),
            Target::Term(label) => self
                .term_evidence
                .iter()
                .find(|t| &t.label == label)
                .map(|t| &t.e)
                .ok_or_else(|| Error::UnknownLabel(label.clone())),
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.term_evidence.iter().map(|t| t.label.as_str())
    }

    /// Structural checks against `params`: matching id, subgroup membership
    /// of every value, unique labels.
    pub fn check(&self, params: &GroupParams) -> Result<()> {
        if self.params_id != params.id() {
            return Err(Error::Malformed(format!(
                "record uses parameters `{}`, expected `{}`",
                self.params_id,
                params.id()
            )));
        }
        params.check_member(self.e.value())?;
        let mut seen = HashSet::new();
        for t in &self.term_evidence {
            params.check_member(t.e.value())?;
            if !seen.insert(&t.label) {
                return Err(Error::Malformed(format!("duplicate term label `{}`", t.label)));
            }
        }
        Ok(())
    }
}

pub fn generate_evidence(
    witness: &SecretWitness,
    params: &GroupParams,
    contract_id: &str,
    created_at: u64,
) -> EvidenceRecord {
    EvidenceRecord {
        contract_id: contract_id.to_string(),
        e: params.exp_g(&witness.x),
        term_evidence: witness
            .term_witnesses
            .iter()
            .map(|(label, w)| TermEvidence { label: label.clone(), e: params.exp_g(w) })
            .collect(),
        params_id: params.id().to_string(),
        created_at,
    }
}

/// Outcome of re-deriving evidence from content the caller holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingReport {
    Holds,
    ParamsMismatch,
    TermSetMismatch,
    ContractMismatch,
    TermMismatch(String),
}

impl BindingReport {
    pub fn holds(&self) -> bool {
        matches!(self, BindingReport::Holds)
    }
}

pub fn verify_binding(
    content: &ContractContent,
    salt: &Salt,
    record: &EvidenceRecord,
    params: &GroupParams,
) -> BindingReport {
    if record.params_id != params.id() {
        return BindingReport::ParamsMismatch;
    }
    let witness = derive_witness(content, salt, params);
    let fresh = generate_evidence(&witness, params, &record.contract_id, record.created_at);
    if !fresh.labels().eq(record.labels()) {
        return BindingReport::TermSetMismatch;
    }
    if fresh.e != record.e {
        return BindingReport::ContractMismatch;
    }
    for (ours, theirs) in fresh.term_evidence.iter().zip(&record.term_evidence) {
        if ours.e != theirs.e {
            return BindingReport::TermMismatch(ours.label.clone());
        }
    }
    BindingReport::Holds
}
