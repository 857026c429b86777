//! Append-only, hash-chained store of evidence records.
//!
//! Each block hashes the canonical JSON of `(index, payload, prev_hash,
//! timestamp)` with SHA-256, and embeds its predecessor's hash. The file form
//! is one canonical-JSON block per line. Editing any byte of a stored block
//! is detected on load; a single-node store cannot prevent edits.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::error::{Error, Result};
use crate::evidence::EvidenceRecord;

pub const HASH_LEN: usize = 32;
pub const GENESIS_PREV_HASH: [u8; HASH_LEN] = [0; HASH_LEN];

pub trait Clock {
    /// Seconds since the Unix epoch.
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

/// Always reports the same instant; used for reproducible output.
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerBlock {
    index: u64,
    timestamp: u64,
    #[serde(with = "crate::hexint::serde_bytes_hex")]
    prev_hash: [u8; HASH_LEN],
    payload: Vec<EvidenceRecord>,
    #[serde(with = "crate::hexint::serde_bytes_hex")]
    block_hash: [u8; HASH_LEN],
}

#[derive(Serialize)]
struct HashedFields<'a> {
    index: u64,
    timestamp: u64,
    #[serde(with = "crate::hexint::serde_bytes_hex")]
    prev_hash: &'a [u8; HASH_LEN],
    payload: &'a [EvidenceRecord],
}

impl LedgerBlock {
    fn seal(index: u64, timestamp: u64, prev_hash: [u8; HASH_LEN], payload: Vec<EvidenceRecord>) -> Self {
        let mut block = LedgerBlock { index, timestamp, prev_hash, payload, block_hash: [0; HASH_LEN] };
        block.block_hash = block.compute_hash();
        block
    }

    pub fn compute_hash(&self) -> [u8; HASH_LEN] {
        let fields = HashedFields {
            index: self.index,
            timestamp: self.timestamp,
            prev_hash: &self.prev_hash,
            payload: &self.payload,
        };
        Sha256::digest(canonical::to_vec(&fields)).into()
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn prev_hash(&self) -> &[u8; HASH_LEN] {
        &self.prev_hash
    }

    pub fn block_hash(&self) -> &[u8; HASH_LEN] {
        &self.block_hash
    }

    pub fn payload(&self) -> &[EvidenceRecord] {
        &self.payload
    }

    pub fn to_line(&self) -> Vec<u8> {
        canonical::to_vec(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRef {
    pub block: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainReport {
    Valid { blocks: usize },
    Invalid { block: usize, reason: String },
}

impl ChainReport {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainReport::Valid { .. })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    blocks: Vec<LedgerBlock>,
    index: HashMap<String, BlockRef>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[LedgerBlock] {
        &self.blocks
    }

    pub fn contract_ids(&self) -> impl Iterator<Item = &str> {
        self.blocks.iter().flat_map(|b| b.payload.iter().map(|r| r.contract_id.as_str()))
    }

    /// Appends one block holding `record`.
    pub fn append_evidence(&mut self, record: EvidenceRecord, clock: &dyn Clock) -> Result<BlockRef> {
        if self.index.contains_key(&record.contract_id) {
            return Err(Error::Duplicate(record.contract_id));
        }
        let prev = self.blocks.last().map_or(GENESIS_PREV_HASH, |b| b.block_hash);
        let index = self.blocks.len();
        let id = record.contract_id.clone();
        self.blocks.push(LedgerBlock::seal(index as u64, clock.now(), prev, vec![record]));
        let at = BlockRef { block: index, offset: 0 };
        self.index.insert(id, at);
        Ok(at)
    }

    pub fn get_evidence(&self, contract_id: &str) -> Result<&EvidenceRecord> {
        let at = self.index.get(contract_id).ok_or_else(|| Error::NotFound(contract_id.to_string()))?;
        Ok(&self.blocks[at.block].payload[at.offset])
    }

    pub fn locate(&self, contract_id: &str) -> Option<BlockRef> {
        self.index.get(contract_id).copied()
    }

    pub fn verify_chain(&self) -> ChainReport {
        verify_blocks(&self.blocks)
    }

    /// One canonical-JSON block per line, each line newline-terminated.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend_from_slice(&b.to_line());
            out.push(b'\n');
        }
        out
    }

    /// Parses and fully verifies a serialized ledger. Every line must be in
    /// canonical form, every hash must recompute, every link must match and
    /// contract ids must be unique. Errors name the offending block; a
    /// block owns its line including the terminating newline.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut rest = bytes;
        while !rest.is_empty() {
            let block = blocks.len();
            let Some(end) = rest.iter().position(|&b| b == b'\n') else {
                return Err(Error::Integrity { block, reason: "unterminated block line".into() });
            };
            let parsed: LedgerBlock = canonical::from_slice_strict(&rest[..end])
                .map_err(|e| Error::Integrity { block, reason: e.to_string() })?;
            blocks.push(parsed);
            rest = &rest[end + 1..];
        }
        if let ChainReport::Invalid { block, reason } = verify_blocks(&blocks) {
            return Err(Error::Integrity { block, reason });
        }
        let mut index = HashMap::new();
        for (bi, b) in blocks.iter().enumerate() {
            for (offset, r) in b.payload.iter().enumerate() {
                if index.insert(r.contract_id.clone(), BlockRef { block: bi, offset }).is_some() {
                    return Err(Error::Integrity {
                        block: bi,
                        reason: format!("contract `{}` registered twice", r.contract_id),
                    });
                }
            }
        }
        Ok(Ledger { blocks, index })
    }

    /// Loads a ledger file; a missing file is an I/O error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Loads a ledger file, treating a missing file as an empty ledger.
    pub fn load_or_empty(path: impl AsRef<Path>) -> Result<Self> {
        match fs::read(path.as_ref()) {
            Ok(bytes) => Self::from_bytes(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes atomically through a sibling temporary file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn verify_blocks(blocks: &[LedgerBlock]) -> ChainReport {
    let mut prev = GENESIS_PREV_HASH;
    for (i, b) in blocks.iter().enumerate() {
        let invalid = |reason: &str| ChainReport::Invalid { block: i, reason: reason.to_string() };
        if b.index != i as u64 {
            return invalid("index out of sequence");
        }
        if b.prev_hash != prev {
            return invalid("prev_hash does not match the preceding block");
        }
        if b.compute_hash() != b.block_hash {
            return invalid("stored hash does not match block contents");
        }
        prev = b.block_hash;
    }
    ChainReport::Valid { blocks: blocks.len() }
}
