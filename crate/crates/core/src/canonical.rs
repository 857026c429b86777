//! Canonical JSON: object keys sorted bytewise, no insignificant whitespace.
//!
//! `serde_json::Map` is a `BTreeMap` unless the `preserve_order` feature is
//! enabled, so routing through `Value` yields sorted keys at every depth.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn to_vec<T: Serialize>(value: &T) -> Vec<u8> {
    let v = serde_json::to_value(value).expect("in-memory types always serialize");
    serde_json::to_vec(&v).expect("Value always serializes")
}

pub fn to_string<T: Serialize>(value: &T) -> String {
    String::from_utf8(to_vec(value)).expect("serde_json emits UTF-8")
}

/// Parses `bytes` and insists they are already in canonical form, so that
/// re-encoding reproduces them exactly.
pub fn from_slice_strict<T: Serialize + DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let value: T = serde_json::from_slice(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if to_vec(&value) != bytes {
        return Err(Error::Decode("input is not in canonical form".into()));
    }
    Ok(value)
}
