//! Canonical hex encoding for big integers: lowercase, big-endian, no
//! leading zeros, `"0"` for zero.

use num_bigint::BigUint;
use num_traits::Num;

use crate::error::{Error, Result};

pub fn encode(n: &BigUint) -> String {
    format!("{n:x}")
}

/// Parses canonical hex only. Uppercase digits, leading zeros, signs and
/// empty strings are rejected so that every integer has exactly one encoding.
pub fn decode(s: &str) -> Result<BigUint> {
    if s.is_empty() {
        return Err(Error::Decode("empty hex integer".into()));
    }
    if !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(Error::Decode(format!("non-canonical hex digits in `{s}`")));
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(Error::Decode(format!("leading zero in hex integer `{s}`")));
    }
    BigUint::from_str_radix(s, 16).map_err(|e| Error::Decode(e.to_string()))
}

pub(crate) mod serde_hex {
    use num_bigint::BigUint;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::encode(n))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        super::decode(&s).map_err(de::Error::custom)
    }
}

/// Fixed-width byte strings (digests, session tokens) as lowercase hex.
pub(crate) mod serde_bytes_hex {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(b: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(de::Error::custom("uppercase hex digits"));
        }
        let v = hex::decode(&s).map_err(de::Error::custom)?;
        v.try_into().map_err(|_| de::Error::custom(format!("expected {N} bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(encode(&BigUint::from(0u8)), "0");
        assert_eq!(encode(&BigUint::from(255u32)), "ff");
        assert_eq!(decode("ff").unwrap(), BigUint::from(255u32));
        assert_eq!(decode("0").unwrap(), BigUint::from(0u8));
    }

    #[test]
    fn rejects_non_canonical() {
        for bad in ["", "FF", "0ff", "00", "-1", "+1", "g", " 1"] {
            assert!(decode(bad).is_err(), "{bad:?} accepted");
        }
    }
}
