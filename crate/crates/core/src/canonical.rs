//! Canonical JSON encoding.
//!
//! Object keys are emitted in sorted order, there is no insignificant
//! whitespace, and every timestamp goes through [`crate::clock::Timestamp`]'s
//! fixed format. Two equal values always encode to the same bytes.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Encodes `value` canonically.
///
/// Routing through `serde_json::Value` sorts struct fields as well as map
/// keys, since `Value`'s object map is ordered.
pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let tree = serde_json::to_value(value).expect("model types always serialize");
    serde_json::to_vec(&tree).expect("json values always serialize")
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    String::from_utf8(to_bytes(value)).expect("serde_json emits utf-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
