//! Canonical JSON and SHA-256 digests.
//!
//! Canonical form is key-sorted, minimal-whitespace JSON in UTF-8. It is
//! the only serialization that is ever hashed.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest as _, Sha256};

/// Lowercase hex SHA-256.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub String);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Self(hex::encode(Sha256::digest(bytes)))
    }

    pub fn of_str(s: &str) -> Self {
        Self::of(s.as_bytes())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Recursively rebuilds every object with keys in byte order.
pub fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn to_canonical_value<T: Serialize>(v: &T) -> serde_json::Result<Value> {
    Ok(sort_keys(serde_json::to_value(v)?))
}

pub fn to_canonical_string<T: Serialize>(v: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_canonical_value(v)?)
}

pub fn canonical_value_string(v: &Value) -> String {
    serde_json::to_string(&sort_keys(v.clone())).expect("json value always serializes")
}

/// Digest of the canonical serialization of `v`.
pub fn digest_of<T: Serialize>(v: &T) -> serde_json::Result<Digest> {
    Ok(Digest::of_str(&to_canonical_string(v)?))
}
