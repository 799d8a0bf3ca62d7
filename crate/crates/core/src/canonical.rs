//! Canonical JSON bytes and SHA-256 digests.
//!
//! Every digest in the harness is computed over the bytes produced here:
//!
//! - object keys sorted by code point, strings NFC-normalized
//! - integers without leading zeros; integral floats below 1e21 render as integers
//! - other numbers in shortest round-trip decimal form, never exponent notation
//! - no insignificant whitespace
//!
//! Non-finite numbers are rejected. Callers that need to carry NaN or
//! infinities store them as the tagged strings `"NaN"`, `"Infinity"` and
//! `"-Infinity"` (see [`tagged_float`]).

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{Map, Number, Value};
use sha2::{Digest as _, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// A tree of maps, lists, strings, numbers, booleans and null.
pub type Document = Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonicalizationError {
    #[error("non-finite number at {path}")]
    NonFinite { path: String },
    #[error("keys collide after NFC normalization at {path}: {key:?}")]
    DuplicateKey { path: String, key: String },
    #[error("invalid JSON: {0}")]
    Parse(String),
}

/// Lowercase-hex SHA-256 digest.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    /// Digest over the concatenation of `parts`.
    pub fn of_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        Digest(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return None;
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }

    /// First eight bytes as an integer, for seed derivation.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().expect("slice of 8"))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl serde::Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom("expected 64 lowercase hex characters"))
    }
}

/// Canonical bytes of a document.
pub fn canonicalize(doc: &Document) -> Result<Vec<u8>, CanonicalizationError> {
    let mut out = Vec::with_capacity(128);
    write_value(doc, &mut out, &mut String::from("$"))?;
    Ok(out)
}

/// Canonical bytes as a `String`. The output is always valid UTF-8.
pub fn canonical_string(doc: &Document) -> Result<String, CanonicalizationError> {
    Ok(String::from_utf8(canonicalize(doc)?).expect("canonical output is UTF-8"))
}

/// Parse JSON text and canonicalize it.
pub fn canonicalize_str(text: &str) -> Result<Vec<u8>, CanonicalizationError> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| CanonicalizationError::Parse(e.to_string()))?;
    canonicalize(&v)
}

/// SHA-256 of the canonical bytes.
pub fn digest(doc: &Document) -> Result<Digest, CanonicalizationError> {
    Ok(Digest::of(&canonicalize(doc)?))
}

/// Serialize any value through serde and canonicalize the result.
pub fn canonical_bytes_of<T: serde::Serialize>(
    value: &T,
) -> Result<Vec<u8>, CanonicalizationError> {
    let v = serde_json::to_value(value).map_err(|e| CanonicalizationError::Parse(e.to_string()))?;
    canonicalize(&v)
}

/// JSON number for a finite float, or `NonFinite`.
pub fn number(x: f64) -> Result<Value, CanonicalizationError> {
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CanonicalizationError::NonFinite { path: "$".into() })
}

/// JSON number for finite floats, tagged string otherwise.
pub fn tagged_float(x: f64) -> Value {
    if x.is_nan() {
        Value::String("NaN".into())
    } else if x == f64::INFINITY {
        Value::String("Infinity".into())
    } else if x == f64::NEG_INFINITY {
        Value::String("-Infinity".into())
    } else {
        Value::Number(Number::from_f64(x).expect("finite"))
    }
}

/// The canonical text of a single number.
pub fn format_number(n: &Number) -> Result<String, CanonicalizationError> {
    if let Some(u) = n.as_u64() {
        return Ok(u.to_string());
    }
    if let Some(i) = n.as_i64() {
        return Ok(i.to_string());
    }
    let x = n
        .as_f64()
        .ok_or_else(|| CanonicalizationError::NonFinite { path: "$".into() })?;
    format_f64(x).ok_or_else(|| CanonicalizationError::NonFinite { path: "$".into() })
}

pub(crate) fn format_f64(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some("0".into());
    }
    if x.fract() == 0.0 && x.abs() < 1e21 {
        return Some(format!("{x:.0}"));
    }
    // Rust's Display for f64 is the shortest representation that round-trips.
    Some(format!("{x}"))
}

/// Structural normal form: what `parse(canonicalize(doc))` yields.
pub fn normalize(doc: &Document) -> Result<Document, CanonicalizationError> {
    let bytes = canonicalize(doc)?;
    serde_json::from_slice(&bytes).map_err(|e| CanonicalizationError::Parse(e.to_string()))
}

fn write_value(
    v: &Value,
    out: &mut Vec<u8>,
    path: &mut String,
) -> Result<(), CanonicalizationError> {
    match v {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            let s = format_number(n)
                .map_err(|_| CanonicalizationError::NonFinite { path: path.clone() })?;
            out.extend_from_slice(s.as_bytes());
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                let len = path.len();
                path.push_str(&format!("[{i}]"));
                write_value(item, out, path)?;
                path.truncate(len);
            }
            out.push(b']');
        }
        Value::Object(map) => write_object(map, out, path)?,
    }
    Ok(())
}

fn write_object(
    map: &Map<String, Value>,
    out: &mut Vec<u8>,
    path: &mut String,
) -> Result<(), CanonicalizationError> {
    // NFC keys, then byte order (UTF-8 byte order equals code point order).
    let mut sorted: BTreeMap<String, &Value> = BTreeMap::new();
    for (k, v) in map {
        let nk = nfc(k);
        if sorted.insert(nk.clone(), v).is_some() {
            return Err(CanonicalizationError::DuplicateKey {
                path: path.clone(),
                key: nk,
            });
        }
    }
    out.push(b'{');
    for (i, (k, v)) in sorted.iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        write_string(k, out);
        out.push(b':');
        let len = path.len();
        path.push('.');
        path.push_str(k);
        write_value(v, out, path)?;
        path.truncate(len);
    }
    out.push(b'}');
    Ok(())
}

fn nfc(s: &str) -> String {
    if s.is_ascii() || unicode_normalization::is_nfc(s) {
        s.to_string()
    } else {
        s.nfc().collect()
    }
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    let quoted = serde_json::to_string(&nfc(s)).expect("string serialization cannot fail");
    out.extend_from_slice(quoted.as_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn s(v: Value) -> String {
        canonical_string(&v).unwrap()
    }

    #[test]
    fn sorts_keys() {
        assert_eq!(s(json!({"b": 1, "a": 2})), r#"{"a":2,"b":1}"#);
        assert_eq!(s(json!({})), "{}");
        assert_eq!(s(json!({"z": {"y": [1, {"b": null, "a": true}]}})),
            r#"{"z":{"y":[1,{"a":true,"b":null}]}}"#);
    }

    #[test]
    fn repeated_serialization_is_identical() {
        let v = json!({"x": [1.5, "é"]});
        let a = canonicalize(&v).unwrap();
        let b = canonicalize(&v).unwrap();
        assert_eq!(a, b);
        assert_eq!(digest(&v).unwrap(), digest(&v).unwrap());
        assert_eq!(String::from_utf8(a).unwrap(), "{\"x\":[1.5,\"é\"]}");
    }

    #[test]
    fn nfc_normalizes_strings_and_keys() {
        let decomposed = "e\u{301}";
        let composed = "\u{e9}";
        assert_eq!(s(json!(decomposed)), s(json!(composed)));
        let mut m = Map::new();
        m.insert(decomposed.into(), json!(1));
        assert_eq!(s(Value::Object(m)), format!("{{\"{composed}\":1}}"));
    }

    #[test]
    fn colliding_keys_rejected() {
        let mut m = Map::new();
        m.insert("e\u{301}".into(), json!(1));
        m.insert("\u{e9}".into(), json!(2));
        assert!(matches!(
            canonicalize(&Value::Object(m)),
            Err(CanonicalizationError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn numbers() {
        assert_eq!(s(json!(1.0)), "1");
        assert_eq!(s(json!(-0.0)), "0");
        assert_eq!(s(json!(100)), "100");
        assert_eq!(s(json!(0.1)), "0.1");
        assert_eq!(s(json!(1e-7)), "0.0000001");
        assert_eq!(s(json!(2.5e20)), "250000000000000000000");
        assert_eq!(s(json!(-17)), "-17");
        assert_eq!(canonicalize_str("1e2").unwrap(), b"100");
        assert_eq!(canonicalize_str("[0.30000000000000004]").unwrap(), b"[0.30000000000000004]");
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(number(f64::NAN), Err(CanonicalizationError::NonFinite { .. })));
        assert!(number(f64::INFINITY).is_err());
        assert_eq!(tagged_float(f64::NAN), json!("NaN"));
        assert_eq!(tagged_float(f64::NEG_INFINITY), json!("-Infinity"));
        assert_eq!(tagged_float(2.0), json!(2.0));
        assert!(canonicalize_str("NaN").is_err());
    }

    #[test]
    fn no_whitespace() {
        let text = "{ \"a\" : [ 1 , 2 ] ,\n \"b\" : \"x y\" }";
        assert_eq!(canonicalize_str(text).unwrap(), br#"{"a":[1,2],"b":"x y"}"#);
    }

    #[test]
    fn digest_hex_roundtrip() {
        let d = Digest::of(b"abc");
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(Digest::from_hex(&d.to_hex()), Some(d));
        assert_eq!(Digest::from_hex(&d.to_hex().to_uppercase()), None);
    }

    fn arb_doc() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(|i| json!(i)),
            (-1e12f64..1e12).prop_map(|f| json!(f)),
            "[a-zA-Zé\u{301} _-]{0,8}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z]{1,4}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn idempotent(doc in arb_doc()) {
            let once = canonicalize(&doc).unwrap();
            let reparsed: Value = serde_json::from_slice(&once).unwrap();
            prop_assert_eq!(canonicalize(&reparsed).unwrap(), once);
        }
    }
}
