// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk formats shared with external activation exporters.
//!
//! - [`ldim`]: the LDIM binary activation stream.
//! - [`meta`]: line-delimited JSON sentence metadata.

pub mod ldim;
pub mod meta;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use ldim::{
    read_corpus, read_corpus_with, write_corpus, ActivationCorpus, ActivationFileHeader, Dtype, ReadOptions,
    SentenceActivationRecord, DEFAULT_ALLOC_CAP, MAGIC, VERSION,
};
pub use meta::{read_meta, write_meta, SentenceMeta};

/// Free-form language tag of at most eight ASCII bytes (`"en"`, `"ja"`,
/// `"toyA"`). Stored zero-padded in LDIM records.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LangCode([u8; 8]);

impl LangCode {
    pub const LEN: usize = 8;

    pub fn new(tag: &str) -> Result<Self> {
        let bytes = tag.as_bytes();
        if bytes.is_empty() || bytes.len() > Self::LEN {
            return Err(Error::Validation(format!("language tag {tag:?} must be 1 to 8 bytes")));
        }
        if !bytes.iter().all(|b| b.is_ascii_graphic()) {
            return Err(Error::Validation(format!(
                "language tag {tag:?} must be printable ASCII"
            )));
        }
        let mut raw = [0u8; 8];
        raw[..bytes.len()].copy_from_slice(bytes);
        Ok(Self(raw))
    }

    /// Decode the zero-padded wire form. Returns `None` unless the tag is a
    /// nonempty run of printable ASCII followed only by zero bytes.
    pub fn from_padded(raw: [u8; 8]) -> Option<Self> {
        let len = raw.iter().position(|&b| b == 0).unwrap_or(Self::LEN);
        if len == 0 || !raw[..len].iter().all(|b| b.is_ascii_graphic()) || raw[len..].iter().any(|&b| b != 0) {
            return None;
        }
        Some(Self(raw))
    }

    pub fn as_padded(&self) -> &[u8; 8] {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        let len = self.0.iter().position(|&b| b == 0).unwrap_or(Self::LEN);
        // Constructors only admit ASCII.
        std::str::from_utf8(&self.0[..len]).unwrap_or("")
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LangCode({:?})", self.as_str())
    }
}

impl FromStr for LangCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl Serialize for LangCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LangCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::new(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lang_code_padding() {
        let code = LangCode::new("ja").unwrap();
        assert_eq!(code.as_padded(), b"ja\0\0\0\0\0\0");
        assert_eq!(code.to_string(), "ja");
        assert_eq!(LangCode::from_padded(*code.as_padded()), Some(code));
        assert_eq!(LangCode::new("toyA").unwrap().as_str(), "toyA");
    }

    #[test]
    fn lang_code_rejects_bad_tags() {
        assert!(LangCode::new("").is_err());
        assert!(LangCode::new("toolongtag").is_err());
        assert!(LangCode::new("a b").is_err());
        assert!(LangCode::from_padded(*b"\0\0\0\0\0\0\0\0").is_none());
        assert!(LangCode::from_padded(*b"en\0x\0\0\0\0").is_none());
    }
}
