use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::Error;

/// ISO 639-1/639-3 style language code, e.g. `de` or `cdo`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct LanguageId(String);

impl LanguageId {
    pub const MAX_LEN: usize = 8;

    pub fn new(code: &str) -> Result<Self, Error> {
        let valid = !code.is_empty()
            && code.len() <= Self::MAX_LEN
            && code
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if valid {
            Ok(LanguageId(code.to_string()))
        } else {
            Err(Error::InvalidLanguageId(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&self.0)
    }
}

impl FromStr for LanguageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageId::new(s)
    }
}

impl AsRef<str> for LanguageId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl<'de> Deserialize<'de> for LanguageId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        LanguageId::new(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_iso_codes() {
        for code in ["de", "cdo", "zh_yue", "x01", "abcdefgh"] {
            assert!(LanguageId::new(code).is_ok(), "{code}");
        }
    }

    #[test]
    fn rejects_bad_codes() {
        for code in ["", "DE", "de-AT", "abcdefghi", "é"] {
            assert!(LanguageId::new(code).is_err(), "{code}");
        }
    }

    #[test]
    fn orders_lexicographically() {
        let da = LanguageId::new("da").unwrap();
        let de = LanguageId::new("de").unwrap();
        assert!(da < de);
    }
}
