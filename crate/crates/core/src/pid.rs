//! Handle-style persistent identifiers (`prefix/suffix`).
//!
//! Both segments are restricted to `[A-Za-z0-9._-]+`, which keeps every PID
//! usable verbatim inside a URL path. Suffixes are lowercased on parse so
//! that comparison after canonicalization is exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Prefix used when none is configured.
pub const DEFAULT_PREFIX: &str = "fdom.local";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PidError {
    #[error("invalid PID prefix {0:?}")]
    InvalidPrefix(String),
    #[error("malformed PID {0:?}")]
    MalformedPid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pid {
    prefix: String,
    suffix: String,
}

fn is_segment(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// Checks a naming-authority prefix against the segment grammar.
pub fn validate_prefix(prefix: &str) -> Result<(), PidError> {
    if is_segment(prefix) {
        Ok(())
    } else {
        Err(PidError::InvalidPrefix(prefix.to_owned()))
    }
}

impl Pid {
    /// Builds a PID from two segments, canonicalizing the suffix.
    pub fn new(prefix: &str, suffix: &str) -> Result<Self, PidError> {
        if !is_segment(prefix) || !is_segment(suffix) {
            return Err(PidError::MalformedPid(format!("{prefix}/{suffix}")));
        }
        Ok(Self {
            prefix: prefix.to_owned(),
            suffix: suffix.to_ascii_lowercase(),
        })
    }

    /// Mints a PID under `prefix` with a random 128-bit suffix rendered as
    /// 32 lowercase hex digits.
    pub fn mint(prefix: &str) -> Result<Self, PidError> {
        validate_prefix(prefix)?;
        let raw: u128 = rand::random();
        Ok(Self {
            prefix: prefix.to_owned(),
            suffix: format!("{raw:032x}"),
        })
    }

    /// Parses `prefix/suffix`, splitting on the first `/`.
    pub fn parse(text: &str) -> Result<Self, PidError> {
        let (prefix, suffix) = text
            .split_once('/')
            .ok_or_else(|| PidError::MalformedPid(text.to_owned()))?;
        Self::new(prefix, suffix).map_err(|_| PidError::MalformedPid(text.to_owned()))
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.prefix, self.suffix)
    }
}

impl FromStr for Pid {
    type Err = PidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Pid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Pid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Pid::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    #[test]
    fn mint_shape() {
        let pid = Pid::mint(DEFAULT_PREFIX).unwrap();
        assert_eq!(pid.prefix(), "fdom.local");
        assert_eq!(pid.suffix().len(), 32);
        assert!(pid
            .suffix()
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)));
    }

    #[test]
    fn mint_rejects_bad_prefix() {
        assert_eq!(Pid::mint(""), Err(PidError::InvalidPrefix(String::new())));
        assert!(Pid::mint("a/b").is_err());
        assert!(Pid::mint("sp ace").is_err());
    }

    #[test]
    fn ten_thousand_mints_are_distinct() {
        let minted: HashSet<Pid> = (0..10_000)
            .map(|_| Pid::mint(DEFAULT_PREFIX).unwrap())
            .collect();
        assert_eq!(minted.len(), 10_000);
    }

    #[test]
    fn parse_basic() {
        let pid = Pid::parse("fdom.local/abc123").unwrap();
        assert_eq!(pid.prefix(), "fdom.local");
        assert_eq!(pid.suffix(), "abc123");
        assert!(matches!(Pid::parse("no-slash"), Err(PidError::MalformedPid(_))));
    }

    #[test]
    fn parse_rejects_bad_segments() {
        for bad in ["/x", "x/", "/", "a/b/c", "a b/c", "a/é", "a/b?", ""] {
            assert!(Pid::parse(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn suffix_is_canonicalized_to_lowercase() {
        let pid = Pid::parse("Org.X/ABCdef").unwrap();
        assert_eq!(pid.to_string(), "Org.X/abcdef");
        assert_eq!(pid, Pid::parse("Org.X/abcDEF").unwrap());
        assert_ne!(pid, Pid::parse("org.x/abcdef").unwrap());
    }

    #[test]
    fn round_trip_minted() {
        for _ in 0..1_000 {
            let pid = Pid::mint("fdom.local").unwrap();
            assert_eq!(Pid::parse(&pid.to_string()).unwrap(), pid);
        }
    }

    #[test]
    fn serde_uses_canonical_string() {
        let pid = Pid::parse("p/q").unwrap();
        assert_eq!(serde_json::to_string(&pid).unwrap(), "\"p/q\"");
        let back: Pid = serde_json::from_str("\"p/q\"").unwrap();
        assert_eq!(back, pid);
        assert!(serde_json::from_str::<Pid>("\"pq\"").is_err());
    }

    fn grammar_ok(s: &str) -> bool {
        match s.split_once('/') {
            Some((a, b)) => is_segment(a) && is_segment(b),
            None => false,
        }
    }

    proptest! {
        #[test]
        fn parse_format_round_trip(
            prefix in "[A-Za-z0-9._-]{1,12}",
            suffix in "[a-z0-9._-]{1,40}",
        ) {
            let pid = Pid::new(&prefix, &suffix).unwrap();
            prop_assert_eq!(Pid::parse(&pid.to_string()).unwrap(), pid);
        }

        #[test]
        fn parse_accepts_exactly_the_grammar(text in "[A-Za-z0-9._/ #%?é-]{0,16}") {
            prop_assert_eq!(Pid::parse(&text).is_ok(), grammar_ok(&text));
        }
    }
}
