use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseLocationError;

/// One source line of a program, identified by logical file name and line.
///
/// The canonical text form is `file:line`. Ordering is lexicographic on
/// `(file, line)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

impl Location {
    pub fn new(file: impl Into<String>, line: u32) -> Self {
        Location {
            file: file.into(),
            line,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl FromStr for Location {
    type Err = ParseLocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseLocationError(s.to_string());
        let (file, line) = s.rsplit_once(':').ok_or_else(err)?;
        if file.is_empty() || file.chars().any(char::is_whitespace) {
            return Err(err());
        }
        if line.is_empty() || !line.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let line: u32 = line.parse().map_err(|_| err())?;
        if line == 0 {
            return Err(err());
        }
        Ok(Location::new(file, line))
    }
}

impl Serialize for Location {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Location {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_canonical_form() {
        let loc: Location = "cxxfilt.c:11".parse().unwrap();
        assert_eq!(loc, Location::new("cxxfilt.c", 11));
        assert_eq!(loc.to_string(), "cxxfilt.c:11");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "a.c", "a.c:", ":3", "a.c:0", "a c:3", "a.c:-1", "a.c: 3", "a.c:3x"] {
            assert!(bad.parse::<Location>().is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn orders_by_file_then_line() {
        let mut v: Vec<Location> = ["b.c:1", "a.c:10", "a.c:9"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        v.sort();
        let s: Vec<String> = v.iter().map(ToString::to_string).collect();
        assert_eq!(s, ["a.c:9", "a.c:10", "b.c:1"]);
    }
}
