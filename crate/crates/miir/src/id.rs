//! Entity identifiers with natural (alphanumeric-run) ordering.

use serde::{Deserialize, Serialize};
use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fmt;

/// Identifier of a network entity (bus or transmission line).
///
/// Ordering splits the string into alternating alphabetic and numeric runs so
/// that `T2 < T10` and `G1 < G2 < G10`. Ties between deterministic algorithms
/// are broken by this order everywhere in the crate.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(s: impl Into<String>) -> Self {
        EntityId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

impl Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialOrd for EntityId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EntityId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

/// Compare two strings run-by-run: numeric runs compare as integers,
/// other runs compare bytewise. Falls back to a full string compare so the
/// order stays total even for inputs like `T01` vs `T1`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let mut ia = a.as_bytes();
    let mut ib = b.as_bytes();
    loop {
        match (ia.first(), ib.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(&ca), Some(&cb)) => {
                if ca.is_ascii_digit() && cb.is_ascii_digit() {
                    let (na, ra) = split_digits(ia);
                    let (nb, rb) = split_digits(ib);
                    match na.cmp(&nb) {
                        Ordering::Equal => {
                            ia = ra;
                            ib = rb;
                        }
                        ord => return ord,
                    }
                } else {
                    match ca.cmp(&cb) {
                        Ordering::Equal => {
                            ia = &ia[1..];
                            ib = &ib[1..];
                        }
                        ord => return ord,
                    }
                }
            }
        }
    }
}

fn split_digits(s: &[u8]) -> (u128, &[u8]) {
    let end = s.iter().position(|c| !c.is_ascii_digit()).unwrap_or(s.len());
    let mut v: u128 = 0;
    for &c in &s[..end] {
        v = v.saturating_mul(10).saturating_add((c - b'0') as u128);
    }
    (v, &s[end..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_runs_compare_as_integers() {
        assert!(EntityId::from("T2") < EntityId::from("T10"));
        assert!(EntityId::from("G1") < EntityId::from("G2"));
        assert!(EntityId::from("G2") < EntityId::from("G10"));
        assert!(EntityId::from("L1") < EntityId::from("N1"));
    }

    #[test]
    fn order_is_total_on_padded_numbers() {
        let mut v = vec![
            EntityId::from("T01"),
            EntityId::from("T1"),
            EntityId::from("T1"),
        ];
        v.sort();
        assert_eq!(v[0], EntityId::from("T01"));
    }
}
