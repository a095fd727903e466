//! Finite binary strings, the universe of programs, inputs and outputs.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A finite (possibly empty) sequence of bits.
///
/// Ordering is length-lexicographic: shorter strings come first, strings of
/// equal length compare lexicographically with `0 < 1`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<bool>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("invalid bit character {0:?} (expected '0' or '1')")]
    BadChar(char),
    #[error("malformed prefix code: {0}")]
    MalformedPrefix(&'static str),
}

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    /// The string of length `len` holding the binary expansion of `value`
    /// (most significant bit first, truncated to the low `len` bits).
    pub fn from_u64(value: u64, len: usize) -> Self {
        BitString(
            (0..len)
                .rev()
                .map(|i| i < 64 && (value >> i) & 1 == 1)
                .collect(),
        )
    }

    /// Big-endian numeric value of the bits.
    pub fn value(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, b| (acc << 1) | *b as u64)
    }

    /// Position of this string in the length-lex enumeration `ε, 0, 1, 00, ...`.
    pub fn rank(&self) -> u64 {
        let mut r = (1u64 << self.len()) - 1;
        for (i, b) in self.0.iter().rev().enumerate() {
            if *b {
                r += 1 << i;
            }
        }
        r
    }

    /// Inverse of [`BitString::rank`].
    pub fn unrank(rank: u64) -> Self {
        let len = 63 - (rank + 1).leading_zeros() as usize;
        BitString::from_u64(rank + 1 - (1u64 << len), len)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn extend_bits(&mut self, bits: &[bool]) {
        self.0.extend_from_slice(bits);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        BitString(v)
    }

    pub fn slice(&self, from: usize, to: usize) -> BitString {
        BitString(self.0[from..to].to_vec())
    }

    pub fn suffix(&self, from: usize) -> BitString {
        BitString(self.0[from.min(self.len())..].to_vec())
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn clear(&mut self) {
        self.0.clear();
    }

    /// Self-delimiting code `0^{|p|} 1 p`.
    pub fn hat(&self) -> BitString {
        let mut v = vec![false; self.len()];
        v.push(true);
        v.extend_from_slice(&self.0);
        BitString(v)
    }

    /// Splits `0^n 1 w` into the first `n` bits of `w` and the remainder.
    pub fn split_hat(&self) -> Result<(BitString, BitString), BitsError> {
        let n = self
            .0
            .iter()
            .position(|b| *b)
            .ok_or(BitsError::MalformedPrefix("no terminating 1"))?;
        let start = n + 1;
        if self.len() < start + n {
            return Err(BitsError::MalformedPrefix(
                "payload shorter than announced length",
            ));
        }
        Ok((self.slice(start, start + n), self.suffix(start + n)))
    }

    /// All strings of length exactly `n`, in lexicographic order.
    pub fn all_of_len(n: usize) -> impl Iterator<Item = BitString> {
        assert!(n < 64, "length {n} too large to enumerate");
        (0..(1u64 << n)).map(move |v| BitString::from_u64(v, n))
    }

    /// All strings of length at most `n`, in length-lex order.
    pub fn all_up_to(n: usize) -> impl Iterator<Item = BitString> {
        (0..=n).flat_map(BitString::all_of_len)
    }

    /// Text form used in line-oriented files: the bits, or `-` for ε.
    pub fn token(&self) -> String {
        if self.is_empty() {
            "-".to_string()
        } else {
            self.to_string()
        }
    }

    pub fn parse_token(s: &str) -> Result<BitString, BitsError> {
        match s {
            "-" | "ε" | "e" => Ok(BitString::new()),
            _ => s.parse(),
        }
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("ε")
        } else {
            write!(f, "{self}")
        }
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BitString::parse_token(&s).map_err(serde::de::Error::custom)
    }
}

/// `x̂1 ... x̂(m-1) xm`; the empty tuple encodes as ε.
pub fn tuple_encode(args: &[BitString]) -> BitString {
    let mut out = BitString::new();
    if let Some((last, init)) = args.split_last() {
        for a in init {
            out.extend_from(&a.hat());
        }
        out.extend_from(last);
    }
    out
}

/// Inverse of [`tuple_encode`] for a fixed arity `m >= 1`.
pub fn tuple_decode(s: &BitString, m: usize) -> Result<Vec<BitString>, BitsError> {
    assert!(m >= 1, "arity must be positive");
    let mut args = Vec::with_capacity(m);
    let mut rest = s.clone();
    for _ in 1..m {
        let (a, r) = rest.split_hat()?;
        args.push(a);
        rest = r;
    }
    args.push(rest);
    Ok(args)
}

/// Shorthand for tests and fixtures; panics on a non-binary literal.
pub fn bits(s: &str) -> BitString {
    BitString::parse_token(s).expect("binary literal")
}
