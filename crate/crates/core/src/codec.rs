//! Proposition frames.
//!
//! A frame is the triple `[Polarity, Code(P), Code(m)]`. The predicate code
//! is either the character bytes of the name or the binary form of the
//! predicate index; the object code is the binary form of the object number,
//! the all-objects marker, or another frame.
//!
//! [`payload_bits`] renders the bare concatenation of the three codes, e.g.
//! `1|0100111101001110|1110000` for `ON(112)`. That string is not
//! self-delimiting; the [`wire`](crate::wire) module adds the framing.

use std::fmt;
use std::num::NonZeroU64;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{
    ObjectRef, PredicateCode, PredicateName, Proposition, MAX_NAME_LEN, MAX_NESTING_DEPTH,
};
use crate::wire;

/// Predicate code as carried in a frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PredicateField {
    /// Character bytes of a predicate name.
    Name(Vec<u8>),
    /// Minimal big-endian bytes of a predicate index.
    Index(Vec<u8>),
}

/// Object code as carried in a frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObjectField {
    /// Minimal big-endian bytes of a nonzero object number.
    Number(Vec<u8>),
    All,
    Nested(Box<Frame>),
}

/// The encoded form of a proposition.
///
/// Fields are raw codes; a frame built by hand may be malformed, which
/// [`decode_frame`] reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub polarity: bool,
    pub predicate: PredicateField,
    pub object: ObjectField,
}

impl Frame {
    /// Number of frame levels, counting this one.
    pub fn depth(&self) -> usize {
        match &self.object {
            ObjectField::Nested(inner) => 1 + inner.depth(),
            _ => 1,
        }
    }

    /// The bracketed form used in enumeration tables, e.g. `[1, NT, [1, P, 1]]`.
    pub fn symbolic(&self) -> String {
        let pred = match &self.predicate {
            PredicateField::Name(bytes) => String::from_utf8_lossy(bytes).into_owned(),
            PredicateField::Index(bytes) => format!("P_{}", be_value(bytes)),
        };
        let obj = match &self.object {
            ObjectField::Number(bytes) => be_value(bytes).to_string(),
            ObjectField::All => "0".to_string(),
            ObjectField::Nested(inner) => inner.symbolic(),
        };
        format!("[{}, {}, {}]", u8::from(self.polarity), pred, obj)
    }
}

/// Triple rendering, e.g. `(1,4F4E,112)`: polarity, predicate code in hex
/// (or `#n` for an index), object number in decimal (`0` for all objects).
impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},", u8::from(self.polarity))?;
        match &self.predicate {
            PredicateField::Name(bytes) => write!(f, "{},", hex::encode_upper(bytes))?,
            PredicateField::Index(bytes) => write!(f, "#{},", be_value(bytes))?,
        }
        match &self.object {
            ObjectField::Number(bytes) => write!(f, "{})", be_value(bytes)),
            ObjectField::All => f.write_str("0)"),
            ObjectField::Nested(inner) => write!(f, "{inner})"),
        }
    }
}

/// Serialized as the uppercase hex of the wire body.
impl Serialize for Frame {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let body = wire::frame_to_body(self).map_err(serde::ser::Error::custom)?;
        serializer.serialize_str(&hex::encode_upper(body))
    }
}

/// Minimal big-endian bytes of a nonzero value.
pub(crate) fn minimal_be(n: u64) -> Vec<u8> {
    let bytes = n.to_be_bytes();
    let skip = bytes.iter().take_while(|&&b| b == 0).count();
    bytes[skip..].to_vec()
}

fn be_value(bytes: &[u8]) -> u128 {
    bytes
        .iter()
        .fold(0u128, |acc, &b| (acc << 8) | u128::from(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("predicate name is empty")]
    EmptyName,
    #[error("predicate name is {0} bytes long")]
    NameTooLong(usize),
    #[error("byte 0x{0:02X} is not allowed in a predicate name")]
    InvalidNameByte(u8),
    #[error("predicate index is zero or has leading zero bytes")]
    NonMinimalIndex,
    #[error("predicate index wider than 64 bits")]
    IndexTooWide,
    #[error("object number is zero or has leading zero bytes")]
    NonMinimalNumber,
    #[error("object number wider than 64 bits")]
    NumberTooWide,
    #[error("frame nesting depth {0} exceeds {MAX_NESTING_DEPTH}")]
    DepthExceeded(usize),
}

/// Encodes a proposition into its frame. Total on valid propositions.
pub fn encode_frame(p: &Proposition) -> Frame {
    let predicate = match p.predicate() {
        PredicateCode::Name(name) => PredicateField::Name(name.as_str().as_bytes().to_vec()),
        PredicateCode::Index(n) => PredicateField::Index(minimal_be(n.get())),
    };
    let object = match p.object() {
        ObjectRef::Number(m) => ObjectField::Number(minimal_be(m.get())),
        ObjectRef::All => ObjectField::All,
        ObjectRef::Nested(inner) => ObjectField::Nested(inner.clone()),
    };
    Frame {
        polarity: p.polarity(),
        predicate,
        object,
    }
}

/// Exact inverse of [`encode_frame`]; rejects frames no proposition encodes to.
pub fn decode_frame(f: &Frame) -> Result<Proposition, DecodeError> {
    let depth = f.depth();
    if depth > MAX_NESTING_DEPTH {
        return Err(DecodeError::DepthExceeded(depth));
    }
    decode_level(f)
}

fn decode_level(f: &Frame) -> Result<Proposition, DecodeError> {
    let predicate = match &f.predicate {
        PredicateField::Name(bytes) => {
            if bytes.is_empty() {
                return Err(DecodeError::EmptyName);
            }
            if bytes.len() > MAX_NAME_LEN {
                return Err(DecodeError::NameTooLong(bytes.len()));
            }
            if let Some(&b) = bytes
                .iter()
                .find(|b| !(b.is_ascii_alphanumeric() || **b == b'-'))
            {
                return Err(DecodeError::InvalidNameByte(b));
            }
            let text = std::str::from_utf8(bytes).expect("ascii checked above");
            PredicateCode::Name(PredicateName::new(text).expect("validated above"))
        }
        PredicateField::Index(bytes) => {
            PredicateCode::Index(decode_nonzero(bytes).map_err(|wide| {
                if wide {
                    DecodeError::IndexTooWide
                } else {
                    DecodeError::NonMinimalIndex
                }
            })?)
        }
    };
    let object = match &f.object {
        ObjectField::Number(bytes) => ObjectRef::Number(decode_nonzero(bytes).map_err(|wide| {
            if wide {
                DecodeError::NumberTooWide
            } else {
                DecodeError::NonMinimalNumber
            }
        })?),
        ObjectField::All => ObjectRef::All,
        ObjectField::Nested(inner) => {
            decode_level(inner)?;
            ObjectRef::Nested(inner.clone())
        }
    };
    Ok(Proposition::from_parts(f.polarity, predicate, object))
}

/// `Err(true)` when wider than 8 bytes, `Err(false)` when zero or padded.
fn decode_nonzero(bytes: &[u8]) -> Result<NonZeroU64, bool> {
    if bytes.len() > 8 {
        return Err(true);
    }
    if bytes.first().is_none_or(|&b| b == 0) {
        return Err(false);
    }
    let value = bytes.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b));
    NonZeroU64::new(value).ok_or(false)
}

/// An ordered bit sequence, rendered as `'0'`/`'1'` characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        BitString(Vec::new())
    }

    /// Bits of `bytes`, MSB first within each byte.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut out = BitString::new();
        out.push_bytes(bytes);
        out
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            for shift in (0..8).rev() {
                self.0.push((b >> shift) & 1 == 1);
            }
        }
    }

    /// Binary form of `n` without leading zeros (`n > 0`).
    pub fn push_minimal(&mut self, n: u64) {
        let width = 64 - n.leading_zeros();
        for shift in (0..width).rev() {
            self.0.push((n >> shift) & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
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
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid bit character {0:?}")]
pub struct BitParseError(pub char);

impl FromStr for BitString {
    type Err = BitParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitParseError(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Polarity bit, predicate bits, object bits, concatenated.
///
/// Name predicates contribute their bytes MSB-first; index predicates and
/// object numbers their minimal binary form; the all-objects marker is a
/// single `0`; nested frames their own payload bits.
pub fn payload_bits(f: &Frame) -> BitString {
    let mut bits = BitString::new();
    bits.push(f.polarity);
    match &f.predicate {
        PredicateField::Name(bytes) => bits.push_bytes(bytes),
        PredicateField::Index(bytes) => push_minimal_bytes(&mut bits, bytes),
    }
    match &f.object {
        ObjectField::Number(bytes) => push_minimal_bytes(&mut bits, bytes),
        ObjectField::All => bits.push(false),
        ObjectField::Nested(inner) => bits.extend(&payload_bits(inner)),
    }
    bits
}

fn push_minimal_bytes(bits: &mut BitString, bytes: &[u8]) {
    let mut all = BitString::from_bytes(bytes);
    let lead = all.0.iter().take_while(|b| !**b).count();
    if lead == all.0.len() {
        // Zero has no minimal form; keep a single 0 so the field is visible.
        bits.push(false);
        return;
    }
    all.0.drain(..lead);
    bits.extend(&all);
}
