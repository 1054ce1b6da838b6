//! Propositions and finite worlds.
//!
//! A [`Proposition`] is a signed 1-ary atom `P(m)`: a polarity, a predicate
//! code and an object reference. The object is either a positive object
//! number, the all-objects marker (`*` in text, object 0 in frame terms) or
//! a nested frame, which is how the channel predicates `NT`, `Tr` and `Err`
//! talk about other propositions.
//!
//! A [`World`] is a finite situation: a domain of object numbers and a
//! consistent set of signed literals. Evaluation is explicit-literal: an
//! atom holds only if its exact signed literal is listed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroU64;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{decode_frame, DecodeError, Frame};
use crate::wire;

/// Maximum number of frame levels in a proposition (the outer frame counts).
pub const MAX_NESTING_DEPTH: usize = 8;

/// Maximum length of a predicate name in characters.
pub const MAX_NAME_LEN: usize = 64;

/// The channel predicates with a fixed meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Builtin {
    /// `NT(x)`: x is the code of a non-transferable proposition.
    #[serde(rename = "NT")]
    NonTransferable,
    /// `Tr(x)`: x is the code of a transferable proposition.
    #[serde(rename = "Tr")]
    Transferable,
    /// `Err(x)`: the channel has an error sending x.
    #[serde(rename = "Err")]
    ChannelError,
}

impl Builtin {
    pub fn as_str(self) -> &'static str {
        match self {
            Builtin::NonTransferable => "NT",
            Builtin::Transferable => "Tr",
            Builtin::ChannelError => "Err",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "NT" => Some(Builtin::NonTransferable),
            "Tr" => Some(Builtin::Transferable),
            "Err" => Some(Builtin::ChannelError),
            _ => None,
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A validated predicate name: 1..=64 characters from `[A-Za-z0-9-]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateName(String);

impl PredicateName {
    pub fn new(name: &str) -> Result<Self, ModelError> {
        if name.is_empty() {
            return Err(ModelError::EmptyName);
        }
        if name.len() > MAX_NAME_LEN {
            return Err(ModelError::NameTooLong(name.len()));
        }
        if let Some(c) = name
            .chars()
            .find(|c| !(c.is_ascii_alphanumeric() || *c == '-'))
        {
            return Err(ModelError::InvalidNameChar(c));
        }
        Ok(PredicateName(name.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Predicate code: either a printable name or a positive numeric index.
///
/// In text, index predicates are written `#n` (e.g. `#3(7)`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredicateCode {
    Name(PredicateName),
    Index(NonZeroU64),
}

impl PredicateCode {
    pub fn named(name: &str) -> Result<Self, ModelError> {
        PredicateName::new(name).map(PredicateCode::Name)
    }

    pub fn index(n: u64) -> Result<Self, ModelError> {
        NonZeroU64::new(n)
            .map(PredicateCode::Index)
            .ok_or(ModelError::ZeroIndex)
    }

    pub fn builtin(b: Builtin) -> Self {
        PredicateCode::Name(PredicateName(b.as_str().to_owned()))
    }

    /// Returns the builtin this code names, if any. Matching is case-sensitive.
    pub fn as_builtin(&self) -> Option<Builtin> {
        match self {
            PredicateCode::Name(n) => Builtin::from_name(n.as_str()),
            PredicateCode::Index(_) => None,
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.as_builtin().is_some()
    }
}

impl fmt::Display for PredicateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateCode::Name(n) => f.write_str(n.as_str()),
            PredicateCode::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// What a proposition is about.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObjectRef {
    /// A single object. Object 0 is not a number; it is [`ObjectRef::All`].
    Number(NonZeroU64),
    /// Every object of the domain.
    All,
    /// The code of another proposition.
    Nested(Box<Frame>),
}

impl ObjectRef {
    pub fn number(m: u64) -> Result<Self, ModelError> {
        NonZeroU64::new(m)
            .map(ObjectRef::Number)
            .ok_or(ModelError::ZeroObject)
    }
}

/// A signed 1-ary atom.
///
/// Construction checks that a nested object decodes to a valid proposition
/// and that nesting stays within [`MAX_NESTING_DEPTH`] frame levels, so every
/// value of this type can be encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Proposition {
    polarity: bool,
    predicate: PredicateCode,
    object: ObjectRef,
}

impl Proposition {
    pub fn new(
        polarity: bool,
        predicate: PredicateCode,
        object: ObjectRef,
    ) -> Result<Self, ModelError> {
        if let ObjectRef::Nested(frame) = &object {
            if frame.depth() + 1 > MAX_NESTING_DEPTH {
                return Err(ModelError::TooDeep(frame.depth() + 1));
            }
            decode_frame(frame).map_err(ModelError::NestedFrame)?;
        }
        Ok(Proposition {
            polarity,
            predicate,
            object,
        })
    }

    /// `P(m)` with positive polarity.
    pub fn atom(predicate: &str, m: u64) -> Result<Self, ModelError> {
        Proposition::new(
            true,
            PredicateCode::named(predicate)?,
            ObjectRef::number(m)?,
        )
    }

    /// `P(*)` with positive polarity.
    pub fn all(predicate: PredicateCode) -> Self {
        Proposition {
            polarity: true,
            predicate,
            object: ObjectRef::All,
        }
    }

    /// Assembled from parts already known to be valid (decoder output).
    pub(crate) fn from_parts(polarity: bool, predicate: PredicateCode, object: ObjectRef) -> Self {
        Proposition {
            polarity,
            predicate,
            object,
        }
    }

    pub fn polarity(&self) -> bool {
        self.polarity
    }

    pub fn predicate(&self) -> &PredicateCode {
        &self.predicate
    }

    pub fn object(&self) -> &ObjectRef {
        &self.object
    }

    /// Number of frame levels this proposition encodes to.
    pub fn depth(&self) -> usize {
        match &self.object {
            ObjectRef::Nested(f) => 1 + f.depth(),
            _ => 1,
        }
    }

    /// Non-builtin predicate over an object number or `*`.
    pub fn is_ground(&self) -> bool {
        !self.predicate.is_builtin() && matches!(self.object, ObjectRef::Number(_) | ObjectRef::All)
    }
}

/// Same predicate and object, flipped polarity.
pub fn negate(p: &Proposition) -> Proposition {
    Proposition {
        polarity: !p.polarity,
        ..p.clone()
    }
}

/// Logical equivalence of received and sent atoms: structural equality.
///
/// `P(*)` is its own atom and is not expanded into a conjunction.
pub fn equivalent(p: &Proposition, q: &Proposition) -> bool {
    p == q
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.polarity {
            f.write_str("~")?;
        }
        write!(f, "{}(", self.predicate)?;
        match &self.object {
            ObjectRef::Number(m) => write!(f, "{m}")?,
            ObjectRef::All => f.write_str("*")?,
            ObjectRef::Nested(frame) => {
                let body = wire::frame_to_body(frame).map_err(|_| fmt::Error)?;
                write!(f, "<{}>", hex::encode_upper(body))?;
            }
        }
        f.write_str(")")
    }
}

impl FromStr for Proposition {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_proposition(s)
    }
}

impl Serialize for Proposition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Proposition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_proposition(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("predicate name is empty")]
    EmptyName,
    #[error("predicate name is {0} characters long (max {MAX_NAME_LEN})")]
    NameTooLong(usize),
    #[error("invalid character {0:?} in predicate name")]
    InvalidNameChar(char),
    #[error("predicate index must be at least 1")]
    ZeroIndex,
    #[error("object 0 is not a number; use the all-objects marker")]
    ZeroObject,
    #[error("nesting depth {0} exceeds {MAX_NESTING_DEPTH}")]
    TooDeep(usize),
    #[error("nested frame is invalid: {0}")]
    NestedFrame(DecodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("{0}")]
    Model(ModelError),
    #[error("object 0 written literally; use '*' for all objects")]
    LiteralZero,
    #[error("object number does not fit in 64 bits")]
    NumberOverflow,
    #[error("invalid hex in nested frame")]
    BadHex,
    #[error("nested frame body: {0}")]
    NestedBody(wire::BodyError),
    #[error("trailing input")]
    Trailing,
}

/// Syntax or validation error at a byte offset of the input text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

fn perr(offset: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { offset, kind }
}

/// Parses `['~'] NAME '(' (NUMBER | '*' | '<' hex '>') ')'`.
///
/// `NAME` is either a predicate name or `#` followed by a positive index.
/// The hex form is a wire-format frame body. Leading and trailing
/// whitespace is ignored; offsets refer to the original text.
pub fn parse_proposition(text: &str) -> Result<Proposition, ParseError> {
    let start = text.len() - text.trim_start().len();
    let trimmed = text.trim();
    let bytes = text.as_bytes();
    let end = start + trimmed.len();
    let mut pos = start;

    let polarity = if bytes.get(pos) == Some(&b'~') {
        pos += 1;
        false
    } else {
        true
    };

    let predicate = if bytes.get(pos) == Some(&b'#') {
        pos += 1;
        let digits = take_while(bytes, pos, end, |b| b.is_ascii_digit());
        if digits == 0 {
            return Err(perr(
                pos,
                ParseErrorKind::Expected("predicate index digits"),
            ));
        }
        let n: u64 = text[pos..pos + digits]
            .parse()
            .map_err(|_| perr(pos, ParseErrorKind::NumberOverflow))?;
        let code = PredicateCode::index(n).map_err(|e| perr(pos, ParseErrorKind::Model(e)))?;
        pos += digits;
        code
    } else {
        let len = take_while(bytes, pos, end, |b| b.is_ascii_alphanumeric() || b == b'-');
        if len == 0 {
            return Err(perr(pos, ParseErrorKind::Expected("predicate name")));
        }
        let code = PredicateCode::named(&text[pos..pos + len])
            .map_err(|e| perr(pos, ParseErrorKind::Model(e)))?;
        pos += len;
        code
    };

    if bytes.get(pos) != Some(&b'(') || pos >= end {
        return Err(perr(pos, ParseErrorKind::Expected("'('")));
    }
    pos += 1;

    let object = match bytes.get(pos) {
        Some(b'*') => {
            pos += 1;
            ObjectRef::All
        }
        Some(b'<') => {
            pos += 1;
            let len = take_while(bytes, pos, end, |b| b.is_ascii_hexdigit());
            if bytes.get(pos + len) != Some(&b'>') {
                return Err(perr(pos + len, ParseErrorKind::Expected("'>'")));
            }
            let body = hex::decode(&text[pos..pos + len])
                .map_err(|_| perr(pos, ParseErrorKind::BadHex))?;
            let frame =
                wire::body_to_frame(&body).map_err(|e| perr(pos, ParseErrorKind::NestedBody(e)))?;
            let at = pos;
            pos += len + 1;
            let object = ObjectRef::Nested(Box::new(frame));
            return finish(bytes, pos, end, polarity, predicate, object, at);
        }
        Some(b) if b.is_ascii_digit() => {
            let len = take_while(bytes, pos, end, |b| b.is_ascii_digit());
            let m: u64 = text[pos..pos + len]
                .parse()
                .map_err(|_| perr(pos, ParseErrorKind::NumberOverflow))?;
            if m == 0 {
                return Err(perr(pos, ParseErrorKind::LiteralZero));
            }
            pos += len;
            ObjectRef::number(m).map_err(|e| perr(pos, ParseErrorKind::Model(e)))?
        }
        _ => {
            return Err(perr(
                pos,
                ParseErrorKind::Expected("object number, '*' or '<hex>'"),
            ))
        }
    };
    let at = pos;
    finish(bytes, pos, end, polarity, predicate, object, at)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    bytes: &[u8],
    mut pos: usize,
    end: usize,
    polarity: bool,
    predicate: PredicateCode,
    object: ObjectRef,
    object_at: usize,
) -> Result<Proposition, ParseError> {
    if pos >= end || bytes[pos] != b')' {
        return Err(perr(pos, ParseErrorKind::Expected("')'")));
    }
    pos += 1;
    if pos != end {
        return Err(perr(pos, ParseErrorKind::Trailing));
    }
    Proposition::new(polarity, predicate, object)
        .map_err(|e| perr(object_at, ParseErrorKind::Model(e)))
}

fn take_while(bytes: &[u8], from: usize, end: usize, pred: impl Fn(u8) -> bool) -> usize {
    bytes[from.min(end)..end]
        .iter()
        .take_while(|&&b| pred(b))
        .count()
}

/// A ground signed literal `(predicate, object, polarity)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub predicate: PredicateCode,
    pub object: NonZeroU64,
    pub polarity: bool,
}

impl Literal {
    pub fn to_proposition(&self) -> Proposition {
        Proposition::from_parts(
            self.polarity,
            self.predicate.clone(),
            ObjectRef::Number(self.object),
        )
    }
}

impl TryFrom<&Proposition> for Literal {
    type Error = WorldError;

    fn try_from(p: &Proposition) -> Result<Self, Self::Error> {
        if p.predicate.is_builtin() {
            return Err(WorldError::BuiltinLiteral(p.to_string()));
        }
        match p.object {
            ObjectRef::Number(m) => Ok(Literal {
                predicate: p.predicate.clone(),
                object: m,
                polarity: p.polarity,
            }),
            _ => Err(WorldError::NotGround(p.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("object 0 cannot be in the domain")]
    ZeroInDomain,
    #[error("literal {0} is listed with both polarities")]
    Inconsistent(String),
    #[error("literal {0} refers to an object outside the domain")]
    OutsideDomain(String),
    #[error("literal {0} uses a builtin predicate")]
    BuiltinLiteral(String),
    #[error("literal {0} is not about a single object")]
    NotGround(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing 'domain:' header")]
    MissingDomain,
}

/// A finite situation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct World {
    domain: BTreeSet<NonZeroU64>,
    literals: BTreeMap<(PredicateCode, NonZeroU64), bool>,
}

impl World {
    pub fn new<D, L>(domain: D, literals: L) -> Result<Self, WorldError>
    where
        D: IntoIterator<Item = u64>,
        L: IntoIterator<Item = Literal>,
    {
        let domain = domain
            .into_iter()
            .map(|m| NonZeroU64::new(m).ok_or(WorldError::ZeroInDomain))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let mut world = World {
            domain,
            literals: BTreeMap::new(),
        };
        for lit in literals {
            world.insert(lit)?;
        }
        Ok(world)
    }

    fn insert(&mut self, lit: Literal) -> Result<(), WorldError> {
        if lit.predicate.is_builtin() {
            return Err(WorldError::BuiltinLiteral(lit.to_proposition().to_string()));
        }
        if !self.domain.contains(&lit.object) {
            return Err(WorldError::OutsideDomain(lit.to_proposition().to_string()));
        }
        let key = (lit.predicate.clone(), lit.object);
        match self.literals.get(&key) {
            Some(&pol) if pol != lit.polarity => {
                Err(WorldError::Inconsistent(lit.to_proposition().to_string()))
            }
            _ => {
                self.literals.insert(key, lit.polarity);
                Ok(())
            }
        }
    }

    /// Parses the line-oriented world format:
    ///
    /// ```text
    /// # comment
    /// domain: 1 4 14
    /// Device-OK(1)
    /// ~AC-Fail(14)
    /// ```
    pub fn parse(text: &str) -> Result<Self, WorldError> {
        let mut domain: Option<Vec<u64>> = None;
        let mut literals = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("domain:") {
                if domain.is_some() {
                    return Err(WorldError::Syntax {
                        line: line_no,
                        message: "duplicate domain header".into(),
                    });
                }
                let objs = rest
                    .split_whitespace()
                    .map(|t| t.parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| WorldError::Syntax {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                domain = Some(objs);
                continue;
            }
            if domain.is_none() {
                return Err(WorldError::MissingDomain);
            }
            let p = parse_proposition(line).map_err(|e| WorldError::Syntax {
                line: line_no,
                message: e.to_string(),
            })?;
            literals.push(Literal::try_from(&p)?);
        }
        World::new(domain.ok_or(WorldError::MissingDomain)?, literals)
    }

    pub fn domain(&self) -> impl Iterator<Item = NonZeroU64> + '_ {
        self.domain.iter().copied()
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.literals.iter().map(|((p, m), &pol)| Literal {
            predicate: p.clone(),
            object: *m,
            polarity: pol,
        })
    }

    /// Predicates mentioned by at least one literal.
    pub fn predicates(&self) -> BTreeSet<PredicateCode> {
        self.literals.keys().map(|(p, _)| p.clone()).collect()
    }

    /// Both polarities of every listed predicate on every domain object.
    pub fn ground_corpus(&self) -> Vec<Proposition> {
        let mut out = Vec::new();
        for pred in self.predicates() {
            for &m in &self.domain {
                for pol in [true, false] {
                    out.push(Proposition::from_parts(
                        pol,
                        pred.clone(),
                        ObjectRef::Number(m),
                    ));
                }
            }
        }
        out
    }

    fn lookup(&self, pred: &PredicateCode, m: NonZeroU64) -> Option<bool> {
        self.literals.get(&(pred.clone(), m)).copied()
    }
}

/// Cuts a `#` comment. A `#` followed by a digit is an index predicate.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let at_boundary = i == 0 || bytes[i - 1].is_ascii_whitespace();
        let next_is_digit = bytes.get(i + 1).is_some_and(|c| c.is_ascii_digit());
        if b == b'#' && at_boundary && !next_is_digit {
            return &line[..i];
        }
    }
    line
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HoldsError {
    #[error("{0} is a channel predicate and has no world semantics")]
    Builtin(Builtin),
    #[error("nested-frame objects have no world semantics")]
    NestedObject,
}

/// Evaluates a ground atom in a world.
///
/// `P(m)` holds iff its signed literal is listed; `P(*)` holds iff `P(m)`
/// holds for every `m` in the domain, and `~P(*)` iff `~P(m)` does.
pub fn holds(w: &World, p: &Proposition) -> Result<bool, HoldsError> {
    if let Some(b) = p.predicate.as_builtin() {
        return Err(HoldsError::Builtin(b));
    }
    match &p.object {
        ObjectRef::Number(m) => Ok(w.lookup(&p.predicate, *m) == Some(p.polarity)),
        ObjectRef::All => Ok(w
            .domain
            .iter()
            .all(|&m| w.lookup(&p.predicate, m) == Some(p.polarity))),
        ObjectRef::Nested(_) => Err(HoldsError::NestedObject),
    }
}
