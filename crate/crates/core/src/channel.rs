//! Channels: encoder, transmission system, decoder.
//!
//! The encoder and decoder are fixed to the frame codec plus the wire
//! framing; only the transmission system varies. Noise is applied to the
//! serialized wire bytes, so a damaged frame shows up as a scanner
//! diagnostic or a decode error rather than as a silently different
//! proposition (unless the damage happens to produce a valid frame).

use std::collections::HashMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_frame, encode_frame, BitString, DecodeError};
use crate::model::{parse_proposition, Proposition};
use crate::wire::{self, Diagnostic};

/// A bijective byte substitution table.
#[derive(Clone, PartialEq, Eq)]
pub struct ByteMap([u8; 256]);

impl ByteMap {
    pub fn new(table: [u8; 256]) -> Result<Self, ConfigError> {
        let mut seen = [false; 256];
        for (from, &to) in table.iter().enumerate() {
            if std::mem::replace(&mut seen[usize::from(to)], true) {
                return Err(ConfigError::NotBijective {
                    byte: to,
                    second_source: from as u8,
                });
            }
        }
        Ok(ByteMap(table))
    }

    /// Identity with the listed `(from, to)` replacements applied.
    pub fn from_pairs(pairs: &[(u8, u8)]) -> Result<Self, ConfigError> {
        let mut table: [u8; 256] = std::array::from_fn(|i| i as u8);
        for &(from, to) in pairs {
            table[usize::from(from)] = to;
        }
        ByteMap::new(table)
    }

    pub fn apply(&self, b: u8) -> u8 {
        self.0[usize::from(b)]
    }

    pub fn inverse(&self) -> ByteMap {
        let mut inv = [0u8; 256];
        for (from, &to) in self.0.iter().enumerate() {
            inv[usize::from(to)] = from as u8;
        }
        ByteMap(inv)
    }
}

impl fmt::Debug for ByteMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let moved = self
            .0
            .iter()
            .enumerate()
            .filter(|(i, &b)| *i as u8 != b)
            .count();
        write!(f, "ByteMap({moved} bytes moved)")
    }
}

/// The transmission system `TS`, acting on serialized wire bytes.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum TransmissionSystem {
    /// Identity.
    Perfect,
    /// Flips each bit independently with probability `p`. The flips for a
    /// given use are a pure function of `(seed, use index, input)`.
    BitFlip { p: f64, seed: u64 },
    /// Keeps the first `max_bits` bits; bits past the cut in the last kept
    /// byte are cleared.
    Truncate { max_bits: u64 },
    /// Maps every byte through a bijection.
    Substitute(ByteMap),
    /// Replaces every byte with 0x00. Not injective; never active.
    Zero,
}

impl TransmissionSystem {
    pub fn apply(&self, input: &[u8], use_index: u64) -> Vec<u8> {
        match self {
            TransmissionSystem::Perfect => input.to_vec(),
            TransmissionSystem::BitFlip { p, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(use_index);
                input
                    .iter()
                    .map(|&b| {
                        (0..8).fold(b, |acc, bit| {
                            if rng.gen_bool(*p) {
                                acc ^ (1 << bit)
                            } else {
                                acc
                            }
                        })
                    })
                    .collect()
            }
            TransmissionSystem::Truncate { max_bits } => {
                let full = usize::try_from(max_bits / 8).unwrap_or(usize::MAX);
                let rem = (max_bits % 8) as u32;
                let mut out: Vec<u8> = input.iter().take(full).copied().collect();
                if rem > 0 {
                    if let Some(&b) = input.get(full) {
                        out.push(b & (0xFFu8 << (8 - rem)));
                    }
                }
                out
            }
            TransmissionSystem::Substitute(map) => input.iter().map(|&b| map.apply(b)).collect(),
            TransmissionSystem::Zero => vec![0; input.len()],
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TransmissionSystem::Perfect => "perfect",
            TransmissionSystem::BitFlip { .. } => "bitflip",
            TransmissionSystem::Truncate { .. } => "truncate",
            TransmissionSystem::Substitute(_) => "substitute",
            TransmissionSystem::Zero => "zero",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            TransmissionSystem::BitFlip { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Injective on every input, without sampling.
    pub fn injective_by_construction(&self) -> bool {
        matches!(
            self,
            TransmissionSystem::Perfect | TransmissionSystem::Substitute(_)
        )
    }
}

/// Byte map as written in a config file: 256 values, or `[from, to]` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Pairs(Vec<(u8, u8)>),
    Table(Vec<u8>),
}

/// Channel configuration as read from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ChannelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown transmission system kind {0:?}")]
    UnknownKind(String),
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(String),
    #[error("{kind} needs parameter {param:?}")]
    Missing {
        kind: &'static str,
        param: &'static str,
    },
    #[error(
        "substitution map sends two bytes to 0x{byte:02X} (second from 0x{second_source:02X})"
    )]
    NotBijective { byte: u8, second_source: u8 },
    #[error("substitution table must have 256 entries, got {0}")]
    TableSize(usize),
    #[error("invalid channel config: {0}")]
    Json(String),
}

/// Builds a channel from its configuration; `Perfect` when no kind is given.
pub fn make_channel(config: &ChannelConfig) -> Result<Channel, ConfigError> {
    let kind = config.kind.as_deref().unwrap_or("perfect");
    let ts = match kind {
        "perfect" => TransmissionSystem::Perfect,
        "bitflip" => {
            let p = config.p.ok_or(ConfigError::Missing {
                kind: "bitflip",
                param: "p",
            })?;
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::BadProbability(p.to_string()));
            }
            TransmissionSystem::BitFlip {
                p,
                seed: config.seed.unwrap_or(0),
            }
        }
        "truncate" => TransmissionSystem::Truncate {
            max_bits: config.max_bits.ok_or(ConfigError::Missing {
                kind: "truncate",
                param: "max_bits",
            })?,
        },
        "substitute" => {
            let map = match config.map.as_ref().ok_or(ConfigError::Missing {
                kind: "substitute",
                param: "map",
            })? {
                MapSpec::Pairs(pairs) => ByteMap::from_pairs(pairs)?,
                MapSpec::Table(table) => {
                    let table: [u8; 256] = table
                        .as_slice()
                        .try_into()
                        .map_err(|_| ConfigError::TableSize(table.len()))?;
                    ByteMap::new(table)?
                }
            };
            TransmissionSystem::Substitute(map)
        }
        "zero" => TransmissionSystem::Zero,
        other => return Err(ConfigError::UnknownKind(other.to_owned())),
    };
    let id = config.id.clone().unwrap_or_else(|| kind.to_owned());
    Ok(Channel::new(id, ts))
}

/// Why a transmission did not produce a proposition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReceiveError {
    #[error("no frame recovered ({} diagnostics)", diagnostics.len())]
    NoFrame { diagnostics: Vec<Diagnostic> },
    #[error("frame does not decode: {0}")]
    Decode(DecodeError),
}

/// Decoder half: scans received bytes and decodes the first frame found.
pub fn receive(bytes: &[u8]) -> Result<Proposition, ReceiveError> {
    let (frames, diagnostics) = wire::wire_to_frames(bytes);
    let frame = frames
        .into_iter()
        .next()
        .ok_or(ReceiveError::NoFrame { diagnostics })?;
    decode_frame(&frame).map_err(ReceiveError::Decode)
}

/// Encoder half: the wire bytes of a proposition.
pub fn wire_bytes(p: &Proposition) -> Vec<u8> {
    // Valid propositions nest at most 8 levels with names of at most 64
    // bytes, far below the 65535-byte body limit.
    wire::frame_to_wire(&encode_frame(p)).expect("valid propositions always fit a wire frame")
}

/// An active-channel candidate: a labelled transmission system with a use counter.
#[derive(Debug, Clone)]
pub struct Channel {
    id: String,
    ts: TransmissionSystem,
    uses: u64,
}

impl Channel {
    pub fn new(id: impl Into<String>, ts: TransmissionSystem) -> Self {
        Channel {
            id: id.into(),
            ts,
            uses: 0,
        }
    }

    pub fn perfect() -> Self {
        Channel::new("perfect", TransmissionSystem::Perfect)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ts(&self) -> &TransmissionSystem {
        &self.ts
    }

    /// Number of transmissions so far; the next one uses this index.
    pub fn uses(&self) -> u64 {
        self.uses
    }

    /// Rewinds the use counter, making the next transmissions repeat earlier ones.
    pub fn reset(&mut self) {
        self.uses = 0;
    }

    /// Passes raw bytes through `TS`, consuming one use. Returns the output
    /// and the use index it was produced with.
    pub fn pass(&mut self, bytes: &[u8]) -> (Vec<u8>, u64) {
        let n = self.uses;
        self.uses += 1;
        (self.ts.apply(bytes, n), n)
    }

    /// `Decode(TS(Encode(p)))`, with its transcript.
    pub fn transmit(&mut self, p: &Proposition) -> Transmission {
        let sent = wire_bytes(p);
        let (received, n) = self.pass(&sent);
        let result = receive(&received);
        let transcript = Transcript {
            sent: p.to_string(),
            sent_bits: BitString::from_bytes(&sent).to_string(),
            recv_bits: BitString::from_bytes(&received).to_string(),
            recv: match &result {
                Ok(q) => Received::Proposition(q.to_string()),
                Err(e) => Received::Failed {
                    error: e.to_string(),
                },
            },
            ts: self.ts.kind().to_owned(),
            seed: self.ts.seed(),
            n,
        };
        Transmission { result, transcript }
    }
}

#[derive(Debug, Clone)]
pub struct Transmission {
    pub result: Result<Proposition, ReceiveError>,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Received {
    Proposition(String),
    Failed { error: String },
}

/// One transmission, as appended to a JSON Lines transcript.
///
/// `sent_bits` and `recv_bits` are the wire bytes before and after `TS`;
/// `n` is the channel use index, which together with `ts` and `seed`
/// determines `recv_bits`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub sent: String,
    pub sent_bits: String,
    pub recv_bits: String,
    pub recv: Received,
    pub ts: String,
    pub seed: Option<u64>,
    pub n: u64,
}

impl Transcript {
    /// Re-runs this record's transmission through `ts` at use index `n` and
    /// checks that the same bits come out.
    pub fn replays_under(&self, ts: &TransmissionSystem) -> bool {
        let Ok(p) = parse_proposition(&self.sent) else {
            return false;
        };
        let sent = wire_bytes(&p);
        if BitString::from_bytes(&sent).to_string() != self.sent_bits {
            return false;
        }
        BitString::from_bytes(&ts.apply(&sent, self.n)).to_string() == self.recv_bits
    }
}

/// Append-only JSON Lines transcript file.
pub struct TranscriptLog {
    path: std::path::PathBuf,
}

impl TranscriptLog {
    pub fn new(path: impl Into<std::path::PathBuf>) -> Self {
        TranscriptLog { path: path.into() }
    }

    pub fn append(&self, t: &Transcript) -> io::Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(t).map_err(io::Error::other)?;
        writeln!(file, "{line}")
    }

    pub fn read(path: &Path) -> io::Result<Vec<Transcript>> {
        let file = std::fs::File::open(path)?;
        io::BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| {
                l.and_then(|l| {
                    serde_json::from_str(&l)
                        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
                })
            })
            .collect()
    }
}

/// Result of checking that `TS` keeps distinct inputs distinct.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivenessReport {
    pub injective: bool,
    /// True when the answer follows from the kind of `TS` alone.
    pub analytic: bool,
    /// Distinct corpus entries pushed through `TS`.
    pub checked: usize,
    /// Two distinct propositions whose wire bytes `TS` maps to the same output.
    pub collision: Option<(Proposition, Proposition)>,
}

/// Checks whether `ts` is one-to-one on the wire bytes of `corpus`, at use index 0.
pub fn verify_activeness(ts: &TransmissionSystem, corpus: &[Proposition]) -> ActivenessReport {
    if ts.injective_by_construction() {
        return ActivenessReport {
            injective: true,
            analytic: true,
            checked: 0,
            collision: None,
        };
    }
    let mut seen_inputs = std::collections::HashSet::new();
    let mut outputs: HashMap<Vec<u8>, &Proposition> = HashMap::new();
    let mut checked = 0;
    for p in corpus {
        if !seen_inputs.insert(p) {
            continue;
        }
        checked += 1;
        let out = ts.apply(&wire_bytes(p), 0);
        if let Some(&first) = outputs.get(&out) {
            return ActivenessReport {
                injective: false,
                analytic: false,
                checked,
                collision: Some((first.clone(), p.clone())),
            };
        }
        outputs.insert(out, p);
    }
    ActivenessReport {
        injective: true,
        analytic: false,
        checked,
        collision: None,
    }
}
