//! Semantic communication channels.
//!
//! Propositions `P(m)` are encoded into frames, carried over a channel made
//! of an encoder, a transmission system and a decoder, and checked for
//! transferability: whether what arrives is equivalent to what was sent.
//! On top of that model the crate builds the channel predicates `NT`, `Tr`
//! and `Err`, the diagonal frames they admit, the receiver-side case
//! analysis that exposes liar-style frames, and the two-way construction
//! between transferable channels and code-indexed truth predicates over
//! finite worlds.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: propositions, worlds, parsing and evaluation
//! - [`codec`]: proposition frames and their payload bit strings
//! - [`wire`]: self-delimiting byte framing with CRC and resynchronization
//! - [`channel`]: transmission systems, channels, transcripts
//! - [`transfer`]: transferability verdicts and the `NT`/`Tr` predicates
//! - [`diagonal`]: enumeration table, diagonal frames, self-reference analysis
//! - [`tarski`]: truth predicates from channels and decoders from truth predicates
//! - [`net`]: sending and receiving wire frames over TCP

pub mod channel;
pub mod codec;
pub mod diagonal;
pub mod model;
pub mod net;
pub mod tarski;
pub mod transfer;
pub mod wire;

pub use channel::{make_channel, verify_activeness, Channel, ChannelConfig, TransmissionSystem};
pub use codec::{decode_frame, encode_frame, payload_bits, BitString, Frame};
pub use model::{equivalent, holds, negate, parse_proposition, Proposition, World};
pub use transfer::{check_transferable, eval_nt, eval_tr, Verdict, VerdictKind};
