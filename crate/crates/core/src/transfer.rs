//! Transferability verdicts and the channel predicates `NT` / `Tr`.
//!
//! A proposition is transferable over a channel iff what the channel
//! delivers is equivalent to it. `NT` and `Tr` are evaluated by running the
//! channel, so each evaluation consumes one channel use.

use serde::Serialize;

use crate::channel::{Channel, ReceiveError, Transcript};
use crate::codec::{decode_frame, DecodeError, Frame};
use crate::model::{equivalent, Proposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VerdictKind {
    Transferable,
    NonTransferable,
    /// Only produced by self-reference analysis.
    Paradoxical,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Transferable => "Transferable",
            VerdictKind::NonTransferable => "NonTransferable",
            VerdictKind::Paradoxical => "Paradoxical",
        }
    }
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub sent: Proposition,
    pub received: Result<Proposition, ReceiveError>,
    pub evidence: Transcript,
    /// Case-analysis trace; empty for plain transferability checks.
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    verdict: VerdictKind,
    sent: &'a Proposition,
    recv: serde_json::Value,
    trace: &'a [String],
}

impl Verdict {
    /// `{verdict, sent, recv, trace}`.
    pub fn to_json(&self) -> serde_json::Value {
        let recv = match &self.received {
            Ok(p) => serde_json::Value::String(p.to_string()),
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        serde_json::to_value(VerdictJson {
            verdict: self.kind,
            sent: &self.sent,
            recv,
            trace: &self.notes,
        })
        .expect("verdict fields serialize")
    }
}

/// Transmits `p` and compares what arrives.
pub fn check_transferable(c: &mut Channel, p: &Proposition) -> Verdict {
    let t = c.transmit(p);
    let kind = match &t.result {
        Ok(q) if equivalent(q, p) => VerdictKind::Transferable,
        _ => VerdictKind::NonTransferable,
    };
    Verdict {
        kind,
        sent: p.clone(),
        received: t.result,
        evidence: t.transcript,
        notes: Vec::new(),
    }
}

/// `NT(f)`: the proposition coded by `f` does not survive the channel.
pub fn eval_nt(c: &mut Channel, f: &Frame) -> Result<bool, DecodeError> {
    let p = decode_frame(f)?;
    Ok(check_transferable(c, &p).kind != VerdictKind::Transferable)
}

/// `Tr(f)`: the complement of [`eval_nt`].
pub fn eval_tr(c: &mut Channel, f: &Frame) -> Result<bool, DecodeError> {
    eval_nt(c, f).map(|nt| !nt)
}
