//! Diagonal constructions over the channel predicates.
//!
//! The enumeration table lists every predicate `P_1 .. P_len` (with `NT` and
//! `Tr` among them) against objects `1 ..= max_n` in both polarities, plus
//! the derived rows
//!
//! ```text
//! B(n)  = [1, NT, [1, P_n, n]]
//! B'(n) = [0, Tr, [0, P_n, n]]
//! ```
//!
//! Taking `n = k`, the index of `NT` itself, gives the diagonal frame
//! `F* = [1, NT, [1, NT, k]]`: the row `P_k(k)` and the frame
//! `NT(F_{P_k(k)})` are the same bytes.
//!
//! [`analyze_self_reference`] runs the receiver's two-case analysis on a
//! self-referential frame (`NT(*)`, `Err(*)`, or a diagonal row) over a
//! concrete channel and reports which case, if any, survives.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::channel::Channel;
use crate::codec::{
    decode_frame, encode_frame, minimal_be, DecodeError, Frame, ObjectField, PredicateField,
};
use crate::model::{equivalent, negate, Builtin, ObjectRef, PredicateCode, Proposition};
use crate::transfer::{Verdict, VerdictKind};
use crate::wire;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("no predicates given")]
    Empty,
    #[error("max_n must be at least 1")]
    ZeroMaxN,
    #[error("predicate {0} listed twice")]
    Duplicate(String),
    #[error("predicate index {n} outside 1..={len}")]
    IndexOutOfRange { n: usize, len: usize },
    #[error("{0} is not an enumerated predicate")]
    MissingBuiltin(Builtin),
}

/// One cell of the table: row `P_n` or `~P_n`, column `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub index: usize,
    pub object: u64,
    pub polarity: bool,
    pub proposition: Proposition,
}

/// The enumeration of all propositions up to object `max_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationTable {
    predicates: Vec<PredicateCode>,
    max_n: u64,
    /// Number of leading entries the caller supplied before NT/Tr were appended.
    user_len: usize,
}

/// Builds the table over `preds`, appending `NT` and `Tr` when absent.
pub fn build_enumeration(
    preds: &[PredicateCode],
    max_n: u64,
) -> Result<EnumerationTable, EnumerationError> {
    let mut table = EnumerationTable::exact(preds, max_n)?;
    for b in [Builtin::NonTransferable, Builtin::Transferable] {
        let code = PredicateCode::builtin(b);
        if !table.predicates.contains(&code) {
            table.predicates.push(code);
        }
    }
    Ok(table)
}

impl EnumerationTable {
    /// The table over exactly `preds`; `NT`/`Tr` are not added.
    pub fn exact(preds: &[PredicateCode], max_n: u64) -> Result<Self, EnumerationError> {
        if preds.is_empty() {
            return Err(EnumerationError::Empty);
        }
        if max_n == 0 {
            return Err(EnumerationError::ZeroMaxN);
        }
        let mut seen = HashSet::new();
        for p in preds {
            if !seen.insert(p) {
                return Err(EnumerationError::Duplicate(p.to_string()));
            }
        }
        Ok(EnumerationTable {
            predicates: preds.to_vec(),
            max_n,
            user_len: preds.len(),
        })
    }

    pub fn predicates(&self) -> &[PredicateCode] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn max_n(&self) -> u64 {
        self.max_n
    }

    /// `P_n`, 1-based.
    pub fn predicate(&self, n: usize) -> Result<&PredicateCode, EnumerationError> {
        n.checked_sub(1)
            .and_then(|i| self.predicates.get(i))
            .ok_or(EnumerationError::IndexOutOfRange { n, len: self.len() })
    }

    /// 1-based index of a builtin, if enumerated.
    pub fn index_of(&self, b: Builtin) -> Option<usize> {
        let code = PredicateCode::builtin(b);
        self.predicates
            .iter()
            .position(|p| *p == code)
            .map(|i| i + 1)
    }

    /// `k`: the index of `NT`.
    pub fn k_nt(&self) -> Option<usize> {
        self.index_of(Builtin::NonTransferable)
    }

    /// `k'`: the index of `Tr`.
    pub fn k_tr(&self) -> Option<usize> {
        self.index_of(Builtin::Transferable)
    }

    /// Every cell, row by row: `P_1(1..)`, `~P_1(1..)`, `P_2(1..)`, ...
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let max_n = self.max_n;
        self.predicates
            .iter()
            .enumerate()
            .flat_map(move |(i, pred)| {
                [true, false].into_iter().flat_map(move |polarity| {
                    (1..=max_n).map(move |m| Cell {
                        index: i + 1,
                        object: m,
                        polarity,
                        proposition: Proposition::new(
                            polarity,
                            pred.clone(),
                            ObjectRef::number(m).expect("m >= 1"),
                        )
                        .expect("number objects are always valid"),
                    })
                })
            })
    }

    /// Cells of the predicates the caller supplied, excluding appended `NT`/`Tr`
    /// and any `NT`/`Tr` the caller listed.
    pub fn base_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let user_len = self.user_len;
        self.cells().filter(move |c| {
            c.index <= user_len
                && !matches!(
                    self.predicates[c.index - 1].as_builtin(),
                    Some(Builtin::NonTransferable | Builtin::Transferable)
                )
        })
    }

    /// `(n, B(n), B'(n))` for every predicate index.
    pub fn derived_rows(&self) -> impl Iterator<Item = (usize, Frame, Frame)> + '_ {
        (1..=self.len()).map(move |n| {
            (
                n,
                build_b(self, n).expect("n in range"),
                build_bprime(self, n, BPrimeForm::Tr).expect("n in range"),
            )
        })
    }
}

/// `P_n(n)` with the given polarity.
fn diagonal_cell(
    t: &EnumerationTable,
    n: usize,
    polarity: bool,
) -> Result<Proposition, EnumerationError> {
    let pred = t.predicate(n)?.clone();
    Ok(
        Proposition::new(polarity, pred, ObjectRef::number(n as u64).expect("n >= 1"))
            .expect("number objects are always valid"),
    )
}

fn about(polarity: bool, b: Builtin, inner: &Proposition) -> Frame {
    let p = Proposition::new(
        polarity,
        PredicateCode::builtin(b),
        ObjectRef::Nested(Box::new(encode_frame(inner))),
    )
    .expect("depth 2 is within limits");
    encode_frame(&p)
}

/// `B(n) = [1, NT, [1, P_n, n]]`.
pub fn build_b(t: &EnumerationTable, n: usize) -> Result<Frame, EnumerationError> {
    let inner = diagonal_cell(t, n, true)?;
    Ok(about(true, Builtin::NonTransferable, &inner))
}

/// Which right-hand side to use for `B'(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BPrimeForm {
    /// `[0, Tr, [0, P_n, n]]`, the table's form.
    Tr,
    /// `[0, NT, [1, P_n, n]]`, the alternative written alongside it. Not
    /// byte-equal to the `Tr` form.
    Nt,
}

/// `B'(n)` in the requested form.
pub fn build_bprime(
    t: &EnumerationTable,
    n: usize,
    form: BPrimeForm,
) -> Result<Frame, EnumerationError> {
    Ok(match form {
        BPrimeForm::Tr => about(false, Builtin::Transferable, &diagonal_cell(t, n, false)?),
        BPrimeForm::Nt => about(false, Builtin::NonTransferable, &diagonal_cell(t, n, true)?),
    })
}

/// The diagonal frames at `n = k` and `n = k'`, each built twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixedPointReport {
    pub k: usize,
    pub k_prime: usize,
    /// `B(k)` from the table: the row `P_k(k)`.
    pub f_star: Frame,
    /// `NT(F_{P_k(k)})` assembled field by field.
    pub f_star_rhs: Frame,
    /// `B'(k')` from the table: the row `~P_k'(k')`.
    pub f_star_prime: Frame,
    /// `~Tr(F_{~P_k'(k')})` assembled field by field.
    pub f_star_prime_rhs: Frame,
    pub f_star_wire: String,
    pub f_star_rhs_wire: String,
    pub f_star_prime_wire: String,
    pub f_star_prime_rhs_wire: String,
    /// Both sides of the `NT` diagonal serialize to the same bytes.
    pub identical: bool,
    /// Both sides of the `Tr` diagonal serialize to the same bytes.
    pub prime_identical: bool,
}

/// Raw frame assembly, bypassing propositions and the table.
fn assemble(
    polarity: bool,
    name: &str,
    inner_polarity: bool,
    inner_pred: &PredicateCode,
    m: u64,
) -> Frame {
    let inner_field = match inner_pred {
        PredicateCode::Name(n) => PredicateField::Name(n.as_str().as_bytes().to_vec()),
        PredicateCode::Index(i) => PredicateField::Index(minimal_be(i.get())),
    };
    Frame {
        polarity,
        predicate: PredicateField::Name(name.as_bytes().to_vec()),
        object: ObjectField::Nested(Box::new(Frame {
            polarity: inner_polarity,
            predicate: inner_field,
            object: ObjectField::Number(minimal_be(m)),
        })),
    }
}

fn wire_hex(f: &Frame) -> String {
    hex::encode_upper(wire::frame_to_wire(f).expect("diagonal frames are small"))
}

/// Selects `n = k` (index of `NT`) and `n = k'` (index of `Tr`).
pub fn find_fixed_point(t: &EnumerationTable) -> Result<FixedPointReport, EnumerationError> {
    let k = t
        .k_nt()
        .ok_or(EnumerationError::MissingBuiltin(Builtin::NonTransferable))?;
    let k_prime = t
        .k_tr()
        .ok_or(EnumerationError::MissingBuiltin(Builtin::Transferable))?;

    let f_star = build_b(t, k)?;
    let f_star_prime = build_bprime(t, k_prime, BPrimeForm::Tr)?;
    let f_star_rhs = assemble(true, "NT", true, t.predicate(k)?, k as u64);
    let f_star_prime_rhs = assemble(false, "Tr", false, t.predicate(k_prime)?, k_prime as u64);

    let f_star_wire = wire_hex(&f_star);
    let f_star_rhs_wire = wire_hex(&f_star_rhs);
    let f_star_prime_wire = wire_hex(&f_star_prime);
    let f_star_prime_rhs_wire = wire_hex(&f_star_prime_rhs);
    Ok(FixedPointReport {
        k,
        k_prime,
        identical: f_star_wire == f_star_rhs_wire,
        prime_identical: f_star_prime_wire == f_star_prime_rhs_wire,
        f_star,
        f_star_rhs,
        f_star_prime,
        f_star_prime_rhs,
        f_star_wire,
        f_star_rhs_wire,
        f_star_prime_wire,
        f_star_prime_rhs_wire,
    })
}

/// `NT(*)`: every code is the code of a non-transferable proposition.
pub fn build_nt_all() -> Frame {
    encode_frame(&Proposition::all(PredicateCode::builtin(
        Builtin::NonTransferable,
    )))
}

/// `Err(*)`: the channel has an error on every string.
pub fn build_err_all() -> Frame {
    encode_frame(&Proposition::all(PredicateCode::builtin(
        Builtin::ChannelError,
    )))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("frame does not decode: {0}")]
    Undecodable(DecodeError),
    #[error("{0} does not use NT, Tr or Err")]
    NotBuiltin(String),
    #[error(
        "{0} is not self-referential (object must be '*' or a diagonal row of the same predicate)"
    )]
    NotSelfReferential(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// The frame arrived and its content is taken as true.
    #[serde(rename = "i")]
    ContentTrue,
    /// The frame did not arrive intact.
    #[serde(rename = "ii")]
    NotTransferred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchOutcome {
    Consistent,
    Contradiction,
    /// The assumption cannot even be entertained given what was observed.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub branch: Branch,
    pub assumption: String,
    pub consequence: String,
    pub contradiction: bool,
}

/// Receiver-side analysis of a self-referential frame.
#[derive(Debug, Clone)]
pub struct ParadoxReport {
    pub frame: Frame,
    pub proposition: Proposition,
    pub builtin: Builtin,
    /// `E`: the received proposition is equivalent to the sent one.
    pub fidelity: bool,
    /// The received wire bytes equal the sent ones.
    pub byte_fidelity: bool,
    /// What the content, taken as true, says about the builtin applied to
    /// the frame's own code.
    pub asserted_self_instance: bool,
    /// The builtin applied to the frame's own code, by running the channel.
    pub observed_self_instance: bool,
    /// For a nested object: the builtin evaluated on the nested frame.
    pub target_eval: Option<bool>,
    pub content_true: BranchOutcome,
    pub not_transferred: BranchOutcome,
    pub case_trace: Vec<TraceStep>,
    pub verdict: Verdict,
}

#[derive(Serialize)]
struct ParadoxJson<'a> {
    proposition: &'a Proposition,
    frame: &'a Frame,
    builtin: Builtin,
    fidelity: bool,
    byte_fidelity: bool,
    asserted_self_instance: bool,
    observed_self_instance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_eval: Option<bool>,
    branches: serde_json::Value,
    case_trace: &'a [TraceStep],
    verdict: serde_json::Value,
}

impl ParadoxReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ParadoxJson {
            proposition: &self.proposition,
            frame: &self.frame,
            builtin: self.builtin,
            fidelity: self.fidelity,
            byte_fidelity: self.byte_fidelity,
            asserted_self_instance: self.asserted_self_instance,
            observed_self_instance: self.observed_self_instance,
            target_eval: self.target_eval,
            branches: serde_json::json!({
                "i": self.content_true,
                "ii": self.not_transferred,
            }),
            case_trace: &self.case_trace,
            verdict: self.verdict.to_json(),
        })
        .expect("report fields serialize")
    }

    /// Step-by-step rendering, one arrow chain per line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "sent {}  frame {}  E={}\n",
            self.proposition, self.frame, self.fidelity
        ));
        for step in &self.case_trace {
            let tag = match step.branch {
                Branch::ContentTrue => "(i) ",
                Branch::NotTransferred => "(ii)",
            };
            out.push_str(&format!(
                "{tag} {} -> {}{}\n",
                step.assumption,
                step.consequence,
                if step.contradiction {
                    "  => contradiction"
                } else {
                    ""
                }
            ));
        }
        out.push_str(&format!("verdict: {}\n", self.verdict.kind));
        out
    }
}

/// The builtin value the content asserts for its own code, given that the
/// content is true.
fn asserted_value(polarity: bool) -> bool {
    // P(*) asserts P for every code, so for its own; ~P(*) asserts ~P for
    // every code. A diagonal row P(<P(k)>) is identified with its own code.
    polarity
}

/// Runs the two-case analysis of `f` over `c`.
///
/// Consumes one channel use for `f`, and one more for the nested frame when
/// the object is a diagonal row.
pub fn analyze_self_reference(c: &mut Channel, f: &Frame) -> Result<ParadoxReport, AnalysisError> {
    let p = decode_frame(f).map_err(AnalysisError::Undecodable)?;
    let builtin = p
        .predicate()
        .as_builtin()
        .ok_or_else(|| AnalysisError::NotBuiltin(p.to_string()))?;
    let nested = match p.object() {
        ObjectRef::All => None,
        ObjectRef::Nested(g) => {
            let inner = decode_frame(g).map_err(AnalysisError::Undecodable)?;
            let diagonal = inner.predicate() == p.predicate()
                && matches!(inner.object(), ObjectRef::Number(_));
            if !diagonal {
                return Err(AnalysisError::NotSelfReferential(p.to_string()));
            }
            Some(inner)
        }
        ObjectRef::Number(_) => return Err(AnalysisError::NotSelfReferential(p.to_string())),
    };

    let transmission = c.transmit(&p);
    let fidelity = matches!(&transmission.result, Ok(q) if equivalent(q, &p));
    let byte_fidelity = transmission.transcript.sent_bits == transmission.transcript.recv_bits;
    let observed_self_instance = match builtin {
        Builtin::NonTransferable => !fidelity,
        Builtin::Transferable => fidelity,
        Builtin::ChannelError => !byte_fidelity,
    };
    let asserted_self_instance = asserted_value(p.polarity());

    let target_eval = nested.map(|inner| {
        let t = c.transmit(&inner);
        let inner_ok = matches!(&t.result, Ok(q) if equivalent(q, &inner));
        match builtin {
            Builtin::NonTransferable => !inner_ok,
            Builtin::Transferable => inner_ok,
            Builtin::ChannelError => t.transcript.sent_bits != t.transcript.recv_bits,
        }
    });

    let name = p.to_string();
    let b = builtin.as_str();
    let claim = claim_text(builtin, p.polarity(), matches!(p.object(), ObjectRef::All));
    let mut trace = Vec::new();

    let content_true = if !fidelity {
        trace.push(TraceStep {
            branch: Branch::ContentTrue,
            assumption: format!("{name} is transferable"),
            consequence: format!(
                "decoded proposition is equivalent to {name}; observed: {}",
                received_text(&transmission.result)
            ),
            contradiction: false,
        });
        trace.push(TraceStep {
            branch: Branch::ContentTrue,
            assumption: "receiver reads the content".into(),
            consequence: "nothing equivalent arrived, so this case does not occur".into(),
            contradiction: false,
        });
        BranchOutcome::Unreachable
    } else {
        trace.push(TraceStep {
            branch: Branch::ContentTrue,
            assumption: format!("{name} is transferable"),
            consequence: format!("decoded proposition is equivalent to {name}"),
            contradiction: false,
        });
        trace.push(TraceStep {
            branch: Branch::ContentTrue,
            assumption: format!("receiver takes {name} as true"),
            consequence: format!(
                "{claim}, including {name} itself: {b}(self) = {asserted_self_instance}"
            ),
            contradiction: false,
        });
        let clash = asserted_self_instance != observed_self_instance;
        trace.push(TraceStep {
            branch: Branch::ContentTrue,
            assumption: format!("channel executes {b} on the code of {name}"),
            consequence: format!(
                "{b}(self) = {observed_self_instance}, so {name} itself is {}",
                if clash { "not true" } else { "true" }
            ),
            contradiction: clash,
        });
        if clash {
            BranchOutcome::Contradiction
        } else {
            BranchOutcome::Consistent
        }
    };

    trace.push(TraceStep {
        branch: Branch::NotTransferred,
        assumption: format!("{name} is not transferable"),
        consequence: format!(
            "decoded proposition is not equivalent to {name}; observed: {}",
            received_text(&transmission.result)
        ),
        contradiction: fidelity,
    });
    let not_transferred = if fidelity {
        BranchOutcome::Contradiction
    } else {
        BranchOutcome::Consistent
    };

    let kind = match (content_true, not_transferred) {
        (BranchOutcome::Contradiction, BranchOutcome::Contradiction) => VerdictKind::Paradoxical,
        (BranchOutcome::Consistent, _) => VerdictKind::Transferable,
        _ => VerdictKind::NonTransferable,
    };
    let notes = trace
        .iter()
        .map(|s| {
            format!(
                "{} -> {}{}",
                s.assumption,
                s.consequence,
                if s.contradiction {
                    " -> contradiction"
                } else {
                    ""
                }
            )
        })
        .collect();

    Ok(ParadoxReport {
        frame: f.clone(),
        proposition: p.clone(),
        builtin,
        fidelity,
        byte_fidelity,
        asserted_self_instance,
        observed_self_instance,
        target_eval,
        content_true,
        not_transferred,
        case_trace: trace,
        verdict: Verdict {
            kind,
            sent: p,
            received: transmission.result,
            evidence: transmission.transcript,
            notes,
        },
    })
}

fn received_text(r: &Result<Proposition, crate::channel::ReceiveError>) -> String {
    match r {
        Ok(q) => format!("received {q}"),
        Err(e) => format!("received nothing usable ({e})"),
    }
}

fn claim_text(b: Builtin, polarity: bool, all: bool) -> String {
    let scope = if all {
        "for all codes"
    } else {
        "for the diagonal code"
    };
    let what = match (b, polarity) {
        (Builtin::NonTransferable, true) => "the proposition is non-transferable",
        (Builtin::NonTransferable, false) => "the proposition is not non-transferable",
        (Builtin::Transferable, true) => "the proposition is transferable",
        (Builtin::Transferable, false) => "the proposition is not transferable",
        (Builtin::ChannelError, true) => "the channel had error",
        (Builtin::ChannelError, false) => "the channel had no error",
    };
    format!("{scope}, {what}")
}

/// The negative diagonal as a proposition: `~P_k'(k')` for the `Tr` row.
pub fn negative_diagonal_cell(t: &EnumerationTable) -> Result<Proposition, EnumerationError> {
    let k_prime = t
        .k_tr()
        .ok_or(EnumerationError::MissingBuiltin(Builtin::Transferable))?;
    Ok(negate(&diagonal_cell(t, k_prime, true)?))
}
