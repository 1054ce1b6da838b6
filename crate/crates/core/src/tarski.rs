//! Truth predicates over frame codes, in both directions.
//!
//! A code is the wire byte string of a frame. From a channel and a world,
//! [`truth_from_channel`] builds `T(n) := holds(w, decode(TS(n)))`. From a
//! truth predicate and an injective transmission system,
//! [`decoder_from_truth`] builds `d(n') := T(TS^-1(n'))`. [`verify_bridge`]
//! checks `P <-> T(Encode(P))` row by row and carries the diagonal frame as a
//! separate, flagged row.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    receive, verify_activeness, wire_bytes, Channel, ReceiveError, TransmissionSystem,
};
use crate::diagonal::{build_enumeration, find_fixed_point};
use crate::model::{holds, PredicateCode, Proposition, World};
use crate::transfer::eval_nt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TarskiError {
    #[error("channel is not active: {first} and {second} arrive identically")]
    ChannelNotActive { first: String, second: String },
    #[error("transmission system is not injective: codes {first} and {second} collide")]
    NotInjective { first: String, second: String },
    #[error("{0} is outside the image of the transmission system")]
    OutsideImage(String),
}

/// A table from codes to truth values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TruthPredicate {
    #[serde(serialize_with = "hex_keys")]
    table: BTreeMap<Vec<u8>, bool>,
    notes: Vec<String>,
}

fn hex_keys<S: serde::Serializer>(t: &BTreeMap<Vec<u8>, bool>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(t.iter().map(|(k, v)| (hex::encode_upper(k), v)))
}

impl TruthPredicate {
    pub fn from_table(table: BTreeMap<Vec<u8>, bool>) -> Self {
        TruthPredicate {
            table,
            notes: Vec::new(),
        }
    }

    /// `T(code)`, or `None` off the corpus the predicate was built from.
    pub fn get(&self, code: &[u8]) -> Option<bool> {
        self.table.get(code).copied()
    }

    /// `T(Encode(p))`.
    pub fn of(&self, p: &Proposition) -> Option<bool> {
        self.get(&wire_bytes(p))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], bool)> {
        self.table.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// One entry per code that was mapped to false because it had no value.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }
}

/// What a channel delivers for each code of a corpus, independent of any world.
#[derive(Debug, Clone)]
pub struct ChannelReadout {
    entries: Vec<(Vec<u8>, Result<Proposition, ReceiveError>)>,
}

impl ChannelReadout {
    /// Pushes every corpus code through `c` once, after checking `c` is active
    /// on the corpus.
    pub fn over(c: &mut Channel, corpus: &[Proposition]) -> Result<Self, TarskiError> {
        let report = verify_activeness(c.ts(), corpus);
        if let Some((a, b)) = report.collision {
            return Err(TarskiError::ChannelNotActive {
                first: a.to_string(),
                second: b.to_string(),
            });
        }
        Ok(Self::unchecked(c, corpus))
    }

    fn unchecked(c: &mut Channel, corpus: &[Proposition]) -> Self {
        let mut seen = std::collections::HashSet::new();
        let entries = corpus
            .iter()
            .filter(|p| seen.insert(*p))
            .map(|p| {
                let code = wire_bytes(p);
                let (received, _) = c.pass(&code);
                (code, receive(&received))
            })
            .collect();
        ChannelReadout { entries }
    }

    /// `T(n) = holds(w, decode(TS(n)))`; codes without a value map to false.
    pub fn truth_in(&self, w: &World) -> TruthPredicate {
        let mut t = TruthPredicate::default();
        for (code, received) in &self.entries {
            let value = match received {
                Ok(q) => match holds(w, q) {
                    Ok(v) => v,
                    Err(e) => {
                        t.notes.push(format!(
                            "{}: received {q}, {e}; T = false",
                            hex::encode_upper(code)
                        ));
                        false
                    }
                },
                Err(e) => {
                    t.notes
                        .push(format!("{}: {e}; T = false", hex::encode_upper(code)));
                    false
                }
            };
            t.table.insert(code.clone(), value);
        }
        t
    }
}

/// `T` over the ground corpus of `w`, built by running `c`.
pub fn truth_from_channel(c: &mut Channel, w: &World) -> Result<TruthPredicate, TarskiError> {
    Ok(ChannelReadout::over(c, &w.ground_corpus())?.truth_in(w))
}

/// `d(n') = T(TS^-1(n'))`, with `TS` taken at use index 0.
#[derive(Debug, Clone)]
pub struct DecoderFunction {
    inverse: HashMap<Vec<u8>, Vec<u8>>,
    truth: TruthPredicate,
}

impl DecoderFunction {
    /// The truth value of the proposition whose code `TS` turned into `received`.
    pub fn decode(&self, received: &[u8]) -> Result<bool, TarskiError> {
        let code = self
            .inverse
            .get(received)
            .ok_or_else(|| TarskiError::OutsideImage(hex::encode_upper(received)))?;
        Ok(self
            .truth
            .get(code)
            .expect("inverse only holds codes from the table"))
    }

    /// `TS^-1(n')` on the operating corpus.
    pub fn invert(&self, received: &[u8]) -> Option<&[u8]> {
        self.inverse.get(received).map(Vec::as_slice)
    }
}

/// Inverts `ts` over the codes of `t`.
pub fn decoder_from_truth(
    t: &TruthPredicate,
    ts: &TransmissionSystem,
) -> Result<DecoderFunction, TarskiError> {
    let mut inverse: HashMap<Vec<u8>, Vec<u8>> = HashMap::new();
    for (code, _) in t.iter() {
        let out = ts.apply(code, 0);
        if let Some(prev) = inverse.get(&out) {
            return Err(TarskiError::NotInjective {
                first: hex::encode_upper(prev),
                second: hex::encode_upper(code),
            });
        }
        inverse.insert(out, code.to_vec());
    }
    Ok(DecoderFunction {
        inverse,
        truth: t.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BridgeRow {
    pub proposition: Proposition,
    pub code: String,
    #[serde(rename = "T")]
    pub t: bool,
    pub holds: bool,
    pub agree: bool,
}

/// The diagonal frame `F*`, reported apart from the ground rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagonalRow {
    pub proposition: Proposition,
    pub code: String,
    /// `T(F*)`: `holds` has no value on channel predicates, so this is false.
    #[serde(rename = "T")]
    pub t: bool,
    /// What `F*` says about its own code when read as true.
    pub asserted: bool,
    /// `NT` on the code of `F*`, by running the channel.
    pub self_instance: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BridgeReport {
    pub corpus_size: usize,
    pub channel_active: bool,
    pub rows: Vec<BridgeRow>,
    /// AND over `rows`; the diagonal row does not count.
    pub agree: bool,
    pub failures: Vec<String>,
    /// Corpus entries without world semantics, left out of `rows`.
    pub skipped: Vec<String>,
    pub diagonal: DiagonalRow,
    pub notes: Vec<String>,
}

/// Builds `T` from `c` and checks it against `holds` on every ground entry of
/// `corpus`.
///
/// An inactive channel does not abort the check; it is recorded in
/// `channel_active` and `T` is built anyway.
pub fn verify_bridge(c: &mut Channel, w: &World, corpus: &[Proposition]) -> BridgeReport {
    let (ground, skipped): (Vec<_>, Vec<_>) = corpus.iter().cloned().partition(|p| p.is_ground());
    let channel_active = verify_activeness(c.ts(), &ground).injective;
    let t = ChannelReadout::unchecked(c, &ground).truth_in(w);

    let mut rows = Vec::with_capacity(ground.len());
    let mut failures = Vec::new();
    for p in &ground {
        let code = wire_bytes(p);
        let tv = t.get(&code).expect("every ground entry was read out");
        let hv = holds(w, p).expect("ground propositions have world semantics");
        if tv != hv {
            failures.push(format!("{p}: T = {tv}, holds = {hv}"));
        }
        rows.push(BridgeRow {
            proposition: p.clone(),
            code: hex::encode_upper(code),
            t: tv,
            holds: hv,
            agree: tv == hv,
        });
    }
    let diagonal = diagonal_row(c, w);
    BridgeReport {
        corpus_size: corpus.len(),
        channel_active,
        agree: failures.is_empty(),
        rows,
        failures,
        skipped: skipped.iter().map(ToString::to_string).collect(),
        diagonal,
        notes: t.notes().to_vec(),
    }
}

fn diagonal_row(c: &mut Channel, w: &World) -> DiagonalRow {
    let mut preds: Vec<PredicateCode> = w.predicates().into_iter().collect();
    if preds.is_empty() {
        preds.push(PredicateCode::named("P").expect("valid name"));
    }
    let max_n = w.domain().map(|m| m.get()).max().unwrap_or(1);
    let table = build_enumeration(&preds, max_n).expect("distinct world predicates");
    let fp = find_fixed_point(&table).expect("NT and Tr are enumerated");
    let f_star = crate::codec::decode_frame(&fp.f_star).expect("F* decodes");
    let t = ChannelReadout::unchecked(c, std::slice::from_ref(&f_star))
        .truth_in(w)
        .of(&f_star)
        .expect("F* was read out");
    let self_instance = eval_nt(c, &fp.f_star).expect("F* decodes");
    DiagonalRow {
        code: hex::encode_upper(wire_bytes(&f_star)),
        proposition: f_star,
        t,
        asserted: true,
        self_instance,
        consistent: self_instance,
    }
}

impl BridgeReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report fields serialize")
    }

    /// Aligned table: proposition, code-hex, T, holds, agree.
    pub fn render_table(&self) -> String {
        let header = ["proposition", "code-hex", "T", "holds", "agree"];
        let mut lines: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.proposition.to_string(),
                    r.code.clone(),
                    r.t.to_string(),
                    r.holds.to_string(),
                    r.agree.to_string(),
                ]
            })
            .collect();
        let d = &self.diagonal;
        lines.push([
            format!("{} *", d.proposition),
            d.code.clone(),
            d.t.to_string(),
            "-".into(),
            "-".into(),
        ]);
        let mut widths = header.map(str::len);
        for l in &lines {
            for (w, cell) in widths.iter_mut().zip(l) {
                *w = (*w).max(cell.len());
            }
        }
        let fmt = |cells: &[String]| {
            cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_owned()
        };
        let mut out = fmt(&header.map(String::from));
        out.push('\n');
        for l in &lines {
            out.push_str(&fmt(l));
            out.push('\n');
        }
        out.push_str(&format!(
            "* diagonal row, excluded: asserts NT(self) = {}, channel gives NT(self) = {}\n",
            d.asserted, d.self_instance
        ));
        out.push_str(&format!(
            "agree={} ({} rows)\n",
            self.agree,
            self.rows.len()
        ));
        out
    }
}
