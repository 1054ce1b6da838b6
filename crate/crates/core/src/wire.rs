//! Self-delimiting byte framing for proposition frames.
//!
//! ```text
//! SYNC    2  A5 5A
//! VER     1  01
//! LEN     2  body length, big-endian
//! BODY  LEN  POL(1) PTAG(1) PLEN(1) PBYTES OTAG(1) OLEN(2, BE) OBYTES
//! CRC     2  CRC-16/CCITT-FALSE over VER..BODY, big-endian
//! ```
//!
//! PTAG is 0x00 for a name, 0x01 for an index. OTAG is 0x00 for an object
//! number (minimal big-endian, nonzero), 0x01 for a nested body and 0x02 for
//! all objects (OLEN must be 0).

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{Frame, ObjectField, PredicateField};
use crate::model::MAX_NESTING_DEPTH;

pub const SYNC: [u8; 2] = [0xA5, 0x5A];
pub const VERSION: u8 = 0x01;
/// SYNC + VER + LEN.
pub const HEADER_LEN: usize = 5;
pub const CRC_LEN: usize = 2;
pub const MAX_BODY_LEN: usize = u16::MAX as usize;

const PTAG_NAME: u8 = 0x00;
const PTAG_INDEX: u8 = 0x01;
const OTAG_NUMBER: u8 = 0x00;
const OTAG_NESTED: u8 = 0x01;
const OTAG_ALL: u8 = 0x02;

const CRC_POLY: u16 = 0x1021;
const CRC_INIT: u16 = 0xFFFF;

const CRC_TABLE: [u16; 256] = crc_table();

const fn crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut j = 0;
        while j < 8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ CRC_POLY
            } else {
                crc << 1
            };
            j += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
pub fn crc16(data: &[u8]) -> u16 {
    data.iter().fold(CRC_INIT, |crc, &b| {
        (crc << 8) ^ CRC_TABLE[usize::from((crc >> 8) as u8 ^ b)]
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("predicate code is {0} bytes (max 255)")]
    PredicateTooLong(usize),
    #[error("object code is {0} bytes (max 65535)")]
    ObjectTooLong(usize),
    #[error("body is {0} bytes (max 65535)")]
    BodyTooLarge(usize),
    #[error("frame nesting depth {0} exceeds {MAX_NESTING_DEPTH}")]
    DepthExceeded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum BodyError {
    #[error("body truncated at byte {at}")]
    Truncated { at: usize },
    #[error("polarity byte 0x{value:02X} is not 0x00 or 0x01")]
    BadPolarity { value: u8 },
    #[error("unknown predicate tag 0x{value:02X}")]
    BadPredicateTag { value: u8 },
    #[error("unknown object tag 0x{value:02X}")]
    BadObjectTag { value: u8 },
    #[error("all-objects field carries {len} bytes")]
    NonEmptyAll { len: usize },
    #[error("object number is zero or not minimal")]
    NonMinimalNumber,
    #[error("{count} bytes after the end of the body")]
    TrailingBytes { count: usize },
    #[error("nesting deeper than {MAX_NESTING_DEPTH} levels")]
    TooDeep,
}

/// Serializes a frame body.
pub fn frame_to_body(f: &Frame) -> Result<Vec<u8>, WireError> {
    if f.depth() > MAX_NESTING_DEPTH {
        return Err(WireError::DepthExceeded(f.depth()));
    }
    let mut out = Vec::new();
    write_body(f, &mut out)?;
    if out.len() > MAX_BODY_LEN {
        return Err(WireError::BodyTooLarge(out.len()));
    }
    Ok(out)
}

fn write_body(f: &Frame, out: &mut Vec<u8>) -> Result<(), WireError> {
    out.push(u8::from(f.polarity));
    let (tag, pbytes) = match &f.predicate {
        PredicateField::Name(b) => (PTAG_NAME, b),
        PredicateField::Index(b) => (PTAG_INDEX, b),
    };
    let plen = u8::try_from(pbytes.len()).map_err(|_| WireError::PredicateTooLong(pbytes.len()))?;
    out.push(tag);
    out.push(plen);
    out.extend_from_slice(pbytes);
    match &f.object {
        ObjectField::Number(b) => {
            out.push(OTAG_NUMBER);
            push_object(out, b)?;
        }
        ObjectField::All => {
            out.push(OTAG_ALL);
            out.extend_from_slice(&[0, 0]);
        }
        ObjectField::Nested(inner) => {
            let mut nested = Vec::new();
            write_body(inner, &mut nested)?;
            out.push(OTAG_NESTED);
            push_object(out, &nested)?;
        }
    }
    Ok(())
}

fn push_object(out: &mut Vec<u8>, bytes: &[u8]) -> Result<(), WireError> {
    let len = u16::try_from(bytes.len()).map_err(|_| WireError::ObjectTooLong(bytes.len()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
    Ok(())
}

/// Parses a frame body. The whole slice must be consumed.
pub fn body_to_frame(body: &[u8]) -> Result<Frame, BodyError> {
    let mut cursor = Cursor { buf: body, pos: 0 };
    let frame = read_body(&mut cursor, 1)?;
    if cursor.pos != body.len() {
        return Err(BodyError::TrailingBytes {
            count: body.len() - cursor.pos,
        });
    }
    Ok(frame)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], BodyError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(BodyError::Truncated { at: self.buf.len() }),
        }
    }

    fn byte(&mut self) -> Result<u8, BodyError> {
        Ok(self.take(1)?[0])
    }
}

fn read_body(c: &mut Cursor<'_>, depth: usize) -> Result<Frame, BodyError> {
    if depth > MAX_NESTING_DEPTH {
        return Err(BodyError::TooDeep);
    }
    let polarity = match c.byte()? {
        0 => false,
        1 => true,
        value => return Err(BodyError::BadPolarity { value }),
    };
    let ptag = c.byte()?;
    let plen = usize::from(c.byte()?);
    let pbytes = c.take(plen)?.to_vec();
    let predicate = match ptag {
        PTAG_NAME => PredicateField::Name(pbytes),
        PTAG_INDEX => PredicateField::Index(pbytes),
        value => return Err(BodyError::BadPredicateTag { value }),
    };
    let otag = c.byte()?;
    let olen_bytes = c.take(2)?;
    let olen = usize::from(u16::from_be_bytes([olen_bytes[0], olen_bytes[1]]));
    let obytes = c.take(olen)?;
    let object = match otag {
        OTAG_NUMBER => {
            if obytes.first().is_none_or(|&b| b == 0) {
                return Err(BodyError::NonMinimalNumber);
            }
            ObjectField::Number(obytes.to_vec())
        }
        OTAG_ALL => {
            if olen != 0 {
                return Err(BodyError::NonEmptyAll { len: olen });
            }
            ObjectField::All
        }
        OTAG_NESTED => {
            let mut inner = Cursor {
                buf: obytes,
                pos: 0,
            };
            let nested = read_body(&mut inner, depth + 1)?;
            if inner.pos != obytes.len() {
                return Err(BodyError::TrailingBytes {
                    count: obytes.len() - inner.pos,
                });
            }
            ObjectField::Nested(Box::new(nested))
        }
        value => return Err(BodyError::BadObjectTag { value }),
    };
    Ok(Frame {
        polarity,
        predicate,
        object,
    })
}

/// Wraps a body in SYNC, VER, LEN and CRC.
pub fn frame_to_wire(f: &Frame) -> Result<Vec<u8>, WireError> {
    let body = frame_to_body(f)?;
    Ok(wrap_body(&body))
}

fn wrap_body(body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + CRC_LEN);
    out.extend_from_slice(&SYNC);
    out.push(VERSION);
    out.extend_from_slice(&(body.len() as u16).to_be_bytes());
    out.extend_from_slice(body);
    let crc = crc16(&out[2..]);
    out.extend_from_slice(&crc.to_be_bytes());
    out
}

/// Something the scanner had to skip or reject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Stream offset of the first byte concerned.
    pub offset: usize,
    #[serde(flatten)]
    pub kind: DiagnosticKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// Bytes outside any frame candidate.
    Garbage {
        len: usize,
    },
    BadVersion {
        version: u8,
    },
    CrcMismatch {
        carried: u16,
        computed: u16,
    },
    MalformedBody {
        reason: BodyError,
    },
    /// The stream ended inside a frame candidate.
    Truncated {
        needed: usize,
        available: usize,
    },
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "@{}: ", self.offset)?;
        match &self.kind {
            DiagnosticKind::Garbage { len } => write!(f, "{len} garbage bytes"),
            DiagnosticKind::BadVersion { version } => {
                write!(f, "unsupported version 0x{version:02X}")
            }
            DiagnosticKind::CrcMismatch { carried, computed } => {
                write!(
                    f,
                    "CRC mismatch (carried 0x{carried:04X}, computed 0x{computed:04X})"
                )
            }
            DiagnosticKind::MalformedBody { reason } => write!(f, "malformed body: {reason}"),
            DiagnosticKind::Truncated { needed, available } => {
                write!(f, "truncated frame ({available} of {needed} bytes)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScanEvent {
    Frame { offset: usize, frame: Frame },
    Diagnostic(Diagnostic),
}

/// Incremental frame scanner with resynchronization.
///
/// Bytes are fed with [`push`](Scanner::push) and events pulled with
/// [`next_event`](Scanner::next_event). After a failed candidate, scanning
/// resumes one byte past its SYNC; bytes covered by the failed candidate are
/// not reported again as garbage.
#[derive(Debug, Default)]
pub struct Scanner {
    buf: Vec<u8>,
    /// Stream offset of `buf[0]`.
    base: usize,
    /// Index into `buf` of the next unexamined byte.
    pos: usize,
    /// Stream offset below which skipped bytes are not reported.
    quiet_until: usize,
    garbage: Option<(usize, usize)>,
    eof: bool,
}

impl Scanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, data: &[u8]) {
        self.buf.extend_from_slice(data);
    }

    /// Marks the end of the stream; pending candidates resolve on the next pulls.
    pub fn finish(&mut self) {
        self.eof = true;
    }

    /// Next event, or `None` when more input is needed (or the stream is done).
    pub fn next_event(&mut self) -> Option<ScanEvent> {
        let Some(start) = self.find_sync() else {
            let keep_tail = !self.eof && self.buf.last() == Some(&SYNC[0]);
            let upto = self.buf.len() - usize::from(keep_tail);
            self.skip_to(upto);
            self.compact();
            return self.take_garbage_if(self.eof);
        };
        self.skip_to(start);
        if let Some(g) = self.take_garbage_if(true) {
            return Some(g);
        }

        let offset = self.base + start;
        let avail = self.buf.len() - start;
        if avail < HEADER_LEN {
            if self.eof {
                return Some(self.reject(
                    start,
                    HEADER_LEN,
                    DiagnosticKind::Truncated {
                        needed: HEADER_LEN,
                        available: avail,
                    },
                ));
            }
            return None;
        }
        let version = self.buf[start + 2];
        if version != VERSION {
            return Some(self.reject(start, HEADER_LEN, DiagnosticKind::BadVersion { version }));
        }
        let len = usize::from(u16::from_be_bytes([
            self.buf[start + 3],
            self.buf[start + 4],
        ]));
        let total = HEADER_LEN + len + CRC_LEN;
        if avail < total {
            if self.eof {
                return Some(self.reject(
                    start,
                    avail,
                    DiagnosticKind::Truncated {
                        needed: total,
                        available: avail,
                    },
                ));
            }
            return None;
        }
        let covered = &self.buf[start + 2..start + HEADER_LEN + len];
        let computed = crc16(covered);
        let crc_at = start + HEADER_LEN + len;
        let carried = u16::from_be_bytes([self.buf[crc_at], self.buf[crc_at + 1]]);
        if carried != computed {
            return Some(self.reject(
                start,
                total,
                DiagnosticKind::CrcMismatch { carried, computed },
            ));
        }
        let body = &self.buf[start + HEADER_LEN..start + HEADER_LEN + len];
        match body_to_frame(body) {
            Ok(frame) => {
                self.pos = start + total;
                self.quiet_until = self.quiet_until.max(self.base + self.pos);
                self.compact();
                Some(ScanEvent::Frame { offset, frame })
            }
            Err(reason) => {
                Some(self.reject(start, total, DiagnosticKind::MalformedBody { reason }))
            }
        }
    }

    /// Pulls every event currently available.
    pub fn drain_events(&mut self) -> Vec<ScanEvent> {
        std::iter::from_fn(|| self.next_event()).collect()
    }

    fn find_sync(&self) -> Option<usize> {
        self.buf[self.pos..]
            .windows(2)
            .position(|w| w == SYNC)
            .map(|i| self.pos + i)
    }

    fn reject(&mut self, start: usize, span: usize, kind: DiagnosticKind) -> ScanEvent {
        let offset = self.base + start;
        self.quiet_until = self.quiet_until.max(offset + span);
        self.pos = start + 1;
        ScanEvent::Diagnostic(Diagnostic { offset, kind })
    }

    /// Advances `pos` to `upto`, accumulating reportable garbage.
    fn skip_to(&mut self, upto: usize) {
        if upto <= self.pos {
            return;
        }
        let from = (self.base + self.pos).max(self.quiet_until);
        let to = self.base + upto;
        if from < to {
            // Runs are flushed before every candidate, so a pending run
            // always ends where the new one starts.
            self.garbage = Some(match self.garbage {
                Some((s, l)) => {
                    debug_assert_eq!(s + l, from);
                    (s, l + (to - from))
                }
                None => (from, to - from),
            });
        }
        self.pos = upto;
    }

    fn take_garbage_if(&mut self, flush: bool) -> Option<ScanEvent> {
        if !flush {
            return None;
        }
        self.garbage.take().map(|(offset, len)| {
            ScanEvent::Diagnostic(Diagnostic {
                offset,
                kind: DiagnosticKind::Garbage { len },
            })
        })
    }

    fn compact(&mut self) {
        if self.pos > 0 {
            self.buf.drain(..self.pos);
            self.base += self.pos;
            self.pos = 0;
        }
    }
}

/// Scans a complete byte stream for frames.
pub fn wire_to_frames(stream: &[u8]) -> (Vec<Frame>, Vec<Diagnostic>) {
    let mut scanner = Scanner::new();
    scanner.push(stream);
    scanner.finish();
    let mut frames = Vec::new();
    let mut diagnostics = Vec::new();
    for event in scanner.drain_events() {
        match event {
            ScanEvent::Frame { frame, .. } => frames.push(frame),
            ScanEvent::Diagnostic(d) => diagnostics.push(d),
        }
    }
    (frames, diagnostics)
}

/// Annotated hex dump of one wire frame, one field per line.
///
/// Falls back to a plain dump when `bytes` is not a single well-formed frame.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    let hex = |b: &[u8]| {
        b.iter()
            .map(|x| format!("{x:02X}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if bytes.len() < HEADER_LEN + CRC_LEN || bytes[..2] != SYNC {
        let _ = writeln!(out, "{}", hex(bytes));
        return out;
    }
    let len = usize::from(u16::from_be_bytes([bytes[3], bytes[4]]));
    if bytes.len() != HEADER_LEN + len + CRC_LEN {
        let _ = writeln!(out, "{}", hex(bytes));
        return out;
    }
    let _ = writeln!(out, "{:<24} SYNC", hex(&bytes[..2]));
    let _ = writeln!(out, "{:<24} VER", hex(&bytes[2..3]));
    let _ = writeln!(out, "{:<24} LEN = {len}", hex(&bytes[3..5]));
    dump_body(&bytes[HEADER_LEN..HEADER_LEN + len], 0, &mut out, &hex);
    let _ = writeln!(out, "{:<24} CRC", hex(&bytes[HEADER_LEN + len..]));
    out
}

fn dump_body(body: &[u8], indent: usize, out: &mut String, hex: &dyn Fn(&[u8]) -> String) {
    let pad = "  ".repeat(indent);
    if body.len() < 3 {
        let _ = writeln!(out, "{pad}{:<24} (short body)", hex(body));
        return;
    }
    let plen = usize::from(body[2]);
    let pend = (3 + plen).min(body.len());
    let _ = writeln!(out, "{pad}{:<24} POL", hex(&body[..1]));
    let _ = writeln!(out, "{pad}{:<24} PTAG", hex(&body[1..2]));
    let _ = writeln!(out, "{pad}{:<24} PLEN = {plen}", hex(&body[2..3]));
    let _ = writeln!(out, "{pad}{:<24} PBYTES", hex(&body[3..pend]));
    if body.len() < pend + 3 {
        let _ = writeln!(out, "{pad}{:<24} (short body)", hex(&body[pend..]));
        return;
    }
    let otag = body[pend];
    let olen = usize::from(u16::from_be_bytes([body[pend + 1], body[pend + 2]]));
    let _ = writeln!(out, "{pad}{:<24} OTAG", hex(&body[pend..pend + 1]));
    let _ = writeln!(
        out,
        "{pad}{:<24} OLEN = {olen}",
        hex(&body[pend + 1..pend + 3])
    );
    let obytes = &body[pend + 3..];
    if otag == OTAG_NESTED {
        dump_body(obytes, indent + 1, out, hex);
    } else if !obytes.is_empty() {
        let _ = writeln!(out, "{pad}{:<24} OBYTES", hex(obytes));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_frame;
    use crate::model::parse_proposition;

    fn frame(s: &str) -> Frame {
        encode_frame(&parse_proposition(s).unwrap())
    }

    /// Bit-at-a-time CRC-16/CCITT-FALSE, independent of the table.
    fn crc_oracle(data: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &byte in data {
            for i in (0..8).rev() {
                let bit = (byte >> i) & 1 == 1;
                let top = crc & 0x8000 != 0;
                crc <<= 1;
                if top != bit {
                    crc ^= 0x1021;
                }
            }
        }
        crc
    }

    #[test]
    fn crc_check_values() {
        assert_eq!(crc_oracle(b"123456789"), 0x29B1);
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc16(&[]), 0xFFFF);
        assert_eq!(crc_oracle(&[0x00]), 0xE1F0);
        assert_eq!(crc16(&[0x00]), 0xE1F0);
    }

    #[test]
    fn crc_matches_oracle_on_all_single_bytes() {
        for b in 0..=255u8 {
            assert_eq!(crc16(&[b]), crc_oracle(&[b]));
        }
    }

    #[test]
    fn body_golden_vectors() {
        assert_eq!(
            frame_to_body(&frame("ON(112)")).unwrap(),
            [0x01, 0x00, 0x02, 0x4F, 0x4E, 0x00, 0x00, 0x01, 0x70]
        );
        assert_eq!(
            frame_to_body(&frame("NT(*)")).unwrap(),
            [0x01, 0x00, 0x02, 0x4E, 0x54, 0x02, 0x00, 0x00]
        );
    }

    #[test]
    fn full_frame_layout() {
        let wire = frame_to_wire(&frame("ON(112)")).unwrap();
        assert_eq!(&wire[..5], &[0xA5, 0x5A, 0x01, 0x00, 0x09]);
        let crc = crc_oracle(&wire[2..14]);
        assert_eq!(&wire[14..], &crc.to_be_bytes());
        assert_eq!(wire.len(), 16);
    }

    #[test]
    fn body_errors() {
        assert_eq!(body_to_frame(&[]), Err(BodyError::Truncated { at: 0 }));
        assert_eq!(
            body_to_frame(&[0x02, 0, 1, b'P', 0, 0, 1, 1]),
            Err(BodyError::BadPolarity { value: 2 })
        );
        assert_eq!(
            body_to_frame(&[0x01, 7, 1, b'P', 0, 0, 1, 1]),
            Err(BodyError::BadPredicateTag { value: 7 })
        );
        assert_eq!(
            body_to_frame(&[0x01, 0, 1, b'P', 9, 0, 1, 1]),
            Err(BodyError::BadObjectTag { value: 9 })
        );
        assert_eq!(
            body_to_frame(&[0x01, 0, 1, b'P', 2, 0, 1, 1]),
            Err(BodyError::NonEmptyAll { len: 1 })
        );
        assert_eq!(
            body_to_frame(&[0x01, 0, 1, b'P', 0, 0, 2, 0, 1]),
            Err(BodyError::NonMinimalNumber)
        );
        assert_eq!(
            body_to_frame(&[0x01, 0, 1, b'P', 0, 0, 1, 1, 0xFF]),
            Err(BodyError::TrailingBytes { count: 1 })
        );
    }

    #[test]
    fn body_depth_limit() {
        let mut body = vec![0x01, 0x00, 0x01, b'P', 0x00, 0x00, 0x01, 0x01];
        for _ in 0..MAX_NESTING_DEPTH - 1 {
            let mut outer = vec![0x01, 0x00, 0x02, b'N', b'T', OTAG_NESTED];
            outer.extend_from_slice(&(body.len() as u16).to_be_bytes());
            outer.extend_from_slice(&body);
            body = outer;
        }
        assert_eq!(body_to_frame(&body).unwrap().depth(), MAX_NESTING_DEPTH);
        let mut outer = vec![0x01, 0x00, 0x02, b'N', b'T', OTAG_NESTED];
        outer.extend_from_slice(&(body.len() as u16).to_be_bytes());
        outer.extend_from_slice(&body);
        assert_eq!(body_to_frame(&outer), Err(BodyError::TooDeep));
    }

    #[test]
    fn single_frame_roundtrip() {
        let f = frame("ON(112)");
        let (frames, diags) = wire_to_frames(&frame_to_wire(&f).unwrap());
        assert_eq!(frames, vec![f]);
        assert!(diags.is_empty());
    }

    #[test]
    fn leading_garbage_is_reported() {
        let f = frame("ON(112)");
        let mut stream = vec![0x13, 0x37, 0x00];
        stream.extend(frame_to_wire(&f).unwrap());
        let (frames, diags) = wire_to_frames(&stream);
        assert_eq!(frames, vec![f]);
        assert_eq!(
            diags,
            vec![Diagnostic {
                offset: 0,
                kind: DiagnosticKind::Garbage { len: 3 }
            }]
        );
    }

    #[test]
    fn trailing_garbage_is_reported() {
        let mut stream = frame_to_wire(&frame("P(1)")).unwrap();
        let n = stream.len();
        stream.extend_from_slice(&[1, 2, 0xA5]);
        let (frames, diags) = wire_to_frames(&stream);
        assert_eq!(frames.len(), 1);
        assert_eq!(
            diags,
            vec![Diagnostic {
                offset: n,
                kind: DiagnosticKind::Garbage { len: 3 }
            }]
        );
    }

    #[test]
    fn every_body_bit_flip_fails_crc() {
        let wire = frame_to_wire(&frame("ON(112)")).unwrap();
        let len = wire.len() - HEADER_LEN - CRC_LEN;
        for byte in HEADER_LEN..HEADER_LEN + len {
            for bit in 0..8 {
                let mut bad = wire.clone();
                bad[byte] ^= 1 << bit;
                let (frames, diags) = wire_to_frames(&bad);
                assert!(frames.is_empty());
                assert!(matches!(diags[0].kind, DiagnosticKind::CrcMismatch { .. }));
                assert_eq!(diags.len(), 1, "{diags:?}");
            }
        }
    }

    #[test]
    fn bad_version_resyncs() {
        let good = frame_to_wire(&frame("P(1)")).unwrap();
        let mut bad = good.clone();
        bad[2] = 0x02;
        bad.extend_from_slice(&good);
        let (frames, diags) = wire_to_frames(&bad);
        assert_eq!(frames.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::BadVersion { version: 2 });
    }

    #[test]
    fn oversized_len_does_not_swallow_next_frame() {
        let good = frame_to_wire(&frame("P(1)")).unwrap();
        let mut stream = vec![0xA5, 0x5A, 0x01, 0xFF, 0xFF];
        stream.extend_from_slice(&good);
        let (frames, diags) = wire_to_frames(&stream);
        assert_eq!(frames, vec![frame("P(1)")]);
        assert!(matches!(diags[0].kind, DiagnosticKind::Truncated { .. }));
    }

    #[test]
    fn incremental_feeding_matches_batch() {
        let mut stream = vec![9, 9];
        stream.extend(frame_to_wire(&frame("ON(112)")).unwrap());
        stream.push(0xA5);
        stream.extend(frame_to_wire(&frame("NT(*)")).unwrap());
        let (batch, batch_diags) = wire_to_frames(&stream);

        let mut scanner = Scanner::new();
        let mut events = Vec::new();
        for b in &stream {
            scanner.push(std::slice::from_ref(b));
            events.extend(scanner.drain_events());
        }
        scanner.finish();
        events.extend(scanner.drain_events());
        let frames: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                ScanEvent::Frame { frame, .. } => Some(frame.clone()),
                _ => None,
            })
            .collect();
        let diags: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                ScanEvent::Diagnostic(d) => Some(d.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(frames, batch);
        assert_eq!(diags, batch_diags);
        assert_eq!(frames.len(), 2);
    }

    #[test]
    fn hex_dump_annotates_fields() {
        let dump = hex_dump(&frame_to_wire(&frame("ON(112)")).unwrap());
        assert!(dump.contains("A5 5A"));
        assert!(dump.contains("LEN = 9"));
        assert!(dump.contains("4F 4E"));
        assert!(dump.lines().last().unwrap().ends_with("CRC"));
    }
}
