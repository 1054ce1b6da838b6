//! Moving wire frames over byte streams.
//!
//! [`send`] writes frames verbatim; [`handle_connection`] scans a stream,
//! decodes what it finds and optionally compares it with an expected list or
//! runs the self-reference analysis. [`proxy_connection`] sits between the two
//! and applies a transmission system to the traffic.

use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde::Serialize;

use crate::channel::{wire_bytes, Channel};
use crate::codec::{decode_frame, payload_bits, Frame};
use crate::diagonal::{analyze_self_reference, ParadoxReport};
use crate::model::{equivalent, Proposition};
use crate::wire::{Diagnostic, ScanEvent, Scanner};

/// Connects to `addr`, writes the wire frame of each proposition, then
/// closes the write half. Returns the number of bytes written.
pub fn send<A: ToSocketAddrs>(addr: A, props: &[Proposition]) -> io::Result<usize> {
    let mut stream = TcpStream::connect(addr)?;
    let n = write_frames(&mut stream, props)?;
    stream.shutdown(std::net::Shutdown::Write)?;
    Ok(n)
}

/// Writes the wire frames of `props` back to back.
pub fn write_frames<W: Write>(w: &mut W, props: &[Proposition]) -> io::Result<usize> {
    let mut n = 0;
    for p in props {
        let bytes = wire_bytes(p);
        w.write_all(&bytes)?;
        n += bytes.len();
    }
    w.flush()?;
    Ok(n)
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Propositions the sender is expected to deliver, in order.
    pub expected: Vec<Proposition>,
    /// Run the self-reference analysis on frames that admit it.
    pub analyze: bool,
}

#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    pub offset: usize,
    pub frame: Frame,
    pub proposition: Result<Proposition, String>,
    pub payload_bits: String,
    pub expected: Option<Proposition>,
    /// Received proposition equivalent to the expected one.
    pub matches: Option<bool>,
    pub analysis: Option<ParadoxReport>,
}

#[derive(Debug, Clone, Default)]
pub struct ConnectionReport {
    pub bytes: usize,
    pub frames: Vec<ReceivedFrame>,
    pub diagnostics: Vec<Diagnostic>,
    /// Expected propositions that never arrived.
    pub missing: Vec<Proposition>,
}

impl ConnectionReport {
    /// True when nothing was rejected and every expectation was met.
    pub fn clean(&self) -> bool {
        self.diagnostics.is_empty()
            && self.missing.is_empty()
            && self
                .frames
                .iter()
                .all(|f| f.proposition.is_ok() && f.matches != Some(false))
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct FrameJson<'a> {
            offset: usize,
            frame: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            proposition: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<&'a str>,
            payload_bits: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            expected: Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            matches: Option<bool>,
            #[serde(skip_serializing_if = "Option::is_none")]
            analysis: Option<serde_json::Value>,
        }
        let frames: Vec<_> = self
            .frames
            .iter()
            .map(|f| FrameJson {
                offset: f.offset,
                frame: f.frame.to_string(),
                proposition: f.proposition.as_ref().ok().map(ToString::to_string),
                error: f.proposition.as_ref().err().map(String::as_str),
                payload_bits: &f.payload_bits,
                expected: f.expected.as_ref().map(ToString::to_string),
                matches: f.matches,
                analysis: f.analysis.as_ref().map(ParadoxReport::to_json),
            })
            .collect();
        serde_json::json!({
            "bytes": self.bytes,
            "frames": frames,
            "diagnostics": self.diagnostics,
            "missing": self.missing.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "clean": self.clean(),
        })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            match &f.proposition {
                Ok(p) => out.push_str(&format!(
                    "@{} {p}  {}  {}\n",
                    f.offset, f.frame, f.payload_bits
                )),
                Err(e) => out.push_str(&format!(
                    "@{} undecodable frame {}: {e}\n",
                    f.offset, f.frame
                )),
            }
            if let (Some(exp), Some(ok)) = (&f.expected, f.matches) {
                out.push_str(&format!(
                    "  expected {exp}: {}\n",
                    if ok { "match" } else { "MISMATCH" }
                ));
            }
            if let Some(a) = &f.analysis {
                for line in a.render_text().lines() {
                    out.push_str(&format!("  {line}\n"));
                }
            }
        }
        for d in &self.diagnostics {
            out.push_str(&format!("diagnostic {d}\n"));
        }
        for m in &self.missing {
            out.push_str(&format!("missing {m}\n"));
        }
        out.push_str(&format!(
            "{} bytes, {} frames, {} diagnostics\n",
            self.bytes,
            self.frames.len(),
            self.diagnostics.len()
        ));
        out
    }
}

/// Reads `stream` to its end, scanning frames as they arrive.
pub fn handle_connection<R: Read>(
    mut stream: R,
    opts: &ServeOptions,
) -> io::Result<ConnectionReport> {
    let mut scanner = Scanner::new();
    let mut report = ConnectionReport::default();
    let mut buf = [0u8; 4096];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        report.bytes += n;
        scanner.push(&buf[..n]);
        while let Some(ev) = scanner.next_event() {
            record(&mut report, ev, opts);
        }
    }
    scanner.finish();
    while let Some(ev) = scanner.next_event() {
        record(&mut report, ev, opts);
    }
    report.missing = opts
        .expected
        .iter()
        .skip(report.frames.len())
        .cloned()
        .collect();
    Ok(report)
}

fn record(report: &mut ConnectionReport, ev: ScanEvent, opts: &ServeOptions) {
    match ev {
        ScanEvent::Diagnostic(d) => report.diagnostics.push(d),
        ScanEvent::Frame { offset, frame } => {
            let decoded = decode_frame(&frame);
            let expected = opts.expected.get(report.frames.len()).cloned();
            let matches = match (&decoded, &expected) {
                (Ok(p), Some(e)) => Some(equivalent(p, e)),
                (Err(_), Some(_)) => Some(false),
                _ => None,
            };
            let analysis = if opts.analyze {
                // Frames that are not self-referential get no analysis.
                analyze_self_reference(&mut Channel::perfect(), &frame).ok()
            } else {
                None
            };
            report.frames.push(ReceivedFrame {
                offset,
                payload_bits: payload_bits(&frame).to_string(),
                frame,
                proposition: decoded.map_err(|e| e.to_string()),
                expected,
                matches,
                analysis,
            });
        }
    }
}

/// Copies `inbound` to `outbound` through the channel's transmission system.
///
/// The whole stream is read first and passed as one channel use, so
/// truncation and bit flips act on the stream rather than per frame.
pub fn proxy_connection<R: Read, W: Write>(
    mut inbound: R,
    mut outbound: W,
    channel: &mut Channel,
) -> io::Result<usize> {
    let mut data = Vec::new();
    inbound.read_to_end(&mut data)?;
    let (out, _) = channel.pass(&data);
    outbound.write_all(&out)?;
    outbound.flush()?;
    Ok(out.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::TransmissionSystem;
    use crate::model::parse_proposition;
    use crate::transfer::VerdictKind;
    use std::net::TcpListener;

    fn p(s: &str) -> Proposition {
        parse_proposition(s).unwrap()
    }

    #[test]
    fn in_memory_roundtrip() {
        let props = [p("ON(112)"), p("~Lit(3)"), p("NT(*)")];
        let mut bytes = Vec::new();
        write_frames(&mut bytes, &props).unwrap();
        let opts = ServeOptions {
            expected: props.to_vec(),
            analyze: true,
        };
        let r = handle_connection(bytes.as_slice(), &opts).unwrap();
        assert!(r.clean());
        assert_eq!(r.frames.len(), 3);
        assert_eq!(r.frames[0].payload_bits, "101001111010011101110000");
        assert!(r.frames[0].analysis.is_none());
        let a = r.frames[2].analysis.as_ref().unwrap();
        assert_eq!(a.verdict.kind, VerdictKind::Paradoxical);
    }

    #[test]
    fn one_byte_reads_give_the_same_report() {
        struct Trickle<'a>(&'a [u8]);
        impl Read for Trickle<'_> {
            fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
                if self.0.is_empty() || buf.is_empty() {
                    return Ok(0);
                }
                buf[0] = self.0[0];
                self.0 = &self.0[1..];
                Ok(1)
            }
        }
        let mut bytes = vec![1, 2, 3];
        write_frames(&mut bytes, &[p("A(1)"), p("B(2)")]).unwrap();
        let opts = ServeOptions::default();
        let whole = handle_connection(bytes.as_slice(), &opts).unwrap();
        let trickled = handle_connection(Trickle(&bytes), &opts).unwrap();
        assert_eq!(whole.to_json(), trickled.to_json());
        assert_eq!(whole.diagnostics.len(), 1);
    }

    #[test]
    fn mismatch_and_missing() {
        let mut bytes = Vec::new();
        write_frames(&mut bytes, &[p("ON(7)")]).unwrap();
        let opts = ServeOptions {
            expected: vec![p("ON(112)"), p("ON(8)")],
            analyze: false,
        };
        let r = handle_connection(bytes.as_slice(), &opts).unwrap();
        assert_eq!(r.frames[0].matches, Some(false));
        assert_eq!(r.missing, [p("ON(8)")]);
        assert!(!r.clean());
        assert!(r.render_text().contains("MISMATCH"));
    }

    #[test]
    fn proxy_flips_are_reported() {
        let mut bytes = Vec::new();
        write_frames(&mut bytes, &[p("ON(112)")]).unwrap();
        let mut out = Vec::new();
        let mut c = Channel::new("flip", TransmissionSystem::BitFlip { p: 0.05, seed: 11 });
        proxy_connection(bytes.as_slice(), &mut out, &mut c).unwrap();
        assert_ne!(out, bytes);
        let r = handle_connection(out.as_slice(), &ServeOptions::default()).unwrap();
        assert!(r.frames.is_empty());
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn loopback_tcp() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            handle_connection(stream, &ServeOptions::default()).unwrap()
        });
        let sent = send(addr, &[p("ON(112)")]).unwrap();
        let r = server.join().unwrap();
        assert_eq!(r.bytes, sent);
        assert_eq!(r.frames[0].proposition.as_ref().unwrap(), &p("ON(112)"));
    }
}
