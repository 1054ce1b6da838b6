use std::fs;
use std::io::{self, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use semchan_core::channel::TranscriptLog;
use semchan_core::diagonal::{
    analyze_self_reference, build_enumeration, build_err_all, build_nt_all, find_fixed_point,
};
use semchan_core::model::PredicateCode;
use semchan_core::net::{handle_connection, proxy_connection, send, ServeOptions};
use semchan_core::tarski::verify_bridge;
use semchan_core::wire::{frame_to_wire, hex_dump, wire_to_frames};
use semchan_core::{
    check_transferable, decode_frame, encode_frame, make_channel, parse_proposition, payload_bits,
    Channel, ChannelConfig, Proposition, VerdictKind, World,
};

const EXIT_NEGATIVE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "semchan",
    version,
    about = "Encode propositions, run them through channels, analyze self-reference"
)]
struct Cli {
    /// Print one JSON document instead of text
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the frame of a proposition
    Encode {
        text: String,
        #[arg(long, value_enum, default_value = "bits")]
        format: EncodeFormat,
    },
    /// Scan wire-format hex for frames and decode them
    Decode {
        /// Hex bytes; whitespace is ignored
        hex: String,
    },
    /// Send a proposition through a channel and show what arrives
    Transmit {
        text: String,
        /// Channel config (JSON); perfect channel when omitted
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Append the transcript to this JSONL file
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Report whether a proposition is transferable over a channel
    Check {
        text: String,
        #[arg(long)]
        channel: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Build the enumeration table and its diagonal frames
    Diagonalize {
        /// One predicate per line; NT and Tr are appended when missing
        #[arg(long)]
        predicates: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_n: u64,
    },
    /// Run the receiver's case analysis on a self-referential frame
    Demo {
        #[arg(value_enum)]
        which: Demo,
        #[arg(long)]
        channel: Option<PathBuf>,
    },
    /// Compare the channel-built truth predicate with a world
    Bridge {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        channel: Option<PathBuf>,
    },
    /// Receive wire frames over TCP (or forward them through a channel)
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Expected propositions, in order
        #[arg(long = "expect")]
        expect: Vec<String>,
        /// Analyze self-referential frames
        #[arg(long)]
        analyze: bool,
        /// Exit after the first connection
        #[arg(long)]
        once: bool,
        /// Proxy mode: forward each connection to HOST:PORT through --channel
        #[arg(long, requires = "channel")]
        forward: Option<String>,
        #[arg(long)]
        channel: Option<PathBuf>,
    },
    /// Send propositions to a server as wire frames
    Send {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(required = true)]
        texts: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodeFormat {
    Bits,
    Hex,
    Triple,
    Dump,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    /// NT(*)
    Liar,
    /// Err(*)
    Err,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitClass<T> {
    fn usage(self) -> Result<T, Failure>;
    fn io(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitClass<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_USAGE,
            error: e.into(),
        })
    }
    fn io(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_IO,
            error: e.into(),
        })
    }
}

struct Output {
    json: bool,
}

impl Output {
    fn emit(&self, doc: Value, text: impl FnOnce() -> String) {
        if self.json {
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("json values serialize")
            );
        } else {
            print!("{}", text());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output { json: cli.json };
    match run(cli.command, &out) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command, out: &Output) -> Result<u8, Failure> {
    match cmd {
        Command::Encode { text, format } => encode(&text, format, out),
        Command::Decode { hex } => decode(&hex, out),
        Command::Transmit {
            text,
            channel,
            transcript,
        } => transmit(&text, channel, transcript, true, out),
        Command::Check {
            text,
            channel,
            transcript,
        } => transmit(&text, channel, transcript, false, out),
        Command::Diagonalize { predicates, max_n } => diagonalize(&predicates, max_n, out),
        Command::Demo { which, channel } => demo(which, channel, out),
        Command::Bridge { world, channel } => bridge(&world, channel, out),
        Command::Serve {
            port,
            bind,
            expect,
            analyze,
            once,
            forward,
            channel,
        } => {
            let expected = expect.iter().map(|t| parse(t)).collect::<Result<_, _>>()?;
            let opts = ServeOptions { expected, analyze };
            serve(&bind, port, opts, once, forward, channel, out)
        }
        Command::Send { host, port, texts } => {
            let props = texts
                .iter()
                .map(|t| parse(t))
                .collect::<Result<Vec<_>, _>>()?;
            let n = send((host.as_str(), port), &props)
                .with_context(|| format!("sending to {host}:{port}"))
                .io()?;
            out.emit(json!({ "sent": texts, "bytes": n }), || {
                format!("sent {} frames, {n} bytes\n", props.len())
            });
            Ok(0)
        }
    }
}

fn parse(text: &str) -> Result<Proposition, Failure> {
    parse_proposition(text)
        .map_err(|e| anyhow!("{text:?}: {e}"))
        .usage()
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .io()
}

/// Loads a channel config; `SEMCHAN_SEED` replaces its seed.
fn load_channel(path: Option<&Path>) -> Result<Channel, Failure> {
    let mut config = match path {
        Some(p) => ChannelConfig::from_json(&read_file(p)?)
            .with_context(|| format!("in {}", p.display()))
            .usage()?,
        None => ChannelConfig::default(),
    };
    if let Ok(seed) = std::env::var("SEMCHAN_SEED") {
        let seed = seed
            .trim()
            .parse()
            .map_err(|e| anyhow!("SEMCHAN_SEED={seed:?}: {e}"))
            .usage()?;
        config.seed = Some(seed);
    }
    make_channel(&config).usage()
}

fn encode(text: &str, format: EncodeFormat, out: &Output) -> Result<u8, Failure> {
    let p = parse(text)?;
    let f = encode_frame(&p);
    let bytes = frame_to_wire(&f).usage()?;
    let bits = payload_bits(&f).to_string();
    let hex = hex::encode_upper(&bytes);
    let rendered = match format {
        EncodeFormat::Bits => bits.clone(),
        EncodeFormat::Hex => hex.clone(),
        EncodeFormat::Triple => f.to_string(),
        EncodeFormat::Dump => hex_dump(&bytes).trim_end().to_owned(),
    };
    out.emit(
        json!({
            "proposition": p,
            "bits": bits,
            "triple": f.to_string(),
            "body": f,
            "wire": hex,
        }),
        || format!("{rendered}\n"),
    );
    Ok(0)
}

fn decode(hex_text: &str, out: &Output) -> Result<u8, Failure> {
    let compact: String = hex_text.split_whitespace().collect();
    let bytes = hex::decode(&compact).context("input is not hex").usage()?;
    let (frames, diagnostics) = wire_to_frames(&bytes);
    let mut docs = Vec::new();
    let mut text = String::new();
    let mut ok = !frames.is_empty() && diagnostics.is_empty();
    for f in &frames {
        match decode_frame(f) {
            Ok(p) => {
                text.push_str(&format!("{p}  {f}\n"));
                docs.push(json!({ "proposition": p, "triple": f.to_string() }));
            }
            Err(e) => {
                ok = false;
                text.push_str(&format!("undecodable frame {f}: {e}\n"));
                docs.push(json!({ "triple": f.to_string(), "error": e.to_string() }));
            }
        }
    }
    for d in &diagnostics {
        text.push_str(&format!("diagnostic {d}\n"));
    }
    out.emit(
        json!({ "frames": docs, "diagnostics": diagnostics }),
        || text,
    );
    Ok(if ok { 0 } else { EXIT_NEGATIVE })
}

fn transmit(
    text: &str,
    channel: Option<PathBuf>,
    transcript: Option<PathBuf>,
    show_received: bool,
    out: &Output,
) -> Result<u8, Failure> {
    let p = parse(text)?;
    let mut c = load_channel(channel.as_deref())?;
    let v = check_transferable(&mut c, &p);
    if let Some(path) = &transcript {
        TranscriptLog::new(path)
            .append(&v.evidence)
            .with_context(|| format!("appending to {}", path.display()))
            .io()?;
    }
    let mut doc = v.to_json();
    if show_received {
        doc["transcript"] = serde_json::to_value(&v.evidence).expect("transcript serializes");
    }
    out.emit(doc, || {
        let mut s = String::new();
        if show_received {
            match &v.received {
                Ok(q) => s.push_str(&format!("received {q}\n")),
                Err(e) => s.push_str(&format!("received nothing: {e}\n")),
            }
        }
        s.push_str(&format!("{}\n", v.kind));
        s
    });
    Ok(match v.kind {
        VerdictKind::Transferable => 0,
        _ => EXIT_NEGATIVE,
    })
}

fn read_predicates(path: &Path) -> Result<Vec<PredicateCode>, Failure> {
    let text = read_file(path)?;
    let mut preds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let token = line.trim();
        let comment =
            token.starts_with('#') && !token[1..].starts_with(|c: char| c.is_ascii_digit());
        if token.is_empty() || comment {
            continue;
        }
        let p = parse_proposition(&format!("{token}(1)"))
            .map_err(|e| anyhow!("{}:{}: bad predicate {token:?}: {e}", path.display(), i + 1))
            .usage()?;
        preds.push(p.predicate().clone());
    }
    Ok(preds)
}

fn diagonalize(path: &Path, max_n: u64, out: &Output) -> Result<u8, Failure> {
    let preds = read_predicates(path)?;
    let table = build_enumeration(&preds, max_n).usage()?;
    let fp = find_fixed_point(&table).usage()?;
    let derived: Vec<_> = table
        .derived_rows()
        .map(|(n, b, bp)| json!({ "n": n, "B": b.symbolic(), "B'": bp.symbolic() }))
        .collect();
    let doc = json!({
        "predicates": table.predicates().iter().map(ToString::to_string).collect::<Vec<_>>(),
        "max_n": max_n,
        "cells": table.cells().count(),
        "base_cells": table.base_cells().count(),
        "derived": derived,
        "fixed_point": fp,
    });
    out.emit(doc, || {
        let mut s = String::new();
        for (i, p) in table.predicates().iter().enumerate() {
            s.push_str(&format!("P_{} = {p}\n", i + 1));
        }
        s.push_str(&format!(
            "{} cells ({} base), objects 1..={max_n}\n",
            table.cells().count(),
            table.base_cells().count()
        ));
        for (n, b, bp) in table.derived_rows() {
            s.push_str(&format!(
                "B({n}) = {}   B'({n}) = {}\n",
                b.symbolic(),
                bp.symbolic()
            ));
        }
        s.push_str(&format!("k = {}  F* = {}\n", fp.k, fp.f_star.symbolic()));
        s.push_str(&format!(
            "  table: {}\n  NT(F_P_k(k)): {}\n  identical: {}\n",
            fp.f_star_wire, fp.f_star_rhs_wire, fp.identical
        ));
        s.push_str(&format!(
            "k' = {}  F*' = {}\n",
            fp.k_prime,
            fp.f_star_prime.symbolic()
        ));
        s.push_str(&format!(
            "  table: {}\n  ~Tr(F_~P_k'(k')): {}\n  identical: {}\n",
            fp.f_star_prime_wire, fp.f_star_prime_rhs_wire, fp.prime_identical
        ));
        s
    });
    Ok(if fp.identical && fp.prime_identical {
        0
    } else {
        EXIT_NEGATIVE
    })
}

fn demo(which: Demo, channel: Option<PathBuf>, out: &Output) -> Result<u8, Failure> {
    let mut c = load_channel(channel.as_deref())?;
    let f = match which {
        Demo::Liar => build_nt_all(),
        Demo::Err => build_err_all(),
    };
    let report = analyze_self_reference(&mut c, &f).usage()?;
    out.emit(report.to_json(), || report.render_text());
    Ok(0)
}

fn bridge(world: &Path, channel: Option<PathBuf>, out: &Output) -> Result<u8, Failure> {
    let w = World::parse(&read_file(world)?)
        .with_context(|| format!("in {}", world.display()))
        .usage()?;
    let mut c = load_channel(channel.as_deref())?;
    let report = verify_bridge(&mut c, &w, &w.ground_corpus());
    out.emit(report.to_json(), || report.render_table());
    Ok(if report.agree { 0 } else { EXIT_NEGATIVE })
}

fn serve(
    bind: &str,
    port: u16,
    opts: ServeOptions,
    once: bool,
    forward: Option<String>,
    channel: Option<PathBuf>,
    out: &Output,
) -> Result<u8, Failure> {
    let mut proxy_channel = match &forward {
        Some(_) => Some(load_channel(channel.as_deref())?),
        None => None,
    };
    let listener = TcpListener::bind((bind, port))
        .with_context(|| format!("binding {bind}:{port}"))
        .io()?;
    let addr = listener.local_addr().io()?;
    eprintln!("listening on {addr}");
    let mut status = 0;
    for stream in listener.incoming() {
        let stream = stream.context("accepting a connection").io()?;
        if let (Some(target), Some(c)) = (&forward, proxy_channel.as_mut()) {
            let upstream = TcpStream::connect(target.as_str())
                .with_context(|| format!("connecting to {target}"))
                .io()?;
            let n = proxy_connection(&stream, &upstream, c)
                .context("proxying")
                .io()?;
            upstream.shutdown(std::net::Shutdown::Write).io()?;
            out.emit(
                json!({ "forwarded": n, "to": target, "ts": c.ts().kind() }),
                || {
                    format!(
                        "forwarded {n} bytes to {target} through {}\n",
                        c.ts().kind()
                    )
                },
            );
        } else {
            let report = handle_connection(&stream, &opts)
                .context("reading connection")
                .io()?;
            if !report.clean() {
                status = EXIT_NEGATIVE;
            }
            out.emit(report.to_json(), || report.render_text());
        }
        io::stdout().flush().io()?;
        if once {
            break;
        }
    }
    Ok(status)
}
