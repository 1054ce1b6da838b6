use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn semchan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semchan"))
        .args(args)
        .env_remove("SEMCHAN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn encode_bits_golden() {
    let o = semchan(&["encode", "ON(112)", "--format", "bits"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "101001111010011101110000\n");

    let o = semchan(&["encode", "~ON(112)", "--format", "bits"]);
    assert_eq!(stdout(&o), "001001111010011101110000\n");
}

#[test]
fn encode_hex_golden() {
    // CRC over 01 00 08 01 00 02 4E 54 02 00 00, computed bit by bit elsewhere.
    let o = semchan(&["encode", "NT(*)", "--format", "hex"]);
    assert_eq!(stdout(&o), "A55A0100080100024E54020000E640\n");
}

#[test]
fn encode_json_golden() {
    let o = semchan(&["--json", "encode", "ON(112)"]);
    assert_eq!(
        stdout(&o),
        r#"{
  "bits": "101001111010011101110000",
  "body": "0100024F4E00000170",
  "proposition": "ON(112)",
  "triple": "(1,4F4E,112)",
  "wire": "A55A0100090100024F4E000001701537"
}
"#
    );
}

#[test]
fn decode_reads_back_a_frame() {
    let o = semchan(&[
        "--json",
        "decode",
        "A55A 0100 0901 0002 4F4E 0000 0170 1537",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["frames"][0]["proposition"], "ON(112)");
    assert_eq!(j["diagnostics"], serde_json::json!([]));

    let o = semchan(&["decode", "A55A0100090100024F4E000001701538"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CRC mismatch"));

    assert_eq!(semchan(&["decode", "zz"]).status.code(), Some(2));
}

#[test]
fn check_over_perfect_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "perfect.json", r#"{"kind": "perfect"}"#);
    let o = semchan(&["--json", "check", "ON(112)", "--channel", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        r#"{
  "recv": "ON(112)",
  "sent": "ON(112)",
  "trace": [],
  "verdict": "Transferable"
}
"#
    );
}

#[test]
fn check_over_full_inversion_is_negative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flip.json",
        r#"{"kind": "bitflip", "p": 1.0, "seed": 1}"#,
    );
    let o = semchan(&["--json", "check", "ON(112)", "--channel", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&o);
    assert_eq!(j["verdict"], "NonTransferable");
    assert!(j["recv"]["error"].is_string());
}

#[test]
fn transmit_appends_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flip.json",
        r#"{"kind": "bitflip", "p": 0.01, "seed": 9}"#,
    );
    let log = dir.path().join("t.jsonl");
    let log_s = log.to_str().unwrap();
    for _ in 0..2 {
        let o = semchan(&[
            "transmit",
            "ON(112)",
            "--channel",
            &cfg,
            "--transcript",
            log_s,
        ]);
        assert!(matches!(o.status.code(), Some(0 | 1)));
        assert!(stdout(&o).starts_with("received"));
    }
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    // A fresh process starts at use 0, so both runs are the same transmission.
    assert_eq!(lines[0], lines[1]);
    let keys: Vec<_> = lines[0].as_object().unwrap().keys().cloned().collect();
    assert_eq!(
        keys,
        ["n", "recv", "recv_bits", "seed", "sent", "sent_bits", "ts"]
    );
    assert_eq!(lines[0]["seed"], 9);
}

#[test]
fn seed_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flip.json",
        r#"{"kind": "bitflip", "p": 0.5, "seed": 1}"#,
    );
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_semchan"))
            .args(["--json", "transmit", "ON(112)", "--channel", &cfg])
            .env("SEMCHAN_SEED", seed)
            .output()
            .unwrap();
        json(&o)["transcript"].clone()
    };
    assert_eq!(run("77")["seed"], 77);
    assert_eq!(run("77"), run("77"));
    assert_ne!(run("77")["recv_bits"], run("78")["recv_bits"]);

    let o = Command::new(env!("CARGO_BIN_EXE_semchan"))
        .args(["check", "ON(112)", "--channel", &cfg])
        .env("SEMCHAN_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(
        semchan(&["check", "ON(112)", "--channel", "/no/such/file.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(semchan(&["encode", "ON(112"]).status.code(), Some(2));
    assert_eq!(semchan(&["encode"]).status.code(), Some(2));
    assert_eq!(semchan(&["bogus"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"kind": "bitflip"}"#);
    assert_eq!(
        semchan(&["check", "P(1)", "--channel", &bad]).status.code(),
        Some(2)
    );
    let unknown = write(dir.path(), "unknown.json", r#"{"kind": "warp"}"#);
    assert_eq!(
        semchan(&["check", "P(1)", "--channel", &unknown])
            .status
            .code(),
        Some(2)
    );

    // Nothing listens on port 1.
    assert_eq!(
        semchan(&["send", "--port", "1", "ON(112)"]).status.code(),
        Some(3)
    );
}

#[test]
fn demo_liar_is_paradoxical() {
    let o = semchan(&["demo", "liar"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("=> contradiction"));
    assert!(text.trim_end().ends_with("verdict: Paradoxical"));

    let j = json(&semchan(&["--json", "demo", "liar"]));
    assert_eq!(j["verdict"]["verdict"], "Paradoxical");
    assert_eq!(j["proposition"], "NT(*)");
    assert_eq!(
        j["branches"],
        serde_json::json!({"i": "contradiction", "ii": "contradiction"})
    );
}

#[test]
fn demo_err_is_paradoxical_then_not() {
    let j = json(&semchan(&["--json", "demo", "err"]));
    assert_eq!(j["verdict"]["verdict"], "Paradoxical");
    let text = stdout(&semchan(&["demo", "err"]));
    assert!(text.contains("Err(*) itself is not true"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "drop.json",
        r#"{"kind": "truncate", "max_bits": 0}"#,
    );
    let j = json(&semchan(&["--json", "demo", "err", "--channel", &cfg]));
    assert_eq!(j["verdict"]["verdict"], "NonTransferable");
    assert_eq!(
        j["branches"],
        serde_json::json!({"i": "unreachable", "ii": "consistent"})
    );
}

#[test]
fn bridge_agrees_on_two_predicate_world() {
    let dir = tempfile::tempdir().unwrap();
    let world = write(
        dir.path(),
        "w.txt",
        "# two predicates\ndomain: 1 2 3\nON(1)\n~ON(2)\nLit(3)\n",
    );
    let o = semchan(&["--json", "bridge", "--world", &world]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["agree"], true);
    assert_eq!(j["rows"].as_array().unwrap().len(), 2 * 3 * 2);
    assert_eq!(j["diagonal"]["consistent"], false);

    let text = stdout(&semchan(&["bridge", "--world", &world]));
    assert!(text.starts_with("proposition"));
    assert!(text.contains("agree=true (12 rows)"));

    let cfg = write(dir.path(), "flip.json", r#"{"kind": "bitflip", "p": 1.0}"#);
    let o = semchan(&["--json", "bridge", "--world", &world, "--channel", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["agree"], false);

    assert_eq!(
        semchan(&["bridge", "--world", "/no/such/world"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn diagonalize_reports_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let preds = write(dir.path(), "p.txt", "# predicates\nP\nNT\nTr\n");
    let o = semchan(&[
        "--json",
        "diagonalize",
        "--predicates",
        &preds,
        "--max-n",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["predicates"], serde_json::json!(["P", "NT", "Tr"]));
    assert_eq!(j["fixed_point"]["k"], 2);
    assert_eq!(j["fixed_point"]["k_prime"], 3);
    assert_eq!(j["fixed_point"]["identical"], true);
    assert_eq!(
        j["fixed_point"]["f_star_wire"],
        j["fixed_point"]["f_star_rhs_wire"]
    );
    assert_eq!(j["derived"][1]["B"], "[1, NT, [1, NT, 2]]");
    assert_eq!(j["cells"], 3 * 2 * 3);

    let dup = write(dir.path(), "dup.txt", "P\nP\n");
    assert_eq!(
        semchan(&["diagonalize", "--predicates", &dup])
            .status
            .code(),
        Some(2)
    );
}

/// Starts `semchan <global args> serve --port 0 --once` and returns it with its bound port.
fn spawn_server(global: &[&str]) -> (std::process::Child, u16) {
    let mut args = global.to_vec();
    args.extend(["serve", "--port", "0", "--once"]);
    spawn_with(&args)
}

/// Spawns the binary and reads the port from its "listening on" line.
fn spawn_with(extra: &[&str]) -> (std::process::Child, u16) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_semchan"))
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.as_mut().unwrap())
        .read_line(&mut line)
        .unwrap();
    let port = line.trim().rsplit(':').next().unwrap().parse().unwrap();
    (child, port)
}

#[test]
fn send_to_server() {
    let (server, port) = spawn_server(&["--json"]);
    let o = semchan(&["send", "--port", &port.to_string(), "ON(112)"]);
    assert_eq!(o.status.code(), Some(0));
    let out = server.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let j: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["frames"][0]["proposition"], "ON(112)");
    assert_eq!(j["frames"][0]["payload_bits"], "101001111010011101110000");
    assert_eq!(j["frames"][0]["frame"], "(1,4F4E,112)");
    assert_eq!(j["clean"], true);
}

#[test]
fn server_analyzes_liar_frame() {
    let (server, port) = spawn_with(&[
        "serve",
        "--port",
        "0",
        "--once",
        "--analyze",
        "--expect",
        "NT(*)",
    ]);
    semchan(&["send", "--port", &port.to_string(), "NT(*)"]);
    let out = server.wait_with_output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("NT(*)"));
    assert!(text.contains("expected NT(*): match"));
    assert!(text.contains("verdict: Paradoxical"));
}

#[test]
fn proxy_flip_reaches_server_as_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "flip.json",
        r#"{"kind": "bitflip", "p": 0.02, "seed": 5}"#,
    );
    let (server, sport) = spawn_server(&["--json"]);
    let target = format!("127.0.0.1:{sport}");
    let (proxy, pport) = spawn_with(&[
        "serve",
        "--port",
        "0",
        "--once",
        "--forward",
        &target,
        "--channel",
        &cfg,
    ]);
    semchan(&["send", "--port", &pport.to_string(), "ON(112)"]);
    assert_eq!(proxy.wait_with_output().unwrap().status.code(), Some(0));
    let out = server.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let j: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(j["frames"], serde_json::json!([]));
    assert_eq!(j["diagnostics"][0]["kind"], "crc_mismatch");
}

#[test]
fn proxy_truncation_reports_short_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cut.json",
        r#"{"kind": "truncate", "max_bits": 64}"#,
    );
    let (server, sport) = spawn_server(&["--json"]);
    let target = format!("127.0.0.1:{sport}");
    let (proxy, pport) = spawn_with(&[
        "serve",
        "--port",
        "0",
        "--once",
        "--forward",
        &target,
        "--channel",
        &cfg,
    ]);
    semchan(&["send", "--port", &pport.to_string(), "ON(112)"]);
    proxy.wait_with_output().unwrap();
    let j: Value = serde_json::from_slice(&server.wait_with_output().unwrap().stdout).unwrap();
    assert_eq!(j["bytes"], 8);
    assert_eq!(j["diagnostics"][0]["kind"], "truncated");
}
