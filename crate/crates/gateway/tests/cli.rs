mod common;

use std::fs;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

fn rapport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rapport"))
        .args(args)
        .env("RAPPORT_DATA_DIR", common::data_dir())
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn copy_bank(to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(common::data_dir()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

#[test]
fn bank_validate_reports_every_violation() {
    assert!(stdout(&rapport(&["bank", "validate"])).starts_with("ok: 17 topics"));

    let dir = tempfile::tempdir().unwrap();
    copy_bank(dir.path());
    let mut hobbies = fs::OpenOptions::new().append(true).open(dir.path().join("hobbies.jsonl")).unwrap();
    writeln!(
        hobbies,
        r#"{{"id": "ghost_hunting", "display_name": "ghost hunting", "paraphrases": ["ghost hunting"], "linked_topics": ["nowhere"]}}"#
    )
    .unwrap();
    let out = rapport(&["--bank", dir.path().to_str().unwrap(), "bank", "validate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("nowhere"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 violation"));
}

#[test]
fn data_dir_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_rapport"))
        .args(["bank", "validate"])
        .env("RAPPORT_DATA_DIR", "/nonexistent/bank")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/bank"));
}

#[test]
fn nlu_match_prints_detections() {
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&rapport(&["nlu", "match", "I painted when I was young"]))).unwrap();
    assert_eq!(json["hobbies"], serde_json::json!(["painting"]));
}

#[test]
fn sim_then_reports() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    let out_dir = dir.path().join("report");
    let config = dir.path().join("sim.toml");
    fs::write(&config, "[population]\nseed = 5\n[behavior]\nseed = 6\n").unwrap();
    let summary = stdout(&rapport(&[
        "sim", "run", "--users", "300", "--config", config.to_str().unwrap(), "--out", logs.to_str().unwrap(),
    ]));
    assert!(summary.starts_with("300 conversation logs written"), "{summary}");

    let table = stdout(&rapport(&[
        "experiment", "run", "--logs", logs.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]));
    assert!(table.contains("Req. | A convs. | B convs."));
    assert_eq!(fs::read_to_string(out_dir.join("report.txt")).unwrap(), table);
    assert_eq!(fs::read_to_string(out_dir.join("report.csv")).unwrap().lines().count(), 5);

    let csv = stdout(&rapport(&["analytics", "report", "--kind", "hobby", "--logs", logs.to_str().unwrap(), "--format", "csv"]));
    assert!(csv.starts_with("key,count"), "{csv}");
    let cont: serde_json::Value = serde_json::from_str(&stdout(&rapport(&[
        "analytics", "report", "--kind", "continuation", "--logs", logs.to_str().unwrap(), "--format", "json",
    ])))
    .unwrap();
    assert!(cont["asked"].as_u64().unwrap() > 0);
    let empty = stdout(&rapport(&[
        "analytics", "report", "--kind", "continuation", "--logs", logs.to_str().unwrap(), "--to", "2000-01-01",
    ]));
    assert!(empty.contains("no opinion questions"));

    let bad = rapport(&["analytics", "report", "--kind", "moods", "--logs", logs.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown report kind"));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "traffic_split = 2.0\n").unwrap();
    let out = rapport(&["experiment", "run", "--config", config.to_str().unwrap(), "--logs", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("traffic_split"));
}

#[test]
fn user_show_prints_a_fresh_model_for_unknown_users() {
    let dir = tempfile::tempdir().unwrap();
    let json: serde_json::Value = serde_json::from_str(&stdout(&rapport(&[
        "user", "show", "nobody", "--store", dir.path().to_str().unwrap(),
    ])))
    .unwrap();
    assert_eq!(json["user_id"], "nobody");
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    stream.write_all(request.as_bytes()).ok()?;
    let mut response = String::new();
    stream.read_to_string(&mut response).ok()?;
    Some(response)
}

#[test]
fn serve_answers_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let _server = Server(
        Command::new(env!("CARGO_BIN_EXE_rapport"))
            .args(["serve", "--port", &port.to_string()])
            .args(["--store", dir.path().join("users").to_str().unwrap()])
            .args(["--logs", dir.path().join("logs").to_str().unwrap()])
            .env("RAPPORT_DATA_DIR", common::data_dir())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let deadline = Instant::now() + Duration::from_secs(20);
    let health = loop {
        if let Some(r) = http(port, "GET /healthz HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not start");
        thread::sleep(Duration::from_millis(50));
    };
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");

    let body = r#"{"user_id":"tcp-user"}"#;
    let created = http(
        port,
        &format!(
            "POST /sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    )
    .unwrap();
    assert!(created.starts_with("HTTP/1.1 201"), "{created}");
    assert!(dir.path().join("users").read_dir().unwrap().count() > 0);
}
