use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flowtriage"));
    c.args(args).env_remove("LLM_API_KEY");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output) -> Value {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {line}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, profile: &str, n: usize) -> std::path::PathBuf {
    let out = dir.join(profile);
    let v = ok_json(&run(&["synth", "--profile", profile, "--packages", &n.to_string(), "--seed", "5", "--out", p(&out)]));
    assert_eq!(v["packages"], n);
    out.join("manifest.csv")
}

#[test]
fn end_to_end_train_evaluate_rank() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noisy", 60);

    let out = run(&["validate", "--manifest", p(&manifest)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 60);

    let enc = dir.path().join("enc");
    let v = ok_json(&run(&["encode", "--manifest", p(&manifest), "--out", p(&enc)]));
    assert_eq!(v["packages"], 60);
    assert_eq!(std::fs::read_to_string(enc.join("encoded.jsonl")).unwrap().lines().count(), 60);

    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "manifest = \"noisy/manifest.csv\"\noutput_dir = \"results\"\nmodels = [\"logistic-max\"]\n").unwrap();
    let v = ok_json(&run(&["--sequential", "train", "--config", p(&cfg), "--seeds", "1,2", "--models", "logistic-avg,forest-max"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["split_sizes"]["train"], 48);
    let results = dir.path().join("results");
    assert!(results.join("summary.md").exists());

    let model = results.join("models/logistic-avg-seed1.model");
    let test_manifest = results.join("manifest.split.csv");
    let v = ok_json(&run(&["evaluate", "--model", p(&model), "--manifest", p(&test_manifest), "--split", "test"]));
    assert_eq!(v["packages"], 6);
    assert_eq!(v["model_id"], "logistic-avg-seed1");

    let report = dir.path().join("rank.csv");
    let v = ok_json(&run(&["rank", "--model", p(&model), "--manifest", p(&test_manifest), "--out", p(&report)]));
    assert_eq!(v["packages"], 60);
    assert_eq!(v["top_n"].as_array().unwrap().len(), 5);
    let csv = run(&["rank", "--model", p(&model), "--manifest", p(&test_manifest), "--split", "validate"]);
    assert_eq!(String::from_utf8_lossy(&csv.stdout).lines().count(), 7);

    let v = ok_json(&run(&["operating-point", "--scores", p(&report), "--min-precision", "0.5"]));
    assert!(v["precision"].as_f64().unwrap() >= 0.5);

    let v = ok_json(&run(&["kappa", p(&report), p(&report)]));
    assert_eq!(v["packages"], 60);
}

#[test]
fn baseline_reports_expected_values() {
    let v = ok_json(&run(&["baseline", "--pos", "137", "--neg", "52", "--p", "0.5", "--simulate", "2000"]));
    let row = &v[0];
    assert!((row["f1"].as_f64().unwrap() - 0.5918).abs() < 1e-3);
    assert!((row["simulated_f1"].as_f64().unwrap() - row["f1"].as_f64().unwrap()).abs() < 0.02);
    let v = ok_json(&run(&["baseline", "--pos", "137", "--neg", "52"]));
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(v[2]["f1"], 0.0);
}

#[test]
fn failures_are_json_on_stderr() {
    let e = err_json(&run(&["no-such-command"]));
    assert_eq!(e["error"], "usage");
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));

    let e = err_json(&run(&["evaluate", "--model", "/nonexistent.model", "--manifest", "/nonexistent.csv"]));
    assert_eq!(e["error"], "io");

    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "separable", 20);
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, format!("manifest = \"{}\"\nmodels = [\"xgboost\"]\n", p(&manifest))).unwrap();
    let e = err_json(&run(&["train", "--config", p(&cfg)]));
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("xgboost"));

    let bad_graph = dir.path().join("cyclic.json");
    std::fs::write(
        &bad_graph,
        r#"{"package":"c","vuln_type":"ACE","nodes":[
            {"id":1,"operation":"a","flows_from":[2],"file":"i.js","pos":[1,0,1,1]},
            {"id":2,"operation":"eval","flows_from":[1],"sink":"eval","file":"i.js","pos":[2,0,2,1]}]}"#,
    )
    .unwrap();
    let out = run(&["validate", p(&bad_graph)]);
    let e = err_json(&out);
    assert_eq!(e["error"], "validation");
    let line: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["accepted"], false);
    assert_eq!(line["package"], "c");
    assert_eq!(line["violations"][0]["kind"], "cycle");

    let e = err_json(&run(&["llm-zero-shot", "--manifest", p(&manifest), "--llm", "m"]));
    assert_eq!(e["error"], "llm");
    assert!(e["message"].as_str().unwrap().contains("LLM_API_KEY"));
}

/// Serves `responses.len()` HTTP requests with canned chat-completion
/// bodies, returning the request bodies it saw.
fn stub_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0u8; len];
            reader.read_exact(&mut req).unwrap();
            seen.push(String::from_utf8(req).unwrap());
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
        seen
    });
    (url, handle)
}

fn completion(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

#[test]
fn zero_shot_against_local_stub() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "separable", 3);
    let (url, server) = stub_server(vec![
        (200, completion("<think>Is this exploitable? Yes, maybe.</think>No")),
        (429, "{}".into()),
        (200, completion("Yes")),
        (200, completion("The answer is: yes")),
    ]);
    let transcript = dir.path().join("t.jsonl");
    let verdicts = dir.path().join("v.csv");
    let v = ok_json(&run_env(
        &["llm-zero-shot", "--manifest", p(&manifest), "--url", &url, "--llm", "stub-model", "--transcript", p(&transcript), "--out", p(&verdicts)],
        &[("LLM_API_KEY", "k")],
    ));
    assert_eq!(v["packages"], 3);
    assert_eq!(v["failed"], 0);
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 4);
    let req: Value = serde_json::from_str(&seen[0]).unwrap();
    assert_eq!(req["model"], "stub-model");
    assert_eq!(req["temperature"], 0.0);
    assert!(req["messages"][0]["content"].as_str().unwrap().starts_with("Our dynamic analysis tool"));

    let csv = std::fs::read_to_string(&verdicts).unwrap();
    let got: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(got, ["false", "true", "false"]);
    let records: Vec<Value> =
        std::fs::read_to_string(&transcript).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    assert_eq!(records[1]["attempts"], 2);
    assert_eq!(records[0]["reasoning_stripped"], true);
}
