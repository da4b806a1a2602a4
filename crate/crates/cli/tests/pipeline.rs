use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn gut(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gut"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run gut")
}

fn ok(out: &Path, args: &[&str]) {
    let o = gut(out, args);
    assert!(
        o.status.success(),
        "gut {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(out: &Path) -> Vec<Value> {
    std::fs::read_to_string(out.join("manifest.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn outputs(entries: &[Value]) -> Vec<(String, BTreeMap<String, String>)> {
    entries
        .iter()
        .map(|e| {
            let map = e["outputs"]
                .as_object()
                .unwrap()
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().unwrap().to_string()))
                .collect();
            (e["stage"].as_str().unwrap().to_string(), map)
        })
        .collect()
}

const CHAIN: [&[&str]; 6] = [
    &["train"],
    &["similarity"],
    &["candidates"],
    &["sweep"],
    &["evaluate"],
    &["sweep"],
];

#[test]
fn synthetic_chain_beats_pretrained_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(
        out,
        &["synth", "--n", "300", "--clusters", "100", "--dim", "16", "--noise", "0.6", "--distractor-dim", "48"],
    );
    for args in &CHAIN[..5] {
        ok(out, args);
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("evaluation.json")).unwrap()).unwrap();
    let auc = report["roc_auc"].as_f64().unwrap();
    let raw = report["raw_roc_auc"].as_f64().unwrap();
    assert!(auc >= 0.95, "projected test ROC-AUC {auc}");
    assert!(raw < 0.85, "pretrained test ROC-AUC {raw}");
    for key in ["ami", "pairwise", "baseline", "config_sha256", "curves"] {
        assert!(!report[key].is_null(), "missing {key}");
    }
    assert_eq!(report["curves"]["construct"].as_array().unwrap().len(), 21);

    // Every recorded input hash matches the latest output of an earlier stage.
    let entries = manifest(out);
    assert_eq!(entries.len(), 6);
    let mut produced: BTreeMap<String, String> = BTreeMap::new();
    for e in &entries {
        for (path, hash) in e["inputs"].as_object().unwrap() {
            assert_eq!(produced.get(path), Some(&hash.as_str().unwrap().to_string()), "{path}");
        }
        for (path, hash) in e["outputs"].as_object().unwrap() {
            produced.insert(path.clone(), hash.as_str().unwrap().to_string());
        }
        assert!(e["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn reruns_reproduce_every_artifact() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = dir.path();
            ok(out, &["synth", "--n", "60", "--clusters", "20", "--seed", "3"]);
            for args in CHAIN {
                let mut a = args.to_vec();
                a.extend(["--seed", "3"]);
                if args[0] == "train" {
                    a.extend(["--epochs", "3"]);
                }
                ok(out, &a);
            }
            (outputs(&manifest(out)), dir)
        })
        .collect();
    assert_eq!(runs[0].0, runs[1].0);
    // The second sweep over the same pool is byte-identical to the first.
    let sweeps: Vec<_> = runs[0].0.iter().filter(|(s, _)| s == "sweep").collect();
    assert_eq!(sweeps[0].1, sweeps[1].1);
}

#[test]
fn missing_upstream_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = gut(out, &["sweep"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `gut candidates` first"), "{}", stderr(&o));
    let o = gut(out, &["train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run `gut synth` first"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for args in [
        &["synth", "--n", "5", "--clusters", "6"][..],
        &["synth", "--bogus"],
        &["frobnicate"],
        &["evaluate", "--purity", "items"],
        &["train", "--jobs", "0"],
    ] {
        let o = gut(out, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let config = out.join("bad.toml");
    std::fs::write(&config, "[sweep]\nalpha_stp = 0.1\n").unwrap();
    let o = gut(out, &["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha_stp"));

    let o = Command::new(env!("CARGO_BIN_EXE_gut")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn config_file_drives_the_stages() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gut.toml");
    std::fs::write(
        &config,
        "seed = 5\nout = \"run\"\n[synth]\nn = 40\nclusters = 10\n[train]\nepochs = 2\n\
         [candidates]\ntaus = [0.6]\nagglomerative_k = [5, 10]\nagglomerative_distance = []\n\
         spectral_k = [10]\nleiden_resolution = [1.0]\n[sweep]\nalpha_step = 0.25\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_gut"))
            .args(args)
            .arg("--config")
            .arg(&config)
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    for stage in ["synth", "train", "similarity", "candidates", "sweep", "evaluate"] {
        run(&[stage]);
    }
    let out = dir.path().join("run");
    let sweep: Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["sweeps"][0]["alpha_grid"].as_array().unwrap().len(), 5);
    let methods: Vec<&str> = sweep["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["spec"]["method"].as_str().unwrap())
        .collect();
    assert!(methods.contains(&"spectral"));
    assert!(manifest(&out).iter().all(|e| e["seed"] == 5));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut response = String::new();
    stream.read_to_string(&mut response).ok()?;
    Some(response)
}

fn small_sweep(out: &Path) {
    ok(out, &["synth", "--n", "30", "--clusters", "10"]);
    ok(out, &["similarity", "--raw"]);
    ok(out, &["candidates"]);
    ok(out, &["sweep"]);
}

#[test]
fn serve_answers_healthz() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    small_sweep(out);
    let port = free_port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_gut"))
        .args(["serve", "--addr", &format!("127.0.0.1:{port}"), "--out"])
        .arg(out)
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let mut response = None;
    while started.elapsed() < Duration::from_secs(20) {
        if let Some(r) = http_get(port, "/healthz") {
            response = Some(r);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let partition = http_get(port, "/api/partition?alpha=0.61");
    child.kill().unwrap();
    child.wait().unwrap();
    let response = response.expect("server came up");
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains(r#"{"status":"ok"}"#));
    assert!(partition.unwrap().contains(r#""snapped_alpha":0.6"#));
}

#[test]
fn serve_startup_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    small_sweep(out);

    let held = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = held.local_addr().unwrap().to_string();
    let o = gut(out, &["serve", "--addr", &addr]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot bind"), "{}", stderr(&o));

    std::fs::write(out.join("sweep.json"), "{\n  \"alpha_step\": 0.05,\n  \"sources\": [\n").unwrap();
    let o = gut(out, &["serve", "--addr", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}
