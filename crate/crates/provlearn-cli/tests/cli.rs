//! End-to-end tests of the `provlearn` binary: exit-code taxonomy, stream
//! discipline (results on stdout, diagnostics on stderr), and cross-run
//! determinism of generated artifacts.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::tempdir;

const W3C_LOG: &str = r#"{
  "activity": {"t1": {"prov:type": "task"}},
  "entity": {
    "f1": {"prov:type": "file"},
    "s1": {"prov:type": "socket"}
  },
  "used": {"u1": {"prov:activity": "t1", "prov:entity": "f1"}},
  "wasGeneratedBy": {"g1": {"prov:entity": "s1", "prov:activity": "t1"}}
}"#;

const SPADE_LOG: &str = r#"[
  {"type": "Process", "id": "p1", "annotations": {"object_type": "task"}},
  {"type": "Artifact", "id": "a1", "annotations": {"object_type": "file"}},
  {"type": "Used", "from": "p1", "to": "a1"}
]"#;

const DANGLING_LOG: &str = r#"{
  "activity": {"t1": {"prov:type": "task"}},
  "used": {"u1": {"prov:activity": "t1", "prov:entity": "ghost"}}
}"#;

fn provlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_provlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_code(out: &Output, expected: i32) {
    assert_eq!(
        out.status.code(),
        Some(expected),
        "stdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn help_exits_zero_everywhere() {
    for sub in ["convert", "stats", "generate", "featurize", "train", "evaluate", "report"] {
        let out = provlearn(&[sub, "--help"]);
        assert_code(&out, 0);
        assert!(stdout(&out).contains("Usage"), "{sub} help shows usage");
    }
    assert_code(&provlearn(&["--help"]), 0);
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_code(&provlearn(&[]), 1);
    assert_code(&provlearn(&["no-such-command"]), 1);
}

#[test]
fn convert_writes_graph_and_stats_line() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("log.json");
    fs::write(&log, W3C_LOG).unwrap();
    let out_path = dir.path().join("g.pgrf");

    let out = provlearn(&["convert", "--in", path_str(&log), "--out", path_str(&out_path)]);
    assert_code(&out, 0);
    assert!(out_path.exists());

    let line: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(line["num_nodes"], 3);
    assert_eq!(line["num_edges"], 2);

    // stats reprints the identical summary for the stored graph.
    let stats = provlearn(&["stats", "--in", path_str(&out_path)]);
    assert_code(&stats, 0);
    assert_eq!(stdout(&stats), stdout(&out));
}

#[test]
fn convert_auto_matches_explicit_format() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("spade.json");
    fs::write(&log, SPADE_LOG).unwrap();
    let auto = dir.path().join("auto.pgrf");
    let explicit = dir.path().join("explicit.pgrf");

    assert_code(
        &provlearn(&["convert", "--in", path_str(&log), "--out", path_str(&auto)]),
        0,
    );
    assert_code(
        &provlearn(&[
            "convert",
            "--in",
            path_str(&log),
            "--format",
            "spade",
            "--out",
            path_str(&explicit),
        ]),
        0,
    );
    assert_eq!(fs::read(&auto).unwrap(), fs::read(&explicit).unwrap());
}

#[test]
fn convert_reads_standard_input() {
    let dir = tempdir().unwrap();
    let out_path = dir.path().join("g.pgrf");
    let mut child = Command::new(env!("CARGO_BIN_EXE_provlearn"))
        .args(["convert", "--in", "-", "--out", path_str(&out_path)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(W3C_LOG.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_code(&out, 0);
    assert!(out_path.exists());
}

#[test]
fn truncated_json_fails_with_position() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("trunc.json");
    fs::write(&log, r#"{"activity": {"t1"#).unwrap();
    let out = provlearn(&[
        "convert",
        "--in",
        path_str(&log),
        "--out",
        path_str(&dir.path().join("g.pgrf")),
    ]);
    assert_code(&out, 2);
    let err = stderr(&out);
    assert!(err.contains("line") && err.contains("column"), "{err}");
}

#[test]
fn dangling_endpoints_follow_the_policy() {
    let dir = tempdir().unwrap();
    let log = dir.path().join("dangling.json");
    fs::write(&log, DANGLING_LOG).unwrap();
    let out_path = dir.path().join("g.pgrf");

    let fail = provlearn(&[
        "convert",
        "--in",
        path_str(&log),
        "--dangling",
        "fail",
        "--out",
        path_str(&out_path),
    ]);
    assert_code(&fail, 2);

    let synth = provlearn(&["convert", "--in", path_str(&log), "--out", path_str(&out_path)]);
    assert_code(&synth, 0);
    assert!(stderr(&synth).contains("WARN dangling-endpoint"), "{}", stderr(&synth));
}

#[test]
fn missing_input_is_an_io_failure() {
    assert_code(&provlearn(&["stats", "--in", "/nonexistent/g.pgrf"]), 3);
    assert_code(
        &provlearn(&["convert", "--in", "/nonexistent/log.json", "--out", "/tmp/x.pgrf"]),
        3,
    );
}

#[test]
fn stats_rejects_garbage_bytes() {
    let dir = tempdir().unwrap();
    let junk = dir.path().join("junk.bin");
    fs::write(&junk, b"\x00\x01\x02definitely not a graph").unwrap();
    assert_code(&provlearn(&["stats", "--in", path_str(&junk)]), 2);
}

fn generate_small(dir: &Path, seed: &str) {
    let out = provlearn(&[
        "generate",
        "--vector",
        "brute-force",
        "--benign",
        "4",
        "--attack",
        "4",
        "--seed",
        seed,
        "--scale",
        "0.02",
        "--out",
        path_str(dir),
    ]);
    assert_code(&out, 0);
}

#[test]
fn generate_writes_manifest_and_is_rerun_identical() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate_small(&a, "7");
    generate_small(&b, "7");

    let manifest = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(manifest, fs::read(b.join("manifest.json")).unwrap());
    let parsed: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(parsed["graphs"].as_array().unwrap().len(), 8);
    assert!(a.join("brute-force/benign/0.pgrf").exists());
    assert!(a.join("brute-force/attack/3.pgrf").exists());
}

#[test]
fn generate_rejects_bad_flags_before_io() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let bad_vector = provlearn(&[
        "generate",
        "--vector",
        "warp-drive",
        "--benign",
        "1",
        "--attack",
        "1",
        "--out",
        path_str(&out_dir),
    ]);
    assert_code(&bad_vector, 1);
    let bad_scale = provlearn(&[
        "generate",
        "--vector",
        "brute-force",
        "--benign",
        "1",
        "--attack",
        "1",
        "--scale",
        "0",
        "--out",
        path_str(&out_dir),
    ]);
    assert_code(&bad_scale, 1);
    assert!(!out_dir.exists(), "flag validation must precede any write");
}

#[test]
fn featurize_embeds_or_exports_json() {
    let dir = tempdir().unwrap();
    generate_small(&dir.path().join("ds"), "3");
    let graph = dir.path().join("ds/brute-force/attack/0.pgrf");

    let embedded = dir.path().join("with-features.pgrf");
    let out = provlearn(&["featurize", "--in", path_str(&graph), "--out", path_str(&embedded)]);
    assert_code(&out, 0);
    let line: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(line["feature_dim"].as_u64().unwrap() >= 2);
    assert!(embedded.metadata().unwrap().len() > graph.metadata().unwrap().len());

    let json_out = dir.path().join("features.json");
    let out = provlearn(&[
        "featurize",
        "--in",
        path_str(&graph),
        "--json",
        "--out",
        path_str(&json_out),
    ]);
    assert_code(&out, 0);
    // Keyed by node type; brute-force attack graphs are all sockets.
    let parsed: serde_json::Value =
        serde_json::from_slice(&fs::read(&json_out).unwrap()).unwrap();
    assert!(parsed["socket"]["schema"].is_array());
    assert!(parsed["socket"]["rows"].is_array());
}

#[test]
fn spectral_featurize_runs_on_a_small_graph() {
    let dir = tempdir().unwrap();
    generate_small(&dir.path().join("ds"), "4");
    let graph = dir.path().join("ds/brute-force/attack/1.pgrf");
    let out_path = dir.path().join("spec.pgrf");
    let out = provlearn(&[
        "featurize",
        "--in",
        path_str(&graph),
        "--features",
        "spectral",
        "--k",
        "2",
        "--out",
        path_str(&out_path),
    ]);
    assert_code(&out, 0);
    assert!(out_path.exists());
}

fn write_config(path: &Path) {
    fs::write(
        path,
        r#"{"epochs": 2, "hidden_dim": 4, "dropout": 0.0, "learning_rate": 0.01, "seed": 9}"#,
    )
    .unwrap();
}

#[test]
fn train_writes_summary_checkpoints_and_table() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("ds");
    generate_small(&ds, "5");
    let config = dir.path().join("config.json");
    write_config(&config);
    let run = dir.path().join("run");

    let out = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--config",
        path_str(&config),
        "--folds",
        "4",
        "--out",
        path_str(&run),
    ]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("mean"), "report table printed");
    assert!(run.join("summary.json").exists());
    for f in 0..4 {
        assert!(run.join(format!("checkpoints/fold{f}/last.ckpt")).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["folds"].as_array().unwrap().len(), 4);
}

#[test]
fn train_runs_are_byte_identical() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("ds");
    generate_small(&ds, "6");
    let config = dir.path().join("config.json");
    write_config(&config);

    let mut summaries = Vec::new();
    for name in ["run1", "run2"] {
        let run = dir.path().join(name);
        let out = provlearn(&[
            "train",
            "--dataset",
            path_str(&ds),
            "--config",
            path_str(&config),
            "--folds",
            "4",
            "--out",
            path_str(&run),
        ]);
        assert_code(&out, 0);
        summaries.push(fs::read(run.join("summary.json")).unwrap());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn train_flag_and_input_failures_use_the_taxonomy() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("ds");
    generate_small(&ds, "8");
    let run = dir.path().join("never");

    // --folds 1 is a usage error caught before any I/O.
    let folds = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--folds",
        "1",
        "--out",
        path_str(&run),
    ]);
    assert_code(&folds, 1);
    assert!(!run.exists());

    // Missing config file: I/O.
    let missing = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--config",
        path_str(&dir.path().join("absent.json")),
        "--out",
        path_str(&run),
    ]);
    assert_code(&missing, 3);

    // Unparseable config and invalid values: input format.
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ nope").unwrap();
    let malformed = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--config",
        path_str(&bad),
        "--out",
        path_str(&run),
    ]);
    assert_code(&malformed, 2);

    fs::write(&bad, r#"{"epochs": 0}"#).unwrap();
    let invalid = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--config",
        path_str(&bad),
        "--out",
        path_str(&run),
    ]);
    assert_code(&invalid, 2);

    // Tampered manifest: input format.
    let manifest = ds.join("manifest.json");
    let text = fs::read_to_string(&manifest).unwrap().replacen("\"nodes\": ", "\"nodes\": 9", 1);
    fs::write(&manifest, text).unwrap();
    let tampered = provlearn(&[
        "train",
        "--dataset",
        path_str(&ds),
        "--out",
        path_str(&run),
    ]);
    assert_code(&tampered, 2);
}

#[test]
fn evaluate_reports_metrics_for_a_checkpoint() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("ds");
    generate_small(&ds, "10");
    let config = dir.path().join("config.json");
    write_config(&config);
    let run = dir.path().join("run");
    assert_code(
        &provlearn(&[
            "train",
            "--dataset",
            path_str(&ds),
            "--config",
            path_str(&config),
            "--folds",
            "4",
            "--out",
            path_str(&run),
        ]),
        0,
    );

    let metrics_path = dir.path().join("metrics.json");
    let out = provlearn(&[
        "evaluate",
        "--model",
        path_str(&run.join("checkpoints/fold0/best.ckpt")),
        "--dataset",
        path_str(&ds),
        "--out",
        path_str(&metrics_path),
    ]);
    assert_code(&out, 0);
    let line: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(line["f1"].is_number());
    assert_eq!(fs::read_to_string(&metrics_path).unwrap(), stdout(&out));

    assert_code(
        &provlearn(&["evaluate", "--model", "/nonexistent.ckpt", "--dataset", path_str(&ds)]),
        3,
    );

    // A truncated checkpoint is malformed input, not an I/O failure.
    let stub = dir.path().join("stub.ckpt");
    fs::write(&stub, b"RGCN").unwrap();
    assert_code(
        &provlearn(&["evaluate", "--model", path_str(&stub), "--dataset", path_str(&ds)]),
        2,
    );
}

#[test]
fn report_renders_all_formats_from_summary_json() {
    let dir = tempdir().unwrap();
    let ds = dir.path().join("ds");
    generate_small(&ds, "12");
    let config = dir.path().join("config.json");
    write_config(&config);
    let run = dir.path().join("run");
    assert_code(
        &provlearn(&[
            "train",
            "--dataset",
            path_str(&ds),
            "--config",
            path_str(&config),
            "--folds",
            "4",
            "--out",
            path_str(&run),
        ]),
        0,
    );
    let summary = run.join("summary.json");

    let csv = provlearn(&["report", "--summary", path_str(&summary), "--format", "csv"]);
    assert_code(&csv, 0);
    assert_eq!(stdout(&csv).lines().count(), 6, "header, four folds, aggregate");

    // JSON rendering reproduces the summary file byte for byte.
    let json = provlearn(&["report", "--summary", path_str(&summary), "--format", "json"]);
    assert_code(&json, 0);
    assert_eq!(json.stdout, fs::read(&summary).unwrap());

    let to_file = dir.path().join("table.txt");
    let text = provlearn(&[
        "report",
        "--summary",
        path_str(&summary),
        "--out",
        path_str(&to_file),
    ]);
    assert_code(&text, 0);
    assert!(fs::read_to_string(&to_file).unwrap().contains("mean"));

    assert_code(
        &provlearn(&["report", "--summary", path_str(&summary), "--format", "yaml"]),
        1,
    );
    let junk = dir.path().join("junk.json");
    fs::write(&junk, "not json").unwrap();
    assert_code(&provlearn(&["report", "--summary", path_str(&junk)]), 2);
}
