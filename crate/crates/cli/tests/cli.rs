use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/timeline")
        .join(name)
}

fn vulnprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnprop"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = vulnprop(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ingests and matches the seven-version fixture; returns the graph path.
fn timeline_graph(dir: &TempDir) -> PathBuf {
    let graph = dir.path().join("timeline.ndjson");
    let warnings = dir.path().join("warnings.ndjson");
    ok(&[
        "ingest",
        "--index",
        s(&fixture("index.ndjson")),
        "--metadata",
        s(&fixture("metadata.ndjson")),
        "--graph",
        s(&graph),
        "--warnings",
        s(&warnings),
    ]);
    ok(&[
        "import-vulns",
        "--graph",
        s(&graph),
        "--feed",
        s(&fixture("nvd.json")),
        "--mapping",
        s(&fixture("mapping.ndjson")),
    ]);
    graph
}

#[test]
fn timeline_propagation_levels() {
    let dir = TempDir::new().unwrap();
    let graph = timeline_graph(&dir);
    let plot = dir.path().join("plot.csv");
    let table = ok(&[
        "propagation",
        "--graph",
        s(&graph),
        "--mode",
        "shortest",
        "--plot-data",
        s(&plot),
    ]);
    assert_eq!(table, "stratum,level,count\nall,0,1\nall,1,1\nall,2,1\n");
    assert_eq!(
        std::fs::read_to_string(plot).unwrap(),
        "level,count,stratum\n0,1,all\n1,1,all\n2,1,all\n"
    );
}

#[test]
fn timeline_upgrades() {
    let dir = TempDir::new().unwrap();
    let graph = timeline_graph(&dir);
    let table = ok(&["upgrades", "--graph", s(&graph), "--scope", "all"]);
    assert!(table.lines().any(|l| l == "total,all,1,2,0,0.333333"), "{table}");
    let json: serde_json::Value = serde_json::from_str(&ok(&[
        "upgrades",
        "--graph",
        s(&graph),
        "--format",
        "json",
        "--mode",
        "vuln-aware",
    ]))
    .unwrap();
    assert_eq!(json["report"]["fixed"], 1);
    assert_eq!(json["report"]["not_fixed"], 2);
    let latest = ok(&["upgrades", "--graph", s(&graph), "--scope", "latest"]);
    assert!(latest.lines().any(|l| l == "total,all,0,0,0,0.000000"), "{latest}");
}

#[test]
fn timeline_stats_and_precision() {
    let dir = TempDir::new().unwrap();
    let graph = timeline_graph(&dir);
    let stats: serde_json::Value =
        serde_json::from_str(&ok(&["stats", "--graph", s(&graph), "--format", "json"])).unwrap();
    assert_eq!(stats["total_libraries"], 3);
    assert_eq!(stats["latest_affected_fraction"], 0.0);
    let precision = ok(&["precision", "--graph", s(&graph), "--by-language"]);
    assert_eq!(precision.lines().nth(1), Some("Swift,1,1,0,0,1,1"));
}

#[test]
fn synth_then_reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let graph = dir.path().join(name);
        ok(&["synth", "--libraries", "10", "--seed", "1", "--graph", s(&graph)]);
        let mut all = String::new();
        let commands: [&[&str]; 4] = [
            &["stats"],
            &["propagation", "--mode", "all", "--stratify", "severity"],
            &["upgrades", "--group", "language"],
            &["precision"],
        ];
        for cmd in commands {
            let mut args = cmd.to_vec();
            args.extend(["--graph", s(&graph)]);
            all.push_str(&ok(&args));
        }
        runs.push((std::fs::read(&graph).unwrap(), all));
    }
    assert_eq!(runs[0], runs[1]);
    assert!(runs[0].1.starts_with("total_libraries,"));
}

#[test]
fn exit_codes() {
    assert_eq!(
        vulnprop(&["stats", "--graph", "/nonexistent/graph"]).status.code(),
        Some(1)
    );
    let out = vulnprop(&["propagation", "--graph", "g", "--mode", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--mode"));
    let bad = vulnprop(&[
        "synth",
        "--dependency-probability",
        "2",
        "--graph",
        "/nonexistent/dir/g",
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(vulnprop(&["--help"]).status.code(), Some(0));
}

#[test]
fn warnings_go_to_their_own_stream() {
    let dir = TempDir::new().unwrap();
    let index = dir.path().join("index.ndjson");
    std::fs::write(
        dir.path().join("Podfile.lock"),
        "PODS:\n  - Real (1.0):\n    - Missing\n  - ??? broken\n",
    )
    .unwrap();
    std::fs::write(
        &index,
        "{\"library\":\"app\",\"version\":\"1.0\",\"released\":100,\"lockfile\":\"Podfile.lock\"}\n",
    )
    .unwrap();
    let graph = dir.path().join("g");
    let warnings = dir.path().join("w.ndjson");
    let out = ok(&[
        "ingest",
        "--index",
        s(&index),
        "--graph",
        s(&graph),
        "--warnings",
        s(&warnings),
    ]);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(warnings).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let w: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(w["kind"].is_string());
    }
}
