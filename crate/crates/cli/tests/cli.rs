use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LEVELS: [&str; 4] = ["Observer", "Apprentice", "Journeyer", "Master"];

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trustgnn"));
    cmd.env("RUST_LOG", "warn");
    for (k, _) in std::env::vars() {
        if k.starts_with("TRUSTGNN_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Raw dump with named levels, a comment and Graphviz wrapping.
fn raw_graph() -> String {
    let n = 24;
    let mut text = String::from("digraph trust {\n# exported\n");
    for u in 0..n {
        for step in [1, 5, 11] {
            let v = (u * 7 + step) % n;
            if u != v {
                text.push_str(&format!(
                    "\"user{u}\" -> \"user{v}\" [level=\"{}\"];\n",
                    LEVELS[(u + 2 * step) % 4]
                ));
            }
        }
    }
    text.push_str("}\n");
    text
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// Converted dataset plus a small, fast config.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("raw.dot"), raw_graph()).unwrap();
        let out = run(dir.path(), &["convert", "raw.dot", "data/g.tsv"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::write(
            dir.path().join("small.conf"),
            "# tiny model\ndataset = data/g.tsv\noutput_dir = out\nnode_attr_dim = 8\nedge_attr_dim = 8\ndim = 8\nepochs = 12\nrepeats = 2\n",
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        run(self.dir.path(), args)
    }

    fn train(&self, extra: &[&str]) -> Output {
        let mut args = vec!["train", "--config", "small.conf"];
        args.extend_from_slice(extra);
        let out = self.run(&args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out
    }

    fn json(&self, rel: &str) -> serde_json::Value {
        serde_json::from_slice(&fs::read(self.path(rel)).unwrap()).unwrap()
    }
}

#[test]
fn convert_maps_level_names_and_is_idempotent() {
    let ws = Workspace::new();
    let tsv = fs::read_to_string(ws.path("data/g.tsv")).unwrap();
    let nodes = fs::read_to_string(ws.path("data/g.nodes.tsv")).unwrap();
    assert!(!tsv.contains('#'));
    assert_eq!(tsv.lines().count(), raw_graph().matches("->").count());
    // user0 -> user1 is the first edge, level index (0 + 2) % 4 = Journeyer
    assert_eq!(tsv.lines().next().unwrap(), "0\t1\t2");
    assert!(nodes.starts_with("0\tuser0\n1\tuser1\n"));

    let out = ws.run(&["convert", "data/g.tsv", "again/g.tsv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(ws.path("again/g.tsv")).unwrap(), tsv.as_bytes());
    assert_eq!(fs::read(ws.path("again/g.nodes.tsv")).unwrap(), nodes.as_bytes());
}

#[test]
fn convert_reports_the_bad_line() {
    let ws = Workspace::new();
    fs::write(ws.path("bad.tsv"), "a\tb\tmaster\nb\tc\tguru\n").unwrap();
    let out = ws.run(&["convert", "bad.tsv", "o.tsv"]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("line 2") && err.contains("guru"), "{err}");
    assert_eq!(err.trim().lines().count(), 1, "{err}");
}

#[test]
fn eval_reproduces_training_metrics() {
    let ws = Workspace::new();
    ws.train(&["--seed", "5"]);
    for f in [
        "checkpoint-full-seed5.json",
        "metrics-full-seed5.json",
        "history-full-seed5.tsv",
    ] {
        assert!(ws.path("out").join(f).is_file(), "{f} missing");
    }
    let out = ws.run(&[
        "eval",
        "--config",
        "small.conf",
        "--checkpoint",
        "out/checkpoint-full-seed5.json",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trained = ws.json("out/metrics-full-seed5.json");
    let evaluated = ws.json("out/eval-full-seed5.json");
    for key in ["micro_f1", "mae", "per_class_f1", "num_test"] {
        assert_eq!(trained["metrics"][key], evaluated["metrics"][key], "{key}");
    }
    let history = fs::read_to_string(ws.path("out/history-full-seed5.tsv")).unwrap();
    assert_eq!(
        history.lines().count(),
        1 + trained["history"]["train_loss"].as_array().unwrap().len()
    );
}

#[test]
fn eval_refuses_mismatched_checkpoints() {
    let ws = Workspace::new();
    ws.train(&[]);
    let out = ws.run(&[
        "eval",
        "--config",
        "small.conf",
        "--checkpoint",
        "out/checkpoint-full-seed0.json",
        "--dim",
        "4",
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("expected [8, 4], found [8, 8]"), "{err}");

    // same size, different edges
    let edited = fs::read_to_string(ws.path("data/g.tsv"))
        .unwrap()
        .replacen("0\t1\t2", "0\t1\t3", 1);
    fs::write(ws.path("data/g.tsv"), edited).unwrap();
    let out = ws.run(&[
        "eval",
        "--config",
        "small.conf",
        "--checkpoint",
        "out/checkpoint-full-seed0.json",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("fingerprint"), "{}", stderr(&out));
}

#[test]
fn predict_scores_both_directions_and_flags_unknown_ids() {
    let ws = Workspace::new();
    ws.train(&[]);
    fs::write(
        ws.path("pairs.tsv"),
        "user0\tuser1\nuser1\tuser0\n# skip\nuser0\tghost\nuser3\tuser9\n",
    )
    .unwrap();
    let out = ws.run(&[
        "predict",
        "--config",
        "small.conf",
        "--checkpoint",
        "out/checkpoint-full-seed0.json",
        "--pairs",
        "pairs.tsv",
        "--output",
        "out/pred.tsv",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(ws.path("out/pred.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0], ["src", "dst", "predicted_level", "p0", "p1", "p2", "p3"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(&rows[1][..2], ["user0", "user1"]);
    assert_eq!(&rows[2][..2], ["user1", "user0"]);
    assert_eq!(rows[3][2], "error");
    for row in [&rows[1], &rows[2], &rows[4]] {
        let p: Vec<f64> = row[3..].iter().map(|v| v.parse().unwrap()).collect();
        assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        let best = (0..4).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(row[2], best.to_string());
    }
}

#[test]
fn explain_writes_top_k_rows() {
    let ws = Workspace::new();
    ws.train(&[]);
    let out = ws.run(&[
        "explain",
        "--config",
        "small.conf",
        "--checkpoint",
        "out/checkpoint-full-seed0.json",
        "--top-k",
        "5",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(ws.path("out/explain-full-seed0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "chain_label,alpha,alpha_bar");
    assert_eq!(lines.len(), 6);
    let report = ws.json("out/explain-full-seed0.json");
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    let alphas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(alphas.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let ws = Workspace::new();
    let out = ws.run(&[
        "sweep",
        "--config",
        "small.conf",
        "--axis",
        "k",
        "--values",
        "1,2",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let tsv = fs::read_to_string(ws.path("out/sweep-k-full-seed0.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "k\tmicro_f1\tmae\tsucceeded\tfailed");
    assert!(lines[1].starts_with("1\t") && lines[2].starts_with("2\t"));
    assert!(lines[1].contains('%') && lines[1].contains('±'));
    let table = ws.json("out/sweep-k-full-seed0.json");
    assert_eq!(table["cells"][0]["summary"]["succeeded"], 2);
}

#[test]
fn repeated_training_writes_a_summary() {
    let ws = Workspace::new();
    ws.train(&["--repeat"]);
    let s = ws.json("out/summary-full-seed0.json");
    assert_eq!(s["per_run"].as_array().unwrap().len(), 2);
    assert_eq!(s["std"]["kind"], "sample");
    assert!(s["mean"]["micro_f1"].as_f64().unwrap() >= 0.0);
}

#[test]
fn flag_order_and_env_leave_the_run_unchanged() {
    let ws = Workspace::new();
    ws.train(&["--epochs", "3", "--output-dir", "a"]);
    let out = bin()
        .current_dir(ws.dir.path())
        .args(["train", "--output-dir", "b", "--config", "small.conf"])
        .env("TRUSTGNN_EPOCHS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = fs::read(ws.path("a/checkpoint-full-seed0.json")).unwrap();
    let b = fs::read(ws.path("b/checkpoint-full-seed0.json")).unwrap();
    assert_eq!(a, b);
    let report = ws.json("a/metrics-full-seed0.json");
    assert_eq!(report["config"]["epochs"], 3);
}

#[test]
fn usage_errors_exit_with_one() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["train", "--no-such-flag"])), 1);
    assert_eq!(code(&ws.run(&["frobnicate"])), 1);
    assert_eq!(code(&ws.run(&["train", "--output-dir", "o"])), 1);
    assert_eq!(code(&ws.run(&["train", "--config", "small.conf", "--dim", "7"])), 1);
    assert_eq!(
        code(&ws.run(&["train", "--config", "small.conf", "--dataset", "missing.tsv"])),
        1
    );
    assert_eq!(
        code(&ws.run(&["sweep", "--config", "small.conf", "--axis", "depth", "--values", "1"])),
        1
    );
    fs::write(ws.path("typo.conf"), "dataset = data/g.tsv\nepoch = 3\n").unwrap();
    let out = ws.run(&["train", "--config", "typo.conf", "--output-dir", "o"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("typo.conf:2"), "{}", stderr(&out));
    assert!(!ws.path("o").exists());
    let help = ws.run(&["train", "--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("--node-attr-dim"));
}

#[test]
fn selfcheck_passes_on_a_fresh_build() {
    let out = bin().args(["selfcheck", "--oracle-graphs", "50"]).output().unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.starts_with("PASS ")).count() >= 10, "{text}");
}
