use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use slavgae::data::{load_dataset, read_splits};
use slavgae::{Data, NodeRole};

fn run<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slavgae")).args(args).output().unwrap()
}

fn ok<S: AsRef<OsStr> + std::fmt::Debug>(args: &[S]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code<S: AsRef<OsStr>>(args: &[S]) -> Option<i32> {
    run(args).status.code()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        std::fs::write(
            root.join("sbm.json"),
            r#"{"blocks": 3, "nodes_per_block": 15, "p_intra": 0.25, "p_inter": 0.02, "feature_dim": 5}"#,
        )
        .unwrap();
        ok(&["synth", "--sbm-config", s(&root.join("sbm.json")), "--seed", "2", "--out", s(&root.join("data"))]);
        ok(&["split", "--data", s(&root.join("data")), "--out", s(&root.join("splits.csv")), "--labeling-rate", "0.4"]);
        std::fs::write(
            root.join("config.json"),
            r#"{"hidden_dim": 8, "latent_dim": 4, "max_epochs": 6, "lr": 0.02, "ablation": {"no_pseudo": false}}"#,
        )
        .unwrap();
        Self { _tmp: tmp, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn train(&self, out: &str, extra: &[&str]) -> PathBuf {
        let dir = self.path(out);
        let (data, splits, config) = (self.path("data"), self.path("splits.csv"), self.path("config.json"));
        let mut args = vec!["train", "--data", s(&data), "--splits", s(&splits), "--config", s(&config), "--out", s(&dir)];
        args.extend_from_slice(extra);
        ok(&args);
        dir
    }

    fn data(&self) -> Data {
        load_dataset(&self.path("data")).unwrap()
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_required_flags_are_usage_errors() {
    assert_eq!(code(&["train", "--splits", "x", "--out", "y"]), Some(2));
    assert_eq!(code(&["eval", "--data", "x", "--splits", "y"]), Some(2));
    assert_eq!(code(&["predict", "--checkpoint", "x", "--data", "y"]), Some(2));
    assert_eq!(code(&["synth"]), Some(2));
    assert_eq!(code(&["split", "--out", "x"]), Some(2));
    assert_eq!(code(&["sweep", "--data", "x", "--param", "theta"]), Some(2));
    assert_eq!(code(&["gradcheck", "--set", "nonsense"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
}

#[test]
fn train_writes_artifacts_and_cli_overrides_file() {
    let f = Fixture::new();
    let out = f.train("run", &["--set", "ablation.no_pseudo=true", "--set", "theta=0.5", "--seed", "9"]);
    let cfg = json(&out.join("resolved-config.json"));
    assert_eq!(cfg["ablation"]["no_pseudo"], Value::Bool(true));
    assert_eq!(cfg["theta"], 0.5);
    assert_eq!(cfg["hidden_dim"], 8);
    assert_eq!(cfg["seed"], 9);
    assert_eq!(cfg["patience"], 30);

    let metrics = json(&out.join("metrics.json"));
    for role in ["val", "test"] {
        let acc = metrics[role]["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,label_loss,feature_loss,kl_loss,total_loss,accepted_pseudo,val_accuracy,val_mcc\n"));
    assert_eq!(history.lines().count(), 1 + metrics["epochs_run"].as_u64().unwrap() as usize);
    assert!(out.join("checkpoint.json").is_file());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let f = Fixture::new();
    let a = f.train("a", &["--set", "k=3", "--seed", "4"]);
    let b = f.path("b");
    ok(&[
        "train",
        "--data",
        s(&f.path("data")),
        "--splits",
        s(&f.path("splits.csv")),
        "--config",
        s(&a.join("resolved-config.json")),
        "--out",
        s(&b),
    ]);
    for file in ["checkpoint.json", "history.csv", "metrics.json", "resolved-config.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn bad_config_exits_two() {
    let f = Fixture::new();
    let (data, splits, out) = (f.path("data"), f.path("splits.csv"), f.path("bad"));
    for set in ["bogus=1", "theta=2.0", "ablation.nope=true", "hidden_dim=\"wide\""] {
        let args = ["train", "--data", s(&data), "--splits", s(&splits), "--out", s(&out), "--set", set];
        assert_eq!(code(&args), Some(2), "{set}");
    }
    assert!(!out.join("checkpoint.json").exists());
}

#[test]
fn runtime_failures_exit_one() {
    let f = Fixture::new();
    let missing = f.path("nowhere");
    assert_eq!(
        code(&["train", "--data", s(&missing), "--splits", s(&f.path("splits.csv")), "--out", s(&f.path("o"))]),
        Some(1)
    );
    let diverging = code(&[
        "train",
        "--data",
        s(&f.path("data")),
        "--splits",
        s(&f.path("splits.csv")),
        "--out",
        s(&f.path("o")),
        "--set",
        "optimizer=\"sgd\"",
        "--set",
        "lr=1e300",
        "--set",
        "hidden_dim=8",
        "--set",
        "latent_dim=4",
    ]);
    assert_eq!(diverging, Some(1));
}

#[test]
fn eval_and_predict_agree_with_training_metrics() {
    let f = Fixture::new();
    let out = f.train("run", &[]);
    let ckpt = out.join("checkpoint.json");
    let metrics = json(&out.join("metrics.json"));
    let eval = |role: &str| {
        ok(&["eval", "--checkpoint", s(&ckpt), "--data", s(&f.path("data")), "--splits", s(&f.path("splits.csv")), "--role", role])
    };
    let line = eval("test");
    assert_eq!(line, eval("test"));
    let acc: f64 = line.split_whitespace().find_map(|kv| kv.strip_prefix("accuracy=")).unwrap().parse().unwrap();
    assert_eq!(acc, metrics["test"]["accuracy"].as_f64().unwrap());
    assert!(eval("val").contains(&format!("accuracy={}", metrics["val"]["accuracy"].as_f64().unwrap())));

    let preds = f.path("pred.csv");
    ok(&["predict", "--checkpoint", s(&ckpt), "--data", s(&f.path("data")), "--splits", s(&f.path("splits.csv")), "--out", s(&preds)]);
    let ds = f.data();
    let splits = read_splits(&f.path("splits.csv"), ds.node_count()).unwrap();
    let mut reader = csv::Reader::from_path(&preds).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["node_id", "predicted_class", "max_probability"]);
    let rows: Vec<(usize, usize, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), ds.node_count());
    let test = splits.nodes_with(NodeRole::Test);
    let hits = test.iter().filter(|&&i| rows[i].1 as i64 == ds.labels[i]).count();
    assert_eq!(hits as f64 / test.len() as f64, acc);
    for (i, (node, class, p)) in rows.iter().enumerate() {
        assert_eq!(*node, i);
        assert!(*class < ds.class_count);
        assert!(*p >= 1.0 / ds.class_count as f64 - 1e-12 && *p <= 1.0);
    }
}

#[test]
fn eval_rejects_unknown_or_empty_role() {
    let f = Fixture::new();
    let out = f.train("run", &[]);
    let (ckpt, data, splits) = (out.join("checkpoint.json"), f.path("data"), f.path("splits.csv"));
    let eval = |role: &str| code(&["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--splits", s(&splits), "--role", role]);
    assert_eq!(eval("everyone"), Some(2));
    assert_eq!(eval("test"), Some(0));
}

#[test]
fn synth_is_deterministic_and_matches_config() {
    let f = Fixture::new();
    let again = f.path("again");
    ok(&["synth", "--sbm-config", s(&f.path("sbm.json")), "--seed", "2", "--out", s(&again)]);
    for file in ["meta.txt", "edges.txt", "features.csv", "labels.csv"] {
        assert_eq!(std::fs::read(f.path("data").join(file)).unwrap(), std::fs::read(again.join(file)).unwrap(), "{file}");
    }
    let ds = f.data();
    assert_eq!((ds.node_count(), ds.feature_dim(), ds.class_count), (45, 5, 3));
    for i in 0..45 {
        assert_eq!(ds.labels[i], (i / 15) as i64);
    }
}

#[test]
fn gradcheck_passes_on_several_instances() {
    let out = ok(&["gradcheck", "--instances", "4", "--seed", "3"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("instance=")).count(), 4);
    assert!(out.lines().last().unwrap().starts_with("ok "));
    assert_eq!(code(&["gradcheck", "--set", "ablation.no_label=true"]), Some(0));
}

#[test]
fn sweep_rows_summarize_independent_runs() {
    let f = Fixture::new();
    let out = f.path("sweep.csv");
    ok(&[
        "sweep", "--data", s(&f.path("data")), "--param", "K", "--values", "1,3", "--seeds", "2", "--labeling-rate", "0.4",
        "--config", s(&f.path("config.json")), "--seed", "10", "--out", s(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,value,seeds,test_accuracy_mean,test_accuracy_std,test_mcc_mean,test_mcc_std");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("K,1,2,") && lines[2].starts_with("K,3,2,"));

    // the K=3 row is the mean of two single-seed runs at seeds 10 and 11
    let single = |seed: &str| -> f64 {
        let p = f.path(&format!("one-{seed}.csv"));
        ok(&[
            "sweep", "--data", s(&f.path("data")), "--param", "K", "--values", "3", "--seeds", "1", "--labeling-rate", "0.4",
            "--config", s(&f.path("config.json")), "--seed", seed, "--out", s(&p),
        ]);
        let t = std::fs::read_to_string(&p).unwrap();
        t.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap()
    };
    let mean: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
    assert!((mean - (single("10") + single("11")) / 2.0).abs() < 1e-12);

    assert_eq!(code(&["sweep", "--data", s(&f.path("data")), "--param", "lr", "--values", "0.1"]), Some(2));
}
