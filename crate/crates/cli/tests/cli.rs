use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn amrsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amrsynth")).args(args).env_remove("SMARAGD_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn smatch_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.amr", "(r / run-01 :ARG0 (d / duck))\n");
    let b = write(dir.path(), "b.amr", "(x / run-01 :ARG0 (y / duck) :mod (z / fast))\n");
    let out = amrsynth(&["smatch", &a, &b, "--aligner", "exact"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("F1: 0.8000"), "{}", stdout(&out));
    let v = json(&amrsynth(&["smatch", &a, &b, "--aligner", "exact", "--json"]));
    assert!((v["f1"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["pairs"][0]["alignment"], "d:y r:x ∅:z");
    assert_eq!(v["config"]["seed"], 0);

    let same = amrsynth(&["smatch", &a, &a]);
    assert!(stdout(&same).contains("F1: 1.0000"));
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(amrsynth(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(amrsynth(&["smatch", "--bogus"]).status.code(), Some(1));
    assert_eq!(amrsynth(&["smatch", "x", "y", "--aligner", "magic"]).status.code(), Some(1));
    assert_eq!(amrsynth(&["--help"]).status.code(), Some(0));
    let bad = write(dir.path(), "bad.amr", "(a / cat :ARG0 (b / dog)\n");
    let out = amrsynth(&["parse", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
    assert_eq!(amrsynth(&["parse", &p(dir.path(), "missing.amr")]).status.code(), Some(2));
}

#[test]
fn parse_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write(dir.path(), "bank.amr", "# ::id s1\n(a / want-01 :ARG0 (b / boy) :ARG1 (c / go-01 :ARG0 b))\n\n# ::id s2\n(x / cat)\n");
    let v = json(&amrsynth(&["parse", &bank, "--json"]));
    assert_eq!(v["graphs"].as_array().unwrap().len(), 2);
    assert_eq!(v["graphs"][0]["id"], "s1");
    assert_eq!(v["graphs"][0]["triples"].as_array().unwrap().len(), 7);
    let text = stdout(&amrsynth(&["parse", &bank, "--compact"]));
    assert!(text.contains("(x / cat)"));
}

#[test]
fn dataset_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let syn = p(d, "syn.jsonl");
    assert!(amrsynth(&["gen-synthetic", "-n", "30", "-o", &syn, "--seed", "4"]).status.success());
    let again = p(d, "syn2.jsonl");
    assert!(amrsynth(&["gen-synthetic", "-n", "30", "-o", &again, "--seed", "4"]).status.success());
    assert_eq!(fs::read(&syn).unwrap(), fs::read(&again).unwrap());
    assert_eq!(fs::read_to_string(&syn).unwrap().lines().count(), 30);

    let anon = p(d, "anon.jsonl");
    assert!(amrsynth(&["anonymize", &syn, "-o", &anon]).status.success());
    let aug = p(d, "aug.jsonl");
    let v = json(&amrsynth(&["augment", &anon, "-k", "10", "-o", &aug, "--json"]));
    assert_eq!(v["records"], 300);
    assert_eq!(fs::read_to_string(&aug).unwrap().lines().count(), 300);
    // Augmenting raw records is a contract error.
    assert_eq!(amrsynth(&["augment", &syn, "-k", "2", "-o", &p(d, "x.jsonl")]).status.code(), Some(2));

    let (src, tgt) = (p(d, "src.txt"), p(d, "tgt.txt"));
    assert!(amrsynth(&["emit-seq2seq", &syn, "--source", &src, "--target", &tgt]).status.success());
    assert_eq!(fs::read_to_string(&src).unwrap().lines().count(), 30);

    // Gold alignments fed back as predictions reach the upper bound.
    let v = json(&amrsynth(&["eval", &syn, "--alignments", &tgt, "--random", "--json"]));
    assert_eq!(v["upper_bound"]["gold"], v["upper_bound"]["predicted"]);
    assert_eq!(v["reports"][0]["predictor"], "random alignment");
}

#[test]
fn dataset_from_banks_with_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let graphs = ["(a / cat)", "(r / run-01 :ARG0 (d / duck))", "(w / want-01 :ARG0 (b / boy))", "(x / dog :mod (y / big))"];
    let a = write(d, "a.amr", &graphs.join("\n\n"));
    let b = write(d, "b.amr", &graphs.iter().rev().cloned().collect::<Vec<_>>().join("\n\n"));
    let out = p(d, "splits");
    let v = json(&amrsynth(&["dataset", &a, &b, "-o", &out, "--split", "2,1,1", "--json"]));
    assert_eq!(v["records"], 4);
    for name in ["train", "dev", "test"] {
        assert!(Path::new(&out).join(format!("{name}.jsonl")).exists());
    }
    let bad = amrsynth(&["dataset", &a, &b, "-o", &out, "--split", "1,1,1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn train_predict_matrix_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (tr, dev) = (p(d, "train.jsonl"), p(d, "dev.jsonl"));
    assert!(amrsynth(&["gen-synthetic", "-n", "40", "-o", &tr, "--max-nodes", "5"]).status.success());
    assert!(amrsynth(&["gen-synthetic", "-n", "10", "-o", &dev, "--max-nodes", "5", "--seed", "1"]).status.success());
    let (ckpt, log) = (p(d, "model.bin"), p(d, "log.csv"));
    let v = json(&amrsynth(&[
        "train", "--train", &tr, "--dev", &dev, "-o", &ckpt, "--log", &log, "--model", "vector", "--size", "tiny", "--epochs", "2",
        "--json",
    ]));
    assert_eq!(v["log"]["epochs"].as_array().unwrap().len(), 2);
    assert!(fs::read_to_string(&log).unwrap().starts_with("epoch,train_loss,dev_rho\n"));

    let v = json(&amrsynth(&["predict", &dev, "--model", &ckpt, "--json"]));
    assert_eq!(v["predictions"].as_array().unwrap().len(), 10);

    let bank = write(d, "bank.amr", "# ::id a\n(a / cat)\n\n# ::id b\n(a / cat)\n\n# ::id c\n(r / run-01 :ARG0 (d / duck))\n");
    let v = json(&amrsynth(&["matrix", &bank, "--method", "vector", "--model", &ckpt, "--json"]));
    assert_eq!(v["encoder_calls"], 3);
    assert_eq!(v["pairs"], 3);
    assert_eq!(v["matrix"][0][1], 1.0);
    assert_eq!(amrsynth(&["matrix", &bank, "--method", "score"]).status.code(), Some(1));
    // A vector checkpoint cannot serve the score method.
    assert_eq!(amrsynth(&["matrix", &bank, "--method", "score", "--model", &ckpt]).status.code(), Some(2));

    let tsv = p(d, "m.tsv");
    assert!(amrsynth(&["matrix", &bank, "--aligner", "exact", "-o", &tsv]).status.success());
    assert!(fs::read_to_string(&tsv).unwrap().starts_with("\ta\tb\tc\n"));
    let labels = stdout(&amrsynth(&["cluster", &tsv, "-k", "2"]));
    assert_eq!(labels.trim(), "a\t0\nb\t0\nc\t1");
    assert_eq!(amrsynth(&["cluster", &tsv, "-k", "9"]).status.code(), Some(1));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "s.jsonl");
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_amrsynth"));
        c.args(["gen-synthetic", "-n", "5", "-o", &out, "--json"]).env_remove("SMARAGD_SEED");
        if let Some(s) = env {
            c.env("SMARAGD_SEED", s);
        }
        let v = json(&c.output().unwrap());
        (v["config"]["seed"].clone(), fs::read_to_string(&out).unwrap())
    };
    let (seed, a) = run(Some("9"));
    assert_eq!(seed, 9);
    let (_, b) = run(Some("9"));
    assert_eq!(a, b);
    let (seed, c) = run(None);
    assert_eq!(seed, 0);
    assert_ne!(a, c);
}

#[test]
fn grad_check_passes() {
    let v = json(&amrsynth(&["grad-check", "--json"]));
    assert_eq!(v["passed"], true);
    assert!(v["max_rel"].as_f64().unwrap() < 1e-4);
}
