use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphrel"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small toy corpus plus a config sized to train in about a second.
fn toy_setup(dir: &Path) -> PathBuf {
    ok(&["generate-toy", "--out", s(&dir.join("data")), "--n-train", "60", "--n-dev", "20", "--seed", "3"]);
    let cfg = dir.join("toy.toml");
    fs::write(
        &cfg,
        r#"
[dataset]
name = "toy"
format = "json-triples"
train = "data/train.json"
dev = "data/dev.json"

[embeddings]
kind = "hash-random"
seed = 0
d_f = 16

[model]
d_h = 8
d_tag = 4
l_psi = 1
l_phi = 1
d_lstm = 8
d_edge = 16
d_rel = 8
top_k = 2

[train]
max_steps = 40
eval_every = 20
"#,
    )
    .unwrap();
    cfg
}

#[test]
fn training_twice_gives_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path());
    for out in ["a", "b"] {
        ok(&["train", "--config", s(&cfg), "--seed", "1", "--out", s(&dir.path().join(out))]);
    }
    let a = fs::read(dir.path().join("a/seed1/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("b/seed1/metrics.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for f in ["best.json", "last.json", "config.toml"] {
        assert!(dir.path().join("a/seed1").join(f).exists(), "{f} missing");
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path());
    ok(&["train", "--config", s(&cfg), "--seed", "2", "--set", "model.l_phi=0", "--out", s(&dir.path().join("a"))]);
    let echoed = dir.path().join("a/seed2/config.toml");
    ok(&["train", "--config", s(&echoed), "--out", s(&dir.path().join("b"))]);
    assert_eq!(
        fs::read(dir.path().join("a/seed2/metrics.csv")).unwrap(),
        fs::read(dir.path().join("b/seed2/metrics.csv")).unwrap()
    );
}

#[test]
fn decode_and_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path());
    let dev = dir.path().join("data/dev.json");
    let dev_before = fs::read(&dev).unwrap();
    ok(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("runs"))]);
    let ck = dir.path().join("runs/seed0/best.json");
    let ck_before = fs::read(&ck).unwrap();

    let p1 = dir.path().join("p1.jsonl");
    let p4 = dir.path().join("p4.jsonl");
    ok(&["decode", "--checkpoint", s(&ck), "--input", s(&dev), "--output", s(&p1)]);
    ok(&["decode", "--checkpoint", s(&ck), "--input", s(&dev), "--output", s(&p4), "--jobs", "4"]);
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p4).unwrap(), "thread count changed predictions");
    assert_eq!(fs::read_to_string(&p1).unwrap().lines().count(), 20);
    assert!(dir.path().join("p1.jsonl.meta.json").exists());

    let same = ok(&["eval", "--pred", s(&p1), "--gold", s(&p1)]);
    assert!(same.contains("micro F1  1.000"), "{same}");

    let per_doc = dir.path().join("per_doc.csv");
    let csv = ok(&["eval", "--pred", s(&p1), "--gold", s(&dev), "--format", "csv", "--per-doc", s(&per_doc)]);
    assert!(csv.starts_with("metric,value\nmicro_P,"));
    assert_eq!(fs::read_to_string(&per_doc).unwrap().lines().count(), 21);
    let json = ok(&["eval", "--pred", s(&p1), "--gold", s(&dev), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["per_doc"].as_array().unwrap().len(), 20);

    assert_eq!(fs::read(&dev).unwrap(), dev_before);
    assert_eq!(fs::read(&ck).unwrap(), ck_before);
}

#[test]
fn grid_covers_all_depths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_setup(dir.path());
    let out = dir.path().join("grid");
    let summary = ok(&[
        "train", "--config", s(&cfg), "--grid", "--out", s(&out), "--set", "train.max_steps=2", "--set", "train.eval_every=1",
    ]);
    assert_eq!(summary.lines().count(), 17);
    for a in 0..=3 {
        for b in 0..=3 {
            assert!(out.join(format!("psi{a}-phi{b}/seed0/metrics.csv")).exists());
        }
    }
}

#[test]
fn gold_completions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let ade = fixtures().join("ade.json");
    let corpus = dir.path().join("corpus.jsonl");
    ok(&["prompts", "corpus", "--input", s(&ade), "--layout", "no-desc", "--n-icl", "1", "--pool", s(&ade), "--preset", "ade", "--output", s(&corpus)]);
    let a = fs::read(&corpus).unwrap();
    ok(&["prompts", "corpus", "--input", s(&ade), "--layout", "no-desc", "--n-icl", "1", "--pool", s(&ade), "--preset", "ade", "--output", s(&corpus)]);
    assert_eq!(a, fs::read(&corpus).unwrap());

    // Corpus lines carry both prompt and completion; eval reads the completion.
    let report = ok(&["eval", "--pred", s(&corpus), "--gold", s(&ade), "--jobs", "2"]);
    assert!(report.contains("micro F1  1.000"), "{report}");

    let parsed = ok(&["prompts", "parse", "--input", s(&corpus), "--strict"]);
    assert_eq!(parsed.lines().count(), 3);
    assert!(parsed.lines().all(|l| l.contains("\"status\":\"ok\"")));

    let rendered = ok(&["prompts", "render", "--input", s(&ade), "--layout", "uuid", "--preset", "ade"]);
    for line in rendered.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let p = v["prompt"].as_str().unwrap();
        assert!(p.ends_with("[/INST]") && p.contains("Task number: "));
        assert!(!p.contains("adverseEffect"));
    }
}

#[test]
fn refusals_count_as_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let ade = fixtures().join("ade.json");
    let pred = dir.path().join("pred.jsonl");
    fs::write(
        &pred,
        "{\"id\":\"ade-1\",\"completion\":\"I cannot comply with your request.\"}\n",
    )
    .unwrap();
    let out = run(&["eval", "--pred", s(&pred), "--gold", s(&ade)]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("micro R   0.000"), "{stdout}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-json=1"));
}

#[test]
fn seeds_aggregates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, f1) in ["0.6", "0.7"].iter().enumerate() {
        let p = dir.path().join(format!("run{i}.csv"));
        fs::write(&p, format!("metric,value\nmicro_F1,{f1}\n")).unwrap();
        paths.push(p);
    }
    let out = ok(&["seeds", s(&paths[0]), s(&paths[1])]);
    assert_eq!(out, "metric,n,mean,std\nmicro_F1,2,0.6500,0.0707\n");
    let out = ok(&["seeds", s(&paths[0])]);
    assert_eq!(out, "metric,n,mean,std\nmicro_F1,1,0.6000,\n");

    let other = dir.path().join("other.csv");
    fs::write(&other, "metric,value\nmicro_P,0.5\n").unwrap();
    assert_eq!(run(&["seeds", s(&paths[0]), s(&other)]).status.code(), Some(1));
}

#[test]
fn stats_prints_one_row_per_dataset() {
    let f = fixtures();
    let arg_a = format!("ade={}", s(&f.join("ade.json")));
    let arg_b = format!("enewt={}", s(&f.join("enewt.conllu")));
    let csv = ok(&["stats", "--dataset", &arg_a, "--dataset", &arg_b, "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dataset,min,mean,max,pct_k_le_5,avg_chars");
    assert!(lines[1].starts_with("ade,") && lines[2].starts_with("enewt,"));
    let table = ok(&["stats", "--dataset", &arg_a]);
    assert!(table.starts_with("dataset"));
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["eval", "--help"]).status.code(), Some(0));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--config", "/does/not/exist.toml"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[dataset]\ntrain = \"a\"\ndev = \"b\"\nsurprise = 1\n").unwrap();
    assert_eq!(run(&["train", "--config", s(&bad)]).status.code(), Some(1));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "[{\"id\": \"x\", \"text\": ").unwrap();
    let ade = fixtures().join("ade.json");
    assert_eq!(run(&["eval", "--pred", s(&broken), "--gold", s(&ade)]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--pred", s(&ade), "--gold", s(&broken)]).status.code(), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub/out.jsonl");
    let code = run(&["prompts", "corpus", "--input", s(&ade), "--layout", "uuid", "--output", s(&out)]).status.code();
    assert_eq!(code, Some(3));
}
