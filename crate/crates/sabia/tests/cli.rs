//! The `sabia` binary driven as a subprocess: exit codes, artifacts and
//! configuration snapshots.

use std::path::Path;
use std::process::{Command, Output};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sabia(dir: &Path, args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_sabia"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let r = sabia(dir, args);
    assert_eq!(r.code, 0, "`sabia {}` failed:\n{}", args.join(" "), r.stderr);
    r.stdout
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let r = sabia(dir.path(), &["frobnicate"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("Usage"), "{}", r.stderr);
    assert_eq!(sabia(dir.path(), &["--version"]).code, 0);
}

#[test]
fn kappa_on_two_annotator_fixture() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ann.csv"),
        "id,annotator_1,annotator_2\np1,Dealer,Dealer\np2,Dealer,ActiveUser\np3,ActiveUser,ActiveUser\np4,NonUser,NonUser\n",
    )
    .unwrap();
    let out = ok(dir.path(), &["kappa", "ann.csv"]);
    assert!(out.contains("0.63636"), "{out}");
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("out/agreement.json"))).unwrap();
    assert!((report["mean_kappa"].as_f64().unwrap() - 0.636_363_6).abs() < 1e-6);
}

#[test]
fn logs_are_timestamped_lines() {
    let dir = tempfile::tempdir().unwrap();
    let r = sabia(dir.path(), &["synth", "--per-class", "2"]);
    assert_eq!(r.code, 0);
    let line = r.stderr.lines().find(|l| l.contains("wrote")).expect("a log line");
    // 2026-01-01T00:00:00.000Z INFO  wrote ...
    let stamp = line.split_whitespace().next().unwrap();
    assert!(stamp.len() >= 20 && stamp.as_bytes()[4] == b'-' && stamp.contains('T'), "{line}");
}

#[test]
fn snapshot_reproduces_a_training_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "7", "--per-class", "12", "--out-dir", "data"]);
    ok(d, &["split", "--seed", "7", "data/synthetic.jsonl", "--out-dir", "data"]);
    ok(d, &[
        "train", "--seed", "7", "--model", "forest", "--set", "classical.n_estimators=15",
        "data/train.jsonl", "--out-dir", "first",
    ]);
    let snapshot = read(d.join("first/effective_config.txt"));
    assert!(snapshot.contains("seed = 7") && snapshot.contains("model = forest"), "{snapshot}");
    assert!(snapshot.contains("classical.n_estimators = 15"), "{snapshot}");

    ok(d, &["--config", "first/effective_config.txt", "train", "data/train.jsonl", "--out-dir", "second"]);
    for run in ["first", "second"] {
        ok(d, &["eval", "--model-dir", &format!("{run}/model"), "data/test.jsonl", "--out-dir", run]);
    }
    assert_eq!(read(d.join("first/metrics.json")), read(d.join("second/metrics.json")));
    assert_eq!(read(d.join("first/model/model_card.txt")), read(d.join("second/model/model_card.txt")));
    // eval replaced the out-dir snapshot; the checkpoint keeps the training one
    assert!(!read(d.join("first/effective_config.txt")).contains("model = forest"));
    ok(d, &["--config", "first/model/effective_config.txt", "train", "data/train.jsonl", "--out-dir", "replay"]);
    assert_eq!(std::fs::read(d.join("first/model/model.bin")).unwrap(), std::fs::read(d.join("replay/model/model.bin")).unwrap());
    // a different seed changes the forest
    ok(d, &["train", "--seed", "8", "--model", "forest", "--set", "classical.n_estimators=15", "data/train.jsonl", "--out-dir", "third"]);
    assert_ne!(std::fs::read(d.join("first/model/model.bin")).unwrap(), std::fs::read(d.join("third/model/model.bin")).unwrap());
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "seed = 3\n# fine\nsabia.depth = 2\n").unwrap();
    let r = sabia(dir.path(), &["--config", "run.cfg", "synth"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("run.cfg:3"), "{}", r.stderr);
    let r = sabia(dir.path(), &["--config", "missing.cfg", "synth"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("missing.cfg"), "{}", r.stderr);
}

#[test]
fn config_paths_resolve_next_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::create_dir_all(d.join("cfg/lex")).unwrap();
    std::fs::write(d.join("cfg/lex/terms.csv"), "surface,canonical,kind\nzzdrug,zzdrug,formal\n").unwrap();
    std::fs::write(d.join("cfg/run.cfg"), "lexicon = lex/terms.csv\n").unwrap();
    let out = ok(d, &["--config", "cfg/run.cfg", "lexicon", "--match", "got some zzdrug"]);
    assert!(out.contains("1 entries"), "{out}");
    assert!(out.contains("zzdrug (formal)"), "{out}");
    assert!(read(d.join("out/lexicon.csv")).contains("zzdrug"));
}

#[test]
fn malformed_corpus_is_a_data_error_naming_the_record() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.jsonl"),
        "{\"id\":\"a\",\"text\":\"selling oxy\",\"label\":\"Dealer\"}\n{\"id\":\"b\",\"text\":\"x\",\"label\":\"Pirate\"}\n",
    )
    .unwrap();
    let r = sabia(dir.path(), &["stats", "bad.jsonl"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bad.jsonl:2"), "{}", r.stderr);
}

#[test]
fn training_on_unlabeled_posts_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("mixed.jsonl"),
        "{\"id\":\"a\",\"text\":\"selling oxy\",\"label\":\"Dealer\"}\n{\"id\":\"b\",\"text\":\"two years clean\"}\n",
    )
    .unwrap();
    let r = sabia(dir.path(), &["train", "--model", "logreg", "mixed.jsonl"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("mixed.jsonl") && r.stderr.contains("`b`"), "{}", r.stderr);
}

#[test]
fn single_class_training_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("one.jsonl"),
        "{\"id\":\"a\",\"text\":\"selling oxy\",\"label\":\"Dealer\"}\n{\"id\":\"b\",\"text\":\"selling percs\",\"label\":\"Dealer\"}\n",
    )
    .unwrap();
    assert_eq!(sabia(dir.path(), &["train", "--model", "logreg", "one.jsonl"]).code, 3);
}

#[test]
fn ingest_fixture_applies_window_keyword_and_dedup() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("dump.jsonl"),
        [
            r#"{"id":"a","subreddit":"opiates","created_utc":50,"text":"selling oxy"}"#,
            r#"{"id":"b","subreddit":"opiates","created_utc":150,"text":"lovely weather today"}"#,
            r#"{"id":"c","subreddit":"opiates","created_utc":150,"title":"update","text":"selling oxy"}"#,
            r#"{"id":"c","subreddit":"opiates","created_utc":160,"text":"heroin again"}"#,
        ]
        .join("\n"),
    )
    .unwrap();
    let out = ok(dir.path(), &["ingest", "--fixture", "dump.jsonl", "--start", "100", "--end", "200"]);
    assert!(out.contains("collected 1 posts"), "{out}");
    let raw = read(dir.path().join("out/raw.jsonl"));
    assert_eq!(raw.lines().count(), 1);
    assert!(raw.contains("\"update selling oxy\"") && !raw.contains("label"), "{raw}");
    assert!(read(dir.path().join("out/effective_config.txt")).contains("ingest.window_start = 100"));

    let r = sabia(dir.path(), &["ingest", "--fixture", "dump.jsonl", "--start", "300", "--end", "200"]);
    assert_eq!(r.code, 1);
    let r = sabia(dir.path(), &["ingest", "--fixture", "absent.jsonl"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("absent.jsonl"));
}

#[test]
fn resolve_exports_disagreements_and_merges_adjudication() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("ann.csv"),
        "id,a1,a2,a3\np1,Dealer,Dealer,NonUser\np2,Dealer,ActiveUser,NonUser\np3,NonUser,NonUser,NonUser\n",
    )
    .unwrap();
    std::fs::write(
        d.join("posts.jsonl"),
        "{\"id\":\"p1\",\"text\":\"selling oxy\"}\n{\"id\":\"p2\",\"text\":\"oxy again\"}\n{\"id\":\"p3\",\"text\":\"news on fentanyl\"}\n",
    )
    .unwrap();
    let out = ok(d, &["resolve", "ann.csv", "--corpus", "posts.jsonl", "--out-dir", "r1"]);
    assert!(out.contains("2 resolved, 1 unresolved"), "{out}");
    let unresolved = read(d.join("r1/unresolved.csv"));
    assert!(unresolved.lines().nth(1).unwrap().starts_with("p2,"), "{unresolved}");
    assert_eq!(read(d.join("r1/labeled.jsonl")).lines().count(), 2);

    // fill in the exported file and merge it back
    std::fs::write(d.join("adj.csv"), unresolved.replacen("p2,,", "p2,ActiveUser,", 1)).unwrap();
    let out = ok(d, &["resolve", "ann.csv", "--adjudication", "adj.csv", "--corpus", "posts.jsonl", "--out-dir", "r2"]);
    assert!(out.contains("3 resolved, 0 unresolved, 1 settled"), "{out}");
    assert!(!d.join("r2/unresolved.csv").exists());
    assert!(read(d.join("r2/resolved.csv")).contains("p2,ActiveUser"));
    let labeled = read(d.join("r2/labeled.jsonl"));
    assert!(labeled.lines().all(|l| l.contains("\"label\"")), "{labeled}");

    std::fs::write(d.join("stray.csv"), "id,label\nzz,Dealer\n").unwrap();
    let r = sabia(d, &["resolve", "ann.csv", "--adjudication", "stray.csv"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("stray.csv") && r.stderr.contains("zz"));
}

#[test]
fn clean_stats_and_predict_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--per-class", "6", "--out-dir", "data"]);
    let mut corpus = read(d.join("data/synthetic.jsonl"));
    corpus.push_str("{\"id\":\"es\",\"text\":\"quiero vender oxicodona barata ahora mismo\",\"label\":\"Dealer\"}\n");
    std::fs::write(d.join("data/mixed.jsonl"), corpus).unwrap();

    let out = ok(d, &["clean", "data/mixed.jsonl", "--out-dir", "clean"]);
    assert!(out.contains("kept 30 of 31"), "{out}");
    let tokens = read(d.join("clean/tokens.jsonl"));
    assert_eq!(tokens.lines().count(), 30);
    assert!(!tokens.contains("\"es\""));

    ok(d, &["stats", "clean/clean.jsonl", "--out-dir", "stats"]);
    let stats: serde_json::Value = serde_json::from_str(&read(d.join("stats/stats.json"))).unwrap();
    assert_eq!(stats["n_posts"], 30);
    assert_eq!(stats["class_counts"]["Dealer"], 6);

    ok(d, &["train", "--model", "svm", "clean/clean.jsonl", "--out-dir", "svm"]);
    ok(d, &["predict", "--model-dir", "svm/model", "data/mixed.jsonl", "--out-dir", "svm"]);
    let preds = read(d.join("svm/predictions.jsonl"));
    assert_eq!(preds.lines().count(), 31);
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    assert!(first["label"].is_string() && first["scores"].is_object());
}

#[test]
fn compare_reports_relative_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 47/50 = 0.94 and 43/50 = 0.86 correct, as evaluated reports
    let report = |correct: usize| {
        let truth = vec![sabia::core::Label::Dealer; 50];
        let mut pred = truth.clone();
        for p in pred.iter_mut().skip(correct) {
            *p = sabia::core::Label::NonUser;
        }
        sabia::core::evaluate::evaluate(&truth, &pred).unwrap().to_json()
    };
    std::fs::write(d.join("best.json"), report(47)).unwrap();
    std::fs::write(d.join("base.json"), report(43)).unwrap();
    let out = ok(d, &["compare", "best.json", "rnn=base.json", "--baseline", "rnn"]);
    assert!(out.contains("best improves accuracy over rnn by 9.30%"), "{out}");
    assert!(read(d.join("out/comparison.json")).contains("9.3"));
    assert_eq!(sabia(d, &["compare", "best.json", "--baseline", "nope"]).code, 1);
}

#[test]
fn cnn_checkpoint_predicts_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--per-class", "8", "--out-dir", "data"]);
    ok(d, &[
        "train", "--model", "cnn", "--epochs", "2", "--set", "neural.filters=16", "data/synthetic.jsonl",
        "--out-dir", "cnn",
    ]);
    let snapshot = read(d.join("cnn/effective_config.txt"));
    assert!(snapshot.contains("neural.epochs = 2") && snapshot.contains("neural.filters = 16"), "{snapshot}");
    ok(d, &["eval", "--model-dir", "cnn/model", "data/synthetic.jsonl", "--out-dir", "cnn"]);
    let a = read(d.join("cnn/metrics.json"));
    ok(d, &["eval", "--model-dir", "cnn/model", "data/synthetic.jsonl", "--out-dir", "again"]);
    assert_eq!(a, read(d.join("again/metrics.json")));
}

#[test]
fn explain_lists_top_tokens_for_a_transformer_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--per-class", "4", "--out-dir", "data"]);
    ok(d, &[
        "train", "--model", "encoder", "--encoder", "tiny", "--epochs", "1", "--set", "sabia.max_len=32",
        "data/synthetic.jsonl", "--out-dir", "enc",
    ]);
    let out = ok(d, &["explain", "--model-dir", "enc/model", "-k", "2", "selling oxy and percs tonight"]);
    let line = out.lines().find(|l| l.starts_with("arg1")).expect("one line per text");
    assert_eq!(line.matches('(').count(), 2, "{line}");
    let rows = read(d.join("out/explanations.jsonl"));
    let row: serde_json::Value = serde_json::from_str(rows.lines().next().unwrap()).unwrap();
    assert_eq!(row["tokens"].as_array().unwrap().len(), 2);
    // classical checkpoints cannot be explained
    ok(d, &["train", "--model", "majority", "data/synthetic.jsonl", "--out-dir", "maj"]);
    assert_eq!(sabia(d, &["explain", "--model-dir", "maj/model", "oxy"]).code, 1);
}
