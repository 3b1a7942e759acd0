//! The command-line pipeline driven in-process: synthesize, split, train a
//! classical baseline, evaluate and compare.
//!
//! cargo run -p sabia --release --example cli_pipeline

fn main() {
    let dir = std::env::temp_dir().join(format!("sabia-cli-{}", std::process::id()));
    let out = |sub: &str| dir.join(sub).display().to_string();
    let data = out("data");
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--per-class".into(), "30".into(), "--out-dir".into(), data.clone()],
        vec!["split".into(), format!("{data}/synthetic.jsonl"), "--out-dir".into(), data.clone()],
        vec!["train".into(), "--model".into(), "logreg".into(), format!("{data}/train.jsonl"), "--out-dir".into(), out("logreg")],
        vec!["eval".into(), "--model-dir".into(), format!("{}/model", out("logreg")), format!("{data}/test.jsonl"), "--out-dir".into(), out("logreg")],
        vec!["train".into(), "--model".into(), "majority".into(), format!("{data}/train.jsonl"), "--out-dir".into(), out("majority")],
        vec!["eval".into(), "--model-dir".into(), format!("{}/model", out("majority")), format!("{data}/test.jsonl"), "--out-dir".into(), out("majority")],
        vec!["compare".into(), format!("{}/metrics.json", out("logreg")), format!("{}/metrics.json", out("majority")), "--out-dir".into(), out("compare")],
    ];
    for args in steps {
        let argv = std::iter::once("sabia".to_string()).chain(args.iter().cloned());
        let code = sabia::cli::run(argv);
        if code != 0 {
            eprintln!("`sabia {}` exited {code}", args.join(" "));
            std::process::exit(code);
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}
