//! Fine-tune the hybrid model with the tiny encoder, save a checkpoint,
//! reload it and classify new posts.
//!
//! cargo run -p sabia --release --example sabia_fine_tune

use std::collections::BTreeMap;

use sabia::core::corpus::{generate_synthetic, stratified_split};
use sabia::core::evaluate::evaluate;
use sabia::core::{Label, Lexicon, SplitSpec};
use sabia::nn::checkpoint::{load_sabia, save_sabia};
use sabia::nn::sabia::{fine_tune, SabiaConfig};

fn main() {
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 40)).collect();
    let corpus = generate_synthetic(&counts, &Lexicon::starter(), 80);
    let (train, test) = stratified_split(&corpus, &SplitSpec::default()).unwrap();

    let model = fine_tune(&SabiaConfig::tiny(), &train, Some(&test)).unwrap();
    for e in &model.history {
        println!("epoch {} loss {:.4} train {:.3} dev {:.3}", e.epoch, e.loss, e.train_accuracy, e.dev_accuracy.unwrap_or(f64::NAN));
    }

    let dir = tempfile_dir();
    save_sabia(&model, &dir, None).unwrap();
    let reloaded = load_sabia(&dir).unwrap();
    let (pred, _) = reloaded.predict(&test.texts()).unwrap();
    println!("reloaded test accuracy {:.3}", evaluate(&test.labels().unwrap(), &pred).unwrap().accuracy);

    let fresh = ["anyone got blues? paying cash", "my surgeon prescribed oxycodone for a week"];
    let (labels, probs) = reloaded.predict(&fresh).unwrap();
    for ((t, l), p) in fresh.iter().zip(labels).zip(probs) {
        println!("{l:<16} p={:.3}  {t}", p[l.code()]);
    }
    let _ = std::fs::remove_dir_all(&dir);
}

fn tempfile_dir() -> std::path::PathBuf {
    std::env::temp_dir().join(format!("sabia-example-{}", std::process::id()))
}
