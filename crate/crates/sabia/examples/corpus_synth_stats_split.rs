//! Seeded synthetic corpus, its statistics and a stratified 80/20 split.
//!
//! cargo run -p sabia --example corpus_synth_stats_split

use std::collections::BTreeMap;

use sabia::core::corpus::{compute_stats, generate_synthetic, stratified_split};
use sabia::core::{Label, Lexicon, SplitSpec};

fn main() {
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 40)).collect();
    let corpus = generate_synthetic(&counts, &Lexicon::starter(), 80);
    let stats = compute_stats(&corpus);
    println!("{}", serde_json::to_string_pretty(&stats).unwrap());

    let (train, test) = stratified_split(&corpus, &SplitSpec::default()).unwrap();
    println!("train per class {:?}", train.class_counts());
    println!("test per class  {:?}", test.class_counts());
    for p in corpus.iter().step_by(40).take(5) {
        println!("[{}] {}", p.label.unwrap(), p.text);
    }
}
