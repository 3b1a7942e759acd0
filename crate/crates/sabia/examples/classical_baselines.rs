//! TF-IDF features with every classical classifier on the synthetic corpus.
//!
//! cargo run -p sabia --release --example classical_baselines

use std::collections::BTreeMap;

use sabia::core::baselines::Algorithm;
use sabia::core::corpus::{generate_synthetic, stratified_split};
use sabia::core::evaluate::evaluate;
use sabia::core::{Label, Lexicon, SplitSpec};
use sabia::{train_model, ModelChoice, RunConfig};

fn main() {
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 40)).collect();
    let corpus = generate_synthetic(&counts, &Lexicon::starter(), 80);
    let (train, test) = stratified_split(&corpus, &SplitSpec::default()).unwrap();
    let cfg = RunConfig::default();
    for algo in Algorithm::ALL {
        let model = train_model(ModelChoice::Classical(algo), &cfg, &train, None).unwrap();
        let report = evaluate(&test.labels().unwrap(), &model.predict_labels(&test).unwrap()).unwrap();
        println!("{:<10} accuracy {:.3}  weighted f1 {:.3}", algo.name(), report.accuracy, report.weighted_avg.f1);
    }
}
