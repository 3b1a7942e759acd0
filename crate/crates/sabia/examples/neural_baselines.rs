//! CNN and BiLSTM over word vectors (the bundled toy table), trained with SGD.
//!
//! cargo run -p sabia --release --example neural_baselines

use std::collections::BTreeMap;

use sabia::core::corpus::{generate_synthetic, stratified_split};
use sabia::core::evaluate::evaluate;
use sabia::core::preprocess::Preprocessor;
use sabia::core::{Label, Lexicon, SplitSpec};
use sabia::nn::neural::{predict_neural, train_neural, Arch, NeuralConfig};

fn main() {
    let lexicon = Lexicon::starter();
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 40)).collect();
    let corpus = generate_synthetic(&counts, &lexicon, 80);
    let (train, test) = stratified_split(&corpus, &SplitSpec::default()).unwrap();
    let pre = Preprocessor::with_defaults(lexicon);
    // the recurrent model needs more SGD steps to leave the plateau
    for (arch, epochs) in [(Arch::Cnn, 4), (Arch::Bilstm, 40)] {
        let config = NeuralConfig {
            epochs,
            lstm_units: 32,
            filters: 32,
            ..NeuralConfig::new(arch)
        };
        let model = train_neural(&config, &train, &pre).unwrap();
        let predicted = predict_neural(&model, test.posts()).unwrap();
        let report = evaluate(&test.labels().unwrap(), &predicted).unwrap();
        let (first, last) = (&model.history[0], model.history.last().unwrap());
        println!("{arch:<7} {epochs} epochs, loss {:.3} -> {:.3}, test accuracy {:.3}", first.loss, last.loss, report.accuracy);
    }
}
