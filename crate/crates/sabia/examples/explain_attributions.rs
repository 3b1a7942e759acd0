//! Gradient-times-input token attributions from a briefly trained model.
//!
//! cargo run -p sabia --release --example explain_attributions

use std::collections::BTreeMap;

use sabia::core::corpus::generate_synthetic;
use sabia::core::{Label, Lexicon};
use sabia::nn::sabia::{explain, fine_tune, SabiaConfig};

fn main() {
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 20)).collect();
    let corpus = generate_synthetic(&counts, &Lexicon::starter(), 80);
    let config = SabiaConfig {
        max_len: 48,
        epochs: 3,
        ..SabiaConfig::tiny()
    };
    let model = fine_tune(&config, &corpus, None).unwrap();
    for text in ["selling percs and oxy tonight, dm for prices", "six months clean from fentanyl"] {
        let top = explain(&model, text, 4).unwrap();
        let shown: Vec<String> = top.iter().map(|t| format!("{} {:.3}", t.token, t.score)).collect();
        println!("{text}\n  {}", shown.join(" | "));
    }
}
