//! The cleaning chain: HTML stripping, normalization, punctuation and
//! numeral removal, stopwords with retention, lemmatization.
//!
//! cargo run -p sabia --example preprocess_clean

use sabia::core::preprocess::{detect_english, Preprocessor};
use sabia::core::Lexicon;

fn main() {
    let pre = Preprocessor::with_defaults(Lexicon::starter());
    for text in [
        "<b>Took 80mg OXY!!!</b>",
        "I am not using anymore",
        "heroy 4 sale",
        "quiero vender oxicodona barata",
    ] {
        let english = detect_english(text, pre.config().english_threshold);
        println!("{text:<34} english={english:<5} {:?}", pre.clean(text));
    }
}
