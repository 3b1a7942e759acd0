//! Slang, misspelling and abbreviation normalization with the bundled lexicon.
//!
//! cargo run -p sabia --example lexicon_normalize

use sabia::core::Lexicon;

fn main() {
    let lexicon = Lexicon::starter();
    println!("{} lexicon entries", lexicon.len());
    for text in [
        "heroy 4 sale",
        "got some percs and blues tonight",
        "on subs for two years now",
        "my dr prescribed oxycontin",
    ] {
        let found: Vec<String> = lexicon
            .match_keywords(text)
            .into_iter()
            .map(|m| format!("{}:{}", m.surface, m.kind))
            .collect();
        println!("{text:<36} -> {:<40} [{}]", lexicon.normalize_text(text), found.join(" "));
    }
}
