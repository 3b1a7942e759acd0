//! Keyword, window and duplicate filtering of a local post dump.
//!
//! cargo run -p sabia --example ingest_fixture

use sabia::core::ingest::{filter_posts, IngestConfig, RawPost};
use sabia::core::Lexicon;

fn post(id: &str, t: i64, title: Option<&str>, text: &str) -> RawPost {
    RawPost {
        id: id.into(),
        subreddit: "opiates".into(),
        created_utc: t,
        title: title.map(String::from),
        text: text.into(),
    }
}

fn main() {
    let lexicon = Lexicon::starter();
    let config = IngestConfig {
        window_start: 1_672_617_600, // 2023-01-02
        window_end: 1_712_188_800,   // 2024-04-04
        ..IngestConfig::default()
    };
    let dump = vec![
        post("a", 1_600_000_000, None, "selling oxy, dm me"),
        post("b", 1_690_000_000, None, "what a lovely day for a hike"),
        post("c", 1_690_000_000, Some("day 30"), "still clean from heroin and feeling good"),
        post("c", 1_690_000_100, None, "duplicate id, dropped"),
        post("d", 1_700_000_000, None, "doc upped my percocet dose after surgery"),
    ];
    let corpus = filter_posts(dump, &config, &lexicon);
    for p in corpus.iter() {
        let hits: Vec<String> = lexicon.match_keywords(&p.text).into_iter().map(|m| m.surface).collect();
        println!("{:<3} {:<45} keywords: {}", p.id, p.text, hits.join(", "));
    }
}
