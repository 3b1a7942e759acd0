//! Template-based synthetic posts for desk-scale experiments.
//!
//! Each class draws sentences from its own phrase bank, so the classes are
//! separable by vocabulary alone. Drug mentions come from the lexicon and are
//! swapped for a slang or misspelled surface at `slang_rate`.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::{AnnotatedPost, Corpus, Label};
use crate::lexicon::{EntryKind, Lexicon};
use crate::{seeded_rng, SeededRng};

/// 2023-01-02T00:00:00Z .. 2024-04-04T23:59:59Z
pub const COLLECTION_WINDOW: (i64, i64) = (1_672_617_600, 1_712_275_199);

const DEALER: &[&str] = &[
    "{drug} available now, hit my dm for prices",
    "${price} per {drug}, dm for details",
    "shipping nationwide, tracking included on every {drug} order",
    "plug here with {drug} on deck, tap in",
    "selling {drug} in {city}, cash or crypto only",
    "{coded}, message me for the menu",
    "looking for a connect? {drug} for sale with discreet delivery",
    "bulk {drug} deals, fast pickup in {city}",
    "got {drug} in stock, serious buyers only",
    "{coded}, prices drop for regular customers",
];

const ACTIVE: &[&str] = &[
    "just took {dose}mg of {drug} and nodded off",
    "been using {drug} daily for {n} weeks and my tolerance is crazy",
    "how much {drug} matches {dose}mg of my usual stuff",
    "snorted some {drug} last night and felt like floating",
    "anyone else need more {drug} every day just to get high",
    "best way to shoot up {drug} without my veins collapsing",
    "blues got me feeling heavenly tonight",
    "i keep chasing that first {drug} high all weekend",
    "mixed {drug} with xanax again, stupid but it hits",
];

const RECOVERED: &[&str] = &[
    "{n} years clean thanks to suboxone and therapy",
    "day {n} off {drug}, the sweats are brutal but i am sober",
    "na meetings saved my life after {drug} nearly killed me",
    "i quit {drug} {n} months ago and stayed sober since",
    "celebrating {n} months of sobriety today with my sponsor",
    "recovery is possible, i left {drug} behind for good",
    "my sponsor says every sober day counts, {n} days and counting",
    "withdrawal from {drug} was hell but i made it through rehab",
];

const PRESCRIPTION: &[&str] = &[
    "my doctor increased my {drug} dose for back pain",
    "prescribed {drug} after surgery and the pharmacy refill took ages",
    "{drug} helps my chronic pain but makes me constipated",
    "scared of getting hooked on my prescription {drug}",
    "the pain clinic switched my {drug} prescription this month",
    "i take {drug} exactly as prescribed by my physician",
    "insurance finally approved my {drug} refill for nerve pain",
    "my surgeon wants to taper my {drug} after the knee replacement",
];

const NONUSER: &[&str] = &[
    "news report says {drug} overdoses rose in {city} last year",
    "how do opioids affect serotonin in the brain",
    "my cousin struggled with {drug} and the family is worried",
    "a new study examines {drug} policy and harm reduction funding",
    "this subreddit's moderation is unfair lately",
    "researchers published data on {drug} deaths across {city}",
    "the senator proposed a bill about {drug} trafficking penalties",
    "documentary about the {drug} epidemic airs on television tonight",
];

const CITIES: &[&str] = &[
    "chicago", "boston", "denver", "seattle", "phoenix", "atlanta", "portland", "ohio",
];

const SUBREDDITS: [&str; Label::COUNT] = [
    "opiates",
    "opiates",
    "OpiatesRecovery",
    "chronicpain",
    "addiction",
];

fn bank(label: Label) -> &'static [&'static str] {
    match label {
        Label::Dealer => DEALER,
        Label::ActiveUser => ACTIVE,
        Label::RecoveredUser => RECOVERED,
        Label::PrescriptionUser => PRESCRIPTION,
        Label::NonUser => NONUSER,
    }
}

/// Sentence templates of one class, with `{slot}` placeholders.
pub fn phrase_bank(label: Label) -> &'static [&'static str] {
    bank(label)
}

#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    /// Probability of replacing a drug name with a slang or misspelled form.
    pub slang_rate: f64,
    pub sentences_per_post: (usize, usize),
    pub window: (i64, i64),
}

impl Default for SyntheticGenerator {
    fn default() -> Self {
        SyntheticGenerator {
            slang_rate: 0.35,
            sentences_per_post: (2, 3),
            window: COLLECTION_WINDOW,
        }
    }
}

struct DrugVocab {
    /// formal drug names that also appear as a rewrite target
    formal: Vec<String>,
    variants: BTreeMap<String, Vec<String>>,
    free_slang: Vec<String>,
    coded: Vec<String>,
}

impl DrugVocab {
    fn from_lexicon(lexicon: &Lexicon) -> DrugVocab {
        let mut formal = Vec::new();
        let mut variants: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut free_slang = Vec::new();
        let mut coded = Vec::new();
        for e in lexicon.entries() {
            match e.kind {
                EntryKind::Formal => {
                    // plural class names read badly in templates
                    if !e.surface.ends_with('s') && !e.surface.contains(' ') {
                        formal.push(e.surface.clone())
                    }
                }
                EntryKind::Coded => coded.push(e.surface.clone()),
                EntryKind::Slang | EntryKind::Misspelling | EntryKind::Abbreviation => {
                    if e.canonical != e.surface {
                        variants
                            .entry(e.canonical.clone())
                            .or_default()
                            .push(e.surface.clone());
                    } else if e.kind != EntryKind::Abbreviation {
                        free_slang.push(e.surface.clone());
                    }
                }
            }
        }
        if formal.is_empty() {
            formal = variants.keys().cloned().collect();
        }
        if formal.is_empty() {
            formal.push("opioids".to_string());
        }
        DrugVocab { formal, variants, free_slang, coded }
    }

    fn drug(&self, rng: &mut SeededRng, slang_rate: f64) -> String {
        let base = self.formal.choose(rng).expect("nonempty").clone();
        if rng.random_bool(slang_rate) {
            let variants = self.variants.get(&base);
            match variants {
                Some(v) if !v.is_empty() && rng.random_bool(0.5) => {
                    return v.choose(rng).expect("nonempty").clone()
                }
                _ => {
                    if let Some(s) = self.free_slang.choose(rng) {
                        return s.clone();
                    }
                }
            }
        }
        base
    }
}

fn fill(template: &str, vocab: &DrugVocab, gen: &SyntheticGenerator, rng: &mut SeededRng) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("balanced template");
        let slot = &rest[open + 1..close];
        let value = match slot {
            "drug" => vocab.drug(rng, gen.slang_rate),
            "price" => rng.random_range(5..=60).to_string(),
            "dose" => (rng.random_range(1..=24) * 5).to_string(),
            "n" => rng.random_range(2..=30).to_string(),
            "city" => CITIES.choose(rng).expect("nonempty").to_string(),
            "coded" => vocab
                .coded
                .choose(rng)
                .cloned()
                .unwrap_or_else(|| "hit me up".to_string()),
            other => panic!("unknown template slot {other}"),
        };
        out.push_str(&value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl SyntheticGenerator {
    pub fn generate(&self, n_per_class: &BTreeMap<Label, usize>, lexicon: &Lexicon, seed: u64) -> Corpus {
        let mut rng = seeded_rng(seed);
        let vocab = DrugVocab::from_lexicon(lexicon);

        let mut slots: Vec<Label> = n_per_class
            .iter()
            .flat_map(|(&l, &n)| std::iter::repeat_n(l, n))
            .collect();
        slots.shuffle(&mut rng);

        let (lo, hi) = self.sentences_per_post;
        let mut corpus = Corpus::default();
        for (i, label) in slots.into_iter().enumerate() {
            let templates = bank(label);
            let n = rng.random_range(lo..=hi.max(lo)).min(templates.len());
            let chosen: Vec<&&str> = templates.choose_multiple(&mut rng, n).collect();
            let sentences: Vec<String> = chosen
                .into_iter()
                .map(|t| {
                    let s = capitalize(&fill(t, &vocab, self, &mut rng));
                    let end = if rng.random_bool(0.2) { "!" } else { "." };
                    format!("{s}{end}")
                })
                .collect();
            let post = AnnotatedPost {
                id: format!("syn-{i:05}"),
                subreddit: SUBREDDITS[label.code()].to_string(),
                created_utc: rng.random_range(self.window.0..=self.window.1),
                text: sentences.join(" "),
                label: Some(label),
            };
            corpus.push(post).expect("generated ids are unique");
        }
        corpus
    }
}

/// Generate a seeded synthetic corpus with the default generator settings.
pub fn generate_synthetic(n_per_class: &BTreeMap<Label, usize>, lexicon: &Lexicon, seed: u64) -> Corpus {
    SyntheticGenerator::default().generate(n_per_class, lexicon, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_corpus, CorpusFormat};

    fn per_class(n: usize) -> BTreeMap<Label, usize> {
        Label::ALL.iter().map(|&l| (l, n)).collect()
    }

    #[test]
    fn zero_counts_give_empty_corpus() {
        let c = generate_synthetic(&per_class(0), &Lexicon::starter(), 1);
        assert!(c.is_empty());
    }

    #[test]
    fn exact_class_counts() {
        let c = generate_synthetic(&per_class(40), &Lexicon::starter(), 80);
        assert_eq!(c.len(), 200);
        assert_eq!(c.class_counts(), [40; 5]);
    }

    #[test]
    fn byte_identical_per_seed() {
        let lex = Lexicon::starter();
        let dump = |seed| {
            let mut buf = Vec::new();
            write_corpus(&generate_synthetic(&per_class(10), &lex, seed), &mut buf, CorpusFormat::Jsonl)
                .unwrap();
            buf
        };
        assert_eq!(dump(80), dump(80));
        assert_ne!(dump(80), dump(81));
    }

    #[test]
    fn posts_mention_lexicon_terms() {
        let lex = Lexicon::starter();
        let c = generate_synthetic(&per_class(20), &lex, 5);
        let dealer_hits = c
            .iter()
            .filter(|p| p.label == Some(Label::Dealer))
            .filter(|p| lex.has_keyword(&p.text))
            .count();
        assert!(dealer_hits >= 18, "{dealer_hits}");
        let injected = c
            .iter()
            .flat_map(|p| lex.match_keywords(&p.text))
            .filter(|m| m.kind == EntryKind::Misspelling || m.kind == EntryKind::Slang)
            .count();
        assert!(injected > 0);
    }

    #[test]
    fn timestamps_inside_window() {
        let c = generate_synthetic(&per_class(5), &Lexicon::starter(), 2);
        assert!(c
            .iter()
            .all(|p| (COLLECTION_WINDOW.0..=COLLECTION_WINDOW.1).contains(&p.created_utc)));
    }
}
