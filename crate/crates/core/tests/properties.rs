//! Randomized invariants checked against brute-force oracles.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use proptest::prelude::*;
use sabia_core::annotate::{cohen_kappa, majority_vote, AnnotationSet, Resolution};
use sabia_core::corpus::{compute_stats, stratified_split, write_corpus, SplitSpec};
use sabia_core::evaluate::evaluate;
use sabia_core::features::fit_tfidf;
use sabia_core::preprocess::{clean, PreprocessConfig};
use sabia_core::{AnnotatedPost, Corpus, CorpusFormat, Label, Lexicon};

fn label() -> impl Strategy<Value = Label> {
    (0usize..5).prop_map(|c| Label::from_code(c).unwrap())
}

const WORDS: &[&str] = &[
    "oxy", "Fent", "fentnyl", "heroy", "percs", "snow", "for", "the", "party", "black", "tar", "I", "am", "not",
    "using", "took", "80mg", "20", "<b>", "</b>", "clean", "days", "DM", "me", "pills", "$20/g", "H...", "codein",
    "it's", "off", "Day-5", "pain", "doctor", "prescribed", "!!!", "recovery", "narcan", "anymore",
];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 0..25).prop_map(|w| w.join(" "))
}

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((text(), prop::option::of(label()), -5i64..2_000_000_000), 0..30).prop_map(|rows| {
        let posts = rows
            .into_iter()
            .enumerate()
            .filter(|(_, (t, _, _))| !t.trim().is_empty())
            .map(|(i, (t, l, ts))| AnnotatedPost {
                id: format!("p{i}"),
                subreddit: if i % 2 == 0 { "opiates".into() } else { String::new() },
                created_utc: ts,
                text: t,
                label: l,
            })
            .collect();
        Corpus::new(posts).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn corpus_round_trips_both_formats(c in corpus_strategy()) {
        for fmt in [CorpusFormat::Jsonl, CorpusFormat::Csv] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.out");
            let mut buf = Vec::new();
            write_corpus(&c, &mut buf, fmt).unwrap();
            std::fs::write(&path, &buf).unwrap();
            let back = sabia_core::corpus::load_corpus(&path, fmt).unwrap();
            prop_assert_eq!(&back, &c);
        }
    }

    #[test]
    fn stats_class_counts_match_tally(c in corpus_strategy()) {
        let s = compute_stats(&c);
        let mut tally: BTreeMap<Label, usize> = BTreeMap::new();
        let mut unlabeled = 0;
        for p in c.iter() {
            match p.label {
                Some(l) => *tally.entry(l).or_default() += 1,
                None => unlabeled += 1,
            }
        }
        for l in Label::ALL {
            prop_assert_eq!(s.class_counts.get(&l).copied().unwrap_or(0), tally.get(&l).copied().unwrap_or(0));
        }
        prop_assert_eq!(s.n_unlabeled, unlabeled);
        prop_assert_eq!(s.n_posts, c.len());
    }

    #[test]
    fn split_is_off_by_at_most_one_and_repeatable(
        counts in prop::collection::vec(2usize..40, 5),
        seed in any::<u64>(),
    ) {
        let mut posts = Vec::new();
        for (code, &n) in counts.iter().enumerate() {
            for i in 0..n {
                posts.push(AnnotatedPost::new(format!("{code}-{i}"), "text", Label::from_code(code)));
            }
        }
        let c = Corpus::new(posts).unwrap();
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let (train, test) = stratified_split(&c, &spec).unwrap();
        prop_assert_eq!(train.len() + test.len(), c.len());
        for (code, &n) in counts.iter().enumerate() {
            let l = Label::from_code(code);
            let k = train.iter().filter(|p| p.label == l).count();
            prop_assert!((k as f64 / n as f64 - 0.8).abs() <= 1.0 / n as f64);
        }
        let (train2, test2) = stratified_split(&c, &spec).unwrap();
        prop_assert_eq!(train, train2);
        prop_assert_eq!(test, test2);
    }

    #[test]
    fn normalize_keeps_token_count_and_is_idempotent(t in text()) {
        let lex = Lexicon::starter();
        let once = lex.normalize_text(&t);
        prop_assert_eq!(once.split_whitespace().count(), t.split_whitespace().count());
        prop_assert_eq!(lex.normalize_text(&once), once);
    }

    #[test]
    fn match_offsets_point_at_surfaces(t in text()) {
        let lex = Lexicon::starter();
        let chars: Vec<char> = t.chars().collect();
        for m in lex.match_keywords(&t) {
            let n = m.surface.chars().count();
            let found: String = chars[m.offset..m.offset + n].iter().collect();
            prop_assert_eq!(found.to_lowercase(), m.surface.to_lowercase());
        }
    }

    #[test]
    fn clean_output_invariants(t in text()) {
        let lex = Lexicon::starter();
        let cfg = PreprocessConfig::for_lexicon(&lex);
        let out = clean(&t, &lex, &cfg);
        for tok in &out {
            prop_assert!(!tok.chars().any(|c| c.is_uppercase() || c == '<' || c == '>'), "{tok}");
            prop_assert!(!tok.chars().all(|c| c.is_ascii_digit()), "{tok}");
        }
        let again: BTreeSet<String> = clean(&out.join(" "), &lex, &cfg).into_iter().collect();
        let first: BTreeSet<String> = out.iter().cloned().collect();
        prop_assert!(again.is_subset(&first), "{again:?} vs {first:?}");
        // canonicals present in the normalized input survive
        let normalized = lex.normalize_text(&t.to_lowercase());
        for e in lex.entries() {
            if !e.canonical.contains(' ') && normalized.split_whitespace().any(|w| w == e.canonical) {
                prop_assert!(out.contains(&e.canonical), "{} missing from {out:?}", e.canonical);
            }
        }
    }

    #[test]
    fn tfidf_matches_formula_oracle(
        docs in prop::collection::vec(prop::collection::vec(prop::sample::select(&["a", "b", "c", "d", "e"][..]), 0..6), 1..6)
            .prop_filter("one nonempty doc", |d| d.iter().any(|x| !x.is_empty()))
    ) {
        let docs: Vec<Vec<String>> = docs.into_iter().map(|d| d.into_iter().map(String::from).collect()).collect();
        let model = fit_tfidf(&docs).unwrap();
        // oracle: nested loops straight from the definition
        let vocab: BTreeSet<&String> = docs.iter().flatten().collect();
        let n = docs.len() as f64;
        for (col, term) in vocab.iter().enumerate() {
            prop_assert_eq!(model.vocabulary[*term], col);
            let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            prop_assert!((model.idf[col] - idf).abs() < 1e-9);
        }
        for d in &docs {
            let v = model.transform(d);
            let raw: Vec<f64> = vocab
                .iter()
                .enumerate()
                .map(|(col, t)| d.iter().filter(|x| x == t).count() as f64 * model.idf[col])
                .collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (col, r) in raw.iter().enumerate() {
                let want = if norm > 0.0 { r / norm } else { 0.0 };
                prop_assert!((v.get(col) - want).abs() < 1e-9);
            }
            let vn = v.norm();
            prop_assert!(vn == 0.0 || (vn - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn kappa_symmetric_and_bounded(pairs in prop::collection::vec((label(), label()), 1..60)) {
        let (a, b): (Vec<Label>, Vec<Label>) = pairs.into_iter().unzip();
        let k = cohen_kappa(&a, &b).unwrap();
        prop_assert!((k - cohen_kappa(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(k <= 1.0 + 1e-12);
        prop_assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn majority_label_is_among_votes(rows in prop::collection::vec(prop::collection::vec(label(), 3), 1..30)) {
        let ids: Vec<String> = (0..rows.len()).map(|i| i.to_string()).collect();
        let set = AnnotationSet::new(ids, vec!["a".into(), "b".into(), "c".into()], rows.clone()).unwrap();
        let mv = majority_vote(&set);
        for ((_, r), votes) in mv.resolved.iter().zip(&rows) {
            if let Resolution::Label(l) = r {
                prop_assert!(votes.contains(l));
                prop_assert!(votes.iter().filter(|v| *v == l).count() >= 2);
            }
        }
    }
}

/// Counting oracle for every MetricsReport field.
#[test]
fn metrics_match_counting_oracle_on_1000_instances() {
    use rand::Rng;
    let mut rng = sabia_core::seeded_rng(2024);
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let t: Vec<Label> = (0..n).map(|_| Label::from_code(rng.random_range(0..5)).unwrap()).collect();
        let p: Vec<Label> = (0..n).map(|_| Label::from_code(rng.random_range(0..5)).unwrap()).collect();
        let r = evaluate(&t, &p).unwrap();
        let mut macro_sum = [0.0; 3];
        let mut weighted = [0.0; 3];
        for l in Label::ALL {
            let tp = (0..n).filter(|&i| t[i] == l && p[i] == l).count() as f64;
            let fp = (0..n).filter(|&i| t[i] != l && p[i] == l).count() as f64;
            let fnn = (0..n).filter(|&i| t[i] == l && p[i] != l).count() as f64;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
            let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            let support = tp + fnn;
            let m = r.class(l);
            assert!((m.precision - prec).abs() < 1e-9);
            assert!((m.recall - rec).abs() < 1e-9);
            assert!((m.f1 - f1).abs() < 1e-9);
            assert_eq!(m.support as f64, support);
            for (acc, v) in macro_sum.iter_mut().zip([prec, rec, f1]) {
                *acc += v / 5.0;
            }
            for (acc, v) in weighted.iter_mut().zip([prec, rec, f1]) {
                *acc += v * support / n as f64;
            }
            for l2 in Label::ALL {
                let cell = (0..n).filter(|&i| t[i] == l && p[i] == l2).count();
                assert_eq!(r.confusion[l.code()][l2.code()], cell);
            }
        }
        let acc = (0..n).filter(|&i| t[i] == p[i]).count() as f64 / n as f64;
        assert!((r.accuracy - acc).abs() < 1e-9);
        assert!((r.macro_avg.precision - macro_sum[0]).abs() < 1e-9);
        assert!((r.macro_avg.recall - macro_sum[1]).abs() < 1e-9);
        assert!((r.macro_avg.f1 - macro_sum[2]).abs() < 1e-9);
        assert!((r.weighted_avg.precision - weighted[0]).abs() < 1e-9);
        assert!((r.weighted_avg.recall - weighted[1]).abs() < 1e-9);
        assert!((r.weighted_avg.f1 - weighted[2]).abs() < 1e-9);
        assert!((r.weighted_avg.recall - r.accuracy).abs() < 1e-9);
        let total: usize = r.confusion.iter().flatten().sum();
        assert_eq!(total, n);
    }
}

#[test]
fn kappa_near_zero_for_independent_labels() {
    use rand::Rng;
    let mut rng = sabia_core::seeded_rng(7);
    let a: Vec<Label> = (0..10_000).map(|_| Label::from_code(rng.random_range(0..5)).unwrap()).collect();
    let b: Vec<Label> = (0..10_000).map(|_| Label::from_code(rng.random_range(0..5)).unwrap()).collect();
    assert!(cohen_kappa(&a, &b).unwrap().abs() < 0.05);
}

#[test]
fn tf_idf_columns_sorted() {
    let docs = vec![vec!["zeta".to_string(), "alpha".into()], vec!["mid".into()]];
    let m = fit_tfidf(&docs).unwrap();
    let cols: HashMap<&str, usize> = m.vocabulary.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(cols["alpha"], 0);
    assert_eq!(cols["mid"], 1);
    assert_eq!(cols["zeta"], 2);
}
