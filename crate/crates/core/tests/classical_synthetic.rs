//! Classical models on the seeded 200-post synthetic corpus.

use std::collections::BTreeMap;

use sabia_core::baselines::{train_classical, Algorithm, ClassicalConfig};
use sabia_core::corpus::{generate_synthetic, stratified_split, SplitSpec};
use sabia_core::evaluate::evaluate;
use sabia_core::features::fit_tfidf;
use sabia_core::preprocess::Preprocessor;
use sabia_core::{Label, Lexicon};

#[test]
fn classical_models_separate_synthetic_classes() {
    let lex = Lexicon::starter();
    let counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 40)).collect();
    let corpus = generate_synthetic(&counts, &lex, 80);
    let (train, test) = stratified_split(&corpus, &SplitSpec::default()).unwrap();
    let pre = Preprocessor::with_defaults(lex);
    let tok = |c: &sabia_core::Corpus| c.iter().map(|p| pre.clean(&p.text)).collect::<Vec<_>>();
    let (train_tok, test_tok) = (tok(&train), tok(&test));
    let tfidf = fit_tfidf(&train_tok).unwrap();
    let xtr = tfidf.transform_all(&train_tok);
    let xte = tfidf.transform_all(&test_tok);
    let (ytr, yte) = (train.labels().unwrap(), test.labels().unwrap());

    for algo in Algorithm::ALL {
        let start = std::time::Instant::now();
        let model = train_classical(&ClassicalConfig::new(algo, 80), &xtr, &ytr).unwrap();
        let report = evaluate(&yte, &model.predict(&xte).unwrap()).unwrap();
        eprintln!("{algo}: accuracy {:.3} in {:?}", report.accuracy, start.elapsed());
        if algo == Algorithm::Majority {
            assert!((report.accuracy - 0.20).abs() <= 0.02);
        } else {
            assert!(report.accuracy >= 0.90, "{algo} accuracy {}", report.accuracy);
        }
    }
}
