use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Corpus, Label};
use crate::{seeded_rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 80,
            stratified: true,
        }
    }
}

/// Number of training items for a group of `n`, rounding halves up.
fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Split into (train, test). Within each class the posts are shuffled with
/// the seed and the first `round(fraction * n)` go to train; both halves
/// keep the original corpus order.
pub fn stratified_split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let labels = corpus.labels()?;

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut groups = vec![Vec::new(); Label::COUNT];
        for (i, l) in labels.iter().enumerate() {
            groups[l.code()].push(i);
        }
        for (code, g) in groups.iter().enumerate() {
            if g.len() == 1 {
                return Err(Error::ClassTooSmall {
                    label: Label::from_code(code).expect("valid code"),
                    count: 1,
                });
            }
        }
        groups
    } else {
        vec![(0..labels.len()).collect()]
    };

    let mut rng = seeded_rng(spec.seed);
    let mut in_train = vec![false; labels.len()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let k = train_count(group.len(), spec.train_fraction);
        for &i in &group[..k] {
            in_train[i] = true;
        }
    }

    let mut train = Corpus::default();
    let mut test = Corpus::default();
    for (post, &t) in corpus.iter().zip(&in_train) {
        if t {
            train.push(post.clone())?;
        } else {
            test.push(post.clone())?;
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AnnotatedPost;

    fn corpus(spec: &[(Label, usize)]) -> Corpus {
        let mut posts = Vec::new();
        for &(label, n) in spec {
            for i in 0..n {
                posts.push(AnnotatedPost::new(format!("{label}-{i}"), "text", Some(label)));
            }
        }
        Corpus::new(posts).unwrap()
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(train_count(5, 0.8), 4);
        assert_eq!(train_count(5764, 0.8), 4611);
        // 0.5 * 5 = 2.5 rounds up, remainder to train
        assert_eq!(train_count(5, 0.5), 3);
        assert_eq!(train_count(2, 0.8), 2);
    }

    #[test]
    fn five_and_five() {
        let c = corpus(&[(Label::ActiveUser, 5), (Label::Dealer, 5)]);
        let (train, test) = stratified_split(&c, &SplitSpec { seed: 7, ..Default::default() }).unwrap();
        assert_eq!(train.class_counts(), [4, 4, 0, 0, 0]);
        assert_eq!(test.class_counts(), [1, 1, 0, 0, 0]);
    }

    #[test]
    fn singleton_class_rejected() {
        let c = corpus(&[(Label::ActiveUser, 5), (Label::Dealer, 1)]);
        let err = stratified_split(&c, &SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::ClassTooSmall { label: Label::Dealer, count: 1 }));
    }

    #[test]
    fn unlabeled_rejected() {
        let c = Corpus::new(vec![AnnotatedPost::new("x", "t", None)]).unwrap();
        assert!(matches!(
            stratified_split(&c, &SplitSpec::default()),
            Err(Error::Unlabeled(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let c = corpus(&[(Label::ActiveUser, 13), (Label::NonUser, 9)]);
        let spec = SplitSpec { seed: 3, ..Default::default() };
        let a = stratified_split(&c, &spec).unwrap();
        let b = stratified_split(&c, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unstratified_split_covers_corpus() {
        let c = corpus(&[(Label::ActiveUser, 7), (Label::NonUser, 3)]);
        let spec = SplitSpec { stratified: false, ..Default::default() };
        let (train, test) = stratified_split(&c, &spec).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }
}
