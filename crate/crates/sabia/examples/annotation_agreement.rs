//! Pairwise Cohen's kappa, majority vote and adjudication of unresolved items.
//!
//! cargo run -p sabia --example annotation_agreement

use std::collections::BTreeMap;

use sabia::core::annotate::{agreement_report, majority_vote, merge_adjudication, AnnotationSet};
use sabia::core::Label::{self, *};

fn main() {
    let ids: Vec<String> = (1..=6).map(|i| format!("p{i}")).collect();
    let votes: Vec<Vec<Label>> = vec![
        vec![Dealer, Dealer, Dealer],
        vec![Dealer, ActiveUser, ActiveUser],
        vec![RecoveredUser, RecoveredUser, ActiveUser],
        vec![NonUser, NonUser, NonUser],
        vec![PrescriptionUser, ActiveUser, NonUser],
        vec![PrescriptionUser, PrescriptionUser, PrescriptionUser],
    ];
    let set = AnnotationSet::new(ids, vec!["ann1".into(), "ann2".into(), "ann3".into()], votes).unwrap();
    print!("{}", agreement_report(&set).table());

    let mut vote = majority_vote(&set);
    println!("unresolved before adjudication: {:?}", vote.unresolved);
    let adjudicated = BTreeMap::from([("p5".to_string(), PrescriptionUser)]);
    let left = merge_adjudication(&mut vote, &adjudicated);
    println!("unresolved after adjudication: {left:?}");
    for (id, r) in &vote.resolved {
        println!("{id}: {r:?}");
    }
}
