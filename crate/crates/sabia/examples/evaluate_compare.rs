//! Per-class metrics, confusion artifacts and a model comparison with
//! relative improvement.
//!
//! cargo run -p sabia --example evaluate_compare

use std::collections::BTreeMap;

use sabia::core::evaluate::{compare, evaluate, write_report_artifacts, Averaging};
use sabia::core::Label::{self, *};

fn main() {
    let truth: Vec<Label> = [Dealer, ActiveUser, RecoveredUser, PrescriptionUser, NonUser].repeat(10);
    let strong: Vec<Label> = truth.iter().enumerate().map(|(i, l)| if i % 17 == 0 { NonUser } else { *l }).collect();
    let weak: Vec<Label> = truth.iter().enumerate().map(|(i, l)| if i % 6 == 0 { ActiveUser } else { *l }).collect();

    let a = evaluate(&truth, &strong).unwrap();
    print!("{}", a.table());
    let dir = std::env::temp_dir().join(format!("sabia-eval-{}", std::process::id()));
    let written = write_report_artifacts(&a, &dir, "metrics", true).unwrap();
    println!("wrote {} and {}", written.json.display(), written.confusion_csv.display());

    let reports = BTreeMap::from([("hybrid".to_string(), a), ("baseline".to_string(), evaluate(&truth, &weak).unwrap())]);
    print!("{}", compare(&reports, Some("baseline"), Averaging::Weighted).unwrap().table());
    let _ = std::fs::remove_dir_all(&dir);
}
