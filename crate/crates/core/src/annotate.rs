//! Multi-annotator label resolution and Cohen's kappa agreement.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

/// Labels from k >= 2 annotators over the same items.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    item_ids: Vec<String>,
    annotators: Vec<String>,
    /// votes[item][annotator]
    votes: Vec<Vec<Label>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Label(Label),
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorityVote {
    /// one entry per item, in item order
    pub resolved: Vec<(String, Resolution)>,
    pub unresolved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKappa {
    pub a: String,
    pub b: String,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub id: String,
    pub votes: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairwise: Vec<PairKappa>,
    pub mean_kappa: f64,
    pub disagreements: Vec<Disagreement>,
}

impl AnnotationSet {
    pub fn new(item_ids: Vec<String>, annotators: Vec<String>, votes: Vec<Vec<Label>>) -> Result<Self> {
        if annotators.len() < 2 {
            return Err(Error::Param {
                name: "annotators".into(),
                message: format!("need at least 2 annotators, got {}", annotators.len()),
            });
        }
        if item_ids.len() != votes.len() {
            return Err(Error::DimensionMismatch {
                expected: item_ids.len(),
                got: votes.len(),
            });
        }
        for (id, row) in item_ids.iter().zip(&votes) {
            if row.len() != annotators.len() {
                let missing = annotators.get(row.len()).cloned().unwrap_or_default();
                return Err(Error::IncompleteAnnotation {
                    item: id.clone(),
                    annotator: missing,
                });
            }
        }
        Ok(AnnotationSet {
            item_ids,
            annotators,
            votes,
        })
    }

    /// Build from per-annotator label lists over the same item order.
    pub fn from_columns(item_ids: Vec<String>, columns: Vec<Vec<Label>>) -> Result<Self> {
        let annotators = (1..=columns.len()).map(|i| format!("annotator_{i}")).collect();
        for col in &columns {
            if col.len() != item_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: item_ids.len(),
                    got: col.len(),
                });
            }
        }
        let votes = (0..item_ids.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        AnnotationSet::new(item_ids, annotators, votes)
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn votes(&self, item: usize) -> &[Label] {
        &self.votes[item]
    }

    pub fn column(&self, annotator: usize) -> Vec<Label> {
        self.votes.iter().map(|row| row[annotator]).collect()
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }
}

/// Strict majority wins; anything else is left for a human.
pub fn majority_vote(set: &AnnotationSet) -> MajorityVote {
    let mut resolved = Vec::with_capacity(set.len());
    let mut unresolved = Vec::new();
    for (id, row) in set.item_ids.iter().zip(&set.votes) {
        let mut counts = [0usize; Label::COUNT];
        for l in row {
            counts[l.code()] += 1;
        }
        let winner = Label::ALL.into_iter().find(|l| 2 * counts[l.code()] > row.len());
        let r = match winner {
            Some(l) => Resolution::Label(l),
            None => {
                unresolved.push(id.clone());
                Resolution::Unresolved
            }
        };
        resolved.push((id.clone(), r));
    }
    MajorityVote { resolved, unresolved }
}

pub fn cohen_kappa(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("kappa needs at least one item".into()));
    }
    let n = a.len() as f64;
    let mut ma = [0usize; Label::COUNT];
    let mut mb = [0usize; Label::COUNT];
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        ma[x.code()] += 1;
        mb[y.code()] += 1;
        agree += usize::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = (0..Label::COUNT).map(|c| (ma[c] as f64 / n) * (mb[c] as f64 / n)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

pub fn agreement_report(set: &AnnotationSet) -> AgreementReport {
    let k = set.annotators.len();
    let cols: Vec<Vec<Label>> = (0..k).map(|j| set.column(j)).collect();
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            // empty sets have no defined agreement; report perfect by convention
            let kappa = cohen_kappa(&cols[i], &cols[j]).unwrap_or(1.0);
            pairwise.push(PairKappa {
                a: set.annotators[i].clone(),
                b: set.annotators[j].clone(),
                kappa,
            });
        }
    }
    let mean_kappa = pairwise.iter().map(|p| p.kappa).sum::<f64>() / pairwise.len() as f64;
    let disagreements = set
        .item_ids
        .iter()
        .zip(&set.votes)
        .filter(|(_, row)| row.iter().any(|l| *l != row[0]))
        .map(|(id, row)| Disagreement {
            id: id.clone(),
            votes: row.clone(),
        })
        .collect();
    AgreementReport {
        pairwise,
        mean_kappa,
        disagreements,
    }
}

impl AgreementReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        for p in &self.pairwise {
            out.push_str(&format!("{} vs {}: {:.5}\n", p.a, p.b, p.kappa));
        }
        out.push_str(&format!("mean kappa: {:.5}\n", self.mean_kappa));
        out.push_str(&format!("items with disagreement: {}\n", self.disagreements.len()));
        out
    }
}

/// Read `id,annotator_1,..,annotator_k`. The header names the annotators.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(file, path)
}

pub fn read_annotations<R: Read>(reader: R, path: &Path) -> Result<AnnotationSet> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || !headers[0].eq_ignore_ascii_case("id") {
        return Err(Error::record(path, 1, "header must be id,annotator_1,annotator_2[,...]"));
    }
    let annotators: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut votes = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::record(path, line, "missing id"));
        }
        let mut row = Vec::with_capacity(annotators.len());
        for (j, name) in annotators.iter().enumerate() {
            match rec.get(j + 1).filter(|s| !s.is_empty()) {
                None => {
                    return Err(Error::IncompleteAnnotation {
                        item: id,
                        annotator: name.clone(),
                    })
                }
                Some(s) => row.push(
                    s.parse::<Label>()
                        .map_err(|_| Error::record(path, line, format!("unknown label {s:?}")))?,
                ),
            }
        }
        ids.push(id);
        votes.push(row);
    }
    AnnotationSet::new(ids, annotators, votes)
}

/// `id,label` rows for items a human must adjudicate, with the votes kept
/// in trailing columns for context.
pub fn write_unresolved<W: Write>(set: &AnnotationSet, mv: &MajorityVote, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(set.annotators.iter().cloned());
    w.write_record(&header)?;
    let index: BTreeMap<&str, usize> = set.item_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    for id in &mv.unresolved {
        let mut row = vec![id.clone(), String::new()];
        row.extend(set.votes[index[id.as_str()]].iter().map(|l| l.name().to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<adjudication>", e))?;
    Ok(())
}

/// Read an adjudication file; rows with an empty label are skipped.
pub fn read_adjudication<R: Read>(reader: R, path: &Path) -> Result<BTreeMap<String, Label>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec.get(0).unwrap_or_default();
        let label = rec.get(1).unwrap_or_default();
        if label.is_empty() {
            continue;
        }
        let label = label
            .parse::<Label>()
            .map_err(|_| Error::record(path, line, format!("unknown label {label:?}")))?;
        out.insert(id.to_string(), label);
    }
    Ok(out)
}

/// Fill unresolved items from adjudicated labels. Returns the ids that are
/// still unresolved afterwards.
pub fn merge_adjudication(mv: &mut MajorityVote, adjudicated: &BTreeMap<String, Label>) -> Vec<String> {
    for (id, r) in &mut mv.resolved {
        if *r == Resolution::Unresolved {
            if let Some(l) = adjudicated.get(id) {
                *r = Resolution::Label(*l);
            }
        }
    }
    mv.unresolved.retain(|id| !adjudicated.contains_key(id));
    mv.unresolved.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn hand_kappa() {
        let a = [Dealer, Dealer, ActiveUser, NonUser];
        let b = [Dealer, ActiveUser, ActiveUser, NonUser];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k - 0.636_363_636).abs() < 1e-6);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[Dealer; 3], &[Dealer; 3]).unwrap(), 1.0);
        assert!(cohen_kappa(&[], &[]).is_err());
        assert!(cohen_kappa(&a, &b[..3]).is_err());
    }

    #[test]
    fn votes() {
        let set = AnnotationSet::from_columns(
            ids(3),
            vec![
                vec![Dealer, Dealer, Dealer],
                vec![Dealer, Dealer, ActiveUser],
                vec![ActiveUser, Dealer, NonUser],
            ],
        )
        .unwrap();
        let mv = majority_vote(&set);
        assert_eq!(mv.resolved[0].1, Resolution::Label(Dealer));
        assert_eq!(mv.resolved[1].1, Resolution::Label(Dealer));
        assert_eq!(mv.resolved[2].1, Resolution::Unresolved);
        assert_eq!(mv.unresolved, vec!["p2"]);
    }

    #[test]
    fn two_way_tie_is_unresolved() {
        let set = AnnotationSet::from_columns(ids(1), vec![vec![Dealer], vec![NonUser]]).unwrap();
        assert_eq!(majority_vote(&set).unresolved.len(), 1);
    }

    #[test]
    fn report_and_csv() {
        let src = "id,a1,a2\n1,Dealer,Dealer\n2,Dealer,ActiveUser\n3,ActiveUser,ActiveUser\n4,NonUser,NonUser\n";
        let set = read_annotations(src.as_bytes(), Path::new("ann.csv")).unwrap();
        let r = agreement_report(&set);
        assert_eq!(r.pairwise.len(), 1);
        assert!((r.mean_kappa - 0.63636).abs() < 1e-5);
        assert_eq!(r.disagreements.len(), 1);
        assert_eq!(r.disagreements[0].id, "2");

        let mut mv = majority_vote(&set);
        let mut buf = Vec::new();
        write_unresolved(&set, &mv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,label,a1,a2\n2,,Dealer,ActiveUser"));
        let adj = read_adjudication("id,label\n2,Dealer\n".as_bytes(), Path::new("adj.csv")).unwrap();
        assert!(merge_adjudication(&mut mv, &adj).is_empty());
        assert_eq!(mv.resolved[1].1, Resolution::Label(Dealer));
    }

    #[test]
    fn incomplete_matrix_rejected() {
        let src = "id,a1,a2\n1,Dealer,\n";
        let err = read_annotations(src.as_bytes(), Path::new("ann.csv")).unwrap_err();
        assert!(matches!(err, Error::IncompleteAnnotation { .. }));
        let src = "id,a1,a2\n1,Dealer,Bogus\n";
        assert!(read_annotations(src.as_bytes(), Path::new("ann.csv")).is_err());
        assert!(AnnotationSet::from_columns(ids(1), vec![vec![Dealer]]).is_err());
    }
}
