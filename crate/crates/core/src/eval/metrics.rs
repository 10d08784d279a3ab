use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RelationshipLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: RelationshipLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `counts[true][predicted]` over `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<RelationshipLabel>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[RelationshipLabel]) -> Self {
        Self {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    fn index(&self, label: RelationshipLabel) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn record(&mut self, truth: RelationshipLabel, predicted: RelationshipLabel) -> Result<()> {
        let (t, p) = (self.index(truth)?, self.index(predicted)?);
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn from_pairs(
        classes: &[RelationshipLabel],
        pairs: impl IntoIterator<Item = (RelationshipLabel, RelationshipLabel)>,
    ) -> Result<Self> {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// (true positives, false positives, false negatives) for class `i`.
    pub fn tp_fp_fn(&self, i: usize) -> (u64, u64, u64) {
        let tp = self.counts[i][i];
        let col: u64 = self.counts.iter().map(|row| row[i]).sum();
        let row: u64 = self.counts[i].iter().sum();
        (tp, col - tp, row - tp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    /// Classes averaged into the macro scores.
    pub macro_classes: Vec<RelationshipLabel>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// F1 from counts pooled over all classes. With one true and one predicted
    /// label per example this equals accuracy.
    pub micro_f1: f64,
    pub accuracy: f64,
}

impl MetricsReport {
    pub fn class(&self, label: RelationshipLabel) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.label == label)
    }
}

/// Per-class scores plus macro averages over `macro_classes` (typically
/// PARTOF and CONTAINS) and pooled micro scores over every class.
pub fn compute_metrics(confusion: &ConfusionMatrix, macro_classes: &[RelationshipLabel]) -> Result<MetricsReport> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::Config("confusion matrix is empty".into()));
    }
    let per_class: Vec<ClassMetrics> = confusion
        .classes
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let (tp, fp, fn_) = confusion.tp_fp_fn(i);
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassMetrics {
                label,
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: tp + fn_,
            }
        })
        .collect();
    let mut picked = Vec::with_capacity(macro_classes.len());
    for &label in macro_classes {
        picked.push(per_class[confusion.index(label)?]);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for i in 0..confusion.classes.len() {
        let (a, b, c) = confusion.tp_fp_fn(i);
        tp += a;
        fp += b;
        fn_ += c;
    }
    let micro_p = ratio(tp, tp + fp);
    let micro_r = ratio(tp, tp + fn_);
    Ok(MetricsReport {
        macro_precision: mean(&picked.iter().map(|m| m.precision).collect::<Vec<_>>()),
        macro_recall: mean(&picked.iter().map(|m| m.recall).collect::<Vec<_>>()),
        macro_f1: mean(&picked.iter().map(|m| m.f1).collect::<Vec<_>>()),
        macro_classes: macro_classes.to_vec(),
        per_class,
        micro_f1: f1_score(micro_p, micro_r),
        accuracy: ratio(confusion.correct(), total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use RelationshipLabel::*;

    #[test]
    fn table_two_arithmetic() {
        assert!((f1_score(0.82, 0.76) - 0.789).abs() < 5e-4);
        assert!((mean(&[0.44, 0.38]) - 0.41).abs() < 1e-12);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn counts_reproduce_reported_precision_and_recall() {
        // 1558 / (1558 + 342) = 0.82 and 1558 / (1558 + 492) = 0.76
        let mut m = ConfusionMatrix::new(&[Contains, Different]);
        m.counts = vec![vec![1558, 492], vec![342, 100]];
        let r = compute_metrics(&m, &[Contains]).unwrap();
        let c = r.class(Contains).unwrap();
        assert!((c.precision - 0.82).abs() < 1e-12);
        assert!((c.recall - 0.76).abs() < 1e-12);
        assert!((c.f1 - 0.789).abs() < 5e-4);
        assert_eq!(c.support, 2050);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let classes = RelationshipLabel::BASE_CLASSES;
        let m = ConfusionMatrix::from_pairs(&classes, classes.iter().map(|&c| (c, c))).unwrap();
        let r = compute_metrics(&m, &RelationshipLabel::WHOLE_PART).unwrap();
        assert!(r.per_class.iter().all(|c| c.f1 == 1.0));
        assert_eq!((r.macro_f1, r.micro_f1, r.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_and_unknown_inputs_are_errors() {
        let m = ConfusionMatrix::new(&[Contains, PartOf]);
        assert!(compute_metrics(&m, &[Contains]).is_err());
        let mut m = ConfusionMatrix::new(&[Contains, PartOf]);
        assert!(m.record(Overlaps, Contains).is_err());
        m.record(Contains, Contains).unwrap();
        assert!(compute_metrics(&m, &[Overlaps]).is_err());
    }

    fn label_strategy() -> impl Strategy<Value = RelationshipLabel> {
        (0usize..5).prop_map(|i| RelationshipLabel::BASE_CLASSES[i])
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force_counts(
            pairs in prop::collection::vec((label_strategy(), label_strategy()), 1..200)
        ) {
            let classes = RelationshipLabel::BASE_CLASSES;
            let m = ConfusionMatrix::from_pairs(&classes, pairs.iter().copied()).unwrap();
            prop_assert_eq!(m.total(), pairs.len() as u64);
            let r = compute_metrics(&m, &RelationshipLabel::WHOLE_PART).unwrap();
            for c in &r.per_class {
                let tp = pairs.iter().filter(|(t, p)| *t == c.label && *p == c.label).count() as f64;
                let fp = pairs.iter().filter(|(t, p)| *t != c.label && *p == c.label).count() as f64;
                let fn_ = pairs.iter().filter(|(t, p)| *t == c.label && *p != c.label).count() as f64;
                let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
                let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
                prop_assert_eq!(c.precision, p);
                prop_assert_eq!(c.recall, rec);
                prop_assert_eq!(c.support as f64, tp + fn_);
            }
            let acc = pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64;
            prop_assert_eq!(r.accuracy, acc);
            prop_assert!((r.micro_f1 - acc).abs() < 1e-12);
        }
    }
}
