//! Binary classification metrics: confusion matrix, precision, recall, F1,
//! accuracy. Label 1 (causal) is the positive class and zero-denominator
//! metrics are defined as 0 so reports always serialize cleanly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::LossKind;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} predictions vs {right} gold labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot evaluate empty input")]
    EmptyInput,
    #[error("label at index {index} must be 0 or 1, got {value}")]
    InvalidLabel { index: usize, value: u8 },
}

/// Confusion counts and derived metrics for one evaluation.
///
/// All rate metrics are fractions in [0, 1], never percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "tp")]
    pub true_pos: usize,
    #[serde(rename = "fp")]
    pub false_pos: usize,
    #[serde(rename = "tn")]
    pub true_neg: usize,
    #[serde(rename = "fn")]
    pub false_neg: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// 2x2 confusion matrix as CSV, rows = gold, columns = predicted.
    pub fn confusion_csv(&self) -> String {
        format!(
            ",pred_0,pred_1\ngold_0,{},{}\ngold_1,{},{}\n",
            self.true_neg, self.false_pos, self.false_neg, self.true_pos
        )
    }
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Compares predictions against gold labels.
pub fn evaluate(pred: &[u8], gold: &[u8]) -> Result<EvalReport, MetricsError> {
    if pred.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let check = |index: usize, value: u8| {
        if value > 1 {
            Err(MetricsError::InvalidLabel { index, value })
        } else {
            Ok(())
        }
    };
    let (mut tp, mut fp, mut tn, mut fal_neg) = (0usize, 0usize, 0usize, 0usize);
    for (index, (&p, &g)) in pred.iter().zip(gold).enumerate() {
        check(index, p)?;
        check(index, g)?;
        match (g, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (0, 0) => tn += 1,
            _ => fal_neg += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fal_neg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        true_pos: tp,
        false_pos: fp,
        true_neg: tn,
        false_neg: fal_neg,
        precision,
        recall,
        f1,
        accuracy: ratio(tp + tn, pred.len()),
    })
}

/// One line of the loss-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub kind: LossKind,
    pub f1: f64,
    pub true_pos: usize,
    /// True-positive delta against the vanilla run, when one is present.
    pub tp_delta_vs_vanilla: Option<i64>,
}

/// Orders reports by F1 (descending; ties break in enum order, vanilla
/// first) and attaches true-positive deltas against the vanilla baseline.
/// Pure reporting: nothing is asserted about which loss wins.
pub fn compare_runs(reports: &BTreeMap<LossKind, EvalReport>) -> Vec<CompareRow> {
    let baseline = reports.get(&LossKind::Vanilla).map(|r| r.true_pos as i64);
    let mut rows: Vec<CompareRow> = reports
        .iter()
        .map(|(&kind, report)| CompareRow {
            kind,
            f1: report.f1,
            true_pos: report.true_pos,
            tp_delta_vs_vanilla: baseline.map(|b| report.true_pos as i64 - b),
        })
        .collect();
    rows.sort_by(|a, b| b.f1.total_cmp(&a.f1).then(a.kind.cmp(&b.kind)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(kind_f1_tp: (f64, usize)) -> EvalReport {
        EvalReport {
            true_pos: kind_f1_tp.1,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
            precision: 0.0,
            recall: 0.0,
            f1: kind_f1_tp.0,
            accuracy: 0.0,
        }
    }

    #[test]
    fn perfect_prediction() {
        let r = evaluate(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((r.true_pos, r.true_neg, r.false_pos, r.false_neg), (2, 1, 0, 0));
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn half_right() {
        let r = evaluate(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((r.true_pos, r.false_pos, r.false_neg, r.true_neg), (1, 1, 1, 1));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn zero_denominators_give_zero() {
        let r = evaluate(&[0, 0], &[1, 1]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn errors_on_bad_input() {
        assert_eq!(
            evaluate(&[1], &[1, 0]).unwrap_err(),
            MetricsError::LengthMismatch { left: 1, right: 2 }
        );
        assert_eq!(evaluate(&[], &[]).unwrap_err(), MetricsError::EmptyInput);
        assert_eq!(
            evaluate(&[2], &[1]).unwrap_err(),
            MetricsError::InvalidLabel { index: 0, value: 2 }
        );
    }

    #[test]
    fn json_has_all_eight_fields() {
        let r = evaluate(&[1, 0], &[1, 1]).unwrap();
        let value = serde_json::to_value(&r).unwrap();
        let object = value.as_object().unwrap();
        for key in ["tp", "fp", "tn", "fn", "precision", "recall", "f1", "accuracy"] {
            assert!(object.contains_key(key), "missing {key}");
        }
        assert_eq!(object.len(), 8);
    }

    #[test]
    fn confusion_csv_layout() {
        let r = evaluate(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(r.confusion_csv(), ",pred_0,pred_1\ngold_0,1,1\ngold_1,1,1\n");
    }

    #[test]
    fn compare_orders_by_f1_descending() {
        // A run where the agreement-aware losses beat the baseline:
        // refined > noisy > vanilla.
        let mut reports = BTreeMap::new();
        reports.insert(LossKind::Vanilla, report((0.8283, 145)));
        reports.insert(LossKind::Noisy, report((0.8313, 152)));
        reports.insert(LossKind::Refined, report((0.8501, 149)));
        let rows = compare_runs(&reports);
        let kinds: Vec<LossKind> = rows.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![LossKind::Refined, LossKind::Noisy, LossKind::Vanilla]);
        assert_eq!(rows[0].tp_delta_vs_vanilla, Some(4));
        assert_eq!(rows[1].tp_delta_vs_vanilla, Some(7));
        assert_eq!(rows[2].tp_delta_vs_vanilla, Some(0));
    }

    #[test]
    fn compare_breaks_ties_in_enum_order() {
        let mut reports = BTreeMap::new();
        reports.insert(LossKind::Refined, report((0.75, 10)));
        reports.insert(LossKind::Vanilla, report((0.75, 10)));
        let rows = compare_runs(&reports);
        assert_eq!(rows[0].kind, LossKind::Vanilla);
        assert_eq!(rows[1].kind, LossKind::Refined);
    }

    #[test]
    fn compare_without_vanilla_has_no_deltas() {
        let mut reports = BTreeMap::new();
        reports.insert(LossKind::Noisy, report((0.6, 5)));
        reports.insert(LossKind::Refined, report((0.7, 6)));
        let rows = compare_runs(&reports);
        assert!(rows.iter().all(|r| r.tp_delta_vs_vanilla.is_none()));
    }

    #[test]
    fn compare_matches_independent_sort() {
        let mut reports = BTreeMap::new();
        reports.insert(LossKind::Vanilla, report((0.41, 3)));
        reports.insert(LossKind::Noisy, report((0.93, 9)));
        reports.insert(LossKind::Refined, report((0.62, 6)));
        let rows = compare_runs(&reports);
        let mut expected: Vec<f64> = reports.values().map(|r| r.f1).collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        let got: Vec<f64> = rows.iter().map(|r| r.f1).collect();
        assert_eq!(got, expected);
    }

    proptest! {
        #[test]
        fn evaluate_agrees_with_brute_force(
            pairs in proptest::collection::vec((0u8..=1, 0u8..=1), 1..200)
        ) {
            let pred: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let gold: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let r = evaluate(&pred, &gold).unwrap();
            // Independent counter.
            let tp = pairs.iter().filter(|&&(p, g)| p == 1 && g == 1).count();
            let fp = pairs.iter().filter(|&&(p, g)| p == 1 && g == 0).count();
            let tn = pairs.iter().filter(|&&(p, g)| p == 0 && g == 0).count();
            let fneg = pairs.iter().filter(|&&(p, g)| p == 0 && g == 1).count();
            prop_assert_eq!((r.true_pos, r.false_pos, r.true_neg, r.false_neg), (tp, fp, tn, fneg));
            prop_assert_eq!(r.total(), pairs.len());
        }

        #[test]
        fn swapping_positive_convention_swaps_counts(
            pairs in proptest::collection::vec((0u8..=1, 0u8..=1), 1..100)
        ) {
            let pred: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let gold: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let direct = evaluate(&pred, &gold).unwrap();
            let flipped_pred: Vec<u8> = pred.iter().map(|&p| 1 - p).collect();
            let flipped_gold: Vec<u8> = gold.iter().map(|&g| 1 - g).collect();
            let swapped = evaluate(&flipped_pred, &flipped_gold).unwrap();
            prop_assert_eq!(direct.true_pos, swapped.true_neg);
            prop_assert_eq!(direct.true_neg, swapped.true_pos);
            prop_assert_eq!(direct.false_pos, swapped.false_neg);
            prop_assert_eq!(direct.false_neg, swapped.false_pos);
        }
    }
}
