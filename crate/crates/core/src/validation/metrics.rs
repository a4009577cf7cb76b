use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::{mean, std_dev};

/// Binary classification scores with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Set when precision or recall had a zero denominator and was reported
    /// as 0.
    pub degenerate: bool,
}

pub fn classification_metrics(predicted: &[u8], actual: &[u8]) -> Result<MetricsReport> {
    check_len(actual.len(), predicted.len())?;
    if actual.is_empty() {
        return Err(Error::input("no labels to score"));
    }
    if predicted.iter().chain(actual).any(|&l| l > 1) {
        return Err(Error::input("labels must be 0 or 1"));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fn_ += 1,
        }
    }
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsReport {
        accuracy: (tp + tn) as f64 / actual.len() as f64,
        precision,
        recall,
        f1,
        true_positives: tp,
        true_negatives: tn,
        false_positives: fp,
        false_negatives: fn_,
        degenerate,
    })
}

/// Pearson correlation coefficient.
pub fn correlation(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_len(actual.len(), pred.len())?;
    if pred.len() < 2 {
        return Err(Error::input("correlation needs at least 2 points"));
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let ma = actual.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        let (dp, da) = (p - mp, a - ma);
        sxy += dp * da;
        sxx += dp * dp;
        syy += da * da;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSignal(
            "correlation undefined for a constant series".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean_squared_error(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_len(actual.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::input("no predictions to score"));
    }
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / pred.len() as f64)
}

/// Absolute class-mean gap divided by the pooled (population) standard
/// deviation `sqrt((s0² + s1²) / 2)`.
pub fn standardized_mean_difference(values: &[f64], labels: &[u8]) -> Result<f64> {
    check_len(values.len(), labels.len())?;
    let group = |class: u8| -> Vec<f64> {
        values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .map(|(v, _)| *v)
            .collect()
    };
    let (a, b) = (group(0), group(1));
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("both classes must be present"));
    }
    let pooled = ((std_dev(&a).powi(2) + std_dev(&b).powi(2)) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateSignal(
            "standardized mean difference undefined for zero within-class spread".into(),
        ));
    }
    Ok((mean(&b) - mean(&a)).abs() / pooled)
}
