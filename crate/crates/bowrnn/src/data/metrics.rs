//! Classification accuracy and mean average precision.

use crate::error::{Error, Result};

/// Fraction of predictions matching the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Mean average precision over classes.
///
/// For each class `c` (1-based), all items are ranked by their class-`c`
/// score, descending, ties kept in original order; AP is the mean of the
/// precision at each positive rank. Classes without positive items are
/// excluded from the mean with a warning.
///
/// `scores[i]` holds the per-class scores of item `i`; `labels` are in
/// `1..=C` with `C = scores[i].len()`.
pub fn mean_average_precision(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InsufficientData("no items to rank".into()));
    }
    let num_classes = scores[0].len();
    if num_classes == 0 {
        return Err(Error::InvalidConfig("need at least one class".into()));
    }
    for row in scores {
        if row.len() != num_classes {
            return Err(Error::DimensionMismatch {
                expected: num_classes,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
    }
    for &label in labels {
        if label == 0 || label > num_classes {
            return Err(Error::InvalidLabel {
                label,
                classes: num_classes,
            });
        }
    }

    let mut total = 0.0;
    let mut included = 0usize;
    for class in 1..=num_classes {
        if !labels.contains(&class) {
            log::warn!("class {class} has no positive items; excluded from mAP");
            continue;
        }
        total += average_precision(scores, labels, class);
        included += 1;
    }
    if included == 0 {
        return Err(Error::InsufficientData(
            "no class has positive items".into(),
        ));
    }
    Ok(total / included as f64)
}

fn average_precision(scores: &[Vec<f64>], labels: &[usize], class: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps original order on score ties.
    order.sort_by(|&a, &b| {
        scores[b][class - 1]
            .partial_cmp(&scores[a][class - 1])
            .unwrap()
    });
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (rank, &item) in order.iter().enumerate() {
        if labels[item] == class {
            hits += 1;
            precision_sum += hits as f64 / (rank + 1) as f64;
        }
    }
    precision_sum / hits as f64
}
