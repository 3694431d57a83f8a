//! Confusion matrices and the four evaluation metrics: unweighted average
//! recall, macro F1, accuracy, and weighted F1.

use serde::Serialize;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        assert!(n_classes > 0, "need at least one class");
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        assert!(true_class < self.n_classes && predicted < self.n_classes);
        self.counts[true_class * self.n_classes + predicted] += 1;
    }

    pub fn get(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of true instances of a class.
    pub fn support(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|j| self.get(class, j)).sum()
    }

    /// Number of predictions of a class.
    pub fn predicted_count(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|i| self.get(i, class)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.n_classes)
            .map(|i| (0..self.n_classes).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        let mut cm = ConfusionMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "confusion matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                cm.counts[i * n + j] = v;
            }
        }
        cm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub uar: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub weighted_f1: f64,
}

/// Compute all four metrics from a non-empty confusion matrix.
///
/// Classes with zero true instances are excluded from the UAR mean; a
/// class's F1 is 0 whenever precision + recall is 0. Weighted F1 weights
/// per-class F1 by support.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let total = cm.total();
    assert!(total > 0, "cannot compute metrics from an empty confusion matrix");
    let c = cm.n_classes();

    let mut recall_sum = 0.0;
    let mut recall_classes = 0usize;
    let mut f1_sum = 0.0;
    let mut weighted_f1_sum = 0.0;
    let mut trace = 0u64;

    for k in 0..c {
        let tp = cm.get(k, k);
        trace += tp;
        let support = cm.support(k);
        let predicted = cm.predicted_count(k);

        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        if support > 0 {
            recall_sum += recall;
            recall_classes += 1;
        }

        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        weighted_f1_sum += f1 * support as f64;
    }

    Metrics {
        uar: recall_sum / recall_classes.max(1) as f64,
        macro_f1: f1_sum / c as f64,
        accuracy: trace as f64 / total as f64,
        weighted_f1: weighted_f1_sum / total as f64,
    }
}
