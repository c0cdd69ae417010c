//! Loss curves and early stopping shared by both training loops.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingCurve {
    /// Unit of `train`/`val`, e.g. `"svd_mse"` or `"crmse_deg"`.
    pub metric: String,
    pub records: Vec<EpochRecord>,
}

impl TrainingCurve {
    pub fn new(metric: impl Into<String>) -> Self {
        Self {
            metric: metric.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: EpochRecord) {
        self.records.push(record);
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().min_by(|a, b| a.val.total_cmp(&b.val))
    }

    /// One row per epoch: `epoch,train,val,learning_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,train_{m},val_{m},learning_rate\n", m = self.metric);
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train, r.val, r.learning_rate));
        }
        out
    }
}

/// Tracks the best validation score and signals when `patience` epochs pass without
/// improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Returns true when `val` is a new best.
    pub fn observe(&mut self, epoch: usize, val: f64) -> bool {
        if val < self.best {
            self.best = val;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        self.patience > 0 && epoch >= self.best_epoch + self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience() {
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(0, 1.0));
        assert!(!es.observe(1, 1.5));
        assert!(!es.should_stop(1));
        assert!(!es.observe(2, 1.2));
        assert!(es.should_stop(2));
        assert_eq!(es.best_epoch(), 0);
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let mut c = TrainingCurve::new("crmse_deg");
        for e in 0..3 {
            c.push(EpochRecord {
                epoch: e,
                train: 1.0,
                val: 2.0,
                learning_rate: 0.1,
            });
        }
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("epoch,train_crmse_deg,val_crmse_deg"));
    }
}
