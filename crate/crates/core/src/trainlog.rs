//! Per-epoch training records and early stopping, shared by both trainers.

use std::fmt;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub seconds: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} train_loss={:.6} valid_loss={:.6} seconds={:.3}",
            self.epoch, self.train_loss, self.valid_loss, self.seconds
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Non-fatal notes about overridden defaults.
    pub warnings: Vec<String>,
}

impl TrainLog {
    pub fn lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "best_epoch={} stopped_early={}\n",
            self.best_epoch, self.stopped_early
        ));
        out
    }
}

/// Wall-clock timer that reports zero when timing is disabled, so logs of
/// repeated runs can be compared byte for byte.
pub struct EpochTimer {
    start: Option<Instant>,
}

impl EpochTimer {
    pub fn start(enabled: bool) -> Self {
        EpochTimer {
            start: enabled.then(Instant::now),
        }
    }

    pub fn seconds(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Stale,
    Stop,
}

/// Stops once the monitored loss has failed to improve for `patience`
/// consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            Verdict::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Stale
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}
