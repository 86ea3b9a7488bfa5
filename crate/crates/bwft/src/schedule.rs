//! Reduce-on-plateau learning-rate schedule, monitoring validation accuracy.

/// Constants for the schedule; the defaults are used everywhere unless a
/// config overrides them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauConfig {
    pub factor: f32,
    pub patience: u32,
    pub min_lr: f32,
    /// An epoch counts as an improvement only if it beats the best seen
    /// accuracy by more than this.
    pub threshold: f32,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 5,
            min_lr: 1e-7,
            threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    cfg: PlateauConfig,
    lr: f32,
    best: f32,
    stale_epochs: u32,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f32, cfg: PlateauConfig) -> PlateauSchedule {
        PlateauSchedule {
            cfg,
            lr: initial_lr,
            best: f32::NEG_INFINITY,
            stale_epochs: 0,
        }
    }

    pub fn lr(&self) -> f32 {
        self.lr
    }

    /// Feeds one epoch's validation accuracy; returns the learning rate to use
    /// from the next epoch on. The rate never increases and never drops below
    /// `min_lr`.
    pub fn on_epoch(&mut self, val_accuracy: f32) -> f32 {
        if val_accuracy > self.best + self.cfg.threshold {
            self.best = val_accuracy;
            self.stale_epochs = 0;
        } else {
            self.stale_epochs += 1;
            if self.stale_epochs >= self.cfg.patience {
                self.lr = (self.lr * self.cfg.factor).max(self.cfg.min_lr);
                self.stale_epochs = 0;
            }
        }
        self.lr
    }
}
