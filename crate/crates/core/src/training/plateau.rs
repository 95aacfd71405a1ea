use super::{TrainConfig, TrainHistory};

/// Reduce-on-plateau schedule monitoring validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    best: f64,
    bad_epochs: usize,
    patience: usize,
    factor: f64,
    min_delta: f64,
    min_lr: f64,
}

impl PlateauScheduler {
    pub fn new(config: &TrainConfig) -> Self {
        PlateauScheduler {
            lr: config.learning_rate,
            best: f64::INFINITY,
            bad_epochs: 0,
            patience: config.plateau_patience,
            factor: config.plateau_factor,
            min_delta: config.plateau_min_delta,
            min_lr: config.min_lr,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's validation loss and returns the learning rate for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                if self.lr > self.min_lr {
                    self.lr = (self.lr * self.factor).max(self.min_lr);
                }
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying every recorded validation loss.
pub fn reduce_lr_on_plateau(history: &TrainHistory, config: &TrainConfig) -> f64 {
    let mut s = PlateauScheduler::new(config);
    for e in &history.epochs {
        s.observe(e.val_loss);
    }
    s.lr()
}
