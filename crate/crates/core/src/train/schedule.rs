/// Epoch-level reduce-on-plateau.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    pub min_delta: f64,
    pub min_lr: f64,
    best: f64,
    wait: usize,
}

impl PlateauScheduler {
    pub fn new(factor: f64, patience: usize, min_delta: f64, min_lr: f64) -> Self {
        Self {
            factor,
            patience,
            min_delta,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    /// Feeds one epoch's validation loss and returns the learning rate for the next epoch.
    pub fn step(&mut self, val_loss: f64, lr: f64) -> f64 {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

/// Replays a whole validation-loss history through [`PlateauScheduler`] and
/// returns the learning rate in force after the last epoch.
pub fn reduce_lr_on_plateau(
    val_losses: &[f64],
    initial_lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
) -> f64 {
    let mut s = PlateauScheduler::new(factor, patience, 1e-4, min_lr);
    val_losses.iter().fold(initial_lr, |lr, &l| s.step(l, lr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    /// Stop and restore the weights of this (1-based) epoch.
    StopAndRestore { best_epoch: usize },
}

/// Best (1-based) epoch of a history: the earliest strict minimum.
pub fn best_epoch(val_losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in val_losses.iter().enumerate() {
        if best.is_none_or(|(_, b)| l < b) {
            best = Some((i, l));
        }
    }
    best.map(|(i, _)| i + 1)
}

/// Stops once `patience` epochs have passed without a new minimum.
pub fn early_stopping(val_losses: &[f64], patience: usize) -> StopDecision {
    match best_epoch(val_losses) {
        Some(best) if val_losses.len() - best >= patience => {
            StopDecision::StopAndRestore { best_epoch: best }
        }
        _ => StopDecision::Continue,
    }
}
