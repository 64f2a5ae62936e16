//! Plateau learning-rate schedule and early stopping as one state machine.
//! "Improvement" means strictly beating the best validation loss seen so
//! far, including the baseline measured before the first epoch.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleEvent {
    Improved,
    Plateau { decayed: bool, stop: bool },
}

#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    lr_patience: usize,
    stop_patience: usize,
    best: f64,
    since_improve: usize,
}

impl PlateauSchedule {
    /// `baseline` is the validation loss of the untrained model; epochs that
    /// fail to beat it count against both patience budgets from the start.
    pub fn new(
        initial_lr: f64,
        factor: f64,
        lr_patience: usize,
        stop_patience: usize,
        baseline: f64,
    ) -> Self {
        assert!(initial_lr > 0.0 && factor > 0.0 && factor <= 1.0);
        assert!(lr_patience > 0 && stop_patience > 0);
        PlateauSchedule {
            lr: initial_lr,
            factor,
            lr_patience,
            stop_patience,
            best: baseline,
            since_improve: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, val_loss: f64) -> ScheduleEvent {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_improve = 0;
            return ScheduleEvent::Improved;
        }
        self.since_improve += 1;
        let decayed = self.since_improve % self.lr_patience == 0;
        if decayed {
            self.lr *= self.factor;
        }
        ScheduleEvent::Plateau {
            decayed,
            stop: self.since_improve >= self.stop_patience,
        }
    }
}
