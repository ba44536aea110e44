use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `eta_t = eta0`
    Constant,
    /// `eta_t = eta0 / (t + 1)`
    InverseT,
    /// `eta_t = eta0 T0 / (T0 + t)`
    T0Decay,
}

/// Step-size sequence indexed by the iteration counter `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub eta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

impl StepSchedule {
    pub fn constant(eta0: f64) -> Self {
        Self { kind: ScheduleKind::Constant, eta0, t0: None }
    }

    pub fn inverse_t(eta0: f64) -> Self {
        Self { kind: ScheduleKind::InverseT, eta0, t0: None }
    }

    pub fn t0_decay(eta0: f64, t0: f64) -> Self {
        Self { kind: ScheduleKind::T0Decay, eta0, t0: Some(t0) }
    }

    pub fn is_constant(&self) -> bool {
        self.kind == ScheduleKind::Constant
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return Err(Error::Config(format!("eta0 must be positive and finite, got {}", self.eta0)));
        }
        if self.kind == ScheduleKind::T0Decay {
            match self.t0 {
                Some(t0) if t0 > 0.0 && t0.is_finite() => {}
                other => return Err(Error::Config(format!("t0_decay needs T0 > 0, got {other:?}"))),
            }
        }
        Ok(())
    }

    pub fn step_size(&self, t: u64) -> f64 {
        let t = t as f64;
        match self.kind {
            ScheduleKind::Constant => self.eta0,
            ScheduleKind::InverseT => self.eta0 / (t + 1.0),
            ScheduleKind::T0Decay => {
                let t0 = self.t0.expect("validated t0_decay schedule");
                self.eta0 * t0 / (t0 + t)
            }
        }
    }
}
