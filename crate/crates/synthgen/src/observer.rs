use gazefusion_core::N_TASKS;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest rating offset an observer may carry.
pub const MAX_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObserver {
    pub participant_id: String,
    /// Additive offset per dimension, on the 1..7 scale.
    pub rating_bias: [f64; N_TASKS],
    pub gaze_noise_px: f64,
    pub pupil_gain: f64,
    /// Standard deviation of per-rating noise.
    pub rating_noise: f64,
    /// Innovation standard deviation of the AR(1) pupil noise, in mm.
    pub pupil_noise_mm: f64,
    pub blink_rate_hz: f64,
}

impl SimObserver {
    /// An observer without any randomness in gaze, pupil or ratings.
    pub fn noiseless(participant_id: impl Into<String>) -> Self {
        SimObserver {
            participant_id: participant_id.into(),
            rating_bias: [0.0; N_TASKS],
            gaze_noise_px: 0.0,
            pupil_gain: 1.0,
            rating_noise: 0.0,
            pupil_noise_mm: 0.0,
            blink_rate_hz: 0.0,
        }
    }

    pub fn sample<R: Rng>(participant_id: impl Into<String>, rng: &mut R) -> Self {
        SimObserver {
            participant_id: participant_id.into(),
            rating_bias: std::array::from_fn(|_| rng.random_range(-MAX_BIAS..MAX_BIAS)),
            gaze_noise_px: rng.random_range(8.0..24.0),
            pupil_gain: rng.random_range(0.7..1.3),
            rating_noise: 0.3,
            pupil_noise_mm: 0.008,
            blink_rate_hz: rng.random_range(0.05..0.25),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rating_bias.iter().any(|b| !(b.abs() <= MAX_BIAS)) {
            return Err(Error::Invalid(format!("rating bias of {} outside +-{MAX_BIAS}", self.participant_id)));
        }
        let nonneg = [self.gaze_noise_px, self.pupil_gain, self.rating_noise, self.pupil_noise_mm, self.blink_rate_hz];
        if nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Invalid(format!("observer {} has a negative noise or gain", self.participant_id)));
        }
        Ok(())
    }
}

/// Per-trial observer state. Neither value is visible in the video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialLatents {
    /// In [0, 1]. Sets the rate of phasic pupil dilations.
    pub interest: f64,
    /// In [0, 1]. Shortens fixations and adds off-object fixations.
    pub exploration: f64,
}

impl TrialLatents {
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        TrialLatents { interest: rng.random(), exploration: rng.random() }
    }
}
