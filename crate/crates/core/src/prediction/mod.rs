//! Desk-scale prediction pipeline: synthetic teleoperation trajectories, a
//! least-squares autoregressive multi-step predictor, and the empirical
//! (horizon, JND threshold) -> error-probability surface served as a monotone
//! interpolated table.

mod ar;
mod generate;
mod tradeoff;

pub use ar::{fit_predictor, predict, rrmse, FitReport, PredictorModel};
pub use generate::{generate_trajectories, generate_trajectories_seq, TrajectoryProcess};
pub use tradeoff::{
    estimate_error_prob, estimate_error_prob_seq, estimate_exceedance_counts, LookupMode,
    TradeoffTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rate of every trajectory, observations per second.
pub const SAMPLE_RATE_HZ: f64 = 1000.0;

/// One recorded sequence: position and velocity per 1 kHz slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

/// A set of generated trajectories plus the normalization used to express
/// prediction errors in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub sequences: Vec<Sequence>,
    pub sample_rate_hz: f64,
    /// Position range over the whole dataset; JND thresholds in percent are
    /// relative to this.
    pub range_norm: f64,
    pub seed: u64,
}

impl TrajectoryDataset {
    /// Split by sequence: the first `ceil(frac * n)` sequences go to the
    /// first dataset, the rest to the second. Both keep the full-dataset
    /// range normalization so error thresholds stay comparable.
    pub fn split(&self, frac: f64) -> Result<(TrajectoryDataset, TrajectoryDataset)> {
        if !(0.0 < frac && frac < 1.0) {
            return Err(Error::Domain("split fraction must be in (0,1)".into()));
        }
        let n = self.sequences.len();
        let k = ((frac * n as f64).ceil() as usize).clamp(1, n.saturating_sub(1).max(1));
        let a = TrajectoryDataset {
            sequences: self.sequences[..k].to_vec(),
            ..self.clone_meta()
        };
        let b = TrajectoryDataset {
            sequences: self.sequences[k..].to_vec(),
            ..self.clone_meta()
        };
        Ok((a, b))
    }

    fn clone_meta(&self) -> TrajectoryDataset {
        TrajectoryDataset {
            sequences: Vec::new(),
            sample_rate_hz: self.sample_rate_hz,
            range_norm: self.range_norm,
            seed: self.seed,
        }
    }
}
