//! Seeded stochastic trajectory generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Sequence, TrajectoryDataset, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::parallel;

/// Generating process for synthetic trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryProcess {
    /// Mean-reverting velocity integrated to position.
    Ou {
        /// Velocity reversion rate, 1/s.
        reversion_rate: f64,
        /// Velocity noise scale, units/s per sqrt(s).
        noise_std: f64,
        /// Standard deviation of the initial velocity, units/s.
        init_vel_std: f64,
        /// Starting position (a joint work point, keeps the position mean
        /// away from zero so relative errors are well defined).
        base_position: f64,
    },
    /// Sum of randomized-amplitude/phase sinusoids below 10 Hz.
    SinusoidMix {
        components: usize,
        max_freq_hz: f64,
        /// Constant offset added to every position.
        offset: f64,
    },
}

impl TrajectoryProcess {
    pub fn default_ou() -> Self {
        TrajectoryProcess::Ou {
            reversion_rate: 8.0,
            noise_std: 6.0,
            init_vel_std: 0.5,
            base_position: 10.0,
        }
    }

    pub fn default_sinusoid_mix() -> Self {
        TrajectoryProcess::SinusoidMix {
            components: 4,
            max_freq_hz: 6.0,
            offset: 5.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TrajectoryProcess::Ou {
                reversion_rate,
                noise_std,
                init_vel_std,
                ..
            } => {
                if reversion_rate < 0.0 || noise_std < 0.0 || init_vel_std < 0.0 {
                    return Err(Error::Domain("ou parameters must be non-negative".into()));
                }
            }
            TrajectoryProcess::SinusoidMix {
                components,
                max_freq_hz,
                ..
            } => {
                if components == 0 {
                    return Err(Error::Domain("sinusoid mix needs >= 1 component".into()));
                }
                if !(0.0 < max_freq_hz && max_freq_hz <= 10.0) {
                    return Err(Error::Domain(
                        "sinusoid mix frequencies must lie in (0, 10] Hz".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn sequence_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn generate_one(process: &TrajectoryProcess, length: usize, seed: u64, index: usize) -> Sequence {
    let mut rng = sequence_rng(seed, index);
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let mut positions = Vec::with_capacity(length);
    let mut velocities = Vec::with_capacity(length);
    match *process {
        TrajectoryProcess::Ou {
            reversion_rate,
            noise_std,
            init_vel_std,
            base_position,
        } => {
            let mut q = base_position;
            let mut v = init_vel_std * rng.sample::<f64, _>(StandardNormal);
            let sqrt_dt = dt.sqrt();
            for _ in 0..length {
                positions.push(q);
                velocities.push(v);
                q += v * dt;
                v += -reversion_rate * v * dt
                    + noise_std * sqrt_dt * rng.sample::<f64, _>(StandardNormal);
            }
        }
        TrajectoryProcess::SinusoidMix {
            components,
            max_freq_hz,
            offset,
        } => {
            let params: Vec<(f64, f64, f64)> = (0..components)
                .map(|_| {
                    let freq = rng.random_range(0.2..max_freq_hz.max(0.21));
                    let amp = rng.random_range(0.5..1.5);
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (amp, std::f64::consts::TAU * freq, phase)
                })
                .collect();
            for t in 0..length {
                let time = t as f64 * dt;
                let mut q = offset;
                let mut v = 0.0;
                for &(amp, omega, phase) in &params {
                    q += amp * (omega * time + phase).sin();
                    v += amp * omega * (omega * time + phase).cos();
                }
                positions.push(q);
                velocities.push(v);
            }
        }
    }
    Sequence {
        positions,
        velocities,
    }
}

fn assemble(sequences: Vec<Sequence>, seed: u64) -> TrajectoryDataset {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for seq in &sequences {
        for &q in &seq.positions {
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    let range = hi - lo;
    TrajectoryDataset {
        sequences,
        sample_rate_hz: SAMPLE_RATE_HZ,
        range_norm: if range > 0.0 { range } else { 1.0 },
        seed,
    }
}

fn check_args(count: usize, length: usize, process: &TrajectoryProcess) -> Result<()> {
    if count < 1 {
        return Err(Error::Domain("need at least one sequence".into()));
    }
    if length < 1000 {
        return Err(Error::Domain(format!(
            "sequence length must be >= 1000 slots, got {length}"
        )));
    }
    process.validate()
}

/// Generate `count` sequences of `length` slots. Deterministic for a fixed
/// (seed, parameters): each sequence draws from its own seed-derived stream,
/// so the output does not depend on thread scheduling.
pub fn generate_trajectories(
    count: usize,
    length: usize,
    seed: u64,
    process: TrajectoryProcess,
) -> Result<TrajectoryDataset> {
    check_args(count, length, &process)?;
    let sequences = parallel::map_indexed(count, |i| generate_one(&process, length, seed, i));
    Ok(assemble(sequences, seed))
}

/// Sequential variant of [`generate_trajectories`]; same output bytes.
pub fn generate_trajectories_seq(
    count: usize,
    length: usize,
    seed: u64,
    process: TrajectoryProcess,
) -> Result<TrajectoryDataset> {
    check_args(count, length, &process)?;
    let sequences = parallel::map_indexed_seq(count, |i| generate_one(&process, length, seed, i));
    Ok(assemble(sequences, seed))
}
