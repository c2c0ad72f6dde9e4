//! Least-squares autoregressive predictor with recursive multi-step rollout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TrajectoryDataset;
use crate::error::{Error, Result};

/// Autoregressive position predictor. One set of one-step coefficients is
/// applied recursively to produce the whole prediction window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    /// AR lag count.
    pub order: usize,
    /// coefficients[i] multiplies the sample at lag i+1.
    pub coefficients: Vec<f64>,
    /// History window length in slots.
    pub history_len: usize,
    /// Prediction window length in slots.
    pub horizon_len: usize,
}

/// Fit quality on the 80/20 by-sequence split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_rrmse_pct: f64,
    pub validation_rrmse_pct: f64,
}

/// Relative root mean squared error in percent:
/// sqrt(mean((predicted-truth)^2)) / |mean(truth)| * 100.
pub fn rrmse(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Domain(format!(
            "rrmse needs equal non-empty lengths, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    if mean == 0.0 {
        return Err(Error::ZeroMeanTruth);
    }
    let mse = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt() / mean.abs() * 100.0)
}

/// Recursive multi-step rollout from the last `order` samples of `history`.
pub fn predict(model: &PredictorModel, history: &[f64]) -> Result<Vec<f64>> {
    if history.len() != model.history_len {
        return Err(Error::WrongHistoryLen {
            expected: model.history_len,
            got: history.len(),
        });
    }
    let mut state: Vec<f64> = history[history.len() - model.order..].to_vec();
    let mut out = Vec::with_capacity(model.horizon_len);
    for _ in 0..model.horizon_len {
        let mut next = 0.0;
        for (i, &c) in model.coefficients.iter().enumerate() {
            next += c * state[state.len() - 1 - i];
        }
        out.push(next);
        state.remove(0);
        state.push(next);
    }
    Ok(out)
}

/// Fit the one-step AR coefficients by least squares over every training
/// position, then report multi-step RRMSE on the 80/20 by-sequence split.
pub fn fit_predictor(
    data: &TrajectoryDataset,
    history_len: usize,
    horizon_len: usize,
    order: usize,
) -> Result<(PredictorModel, FitReport)> {
    if order == 0 || horizon_len == 0 {
        return Err(Error::Domain("order and horizon_len must be >= 1".into()));
    }
    if order > history_len {
        return Err(Error::Domain(format!(
            "order {order} exceeds history_len {history_len}"
        )));
    }
    let window = history_len + horizon_len;
    if data
        .sequences
        .iter()
        .any(|s| s.positions.len() < window)
    {
        return Err(Error::Domain(format!(
            "every sequence must be at least history+horizon = {window} slots"
        )));
    }
    let n_seq = data.sequences.len();
    let n_train = ((0.8 * n_seq as f64).ceil() as usize).clamp(1, n_seq);
    let train = &data.sequences[..n_train];
    // With a single sequence the validation split degenerates to the
    // training data; callers that care pass more sequences.
    let val = if n_train < n_seq {
        &data.sequences[n_train..]
    } else {
        train
    };

    // Accumulate the normal equations over all one-step regressions.
    let mut ata = DMatrix::<f64>::zeros(order, order);
    let mut aty = DVector::<f64>::zeros(order);
    let mut rows = 0usize;
    for seq in train {
        let q = &seq.positions;
        for t in order..q.len() {
            for i in 0..order {
                let xi = q[t - 1 - i];
                aty[i] += xi * q[t];
                for j in i..order {
                    ata[(i, j)] += xi * q[t - 1 - j];
                }
            }
            rows += 1;
        }
    }
    if rows < order {
        return Err(Error::Domain("not enough samples to fit the AR model".into()));
    }
    for i in 0..order {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }

    // Reject genuinely degenerate systems, naming the worst lag. Smooth
    // slow trajectories give shifted-copy regressors with huge but finite
    // condition numbers; iterative refinement below still converges for
    // those, so only near-exact singularity is an error.
    let svd = ata.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-15 * smax || smax == 0.0 {
        let v_t = svd.v_t.as_ref().expect("svd computed with vectors");
        let null_row = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(order - 1);
        let lag = (0..order)
            .max_by(|&a, &b| {
                v_t[(null_row, a)]
                    .abs()
                    .partial_cmp(&v_t[(null_row, b)].abs())
                    .unwrap()
            })
            .unwrap_or(0)
            + 1;
        return Err(Error::RankDeficient { lag });
    }
    let mut coef = svd
        .solve(&aty, 0.0)
        .map_err(|e| Error::Domain(format!("normal equations solve failed: {e}")))?;

    // Iterative refinement against the raw rows. The normal equations square
    // the conditioning of shifted-signal regressors, which matters a lot for
    // near-unit-root data (affine trajectories): each pass recomputes the
    // one-step residuals with fused multiply-adds and re-solves for the
    // correction, recovering machine-level coefficients when the recurrence
    // is exact.
    for _ in 0..4 {
        let mut atr = DVector::<f64>::zeros(order);
        for seq in train {
            let q = &seq.positions;
            for t in order..q.len() {
                let mut r = q[t];
                for i in 0..order {
                    r = (-coef[i]).mul_add(q[t - 1 - i], r);
                }
                for i in 0..order {
                    atr[i] += q[t - 1 - i] * r;
                }
            }
        }
        let delta = svd
            .solve(&atr, 0.0)
            .map_err(|e| Error::Domain(format!("refinement solve failed: {e}")))?;
        let dn = delta.norm();
        coef += delta;
        if dn <= 1e-16 * coef.norm() {
            break;
        }
    }
    let coefficients: Vec<f64> = coef.iter().copied().collect();

    let model = PredictorModel {
        order,
        coefficients,
        history_len,
        horizon_len,
    };

    let score = |seqs: &[super::Sequence]| -> Result<f64> {
        let mut predicted = Vec::new();
        let mut truth = Vec::new();
        for seq in seqs {
            let q = &seq.positions;
            let mut start = 0;
            while start + window <= q.len() {
                let rollout = predict(&model, &q[start..start + history_len])?;
                predicted.extend_from_slice(&rollout);
                truth.extend_from_slice(&q[start + history_len..start + window]);
                start += horizon_len;
            }
        }
        rrmse(&predicted, &truth)
    };
    let report = FitReport {
        train_rrmse_pct: score(train)?,
        validation_rrmse_pct: score(val)?,
    };
    Ok((model, report))
}
