//! Empirical prediction-error probability surface over (horizon, JND
//! threshold), stored as a monotone table with bilinear interpolation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{predict, PredictorModel, TrajectoryDataset, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::parallel;

/// Out-of-grid query handling for [`TradeoffTable::lookup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LookupMode {
    /// Clamp to the nearest grid edge; a warning is logged once per query.
    Clamp,
    /// Out-of-grid queries are errors.
    Strict,
}

/// Prediction-error probability indexed by (horizon ms, JND threshold %).
///
/// Invariants: grids strictly increasing; probabilities in [0,1],
/// non-decreasing along horizons and non-increasing along deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffTable {
    pub horizons_ms: Vec<f64>,
    pub deltas_pct: Vec<f64>,
    /// eps[i][j] for horizon i, delta j.
    pub eps: Vec<Vec<f64>>,
    /// Denominator (evaluation window count) behind each cell.
    pub sample_counts: Vec<Vec<u64>>,
    /// Cells reported at the 1/(10n) floor instead of an exact zero.
    pub floored: Vec<Vec<bool>>,
}

impl TradeoffTable {
    /// Build a table from a closure; the result must satisfy the
    /// monotonicity invariants.
    pub fn from_fn(
        horizons_ms: Vec<f64>,
        deltas_pct: Vec<f64>,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        let eps: Vec<Vec<f64>> = horizons_ms
            .iter()
            .map(|&h| deltas_pct.iter().map(|&d| f(h, d)).collect())
            .collect();
        let counts = vec![vec![0u64; deltas_pct.len()]; horizons_ms.len()];
        let floored = vec![vec![false; deltas_pct.len()]; horizons_ms.len()];
        let table = Self {
            horizons_ms,
            deltas_pct,
            eps,
            sample_counts: counts,
            floored,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.horizons_ms.len(), self.deltas_pct.len());
        if h == 0 || d == 0 {
            return Err(Error::Domain("table grids must be non-empty".into()));
        }
        if !strictly_increasing(&self.horizons_ms) || !strictly_increasing(&self.deltas_pct) {
            return Err(Error::Domain("table grids must be strictly increasing".into()));
        }
        if self.deltas_pct[0] <= 0.0 || self.horizons_ms[0] <= 0.0 {
            return Err(Error::Domain("table grids must be positive".into()));
        }
        if self.eps.len() != h || self.eps.iter().any(|row| row.len() != d) {
            return Err(Error::Domain("table matrix shape mismatch".into()));
        }
        for row in &self.eps {
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("probability {p} outside [0,1]")));
                }
            }
        }
        self.check_monotone()
    }

    fn check_monotone(&self) -> Result<()> {
        for j in 0..self.deltas_pct.len() {
            for i in 1..self.horizons_ms.len() {
                if self.eps[i][j] < self.eps[i - 1][j] {
                    return Err(Error::Domain(format!(
                        "eps not non-decreasing along horizons at ({i},{j})"
                    )));
                }
            }
        }
        for row in &self.eps {
            for j in 1..row.len() {
                if row[j] > row[j - 1] {
                    return Err(Error::Domain(format!(
                        "eps not non-increasing along deltas at column {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bilinear interpolation in (horizon, log10 delta). Out-of-grid queries
    /// clamp to the nearest edge or error, per `mode`.
    pub fn lookup(&self, horizon_ms: f64, delta_pct: f64, mode: LookupMode) -> Result<f64> {
        if delta_pct <= 0.0 || !horizon_ms.is_finite() {
            return Err(Error::Domain(format!(
                "lookup needs positive delta and finite horizon, got ({horizon_ms}, {delta_pct})"
            )));
        }
        let out_h = horizon_ms < self.horizons_ms[0]
            || horizon_ms > *self.horizons_ms.last().unwrap();
        let out_d =
            delta_pct < self.deltas_pct[0] || delta_pct > *self.deltas_pct.last().unwrap();
        if out_h || out_d {
            match mode {
                LookupMode::Strict => {
                    return Err(Error::TableCoverage {
                        horizon_ms,
                        delta_pct,
                    })
                }
                LookupMode::Clamp => {
                    log::warn!(
                        "tradeoff lookup ({horizon_ms} ms, {delta_pct}%) outside grid; clamping"
                    );
                }
            }
        }
        let h = horizon_ms.clamp(self.horizons_ms[0], *self.horizons_ms.last().unwrap());
        let d = delta_pct.clamp(self.deltas_pct[0], *self.deltas_pct.last().unwrap());
        let (i0, i1, th) = bracket(&self.horizons_ms, h, |x| x);
        let (j0, j1, td) = bracket(&self.deltas_pct, d, |x| x.log10());
        let e00 = self.eps[i0][j0];
        let e01 = self.eps[i0][j1];
        let e10 = self.eps[i1][j0];
        let e11 = self.eps[i1][j1];
        Ok((1.0 - th) * ((1.0 - td) * e00 + td * e01) + th * ((1.0 - td) * e10 + td * e11))
    }

    /// Write the table as CSV: header `horizon_ms,delta_pct,eps_p,n`, rows in
    /// row-major order (horizon outer, delta inner), probabilities with 17
    /// significant digits so the round trip is lossless.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon_ms,delta_pct,eps_p,n\n");
        for (i, &h) in self.horizons_ms.iter().enumerate() {
            for (j, &d) in self.deltas_pct.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{:.16e},{}\n",
                    h, d, self.eps[i][j], self.sample_counts[i][j]
                ));
            }
        }
        out
    }

    /// Load a table, accepting leading `#` comment lines. Structural problems
    /// are reported with line/column positions; monotonicity violations only
    /// warn unless [`TradeoffTable::load_strict`] is used.
    pub fn load(path: &Path) -> Result<Self> {
        let table = Self::parse(path, &std::fs::read_to_string(path)?)?;
        if let Err(e) = table.check_monotone() {
            log::warn!("loaded table violates monotonicity: {e}");
        }
        Ok(table)
    }

    /// Like [`TradeoffTable::load`] but rejects non-monotone tables.
    pub fn load_strict(path: &Path) -> Result<Self> {
        let table = Self::parse(path, &std::fs::read_to_string(path)?)?;
        table.check_monotone().map_err(|e| Error::TableInvariant {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(table)
    }

    fn parse(path: &Path, text: &str) -> Result<Self> {
        let path_str = path.display().to_string();
        let fail = |line: usize, column: usize, message: String| Error::TableFormat {
            path: path_str.clone(),
            line,
            column,
            message,
        };
        let mut rows: Vec<(f64, f64, f64, u64)> = Vec::new();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "horizon_ms,delta_pct,eps_p,n" {
                    return Err(fail(
                        line_no,
                        1,
                        format!("expected header 'horizon_ms,delta_pct,eps_p,n', got '{line}'"),
                    ));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(fail(
                    line_no,
                    fields.len().min(4),
                    format!("expected 4 comma-separated fields, got {}", fields.len()),
                ));
            }
            let parse_f = |col: usize, what: &str| -> Result<f64> {
                fields[col]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| fail(line_no, col + 1, format!("invalid {what}: '{}'", fields[col])))
            };
            let h = parse_f(0, "horizon_ms")?;
            let d = parse_f(1, "delta_pct")?;
            let p = parse_f(2, "eps_p")?;
            let n = fields[3]
                .trim()
                .parse::<u64>()
                .map_err(|_| fail(line_no, 4, format!("invalid count: '{}'", fields[3])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(fail(line_no, 3, format!("probability {p} outside [0,1]")));
            }
            rows.push((h, d, p, n));
        }
        if !header_seen {
            return Err(fail(1, 1, "missing header line".into()));
        }
        if rows.is_empty() {
            return Err(fail(2, 1, "no data rows".into()));
        }

        // Reconstruct the grids from the row-major layout.
        let mut deltas = Vec::new();
        for (_, d, _, _) in &rows {
            if deltas.contains(d) {
                break;
            }
            deltas.push(*d);
        }
        let d_len = deltas.len();
        if !rows.len().is_multiple_of(d_len) {
            return Err(fail(
                rows.len() + 1,
                1,
                format!("row count {} is not a multiple of the delta grid ({d_len})", rows.len()),
            ));
        }
        let h_len = rows.len() / d_len;
        let mut horizons = Vec::with_capacity(h_len);
        let mut eps = vec![vec![0.0; d_len]; h_len];
        let mut counts = vec![vec![0u64; d_len]; h_len];
        for (k, &(h, d, p, n)) in rows.iter().enumerate() {
            let (i, j) = (k / d_len, k % d_len);
            let line_no = k + 2;
            if j == 0 {
                horizons.push(h);
            } else if horizons[i] != h {
                return Err(fail(
                    line_no,
                    1,
                    format!("horizon {h} breaks row-major order (expected {})", horizons[i]),
                ));
            }
            if d != deltas[j] {
                return Err(fail(
                    line_no,
                    2,
                    format!("delta {d} breaks row-major order (expected {})", deltas[j]),
                ));
            }
            eps[i][j] = p;
            counts[i][j] = n;
        }
        if !strictly_increasing(&horizons) {
            return Err(fail(2, 1, "horizon grid must be strictly increasing".into()));
        }
        if !strictly_increasing(&deltas) {
            return Err(fail(2, 2, "delta grid must be strictly increasing".into()));
        }
        let floored = vec![vec![false; d_len]; h_len];
        Ok(Self {
            horizons_ms: horizons,
            deltas_pct: deltas,
            eps,
            sample_counts: counts,
            floored,
        })
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

/// Bracketing indices and interpolation weight for `x` inside `grid`, with a
/// coordinate transform applied to both.
fn bracket(grid: &[f64], x: f64, transform: impl Fn(f64) -> f64) -> (usize, usize, f64) {
    if grid.len() == 1 {
        return (0, 0, 0.0);
    }
    let mut i1 = grid.partition_point(|&g| g < x).min(grid.len() - 1).max(1);
    if x <= grid[i1 - 1] {
        i1 = (i1 - 1).max(1);
    }
    let i0 = i1 - 1;
    let (a, b, t) = (transform(grid[i0]), transform(grid[i1]), transform(x));
    let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
    (i0, i1, w)
}

/// Pool-adjacent-violators projection onto non-decreasing sequences.
fn pava_non_decreasing(values: &mut [f64]) {
    let n = values.len();
    let mut level: Vec<f64> = Vec::with_capacity(n);
    let mut weight: Vec<f64> = Vec::with_capacity(n);
    for &v in values.iter() {
        level.push(v);
        weight.push(1.0);
        while level.len() > 1 && level[level.len() - 2] > level[level.len() - 1] {
            let (l1, w1) = (level.pop().unwrap(), weight.pop().unwrap());
            let (l0, w0) = (level.pop().unwrap(), weight.pop().unwrap());
            level.push((l0 * w0 + l1 * w1) / (w0 + w1));
            weight.push(w0 + w1);
        }
    }
    let mut k = 0;
    for (lv, w) in level.into_iter().zip(weight) {
        for _ in 0..w as usize {
            values[k] = lv;
            k += 1;
        }
    }
}

/// Raw exceedance counts per (horizon, delta) cell plus the common window
/// count, before any floor or projection.
pub fn estimate_exceedance_counts(
    model: &PredictorModel,
    data: &TrajectoryDataset,
    horizons_ms: &[f64],
    deltas_pct: &[f64],
    stride: usize,
) -> Result<(Vec<Vec<u64>>, u64)> {
    counts_impl(model, data, horizons_ms, deltas_pct, stride, false)
}

fn counts_impl(
    model: &PredictorModel,
    data: &TrajectoryDataset,
    horizons_ms: &[f64],
    deltas_pct: &[f64],
    stride: usize,
    sequential: bool,
) -> Result<(Vec<Vec<u64>>, u64)> {
    if stride == 0 {
        return Err(Error::Domain("stride must be >= 1".into()));
    }
    if horizons_ms.is_empty() || deltas_pct.is_empty() {
        return Err(Error::Domain("horizon and delta grids must be non-empty".into()));
    }
    if !strictly_increasing(horizons_ms) || !strictly_increasing(deltas_pct) {
        return Err(Error::Domain("grids must be strictly increasing".into()));
    }
    if deltas_pct[0] <= 0.0 {
        return Err(Error::Domain("deltas must be positive".into()));
    }
    let slots_per_ms = SAMPLE_RATE_HZ / 1000.0;
    let horizon_slots: Vec<usize> = horizons_ms
        .iter()
        .map(|&h| {
            let slot = (h * slots_per_ms).round() as usize;
            if slot == 0 || slot > model.horizon_len {
                Err(Error::Domain(format!(
                    "horizon {h} ms maps to slot {slot}, outside 1..={}",
                    model.horizon_len
                )))
            } else {
                Ok(slot)
            }
        })
        .collect::<Result<_>>()?;
    let window = model.history_len + model.horizon_len;
    let thresholds: Vec<f64> = deltas_pct
        .iter()
        .map(|&d| d * data.range_norm / 100.0)
        .collect();

    let per_sequence = |s: usize| -> (Vec<Vec<u64>>, u64) {
        let q = &data.sequences[s].positions;
        let mut counts = vec![vec![0u64; deltas_pct.len()]; horizons_ms.len()];
        let mut windows = 0u64;
        if q.len() < window {
            return (counts, windows);
        }
        let mut start = 0;
        while start + window <= q.len() {
            let rollout = predict(model, &q[start..start + model.history_len])
                .expect("window length matches the model");
            for (i, &slot) in horizon_slots.iter().enumerate() {
                let idx = start + model.history_len + slot - 1;
                let err = (rollout[slot - 1] - q[idx]).abs();
                for (j, &thr) in thresholds.iter().enumerate() {
                    if err > thr {
                        counts[i][j] += 1;
                    }
                }
            }
            windows += 1;
            start += stride;
        }
        (counts, windows)
    };

    let partials = if sequential {
        parallel::map_indexed_seq(data.sequences.len(), per_sequence)
    } else {
        parallel::map_indexed(data.sequences.len(), per_sequence)
    };
    let mut counts = vec![vec![0u64; deltas_pct.len()]; horizons_ms.len()];
    let mut windows = 0u64;
    for (c, w) in partials {
        windows += w;
        for (row, crow) in counts.iter_mut().zip(&c) {
            for (cell, &v) in row.iter_mut().zip(crow) {
                *cell += v;
            }
        }
    }
    Ok((counts, windows))
}

fn table_from_counts(
    counts: Vec<Vec<u64>>,
    windows: u64,
    horizons_ms: &[f64],
    deltas_pct: &[f64],
) -> Result<TradeoffTable> {
    if windows < 100 {
        return Err(Error::InsufficientWindows {
            rows: horizons_ms.len(),
            cols: deltas_pct.len(),
            needed: 100,
            got: windows as usize,
        });
    }
    let floor = 1.0 / (10.0 * windows as f64);
    let mut eps: Vec<Vec<f64>> = Vec::with_capacity(horizons_ms.len());
    let mut floored = Vec::with_capacity(horizons_ms.len());
    for row in &counts {
        let mut erow = Vec::with_capacity(deltas_pct.len());
        let mut frow = Vec::with_capacity(deltas_pct.len());
        for &c in row {
            let p = c as f64 / windows as f64;
            if p < floor {
                erow.push(floor);
                frow.push(true);
            } else {
                erow.push(p);
                frow.push(false);
            }
        }
        eps.push(erow);
        floored.push(frow);
    }

    // The raw fractions are exactly non-increasing along deltas (the
    // exceedance events are nested), so projecting each delta column onto
    // non-decreasing-in-horizon keeps both invariants: isotonic regression
    // preserves the pointwise order between columns.
    for j in 0..deltas_pct.len() {
        let mut col: Vec<f64> = eps.iter().map(|row| row[j]).collect();
        pava_non_decreasing(&mut col);
        for (i, v) in col.into_iter().enumerate() {
            eps[i][j] = v;
        }
    }

    let table = TradeoffTable {
        horizons_ms: horizons_ms.to_vec(),
        deltas_pct: deltas_pct.to_vec(),
        eps,
        sample_counts: vec![vec![windows; deltas_pct.len()]; horizons_ms.len()],
        floored,
    };
    table.validate()?;
    Ok(table)
}

/// Estimate the error-probability surface on held-out data: count JND
/// exceedances per cell, apply the 1/(10n) floor to empty cells, then project
/// onto the monotone cone. The caller is responsible for passing data
/// disjoint from the sequences the model was fitted on.
pub fn estimate_error_prob(
    model: &PredictorModel,
    data: &TrajectoryDataset,
    horizons_ms: &[f64],
    deltas_pct: &[f64],
    stride: usize,
) -> Result<TradeoffTable> {
    let (counts, windows) = counts_impl(model, data, horizons_ms, deltas_pct, stride, false)?;
    table_from_counts(counts, windows, horizons_ms, deltas_pct)
}

/// Sequential variant of [`estimate_error_prob`]; same output.
pub fn estimate_error_prob_seq(
    model: &PredictorModel,
    data: &TrajectoryDataset,
    horizons_ms: &[f64],
    deltas_pct: &[f64],
    stride: usize,
) -> Result<TradeoffTable> {
    let (counts, windows) = counts_impl(model, data, horizons_ms, deltas_pct, stride, true)?;
    table_from_counts(counts, windows, horizons_ms, deltas_pct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::{fit_predictor, generate_trajectories, TrajectoryProcess};

    fn fitted_setup() -> (PredictorModel, TrajectoryDataset) {
        let data = generate_trajectories(24, 2200, 91, TrajectoryProcess::default_ou()).unwrap();
        let (train, eval) = data.split(0.5).unwrap();
        let (model, _) = fit_predictor(&train, 500, 100, 4).unwrap();
        (model, eval)
    }

    /// Brute-force oracle: naive per-window loops, no shared counting code.
    fn brute_force_counts(
        model: &PredictorModel,
        data: &TrajectoryDataset,
        horizons_ms: &[f64],
        deltas_pct: &[f64],
        stride: usize,
    ) -> (Vec<Vec<u64>>, u64) {
        let mut counts = vec![vec![0u64; deltas_pct.len()]; horizons_ms.len()];
        let mut windows = 0u64;
        for seq in &data.sequences {
            let q = &seq.positions;
            let window = model.history_len + model.horizon_len;
            let mut start = 0;
            while start + window <= q.len() {
                let out = predict(model, &q[start..start + model.history_len]).unwrap();
                for (i, &h) in horizons_ms.iter().enumerate() {
                    let slot = h.round() as usize;
                    let truth = q[start + model.history_len + slot - 1];
                    let err = (out[slot - 1] - truth).abs();
                    for (j, &d) in deltas_pct.iter().enumerate() {
                        if err > d * data.range_norm / 100.0 {
                            counts[i][j] += 1;
                        }
                    }
                }
                windows += 1;
                start += stride;
            }
        }
        (counts, windows)
    }

    #[test]
    fn counts_match_brute_force_exactly() {
        let (model, eval) = fitted_setup();
        let horizons = [1.0, 5.0, 20.0, 50.0, 100.0];
        let deltas = [0.1, 0.5, 1.0, 3.0];
        let (got, n_got) =
            estimate_exceedance_counts(&model, &eval, &horizons, &deltas, 3).unwrap();
        let (want, n_want) = brute_force_counts(&model, &eval, &horizons, &deltas, 3);
        assert_eq!(n_got, n_want);
        assert_eq!(got, want);
        // Sequential path produces the same counts.
        let table_par = estimate_error_prob(&model, &eval, &horizons, &deltas, 3).unwrap();
        let table_seq = estimate_error_prob_seq(&model, &eval, &horizons, &deltas, 3).unwrap();
        assert_eq!(table_par, table_seq);
    }

    #[test]
    fn projected_table_is_monotone_both_axes() {
        let (model, eval) = fitted_setup();
        let table = estimate_error_prob(
            &model,
            &eval,
            &[1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 70.0, 100.0],
            &[0.05, 0.1, 0.5, 1.0, 2.0],
            3,
        )
        .unwrap();
        table.validate().unwrap();
    }

    #[test]
    fn projection_moves_no_cell_beyond_largest_adjacent_violation() {
        let (model, eval) = fitted_setup();
        let horizons = [1.0, 3.0, 6.0, 10.0, 15.0, 25.0, 40.0, 60.0, 100.0];
        let deltas = [0.1, 1.0];
        let (counts, n) =
            estimate_exceedance_counts(&model, &eval, &horizons, &deltas, 3).unwrap();
        let floor = 1.0 / (10.0 * n as f64);
        let raw: Vec<Vec<f64>> = counts
            .iter()
            .map(|row| row.iter().map(|&c| (c as f64 / n as f64).max(floor)).collect())
            .collect();
        let table = estimate_error_prob(&model, &eval, &horizons, &deltas, 3).unwrap();
        let mut max_violation: f64 = 0.0;
        for j in 0..deltas.len() {
            for pair in raw.windows(2) {
                max_violation = max_violation.max(pair[0][j] - pair[1][j]);
            }
        }
        for (trow, rrow) in table.eps.iter().zip(&raw) {
            for (t, r) in trow.iter().zip(rrow) {
                let moved = (t - r).abs();
                assert!(
                    moved <= max_violation + 1e-15,
                    "cell moved {moved} > max adjacent violation {max_violation}"
                );
            }
        }
    }

    #[test]
    fn threshold_extremes() {
        let (model, eval) = fitted_setup();
        // A delta far above every observed error gives a floored cell; a tiny
        // delta gives probability ~1.
        let table =
            estimate_error_prob(&model, &eval, &[10.0, 50.0], &[1e-9, 1e4], 5).unwrap();
        let n = table.sample_counts[0][0] as f64;
        assert_eq!(table.eps[0][1], 1.0 / (10.0 * n));
        assert!(table.floored[0][1]);
        assert!(table.eps[0][0] > 0.99);
    }

    #[test]
    fn estimator_concentrates_with_more_data() {
        // Binomial concentration needs near-independent samples, so this
        // uses non-overlapping windows (stride = window length).
        let big = generate_trajectories(100, 18_000, 17, TrajectoryProcess::default_ou()).unwrap();
        let (train, eval_all) = big.split(0.2).unwrap();
        let (model, _) = fit_predictor(&train, 500, 100, 4).unwrap();
        let half = TrajectoryDataset {
            sequences: eval_all.sequences[..eval_all.sequences.len() / 2].to_vec(),
            ..eval_all.clone()
        };
        let horizons = [20.0, 60.0, 100.0];
        let deltas = [0.2, 1.0];
        let stride = 600;
        let (c1, n1) =
            estimate_exceedance_counts(&model, &half, &horizons, &deltas, stride).unwrap();
        let (c2, n2) =
            estimate_exceedance_counts(&model, &eval_all, &horizons, &deltas, stride).unwrap();
        assert!(n1 >= 1000, "n1 = {n1}");
        for i in 0..horizons.len() {
            for j in 0..deltas.len() {
                let p1 = c1[i][j] as f64 / n1 as f64;
                let p2 = c2[i][j] as f64 / n2 as f64;
                let p = p2.clamp(1e-6, 1.0 - 1e-6);
                assert!(
                    (p1 - p2).abs() < 3.0 * (p * (1.0 - p) / n1 as f64).sqrt() + 1e-12,
                    "cell ({i},{j}): {p1} vs {p2} with n={n1}"
                );
            }
        }
    }

    #[test]
    fn insufficient_windows_is_reported() {
        let (model, eval) = fitted_setup();
        let tiny = TrajectoryDataset {
            sequences: vec![eval.sequences[0].clone()],
            ..eval.clone()
        };
        match estimate_error_prob(&model, &tiny, &[10.0], &[1.0], 1600) {
            Err(Error::InsufficientWindows { got, needed, .. }) => {
                assert!(got < needed);
            }
            other => panic!("expected InsufficientWindows, got {other:?}"),
        }
    }

    #[test]
    fn lookup_grid_nodes_and_midpoints() {
        let table = TradeoffTable::from_fn(
            vec![10.0, 20.0, 40.0],
            vec![0.1, 1.0],
            |h, d| (h / 40.0) * (0.1 / d).min(1.0),
        )
        .unwrap();
        // Exact node.
        let v = table.lookup(20.0, 0.1, LookupMode::Strict).unwrap();
        assert_eq!(v, table.eps[1][0]);
        // Midway between two horizons at a grid delta: arithmetic mean.
        let v = table.lookup(15.0, 1.0, LookupMode::Strict).unwrap();
        assert!((v - 0.5 * (table.eps[0][1] + table.eps[1][1])).abs() < 1e-15);
        // Random in-grid query sits inside the bounding cells.
        let v = table.lookup(27.3, 0.37, LookupMode::Strict).unwrap();
        let cells = [
            table.eps[1][0],
            table.eps[1][1],
            table.eps[2][0],
            table.eps[2][1],
        ];
        let lo = cells.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
    }

    #[test]
    fn lookup_clamps_or_errors_out_of_grid() {
        let table =
            TradeoffTable::from_fn(vec![10.0, 20.0], vec![0.1, 1.0], |h, _| h / 100.0).unwrap();
        assert!(matches!(
            table.lookup(5.0, 0.5, LookupMode::Strict),
            Err(Error::TableCoverage { .. })
        ));
        let v = table.lookup(5.0, 0.5, LookupMode::Clamp).unwrap();
        let v_edge = table.lookup(10.0, 0.5, LookupMode::Strict).unwrap();
        assert_eq!(v, v_edge);
    }

    #[test]
    fn save_load_round_trip_is_lossless() {
        let (model, eval) = fitted_setup();
        let table =
            estimate_error_prob(&model, &eval, &[5.0, 25.0, 80.0], &[0.1, 1.0], 4).unwrap();
        let dir = std::env::temp_dir().join("predlink_table_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.csv");
        table.save(&path).unwrap();
        let loaded = TradeoffTable::load(&path).unwrap();
        assert_eq!(table.horizons_ms, loaded.horizons_ms);
        assert_eq!(table.deltas_pct, loaded.deltas_pct);
        assert_eq!(table.eps, loaded.eps);
        assert_eq!(table.sample_counts, loaded.sample_counts);
    }

    #[test]
    fn fixture_2x2_loads_to_expected_matrix() {
        let dir = std::env::temp_dir().join("predlink_table_fixture");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("small.csv");
        std::fs::write(
            &path,
            "horizon_ms,delta_pct,eps_p,n\n\
             10,0.1,0.25,400\n\
             10,1,0.125,400\n\
             50,0.1,0.5,400\n\
             50,1,0.25,400\n",
        )
        .unwrap();
        let t = TradeoffTable::load(&path).unwrap();
        assert_eq!(t.horizons_ms, vec![10.0, 50.0]);
        assert_eq!(t.deltas_pct, vec![0.1, 1.0]);
        assert_eq!(t.eps, vec![vec![0.25, 0.125], vec![0.5, 0.25]]);
        assert_eq!(t.sample_counts, vec![vec![400, 400], vec![400, 400]]);
    }

    #[test]
    fn strict_load_rejects_non_monotone() {
        let dir = std::env::temp_dir().join("predlink_table_nonmono");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(
            &path,
            "horizon_ms,delta_pct,eps_p,n\n\
             10,0.1,0.5,100\n\
             10,1,0.2,100\n\
             50,0.1,0.1,100\n\
             50,1,0.05,100\n",
        )
        .unwrap();
        assert!(TradeoffTable::load(&path).is_ok());
        assert!(matches!(
            TradeoffTable::load_strict(&path),
            Err(Error::TableInvariant { .. })
        ));
    }

    #[test]
    fn malformed_files_report_line_and_column() {
        let dir = std::env::temp_dir().join("predlink_table_malformed");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "horizon_ms,delta_pct,eps_p,n\n10,0.1,notanumber,5\n").unwrap();
        match TradeoffTable::load(&path) {
            Err(Error::TableFormat { line, column, .. }) => {
                assert_eq!((line, column), (2, 3));
            }
            other => panic!("expected TableFormat, got {other:?}"),
        }
        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(matches!(
            TradeoffTable::load(&path),
            Err(Error::TableFormat { line: 1, .. })
        ));
    }

    #[test]
    fn pava_pools_local_dips() {
        let mut xs = vec![0.1, 0.3, 0.2, 0.4];
        pava_non_decreasing(&mut xs);
        assert_eq!(xs, vec![0.1, 0.25, 0.25, 0.4]);
        let mut ys = vec![1.0, 2.0, 3.0];
        pava_non_decreasing(&mut ys);
        assert_eq!(ys, vec![1.0, 2.0, 3.0]);
    }
}
