//! Two-dimensional binary search for the single-user (bandwidth, bits)
//! optimum and the multi-user allocation built on top of it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::comm::LinkParams;
use crate::error::{Error, Result};
use crate::parallel;
use crate::prediction::{LookupMode, TradeoffTable};
use crate::reliability::{overall_error_bound, Criticality, ErrorBreakdown, TaskSpec};

/// Stopping rule for the outer bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ToleranceRule {
    /// Stop when |eps - eps_max| <= (eps_max)^2: the tolerance scales with
    /// the square of the target, so tighter targets are met proportionally
    /// tighter.
    TargetSquared,
    /// Stop when |eps - eps_max| <= the given absolute tolerance.
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Bandwidth search interval, kHz.
    pub w_range_khz: (f64, f64),
    /// Bits-per-TTI search interval (inclusive).
    pub b_range_bits: (u64, u64),
    pub tolerance_rule: ToleranceRule,
    pub max_iters: usize,
    /// Spacing of the integer bits grid.
    pub b_grid_step: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            w_range_khz: (5.0, 400.0),
            b_range_bits: (1, 2000),
            tolerance_rule: ToleranceRule::TargetSquared,
            max_iters: 64,
            b_grid_step: 1,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        let (w0, wmax) = self.w_range_khz;
        if !(w0 > 0.0 && wmax >= w0) {
            return Err(Error::EmptyGrid(format!(
                "bandwidth range [{w0}, {wmax}] kHz is empty"
            )));
        }
        let (b0, bmax) = self.b_range_bits;
        if b0 == 0 || bmax < b0 {
            return Err(Error::EmptyGrid(format!(
                "bits range [{b0}, {bmax}] is empty"
            )));
        }
        if self.b_grid_step == 0 {
            return Err(Error::EmptyGrid("bits grid step must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::EmptyGrid("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// One (bandwidth, bits, bound) probe of the outer search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub w_khz: f64,
    pub bits: u64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub bandwidth_khz: f64,
    pub bits: u64,
    pub breakdown: ErrorBreakdown,
    pub feasible: bool,
    pub iterations: usize,
    pub trace: Vec<ProbeRecord>,
}

/// Minimize a unimodal function over the grid {lo, lo+step, ..., <=hi} by
/// ternary search, falling back to an exhaustive scan whenever the probes
/// are inconsistent with unimodality (including exact plateaus). Ties break
/// toward the smaller grid point. Returns (argmin, min, used_fallback).
pub fn argmin_unimodal_grid(
    lo: u64,
    hi: u64,
    step: u64,
    mut f: impl FnMut(u64) -> f64,
) -> Result<(u64, f64, bool)> {
    if lo == 0 || hi < lo || step == 0 {
        return Err(Error::EmptyGrid(format!("grid [{lo}, {hi}] step {step}")));
    }
    let k_max = (hi - lo) / step;
    let mut memo: HashMap<u64, f64> = HashMap::new();
    let eval = |k: u64, memo: &mut HashMap<u64, f64>, f: &mut dyn FnMut(u64) -> f64| -> f64 {
        *memo.entry(k).or_insert_with(|| f(lo + k * step))
    };

    let exhaustive = |f: &mut dyn FnMut(u64) -> f64, memo: &mut HashMap<u64, f64>| {
        let mut best_k = 0u64;
        let mut best = f64::INFINITY;
        for k in 0..=k_max {
            let v = *memo.entry(k).or_insert_with(|| f(lo + k * step));
            if v < best {
                best = v;
                best_k = k;
            }
        }
        (lo + best_k * step, best)
    };

    let (mut a, mut b) = (0u64, k_max);
    let mut plateau = false;
    while b - a > 3 {
        let m1 = a + (b - a) / 3;
        let m2 = b - (b - a) / 3;
        let f1 = eval(m1, &mut memo, &mut f);
        let f2 = eval(m2, &mut memo, &mut f);
        if f1 == f2 {
            // A flat stretch: ternary cannot discard either side safely.
            plateau = true;
            break;
        } else if f1 < f2 {
            b = m2;
        } else {
            a = m1;
        }
    }
    if plateau {
        // Saturated or underflow-clamped regions of the bound produce exact
        // plateaus routinely; the rescan is cheap, so this is not a warning.
        log::debug!("ternary search hit a plateau; falling back to exhaustive scan");
        let (arg, best) = exhaustive(&mut f, &mut memo);
        return Ok((arg, best, true));
    }

    let mut best_k = a;
    let mut best = eval(a, &mut memo, &mut f);
    for k in a + 1..=b {
        let v = eval(k, &mut memo, &mut f);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    // Local unimodality check around the winner: a strictly smaller neighbor
    // means the probes lied, so rescan everything.
    for nk in [best_k.checked_sub(1), Some(best_k + 1)].into_iter().flatten() {
        if nk <= k_max && eval(nk, &mut memo, &mut f) < best {
            log::warn!("unimodality violation near grid point {nk}; exhaustive rescan");
            let (arg, best) = exhaustive(&mut f, &mut memo);
            return Ok((arg, best, true));
        }
    }
    Ok((lo + best_k * step, best, false))
}

/// Optimal bits-per-TTI at a fixed bandwidth: the grid argmin of the overall
/// error bound.
pub fn inner_opt_bits(
    task: &TaskSpec,
    link: &LinkParams,
    table: &TradeoffTable,
    bandwidth_khz: f64,
    cfg: &SearchConfig,
) -> Result<(u64, f64)> {
    cfg.validate()?;
    // Evaluate once fallibly so the closure below can't hide real errors.
    let (b0, bmax) = cfg.b_range_bits;
    overall_error_bound(task, link, table, bandwidth_khz, b0 as f64, LookupMode::Clamp)?;
    let (bits, eps, _) = argmin_unimodal_grid(b0, bmax, cfg.b_grid_step, |b| {
        overall_error_bound(task, link, table, bandwidth_khz, b as f64, LookupMode::Clamp)
            .expect("bound evaluation validated at the range start")
            .total
    })?;
    Ok((bits, eps))
}

/// Resolution of the bandwidth bisection: 1 Hz.
const W_RESOLUTION_KHZ: f64 = 1e-3;

/// Outcome of the bandwidth bisection: the smallest probed feasible
/// (bandwidth, bits, bound) if any, iterations, and the probe trace.
type BisectOutcome = (Option<(f64, u64, f64)>, usize, Vec<ProbeRecord>);

/// Generic bandwidth bisection against a monotone-feasibility evaluator.
/// `eval(w)` returns the best bits and the bound at that bandwidth.
pub(crate) fn bisect_min_feasible_w(
    mut eval: impl FnMut(f64) -> Result<(u64, f64)>,
    eps_max: f64,
    cfg: &SearchConfig,
) -> Result<BisectOutcome> {
    let (w0, wmax) = cfg.w_range_khz;
    let mut trace = Vec::new();
    let mut probe = |w: f64, eval: &mut dyn FnMut(f64) -> Result<(u64, f64)>| -> Result<(u64, f64)> {
        let (bits, eps) = eval(w)?;
        trace.push(ProbeRecord { w_khz: w, bits, eps });
        Ok((bits, eps))
    };

    let (b_lo, e_lo) = probe(w0, &mut eval)?;
    if e_lo <= eps_max {
        // The whole range is feasible; the minimum bandwidth wins.
        return Ok((Some((w0, b_lo, e_lo)), 1, trace));
    }
    if w0 == wmax {
        return Ok((None, 1, trace));
    }
    let (b_hi, e_hi) = probe(wmax, &mut eval)?;
    if e_hi > eps_max {
        return Ok((None, 2, trace));
    }

    let tol_met = |eps: f64| match cfg.tolerance_rule {
        ToleranceRule::TargetSquared => (eps - eps_max).abs() <= eps_max * eps_max,
        ToleranceRule::Absolute(t) => (eps - eps_max).abs() <= t,
    };

    let (mut wl, mut wr) = (w0, wmax);
    let mut best = (wmax, b_hi, e_hi);
    let mut iterations = 2usize;
    while wr - wl > W_RESOLUTION_KHZ && iterations < cfg.max_iters {
        let wmid = 0.5 * (wl + wr);
        let (bits, eps) = probe(wmid, &mut eval)?;
        iterations += 1;
        if eps <= eps_max {
            if wmid < best.0 {
                best = (wmid, bits, eps);
            }
            wr = wmid;
        } else {
            wl = wmid;
        }
        if tol_met(eps) {
            break;
        }
    }
    Ok((Some(best), iterations, trace))
}

/// Single-user bandwidth minimization: bisection on the bandwidth, with the
/// bits re-optimized at every probe. Infeasibility (the target unreachable
/// even at the top of the range) is a first-class result, not an error.
pub fn outer_opt_bandwidth(
    task: &TaskSpec,
    link: &LinkParams,
    table: &TradeoffTable,
    cfg: &SearchConfig,
) -> Result<AllocationResult> {
    cfg.validate()?;
    task.validate()?;
    let eps_max = task.reliability_target;
    let (found, iterations, trace) = bisect_min_feasible_w(
        |w| inner_opt_bits(task, link, table, w, cfg),
        eps_max,
        cfg,
    )?;
    match found {
        Some((w, bits, _)) => {
            let breakdown =
                overall_error_bound(task, link, table, w, bits as f64, LookupMode::Clamp)?;
            Ok(AllocationResult {
                bandwidth_khz: w,
                bits,
                breakdown,
                feasible: true,
                iterations,
                trace,
            })
        }
        None => {
            let last = trace.last().expect("at least one probe recorded");
            let breakdown = overall_error_bound(
                task,
                link,
                table,
                last.w_khz,
                last.bits as f64,
                LookupMode::Clamp,
            )?;
            Ok(AllocationResult {
                bandwidth_khz: last.w_khz,
                bits: last.bits,
                breakdown,
                feasible: false,
                iterations,
                trace,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocationMode {
    /// Each task gets its own single-user minimum bandwidth.
    TaskOriented,
    /// Every task is provisioned at the most demanding class's bandwidth.
    TaskAgnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUserAllocation {
    /// Single-user optimum for each task, in input order.
    pub per_task: Vec<AllocationResult>,
    /// Bandwidth assigned to each task under the chosen mode.
    pub assigned_bandwidth_khz: Vec<f64>,
    /// Served prefix of the task list under the bandwidth cap.
    pub n_served: usize,
    /// Bandwidth needed to serve every task in the list.
    pub total_bandwidth_khz: f64,
}

/// Longest prefix of per-task bandwidths whose cumulative sum fits in
/// `w_max_khz`. A non-positive entry marks an unservable task and stops the
/// prefix.
pub fn admit_prefix(per_task_bw_khz: &[f64], w_max_khz: f64) -> usize {
    let mut used = 0.0;
    for (i, &bw) in per_task_bw_khz.iter().enumerate() {
        if bw <= 0.0 || used + bw > w_max_khz {
            return i;
        }
        used += bw;
    }
    per_task_bw_khz.len()
}

fn task_key(task: &TaskSpec) -> (u64, u64, u64, u64, bool) {
    (
        task.delay_bound_ms.to_bits(),
        task.reliability_target.to_bits(),
        task.jnd_threshold_pct.to_bits(),
        task.arrival_rate_pps.to_bits(),
        task.criticality == Criticality::Critical,
    )
}

/// Solve the per-task optima (deduplicating identical tasks, independent
/// solves in parallel) and admit tasks first-come until the bandwidth cap.
pub fn multi_user_allocate(
    tasks: &[TaskSpec],
    link: &LinkParams,
    table: &TradeoffTable,
    w_max_khz: f64,
    mode: AllocationMode,
    cfg: &SearchConfig,
) -> Result<MultiUserAllocation> {
    if w_max_khz <= 0.0 {
        return Err(Error::Domain("w_max must be > 0".into()));
    }
    if tasks.is_empty() {
        return Err(Error::Domain("task list must be non-empty".into()));
    }
    let mut distinct: Vec<TaskSpec> = Vec::new();
    let mut index_of: HashMap<(u64, u64, u64, u64, bool), usize> = HashMap::new();
    let mut task_index = Vec::with_capacity(tasks.len());
    for task in tasks {
        let key = task_key(task);
        let idx = *index_of.entry(key).or_insert_with(|| {
            distinct.push(*task);
            distinct.len() - 1
        });
        task_index.push(idx);
    }
    let solved: Vec<Result<AllocationResult>> = parallel::map_indexed(distinct.len(), |i| {
        outer_opt_bandwidth(&distinct[i], link, table, cfg)
    });
    let mut solutions = Vec::with_capacity(distinct.len());
    for s in solved {
        solutions.push(s?);
    }

    let per_task: Vec<AllocationResult> = task_index
        .iter()
        .map(|&i| solutions[i].clone())
        .collect();
    let agnostic_bw = solutions
        .iter()
        .filter(|s| s.feasible)
        .map(|s| s.bandwidth_khz)
        .fold(0.0f64, f64::max);
    let assigned: Vec<f64> = per_task
        .iter()
        .map(|r| {
            if !r.feasible {
                return -1.0;
            }
            match mode {
                AllocationMode::TaskOriented => r.bandwidth_khz,
                AllocationMode::TaskAgnostic => agnostic_bw,
            }
        })
        .collect();
    let n_served = admit_prefix(&assigned, w_max_khz);
    let total: f64 = assigned.iter().filter(|&&b| b > 0.0).sum();
    Ok(MultiUserAllocation {
        per_task,
        assigned_bandwidth_khz: assigned,
        n_served,
        total_bandwidth_khz: total,
    })
}

/// Relative bandwidth saving of task-oriented over task-agnostic
/// provisioning for a critical-task ratio r: 100 * (1 - (r*Wc + (1-r)*Wnc)/Wc).
pub fn savings_from_optima(w_crit_khz: f64, w_noncrit_khz: f64, ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Domain("ratio must be in [0,1]".into()));
    }
    if w_crit_khz <= 0.0 || w_noncrit_khz <= 0.0 {
        return Err(Error::Domain("optima must be positive bandwidths".into()));
    }
    let blended = ratio * w_crit_khz + (1.0 - ratio) * w_noncrit_khz;
    Ok(100.0 * (1.0 - blended / w_crit_khz))
}

/// Solve the critical and non-critical class optima present in `tasks` and
/// evaluate [`savings_from_optima`] at the given ratio.
pub fn bandwidth_savings(
    tasks: &[TaskSpec],
    link: &LinkParams,
    table: &TradeoffTable,
    ratio: f64,
    cfg: &SearchConfig,
) -> Result<f64> {
    let critical = tasks
        .iter()
        .find(|t| t.criticality == Criticality::Critical)
        .ok_or_else(|| Error::Domain("no critical task in the list".into()))?;
    let noncritical = tasks
        .iter()
        .find(|t| t.criticality == Criticality::NonCritical)
        .ok_or_else(|| Error::Domain("no non-critical task in the list".into()))?;
    let rc = outer_opt_bandwidth(critical, link, table, cfg)?;
    let rn = outer_opt_bandwidth(noncritical, link, table, cfg)?;
    if !rc.feasible || !rn.feasible {
        return Err(Error::Domain(
            "savings undefined: a class optimum is infeasible".into(),
        ));
    }
    savings_from_optima(rc.bandwidth_khz, rn.bandwidth_khz, ratio)
}
