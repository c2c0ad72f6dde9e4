//! Slot-level Monte Carlo validation of the analytic overall-error bound:
//! Poisson arrivals into a FIFO queue served one packet per TTI, block-fading
//! decode outcomes, and a prediction fallback at the horizon each packet
//! actually needs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::comm::{avg_decoding_error, decoding_error, link_budget, queuing_violation, FadingMode, LinkParams, QueueLaw};
use crate::error::{Error, Result};
use crate::parallel;
use crate::prediction::{LookupMode, TradeoffTable};
use crate::reliability::{compose_bound, queuing_threshold, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Receiver,
    Transmitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub task: TaskSpec,
    pub link: LinkParams,
    pub bandwidth_khz: f64,
    pub bits: u64,
    pub table: TradeoffTable,
    pub placement: Placement,
    pub n_slots: u64,
    pub seed: u64,
    /// One TTI; must equal the link's transmission duration.
    pub slot_ms: f64,
    /// Force the per-block decoding error probability instead of drawing the
    /// channel. Used for loss sweeps and degenerate-channel checks.
    pub decode_error_override: Option<f64>,
}

impl SimScenario {
    fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.link.validate()?;
        if self.n_slots < 10_000 {
            return Err(Error::Domain("n_slots must be >= 10^4".into()));
        }
        if (self.slot_ms - self.link.tx_duration_ms).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "slot ({} ms) must equal the tx duration ({} ms)",
                self.slot_ms, self.link.tx_duration_ms
            )));
        }
        if self.bandwidth_khz <= 0.0 || self.bits == 0 {
            return Err(Error::Domain("bandwidth and bits must be positive".into()));
        }
        if let Some(e) = self.decode_error_override {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Domain("decode override must be in [0,1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub placement: Placement,
    pub seed: u64,
    pub slots_total: u64,
    pub arrivals_total: u64,
    /// Packets that completed service (delivered or dropped at decode).
    pub packets_total: u64,
    pub empirical_overall_error: f64,
    /// 95% binomial half-width around the empirical error.
    pub ci_half_width: f64,
    pub analytic_bound: f64,
    /// Packets per delay case, by would-be communication delay.
    pub case_counts: [u64; 3],
    pub decode_failures: u64,
    /// Packets whose queue wait exceeded the queuing threshold.
    pub queue_violations: u64,
    pub prediction_failures: u64,
    /// Experienced delay of delivered packets, one bin per ms (last bin
    /// saturates).
    pub delay_histogram_ms: Vec<u64>,
    /// Queue waits in slots (last bin saturates).
    pub wait_histogram_slots: Vec<u64>,
    pub mean_queue_len: f64,
    pub mean_wait_ms: f64,
}

const DELAY_BINS: usize = 512;
const WAIT_BINS: usize = 4096;
const SLOTS_PER_REPLICATION: u64 = 250_000;

#[derive(Clone)]
struct RepCounts {
    arrivals: u64,
    served: u64,
    rx_errors: u64,
    tx_errors: u64,
    decode_failures: u64,
    queue_violations: u64,
    rx_pred_failures: u64,
    tx_pred_failures: u64,
    case_counts: [u64; 3],
    delay_hist: Vec<u64>,
    wait_hist: Vec<u64>,
    sum_queue_len: u64,
    sum_wait_slots: u64,
}

impl RepCounts {
    fn new() -> Self {
        Self {
            arrivals: 0,
            served: 0,
            rx_errors: 0,
            tx_errors: 0,
            decode_failures: 0,
            queue_violations: 0,
            rx_pred_failures: 0,
            tx_pred_failures: 0,
            case_counts: [0; 3],
            delay_hist: vec![0; DELAY_BINS],
            wait_hist: vec![0; WAIT_BINS],
            sum_queue_len: 0,
            sum_wait_slots: 0,
        }
    }

    fn merge(&mut self, other: &RepCounts) {
        self.arrivals += other.arrivals;
        self.served += other.served;
        self.rx_errors += other.rx_errors;
        self.tx_errors += other.tx_errors;
        self.decode_failures += other.decode_failures;
        self.queue_violations += other.queue_violations;
        self.rx_pred_failures += other.rx_pred_failures;
        self.tx_pred_failures += other.tx_pred_failures;
        for i in 0..3 {
            self.case_counts[i] += other.case_counts[i];
        }
        for (a, b) in self.delay_hist.iter_mut().zip(&other.delay_hist) {
            *a += b;
        }
        for (a, b) in self.wait_hist.iter_mut().zip(&other.wait_hist) {
            *a += b;
        }
        self.sum_queue_len += other.sum_queue_len;
        self.sum_wait_slots += other.sum_wait_slots;
    }
}

/// Per-packet decision quantities precomputed on the slot grid. All horizon
/// lookups are clamped to the table edges up front so the hot loop does no
/// interpolation and emits no per-packet warnings.
struct Precomputed {
    coherence_slots: u64,
    dth_ms: f64,
    /// Case (0/1/2) per wait in slots; waits beyond the array are case 3.
    case_by_wait: Vec<u8>,
    /// Receiver-side prediction error per case-2 wait.
    fp_late_rx: Vec<f64>,
    /// Transmitter-side prediction error per case-2 wait.
    fp_late_tx: Vec<f64>,
    /// Receiver-side prediction error per loss-burst length in slots.
    fp_fade_rx: Vec<f64>,
    fp_fade_tx: Vec<f64>,
    /// Transmitter predictor error at its base masking horizon.
    fp_base_tx: f64,
    experienced_delay_case12: Vec<f64>,
}

fn clamped_lookup(table: &TradeoffTable, horizon_ms: f64, delta: f64) -> f64 {
    let h = horizon_ms.clamp(
        table.horizons_ms[0],
        *table.horizons_ms.last().unwrap(),
    );
    table
        .lookup(h, delta, LookupMode::Clamp)
        .expect("clamped lookup cannot fail")
}

fn precompute(sc: &SimScenario) -> Precomputed {
    let slot = sc.slot_ms;
    let link = &sc.link;
    let delta = sc.task.jnd_threshold_pct;
    let dth = queuing_threshold(&sc.task, link);
    let dmax = sc.task.delay_bound_ms;
    let cap = link.horizon_cap_ms;
    // Transmitter-side predictor always masks at least the fixed delays.
    let base_tx = link.backhaul_delay_ms + link.tx_duration_ms;
    let fp_base_tx = clamped_lookup(&sc.table, base_tx, delta);

    let max_wait_case2 = (((dth + cap) / slot).floor() as usize) + 2;
    let mut case_by_wait = Vec::with_capacity(max_wait_case2);
    let mut fp_late_rx = Vec::with_capacity(max_wait_case2);
    let mut fp_late_tx = Vec::with_capacity(max_wait_case2);
    let mut experienced = Vec::with_capacity(max_wait_case2);
    for w in 0..max_wait_case2 {
        let comm = link.backhaul_delay_ms + w as f64 * slot + link.tx_duration_ms;
        if comm <= dmax {
            case_by_wait.push(0);
            fp_late_rx.push(0.0);
            fp_late_tx.push(fp_base_tx);
            experienced.push(comm);
        } else if comm <= dmax + cap {
            let horizon = comm - dmax;
            case_by_wait.push(1);
            fp_late_rx.push(clamped_lookup(&sc.table, horizon, delta));
            fp_late_tx.push(clamped_lookup(&sc.table, horizon.max(base_tx), delta));
            experienced.push(dmax);
        } else {
            case_by_wait.push(2);
            fp_late_rx.push(1.0);
            fp_late_tx.push(1.0);
            experienced.push(comm - cap);
        }
    }

    let coherence_slots = ((link.coherence_time_ms / slot).round() as u64).max(1);
    let max_burst = coherence_slots as usize + 2;
    let mut fp_fade_rx = Vec::with_capacity(max_burst);
    let mut fp_fade_tx = Vec::with_capacity(max_burst);
    for b in 0..max_burst {
        let horizon = (b as f64 * slot).min(link.coherence_time_ms).max(slot);
        fp_fade_rx.push(clamped_lookup(&sc.table, horizon, delta));
        fp_fade_tx.push(clamped_lookup(&sc.table, horizon.max(base_tx), delta));
    }

    Precomputed {
        coherence_slots,
        dth_ms: dth,
        case_by_wait,
        fp_late_rx,
        fp_late_tx,
        fp_fade_rx,
        fp_fade_tx,
        fp_base_tx,
        experienced_delay_case12: experienced,
    }
}

fn run_replication(sc: &SimScenario, pre: &Precomputed, rep: usize, slots: u64) -> RepCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(rep as u64 + 1);
    let mut counts = RepCounts::new();
    let slot_s = sc.slot_ms * 1e-3;
    let poisson = Poisson::new(sc.task.arrival_rate_pps * slot_s)
        .expect("validated arrival rate");
    let fixed_gain = match sc.link.fading {
        FadingMode::FixedGain { gain } => Some(gain),
        FadingMode::RayleighAverage { .. } => None,
    };

    let mut queue: VecDeque<u64> = VecDeque::new();
    let mut eps_d_block = 0.0f64;
    let mut last_delivery: Option<u64> = None;

    for t in 0..slots {
        let n_arr = poisson.sample(&mut rng) as u64;
        counts.arrivals += n_arr;
        for _ in 0..n_arr {
            queue.push_back(t);
        }

        if t % pre.coherence_slots == 0 {
            eps_d_block = match sc.decode_error_override {
                Some(e) => e,
                None => {
                    let g = match fixed_gain {
                        Some(g) => g,
                        None => -(1.0 - rng.random::<f64>()).ln(),
                    };
                    let budget = link_budget(&sc.link, sc.bandwidth_khz, g.max(1e-300))
                        .expect("validated link");
                    decoding_error(
                        &budget,
                        sc.bits as f64,
                        sc.bandwidth_khz,
                        sc.link.tx_duration_ms,
                    )
                    .expect("validated blocklength")
                }
            };
        }

        if let Some(arrival) = queue.pop_front() {
            let wait = t - arrival;
            counts.served += 1;
            counts.sum_wait_slots += wait;
            let wait_bin = (wait as usize).min(WAIT_BINS - 1);
            counts.wait_hist[wait_bin] += 1;
            if wait as f64 * sc.slot_ms > pre.dth_ms {
                counts.queue_violations += 1;
            }

            let decode_fail = rng.random::<f64>() < eps_d_block;
            let u_pred = rng.random::<f64>();

            let (case, fp_rx_late, fp_tx_late, experienced) =
                match pre.case_by_wait.get(wait as usize) {
                    Some(&c) => (
                        c,
                        pre.fp_late_rx[wait as usize],
                        pre.fp_late_tx[wait as usize],
                        pre.experienced_delay_case12[wait as usize],
                    ),
                    None => (
                        2,
                        1.0,
                        1.0,
                        sc.link.backhaul_delay_ms + wait as f64 * sc.slot_ms
                            + sc.link.tx_duration_ms
                            - sc.link.horizon_cap_ms,
                    ),
                };
            counts.case_counts[case as usize] += 1;

            let burst = match last_delivery {
                Some(s) => (t - s).min(pre.coherence_slots + 1) as usize,
                None => (t + 1).min(pre.coherence_slots + 1) as usize,
            };

            let (rx_err, rx_pred_attempt_failed) = if decode_fail {
                let fail = u_pred < pre.fp_fade_rx[burst.min(pre.fp_fade_rx.len() - 1)];
                (fail, fail)
            } else {
                match case {
                    0 => (false, false),
                    1 => {
                        let fail = u_pred < fp_rx_late;
                        (fail, fail)
                    }
                    _ => (true, false),
                }
            };

            // Transmitter side: every sample is a prediction; a prediction
            // error or an unmaskable communication failure each count.
            let fp_tx = if decode_fail {
                pre.fp_fade_tx[burst.min(pre.fp_fade_tx.len() - 1)]
            } else {
                match case {
                    0 => pre.fp_base_tx,
                    1 => fp_tx_late,
                    _ => 1.0,
                }
            };
            let tx_pred_fail = u_pred < fp_tx;
            let tx_comm_fail = decode_fail || case == 2;
            let tx_err = tx_pred_fail || tx_comm_fail;

            if decode_fail {
                counts.decode_failures += 1;
            } else {
                last_delivery = Some(t);
                let bin = (experienced.max(0.0) as usize).min(DELAY_BINS - 1);
                counts.delay_hist[bin] += 1;
            }
            counts.rx_errors += rx_err as u64;
            counts.tx_errors += tx_err as u64;
            counts.rx_pred_failures += rx_pred_attempt_failed as u64;
            counts.tx_pred_failures += tx_pred_fail as u64;
        }
        counts.sum_queue_len += queue.len() as u64;
    }
    counts
}

fn replication_plan(n_slots: u64) -> Vec<u64> {
    let reps = n_slots.div_ceil(SLOTS_PER_REPLICATION).max(1);
    (0..reps)
        .map(|r| {
            let start = r * SLOTS_PER_REPLICATION;
            (n_slots - start).min(SLOTS_PER_REPLICATION)
        })
        .collect()
}

fn analytic_bound(sc: &SimScenario) -> Result<f64> {
    let eps_d = match sc.decode_error_override {
        Some(e) => e,
        None => avg_decoding_error(&sc.link, sc.bandwidth_khz, sc.bits as f64)?,
    };
    let dth = queuing_threshold(&sc.task, &sc.link);
    let law = QueueLaw::new(
        sc.task.arrival_rate_pps,
        sc.bits as f64,
        sc.link.tx_duration_ms,
    )?;
    let fq_dth = queuing_violation(&law, dth)?;
    let fq_dth_tth = queuing_violation(&law, dth + sc.link.horizon_cap_ms)?;
    let eps_p_ch = clamped_lookup(&sc.table, sc.link.coherence_time_ms, sc.task.jnd_threshold_pct);
    let eps_p_tth = clamped_lookup(&sc.table, sc.link.horizon_cap_ms, sc.task.jnd_threshold_pct);
    let (_, _, _, total) = compose_bound(eps_d, fq_dth, fq_dth_tth, eps_p_ch, eps_p_tth);
    Ok(total)
}

fn report_from_counts(
    sc: &SimScenario,
    placement: Placement,
    totals: &RepCounts,
    bound: f64,
) -> SimReport {
    let n = totals.served.max(1) as f64;
    let errors = match placement {
        Placement::Receiver => totals.rx_errors,
        Placement::Transmitter => totals.tx_errors,
    };
    let p = errors as f64 / n;
    SimReport {
        placement,
        seed: sc.seed,
        slots_total: sc.n_slots,
        arrivals_total: totals.arrivals,
        packets_total: totals.served,
        empirical_overall_error: p,
        ci_half_width: 1.96 * (p * (1.0 - p) / n).sqrt(),
        analytic_bound: bound,
        case_counts: totals.case_counts,
        decode_failures: totals.decode_failures,
        queue_violations: totals.queue_violations,
        prediction_failures: match placement {
            Placement::Receiver => totals.rx_pred_failures,
            Placement::Transmitter => totals.tx_pred_failures,
        },
        delay_histogram_ms: totals.delay_hist.clone(),
        wait_histogram_slots: totals.wait_hist.clone(),
        mean_queue_len: totals.sum_queue_len as f64 / sc.n_slots as f64,
        mean_wait_ms: totals.sum_wait_slots as f64 / n * sc.slot_ms,
    }
}

fn simulate_totals(sc: &SimScenario, sequential: bool) -> Result<RepCounts> {
    sc.validate()?;
    let pre = precompute(sc);
    let plan = replication_plan(sc.n_slots);
    let partials = if sequential {
        parallel::map_indexed_seq(plan.len(), |r| run_replication(sc, &pre, r, plan[r]))
    } else {
        parallel::map_indexed(plan.len(), |r| run_replication(sc, &pre, r, plan[r]))
    };
    let mut totals = RepCounts::new();
    for p in &partials {
        totals.merge(p);
    }
    Ok(totals)
}

/// Run the scenario and report the empirical overall error for its
/// configured placement. Deterministic for a fixed seed: replications use
/// seed-derived substreams and merge by count addition.
pub fn run_sim(sc: &SimScenario) -> Result<SimReport> {
    let totals = simulate_totals(sc, false)?;
    let bound = analytic_bound(sc)?;
    Ok(report_from_counts(sc, sc.placement, &totals, bound))
}

/// Sequential variant of [`run_sim`]; identical output.
pub fn run_sim_seq(sc: &SimScenario) -> Result<SimReport> {
    let totals = simulate_totals(sc, true)?;
    let bound = analytic_bound(sc)?;
    Ok(report_from_counts(sc, sc.placement, &totals, bound))
}

/// Evaluate both predictor placements on one common random-number stream
/// (identical arrivals, fades, and prediction draws) and return the paired
/// reports (receiver, transmitter).
pub fn compare_placements(sc: &SimScenario) -> Result<(SimReport, SimReport)> {
    let totals = simulate_totals(sc, false)?;
    let bound = analytic_bound(sc)?;
    Ok((
        report_from_counts(sc, Placement::Receiver, &totals, bound),
        report_from_counts(sc, Placement::Transmitter, &totals, bound),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reliability::Criticality;

    fn base_link() -> LinkParams {
        LinkParams {
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -144.0,
            distance_km: 0.2,
            backhaul_delay_ms: 10.0,
            tx_duration_ms: 0.5,
            coherence_time_ms: 10.0,
            horizon_cap_ms: 50.0,
            fading: FadingMode::RayleighAverage { nodes: 32 },
        }
    }

    fn base_task(lambda: f64) -> TaskSpec {
        TaskSpec {
            delay_bound_ms: 20.0,
            reliability_target: 1e-3,
            jnd_threshold_pct: 1.0,
            arrival_rate_pps: lambda,
            criticality: Criticality::NonCritical,
        }
    }

    fn flat_table(p: f64) -> TradeoffTable {
        TradeoffTable::from_fn(vec![0.5, 10.0, 50.0], vec![0.1, 1.0], |_, _| p).unwrap()
    }

    fn scenario(lambda: f64, table: TradeoffTable, override_eps: Option<f64>) -> SimScenario {
        SimScenario {
            task: base_task(lambda),
            link: base_link(),
            bandwidth_khz: 32.19,
            bits: 92,
            table,
            placement: Placement::Receiver,
            n_slots: 200_000,
            seed: 1234,
            slot_ms: 0.5,
            decode_error_override: override_eps,
        }
    }

    #[test]
    fn no_failure_sources_means_zero_error() {
        let sc = scenario(100.0, flat_table(0.0), Some(0.0));
        let r = run_sim(&sc).unwrap();
        assert_eq!(r.empirical_overall_error, 0.0);
        assert_eq!(r.decode_failures, 0);
        assert!(r.packets_total > 0);
    }

    #[test]
    fn saturated_queue_drives_error_to_one() {
        // Two packets per slot on a one-packet-per-slot server.
        let mut sc = scenario(4000.0, flat_table(0.0), Some(0.0));
        sc.n_slots = 400_000;
        let r = run_sim(&sc).unwrap();
        let case3_frac = r.case_counts[2] as f64 / r.packets_total as f64;
        assert!(case3_frac > 0.95, "case3 fraction {case3_frac}");
        assert!(r.empirical_overall_error > 0.95);
    }

    #[test]
    fn reproducible_and_parallel_equals_sequential() {
        let sc = scenario(800.0, flat_table(0.02), None);
        let a = run_sim(&sc).unwrap();
        let b = run_sim(&sc).unwrap();
        assert_eq!(a, b);
        let c = run_sim_seq(&sc).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn case_counts_partition_packets() {
        let sc = scenario(1500.0, flat_table(0.05), None);
        let r = run_sim(&sc).unwrap();
        assert_eq!(
            r.case_counts.iter().sum::<u64>(),
            r.packets_total,
            "cases must partition served packets"
        );
        assert!(r.arrivals_total >= r.packets_total);
    }

    #[test]
    fn perfect_channel_placement_split() {
        // No decode losses, stable queue: the receiver never predicts, the
        // transmitter predicts every sample at its base horizon.
        let sc = scenario(100.0, flat_table(0.05), Some(0.0));
        let (rx, tx) = compare_placements(&sc).unwrap();
        assert_eq!(rx.empirical_overall_error, 0.0);
        assert!((tx.empirical_overall_error - 0.05).abs() < 0.005);
        assert!(rx.empirical_overall_error <= tx.empirical_overall_error);
    }

    #[test]
    fn perfect_predictor_placement_split() {
        // Perfect predictor: the receiver recovers every loss, the
        // transmitter still loses what the channel drops.
        let sc = scenario(100.0, flat_table(0.0), Some(0.08));
        let (rx, tx) = compare_placements(&sc).unwrap();
        assert_eq!(rx.empirical_overall_error, 0.0);
        assert!((tx.empirical_overall_error - 0.08).abs() < 0.01);
    }

    #[test]
    fn receiver_dominates_across_loss_sweep() {
        for &loss in &[1e-3, 3e-3, 1e-2, 3e-2, 1e-1] {
            let sc = scenario(1200.0, flat_table(0.1), Some(loss));
            let (rx, tx) = compare_placements(&sc).unwrap();
            assert!(
                rx.empirical_overall_error <= tx.empirical_overall_error,
                "rx > tx at loss {loss}"
            );
        }
    }

    #[test]
    fn littles_law_holds_at_mid_load() {
        let mut sc = scenario(1000.0, flat_table(0.0), Some(0.0));
        sc.n_slots = 1_000_000;
        let r = run_sim(&sc).unwrap();
        let lhs = r.mean_queue_len;
        let lambda_hat = r.arrivals_total as f64 / (r.slots_total as f64 * 0.5e-3);
        let rhs = lambda_hat * r.mean_wait_ms * 1e-3;
        assert!(
            (lhs - rhs).abs() / rhs.max(1e-9) < 0.05,
            "L={lhs} vs lambda*W={rhs}"
        );
    }

    #[test]
    fn queue_tail_below_analytic_bound() {
        // One-bit packets make the effective-bandwidth exponent the exact
        // packet-queue decay rate, so the tail bound must hold with slack.
        let mut sc = scenario(1000.0, flat_table(0.0), Some(0.0));
        sc.bits = 1;
        sc.n_slots = 2_000_000;
        let r = run_sim(&sc).unwrap();
        let law = QueueLaw::new(1000.0, 1.0, 0.5).unwrap();
        let total: u64 = r.wait_histogram_slots.iter().sum();
        for k in 1..40usize {
            let exceed: u64 = r.wait_histogram_slots[k + 1..].iter().sum();
            if exceed < 100 {
                break;
            }
            let empirical = exceed as f64 / total as f64;
            let bound = queuing_violation(&law, k as f64 * 0.5).unwrap();
            assert!(
                empirical <= bound * 1.5,
                "wait tail at {k} slots: empirical {empirical} vs bound {bound}"
            );
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut sc = scenario(100.0, flat_table(0.0), None);
        sc.n_slots = 10;
        assert!(run_sim(&sc).is_err());
        let mut sc = scenario(100.0, flat_table(0.0), None);
        sc.slot_ms = 1.0;
        assert!(run_sim(&sc).is_err());
        let mut sc = scenario(100.0, flat_table(0.0), Some(2.0));
        sc.decode_error_override = Some(2.0);
        assert!(run_sim(&sc).is_err());
    }
}
