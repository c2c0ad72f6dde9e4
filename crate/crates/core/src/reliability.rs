//! Composition of prediction, decoding, and queuing error laws into the
//! three-case user-experienced delay and the overall-error upper bound.

use serde::{Deserialize, Serialize};

use crate::comm::{avg_decoding_error, queuing_violation, LinkParams, QueueLaw};
use crate::error::{Error, Result};
use crate::prediction::{LookupMode, TradeoffTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Critical,
    NonCritical,
}

/// Per-task QoS tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Maximum tolerable user-experienced delay, ms.
    pub delay_bound_ms: f64,
    /// Maximum tolerable overall error probability.
    pub reliability_target: f64,
    /// JND threshold in percent of the trajectory range.
    pub jnd_threshold_pct: f64,
    /// Average packet arrival rate, packets/s.
    pub arrival_rate_pps: f64,
    pub criticality: Criticality,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.delay_bound_ms <= 0.0 {
            return Err(Error::Domain("delay_bound_ms must be > 0".into()));
        }
        if !(0.0 < self.reliability_target && self.reliability_target < 1.0) {
            return Err(Error::Domain("reliability_target must be in (0,1)".into()));
        }
        if self.jnd_threshold_pct <= 0.0 {
            return Err(Error::Domain("jnd_threshold_pct must be > 0".into()));
        }
        if self.arrival_rate_pps <= 0.0 {
            return Err(Error::Domain("arrival_rate_pps must be > 0".into()));
        }
        Ok(())
    }
}

/// Which regime the communication delay fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayCase {
    /// Delivered within the delay bound.
    One,
    /// Late but recoverable by prediction within the horizon cap.
    Two,
    /// Beyond the maximum prediction horizon.
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperiencedDelay {
    pub delay_ms: f64,
    pub case: DelayCase,
    /// Prediction horizon consumed; absent in case 1 where prediction is
    /// only exercised for lost packets.
    pub horizon_ms: Option<f64>,
}

/// Decomposition of the overall-error upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub eps_d: f64,
    pub fq_dth: f64,
    pub fq_dth_tth: f64,
    pub eps_p_ch: f64,
    pub eps_p_tth: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub total: f64,
    pub queuing_threshold_ms: f64,
}

/// Queuing-delay budget left after the fixed delays: max{Dmax - Dt - Dr, 0}.
pub fn queuing_threshold(task: &TaskSpec, link: &LinkParams) -> f64 {
    (task.delay_bound_ms - link.tx_duration_ms - link.backhaul_delay_ms).max(0.0)
}

/// Map a communication delay to the user-experienced delay and the case of
/// the three-regime breakdown.
pub fn experienced_delay(comm_delay_ms: f64, task: &TaskSpec, link: &LinkParams) -> ExperiencedDelay {
    let dmax = task.delay_bound_ms;
    let cap = link.horizon_cap_ms;
    if comm_delay_ms <= dmax {
        ExperiencedDelay {
            delay_ms: comm_delay_ms,
            case: DelayCase::One,
            horizon_ms: None,
        }
    } else if comm_delay_ms <= dmax + cap {
        ExperiencedDelay {
            delay_ms: dmax,
            case: DelayCase::Two,
            horizon_ms: Some(comm_delay_ms - dmax),
        }
    } else {
        ExperiencedDelay {
            delay_ms: comm_delay_ms - cap,
            case: DelayCase::Three,
            horizon_ms: Some(cap),
        }
    }
}

/// The algebraic combination of the three case errors. Exposed separately so
/// the simulator and tests can compose a bound from externally supplied
/// components.
pub fn compose_bound(
    eps_d: f64,
    fq_dth: f64,
    fq_dth_tth: f64,
    eps_p_ch: f64,
    eps_p_tth: f64,
) -> (f64, f64, f64, f64) {
    let term1 = eps_p_ch * eps_d * (1.0 - fq_dth);
    let term2 = eps_p_tth * (fq_dth - fq_dth_tth);
    let term3 = fq_dth_tth;
    (term1, term2, term3, term1 + term2 + term3)
}

/// Evaluate the overall-error upper bound at one (bandwidth, bits) point.
pub fn overall_error_bound(
    task: &TaskSpec,
    link: &LinkParams,
    table: &TradeoffTable,
    bandwidth_khz: f64,
    bits: f64,
    mode: LookupMode,
) -> Result<ErrorBreakdown> {
    task.validate()?;
    link.validate()?;
    if bandwidth_khz <= 0.0 || bits <= 0.0 {
        return Err(Error::Domain("bandwidth and bits must be > 0".into()));
    }
    let dth = queuing_threshold(task, link);
    let eps_d = avg_decoding_error(link, bandwidth_khz, bits)?;
    let law = QueueLaw::new(task.arrival_rate_pps, bits, link.tx_duration_ms)?;
    let fq_dth = queuing_violation(&law, dth)?;
    let fq_dth_tth = queuing_violation(&law, dth + link.horizon_cap_ms)?;
    let eps_p_ch = table.lookup(link.coherence_time_ms, task.jnd_threshold_pct, mode)?;
    let eps_p_tth = table.lookup(link.horizon_cap_ms, task.jnd_threshold_pct, mode)?;
    let (term1, term2, term3, total) = compose_bound(eps_d, fq_dth, fq_dth_tth, eps_p_ch, eps_p_tth);
    Ok(ErrorBreakdown {
        eps_d,
        fq_dth,
        fq_dth_tth,
        eps_p_ch,
        eps_p_tth,
        term1,
        term2,
        term3,
        total,
        queuing_threshold_ms: dth,
    })
}

/// Closed-form series/parallel reliability of the two predictor placements:
/// at the transmitter a prediction error or a packet loss each violate the
/// JND; at the receiver both must fail.
pub fn placement_compare(eps_p: f64, eps_c: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&eps_p) || !(0.0..=1.0).contains(&eps_c) {
        return Err(Error::Domain("placement inputs must be probabilities".into()));
    }
    let eps_tx = 1.0 - (1.0 - eps_p) * (1.0 - eps_c);
    let eps_rx = eps_p * eps_c;
    Ok((eps_tx, eps_rx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::FadingMode;

    fn table_link() -> LinkParams {
        LinkParams {
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -144.0,
            distance_km: 0.2,
            backhaul_delay_ms: 10.0,
            tx_duration_ms: 0.5,
            coherence_time_ms: 10.0,
            horizon_cap_ms: 50.0,
            fading: FadingMode::FixedGain { gain: 1.0 },
        }
    }

    fn task(dmax: f64) -> TaskSpec {
        TaskSpec {
            delay_bound_ms: dmax,
            reliability_target: 1e-5,
            jnd_threshold_pct: 1.0,
            arrival_rate_pps: 100.0,
            criticality: Criticality::Critical,
        }
    }

    fn stipulated_table() -> TradeoffTable {
        TradeoffTable::from_fn(
            vec![1.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            vec![0.1, 1.0],
            |h, d| (1e-3 * (h / 10.0).powf(0.8) / d).min(0.9),
        )
        .unwrap()
    }

    #[test]
    fn queuing_threshold_examples() {
        let link = table_link();
        assert_eq!(queuing_threshold(&task(20.0), &link), 9.5);
        assert_eq!(queuing_threshold(&task(10.5), &link), 0.0);
        assert_eq!(queuing_threshold(&task(5.0), &link), 0.0);
    }

    #[test]
    fn experienced_delay_cases() {
        let link = table_link();
        let t = task(20.0);
        let e = experienced_delay(15.0, &t, &link);
        assert_eq!(e.delay_ms, 15.0);
        assert_eq!(e.case, DelayCase::One);
        assert_eq!(e.horizon_ms, None);

        let e = experienced_delay(30.0, &t, &link);
        assert_eq!(e.delay_ms, 20.0);
        assert_eq!(e.case, DelayCase::Two);
        assert_eq!(e.horizon_ms, Some(10.0));

        let e = experienced_delay(80.0, &t, &link);
        assert_eq!(e.delay_ms, 30.0);
        assert_eq!(e.case, DelayCase::Three);
        assert_eq!(e.horizon_ms, Some(50.0));

        // Never exceeds the communication delay; case 2 pins the bound.
        for comm in [0.0, 5.0, 20.0, 21.0, 69.9, 70.1, 200.0] {
            let e = experienced_delay(comm, &t, &link);
            assert!(e.delay_ms <= comm + 1e-12);
            if e.case == DelayCase::Two {
                assert_eq!(e.delay_ms, t.delay_bound_ms);
            }
        }
    }

    #[test]
    fn bound_collapses_when_threshold_is_zero() {
        // Dth = 0 makes fq(Dth) = 1, so term1 vanishes.
        let link = table_link();
        let t = task(10.5);
        let table = stipulated_table();
        let b =
            overall_error_bound(&t, &link, &table, 140.0, 256.0, LookupMode::Strict).unwrap();
        assert_eq!(b.queuing_threshold_ms, 0.0);
        assert_eq!(b.term1, 0.0);
        let expected = b.eps_p_tth * (1.0 - b.fq_dth_tth) + b.fq_dth_tth;
        assert!((b.total - expected).abs() < 1e-18);
    }

    #[test]
    fn perfect_predictor_leaves_only_queue_tail() {
        let link = table_link();
        let t = task(20.0);
        let table = TradeoffTable::from_fn(vec![10.0, 50.0], vec![0.1, 1.0], |_, _| 0.0).unwrap();
        let b = overall_error_bound(&t, &link, &table, 140.0, 256.0, LookupMode::Strict).unwrap();
        assert_eq!(b.term1, 0.0);
        assert_eq!(b.term2, 0.0);
        assert_eq!(b.total, b.fq_dth_tth);
    }

    #[test]
    fn bound_composes_from_independent_components() {
        // Compose the three sub-oracles independently and compare.
        let link = table_link();
        let t = task(20.0);
        let table = stipulated_table();
        let b = overall_error_bound(&t, &link, &table, 140.0, 256.0, LookupMode::Strict).unwrap();

        let eps_d = avg_decoding_error(&link, 140.0, 256.0).unwrap();
        let law = QueueLaw::new(100.0, 256.0, 0.5).unwrap();
        let f1 = queuing_violation(&law, 9.5).unwrap();
        let f2 = queuing_violation(&law, 59.5).unwrap();
        let p_ch = table.lookup(10.0, 1.0, LookupMode::Strict).unwrap();
        let p_tth = table.lookup(50.0, 1.0, LookupMode::Strict).unwrap();
        let expected = p_ch * eps_d * (1.0 - f1) + p_tth * (f1 - f2) + f2;
        assert!((b.total - expected).abs() <= 1e-15 * expected.max(1e-300));
        assert_eq!(b.total, b.term1 + b.term2 + b.term3);
    }

    #[test]
    fn bound_stays_in_unit_interval_on_random_sweep() {
        let table = stipulated_table();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let link = LinkParams {
                distance_km: 0.05 + next() * 2.0,
                tx_power_dbm: 10.0 + next() * 20.0,
                ..table_link()
            };
            let t = TaskSpec {
                delay_bound_ms: 5.0 + next() * 60.0,
                arrival_rate_pps: 50.0 + next() * 4000.0,
                jnd_threshold_pct: 0.1 + next() * 0.9,
                ..task(20.0)
            };
            let w = 1.0 + next() * 400.0;
            let bits = 1.0 + (next() * 1500.0).floor();
            let b =
                overall_error_bound(&t, &link, &table, w, bits, LookupMode::Clamp).unwrap();
            assert!(
                (0.0..=1.0).contains(&b.total),
                "total {} outside [0,1]",
                b.total
            );
        }
    }

    #[test]
    fn compose_bound_monotone_in_each_component() {
        let base = (1e-3, 0.2, 0.05, 0.01, 0.1);
        let (.., t0) = compose_bound(base.0, base.1, base.2, base.3, base.4);
        let (.., t_eps) = compose_bound(base.0 * 1.1, base.1, base.2, base.3, base.4);
        assert!(t_eps >= t0);
        let (.., t_pch) = compose_bound(base.0, base.1, base.2, base.3 * 1.1, base.4);
        assert!(t_pch >= t0);
        let (.., t_ptth) = compose_bound(base.0, base.1, base.2, base.3, base.4 * 1.1);
        assert!(t_ptth >= t0);
        let (.., t_f2) = compose_bound(base.0, base.1, base.2 * 1.1, base.3, base.4);
        assert!(t_f2 >= t0, "raising the far queue tail cannot lower the bound");
    }

    #[test]
    fn placement_examples() {
        let (tx, rx) = placement_compare(0.0, 0.3).unwrap();
        assert!((tx - 0.3).abs() < 1e-15 && rx == 0.0);
        let (tx, rx) = placement_compare(0.4, 0.0).unwrap();
        assert!((tx - 0.4).abs() < 1e-15 && rx == 0.0);
        let (tx, rx) = placement_compare(1e-2, 1e-3).unwrap();
        assert!((tx - 1.099e-2).abs() < 1e-8);
        assert!((rx - 1e-5).abs() < 1e-12);
        assert!(placement_compare(-0.1, 0.5).is_err());
        assert!(placement_compare(0.1, 1.5).is_err());
    }

    #[test]
    fn receiver_placement_never_worse() {
        for i in 0..50 {
            for j in 0..50 {
                let p = i as f64 / 49.0;
                let c = j as f64 / 49.0;
                let (tx, rx) = placement_compare(p, c).unwrap();
                assert!(rx <= p.min(c) + 1e-15);
                assert!(p.max(c) <= tx + 1e-15);
                assert!(rx <= tx + 1e-15);
            }
        }
    }
}
