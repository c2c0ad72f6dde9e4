//! Physical-layer error laws: finite-blocklength decoding error and
//! effective-bandwidth queuing-delay violation, plus the link budget that
//! feeds them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, lambert_w_m1, q_function};
use crate::units::{dbm_to_watts, khz_to_hz, ms_to_s};

const LOG2_E: f64 = std::f64::consts::LOG2_E;
/// 5 dB as a linear ratio; above this the dispersion simplification applies.
const SNR_SIMPLIFICATION_LINEAR: f64 = 3.1622776601683795;

/// How the small-scale channel gain enters the decoding-error evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FadingMode {
    /// Evaluate at one fixed small-scale gain.
    FixedGain { gain: f64 },
    /// Average over a unit-mean exponential gain (Rayleigh envelope) with the
    /// given quadrature node count per panel.
    RayleighAverage { nodes: usize },
}

/// Radio constants for one link. Delay and bandwidth quantities carry their
/// unit in the field name; conversion to SI happens inside the operations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub distance_km: f64,
    pub backhaul_delay_ms: f64,
    pub tx_duration_ms: f64,
    pub coherence_time_ms: f64,
    pub horizon_cap_ms: f64,
    pub fading: FadingMode,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if self.tx_duration_ms <= 0.0 {
            return Err(Error::Domain("tx_duration_ms must be > 0".into()));
        }
        if self.distance_km <= 0.0 {
            return Err(Error::Domain("distance_km must be > 0".into()));
        }
        if self.coherence_time_ms <= 0.0 {
            return Err(Error::Domain("coherence_time_ms must be > 0".into()));
        }
        if self.horizon_cap_ms <= 0.0 {
            return Err(Error::Domain("horizon_cap_ms must be > 0".into()));
        }
        match self.fading {
            FadingMode::FixedGain { gain } if gain <= 0.0 => {
                Err(Error::Domain("fixed fading gain must be > 0".into()))
            }
            FadingMode::RayleighAverage { nodes } if nodes < 4 => {
                Err(Error::Domain("quadrature node count must be >= 4".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Derived radio quantities at one bandwidth and one small-scale gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Large-scale (path loss) gain, linear.
    pub large_scale_gain: f64,
    /// Received SNR, linear.
    pub snr: f64,
    /// Shannon capacity, bits/s/Hz.
    pub capacity: f64,
    /// Channel dispersion, (bits/s/Hz)^2, exact form.
    pub dispersion: f64,
    /// Blocklength in symbols: tx duration times bandwidth.
    pub blocklength: f64,
    /// Whether the SNR exceeds 5 dB so the dispersion simplification applies.
    pub high_snr: bool,
}

/// Large-scale path-loss gain (linear) at a distance in kilometres:
/// 10*log10(gain) = -128.1 - 36.7*log10(d_km).
pub fn path_loss_gain(distance_km: f64) -> Result<f64> {
    if distance_km <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss needs distance > 0, got {distance_km} km"
        )));
    }
    let db = -128.1 - 36.7 * distance_km.log10();
    Ok(10f64.powf(db / 10.0))
}

/// Assemble the link budget at `bandwidth_khz` and small-scale gain `gain`.
pub fn link_budget(link: &LinkParams, bandwidth_khz: f64, gain: f64) -> Result<LinkBudget> {
    link.validate()?;
    if bandwidth_khz <= 0.0 {
        return Err(Error::Domain("bandwidth must be > 0".into()));
    }
    if gain <= 0.0 {
        return Err(Error::Domain("small-scale gain must be > 0".into()));
    }
    let alpha = path_loss_gain(link.distance_km)?;
    let p_w = dbm_to_watts(link.tx_power_dbm);
    let n0_w_hz = dbm_to_watts(link.noise_psd_dbm_hz);
    let snr = alpha * gain * p_w / (n0_w_hz * khz_to_hz(bandwidth_khz));
    let capacity = (1.0 + snr).log2();
    let dispersion = LOG2_E * LOG2_E * (1.0 - 1.0 / ((1.0 + snr) * (1.0 + snr)));
    Ok(LinkBudget {
        large_scale_gain: alpha,
        snr,
        capacity,
        dispersion,
        // ms * kHz is already dimensionless symbol count.
        blocklength: link.tx_duration_ms * bandwidth_khz,
        high_snr: snr > SNR_SIMPLIFICATION_LINEAR,
    })
}

/// Finite-blocklength decoding error probability for `bits` information bits
/// in one transmission interval. All logarithms are base 2. Above 5 dB the
/// dispersion is taken as log2(e)^2; below, the exact value from the budget
/// is used. Output is clamped into (0, 1).
pub fn decoding_error(
    budget: &LinkBudget,
    bits: f64,
    bandwidth_khz: f64,
    tx_duration_ms: f64,
) -> Result<f64> {
    if bits < 0.0 {
        return Err(Error::Domain("bits must be >= 0".into()));
    }
    let blocklength = tx_duration_ms * bandwidth_khz;
    if blocklength <= 0.0 {
        return Err(Error::Domain(format!(
            "blocklength must be positive, got {blocklength}"
        )));
    }
    let numerator = blocklength * budget.capacity - bits + blocklength.log2() / 2.0;
    let denominator = if budget.high_snr {
        LOG2_E * blocklength.sqrt()
    } else {
        (blocklength * budget.dispersion).sqrt()
    };
    Ok(q_function(numerator / denominator).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Arrival/service description of one link's queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueLaw {
    pub arrival_rate_pps: f64,
    pub bits_per_tti: f64,
    pub tx_duration_ms: f64,
    /// Service rate b/Dt, per second.
    pub eff_bandwidth: f64,
    /// Decay exponent of the delay tail, 1/s; zero when saturated.
    pub exponent: f64,
}

impl QueueLaw {
    pub fn new(arrival_rate_pps: f64, bits_per_tti: f64, tx_duration_ms: f64) -> Result<Self> {
        if arrival_rate_pps <= 0.0 || bits_per_tti <= 0.0 || tx_duration_ms <= 0.0 {
            return Err(Error::Domain(
                "queue law needs positive arrival rate, bits per TTI, and tx duration".into(),
            ));
        }
        let dt_s = ms_to_s(tx_duration_ms);
        let eff_bandwidth = bits_per_tti / dt_s;
        // Ratio of arrival rate to service rate as the law states it.
        let rho = arrival_rate_pps * dt_s / bits_per_tti;
        let exponent = if rho >= 1.0 {
            // Saturated: W_{-1}(-rho*e^{-rho}) = -rho exactly, so the
            // exponent degenerates to zero and the tail probability is 1.
            0.0
        } else {
            let w = lambert_w_m1(-rho * (-rho).exp())?;
            eff_bandwidth * w + arrival_rate_pps
        };
        Ok(Self {
            arrival_rate_pps,
            bits_per_tti,
            tx_duration_ms,
            eff_bandwidth,
            exponent,
        })
    }

    /// Whether the queue is saturated (utilization at or above one).
    pub fn saturated(&self) -> bool {
        self.exponent == 0.0
    }
}

/// Probability that the queuing delay exceeds `bound_ms`. Returns exactly 1
/// for a saturated queue or a zero bound; otherwise exp(bound * exponent),
/// clamped to stay positive.
pub fn queuing_violation(law: &QueueLaw, bound_ms: f64) -> Result<f64> {
    if bound_ms < 0.0 {
        return Err(Error::Domain("queuing delay bound must be >= 0".into()));
    }
    if law.saturated() || bound_ms == 0.0 {
        return Ok(1.0);
    }
    Ok((ms_to_s(bound_ms) * law.exponent)
        .exp()
        .max(f64::MIN_POSITIVE))
}

/// Decoding error at the link's configured fading mode: either evaluated at
/// one fixed gain, or averaged over a unit-mean exponential gain.
pub fn avg_decoding_error(link: &LinkParams, bandwidth_khz: f64, bits: f64) -> Result<f64> {
    link.validate()?;
    match link.fading {
        FadingMode::FixedGain { gain } => {
            let budget = link_budget(link, bandwidth_khz, gain)?;
            decoding_error(&budget, bits, bandwidth_khz, link.tx_duration_ms)
        }
        FadingMode::RayleighAverage { nodes } => {
            let eps_at = |g: f64| -> Result<f64> {
                let budget = link_budget(link, bandwidth_khz, g)?;
                decoding_error(&budget, bits, bandwidth_khz, link.tx_duration_ms)
            };
            // Locate the decode knee: the gain where the Q argument crosses
            // zero, so the panels can resolve the transition.
            let unit = link_budget(link, bandwidth_khz, 1.0)?;
            let blocklength = unit.blocklength;
            let knee = {
                let c0 = (bits - blocklength.log2() / 2.0) / blocklength;
                if c0 > 0.0 {
                    let gamma0 = (2f64.powf(c0) - 1.0).max(0.0);
                    let g0 = gamma0 / unit.snr;
                    if g0 > 0.0 && g0 < 36.0 {
                        // Transition half-width: gain change that moves the
                        // Q argument by ~12, using the simplified dispersion.
                        let d_arg_dg = blocklength * unit.snr
                            / ((1.0 + gamma0) * std::f64::consts::LN_2)
                            / (LOG2_E * blocklength.sqrt());
                        Some((g0, (12.0 / d_arg_dg).max(g0 * 1e-6)))
                    } else {
                        None
                    }
                } else {
                    None
                }
            };
            // The dispersion form switches at 5 dB; panel edges land there so
            // the jump never sits inside a panel.
            let g_switch = SNR_SIMPLIFICATION_LINEAR / unit.snr;
            let value = weighted_fading_average(
                |g| eps_at(g).unwrap_or(1.0),
                knee,
                if (1e-12..36.0).contains(&g_switch) {
                    Some(g_switch)
                } else {
                    None
                },
                nodes,
            );
            Ok(value.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
        }
    }
}

/// Normalized quadrature of f against the exp(-g) weight on (0, 36], with a
/// dedicated panel around an optional knee and a panel edge at an optional
/// discontinuity. Weights are positive and renormalized so a constant
/// integrand is reproduced exactly.
pub(crate) fn weighted_fading_average(
    f: impl Fn(f64) -> f64,
    knee: Option<(f64, f64)>,
    split_at: Option<f64>,
    nodes: usize,
) -> f64 {
    const G_MAX: f64 = 36.0;
    let mut edges = vec![0.0];
    if let Some((g0, half_width)) = knee {
        let lo = (g0 - 8.0 * half_width).max(0.0);
        let hi = (g0 + 8.0 * half_width).min(G_MAX);
        if lo > 0.0 {
            edges.push(lo);
        }
        edges.push(hi);
        let mut step = (hi.max(0.5)).max(1.0);
        let mut edge = hi + step;
        while edge < G_MAX {
            edges.push(edge);
            step *= 3.0;
            edge += step;
        }
    } else {
        edges.extend_from_slice(&[1.0, 4.0, 12.0]);
    }
    edges.push(G_MAX);
    if let Some(s) = split_at {
        if s > 0.0 && s < G_MAX {
            edges.push(s);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-300);

    let mut num = 0.0;
    let mut den = 0.0;
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a <= 0.0 {
            continue;
        }
        let (xs, ws) = gauss_legendre(nodes, a, b);
        for (&x, &w) in xs.iter().zip(&ws) {
            let weight = w * (-x).exp();
            num += weight * f(x);
            den += weight;
        }
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::linear_to_db;
    use rand::{Rng, SeedableRng};

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

    /// Bisection oracle for the -1 Lambert branch, independent of special.rs.
    fn lambert_oracle(y: f64) -> f64 {
        let (mut lo, mut hi) = (-700.0f64, -1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() - y > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn path_loss_reference_distances() {
        // At 1 km the distance term vanishes.
        let g = path_loss_gain(1.0).unwrap();
        assert!((linear_to_db(g) - (-128.1)).abs() < 1e-10);
        // Direct evaluation: -128.1 + 36.7*log10(5).
        let g = path_loss_gain(0.2).unwrap();
        assert!((linear_to_db(g) - (-102.447800841)).abs() < 1e-8);
        let g = path_loss_gain(10.0).unwrap();
        assert!((linear_to_db(g) - (-164.8)).abs() < 1e-10);
        assert!(path_loss_gain(0.0).is_err());
        assert!(path_loss_gain(-1.0).is_err());
    }

    #[test]
    fn link_budget_example_snr() {
        // Independent recomputation in dB: P - L - N0 - 10log10(W).
        let link = table_link();
        let b = link_budget(&link, 32.19, 1.0).unwrap();
        let expected_db = 23.0 + 144.0 - 102.447800841 - 10.0 * (32.19e3f64).log10();
        assert!((linear_to_db(b.snr) - expected_db).abs() < 1e-8);
        assert!((expected_db - 19.475).abs() < 1e-3);
        assert!(b.high_snr);
        assert!((b.blocklength - 16.095).abs() < 1e-12);
        assert!((b.capacity - (1.0 + b.snr).log2()).abs() < 1e-15);
    }

    #[test]
    fn link_budget_linear_in_gain() {
        let link = table_link();
        let b1 = link_budget(&link, 32.19, 1.0).unwrap();
        let b2 = link_budget(&link, 32.19, 3.5).unwrap();
        assert!((b2.snr / b1.snr - 3.5).abs() < 1e-12);
    }

    #[test]
    fn dispersion_limit_at_high_snr() {
        let link = table_link();
        let b = link_budget(&link, 1e-6, 1e9).unwrap();
        assert!((b.dispersion - LOG2_E * LOG2_E).abs() < 1e-9);
    }

    #[test]
    fn decoding_error_at_balance_point_is_half() {
        let link = table_link();
        let b = link_budget(&link, 32.19, 1.0).unwrap();
        let bits = b.blocklength * b.capacity + b.blocklength.log2() / 2.0;
        let eps = decoding_error(&b, bits, 32.19, 0.5).unwrap();
        assert!((eps - 0.5).abs() < 1e-12);
        let eps0 = decoding_error(&b, 0.0, 32.19, 0.5).unwrap();
        assert!(eps0 < 0.5);
    }

    #[test]
    fn decoding_error_example_value() {
        // Frozen from a high-precision evaluation of the formula with
        // gamma = 88.6133..., l = 16.095, b = 92.
        let link = table_link();
        let b = link_budget(&link, 32.19, 1.0).unwrap();
        let eps = decoding_error(&b, 92.0, 32.19, 0.5).unwrap();
        assert!(
            (eps - 6.45320249435e-3).abs() < 1e-11,
            "eps_d = {eps}"
        );
    }

    #[test]
    fn decoding_error_rejects_bad_blocklength() {
        let link = table_link();
        let b = link_budget(&link, 32.19, 1.0).unwrap();
        assert!(decoding_error(&b, 92.0, 0.0, 0.5).is_err());
        assert!(decoding_error(&b, -1.0, 32.19, 0.5).is_err());
    }

    #[test]
    fn decoding_error_nondecreasing_in_bits() {
        let link = table_link();
        let b = link_budget(&link, 140.0, 1.0).unwrap();
        let mut prev = 0.0;
        for bits in (0..=1000).step_by(10) {
            let eps = decoding_error(&b, bits as f64, 140.0, 0.5).unwrap();
            assert!(eps >= prev, "not monotone at bits={bits}");
            prev = eps;
        }
    }

    #[test]
    fn queuing_violation_trivia() {
        let law = QueueLaw::new(1000.0, 2.0, 1.0).unwrap();
        assert_eq!(queuing_violation(&law, 0.0).unwrap(), 1.0);
        // rho = 1 exactly: saturated.
        let law = QueueLaw::new(1000.0, 1.0, 1.0).unwrap();
        assert!(law.saturated());
        assert_eq!(queuing_violation(&law, 7.0).unwrap(), 1.0);
        // rho > 1.
        let law = QueueLaw::new(4000.0, 1.0, 1.0).unwrap();
        assert_eq!(queuing_violation(&law, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn queuing_violation_example_matches_oracle() {
        // lambda=1000/s, Dt=1ms, b=2 bits, bound=1ms.
        let law = QueueLaw::new(1000.0, 2.0, 1.0).unwrap();
        let rho: f64 = 0.5;
        let xi = 2000.0 * lambert_oracle(-rho * (-rho).exp()) + 1000.0;
        let oracle = (0.001 * xi).exp();
        let got = queuing_violation(&law, 1.0).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
        assert!((got - 0.0810359482463).abs() < 1e-10);
        assert!((law.exponent - (-2512.86241725)).abs() < 1e-6);
    }

    #[test]
    fn queuing_strictly_decreasing_in_bits() {
        let mut prev = f64::INFINITY;
        for b in 1..=200 {
            let law = QueueLaw::new(100.0, b as f64, 0.5).unwrap();
            let f = queuing_violation(&law, 0.1).unwrap();
            assert!(f < prev, "not strictly decreasing at b={b}");
            prev = f;
        }
    }

    #[test]
    fn fixed_gain_average_equals_pointwise() {
        let link = table_link();
        let avg = avg_decoding_error(&link, 32.19, 92.0).unwrap();
        let b = link_budget(&link, 32.19, 1.0).unwrap();
        let point = decoding_error(&b, 92.0, 32.19, 0.5).unwrap();
        assert_eq!(avg, point);
    }

    #[test]
    fn weighted_average_of_constant_is_exact() {
        for knee in [None, Some((0.03, 0.005))] {
            let avg = weighted_fading_average(|_| 0.734, knee, Some(0.02), 16);
            assert!((avg - 0.734).abs() < 1e-13);
        }
    }

    #[test]
    fn rayleigh_average_matches_monte_carlo() {
        // Build a link with snr(g=1) = 20 dB at blocklength 50:
        // W = 100 kHz with Dt = 0.5 ms, distance solved from the path loss.
        let w_khz = 100.0;
        let p_w = dbm_to_watts(23.0);
        let n0 = dbm_to_watts(-144.0);
        let alpha_needed = 100.0 * n0 * khz_to_hz(w_khz) / p_w;
        let alpha_db = 10.0 * alpha_needed.log10();
        let distance_km = 10f64.powf((-128.1 - alpha_db) / 36.7);
        let link = LinkParams {
            distance_km,
            fading: FadingMode::RayleighAverage { nodes: 32 },
            ..table_link()
        };
        let unit = link_budget(&link, w_khz, 1.0).unwrap();
        assert!((linear_to_db(unit.snr) - 20.0).abs() < 1e-9);

        let quad = avg_decoding_error(&link, w_khz, 100.0).unwrap();

        // Monte Carlo oracle over the exponential gain.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let g = -(1.0 - rng.random::<f64>()).ln();
            let b = link_budget(&link, w_khz, g).unwrap();
            let eps = decoding_error(&b, 100.0, w_khz, 0.5).unwrap();
            sum += eps;
            sum_sq += eps * eps;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (quad - mean).abs() <= 3.0 * se + 1e-9,
            "quad={quad} mc={mean} se={se}"
        );
    }

    #[test]
    fn rayleigh_average_within_pointwise_range() {
        let link = LinkParams {
            fading: FadingMode::RayleighAverage { nodes: 16 },
            ..table_link()
        };
        let avg = avg_decoding_error(&link, 32.19, 92.0).unwrap();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 1..=2000 {
            let g = 36.0 * i as f64 / 2000.0;
            let b = link_budget(&link, 32.19, g).unwrap();
            let eps = decoding_error(&b, 92.0, 32.19, 0.5).unwrap();
            lo = lo.min(eps);
            hi = hi.max(eps);
        }
        assert!(avg >= lo - 1e-12 && avg <= hi + 1e-12, "avg={avg} range=[{lo},{hi}]");
    }
}
