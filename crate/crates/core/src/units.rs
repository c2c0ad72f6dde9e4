//! Unit conversions.
//!
//! Public interfaces take dBm, dBm/Hz, kHz, and ms as stated by the callers;
//! everything is converted to SI (watts, Hz, seconds) here, in one place, so
//! no other module does its own dB arithmetic.

/// dB value to linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// kHz to Hz.
pub fn khz_to_hz(khz: f64) -> f64 {
    khz * 1e3
}

/// Milliseconds to seconds.
pub fn ms_to_s(ms: f64) -> f64 {
    ms * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trips() {
        for &db in &[-144.0, -30.0, 0.0, 3.0, 23.0] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-12);
        }
    }

    #[test]
    fn dbm_reference_points() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        // 23 dBm is the Table-style handset power, about 200 mW.
        assert!((dbm_to_watts(23.0) - 0.199526231496888).abs() < 1e-12);
    }
}
