//! Decibel conversions. Powers are linear watts everywhere inside the crate;
//! dBm and dB only appear at I/O boundaries.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Returns `-inf` for zero power.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
        assert_eq!(watts_to_dbm(0.0), f64::NEG_INFINITY);
        assert!((db_to_linear(50.0) - 1e5).abs() < 1e-9);
        assert!((linear_to_db(1e3) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        for dbm in [-108.0, -30.0, 0.0, 9.0, 17.15] {
            assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-12);
        }
    }
}
