//! Rayleigh fading and the distance / mean-SNR mapping.
//!
//! SNRs are normalized by the noise power and expressed per watt of transmit
//! power: the instantaneous SNR of a resource loaded with `p` watts is
//! `gamma * p`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::units::{db_to_linear, dbm_to_watts};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Known instantaneous eMBB SNR per frequency.
    pub embb_snr: Vec<f64>,
    pub embb_mean_snr: f64,
    pub urllc_mean_snr: f64,
    pub noise_w: f64,
}

impl ChannelState {
    pub fn new(embb_snr: Vec<f64>, embb_mean_snr: f64, urllc_mean_snr: f64, noise_w: f64) -> Result<Self> {
        if embb_snr.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::invalid("instantaneous SNRs must be finite and nonnegative"));
        }
        if !(embb_mean_snr > 0.0) || !(urllc_mean_snr > 0.0) || !(noise_w > 0.0) {
            return Err(Error::invalid("mean SNRs and noise power must be positive"));
        }
        Ok(Self { embb_snr, embb_mean_snr, urllc_mean_snr, noise_w })
    }

    /// Draws a fresh eMBB fading realization.
    pub fn draw(
        frequencies: usize,
        embb_mean_snr: f64,
        urllc_mean_snr: f64,
        noise_w: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let embb_snr = sample_snr_with(embb_mean_snr, frequencies, rng)?;
        Self::new(embb_snr, embb_mean_snr, urllc_mean_snr, noise_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub antenna_gain_db: f64,
    pub carrier_hz: f64,
    pub reference_distance_m: f64,
    pub pathloss_exponent: f64,
    pub cell_radius_m: f64,
    pub noise_dbm: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            antenna_gain_db: 17.15,
            carrier_hz: 2e9,
            reference_distance_m: 10.0,
            pathloss_exponent: 4.0,
            cell_radius_m: 500.0,
            noise_dbm: -108.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::invalid("path-loss exponent must exceed 2"));
        }
        if !(self.reference_distance_m > 0.0) || !(self.cell_radius_m >= self.reference_distance_m) {
            return Err(Error::invalid("need 0 < reference distance <= cell radius"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        Ok(())
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Received power per watt transmitted at distance `d`, before noise.
    fn gain_numerator(&self) -> f64 {
        let wavelength_term = SPEED_OF_LIGHT / (4.0 * PI * self.carrier_hz);
        db_to_linear(self.antenna_gain_db)
            * wavelength_term
            * wavelength_term
            * self.reference_distance_m.powf(self.pathloss_exponent - 2.0)
    }
}

/// Exponential SNR draws with the given mean (Rayleigh power fading).
pub fn sample_snr(mean: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    sample_snr_with(mean, count, &mut rng::seeded(seed))
}

pub fn sample_snr_with(mean: f64, count: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::invalid(format!("mean SNR {mean} must be positive")));
    }
    if count == 0 {
        return Err(Error::invalid("need at least one SNR sample"));
    }
    Ok((0..count)
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            e * mean
        })
        .collect())
}

/// Distance at which the mean normalized SNR equals `mean_snr`.
pub fn distance_from_mean_snr(mean_snr: f64, geom: &Geometry, noise_w: f64) -> f64 {
    (geom.gain_numerator() / (mean_snr * noise_w)).powf(1.0 / geom.pathloss_exponent)
}

/// Mean normalized SNR at distance `d`; defined outside the free-space region only.
pub fn mean_snr_from_distance(distance_m: f64, geom: &Geometry, noise_w: f64) -> Result<f64> {
    if !(distance_m >= geom.reference_distance_m) {
        return Err(Error::OutOfModel { distance_m, reference_m: geom.reference_distance_m });
    }
    Ok(geom.gain_numerator() / (distance_m.powf(geom.pathloss_exponent) * noise_w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise() -> f64 {
        Geometry::default().noise_w()
    }

    #[test]
    fn table_distances() {
        let g = Geometry::default();
        let d50 = distance_from_mean_snr(db_to_linear(50.0), &g, noise());
        let d30 = distance_from_mean_snr(db_to_linear(30.0), &g, noise());
        assert!((d50 - 146.9).abs() < 0.2, "{d50}");
        assert!((d30 - 464.56).abs() < 0.5, "{d30}");
    }

    #[test]
    fn quadrupling_snr_shrinks_distance_by_sqrt2() {
        let g = Geometry::default();
        let a = distance_from_mean_snr(1e4, &g, noise());
        let b = distance_from_mean_snr(4e4, &g, noise());
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inverse_anchor() {
        let g = Geometry::default();
        let snr = mean_snr_from_distance(146.9, &g, noise()).unwrap();
        assert!((crate::units::linear_to_db(snr) - 50.0).abs() < 0.01);
    }

    #[test]
    fn power_law_ratio() {
        let g = Geometry::default();
        let a = mean_snr_from_distance(20.0, &g, noise()).unwrap();
        let b = mean_snr_from_distance(40.0, &g, noise()).unwrap();
        assert!((a / b - 16.0).abs() < 1e-9);
    }

    #[test]
    fn inside_reference_distance_is_out_of_model() {
        let g = Geometry::default();
        assert!(matches!(
            mean_snr_from_distance(5.0, &g, noise()),
            Err(Error::OutOfModel { .. })
        ));
    }

    #[test]
    fn sampler_is_deterministic() {
        assert_eq!(sample_snr(10.0, 16, 3).unwrap(), sample_snr(10.0, 16, 3).unwrap());
        assert_ne!(sample_snr(10.0, 16, 3).unwrap(), sample_snr(10.0, 16, 4).unwrap());
        assert!(sample_snr(0.0, 1, 0).is_err());
        assert!(sample_snr(1.0, 0, 0).is_err());
    }

    #[test]
    fn sampler_moments_and_cdf() {
        let mean = 1000.0;
        let n = 1_000_000;
        let x = sample_snr(mean, n, 11).unwrap();
        let m = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        // Standard error of the mean is mean/sqrt(n).
        assert!((m - mean).abs() < 3.0 * mean / (n as f64).sqrt(), "mean {m}");
        // Var of the sample variance for Exp is 8 mean^4 / n.
        let var_se = (8.0f64).sqrt() * mean * mean / (n as f64).sqrt();
        assert!((var - mean * mean).abs() < 5.0 * var_se, "var {var}");
        let below = x.iter().filter(|v| **v <= mean).count() as f64 / n as f64;
        let p = 1.0 - (-1.0f64).exp();
        assert!((below - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
}
