//! Mutual information, URLLC outage estimation and the look-up table.
//!
//! All vectors in this module are aligned with one frequency set (the
//! URLLC set unless stated otherwise), not with the whole grid.

mod table;

pub use table::{
    Interference, LazyOutageTable, OutageLookup, OutageTable, TableAxes, TableParams, TABLE_FORMAT_VERSION,
};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AccessScheme;
use crate::rng;
use crate::waterfill::interference_reference;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub outages: u64,
    pub trials: u64,
    /// Three binomial standard errors.
    pub ci_halfwidth: f64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, trials: u64) -> Self {
        let p = outages as f64 / trials as f64;
        let ci = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        Self { p_hat: p, outages, trials, ci_halfwidth: ci }
    }

    /// Upper end of the 3-sigma interval.
    pub fn upper(&self) -> f64 {
        self.p_hat + self.ci_halfwidth
    }
}

fn check_aligned(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::invalid("power and SNR vectors must be aligned"));
    }
    Ok(())
}

fn mean_log_sinr(signal: &[f64], interference: &[f64], snr: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    let sum: f64 = signal
        .iter()
        .zip(interference)
        .zip(snr)
        .map(|((&s, &i), &g)| (1.0 + g * s / (1.0 + g * i)).log2())
        .sum();
    sum / signal.len() as f64
}

/// URLLC mutual information at the URLLC receiver for one fading realization.
pub fn mutual_info_u(urllc_power: &[f64], embb_power: &[f64], urllc_snr: &[f64]) -> Result<f64> {
    check_aligned(urllc_power, embb_power, urllc_snr)?;
    Ok(mean_log_sinr(urllc_power, embb_power, urllc_snr))
}

/// URLLC mutual information at the eMBB receiver, which must decode it before
/// cancellation. Zero under OMA.
pub fn mutual_info_sic(
    scheme: AccessScheme,
    urllc_power: &[f64],
    embb_power: &[f64],
    embb_snr: &[f64],
) -> Result<f64> {
    check_aligned(urllc_power, embb_power, embb_snr)?;
    Ok(match scheme {
        AccessScheme::Oma => 0.0,
        AccessScheme::Noma => mean_log_sinr(urllc_power, embb_power, embb_snr),
    })
}

/// eMBB mutual information after cancellation, over the eMBB set.
pub fn mutual_info_e(embb_power: &[f64], embb_snr: &[f64]) -> Result<f64> {
    if embb_power.len() != embb_snr.len() {
        return Err(Error::invalid("power and SNR vectors must be aligned"));
    }
    if embb_power.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = embb_power
        .iter()
        .zip(embb_snr)
        .map(|(p, g)| (1.0 + g * p).log2())
        .sum();
    Ok(sum / embb_power.len() as f64)
}

/// Interference-limited lower bound on the URLLC mutual information.
pub fn mutual_info_il(urllc_power: &[f64], embb_power: &[f64]) -> Result<f64> {
    if urllc_power.len() != embb_power.len() {
        return Err(Error::invalid("power vectors must be aligned"));
    }
    let reference = interference_reference(embb_power)?;
    let sum: f64 = urllc_power
        .iter()
        .zip(&reference)
        .map(|(pu, pe)| (1.0 + pu / pe).log2())
        .sum();
    Ok(sum / urllc_power.len() as f64)
}

/// Minimum single-resource URLLC power meeting outage `epsilon` under
/// Rayleigh fading with mean SNR `mean_snr` and interference `embb_power`.
pub fn single_freq_power(rate: f64, mean_snr: f64, epsilon: f64, embb_power: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("outage target must lie in (0, 1)"));
    }
    if !(mean_snr > 0.0) {
        return Err(Error::invalid("mean SNR must be positive"));
    }
    // ln(1 - eps) without cancellation for tiny eps.
    let ln_keep = (-epsilon).ln_1p();
    Ok((rate.exp2() - 1.0) * (embb_power - 1.0 / (mean_snr * ln_keep)))
}

/// One trial's verdict given normalized unit-mean draws. Uses the product
/// form of the accumulated rate, exiting once it clears the target.
#[inline]
fn trial_in_outage(unit_draws: &[f64], mean_snr: f64, urllc_power: &[f64], embb_power: &[f64], threshold: f64) -> bool {
    let mut acc = 1.0f64;
    for ((&e, &pu), &pe) in unit_draws.iter().zip(urllc_power).zip(embb_power) {
        let g = e * mean_snr;
        acc *= 1.0 + g * pu / (1.0 + g * pe);
        if acc > threshold {
            return false;
        }
    }
    true
}

fn outage_threshold(freqs: usize, rate: f64) -> f64 {
    (freqs as f64 * rate).exp2()
}

/// Fresh Monte Carlo outage estimate: the fraction of `trials` independent
/// fading draws for which the accumulated URLLC rate does not exceed
/// `freqs * rate`.
pub fn estimate_outage(
    urllc_power: &[f64],
    embb_power: &[f64],
    mean_snr: f64,
    rate: f64,
    trials: u64,
    seed: u64,
) -> Result<OutageEstimate> {
    if urllc_power.len() != embb_power.len() || urllc_power.is_empty() {
        return Err(Error::invalid("power vectors must be aligned and nonempty"));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    if !(mean_snr > 0.0) {
        return Err(Error::invalid("mean SNR must be positive"));
    }
    let freqs = urllc_power.len();
    let threshold = outage_threshold(freqs, rate);
    let mut rng = rng::seeded(seed);
    let mut draws = vec![0.0; freqs];
    let mut outages = 0u64;
    for _ in 0..trials {
        for d in draws.iter_mut() {
            *d = rng.sample(Exp1);
        }
        if trial_in_outage(&draws, mean_snr, urllc_power, embb_power, threshold) {
            outages += 1;
        }
    }
    Ok(OutageEstimate::from_counts(outages, trials))
}

/// A fixed matrix of unit-mean exponential draws reused across candidate power
/// vectors (common random numbers). Estimates made with the same matrix are
/// exactly monotone in every power coordinate.
#[derive(Debug, Clone)]
pub struct CrnDraws {
    freqs: usize,
    trials: usize,
    draws: Vec<f64>,
}

const CRN_CHUNK: usize = 1 << 14;

impl CrnDraws {
    pub fn new(freqs: usize, trials: usize, seed: u64) -> Result<Self> {
        if freqs == 0 || trials == 0 {
            return Err(Error::invalid("draw matrix needs positive dimensions"));
        }
        let mut draws = vec![0.0; freqs * trials];
        // Chunked sub-streams keep the matrix independent of thread count.
        draws
            .par_chunks_mut(freqs * CRN_CHUNK)
            .enumerate()
            .for_each(|(k, chunk)| {
                let mut r = rng::stream(seed, &[rng::tag::CRN, freqs as u64, k as u64]);
                for d in chunk.iter_mut() {
                    *d = r.sample(Exp1);
                }
            });
        Ok(Self { freqs, trials, draws })
    }

    pub fn freqs(&self) -> usize {
        self.freqs
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn estimate(&self, urllc_power: &[f64], embb_power: &[f64], mean_snr: f64, rate: f64) -> Result<OutageEstimate> {
        if urllc_power.len() != self.freqs || embb_power.len() != self.freqs {
            return Err(Error::invalid(format!("draw matrix is for {} frequencies", self.freqs)));
        }
        let threshold = outage_threshold(self.freqs, rate);
        let outages: u64 = self
            .draws
            .par_chunks(self.freqs * CRN_CHUNK)
            .map(|chunk| {
                chunk
                    .chunks_exact(self.freqs)
                    .filter(|row| trial_in_outage(row, mean_snr, urllc_power, embb_power, threshold))
                    .count() as u64
            })
            .sum();
        Ok(OutageEstimate::from_counts(outages, self.trials as u64))
    }
}
