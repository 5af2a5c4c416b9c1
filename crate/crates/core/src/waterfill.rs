//! Minimum-power water-filling over parallel channels and its three uses:
//! eMBB power, the SIC floor for URLLC, and the interference-limited bound.
//!
//! Every solver here minimizes `sum P(f)` subject to
//! `sum log2(1 + g(f) P(f)) >= target`. The optimum is
//! `P(f) = max(0, level - 1/g(f))`, where the level is fixed by the rate
//! constraint over the positive set. The positive set is found by repeatedly
//! dropping channels whose tentative power is negative and re-solving.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AccessScheme;

/// Per-frequency powers over the whole grid, in watts. Frequencies outside
/// the owning set hold exactly zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn zeros(frequencies: usize) -> Self {
        Self(vec![0.0; frequencies])
    }

    /// Places `values[k]` at frequency `indices[k]`, zero elsewhere.
    pub fn scatter(frequencies: usize, indices: &[usize], values: &[f64]) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid("index and value lengths differ"));
        }
        let mut out = vec![0.0; frequencies];
        for (&i, &v) in indices.iter().zip(values) {
            if i >= frequencies {
                return Err(Error::invalid(format!("frequency {i} outside grid of {frequencies}")));
            }
            if !(v >= 0.0) {
                return Err(Error::invalid("powers must be nonnegative"));
            }
            out[i] = v;
        }
        Ok(Self(out))
    }

    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.0[i]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl From<Vec<f64>> for PowerVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Channels offered to the solver. All gains are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelChannels {
    gains: Vec<f64>,
    target_bits: f64,
}

impl ParallelChannels {
    /// `target_bits` is the total mutual information to reach, i.e. the number
    /// of channels times the per-resource rate.
    pub fn new(gains: Vec<f64>, target_bits: f64) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("water-filling over an empty channel set"));
        }
        if gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid("channel gains must be positive and finite"));
        }
        if !(target_bits >= 0.0) || !target_bits.is_finite() {
            return Err(Error::invalid("rate target must be finite and nonnegative"));
        }
        Ok(Self { gains, target_bits })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn target_bits(&self) -> f64 {
        self.target_bits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// Aligned with the offered gains.
    pub powers: Vec<f64>,
    pub level: f64,
    pub active: Vec<bool>,
}

impl WaterFill {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }
}

pub fn waterfill(channels: &ParallelChannels) -> Result<WaterFill> {
    let g = channels.gains();
    let target = channels.target_bits();
    let inv: Vec<f64> = g.iter().map(|x| x.recip()).collect();

    if target == 0.0 {
        let level = inv.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(WaterFill { powers: vec![0.0; g.len()], level, active: vec![false; g.len()] });
    }

    let log_gain: Vec<f64> = g.iter().map(|x| x.log2()).collect();
    let mut active: Vec<usize> = (0..g.len()).collect();
    let level = loop {
        let k = active.len() as f64;
        let log_level = (target - active.iter().map(|&i| log_gain[i]).sum::<f64>()) / k;
        let level = log_level.exp2();
        if !level.is_finite() {
            return Err(Error::Infeasible(format!("water level overflows for target {target} bits")));
        }
        let before = active.len();
        active.retain(|&i| level >= inv[i]);
        // The strongest channel always survives since the level is at least
        // the geometric mean of the active 1/g.
        if active.len() == before {
            break level;
        }
    };

    let mut powers = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    for &i in &active {
        powers[i] = (level - inv[i]).max(0.0);
        mask[i] = true;
    }
    Ok(WaterFill { powers, level, active: mask })
}

/// Minimum eMBB power reaching `rate` bit/s/Hz on average over the offered
/// frequencies. Channels with zero SNR get no power.
pub fn embb_power(embb_snr: &[f64], rate: f64) -> Result<Vec<f64>> {
    let target = rate * embb_snr.len() as f64;
    filtered_waterfill(embb_snr, target, "every eMBB channel has zero SNR")
}

/// Minimum URLLC power that lets the eMBB receiver decode and cancel the
/// URLLC stream. Zero under OMA, where no cancellation happens.
pub fn sic_power(scheme: AccessScheme, embb_power: &[f64], embb_snr: &[f64], rate: f64) -> Result<Vec<f64>> {
    if embb_power.len() != embb_snr.len() {
        return Err(Error::invalid("eMBB power and SNR lengths differ"));
    }
    match scheme {
        AccessScheme::Oma => Ok(vec![0.0; embb_power.len()]),
        AccessScheme::Noma => {
            let gains: Vec<f64> = embb_snr
                .iter()
                .zip(embb_power)
                .map(|(&g, &p)| g / (1.0 + g * p))
                .collect();
            let target = rate * gains.len() as f64;
            filtered_waterfill(&gains, target, "no URLLC frequency is visible at the eMBB receiver")
        }
    }
}

/// Interference seen on each URLLC frequency in the interference-limited
/// approximation: interference-free resources take the weakest nonzero
/// interference level.
pub fn interference_reference(embb_power: &[f64]) -> Result<Vec<f64>> {
    let floor = embb_power
        .iter()
        .copied()
        .filter(|p| *p > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(Error::UndefinedInterferenceLimited);
    }
    Ok(embb_power.iter().map(|&p| if p > 0.0 { p } else { floor }).collect())
}

/// URLLC power bound when eMBB interference dominates the noise: water-filling
/// with gains `1 / P_e(f)`.
pub fn il_power(embb_power: &[f64], rate: f64) -> Result<Vec<f64>> {
    let reference = interference_reference(embb_power)?;
    let gains: Vec<f64> = reference.iter().map(|p| p.recip()).collect();
    let target = rate * gains.len() as f64;
    Ok(waterfill(&ParallelChannels::new(gains, target)?)?.powers)
}

fn filtered_waterfill(gains: &[f64], target: f64, empty_msg: &str) -> Result<Vec<f64>> {
    if gains.is_empty() {
        return Err(Error::invalid("water-filling over an empty channel set"));
    }
    if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::invalid("channel gains must be finite and nonnegative"));
    }
    let usable: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if usable.is_empty() {
        return Err(Error::Infeasible(empty_msg.to_owned()));
    }
    let sub = ParallelChannels::new(usable.iter().map(|&i| gains[i]).collect(), target)?;
    let fill = waterfill(&sub)?;
    let mut out = vec![0.0; gains.len()];
    for (k, &i) in usable.iter().enumerate() {
        out[i] = fill.powers[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(gains: &[f64], p: &[f64]) -> f64 {
        gains.iter().zip(p).map(|(g, p)| (1.0 + g * p).log2()).sum()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12 * (1.0 + y.abs()))
    }

    #[test]
    fn single_channel() {
        let w = waterfill(&ParallelChannels::new(vec![1.0], 1.0).unwrap()).unwrap();
        assert!(close(&w.powers, &[1.0]));
    }

    #[test]
    fn symmetric_pair() {
        let w = waterfill(&ParallelChannels::new(vec![1.0, 1.0], 2.0).unwrap()).unwrap();
        assert!(close(&w.powers, &[1.0, 1.0]));
    }

    #[test]
    fn weak_channel_is_excluded() {
        let w = waterfill(&ParallelChannels::new(vec![1.0, 0.1], 2.0).unwrap()).unwrap();
        assert!(close(&w.powers, &[3.0, 0.0]), "{:?}", w.powers);
        assert!((w.level - 4.0).abs() < 1e-12);
        assert_eq!(w.active, vec![true, false]);
    }

    #[test]
    fn empty_set_is_rejected() {
        assert!(ParallelChannels::new(vec![], 1.0).is_err());
        assert!(ParallelChannels::new(vec![0.0], 1.0).is_err());
    }

    #[test]
    fn huge_dynamic_range_stays_finite() {
        let gains = vec![1e-9, 1e10, 3e2, 7e-4, 1e9, 2.0];
        let w = waterfill(&ParallelChannels::new(gains.clone(), 30.0).unwrap()).unwrap();
        assert!(w.powers.iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((bits(&gains, &w.powers) - 30.0).abs() < 1e-9 * 30.0);
    }

    #[test]
    fn embb_examples() {
        assert!(close(&embb_power(&[1.0], 1.0).unwrap(), &[1.0]));
        // Zero-SNR channel is left out but still counts toward the target.
        let p = embb_power(&[0.0, 1.0], 0.5).unwrap();
        assert!(close(&p, &[0.0, 1.0]));
        assert!(matches!(embb_power(&[0.0, 0.0], 1.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn sic_examples() {
        let oma = sic_power(AccessScheme::Oma, &[3.0, 0.5], &[2.0, 9.0], 4.0).unwrap();
        assert_eq!(oma, vec![0.0, 0.0]);
        let one = sic_power(AccessScheme::Noma, &[0.0], &[1.0], 1.0).unwrap();
        assert!(close(&one, &[1.0]));
        // Effective gains 1/2 each, level 2 * 2 = 4, so 4 - 1 - 1 per channel.
        let two = sic_power(AccessScheme::Noma, &[1.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        assert!(close(&two, &[2.0, 2.0]), "{two:?}");
    }

    #[test]
    fn il_examples() {
        // Gains [1, 1/4], 2 bits: level 2 * sqrt(1 * 4) = 4 > 4 - 0 only on the first.
        let p = il_power(&[1.0, 4.0], 1.0).unwrap();
        assert!(close(&p, &[3.0, 0.0]), "{p:?}");
        let sym = il_power(&[0.2, 0.2, 0.2], 1.5).unwrap();
        assert!(sym.iter().all(|x| (x - sym[0]).abs() < 1e-15));
        assert!((sym[0] - 0.2 * (2f64.powf(1.5) - 1.0)).abs() < 1e-12);
        // Interference-free resource takes the smallest positive level.
        let sub = il_power(&[2.0, 0.0], 1.0).unwrap();
        assert!(close(&sub, &[2.0, 2.0]));
        assert!(matches!(il_power(&[0.0, 0.0], 1.0), Err(Error::UndefinedInterferenceLimited)));
    }

    #[test]
    fn scatter_gather() {
        let v = PowerVector::scatter(5, &[1, 3], &[2.0, 4.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 2.0, 0.0, 4.0, 0.0]);
        assert_eq!(v.gather(&[3, 1]), vec![4.0, 2.0]);
        assert!(PowerVector::scatter(2, &[2], &[1.0]).is_err());
    }
}
