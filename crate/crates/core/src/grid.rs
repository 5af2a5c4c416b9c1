//! Time-frequency resource grid, traffic-to-rate conversion and the
//! resource sets handed to each user.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One slot of `frequencies` x `minislots` mini resource blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceGrid {
    frequencies: usize,
    minislots: usize,
    bandwidth_hz: f64,
    slot_s: f64,
}

impl ResourceGrid {
    pub fn new(frequencies: usize, minislots: usize, bandwidth_hz: f64, slot_s: f64) -> Result<Self> {
        if frequencies == 0 || minislots == 0 {
            return Err(Error::invalid("grid needs at least one frequency and one mini-slot"));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) || !(slot_s > 0.0 && slot_s.is_finite()) {
            return Err(Error::invalid("bandwidth and slot duration must be positive"));
        }
        Ok(Self { frequencies, minislots, bandwidth_hz, slot_s })
    }

    /// 12 x 7 grid, 1 ms slot, 180 kHz resources.
    pub fn nr_default() -> Self {
        Self { frequencies: 12, minislots: 7, bandwidth_hz: 180e3, slot_s: 1e-3 }
    }

    pub fn frequencies(&self) -> usize {
        self.frequencies
    }

    pub fn minislots(&self) -> usize {
        self.minislots
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_s
    }

    pub fn minislot_s(&self) -> f64 {
        self.slot_s / self.minislots as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    /// eMBB payload per slot [bit].
    pub embb_bits: f64,
    /// URLLC packet size [bit].
    pub urllc_bits: f64,
    /// URLLC outage target.
    pub epsilon: f64,
    /// Latency budget in mini-slots.
    pub max_latency: usize,
    /// Mini-slots already spent waiting.
    pub waited: usize,
}

impl TrafficSpec {
    pub fn new(embb_bits: f64, urllc_bits: f64, epsilon: f64, max_latency: usize, waited: usize) -> Result<Self> {
        let spec = Self { embb_bits, urllc_bits, epsilon, max_latency, waited };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks payloads, reliability and budget. The waiting time is checked
    /// against the budget when the mini-slot window is built.
    pub fn validate(&self) -> Result<()> {
        if !(self.embb_bits > 0.0) || !(self.urllc_bits > 0.0) {
            return Err(Error::invalid("payload sizes must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("outage target {} not in (0, 1)", self.epsilon)));
        }
        if self.max_latency == 0 {
            return Err(Error::invalid("latency budget must be at least one mini-slot"));
        }
        Ok(())
    }

    /// Mini-slots still usable for the URLLC transmission.
    pub fn latency_room(&self) -> usize {
        self.max_latency.saturating_sub(self.waited)
    }
}

/// Average spectral efficiency per resource, `bits / (T_m * df * F_i * M_i)`.
pub fn spectral_efficiency(bits: f64, grid: &ResourceGrid, n_freq: usize, n_minislots: usize) -> Result<f64> {
    if n_freq == 0 || n_minislots == 0 {
        return Err(Error::invalid("resource counts must be at least one"));
    }
    if !(bits > 0.0) || !bits.is_finite() {
        return Err(Error::invalid("payload must be positive"));
    }
    Ok(bits / (grid.minislot_s() * grid.bandwidth_hz() * n_freq as f64 * n_minislots as f64))
}

/// Indices of the `count` weakest eMBB channels, ascending. Ties go to the
/// lower index.
pub fn select_urllc_frequencies(embb_snr: &[f64], count: usize) -> Result<Vec<usize>> {
    if count > embb_snr.len() {
        return Err(Error::invalid(format!(
            "cannot reserve {count} of {} frequencies",
            embb_snr.len()
        )));
    }
    if embb_snr.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::invalid("SNR entries must be nonnegative"));
    }
    let mut order: Vec<usize> = (0..embb_snr.len()).collect();
    // Stable sort keeps index order among equal SNRs.
    order.sort_by(|&a, &b| embb_snr[a].total_cmp(&embb_snr[b]));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessScheme {
    Oma,
    Noma,
}

impl fmt::Display for AccessScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessScheme::Oma => "oma",
            AccessScheme::Noma => "noma",
        })
    }
}

impl FromStr for AccessScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oma" => Ok(AccessScheme::Oma),
            "noma" => Ok(AccessScheme::Noma),
            other => Err(Error::invalid(format!("unknown access scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSets {
    pub scheme: AccessScheme,
    /// URLLC frequencies, ascending.
    pub urllc_freqs: Vec<usize>,
    /// eMBB frequencies, ascending.
    pub embb_freqs: Vec<usize>,
    /// Contiguous URLLC mini-slot window.
    pub urllc_minislots: Range<usize>,
    /// eMBB always owns the whole slot.
    pub embb_minislots: Range<usize>,
}

impl ResourceSets {
    pub fn urllc_minislot_count(&self) -> usize {
        self.urllc_minislots.len()
    }

    pub fn embb_minislot_count(&self) -> usize {
        self.embb_minislots.len()
    }
}

/// Builds the resource sets for a given URLLC frequency reservation. The
/// mini-slot window is the earliest admissible one, starting right after
/// the waiting time.
pub fn build_resource_sets(
    scheme: AccessScheme,
    grid: &ResourceGrid,
    urllc_freqs: &[usize],
    urllc_minislots: usize,
    traffic: &TrafficSpec,
) -> Result<ResourceSets> {
    let f = grid.frequencies();
    let mut fu = urllc_freqs.to_vec();
    fu.sort_unstable();
    fu.dedup();
    if fu.len() != urllc_freqs.len() {
        return Err(Error::invalid("duplicate URLLC frequency"));
    }
    if fu.iter().any(|&i| i >= f) {
        return Err(Error::invalid("URLLC frequency outside the grid"));
    }
    if urllc_minislots == 0 {
        return Err(Error::invalid("URLLC needs at least one mini-slot"));
    }

    let budget = traffic.max_latency.min(grid.minislots());
    let available = budget.saturating_sub(traffic.waited);
    if urllc_minislots > available {
        return Err(Error::InfeasibleLatency {
            requested: urllc_minislots,
            available,
            budget: traffic.max_latency,
            waited: traffic.waited,
        });
    }
    let start = traffic.waited;

    let embb_freqs = match scheme {
        AccessScheme::Noma => (0..f).collect(),
        AccessScheme::Oma => (0..f).filter(|i| fu.binary_search(i).is_err()).collect(),
    };

    Ok(ResourceSets {
        scheme,
        urllc_freqs: fu,
        embb_freqs,
        urllc_minislots: start..start + urllc_minislots,
        embb_minislots: 0..grid.minislots(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traffic(max_latency: usize, waited: usize) -> TrafficSpec {
        TrafficSpec { embb_bits: 8640.0, urllc_bits: 2160.0 / 7.0, epsilon: 1e-5, max_latency, waited }
    }

    #[test]
    fn default_rates() {
        let g = ResourceGrid::nr_default();
        let ru = spectral_efficiency(2160.0 / 7.0, &g, 12, 1).unwrap();
        let re = spectral_efficiency(8640.0, &g, 12, 7).unwrap();
        assert!((ru - 1.0).abs() < 1e-12);
        assert!((re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rate_halves_when_minislots_double() {
        let g = ResourceGrid::nr_default();
        let one = spectral_efficiency(1000.0, &g, 3, 2).unwrap();
        let two = spectral_efficiency(1000.0, &g, 3, 4).unwrap();
        assert!((one / two - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_efficiency_rejects_zero_counts() {
        let g = ResourceGrid::nr_default();
        assert!(spectral_efficiency(10.0, &g, 0, 1).is_err());
        assert!(spectral_efficiency(10.0, &g, 1, 0).is_err());
        assert!(spectral_efficiency(0.0, &g, 1, 1).is_err());
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_urllc_frequencies(&[3.0, 1.0, 2.0], 1).unwrap(), vec![1]);
        assert_eq!(select_urllc_frequencies(&[3.0, 1.0, 2.0], 2).unwrap(), vec![1, 2]);
        assert_eq!(select_urllc_frequencies(&[5.0, 5.0, 5.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(select_urllc_frequencies(&[5.0, 5.0], 0).unwrap(), Vec::<usize>::new());
        assert!(select_urllc_frequencies(&[1.0], 2).is_err());
    }

    #[test]
    fn noma_uses_whole_band() {
        let g = ResourceGrid::nr_default();
        let fu: Vec<usize> = (0..12).collect();
        let sets = build_resource_sets(AccessScheme::Noma, &g, &fu, 1, &traffic(7, 0)).unwrap();
        assert_eq!(sets.urllc_freqs, fu);
        assert_eq!(sets.embb_freqs, fu);
        assert_eq!(sets.embb_minislots, 0..7);
    }

    #[test]
    fn oma_partitions_band() {
        let g = ResourceGrid::new(6, 4, 180e3, 1e-3).unwrap();
        let sets = build_resource_sets(AccessScheme::Oma, &g, &[1, 3, 5], 1, &traffic(4, 0)).unwrap();
        assert_eq!(sets.embb_freqs, vec![0, 2, 4]);
    }

    #[test]
    fn window_starts_after_wait() {
        let g = ResourceGrid::nr_default();
        let sets = build_resource_sets(AccessScheme::Oma, &g, &[0], 3, &traffic(7, 2)).unwrap();
        assert_eq!(sets.urllc_minislots, 2..5);
        assert!(build_resource_sets(AccessScheme::Oma, &g, &[0], 6, &traffic(7, 2)).is_err());
    }

    #[test]
    fn exhausted_budget_is_infeasible() {
        let g = ResourceGrid::nr_default();
        let err = build_resource_sets(AccessScheme::Noma, &g, &[0], 1, &traffic(7, 7)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleLatency { available: 0, .. }));
    }

    #[test]
    fn grid_validation() {
        assert!(ResourceGrid::new(0, 7, 1.0, 1.0).is_err());
        assert!(ResourceGrid::new(1, 1, -1.0, 1.0).is_err());
        let g = ResourceGrid::nr_default();
        assert!((g.minislot_s() * g.minislots() as f64 - g.slot_s()).abs() < 1e-18);
    }
}
