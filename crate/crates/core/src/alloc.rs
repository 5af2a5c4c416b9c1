//! URLLC allocators and the end-to-end allocation of one drop.
//!
//! The joint problem splits into three steps: pick the weakest eMBB
//! channels for URLLC, water-fill the eMBB user, then size the URLLC powers
//! against the outage target. The last step is done either from the outage
//! table with uniform powers ([`allocate_nfea`]) or by refining that answer
//! coordinate by coordinate ([`allocate_nbcd`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::grid::{build_resource_sets, select_urllc_frequencies, spectral_efficiency, AccessScheme, ResourceGrid, ResourceSets, TrafficSpec};
use crate::outage::{estimate_outage, mutual_info_e, mutual_info_sic, CrnDraws, OutageEstimate, OutageLookup};
use crate::rng;
use crate::units::dbm_to_watts;
use crate::waterfill::{embb_power, sic_power, PowerVector};

/// Relative slack on the SIC rate check.
const SIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Table look-up with uniform URLLC power.
    Feasible,
    /// Block coordinate descent started from the table answer.
    Bcd,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Feasible => "fea",
            Algorithm::Bcd => "bcd",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fea" | "feasible" | "n-fea" => Ok(Algorithm::Feasible),
            "bcd" | "n-bcd" => Ok(Algorithm::Bcd),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Static description of one allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: ResourceGrid,
    pub traffic: TrafficSpec,
    pub scheme: AccessScheme,
    /// Number of frequencies reserved for URLLC.
    pub urllc_freqs: usize,
    /// Mini-slots spanned by the URLLC packet.
    pub urllc_minislots: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        let f = self.grid.frequencies();
        if self.urllc_freqs == 0 || self.urllc_freqs > f {
            return Err(Error::invalid(format!("URLLC frequency count {} not in [1, {f}]", self.urllc_freqs)));
        }
        if self.scheme == AccessScheme::Oma && self.urllc_freqs == f {
            return Err(Error::invalid("OMA cannot reserve every frequency for URLLC"));
        }
        if self.urllc_minislots == 0 {
            return Err(Error::invalid("URLLC needs at least one mini-slot"));
        }
        Ok(())
    }

    pub fn embb_freqs(&self) -> usize {
        match self.scheme {
            AccessScheme::Noma => self.grid.frequencies(),
            AccessScheme::Oma => self.grid.frequencies() - self.urllc_freqs,
        }
    }

    pub fn embb_rate(&self) -> Result<f64> {
        spectral_efficiency(self.traffic.embb_bits, &self.grid, self.embb_freqs(), self.grid.minislots())
    }

    pub fn urllc_rate(&self) -> Result<f64> {
        spectral_efficiency(self.traffic.urllc_bits, &self.grid, self.urllc_freqs, self.urllc_minislots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcdConfig {
    /// Initial step as a fraction of the largest table power.
    pub step0_fraction: f64,
    /// Stop once the step falls to this many watts.
    pub threshold_w: f64,
    /// Rows of the common-random-number matrix.
    pub crn_trials: usize,
}

impl Default for BcdConfig {
    fn default() -> Self {
        Self { step0_fraction: 0.1, threshold_w: 1e-7, crn_trials: 1_000_000 }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0_fraction > 0.0) || !(self.threshold_w > 0.0) || self.crn_trials == 0 {
            return Err(Error::invalid("BCD needs a positive step, threshold and draw count"));
        }
        Ok(())
    }
}

/// One completed BCD sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcdStep {
    /// Step size used during the sweep [W].
    pub step_w: f64,
    /// URLLC power per mRB summed over frequencies after the sweep [W].
    pub urllc_w: f64,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub algorithm: Algorithm,
    pub sets: ResourceSets,
    pub embb_rate: f64,
    pub urllc_rate: f64,
    pub urllc_mean_snr: f64,
    /// eMBB power per mRB on each grid frequency [W].
    pub embb_power: PowerVector,
    /// URLLC power per mRB on each grid frequency [W].
    pub urllc_power: PowerVector,
    /// SIC floor per grid frequency [W]; zero under OMA.
    pub sic_power: PowerVector,
    /// Grid power chosen from the table [dBm].
    pub table_power_dbm: f64,
    /// eMBB energy over the slot: per-mRB power times mini-slots [W].
    pub embb_total_w: f64,
    pub urllc_total_w: f64,
    pub total_w: f64,
    /// Independent outage estimate at the final powers.
    pub evidence: OutageEstimate,
    pub sic_satisfied: bool,
    pub iterations: usize,
    pub trace: Vec<BcdStep>,
}

impl AllocationResult {
    /// URLLC power summed over the reserved frequencies, per mini-slot [W].
    pub fn urllc_per_minislot_w(&self) -> f64 {
        self.urllc_power.total()
    }

    pub fn sic_per_minislot_w(&self) -> f64 {
        self.sic_power.total()
    }
}

/// Everything an allocation needs besides the scenario and the channel.
#[derive(Clone, Copy)]
pub struct AllocContext<'a> {
    pub table: &'a dyn OutageLookup,
    /// Draw matrix for BCD; built from `seed` when absent.
    pub crn: Option<&'a CrnDraws>,
    pub bcd: BcdConfig,
    pub evidence_trials: u64,
    pub seed: u64,
}

/// Stages shared by both URLLC allocators.
struct Prepared {
    sets: ResourceSets,
    embb_rate: f64,
    urllc_rate: f64,
    embb: PowerVector,
    sic: PowerVector,
    /// eMBB power on each URLLC frequency.
    embb_on_u: Vec<f64>,
    sic_on_u: Vec<f64>,
}

fn prepare(scenario: &Scenario, channel: &ChannelState) -> Result<Prepared> {
    scenario.validate()?;
    let f = scenario.grid.frequencies();
    if channel.embb_snr.len() != f {
        return Err(Error::invalid(format!("channel has {} SNRs for {f} frequencies", channel.embb_snr.len())));
    }
    let fu = select_urllc_frequencies(&channel.embb_snr, scenario.urllc_freqs)?;
    let sets = build_resource_sets(scenario.scheme, &scenario.grid, &fu, scenario.urllc_minislots, &scenario.traffic)?;
    let embb_rate = scenario.embb_rate()?;
    let urllc_rate = scenario.urllc_rate()?;

    let snr_e: Vec<f64> = sets.embb_freqs.iter().map(|&i| channel.embb_snr[i]).collect();
    let pe = embb_power(&snr_e, embb_rate)?;
    let embb = PowerVector::scatter(f, &sets.embb_freqs, &pe)?;

    let embb_on_u = embb.gather(&sets.urllc_freqs);
    let snr_u: Vec<f64> = sets.urllc_freqs.iter().map(|&i| channel.embb_snr[i]).collect();
    let sic_on_u = sic_power(scenario.scheme, &embb_on_u, &snr_u, urllc_rate)?;
    let sic = PowerVector::scatter(f, &sets.urllc_freqs, &sic_on_u)?;
    Ok(Prepared { sets, embb_rate, urllc_rate, embb, sic, embb_on_u, sic_on_u })
}

fn check_table(table: &dyn OutageLookup, channel: &ChannelState, prepared: &Prepared) -> Result<()> {
    let p = table.params();
    let (freqs, rate) = (prepared.sets.urllc_freqs.len(), prepared.urllc_rate);
    if !p.matches(channel.urllc_mean_snr, freqs, rate) {
        return Err(Error::TableMismatch(format!(
            "table is for mean SNR {:e}, {} frequencies, rate {}; need {:e}, {freqs}, {rate}",
            p.mean_snr, p.freqs, p.rate, channel.urllc_mean_snr
        )));
    }
    Ok(())
}

/// Table answer: uniform power for the strongest interference on the URLLC
/// set, lifted to the SIC floor where needed.
fn nfea_powers(table: &dyn OutageLookup, epsilon: f64, prepared: &Prepared) -> Result<(f64, Vec<f64>)> {
    let worst = prepared.embb_on_u.iter().copied().fold(0.0, f64::max);
    let dbm = table.min_feasible_power(worst, epsilon)?;
    let uniform = dbm_to_watts(dbm);
    Ok((dbm, prepared.sic_on_u.iter().map(|&s| s.max(uniform)).collect()))
}

fn finish(
    algorithm: Algorithm,
    scenario: &Scenario,
    channel: &ChannelState,
    ctx: &AllocContext<'_>,
    prepared: Prepared,
    table_power_dbm: f64,
    pu: Vec<f64>,
    trace: Vec<BcdStep>,
) -> Result<AllocationResult> {
    let f = scenario.grid.frequencies();
    let sets = prepared.sets;
    let urllc = PowerVector::scatter(f, &sets.urllc_freqs, &pu)?;

    let evidence = estimate_outage(
        &pu,
        &prepared.embb_on_u,
        channel.urllc_mean_snr,
        prepared.urllc_rate,
        ctx.evidence_trials,
        rng::derive_seed(ctx.seed, &[rng::tag::EVIDENCE]),
    )?;

    let sic_satisfied = match scenario.scheme {
        AccessScheme::Oma => true,
        AccessScheme::Noma => {
            let snr_u: Vec<f64> = sets.urllc_freqs.iter().map(|&i| channel.embb_snr[i]).collect();
            let info = mutual_info_sic(scenario.scheme, &pu, &prepared.embb_on_u, &snr_u)?;
            info >= prepared.urllc_rate * (1.0 - SIC_TOLERANCE)
        }
    };

    let m = sets.embb_minislot_count() as f64;
    let mu = sets.urllc_minislot_count() as f64;
    let embb_total_w = m * prepared.embb.total();
    let urllc_total_w = mu * urllc.total();
    Ok(AllocationResult {
        algorithm,
        embb_rate: prepared.embb_rate,
        urllc_rate: prepared.urllc_rate,
        urllc_mean_snr: channel.urllc_mean_snr,
        embb_power: prepared.embb,
        urllc_power: urllc,
        sic_power: prepared.sic,
        table_power_dbm,
        embb_total_w,
        urllc_total_w,
        total_w: embb_total_w + urllc_total_w,
        evidence,
        sic_satisfied,
        iterations: trace.len(),
        trace,
        sets,
    })
}

/// Table-based allocation with the same power on every URLLC frequency,
/// sized for the strongest eMBB interference among them.
pub fn allocate_nfea(scenario: &Scenario, channel: &ChannelState, ctx: &AllocContext<'_>) -> Result<AllocationResult> {
    let prepared = prepare(scenario, channel)?;
    check_table(ctx.table, channel, &prepared)?;
    let (dbm, pu) = nfea_powers(ctx.table, scenario.traffic.epsilon, &prepared)?;
    finish(Algorithm::Feasible, scenario, channel, ctx, prepared, dbm, pu, Vec::new())
}

/// Coordinate-wise descent from the table answer. A move is kept only if
/// the estimate on the shared draw matrix stays below the target with its
/// confidence margin.
pub fn allocate_nbcd(scenario: &Scenario, channel: &ChannelState, ctx: &AllocContext<'_>) -> Result<AllocationResult> {
    ctx.bcd.validate()?;
    let prepared = prepare(scenario, channel)?;
    check_table(ctx.table, channel, &prepared)?;
    let (dbm, start) = nfea_powers(ctx.table, scenario.traffic.epsilon, &prepared)?;

    let freqs = start.len();
    let owned;
    let crn = match ctx.crn {
        Some(c) => c,
        None => {
            owned = CrnDraws::new(freqs, ctx.bcd.crn_trials, ctx.seed)?;
            &owned
        }
    };
    let (pu, trace) = descend(
        start,
        &prepared.sic_on_u,
        &prepared.embb_on_u,
        crn,
        channel.urllc_mean_snr,
        prepared.urllc_rate,
        scenario.traffic.epsilon,
        &ctx.bcd,
    )?;
    finish(Algorithm::Bcd, scenario, channel, ctx, prepared, dbm, pu, trace)
}

/// The descent loop on the URLLC frequencies. Exposed for testing against
/// hand-built starting points.
#[allow(clippy::too_many_arguments)]
pub fn descend(
    mut pu: Vec<f64>,
    sic: &[f64],
    embb_on_u: &[f64],
    crn: &CrnDraws,
    mean_snr: f64,
    rate: f64,
    epsilon: f64,
    cfg: &BcdConfig,
) -> Result<(Vec<f64>, Vec<BcdStep>)> {
    if pu.len() != sic.len() || pu.len() != embb_on_u.len() {
        return Err(Error::invalid("BCD vectors must be aligned"));
    }
    let accept = |p: &[f64]| -> Result<bool> {
        let e = crn.estimate(p, embb_on_u, mean_snr, rate)?;
        Ok(e.upper() <= epsilon)
    };

    let mut step = cfg.step0_fraction * pu.iter().copied().fold(0.0, f64::max);
    let mut active: Vec<usize> = (0..pu.len()).filter(|&i| pu[i] > sic[i]).collect();
    let mut trace = Vec::new();
    while step > cfg.threshold_w && !active.is_empty() {
        let mut changed = false;
        for &i in &active {
            let old = pu[i];
            let candidate = sic[i].max(old - step);
            if candidate >= old {
                continue;
            }
            pu[i] = candidate;
            if accept(&pu)? {
                changed = true;
            } else {
                pu[i] = old;
            }
        }
        active.retain(|&i| pu[i] > sic[i]);
        trace.push(BcdStep { step_w: step, urllc_w: pu.iter().sum(), changed });
        if !changed {
            step /= 2.0;
        }
    }
    Ok((pu, trace))
}

/// Runs the full pipeline for one drop.
pub fn allocate(
    scenario: &Scenario,
    channel: &ChannelState,
    algorithm: Algorithm,
    ctx: &AllocContext<'_>,
) -> Result<AllocationResult> {
    match algorithm {
        Algorithm::Feasible => allocate_nfea(scenario, channel, ctx),
        Algorithm::Bcd => allocate_nbcd(scenario, channel, ctx),
    }
}

/// eMBB power on each grid frequency for a scenario, without touching URLLC.
pub fn embb_allocation(scenario: &Scenario, channel: &ChannelState) -> Result<(ResourceSets, PowerVector)> {
    let p = prepare(scenario, channel)?;
    Ok((p.sets, p.embb))
}

/// eMBB mutual information achieved by a result, over its eMBB set.
pub fn embb_mutual_info(result: &AllocationResult, channel: &ChannelState) -> Result<f64> {
    let pe = result.embb_power.gather(&result.sets.embb_freqs);
    let snr: Vec<f64> = result.sets.embb_freqs.iter().map(|&i| channel.embb_snr[i]).collect();
    mutual_info_e(&pe, &snr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::{LazyOutageTable, TableAxes, TableParams};

    fn scenario(scheme: AccessScheme, fu: usize, eps: f64) -> Scenario {
        Scenario {
            grid: ResourceGrid::nr_default(),
            traffic: TrafficSpec::new(8640.0, 2160.0 / 7.0, eps, 7, 0).unwrap(),
            scheme,
            urllc_freqs: fu,
            urllc_minislots: 1,
        }
    }

    fn channel(seed: u64, embb_db: f64, urllc_db: f64) -> ChannelState {
        let mut r = rng::seeded(seed);
        ChannelState::draw(12, 10f64.powf(embb_db / 10.0), 10f64.powf(urllc_db / 10.0), 1e-14, &mut r).unwrap()
    }

    fn table(s: &Scenario, ch: &ChannelState) -> LazyOutageTable {
        let params = TableParams {
            mean_snr: ch.urllc_mean_snr,
            freqs: s.urllc_freqs,
            rate: s.urllc_rate().unwrap(),
            minislots: 1,
            trials: 20_000,
            seed: 5,
        };
        LazyOutageTable::new(params, TableAxes::uniform(-40.0, 40.0, 1.0).unwrap()).unwrap()
    }

    fn ctx<'a>(t: &'a LazyOutageTable) -> AllocContext<'a> {
        AllocContext {
            table: t,
            crn: None,
            bcd: BcdConfig { crn_trials: 20_000, ..BcdConfig::default() },
            evidence_trials: 20_000,
            seed: 9,
        }
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("bcd".parse::<Algorithm>().unwrap(), Algorithm::Bcd);
        assert_eq!("N-fea".parse::<Algorithm>().unwrap(), Algorithm::Feasible);
        assert!("x".parse::<Algorithm>().is_err());
    }

    #[test]
    fn oma_is_uniform_and_orthogonal() {
        let s = scenario(AccessScheme::Oma, 3, 1e-2);
        let ch = channel(1, 50.0, 40.0);
        let t = table(&s, &ch);
        let r = allocate_nfea(&s, &ch, &ctx(&t)).unwrap();
        let pu = r.urllc_power.gather(&r.sets.urllc_freqs);
        assert!(pu.windows(2).all(|w| w[0] == w[1]));
        for (a, b) in r.urllc_power.as_slice().iter().zip(r.embb_power.as_slice()) {
            assert_eq!(a * b, 0.0);
        }
        assert!(r.sic_satisfied);
        assert!(embb_mutual_info(&r, &ch).unwrap() >= r.embb_rate * (1.0 - 1e-9));
    }

    #[test]
    fn noma_bcd_dominates_fea() {
        let s = scenario(AccessScheme::Noma, 12, 1e-2);
        for seed in 0..4 {
            let ch = channel(seed, 50.0, 45.0);
            let t = table(&s, &ch);
            let c = ctx(&t);
            let fea = allocate_nfea(&s, &ch, &c).unwrap();
            let bcd = allocate_nbcd(&s, &ch, &c).unwrap();
            assert!(bcd.urllc_total_w <= fea.urllc_total_w);
            assert!(fea.sic_satisfied && bcd.sic_satisfied);
            for (u, f) in bcd.urllc_power.as_slice().iter().zip(bcd.sic_power.as_slice()) {
                assert!(u >= f);
            }
            assert!(bcd.trace.windows(2).all(|w| w[1].urllc_w <= w[0].urllc_w && w[1].step_w <= w[0].step_w));
        }
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let s = scenario(AccessScheme::Oma, 3, 1e-2);
        let ch = channel(1, 50.0, 40.0);
        let other = channel(1, 50.0, 41.0);
        let t = table(&s, &other);
        assert!(matches!(allocate_nfea(&s, &ch, &ctx(&t)), Err(Error::TableMismatch(_))));
    }

    #[test]
    fn pinned_start_is_returned_unchanged() {
        let crn = CrnDraws::new(3, 1000, 1).unwrap();
        let sic = vec![1.0, 2.0, 3.0];
        let (pu, trace) = descend(sic.clone(), &sic, &[0.0; 3], &crn, 1e3, 1.0, 0.5, &BcdConfig::default()).unwrap();
        assert_eq!(pu, sic);
        assert!(trace.is_empty());
    }

    #[test]
    fn oma_single_frequency_matches_closed_form() {
        let (mean, rate, eps) = (1e4, 1.0, 1e-2);
        let exact = crate::outage::single_freq_power(rate, mean, eps, 0.0).unwrap();
        let crn = CrnDraws::new(1, 200_000, 4).unwrap();
        let cfg = BcdConfig { threshold_w: 1e-9, ..BcdConfig::default() };
        let (pu, _) = descend(vec![3.0 * exact], &[0.0], &[0.0], &crn, mean, rate, eps, &cfg).unwrap();
        // The margin keeps the answer slightly above the exact power.
        assert!(pu[0] >= exact * 0.9 && pu[0] <= exact * 1.25, "{} vs {exact}", pu[0]);
    }
}
