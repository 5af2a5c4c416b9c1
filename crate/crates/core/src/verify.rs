//! Self-checks runnable from the command line. Each suite checks the
//! library against independent certificates (optimality conditions, closed
//! forms, known distances) at a scale that finishes in seconds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::alloc::{allocate_nbcd, allocate_nfea, AllocContext, BcdConfig, Scenario};
use crate::channel::{distance_from_mean_snr, ChannelState, Geometry};
use crate::error::{Error, Result};
use crate::grid::{AccessScheme, ResourceGrid, TrafficSpec};
use crate::outage::{estimate_outage, single_freq_power, CrnDraws, LazyOutageTable, TableAxes, TableParams};
use crate::rng;
use crate::units::db_to_linear;
use crate::waterfill::{waterfill, ParallelChannels};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Waterfill,
    Channel,
    Outage,
    Alloc,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waterfill" => Ok(Suite::Waterfill),
            "channel" => Ok(Suite::Channel),
            "outage" => Ok(Suite::Outage),
            "alloc" => Ok(Suite::Alloc),
            "all" => Ok(Suite::All),
            other => Err(Error::invalid(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_owned(), passed, detail }
}

pub fn run(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Waterfill | Suite::All) {
        out.extend(waterfill_suite(seed)?);
    }
    if matches!(suite, Suite::Channel | Suite::All) {
        out.extend(channel_suite()?);
    }
    if matches!(suite, Suite::Outage | Suite::All) {
        out.extend(outage_suite(seed)?);
    }
    if matches!(suite, Suite::Alloc | Suite::All) {
        out.extend(alloc_suite(seed)?);
    }
    Ok(out)
}

/// Checks the optimality conditions of water-filling on random instances:
/// active channels share one level, inactive ones sit above it, and the
/// rate constraint is tight.
fn waterfill_suite(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng::seeded(seed);
    let mut worst_level = 0.0f64;
    let mut worst_rate = 0.0f64;
    let mut inactive_ok = true;
    for _ in 0..500 {
        let n = r.random_range(1..=12);
        let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-3.0..3.0))).collect();
        let target = r.random_range(0.1..40.0);
        let wf = waterfill(&ParallelChannels::new(gains.clone(), target)?)?;
        let rate: f64 = gains.iter().zip(&wf.powers).map(|(g, p)| (1.0 + g * p).log2()).sum();
        worst_rate = worst_rate.max((rate - target).abs() / target);
        for (g, p) in gains.iter().zip(&wf.powers) {
            if *p > 0.0 {
                worst_level = worst_level.max(((p + 1.0 / g) - wf.level).abs() / wf.level);
            } else if 1.0 / g < wf.level * (1.0 - 1e-12) {
                inactive_ok = false;
            }
        }
    }
    Ok(vec![
        check("waterfill.common_level", worst_level < 1e-9, format!("max relative deviation {worst_level:.2e}")),
        check("waterfill.inactive_above_level", inactive_ok, "inactive channels have 1/g >= level".into()),
        check("waterfill.tight_rate", worst_rate < 1e-9, format!("max relative rate error {worst_rate:.2e}")),
    ])
}

fn channel_suite() -> Result<Vec<Check>> {
    let geom = Geometry::default();
    let noise = geom.noise_w();
    let expected = [(30.0, 464.56), (40.0, 261.2), (50.0, 146.9), (60.0, 82.6), (70.0, 46.5), (80.0, 26.1)];
    let mut worst = 0.0f64;
    for (db, d) in expected {
        worst = worst.max((distance_from_mean_snr(db_to_linear(db), &geom, noise) - d).abs());
    }
    let draws = crate::channel::sample_snr(5.0, 200_000, 3)?;
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    let se = 5.0 / (draws.len() as f64).sqrt();
    Ok(vec![
        check("channel.reference_distances", worst <= 0.5, format!("max error {worst:.3} m")),
        check("channel.rayleigh_mean", (m - 5.0).abs() < 4.0 * se, format!("sample mean {m:.4} vs 5")),
    ])
}

fn outage_suite(seed: u64) -> Result<Vec<Check>> {
    let mut r = rng::seeded(seed ^ 0x5eed);
    let eps = 1e-2;
    let trials = 100_000u64;
    let mut misses = Vec::new();
    for k in 0..10 {
        let mean = 10f64.powf(r.random_range(1.0..6.0));
        let rate = r.random_range(0.1..3.0);
        let pe = r.random_range(0.0..1e-2);
        let p = single_freq_power(rate, mean, eps, pe)?;
        let est = estimate_outage(&[p], &[pe], mean, rate, trials, rng::derive_seed(seed, &[k]))?;
        let sigma = (eps * (1.0 - eps) / trials as f64).sqrt();
        if (est.p_hat - eps).abs() > 3.0 * sigma {
            misses.push(format!("{:.3e}", est.p_hat));
        }
    }

    let crn = CrnDraws::new(4, 20_000, seed)?;
    let mut violations = 0;
    for _ in 0..30 {
        let pu: Vec<f64> = (0..4).map(|_| r.random_range(1e-4..1e-2)).collect();
        let pe: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1e-2)).collect();
        let base = crn.estimate(&pu, &pe, 1e3, 1.0)?.outages;
        for i in 0..4 {
            let mut lower = pu.clone();
            lower[i] *= 0.9;
            if crn.estimate(&lower, &pe, 1e3, 1.0)?.outages < base {
                violations += 1;
            }
        }
    }
    Ok(vec![
        check(
            "outage.single_frequency_closed_form",
            misses.len() <= 1,
            format!("{} of 10 estimates outside 3 sigma {:?}", misses.len(), misses),
        ),
        check("outage.crn_monotone", violations == 0, format!("{violations} violations")),
    ])
}

fn alloc_suite(seed: u64) -> Result<Vec<Check>> {
    let eps = 1e-2;
    let scenario = Scenario {
        grid: ResourceGrid::nr_default(),
        traffic: TrafficSpec::new(8640.0, 2160.0 / 7.0, eps, 7, 0)?,
        scheme: AccessScheme::Noma,
        urllc_freqs: 12,
        urllc_minislots: 1,
    };
    let mean_u = db_to_linear(50.0);
    let params = TableParams { mean_snr: mean_u, freqs: 12, rate: scenario.urllc_rate()?, minislots: 1, trials: 20_000, seed };
    let table = LazyOutageTable::new(params, TableAxes::uniform(-40.0, 30.0, 1.0)?)?;
    let crn = CrnDraws::new(12, 20_000, seed)?;
    let ctx = AllocContext { table: &table, crn: Some(&crn), bcd: BcdConfig::default(), evidence_trials: 100_000, seed };
    let (mut dominated, mut feasible, mut sic) = (0, 0, 0);
    let drops = 5;
    for d in 0..drops {
        let mut r = rng::stream(seed, &[rng::tag::EMBB_FADING, d]);
        let ch = ChannelState::draw(12, db_to_linear(50.0), mean_u, 1e-14, &mut r)?;
        let fea = allocate_nfea(&scenario, &ch, &ctx)?;
        let bcd = allocate_nbcd(&scenario, &ch, &ctx)?;
        dominated += usize::from(bcd.urllc_total_w <= fea.urllc_total_w);
        feasible += usize::from(fea.evidence.p_hat <= eps + fea.evidence.ci_halfwidth && bcd.evidence.p_hat <= eps + bcd.evidence.ci_halfwidth);
        sic += usize::from(fea.sic_satisfied && bcd.sic_satisfied);
    }
    Ok(vec![
        check("alloc.bcd_dominates", dominated == drops as usize, format!("{dominated}/{drops} drops")),
        check("alloc.feasible", feasible == drops as usize, format!("{feasible}/{drops} drops")),
        check("alloc.sic", sic == drops as usize, format!("{sic}/{drops} drops")),
    ])
}
