//! Monte Carlo sweeps over user positions and the CSV files they produce.
//!
//! Output files (all optional, only written when there is data for them):
//!
//! * `records.csv`: one row per (point, scheme, algorithm) with mean powers
//!   and outage evidence, see [`SweepRecord`].
//! * `embb_power.csv`: mean eMBB power per (eMBB position, scheme).
//! * `outage_curves.csv`: tabulated outage against uniform power.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, SchemeSpec, SweepPoint};
use crate::alloc::{allocate, embb_allocation, AllocContext, Algorithm, AllocationResult, Scenario};
use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::grid::{spectral_efficiency, AccessScheme};
use crate::outage::{CrnDraws, LazyOutageTable, OutageLookup, OutageTable, TableParams};
use crate::rng;
use crate::units::{linear_to_db, watts_to_dbm};
use crate::waterfill::il_power;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scheme: String,
    pub algorithm: String,
    pub urllc_distance_m: f64,
    pub embb_distance_m: f64,
    pub urllc_snr_db: f64,
    pub embb_snr_db: f64,
    /// Drops that produced an allocation.
    pub drops: usize,
    pub failed_drops: usize,
    pub mean_total_dbm: Option<f64>,
    pub mean_urllc_dbm: Option<f64>,
    pub mean_embb_dbm: Option<f64>,
    /// SIC floor summed over URLLC frequencies (NOMA only).
    pub mean_sic_dbm: Option<f64>,
    /// Interference-limited bound (NOMA only, drops where it is defined).
    pub mean_il_dbm: Option<f64>,
    pub mean_p_hat: Option<f64>,
    pub max_p_hat: Option<f64>,
    pub mean_iterations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbbPowerRecord {
    pub scheme: String,
    pub embb_distance_m: f64,
    pub embb_snr_db: f64,
    pub drops: usize,
    pub mean_embb_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCurveRecord {
    pub minislots: usize,
    pub rate: f64,
    pub interference_dbm: String,
    pub power_dbm: f64,
    pub p_hat: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub embb: Vec<EmbbPowerRecord>,
    pub curves: Vec<OutageCurveRecord>,
    pub files: Vec<PathBuf>,
}

/// File name of a prebuilt table for the given parameters.
pub fn table_file_name(mean_snr: f64, freqs: usize, rate: f64) -> String {
    format!("outage_g{:.2}dB_f{freqs}_r{rate:.4}.nsot", linear_to_db(mean_snr))
}

type TableKey = (u64, usize, u64);

/// Tables and draw matrices shared by all drops of a sweep.
pub struct Resources<'a> {
    cfg: &'a ScenarioConfig,
    tables: Mutex<HashMap<TableKey, Arc<dyn OutageLookup + Send>>>,
    crn: HashMap<usize, CrnDraws>,
}

impl<'a> Resources<'a> {
    /// Builds the draw matrices up front for every URLLC frequency count in
    /// `freq_counts` when BCD is requested.
    pub fn new(cfg: &'a ScenarioConfig, freq_counts: &[usize]) -> Result<Self> {
        let mut crn = HashMap::new();
        if cfg.algorithms.contains(&Algorithm::Bcd) {
            for &f in freq_counts {
                if !crn.contains_key(&f) {
                    crn.insert(f, CrnDraws::new(f, cfg.bcd.crn_trials, cfg.seed)?);
                }
            }
        }
        Ok(Self { cfg, tables: Mutex::new(HashMap::new()), crn })
    }

    pub fn table(&self, mean_snr: f64, freqs: usize, rate: f64, minislots: usize) -> Result<Arc<dyn OutageLookup + Send>> {
        let key = (mean_snr.to_bits(), freqs, rate.to_bits());
        let mut tables = self.tables.lock().expect("table cache poisoned");
        if let Some(t) = tables.get(&key) {
            return Ok(t.clone());
        }
        let cfg = &self.cfg.table;
        let name = table_file_name(mean_snr, freqs, rate);
        let from_disk = cfg.dir.as_ref().map(|d| d.join(&name)).filter(|p| p.exists());
        let table: Arc<dyn OutageLookup + Send> = match from_disk {
            Some(path) => {
                let t = OutageTable::load(&path)?;
                if !t.params.matches(mean_snr, freqs, rate) {
                    return Err(Error::TableMismatch(format!("{} has different parameters", path.display())));
                }
                Arc::new(t)
            }
            None if cfg.auto_build => {
                let params = TableParams { mean_snr, freqs, rate, minislots, trials: cfg.trials, seed: self.cfg.seed };
                Arc::new(LazyOutageTable::new(params, cfg.axes()?)?)
            }
            None => {
                let path = cfg.dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(&name);
                return Err(Error::Config(format!(
                    "missing outage table {p}; build it with `noma-slice table build --snr-db {g} --fu {freqs} --rate {rate} --trials {t} --seed {s} --out {p}` or set table.auto_build = true",
                    p = path.display(),
                    g = linear_to_db(mean_snr),
                    t = cfg.trials,
                    s = self.cfg.seed,
                )));
            }
        };
        tables.insert(key, table.clone());
        Ok(table)
    }

    pub fn crn(&self, freqs: usize) -> Option<&CrnDraws> {
        self.crn.get(&freqs)
    }
}

/// Outcome of one (scheme, algorithm) allocation on one drop.
#[derive(Debug, Clone, Copy)]
struct DropOutcome {
    total_w: f64,
    urllc_w: f64,
    embb_w: f64,
    sic_w: f64,
    il_w: Option<f64>,
    p_hat: f64,
    iterations: usize,
}

/// Fading realization of drop `drop` for an eMBB user with mean SNR
/// `embb_mean_snr`. Independent of the URLLC position so eMBB results can be
/// compared across URLLC distances.
pub fn drop_channel(cfg: &ScenarioConfig, point: &SweepPoint, drop: usize) -> Result<ChannelState> {
    let mut r = rng::stream(cfg.seed, &[rng::tag::EMBB_FADING, point.embb_mean_snr.to_bits(), drop as u64]);
    ChannelState::draw(
        cfg.grid.frequencies,
        point.embb_mean_snr,
        point.urllc_mean_snr,
        cfg.geometry.noise_w(),
        &mut r,
    )
}

fn run_one(
    cfg: &ScenarioConfig,
    res: &Resources<'_>,
    scenario: &Scenario,
    channel: &ChannelState,
    algorithm: Algorithm,
    seed: u64,
) -> Result<DropOutcome> {
    let rate = scenario.urllc_rate()?;
    let table = res.table(channel.urllc_mean_snr, scenario.urllc_freqs, rate, scenario.urllc_minislots)?;
    let crn = match algorithm {
        Algorithm::Bcd => res.crn(scenario.urllc_freqs),
        Algorithm::Feasible => None,
    };
    let ctx = AllocContext { table: &*table, crn, bcd: cfg.bcd, evidence_trials: cfg.evidence_trials, seed };
    let r = allocate(scenario, channel, algorithm, &ctx)?;
    let mu = r.sets.urllc_minislot_count() as f64;
    let il_w = match scenario.scheme {
        AccessScheme::Noma => il_power(&r.embb_power.gather(&r.sets.urllc_freqs), r.urllc_rate)
            .ok()
            .map(|p| mu * p.iter().sum::<f64>()),
        AccessScheme::Oma => None,
    };
    Ok(DropOutcome {
        total_w: r.total_w,
        urllc_w: r.urllc_total_w,
        embb_w: r.embb_total_w,
        sic_w: mu * r.sic_per_minislot_w(),
        il_w,
        p_hat: r.evidence.p_hat,
        iterations: r.iterations,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn mean_dbm(xs: impl Iterator<Item = f64>) -> Option<f64> {
    mean(xs).map(watts_to_dbm)
}

/// Runs the configured sweep and returns the aggregated records. Nothing is
/// written to disk.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let points = cfg.sweep.points(&cfg.geometry)?;
    let mut out = SweepOutput::default();
    if let Some(curves) = &cfg.outage_curves {
        out.curves = outage_curves(cfg, curves)?;
    }
    if points.is_empty() || cfg.drops == 0 {
        return Ok(out);
    }
    let scenarios: Vec<(SchemeSpec, Scenario)> = cfg
        .schemes
        .iter()
        .map(|s| Ok((*s, cfg.scenario(s)?)))
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = scenarios.iter().map(|(_, s)| s.urllc_freqs).collect();
    let res = Resources::new(cfg, &counts)?;
    let combos: Vec<(usize, Algorithm)> = (0..scenarios.len())
        .flat_map(|s| cfg.algorithms.iter().map(move |a| (s, *a)))
        .collect();

    // Work items are (point, drop); results come back in input order.
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.drops).map(move |d| (p, d))).collect();
    type JobResult = (Vec<Option<f64>>, Vec<std::result::Result<DropOutcome, String>>);
    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|&(p, d)| -> Result<JobResult> {
            let point = &points[p];
            let channel = drop_channel(cfg, point, d)?;
            let embb = scenarios
                .iter()
                .map(|(_, s)| {
                    embb_allocation(s, &channel)
                        .ok()
                        .map(|(sets, pe)| sets.embb_minislot_count() as f64 * pe.total())
                })
                .collect();
            let seed = rng::derive_seed(
                cfg.seed,
                &[point.urllc_mean_snr.to_bits(), point.embb_mean_snr.to_bits(), d as u64],
            );
            let outcomes = combos
                .iter()
                .map(|&(s, a)| run_one(cfg, &res, &scenarios[s].1, &channel, a, seed).map_err(|e| e.to_string()))
                .collect();
            Ok((embb, outcomes))
        })
        .collect::<Result<_>>()?;

    for (p, point) in points.iter().enumerate() {
        let chunk = &results[p * cfg.drops..(p + 1) * cfg.drops];
        for (c, &(s, a)) in combos.iter().enumerate() {
            let ok: Vec<DropOutcome> = chunk.iter().filter_map(|(_, o)| o[c].as_ref().ok().copied()).collect();
            let failed = chunk.len() - ok.len();
            if failed > 0 {
                if let Some(Err(e)) = chunk.iter().map(|(_, o)| &o[c]).find(|o| o.is_err()) {
                    eprintln!(
                        "warning: {} {a} at d_u={:.1} m, d_e={:.1} m: {failed} drops failed ({e})",
                        scenarios[s].0, point.urllc_distance_m, point.embb_distance_m
                    );
                }
            }
            let noma = scenarios[s].1.scheme == AccessScheme::Noma;
            out.records.push(SweepRecord {
                scheme: scenarios[s].0.to_string(),
                algorithm: a.to_string(),
                urllc_distance_m: point.urllc_distance_m,
                embb_distance_m: point.embb_distance_m,
                urllc_snr_db: linear_to_db(point.urllc_mean_snr),
                embb_snr_db: linear_to_db(point.embb_mean_snr),
                drops: ok.len(),
                failed_drops: failed,
                mean_total_dbm: mean_dbm(ok.iter().map(|o| o.total_w)),
                mean_urllc_dbm: mean_dbm(ok.iter().map(|o| o.urllc_w)),
                mean_embb_dbm: mean_dbm(ok.iter().map(|o| o.embb_w)),
                mean_sic_dbm: if noma { mean_dbm(ok.iter().map(|o| o.sic_w)) } else { None },
                mean_il_dbm: if noma { mean_dbm(ok.iter().filter_map(|o| o.il_w)) } else { None },
                mean_p_hat: mean(ok.iter().map(|o| o.p_hat)),
                max_p_hat: ok.iter().map(|o| o.p_hat).reduce(f64::max),
                mean_iterations: mean(ok.iter().map(|o| o.iterations as f64)),
            });
        }
    }

    // eMBB power only depends on the eMBB position, so one row per distinct
    // eMBB point, taken from its first URLLC point.
    let mut seen: Vec<u64> = Vec::new();
    for (p, point) in points.iter().enumerate() {
        let key = point.embb_mean_snr.to_bits();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let chunk = &results[p * cfg.drops..(p + 1) * cfg.drops];
        for (s, (spec, _)) in scenarios.iter().enumerate() {
            let vals: Vec<f64> = chunk.iter().filter_map(|(e, _)| e[s]).collect();
            if let Some(m) = mean_dbm(vals.iter().copied()) {
                out.embb.push(EmbbPowerRecord {
                    scheme: spec.to_string(),
                    embb_distance_m: point.embb_distance_m,
                    embb_snr_db: linear_to_db(point.embb_mean_snr),
                    drops: vals.len(),
                    mean_embb_dbm: m,
                });
            }
        }
    }
    Ok(out)
}

/// Allocates drop `drop` at `point` for one scheme. Without `table`, the
/// outage table is estimated on demand from the configured trial count.
pub fn allocate_drop(
    cfg: &ScenarioConfig,
    scheme: &SchemeSpec,
    point: &SweepPoint,
    drop: usize,
    algorithm: Algorithm,
    table: Option<&dyn OutageLookup>,
) -> Result<AllocationResult> {
    cfg.validate()?;
    let scenario = cfg.scenario(scheme)?;
    let channel = drop_channel(cfg, point, drop)?;
    let lazy;
    let table = match table {
        Some(t) => t,
        None => {
            let params = TableParams {
                mean_snr: point.urllc_mean_snr,
                freqs: scenario.urllc_freqs,
                rate: scenario.urllc_rate()?,
                minislots: scenario.urllc_minislots,
                trials: cfg.table.trials,
                seed: cfg.seed,
            };
            lazy = LazyOutageTable::new(params, cfg.table.axes()?)?;
            &lazy
        }
    };
    let ctx = AllocContext { table, crn: None, bcd: cfg.bcd, evidence_trials: cfg.evidence_trials, seed: cfg.seed };
    allocate(&scenario, &channel, algorithm, &ctx)
}

/// Mean eMBB power [dBm] over `drops` fading draws at mean SNR `embb_mean_snr`.
pub fn mean_embb_power_dbm(cfg: &ScenarioConfig, scheme: &SchemeSpec, embb_mean_snr: f64, drops: usize) -> Result<f64> {
    let scenario = cfg.scenario(scheme)?;
    let point = SweepPoint { urllc_distance_m: f64::NAN, embb_distance_m: f64::NAN, urllc_mean_snr: 1.0, embb_mean_snr };
    let powers = (0..drops)
        .into_par_iter()
        .map(|d| {
            let ch = drop_channel(cfg, &point, d)?;
            let (sets, pe) = embb_allocation(&scenario, &ch)?;
            Ok(sets.embb_minislot_count() as f64 * pe.total())
        })
        .collect::<Result<Vec<f64>>>()?;
    mean_dbm(powers.into_iter()).ok_or_else(|| Error::invalid("need at least one drop"))
}

fn outage_curves(cfg: &ScenarioConfig, c: &super::config::OutageCurveConfig) -> Result<Vec<OutageCurveRecord>> {
    let grid = cfg.grid.build()?;
    let axes = cfg.table.axes()?;
    let rows = c.interference_rows()?;
    let mean_snr = crate::units::db_to_linear(c.mean_snr_db);
    let mut cells = Vec::new();
    for &m in &c.minislots {
        let rate = spectral_efficiency(cfg.traffic.urllc_bits, &grid, c.urllc_freqs, m)?;
        let params = TableParams { mean_snr, freqs: c.urllc_freqs, rate, minislots: m, trials: cfg.table.trials, seed: cfg.seed };
        for &row in &rows {
            for &p in &axes.power_dbm {
                cells.push((params, m, row, p));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(params, m, row, p)| {
            Ok(OutageCurveRecord {
                minislots: m,
                rate: params.rate,
                interference_dbm: row.to_string(),
                power_dbm: p,
                p_hat: params.estimate_cell(p, row)?,
                trials: params.trials,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes the CSV files into `out_dir`.
pub fn run_sweep_to_dir(cfg: &ScenarioConfig, out_dir: &Path) -> Result<SweepOutput> {
    let mut out = run_sweep(cfg)?;
    let wants = !out.records.is_empty() || !out.embb.is_empty() || !out.curves.is_empty();
    if wants {
        fs::create_dir_all(out_dir)?;
    }
    if !out.records.is_empty() {
        let p = out_dir.join("records.csv");
        write_csv(&p, &out.records)?;
        out.files.push(p);
    }
    if !out.embb.is_empty() {
        let p = out_dir.join("embb_power.csv");
        write_csv(&p, &out.embb)?;
        out.files.push(p);
    }
    if !out.curves.is_empty() {
        let p = out_dir.join("outage_curves.csv");
        write_csv(&p, &out.curves)?;
        out.files.push(p);
    }
    Ok(out)
}
