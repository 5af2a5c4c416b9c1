//! Scenario configuration. Every field has a default, so an empty file
//! describes the reference deployment: a 12 x 7 grid, 8640 eMBB bits per
//! slot, 2160/7 URLLC bits per mini-slot, outage target 1e-5.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alloc::{Algorithm, BcdConfig, Scenario};
use crate::channel::{distance_from_mean_snr, mean_snr_from_distance, Geometry};
use crate::error::{Error, Result};
use crate::grid::{AccessScheme, ResourceGrid, TrafficSpec};
use crate::outage::{Interference, TableAxes};
use crate::units::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub frequencies: usize,
    pub minislots: usize,
    pub bandwidth_hz: f64,
    pub slot_s: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = ResourceGrid::nr_default();
        Self { frequencies: g.frequencies(), minislots: g.minislots(), bandwidth_hz: g.bandwidth_hz(), slot_s: g.slot_s() }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<ResourceGrid> {
        ResourceGrid::new(self.frequencies, self.minislots, self.bandwidth_hz, self.slot_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub embb_bits: f64,
    pub urllc_bits: f64,
    pub epsilon: f64,
    /// Mini-slots used by each URLLC packet.
    pub urllc_minislots: usize,
    pub max_latency: usize,
    pub waited: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            embb_bits: 8640.0,
            urllc_bits: 2160.0 / 7.0,
            epsilon: 1e-5,
            urllc_minislots: 1,
            max_latency: 7,
            waited: 0,
        }
    }
}

impl TrafficConfig {
    pub fn build(&self) -> Result<TrafficSpec> {
        TrafficSpec::new(self.embb_bits, self.urllc_bits, self.epsilon, self.max_latency, self.waited)
    }
}

/// Access scheme plus URLLC frequency count. Written `noma` (all
/// frequencies), `noma-<k>` or `o-<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SchemeSpec {
    pub access: AccessScheme,
    /// `None` means the whole band.
    pub urllc_freqs: Option<usize>,
}

impl SchemeSpec {
    pub fn noma() -> Self {
        Self { access: AccessScheme::Noma, urllc_freqs: None }
    }

    pub fn oma(urllc_freqs: usize) -> Self {
        Self { access: AccessScheme::Oma, urllc_freqs: Some(urllc_freqs) }
    }

    pub fn freq_count(&self, grid: &ResourceGrid) -> usize {
        self.urllc_freqs.unwrap_or(grid.frequencies())
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.access, self.urllc_freqs) {
            (AccessScheme::Noma, None) => f.write_str("noma"),
            (AccessScheme::Noma, Some(k)) => write!(f, "noma-{k}"),
            (AccessScheme::Oma, Some(k)) => write!(f, "o-{k}"),
            (AccessScheme::Oma, None) => f.write_str("oma"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let count = |k: &str| -> Result<usize> {
            k.parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::invalid(format!("bad frequency count in scheme `{s}`")))
        };
        if lower == "noma" {
            Ok(Self::noma())
        } else if let Some(k) = lower.strip_prefix("noma-") {
            Ok(Self { access: AccessScheme::Noma, urllc_freqs: Some(count(k)?) })
        } else if let Some(k) = lower.strip_prefix("o-").or_else(|| lower.strip_prefix("oma-")) {
            Ok(Self::oma(count(k)?))
        } else {
            Err(Error::invalid(format!("unknown scheme `{s}` (expected noma, noma-<k> or o-<k>)")))
        }
    }
}

impl TryFrom<String> for SchemeSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SchemeSpec> for String {
    fn from(s: SchemeSpec) -> String {
        s.to_string()
    }
}

/// Sweep axes. Each user's position is given either as distances or as mean
/// SNRs, not both; the sweep runs over the product of the two axes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub urllc_distance_m: Option<Vec<f64>>,
    pub urllc_snr_db: Option<Vec<f64>>,
    pub embb_distance_m: Option<Vec<f64>>,
    pub embb_snr_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub urllc_distance_m: f64,
    pub embb_distance_m: f64,
    /// Linear mean SNR per watt.
    pub urllc_mean_snr: f64,
    pub embb_mean_snr: f64,
}

impl SweepPoint {
    pub fn at_distances(geom: &Geometry, urllc_distance_m: f64, embb_distance_m: f64) -> Result<Self> {
        let noise = geom.noise_w();
        Ok(Self {
            urllc_distance_m,
            embb_distance_m,
            urllc_mean_snr: mean_snr_from_distance(urllc_distance_m, geom, noise)?,
            embb_mean_snr: mean_snr_from_distance(embb_distance_m, geom, noise)?,
        })
    }
}

/// URLLC distances swept by default [m].
pub fn default_urllc_distances() -> Vec<f64> {
    (0..=25).map(|k| 25.0 + 5.0 * k as f64).collect()
}

pub const DEFAULT_EMBB_DISTANCE_M: f64 = 146.9;

fn resolve_axis(
    distances: &Option<Vec<f64>>,
    snr_db: &Option<Vec<f64>>,
    default: Vec<f64>,
    who: &str,
    geom: &Geometry,
) -> Result<Vec<(f64, f64)>> {
    let noise = geom.noise_w();
    match (distances, snr_db) {
        (Some(_), Some(_)) => Err(Error::Config(format!("give {who} positions as distances or SNRs, not both"))),
        (None, Some(db)) => Ok(db
            .iter()
            .map(|&x| {
                let snr = db_to_linear(x);
                (distance_from_mean_snr(snr, geom, noise), snr)
            })
            .collect()),
        (d, None) => d
            .clone()
            .unwrap_or(default)
            .into_iter()
            .map(|d| Ok((d, mean_snr_from_distance(d, geom, noise)?)))
            .collect(),
    }
}

impl SweepAxes {
    pub fn points(&self, geom: &Geometry) -> Result<Vec<SweepPoint>> {
        let u = resolve_axis(&self.urllc_distance_m, &self.urllc_snr_db, default_urllc_distances(), "URLLC", geom)?;
        let e = resolve_axis(&self.embb_distance_m, &self.embb_snr_db, vec![DEFAULT_EMBB_DISTANCE_M], "eMBB", geom)?;
        let mut out = Vec::with_capacity(u.len() * e.len());
        for &(de, ge) in &e {
            for &(du, gu) in &u {
                out.push(SweepPoint { urllc_distance_m: du, embb_distance_m: de, urllc_mean_snr: gu, embb_mean_snr: ge });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    /// Monte Carlo trials per cell.
    pub trials: u64,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
    pub power_step_db: f64,
    /// Directory holding prebuilt tables.
    pub dir: Option<PathBuf>,
    /// Estimate missing tables on demand instead of failing.
    pub auto_build: bool,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self { trials: 10_000_000, power_min_dbm: -30.0, power_max_dbm: 30.0, power_step_db: 1.0, dir: None, auto_build: true }
    }
}

impl TableConfig {
    pub fn axes(&self) -> Result<TableAxes> {
        TableAxes::uniform(self.power_min_dbm, self.power_max_dbm, self.power_step_db)
    }
}

/// Outage-versus-power curves at uniform powers, one per mini-slot count
/// and interference level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutageCurveConfig {
    pub mean_snr_db: f64,
    pub urllc_freqs: usize,
    pub minislots: Vec<usize>,
    /// Interference levels in dBm, or "none".
    pub interference: Vec<String>,
}

impl Default for OutageCurveConfig {
    fn default() -> Self {
        Self {
            mean_snr_db: 30.0,
            urllc_freqs: 12,
            minislots: vec![1, 2, 4, 7],
            interference: vec!["0".into(), "none".into()],
        }
    }
}

impl OutageCurveConfig {
    pub fn interference_rows(&self) -> Result<Vec<Interference>> {
        self.interference.iter().map(|s| s.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub traffic: TrafficConfig,
    pub geometry: Geometry,
    pub schemes: Vec<SchemeSpec>,
    pub algorithms: Vec<Algorithm>,
    pub sweep: SweepAxes,
    /// Fading realizations per sweep point.
    pub drops: usize,
    pub table: TableConfig,
    pub bcd: BcdConfig,
    /// Trials of the independent outage check after each allocation.
    pub evidence_trials: u64,
    pub outage_curves: Option<OutageCurveConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            grid: GridConfig::default(),
            traffic: TrafficConfig::default(),
            geometry: Geometry::default(),
            schemes: vec![SchemeSpec::noma(), SchemeSpec::oma(3), SchemeSpec::oma(6), SchemeSpec::oma(9)],
            algorithms: vec![Algorithm::Feasible, Algorithm::Bcd],
            sweep: SweepAxes::default(),
            drops: 2000,
            table: TableConfig::default(),
            bcd: BcdConfig::default(),
            evidence_trials: 1_000_000,
            outage_curves: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.traffic.build()?;
        self.geometry.validate()?;
        self.bcd.validate()?;
        for s in &self.schemes {
            self.scenario(s).map_err(|e| Error::Config(format!("scheme {s}: {e}")))?;
        }
        if self.traffic.max_latency > grid.minislots() {
            return Err(Error::Config("latency budget exceeds the slot".into()));
        }
        if self.table.trials == 0 || self.evidence_trials == 0 {
            return Err(Error::Config("trial counts must be positive".into()));
        }
        self.table.axes()?;
        if let Some(c) = &self.outage_curves {
            c.interference_rows()?;
            if c.urllc_freqs == 0 || c.urllc_freqs > grid.frequencies() || c.minislots.contains(&0) {
                return Err(Error::Config("bad outage curve setup".into()));
            }
        }
        Ok(())
    }

    pub fn scenario(&self, scheme: &SchemeSpec) -> Result<Scenario> {
        let grid = self.grid.build()?;
        let s = Scenario {
            grid,
            traffic: self.traffic.build()?,
            scheme: scheme.access,
            urllc_freqs: scheme.freq_count(&grid),
            urllc_minislots: self.traffic.urllc_minislots,
        };
        s.validate()?;
        Ok(s)
    }

    /// Applies a named preset:
    /// - `outage-curves`: outage curves only, no allocation sweep
    /// - `embb-near`, `embb-mid`, `embb-far`: d_u sweep with eMBB at 26.1, 146.9 or 261.2 m
    /// - `embb-distance`: d_e sweep with URLLC at 146.9 m
    /// - `embb-power`: mean eMBB power over Γ_e from 30 to 80 dB
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let embb_at = |d: f64| Some(vec![d]);
        match name {
            "outage-curves" => {
                self.sweep = SweepAxes { urllc_distance_m: Some(vec![]), ..SweepAxes::default() };
                self.outage_curves = Some(OutageCurveConfig::default());
            }
            "embb-mid" => self.sweep.embb_distance_m = embb_at(146.9),
            "embb-near" => self.sweep.embb_distance_m = embb_at(26.1),
            "embb-far" => {
                self.sweep.embb_distance_m = embb_at(261.2);
                self.schemes.retain(|s| s.urllc_freqs != Some(9));
            }
            "embb-distance" => {
                self.sweep = SweepAxes {
                    urllc_distance_m: Some(vec![146.9]),
                    embb_distance_m: Some((0..=26).map(|k| 20.0 + 10.0 * k as f64).collect()),
                    ..SweepAxes::default()
                };
            }
            "embb-power" => {
                self.sweep = SweepAxes {
                    urllc_distance_m: Some(vec![100.0]),
                    embb_snr_db: Some(vec![30.0, 40.0, 50.0, 60.0, 70.0, 80.0]),
                    ..SweepAxes::default()
                };
                self.algorithms.clear();
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (outage-curves, embb-near, embb-mid, embb-far, embb-distance, embb-power)"
                )))
            }
        }
        Ok(())
    }
}
