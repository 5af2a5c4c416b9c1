//! Outage look-up table with uniform per-resource powers.
//!
//! Each cell is an independent Monte Carlo estimate seeded from the base seed
//! and the cell's own coordinates, so a cell's value does not depend on which
//! other cells exist or on evaluation order. That is what lets
//! [`LazyOutageTable`] compute rows on demand and still agree bit for bit
//! with a fully built [`OutageTable`].
//!
//! Two encodings are supported, both round-tripping every value exactly:
//! a line-oriented text form and a little-endian binary form.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate_outage;
use crate::error::{Error, Result};
use crate::rng;
use crate::units::{dbm_to_watts, watts_to_dbm};

pub const TABLE_FORMAT_VERSION: u32 = 1;
const TEXT_MAGIC: &str = "NSOT-TEXT";
const BINARY_MAGIC: &[u8; 4] = b"NSOB";
/// Slack when matching a dBm query to a grid row.
const DBM_SLACK: f64 = 1e-9;

/// Interference level of a table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Interference {
    None,
    Dbm(f64),
}

impl Interference {
    pub fn watts(self) -> f64 {
        match self {
            Interference::None => 0.0,
            Interference::Dbm(d) => dbm_to_watts(d),
        }
    }

    fn key(self) -> u64 {
        match self {
            Interference::None => u64::MAX,
            Interference::Dbm(d) => d.to_bits(),
        }
    }
}

impl fmt::Display for Interference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interference::None => f.write_str("none"),
            Interference::Dbm(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for Interference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "-inf" => Ok(Interference::None),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .map(Interference::Dbm)
                .ok_or_else(|| Error::invalid(format!("bad interference level `{s}`"))),
        }
    }
}

/// What a table was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    /// Linear mean URLLC SNR per watt.
    pub mean_snr: f64,
    pub freqs: usize,
    /// Per-resource URLLC rate, mini-slots already folded in.
    pub rate: f64,
    /// Mini-slots the rate was computed for; informational.
    pub minislots: usize,
    pub trials: u64,
    pub seed: u64,
}

impl TableParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_snr > 0.0) || self.freqs == 0 || !(self.rate >= 0.0) || self.trials == 0 {
            return Err(Error::invalid("table needs positive SNR, frequencies and trials"));
        }
        Ok(())
    }

    pub fn matches(&self, mean_snr: f64, freqs: usize, rate: f64) -> bool {
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        self.freqs == freqs && rel(self.mean_snr, mean_snr) && rel(self.rate, rate)
    }

    /// Seed of the cell at (`power_dbm`, `interference`).
    pub fn cell_seed(&self, power_dbm: f64, interference: Interference) -> u64 {
        rng::derive_seed(
            self.seed,
            &[
                rng::tag::TABLE_CELL,
                self.mean_snr.to_bits(),
                self.freqs as u64,
                self.rate.to_bits(),
                power_dbm.to_bits(),
                interference.key(),
            ],
        )
    }

    /// Estimates one cell from scratch.
    pub fn estimate_cell(&self, power_dbm: f64, interference: Interference) -> Result<f64> {
        let pu = vec![dbm_to_watts(power_dbm); self.freqs];
        let pe = vec![interference.watts(); self.freqs];
        let e = estimate_outage(&pu, &pe, self.mean_snr, self.rate, self.trials, self.cell_seed(power_dbm, interference))?;
        Ok(e.p_hat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableAxes {
    /// URLLC power per resource [dBm], ascending.
    pub power_dbm: Vec<f64>,
    /// Interference rows: at most one `None`, finite rows ascending.
    pub interference: Vec<Interference>,
}

impl TableAxes {
    /// Powers from `lo` to `hi` dBm in `step` dB increments; interference rows
    /// on the same grid plus the interference-free row.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let power_dbm = dbm_grid(lo, hi, step)?;
        let interference = std::iter::once(Interference::None)
            .chain(power_dbm.iter().map(|&d| Interference::Dbm(d)))
            .collect();
        Ok(Self { power_dbm, interference })
    }

    /// -30..=30 dBm in 1 dB steps.
    pub fn standard() -> Self {
        Self::uniform(-30.0, 30.0, 1.0).expect("static grid")
    }

    pub fn with_rows(mut self, rows: Vec<Interference>) -> Result<Self> {
        self.interference = rows;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_dbm.is_empty() || self.interference.is_empty() {
            return Err(Error::invalid("table axes must be nonempty"));
        }
        if self.power_dbm.windows(2).any(|w| !(w[0] < w[1])) || self.power_dbm.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("power axis must be finite and strictly ascending"));
        }
        let nones = self.interference.iter().filter(|r| matches!(r, Interference::None)).count();
        let finite: Vec<f64> = self
            .interference
            .iter()
            .filter_map(|r| match r {
                Interference::Dbm(d) => Some(*d),
                Interference::None => None,
            })
            .collect();
        if nones > 1 || finite.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("interference axis must hold one `none` and ascending levels"));
        }
        Ok(())
    }

    /// Row answering a query at interference `embb_power` watts: the
    /// interference-free row for zero, otherwise the first row at or above
    /// the query (rounding up is conservative).
    pub fn row_for(&self, embb_power: f64) -> Result<usize> {
        if !(embb_power >= 0.0) {
            return Err(Error::invalid("interference power must be nonnegative"));
        }
        if embb_power == 0.0 {
            if let Some(i) = self.interference.iter().position(|r| matches!(r, Interference::None)) {
                return Ok(i);
            }
        }
        let query = watts_to_dbm(embb_power);
        self.interference
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r {
                Interference::Dbm(d) if *d >= query - DBM_SLACK => Some((i, *d)),
                _ => None,
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::NotCovered(format!("{query:.3} dBm")))
    }
}

fn dbm_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("power grid needs lo <= hi and a positive step"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // Integer-based points avoid accumulated drift.
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

/// First power whose outage is at most `epsilon`.
fn first_feasible(axes: &TableAxes, row: usize, values: &[f64], epsilon: f64) -> Result<f64> {
    values
        .iter()
        .position(|&p| p <= epsilon)
        .map(|k| axes.power_dbm[k])
        .ok_or_else(|| Error::TableExhausted { epsilon, row: axes.interference[row].to_string() })
}

/// Anything that can answer the N-fea power query.
pub trait OutageLookup: Sync {
    fn params(&self) -> &TableParams;

    /// Smallest grid power [dBm] whose tabulated outage at the conservative
    /// interference row is at most `epsilon`.
    fn min_feasible_power(&self, embb_power: f64, epsilon: f64) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageTable {
    pub params: TableParams,
    pub axes: TableAxes,
    /// Row-major, one row per interference level.
    values: Vec<f64>,
}

impl OutageTable {
    pub fn build(params: TableParams, axes: TableAxes) -> Result<Self> {
        params.validate()?;
        axes.validate()?;
        let cols = axes.power_dbm.len();
        let cells: Vec<(usize, usize)> = (0..axes.interference.len())
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .collect();
        let values = cells
            .par_iter()
            .map(|&(r, c)| params.estimate_cell(axes.power_dbm[c], axes.interference[r]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { params, axes, values })
    }

    pub fn from_parts(params: TableParams, axes: TableAxes, values: Vec<f64>) -> Result<Self> {
        params.validate()?;
        axes.validate()?;
        if values.len() != axes.power_dbm.len() * axes.interference.len() {
            return Err(Error::TableFormat("value count does not match the axes".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::TableFormat("probability outside [0, 1]".into()));
        }
        Ok(Self { params, axes, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.axes.power_dbm.len();
        &self.values[r * cols..(r + 1) * cols]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.row(row)[col]
    }

    /// Value at exact grid coordinates, if present.
    pub fn lookup(&self, power_dbm: f64, interference: Interference) -> Option<f64> {
        let c = self.axes.power_dbm.iter().position(|d| (d - power_dbm).abs() < DBM_SLACK)?;
        let r = self.axes.interference.iter().position(|i| match (i, interference) {
            (Interference::None, Interference::None) => true,
            (Interference::Dbm(a), Interference::Dbm(b)) => (a - b).abs() < DBM_SLACK,
            _ => false,
        })?;
        Some(self.value(r, c))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = BufWriter::new(fs::File::create(path)?);
        if is_binary_path(path) {
            self.write_binary(file)
        } else {
            self.write_text(file)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path.as_ref())?.read_to_end(&mut bytes)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::read_binary(&bytes[..])
        } else {
            Self::read_text(&bytes[..])
        }
    }

    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        let p = &self.params;
        writeln!(w, "{TEXT_MAGIC} {TABLE_FORMAT_VERSION}")?;
        writeln!(w, "mean_snr {}", p.mean_snr)?;
        writeln!(w, "freqs {}", p.freqs)?;
        writeln!(w, "rate {}", p.rate)?;
        writeln!(w, "minislots {}", p.minislots)?;
        writeln!(w, "trials {}", p.trials)?;
        writeln!(w, "seed {}", p.seed)?;
        writeln!(w, "power_dbm {}", join(self.axes.power_dbm.iter()))?;
        writeln!(w, "interference {}", join(self.axes.interference.iter()))?;
        writeln!(w, "values")?;
        for r in 0..self.axes.interference.len() {
            writeln!(w, "{}", join(self.row(r).iter()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::TableFormat(format!("missing {what}")))
        };
        let header = next("header")?;
        let version = header
            .strip_prefix(TEXT_MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::TableFormat("not a table file".into()))?;
        if version != TABLE_FORMAT_VERSION.to_string() {
            return Err(Error::TableFormat(format!("unsupported version {version}")));
        }
        let mean_snr = parse_field(&next("mean_snr")?, "mean_snr")?;
        let freqs = parse_field(&next("freqs")?, "freqs")?;
        let rate = parse_field(&next("rate")?, "rate")?;
        let minislots = parse_field(&next("minislots")?, "minislots")?;
        let trials = parse_field(&next("trials")?, "trials")?;
        let seed = parse_field(&next("seed")?, "seed")?;
        let power_dbm = parse_list(&next("power axis")?, "power_dbm")?;
        let interference = parse_list(&next("interference axis")?, "interference")?;
        if next("values marker")?.trim() != "values" {
            return Err(Error::TableFormat("expected `values`".into()));
        }
        let mut values = Vec::with_capacity(power_dbm.len() * interference.len());
        for _ in 0..interference.len() {
            let line = next("value row")?;
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| Error::TableFormat(format!("bad value `{tok}`")))?);
            }
        }
        let params = TableParams { mean_snr, freqs, rate, minislots, trials, seed };
        Self::from_parts(params, TableAxes { power_dbm, interference }, values)
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        let p = &self.params;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&TABLE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&p.mean_snr.to_le_bytes())?;
        w.write_all(&(p.freqs as u64).to_le_bytes())?;
        w.write_all(&p.rate.to_le_bytes())?;
        w.write_all(&(p.minislots as u64).to_le_bytes())?;
        w.write_all(&p.trials.to_le_bytes())?;
        w.write_all(&p.seed.to_le_bytes())?;
        w.write_all(&(self.axes.power_dbm.len() as u64).to_le_bytes())?;
        w.write_all(&(self.axes.interference.len() as u64).to_le_bytes())?;
        for d in &self.axes.power_dbm {
            w.write_all(&d.to_le_bytes())?;
        }
        for row in &self.axes.interference {
            let (tag, level) = match row {
                Interference::None => (0u8, 0.0f64),
                Interference::Dbm(d) => (1u8, *d),
            };
            w.write_all(&[tag])?;
            w.write_all(&level.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::TableFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != TABLE_FORMAT_VERSION {
            return Err(Error::TableFormat(format!("unsupported version {version}")));
        }
        let mean_snr = f64::from_le_bytes(read_array(&mut r)?);
        let freqs = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let rate = f64::from_le_bytes(read_array(&mut r)?);
        let minislots = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let trials = u64::from_le_bytes(read_array(&mut r)?);
        let seed = u64::from_le_bytes(read_array(&mut r)?);
        let n_power = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let n_rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
        if n_power > 1 << 20 || n_rows > 1 << 20 {
            return Err(Error::TableFormat("implausible axis length".into()));
        }
        let power_dbm = (0..n_power)
            .map(|_| read_array(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let mut interference = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let [tag] = read_array::<1>(&mut r)?;
            let level = f64::from_le_bytes(read_array(&mut r)?);
            interference.push(match tag {
                0 => Interference::None,
                1 => Interference::Dbm(level),
                t => return Err(Error::TableFormat(format!("bad row tag {t}"))),
            });
        }
        let values = (0..n_power * n_rows)
            .map(|_| read_array(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        let params = TableParams { mean_snr, freqs, rate, minislots, trials, seed };
        Self::from_parts(params, TableAxes { power_dbm, interference }, values)
    }
}

impl OutageLookup for OutageTable {
    fn params(&self) -> &TableParams {
        &self.params
    }

    fn min_feasible_power(&self, embb_power: f64, epsilon: f64) -> Result<f64> {
        let r = self.axes.row_for(embb_power)?;
        first_feasible(&self.axes, r, self.row(r), epsilon)
    }
}

/// Table whose rows are estimated on first use and then cached. Safe to
/// share between threads; a row is computed at most once.
#[derive(Debug)]
pub struct LazyOutageTable {
    params: TableParams,
    axes: TableAxes,
    rows: Vec<OnceLock<Result<Vec<f64>>>>,
}

impl LazyOutageTable {
    pub fn new(params: TableParams, axes: TableAxes) -> Result<Self> {
        params.validate()?;
        axes.validate()?;
        let rows = axes.interference.iter().map(|_| OnceLock::new()).collect();
        Ok(Self { params, axes, rows })
    }

    pub fn axes(&self) -> &TableAxes {
        &self.axes
    }

    pub fn row(&self, r: usize) -> Result<&[f64]> {
        // Sequential on purpose: a rayon worker blocked inside this
        // initializer could otherwise steal a job that waits on the same row.
        let cell = self.rows[r].get_or_init(|| {
            let level = self.axes.interference[r];
            self.axes
                .power_dbm
                .iter()
                .map(|&d| self.params.estimate_cell(d, level))
                .collect()
        });
        match cell {
            Ok(v) => Ok(v),
            Err(e) => Err(Error::invalid(format!("row estimation failed: {e}"))),
        }
    }

    /// Rows evaluated so far.
    pub fn evaluated_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.get().is_some()).count()
    }

    /// Estimates the remaining rows and returns the dense table.
    pub fn materialize(&self) -> Result<OutageTable> {
        let mut values = Vec::with_capacity(self.axes.power_dbm.len() * self.rows.len());
        for r in 0..self.rows.len() {
            values.extend_from_slice(self.row(r)?);
        }
        OutageTable::from_parts(self.params, self.axes.clone(), values)
    }
}

impl OutageLookup for LazyOutageTable {
    fn params(&self) -> &TableParams {
        &self.params
    }

    fn min_feasible_power(&self, embb_power: f64, epsilon: f64) -> Result<f64> {
        let r = self.axes.row_for(embb_power)?;
        first_feasible(&self.axes, r, self.row(r)?, epsilon)
    }
}

fn is_binary_path(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin") | Some("nsot"))
}

fn join<T: fmt::Display>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_field<T: FromStr>(line: &str, key: &str) -> Result<T> {
    line.strip_prefix(key)
        .map(str::trim)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::TableFormat(format!("bad `{key}` line")))
}

fn parse_list<T: FromStr>(line: &str, key: &str) -> Result<Vec<T>> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| Error::TableFormat(format!("expected `{key}`")))?;
    rest.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::TableFormat(format!("bad `{key}` entry `{t}`"))))
        .collect()
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::TableFormat("truncated file".into()),
        _ => Error::Io(e),
    })
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf)?;
    Ok(buf)
}
