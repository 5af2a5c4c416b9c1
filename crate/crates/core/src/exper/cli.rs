//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::config::{ScenarioConfig, SchemeSpec, SweepPoint};
use super::sweep::{allocate_drop, run_sweep_to_dir};
use crate::alloc::{Algorithm, AllocationResult};
use crate::channel::{distance_from_mean_snr, mean_snr_from_distance};
use crate::error::{Error, Result};
use crate::grid::spectral_efficiency;
use crate::outage::{Interference, OutageLookup, OutageTable, TableParams};
use crate::units::{db_to_linear, linear_to_db, watts_to_dbm};
use crate::verify::{self, Suite};

#[derive(Debug, Parser)]
#[command(name = "noma-slice", version, about = "Minimum-power eMBB/URLLC slicing under OMA and NOMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or query outage look-up tables.
    #[command(subcommand)]
    Table(TableCommand),
    /// Allocate one drop and print the result as JSON.
    Allocate(AllocateArgs),
    /// Run a configured sweep and write CSV files.
    Sweep(SweepArgs),
    /// Run the built-in self-checks.
    Verify(VerifyArgs),
    /// Print the default configuration.
    Config,
}

#[derive(Debug, Subcommand)]
enum TableCommand {
    Build(TableBuildArgs),
    Query(TableQueryArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Scenario file (TOML); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<ScenarioConfig> {
        match &self.config {
            Some(p) => ScenarioConfig::load(p),
            None => Ok(ScenarioConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
struct TableBuildArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Mean URLLC SNR [dB].
    #[arg(long, allow_hyphen_values = true)]
    snr_db: f64,
    /// URLLC frequencies.
    #[arg(long, default_value_t = 12)]
    fu: usize,
    /// URLLC mini-slots, used to derive the rate.
    #[arg(long, default_value_t = 1)]
    minislots: usize,
    /// Per-resource rate; derived from the payload when omitted.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Interference rows (dBm or `none`), comma separated; all rows when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rows: Option<Vec<String>>,
    /// Output path; `.bin`/`.nsot` selects the binary encoding.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TableQueryArgs {
    #[arg(long)]
    table: PathBuf,
    /// eMBB interference [dBm] or `none`.
    #[arg(long, allow_hyphen_values = true)]
    pe: String,
    #[arg(long)]
    eps: f64,
}

#[derive(Debug, Args)]
struct AllocateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// noma, noma-<k> or o-<k>.
    #[arg(long)]
    scheme: SchemeSpec,
    /// fea or bcd.
    #[arg(long)]
    algo: Algorithm,
    /// URLLC distance [m].
    #[arg(long, conflicts_with = "snr_u")]
    du: Option<f64>,
    /// URLLC mean SNR [dB].
    #[arg(long, allow_hyphen_values = true)]
    snr_u: Option<f64>,
    /// eMBB distance [m].
    #[arg(long, conflicts_with = "snr_e")]
    de: Option<f64>,
    /// eMBB mean SNR [dB].
    #[arg(long, allow_hyphen_values = true)]
    snr_e: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fading realization index.
    #[arg(long, default_value_t = 0)]
    drop: usize,
    #[arg(long)]
    eps: Option<f64>,
    /// Prebuilt table; estimated on demand when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    table_trials: Option<u64>,
    #[arg(long)]
    crn_trials: Option<usize>,
    #[arg(long)]
    evidence_trials: Option<u64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// outage-curves, embb-near, embb-mid, embb-far, embb-distance or embb-power.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    table_trials: Option<u64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// waterfill, channel, outage, alloc or all.
    #[arg(long, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct AllocateReport<'a> {
    scheme: String,
    urllc_distance_m: f64,
    embb_distance_m: f64,
    urllc_snr_db: f64,
    embb_snr_db: f64,
    seed: u64,
    drop: usize,
    total_dbm: f64,
    urllc_dbm: f64,
    embb_dbm: f64,
    result: &'a AllocationResult,
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Table(TableCommand::Build(a)) => table_build(a, out),
        Command::Table(TableCommand::Query(a)) => table_query(a, out),
        Command::Allocate(a) => allocate_cmd(a, out),
        Command::Sweep(a) => sweep_cmd(a, out),
        Command::Verify(a) => verify_cmd(a, out),
        Command::Config => {
            write!(out, "{}", ScenarioConfig::default().to_toml()?)?;
            Ok(0)
        }
    }
}

fn table_build(a: TableBuildArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = a.config.load()?;
    let grid = cfg.grid.build()?;
    let rate = match a.rate {
        Some(r) => r,
        None => spectral_efficiency(cfg.traffic.urllc_bits, &grid, a.fu, a.minislots)?,
    };
    let params = TableParams {
        mean_snr: db_to_linear(a.snr_db),
        freqs: a.fu,
        rate,
        minislots: a.minislots,
        trials: a.trials.unwrap_or(cfg.table.trials),
        seed: a.seed.unwrap_or(cfg.seed),
    };
    let mut axes = cfg.table.axes()?;
    if let Some(rows) = &a.rows {
        let rows = rows.iter().map(|s| s.parse()).collect::<Result<Vec<Interference>>>()?;
        axes = axes.with_rows(rows)?;
    }
    let table = OutageTable::build(params, axes)?;
    table.save(&a.out)?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(0)
}

fn table_query(a: TableQueryArgs, out: &mut dyn Write) -> Result<i32> {
    let table = OutageTable::load(&a.table)?;
    let pe: Interference = a.pe.parse()?;
    let dbm = table.min_feasible_power(pe.watts(), a.eps)?;
    writeln!(out, "{dbm} dBm")?;
    Ok(0)
}

fn position(dist: Option<f64>, snr_db: Option<f64>, who: &str, cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let noise = cfg.geometry.noise_w();
    match (dist, snr_db) {
        (Some(d), _) => Ok((d, mean_snr_from_distance(d, &cfg.geometry, noise)?)),
        (None, Some(db)) => {
            let snr = db_to_linear(db);
            Ok((distance_from_mean_snr(snr, &cfg.geometry, noise), snr))
        }
        (None, None) => Err(Error::invalid(format!("give the {who} distance or SNR"))),
    }
}

fn allocate_cmd(a: AllocateArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = a.config.load()?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.eps {
        cfg.traffic.epsilon = e;
    }
    if let Some(t) = a.table_trials {
        cfg.table.trials = t;
    }
    if let Some(t) = a.crn_trials {
        cfg.bcd.crn_trials = t;
    }
    if let Some(t) = a.evidence_trials {
        cfg.evidence_trials = t;
    }
    cfg.validate()?;
    let (du, gu) = position(a.du, a.snr_u, "URLLC", &cfg)?;
    let (de, ge) = position(a.de, a.snr_e, "eMBB", &cfg)?;
    let point = SweepPoint { urllc_distance_m: du, embb_distance_m: de, urllc_mean_snr: gu, embb_mean_snr: ge };
    let loaded = a.table.as_ref().map(OutageTable::load).transpose()?;
    let result = allocate_drop(&cfg, &a.scheme, &point, a.drop, a.algo, loaded.as_ref().map(|t| t as &dyn OutageLookup))?;
    let report = AllocateReport {
        scheme: a.scheme.to_string(),
        urllc_distance_m: du,
        embb_distance_m: de,
        urllc_snr_db: linear_to_db(gu),
        embb_snr_db: linear_to_db(ge),
        seed: cfg.seed,
        drop: a.drop,
        total_dbm: watts_to_dbm(result.total_w),
        urllc_dbm: watts_to_dbm(result.urllc_total_w),
        embb_dbm: watts_to_dbm(result.embb_total_w),
        result: &result,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::invalid(e.to_string()))?;
    writeln!(out, "{json}")?;
    Ok(0)
}

fn sweep_cmd(a: SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = a.config.load()?;
    if let Some(p) = &a.preset {
        cfg.apply_preset(p)?;
    }
    if let Some(d) = a.drops {
        cfg.drops = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.eps {
        cfg.traffic.epsilon = e;
    }
    if let Some(t) = a.table_trials {
        cfg.table.trials = t;
    }
    let result = run_sweep_to_dir(&cfg, &a.out)?;
    for f in &result.files {
        writeln!(out, "wrote {}", f.display())?;
    }
    if result.files.is_empty() {
        writeln!(out, "nothing to do: empty sweep")?;
    }
    Ok(0)
}

fn verify_cmd(a: VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let checks = verify::run(a.suite, a.seed)?;
    let mut failed = 0;
    for c in &checks {
        writeln!(out, "{c}")?;
        failed += usize::from(!c.passed);
    }
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}
