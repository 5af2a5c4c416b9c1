//! Acceptance criteria. Runs as a plain binary so that every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p noma-slice --test acceptance -- 3 4`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use noma_slice::alloc::{allocate_nbcd, allocate_nfea, AllocContext, BcdConfig, Scenario};
use noma_slice::channel::{distance_from_mean_snr, ChannelState, Geometry};
use noma_slice::exper::{mean_embb_power_dbm, ScenarioConfig, SchemeSpec};
use noma_slice::grid::{AccessScheme, ResourceGrid, TrafficSpec};
use noma_slice::outage::{
    estimate_outage, single_freq_power, CrnDraws, Interference, LazyOutageTable, OutageLookup, OutageTable,
    TableAxes, TableParams,
};
use noma_slice::rng;
use noma_slice::units::{db_to_linear, dbm_to_watts, linear_to_db};
use noma_slice::waterfill::{embb_power, il_power, sic_power};

type Outcome = Result<String, String>;

fn sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

// ---------------------------------------------------------------- 1

fn distances() -> Outcome {
    let geom = Geometry::default();
    let noise = geom.noise_w();
    let expected = [(30.0, 464.56), (40.0, 261.2), (50.0, 146.9), (60.0, 82.6), (70.0, 46.5), (80.0, 26.1)];
    let mut worst = 0.0f64;
    let mut msgs = Vec::new();
    for (db, d) in expected {
        let got = distance_from_mean_snr(db_to_linear(db), &geom, noise);
        worst = worst.max((got - d).abs());
        msgs.push(format!("{db} dB -> {got:.2} m"));
    }
    let text = format!("max |error| {worst:.3} m ({})", msgs.join(", "));
    if worst <= 0.5 {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------- 2

/// Exhaustive search for the minimum total power meeting `target` bits over
/// channels whose rate is `log2(1 + gain * p)`. The first coordinates run
/// over a grid of `step`; the last one is solved exactly.
fn grid_search(gains: &[f64], target: f64, max: f64, step: f64) -> f64 {
    let n = gains.len();
    let points = (max / step).round() as usize + 1;
    let grid: Vec<f64> = (0..points).map(|k| k as f64 * step).collect();
    let last = gains[n - 1];
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; n - 1];
    loop {
        let mut spent = 0.0;
        let mut bits = 0.0;
        for (i, &k) in idx.iter().enumerate() {
            spent += grid[k];
            bits += (1.0 + gains[i] * grid[k]).log2();
        }
        let need = (target - bits).max(0.0);
        let tail = (need.exp2() - 1.0) / last;
        best = best.min(spent + tail);
        // Odometer over the first n - 1 coordinates.
        let mut i = 0;
        loop {
            if i == idx.len() {
                return best;
            }
            idx[i] += 1;
            if idx[i] < points {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn oracle_check(name: &str, gains: &[f64], target: f64, powers: &[f64], worst_gap: &mut f64, worst_tight: &mut f64) -> Result<(), String> {
    let level = gains
        .iter()
        .zip(powers)
        .filter(|(_, p)| **p > 0.0)
        .map(|(g, p)| p + 1.0 / g)
        .fold(0.0, f64::max);
    if level == 0.0 {
        return Err(format!("{name}: no active channel"));
    }
    let step = 1e-3 * level;
    let closed: f64 = powers.iter().sum();
    let searched = grid_search(gains, target, 2.0 * level, step);
    let bits: f64 = gains.iter().zip(powers).map(|(g, p)| (1.0 + g * p).log2()).sum();
    let tight = (bits - target).abs() / target;
    *worst_tight = worst_tight.max(tight);
    *worst_gap = worst_gap.max((searched - closed) / step);
    if closed > searched + 1e-9 * level {
        return Err(format!("{name}: closed form {closed} above grid search {searched}"));
    }
    if searched - closed > step {
        return Err(format!("{name}: grid search {searched} more than one step above {closed}"));
    }
    if tight > 1e-9 {
        return Err(format!("{name}: rate off target by {tight:e}"));
    }
    Ok(())
}

fn waterfill_oracle() -> Outcome {
    let mut r = rng::seeded(2024);
    let (mut gap, mut tight) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = r.random_range(1..=3usize);
        let snr: Vec<f64> = (0..n).map(|_| 10f64.powf(r.random_range(-1.0..3.0))).collect();
        let rate = r.random_range(0.5..5.0);
        let target = rate * n as f64;

        let pe = embb_power(&snr, rate).map_err(|e| e.to_string())?;
        oracle_check("embb", &snr, target, &pe, &mut gap, &mut tight)?;

        // Interference on the shared channels, including some idle ones.
        let interference: Vec<f64> = (0..n)
            .map(|_| if r.random_bool(0.2) { 0.0 } else { 10f64.powf(r.random_range(-3.0..0.0)) })
            .collect();
        let ps = sic_power(AccessScheme::Noma, &interference, &snr, rate).map_err(|e| e.to_string())?;
        // SINR at the eMBB receiver while the URLLC stream is undecoded.
        let sinr_gain: Vec<f64> = snr.iter().zip(&interference).map(|(g, i)| g / (1.0 + g * i)).collect();
        oracle_check("sic", &sinr_gain, target, &ps, &mut gap, &mut tight)?;

        if interference.iter().any(|i| *i > 0.0) {
            let pil = il_power(&interference, rate).map_err(|e| e.to_string())?;
            let floor = interference.iter().copied().filter(|i| *i > 0.0).fold(f64::INFINITY, f64::min);
            let il_gain: Vec<f64> = interference.iter().map(|&i| 1.0 / if i > 0.0 { i } else { floor }).collect();
            oracle_check("il", &il_gain, target, &pil, &mut gap, &mut tight)?;
        }
    }
    Ok(format!("200 instances x 3 solvers; worst grid gap {gap:.3} steps, worst tightness {tight:.1e}"))
}

// ---------------------------------------------------------------- 3, 4

const TABLE_TRIALS: u64 = 10_000_000;

fn shared_table() -> &'static OutageTable {
    static TABLE: OnceLock<OutageTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cfg = ScenarioConfig::default();
        let params = TableParams {
            mean_snr: db_to_linear(30.0),
            freqs: 12,
            rate: 1.0,
            minislots: 1,
            trials: TABLE_TRIALS,
            seed: cfg.seed,
        };
        let axes = TableAxes::standard()
            .with_rows(vec![Interference::None, Interference::Dbm(0.0)])
            .expect("rows");
        OutageTable::build(params, axes).expect("table build")
    })
}

fn outage_anchors() -> Outcome {
    let t = shared_table();
    let n = TABLE_TRIALS as f64;
    let a = t.lookup(9.0, Interference::Dbm(0.0)).ok_or("missing cell")?;
    let b = t.lookup(8.0, Interference::None).ok_or("missing cell")?;
    let (ta, tb) = (2.38e-5, 9.3e-6);
    let (sa, sb) = (3.0 * sigma(ta, n), 3.0 * sigma(tb, n));
    let text = format!(
        "p(9 dBm, 0 dBm) = {a:.3e} (ref {ta:.2e} +- {sa:.1e}); p(8 dBm, none) = {b:.3e} (ref {tb:.2e} +- {sb:.1e})"
    );
    if (a - ta).abs() <= sa && (b - tb).abs() <= sb {
        Ok(text)
    } else {
        Err(text)
    }
}

fn min_feasible() -> Outcome {
    let t = shared_table();
    let with = t.min_feasible_power(dbm_to_watts(0.0), 1e-5).map_err(|e| e.to_string())?;
    let without = t.min_feasible_power(0.0, 1e-5).map_err(|e| e.to_string())?;
    let row = |r: Interference, d: f64| t.lookup(d, r).unwrap_or(f64::NAN);
    let text = format!(
        "P_e = 0 dBm -> {with} dBm (expected 10); none -> {without} dBm (expected 8); p(8, none) = {:.3e}, p(9, none) = {:.3e}",
        row(Interference::None, 8.0),
        row(Interference::None, 9.0)
    );
    if with == 10.0 && without == 8.0 {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------- 5

fn single_frequency() -> Outcome {
    let eps = 1e-2;
    let trials = 100_000u64;
    let bound = 3.0 * sigma(eps, trials as f64);
    let mut r = rng::seeded(55);
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let mean = 10f64.powf(r.random_range(0.0..7.0));
        let rate = r.random_range(0.1..4.0);
        let pe = if r.random_bool(0.25) { 0.0 } else { 10f64.powf(r.random_range(-5.0..-1.0)) };
        let p = single_freq_power(rate, mean, eps, pe).map_err(|e| e.to_string())?;
        let est = estimate_outage(&[p], &[pe], mean, rate, trials, rng::derive_seed(55, &[k])).map_err(|e| e.to_string())?;
        worst = worst.max((est.p_hat - eps).abs());
        if (est.p_hat - eps).abs() > bound {
            return Err(format!("triple {k}: p_hat {:.4e} outside {eps} +- {bound:.1e}", est.p_hat));
        }
    }
    Ok(format!("20 triples, worst |p_hat - eps| = {worst:.2e} <= 3 sigma {bound:.2e}"))
}

// ---------------------------------------------------------------- 6

fn embb_reference() -> Outcome {
    let cfg = ScenarioConfig::default();
    let schemes = [SchemeSpec::noma(), SchemeSpec::oma(3), SchemeSpec::oma(6), SchemeSpec::oma(9)];
    let reference = [
        (30.0, [33.21, 34.18, 38.89, 58.27]),
        (50.0, [14.21, 14.44, 19.23, 38.74]),
        (80.0, [-9.67, -9.67, -9.67, 8.65]),
    ];
    let mut cells = Vec::new();
    let mut misses = 0;
    for (db, refs) in reference {
        for (s, want) in schemes.iter().zip(refs) {
            let got = mean_embb_power_dbm(&cfg, s, db_to_linear(db), 2000).map_err(|e| e.to_string())?;
            let ok = (got - want).abs() <= 0.5;
            misses += usize::from(!ok);
            cells.push(format!("{db}dB {s}: {got:.2} (ref {want}){}", if ok { "" } else { " MISS" }));
        }
    }
    let text = format!("{misses} of 12 cells outside 0.5 dB; {}", cells.join("; "));
    if misses == 0 {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------- 7

fn crn_monotone() -> Outcome {
    let crn = CrnDraws::new(12, 100_000, 77).map_err(|e| e.to_string())?;
    let mut r = rng::seeded(77);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..100 {
        let mean = 10f64.powf(r.random_range(2.0..5.0));
        let pu: Vec<f64> = (0..12).map(|_| 10f64.powf(r.random_range(-4.0..-1.0))).collect();
        let pe: Vec<f64> = (0..12).map(|_| if r.random_bool(0.3) { 0.0 } else { 10f64.powf(r.random_range(-4.0..-1.0)) }).collect();
        let base = crn.estimate(&pu, &pe, mean, 1.0).map_err(|e| e.to_string())?.outages;
        for i in 0..12 {
            let mut lower = pu.clone();
            lower[i] *= 0.9;
            let est = crn.estimate(&lower, &pe, mean, 1.0).map_err(|e| e.to_string())?.outages;
            checks += 1;
            violations += usize::from(est < base);
        }
    }
    let text = format!("{violations} violations over {checks} coordinate reductions");
    if violations == 0 {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------- 8, 9

struct DropSetup {
    scenario: Scenario,
    crn: CrnDraws,
    trials: u64,
}

fn noma_setup(eps: f64, trials: u64) -> DropSetup {
    let scenario = Scenario {
        grid: ResourceGrid::nr_default(),
        traffic: TrafficSpec::new(8640.0, 2160.0 / 7.0, eps, 7, 0).expect("traffic"),
        scheme: AccessScheme::Noma,
        urllc_freqs: 12,
        urllc_minislots: 1,
    };
    DropSetup { scenario, crn: CrnDraws::new(12, trials as usize, 8).expect("draws"), trials }
}

fn drop_channel(seed: u64, drop: u64, embb_distance: f64, urllc_distance: f64) -> ChannelState {
    let geom = Geometry::default();
    let noise = geom.noise_w();
    let ge = noma_slice::channel::mean_snr_from_distance(embb_distance, &geom, noise).expect("distance");
    let gu = noma_slice::channel::mean_snr_from_distance(urllc_distance, &geom, noise).expect("distance");
    let mut r = rng::stream(seed, &[rng::tag::EMBB_FADING, drop]);
    ChannelState::draw(12, ge, gu, noise, &mut r).expect("channel")
}

fn lazy_table(setup: &DropSetup, ch: &ChannelState) -> LazyOutageTable {
    let params = TableParams {
        mean_snr: ch.urllc_mean_snr,
        freqs: 12,
        rate: setup.scenario.urllc_rate().expect("rate"),
        minislots: 1,
        trials: setup.trials,
        seed: 3,
    };
    LazyOutageTable::new(params, TableAxes::uniform(-40.0, 30.0, 1.0).expect("axes")).expect("table")
}

fn ctx<'a>(setup: &'a DropSetup, table: &'a dyn OutageLookup, seed: u64) -> AllocContext<'a> {
    AllocContext {
        table,
        crn: Some(&setup.crn),
        bcd: BcdConfig { crn_trials: setup.trials as usize, ..BcdConfig::default() },
        evidence_trials: setup.trials,
        seed,
    }
}

/// URLLC rate seen by the eMBB receiver before cancellation, from scratch.
fn sic_rate(ch: &ChannelState, freqs: &[usize], pu: &[f64], pe: &[f64]) -> f64 {
    let sum: f64 = freqs
        .iter()
        .map(|&f| (1.0 + ch.embb_snr[f] * pu[f] / (1.0 + ch.embb_snr[f] * pe[f])).log2())
        .sum();
    sum / freqs.len() as f64
}

fn dominance() -> Outcome {
    let eps = 1e-2;
    let setup = noma_setup(eps, 100_000);
    let rate = setup.scenario.urllc_rate().map_err(|e| e.to_string())?;
    let mut r = rng::seeded(88);
    let (mut dominated, mut feasible, mut sic) = (0, 0, 0);
    let mut saving = 0.0;
    let drops = 100;
    for d in 0..drops {
        let de = r.random_range(30.0..400.0);
        let du = r.random_range(30.0..150.0);
        let ch = drop_channel(88, d, de, du);
        let table = lazy_table(&setup, &ch);
        let c = ctx(&setup, &table, d);
        let fea = allocate_nfea(&setup.scenario, &ch, &c).map_err(|e| format!("drop {d}: {e}"))?;
        let bcd = allocate_nbcd(&setup.scenario, &ch, &c).map_err(|e| format!("drop {d}: {e}"))?;
        dominated += usize::from(bcd.urllc_total_w <= fea.urllc_total_w);
        saving += linear_to_db(fea.urllc_total_w / bcd.urllc_total_w);
        feasible += usize::from([&fea, &bcd].iter().all(|a| a.evidence.p_hat <= eps + a.evidence.ci_halfwidth));
        sic += usize::from([&fea, &bcd].iter().all(|a| {
            let info = sic_rate(&ch, &a.sets.urllc_freqs, a.urllc_power.as_slice(), a.embb_power.as_slice());
            info >= rate - 1e-9
        }));
    }
    let text = format!(
        "eps {eps}: BCD <= N-fea on {dominated}/{drops}, feasible {feasible}/{drops}, SIC met {sic}/{drops}, mean BCD saving {:.2} dB",
        saving / drops as f64
    );
    if dominated == drops as usize && feasible == drops as usize && sic == drops as usize {
        Ok(text)
    } else {
        Err(text)
    }
}

fn sic_floor() -> Outcome {
    let eps = 1e-3;
    let setup = noma_setup(eps, 100_000);
    let margin = db_to_linear(0.5);
    let mut within = 0;
    let mut total = 0;
    let mut per_distance = Vec::new();
    for du in [25.0, 50.0] {
        let mut here = 0;
        for d in 0..50u64 {
            let ch = drop_channel(99, d, 261.2, du);
            let table = lazy_table(&setup, &ch);
            let c = ctx(&setup, &table, d);
            let bcd = allocate_nbcd(&setup.scenario, &ch, &c).map_err(|e| format!("drop {d}: {e}"))?;
            let floor = bcd.sic_per_minislot_w();
            here += usize::from(bcd.urllc_per_minislot_w() <= floor * margin);
            total += 1;
        }
        within += here;
        per_distance.push(format!("d_u {du} m: {here}/50"));
    }
    let frac = within as f64 / total as f64;
    let text = format!("eps {eps}: {:.0}% of drops within 0.5 dB of the SIC floor ({})", 100.0 * frac, per_distance.join(", "));
    if frac >= 0.9 {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------- main

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "distance inversion", distances),
        (2, "water-filling matches exhaustive search", waterfill_oracle),
        (3, "outage curve anchor points", outage_anchors),
        (4, "minimum feasible table power", min_feasible),
        (5, "single-frequency closed form", single_frequency),
        (6, "mean eMBB power reference values", embb_reference),
        (7, "outage monotone under common random numbers", crn_monotone),
        (8, "BCD dominance and feasibility", dominance),
        (9, "SIC floor for close URLLC users", sic_floor),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(t) => println!("PASS criterion {n} ({name}, {secs:.1}s): {t}"),
            Err(t) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1}s): {t}");
            }
        }
    }
    if wanted.is_empty() || wanted.contains(&10) {
        println!(
            "N/A  criterion 10 (full-scale sweep curves): not run at desk scale; covered by criteria 6-9 and the scheme-ordering test"
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
