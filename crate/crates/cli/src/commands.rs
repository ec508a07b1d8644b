use std::path::{Path, PathBuf};

use ain_core::beamforming::phase_condition;
use ain_core::channel::{cross_phase, ChannelModel, ChannelRealization, Field, LinearNetwork, MagnitudeBounds};
use ain_core::metrics::{
    aligned_sweep, average_sweeps, db_to_linear, dof_slope, sum_rate, tdma_sweep, LinkMetrics, SinrMethod,
    MIN_CUT_DOF,
};
use ain_core::multihop::{
    reduce_to_two_hops, solve_gains, two_hop_infeasibility, GainAssignment, SolveReport, SolverOptions,
};
use ain_core::rational::{
    build_config, monomial_directions, run_indexed_trial, BatchTally, RationalRow, RationalSetup, RealChannel,
    DEFAULT_EPSILON, DEFAULT_GAMMA,
};
use ain_core::rng::{seeded, substream};
use ain_core::transceiver::AlignedLink;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, parse_grid, positive, Overrides, Unit};
use crate::output::{ensure_dir, in_dir, write_csv, write_json};
use crate::Failure;

const DEFAULT_GRID: &str = "30,40,50,60";
const DEFAULT_FRAMES: u64 = 20_000;
const RATIONAL_GRID: &str = "1e4,1e6,1e8,1e10";
const TRIAL_CHUNK: u64 = 1000;
const SOLVER_SUCCESS_FRACTION: f64 = 0.95;

fn out_dir(o: &Overrides) -> PathBuf {
    o.out.clone().unwrap_or_else(|| PathBuf::from("ain-out"))
}

fn sinr_method(o: &Overrides, frames: u64) -> Result<SinrMethod, Failure> {
    match o.sinr.as_deref().unwrap_or("monte-carlo") {
        "monte-carlo" => Ok(SinrMethod::MonteCarlo { frames: frames as usize }),
        "analytic" => Ok(SinrMethod::Analytic),
        other => Err(Failure::Config(format!("unknown SINR method `{other}` (monte-carlo or analytic)"))),
    }
}

fn bounds(o: &Overrides) -> Result<MagnitudeBounds, Failure> {
    o.bounds.as_deref().map_or(Ok(MagnitudeBounds::default()), config::parse_bounds)
}

fn read_channel(path: &Path) -> Result<ChannelRealization, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read channel {}: {e}", path.display())))?;
    ChannelRealization::from_json(&text)
        .map_err(|e| Failure::Config(format!("malformed channel file {}: {e}", path.display())))
}

fn to_db(x: f64) -> f64 {
    10.0 * x.max(f64::MIN_POSITIVE).log10()
}

#[derive(Debug, Clone, Serialize)]
struct SimulateConfig {
    m: usize,
    seeds: u64,
    seed: u64,
    p_grid_db: Vec<f64>,
    frames: u64,
    noise_var: f64,
    scheme: String,
    sinr: SinrMethod,
    bounds: MagnitudeBounds,
}

#[derive(Debug, Serialize)]
struct Refusal {
    seed: u64,
    error: String,
}

#[derive(Debug, Serialize)]
struct SchemeSummary {
    scheme: String,
    #[serde(rename = "M")]
    m: usize,
    target_dof: f64,
    dof_slope: Option<f64>,
    mean_sum_rate: Vec<f64>,
    per_seed_dof_slope: Vec<Option<f64>>,
    seeds_used: Vec<u64>,
    refused: Vec<Refusal>,
    max_leakage: f64,
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    version: &'static str,
    config_hash: String,
    config: SimulateConfig,
    /// Min-cut outer bound on DoF for this network, a constant reference.
    min_cut_dof_bound: f64,
    results: Vec<SchemeSummary>,
}

pub fn simulate(o: Overrides) -> Result<(), Failure> {
    o.only("simulate", &["m", "seeds", "seed", "p_grid", "trials", "noise_var", "scheme", "sinr", "bounds"])?;
    let m = o.m.unwrap_or(2);
    let frames = o.trials.unwrap_or(DEFAULT_FRAMES);
    let cfg = SimulateConfig {
        m,
        seeds: o.seeds.unwrap_or(10),
        seed: o.seed.unwrap_or(0),
        p_grid_db: parse_grid(o.p_grid.as_deref().unwrap_or(DEFAULT_GRID), Unit::Db)?,
        frames,
        noise_var: positive("noise variance", o.noise_var.unwrap_or(1.0))?,
        scheme: o.scheme.clone().unwrap_or_else(|| "aligned".into()),
        sinr: sinr_method(&o, frames)?,
        bounds: bounds(&o)?,
    };
    if m == 0 || cfg.seeds == 0 || frames == 0 {
        return Err(Failure::Config("m, seeds and trials must be at least 1".into()));
    }
    let schemes: Vec<&str> = match cfg.scheme.as_str() {
        "aligned" => vec!["aligned"],
        "tdma" => vec!["tdma"],
        "both" => vec!["aligned", "tdma"],
        other => return Err(Failure::Config(format!("unknown scheme `{other}` (aligned, tdma or both)"))),
    };
    if schemes.contains(&"tdma") && m < 2 {
        return Err(Failure::Config("the TDMA baseline needs m >= 2 so both users get a slot".into()));
    }
    let hash = config::config_hash(&cfg);
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + cfg.seeds).collect();
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut refused_total = 0;
    for scheme in schemes {
        let runs: Vec<(u64, ain_core::Result<LinkMetrics>)> = seeds
            .par_iter()
            .map(|&seed| {
                let run = || -> ain_core::Result<LinkMetrics> {
                    let ch = ChannelRealization::sample(seed, 2, m, ChannelModel::TimeVarying, cfg.bounds)?;
                    let mut rng = substream(seed, m as u64);
                    if scheme == "aligned" {
                        let net = LinearNetwork::symbol_extension(&ch)?;
                        aligned_sweep(&net, &cfg.p_grid_db, cfg.noise_var, cfg.sinr, &mut rng)
                    } else {
                        tdma_sweep(&ch, &cfg.p_grid_db, cfg.noise_var, cfg.sinr, &mut rng)
                    }
                };
                (seed, run())
            })
            .collect();
        let mut used = Vec::new();
        let mut sweeps = Vec::new();
        let mut refused = Vec::new();
        for (seed, run) in runs {
            match run {
                Ok(sweep) => {
                    for (k, p_db) in cfg.p_grid_db.iter().enumerate() {
                        for (stream, sinr) in sweep.per_stream_sinr[k].iter().enumerate() {
                            rows.push((
                                scheme,
                                m,
                                *p_db,
                                stream,
                                to_db(*sinr),
                                sweep.sum_rate[k],
                                sweep.residual_interference_ratio,
                                seed,
                            ));
                        }
                    }
                    used.push(seed);
                    sweeps.push(sweep);
                }
                Err(e) if e.is_numeric() => refused.push(Refusal { seed, error: e.to_string() }),
                Err(e) => return Err(e.into()),
            }
        }
        refused_total += refused.len();
        let (mean, slope) = if sweeps.is_empty() {
            (Vec::new(), None)
        } else {
            average_sweeps(&sweeps, Field::Complex)?
        };
        if let Some(s) = slope {
            println!("{scheme} M={m}: dof_slope {s:.4} over {} seeds", sweeps.len());
        }
        results.push(SchemeSummary {
            scheme: scheme.to_string(),
            m,
            target_dof: if scheme == "aligned" { (2 * m - 1) as f64 / m as f64 } else { 1.0 },
            dof_slope: slope,
            mean_sum_rate: mean,
            per_seed_dof_slope: sweeps.iter().map(|s| s.dof_slope).collect(),
            seeds_used: used,
            refused,
            max_leakage: sweeps.iter().map(|s| s.residual_interference_ratio).fold(0.0, f64::max),
        });
    }
    let dir = out_dir(&o);
    ensure_dir(&dir)?;
    write_csv(
        &in_dir(&dir, "simulate.csv"),
        &hash,
        &["scheme", "M", "P_db", "stream", "sinr_db", "sum_rate", "leakage", "seed"],
        &rows,
    )?;
    let summary = SimulateSummary {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        config: cfg,
        min_cut_dof_bound: MIN_CUT_DOF,
        results,
    };
    write_json(&in_dir(&dir, "summary.json"), &summary)?;
    if refused_total > 0 {
        return Err(Failure::Numeric(format!(
            "{refused_total} seed(s) refused as numerically degenerate; see refused entries in summary.json"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct RationalConfigRecord {
    m: usize,
    p_grid_db: Vec<f64>,
    trials: u64,
    channel_seed: Option<u64>,
    channel: String,
    gamma: f64,
    epsilon: f64,
    noise_var: f64,
}

#[derive(Debug, Serialize)]
struct RationalPoint {
    #[serde(flatten)]
    row: RationalRow,
    q_max: i64,
    min_distance: [f64; 4],
    max_tx_power: [f64; 4],
    trials: u64,
}

#[derive(Debug, Serialize)]
struct RationalSummary {
    version: &'static str,
    config_hash: String,
    config: RationalConfigRecord,
    points: Vec<RationalPoint>,
}

pub fn rational(o: Overrides) -> Result<(), Failure> {
    o.only("rational", &["m", "seed", "p_grid", "trials", "channel", "gamma", "epsilon", "noise_var"])?;
    let (channel, channel_seed) = match &o.channel {
        Some(path) => (read_channel(path)?, None),
        None => {
            let seed = o.seed.unwrap_or(3);
            (ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantReal, MagnitudeBounds::default())?, Some(seed))
        }
    };
    let noise_var = o.noise_var.unwrap_or(1.0);
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Failure::Config(format!("noise variance must be nonnegative, got {noise_var}")));
    }
    let cfg = RationalConfigRecord {
        m: o.m.unwrap_or(2),
        p_grid_db: parse_grid(o.p_grid.as_deref().unwrap_or(RATIONAL_GRID), Unit::Absolute)?,
        trials: o.trials.unwrap_or(10_000),
        channel_seed,
        channel: channel.to_json(),
        gamma: positive("gamma", o.gamma.unwrap_or(DEFAULT_GAMMA))?,
        epsilon: o.epsilon.unwrap_or(DEFAULT_EPSILON),
        noise_var,
    };
    if cfg.m == 0 || cfg.trials == 0 {
        return Err(Failure::Config("m and trials must be at least 1".into()));
    }
    let rc = RealChannel::from_realization(&channel).map_err(|e| Failure::Config(e.to_string()))?;
    let dirs = monomial_directions(&rc, cfg.m)?;
    let hash = config::config_hash(&cfg);
    let base_seed = channel_seed.unwrap_or(0);
    let mut points = Vec::new();
    for (k, p_db) in cfg.p_grid_db.iter().enumerate() {
        let p = db_to_linear(*p_db);
        let rcfg = build_config(cfg.m, cfg.gamma, cfg.epsilon, p, &dirs)?;
        let setup = RationalSetup::new(rc, rcfg.clone(), cfg.noise_var)?;
        // one trial stream family per grid point
        let batch_seed = base_seed ^ ((k as u64 + 1) << 32);
        let chunks = cfg.trials.div_ceil(TRIAL_CHUNK);
        let tally = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut t = BatchTally::default();
                for i in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(cfg.trials) {
                    t.add(&run_indexed_trial(&setup, batch_seed, i)?);
                }
                Ok(t)
            })
            .collect::<ain_core::Result<Vec<BatchTally>>>()?
            .iter()
            .fold(BatchTally::default(), |acc, t| acc.merge(t));
        let row = RationalRow::from_tally(&rcfg, &tally);
        println!(
            "P={p:.3e} q={}: SER R1 {:.4} R2 {:.4} D1 {:.4} D2 {:.4}",
            rcfg.q_max, row.relay1_ser, row.relay2_ser, row.d1_ser, row.d2_ser
        );
        points.push(RationalPoint {
            row,
            q_max: rcfg.q_max,
            min_distance: setup.min_distance,
            max_tx_power: tally.max_power,
            trials: tally.trials,
        });
    }
    let dir = out_dir(&o);
    ensure_dir(&dir)?;
    let rows: Vec<&RationalRow> = points.iter().map(|p| &p.row).collect();
    write_csv(
        &in_dir(&dir, "rational.csv"),
        &hash,
        &["P", "M", "gamma", "epsilon", "relay1_ser", "relay2_ser", "d1_ser", "d2_ser", "rate_lb_1", "rate_lb_2"],
        &rows,
    )?;
    write_json(
        &in_dir(&dir, "rational.json"),
        &RationalSummary { version: env!("CARGO_PKG_VERSION"), config_hash: hash, config: cfg, points },
    )
}

#[derive(Debug, Clone, Serialize)]
struct MultihopConfig {
    hops: usize,
    seeds: u64,
    seed: u64,
    tolerance: f64,
    reduce: bool,
    m: Option<usize>,
    p_grid_db: Option<Vec<f64>>,
    noise_var: Option<f64>,
    sinr: Option<SinrMethod>,
}

#[derive(Debug, Serialize)]
struct GainReport {
    seed: u64,
    hops: usize,
    converged: bool,
    residual: f64,
    diag_min: f64,
    iters: usize,
    restarts: usize,
    gains: Vec<[f64; 2]>,
}

impl GainReport {
    fn new(seed: u64, hops: usize, r: &SolveReport) -> Self {
        Self {
            seed,
            hops,
            converged: r.converged,
            residual: r.residual,
            diag_min: r.diag_min,
            iters: r.iters,
            restarts: r.restarts,
            gains: r.gains.to_pairs(),
        }
    }
}

pub fn multihop(o: Overrides) -> Result<(), Failure> {
    let hops = o.hops.unwrap_or(3);
    let reduce = o.reduce.unwrap_or(false);
    if hops < 2 {
        return Err(Failure::Config(format!("need at least 2 hops, got {hops}")));
    }
    if reduce && hops < 3 {
        return Err(Failure::Config("--reduce needs at least 3 hops".into()));
    }
    let dir = out_dir(&o);
    if hops == 2 {
        o.only("multihop", &["hops", "seeds", "seed", "tolerance"])?;
        let cfg = MultihopConfig {
            hops,
            seeds: o.seeds.unwrap_or(1000),
            seed: o.seed.unwrap_or(0),
            tolerance: o.tolerance.unwrap_or(1e-6),
            reduce,
            m: None,
            p_grid_db: None,
            noise_var: None,
            sinr: None,
        };
        return ratio_gaps(cfg, &dir);
    }
    if reduce {
        o.only("multihop", &["hops", "seeds", "seed", "reduce", "m", "p_grid", "noise_var", "trials", "sinr"])?;
        let frames = o.trials.unwrap_or(DEFAULT_FRAMES);
        let cfg = MultihopConfig {
            hops,
            seeds: o.seeds.unwrap_or(10),
            seed: o.seed.unwrap_or(0),
            tolerance: 0.0,
            reduce,
            m: Some(o.m.unwrap_or(2)),
            p_grid_db: Some(parse_grid(o.p_grid.as_deref().unwrap_or(DEFAULT_GRID), Unit::Db)?),
            noise_var: Some(positive("noise variance", o.noise_var.unwrap_or(1.0))?),
            sinr: Some(sinr_method(&o, frames)?),
        };
        return reduced_sweep(cfg, &dir);
    }
    o.only("multihop", &["hops", "seeds", "seed", "tolerance", "reduce"])?;
    let cfg = MultihopConfig {
        hops,
        seeds: o.seeds.unwrap_or(100),
        seed: o.seed.unwrap_or(0),
        tolerance: positive("tolerance", o.tolerance.unwrap_or(1e-10))?,
        reduce,
        m: None,
        p_grid_db: None,
        noise_var: None,
        sinr: None,
    };
    solve_many(cfg, &dir)
}

fn ratio_gaps(cfg: MultihopConfig, dir: &Path) -> Result<(), Failure> {
    let hash = config::config_hash(&cfg);
    let gaps: Vec<(u64, f64)> = (cfg.seed..cfg.seed + cfg.seeds)
        .into_par_iter()
        .map(|seed| {
            let ch = ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default())?;
            Ok((seed, two_hop_infeasibility(&ch)?))
        })
        .collect::<ain_core::Result<_>>()?;
    let mut sorted: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    sorted.sort_by(f64::total_cmp);
    let below = sorted.iter().filter(|g| **g <= cfg.tolerance).count();
    let (min, max) = (sorted.first().copied(), sorted.last().copied());
    let median = sorted.get(sorted.len() / 2).copied();
    println!("2-hop ratio gap over {} channels: min {:.3e}, {below} at or below {:.1e}", sorted.len(), min.unwrap_or(f64::NAN), cfg.tolerance);
    ensure_dir(dir)?;
    write_csv(&in_dir(dir, "multihop.csv"), &hash, &["seed", "ratio_gap"], &gaps)?;
    write_json(
        &in_dir(dir, "multihop.json"),
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": hash,
            "config": cfg,
            "hops": 2,
            "count": sorted.len(),
            "min_ratio_gap": min,
            "median_ratio_gap": median,
            "max_ratio_gap": max,
            "at_or_below_tolerance": below,
        }),
    )
}

fn solve_many(cfg: MultihopConfig, dir: &Path) -> Result<(), Failure> {
    let hash = config::config_hash(&cfg);
    let opts = |seed| SolverOptions { tol: cfg.tolerance, jitter_seed: seed, ..Default::default() };
    let reports: Vec<GainReport> = (cfg.seed..cfg.seed + cfg.seeds)
        .into_par_iter()
        .map(|seed| {
            let ch = ChannelRealization::sample(seed, cfg.hops, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default())?;
            let r = solve_gains(&ch, &GainAssignment::unit(cfg.hops - 1), &opts(seed))?;
            Ok(GainReport::new(seed, cfg.hops, &r))
        })
        .collect::<ain_core::Result<_>>()?;
    let converged = reports.iter().filter(|r| r.converged).count();
    println!("{}-hop gain solving: {converged}/{} converged", cfg.hops, reports.len());
    ensure_dir(dir)?;
    let rows: Vec<_> = reports.iter().map(|r| (r.seed, r.converged, r.residual, r.diag_min, r.iters, r.restarts)).collect();
    write_csv(
        &in_dir(dir, "multihop.csv"),
        &hash,
        &["seed", "converged", "residual", "diag_min", "iters", "restarts"],
        &rows,
    )?;
    let needed = (SOLVER_SUCCESS_FRACTION * reports.len() as f64).ceil() as usize;
    write_json(
        &in_dir(dir, "multihop.json"),
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": hash,
            "config": cfg,
            "hops": cfg.hops,
            "instances": reports.len(),
            "converged": converged,
            "reports": reports,
        }),
    )?;
    if converged < needed {
        return Err(Failure::Numeric(format!("only {converged} of {} instances converged (need {needed})", cfg.seeds)));
    }
    Ok(())
}

fn reduced_sweep(cfg: MultihopConfig, dir: &Path) -> Result<(), Failure> {
    let hash = config::config_hash(&cfg);
    let m = cfg.m.expect("set for reduction");
    let grid = cfg.p_grid_db.clone().expect("set for reduction");
    let noise_var = cfg.noise_var.expect("set for reduction");
    let method = cfg.sinr.expect("set for reduction");
    let runs: Vec<(u64, ain_core::Result<Vec<f64>>)> = (cfg.seed..cfg.seed + cfg.seeds)
        .into_par_iter()
        .map(|seed| {
            let run = || -> ain_core::Result<Vec<f64>> {
                let ch = ChannelRealization::sample(seed, cfg.hops, m, ChannelModel::TimeVarying, MagnitudeBounds::default())?;
                let inner = GainAssignment::generic(cfg.hops - 2, &mut seeded(seed));
                let reduced = reduce_to_two_hops(&ch, &inner)?;
                let net = LinearNetwork::symbol_extension(&reduced.channel)?;
                let mut rng = substream(seed, m as u64);
                grid.iter()
                    .map(|db| {
                        let link = AlignedLink::aligned(net.clone(), &reduced.link_config(db_to_linear(*db), noise_var))?;
                        let sinr = match method {
                            SinrMethod::Analytic => link.analytic_sinr()?.concat(),
                            SinrMethod::MonteCarlo { frames } => link.measure(frames, &mut rng)?.stream_sinr(),
                        };
                        Ok(sum_rate(&sinr, m, net.field))
                    })
                    .collect()
            };
            (seed, run())
        })
        .collect();
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    let mut refused = Vec::new();
    for (seed, run) in runs {
        match run {
            Ok(r) => {
                for (db, rate) in grid.iter().zip(&r) {
                    rows.push((seed, *db, *rate));
                }
                rates.push(r);
            }
            Err(e) if e.is_numeric() => refused.push(Refusal { seed, error: e.to_string() }),
            Err(e) => return Err(e.into()),
        }
    }
    let mean: Vec<f64> = (0..grid.len())
        .map(|k| rates.iter().map(|r| r[k]).sum::<f64>() / rates.len().max(1) as f64)
        .collect();
    let slope = if rates.is_empty() { None } else { dof_slope(&mean, &grid, Field::Complex).ok() };
    if let Some(s) = slope {
        println!("{}-hop reduction M={m}: dof_slope {s:.4} over {} seeds", cfg.hops, rates.len());
    }
    ensure_dir(dir)?;
    write_csv(&in_dir(dir, "multihop.csv"), &hash, &["seed", "P_db", "sum_rate"], &rows)?;
    let refused_count = refused.len();
    write_json(
        &in_dir(dir, "multihop.json"),
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": hash,
            "config": cfg,
            "hops": cfg.hops,
            "M": m,
            "target_dof": (2 * m - 1) as f64 / m as f64,
            "dof_slope": slope,
            "mean_sum_rate": mean,
            "refused": refused,
        }),
    )?;
    if refused_count > 0 {
        return Err(Failure::Numeric(format!("{refused_count} seed(s) refused as numerically degenerate")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct PhaseConfig {
    channel_seed: Option<u64>,
    channel: String,
    tolerance: f64,
    p_grid_db: Vec<f64>,
    noise_var: f64,
    sinr: SinrMethod,
}

/// Margins below this multiple of the tolerance are reported as near-degenerate.
const NEAR_DEGENERATE_FACTOR: f64 = 1e3;

pub fn check_phases(o: Overrides) -> Result<(), Failure> {
    o.only("check-phases", &["channel", "seed", "tolerance", "p_grid", "trials", "noise_var", "sinr"])?;
    let (channel, channel_seed) = match &o.channel {
        Some(path) => (read_channel(path)?, None),
        None => {
            let seed = o.seed.unwrap_or(0);
            (ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantComplex, MagnitudeBounds::default())?, Some(seed))
        }
    };
    if channel.model() != ChannelModel::ConstantComplex || channel.hop_count() != 2 {
        return Err(Failure::Config("check-phases needs a 2-hop constant_complex channel".into()));
    }
    let frames = o.trials.unwrap_or(DEFAULT_FRAMES);
    let cfg = PhaseConfig {
        channel_seed,
        channel: channel.to_json(),
        tolerance: positive("tolerance", o.tolerance.unwrap_or(ain_core::beamforming::PHASE_TOLERANCE))?,
        p_grid_db: parse_grid(o.p_grid.as_deref().unwrap_or(DEFAULT_GRID), Unit::Db)?,
        noise_var: positive("noise variance", o.noise_var.unwrap_or(1.0))?,
        sinr: sinr_method(&o, frames)?,
    };
    let hash = config::config_hash(&cfg);
    let (f, g) = (channel.hop(0).matrix(0), channel.hop(1).matrix(0));
    let cond = phase_condition(&f, &g)?;
    let ok = cond.margins.map(|m| m > cfg.tolerance);
    let near_degenerate = cond.margins.iter().any(|m| *m <= NEAR_DEGENERATE_FACTOR * cfg.tolerance);
    let pipeline = if ok[0] && ok[1] {
        let net = LinearNetwork::real_rotation_of(&channel)?;
        let mut rng = substream(channel_seed.unwrap_or(0), 2);
        let sweep = aligned_sweep(&net, &cfg.p_grid_db, cfg.noise_var, cfg.sinr, &mut rng)?;
        Some(serde_json::json!({
            "M": 2,
            "p_grid_db": sweep.p_grid,
            "sum_rate": sweep.sum_rate,
            "dof_slope": sweep.dof_slope,
            "target_dof": 1.5,
            "residual_interference_ratio": sweep.residual_interference_ratio,
        }))
    } else {
        None
    };
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "config": cfg,
        "cross_phase": [cross_phase(&f), cross_phase(&g)],
        "margins": cond.margins,
        "first_hop_ok": ok[0],
        "second_hop_ok": ok[1],
        "near_degenerate": near_degenerate,
        "pipeline": pipeline,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    let dir = out_dir(&o);
    ensure_dir(&dir)?;
    write_json(&in_dir(&dir, "check_phases.json"), &report)
}

pub fn dump_channel(o: Overrides) -> Result<(), Failure> {
    o.only("dump-channel", &["seed", "m", "hops", "model", "bounds"])?;
    let model = config::parse_model(o.model.as_deref().unwrap_or("time_varying"))?;
    let ch = ChannelRealization::sample(o.seed.unwrap_or(0), o.hops.unwrap_or(2), o.m.unwrap_or(1), model, bounds(&o)?)?;
    match &o.out {
        Some(path) => std::fs::write(path, ch.to_json() + "\n")
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{}", ch.to_json());
            Ok(())
        }
    }
}
