//! Flag and config-file handling. Flags override the file, the file overrides defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Every tunable a subcommand may read. Unset fields fall back to the config
/// file and then to the subcommand's defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Symbol extension length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of channel seeds (or instances).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// First channel seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated powers; dB unless prefixed with `abs:` (`rational` reads absolute values unless prefixed with `db:`).
    #[arg(long = "p-grid")]
    pub p_grid: Option<String>,
    /// Monte-Carlo frames per grid point, or rational trials per point.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "AIN_SIM_JOBS")]
    pub jobs: Option<usize>,
    /// Output directory (a file path for `dump-channel`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Receiver noise variance (0 disables noise)
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Solver residual tolerance, ratio-gap threshold or phase margin, depending on the subcommand.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Number of hops for `multihop`
    #[arg(long)]
    pub hops: Option<usize>,
    /// Fold hops 2..H into one and run the aligned scheme on the result.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reduce: Option<bool>,
    /// Channel realization file (JSON).
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Rational scheme lattice scale
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Rational scheme exponent slack
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `aligned`, `tdma` or `both`.
    #[arg(long)]
    pub scheme: Option<String>,
    /// `monte-carlo` or `analytic`.
    #[arg(long)]
    pub sinr: Option<String>,
    /// `time_varying`, `constant_complex` or `constant_real`.
    #[arg(long)]
    pub model: Option<String>,
    /// Magnitude bounds `min,max`.
    #[arg(long)]
    pub bounds: Option<String>,
}

impl Overrides {
    /// `self` where set, otherwise `file`.
    pub fn over(self, file: Overrides) -> Overrides {
        Overrides {
            m: self.m.or(file.m),
            seeds: self.seeds.or(file.seeds),
            seed: self.seed.or(file.seed),
            p_grid: self.p_grid.or(file.p_grid),
            trials: self.trials.or(file.trials),
            jobs: self.jobs.or(file.jobs),
            out: self.out.or(file.out),
            noise_var: self.noise_var.or(file.noise_var),
            tolerance: self.tolerance.or(file.tolerance),
            hops: self.hops.or(file.hops),
            reduce: self.reduce.or(file.reduce),
            channel: self.channel.or(file.channel),
            gamma: self.gamma.or(file.gamma),
            epsilon: self.epsilon.or(file.epsilon),
            scheme: self.scheme.or(file.scheme),
            sinr: self.sinr.or(file.sinr),
            model: self.model.or(file.model),
            bounds: self.bounds.or(file.bounds),
        }
    }

    /// Refuse settings the subcommand would silently ignore.
    pub fn only(&self, command: &str, allowed: &[&str]) -> Result<(), Failure> {
        let value = serde_json::to_value(self).expect("overrides serialize");
        let set: Vec<String> = value
            .as_object()
            .expect("object")
            .iter()
            .filter(|(k, v)| !v.is_null() && k.as_str() != "jobs" && k.as_str() != "out")
            .map(|(k, _)| k.clone())
            .filter(|k| !allowed.contains(&k.as_str()))
            .collect();
        if set.is_empty() {
            Ok(())
        } else {
            Err(Failure::Config(format!("`{command}` does not use: {}", set.join(", "))))
        }
    }
}

pub fn load_file(path: &Path) -> Result<Overrides, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("malformed config {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Db,
    Absolute,
}

/// Parse a power grid into dB values.
pub fn parse_grid(text: &str, default_unit: Unit) -> Result<Vec<f64>, Failure> {
    let (unit, body) = if let Some(rest) = text.strip_prefix("abs:") {
        (Unit::Absolute, rest)
    } else if let Some(rest) = text.strip_prefix("db:") {
        (Unit::Db, rest)
    } else {
        (default_unit, text)
    };
    let mut out = Vec::new();
    for part in body.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("bad power value `{}` in grid `{text}`", part.trim())))?;
        let db = match unit {
            Unit::Db => v,
            Unit::Absolute if v > 0.0 => 10.0 * v.log10(),
            Unit::Absolute => return Err(Failure::Config(format!("absolute power must be positive, got {v}"))),
        };
        if !db.is_finite() {
            return Err(Failure::Config(format!("power `{}` is not finite", part.trim())));
        }
        out.push(db);
    }
    if out.is_empty() {
        return Err(Failure::Config("empty power grid".into()));
    }
    Ok(out)
}

pub fn parse_bounds(text: &str) -> Result<ain_core::channel::MagnitudeBounds, Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || Failure::Config(format!("bounds must be `min,max`, got `{text}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    ain_core::channel::MagnitudeBounds::new(lo, hi).map_err(|e| Failure::Config(e.to_string()))
}

pub fn parse_model(text: &str) -> Result<ain_core::channel::ChannelModel, Failure> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| Failure::Config(format!("unknown channel model `{text}`")))
}

pub fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Hex SHA-256 of the tool version and the resolved configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(&(env!("CARGO_PKG_VERSION"), config)).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
