//! Rates, DoF slopes, leakage and end-to-end maps.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Field, LinearNetwork};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::rng::{complex_gaussian, gaussian};
use crate::transceiver::{AlignedLink, LinkConfig};

/// Smallest span of a power grid accepted by [`dof_slope`].
pub const MIN_GRID_SPAN_DB: f64 = 20.0;

/// Reference DoF of the network's min-cut bound (a constant, not computed).
pub const MIN_CUT_DOF: f64 = 2.0;

/// Bits per complex channel use (complex field) or per real dimension pair (real field).
pub fn sum_rate(sinrs: &[f64], m: usize, field: Field) -> f64 {
    if sinrs.is_empty() || m == 0 {
        return 0.0;
    }
    let per_stream = match field {
        Field::Complex => 1.0,
        Field::Real => 0.5,
    };
    sinrs.iter().map(|s| per_stream * (1.0 + s.max(0.0)).log2()).sum::<f64>() / m as f64
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Least-squares slope of `rates` against `log2 P` (complex) or `0.5 log2 P` (real).
pub fn dof_slope(rates: &[f64], powers_db: &[f64], field: Field) -> Result<f64> {
    if rates.len() != powers_db.len() {
        return Err(Error::Parameter(format!("{} rates for {} powers", rates.len(), powers_db.len())));
    }
    if rates.len() < 3 {
        return Err(Error::Parameter("slope needs at least 3 grid points".into()));
    }
    let lo = powers_db.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = powers_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < MIN_GRID_SPAN_DB {
        return Err(Error::Parameter(format!("grid spans {:.1} dB, need {MIN_GRID_SPAN_DB}", hi - lo)));
    }
    let scale = match field {
        Field::Complex => 1.0,
        Field::Real => 0.5,
    };
    let x: Vec<f64> = powers_db.iter().map(|p| scale * p / 10.0 * 10f64.log2()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = rates.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(rates).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Noiseless linear map from unit-power symbols to projected destination dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EndToEnd {
    /// `M x M`, rows are D1 dimensions, columns are source-1 streams.
    pub d1_desired: CMat,
    /// `M x (M-1)`, D1 dimensions from source-2 streams.
    pub d1_cross: CMat,
    /// `(M-1) x (M-1)`, D2 kept dimensions from source-2 streams.
    pub d2_desired: CMat,
    /// `(M-1) x M`, D2 kept dimensions from source-1 streams.
    pub d2_cross: CMat,
    /// Over-the-air cross-to-desired power at D1 and D2.
    pub leakage: [f64; 2],
    /// The same ratio after projection, worst dimension.
    pub projected_leakage: [f64; 2],
}

impl EndToEnd {
    /// Largest deviation of either desired block from the running-difference
    /// template (1 on the diagonal, -1 just below it) after scaling each row by
    /// its diagonal entry and each column back to scaled-symbol units.
    pub fn chain_template_error(&self, a1: &[f64], a2: &[f64]) -> f64 {
        let err = |block: &CMat, amps: &[f64]| -> f64 {
            let n = block.nrows();
            let mut worst: f64 = 0.0;
            for r in 0..n {
                let diag = block[(r, r)] / amps[r];
                if diag.norm() == 0.0 {
                    return f64::INFINITY;
                }
                for c in 0..n {
                    let want = if c == r {
                        1.0
                    } else if c + 1 == r {
                        -1.0
                    } else {
                        0.0
                    };
                    let got = block[(r, c)] / amps[c] / diag;
                    worst = worst.max((got - want).norm());
                }
            }
            worst
        };
        err(&self.d1_desired, a1).max(err(&self.d2_desired, a2))
    }
}

/// Probe the noiseless pipeline with one unit symbol at a time.
pub fn end_to_end_matrix(link: &AlignedLink) -> Result<EndToEnd> {
    let t = link.transfer()?;
    let a = &t.alloc;
    let to_symbols = |block: &CMat, amps: &[f64]| -> CMat {
        let mut out = block.clone();
        for (j, amp) in amps.iter().enumerate() {
            out.column_mut(j).scale_mut(*amp);
        }
        out
    };
    Ok(EndToEnd {
        d1_desired: to_symbols(&t.d1_from_s1, &a.a1),
        d1_cross: to_symbols(&t.d1_from_s2, &a.a2),
        d2_desired: to_symbols(&t.d2_from_s2, &a.a2),
        d2_cross: to_symbols(&t.d2_from_s1, &a.a1),
        leakage: link.over_the_air_leakage()?,
        projected_leakage: t.projected_leakage(),
    })
}

/// Cross-user to desired received power, worst destination.
pub fn residual_interference_ratio(link: &AlignedLink) -> Result<f64> {
    let l = link.over_the_air_leakage()?;
    Ok(l[0].max(l[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    /// One entry per grid point, each listing every stream.
    pub per_stream_sinr: Vec<Vec<f64>>,
    pub sum_rate: Vec<f64>,
    pub dof_slope: Option<f64>,
    pub residual_interference_ratio: f64,
    pub p_grid: Vec<f64>,
}

/// How stream SINR is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrMethod {
    /// Empirical SINR over this many random frames.
    MonteCarlo { frames: usize },
    /// Closed form from the linear transfer maps.
    Analytic,
}

/// Aligned scheme on one channel across a power grid (dB).
pub fn aligned_sweep<R: Rng + ?Sized>(
    net: &LinearNetwork,
    p_grid_db: &[f64],
    noise_var: f64,
    method: SinrMethod,
    rng: &mut R,
) -> Result<LinkMetrics> {
    let mut per_stream_sinr = Vec::with_capacity(p_grid_db.len());
    let mut rates = Vec::with_capacity(p_grid_db.len());
    let mut leakage: f64 = 0.0;
    for &db in p_grid_db {
        let cfg = LinkConfig { power: db_to_linear(db), noise_var, extra_dest_noise: None };
        let link = AlignedLink::aligned(net.clone(), &cfg)?;
        let sinr = match method {
            SinrMethod::MonteCarlo { frames } => {
                let meas = link.measure(frames, rng)?;
                leakage = leakage.max(meas.d1.residual_interference_ratio).max(meas.d2.residual_interference_ratio);
                meas.stream_sinr()
            }
            SinrMethod::Analytic => {
                leakage = leakage.max(residual_interference_ratio(&link)?);
                link.analytic_sinr()?.concat()
            }
        };
        rates.push(sum_rate(&sinr, net.dim, net.field));
        per_stream_sinr.push(sinr);
    }
    let dof = slope_if_possible(&rates, p_grid_db, net.field);
    Ok(LinkMetrics { per_stream_sinr, sum_rate: rates, dof_slope: dof, residual_interference_ratio: leakage, p_grid: p_grid_db.to_vec() })
}

fn slope_if_possible(rates: &[f64], p_grid_db: &[f64], field: Field) -> Option<f64> {
    dof_slope(rates, p_grid_db, field).ok()
}

/// Elementwise mean of several sweeps on the same grid, with the slope of the mean rate.
pub fn average_sweeps(sweeps: &[LinkMetrics], field: Field) -> Result<(Vec<f64>, Option<f64>)> {
    let first = sweeps.first().ok_or_else(|| Error::Parameter("no sweeps to average".into()))?;
    let n = first.sum_rate.len();
    if sweeps.iter().any(|s| s.sum_rate.len() != n) {
        return Err(Error::Parameter("sweeps use different grids".into()));
    }
    let mean: Vec<f64> =
        (0..n).map(|k| sweeps.iter().map(|s| s.sum_rate[k]).sum::<f64>() / sweeps.len() as f64).collect();
    let slope = slope_if_possible(&mean, &first.p_grid, field);
    Ok((mean, slope))
}

/// Orthogonalized baseline: source 1 owns even slots, source 2 odd slots, and
/// both relays amplify and forward the single active stream with phases chosen
/// to add coherently at the intended destination.
#[derive(Debug, Clone)]
pub struct TdmaLink {
    /// Per slot: (source, first-hop gains to R1/R2, relay gains, second-hop gains to the destination).
    slots: Vec<TdmaSlot>,
    noise_var: f64,
    power: f64,
    field: Field,
}

#[derive(Debug, Clone)]
struct TdmaSlot {
    user: usize,
    f: [Complex64; 2],
    beta: [Complex64; 2],
    g: [Complex64; 2],
}

impl TdmaLink {
    /// Needs at least two slots so both users get a turn.
    pub fn new(channel: &ChannelRealization, power: f64, noise_var: f64) -> Result<Self> {
        if channel.hop_count() != 2 || channel.slots() < 2 {
            return Err(Error::Parameter("baseline needs a 2-hop channel with at least 2 slots".into()));
        }
        let field = if channel.model() == crate::channel::ChannelModel::ConstantReal { Field::Real } else { Field::Complex };
        let slots = (0..channel.slots())
            .map(|k| {
                let user = k % 2;
                let f = [channel.hop(0).coefficient(0, user, k), channel.hop(0).coefficient(1, user, k)];
                let g = [channel.hop(1).coefficient(user, 0, k), channel.hop(1).coefficient(user, 1, k)];
                let beta = std::array::from_fn(|r| {
                    let amp = (power / (f[r].norm_sqr() * power + noise_var)).sqrt();
                    let phase = -(f[r].arg() + g[r].arg());
                    match field {
                        Field::Complex => Complex64::from_polar(amp, phase),
                        // sign only, real channels stay real
                        Field::Real => Complex64::new(amp * (f[r] * g[r]).re.signum(), 0.0),
                    }
                });
                TdmaSlot { user, f, beta, g }
            })
            .collect();
        Ok(Self { slots, noise_var, power, field })
    }

    /// Per-slot SINR, grouped by user.
    pub fn analytic_sinr(&self) -> [Vec<f64>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for s in &self.slots {
            let gain: Complex64 = (0..2).map(|r| s.g[r] * s.beta[r] * s.f[r]).sum();
            let relayed: f64 = (0..2).map(|r| (s.g[r] * s.beta[r]).norm_sqr()).sum();
            out[s.user].push(gain.norm_sqr() * self.power / (self.noise_var * (relayed + 1.0)));
        }
        out
    }

    /// Empirical per-slot SINR from random Gaussian frames.
    pub fn measure<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> [Vec<f64>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        let field = self.field;
        let draw = |rng: &mut R, var: f64| match field {
            Field::Complex => complex_gaussian(rng, var),
            Field::Real => Complex64::new(gaussian(rng, var), 0.0),
        };
        for s in &self.slots {
            let gain: Complex64 = (0..2).map(|r| s.g[r] * s.beta[r] * s.f[r]).sum();
            let (mut sig, mut err) = (0.0, 0.0);
            for _ in 0..frames {
                let x = draw(rng, 1.0);
                let tx = x * self.power.sqrt();
                let y: Complex64 = (0..2)
                    .map(|r| s.g[r] * s.beta[r] * (s.f[r] * tx + draw(rng, self.noise_var)))
                    .sum::<Complex64>()
                    + draw(rng, self.noise_var);
                let est = y / (gain * self.power.sqrt());
                sig += x.norm_sqr();
                err += (est - x).norm_sqr();
            }
            out[s.user].push(sig / err);
        }
        out
    }

    /// Sum rate per channel use: every slot carries one stream.
    pub fn sum_rate(&self, sinr: &[Vec<f64>; 2]) -> f64 {
        let all: Vec<f64> = sinr.iter().flatten().copied().collect();
        sum_rate(&all, self.slots.len(), self.field)
    }
}

/// Baseline across a power grid (dB), analytic or Monte-Carlo SINR.
pub fn tdma_sweep<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    p_grid_db: &[f64],
    noise_var: f64,
    method: SinrMethod,
    rng: &mut R,
) -> Result<LinkMetrics> {
    let mut per_stream_sinr = Vec::new();
    let mut rates = Vec::new();
    let mut field = Field::Complex;
    for &db in p_grid_db {
        let link = TdmaLink::new(channel, db_to_linear(db), noise_var)?;
        field = link.field;
        let sinr = match method {
            SinrMethod::MonteCarlo { frames } => link.measure(frames, rng),
            SinrMethod::Analytic => link.analytic_sinr(),
        };
        rates.push(link.sum_rate(&sinr));
        per_stream_sinr.push(sinr.concat());
    }
    let dof = slope_if_possible(&rates, p_grid_db, field);
    Ok(LinkMetrics { per_stream_sinr, sum_rate: rates, dof_slope: dof, residual_interference_ratio: 0.0, p_grid: p_grid_db.to_vec() })
}
