//! Source encoding, destination chain decoding, and the end-to-end linear link.
//!
//! Symbols are tracked in two units. `x` is the unit-power information symbol;
//! `s = a x` is the symbol scaled by its stream amplitude `a`. Relays isolate
//! and forward sums of scaled symbols, and destinations see
//!
//! * D1: `s1_1` in dimension 1 and `s1_{i+1} - s1_i` in dimension `i + 1`;
//! * D2: `s2_i - s2_{i-1}` in dimension `i` (with `s2_0 = 0`) and
//!   `s1_M + s2_{M-1}` in the last dimension, which is discarded.
//!
//! Running sums of those dimensions recover each stream.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{independence_report, BeamformerSet};
use crate::channel::{Field, LinearNetwork};
use crate::error::{Error, Result};
use crate::linalg::{columns, CMat, CVec};
use crate::relay::{combine, power_scale, Isolator, RelayReport};
use crate::rng::{complex_gaussian, gaussian};

/// One channel use of the `M`-slot extension.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    /// `M` unit-power symbols of source 1.
    pub x1: Vec<Complex64>,
    /// `M - 1` unit-power symbols of source 2.
    pub x2: Vec<Complex64>,
}

impl StreamFrame {
    pub fn zeros(m: usize) -> Self {
        Self { x1: vec![Complex64::default(); m], x2: vec![Complex64::default(); m.saturating_sub(1)] }
    }

    /// Independent zero-mean unit-variance Gaussian symbols.
    pub fn random<R: Rng + ?Sized>(m: usize, field: Field, rng: &mut R) -> Self {
        let mut draw = || match field {
            Field::Complex => complex_gaussian(rng, 1.0),
            Field::Real => Complex64::new(gaussian(rng, 1.0), 0.0),
        };
        let x1 = (0..m).map(|_| draw()).collect();
        let x2 = (0..m.saturating_sub(1)).map(|_| draw()).collect();
        Self { x1, x2 }
    }

    pub fn m(&self) -> usize {
        self.x1.len()
    }
}

/// Stream amplitudes of both sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

/// Equal power per stream, with `E||X||^2 / M = power` at each active source.
pub fn equal_allocation(beams: &BeamformerSet, power: f64) -> PowerAllocation {
    let m = beams.m() as f64;
    let amp = |vs: &[CVec]| -> Vec<f64> {
        let n = vs.len() as f64;
        vs.iter().map(|v| (power * m / (n * v.norm_squared())).sqrt()).collect()
    };
    PowerAllocation { a1: amp(&beams.v1), a2: amp(&beams.v2) }
}

/// Transmit vectors `X_j = sum_k v_{j,k} a_{j,k} x_{j,k}`.
pub fn encode(frame: &StreamFrame, beams: &BeamformerSet, alloc: &PowerAllocation) -> Result<(CVec, CVec)> {
    let m = beams.m();
    if frame.x1.len() != m
        || frame.x2.len() != beams.v2.len()
        || alloc.a1.len() != m
        || alloc.a2.len() != beams.v2.len()
    {
        return Err(Error::Parameter(format!(
            "frame has {}+{} streams, beamformers {}+{}",
            frame.x1.len(),
            frame.x2.len(),
            m,
            beams.v2.len()
        )));
    }
    let s1 = scaled(&frame.x1, &alloc.a1);
    let s2 = scaled(&frame.x2, &alloc.a2);
    let x1 = combine(&s1, &beams.v1, 1.0);
    let x2 = if beams.v2.is_empty() { CVec::zeros(m) } else { combine(&s2, &beams.v2, 1.0) };
    Ok((x1, x2))
}

fn scaled(x: &[Complex64], a: &[f64]) -> CVec {
    CVec::from_iterator(x.len(), x.iter().zip(a).map(|(x, a)| x * *a))
}

/// Projection of one destination's received vector followed by the running-sum chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDecode {
    /// Coordinates along the effective directions, in scaled-symbol units.
    pub projected: CVec,
    /// Recovered unit-power symbols.
    pub estimates: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct DestinationDecoder {
    projector: Isolator,
    amplitudes: Vec<f64>,
}

impl DestinationDecoder {
    /// D1 projects onto `scale * G11 vR1_k`.
    pub fn d1(g11: &CMat, vr1: &[CVec], relay_scale: f64, a1: &[f64]) -> Result<Self> {
        let cols: Vec<CVec> = vr1.iter().map(|v| (g11 * v) * Complex64::new(relay_scale, 0.0)).collect();
        Ok(Self { projector: Isolator::new(&cols)?, amplitudes: a1.to_vec() })
    }

    /// D2 projects onto `scale * G22 vR2_i` and the interference direction `scale * G21 vR1_M`.
    pub fn d2(g21: &CMat, g22: &CMat, vr1: &[CVec], vr2: &[CVec], relay_scale: f64, a2: &[f64]) -> Result<Self> {
        let last = vr1.last().ok_or_else(|| Error::Parameter("relay 1 has no beamformers".into()))?;
        let mut cols: Vec<CVec> = vr2.iter().map(|v| (g22 * v) * Complex64::new(relay_scale, 0.0)).collect();
        cols.push((g21 * last) * Complex64::new(relay_scale, 0.0));
        Ok(Self { projector: Isolator::new(&cols)?, amplitudes: a2.to_vec() })
    }

    pub fn condition(&self) -> f64 {
        self.projector.condition()
    }

    pub fn decode(&self, received: &CVec) -> ChainDecode {
        let projected = self.projector.apply(received);
        let mut running = Complex64::default();
        let estimates = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| {
                running += projected[k];
                running / *a
            })
            .collect();
        ChainDecode { projected, estimates }
    }
}

/// Decode D1: `x1_1` first, then each later stream by adding the previous estimate.
pub fn decode_d1(y1: &CVec, g11: &CMat, vr1: &[CVec], relay_scale: f64, a1: &[f64]) -> Result<ChainDecode> {
    Ok(DestinationDecoder::d1(g11, vr1, relay_scale, a1)?.decode(y1))
}

/// Decode D2 over its first `M - 1` dimensions; the last one is discarded.
pub fn decode_d2(
    y2: &CVec,
    g21: &CMat,
    g22: &CMat,
    vr1: &[CVec],
    vr2: &[CVec],
    relay_scale: f64,
    a2: &[f64],
) -> Result<ChainDecode> {
    if vr2.is_empty() {
        return Ok(ChainDecode { projected: CVec::zeros(0), estimates: Vec::new() });
    }
    Ok(DestinationDecoder::d2(g21, g22, vr1, vr2, relay_scale, a2)?.decode(y2))
}

/// Transmit power and noise levels, per complex channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub power: f64,
    /// Noise variance at every relay and destination.
    pub noise_var: f64,
    /// Additional destination noise variance per slot (cascaded relay noise), one list per destination.
    pub extra_dest_noise: Option<[Vec<f64>; 2]>,
}

impl LinkConfig {
    pub fn new(power: f64) -> Self {
        Self { power, noise_var: 1.0, extra_dest_noise: None }
    }
}

/// Noise samples for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub z1: CVec,
    pub z2: CVec,
    pub n1: CVec,
    pub n2: CVec,
}

impl NoiseRealization {
    pub fn zeros(m: usize) -> Self {
        Self { z1: CVec::zeros(m), z2: CVec::zeros(m), n1: CVec::zeros(m), n2: CVec::zeros(m) }
    }
}

#[derive(Debug, Clone)]
pub struct LinkTrace {
    pub x1_tx: CVec,
    pub x2_tx: CVec,
    pub relay1: RelayReport,
    pub relay2: RelayReport,
    pub y1: CVec,
    pub y2: CVec,
    pub d1: ChainDecode,
    pub d2: ChainDecode,
}

/// Aggregated outcome at one destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub stream_sinr: Vec<f64>,
    /// Mean squared error of each recovered unit-power stream.
    pub error_variance: Vec<f64>,
    pub residual_interference_ratio: f64,
    pub decode_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMeasurement {
    pub d1: DecodeResult,
    pub d2: DecodeResult,
    /// Average per-slot transmit power at S1, S2, R1, R2.
    pub tx_power: [f64; 4],
    pub frames: usize,
}

impl LinkMeasurement {
    pub fn stream_sinr(&self) -> Vec<f64> {
        self.d1.stream_sinr.iter().chain(&self.d2.stream_sinr).copied().collect()
    }
}

/// Noiseless linear map from scaled symbols to destination coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    /// D1 coordinates from `s1` (`M x M`) and from `s2` (`M x (M-1)`).
    pub d1_from_s1: CMat,
    pub d1_from_s2: CMat,
    /// D2 kept coordinates from `s2` and from `s1`.
    pub d2_from_s2: CMat,
    pub d2_from_s1: CMat,
    pub alloc: PowerAllocation,
}

impl Transfer {
    /// Worst per-dimension ratio of cross-user to desired power after projection.
    pub fn projected_leakage(&self) -> [f64; 2] {
        let ratio = |desired: &CMat, a_des: &[f64], cross: &CMat, a_cross: &[f64]| -> f64 {
            (0..desired.nrows())
                .map(|d| {
                    let want: f64 = (0..desired.ncols()).map(|j| desired[(d, j)].norm_sqr() * a_des[j].powi(2)).sum();
                    let leak: f64 = (0..cross.ncols()).map(|j| cross[(d, j)].norm_sqr() * a_cross[j].powi(2)).sum();
                    if want > 0.0 {
                        leak / want
                    } else if leak > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        };
        [
            ratio(&self.d1_from_s1, &self.alloc.a1, &self.d1_from_s2, &self.alloc.a2),
            ratio(&self.d2_from_s2, &self.alloc.a2, &self.d2_from_s1, &self.alloc.a1),
        ]
    }
}

/// Complete two-hop linear link: sources, isolate-and-forward relays, destinations.
#[derive(Debug, Clone)]
pub struct AlignedLink {
    net: LinearNetwork,
    beams: BeamformerSet,
    alloc: PowerAllocation,
    dim_power: f64,
    relay_noise: f64,
    dest_noise: [Vec<f64>; 2],
    relay1: Isolator,
    relay2: Isolator,
    relay_scales: [f64; 2],
    relay_scale: f64,
    d1: DestinationDecoder,
    d2: Option<DestinationDecoder>,
}

impl AlignedLink {
    /// Design the aligned beamformers for `net` and build the link.
    ///
    /// Fails with a degeneracy error when the source-1 or relay-1 beamformers
    /// cannot be separated numerically (equilibrated condition at or above the cap).
    pub fn aligned(net: LinearNetwork, cfg: &LinkConfig) -> Result<Self> {
        let beams = BeamformerSet::design(&net)?;
        let first = independence_report(&beams.v1)?;
        let second = independence_report(&beams.vr1)?;
        Self::new(net, beams, cfg).map_err(|e| match e {
            Error::Conditioning { condition } => Error::Degenerate(format!(
                "beamformers are linearly dependent (condition {condition:.3e}; Hadamard ratios {:.3e}, {:.3e})",
                first.determinant_ratio, second.determinant_ratio
            )),
            other => other,
        })
    }

    /// Build the link with arbitrary beamformers (aligned or not).
    pub fn new(net: LinearNetwork, beams: BeamformerSet, cfg: &LinkConfig) -> Result<Self> {
        let m = net.dim;
        if beams.m() != m || beams.vr1.len() != m || beams.v2.len() + 1 != m || beams.vr2.len() + 1 != m {
            return Err(Error::Parameter("beamformer counts do not match the network dimension".into()));
        }
        if !(cfg.power > 0.0) || !(cfg.noise_var >= 0.0) {
            return Err(Error::Parameter("power must be positive and noise variance nonnegative".into()));
        }
        let per_use = net.dims_per_use as f64;
        let dim_power = cfg.power / per_use;
        let relay_noise = cfg.noise_var / per_use;
        let dest_noise: [Vec<f64>; 2] = std::array::from_fn(|k| {
            (0..m)
                .map(|slot| {
                    let extra = cfg.extra_dest_noise.as_ref().map_or(0.0, |e| e[k][slot]);
                    (cfg.noise_var + extra) / per_use
                })
                .collect()
        });
        let alloc = equal_allocation(&beams, dim_power);
        let f = &net.first;
        let relay1 = Isolator::new(&beams.v1.iter().map(|v| &f[0][0] * v).collect::<Vec<_>>())?;
        let relay2 = Isolator::new(&beams.v1.iter().map(|v| &f[1][0] * v).collect::<Vec<_>>())?;

        // Covariance of each relay's isolated vector (signal plus relayed noise).
        let signal = |k: usize| -> CMat {
            let mut cols: Vec<CVec> = Vec::with_capacity(2 * m - 1);
            for (v, a) in beams.v1.iter().zip(&alloc.a1) {
                cols.push((&f[k][0] * v) * Complex64::new(*a, 0.0));
            }
            for (v, a) in beams.v2.iter().zip(&alloc.a2) {
                cols.push((&f[k][1] * v) * Complex64::new(*a, 0.0));
            }
            columns(&cols)
        };
        let cov = |iso: &Isolator, k: usize| -> CMat {
            let t = iso.inverse() * signal(k);
            let inv = iso.inverse();
            &t * t.adjoint() + (inv * inv.adjoint()) * Complex64::new(relay_noise, 0.0)
        };
        let cov1 = cov(&relay1, 0);
        let b1 = power_scale(&beams.vr1, &cov1, dim_power)?;
        let b2 = if m > 1 {
            let cov2 = cov(&relay2, 1).view((0, 0), (m - 1, m - 1)).into_owned();
            power_scale(&beams.vr2, &cov2, dim_power)?
        } else {
            f64::INFINITY
        };
        // Both relays must share one scale or the antiphase copies no longer cancel.
        let relay_scale = b1.min(b2);
        let g = &net.second;
        let d1 = DestinationDecoder::d1(&g[0][0], &beams.vr1, relay_scale, &alloc.a1)?;
        let d2 = if m > 1 {
            Some(DestinationDecoder::d2(&g[1][0], &g[1][1], &beams.vr1, &beams.vr2, relay_scale, &alloc.a2)?)
        } else {
            None
        };
        Ok(Self {
            net,
            beams,
            alloc,
            dim_power,
            relay_noise,
            dest_noise,
            relay1,
            relay2,
            relay_scales: [b1, b2],
            relay_scale,
            d1,
            d2,
        })
    }

    pub fn m(&self) -> usize {
        self.net.dim
    }

    pub fn network(&self) -> &LinearNetwork {
        &self.net
    }

    pub fn beams(&self) -> &BeamformerSet {
        &self.beams
    }

    pub fn allocation(&self) -> &PowerAllocation {
        &self.alloc
    }

    /// Common relay scale and the individual scales each relay would need.
    pub fn relay_scale(&self) -> (f64, [f64; 2]) {
        (self.relay_scale, self.relay_scales)
    }

    pub fn field(&self) -> Field {
        self.net.field
    }

    /// Per-dimension transmit power budget.
    pub fn dim_power(&self) -> f64 {
        self.dim_power
    }

    /// Largest condition number among the four zero-forcing inversions.
    pub fn worst_condition(&self) -> f64 {
        let mut c = self.relay1.condition().max(self.relay2.condition()).max(self.d1.condition());
        if let Some(d2) = &self.d2 {
            c = c.max(d2.condition());
        }
        c
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseRealization {
        let m = self.m();
        let field = self.net.field;
        let mut draw = |var: f64| match field {
            Field::Complex => complex_gaussian(rng, var),
            Field::Real => Complex64::new(gaussian(rng, var), 0.0),
        };
        let z1 = CVec::from_iterator(m, (0..m).map(|_| draw(self.relay_noise)));
        let z2 = CVec::from_iterator(m, (0..m).map(|_| draw(self.relay_noise)));
        let n1 = CVec::from_iterator(m, (0..m).map(|k| draw(self.dest_noise[0][k])));
        let n2 = CVec::from_iterator(m, (0..m).map(|k| draw(self.dest_noise[1][k])));
        NoiseRealization { z1, z2, n1, n2 }
    }

    /// Push one frame through both hops.
    pub fn propagate(&self, frame: &StreamFrame, noise: &NoiseRealization) -> Result<LinkTrace> {
        let m = self.m();
        let (x1, x2) = encode(frame, &self.beams, &self.alloc)?;
        let f = &self.net.first;
        let g = &self.net.second;
        let yr1 = &f[0][0] * &x1 + &f[0][1] * &x2 + &noise.z1;
        let yr2 = &f[1][0] * &x1 + &f[1][1] * &x2 + &noise.z2;
        let iso1 = self.relay1.apply(&yr1);
        let iso2 = self.relay2.apply(&yr2);
        let xr1 = combine(&iso1, &self.beams.vr1, self.relay_scale);
        let fwd2 = iso2.rows(0, m - 1).into_owned();
        let xr2 = if m > 1 { combine(&fwd2, &self.beams.vr2, self.relay_scale) } else { CVec::zeros(m) };
        let y1 = &g[0][0] * &xr1 + &g[0][1] * &xr2 + &noise.n1;
        let y2 = &g[1][0] * &xr1 + &g[1][1] * &xr2 + &noise.n2;
        let d1 = self.d1.decode(&y1);
        let d2 = match &self.d2 {
            Some(dec) => dec.decode(&y2),
            None => ChainDecode { projected: CVec::zeros(0), estimates: Vec::new() },
        };
        let report = |iso: &Isolator, vals: &CVec, fwd: &CVec, k: usize| RelayReport {
            isolated: vals.iter().copied().collect(),
            forwarded: fwd.iter().copied().collect(),
            noise_gain: iso.noise_gain().to_vec(),
            power_scale: self.relay_scales[k],
        };
        Ok(LinkTrace {
            relay1: report(&self.relay1, &iso1, &xr1, 0),
            relay2: report(&self.relay2, &iso2, &xr2, 1),
            x1_tx: x1,
            x2_tx: x2,
            y1,
            y2,
            d1,
            d2,
        })
    }

    /// Noiseless probe of the map from scaled symbols to destination coordinates.
    pub fn transfer(&self) -> Result<Transfer> {
        let m = self.m();
        let zero = NoiseRealization::zeros(m);
        let mut d1_from_s1 = CMat::zeros(m, m);
        let mut d1_from_s2 = CMat::zeros(m, m - 1);
        let mut d2_from_s1 = CMat::zeros(m - 1, m);
        let mut d2_from_s2 = CMat::zeros(m - 1, m - 1);
        for j in 0..(2 * m - 1) {
            let mut frame = StreamFrame::zeros(m);
            if j < m {
                frame.x1[j] = Complex64::new(1.0 / self.alloc.a1[j], 0.0);
            } else {
                frame.x2[j - m] = Complex64::new(1.0 / self.alloc.a2[j - m], 0.0);
            }
            let trace = self.propagate(&frame, &zero)?;
            let kept = trace.d2.projected.rows(0, m - 1).into_owned();
            if j < m {
                d1_from_s1.set_column(j, &trace.d1.projected);
                d2_from_s1.set_column(j, &kept);
            } else {
                d1_from_s2.set_column(j - m, &trace.d1.projected);
                d2_from_s2.set_column(j - m, &kept);
            }
        }
        Ok(Transfer { d1_from_s1, d1_from_s2, d2_from_s2, d2_from_s1, alloc: self.alloc.clone() })
    }

    /// Cross-user to desired received power at each destination, measured on the
    /// noiseless received signal before any inversion.
    ///
    /// D2 first removes (by orthogonal projection) the single direction its
    /// interference is aligned into; D1 has no such direction.
    pub fn over_the_air_leakage(&self) -> Result<[f64; 2]> {
        let m = self.m();
        let zero = NoiseRealization::zeros(m);
        let u = &self.net.second[1][0] * &self.beams.vr1[m - 1];
        let u = &u / Complex64::new(u.norm(), 0.0);
        let keep = CMat::identity(m, m) - &u * u.adjoint();
        // power[destination][source]
        let mut power = [[0.0f64; 2]; 2];
        for j in 0..(2 * m - 1) {
            let mut frame = StreamFrame::zeros(m);
            let source = if j < m {
                frame.x1[j] = Complex64::new(1.0, 0.0);
                0
            } else {
                frame.x2[j - m] = Complex64::new(1.0, 0.0);
                1
            };
            let trace = self.propagate(&frame, &zero)?;
            power[0][source] += trace.y1.norm_squared();
            power[1][source] += (&keep * &trace.y2).norm_squared();
        }
        let ratio = |cross: f64, desired: f64| if desired > 0.0 { cross / desired } else { 0.0 };
        Ok([ratio(power[0][1], power[0][0]), ratio(power[1][0], power[1][1])])
    }

    /// Exact per-stream SINR from the linear noise and symbol transfer maps.
    pub fn analytic_sinr(&self) -> Result<[Vec<f64>; 2]> {
        let m = self.m();
        let n_streams = [m, m - 1];
        let mut err = [vec![0.0; m], vec![0.0; m - 1]];
        // symbol part: estimate minus truth
        let zero = NoiseRealization::zeros(m);
        for j in 0..(2 * m - 1) {
            let mut frame = StreamFrame::zeros(m);
            if j < m {
                frame.x1[j] = Complex64::new(1.0, 0.0);
            } else {
                frame.x2[j - m] = Complex64::new(1.0, 0.0);
            }
            let trace = self.propagate(&frame, &zero)?;
            for (d, est) in [&trace.d1.estimates, &trace.d2.estimates].into_iter().enumerate() {
                for k in 0..n_streams[d] {
                    let truth = if d == 0 { frame.x1[k] } else { frame.x2[k] };
                    err[d][k] += (est[k] - truth).norm_sqr();
                }
            }
        }
        // noise part: one unit impulse per noise coordinate, weighted by its variance
        let frame = StreamFrame::zeros(m);
        for which in 0..4 {
            for slot in 0..m {
                let mut noise = NoiseRealization::zeros(m);
                let var = match which {
                    0 => {
                        noise.z1[slot] = Complex64::new(1.0, 0.0);
                        self.relay_noise
                    }
                    1 => {
                        noise.z2[slot] = Complex64::new(1.0, 0.0);
                        self.relay_noise
                    }
                    2 => {
                        noise.n1[slot] = Complex64::new(1.0, 0.0);
                        self.dest_noise[0][slot]
                    }
                    _ => {
                        noise.n2[slot] = Complex64::new(1.0, 0.0);
                        self.dest_noise[1][slot]
                    }
                };
                let trace = self.propagate(&frame, &noise)?;
                for (d, est) in [&trace.d1.estimates, &trace.d2.estimates].into_iter().enumerate() {
                    for k in 0..n_streams[d] {
                        err[d][k] += est[k].norm_sqr() * var;
                    }
                }
            }
        }
        Ok(err.map(|e| e.into_iter().map(|v| 1.0 / v).collect()))
    }

    /// Monte-Carlo SINR over `frames` random frames.
    pub fn measure<R: Rng + ?Sized>(&self, frames: usize, rng: &mut R) -> Result<LinkMeasurement> {
        let m = self.m();
        let mut sig = [vec![0.0; m], vec![0.0; m - 1]];
        let mut err = [vec![0.0; m], vec![0.0; m - 1]];
        let mut power = [0.0f64; 4];
        for _ in 0..frames {
            let frame = StreamFrame::random(m, self.net.field, rng);
            let noise = self.draw_noise(rng);
            let trace = self.propagate(&frame, &noise)?;
            for k in 0..m {
                sig[0][k] += frame.x1[k].norm_sqr();
                err[0][k] += (trace.d1.estimates[k] - frame.x1[k]).norm_sqr();
            }
            for k in 0..m - 1 {
                sig[1][k] += frame.x2[k].norm_sqr();
                err[1][k] += (trace.d2.estimates[k] - frame.x2[k]).norm_sqr();
            }
            let forwarded = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            power[0] += trace.x1_tx.norm_squared();
            power[1] += trace.x2_tx.norm_squared();
            power[2] += forwarded(&trace.relay1.forwarded);
            power[3] += forwarded(&trace.relay2.forwarded);
        }
        let leakage = self.over_the_air_leakage()?;
        let result = |d: usize| DecodeResult {
            stream_sinr: sig[d].iter().zip(&err[d]).map(|(s, e)| s / e).collect(),
            error_variance: err[d].iter().map(|e| e / frames as f64).collect(),
            residual_interference_ratio: leakage[d],
            decode_order: (0..sig[d].len()).collect(),
        };
        Ok(LinkMeasurement {
            d1: result(0),
            d2: result(1),
            tx_power: power.map(|p| p / (frames as f64 * m as f64)),
            frames,
        })
    }
}
