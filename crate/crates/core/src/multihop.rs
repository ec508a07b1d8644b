//! Amplify-and-forward cascades of 2x2 hops.
//!
//! Each relay layer multiplies what it hears by one complex gain per relay.
//! Two hops leave a single free gain ratio and two cancellation equations,
//! which generic channels cannot meet together. Three or more hops give
//! enough freedom, and the gains are found numerically.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Mat2};
use crate::error::{Error, Result};
use crate::linalg::{c, condition_number, inverse, CMat, CONDITION_CAP};
use crate::rng::{complex_gaussian, seeded};
use crate::transceiver::LinkConfig;

/// Valid solutions keep every desired link at least this strong.
pub const DIAG_MIN: f64 = 1e-6;

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    std::array::from_fn(|r| std::array::from_fn(|col| a[r][0] * b[0][col] + a[r][1] * b[1][col]))
}

/// `a * diag(g)`.
fn scale_columns(a: &Mat2, g: &[Complex64; 2]) -> Mat2 {
    std::array::from_fn(|r| std::array::from_fn(|col| a[r][col] * g[col]))
}

/// Complex gains of every relay layer, `layers[l][relay]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainAssignment {
    pub layers: Vec<[Complex64; 2]>,
}

impl GainAssignment {
    pub fn new(layers: Vec<[Complex64; 2]>) -> Result<Self> {
        if layers.iter().flatten().any(|g| !(g.norm() > 0.0) || !g.is_finite()) {
            return Err(Error::Parameter("relay gains must be nonzero and finite".into()));
        }
        Ok(Self { layers })
    }

    /// All gains equal to one.
    pub fn unit(layers: usize) -> Self {
        Self { layers: vec![[c(1.0, 0.0); 2]; layers] }
    }

    /// Independent gains with magnitude in `[0.5, 2]` and uniform phase.
    pub fn generic<R: Rng + ?Sized>(layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|_| {
                std::array::from_fn(|_| {
                    let mag = rng.random_range(0.5f64.ln()..2f64.ln()).exp();
                    Complex64::from_polar(mag, rng.random_range(0.0..std::f64::consts::TAU))
                })
            })
            .collect();
        Self { layers }
    }

    /// Divide each layer by its first gain so the first gain is one.
    pub fn normalized(&self) -> Self {
        Self { layers: self.layers.iter().map(|[a, b]| [c(1.0, 0.0), b / a]).collect() }
    }

    /// Free unknowns: the second gain of each layer.
    fn free(&self) -> Vec<Complex64> {
        self.normalized().layers.iter().map(|l| l[1]).collect()
    }

    fn from_free(free: &[Complex64]) -> Self {
        Self { layers: free.iter().map(|b| [c(1.0, 0.0), *b]).collect() }
    }

    /// `[[re, im], ...]` in layer-major order.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.layers.iter().flatten().map(|g| [g.re, g.im]).collect()
    }
}

/// End-to-end matrix in slot 0.
pub fn effective_matrix(channel: &ChannelRealization, gains: &GainAssignment) -> Result<Mat2> {
    effective_matrix_at(channel, gains, 0)
}

/// `hop_H diag(g_{H-1}) ... diag(g_1) hop_1` in `slot`.
pub fn effective_matrix_at(channel: &ChannelRealization, gains: &GainAssignment, slot: usize) -> Result<Mat2> {
    if gains.layers.len() + 1 != channel.hop_count() {
        return Err(Error::Parameter(format!(
            "{} gain layers for {} hops (need {})",
            gains.layers.len(),
            channel.hop_count(),
            channel.hop_count() - 1
        )));
    }
    if slot >= channel.slots() {
        return Err(Error::Parameter(format!("slot {slot} out of range")));
    }
    Ok(partial(channel, gains, gains.layers.len(), slot))
}

/// `hop_l diag(g_{l-1}) ... diag(g_0) hop_0`: the first `l + 1` hops with the gains between them.
fn partial(channel: &ChannelRealization, gains: &GainAssignment, l: usize, slot: usize) -> Mat2 {
    let mut e = channel.hop(0).matrix(slot);
    for k in 0..l {
        e = mat_mul(&scale_columns(&channel.hop(k + 1).matrix(slot), &gains.layers[k]), &e);
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralizationResidual {
    /// `E[1][0]` (S1 reaching D2) and `E[0][1]` (S2 reaching D1).
    pub off_diag: [Complex64; 2],
    pub diag_min: f64,
}

impl NeutralizationResidual {
    pub fn of(e: &Mat2) -> Self {
        Self { off_diag: [e[1][0], e[0][1]], diag_min: e[0][0].norm().min(e[1][1].norm()) }
    }

    pub fn norm(&self) -> f64 {
        (self.off_diag[0].norm_sqr() + self.off_diag[1].norm_sqr()).sqrt()
    }

    pub fn is_solution(&self, tol: f64) -> bool {
        self.norm() < tol && self.diag_min > DIAG_MIN
    }
}

/// Relative gap between the gain ratios the two cancellation equations of a
/// 2-hop cascade would each require.
pub fn two_hop_infeasibility(channel: &ChannelRealization) -> Result<f64> {
    if channel.hop_count() != 2 {
        return Err(Error::Parameter(format!("expected 2 hops, got {}", channel.hop_count())));
    }
    let f = channel.hop(0).matrix(0);
    let g = channel.hop(1).matrix(0);
    let d1 = f[0][0] * g[1][0];
    let d2 = f[0][1] * g[0][0];
    if d1.norm() == 0.0 || d2.norm() == 0.0 {
        return Err(Error::Degenerate("zero channel coefficient in a ratio denominator".into()));
    }
    let r1 = -f[1][0] * g[1][1] / d1;
    let r2 = -f[1][1] * g[0][1] / d2;
    Ok((r1 - r2).norm() / (r1.norm() + r2.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    /// Seeds the jitter applied to the initial point on restart.
    pub jitter_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-10, restarts: 10, jitter_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub gains: GainAssignment,
    pub converged: bool,
    pub residual: f64,
    pub diag_min: f64,
    /// Newton iterations summed over all attempts.
    pub iters: usize,
    pub restarts: usize,
    /// Residual norm after every iteration of the final attempt.
    pub history: Vec<f64>,
}

/// Derivative of the two off-diagonal entries with respect to each free gain.
fn jacobian(channel: &ChannelRealization, gains: &GainAssignment) -> CMat {
    let layers = gains.layers.len();
    let h = channel.hop_count();
    let mut j = CMat::zeros(2, layers);
    for l in 0..layers {
        // E = suffix * diag(0, 1) * prefix, where prefix ends at hop l and suffix starts at hop l+1
        let prefix = partial(channel, gains, l, 0);
        let mut suffix = channel.hop(h - 1).matrix(0);
        for k in (l + 1..layers).rev() {
            suffix = mat_mul(&scale_columns(&suffix, &gains.layers[k]), &channel.hop(k).matrix(0));
        }
        let d = mat_mul(&scale_columns(&suffix, &[c(0.0, 0.0), c(1.0, 0.0)]), &prefix);
        j[(0, l)] = d[1][0];
        j[(1, l)] = d[0][1];
    }
    j
}

/// Minimum-norm Newton step, or `None` when the Jacobian is numerically rank deficient.
fn newton_step(j: &CMat, r: &[Complex64; 2]) -> Option<Vec<Complex64>> {
    let jjh = j * j.adjoint();
    if !(condition_number(&jjh) < CONDITION_CAP) {
        return None;
    }
    let inv = inverse(&jjh).ok()?;
    let rv = nalgebra::DVector::from_vec(vec![r[0], r[1]]);
    let step = -(j.adjoint() * (inv * rv));
    Some(step.iter().copied().collect())
}

/// Damped Newton iteration on the two cancellation equations, restarting
/// from jittered copies of `init` when an attempt stalls or degenerates.
pub fn solve_gains(channel: &ChannelRealization, init: &GainAssignment, opts: &SolverOptions) -> Result<SolveReport> {
    let hops = channel.hop_count();
    if hops < 3 {
        return Err(Error::Parameter(format!(
            "gain solving needs at least 3 hops; {hops} hops cannot neutralize generic channels"
        )));
    }
    if init.layers.len() + 1 != hops {
        return Err(Error::Parameter(format!("{} gain layers for {hops} hops", init.layers.len())));
    }
    let init = GainAssignment::new(init.layers.clone())?;
    let residual_of = |g: &GainAssignment| -> Result<NeutralizationResidual> {
        Ok(NeutralizationResidual::of(&effective_matrix(channel, g)?))
    };
    let mut jitter = seeded(opts.jitter_seed);
    let mut best: Option<(NeutralizationResidual, GainAssignment, Vec<f64>)> = None;
    let mut iters = 0;
    let mut restarts = 0;
    for attempt in 0..=opts.restarts {
        restarts = attempt;
        let mut free = init.free();
        if attempt > 0 {
            for b in free.iter_mut() {
                *b *= c(1.0, 0.0) + complex_gaussian(&mut jitter, 0.5);
            }
        }
        let mut gains = GainAssignment::from_free(&free);
        let mut res = residual_of(&gains)?;
        let mut history = vec![res.norm()];
        let mut polish = 2;
        for _ in 0..opts.max_iters {
            if res.norm() < opts.tol {
                if polish == 0 {
                    break;
                }
                polish -= 1;
            }
            iters += 1;
            let j = jacobian(channel, &gains);
            let Some(step) = newton_step(&j, &res.off_diag) else { break };
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let trial: Vec<Complex64> = free.iter().zip(&step).map(|(b, s)| b + s * t).collect();
                if trial.iter().all(|b| b.norm() > 0.0 && b.is_finite()) {
                    let g = GainAssignment::from_free(&trial);
                    let r = residual_of(&g)?;
                    if r.norm() < res.norm() {
                        free = trial;
                        gains = g;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            history.push(res.norm());
            if !accepted {
                break;
            }
        }
        let better = match &best {
            None => true,
            Some((b, _, _)) => {
                let ok_new = res.is_solution(opts.tol);
                let ok_old = b.is_solution(opts.tol);
                (ok_new && !ok_old) || (ok_new == ok_old && res.norm() < b.norm())
            }
        };
        if better {
            best = Some((res, gains, history));
        }
        if res.is_solution(opts.tol) {
            break;
        }
    }
    let (res, gains, history) = best.expect("at least one attempt");
    Ok(SolveReport {
        converged: res.is_solution(opts.tol),
        residual: res.norm(),
        diag_min: res.diag_min,
        gains,
        iters,
        restarts,
        history,
    })
}

/// Two-hop view of an H-hop cascade: first hop unchanged, hops 2..H folded
/// with the fixed gains of relay layers 2..H-1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedNetwork {
    pub channel: ChannelRealization,
    /// Per destination and slot, folded relay noise variance per unit of node noise.
    pub noise_gain: [Vec<f64>; 2],
}

impl ReducedNetwork {
    pub fn link_config(&self, power: f64, noise_var: f64) -> LinkConfig {
        let extra = self.noise_gain.clone().map(|v| v.into_iter().map(|g| g * noise_var).collect());
        LinkConfig { power, noise_var, extra_dest_noise: Some(extra) }
    }
}

pub fn reduce_to_two_hops(channel: &ChannelRealization, inner: &GainAssignment) -> Result<ReducedNetwork> {
    let hops = channel.hop_count();
    if hops < 3 {
        return Err(Error::Parameter(format!("reduction needs at least 3 hops, got {hops}")));
    }
    if inner.layers.len() + 2 != hops {
        return Err(Error::Parameter(format!("{} inner gain layers for {hops} hops (need {})", inner.layers.len(), hops - 2)));
    }
    let inner = GainAssignment::new(inner.layers.clone())?;
    let mut first = Vec::with_capacity(channel.slots());
    let mut second = Vec::with_capacity(channel.slots());
    let mut noise_gain = [Vec::new(), Vec::new()];
    for slot in 0..channel.slots() {
        // walk backwards from the destinations: t = hop_H diag(g_{H-1}) ... hop_{l+1}
        let mut t = channel.hop(hops - 1).matrix(slot);
        let mut extra = [0.0; 2];
        for l in (0..inner.layers.len()).rev() {
            let with_gain = scale_columns(&t, &inner.layers[l]);
            // noise entering the relays of this layer passes through their gains and everything after
            for (k, e) in extra.iter_mut().enumerate() {
                *e += with_gain[k][0].norm_sqr() + with_gain[k][1].norm_sqr();
            }
            t = mat_mul(&with_gain, &channel.hop(l + 1).matrix(slot));
        }
        first.push(channel.hop(0).matrix(slot));
        second.push(t);
        noise_gain[0].push(extra[0]);
        noise_gain[1].push(extra[1]);
    }
    let reduced = ChannelRealization::from_matrices(channel.model(), vec![first, second])?;
    Ok(ReducedNetwork { channel: reduced, noise_gain })
}

/// No zero entry and `G11 G22 != G12 G21` (relative gap above `tol`) in every slot of the second hop.
pub fn is_generic(channel: &ChannelRealization, tol: f64) -> bool {
    (0..channel.slots()).all(|slot| {
        let g = channel.hop(1).matrix(slot);
        let (a, b) = (g[0][0] * g[1][1], g[0][1] * g[1][0]);
        g.iter().flatten().all(|z| z.norm() > 0.0) && (a - b).norm() > tol * a.norm().max(b.norm())
    })
}
