//! Integer constellations on constant real channels.
//!
//! Each source sends integer symbols along real scalar "directions" built from
//! monomials in the channel coefficients. Relays hard-decide the integer sums
//! that alignment leaves in each direction, forward them along their own
//! monomial directions, and destinations decide integer differences and undo
//! them with running sums.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ChannelRealization};
use crate::error::{Error, Result};
use crate::relay::{enumeration_size, hard_decide_box, min_distance, ENUMERATION_CAP};
use crate::rng::{gaussian, substream};

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.2;

/// Real 2x2 hop matrix, `[rx][tx]`.
pub type RealMat2 = [[f64; 2]; 2];

/// First- and second-hop coefficients of a constant real network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealChannel {
    pub f: RealMat2,
    pub g: RealMat2,
}

impl RealChannel {
    pub fn from_realization(channel: &ChannelRealization) -> Result<Self> {
        if channel.model() != ChannelModel::ConstantReal {
            return Err(Error::Parameter(format!("integer scheme needs constant_real channels, got {:?}", channel.model())));
        }
        if channel.hop_count() != 2 {
            return Err(Error::Parameter(format!("expected 2 hops, got {}", channel.hop_count())));
        }
        let real = |h: usize| -> RealMat2 {
            let m = channel.hop(h).matrix(0);
            [[m[0][0].re, m[0][1].re], [m[1][0].re, m[1][1].re]]
        };
        Ok(Self { f: real(0), g: real(1) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialDirections {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub vr1: Vec<f64>,
    pub vr2: Vec<f64>,
}

impl MonomialDirections {
    pub fn m(&self) -> usize {
        self.v1.len()
    }

    /// Largest relative violation of the four alignment and neutralization identities.
    pub fn alignment_residual(&self, ch: &RealChannel) -> f64 {
        let (f, g) = (&ch.f, &ch.g);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.v2.len() {
            worst = worst.max(rel(f[0][0] * self.v1[i + 1], f[0][1] * self.v2[i]));
            worst = worst.max(rel(f[1][0] * self.v1[i], f[1][1] * self.v2[i]));
            worst = worst.max(rel(g[0][0] * self.vr1[i + 1], -g[0][1] * self.vr2[i]));
            worst = worst.max(rel(g[1][0] * self.vr1[i], -g[1][1] * self.vr2[i]));
        }
        worst
    }
}

fn monomial_chain(h: &RealMat2, m: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let direct = h[0][0] * h[1][1];
    let cross = h[0][1] * h[1][0];
    let p = |x: f64, e: usize| x.powi(e as i32);
    let first = (0..m).map(|i| p(cross, i) * p(direct, m - 1 - i)).collect();
    let second = (1..m)
        .map(|i| sign * p(h[0][0], m - i) * p(h[0][1], i - 1) * p(h[1][0], i) * p(h[1][1], m - 1 - i))
        .collect();
    (first, second)
}

/// Closed-form monomial directions for both hops; relay 2 carries the minus sign.
pub fn monomial_directions(ch: &RealChannel, m: usize) -> Result<MonomialDirections> {
    if m == 0 {
        return Err(Error::Parameter("extension length must be at least 1".into()));
    }
    for (name, h) in [("first", &ch.f), ("second", &ch.g)] {
        if h.iter().flatten().any(|x| *x == 0.0 || !x.is_finite()) {
            return Err(Error::Degenerate(format!("{name}-hop coefficient is zero")));
        }
    }
    let (v1, v2) = monomial_chain(&ch.f, m, 1.0);
    let (vr1, vr2) = monomial_chain(&ch.g, m, -1.0);
    Ok(MonomialDirections { v1, v2, vr1, vr2 })
}

/// True when no two entries coincide (relative gap above `tol`).
pub fn pairwise_distinct(values: &[f64], tol: f64) -> bool {
    for i in 0..values.len() {
        for j in 0..i {
            let scale = values[i].abs().max(values[j].abs());
            if (values[i] - values[j]).abs() <= tol * scale {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalConfig {
    pub m: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub p: f64,
    pub q_max: i64,
    pub a_norm: f64,
    pub b_norm: f64,
    /// `min(1/xi_1, 1/xi_2)` for the sources and for the relays.
    pub xi_source: f64,
    pub xi_relay: f64,
}

impl RationalConfig {
    /// Largest transmit amplitude over every admissible symbol vector: S1, S2, R1, R2.
    pub fn worst_case_amplitudes(&self, dirs: &MonomialDirections) -> [f64; 4] {
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let q = self.q_max as f64;
        [
            self.a_norm * q * l1(&dirs.v1),
            self.a_norm * q * l1(&dirs.v2),
            self.b_norm * 2.0 * q * l1(&dirs.vr1),
            self.b_norm * 2.0 * q * l1(&dirs.vr2),
        ]
    }
}

/// `q_max = floor(gamma * P^((1-eps) / (2(M+eps))))`.
pub fn constellation_bound(m: usize, gamma: f64, epsilon: f64, p: f64) -> i64 {
    let exponent = (1.0 - epsilon) / (2.0 * (m as f64 + epsilon));
    (gamma * p.powf(exponent)).floor() as i64
}

/// Power normalizations. Each `xi_k` is the l1 norm of a direction set, so the
/// worst-case amplitude `norm * bound * xi_k` stays within `sqrt(P)`.
pub fn build_config(m: usize, gamma: f64, epsilon: f64, p: f64, dirs: &MonomialDirections) -> Result<RationalConfig> {
    if m == 0 || dirs.m() != m {
        return Err(Error::Config(format!("extension length {m} does not match directions ({})", dirs.m())));
    }
    if !(gamma > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) || !(p > 0.0) {
        return Err(Error::Config("need gamma > 0, 0 < epsilon < 1 and P > 0".into()));
    }
    let q_max = constellation_bound(m, gamma, epsilon, p);
    if q_max < 1 {
        return Err(Error::Config(format!("constellation is degenerate at P = {p:e} (q_max = {q_max})")));
    }
    let inv_l1 = |v: &[f64]| {
        let s: f64 = v.iter().map(|x| x.abs()).sum();
        if s > 0.0 {
            1.0 / s
        } else {
            f64::INFINITY
        }
    };
    let xi_source = inv_l1(&dirs.v1).min(inv_l1(&dirs.v2));
    let xi_relay = inv_l1(&dirs.vr1).min(inv_l1(&dirs.vr2));
    let growth = p.powf((m as f64 - 1.0 + 2.0 * epsilon) / (2.0 * (m as f64 + epsilon)));
    Ok(RationalConfig {
        m,
        gamma,
        epsilon,
        p,
        q_max,
        a_norm: xi_source / gamma * growth,
        b_norm: xi_relay / (2.0 * gamma) * growth,
        xi_source,
        xi_relay,
    })
}

/// Everything about a (channel, config) pair that does not change between trials.
#[derive(Debug, Clone)]
pub struct RationalSetup {
    pub channel: RealChannel,
    pub dirs: MonomialDirections,
    pub config: RationalConfig,
    pub noise_var: f64,
    /// Received directions (already scaled by A or B) at R1, R2, D1, D2.
    receive: [Vec<f64>; 4],
    relay_bounds: Vec<i64>,
    dest_bounds: [Vec<i64>; 2],
    /// Minimum distance between distinct noiseless points at R1, R2, D1, D2.
    pub min_distance: [f64; 4],
}

impl RationalSetup {
    pub fn new(channel: RealChannel, config: RationalConfig, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0) {
            return Err(Error::Config("noise variance must be nonnegative".into()));
        }
        let m = config.m;
        let dirs = monomial_directions(&channel, m)?;
        let (f, g, a, b) = (&channel.f, &channel.g, config.a_norm, config.b_norm);
        let scaled = |h: f64, v: &[f64], n: f64| v.iter().map(|x| n * h * x).collect::<Vec<_>>();
        let mut d2 = scaled(g[1][1], &dirs.vr2, b);
        d2.push(b * g[1][0] * dirs.vr1[m - 1]);
        let receive = [scaled(f[0][0], &dirs.v1, a), scaled(f[1][0], &dirs.v1, a), scaled(g[0][0], &dirs.vr1, b), d2];
        let q = config.q_max;
        let relay_bounds = vec![2 * q; m];
        // D1's first and D2's last dimension carry one relay decision, the others a difference of two
        let mut d1_bounds = vec![4 * q; m];
        d1_bounds[0] = 2 * q;
        let mut d2_bounds = vec![4 * q; m];
        d2_bounds[m - 1] = 2 * q;
        let dest_bounds = [d1_bounds, d2_bounds];
        for bounds in [&relay_bounds, &dest_bounds[0], &dest_bounds[1]] {
            let points = enumeration_size(bounds);
            if points > ENUMERATION_CAP as u128 {
                return Err(Error::Capacity { points, cap: ENUMERATION_CAP });
            }
        }
        let mut dist = [0.0; 4];
        for (k, dirs_k) in receive.iter().enumerate() {
            let bounds = if k < 2 { &relay_bounds } else { &dest_bounds[k - 2] };
            dist[k] = min_distance(dirs_k, bounds)?;
        }
        Ok(Self { channel, dirs, config, noise_var, receive, relay_bounds, dest_bounds, min_distance: dist })
    }

    pub fn from_realization(channel: &ChannelRealization, config: RationalConfig, noise_var: f64) -> Result<Self> {
        Self::new(RealChannel::from_realization(channel)?, config, noise_var)
    }
}

/// Symbol and decision record of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub x1: Vec<i64>,
    pub x2: Vec<i64>,
    /// Decided integer sums at R1 and R2 (R2 forwards all but its last).
    pub relay_decisions: [Vec<i64>; 2],
    /// Decided integer values per destination dimension.
    pub dest_decisions: [Vec<i64>; 2],
    pub estimates: [Vec<i64>; 2],
    pub relay_errors: [u64; 2],
    pub dest_symbol_errors: [u64; 2],
    /// Transmit powers at S1, S2, R1, R2.
    pub tx_power: [f64; 4],
    pub per_hop_min_distance: [f64; 4],
}

/// Running sums of the destination decisions.
pub fn chain_estimate(differences: &[i64]) -> Vec<i64> {
    differences
        .iter()
        .scan(0i64, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect()
}

/// Integer sums each relay should recover for the symbols `x1`, `x2`.
pub fn relay_targets(x1: &[i64], x2: &[i64]) -> [Vec<i64>; 2] {
    let m = x1.len();
    let r1 = (0..m).map(|k| if k == 0 { x1[0] } else { x1[k] + x2[k - 1] }).collect();
    let r2 = (0..m).map(|k| if k + 1 < m { x1[k] + x2[k] } else { x1[k] }).collect();
    [r1, r2]
}

fn dot(dirs: &[f64], values: &[i64]) -> f64 {
    dirs.iter().zip(values).map(|(d, v)| d * *v as f64).sum()
}

/// One channel use with uniformly drawn symbols.
pub fn run_rational_trial<R: Rng + ?Sized>(setup: &RationalSetup, rng: &mut R) -> Result<TrialOutcome> {
    let m = setup.config.m;
    let q = setup.config.q_max;
    let x1: Vec<i64> = (0..m).map(|_| rng.random_range(-q..=q)).collect();
    let x2: Vec<i64> = (0..m - 1).map(|_| rng.random_range(-q..=q)).collect();
    run_rational_symbols(setup, &x1, &x2, rng)
}

/// One channel use with given symbols; `rng` only supplies noise.
pub fn run_rational_symbols<R: Rng + ?Sized>(
    setup: &RationalSetup,
    x1: &[i64],
    x2: &[i64],
    rng: &mut R,
) -> Result<TrialOutcome> {
    let cfg = &setup.config;
    let m = cfg.m;
    if x1.len() != m || x2.len() + 1 != m {
        return Err(Error::Parameter(format!("need {m} + {} symbols", m - 1)));
    }
    let (f, g, d) = (&setup.channel.f, &setup.channel.g, &setup.dirs);
    let mut noise = || if setup.noise_var > 0.0 { gaussian(rng, setup.noise_var) } else { 0.0 };

    let s1 = cfg.a_norm * dot(&d.v1, x1);
    let s2 = cfg.a_norm * dot(&d.v2, x2);
    let yr1 = f[0][0] * s1 + f[0][1] * s2 + noise();
    let yr2 = f[1][0] * s1 + f[1][1] * s2 + noise();
    let u1 = hard_decide_box(yr1, &setup.receive[0], &setup.relay_bounds)?;
    let u2 = hard_decide_box(yr2, &setup.receive[1], &setup.relay_bounds)?;

    let r1 = cfg.b_norm * dot(&d.vr1, &u1);
    let r2 = cfg.b_norm * dot(&d.vr2, &u2[..m - 1]);
    let yd1 = g[0][0] * r1 + g[0][1] * r2 + noise();
    let yd2 = g[1][0] * r1 + g[1][1] * r2 + noise();
    let w1 = hard_decide_box(yd1, &setup.receive[2], &setup.dest_bounds[0])?;
    let w2 = hard_decide_box(yd2, &setup.receive[3], &setup.dest_bounds[1])?;

    let est1 = chain_estimate(&w1);
    let est2 = chain_estimate(&w2[..m - 1]);
    let targets = relay_targets(x1, x2);
    let wrong = |a: &[i64], b: &[i64]| a.iter().zip(b).filter(|(a, b)| a != b).count() as u64;
    Ok(TrialOutcome {
        relay_errors: [wrong(&u1, &targets[0]), wrong(&u2, &targets[1])],
        dest_symbol_errors: [wrong(&est1, x1), wrong(&est2, x2)],
        tx_power: [s1 * s1, s2 * s2, r1 * r1, r2 * r2],
        per_hop_min_distance: setup.min_distance,
        x1: x1.to_vec(),
        x2: x2.to_vec(),
        relay_decisions: [u1, u2],
        dest_decisions: [w1, w2],
        estimates: [est1, est2],
    })
}

/// `(1 - SER) log2(2 q_max + 1) - 1`, floored at zero.
pub fn rate_lower_bound(symbol_error_rate: f64, q_max: i64) -> f64 {
    let ser = symbol_error_rate.clamp(0.0, 1.0);
    ((1.0 - ser) * ((2 * q_max + 1) as f64).log2() - 1.0).max(0.0)
}

/// Aggregated counts over a batch of trials.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchTally {
    pub trials: u64,
    pub relay_errors: [u64; 2],
    pub dest_errors: [u64; 2],
    pub max_power: [f64; 4],
}

impl BatchTally {
    pub fn add(&mut self, t: &TrialOutcome) {
        self.trials += 1;
        for k in 0..2 {
            self.relay_errors[k] += t.relay_errors[k];
            self.dest_errors[k] += t.dest_symbol_errors[k];
        }
        for k in 0..4 {
            self.max_power[k] = self.max_power[k].max(t.tx_power[k]);
        }
    }

    pub fn merge(mut self, other: &BatchTally) -> Self {
        self.trials += other.trials;
        for k in 0..2 {
            self.relay_errors[k] += other.relay_errors[k];
            self.dest_errors[k] += other.dest_errors[k];
        }
        for k in 0..4 {
            self.max_power[k] = self.max_power[k].max(other.max_power[k]);
        }
        self
    }

    /// Relay 1, relay 2, D1, D2 symbol error rates for extension length `m`.
    pub fn rates(&self, m: usize) -> [f64; 4] {
        let per = |errors: u64, streams: usize| {
            if self.trials == 0 || streams == 0 {
                0.0
            } else {
                errors as f64 / (self.trials as f64 * streams as f64)
            }
        };
        [
            per(self.relay_errors[0], m),
            per(self.relay_errors[1], m),
            per(self.dest_errors[0], m),
            per(self.dest_errors[1], m - 1),
        ]
    }
}

/// Trial `index` of a batch seeded by `seed`; the result does not depend on
/// which other trials run or in what order.
pub fn run_indexed_trial(setup: &RationalSetup, seed: u64, index: u64) -> Result<TrialOutcome> {
    run_rational_trial(setup, &mut substream(seed, index))
}

pub fn run_batch(setup: &RationalSetup, seed: u64, trials: u64) -> Result<BatchTally> {
    let mut tally = BatchTally::default();
    for i in 0..trials {
        tally.add(&run_indexed_trial(setup, seed, i)?);
    }
    Ok(tally)
}

/// One output row of a power sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RationalRow {
    pub P: f64,
    pub M: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub relay1_ser: f64,
    pub relay2_ser: f64,
    pub d1_ser: f64,
    pub d2_ser: f64,
    pub rate_lb_1: f64,
    pub rate_lb_2: f64,
}

impl RationalRow {
    pub fn from_tally(config: &RationalConfig, tally: &BatchTally) -> Self {
        let r = tally.rates(config.m);
        Self {
            P: config.p,
            M: config.m,
            gamma: config.gamma,
            epsilon: config.epsilon,
            relay1_ser: r[0],
            relay2_ser: r[1],
            d1_ser: r[2],
            d2_ser: r[3],
            rate_lb_1: rate_lower_bound(r[2], config.q_max),
            rate_lb_2: if config.m > 1 { rate_lower_bound(r[3], config.q_max) } else { 0.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::MagnitudeBounds;
    use crate::rng::seeded;

    fn channel(seed: u64) -> RealChannel {
        let ch = ChannelRealization::sample(seed, 2, 1, ChannelModel::ConstantReal, MagnitudeBounds::default()).unwrap();
        RealChannel::from_realization(&ch).unwrap()
    }

    #[test]
    fn hand_worked_directions() {
        let ch = RealChannel { f: [[2.0, 3.0], [5.0, 7.0]], g: [[1.0, 1.0], [1.0, 1.0]] };
        let d = monomial_directions(&ch, 2).unwrap();
        assert_eq!(d.v1, vec![14.0, 15.0]);
        assert_eq!(d.v2, vec![10.0]);
        assert_eq!(2.0 * d.v1[1], 3.0 * d.v2[0]);
        assert_eq!(5.0 * d.v1[0], 7.0 * d.v2[0]);
    }

    #[test]
    fn unit_channel_directions_coincide() {
        let ch = RealChannel { f: [[1.0; 2]; 2], g: [[1.0; 2]; 2] };
        let d = monomial_directions(&ch, 3).unwrap();
        assert_eq!(d.v1, vec![1.0, 1.0, 1.0]);
        assert!(!pairwise_distinct(&d.v1, 1e-12));
    }

    #[test]
    fn zero_coefficient_is_degenerate() {
        let ch = RealChannel { f: [[1.0, 0.0], [1.0, 1.0]], g: [[1.0; 2]; 2] };
        assert!(matches!(monomial_directions(&ch, 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn constellation_bound_example() {
        assert_eq!(constellation_bound(2, 1.0, 0.1, 1e6), 19);
    }

    #[test]
    fn single_slot_normalization_meets_power() {
        let d = monomial_directions(&channel(1), 1).unwrap();
        let cfg = build_config(1, 1.0, 0.2, 1e6, &d).unwrap();
        let amp = cfg.a_norm * cfg.gamma * cfg.p.powf(0.8 / 2.4);
        assert!(amp <= cfg.p.sqrt() * cfg.xi_source * (1.0 + 1e-12));
    }

    #[test]
    fn tiny_power_is_a_config_error() {
        let d = monomial_directions(&channel(1), 2).unwrap();
        assert!(matches!(build_config(2, 1.0, 0.2, 0.5, &d), Err(Error::Config(_))));
    }

    #[test]
    fn rate_bound_examples() {
        assert!((rate_lower_bound(0.0, 19) - (39f64.log2() - 1.0)).abs() < 1e-12);
        assert!((rate_lower_bound(0.0, 19) - 4.285).abs() < 1e-3);
        assert_eq!(rate_lower_bound(1.0, 19), 0.0);
        assert_eq!(rate_lower_bound(0.5, 1), 0.0);
    }

    #[test]
    fn chain_estimate_is_running_sum() {
        assert_eq!(chain_estimate(&[3, -1, 4]), vec![3, 2, 6]);
        assert!(chain_estimate(&[]).is_empty());
    }

    #[test]
    fn noiseless_trials_are_error_free() {
        for m in [1usize, 2, 3] {
            let ch = channel(3);
            let d = monomial_directions(&ch, m).unwrap();
            let cfg = build_config(m, 1.0, 0.2, 1e8, &d).unwrap();
            let setup = RationalSetup::new(ch, cfg, 0.0).unwrap();
            let tally = run_batch(&setup, 9, 300).unwrap();
            assert_eq!(tally.relay_errors, [0, 0], "m={m}");
            assert_eq!(tally.dest_errors, [0, 0], "m={m}");
        }
    }

    #[test]
    fn destination_sees_integer_differences() {
        let ch = channel(5);
        let d = monomial_directions(&ch, 3).unwrap();
        let cfg = build_config(3, 1.0, 0.2, 1e8, &d).unwrap();
        let setup = RationalSetup::new(ch, cfg, 0.0).unwrap();
        let out = run_rational_symbols(&setup, &[2, -1, 3], &[1, -2], &mut seeded(0)).unwrap();
        assert_eq!(out.relay_decisions[0], vec![2, 0, 1]);
        assert_eq!(out.relay_decisions[1], vec![3, -3, 3]);
        assert_eq!(out.dest_decisions[0], vec![2, -3, 4]);
        assert_eq!(out.dest_decisions[1][..2], [1, -3]);
        assert_eq!(out.estimates[0], vec![2, -1, 3]);
        assert_eq!(out.estimates[1], vec![1, -2]);
    }

    #[test]
    fn batch_is_order_independent() {
        let ch = channel(3);
        let d = monomial_directions(&ch, 2).unwrap();
        let setup = RationalSetup::new(ch, build_config(2, 1.0, 0.2, 1e4, &d).unwrap(), 1.0).unwrap();
        let forward = run_batch(&setup, 4, 50).unwrap();
        let mut backward = BatchTally::default();
        for i in (0..50).rev() {
            backward.add(&run_indexed_trial(&setup, 4, i).unwrap());
        }
        assert_eq!(forward, backward);
    }

    #[test]
    fn large_extension_hits_the_cap() {
        let ch = channel(3);
        let d = monomial_directions(&ch, 9).unwrap();
        let cfg = build_config(9, 1.0, 0.2, 1e10, &d).unwrap();
        assert!(matches!(RationalSetup::new(ch, cfg, 1.0), Err(Error::Capacity { .. })));
    }
}
