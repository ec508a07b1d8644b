//! Channel realizations for layered 2x2 relay networks.
//!
//! A realization stores every coefficient of every hop for `M` channel uses
//! (one symbol extension). Hop `h` maps the transmitters of layer `h` to the
//! receivers of layer `h + 1`; coefficient `(rx, tx)` is the gain from
//! transmitter `tx` to receiver `rx`.
//!
//! Draw order for [`ChannelRealization::sample`] is hop-major, then receiver,
//! then transmitter, then slot. Complex draws take the magnitude first
//! (log-uniform on the bounds) and then the phase (uniform on `[0, 2pi)`).
//! Real draws take the sign first and then a magnitude uniform on the bounds.
//! Constant models draw once per coefficient and replicate across slots.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{diag, CMat};
use crate::rng::seeded;

/// A 2x2 coefficient matrix indexed `[rx][tx]`.
pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    TimeVarying,
    ConstantComplex,
    ConstantReal,
}

impl ChannelModel {
    pub fn is_constant(self) -> bool {
        !matches!(self, ChannelModel::TimeVarying)
    }
}

impl std::str::FromStr for ChannelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time_varying" => Ok(Self::TimeVarying),
            "constant_complex" => Ok(Self::ConstantComplex),
            "constant_real" => Ok(Self::ConstantReal),
            other => Err(Error::Parameter(format!("unknown channel model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeBounds {
    pub min: f64,
    pub max: f64,
}

impl MagnitudeBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0) || !(min <= max) || !max.is_finite() {
            return Err(Error::Parameter(format!("invalid magnitude bounds ({min}, {max})")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, magnitude: f64) -> bool {
        let slack = 1e-12 * self.max;
        magnitude >= self.min - slack && magnitude <= self.max + slack
    }
}

impl Default for MagnitudeBounds {
    fn default() -> Self {
        Self { min: 0.1, max: 10.0 }
    }
}

/// One hop: four coefficient sequences in row-major `(rx, tx)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    coeffs: [Vec<Complex64>; 4],
}

impl Hop {
    pub fn sequence(&self, rx: usize, tx: usize) -> &[Complex64] {
        &self.coeffs[2 * rx + tx]
    }

    pub fn coefficient(&self, rx: usize, tx: usize, slot: usize) -> Complex64 {
        self.coeffs[2 * rx + tx][slot]
    }

    pub fn matrix(&self, slot: usize) -> Mat2 {
        [
            [self.coefficient(0, 0, slot), self.coefficient(0, 1, slot)],
            [self.coefficient(1, 0, slot), self.coefficient(1, 1, slot)],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelFile", into = "ChannelFile")]
pub struct ChannelRealization {
    model: ChannelModel,
    seed: Option<u64>,
    bounds: MagnitudeBounds,
    slots: usize,
    hops: Vec<Hop>,
}

impl ChannelRealization {
    /// Draw a realization; a pure function of its arguments.
    pub fn sample(seed: u64, hops: usize, slots: usize, model: ChannelModel, bounds: MagnitudeBounds) -> Result<Self> {
        let bounds = MagnitudeBounds::new(bounds.min, bounds.max)?;
        if hops < 2 {
            return Err(Error::Parameter(format!("need at least 2 hops, got {hops}")));
        }
        if slots == 0 {
            return Err(Error::Parameter("extension length must be at least 1".into()));
        }
        let mut rng = seeded(seed);
        let (ln_min, ln_max) = (bounds.min.ln(), bounds.max.ln());
        let draws = if model.is_constant() { 1 } else { slots };
        let mut out = Vec::with_capacity(hops);
        for _ in 0..hops {
            let coeffs: [Vec<Complex64>; 4] = std::array::from_fn(|_| {
                let seq: Vec<Complex64> = (0..draws)
                    .map(|_| match model {
                        ChannelModel::ConstantReal => {
                            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            let mag = rng.random_range(bounds.min..=bounds.max);
                            Complex64::new(sign * mag, 0.0)
                        }
                        _ => {
                            let mag = if ln_max > ln_min { rng.random_range(ln_min..ln_max).exp() } else { bounds.min };
                            let phase = rng.random_range(0.0..TAU);
                            Complex64::from_polar(mag, phase)
                        }
                    })
                    .collect();
                if draws == 1 {
                    vec![seq[0]; slots]
                } else {
                    seq
                }
            });
            out.push(Hop { coeffs });
        }
        Ok(Self { model, seed: Some(seed), bounds, slots, hops: out })
    }

    /// Build a realization from explicit matrices; `hops[h][slot]` is the hop matrix.
    ///
    /// Bounds are taken from the smallest and largest coefficient magnitude.
    pub fn from_matrices(model: ChannelModel, hops: Vec<Vec<Mat2>>) -> Result<Self> {
        if hops.len() < 2 {
            return Err(Error::Parameter(format!("need at least 2 hops, got {}", hops.len())));
        }
        let slots = hops[0].len();
        if slots == 0 || hops.iter().any(|h| h.len() != slots) {
            return Err(Error::Parameter("every hop needs the same nonzero number of slots".into()));
        }
        let converted = hops
            .iter()
            .map(|h| Hop {
                coeffs: std::array::from_fn(|k| h.iter().map(|m| m[k / 2][k % 2]).collect()),
            })
            .collect::<Vec<_>>();
        let (min, max) = converted
            .iter()
            .flat_map(|h| h.coeffs.iter().flatten())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), z| (lo.min(z.norm()), hi.max(z.norm())));
        let bounds = MagnitudeBounds::new(min, max)
            .map_err(|_| Error::Degenerate("channel has a zero or non-finite coefficient".into()))?;
        let out = Self { model, seed: None, bounds, slots, hops: converted };
        out.validate()?;
        Ok(out)
    }

    /// Constant channel with one matrix per hop replicated over `slots`.
    pub fn constant(model: ChannelModel, hops: &[Mat2], slots: usize) -> Result<Self> {
        Self::from_matrices(model, hops.iter().map(|m| vec![*m; slots]).collect())
    }

    fn validate(&self) -> Result<()> {
        for (h, hop) in self.hops.iter().enumerate() {
            for (k, seq) in hop.coeffs.iter().enumerate() {
                if seq.len() != self.slots {
                    return Err(Error::Parameter(format!("hop {h} coefficient {k} has {} slots", seq.len())));
                }
                for z in seq {
                    if !(z.norm() > 0.0) || !z.is_finite() {
                        return Err(Error::Degenerate(format!("hop {h} coefficient {k} is zero or non-finite")));
                    }
                    if !self.bounds.contains(z.norm()) {
                        return Err(Error::Parameter(format!("hop {h} coefficient {k} magnitude outside bounds")));
                    }
                    if self.model == ChannelModel::ConstantReal && z.im != 0.0 {
                        return Err(Error::Parameter(format!("hop {h} coefficient {k} is not real")));
                    }
                }
                if self.model.is_constant() && seq.iter().any(|z| *z != seq[0]) {
                    return Err(Error::Parameter(format!("hop {h} coefficient {k} varies under a constant model")));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn bounds(&self) -> MagnitudeBounds {
        self.bounds
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    pub fn hop(&self, index: usize) -> &Hop {
        &self.hops[index]
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    /// Diagonal of the `M x M` symbol-extension matrix for one coefficient.
    pub fn extend(&self, hop: usize, rx: usize, tx: usize) -> Result<DiagonalExtension> {
        if hop >= self.hops.len() || rx > 1 || tx > 1 {
            return Err(Error::Parameter(format!(
                "index (hop {hop}, rx {rx}, tx {tx}) out of range for {} hops",
                self.hops.len()
            )));
        }
        Ok(DiagonalExtension::new(self.hops[hop].sequence(rx, tx).to_vec()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed channel file: {e}")))
    }
}

/// On-disk JSON layout of a realization.
#[derive(Serialize, Deserialize)]
struct ChannelFile {
    model: ChannelModel,
    hops: Vec<Vec<Vec<[f64; 2]>>>,
    seed: Option<u64>,
    bounds: [f64; 2],
}

impl From<ChannelRealization> for ChannelFile {
    fn from(ch: ChannelRealization) -> Self {
        ChannelFile {
            model: ch.model,
            hops: ch
                .hops
                .iter()
                .map(|h| h.coeffs.iter().map(|seq| seq.iter().map(|z| [z.re, z.im]).collect()).collect())
                .collect(),
            seed: ch.seed,
            bounds: [ch.bounds.min, ch.bounds.max],
        }
    }
}

impl TryFrom<ChannelFile> for ChannelRealization {
    type Error = Error;

    fn try_from(file: ChannelFile) -> Result<Self> {
        let bounds = MagnitudeBounds::new(file.bounds[0], file.bounds[1])?;
        if file.hops.len() < 2 {
            return Err(Error::Parameter("channel file needs at least 2 hops".into()));
        }
        let slots = file.hops[0].first().map_or(0, Vec::len);
        if slots == 0 {
            return Err(Error::Parameter("channel file has empty coefficient sequences".into()));
        }
        let mut hops = Vec::with_capacity(file.hops.len());
        for (h, hop) in file.hops.iter().enumerate() {
            if hop.len() != 4 {
                return Err(Error::Parameter(format!("hop {h} has {} coefficients, expected 4", hop.len())));
            }
            let coeffs: [Vec<Complex64>; 4] =
                std::array::from_fn(|k| hop[k].iter().map(|p| Complex64::new(p[0], p[1])).collect());
            hops.push(Hop { coeffs });
        }
        let out = ChannelRealization { model: file.model, seed: file.seed, bounds, slots, hops };
        out.validate()?;
        Ok(out)
    }
}

/// Diagonal of an `M x M` diagonal channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalExtension {
    entries: Vec<Complex64>,
}

impl DiagonalExtension {
    pub fn new(entries: Vec<Complex64>) -> Self {
        assert!(!entries.is_empty(), "diagonal extension needs at least one entry");
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn has_zero(&self) -> bool {
        self.entries.iter().any(|z| z.norm() == 0.0)
    }

    pub fn to_matrix(&self) -> CMat {
        diag(&self.entries)
    }
}

/// Scaled rotation `magnitude * U(phase)`: the real 2x2 form of a complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealRotation {
    pub magnitude: f64,
    pub phase: f64,
}

impl RealRotation {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.phase.sin_cos();
        [[self.magnitude * c, -self.magnitude * s], [self.magnitude * s, self.magnitude * c]]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.matrix();
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn determinant(&self) -> f64 {
        let m = self.matrix();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn to_cmat(&self) -> CMat {
        let m = self.matrix();
        CMat::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]].map(|x| Complex64::new(x, 0.0)))
    }
}

pub fn to_real_rotation(coefficient: Complex64) -> Result<RealRotation> {
    if !(coefficient.norm() > 0.0) {
        return Err(Error::Degenerate("zero coefficient has no rotation form".into()));
    }
    Ok(RealRotation { magnitude: coefficient.norm(), phase: coefficient.arg() })
}

/// Whether signals and noise are complex, or real (one real dimension per entry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Complex,
    Real,
}

/// Dense two-hop view: `first[rx][tx]` and `second[rx][tx]` are `dim x dim` matrices.
#[derive(Debug, Clone)]
pub struct LinearNetwork {
    pub dim: usize,
    pub field: Field,
    pub first: [[CMat; 2]; 2],
    pub second: [[CMat; 2]; 2],
    /// Real dimensions per complex channel use folded into one vector dimension set.
    pub dims_per_use: usize,
}

impl LinearNetwork {
    /// `M`-slot symbol extension of a two-hop realization (diagonal matrices).
    pub fn symbol_extension(channel: &ChannelRealization) -> Result<Self> {
        if channel.hop_count() != 2 {
            return Err(Error::Parameter(format!(
                "symbol extension needs a 2-hop channel, got {} hops",
                channel.hop_count()
            )));
        }
        let hop = |h: usize| -> Result<[[CMat; 2]; 2]> {
            Ok([
                [channel.extend(h, 0, 0)?.to_matrix(), channel.extend(h, 0, 1)?.to_matrix()],
                [channel.extend(h, 1, 0)?.to_matrix(), channel.extend(h, 1, 1)?.to_matrix()],
            ])
        };
        let field = if channel.model() == ChannelModel::ConstantReal { Field::Real } else { Field::Complex };
        Ok(Self { dim: channel.slots(), field, first: hop(0)?, second: hop(1)?, dims_per_use: 1 })
    }

    /// Real 2x2 scaled-rotation view of a constant complex two-hop channel.
    pub fn real_rotation(first: &Mat2, second: &Mat2) -> Result<Self> {
        let rot = |m: &Mat2| -> Result<[[CMat; 2]; 2]> {
            Ok([
                [to_real_rotation(m[0][0])?.to_cmat(), to_real_rotation(m[0][1])?.to_cmat()],
                [to_real_rotation(m[1][0])?.to_cmat(), to_real_rotation(m[1][1])?.to_cmat()],
            ])
        };
        Ok(Self { dim: 2, field: Field::Real, first: rot(first)?, second: rot(second)?, dims_per_use: 2 })
    }

    /// Real-rotation view of the first slot of a constant complex realization.
    pub fn real_rotation_of(channel: &ChannelRealization) -> Result<Self> {
        if channel.model() != ChannelModel::ConstantComplex || channel.hop_count() != 2 {
            return Err(Error::Parameter("real-rotation view needs a 2-hop constant_complex channel".into()));
        }
        Self::real_rotation(&channel.hop(0).matrix(0), &channel.hop(1).matrix(0))
    }

    /// Full `M x M` MIMO hops.
    pub fn mimo(first: [[CMat; 2]; 2], second: [[CMat; 2]; 2]) -> Result<Self> {
        let dim = first[0][0].nrows();
        let all = first.iter().chain(second.iter()).flatten();
        if dim == 0 || all.clone().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::Parameter("MIMO hops must all be square with equal size".into()));
        }
        Ok(Self { dim, field: Field::Complex, first, second, dims_per_use: 1 })
    }
}

/// Sum of the four phases `p12 + p21 - p11 - p22` folded to `(-pi, pi]`.
pub fn cross_phase(m: &Mat2) -> f64 {
    let s = m[0][1].arg() + m[1][0].arg() - m[0][0].arg() - m[1][1].arg();
    let r = s.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}
