//! Beamformer design for aligned interference neutralization.
//!
//! First hop: source 1 sends `M` streams and source 2 sends `M - 1`. Stream
//! `i + 1` of source 1 lines up with stream `i` of source 2 at relay 1, and
//! stream `i` of both sources line up at relay 2. With `A = F11^-1 F12 F22^-1 F21`
//! and `v1_1 = 1` this gives `v1_{i+1} = A^i 1` and `v2_i = F22^-1 F21 v1_i`.
//!
//! Second hop mirrors the first with a sign flip on relay 2 so the two copies
//! of every interfering symbol arrive in antiphase and cancel over the air.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{cross_phase, DiagonalExtension, LinearNetwork, Mat2};
use crate::error::{Error, Result};
use crate::linalg::{columns, condition_number, determinant, eigenvalues, inverse, ones, CMat, CVec, CONDITION_CAP};

/// Relative determinant threshold (against the product of row norms).
pub const DETERMINANT_TOLERANCE: f64 = 1e-9;
/// Minimum distance of the cross phase from a multiple of pi, in radians.
pub const PHASE_TOLERANCE: f64 = 1e-9;
/// Minimum eigenvalue gap for the MIMO distinctness check.
pub const EIGEN_GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    /// Source 1, `M` vectors.
    pub v1: Vec<CVec>,
    /// Source 2, `M - 1` vectors.
    pub v2: Vec<CVec>,
    /// Relay 1, `M` vectors.
    pub vr1: Vec<CVec>,
    /// Relay 2, `M - 1` vectors.
    pub vr2: Vec<CVec>,
}

impl BeamformerSet {
    pub fn m(&self) -> usize {
        self.v1.len()
    }

    /// Closed-form design for an arbitrary dense two-hop network.
    pub fn design(net: &LinearNetwork) -> Result<Self> {
        let (v1, v2) = dense_chain(&net.first, net.dim, false)?;
        let (vr1, vr2) = dense_chain(&net.second, net.dim, true)?;
        Ok(Self { v1, v2, vr1, vr2 })
    }

    /// Largest relative residual of the four alignment / neutralization identities.
    pub fn alignment_residuals(&self, net: &LinearNetwork) -> [f64; 4] {
        let f = &net.first;
        let g = &net.second;
        let mut out = [0.0f64; 4];
        for i in 0..self.v2.len() {
            out[0] = out[0].max(pair_residual(&(&f[0][0] * &self.v1[i + 1]), &(&f[0][1] * &self.v2[i])));
            out[1] = out[1].max(pair_residual(&(&f[1][0] * &self.v1[i]), &(&f[1][1] * &self.v2[i])));
        }
        for i in 0..self.vr2.len() {
            out[2] = out[2].max(pair_residual(&(&g[0][0] * &self.vr1[i + 1]), &(-(&g[0][1] * &self.vr2[i]))));
            out[3] = out[3].max(pair_residual(&(-(&g[1][0] * &self.vr1[i])), &(&g[1][1] * &self.vr2[i])));
        }
        out
    }
}

fn pair_residual(lhs: &CVec, rhs: &CVec) -> f64 {
    (lhs - rhs).norm() / lhs.norm().max(f64::MIN_POSITIVE)
}

/// `v_{i+1} = A^i v_1`, `w_i = sign * H22^-1 H21 v_i` for dense hop matrices.
fn dense_chain(hop: &[[CMat; 2]; 2], m: usize, negate: bool) -> Result<(Vec<CVec>, Vec<CVec>)> {
    let h11_inv = inverse(&hop[0][0])?;
    let h22_inv = inverse(&hop[1][1])?;
    let to_second = &h22_inv * &hop[1][0];
    let a = &h11_inv * &hop[0][1] * &to_second;
    let mut first = Vec::with_capacity(m);
    first.push(ones(m));
    for i in 1..m {
        let next = &a * &first[i - 1];
        first.push(next);
    }
    let sign = if negate { -1.0 } else { 1.0 };
    let second = first[..m.saturating_sub(1)]
        .iter()
        .map(|v| (&to_second * v) * Complex64::new(sign, 0.0))
        .collect();
    Ok((first, second))
}

fn check_diagonals(ds: [&DiagonalExtension; 4], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Parameter("extension length must be at least 1".into()));
    }
    for d in ds {
        if d.len() != m {
            return Err(Error::Parameter(format!("diagonal has {} entries, expected {m}", d.len())));
        }
        if d.has_zero() {
            return Err(Error::SingularChannel("zero diagonal entry".into()));
        }
    }
    Ok(())
}

/// Diagonal entries `A_m` of `F11^-1 F12 F22^-1 F21`.
pub fn alignment_nodes(
    f11: &DiagonalExtension,
    f12: &DiagonalExtension,
    f21: &DiagonalExtension,
    f22: &DiagonalExtension,
) -> Vec<Complex64> {
    (0..f11.len())
        .map(|k| f12.entries()[k] * f21.entries()[k] / (f11.entries()[k] * f22.entries()[k]))
        .collect()
}

/// Source beamformers for diagonal (time-varying) channels, entrywise closed form.
pub fn first_hop_beamformers(
    f11: &DiagonalExtension,
    f12: &DiagonalExtension,
    f21: &DiagonalExtension,
    f22: &DiagonalExtension,
    m: usize,
) -> Result<(Vec<CVec>, Vec<CVec>)> {
    check_diagonals([f11, f12, f21, f22], m)?;
    Ok(diagonal_chain(f11, f12, f21, f22, m, 1.0))
}

/// Relay beamformers for diagonal channels; relay 2 carries the minus sign.
pub fn second_hop_beamformers(
    g11: &DiagonalExtension,
    g12: &DiagonalExtension,
    g21: &DiagonalExtension,
    g22: &DiagonalExtension,
    m: usize,
) -> Result<(Vec<CVec>, Vec<CVec>)> {
    check_diagonals([g11, g12, g21, g22], m)?;
    Ok(diagonal_chain(g11, g12, g21, g22, m, -1.0))
}

fn diagonal_chain(
    h11: &DiagonalExtension,
    h12: &DiagonalExtension,
    h21: &DiagonalExtension,
    h22: &DiagonalExtension,
    m: usize,
    sign: f64,
) -> (Vec<CVec>, Vec<CVec>) {
    let nodes = alignment_nodes(h11, h12, h21, h22);
    let first: Vec<CVec> = (0..m).map(|i| CVec::from_iterator(m, nodes.iter().map(|a| a.powu(i as u32)))).collect();
    let second = first[..m - 1]
        .iter()
        .map(|v| {
            CVec::from_iterator(m, (0..m).map(|k| sign * h21.entries()[k] / h22.entries()[k] * v[k]))
        })
        .collect();
    (first, second)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub determinant_magnitude: f64,
    /// `|det|` divided by the product of row norms (Hadamard ratio, in `[0, 1]`).
    pub determinant_ratio: f64,
    pub condition_number: f64,
    pub independent: bool,
}

/// Determinant and conditioning of the matrix whose columns are `vectors`.
pub fn independence_report(vectors: &[CVec]) -> Result<IndependenceReport> {
    let m = vectors.len();
    if m == 0 || vectors.iter().any(|v| v.len() != m) {
        return Err(Error::Parameter(format!("need {m} vectors of length {m}")));
    }
    let stacked = columns(vectors);
    let det = determinant(&stacked).norm();
    let row_norms: f64 = stacked.row_iter().map(|r| r.norm()).product();
    let ratio = if row_norms > 0.0 { det / row_norms } else { 0.0 };
    let condition = condition_number(&stacked);
    Ok(IndependenceReport {
        determinant_magnitude: det,
        determinant_ratio: ratio,
        condition_number: condition,
        independent: ratio > DETERMINANT_TOLERANCE && condition < CONDITION_CAP,
    })
}

/// `prod_{i<j} (A_j - A_i)`, the determinant of the Vandermonde matrix of `nodes`.
pub fn vandermonde_determinant(nodes: &[Complex64]) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for j in 0..nodes.len() {
        for i in 0..j {
            det *= nodes[j] - nodes[i];
        }
    }
    det
}

/// Relative disagreement between `|det B|` computed numerically and from the
/// Vandermonde product formula.
pub fn vandermonde_cross_check(v1: &[CVec], nodes: &[Complex64]) -> Result<f64> {
    let report = independence_report(v1)?;
    let formula = vandermonde_determinant(nodes).norm();
    let scale = formula.max(report.determinant_magnitude).max(f64::MIN_POSITIVE);
    Ok((report.determinant_magnitude - formula).abs() / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCondition {
    pub first_hop_ok: bool,
    pub second_hop_ok: bool,
    /// Distance of each cross phase from the nearest multiple of pi.
    pub margins: [f64; 2],
}

fn pi_margin(phase: f64) -> f64 {
    let r = phase.rem_euclid(PI);
    r.min(PI - r)
}

/// Linear-independence conditions for asymmetric complex signaling on constant channels.
pub fn phase_condition(f: &Mat2, g: &Mat2) -> Result<PhaseCondition> {
    if f.iter().chain(g.iter()).flatten().any(|z| !(z.norm() > 0.0)) {
        return Err(Error::Degenerate("phase condition needs nonzero coefficients".into()));
    }
    let margins = [pi_margin(cross_phase(f)), pi_margin(cross_phase(g))];
    Ok(PhaseCondition {
        first_hop_ok: margins[0] > PHASE_TOLERANCE,
        second_hop_ok: margins[1] > PHASE_TOLERANCE,
        margins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub distinct: bool,
    pub min_gap: f64,
}

/// Whether `F11^-1 F12 F22^-1 F21` has pairwise distinct eigenvalues.
pub fn mimo_eigen_distinct(f11: &CMat, f12: &CMat, f21: &CMat, f22: &CMat) -> Result<EigenReport> {
    for m in [f11, f22, f12, f21] {
        if m.nrows() != m.ncols() || m.nrows() != f11.nrows() {
            return Err(Error::Parameter("MIMO matrices must be square and of equal size".into()));
        }
        if !(condition_number(m) < CONDITION_CAP) {
            return Err(Error::SingularChannel("MIMO channel matrix is singular".into()));
        }
    }
    let product = inverse(f11)? * f12 * inverse(f22)? * f21;
    let ev = eigenvalues(&product).ok_or_else(|| Error::Degenerate("eigenvalue iteration failed".into()))?;
    let mut min_gap = f64::INFINITY;
    for j in 0..ev.len() {
        for i in 0..j {
            min_gap = min_gap.min((ev[j] - ev[i]).norm());
        }
    }
    Ok(EigenReport { distinct: min_gap > EIGEN_GAP_TOLERANCE, min_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, ChannelRealization, MagnitudeBounds};
    use crate::linalg::{c, diag};

    fn ext(ch: &ChannelRealization, hop: usize) -> [DiagonalExtension; 4] {
        [
            ch.extend(hop, 0, 0).unwrap(),
            ch.extend(hop, 0, 1).unwrap(),
            ch.extend(hop, 1, 0).unwrap(),
            ch.extend(hop, 1, 1).unwrap(),
        ]
    }

    fn tv(seed: u64, m: usize) -> ChannelRealization {
        ChannelRealization::sample(seed, 2, m, ChannelModel::TimeVarying, MagnitudeBounds::default()).unwrap()
    }

    #[test]
    fn single_slot_has_no_constraints() {
        let ch = tv(1, 1);
        let [a, b, cc, d] = ext(&ch, 0);
        let (v1, v2) = first_hop_beamformers(&a, &b, &cc, &d, 1).unwrap();
        assert_eq!(v1, vec![ones(1)]);
        assert!(v2.is_empty());
        let [a, b, cc, d] = ext(&ch, 1);
        let (vr1, vr2) = second_hop_beamformers(&a, &b, &cc, &d, 1).unwrap();
        assert_eq!(vr1, vec![ones(1)]);
        assert!(vr2.is_empty());
    }

    #[test]
    fn two_slot_alignment_holds() {
        let ch = tv(7, 2);
        let [f11, f12, f21, f22] = ext(&ch, 0);
        let (v1, v2) = first_hop_beamformers(&f11, &f12, &f21, &f22, 2).unwrap();
        let lhs = f11.to_matrix() * &v1[1];
        let rhs = f12.to_matrix() * &v2[0];
        assert!(pair_residual(&lhs, &rhs) < 1e-12);
        let lhs = f21.to_matrix() * &v1[0];
        let rhs = f22.to_matrix() * &v2[0];
        assert!(pair_residual(&lhs, &rhs) < 1e-12);

        let [g11, g12, g21, g22] = ext(&ch, 1);
        let (vr1, vr2) = second_hop_beamformers(&g11, &g12, &g21, &g22, 2).unwrap();
        let lhs = g11.to_matrix() * &vr1[1];
        let rhs = -(g12.to_matrix() * &vr2[0]);
        assert!(pair_residual(&lhs, &rhs) < 1e-12);
    }

    /// Alternate the two alignment equations one step at a time.
    fn recursion_oracle(h: &[DiagonalExtension; 4], m: usize, sign: f64) -> (Vec<CVec>, Vec<CVec>) {
        let [h11, h12, h21, h22] = h;
        let mut first = vec![ones(m)];
        let mut second = Vec::new();
        for i in 0..m - 1 {
            let w = CVec::from_iterator(m, (0..m).map(|k| sign * h21.entries()[k] * first[i][k] / h22.entries()[k]));
            let v = CVec::from_iterator(m, (0..m).map(|k| sign * h12.entries()[k] * w[k] / h11.entries()[k]));
            second.push(w);
            first.push(v);
        }
        (first, second)
    }

    #[test]
    fn closed_form_matches_recursion() {
        let ch = tv(11, 5);
        let f = ext(&ch, 0);
        let (v1, v2) = first_hop_beamformers(&f[0], &f[1], &f[2], &f[3], 5).unwrap();
        let (o1, o2) = recursion_oracle(&f, 5, 1.0);
        for (a, b) in v1.iter().zip(&o1).chain(v2.iter().zip(&o2)) {
            assert!(crate::linalg::rel_diff(a, b) < 1e-12);
        }
        let ch = tv(13, 4);
        let g = ext(&ch, 1);
        let (vr1, vr2) = second_hop_beamformers(&g[0], &g[1], &g[2], &g[3], 4).unwrap();
        let (o1, o2) = recursion_oracle(&g, 4, -1.0);
        // The recursion applies the minus sign twice per step, matching A^i on relay 1.
        for (a, b) in vr1.iter().zip(&o1).chain(vr2.iter().zip(&o2)) {
            assert!(crate::linalg::rel_diff(a, b) < 1e-12);
        }
    }

    #[test]
    fn dense_design_agrees_with_diagonal_closed_form() {
        let ch = tv(21, 4);
        let net = LinearNetwork::symbol_extension(&ch).unwrap();
        let set = BeamformerSet::design(&net).unwrap();
        let f = ext(&ch, 0);
        let (v1, v2) = first_hop_beamformers(&f[0], &f[1], &f[2], &f[3], 4).unwrap();
        for (a, b) in set.v1.iter().zip(&v1).chain(set.v2.iter().zip(&v2)) {
            assert!(crate::linalg::rel_diff(a, b) < 1e-12);
        }
        assert!(set.alignment_residuals(&net).iter().all(|r| *r < 1e-12));
    }

    #[test]
    fn zero_diagonal_is_singular() {
        let good = DiagonalExtension::new(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let bad = DiagonalExtension::new(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            first_hop_beamformers(&bad, &good, &good, &good, 2),
            Err(Error::SingularChannel(_))
        ));
    }

    #[test]
    fn independence_examples() {
        let ch = tv(7, 3);
        let net = LinearNetwork::symbol_extension(&ch).unwrap();
        let set = BeamformerSet::design(&net).unwrap();
        assert!(independence_report(&set.v1).unwrap().independent);

        let cst =
            ChannelRealization::sample(7, 2, 2, ChannelModel::ConstantComplex, MagnitudeBounds::default()).unwrap();
        let net = LinearNetwork::symbol_extension(&cst).unwrap();
        let set = BeamformerSet::design(&net).unwrap();
        let rep = independence_report(&set.v1).unwrap();
        assert!(!rep.independent);
        assert!(rep.determinant_ratio < 1e-12);

        let nodes = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let one = DiagonalExtension::new(vec![c(1.0, 0.0); 3]);
        let a = DiagonalExtension::new(nodes.to_vec());
        let (v1, _) = first_hop_beamformers(&one, &a, &one, &one, 3).unwrap();
        let rep = independence_report(&v1).unwrap();
        assert!((rep.determinant_magnitude - 2.0).abs() < 1e-12);
        assert!(vandermonde_cross_check(&v1, &nodes).unwrap() < 1e-12);
    }

    #[test]
    fn phase_condition_examples() {
        let unit = [[c(1.0, 0.0); 2]; 2];
        let pc = phase_condition(&unit, &unit).unwrap();
        assert!(!pc.first_hop_ok && !pc.second_hop_ok);
        assert_eq!(pc.margins, [0.0, 0.0]);

        let mut f = unit;
        f[0][1] = Complex64::from_polar(1.0, PI / 2.0);
        let mut g = unit;
        g[1][0] = Complex64::from_polar(1.0, PI / 3.0);
        let pc = phase_condition(&f, &g).unwrap();
        assert!(pc.first_hop_ok && pc.second_hop_ok);
        assert!((pc.margins[0] - PI / 2.0).abs() < 1e-12);
        assert!((pc.margins[1] - PI / 3.0).abs() < 1e-12);

        let mut z = unit;
        z[1][1] = c(0.0, 0.0);
        assert!(phase_condition(&z, &unit).is_err());
    }

    #[test]
    fn eigen_examples() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.2, 0.0), c(-0.3, 0.1), c(0.8, -0.2)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.4, 0.0), c(1.0, 1.0), c(0.6, -0.5), c(-1.0, 0.0)]);
        let rep = mimo_eigen_distinct(&a, &a, &b, &b).unwrap();
        assert!(!rep.distinct);
        assert!(rep.min_gap < 1e-12);

        let one = diag(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let two = diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let rep = mimo_eigen_distinct(&one, &two, &one, &one).unwrap();
        assert!(rep.distinct);
        assert!((rep.min_gap - 1.0).abs() < 1e-12);

        let singular = CMat::zeros(2, 2);
        assert!(matches!(
            mimo_eigen_distinct(&singular, &two, &one, &one),
            Err(Error::SingularChannel(_))
        ));
    }
}
