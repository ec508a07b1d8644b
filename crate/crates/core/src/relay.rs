//! Relay-side processing.
//!
//! Linear relays invert the effective receive matrix to isolate one symbol
//! sum per dimension, then re-beamform those sums. Relays of the integer
//! (rational-dimension) scheme instead pick the nearest point of the received
//! scalar constellation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{checked_inverse, columns, CMat, CVec};

/// Largest number of candidates a hard decision may enumerate.
pub const ENUMERATION_CAP: u64 = 100_000;

/// Precomputed zero-forcing separator for a fixed set of effective columns.
#[derive(Debug, Clone)]
pub struct Isolator {
    matrix: CMat,
    inverse: CMat,
    noise_gain: Vec<f64>,
    condition: f64,
}

impl Isolator {
    /// Rows and columns are equilibrated before inverting; the reported
    /// condition number is that of the equilibrated matrix.
    pub fn new(effective_columns: &[CVec]) -> Result<Self> {
        let n = effective_columns.len();
        if n == 0 || effective_columns.iter().any(|c| c.len() != n) {
            return Err(Error::Parameter(format!("need {n} columns of length {n}")));
        }
        let col_scale: Vec<f64> = effective_columns.iter().map(|c| 1.0 / c.norm()).collect();
        if col_scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::Conditioning { condition: f64::INFINITY });
        }
        let matrix = columns(effective_columns);
        let mut scaled = matrix.clone();
        for (j, s) in col_scale.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        let row_scale: Vec<f64> = scaled.row_iter().map(|r| 1.0 / r.norm()).collect();
        if row_scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::Conditioning { condition: f64::INFINITY });
        }
        for (i, s) in row_scale.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*s);
        }
        let (mut inverse, condition) = checked_inverse(&scaled)?;
        for (i, s) in col_scale.iter().enumerate() {
            inverse.row_mut(i).scale_mut(*s);
        }
        for (j, s) in row_scale.iter().enumerate() {
            inverse.column_mut(j).scale_mut(*s);
        }
        let noise_gain = inverse.row_iter().map(|r| r.norm()).collect();
        Ok(Self { matrix, inverse, noise_gain, condition })
    }

    /// Two rounds of iterative refinement follow the initial solve.
    pub fn apply(&self, received: &CVec) -> CVec {
        let mut x = &self.inverse * received;
        for _ in 0..2 {
            let r = residual(&self.matrix, &x, received);
            x += &self.inverse * r;
        }
        x
    }

    pub fn inverse(&self) -> &CMat {
        &self.inverse
    }

    /// Euclidean norm of each row of the inverse.
    pub fn noise_gain(&self) -> &[f64] {
        &self.noise_gain
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// `y - M x` with each entry accumulated in compensated (twice working precision) arithmetic.
fn residual(m: &CMat, x: &CVec, y: &CVec) -> CVec {
    CVec::from_iterator(
        y.len(),
        (0..y.len()).map(|i| {
            let mut re = CompensatedSum::new(y[i].re);
            let mut im = CompensatedSum::new(y[i].im);
            for j in 0..x.len() {
                let (a, b) = (m[(i, j)], x[j]);
                re.add_product(-a.re, b.re);
                re.add_product(a.im, b.im);
                im.add_product(-a.re, b.im);
                im.add_product(-a.im, b.re);
            }
            Complex64::new(re.value(), im.value())
        }),
    )
}

struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn new(start: f64) -> Self {
        Self { sum: start, err: 0.0 }
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let t = self.sum + p;
        let z = t - self.sum;
        self.err += (self.sum - (t - z)) + (p - z) + p_err;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

/// Separate `received` into its coordinates along `effective_columns`.
pub fn isolate(received: &CVec, effective_columns: &[CVec]) -> Result<(CVec, Vec<f64>)> {
    if received.len() != effective_columns.len() {
        return Err(Error::Parameter(format!(
            "received vector has {} entries for {} columns",
            received.len(),
            effective_columns.len()
        )));
    }
    let iso = Isolator::new(effective_columns)?;
    Ok((iso.apply(received), iso.noise_gain))
}

/// Per-slot average power `tr(V C V^H) / M` of `sum_k v_k x_k` when `x` has covariance `C`.
pub fn expected_power(relay_vectors: &[CVec], covariance: &CMat) -> f64 {
    if relay_vectors.is_empty() {
        return 0.0;
    }
    let v = columns(relay_vectors);
    let m = v.nrows() as f64;
    (&v * covariance * v.adjoint()).trace().re / m
}

/// Scale that brings the expected per-slot transmit power to `power`.
pub fn power_scale(relay_vectors: &[CVec], covariance: &CMat, power: f64) -> Result<f64> {
    if covariance.nrows() != relay_vectors.len() || covariance.ncols() != relay_vectors.len() {
        return Err(Error::Parameter("covariance size does not match the relay vectors".into()));
    }
    let raw = expected_power(relay_vectors, covariance);
    if !(raw > 0.0) {
        return Err(Error::Degenerate("relay would forward zero power".into()));
    }
    Ok((power / raw).sqrt())
}

/// `power_scale * sum_k v_k x_k` with the scale from [`power_scale`].
pub fn forward_linear(isolated: &CVec, relay_vectors: &[CVec], covariance: &CMat, power: f64) -> Result<(CVec, f64)> {
    if isolated.len() != relay_vectors.len() {
        return Err(Error::Parameter(format!(
            "{} isolated values for {} relay vectors",
            isolated.len(),
            relay_vectors.len()
        )));
    }
    let scale = power_scale(relay_vectors, covariance, power)?;
    Ok((combine(isolated, relay_vectors, scale), scale))
}

/// `scale * sum_k v_k x_k`.
pub fn combine(values: &CVec, vectors: &[CVec], scale: f64) -> CVec {
    let n = vectors.first().map_or(0, |v| v.len());
    let mut out = CVec::zeros(n);
    for (x, v) in values.iter().zip(vectors) {
        out.axpy(*x * scale, v, Complex64::new(1.0, 0.0));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayReport {
    pub isolated: Vec<Complex64>,
    pub forwarded: Vec<Complex64>,
    pub noise_gain: Vec<f64>,
    pub power_scale: f64,
}

/// Number of candidates [`hard_decide_box`] enumerates: every coordinate but the
/// widest is enumerated, the widest one is solved by rounding.
pub fn enumeration_size(bounds: &[i64]) -> u128 {
    let pivot = widest(bounds);
    bounds
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != pivot)
        .map(|(_, b)| (2 * *b as u128) + 1)
        .product()
}

fn widest(bounds: &[i64]) -> Option<usize> {
    bounds.iter().enumerate().max_by_key(|(k, b)| (**b, std::cmp::Reverse(*k))).map(|(k, _)| k)
}

/// Nearest point of `{sum_k d_k c_k : c integer, |c_k| <= symbol_bound}` to `received`.
pub fn hard_decide(received: f64, scaled_directions: &[f64], symbol_bound: i64) -> Result<Vec<i64>> {
    hard_decide_box(received, scaled_directions, &vec![symbol_bound; scaled_directions.len()])
}

/// Exact minimum-distance decision over the box `|c_k| <= bounds[k]`.
///
/// For fixed values of all other coordinates the distance is convex in the
/// widest coordinate, so its best value is the clamped rounding; enumerating
/// the rest covers the whole box.
pub fn hard_decide_box(received: f64, directions: &[f64], bounds: &[i64]) -> Result<Vec<i64>> {
    if directions.len() != bounds.len() || directions.is_empty() {
        return Err(Error::Parameter("directions and bounds must be nonempty and of equal length".into()));
    }
    if bounds.iter().any(|b| *b < 0) {
        return Err(Error::Parameter("symbol bounds must be nonnegative".into()));
    }
    let points = enumeration_size(bounds);
    if points > ENUMERATION_CAP as u128 {
        return Err(Error::Capacity { points, cap: ENUMERATION_CAP });
    }
    let pivot = widest(bounds).expect("nonempty");
    let dp = directions[pivot];
    let bp = bounds[pivot];
    let others: Vec<usize> = (0..directions.len()).filter(|k| *k != pivot).collect();
    let mut current: Vec<i64> = others.iter().map(|k| -bounds[*k]).collect();
    let mut best = (f64::INFINITY, vec![0i64; directions.len()]);
    loop {
        let partial: f64 = others.iter().zip(&current).map(|(k, c)| directions[*k] * *c as f64).sum();
        let rest = received - partial;
        let cp = if dp != 0.0 { ((rest / dp).round() as i64).clamp(-bp, bp) } else { 0 };
        let dist = (rest - dp * cp as f64).abs();
        if dist < best.0 {
            best.0 = dist;
            for (k, c) in others.iter().zip(&current) {
                best.1[*k] = *c;
            }
            best.1[pivot] = cp;
        }
        // odometer over the non-pivot coordinates
        let mut j = 0;
        loop {
            if j == current.len() {
                return Ok(best.1);
            }
            let b = bounds[others[j]];
            if current[j] < b {
                current[j] += 1;
                break;
            }
            current[j] = -b;
            j += 1;
        }
    }
}

/// Smallest `|sum_k d_k c_k|` over nonzero integer `c` with `|c_k| <= 2 bounds[k]`,
/// i.e. the minimum distance between two distinct points of the constellation.
pub fn min_distance(directions: &[f64], bounds: &[i64]) -> Result<f64> {
    let doubled: Vec<i64> = bounds.iter().map(|b| 2 * b).collect();
    let points = enumeration_size(&doubled);
    if points > ENUMERATION_CAP as u128 {
        return Err(Error::Capacity { points, cap: ENUMERATION_CAP });
    }
    let pivot = widest(&doubled).expect("nonempty");
    let dp = directions[pivot];
    let bp = doubled[pivot];
    let others: Vec<usize> = (0..directions.len()).filter(|k| *k != pivot).collect();
    let mut current: Vec<i64> = others.iter().map(|k| -doubled[*k]).collect();
    let mut best = f64::INFINITY;
    loop {
        let partial: f64 = others.iter().zip(&current).map(|(k, c)| directions[*k] * *c as f64).sum();
        let all_zero = current.iter().all(|c| *c == 0);
        let target = if dp != 0.0 { (-partial / dp).round() as i64 } else { 0 };
        for cp in [target - 1, target, target + 1] {
            let cp = cp.clamp(-bp, bp);
            if all_zero && cp == 0 {
                continue;
            }
            best = best.min((partial + dp * cp as f64).abs());
        }
        let mut j = 0;
        loop {
            if j == current.len() {
                return Ok(best);
            }
            let b = doubled[others[j]];
            if current[j] < b {
                current[j] += 1;
                break;
            }
            current[j] = -b;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::rng::{complex_gaussian, seeded};
    use rand::Rng;

    #[test]
    fn identity_isolation_passes_through() {
        let cols = vec![CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])];
        let y = CVec::from_vec(vec![c(3.0, 1.0), c(2.0, 0.0)]);
        let (x, gain) = isolate(&y, &cols).unwrap();
        assert_eq!(x, y);
        assert_eq!(gain, vec![1.0, 1.0]);
    }

    #[test]
    fn isolation_inverts_forward_multiply() {
        let mut rng = seeded(4);
        let cols: Vec<CVec> =
            (0..4).map(|_| CVec::from_iterator(4, (0..4).map(|_| complex_gaussian(&mut rng, 1.0)))).collect();
        let x = CVec::from_iterator(4, (0..4).map(|_| complex_gaussian(&mut rng, 1.0)));
        let y = columns(&cols) * &x;
        let (got, _) = isolate(&y, &cols).unwrap();
        assert!((got - x).norm() < 1e-10);
    }

    #[test]
    fn collinear_columns_are_refused() {
        let v = CVec::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let err = isolate(&v, &[v.clone(), v.clone() * c(2.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }));
    }

    #[test]
    fn power_scale_examples() {
        let v = vec![CVec::from_vec(vec![c(1.0, 0.0)])];
        let cov = CMat::from_element(1, 1, c(1.0, 0.0));
        let (fwd, scale) = forward_linear(&CVec::from_vec(vec![c(1.0, 0.0)]), &v, &cov, 4.0).unwrap();
        assert!((scale - 2.0).abs() < 1e-15);
        assert!((fwd[0] - c(2.0, 0.0)).norm() < 1e-15);

        // orthogonal vectors, noise-free symbols of power p
        let vs = vec![
            CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            CVec::from_vec(vec![c(0.0, 0.0), c(0.0, 3.0), c(0.0, 0.0)]),
        ];
        let p = 0.7;
        let cov = CMat::identity(2, 2) * c(p, 0.0);
        let scale = power_scale(&vs, &cov, 10.0).unwrap();
        let expect = (10.0 / ((4.0 + 9.0) * p / 3.0)).sqrt();
        assert!((scale - expect).abs() < 1e-12);

        assert!(matches!(power_scale(&vs, &CMat::zeros(2, 2), 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hard_decision_examples() {
        let d = [1.0, 2f64.sqrt()];
        let y = 3.0 + 2.0 * 2f64.sqrt() + 0.001;
        assert_eq!(hard_decide(y, &d, 5).unwrap(), vec![3, 2]);
        let mut rng = seeded(9);
        for _ in 0..200 {
            let c: Vec<i64> = (0..3).map(|_| rng.random_range(-4..=4)).collect();
            let dirs = [1.0, 0.618_033_988_7, 0.377_964_473];
            let y: f64 = dirs.iter().zip(&c).map(|(a, b)| a * *b as f64).sum();
            assert_eq!(hard_decide(y, &dirs, 4).unwrap(), c);
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let dirs = [1.0, 1.1, 1.2, 1.3];
        let err = hard_decide(0.0, &dirs, 40).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert_eq!(enumeration_size(&[40, 40, 40, 40]), 81u128.pow(3));
    }

    /// Exhaustive minimum over the full box, no pruning.
    fn brute(received: f64, dirs: &[f64], bounds: &[i64]) -> (f64, Vec<i64>) {
        let mut best = (f64::INFINITY, vec![]);
        let mut cur: Vec<i64> = bounds.iter().map(|b| -b).collect();
        loop {
            let d = (received - dirs.iter().zip(&cur).map(|(a, c)| a * *c as f64).sum::<f64>()).abs();
            if d < best.0 {
                best = (d, cur.clone());
            }
            let mut j = 0;
            loop {
                if j == cur.len() {
                    return best;
                }
                if cur[j] < bounds[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = -bounds[j];
                j += 1;
            }
        }
    }

    #[test]
    fn hard_decision_is_maximum_likelihood() {
        // Gaussian likelihood is monotone in distance, so ML = exhaustive nearest point.
        let mut rng = seeded(12);
        for _ in 0..100 {
            let n = rng.random_range(1..=3);
            let dirs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bounds: Vec<i64> = (0..n).map(|_| rng.random_range(0..=4)).collect();
            let y = rng.random_range(-10.0..10.0);
            let got = hard_decide_box(y, &dirs, &bounds).unwrap();
            let (best, _) = brute(y, &dirs, &bounds);
            let got_d = (y - dirs.iter().zip(&got).map(|(a, c)| a * *c as f64).sum::<f64>()).abs();
            assert!((got_d - best).abs() < 1e-12, "{got_d} vs {best}");
            assert!(got.iter().zip(&bounds).all(|(c, b)| c.abs() <= *b));
        }
    }

    #[test]
    fn min_distance_matches_brute_force() {
        let mut rng = seeded(13);
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let dirs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
            let bounds: Vec<i64> = (0..n).map(|_| rng.random_range(1..=3)).collect();
            let doubled: Vec<i64> = bounds.iter().map(|b| 2 * b).collect();
            let mut best = f64::INFINITY;
            let mut cur: Vec<i64> = doubled.iter().map(|b| -b).collect();
            'outer: loop {
                if cur.iter().any(|c| *c != 0) {
                    best = best.min(dirs.iter().zip(&cur).map(|(a, c)| a * *c as f64).sum::<f64>().abs());
                }
                let mut j = 0;
                loop {
                    if j == cur.len() {
                        break 'outer;
                    }
                    if cur[j] < doubled[j] {
                        cur[j] += 1;
                        break;
                    }
                    cur[j] = -doubled[j];
                    j += 1;
                }
            }
            let got = min_distance(&dirs, &bounds).unwrap();
            assert!((got - best).abs() < 1e-12, "{got} vs {best}");
        }
    }
}
