//! Empirical measures on `R^n x S` and distributional diagnostics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;

/// Largest sample count accepted by [`wasserstein_p`].
pub const MAX_TRANSPORT_SIZE: usize = 2048;

/// A point `(x, j)` of the hybrid state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSample {
    pub x: Vec<f64>,
    pub j: usize,
}

impl HybridSample {
    pub fn new(x: Vec<f64>, j: usize) -> Self {
        Self { x, j }
    }
}

/// Uniformly weighted, nonempty sample cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    samples: Vec<HybridSample>,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<HybridSample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("empirical measure needs at least one sample".into()));
        };
        let n = first.x.len();
        for s in &samples {
            if s.x.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "sample point",
                    expected: n,
                    got: s.x.len(),
                });
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteOutput { what: "sample" });
            }
        }
        Ok(Self { samples })
    }

    /// Scalar samples, all in one regime.
    pub fn from_scalars(values: &[f64], j: usize) -> Result<Self> {
        Self::new(values.iter().map(|&v| HybridSample::new(vec![v], j)).collect())
    }

    pub fn samples(&self) -> &[HybridSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.x[c]).collect()
    }

    /// Measure built from the samples at `indices` (with repetition).
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::BadExponent(p))
    }
}

fn dp_unchecked(a: &HybridSample, b: &HybridSample, p: f64) -> f64 {
    let d2: f64 = a.x.iter().zip(&b.x).map(|(u, v)| (u - v) * (u - v)).sum();
    let spatial = if p == 1.0 { d2.sqrt() } else { d2.powf(0.5 * p) };
    spatial + if a.j != b.j { 1.0 } else { 0.0 }
}

/// `d_p((u,j),(v,l)) = |u - v|^p + 1{j != l}` for `p` in `(0, 1]`.
pub fn dp_distance(a: &HybridSample, b: &HybridSample, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if a.x.len() != b.x.len() {
        return Err(Error::DimensionMismatch {
            what: "sample point",
            expected: a.x.len(),
            got: b.x.len(),
        });
    }
    Ok(dp_unchecked(a, b, p))
}

/// Minimum-cost perfect matching on a square row-major cost matrix
/// (Hungarian method with potentials, O(n^3)). Returns `assignment[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            let crow = &cost[(r0 - 1) * n..r0 * n];
            for col in 1..=n {
                if !used[col] {
                    let cur = crow[col - 1] - u[r0] - v[col];
                    if cur < minv[col] {
                        minv[col] = cur;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// Row-major `R x R` matrix of `d_p` costs between two measures.
pub fn cost_matrix(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            what: "measure dimension",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let n = b.len();
    let rows: Vec<Vec<f64>> = a
        .samples
        .par_iter()
        .map(|sa| b.samples.iter().map(|sb| dp_unchecked(sa, sb, p)).collect())
        .collect();
    let mut out = Vec::with_capacity(a.len() * n);
    for r in rows {
        out.extend(r);
    }
    Ok(out)
}

/// Exact `W_p` between two uniform empirical measures of equal size.
///
/// Extreme couplings of two uniform measures with `R` atoms each are
/// permutations, so the optimum is a linear assignment on the cost matrix.
pub fn wasserstein_p(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() > MAX_TRANSPORT_SIZE {
        return Err(Error::TooLarge {
            size: a.len(),
            max: MAX_TRANSPORT_SIZE,
        });
    }
    let n = a.len();
    let cost = cost_matrix(a, b, p)?;
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * n + c])
        .sum();
    Ok(total / n as f64)
}

/// Right-continuous empirical CDF: `F(x) = #{samples <= x} / R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Distinct sample values, ascending.
    pub values: Vec<f64>,
    /// `F` at each value; the last entry is 1.
    pub cumulative: Vec<f64>,
}

impl Ecdf {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("ECDF of an empty sample".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let total = sorted.len() as f64;
        let mut xs = Vec::new();
        let mut cum = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if xs.last() == Some(&v) {
                *cum.last_mut().unwrap() = (i + 1) as f64 / total;
            } else {
                xs.push(v);
                cum.push((i + 1) as f64 / total);
            }
        }
        Ok(Self {
            values: xs,
            cumulative: cum,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }
}

pub fn ecdf(measure: &EmpiricalMeasure, coordinate: usize) -> Result<Ecdf> {
    if coordinate >= measure.dim() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coordinate} out of range for dimension {}",
            measure.dim()
        )));
    }
    Ecdf::from_values(&measure.coordinate(coordinate))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d_stat: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k>=1} (-1)^{k-1} exp(-2 k^2 λ^2)`.
///
/// For `λ < 1` the alternating series converges slowly; the equivalent
/// theta-function form `1 - sqrt(2π)/λ Σ exp(-(2k-1)^2 π^2 / (8 λ^2))` is
/// used there instead.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-16 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=1000 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Two-sample KS statistic on one coordinate with its asymptotic p-value.
pub fn ks_two_sample(a: &EmpiricalMeasure, b: &EmpiricalMeasure, coordinate: usize) -> Result<KsResult> {
    for m in [a, b] {
        if coordinate >= m.dim() {
            return Err(Error::InvalidArgument(format!(
                "coordinate {coordinate} out of range for dimension {}",
                m.dim()
            )));
        }
    }
    Ok(ks_values(&a.coordinate(coordinate), &b.coordinate(coordinate)))
}

/// KS test on raw scalar samples; both must be nonempty.
pub fn ks_values(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS samples must be nonempty");
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
    KsResult {
        d_stat: d,
        p_value: kolmogorov_q(en * d),
    }
}

/// Sample mean of `|x|^p`.
pub fn p_moment(measure: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("moment exponent must be positive, got {p}")));
    }
    let sum: f64 = measure
        .samples
        .iter()
        .map(|s| s.x.iter().map(|v| v * v).sum::<f64>().powf(0.5 * p))
        .sum();
    Ok(sum / measure.len() as f64)
}

/// Least-squares slope of `ln(series[k])` against `k * delta`.
pub fn decay_rate_fit(series: &[f64], delta: f64) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument("decay fit needs at least 3 points".into()));
    }
    if let Some((index, &value)) = series.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveEntry { index, value });
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 * delta, v.ln()))
        .collect();
    Ok(least_squares_slope(&points))
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("log-log fit needs matching series of length >= 2".into()));
    }
    if let Some((index, &value)) = xs.iter().chain(ys).enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveEntry { index, value });
    }
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    Ok(least_squares_slope(&pts))
}

/// `count` bootstrap index sets of size `n`, each from its own stream.
pub fn bootstrap_indices(n: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..count as u64)
        .map(|b| {
            let mut rng = StreamId::new(seed, b).rng();
            (0..n).map(|_| rng.random_range(0..n)).collect()
        })
        .collect()
}

/// Column-wise mean of equal-length rows.
pub fn mean_series(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.len()];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64, j: usize) -> HybridSample {
        HybridSample::new(vec![x], j)
    }

    #[test]
    fn dp_examples() {
        assert_eq!(dp_distance(&s(1.0, 0), &s(1.0, 0), 0.5).unwrap(), 0.0);
        assert_eq!(dp_distance(&s(0.0, 0), &s(0.0, 1), 0.5).unwrap(), 1.0);
        assert_eq!(dp_distance(&s(0.0, 0), &s(4.0, 0), 0.5).unwrap(), 2.0);
        assert!(matches!(dp_distance(&s(0.0, 0), &s(4.0, 0), 1.5), Err(Error::BadExponent(_))));
        assert!(matches!(dp_distance(&s(0.0, 0), &s(4.0, 0), 0.0), Err(Error::BadExponent(_))));
    }

    #[test]
    fn wasserstein_examples() {
        let a = EmpiricalMeasure::from_scalars(&[0.0, 2.0], 0).unwrap();
        let b = EmpiricalMeasure::from_scalars(&[1.0, 3.0], 0).unwrap();
        assert_eq!(wasserstein_p(&a, &b, 1.0).unwrap(), 1.0);
        assert_eq!(wasserstein_p(&a, &a, 0.3).unwrap(), 0.0);
        let x = EmpiricalMeasure::from_scalars(&[0.0], 0).unwrap();
        let y = EmpiricalMeasure::from_scalars(&[0.0], 1).unwrap();
        assert_eq!(wasserstein_p(&x, &y, 0.5).unwrap(), 1.0);
        assert!(matches!(wasserstein_p(&a, &x, 1.0), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn wasserstein_rejects_oversized_input() {
        let v = vec![0.0; MAX_TRANSPORT_SIZE + 1];
        let a = EmpiricalMeasure::from_scalars(&v, 0).unwrap();
        assert!(matches!(wasserstein_p(&a, &a, 1.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn ecdf_examples() {
        let e = Ecdf::from_values(&[5.0]).unwrap();
        assert_eq!((e.eval(4.999), e.eval(5.0)), (0.0, 1.0));
        let e = Ecdf::from_values(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.cumulative, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let e = Ecdf::from_values(&[1.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.cumulative, vec![0.5, 1.0]);
    }

    #[test]
    fn ks_examples() {
        let a = EmpiricalMeasure::from_scalars(&[0.3, 1.2, -4.0], 0).unwrap();
        let r = ks_two_sample(&a, &a, 0).unwrap();
        assert_eq!((r.d_stat, r.p_value), (0.0, 1.0));
        let r = ks_values(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(r.d_stat, 1.0);
    }

    #[test]
    fn kolmogorov_branches_agree_at_the_switch() {
        // Both forms evaluated at λ = 1 from either side.
        let below = kolmogorov_q(1.0 - 1e-12);
        let above = kolmogorov_q(1.0);
        assert!((below - above).abs() < 1e-10, "{below} vs {above}");
        // Known value: Q(1.0) = 0.26999967...
        assert!((above - 0.2699996716735).abs() < 1e-9);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-20);
    }

    #[test]
    fn moment_examples() {
        let zeros = EmpiricalMeasure::from_scalars(&[0.0, 0.0], 0).unwrap();
        assert_eq!(p_moment(&zeros, 0.5).unwrap(), 0.0);
        let m = EmpiricalMeasure::from_scalars(&[1.0, 2.0], 0).unwrap();
        assert_eq!(p_moment(&m, 2.0).unwrap(), 2.5);
    }

    #[test]
    fn decay_fit_examples() {
        let delta = 0.01;
        let series: Vec<f64> = (0..200).map(|k| (-(k as f64) * delta).exp()).collect();
        assert!((decay_rate_fit(&series, delta).unwrap() + 1.0).abs() < 1e-10);
        assert_eq!(decay_rate_fit(&[2.0; 10], delta).unwrap(), 0.0);
        assert!(matches!(
            decay_rate_fit(&[1.0, 0.0, 1.0], delta),
            Err(Error::NonPositiveEntry { index: 1, .. })
        ));
    }
}
