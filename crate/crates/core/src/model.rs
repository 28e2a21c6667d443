//! Regime-indexed drift and diffusion coefficients.
//!
//! A model is a [`Coefficients`] implementation together with the structural
//! constants its author declares for it (one-sided Lipschitz constants of the
//! drift, diffusion structure constants). The constants are not derived here;
//! [`estimate_alpha`] and [`estimate_h_pair`] audit them on random probes.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;

/// Drift `f(x, j)` and diffusion `g(x, j)` of a hybrid SDE.
///
/// Implementations must be pure. `diffusion` writes an `n x m` matrix in
/// row-major order: entry `(i, k)` multiplies `dB_k` in component `i`.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn regimes(&self) -> usize;
    fn drift(&self, x: &[f64], j: usize, out: &mut [f64]);
    fn diffusion(&self, x: &[f64], j: usize, out: &mut [f64]);

    /// Writes the `n x n` drift Jacobian (row-major) and returns `true`, or
    /// returns `false` when no analytic Jacobian is available.
    fn drift_jacobian(&self, _x: &[f64], _j: usize, _out: &mut [f64]) -> bool {
        false
    }
}

/// Declared constants: `alpha_j` (one-sided Lipschitz constant of the drift
/// in regime j), `h_vec[j]` (diffusion structure constant) and the global
/// diffusion Lipschitz constant `h > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionConstants {
    pub alpha: Vec<f64>,
    pub h_vec: Vec<f64>,
    pub h: f64,
}

impl ConditionConstants {
    pub fn new(alpha: Vec<f64>, h_vec: Vec<f64>, h: f64) -> Result<Self> {
        let c = Self { alpha, h_vec, h };
        c.validate(c.alpha.len())?;
        Ok(c)
    }

    pub fn validate(&self, regimes: usize) -> Result<()> {
        if self.alpha.len() != regimes {
            return Err(Error::DimensionMismatch {
                what: "alpha",
                expected: regimes,
                got: self.alpha.len(),
            });
        }
        if self.h_vec.len() != regimes {
            return Err(Error::DimensionMismatch {
                what: "h_vec",
                expected: regimes,
                got: self.h_vec.len(),
            });
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("h must be positive, got {}", self.h)));
        }
        if self.alpha.iter().chain(&self.h_vec).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("condition constants must be finite".into()));
        }
        Ok(())
    }

    pub fn max_abs_alpha(&self) -> f64 {
        self.alpha.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// A hybrid SDE model: coefficients plus declared constants.
#[derive(Clone)]
pub struct HybridModel {
    name: String,
    coeffs: Arc<dyn Coefficients>,
    declared: ConditionConstants,
}

impl fmt::Debug for HybridModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridModel")
            .field("name", &self.name)
            .field("coeffs", &self.coeffs)
            .field("declared", &self.declared)
            .finish()
    }
}

impl HybridModel {
    pub fn new(
        name: impl Into<String>,
        coeffs: Arc<dyn Coefficients>,
        declared: ConditionConstants,
    ) -> Result<Self> {
        declared.validate(coeffs.regimes())?;
        if coeffs.dim() == 0 || coeffs.noise_dim() == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            coeffs,
            declared,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.coeffs.noise_dim()
    }

    pub fn regimes(&self) -> usize {
        self.coeffs.regimes()
    }

    pub fn declared(&self) -> &ConditionConstants {
        &self.declared
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coeffs.as_ref()
    }

    /// Replaces the declared constants, keeping the coefficients.
    pub fn with_declared(&self, declared: ConditionConstants) -> Result<Self> {
        Self::new(self.name.clone(), self.coeffs.clone(), declared)
    }

    fn check_regime(&self, j: usize) -> Result<()> {
        if j >= self.regimes() {
            return Err(Error::InvalidState {
                state: j,
                count: self.regimes(),
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "state point",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_drift(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        self.check_regime(j)?;
        self.check_point(x)?;
        let mut out = vec![0.0; self.dim()];
        self.coeffs.drift(x, j, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { what: "drift" });
        }
        Ok(out)
    }

    /// Row-major `n x m` diffusion matrix.
    pub fn eval_diffusion(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        self.check_regime(j)?;
        self.check_point(x)?;
        let mut out = vec![0.0; self.dim() * self.noise_dim()];
        self.coeffs.diffusion(x, j, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { what: "diffusion" });
        }
        Ok(out)
    }

    pub fn eval_drift_jacobian(&self, x: &[f64], j: usize) -> Result<Option<Vec<f64>>> {
        self.check_regime(j)?;
        self.check_point(x)?;
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        if self.coeffs.drift_jacobian(x, j, &mut out) {
            Ok(Some(out))
        } else {
            Ok(None)
        }
    }
}

/// Coefficients of the scalar hybrid cubic (Ginzburg-Landau type) SDE
/// `dY = (b(r) Y + a(r) Y^3) dt + rho(r) Y dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinzburgLandauCoefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub rho: Vec<f64>,
}

impl GinzburgLandauCoefficients {
    pub fn new(b: Vec<f64>, a: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::InvalidArgument("at least one regime is required".into()));
        }
        for (what, v) in [("a", &a), ("rho", &rho)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if let Some(j) = a.iter().position(|&aj| aj > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cubic coefficient a[{j}] = {} must be <= 0",
                a[j]
            )));
        }
        Ok(Self { b, a, rho })
    }

    pub fn regimes(&self) -> usize {
        self.b.len()
    }

    /// Constants that hold for this family whenever `a_j <= 0`:
    /// `alpha_j = b_j`, `h_j = -rho_j^2`, `h = max rho_j^2`.
    pub fn natural_constants(&self) -> ConditionConstants {
        let h = self.rho.iter().fold(0.0f64, |m, r| m.max(r * r));
        ConditionConstants {
            alpha: self.b.clone(),
            h_vec: self.rho.iter().map(|r| -r * r).collect(),
            // h must stay positive even for a noiseless model
            h: if h > 0.0 { h } else { f64::MIN_POSITIVE },
        }
    }
}

impl Coefficients for GinzburgLandauCoefficients {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn regimes(&self) -> usize {
        self.b.len()
    }
    fn drift(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let y = x[0];
        out[0] = self.b[j] * y + self.a[j] * y * y * y;
    }
    fn diffusion(&self, x: &[f64], j: usize, out: &mut [f64]) {
        out[0] = self.rho[j] * x[0];
    }
    fn drift_jacobian(&self, x: &[f64], j: usize, out: &mut [f64]) -> bool {
        out[0] = self.b[j] + 3.0 * self.a[j] * x[0] * x[0];
        true
    }
}

/// Two-dimensional system switching between a cubic gradient-like regime
/// with additive noise and a radially damped regime with affine
/// multiplicative noise, driven by a 2-D Brownian motion.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanarSwitching;

impl PlanarSwitching {
    pub fn declared() -> ConditionConstants {
        ConditionConstants {
            alpha: vec![2.0, 1.0],
            h_vec: vec![0.0, -3.0],
            h: 7.0,
        }
    }
}

impl Coefficients for PlanarSwitching {
    fn dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn regimes(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let (y1, y2) = (x[0], x[1]);
        if j == 0 {
            out[0] = 2.0 * y1 - y1 * y1 * y1 - y1 * y2 * y2;
            out[1] = 1.0 + y2 - y2 * y2 * y2 - y2 * y1 * y1;
        } else {
            let r = y1.hypot(y2);
            out[0] = y1 - 2.0 * y1 * r + 1.0;
            out[1] = 0.5 * y2 - 2.0 * y2 * r + 2.0;
        }
    }
    fn diffusion(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let (y1, y2) = (x[0], x[1]);
        if j == 0 {
            out.copy_from_slice(&[-3.0, 1.0, 4.0, 0.0]);
        } else {
            out[0] = 2.0 * y1 - y2 + 2.0;
            out[1] = y1 - y2;
            out[2] = y1 + 2.0 * y2;
            out[3] = y1 + y2 - 4.0;
        }
    }
    fn drift_jacobian(&self, x: &[f64], j: usize, out: &mut [f64]) -> bool {
        let (y1, y2) = (x[0], x[1]);
        if j == 0 {
            out[0] = 2.0 - 3.0 * y1 * y1 - y2 * y2;
            out[1] = -2.0 * y1 * y2;
            out[2] = -2.0 * y1 * y2;
            out[3] = 1.0 - 3.0 * y2 * y2 - y1 * y1;
        } else {
            let r = y1.hypot(y2);
            // d(y r)/dy = r + y^2 / r, which tends to 0 at the origin
            let (s11, s12, s22) = if r > 0.0 {
                (y1 * y1 / r, y1 * y2 / r, y2 * y2 / r)
            } else {
                (0.0, 0.0, 0.0)
            };
            out[0] = 1.0 - 2.0 * r - 2.0 * s11;
            out[1] = -2.0 * s12;
            out[2] = -2.0 * s12;
            out[3] = 0.5 - 2.0 * r - 2.0 * s22;
        }
        true
    }
}

type DriftFn = dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync;

/// Closure-backed coefficients, the programmatic extension point.
pub struct FnCoefficients {
    dim: usize,
    noise_dim: usize,
    regimes: usize,
    drift: Box<DriftFn>,
    diffusion: Box<DriftFn>,
    jacobian: Option<Box<DriftFn>>,
}

impl fmt::Debug for FnCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCoefficients")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("regimes", &self.regimes)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl FnCoefficients {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        regimes: usize,
        drift: impl Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            noise_dim,
            regimes,
            drift: Box::new(drift),
            diffusion: Box::new(diffusion),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }
}

impl Coefficients for FnCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn regimes(&self) -> usize {
        self.regimes
    }
    fn drift(&self, x: &[f64], j: usize, out: &mut [f64]) {
        (self.drift)(x, j, out)
    }
    fn diffusion(&self, x: &[f64], j: usize, out: &mut [f64]) {
        (self.diffusion)(x, j, out)
    }
    fn drift_jacobian(&self, x: &[f64], j: usize, out: &mut [f64]) -> bool {
        match &self.jacobian {
            Some(jac) => {
                jac(x, j, out);
                true
            }
            None => false,
        }
    }
}

pub fn planar_switching() -> HybridModel {
    HybridModel::new("planar-switching", Arc::new(PlanarSwitching), PlanarSwitching::declared())
        .expect("built-in constants are valid")
}

pub fn ginzburg_landau(coeffs: GinzburgLandauCoefficients) -> HybridModel {
    let declared = coeffs.natural_constants();
    HybridModel::new("ginzburg-landau", Arc::new(coeffs), declared)
        .expect("natural constants match the regime count")
}

/// Uniform probe pairs on the box `[lo, hi]^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeBox {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl ProbeBox {
    pub const DEFAULT_COUNT: usize = 10_000;

    pub fn new(lo: f64, hi: f64, seed: u64) -> Self {
        Self { lo, hi, seed }
    }

    fn pairs(&self, n: usize, count: usize) -> impl Iterator<Item = (Vec<f64>, Vec<f64>)> {
        let mut rng = StreamId::new(self.seed, 0).rng();
        let (lo, hi) = (self.lo, self.hi);
        (0..count).map(move |_| {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            (u, v)
        })
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Largest observed `(u - v)^T (f(u,j) - f(v,j)) / |u - v|^2` over probe pairs.
pub fn estimate_alpha(model: &HybridModel, j: usize, probes: &ProbeBox, count: usize) -> Result<f64> {
    model.check_regime(j)?;
    let n = model.dim();
    let (mut fu, mut fv) = (vec![0.0; n], vec![0.0; n]);
    let mut sup = f64::NEG_INFINITY;
    for (u, v) in probes.pairs(n, count) {
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d2 = sq_norm(&d);
        if d2 == 0.0 {
            continue;
        }
        model.coeffs.drift(&u, j, &mut fu);
        model.coeffs.drift(&v, j, &mut fv);
        let inner: f64 = d.iter().zip(fu.iter().zip(&fv)).map(|(di, (a, b))| di * (a - b)).sum();
        sup = sup.max(inner / d2);
    }
    Ok(sup)
}

/// Largest observed values of
/// `(|d|^2 |G|^2 - 2 |d^T G|^2) / |d|^4` and `|G|^2 / |d|^2`, where
/// `d = u - v` and `G = g(u,j) - g(v,j)` (Frobenius norm).
pub fn estimate_h_pair(
    model: &HybridModel,
    j: usize,
    probes: &ProbeBox,
    count: usize,
) -> Result<(f64, f64)> {
    model.check_regime(j)?;
    let (n, m) = (model.dim(), model.noise_dim());
    let (mut gu, mut gv) = (vec![0.0; n * m], vec![0.0; n * m]);
    let (mut sup_hj, mut sup_h) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (u, v) in probes.pairs(n, count) {
        let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        let d2 = sq_norm(&d);
        if d2 == 0.0 {
            continue;
        }
        model.coeffs.diffusion(&u, j, &mut gu);
        model.coeffs.diffusion(&v, j, &mut gv);
        let g: Vec<f64> = gu.iter().zip(&gv).map(|(a, b)| a - b).collect();
        let g2 = sq_norm(&g);
        let dtg2: f64 = (0..m)
            .map(|k| (0..n).map(|i| d[i] * g[i * m + k]).sum::<f64>().powi(2))
            .sum();
        sup_hj = sup_hj.max((d2 * g2 - 2.0 * dtg2) / (d2 * d2));
        sup_h = sup_h.max(g2 / d2);
    }
    Ok((sup_hj, sup_h))
}

/// Maximum relative deviation between the analytic drift Jacobian and
/// central finite differences over probe points. `Ok(None)` when the model
/// supplies no Jacobian.
pub fn jacobian_mismatch(model: &HybridModel, probes: &ProbeBox, count: usize) -> Result<Option<f64>> {
    let n = model.dim();
    let mut worst = 0.0f64;
    let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
    for (x, _) in probes.pairs(n, count) {
        for j in 0..model.regimes() {
            let Some(jac) = model.eval_drift_jacobian(&x, j)? else {
                return Ok(None);
            };
            for c in 0..n {
                let step = 1e-6 * x[c].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += step;
                xm[c] -= step;
                model.coeffs.drift(&xp, j, &mut fp);
                model.coeffs.drift(&xm, j, &mut fm);
                for r in 0..n {
                    let fd = (fp[r] - fm[r]) / (2.0 * step);
                    let exact = jac[r * n + c];
                    worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
                }
            }
        }
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_gl() -> HybridModel {
        ginzburg_landau(
            GinzburgLandauCoefficients::new(vec![1.0, 2.0], vec![-1.0, -3.0], vec![2.0, -1.0]).unwrap(),
        )
    }

    #[test]
    fn planar_drift_values() {
        let m = planar_switching();
        assert_eq!(m.eval_drift(&[0.0, 0.0], 0).unwrap(), vec![0.0, 1.0]);
        assert_eq!(m.eval_drift(&[1.0, 0.0], 1).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn planar_diffusion_values() {
        let m = planar_switching();
        assert_eq!(m.eval_diffusion(&[3.0, -7.0], 0).unwrap(), vec![-3.0, 1.0, 4.0, 0.0]);
        assert_eq!(m.eval_diffusion(&[0.0, 0.0], 1).unwrap(), vec![2.0, 0.0, 0.0, -4.0]);
    }

    #[test]
    fn gl_values() {
        let m = reference_gl();
        assert_eq!(m.eval_drift(&[1.0], 0).unwrap(), vec![0.0]);
        assert_eq!(m.eval_diffusion(&[0.0], 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn invalid_regime_and_nonfinite_are_errors() {
        let m = reference_gl();
        assert!(matches!(m.eval_drift(&[1.0], 2), Err(Error::InvalidState { .. })));
        assert!(matches!(
            m.eval_drift(&[f64::MAX], 0),
            Err(Error::NonFiniteOutput { what: "drift" })
        ));
        assert!(matches!(
            m.eval_drift(&[1.0, 2.0], 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gl_rejects_positive_cubic() {
        assert!(GinzburgLandauCoefficients::new(vec![1.0], vec![0.5], vec![0.0]).is_err());
    }

    #[test]
    fn linear_drift_alpha_is_minus_one() {
        let coeffs = FnCoefficients::new(
            2,
            1,
            1,
            |x, _, out| {
                out[0] = -x[0];
                out[1] = -x[1];
            },
            |_, _, out| out.fill(0.0),
        );
        let m = HybridModel::new(
            "linear",
            Arc::new(coeffs),
            ConditionConstants::new(vec![-1.0], vec![0.0], 1.0).unwrap(),
        )
        .unwrap();
        let est = estimate_alpha(&m, 0, &ProbeBox::new(-3.0, 3.0, 1), 1000).unwrap();
        assert!(est <= -1.0 + 1e-12, "{est}");
        let (hj, h) = estimate_h_pair(&m, 0, &ProbeBox::new(-3.0, 3.0, 1), 100).unwrap();
        assert!(hj <= 0.0 && h == 0.0);
    }

    #[test]
    fn declared_constants_dominate_estimates() {
        let gl = reference_gl();
        let probes = ProbeBox::new(-10.0, 10.0, 5);
        assert!(estimate_alpha(&gl, 0, &probes, ProbeBox::DEFAULT_COUNT).unwrap() <= 1.0);
        assert!(estimate_alpha(&gl, 1, &probes, ProbeBox::DEFAULT_COUNT).unwrap() <= 2.0);
        let (h1, _) = estimate_h_pair(&gl, 0, &probes, 1000).unwrap();
        assert!(h1 <= -4.0 + 1e-9, "{h1}");

        let planar = planar_switching();
        let probes = ProbeBox::new(-5.0, 5.0, 9);
        assert!(estimate_alpha(&planar, 0, &probes, ProbeBox::DEFAULT_COUNT).unwrap() <= 2.0);
        assert!(estimate_alpha(&planar, 1, &probes, ProbeBox::DEFAULT_COUNT).unwrap() <= 1.0);
        for j in 0..2 {
            let (hj, h) = estimate_h_pair(&planar, j, &probes, ProbeBox::DEFAULT_COUNT).unwrap();
            assert!(h <= 7.0 + 1e-9, "h = {h}");
            assert!(hj <= planar.declared().h_vec[j] + 1e-9, "h_{j} = {hj}");
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let probes = ProbeBox::new(-4.0, 4.0, 21);
        let worst = jacobian_mismatch(&planar_switching(), &probes, 200).unwrap().unwrap();
        assert!(worst < 1e-5, "planar {worst}");
        let worst = jacobian_mismatch(&reference_gl(), &probes, 200).unwrap().unwrap();
        assert!(worst < 1e-5, "gl {worst}");
    }

    #[test]
    fn planar_matches_independent_evaluation() {
        // Written out component by component from the model equations.
        fn reference(y: [f64; 2], j: usize) -> ([f64; 2], [[f64; 2]; 2]) {
            let [a, b] = y;
            if j == 0 {
                (
                    [2.0 * a - a.powi(3) - a * b.powi(2), 1.0 + b - b.powi(3) - b * a.powi(2)],
                    [[-3.0, 1.0], [4.0, 0.0]],
                )
            } else {
                let r = (a.powi(2) + b.powi(2)).sqrt();
                (
                    [a - 2.0 * a * r + 1.0, 0.5 * b - 2.0 * b * r + 2.0],
                    [[2.0 * a - b + 2.0, a - b], [a + 2.0 * b, a + b - 4.0]],
                )
            }
        }
        let m = planar_switching();
        let mut rng = StreamId::new(99, 0).rng();
        for _ in 0..100 {
            let y = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            for j in 0..2 {
                let (f, g) = reference(y, j);
                let fm = m.eval_drift(&y, j).unwrap();
                let gm = m.eval_diffusion(&y, j).unwrap();
                for i in 0..2 {
                    assert!((fm[i] - f[i]).abs() <= 1e-12 * f[i].abs().max(1.0));
                    for k in 0..2 {
                        assert!((gm[i * 2 + k] - g[i][k]).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
