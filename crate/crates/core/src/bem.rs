//! Backward Euler-Maruyama integration of hybrid SDEs.
//!
//! One step of the scheme is
//!
//! ```text
//! X_{k+1} = X_k + f(X_{k+1}, r_k) Δ + g(X_k, r_k) ΔB_k
//! ```
//!
//! i.e. `X_{k+1}` is the root `u` of `u - Δ f(u, r_k) = X_k + g(X_k, r_k) ΔB_k`.
//! The root is unique whenever `Δ max_j |α_j| < 1`; [`implicit_solve`]
//! finds it with damped Newton, falling back to fixed-point iteration and,
//! in one dimension, bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{transition_matrix, ChainPath, ChainSampler, GeneratorMatrix, TransitionMatrix};
use crate::measure::{EmpiricalMeasure, HybridSample};
use crate::model::HybridModel;
use crate::rng::{Increments, NoiseStream, StreamId};
use crate::stability::admissible_step;

/// Explicit paths are cut at the first point whose norm exceeds this.
pub const OVERFLOW_THRESHOLD: f64 = 1e12;

/// Fraction of replicas that must succeed for an ensemble to be returned.
pub const MIN_SUCCESS_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BemConfig {
    pub delta: f64,
    pub steps: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub safety_factor: f64,
}

impl BemConfig {
    pub fn new(delta: f64, steps: usize) -> Self {
        Self {
            delta,
            steps,
            ..Self::default()
        }
    }

    /// Checks `0 < Δ < safety_factor * delta_max` and the solver settings.
    pub fn validate(&self, model: &HybridModel) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.delta
            )));
        }
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidArgument("solver_tol must be positive".into()));
        }
        if self.solver_max_iter == 0 {
            return Err(Error::InvalidArgument("solver_max_iter must be positive".into()));
        }
        if !(self.safety_factor > 0.0 && self.safety_factor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety_factor must lie in (0, 1], got {}",
                self.safety_factor
            )));
        }
        let bound = self.safety_factor * admissible_step(model.declared());
        if !(self.delta < bound) {
            return Err(Error::StepTooLarge {
                delta: self.delta,
                bound,
            });
        }
        Ok(())
    }

    fn solver(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver_tol,
            max_iter: self.solver_max_iter,
        }
    }
}

impl Default for BemConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            steps: 1000,
            solver_tol: 1e-12,
            solver_max_iter: 50,
            safety_factor: 0.5,
        }
    }
}

/// A discrete trajectory `(X_k, r_k)`, `k = 0..=K`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPath {
    pub dim: usize,
    pub delta: f64,
    pub seed: Option<StreamId>,
    states: Vec<f64>,
    regimes: Vec<usize>,
    /// Set by the explicit scheme when the path left the overflow threshold.
    pub diverged_at: Option<usize>,
}

impl HybridPath {
    fn with_capacity(dim: usize, delta: f64, seed: Option<StreamId>, points: usize) -> Self {
        Self {
            dim,
            delta,
            seed,
            states: Vec::with_capacity(points * dim),
            regimes: Vec::with_capacity(points),
            diverged_at: None,
        }
    }

    fn push(&mut self, x: &[f64], r: usize) {
        self.states.extend_from_slice(x);
        self.regimes.push(r);
    }

    /// Number of stored points (K + 1 for a complete path).
    pub fn len(&self) -> usize {
        self.regimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regimes.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn regime(&self, k: usize) -> usize {
        self.regimes[k]
    }

    pub fn regimes(&self) -> &[usize] {
        &self.regimes
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.states.chunks(self.dim).zip(self.regimes.iter().copied())
    }

    pub fn last(&self) -> Option<HybridSample> {
        let k = self.len().checked_sub(1)?;
        Some(HybridSample::new(self.point(k).to_vec(), self.regime(k)))
    }

    pub fn max_norm(&self) -> f64 {
        self.states
            .chunks(self.dim)
            .map(norm)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct SolverSettings {
    tol: f64,
    max_iter: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Scratch buffers for the implicit solve, reused across steps.
#[derive(Debug, Clone)]
struct Solver {
    n: usize,
    f: Vec<f64>,
    jac: Vec<f64>,
    res: Vec<f64>,
    step: Vec<f64>,
    trial: Vec<f64>,
    trial_res: Vec<f64>,
    probe: Vec<f64>,
}

impl Solver {
    fn new(n: usize) -> Self {
        Self {
            n,
            f: vec![0.0; n],
            jac: vec![0.0; n * n],
            res: vec![0.0; n],
            step: vec![0.0; n],
            trial: vec![0.0; n],
            trial_res: vec![0.0; n],
            probe: vec![0.0; n],
        }
    }

    /// `out = u - Δ f(u, j) - b`; returns its norm.
    fn residual(
        f: &mut [f64],
        model: &HybridModel,
        j: usize,
        b: &[f64],
        delta: f64,
        u: &[f64],
        out: &mut [f64],
    ) -> f64 {
        model.coefficients().drift(u, j, f);
        for i in 0..u.len() {
            out[i] = u[i] - delta * f[i] - b[i];
        }
        let r = norm(out);
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    }

    fn solve(
        &mut self,
        model: &HybridModel,
        j: usize,
        b: &[f64],
        delta: f64,
        settings: SolverSettings,
        u: &mut [f64],
    ) -> Result<()> {
        let bound = admissible_step(model.declared());
        if !(delta < bound) {
            return Err(Error::StepTooLarge { delta, bound });
        }
        let n = self.n;
        let tol = settings.tol;

        u.copy_from_slice(b);
        let mut r = Self::residual(&mut self.f, model, j, b, delta, u, &mut self.res);
        if r <= tol {
            return Ok(());
        }
        let mut best = r;

        // Damped Newton on F(u) = u - Δ f(u, j) - b.
        'newton: for _ in 0..settings.max_iter {
            self.jacobian(model, j, delta, u);
            for i in 0..n {
                self.step[i] = -self.res[i];
            }
            if !solve_dense(&mut self.jac, &mut self.step, n) {
                break;
            }
            let mut damping = 1.0;
            loop {
                for i in 0..n {
                    self.trial[i] = u[i] + damping * self.step[i];
                }
                let rt = Self::residual(
                    &mut self.f,
                    model,
                    j,
                    b,
                    delta,
                    &self.trial,
                    &mut self.trial_res,
                );
                if rt < r {
                    u.copy_from_slice(&self.trial);
                    self.res.copy_from_slice(&self.trial_res);
                    r = rt;
                    break;
                }
                damping *= 0.5;
                if damping < 1e-10 {
                    break 'newton;
                }
            }
            if r <= tol {
                return Ok(());
            }
        }
        best = best.min(r);

        // Fixed-point fallback u <- b + Δ f(u, j), restarted from b.
        u.copy_from_slice(b);
        for _ in 0..settings.max_iter {
            model.coefficients().drift(u, j, &mut self.f);
            for i in 0..n {
                u[i] = b[i] + delta * self.f[i];
            }
            let rf = Self::residual(&mut self.f, model, j, b, delta, u, &mut self.res);
            if !rf.is_finite() {
                break;
            }
            best = best.min(rf);
            if rf <= tol {
                return Ok(());
            }
        }

        if n == 1 {
            let rb = self.bisect(model, j, b[0], delta, settings, u);
            if rb <= tol {
                return Ok(());
            }
            best = best.min(rb);
        }
        Err(Error::NoConvergence {
            residual: best,
            iterations: settings.max_iter,
        })
    }

    /// `jac = I - Δ Df(u, j)`, from the model or by central differences.
    fn jacobian(&mut self, model: &HybridModel, j: usize, delta: f64, u: &[f64]) {
        let n = self.n;
        let coeffs = model.coefficients();
        if !coeffs.drift_jacobian(u, j, &mut self.jac) {
            self.probe.copy_from_slice(u);
            for c in 0..n {
                let h = 1e-7 * u[c].abs().max(1.0);
                self.probe[c] = u[c] + h;
                coeffs.drift(&self.probe, j, &mut self.trial);
                self.probe[c] = u[c] - h;
                coeffs.drift(&self.probe, j, &mut self.trial_res);
                self.probe[c] = u[c];
                for row in 0..n {
                    self.jac[row * n + c] = (self.trial[row] - self.trial_res[row]) / (2.0 * h);
                }
            }
        }
        for v in self.jac.iter_mut() {
            *v *= -delta;
        }
        for i in 0..n {
            self.jac[i * n + i] += 1.0;
        }
    }

    /// Scalar root of the strictly increasing `F(u) = u - Δ f(u) - b`.
    fn bisect(
        &mut self,
        model: &HybridModel,
        j: usize,
        b: f64,
        delta: f64,
        settings: SolverSettings,
        u: &mut [f64],
    ) -> f64 {
        let coeffs = model.coefficients();
        let mut fbuf = [0.0];
        let mut eval = |x: f64| {
            coeffs.drift(&[x], j, &mut fbuf);
            x - delta * fbuf[0] - b
        };
        let mut width = b.abs().max(1.0);
        let (mut lo, mut hi) = (b - width, b + width);
        let mut expansions = 0;
        while !(eval(lo) <= 0.0 && eval(hi) >= 0.0) {
            width *= 2.0;
            lo = b - width;
            hi = b + width;
            expansions += 1;
            if expansions > 200 {
                return f64::INFINITY;
            }
        }
        let mut best = (f64::INFINITY, b);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let fm = eval(mid);
            if fm.abs() < best.0 {
                best = (fm.abs(), mid);
            }
            if fm.abs() <= settings.tol || mid == lo || mid == hi {
                break;
            }
            if fm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        u[0] = best.1;
        best.0
    }
}

/// Gaussian elimination with partial pivoting; `a` is row-major `n x n` and
/// is destroyed. Returns `false` for a (numerically) singular matrix.
fn solve_dense(a: &mut [f64], rhs: &mut [f64], n: usize) -> bool {
    if n == 1 {
        if a[0] == 0.0 {
            return false;
        }
        rhs[0] /= a[0];
        return rhs[0].is_finite();
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if a[pivot * n + col] == 0.0 || !a[pivot * n + col].is_finite() {
            return false;
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            rhs.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[row * n + col] / a[col * n + col];
            for c in col..n {
                a[row * n + c] -= factor * a[col * n + c];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for c in row + 1..n {
            s -= a[row * n + c] * rhs[c];
        }
        rhs[row] = s / a[row * n + row];
    }
    rhs.iter().all(|v| v.is_finite())
}

/// Solves `u = b + Δ f(u, j)` to residual `tol`, starting from `u = b`.
pub fn implicit_solve(
    model: &HybridModel,
    j: usize,
    b: &[f64],
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if j >= model.regimes() {
        return Err(Error::InvalidState {
            state: j,
            count: model.regimes(),
        });
    }
    if b.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "implicit right-hand side",
            expected: model.dim(),
            got: b.len(),
        });
    }
    let mut u = vec![0.0; b.len()];
    Solver::new(b.len()).solve(model, j, b, delta, SolverSettings { tol, max_iter }, &mut u)?;
    Ok(u)
}

/// One step from `(x, j)` with increment `dB`, using default solver settings.
pub fn bem_step(model: &HybridModel, x: &[f64], j: usize, dbm: &[f64], delta: f64) -> Result<Vec<f64>> {
    let cfg = BemConfig::default();
    let mut stepper = Stepper::new(model, delta, cfg.solver());
    let mut out = vec![0.0; x.len()];
    stepper.step(x, j, dbm, &mut out)?;
    Ok(out)
}

/// Per-path scratch for [`bem_step`]-style updates.
struct Stepper<'a> {
    model: &'a HybridModel,
    delta: f64,
    settings: SolverSettings,
    solver: Solver,
    g: Vec<f64>,
    b: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a HybridModel, delta: f64, settings: SolverSettings) -> Self {
        let (n, m) = (model.dim(), model.noise_dim());
        Self {
            model,
            delta,
            settings,
            solver: Solver::new(n),
            g: vec![0.0; n * m],
            b: vec![0.0; n],
        }
    }

    /// `b = x + g(x, j) dB`, the explicit part of the step.
    fn explicit_part(&mut self, x: &[f64], j: usize, dbm: &[f64]) {
        let m = dbm.len();
        self.model.coefficients().diffusion(x, j, &mut self.g);
        for (i, bi) in self.b.iter_mut().enumerate() {
            let row = &self.g[i * m..(i + 1) * m];
            *bi = x[i] + row.iter().zip(dbm).map(|(g, w)| g * w).sum::<f64>();
        }
    }

    fn step(&mut self, x: &[f64], j: usize, dbm: &[f64], out: &mut [f64]) -> Result<()> {
        if j >= self.model.regimes() {
            return Err(Error::InvalidState {
                state: j,
                count: self.model.regimes(),
            });
        }
        self.explicit_part(x, j, dbm);
        let b = std::mem::take(&mut self.b);
        let res = self
            .solver
            .solve(self.model, j, &b, self.delta, self.settings, out);
        self.b = b;
        res?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { what: "implicit step" });
        }
        Ok(())
    }

    fn explicit_step(&mut self, x: &[f64], j: usize, dbm: &[f64], out: &mut [f64]) {
        self.explicit_part(x, j, dbm);
        self.model.coefficients().drift(x, j, &mut self.solver.f);
        for i in 0..out.len() {
            out[i] = self.b[i] + self.delta * self.solver.f[i];
        }
    }
}

/// Source of regime transitions and Brownian increments for a driver.
trait Driving {
    /// Fills `dbm` with `ΔB_k` and returns `r_{k+1}`.
    fn next(&mut self, dbm: &mut [f64]) -> usize;
}

struct RandomDriving<'a> {
    chain: ChainSampler<'a, rand_chacha::ChaCha8Rng>,
    noise: Increments,
}

impl Driving for RandomDriving<'_> {
    fn next(&mut self, dbm: &mut [f64]) -> usize {
        self.noise.fill(dbm);
        self.chain.advance()
    }
}

struct RecordedDriving<'a> {
    chain: &'a [usize],
    increments: &'a [f64],
    k: usize,
}

impl Driving for RecordedDriving<'_> {
    fn next(&mut self, dbm: &mut [f64]) -> usize {
        let m = dbm.len();
        dbm.copy_from_slice(&self.increments[self.k * m..(self.k + 1) * m]);
        self.k += 1;
        self.chain[self.k]
    }
}

fn random_driving<'a>(
    p: &'a TransitionMatrix,
    i0: usize,
    m: usize,
    delta: f64,
    seed: u64,
    replica: u64,
) -> Result<RandomDriving<'a>> {
    Ok(RandomDriving {
        chain: ChainSampler::new(p, i0, StreamId::chain(seed, replica).rng())?,
        noise: NoiseStream::new(StreamId::noise(seed, replica), m).increments(delta),
    })
}

/// Runs `steps` BEM steps for a batch of initial points that share the same
/// chain and noise, calling `observe(k, states, r_k)` at every node.
fn drive_batch<D: Driving>(
    model: &HybridModel,
    starts: &[&[f64]],
    i0: usize,
    cfg: &BemConfig,
    driving: &mut D,
    mut observe: impl FnMut(usize, &[Vec<f64>], usize),
) -> Result<(Vec<Vec<f64>>, usize)> {
    let n = model.dim();
    for s in starts {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                what: "initial point",
                expected: n,
                got: s.len(),
            });
        }
    }
    if i0 >= model.regimes() {
        return Err(Error::InvalidState {
            state: i0,
            count: model.regimes(),
        });
    }
    let mut stepper = Stepper::new(model, cfg.delta, cfg.solver());
    let mut xs: Vec<Vec<f64>> = starts.iter().map(|s| s.to_vec()).collect();
    let mut next = vec![0.0; n];
    let mut dbm = vec![0.0; model.noise_dim()];
    let mut r = i0;
    observe(0, &xs, r);
    for k in 0..cfg.steps {
        let r_next = driving.next(&mut dbm);
        for x in xs.iter_mut() {
            stepper
                .step(x, r, &dbm, &mut next)
                .map_err(|e| Error::PathAborted {
                    step: k,
                    source: Box::new(e),
                })?;
            x.copy_from_slice(&next);
        }
        r = r_next;
        observe(k + 1, &xs, r);
    }
    Ok((xs, r))
}

fn check_model_chain(model: &HybridModel, q: &GeneratorMatrix) -> Result<()> {
    if q.states() != model.regimes() {
        return Err(Error::DimensionMismatch {
            what: "generator states",
            expected: model.regimes(),
            got: q.states(),
        });
    }
    Ok(())
}

/// BEM path for replica `replica` of `seed`: chain uniforms from stream
/// `2 * replica`, increments from stream `2 * replica + 1`.
pub fn simulate_replica(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    seed: u64,
    replica: u64,
) -> Result<HybridPath> {
    cfg.validate(model)?;
    check_model_chain(model, q)?;
    let p = transition_matrix(q, cfg.delta)?;
    let mut driving = random_driving(&p, i0, model.noise_dim(), cfg.delta, seed, replica)?;
    let mut path = HybridPath::with_capacity(
        model.dim(),
        cfg.delta,
        Some(StreamId::new(seed, replica)),
        cfg.steps + 1,
    );
    drive_batch(model, &[x0], i0, cfg, &mut driving, |_, xs, r| path.push(&xs[0], r))?;
    Ok(path)
}

pub fn simulate_path(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    seed: u64,
) -> Result<HybridPath> {
    simulate_replica(model, q, x0, i0, cfg, seed, 0)
}

/// BEM path driven by a recorded chain (on the step grid) and recorded
/// increments (`steps * m` values, row `k` holding `ΔB_k`).
pub fn simulate_recorded(
    model: &HybridModel,
    x0: &[f64],
    chain: &ChainPath,
    increments: &[f64],
    cfg: &BemConfig,
) -> Result<HybridPath> {
    cfg.validate(model)?;
    let m = model.noise_dim();
    if chain.states.len() < cfg.steps + 1 || increments.len() < cfg.steps * m {
        return Err(Error::InvalidArgument(format!(
            "recorded noise covers fewer than {} steps",
            cfg.steps
        )));
    }
    let mut driving = RecordedDriving {
        chain: &chain.states,
        increments,
        k: 0,
    };
    let mut path = HybridPath::with_capacity(model.dim(), cfg.delta, chain.seed, cfg.steps + 1);
    drive_batch(model, &[x0], chain.states[0], cfg, &mut driving, |_, xs, r| {
        path.push(&xs[0], r)
    })?;
    Ok(path)
}

/// Two BEM paths from `x0` and `y0` driven by identical noise and an
/// identical chain started at `i0`.
pub fn simulate_coupled(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    y0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    seed: u64,
    replica: u64,
) -> Result<(HybridPath, HybridPath)> {
    cfg.validate(model)?;
    check_model_chain(model, q)?;
    let p = transition_matrix(q, cfg.delta)?;
    let mut driving = random_driving(&p, i0, model.noise_dim(), cfg.delta, seed, replica)?;
    let id = Some(StreamId::new(seed, replica));
    let mut a = HybridPath::with_capacity(model.dim(), cfg.delta, id, cfg.steps + 1);
    let mut b = HybridPath::with_capacity(model.dim(), cfg.delta, id, cfg.steps + 1);
    drive_batch(model, &[x0, y0], i0, cfg, &mut driving, |_, xs, r| {
        a.push(&xs[0], r);
        b.push(&xs[1], r);
    })?;
    Ok((a, b))
}

/// Explicit Euler-Maruyama path with the same stream layout as
/// [`simulate_replica`]. No step guard; the path stops at the first point
/// whose norm exceeds [`OVERFLOW_THRESHOLD`], recorded in `diverged_at`.
pub fn simulate_em_path(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    seed: u64,
    replica: u64,
) -> Result<HybridPath> {
    check_model_chain(model, q)?;
    if x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial point",
            expected: model.dim(),
            got: x0.len(),
        });
    }
    let p = transition_matrix(q, cfg.delta)?;
    let mut driving = random_driving(&p, i0, model.noise_dim(), cfg.delta, seed, replica)?;
    let mut stepper = Stepper::new(model, cfg.delta, cfg.solver());
    let mut path = HybridPath::with_capacity(
        model.dim(),
        cfg.delta,
        Some(StreamId::new(seed, replica)),
        cfg.steps + 1,
    );
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut dbm = vec![0.0; model.noise_dim()];
    let mut r = i0;
    path.push(&x, r);
    for k in 0..cfg.steps {
        let r_next = driving.next(&mut dbm);
        stepper.explicit_step(&x, r, &dbm, &mut next);
        std::mem::swap(&mut x, &mut next);
        r = r_next;
        let size = norm(&x);
        if x.iter().all(|v| v.is_finite()) {
            path.push(&x, r);
        }
        if !(size <= OVERFLOW_THRESHOLD) {
            path.diverged_at = Some(k + 1);
            break;
        }
    }
    Ok(path)
}

/// How [`long_run_ensemble`] turns simulations into samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingMode {
    /// Terminal point of each of `R` independent replicas.
    Terminal,
    /// One trajectory: `K` burn-in steps, then `R` points `thin` steps apart.
    TimeAverage { thin: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica: u64,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub measure: EmpiricalMeasure,
    pub failures: Vec<ReplicaFailure>,
}

/// Samples approximating the numerical invariant measure.
///
/// Replica `r` uses the streams of `(seed, r)`; samples are stored in replica
/// order, so the result does not depend on the thread count.
pub fn long_run_ensemble(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    replicas: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<Ensemble> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    cfg.validate(model)?;
    check_model_chain(model, q)?;
    let p = transition_matrix(q, cfg.delta)?;
    match mode {
        SamplingMode::Terminal => {
            let results: Vec<Result<HybridSample>> = (0..replicas as u64)
                .into_par_iter()
                .map(|replica| {
                    let mut driving =
                        random_driving(&p, i0, model.noise_dim(), cfg.delta, seed, replica)?;
                    let (xs, r) = drive_batch(model, &[x0], i0, cfg, &mut driving, |_, _, _| {})?;
                    Ok(HybridSample::new(xs.into_iter().next().unwrap(), r))
                })
                .collect();
            collect_ensemble(results)
        }
        SamplingMode::TimeAverage { thin } => {
            if thin == 0 {
                return Err(Error::InvalidArgument("thin must be positive".into()));
            }
            let mut driving = random_driving(&p, i0, model.noise_dim(), cfg.delta, seed, 0)?;
            let long = BemConfig {
                steps: cfg.steps + thin * (replicas - 1),
                ..*cfg
            };
            let mut samples = Vec::with_capacity(replicas);
            drive_batch(model, &[x0], i0, &long, &mut driving, |k, xs, r| {
                if k >= cfg.steps && (k - cfg.steps).is_multiple_of(thin) {
                    samples.push(HybridSample::new(xs[0].clone(), r));
                }
            })?;
            Ok(Ensemble {
                measure: EmpiricalMeasure::new(samples)?,
                failures: Vec::new(),
            })
        }
    }
}

pub(crate) fn collect_ensemble(results: Vec<Result<HybridSample>>) -> Result<Ensemble> {
    let total = results.len();
    let mut samples = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (replica, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => samples.push(s),
            Err(e) => failures.push(ReplicaFailure {
                replica: replica as u64,
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
    if (samples.len() as f64) < MIN_SUCCESS_FRACTION * total as f64 || samples.is_empty() {
        return Err(Error::EnsembleFailed {
            failed: failures.len(),
            total,
        });
    }
    Ok(Ensemble {
        measure: EmpiricalMeasure::new(samples)?,
        failures,
    })
}

/// Per-replica series of `|X_k|^p` sampled every `stride` steps
/// (`k = 0, stride, 2 stride, ...`). Rows are replicas in order.
pub fn moment_series(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    replicas: usize,
    seed: u64,
    p: f64,
    stride: usize,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate(model)?;
    check_model_chain(model, q)?;
    let stride = stride.max(1);
    let p_mat = transition_matrix(q, cfg.delta)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let mut driving =
                random_driving(&p_mat, i0, model.noise_dim(), cfg.delta, seed, replica)?;
            let mut series = Vec::with_capacity(cfg.steps / stride + 1);
            drive_batch(model, &[x0], i0, cfg, &mut driving, |k, xs, _| {
                if k % stride == 0 {
                    series.push(norm(&xs[0]).powf(p));
                }
            })?;
            Ok(series)
        })
        .collect()
}

/// Per-replica series of `|X_k - Y_k|^p` for coupled paths from `x0`, `y0`,
/// sampled every `stride` steps.
pub fn coupled_gap_series(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    y0: &[f64],
    i0: usize,
    cfg: &BemConfig,
    replicas: usize,
    seed: u64,
    p: f64,
    stride: usize,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate(model)?;
    check_model_chain(model, q)?;
    let stride = stride.max(1);
    let p_mat = transition_matrix(q, cfg.delta)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let mut driving =
                random_driving(&p_mat, i0, model.noise_dim(), cfg.delta, seed, replica)?;
            let mut series = Vec::with_capacity(cfg.steps / stride + 1);
            drive_batch(model, &[x0, y0], i0, cfg, &mut driving, |k, xs, _| {
                if k % stride == 0 {
                    let gap: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(a, b)| a - b).collect();
                    series.push(norm(&gap).powf(p));
                }
            })?;
            Ok(series)
        })
        .collect()
}
