//! Continuous-time Markov chains on a finite regime set.
//!
//! Regimes are indexed `0..N` throughout the library; user-facing output
//! (CSV, CLI) labels them `1..=N`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;

const ROW_SUM_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-12;

/// A validated generator: nonnegative off-diagonal rates, conservative rows,
/// strongly connected transition graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    q: DMatrix<f64>,
}

impl GeneratorMatrix {
    /// Validates a row-major `N x N` array.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: r.len(),
                });
            }
        }
        validate_generator(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn states(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[(from, to)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.states())
            .map(|i| self.q.row(i).iter().copied().collect())
            .collect()
    }
}

/// `P(delta) = exp(delta * Q)` with cumulative rows cached for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
    cumulative: Vec<Vec<f64>>,
    delta: f64,
}

impl TransitionMatrix {
    pub fn states(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.p[(from, to)]
    }

    /// Inverse-CDF draw of the next state given uniform `u` in `[0, 1)`:
    /// the smallest `s` with `u < P[i][0] + ... + P[i][s]`, and the last state
    /// once `u` reaches the partial sum through `N - 2`.
    pub fn next_state(&self, from: usize, u: f64) -> usize {
        let row = &self.cumulative[from];
        let last = row.len() - 1;
        row[..last].iter().position(|&c| u < c).unwrap_or(last)
    }

    /// Builds a transition matrix from arbitrary stochastic rows. Used for
    /// hand-written kernels in tests and for the identity at `delta = 0`.
    pub fn from_stochastic(p: DMatrix<f64>, delta: f64) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: p.ncols(),
            });
        }
        for i in 0..n {
            let s: f64 = p.row(i).iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL || p.row(i).iter().any(|&v| !(0.0..=1.0).contains(&v))
            {
                return Err(Error::InvalidArgument(format!(
                    "row {i} of transition matrix is not a probability vector"
                )));
            }
        }
        let cumulative = (0..n)
            .map(|i| {
                p.row(i)
                    .iter()
                    .scan(0.0, |acc, &v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            p,
            cumulative,
            delta,
        })
    }
}

/// Probability vector `mu` with `mu Q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub mu: Vec<f64>,
}

impl StationaryDistribution {
    /// `sum_j mu_j v_j`.
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.mu.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// A discrete regime path `r_0, ..., r_K` sampled on a grid of step `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub states: Vec<usize>,
    pub delta: f64,
    pub seed: Option<StreamId>,
}

impl ChainPath {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Keeps every `stride`-th state, i.e. the chain observed on a coarser grid.
    pub fn subsample(&self, stride: usize) -> ChainPath {
        assert!(stride >= 1);
        ChainPath {
            states: self.states.iter().step_by(stride).copied().collect(),
            delta: self.delta * stride as f64,
            seed: self.seed,
        }
    }
}

pub fn validate_generator(q: DMatrix<f64>) -> Result<GeneratorMatrix> {
    let n = q.nrows();
    if n == 0 || q.ncols() != n {
        return Err(Error::NotSquare {
            rows: n,
            cols: q.ncols(),
        });
    }
    for i in 0..n {
        for j in 0..n {
            let v = q[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFiniteOutput { what: "generator" });
            }
            if i != j && v < 0.0 {
                return Err(Error::NegativeOffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        let sum: f64 = q.row(i).iter().sum();
        if sum.abs() > ROW_SUM_TOL * q[(i, i)].abs().max(1.0) {
            return Err(Error::RowSumNonzero { row: i, sum });
        }
    }
    check_irreducible(&q)?;
    Ok(GeneratorMatrix { q })
}

/// Strong connectivity via reachability from state 0 in the graph and in its
/// transpose.
fn check_irreducible(q: &DMatrix<f64>) -> Result<()> {
    let n = q.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let rate = if forward { q[(v, w)] } else { q[(w, v)] };
                if w != v && rate > 0.0 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    if let Some(to) = reach(true).iter().position(|&s| !s) {
        return Err(Error::Reducible { from: 0, to });
    }
    if let Some(from) = reach(false).iter().position(|&s| !s) {
        return Err(Error::Reducible { from, to: 0 });
    }
    Ok(())
}

/// Solves `mu Q = 0, sum mu = 1` by replacing the last equation of
/// `Q^T mu^T = 0` with the normalisation row.
pub fn stationary_distribution(q: &GeneratorMatrix) -> Result<StationaryDistribution> {
    let n = q.states();
    let mut a = q.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mu = a.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    if mu.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(StationaryDistribution {
        mu: mu.iter().copied().collect(),
    })
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled so its 1-norm is at most 1/2; the series is then
/// summed until a term drops below 1e-18 in max norm.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scaled_norm = norm1;
    while scaled_norm > 0.5 {
        scaled_norm /= 2.0;
        squarings += 1;
    }
    let b = a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=60 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn transition_matrix(q: &GeneratorMatrix, delta: f64) -> Result<TransitionMatrix> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and nonnegative, got {delta}"
        )));
    }
    let mut p = expm(&(q.matrix() * delta));
    let n = p.nrows();
    for i in 0..n {
        for j in 0..n {
            let v = p[(i, j)];
            assert!(
                v >= -CLAMP_TOL,
                "exp(delta Q) entry ({i},{j}) = {v} is negative beyond roundoff"
            );
            if v < 0.0 {
                p[(i, j)] = 0.0;
            }
        }
        let s: f64 = p.row(i).iter().sum();
        for j in 0..n {
            p[(i, j)] /= s;
        }
    }
    TransitionMatrix::from_stochastic(p, delta)
}

/// Streaming chain sampler: draws one uniform per step from its own stream.
#[derive(Debug, Clone)]
pub struct ChainSampler<'a, R> {
    p: &'a TransitionMatrix,
    state: usize,
    rng: R,
}

impl<'a, R: Rng> ChainSampler<'a, R> {
    pub fn new(p: &'a TransitionMatrix, i0: usize, rng: R) -> Result<Self> {
        if i0 >= p.states() {
            return Err(Error::InvalidState {
                state: i0,
                count: p.states(),
            });
        }
        Ok(Self { p, state: i0, rng })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Advances one step and returns the new state.
    pub fn advance(&mut self) -> usize {
        let u: f64 = self.rng.random();
        self.state = self.p.next_state(self.state, u);
        self.state
    }
}

pub fn sample_chain<R: Rng>(
    p: &TransitionMatrix,
    i0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<ChainPath> {
    let mut sampler = ChainSampler::new(p, i0, rng)?;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(i0);
    for _ in 0..steps {
        states.push(sampler.advance());
    }
    Ok(ChainPath {
        states,
        delta: p.delta(),
        seed: None,
    })
}

/// Same as [`sample_chain`] but keyed by a stream id, which is recorded.
pub fn sample_chain_seeded(
    p: &TransitionMatrix,
    i0: usize,
    steps: usize,
    id: StreamId,
) -> Result<ChainPath> {
    let mut rng = id.rng();
    let mut path = sample_chain(p, i0, steps, &mut rng)?;
    path.seed = Some(id);
    Ok(path)
}

pub fn occupation_fractions(path: &ChainPath, states: usize) -> Result<Vec<f64>> {
    if path.states.is_empty() {
        return Err(Error::InvalidArgument("empty chain path".into()));
    }
    let mut counts = vec![0usize; states];
    for &s in &path.states {
        if s >= states {
            return Err(Error::InvalidState { state: s, count: states });
        }
        counts[s] += 1;
    }
    let total = path.states.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}
