//! Closed-form pathwise solution of the scalar hybrid cubic SDE
//! `dY = (b(r) Y + a(r) Y^3) dt + rho(r) Y dB`:
//!
//! ```text
//! Y(t) = y0 E(t) / sqrt(1 - 2 y0^2 ∫_0^t a(r(s)) E(s)^2 ds),
//! E(t) = exp(∫_0^t [b(r) - rho(r)^2 / 2] ds + ∫_0^t rho(r) dB).
//! ```
//!
//! With `a <= 0` the denominator never drops below one. On a fine grid
//! with the regime frozen on each cell the exponent is exact; the time
//! integral is accumulated by the trapezoid rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bem::{simulate_recorded, BemConfig};
use crate::coupling::FineNoise;
use crate::error::{Error, Result};
use crate::markov::{ChainPath, GeneratorMatrix};
use crate::measure::loglog_slope;
use crate::model::{ginzburg_landau, GinzburgLandauCoefficients};
use crate::rng::NoiseStream;

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePath {
    pub values: Vec<f64>,
    pub delta: f64,
    pub chain: ChainPath,
}

/// Evaluates the closed form at every node of `chain`'s grid, given the
/// scalar increments `increments[k] = B(t_{k+1}) - B(t_k)`.
pub fn exact_gl_path(
    coeffs: &GinzburgLandauCoefficients,
    chain: &ChainPath,
    increments: &[f64],
    y0: f64,
) -> Result<OraclePath> {
    if !(y0 > 0.0) {
        return Err(Error::InvalidArgument(format!("initial value must be positive, got {y0}")));
    }
    if coeffs.a.iter().any(|&a| a > 0.0) {
        return Err(Error::InvalidArgument("cubic coefficients must be <= 0".into()));
    }
    let steps = chain.steps();
    if increments.len() < steps {
        return Err(Error::InvalidArgument(format!(
            "{} increments for {steps} steps",
            increments.len()
        )));
    }
    if let Some(&s) = chain.states.iter().find(|&&s| s >= coeffs.regimes()) {
        return Err(Error::InvalidState {
            state: s,
            count: coeffs.regimes(),
        });
    }
    let delta = chain.delta;
    let scale = 2.0 * y0 * y0;
    let mut values = Vec::with_capacity(steps + 1);
    values.push(y0);
    let mut log_e = 0.0f64;
    let mut e2 = 1.0f64;
    let mut integral = 0.0f64;
    for k in 0..steps {
        let j = chain.states[k];
        let (b, a, rho) = (coeffs.b[j], coeffs.a[j], coeffs.rho[j]);
        log_e += (b - 0.5 * rho * rho) * delta + rho * increments[k];
        let e2_next = (2.0 * log_e).exp();
        integral += 0.5 * delta * a * (e2 + e2_next);
        e2 = e2_next;
        let denom = 1.0 - scale * integral;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::DenominatorNonpositive {
                index: k + 1,
                value: denom,
            });
        }
        let y = y0 * log_e.exp() / denom.sqrt();
        if !y.is_finite() {
            return Err(Error::NonFiniteOutput { what: "closed-form solution" });
        }
        values.push(y);
    }
    Ok(OraclePath {
        values,
        delta,
        chain: chain.clone(),
    })
}

/// Same as [`exact_gl_path`] with increments drawn from `noise`.
pub fn exact_gl_path_from_stream(
    coeffs: &GinzburgLandauCoefficients,
    chain: &ChainPath,
    noise: &NoiseStream,
    y0: f64,
) -> Result<OraclePath> {
    let mut inc = noise.increments(chain.delta);
    let mut dbm = vec![0.0; chain.steps()];
    for v in dbm.chunks_mut(1) {
        inc.fill(v);
    }
    exact_gl_path(coeffs, chain, &dbm, y0)
}

/// Strong-error study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongErrorConfig {
    pub y0: f64,
    pub i0: usize,
    pub horizon: f64,
    /// Reference grid step is `2^-fine_level`.
    pub fine_level: u32,
    /// BEM steps are `2^-level` for each entry.
    pub levels: Vec<u32>,
    pub replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongErrorPoint {
    pub delta: f64,
    pub rms_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongErrorReport {
    pub points: Vec<StrongErrorPoint>,
    /// Log-log slope of RMS error against step size.
    pub order: f64,
}

/// RMS terminal error of BEM against the closed form, per step size, with
/// both driven by the same fine-grid noise.
pub fn strong_error(
    coeffs: &GinzburgLandauCoefficients,
    q: &GeneratorMatrix,
    cfg: &StrongErrorConfig,
    base: &BemConfig,
) -> Result<StrongErrorReport> {
    let fine_delta = 2f64.powi(-(cfg.fine_level as i32));
    let fine_steps_f = cfg.horizon / fine_delta;
    let fine_steps = fine_steps_f.round() as usize;
    if (fine_steps as f64 - fine_steps_f).abs() > 1e-9 || fine_steps == 0 {
        return Err(Error::InvalidArgument("horizon must be a multiple of the fine step".into()));
    }
    let strides: Vec<usize> = cfg
        .levels
        .iter()
        .map(|&l| {
            if l > cfg.fine_level {
                Err(Error::InvalidArgument(format!("level {l} is finer than the reference")))
            } else {
                Ok(1usize << (cfg.fine_level - l))
            }
        })
        .collect::<Result<_>>()?;
    let model = ginzburg_landau(coeffs.clone());
    let configs: Vec<BemConfig> = strides
        .iter()
        .map(|&s| {
            let c = BemConfig {
                delta: fine_delta * s as f64,
                steps: fine_steps / s,
                ..*base
            };
            c.validate(&model).map(|_| c)
        })
        .collect::<Result<_>>()?;

    let sq_errors: Vec<Vec<f64>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let fine = FineNoise::generate(q, cfg.i0, fine_delta, fine_steps, 1, cfg.seed, replica)?;
            let exact = exact_gl_path(coeffs, &fine.chain, &fine.increments, cfg.y0)?;
            let y_end = *exact.values.last().unwrap();
            strides
                .iter()
                .zip(&configs)
                .map(|(&s, c)| {
                    let noise = fine.coarsen(s)?;
                    let path = simulate_recorded(&model, &[cfg.y0], &noise.chain, &noise.increments, c)?;
                    let x_end = path.last().unwrap().x[0];
                    Ok((x_end - y_end).powi(2))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let points: Vec<StrongErrorPoint> = configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mean = sq_errors.iter().map(|r| r[i]).sum::<f64>() / sq_errors.len() as f64;
            StrongErrorPoint {
                delta: c.delta,
                rms_error: mean.sqrt(),
            }
        })
        .collect();
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.rms_error).collect();
    let order = loglog_slope(&deltas, &errs)?;
    Ok(StrongErrorReport { points, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{sample_chain_seeded, transition_matrix};
    use crate::rng::StreamId;

    fn one_regime(b: f64, a: f64, rho: f64) -> GinzburgLandauCoefficients {
        GinzburgLandauCoefficients::new(vec![b], vec![a], vec![rho]).unwrap()
    }

    fn constant_chain(steps: usize, delta: f64) -> ChainPath {
        ChainPath {
            states: vec![0; steps + 1],
            delta,
            seed: None,
        }
    }

    #[test]
    fn linear_ode_reduction() {
        let steps = 1000;
        let delta = 1e-3;
        let path = exact_gl_path(&one_regime(0.7, 0.0, 0.0), &constant_chain(steps, delta), &vec![0.0; steps], 1.3).unwrap();
        for (k, y) in path.values.iter().enumerate() {
            let want = 1.3 * (0.7 * k as f64 * delta).exp();
            assert!((y - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn geometric_brownian_motion_reduction() {
        let steps = 2000;
        let delta = 1e-3;
        let sigma = 0.8;
        let noise = NoiseStream::new(StreamId::new(5, 1), 1);
        let chain = constant_chain(steps, delta);
        let path = exact_gl_path_from_stream(&one_regime(0.0, 0.0, sigma), &chain, &noise, 0.5).unwrap();
        let mut inc = noise.increments(delta);
        let mut w = 0.0;
        let mut buf = [0.0];
        for k in 1..=steps {
            inc.fill(&mut buf);
            w += buf[0];
            let t = k as f64 * delta;
            let want = 0.5 * (sigma * w - 0.5 * sigma * sigma * t).exp();
            assert!((path.values[k] - want).abs() <= 1e-12 * want.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn deterministic_bernoulli_equation() {
        // y' = b y + a y^3 has y(t) = y0 e^{bt} / sqrt(1 - a y0^2 (e^{2bt} - 1) / b).
        let (b, a, y0) = (1.0, -2.0, 0.8);
        let steps = 4096;
        let delta = 1.0 / steps as f64;
        let path = exact_gl_path(&one_regime(b, a, 0.0), &constant_chain(steps, delta), &vec![0.0; steps], y0).unwrap();
        let t = 1.0f64;
        let want = y0 * (b * t).exp() / (1.0 - a * y0 * y0 * ((2.0 * b * t).exp() - 1.0) / b).sqrt();
        let got = *path.values.last().unwrap();
        // trapezoid error is O(delta^2)
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn positivity_and_refinement_on_switching_noise() {
        // Switch times live on the coarsest grid so that refinement only
        // changes the quadrature, not the regime path.
        let coeffs = GinzburgLandauCoefficients::new(vec![1.0, 2.0], vec![-1.0, -3.0], vec![2.0, -1.0]).unwrap();
        let q = GeneratorMatrix::from_rows(&[vec![-1.5, 1.5], vec![3.0, -3.0]]).unwrap();
        let coarse_delta = 2f64.powi(-10);
        let p = transition_matrix(&q, coarse_delta).unwrap();
        let coarse_chain = sample_chain_seeded(&p, 1, 1 << 10, StreamId::chain(8, 0)).unwrap();
        let mut states: Vec<usize> = coarse_chain.states[..1 << 10]
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, 8))
            .collect();
        states.push(*coarse_chain.states.last().unwrap());
        let mut inc = NoiseStream::new(StreamId::noise(8, 0), 1).increments(coarse_delta / 8.0);
        let mut increments = vec![0.0; 1 << 13];
        for v in increments.chunks_mut(1) {
            inc.fill(v);
        }
        let finest = FineNoise {
            chain: ChainPath {
                states,
                delta: coarse_delta / 8.0,
                seed: None,
            },
            increments,
            dim: 1,
        };
        let mut terminal = Vec::new();
        for stride in [8usize, 4, 2, 1] {
            let noise = finest.coarsen(stride).unwrap();
            let path = exact_gl_path(&coeffs, &noise.chain, &noise.increments, 0.5).unwrap();
            assert!(path.values.iter().all(|&y| y > 0.0));
            terminal.push(*path.values.last().unwrap());
        }
        let diffs: Vec<f64> = terminal.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
    }

    #[test]
    fn single_regime_matches_direct_evaluation() {
        // Independent single-regime formula with left-point exponent and
        // trapezoid integral written out inline.
        let (b, a, rho, y0) = (0.5, -1.0, 0.6, 2.0);
        let q = GeneratorMatrix::from_rows(&[vec![0.0]]).unwrap();
        let delta = 1e-3;
        let steps = 500;
        let p = transition_matrix(&q, delta).unwrap();
        let chain = sample_chain_seeded(&p, 0, steps, StreamId::chain(1, 0)).unwrap();
        let noise = NoiseStream::new(StreamId::noise(1, 0), 1);
        let path = exact_gl_path_from_stream(&one_regime(b, a, rho), &chain, &noise, y0).unwrap();
        let mut inc = noise.increments(delta);
        let mut buf = [0.0];
        let mut w = 0.0;
        let mut prev_e2 = 1.0;
        let mut int = 0.0;
        for k in 1..=steps {
            inc.fill(&mut buf);
            w += buf[0];
            let t = k as f64 * delta;
            let e = ((b - rho * rho / 2.0) * t + rho * w).exp();
            int += delta * a * (prev_e2 + e * e) / 2.0;
            prev_e2 = e * e;
            let want = y0 * e / (1.0 - 2.0 * y0 * y0 * int).sqrt();
            assert!((path.values[k] - want).abs() <= 1e-10 * want, "k = {k}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let chain = constant_chain(3, 0.1);
        assert!(exact_gl_path(&one_regime(1.0, -1.0, 0.0), &chain, &[0.0; 3], 0.0).is_err());
        assert!(exact_gl_path(&one_regime(1.0, -1.0, 0.0), &chain, &[0.0; 2], 1.0).is_err());
        let bad = GinzburgLandauCoefficients {
            b: vec![0.0],
            a: vec![1.0],
            rho: vec![0.0],
        };
        assert!(exact_gl_path(&bad, &chain, &[0.0; 3], 1.0).is_err());
    }
}
