//! Fine-grid noise shared across step sizes.
//!
//! Increments are drawn once on the finest grid and summed into coarser
//! Brownian increments; the regime chain is sampled on the fine grid and
//! observed at the coarse nodes. Simulations at different step sizes driven
//! by the same [`FineNoise`] are therefore pathwise comparable.

use rayon::prelude::*;

use crate::bem::{collect_ensemble, simulate_recorded, BemConfig, Ensemble};
use crate::error::{Error, Result};
use crate::markov::{sample_chain_seeded, transition_matrix, ChainPath, GeneratorMatrix};
use crate::model::HybridModel;
use crate::rng::{NoiseStream, StreamId};

#[derive(Debug, Clone, PartialEq)]
pub struct FineNoise {
    pub chain: ChainPath,
    /// `steps * dim` increments; row `k` is `ΔB_k`.
    pub increments: Vec<f64>,
    pub dim: usize,
}

impl FineNoise {
    /// Chain from stream `(seed, 2 * replica)`, increments from
    /// `(seed, 2 * replica + 1)`, both on the grid of step `delta`.
    pub fn generate(
        q: &GeneratorMatrix,
        i0: usize,
        delta: f64,
        steps: usize,
        dim: usize,
        seed: u64,
        replica: u64,
    ) -> Result<Self> {
        let p = transition_matrix(q, delta)?;
        let chain = sample_chain_seeded(&p, i0, steps, StreamId::chain(seed, replica))?;
        let mut inc = NoiseStream::new(StreamId::noise(seed, replica), dim).increments(delta);
        let mut increments = vec![0.0; steps * dim];
        for row in increments.chunks_mut(dim) {
            inc.fill(row);
        }
        Ok(Self {
            chain,
            increments,
            dim,
        })
    }

    pub fn steps(&self) -> usize {
        self.chain.steps()
    }

    pub fn delta(&self) -> f64 {
        self.chain.delta
    }

    /// The same noise on the grid of step `stride * delta`.
    pub fn coarsen(&self, stride: usize) -> Result<FineNoise> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return Err(Error::InvalidArgument(format!(
                "stride {stride} does not divide {} fine steps",
                self.steps()
            )));
        }
        let coarse_steps = self.steps() / stride;
        let dim = self.dim;
        let mut increments = vec![0.0; coarse_steps * dim];
        for (k, row) in increments.chunks_mut(dim).enumerate() {
            for fine in k * stride..(k + 1) * stride {
                for c in 0..dim {
                    row[c] += self.increments[fine * dim + c];
                }
            }
        }
        Ok(FineNoise {
            chain: self.chain.subsample(stride),
            increments,
            dim,
        })
    }
}

/// Terminal samples at several step sizes `stride * fine_delta`, all driven
/// by the same per-replica fine noise, over `fine_steps * fine_delta` time.
/// Returns one ensemble per stride, in the order given.
pub fn ladder_ensembles(
    model: &HybridModel,
    q: &GeneratorMatrix,
    x0: &[f64],
    i0: usize,
    fine_delta: f64,
    fine_steps: usize,
    strides: &[usize],
    replicas: usize,
    seed: u64,
    base: &BemConfig,
) -> Result<Vec<Ensemble>> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    let configs: Vec<BemConfig> = strides
        .iter()
        .map(|&s| {
            let cfg = BemConfig {
                delta: fine_delta * s as f64,
                steps: fine_steps / s.max(1),
                ..*base
            };
            cfg.validate(model).map(|_| cfg)
        })
        .collect::<Result<_>>()?;
    let per_replica: Vec<Vec<Result<crate::measure::HybridSample>>> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let fine = match FineNoise::generate(
                q,
                i0,
                fine_delta,
                fine_steps,
                model.noise_dim(),
                seed,
                replica,
            ) {
                Ok(f) => f,
                Err(e) => return strides.iter().map(|_| Err(e.clone())).collect(),
            };
            strides
                .iter()
                .zip(&configs)
                .map(|(&s, cfg)| {
                    let noise = fine.coarsen(s)?;
                    let path = simulate_recorded(model, x0, &noise.chain, &noise.increments, cfg)?;
                    Ok(path.last().expect("nonempty path"))
                })
                .collect()
        })
        .collect();
    (0..strides.len())
        .map(|i| collect_ensemble(per_replica.iter().map(|r| r[i].clone()).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarsening_sums_increments_and_subsamples_chain() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.5, 1.5], vec![3.0, -3.0]]).unwrap();
        let fine = FineNoise::generate(&q, 1, 0.01, 12, 2, 3, 0).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.steps(), 3);
        assert!((coarse.delta() - 0.04).abs() < 1e-15);
        assert_eq!(coarse.chain.states, vec![fine.chain.states[0], fine.chain.states[4], fine.chain.states[8], fine.chain.states[12]]);
        let want: f64 = (4..8).map(|k| fine.increments[2 * k + 1]).sum();
        assert!((coarse.increments[3] - want).abs() < 1e-15);
        assert!(fine.coarsen(5).is_err());
        assert_eq!(fine.coarsen(1).unwrap(), fine);
    }

    #[test]
    fn identical_strides_give_identical_ensembles() {
        let model = crate::model::planar_switching();
        let q = GeneratorMatrix::from_rows(&[vec![-5.0, 5.0], vec![1.0, -1.0]]).unwrap();
        let e = ladder_ensembles(&model, &q, &[1.0, 1.0], 0, 0.01, 40, &[2, 2, 1], 6, 4, &BemConfig::default())
            .unwrap();
        assert_eq!(e[0], e[1]);
        assert_ne!(e[0].measure, e[2].measure);
    }
}
