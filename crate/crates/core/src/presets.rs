//! Ready-made experiment setups.

use crate::error::Result;
use crate::markov::GeneratorMatrix;
use crate::model::{ginzburg_landau, planar_switching, GinzburgLandauCoefficients, HybridModel};

/// A model with its generator, initial data and default run lengths.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub model: HybridModel,
    pub generator: GeneratorMatrix,
    pub x0: Vec<f64>,
    pub i0: usize,
    pub delta: f64,
    pub steps: usize,
    pub replicas: usize,
}

/// Two-dimensional switching system with generator `[[-5, 5], [1, -1]]`,
/// started from `(1, 1)` in the first regime.
pub fn planar() -> Preset {
    Preset {
        name: "planar-switching",
        model: planar_switching(),
        generator: GeneratorMatrix::from_rows(&[vec![-5.0, 5.0], vec![1.0, -1.0]])
            .expect("valid generator"),
        x0: vec![1.0, 1.0],
        i0: 0,
        delta: 0.002,
        steps: 5_000,
        replicas: 100,
    }
}

/// Regime coefficients `b = (1, 2)`, `a = (-1, -3)`, `rho = (2, -1)`.
pub fn cubic_coefficients() -> GinzburgLandauCoefficients {
    GinzburgLandauCoefficients::new(vec![1.0, 2.0], vec![-1.0, -3.0], vec![2.0, -1.0])
        .expect("valid coefficients")
}

/// Generator `[[-q, q], [3, -3]]`.
pub fn cubic_generator(q: f64) -> Result<GeneratorMatrix> {
    GeneratorMatrix::from_rows(&[vec![-q, q], vec![3.0, -3.0]])
}

/// Scalar hybrid cubic SDE with switching rate `q`, started from 0.5 in the
/// second regime; `delta = 0.001`, `K = 10^4`, 100 replicas.
pub fn cubic(q: f64) -> Result<Preset> {
    Ok(Preset {
        name: "ginzburg-landau",
        model: ginzburg_landau(cubic_coefficients()),
        generator: cubic_generator(q)?,
        x0: vec![0.5],
        i0: 1,
        delta: 0.001,
        steps: 10_000,
        replicas: 100,
    })
}

/// Single-regime `dX = (X - X^3) dt + 0.5 X dB` from `X_0 = 10` with
/// `delta = 0.1`: explicit Euler-Maruyama blows up, BEM does not.
pub fn divergence() -> Preset {
    let coeffs = GinzburgLandauCoefficients::new(vec![1.0], vec![-1.0], vec![0.5])
        .expect("valid coefficients");
    Preset {
        name: "cubic-divergence",
        model: ginzburg_landau(coeffs),
        generator: GeneratorMatrix::from_rows(&[vec![0.0]]).expect("valid generator"),
        x0: vec![10.0],
        i0: 0,
        delta: 0.1,
        steps: 100,
        replicas: 100,
    }
}
