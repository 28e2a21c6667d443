//! Existence and ergodicity certificates computed from the declared
//! constants and the generator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, GeneratorMatrix, StationaryDistribution};
use crate::model::ConditionConstants;

/// `beta_j = 2 alpha_j + h_j`, `mu_beta = sum_j mu_j beta_j`, `lambda = |mu_beta|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaLambda {
    pub beta: Vec<f64>,
    pub mu_beta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Satisfied,
    Violated,
}

pub fn compute_beta_lambda(
    constants: &ConditionConstants,
    mu: &StationaryDistribution,
) -> Result<BetaLambda> {
    let n = mu.mu.len();
    constants.validate(n)?;
    let beta: Vec<f64> = constants
        .alpha
        .iter()
        .zip(&constants.h_vec)
        .map(|(a, h)| 2.0 * a + h)
        .collect();
    let mu_beta = mu.dot(&beta);
    Ok(BetaLambda {
        beta,
        mu_beta,
        lambda: mu_beta.abs(),
    })
}

/// The ergodicity hypothesis holds iff `mu_beta < 0`.
pub fn check_hypothesis(mu_beta: f64) -> Hypothesis {
    if mu_beta < 0.0 {
        Hypothesis::Satisfied
    } else {
        Hypothesis::Violated
    }
}

/// Admissible moment exponent
/// `p0 = 1 ∧ min_{j: 2 beta_j + lambda > 0} (-4 q_jj / (2 beta_j + lambda)) ∧ lambda / (32 h)`.
pub fn compute_p0(q: &GeneratorMatrix, bl: &BetaLambda, h: f64) -> Result<f64> {
    if !(bl.mu_beta < 0.0) || bl.lambda == 0.0 {
        return Err(Error::HypothesisViolated {
            mu_beta: bl.mu_beta,
            lambda: bl.lambda,
        });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let middle = bl
        .beta
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| {
            let w = 2.0 * b + bl.lambda;
            (w > 0.0).then(|| -4.0 * q.rate(j, j) / w)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(1f64.min(middle).min(bl.lambda / (32.0 * h)))
}

/// `Q_p = Q + (p/4) diag(2 beta_j + lambda)`.
pub fn q_p(q: &GeneratorMatrix, beta: &[f64], lambda: f64, p: f64) -> DMatrix<f64> {
    let mut m = q.matrix().clone();
    for (j, b) in beta.iter().enumerate() {
        m[(j, j)] += p / 4.0 * (2.0 * b + lambda);
    }
    m
}

/// `eta_p = -max Re spec(Q_p)`.
pub fn eta_p(q: &GeneratorMatrix, beta: &[f64], lambda: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if beta.len() != q.states() {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: q.states(),
            got: beta.len(),
        });
    }
    let m = q_p(q, beta, lambda, p);
    if m.nrows() == 1 {
        return Ok(-m[(0, 0)]);
    }
    let schur = m
        .try_schur(1e-15, 10_000)
        .ok_or(Error::EigenSolverFailure)?;
    let max_re = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_re.is_finite() {
        return Err(Error::EigenSolverFailure);
    }
    Ok(-max_re)
}

/// Solvability bound of the implicit step: `1 / max_j |alpha_j|`, or
/// infinity when every `alpha_j` is zero.
pub fn admissible_step(constants: &ConditionConstants) -> f64 {
    let a = constants.max_abs_alpha();
    if a == 0.0 {
        f64::INFINITY
    } else {
        1.0 / a
    }
}

/// Everything [`certify`] computes for a model/generator pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub beta: Vec<f64>,
    pub mu: StationaryDistribution,
    pub mu_beta: f64,
    pub lambda: f64,
    pub hypothesis: Hypothesis,
    /// `None` when the hypothesis fails.
    pub p0: Option<f64>,
    pub delta_max: f64,
    q: GeneratorMatrix,
}

/// JSON view of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_beta: f64,
    pub lambda: f64,
    pub hypothesis: Hypothesis,
    pub p0: Option<f64>,
    pub delta_max: f64,
    pub eta_at_p0_half: Option<f64>,
}

impl StabilityCertificate {
    pub fn eta(&self, p: f64) -> Result<f64> {
        eta_p(&self.q, &self.beta, self.lambda, p)
    }

    /// Default experiment exponent `p0 / 2`.
    pub fn default_p(&self) -> Option<f64> {
        self.p0.map(|p| p / 2.0)
    }

    pub fn summary(&self) -> Result<CertificateSummary> {
        let eta_at_p0_half = match self.default_p() {
            Some(p) => Some(self.eta(p)?),
            None => None,
        };
        Ok(CertificateSummary {
            beta: self.beta.clone(),
            mu: self.mu.mu.clone(),
            mu_beta: self.mu_beta,
            lambda: self.lambda,
            hypothesis: self.hypothesis,
            p0: self.p0,
            delta_max: self.delta_max,
            eta_at_p0_half,
        })
    }
}

pub fn certify(constants: &ConditionConstants, q: &GeneratorMatrix) -> Result<StabilityCertificate> {
    let mu = stationary_distribution(q)?;
    let bl = compute_beta_lambda(constants, &mu)?;
    let hypothesis = check_hypothesis(bl.mu_beta);
    let p0 = match hypothesis {
        Hypothesis::Satisfied => Some(compute_p0(q, &bl, constants.h)?),
        Hypothesis::Violated => None,
    };
    Ok(StabilityCertificate {
        beta: bl.beta,
        mu,
        mu_beta: bl.mu_beta,
        lambda: bl.lambda,
        hypothesis,
        p0,
        delta_max: admissible_step(constants),
        q: q.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(rows: &[[f64; 2]]) -> GeneratorMatrix {
        GeneratorMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn consts(alpha: &[f64], h_vec: &[f64], h: f64) -> ConditionConstants {
        ConditionConstants::new(alpha.to_vec(), h_vec.to_vec(), h).unwrap()
    }

    #[test]
    fn beta_lambda_examples() {
        let mu = StationaryDistribution {
            mu: vec![1.0 / 6.0, 5.0 / 6.0],
        };
        let bl = compute_beta_lambda(&consts(&[2.0, 1.0], &[0.0, -3.0], 7.0), &mu).unwrap();
        assert_eq!(bl.beta, vec![4.0, -1.0]);
        assert!((bl.mu_beta + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(bl.lambda, bl.mu_beta.abs());

        let mu = StationaryDistribution {
            mu: vec![2.0 / 3.0, 1.0 / 3.0],
        };
        let bl = compute_beta_lambda(&consts(&[1.0, 2.0], &[-4.0, -1.0], 4.0), &mu).unwrap();
        assert_eq!(bl.beta, vec![-2.0, 3.0]);
        assert!((bl.mu_beta + 1.0 / 3.0).abs() < 1e-15);

        let bl = compute_beta_lambda(&consts(&[0.0, 0.0], &[0.0, 0.0], 1.0), &mu).unwrap();
        assert_eq!((bl.beta, bl.lambda), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn hypothesis_sign() {
        assert_eq!(check_hypothesis(-1.0 / 6.0), Hypothesis::Satisfied);
        assert_eq!(check_hypothesis(0.0), Hypothesis::Violated);
        assert_eq!(check_hypothesis(1.0), Hypothesis::Violated);
    }

    #[test]
    fn p0_examples() {
        let q = gen(&[[-5.0, 5.0], [1.0, -1.0]]);
        let bl = BetaLambda {
            beta: vec![4.0, -1.0],
            mu_beta: -1.0 / 6.0,
            lambda: 1.0 / 6.0,
        };
        // 1 ∧ 20/(8 + 1/6) ∧ (1/6)/(32*7)
        let p0 = compute_p0(&q, &bl, 7.0).unwrap();
        assert!((p0 - 1.0 / 1344.0).abs() < 1e-15);

        let bl = BetaLambda {
            beta: vec![-1.0, -1.0],
            mu_beta: -1.0,
            lambda: 1.0,
        };
        assert_eq!(compute_p0(&q, &bl, 1.0 / 64.0).unwrap(), 1.0);

        let bl = BetaLambda {
            beta: vec![0.0, 0.0],
            mu_beta: 0.0,
            lambda: 0.0,
        };
        assert!(matches!(compute_p0(&q, &bl, 1.0), Err(Error::HypothesisViolated { .. })));
    }

    #[test]
    fn eta_single_state_closed_form() {
        let q = GeneratorMatrix::from_rows(&[vec![0.0]]).unwrap();
        let eta = eta_p(&q, &[-3.0], 0.5, 0.2).unwrap();
        assert!((eta - (-0.2 * (2.0 * -3.0 + 0.5) / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn eta_vanishes_as_p_tends_to_zero() {
        let q = gen(&[[-5.0, 5.0], [1.0, -1.0]]);
        let eta = eta_p(&q, &[4.0, -1.0], 1.0 / 6.0, 1e-12).unwrap();
        assert!(eta.abs() < 1e-10);
    }

    #[test]
    fn eta_positive_for_small_p() {
        let q = gen(&[[-5.0, 5.0], [1.0, -1.0]]);
        assert!(eta_p(&q, &[4.0, -1.0], 1.0 / 6.0, 1e-4).unwrap() > 0.0);
    }

    #[test]
    fn admissible_step_examples() {
        assert_eq!(admissible_step(&consts(&[2.0, 1.0], &[0.0, 0.0], 1.0)), 0.5);
        assert_eq!(admissible_step(&consts(&[1.0, 2.0], &[0.0, 0.0], 1.0)), 0.5);
        assert_eq!(admissible_step(&consts(&[0.0, 0.0], &[0.0, 0.0], 1.0)), f64::INFINITY);
        assert_eq!(admissible_step(&consts(&[-4.0], &[0.0], 1.0)), 0.25);
    }

    #[test]
    fn certificate_without_hypothesis_has_no_p0() {
        let q = gen(&[[-2.0, 2.0], [3.0, -3.0]]);
        // q = 2 makes mu_beta vanish for the cubic family
        let cert = certify(&consts(&[1.0, 2.0], &[-4.0, -1.0], 4.0), &q).unwrap();
        assert!(cert.mu_beta.abs() < 1e-15);
        assert_eq!(cert.hypothesis, Hypothesis::Violated);
        assert_eq!(cert.p0, None);
        assert_eq!(cert.summary().unwrap().eta_at_p0_half, None);
    }
}
