//! Run configuration: presets, TOML files, manifests and flag overrides,
//! layered in that order and validated in one pass.

use std::fmt;
use std::path::Path;

use hybrid_bem::markov::GeneratorMatrix;
use hybrid_bem::model::{
    ginzburg_landau, planar_switching, ConditionConstants, GinzburgLandauCoefficients, HybridModel,
    PlanarSwitching,
};
use hybrid_bem::stability::{admissible_step, certify, Hypothesis, StabilityCertificate};
use hybrid_bem::bem::BemConfig;
use serde::{Deserialize, Serialize};

pub const PLANAR: &str = "planar-switching";
pub const GINZBURG_LANDAU: &str = "ginzburg-landau";

/// Canonical model name for a registry name or alias.
pub fn canonical_model(name: &str) -> Option<&'static str> {
    match name {
        PLANAR | "example-4.1" => Some(PLANAR),
        GINZBURG_LANDAU | "example-4.2" | "cubic" => Some(GINZBURG_LANDAU),
        _ => None,
    }
}

/// One field that failed validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration ({} violations)", .0.len())]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "cli.io",
            ConfigError::Parse { .. } => "cli.parse",
            ConfigError::Invalid(_) => "cli.validation",
        }
    }
}

/// Ensemble sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Terminal,
    TimeAverage,
}

/// Every field optional; layers are merged before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub preset: Option<String>,
    pub model: Option<String>,
    pub b: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub generator: Option<Vec<Vec<f64>>>,
    pub alpha: Option<Vec<f64>>,
    pub h_vec: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub delta: Option<f64>,
    pub steps: Option<usize>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub x0: Option<Vec<f64>>,
    pub i0: Option<usize>,
    pub solver_tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub safety_factor: Option<f64>,
    pub strict: Option<bool>,
    pub p: Option<f64>,
    pub sampling: Option<Sampling>,
    pub thin: Option<usize>,
    pub stationarity_check: Option<bool>,
    pub ladder: Option<Vec<f64>>,
    pub reference_delta: Option<f64>,
    pub bootstrap: Option<usize>,
    pub y0: Option<Vec<f64>>,
    pub stride: Option<usize>,
    pub fine_level: Option<u32>,
    pub levels: Option<Vec<u32>>,
    pub horizon: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl PartialConfig {
    /// Fields set in `top` replace those in `self`.
    pub fn merge(mut self, top: PartialConfig) -> PartialConfig {
        overlay!(self, top; preset, model, b, a, rho, generator, alpha, h_vec, h, delta, steps,
            replicas, seed, x0, i0, solver_tol, solver_max_iter, safety_factor, strict, p,
            sampling, thin, stationarity_check, ladder, reference_delta, bootstrap, y0, stride,
            fine_level, levels, horizon);
        self
    }

    pub fn from_toml_str(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: RunConfig,
            }
            let m: Manifest = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: shown,
                message: e.to_string(),
            })?;
            Ok(m.config.into())
        } else {
            Self::from_toml_str(&text, &shown)
        }
    }
}

/// Defaults shared by every preset.
fn common_defaults() -> PartialConfig {
    PartialConfig {
        seed: Some(0),
        solver_tol: Some(1e-12),
        solver_max_iter: Some(50),
        safety_factor: Some(0.5),
        strict: Some(false),
        sampling: Some(Sampling::Terminal),
        thin: Some(100),
        stationarity_check: Some(true),
        ladder: Some(vec![0.004, 0.002, 0.001]),
        reference_delta: Some(1.25e-4),
        bootstrap: Some(30),
        stride: Some(10),
        fine_level: Some(14),
        levels: Some(vec![6, 7, 8, 9, 10]),
        horizon: Some(1.0),
        ..PartialConfig::default()
    }
}

/// Named configuration presets.
pub fn preset(name: &str) -> Option<PartialConfig> {
    let declared = PlanarSwitching::declared();
    let layer = match name {
        PLANAR | "example-4.1" => PartialConfig {
            preset: Some(PLANAR.into()),
            model: Some(PLANAR.into()),
            generator: Some(vec![vec![-5.0, 5.0], vec![1.0, -1.0]]),
            alpha: Some(declared.alpha),
            h_vec: Some(declared.h_vec),
            h: Some(declared.h),
            delta: Some(0.002),
            steps: Some(5_000),
            replicas: Some(100),
            x0: Some(vec![1.0, 1.0]),
            i0: Some(1),
            y0: Some(vec![-1.0, 2.0]),
            ..PartialConfig::default()
        },
        GINZBURG_LANDAU | "example-4.2" | "cubic" => PartialConfig {
            preset: Some(GINZBURG_LANDAU.into()),
            model: Some(GINZBURG_LANDAU.into()),
            b: Some(vec![1.0, 2.0]),
            a: Some(vec![-1.0, -3.0]),
            rho: Some(vec![2.0, -1.0]),
            generator: Some(vec![vec![-1.5, 1.5], vec![3.0, -3.0]]),
            delta: Some(0.001),
            steps: Some(10_000),
            replicas: Some(100),
            x0: Some(vec![0.5]),
            i0: Some(2),
            y0: Some(vec![5.0]),
            ..PartialConfig::default()
        },
        "divergence" => PartialConfig {
            preset: Some("divergence".into()),
            model: Some(GINZBURG_LANDAU.into()),
            b: Some(vec![1.0]),
            a: Some(vec![-1.0]),
            rho: Some(vec![0.5]),
            generator: Some(vec![vec![0.0]]),
            delta: Some(0.1),
            steps: Some(100),
            replicas: Some(100),
            x0: Some(vec![10.0]),
            i0: Some(1),
            y0: Some(vec![-10.0]),
            ..PartialConfig::default()
        },
        _ => return None,
    };
    Some(common_defaults().merge(layer))
}

/// A fully resolved and validated configuration. Regimes are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: String,
    pub b: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub generator: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub h_vec: Vec<f64>,
    pub h: f64,
    pub delta: f64,
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub i0: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub safety_factor: f64,
    pub strict: bool,
    pub p: Option<f64>,
    pub sampling: Sampling,
    pub thin: usize,
    pub stationarity_check: bool,
    pub ladder: Vec<f64>,
    pub reference_delta: f64,
    pub bootstrap: usize,
    pub y0: Vec<f64>,
    pub stride: usize,
    pub fine_level: u32,
    pub levels: Vec<u32>,
    pub horizon: f64,
}

impl From<RunConfig> for PartialConfig {
    fn from(c: RunConfig) -> Self {
        PartialConfig {
            preset: c.preset,
            model: Some(c.model),
            b: c.b,
            a: c.a,
            rho: c.rho,
            generator: Some(c.generator),
            alpha: Some(c.alpha),
            h_vec: Some(c.h_vec),
            h: Some(c.h),
            delta: Some(c.delta),
            steps: Some(c.steps),
            replicas: Some(c.replicas),
            seed: Some(c.seed),
            x0: Some(c.x0),
            i0: Some(c.i0),
            solver_tol: Some(c.solver_tol),
            solver_max_iter: Some(c.solver_max_iter),
            safety_factor: Some(c.safety_factor),
            strict: Some(c.strict),
            p: c.p,
            sampling: Some(c.sampling),
            thin: Some(c.thin),
            stationarity_check: Some(c.stationarity_check),
            ladder: Some(c.ladder),
            reference_delta: Some(c.reference_delta),
            bootstrap: Some(c.bootstrap),
            y0: Some(c.y0),
            stride: Some(c.stride),
            fine_level: Some(c.fine_level),
            levels: Some(c.levels),
            horizon: Some(c.horizon),
        }
    }
}

/// Model, generator and certificate built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub model: HybridModel,
    pub generator: GeneratorMatrix,
    pub certificate: StabilityCertificate,
    /// Non-fatal findings, such as a failed hypothesis without `strict`.
    pub warnings: Vec<String>,
}

impl Resolved {
    pub fn bem(&self) -> BemConfig {
        self.bem_with(self.config.delta, self.config.steps)
    }

    pub fn bem_with(&self, delta: f64, steps: usize) -> BemConfig {
        BemConfig {
            delta,
            steps,
            solver_tol: self.config.solver_tol,
            solver_max_iter: self.config.solver_max_iter,
            safety_factor: self.config.safety_factor,
        }
    }

    /// Initial regime, 0-based.
    pub fn i0(&self) -> usize {
        self.config.i0 - 1
    }

    pub fn gl_coefficients(&self) -> Option<GinzburgLandauCoefficients> {
        match (&self.config.b, &self.config.a, &self.config.rho) {
            (Some(b), Some(a), Some(rho)) if self.config.model == GINZBURG_LANDAU => {
                GinzburgLandauCoefficients::new(b.clone(), a.clone(), rho.clone()).ok()
            }
            _ => None,
        }
    }
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn require<T: Clone>(&mut self, field: &str, value: &Option<T>) -> Option<T> {
        if value.is_none() {
            self.fail(field, "missing");
        }
        value.clone()
    }

    fn positive(&mut self, field: &str, value: Option<f64>) -> Option<f64> {
        match value {
            Some(v) if v > 0.0 && v.is_finite() => Some(v),
            Some(v) => {
                self.fail(field, format!("must be positive and finite, got {v}"));
                None
            }
            None => {
                self.fail(field, "missing");
                None
            }
        }
    }

    fn at_least_one(&mut self, field: &str, value: Option<usize>) -> Option<usize> {
        match value {
            Some(0) => {
                self.fail(field, "must be at least 1");
                None
            }
            None => {
                self.fail(field, "missing");
                None
            }
            v => v,
        }
    }

    fn length(&mut self, field: &str, got: usize, want: usize) -> bool {
        if got != want {
            self.fail(field, format!("expected {want} entries, got {got}"));
        }
        got == want
    }
}

/// Validates a merged configuration, reporting every violation found.
pub fn resolve(raw: PartialConfig) -> Result<Resolved, ConfigError> {
    let mut ck = Checker {
        violations: Vec::new(),
    };
    let mut warnings = Vec::new();

    let model_name = match ck.require("model", &raw.model) {
        Some(name) => match canonical_model(&name) {
            Some(c) => Some(c),
            None => {
                ck.fail("model", format!("unknown model '{name}' (known: {PLANAR}, {GINZBURG_LANDAU})"));
                None
            }
        },
        None => None,
    };

    let generator = ck.require("generator", &raw.generator).and_then(|rows| {
        GeneratorMatrix::from_rows(&rows)
            .map_err(|e| ck.fail("generator", format!("{e} ({})", e.code())))
            .ok()
    });
    let states = generator.as_ref().map(GeneratorMatrix::states);

    let model = match model_name {
        Some(PLANAR) => {
            if let Some(n) = states {
                ck.length("generator", n, 2);
            }
            Some(planar_switching())
        }
        Some(_) => {
            let b = ck.require("b", &raw.b);
            let a = ck.require("a", &raw.a);
            let rho = ck.require("rho", &raw.rho);
            match (b, a, rho) {
                (Some(b), Some(a), Some(rho)) => {
                    let mut ok = true;
                    if let Some(n) = states {
                        ok &= ck.length("b", b.len(), n);
                        ok &= ck.length("a", a.len(), n);
                        ok &= ck.length("rho", rho.len(), n);
                    }
                    for (j, v) in a.iter().enumerate() {
                        if *v > 0.0 {
                            ck.fail(&format!("a[{j}]"), format!("must be <= 0, got {v}"));
                            ok = false;
                        }
                    }
                    if ok {
                        GinzburgLandauCoefficients::new(b, a, rho)
                            .map_err(|e| ck.fail("model", e.to_string()))
                            .ok()
                            .map(ginzburg_landau)
                    } else {
                        None
                    }
                }
                _ => None,
            }
        }
        None => None,
    };

    let constants = match &model {
        Some(m) => {
            let natural = m.declared().clone();
            let alpha = raw.alpha.clone().unwrap_or(natural.alpha);
            let h_vec = raw.h_vec.clone().unwrap_or(natural.h_vec);
            let h = raw.h.unwrap_or(natural.h);
            let regimes = m.regimes();
            let ok = ck.length("alpha", alpha.len(), regimes) & ck.length("h_vec", h_vec.len(), regimes);
            if !(h > 0.0 && h.is_finite()) {
                ck.fail("h", format!("must be positive and finite, got {h}"));
            }
            if ok {
                ConditionConstants::new(alpha, h_vec, h)
                    .map_err(|e| ck.fail("alpha", e.to_string()))
                    .ok()
            } else {
                None
            }
        }
        None => None,
    };
    let model = match (model, &constants) {
        (Some(m), Some(c)) => m
            .with_declared(c.clone())
            .map_err(|e| ck.fail("alpha", e.to_string()))
            .ok(),
        _ => None,
    };

    let delta = ck.positive("delta", raw.delta);
    let steps = ck.at_least_one("steps", raw.steps);
    let replicas = ck.at_least_one("replicas", raw.replicas);
    let seed = raw.seed.unwrap_or(0);
    let solver_tol = ck.positive("solver_tol", raw.solver_tol.or(Some(1e-12)));
    let solver_max_iter = ck.at_least_one("solver_max_iter", raw.solver_max_iter.or(Some(50)));
    let safety_factor = match raw.safety_factor.unwrap_or(0.5) {
        s if s > 0.0 && s <= 1.0 => Some(s),
        s => {
            ck.fail("safety_factor", format!("must lie in (0, 1], got {s}"));
            None
        }
    };
    let bound = match (&constants, safety_factor) {
        (Some(c), Some(s)) => Some(s * admissible_step(c)),
        _ => None,
    };
    let check_step = |ck: &mut Checker, field: &str, d: f64| {
        if let Some(bound) = bound {
            if d >= bound || d.is_nan() {
                ck.fail(field, format!("step {d} violates the guard delta < {bound}"));
            }
        }
    };
    if let Some(d) = delta {
        check_step(&mut ck, "delta", d);
    }

    let x0 = ck.require("x0", &raw.x0);
    let y0 = raw.y0.clone().or_else(|| x0.clone());
    if let Some(m) = &model {
        if let Some(x) = &x0 {
            ck.length("x0", x.len(), m.dim());
        }
        if let Some(y) = &y0 {
            ck.length("y0", y.len(), m.dim());
        }
    }
    for (field, v) in [("x0", &x0), ("y0", &y0)] {
        if v.as_ref().is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
            ck.fail(field, "entries must be finite");
        }
    }
    let i0 = ck.require("i0", &raw.i0);
    if let (Some(i), Some(n)) = (i0, states) {
        if i == 0 || i > n {
            ck.fail("i0", format!("regimes are numbered 1..={n}, got {i}"));
        }
    }

    if let Some(p) = raw.p {
        if !(p > 0.0 && p <= 1.0) {
            ck.fail("p", format!("must lie in (0, 1], got {p}"));
        }
    }
    let thin = ck.at_least_one("thin", raw.thin.or(Some(100)));
    let stride = ck.at_least_one("stride", raw.stride.or(Some(10)));
    let bootstrap = raw.bootstrap.unwrap_or(30);

    let reference_delta = ck.positive("reference_delta", raw.reference_delta.or(Some(1.25e-4)));
    let ladder = raw.ladder.clone().unwrap_or_default();
    if let Some(r) = reference_delta {
        check_step(&mut ck, "reference_delta", r);
        for (i, &d) in ladder.iter().enumerate() {
            let field = format!("ladder[{i}]");
            let ratio = d / r;
            if d <= 0.0 || d.is_nan() || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                ck.fail(&field, format!("{d} is not a positive multiple of reference_delta {r}"));
            } else {
                check_step(&mut ck, &field, d);
            }
        }
    }
    let horizon = ck.positive("horizon", raw.horizon.or(Some(1.0)));
    let fine_level = raw.fine_level.unwrap_or(14);
    let levels = raw.levels.clone().unwrap_or_default();
    if let Some(l) = levels.iter().find(|&&l| l >= fine_level) {
        ck.fail("levels", format!("level {l} is not coarser than fine_level {fine_level}"));
    }
    if fine_level > 30 {
        ck.fail("fine_level", format!("at most 30, got {fine_level}"));
    }

    let strict = raw.strict.unwrap_or(false);
    let certificate = match (&constants, &generator, &model) {
        (Some(c), Some(q), Some(m)) if m.regimes() == q.states() => match certify(c, q) {
            Ok(cert) => {
                if cert.hypothesis == Hypothesis::Violated {
                    let msg = format!(
                        "mu_beta = {} is not negative; no invariant-measure guarantee",
                        cert.mu_beta
                    );
                    if strict {
                        ck.fail("generator", msg);
                    } else {
                        warnings.push(msg);
                    }
                }
                Some(cert)
            }
            Err(e) => {
                ck.fail("generator", format!("{e} ({})", e.code()));
                None
            }
        },
        _ => None,
    };

    if !ck.violations.is_empty() {
        return Err(ConfigError::Invalid(ck.violations));
    }
    let (Some(model), Some(generator), Some(certificate), Some(constants)) =
        (model, generator, certificate, constants)
    else {
        unreachable!("missing pieces are reported as violations");
    };
    let config = RunConfig {
        preset: raw.preset,
        model: model_name.expect("validated").to_string(),
        b: raw.b,
        a: raw.a,
        rho: raw.rho,
        generator: generator.to_rows(),
        alpha: constants.alpha,
        h_vec: constants.h_vec,
        h: constants.h,
        delta: delta.expect("validated"),
        steps: steps.expect("validated"),
        replicas: replicas.expect("validated"),
        seed,
        x0: x0.expect("validated"),
        i0: i0.expect("validated"),
        solver_tol: solver_tol.expect("validated"),
        solver_max_iter: solver_max_iter.expect("validated"),
        safety_factor: safety_factor.expect("validated"),
        strict,
        p: raw.p,
        sampling: raw.sampling.unwrap_or(Sampling::Terminal),
        thin: thin.expect("validated"),
        stationarity_check: raw.stationarity_check.unwrap_or(true),
        ladder,
        reference_delta: reference_delta.expect("validated"),
        bootstrap,
        y0: y0.expect("validated"),
        stride: stride.expect("validated"),
        fine_level,
        levels,
        horizon: horizon.expect("validated"),
    };
    Ok(Resolved {
        config,
        model,
        generator,
        certificate,
        warnings,
    })
}

/// Builds the layered configuration: preset, then file, then flags.
/// A preset named inside the file applies beneath the file itself.
pub fn parse_config(
    preset_name: Option<&str>,
    file: Option<&Path>,
    flags: PartialConfig,
) -> Result<Resolved, ConfigError> {
    let file_layer = file.map(PartialConfig::from_file).transpose()?;
    let name = preset_name
        .map(str::to_string)
        .or_else(|| file_layer.as_ref().and_then(|f| f.preset.clone()))
        .or_else(|| flags.preset.clone());
    let mut merged = common_defaults();
    if let Some(name) = name {
        match preset(&name) {
            Some(layer) => merged = merged.merge(layer),
            None => {
                return Err(ConfigError::Invalid(vec![Violation {
                    field: "preset".into(),
                    message: format!("unknown preset '{name}'"),
                }]))
            }
        }
    }
    if let Some(f) = file_layer {
        merged = merged.merge(f);
    }
    resolve(merged.merge(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planar_preset_is_fully_populated() {
        let r = parse_config(Some("example-4.1"), None, PartialConfig::default()).unwrap();
        assert_eq!(r.config.generator, vec![vec![-5.0, 5.0], vec![1.0, -1.0]]);
        assert_eq!(r.config.alpha, vec![2.0, 1.0]);
        assert_eq!(r.config.h_vec, vec![0.0, -3.0]);
        assert_eq!(r.config.h, 7.0);
        assert_eq!(r.config.model, PLANAR);
    }

    #[test]
    fn cubic_preset_matches_reference_run() {
        let r = parse_config(Some(GINZBURG_LANDAU), None, PartialConfig::default()).unwrap();
        assert_eq!(r.config.generator, vec![vec![-1.5, 1.5], vec![3.0, -3.0]]);
        assert_eq!(r.config.delta, 0.001);
        assert_eq!(r.config.steps, 10_000);
        assert_eq!(r.config.replicas, 100);
        assert_eq!((r.config.x0.clone(), r.config.i0), (vec![0.5], 2));
        assert_eq!(r.i0(), 1);
    }

    #[test]
    fn oversized_step_is_rejected_against_guard() {
        let flags = PartialConfig {
            delta: Some(10.0),
            ..PartialConfig::default()
        };
        let Err(ConfigError::Invalid(v)) = parse_config(Some(PLANAR), None, flags) else {
            panic!("expected a validation error");
        };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "delta");
        assert!(v[0].message.contains("0.25"), "{}", v[0].message);
    }

    #[test]
    fn all_violations_are_reported() {
        let text = r#"
            model = "ginzburg-landau"
            b = [1.0, 2.0]
            a = [-1.0, 3.0]
            rho = [2.0]
            generator = [[-1.5, 1.5], [3.0, -3.0]]
            delta = -1.0
            steps = 0
            replicas = 10
            x0 = [0.5, 1.0]
            i0 = 3
        "#;
        let raw = common_defaults().merge(PartialConfig::from_toml_str(text, "inline").unwrap());
        let Err(ConfigError::Invalid(v)) = resolve(raw) else {
            panic!("expected a validation error");
        };
        let fields: Vec<&str> = v.iter().map(|v| v.field.as_str()).collect();
        for want in ["rho", "a[1]", "delta", "steps", "i0"] {
            assert!(fields.contains(&want), "{want} missing from {fields:?}");
        }
    }

    #[test]
    fn unknown_keys_fail_to_parse() {
        let err = PartialConfig::from_toml_str("delta = 0.1\nbogus = 1", "inline").unwrap_err();
        assert_eq!(err.code(), "cli.parse");
    }

    #[test]
    fn violated_hypothesis_is_fatal_only_when_strict() {
        let flags = PartialConfig {
            generator: Some(vec![vec![-3.0, 3.0], vec![3.0, -3.0]]),
            ..PartialConfig::default()
        };
        let r = parse_config(Some(GINZBURG_LANDAU), None, flags.clone()).unwrap();
        assert_eq!(r.warnings.len(), 1);
        let strict = PartialConfig {
            strict: Some(true),
            ..flags
        };
        assert!(matches!(
            parse_config(Some(GINZBURG_LANDAU), None, strict),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn resolved_config_round_trips_through_partial() {
        let r = parse_config(Some(PLANAR), None, PartialConfig::default()).unwrap();
        let again = resolve(r.config.clone().into()).unwrap();
        assert_eq!(again.config, r.config);
    }
}
