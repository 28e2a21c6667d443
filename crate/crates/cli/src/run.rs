//! Subcommand execution and artifact emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hybrid_bem::bem::{
    coupled_gap_series, long_run_ensemble, simulate_em_path, simulate_replica, Ensemble,
    HybridPath, ReplicaFailure, SamplingMode,
};
use hybrid_bem::coupling::ladder_ensembles;
use hybrid_bem::measure::{
    bootstrap_indices, decay_rate_fit, ecdf, ks_two_sample, mean_series, p_moment, wasserstein_p,
    EmpiricalMeasure, KsResult,
};
use hybrid_bem::oracle::{strong_error, StrongErrorConfig};
use serde::Serialize;

use crate::config::{ConfigError, Resolved, RunConfig, Sampling, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Certify,
    Simulate,
    Invariant,
    Compare,
    Contraction,
    DivergenceDemo,
    StrongError,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Certify => "certify",
            Command::Simulate => "simulate",
            Command::Invariant => "invariant",
            Command::Compare => "compare",
            Command::Contraction => "contraction",
            Command::DivergenceDemo => "divergence-demo",
            Command::StrongError => "strong-error",
        }
    }

    /// Preset used when neither a preset nor a config file is given.
    pub fn default_preset(self) -> &'static str {
        match self {
            Command::DivergenceDemo => "divergence",
            _ => crate::config::GINZBURG_LANDAU,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] hybrid_bem::Error),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    pub fn code(&self) -> String {
        match self {
            CliError::Config(e) => e.code().into(),
            CliError::Core(e) => e.code().into(),
            CliError::Io { .. } => "cli.io".into(),
            CliError::Unsupported(_) => "cli.unsupported".into(),
        }
    }

    /// Machine-readable error record.
    pub fn to_json(&self) -> serde_json::Value {
        let violations: &[Violation] = match self {
            CliError::Config(ConfigError::Invalid(v)) => v,
            _ => &[],
        };
        serde_json::json!({
            "error": {
                "code": self.code(),
                "message": self.to_string(),
                "violations": violations,
            }
        })
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Floats in CSV files carry 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, &text)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn header(first: &[&str], dim: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=dim).map(|c| format!("X{c}")))
        .collect()
}

/// `k, t, regime, X1..Xn` with regimes numbered from 1.
fn path_rows(path: &HybridPath) -> impl Iterator<Item = Vec<String>> + '_ {
    path.points().enumerate().map(move |(k, (x, r))| {
        let mut row = vec![k.to_string(), num(k as f64 * path.delta), (r + 1).to_string()];
        row.extend(x.iter().map(|&v| num(v)));
        row
    })
}

fn sample_rows(measure: &EmpiricalMeasure) -> impl Iterator<Item = Vec<String>> + '_ {
    measure.samples().iter().enumerate().map(|(i, s)| {
        let mut row = vec![i.to_string(), (s.j + 1).to_string()];
        row.extend(s.x.iter().map(|&v| num(v)));
        row
    })
}

#[derive(Serialize)]
struct ReplicaStatus {
    replica: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    code: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

fn statuses(total: usize, failures: &[ReplicaFailure]) -> Vec<ReplicaStatus> {
    (0..total as u64)
        .map(|replica| match failures.iter().find(|f| f.replica == replica) {
            Some(f) => ReplicaStatus {
                replica,
                status: "failed",
                code: Some(f.code.clone()),
                message: Some(f.message.clone()),
            },
            None => ReplicaStatus {
                replica,
                status: "ok",
                code: None,
                message: None,
            },
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    version: &'static str,
    seed: u64,
    threads: usize,
    wall_clock_seconds: f64,
    config: &'a RunConfig,
    warnings: &'a [String],
    replicas: Vec<ReplicaStatus>,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct KsRecord {
    coordinate: usize,
    d_stat: f64,
    p_value: f64,
}

fn ks_records(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<Vec<KsRecord>> {
    (0..a.dim())
        .map(|c| {
            let KsResult { d_stat, p_value } = ks_two_sample(a, b, c)?;
            Ok(KsRecord {
                coordinate: c + 1,
                d_stat,
                p_value,
            })
        })
        .collect()
}

fn regime_fractions(measure: &EmpiricalMeasure, regimes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; regimes];
    for s in measure.samples() {
        counts[s.j] += 1;
    }
    counts.iter().map(|&c| c as f64 / measure.len() as f64).collect()
}

fn sampling_mode(cfg: &RunConfig) -> SamplingMode {
    match cfg.sampling {
        Sampling::Terminal => SamplingMode::Terminal,
        Sampling::TimeAverage => SamplingMode::TimeAverage { thin: cfg.thin },
    }
}

/// Moment exponent: configured `p`, else half the certified `p0`, else 1.
fn moment_exponent(r: &Resolved) -> f64 {
    r.config.p.or(r.certificate.default_p()).unwrap_or(1.0)
}

/// Runs `command`, writing artifacts and `manifest.json` into `out_dir`.
/// Returns the JSON summary also printed on stdout.
pub fn execute(command: Command, resolved: &Resolved, out_dir: &Path) -> Result<serde_json::Value> {
    let start = Instant::now();
    let mut out = Output::new(out_dir)?;
    let (summary, replicas) = match command {
        Command::Certify => certify(resolved, &mut out)?,
        Command::Simulate => simulate(resolved, &mut out)?,
        Command::Invariant => invariant(resolved, &mut out)?,
        Command::Compare => compare(resolved, &mut out)?,
        Command::Contraction => contraction(resolved, &mut out)?,
        Command::DivergenceDemo => divergence(resolved, &mut out)?,
        Command::StrongError => strong(resolved, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: resolved.config.seed,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: &resolved.config,
        warnings: &resolved.warnings,
        replicas,
        artifacts: out.written.clone(),
    };
    out.json("manifest.json", &manifest)?;
    Ok(summary)
}

type Produced = (serde_json::Value, Vec<ReplicaStatus>);

fn certify(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let summary = r.certificate.summary()?;
    out.csv(
        "stationary.csv",
        &["regime".into(), "mu".into()],
        summary.mu.iter().enumerate().map(|(j, &m)| vec![(j + 1).to_string(), num(m)]),
    )?;
    Ok((serde_json::to_value(summary).expect("serializable"), Vec::new()))
}

fn simulate(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let bem = r.bem();
    let path = simulate_replica(&r.model, &r.generator, &cfg.x0, r.i0(), &bem, cfg.seed, 0)?;
    out.csv("path.csv", &header(&["k", "t", "regime"], r.model.dim()), path_rows(&path))?;
    let mut summary = serde_json::json!({
        "steps": cfg.steps,
        "delta": cfg.delta,
        "max_norm": path.max_norm(),
    });
    let mut replicas = statuses(1, &[]);
    if cfg.replicas > 1 {
        let ens = long_run_ensemble(
            &r.model,
            &r.generator,
            &cfg.x0,
            r.i0(),
            &bem,
            cfg.replicas,
            cfg.seed,
            SamplingMode::Terminal,
        )?;
        out.csv("terminal.csv", &header(&["replica", "regime"], r.model.dim()), sample_rows(&ens.measure))?;
        summary["terminal_samples"] = ens.measure.len().into();
        replicas = statuses(cfg.replicas, &ens.failures);
    }
    Ok((summary, replicas))
}

fn invariant(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let mode = sampling_mode(cfg);
    let ens = long_run_ensemble(&r.model, &r.generator, &cfg.x0, r.i0(), &r.bem(), cfg.replicas, cfg.seed, mode)?;
    let m = &ens.measure;
    out.csv("samples.csv", &header(&["sample", "regime"], m.dim()), sample_rows(m))?;
    for c in 0..m.dim() {
        let f = ecdf(m, c)?;
        out.csv(
            &format!("ecdf_x{}.csv", c + 1),
            &["value".into(), "cumulative".into()],
            f.values.iter().zip(&f.cumulative).map(|(&v, &p)| vec![num(v), num(p)]),
        )?;
    }
    let p = moment_exponent(r);
    let mut summary = serde_json::json!({
        "samples": m.len(),
        "failed_replicas": ens.failures.len(),
        "regime_fractions": regime_fractions(m, r.model.regimes()),
        "p": p,
        "p_moment": p_moment(m, p)?,
    });
    if cfg.stationarity_check {
        let doubled = r.bem_with(cfg.delta, 2 * cfg.steps);
        let later = long_run_ensemble(&r.model, &r.generator, &cfg.x0, r.i0(), &doubled, cfg.replicas, cfg.seed.wrapping_add(1), mode)?;
        summary["stationarity"] = serde_json::json!({
            "steps": doubled.steps,
            "seed": cfg.seed.wrapping_add(1),
            "ks": ks_records(m, &later.measure)?,
        });
    }
    Ok((summary, statuses(if cfg.sampling == Sampling::Terminal { cfg.replicas } else { 1 }, &ens.failures)))
}

#[derive(Serialize)]
struct LadderRecord {
    delta: f64,
    wasserstein: f64,
    bootstrap_se: f64,
    ks: Vec<KsRecord>,
}

fn compare(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let fine = cfg.reference_delta;
    let horizon = cfg.delta * cfg.steps as f64;
    let fine_steps = (horizon / fine).round() as usize;
    let mut strides: Vec<usize> = cfg.ladder.iter().map(|d| (d / fine).round() as usize).collect();
    if let Some(s) = strides.iter().find(|&&s| !fine_steps.is_multiple_of(s)) {
        return Err(CliError::Unsupported(format!(
            "horizon {horizon} is not a whole number of steps of size {}",
            *s as f64 * fine
        )));
    }
    strides.push(1);
    let ensembles: Vec<Ensemble> = ladder_ensembles(
        &r.model,
        &r.generator,
        &cfg.x0,
        r.i0(),
        fine,
        fine_steps,
        &strides,
        cfg.replicas,
        cfg.seed,
        &r.bem(),
    )?;
    let (reference, ladder) = ensembles.split_last().expect("reference ensemble");
    let p = cfg.p.unwrap_or(1.0);
    let boots = bootstrap_indices(reference.measure.len(), cfg.bootstrap, cfg.seed);
    let mut records = Vec::new();
    for (&delta, ens) in cfg.ladder.iter().zip(ladder) {
        if ens.measure.len() != reference.measure.len() {
            return Err(CliError::Core(hybrid_bem::Error::SizeMismatch {
                left: ens.measure.len(),
                right: reference.measure.len(),
            }));
        }
        let w = wasserstein_p(&ens.measure, &reference.measure, p)?;
        let bs = boots
            .iter()
            .map(|idx| wasserstein_p(&ens.measure.resample(idx)?, &reference.measure.resample(idx)?, p))
            .collect::<hybrid_bem::Result<Vec<f64>>>()?;
        let se = if bs.len() > 1 {
            let mean = bs.iter().sum::<f64>() / bs.len() as f64;
            (bs.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bs.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        records.push(LadderRecord {
            delta,
            wasserstein: w,
            bootstrap_se: se,
            ks: ks_records(&ens.measure, &reference.measure)?,
        });
    }
    out.csv(
        "wasserstein.csv",
        &["delta".into(), "wasserstein".into(), "bootstrap_se".into()],
        records.iter().map(|rec| vec![num(rec.delta), num(rec.wasserstein), num(rec.bootstrap_se)]),
    )?;
    out.csv(
        "reference.csv",
        &header(&["sample", "regime"], r.model.dim()),
        sample_rows(&reference.measure),
    )?;
    let failures: Vec<ReplicaFailure> = ensembles.iter().flat_map(|e| e.failures.clone()).collect();
    let summary = serde_json::json!({
        "p": p,
        "reference_delta": fine,
        "horizon": horizon,
        "ladder": records,
    });
    Ok((summary, statuses(cfg.replicas, &failures)))
}

fn contraction(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let p = moment_exponent(r);
    let rows = coupled_gap_series(
        &r.model,
        &r.generator,
        &cfg.x0,
        &cfg.y0,
        r.i0(),
        &r.bem(),
        cfg.replicas,
        cfg.seed,
        p,
        cfg.stride,
    )?;
    let mean = mean_series(&rows);
    let dt = cfg.delta * cfg.stride as f64;
    out.csv(
        "gap.csv",
        &["k".into(), "t".into(), "mean_gap_p".into()],
        mean.iter().enumerate().map(|(i, &g)| {
            let k = i * cfg.stride;
            vec![k.to_string(), num(k as f64 * cfg.delta), num(g)]
        }),
    )?;
    // The log-linear fit stops once any replica pair has merged exactly.
    let window = (0..mean.len()).take_while(|&k| rows.iter().all(|r| r[k] > 0.0)).count();
    let fit = |idx: &[usize]| -> Option<f64> {
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i][..window].to_vec()).collect();
        decay_rate_fit(&mean_series(&sub), dt).ok()
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let slope = fit(&all);
    let mut boots: Vec<f64> = bootstrap_indices(rows.len(), cfg.bootstrap, cfg.seed)
        .iter()
        .filter_map(|idx| fit(idx))
        .collect();
    boots.sort_by(f64::total_cmp);
    let upper = (!boots.is_empty()).then(|| boots[((boots.len() - 1) as f64 * 0.95).round() as usize]);
    let summary = serde_json::json!({
        "p": p,
        "initial_mean_gap": mean.first(),
        "final_mean_gap": mean.last(),
        "fit_points": window,
        "slope": slope,
        "bootstrap_upper_95": upper,
    });
    Ok((summary, statuses(cfg.replicas, &[])))
}

fn divergence(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let bem = r.bem();
    let mut rows = Vec::with_capacity(cfg.replicas);
    let mut overflowed = 0;
    let mut bem_max = 0.0f64;
    for replica in 0..cfg.replicas as u64 {
        let em = simulate_em_path(&r.model, &r.generator, &cfg.x0, r.i0(), &bem, cfg.seed, replica)?;
        let implicit = simulate_replica(&r.model, &r.generator, &cfg.x0, r.i0(), &bem, cfg.seed, replica)?;
        if replica == 0 {
            out.csv("em_path.csv", &header(&["k", "t", "regime"], r.model.dim()), path_rows(&em))?;
            out.csv("bem_path.csv", &header(&["k", "t", "regime"], r.model.dim()), path_rows(&implicit))?;
        }
        overflowed += usize::from(em.diverged_at.is_some());
        bem_max = bem_max.max(implicit.max_norm());
        rows.push(vec![
            replica.to_string(),
            em.diverged_at.map(|k| k.to_string()).unwrap_or_default(),
            num(em.max_norm()),
            num(implicit.max_norm()),
        ]);
    }
    out.csv(
        "divergence.csv",
        &["replica".into(), "em_overflow_step".into(), "em_max_norm".into(), "bem_max_norm".into()],
        rows,
    )?;
    let summary = serde_json::json!({
        "replicas": cfg.replicas,
        "em_overflowed": overflowed,
        "overflow_threshold": hybrid_bem::bem::OVERFLOW_THRESHOLD,
        "bem_max_norm": bem_max,
    });
    Ok((summary, statuses(cfg.replicas, &[])))
}

fn strong(r: &Resolved, out: &mut Output) -> Result<Produced> {
    let cfg = &r.config;
    let coeffs = r.gl_coefficients().ok_or_else(|| {
        CliError::Unsupported("strong-error needs the ginzburg-landau model".into())
    })?;
    let study = StrongErrorConfig {
        y0: cfg.x0[0],
        i0: r.i0(),
        horizon: cfg.horizon,
        fine_level: cfg.fine_level,
        levels: cfg.levels.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
    };
    let report = strong_error(&coeffs, &r.generator, &study, &r.bem())?;
    out.csv(
        "strong_error.csv",
        &["delta".into(), "rms_error".into()],
        report.points.iter().map(|p| vec![num(p.delta), num(p.rms_error)]),
    )?;
    Ok((serde_json::to_value(&report).expect("serializable"), statuses(cfg.replicas, &[])))
}
