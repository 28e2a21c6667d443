use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybrid_bem_cli::{execute, parse_config, CliError, Command, PartialConfig};

/// Backward Euler-Maruyama experiments for SDEs with Markovian switching.
#[derive(Debug, Parser)]
#[command(name = "hybrid-bem", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: planar-switching, ginzburg-landau or divergence.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Treat a failed stability hypothesis as an error.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Initial regime, numbered from 1.
    #[arg(long)]
    i0: Option<usize>,
    /// Second initial point for `contraction`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y0: Option<Vec<f64>>,
    /// Moment / transport exponent in (0, 1].
    #[arg(long)]
    p: Option<f64>,
}

impl Cli {
    fn overrides(&self) -> PartialConfig {
        PartialConfig {
            model: self.model.clone(),
            seed: self.seed,
            strict: self.strict.then_some(true),
            delta: self.delta,
            steps: self.steps,
            replicas: self.replicas,
            x0: self.x0.clone(),
            i0: self.i0,
            y0: self.y0.clone(),
            p: self.p,
            ..PartialConfig::default()
        }
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Unsupported(format!("cannot set thread count: {e}")))?;
    }
    let preset = match (&cli.preset, &cli.config) {
        (Some(p), _) => Some(p.as_str()),
        (None, Some(_)) => None,
        (None, None) => Some(cli.command.default_preset()),
    };
    let resolved = parse_config(preset, cli.config.as_deref(), cli.overrides())?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    execute(cli.command, &resolved, &cli.out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.to_json()).expect("serializable"));
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
