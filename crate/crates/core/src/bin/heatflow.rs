use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use heatflow::experiment::{run, ExperimentConfig, ExperimentKind, MANIFEST_NAME};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Flow,
    Deformation,
    Moments,
    Hermite,
    Beyond,
    PdeResidual,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Flow => ExperimentKind::Flow,
            Command::Deformation => ExperimentKind::Deformation,
            Command::Moments => ExperimentKind::Moments,
            Command::Hermite => ExperimentKind::Hermite,
            Command::Beyond => ExperimentKind::Beyond,
            Command::PdeResidual => ExperimentKind::PdeResidual,
        }
    }
}

/// Run a heat-flow experiment from a JSON config. Exits 0 when every
/// configured threshold passes, 1 when one fails and 2 on errors.
#[derive(Parser, Debug)]
#[command(name = "heatflow", version)]
struct Args {
    /// Experiment to run; must match the config's `experiment` field.
    #[arg(value_enum)]
    experiment: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    precision_bits: Option<u32>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, env = "HEATFLOW_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("heatflow: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: Args) -> heatflow::Result<bool> {
    #[cfg(feature = "parallel")]
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| heatflow::Error::ConfigInvalid(e.to_string()))?;
    }
    let mut cfg = ExperimentConfig::load(&args.config)?;
    let wanted: ExperimentKind = args.experiment.into();
    if cfg.experiment != wanted {
        return Err(heatflow::Error::ConfigInvalid(format!(
            "config is for `{}`, not `{}`",
            cfg.experiment.name(),
            wanted.name()
        )));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.outputs = o;
    }
    if let Some(m) = args.mc_samples {
        cfg.mc_samples = m;
    }
    if let Some(b) = args.precision_bits {
        cfg.precision_bits = Some(b);
    }
    let manifest = run(&cfg)?;
    for c in &manifest.checks {
        println!("{} {} = {:e} (bound {:e})", if c.pass { "PASS" } else { "FAIL" }, c.threshold, c.value, c.bound);
    }
    if let Some(e) = &manifest.error {
        eprintln!("heatflow: {e}");
    }
    println!("manifest: {}", cfg.outputs.join(MANIFEST_NAME).display());
    Ok(manifest.passed)
}
