use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halfspace_cli::config::{Command, KernelName, PointSpec};
use halfspace_cli::{dispatch, emit, RunConfig, RunError};

#[derive(Parser, Debug)]
#[command(name = "halfspace")]
#[command(
    about = "Kernels, verification suites and simulations for drifted hyperbolic Brownian motion in a half-space"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run the command named in the config file
    Run(Common),
    /// Evaluate kernel values to CSV
    Eval {
        #[command(flatten)]
        common: Common,
        /// Kernel for a single point given on the command line
        #[arg(long, value_enum)]
        kernel: Option<KernelArg>,
        /// Comma-separated coordinates of x
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Option<Vec<f64>>,
        /// Comma-separated coordinates of y
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Option<Vec<f64>>,
        /// Time for the transition and killed densities
        #[arg(long)]
        t: Option<f64>,
    },
    /// Sweep one kernel over a grid to CSV
    Table(Common),
    /// Run acceptance suites and write a JSON report
    Verify {
        /// Suite names or criterion ids (AC1..AC13); `all` runs every suite
        suites: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo estimator to CSV plus a JSON summary
    Simulate(Common),
    /// Finite-difference residuals of kernel integrals to CSV
    PdeCheck(Common),
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum KernelArg {
    Transition,
    Killed,
    Potential,
    Green,
    GlobalPoisson,
    Poisson,
    LambdaPoisson,
}

impl From<KernelArg> for KernelName {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Transition => KernelName::Transition,
            KernelArg::Killed => KernelName::Killed,
            KernelArg::Potential => KernelName::Potential,
            KernelArg::Green => KernelName::Green,
            KernelArg::GlobalPoisson => KernelName::GlobalPoisson,
            KernelArg::Poisson => KernelName::Poisson,
            KernelArg::LambdaPoisson => KernelName::LambdaPoisson,
        }
    }
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Relative quadrature tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, command: Option<Command>) -> Result<RunConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
            let cfg = RunConfig::from_toml(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            if let Some(c) = command {
                if cfg.command != c {
                    return Err(RunError::Config(format!(
                        "{} describes a {} run, not {}",
                        path.display(),
                        cfg.command.name(),
                        c.name()
                    )));
                }
            }
            cfg
        }
        None => match command {
            Some(c) => RunConfig::new(c),
            None => return Err(RunError::Config("run needs --config".into())),
        },
    };
    let p = cfg.params;
    let n = common.n.unwrap_or(p.n());
    let mu = common.mu.unwrap_or(p.mu());
    let lambda = common.lambda.unwrap_or(p.lambda());
    cfg.params = halfspace::geometry::ModelParams::new(n, mu)
        .and_then(|p| p.with_lambda(lambda))
        .map_err(|e| RunError::Config(e.to_string()))?;
    if let Some(s) = common.seed {
        cfg.mc.seed = s;
    }
    if let Some(k) = common.paths {
        cfg.mc.n_paths = k;
    }
    if let Some(dt) = common.dt {
        cfg.mc.dt = dt;
    }
    if let Some(tol) = common.tol {
        cfg.quad.tol = tol;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn build(cli: Cli) -> Result<RunConfig, RunError> {
    match cli.command {
        Sub::Run(c) => load(&c, None),
        Sub::Eval {
            common,
            kernel,
            x,
            y,
            t,
        } => {
            let mut cfg = load(&common, Some(Command::Eval))?;
            if let Some(k) = kernel {
                let x = x.ok_or_else(|| RunError::Config("--kernel needs --x".into()))?;
                cfg.points.push(PointSpec {
                    kernel: k.into(),
                    x,
                    y: y.unwrap_or_default(),
                    t,
                    wall: None,
                    limit: None,
                });
            } else if x.is_some() || y.is_some() || t.is_some() {
                return Err(RunError::Config("--x, --y and --t need --kernel".into()));
            }
            Ok(cfg)
        }
        Sub::Table(c) => load(&c, Some(Command::Table)),
        Sub::Verify { suites, common } => {
            let mut cfg = load(&common, Some(Command::Verify))?;
            if !suites.is_empty() {
                cfg.verify.suites = suites;
            }
            Ok(cfg)
        }
        Sub::Simulate(c) => load(&c, Some(Command::Simulate)),
        Sub::PdeCheck(c) => load(&c, Some(Command::PdeCheck)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = build(cli).and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                eprintln!("{line}");
            }
            if let Err(e) = emit(&outcome) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(if outcome.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
