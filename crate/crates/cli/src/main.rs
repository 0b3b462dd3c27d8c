use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use voidcell::coverage::ServingGain;
use voidcell::harness::{ExperimentConfig, ExperimentKind, OutputFormat, Severity, Side};

#[derive(Parser)]
#[command(name = "voidcell", version, about = "Void-cell and coverage experiments for Poisson cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated void probability against the closed forms.
    VoidProb(Common),
    /// Distribution of users per cell.
    CellPmf(Common),
    /// Simulated void probability against the lower and upper bounds.
    BoundsCheck(Common),
    /// Quadrat tests and intensities of randomly mapped PPPs.
    ConservationCheck(Common),
    /// K-function envelopes of the base stations that keep users.
    Remark2(Common),
    /// SIR coverage under the three interference models.
    Coverage(Common),
    /// Closed-form values only, no simulation.
    Formulas(Common),
    /// Print diagnostics for a config without running it.
    Validate {
        /// Experiment to validate as (defaults to the config's).
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServingGainArg {
    Reuse,
    Redraw,
}

#[derive(Args, Default)]
struct Common {
    /// Flat TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base stations per km².
    #[arg(long)]
    lambda_b: Option<f64>,
    /// Users per km².
    #[arg(long)]
    lambda_u: Option<f64>,
    /// Comma-separated λ_U/λ_B values at fixed λ_U.
    #[arg(long, value_delimiter = ',')]
    ratio_grid: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Nakagami fading parameter.
    #[arg(long)]
    m: Option<f64>,
    /// Shadowing mean of ln H.
    #[arg(long)]
    mu: Option<f64>,
    /// Shadowing standard deviation in dB.
    #[arg(long, group = "shadow")]
    sigma_db: Option<f64>,
    /// Shadowing variance in dB.
    #[arg(long, group = "shadow")]
    sigma2_db: Option<f64>,
    /// Shadowing variance of ln H.
    #[arg(long, group = "shadow")]
    sigma2_ln: Option<f64>,
    /// nearest | unit | lognormal:MU,SIG2
    #[arg(long)]
    law: Option<String>,
    /// SIR threshold.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    /// all-bs | void-aware | thinned-ppp (default: all three)
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_enum)]
    serving_gain: Option<ServingGainArg>,
    #[arg(long)]
    reps: Option<u64>,
    /// `auto` or a length in km.
    #[arg(long)]
    side: Option<Side>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target 95% half-width for replication sizing.
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n_envelope: Option<usize>,
    /// deterministic:T | lognormal:MU,SIG2 | channel
    #[arg(long)]
    mark: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn build(&self, experiment: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(e) = experiment {
            c.experiment = e;
        }
        if self.sigma_db.is_some() || self.sigma2_db.is_some() || self.sigma2_ln.is_some() {
            c.sigma_db = self.sigma_db;
            c.sigma2_db = self.sigma2_db;
            c.sigma2_ln = self.sigma2_ln;
        }
        set(&mut c.lambda_b, self.lambda_b.map(Some));
        set(&mut c.lambda_u, self.lambda_u);
        set(&mut c.ratio_grid, self.ratio_grid.clone().map(Some));
        set(&mut c.alpha, self.alpha);
        set(&mut c.m, self.m);
        set(&mut c.mu, self.mu);
        set(&mut c.law, self.law.clone());
        set(&mut c.beta, self.beta);
        set(&mut c.beta_grid, self.beta_grid.clone().map(Some));
        set(&mut c.model, self.model.clone().map(Some));
        set(
            &mut c.serving_gain,
            self.serving_gain.map(|s| match s {
                ServingGainArg::Reuse => ServingGain::Reuse,
                ServingGainArg::Redraw => ServingGain::Redraw,
            }),
        );
        set(&mut c.reps, self.reps.map(Some));
        set(&mut c.side, self.side);
        set(&mut c.seed, self.seed);
        set(&mut c.half_width, self.half_width);
        set(&mut c.n_envelope, self.n_envelope);
        set(&mut c.mark, self.mark.clone());
        set(&mut c.out, self.out.clone().map(Some));
        set(
            &mut c.format,
            self.format.map(|f| match f {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            }),
        );
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(common: &Common, kind: ExperimentKind) -> Result<ExitCode> {
    let cfg = common.build(Some(kind))?;
    let start = Instant::now();
    let out = match cfg.run() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.out {
        Some(path) => {
            out.write_to_path(cfg.format, path).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            out.write(cfg.format, &mut lock)?;
            lock.flush()?;
        }
    }
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

fn validate(common: &Common, experiment: Option<&str>) -> Result<ExitCode> {
    let kind = experiment.map(str::parse::<ExperimentKind>).transpose()?;
    let cfg = common.build(kind)?;
    let diags = cfg.validate();
    for d in &diags {
        println!("{d}");
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        Ok(ExitCode::from(2))
    } else {
        if diags.is_empty() {
            println!("ok");
        }
        Ok(ExitCode::SUCCESS)
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::VoidProb(c) => run(c, ExperimentKind::VoidProb),
        Command::CellPmf(c) => run(c, ExperimentKind::CellPmf),
        Command::BoundsCheck(c) => run(c, ExperimentKind::BoundsCheck),
        Command::ConservationCheck(c) => run(c, ExperimentKind::ConservationCheck),
        Command::Remark2(c) => run(c, ExperimentKind::Remark2),
        Command::Coverage(c) => run(c, ExperimentKind::Coverage),
        Command::Formulas(c) => run(c, ExperimentKind::Formulas),
        Command::Validate { experiment, common } => validate(common, experiment.as_deref()),
    }
}
