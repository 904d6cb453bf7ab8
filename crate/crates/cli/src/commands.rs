use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hilbert_ts::simulate::{
    acceptance_bands, generate_panel, run_rates, DgpSpec, RateConfig, RateReport, DEFAULT_SEED,
};
use hilbert_ts::spectral::default_j_max;
use hilbert_ts::{
    center_panel, compute_scores, eigendecompose, estimate_dimension, norm, s_hat_dual, s_hat_grid, CurvePanel,
    DimensionMethod, EigenSystem, LagSpec, Normalizer,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, fmt_num, ingest_panel, panel_to_csv, table_to_csv, write_file};

/// Above this grid size the dual Gram path is used.
pub const GRID_PATH_MAX_M: usize = 512;

#[derive(Debug, Parser)]
#[command(name = "hilbert-ts", version, about = "Noise-robust spectral estimation for curve time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate eigenvalues, eigenfunctions, dimension and scores from a panel CSV.
    Estimate(EstimateArgs),
    /// Draw one panel from a generator spec.
    Simulate(SimulateArgs),
    /// Monte Carlo convergence rates over a range of sample sizes.
    Rates(RatesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizerArg {
    Sum,
    Mean,
    Paper,
}

impl From<NormalizerArg> for Normalizer {
    fn from(n: NormalizerArg) -> Self {
        match n {
            NormalizerArg::Sum => Normalizer::Sum,
            NormalizerArg::Mean => Normalizer::MeanOverLags,
            NormalizerArg::Paper => Normalizer::PaperRemark,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DimArg {
    Ratio,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Auto,
    Grid,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub lags: usize,
    #[arg(long, value_enum, default_value_t = NormalizerArg::Mean)]
    pub normalizer: NormalizerArg,
    #[arg(long, value_enum, default_value_t = DimArg::Ratio)]
    pub dim: DimArg,
    /// Unexplained share for `--dim threshold`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Largest dimension the ratio rule considers.
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long, value_enum, default_value_t = PathArg::Auto)]
    pub path: PathArg,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Recorded in the summary; estimation itself is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Generator spec; the built-in reference design when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024,2048")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Exit with status 3 when a slope leaves its acceptance band.
    #[arg(long)]
    pub assert: bool,
    /// Allow fewer than 100 replicates.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    pub format: FormatArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Estimate(args) => run_estimate(&args).map(|_| ()),
        Command::Simulate(args) => run_simulate(&args),
        Command::Rates(args) => run_rates_command(&args).map(|_| ()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub d_hat: usize,
    pub degenerate: bool,
    pub method: &'static str,
    pub tau: Option<f64>,
    pub j_max: usize,
    pub p: usize,
    pub normalizer: &'static str,
    pub path: &'static str,
    pub n: usize,
    pub m: usize,
    pub eigenpairs: usize,
    pub mean_norm: f64,
    pub seed: u64,
    pub runtime_seconds: f64,
}

fn use_dual(choice: PathArg, n: usize, m: usize) -> bool {
    match choice {
        PathArg::Grid => false,
        PathArg::Dual => true,
        PathArg::Auto => m > GRID_PATH_MAX_M || m > 4 * n,
    }
}

fn dimension_method(args: &EstimateArgs) -> CliResult<DimensionMethod> {
    match (args.dim, args.tau) {
        (DimArg::Ratio, None) => Ok(DimensionMethod::Ratio),
        (DimArg::Ratio, Some(_)) => Err(CliError::Validation("--tau only applies to --dim threshold".into())),
        (DimArg::Threshold, Some(tau)) if (0.0..1.0).contains(&tau) => Ok(DimensionMethod::Threshold { tau }),
        (DimArg::Threshold, Some(tau)) => Err(CliError::Validation(format!("--tau must lie in [0, 1), got {tau}"))),
        (DimArg::Threshold, None) => Err(CliError::Validation("--dim threshold needs --tau".into())),
    }
}

fn estimate_panel(panel: &CurvePanel, lags: &LagSpec, dual: bool) -> CliResult<EigenSystem> {
    Ok(if dual { s_hat_dual(panel, lags)? } else { eigendecompose(&s_hat_grid(panel, lags)?)? })
}

pub fn run_estimate(args: &EstimateArgs) -> CliResult<EstimateSummary> {
    let started = Instant::now();
    let method = dimension_method(args)?;
    let lags = LagSpec::new(args.lags, args.normalizer.into())?;
    if args.j_max == Some(0) {
        return Err(CliError::Validation("--j-max must be at least 1".into()));
    }
    let panel = ingest_panel(&args.input)?;
    lags.check(panel.n())?;
    let (centered, mean) = center_panel(&panel);
    let dual = use_dual(args.path, panel.n(), panel.m());
    let eig = estimate_panel(&centered, &lags, dual)?;
    let j_max = args.j_max.unwrap_or_else(|| default_j_max(eig.count()));
    let dim = estimate_dimension(&eig, method, j_max)?;
    let d = dim.d.min(eig.count());
    let scores = compute_scores(&centered, &eig, d)?;

    ensure_dir(&args.out)?;
    let q = panel.quadrature();
    let eigenvalues = eig.values().iter().enumerate().map(|(j, &v)| ((j + 1).to_string(), vec![v]));
    write_file(&args.out.join("eigenvalues.csv"), &table_to_csv(&["j".into(), "theta".into()], eigenvalues))?;

    let shown = eig.count().min(j_max + 1).max(d);
    let mut header = vec!["u".to_string()];
    header.extend((1..=shown).map(|j| format!("psi_{j}")));
    let rows =
        (0..q.len()).map(|i| (fmt_num(q.points()[i]), (0..shown).map(|j| eig.vectors()[j].coeffs()[i]).collect()));
    write_file(&args.out.join("eigenfunctions.csv"), &table_to_csv(&header, rows))?;

    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|j| format!("score_{j}")));
    let rows = (0..scores.n()).map(|t| (t.to_string(), scores.values.row(t).iter().copied().collect()));
    write_file(&args.out.join("scores.csv"), &table_to_csv(&header, rows))?;

    let rows = (0..q.len()).map(|i| (fmt_num(q.points()[i]), vec![mean.coeffs()[i]]));
    write_file(&args.out.join("mean.csv"), &table_to_csv(&["u".into(), "mean".into()], rows))?;

    let summary = EstimateSummary {
        d_hat: d,
        degenerate: dim.degenerate,
        method: method.name(),
        tau: args.tau,
        j_max,
        p: lags.max_lag(),
        normalizer: lags.normalizer().name(),
        path: if dual { "dual" } else { "grid" },
        n: panel.n(),
        m: panel.m(),
        eigenpairs: eig.count(),
        mean_norm: norm(&mean),
        seed: args.seed,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    write_file(path, &(text + "\n"))
}

pub fn read_spec(path: &Path) -> CliResult<DgpSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: DgpSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: invalid generator spec: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct TruthFile<'a> {
    spec: &'a DgpSpec,
    theta: &'a [f64],
    order: &'a [usize],
}

pub fn run_simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut spec = read_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let sim = generate_panel(&spec)?;
    ensure_dir(&args.out)?;
    write_file(&args.out.join("panel.csv"), &panel_to_csv(&sim.panel))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=spec.d).map(|j| format!("z_{j}")));
    let rows = (0..spec.n).map(|t| (t.to_string(), sim.scores.row(t).iter().copied().collect()));
    write_file(&args.out.join("scores.csv"), &table_to_csv(&header, rows))?;
    let truth = TruthFile { spec: &spec, theta: &sim.truth.theta, order: &sim.truth.order };
    write_json(&args.out.join("truth.json"), &truth)
}

pub fn run_rates_command(args: &RatesArgs) -> CliResult<RateReport> {
    let template = match &args.spec {
        Some(path) => read_spec(path)?,
        None => DgpSpec::reference(),
    };
    let mut config = RateConfig::new(template, args.n.clone(), args.reps, args.seed);
    config.force = args.force;
    if let Some(w) = args.workers {
        config.workers = w;
    }
    let report = run_rates(&config)?;
    ensure_dir(&args.out)?;
    if args.format != FormatArg::Json {
        report.write_csv(&args.out.join("rates.csv"))?;
    }
    if args.format != FormatArg::Csv {
        report.write_json(&args.out.join("slopes.json"))?;
    }
    let checks = report.check_bands(&acceptance_bands());
    for c in &checks {
        let s = report.summary(c.statistic);
        println!(
            "{:<20} slope {:>8.4} (se {:.4}) band [{:.2}, {:.2}] {}",
            c.statistic.name(),
            c.slope,
            s.stderr,
            c.lo,
            c.hi,
            if c.pass { "ok" } else { "OUTSIDE" }
        );
    }
    let accuracy: Vec<String> = report.dimension_accuracy.iter().map(|a| format!("{a:.3}")).collect();
    println!("dimension_accuracy   {}", accuracy.join(" "));
    if args.assert {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.statistic.name()).collect();
        if !failed.is_empty() {
            return Err(CliError::Assertion(format!("slopes outside acceptance bands: {}", failed.join(", "))));
        }
    }
    Ok(report)
}
