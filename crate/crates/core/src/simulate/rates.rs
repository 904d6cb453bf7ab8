//! Monte Carlo harness: median error per sample size and log-log slopes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_panel, true_spectrum, DgpSpec, GroundTruth};
use crate::covariance::{lag_autocov, s_hat_grid, LagSpec};
use crate::error::{Error, Result};
use crate::hilbert::{center_panel, hs_norm, norm};
use crate::spectral::{default_j_max, eigendecompose, estimate_dimension, sign_align, DimensionMethod};
use crate::subspace::{project, projector_distance, SubspaceBasis};

pub const MIN_REPS: usize = 100;
pub const MIN_SIZES: usize = 4;
/// Largest tolerated fraction of failed replicates.
const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `‖Ŝ − S‖_HS`
    OperatorError,
    /// `max_{j≤d} |θ̂_j − θ_j|`
    EigenvalueError,
    /// `max_{j≤d} ‖ψ̂_j − ψ_j‖` after sign alignment
    EigenvectorError,
    /// `θ̂_{d+1}`
    SpuriousEigenvalue,
    /// `‖Π_M ψ̂_{d+1}‖`
    SpuriousProjection,
    /// projector distance between `M̂_d` and `M`
    SubspaceDistance,
}

impl Statistic {
    pub const ALL: [Statistic; 6] = [
        Statistic::OperatorError,
        Statistic::EigenvalueError,
        Statistic::EigenvectorError,
        Statistic::SpuriousEigenvalue,
        Statistic::SpuriousProjection,
        Statistic::SubspaceDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::OperatorError => "operator_error",
            Statistic::EigenvalueError => "eigenvalue_error",
            Statistic::EigenvectorError => "eigenvector_error",
            Statistic::SpuriousEigenvalue => "spurious_eigenvalue",
            Statistic::SpuriousProjection => "spurious_projection",
            Statistic::SubspaceDistance => "subspace_distance",
        }
    }

    /// Exponent `r` in `O_p(n^r)`.
    pub fn target_rate(self) -> f64 {
        match self {
            Statistic::SpuriousEigenvalue => -1.0,
            _ => -0.5,
        }
    }
}

/// Acceptable slope interval for one statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeBand {
    pub statistic: Statistic,
    pub lo: f64,
    pub hi: f64,
}

/// `±0.15` around `−1/2` for root-n statistics, `±0.35` around `−1` for `θ̂_{d+1}`.
pub fn acceptance_bands() -> Vec<SlopeBand> {
    Statistic::ALL
        .iter()
        .map(|&statistic| {
            let half = if statistic == Statistic::SpuriousEigenvalue { 0.35 } else { 0.15 };
            let r = statistic.target_rate();
            SlopeBand { statistic, lo: r - half, hi: r + half }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RateConfig {
    pub template: DgpSpec,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: usize,
    /// Allows fewer than [`MIN_REPS`] replicates, for smoke runs.
    pub force: bool,
}

impl RateConfig {
    pub fn new(template: DgpSpec, n_list: Vec<usize>, reps: usize, master_seed: u64) -> Self {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        RateConfig { template, n_list, reps, master_seed, workers, force: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        if self.reps == 0 || (self.reps < MIN_REPS && !self.force) {
            return Err(Error::InvalidSpec(format!("reps below minimum ({MIN_REPS})")));
        }
        if self.workers == 0 {
            return Err(Error::InvalidSpec("workers must be at least 1".into()));
        }
        if self.n_list.len() < MIN_SIZES {
            return Err(Error::InvalidSpec(format!("need at least {MIN_SIZES} sample sizes")));
        }
        if self.n_list[0] < 2 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("sample sizes must be increasing and at least 2".into()));
        }
        let ratios: Vec<f64> = self.n_list.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
        if ratios.iter().any(|r| (r / ratios[0] - 1.0).abs() > 0.1) {
            return Err(Error::InvalidSpec("sample sizes must form a geometric sequence".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of replicate `rep` at sample size `n`. Depends only on its arguments,
/// so results do not depend on scheduling.
pub fn replicate_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64((n as u64).rotate_left(32) ^ splitmix64(rep as u64)))
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    stats: [f64; 6],
    d_hat: usize,
}

fn run_replicate(spec: &DgpSpec, truth: &GroundTruth) -> Result<Outcome> {
    let d = truth.d();
    let sim = generate_panel(spec)?;
    let (centered, _) = center_panel(&sim.panel);
    let s_hat = s_hat_grid(&centered, &LagSpec::single())?;
    let operator_error = hs_norm(&s_hat.sub(&truth.s_true)?);
    let eig = eigendecompose(&s_hat)?;
    if eig.count() <= d {
        return Err(Error::Contract(format!("only {} eigenpairs above the rank cutoff, need {}", eig.count(), d + 1)));
    }
    let aligned = sign_align(&eig, &truth.psi)?.system;
    let mut eigenvalue_error: f64 = 0.0;
    let mut eigenvector_error: f64 = 0.0;
    for j in 0..d {
        eigenvalue_error = eigenvalue_error.max((eig.values()[j] - truth.theta[j]).abs());
        eigenvector_error = eigenvector_error.max(norm(&aligned.vectors()[j].sub(&truth.psi[j])?));
    }
    let spurious_eigenvalue = eig.values()[d];
    let (_, spurious_projection) = project(&eig.vectors()[d], &truth.m_basis)?;
    let subspace_distance = projector_distance(&SubspaceBasis::from_eigensystem(&eig, d)?, &truth.m_basis)?;
    let d_hat = estimate_dimension(&eig, DimensionMethod::Ratio, default_j_max(eig.count()))?.d;
    Ok(Outcome {
        stats: [
            operator_error,
            eigenvalue_error,
            eigenvector_error,
            spurious_eigenvalue,
            spurious_projection,
            subspace_distance,
        ],
        d_hat,
    })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Least-squares slope of `y` on `x` and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let stderr = if k > 2.0 { (rss / (k - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, stderr)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticSummary {
    pub statistic: Statistic,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandCheck {
    pub statistic: Statistic,
    pub slope: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub summaries: Vec<StatisticSummary>,
    /// Fraction of replicates with `d̂ = d`, per sample size.
    pub dimension_accuracy: Vec<f64>,
    /// Failed replicates per sample size.
    pub failures: Vec<usize>,
}

impl RateReport {
    pub fn summary(&self, statistic: Statistic) -> &StatisticSummary {
        self.summaries.iter().find(|s| s.statistic == statistic).expect("every statistic is summarized")
    }

    pub fn check_bands(&self, bands: &[SlopeBand]) -> Vec<BandCheck> {
        bands
            .iter()
            .map(|b| {
                let slope = self.summary(b.statistic).slope;
                BandCheck { statistic: b.statistic, slope, lo: b.lo, hi: b.hi, pass: slope >= b.lo && slope <= b.hi }
            })
            .collect()
    }

    /// Long format `statistic,n,value`, one row per median and per accuracy.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("statistic,n,value\n");
        for s in &self.summaries {
            for (n, v) in self.n_list.iter().zip(&s.medians) {
                let _ = writeln!(out, "{},{},{:.16e}", s.statistic.name(), n, v);
            }
        }
        for (n, v) in self.n_list.iter().zip(&self.dimension_accuracy) {
            let _ = writeln!(out, "dimension_accuracy,{},{:.16e}", n, v);
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Fit<'a> {
            slope: f64,
            stderr: f64,
            target: f64,
            medians: &'a [f64],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            reps: usize,
            master_seed: u64,
            n_list: &'a [usize],
            slopes: BTreeMap<&'static str, Fit<'a>>,
            dimension_accuracy: &'a [f64],
            failures: &'a [usize],
        }
        let slopes = self
            .summaries
            .iter()
            .map(|s| {
                let fit =
                    Fit { slope: s.slope, stderr: s.stderr, target: s.statistic.target_rate(), medians: &s.medians };
                (s.statistic.name(), fit)
            })
            .collect();
        let doc = Doc {
            reps: self.reps,
            master_seed: self.master_seed,
            n_list: &self.n_list,
            slopes,
            dimension_accuracy: &self.dimension_accuracy,
            failures: &self.failures,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)
            .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))
}

/// Runs `reps` replicates per sample size. Replicates that error are counted;
/// more than 1% failures overall aborts the run.
pub fn run_rates(config: &RateConfig) -> Result<RateReport> {
    config.validate()?;
    let truth = true_spectrum(&config.template)?;
    let d = truth.d();
    let tasks: Vec<(usize, usize)> =
        (0..config.n_list.len()).flat_map(|i| (0..config.reps).map(move |r| (i, r))).collect();
    let outcomes: Vec<Result<Outcome>> = thread_pool(config.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|&(i, rep)| {
                let n = config.n_list[i];
                let spec = config.template.with_n(n).with_seed(replicate_seed(config.master_seed, n, rep));
                run_replicate(&spec, &truth)
            })
            .collect()
    });

    let total = outcomes.len();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }

    let sizes = config.n_list.len();
    let mut per_size: Vec<Vec<Outcome>> = vec![Vec::with_capacity(config.reps); sizes];
    let mut failures = vec![0; sizes];
    for (&(i, _), o) in tasks.iter().zip(outcomes) {
        match o {
            Ok(o) => per_size[i].push(o),
            Err(_) => failures[i] += 1,
        }
    }
    if per_size.iter().any(|v| v.is_empty()) {
        return Err(Error::TooManyFailures { failed, total });
    }

    let log_n: Vec<f64> = config.n_list.iter().map(|&n| (n as f64).ln()).collect();
    let mut summaries = Vec::with_capacity(Statistic::ALL.len());
    for (k, &statistic) in Statistic::ALL.iter().enumerate() {
        let medians: Vec<f64> =
            per_size.iter().map(|v| median(&mut v.iter().map(|o| o.stats[k]).collect::<Vec<_>>())).collect();
        if medians.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Contract(format!(
                "{} has a nonpositive median; no slope can be fitted",
                statistic.name()
            )));
        }
        let log_m: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
        let (slope, stderr) = ols_slope(&log_n, &log_m);
        summaries.push(StatisticSummary { statistic, medians, slope, stderr });
    }
    let dimension_accuracy =
        per_size.iter().map(|v| v.iter().filter(|o| o.d_hat == d).count() as f64 / v.len() as f64).collect();

    Ok(RateReport {
        n_list: config.n_list.clone(),
        reps: config.reps,
        master_seed: config.master_seed,
        summaries,
        dimension_accuracy,
        failures,
    })
}

/// Compares eigenvalue recovery by `Ŝ` against the lag-zero covariance `R̂₀`,
/// which absorbs the noise covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseFilterReport {
    pub reps: usize,
    /// Mean of `|θ̂_j − θ_j| / θ_j` over replicates, per `j ≤ d`.
    pub s_hat_relative_error: Vec<f64>,
    /// Mean of `(θ̂_j − θ_j) / θ_j`.
    pub s_hat_relative_bias: Vec<f64>,
    /// `(mean λ̂_j − λ_j) / λ_j` for the top eigenvalues of `R̂₀`.
    pub r0_relative_bias: Vec<f64>,
}

impl NoiseFilterReport {
    /// True when every `Ŝ` error is at most `ratio` times the matching `|R̂₀|` bias.
    pub fn s_hat_beats_r0(&self, ratio: f64) -> bool {
        self.s_hat_relative_error.iter().zip(&self.r0_relative_bias).all(|(s, r)| *s <= ratio * r.abs())
    }
}

pub fn noise_filter_comparison(spec: &DgpSpec, reps: usize, master_seed: u64) -> Result<NoiseFilterReport> {
    let truth = true_spectrum(spec)?;
    let d = truth.d();
    type Row = (Vec<f64>, Vec<f64>, Vec<f64>);
    let rows: Vec<Result<Row>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sim = generate_panel(&spec.with_seed(replicate_seed(master_seed, spec.n, rep)))?;
            let (centered, _) = center_panel(&sim.panel);
            let s_eig = eigendecompose(&s_hat_grid(&centered, &LagSpec::single())?)?;
            let r0_eig = eigendecompose(&lag_autocov(&centered, 0)?)?;
            if s_eig.count() < d || r0_eig.count() < d {
                return Err(Error::Contract("fewer than d eigenpairs".into()));
            }
            let theta = &truth.theta;
            let abs = (0..d).map(|j| (s_eig.values()[j] - theta[j]).abs() / theta[j]).collect();
            let signed = (0..d).map(|j| (s_eig.values()[j] - theta[j]) / theta[j]).collect();
            let r0 = (0..d).map(|j| r0_eig.values()[j]).collect();
            Ok((abs, signed, r0))
        })
        .collect();
    let mut abs = vec![0.0; d];
    let mut signed = vec![0.0; d];
    let mut r0 = vec![0.0; d];
    for row in rows {
        let (a, s, l) = row?;
        for j in 0..d {
            abs[j] += a[j] / reps as f64;
            signed[j] += s[j] / reps as f64;
            r0[j] += l[j] / reps as f64;
        }
    }
    let r0_relative_bias = (0..d).map(|j| (r0[j] - truth.lambdas[j]) / truth.lambdas[j]).collect();
    Ok(NoiseFilterReport { reps, s_hat_relative_error: abs, s_hat_relative_bias: signed, r0_relative_bias })
}
