//! Finite-rank data generating processes with analytically known spectra.
//!
//! The signal is `ξ_t = Σ_{j≤d} Z_tj φ_j` with independent stationary Gaussian
//! AR(1) scores `Z_{t+1,j} = a_j Z_tj + η_tj`, `Var Z_tj = λ_j`. The lag-one
//! autocovariance is then `R₁ = Σ_j a_j λ_j φ_j ⊗ φ_j`, so `S = R₁R₁*` has
//! eigenvalues `θ_j = (a_j λ_j)²` with eigenvectors `φ_j`.
//!
//! Gaussian AR(1) scores are an illustrative choice: they make the rates
//! observable but are not checked against any mixing condition.

mod rates;

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use rates::{
    acceptance_bands, noise_filter_comparison, ols_slope, replicate_seed, run_rates, BandCheck, NoiseFilterReport,
    RateConfig, RateReport, SlopeBand, Statistic, StatisticSummary, MIN_REPS, MIN_SIZES,
};

use crate::covariance::lag_autocov;
use crate::error::{Error, Result};
use crate::hilbert::{center_panel, inner_product, CurvePanel, HVector, OperatorRep, Quadrature};
use crate::subspace::SubspaceBasis;

/// Number of directions outside the signal span probed by
/// [`kernel_orthogonality_check`].
pub const PROBE_DIRECTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// `√2 sin(2πu)`, `√2 cos(2πu)`, `√2 sin(4πu)`, …
    Fourier,
    /// Shifted Legendre polynomials, orthonormalized on the grid.
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    /// Independent `N(0, σ²)` at every grid point.
    GridWhite,
    /// `σ Σ_{l≤r} e_l φ_{d+l}` with independent standard normal `e_l`.
    FiniteRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    #[serde(default)]
    pub r: usize,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { kind: NoiseKind::None, sigma: 0.0, r: 0 }
    }

    pub fn grid_white(sigma: f64) -> Self {
        NoiseSpec { kind: NoiseKind::GridWhite, sigma, r: 0 }
    }

    pub fn finite_rank(sigma: f64, r: usize) -> Self {
        NoiseSpec { kind: NoiseKind::FiniteRank, sigma, r }
    }

    fn extra_directions(&self) -> usize {
        match self.kind {
            NoiseKind::FiniteRank => self.r,
            _ => 0,
        }
    }
}

/// Simulation design. Field names match the JSON schema read by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub d: usize,
    pub lambdas: Vec<f64>,
    pub ar_coeffs: Vec<f64>,
    pub basis: BasisKind,
    pub m: usize,
    pub noise: NoiseSpec,
    pub n: usize,
    pub seed: u64,
}

impl DgpSpec {
    /// `d = 2`, `λ = (3, 1)`, `a = (0.8, 0.5)`, Fourier basis on an 11-point
    /// grid over `[0, 1]`, grid-white noise with `σ = 0.5`.
    pub fn reference() -> Self {
        DgpSpec {
            d: 2,
            lambdas: vec![3.0, 1.0],
            ar_coeffs: vec![0.8, 0.5],
            basis: BasisKind::Fourier,
            m: 11,
            noise: NoiseSpec::grid_white(0.5),
            n: 1024,
            seed: crate::simulate::DEFAULT_SEED,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        DgpSpec { n, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DgpSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.lambdas.len() != self.d || self.ar_coeffs.len() != self.d {
            return bad(format!(
                "expected {} lambdas and ar_coeffs, got {} and {}",
                self.d,
                self.lambdas.len(),
                self.ar_coeffs.len()
            ));
        }
        if self.lambdas.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return bad("lambdas must be finite and positive".into());
        }
        if self.lambdas.windows(2).any(|w| w[1] >= w[0]) {
            return bad("lambdas must be strictly decreasing".into());
        }
        for (j, a) in self.ar_coeffs.iter().enumerate() {
            if !a.is_finite() || a.abs() >= 1.0 {
                return bad(format!("ar_coeffs[{j}] = {a} is outside (-1, 1)"));
            }
            if *a == 0.0 {
                return bad(format!(
                    "ar_coeffs[{j}] is zero: the score has no lag-one correlation, so lagged covariances cannot see direction {j}"
                ));
            }
        }
        if self.n < 2 {
            return bad("n must be at least 2".into());
        }
        if !self.noise.sigma.is_finite() || self.noise.sigma < 0.0 {
            return bad("noise sigma must be finite and nonnegative".into());
        }
        if self.noise.kind == NoiseKind::FiniteRank && self.noise.r == 0 {
            return bad("finite-rank noise needs r >= 1".into());
        }
        let needed = self.d + self.noise.extra_directions().max(1);
        if self.m < needed.max(2) {
            return bad(format!("grid size m = {} is too small, need at least {needed}", self.m));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Result<Arc<Quadrature>> {
        Ok(Quadrature::uniform(self.m, 0.0, 1.0)?.shared())
    }

    /// The first `count` basis functions, orthonormal in the grid inner product.
    pub fn basis_functions(&self, quadrature: &Arc<Quadrature>, count: usize) -> Result<Vec<HVector>> {
        basis_functions(self.basis, quadrature, count)
    }
}

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_160_901;

fn raw_basis(kind: BasisKind, quadrature: &Arc<Quadrature>, k: usize) -> Result<HVector> {
    use std::f64::consts::{PI, SQRT_2};
    match kind {
        BasisKind::Fourier => {
            let freq = (k / 2 + 1) as f64;
            if k.is_multiple_of(2) {
                HVector::from_fn(quadrature.clone(), |u| SQRT_2 * (2.0 * PI * freq * u).sin())
            } else {
                HVector::from_fn(quadrature.clone(), |u| SQRT_2 * (2.0 * PI * freq * u).cos())
            }
        }
        BasisKind::Legendre => HVector::from_fn(quadrature.clone(), |u| {
            let x = 2.0 * u - 1.0;
            let (mut prev, mut cur) = (1.0, x);
            if k == 0 {
                return 1.0;
            }
            for j in 1..k {
                let j = j as f64;
                let next = ((2.0 * j + 1.0) * x * cur - j * prev) / (j + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }),
    }
}

pub fn basis_functions(kind: BasisKind, quadrature: &Arc<Quadrature>, count: usize) -> Result<Vec<HVector>> {
    let raw = (0..count).map(|k| raw_basis(kind, quadrature, k)).collect::<Result<Vec<_>>>()?;
    let basis = SubspaceBasis::orthonormalize(&raw)?;
    if basis.dim() < count {
        return Err(Error::InvalidSpec(format!(
            "grid of {} points cannot resolve {count} independent basis functions",
            quadrature.len()
        )));
    }
    Ok(basis.vectors().to_vec())
}

/// Population quantities of a [`DgpSpec`].
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `θ_j = (a_j λ_j)²`, nonincreasing.
    pub theta: Vec<f64>,
    /// Eigenvectors of `S` matching `theta`.
    pub psi: Vec<HVector>,
    /// Position in the generator's ordering of each entry of `theta`.
    pub order: Vec<usize>,
    /// `φ_j` in generator order.
    pub phi: Vec<HVector>,
    pub lambdas: Vec<f64>,
    pub r0_true: OperatorRep,
    pub r1_true: OperatorRep,
    pub s_true: OperatorRep,
    pub m_basis: SubspaceBasis,
}

impl GroundTruth {
    pub fn d(&self) -> usize {
        self.theta.len()
    }
}

pub fn true_spectrum(spec: &DgpSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let quadrature = spec.quadrature()?;
    let phi = spec.basis_functions(&quadrature, spec.d)?;
    let strengths: Vec<f64> = spec.ar_coeffs.iter().zip(&spec.lambdas).map(|(a, l)| a * l).collect();
    let mut order: Vec<usize> = (0..spec.d).collect();
    order.sort_by(|&i, &j| strengths[j].abs().total_cmp(&strengths[i].abs()));
    let top = strengths[order[0]].abs();
    for w in order.windows(2) {
        if strengths[w[0]].abs() - strengths[w[1]].abs() <= 1e-12 * top {
            return Err(Error::Contract(format!(
                "|a_j λ_j| ties between components {} and {}; eigenvectors of S are not identifiable",
                w[0], w[1]
            )));
        }
    }
    let theta: Vec<f64> = order.iter().map(|&j| strengths[j].powi(2)).collect();
    let psi: Vec<HVector> = order.iter().map(|&j| phi[j].clone()).collect();
    let r0_true = OperatorRep::spectral_sum(&spec.lambdas, &phi, quadrature.clone())?;
    let r1_true = OperatorRep::spectral_sum(&strengths, &phi, quadrature.clone())?;
    let s_true = OperatorRep::spectral_sum(&theta, &psi, quadrature.clone())?;
    let m_basis = SubspaceBasis::with_quadrature(psi.clone(), quadrature)?;
    Ok(GroundTruth { theta, psi, order, phi, lambdas: spec.lambdas.clone(), r0_true, r1_true, s_true, m_basis })
}

/// Output of [`generate_panel`].
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    /// Observations `ζ_t = ξ_t + ε_t`.
    pub panel: CurvePanel,
    /// Noise-free signal `ξ_t` on the grid.
    pub signal: DMatrix<f64>,
    /// True scores `Z_tj` in generator order, `n × d`.
    pub scores: DMatrix<f64>,
    pub truth: GroundTruth,
}

impl SimulatedPanel {
    pub fn noise(&self) -> DMatrix<f64> {
        self.panel.values() - &self.signal
    }
}

/// Draws one sample. Scores are drawn first (all `t`), then noise, so two
/// specs differing only in their noise share the same signal.
pub fn generate_panel(spec: &DgpSpec) -> Result<SimulatedPanel> {
    let truth = true_spectrum(spec)?;
    let quadrature = truth.m_basis.quadrature().clone();
    let extra = spec.noise.extra_directions();
    let basis = spec.basis_functions(&quadrature, spec.d + extra)?;
    let (n, d, m) = (spec.n, spec.d, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut scores = DMatrix::zeros(n, d);
    for j in 0..d {
        scores[(0, j)] = spec.lambdas[j].sqrt() * normal();
    }
    let innovation_sd: Vec<f64> =
        spec.lambdas.iter().zip(&spec.ar_coeffs).map(|(l, a)| (l * (1.0 - a * a)).sqrt()).collect();
    for t in 1..n {
        for j in 0..d {
            scores[(t, j)] = spec.ar_coeffs[j] * scores[(t - 1, j)] + innovation_sd[j] * normal();
        }
    }

    let mut phi = DMatrix::zeros(m, d + extra);
    for (j, v) in basis.iter().enumerate() {
        phi.set_column(j, v.coeffs());
    }
    let signal = &scores * phi.columns(0, d).transpose();
    let sigma = spec.noise.sigma;
    let mut values = signal.clone();
    match spec.noise.kind {
        NoiseKind::None => {}
        NoiseKind::GridWhite => {
            for t in 0..n {
                for i in 0..m {
                    values[(t, i)] += sigma * normal();
                }
            }
        }
        NoiseKind::FiniteRank => {
            for t in 0..n {
                for l in 0..extra {
                    let e = sigma * normal();
                    for i in 0..m {
                        values[(t, i)] += e * phi[(i, d + l)];
                    }
                }
            }
        }
    }
    let panel = CurvePanel::new(values, quadrature)?;
    Ok(SimulatedPanel { panel, signal, scores, truth })
}

/// Largest sample variance of `⟨ζ_t, e⟩` over probe directions `e`
/// orthogonal to the signal span, using `n_draws` observations. With no
/// noise the observations equal the signal, which lies in the span of the
/// covariance operator, so the variances vanish up to rounding.
pub fn kernel_orthogonality_check(spec: &DgpSpec, n_draws: usize) -> Result<f64> {
    let spec = spec.with_n(n_draws);
    let sim = generate_panel(&spec)?;
    let quadrature = sim.panel.quadrature().clone();
    let probes = PROBE_DIRECTIONS.min(spec.m - spec.d);
    let extra = spec.noise.extra_directions().max(probes);
    let basis = spec.basis_functions(&quadrature, spec.d + extra)?;
    let mut worst: f64 = 0.0;
    for dir in &basis[spec.d..spec.d + probes] {
        let series: Vec<f64> = (0..n_draws).map(|t| inner_product(&sim.panel.row(t), dir)).collect::<Result<_>>()?;
        worst = worst.max(sample_variance(&series));
    }
    Ok(worst)
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Summary of the uncentered two-dimensional example `ξ = (N(0,1), 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub sample_mean: [f64; 2],
    /// Covariance estimated from the centered sample.
    pub covariance: [[f64; 2]; 2],
    /// Unit vector spanning the kernel of the covariance.
    pub kernel_direction: [f64; 2],
    pub kernel_eigenvalue: f64,
    /// Fraction of raw draws orthogonal to the kernel direction.
    pub orthogonal_fraction: f64,
    /// Sample variances of the centered coordinates.
    pub centered_variance: [f64; 2],
}

/// A random element with nonzero mean need not lie in the closed range of its
/// covariance operator: here every draw has unit component along the kernel.
pub fn centering_counterexample(n_draws: usize, seed: u64) -> Result<CounterexampleReport> {
    let quadrature = Quadrature::euclidean(2)?.shared();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = DMatrix::from_fn(n_draws, 2, |_, j| if j == 0 { StandardNormal.sample(&mut rng) } else { 1.0 });
    let raw = CurvePanel::new(values, quadrature)?;
    let (centered, mean) = center_panel(&raw);
    let cov = lag_autocov(&centered, 0)?;
    let k = cov.kernel();
    let eig = SymmetricEigen::new(k.clone());
    let low = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let dir = [eig.eigenvectors[(0, low)], eig.eigenvectors[(1, low)]];
    let orthogonal = (0..n_draws)
        .filter(|&t| {
            let x = raw.values().row(t);
            (x[0] * dir[0] + x[1] * dir[1]).abs() <= 1e-12
        })
        .count();
    let col_var = |j: usize| {
        let col: Vec<f64> = centered.values().column(j).iter().copied().collect();
        sample_variance(&col)
    };
    Ok(CounterexampleReport {
        sample_mean: [mean.coeffs()[0], mean.coeffs()[1]],
        covariance: [[k[(0, 0)], k[(0, 1)]], [k[(1, 0)], k[(1, 1)]]],
        kernel_direction: dir,
        kernel_eigenvalue: eig.eigenvalues[low],
        orthogonal_fraction: orthogonal as f64 / n_draws as f64,
        centered_variance: [col_var(0), col_var(1)],
    })
}
