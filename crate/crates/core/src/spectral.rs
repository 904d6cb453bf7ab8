//! Eigenanalysis of `Ŝ`: eigensystems, sign conventions, selection of the
//! latent dimension, factor scores and reconstruction.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{ensure_same, inner_product, CurvePanel, HVector, OperatorRep, Quadrature};
use crate::linalg::{max_asymmetry, symmetric_eigen_desc, symmetrize};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Relative gap below which neighbouring eigenvalues are flagged as tied.
pub const TIE_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-8;
const NEGATIVE_CLIP_TOL: f64 = 1e-12;
const SIGN_TIE_TOL: f64 = 1e-12;

/// Nonincreasing nonzero eigenvalues with eigenvectors orthonormal in the
/// quadrature inner product.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Vec<HVector>,
    quadrature: Arc<Quadrature>,
    tied: Vec<bool>,
}

impl EigenSystem {
    pub fn new(values: Vec<f64>, vectors: Vec<HVector>, quadrature: Arc<Quadrature>) -> Result<Self> {
        if values.len() != vectors.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: vectors.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Contract("eigenvalues must be finite and nonnegative".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Contract("eigenvalues must be nonincreasing".into()));
        }
        for v in &vectors {
            ensure_same(&quadrature, v.quadrature())?;
        }
        let top = values.first().copied().unwrap_or(0.0);
        let mut tied = vec![false; values.len()];
        for j in 1..values.len() {
            if values[j - 1] - values[j] <= TIE_TOL * top {
                tied[j - 1] = true;
                tied[j] = true;
            }
        }
        Ok(EigenSystem { values, vectors, quadrature, tied })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[HVector] {
        &self.vectors
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quadrature(&self) -> &Arc<Quadrature> {
        &self.quadrature
    }

    /// Whether eigenvalue `j` belongs to a block of (numerically) equal
    /// eigenvalues. Inside such a block only the spanned subspace is
    /// meaningful; the individual vectors come out in solver order.
    pub fn is_tied(&self, j: usize) -> bool {
        self.tied[j]
    }

    pub fn has_ties(&self) -> bool {
        self.tied.iter().any(|&t| t)
    }

    /// Leading `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> EigenSystem {
        let k = k.min(self.count());
        EigenSystem {
            values: self.values[..k].to_vec(),
            vectors: self.vectors[..k].to_vec(),
            quadrature: self.quadrature.clone(),
            tied: self.tied[..k].to_vec(),
        }
    }

    /// Eigenvectors as the columns of an `m × count` matrix.
    pub fn vector_matrix(&self, k: usize) -> DMatrix<f64> {
        let m = self.quadrature.len();
        let mut out = DMatrix::zeros(m, k);
        for (j, v) in self.vectors.iter().take(k).enumerate() {
            out.set_column(j, v.coeffs());
        }
        out
    }
}

/// Solves the weighted eigenproblem `K diag(w) ψ = θ ψ` through the symmetric
/// matrix `D^{1/2} K D^{1/2}` and maps eigenvectors back with `D^{-1/2}`.
pub fn eigendecompose(op: &OperatorRep) -> Result<EigenSystem> {
    let kernel = op.kernel();
    let scale = kernel.amax().max(1.0);
    let asym = max_asymmetry(kernel);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let quadrature = op.quadrature().clone();
    let root_w: Vec<f64> = quadrature.weights().iter().map(|w| w.sqrt()).collect();
    let m = root_w.len();
    let sym = symmetrize(kernel);
    let b = DMatrix::from_fn(m, m, |i, j| root_w[i] * sym[(i, j)] * root_w[j]);
    let (values, vectors) = symmetric_eigen_desc(b);

    let largest = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let clip = NEGATIVE_CLIP_TOL * largest.max(1.0);
    if let Some(&worst) = values.last() {
        if worst < -clip {
            return Err(Error::NotPositiveSemidefinite(worst));
        }
    }
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return EigenSystem::new(Vec::new(), Vec::new(), quadrature);
    }
    let mut kept_values = Vec::new();
    let mut kept_vectors = Vec::new();
    for (j, &theta) in values.iter().enumerate() {
        if theta <= RANK_TOL * top {
            break;
        }
        let coeffs = DVector::from_fn(m, |i, _| vectors[(i, j)] / root_w[i]);
        kept_values.push(theta);
        kept_vectors.push(HVector::from_parts(coeffs, quadrature.clone()));
    }
    EigenSystem::new(kept_values, kept_vectors, quadrature)
}

#[derive(Debug, Clone)]
pub struct SignAlignment {
    pub system: EigenSystem,
    /// Indices whose eigenvector was orthogonal to its reference; left unchanged.
    pub orthogonal: Vec<usize>,
}

/// Flips each `ψ̂_j` so that `⟨ψ̂_j, reference_j⟩ ≥ 0`. Only the first
/// `reference.len()` eigenvectors are touched.
pub fn sign_align(estimated: &EigenSystem, reference: &[HVector]) -> Result<SignAlignment> {
    if reference.len() > estimated.count() {
        return Err(Error::DimensionMismatch { expected: estimated.count(), found: reference.len() });
    }
    let mut system = estimated.clone();
    let mut orthogonal = Vec::new();
    for (j, r) in reference.iter().enumerate() {
        let v = &system.vectors[j];
        let ip = inner_product(v, r)?;
        if ip.abs() <= SIGN_TIE_TOL * v.norm() * r.norm() {
            orthogonal.push(j);
        } else if ip < 0.0 {
            system.vectors[j] = v.scaled(-1.0);
        }
    }
    Ok(SignAlignment { system, orthogonal })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum DimensionMethod {
    /// `argmax_j θ_j / (θ_{j+1} + ε)` over `j ≤ j_max`.
    Ratio,
    /// Smallest `d` whose leading eigenvalues carry a `1 − τ` share of the total.
    Threshold { tau: f64 },
}

impl DimensionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DimensionMethod::Ratio => "ratio",
            DimensionMethod::Threshold { .. } => "threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub d: usize,
    /// All eigenvalues were zero.
    pub degenerate: bool,
}

/// `min(10, q − 1)`, but never below 1.
pub fn default_j_max(count: usize) -> usize {
    count.saturating_sub(1).clamp(1, 10)
}

pub fn estimate_dimension(eig: &EigenSystem, method: DimensionMethod, j_max: usize) -> Result<DimensionEstimate> {
    estimate_dimension_from_values(eig.values(), method, j_max)
}

/// Dimension selection on a nonincreasing list of eigenvalues. Missing
/// entries past the end of `values` count as zero.
pub fn estimate_dimension_from_values(
    values: &[f64],
    method: DimensionMethod,
    j_max: usize,
) -> Result<DimensionEstimate> {
    if j_max == 0 {
        return Err(Error::Contract("j_max must be at least 1".into()));
    }
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(DimensionEstimate { d: 0, degenerate: true });
    }
    let at = |j: usize| values.get(j).copied().unwrap_or(0.0);
    let d = match method {
        DimensionMethod::Ratio => {
            let guard = 1e-12 * top;
            let mut best = 1;
            let mut best_ratio = f64::NEG_INFINITY;
            for j in 1..=j_max {
                let ratio = at(j - 1) / (at(j) + guard);
                if ratio > best_ratio {
                    best_ratio = ratio;
                    best = j;
                }
            }
            best
        }
        DimensionMethod::Threshold { tau } => {
            if !(0.0..1.0).contains(&tau) {
                return Err(Error::Contract(format!("threshold tau must lie in [0, 1), got {tau}")));
            }
            let total: f64 = values.iter().sum();
            let target = (1.0 - tau) * total;
            let mut acc = 0.0;
            let mut d = values.len();
            for (j, v) in values.iter().enumerate() {
                acc += v;
                if acc >= target {
                    d = j + 1;
                    break;
                }
            }
            d
        }
    };
    Ok(DimensionEstimate { d, degenerate: false })
}

/// Factor scores `W[t][j] = ⟨ζ_t, ψ̂_j⟩` together with the mean that was
/// removed from the panel.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub values: DMatrix<f64>,
    pub mean: HVector,
}

impl ScoreMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

pub fn compute_scores(panel: &CurvePanel, eig: &EigenSystem, d: usize) -> Result<ScoreMatrix> {
    if !panel.is_centered() {
        return Err(Error::NotCentered);
    }
    if d > eig.count() {
        return Err(Error::Contract(format!("requested {d} scores but only {} eigenvectors", eig.count())));
    }
    ensure_same(panel.quadrature(), eig.quadrature())?;
    let mut weighted = eig.vector_matrix(d);
    for (i, w) in panel.quadrature().weights().iter().enumerate() {
        weighted.row_mut(i).scale_mut(*w);
    }
    let values = panel.values() * weighted;
    let mean = panel.removed_mean().unwrap_or_else(|| HVector::zeros(panel.quadrature().clone()));
    Ok(ScoreMatrix { values, mean })
}

/// Rows `mean + Σ_{j<d} W[t][j] ψ̂_j`.
pub fn reconstruct(scores: &ScoreMatrix, eig: &EigenSystem, d: usize) -> Result<CurvePanel> {
    if d > scores.d() || d > eig.count() {
        return Err(Error::Contract(format!(
            "cannot reconstruct with {d} components ({} scores, {} eigenvectors)",
            scores.d(),
            eig.count()
        )));
    }
    ensure_same(scores.mean.quadrature(), eig.quadrature())?;
    let mut values = scores.values.columns(0, d) * eig.vector_matrix(d).transpose();
    for mut row in values.row_iter_mut() {
        row += scores.mean.coeffs().transpose();
    }
    CurvePanel::new(values, eig.quadrature().clone())
}
