//! Empirical lagged autocovariance operators and the noise-filtered operator
//! `Ŝ = c · Σ_{k=1}^{p} R̂_k R̂_k*`.
//!
//! `Ŝ` can be formed on the grid (an `m × m` kernel) or, without ever building
//! the kernel, through Gram matrices of inner products between observations.
//! The grid path costs `O(n m²)` plus an `m × m` eigensolve; the dual path an
//! `(n−p)`-sized eigensolve per lag block.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CurvePanel, HVector, OperatorRep};
use crate::linalg::{psd_sqrt_and_pinv_sqrt, symmetric_eigen_desc, symmetrize};
use crate::spectral::{EigenSystem, RANK_TOL};

/// Relative cutoff on the singular values of `H^{1/2}` in the dual map-back.
pub const PINV_TOL: f64 = 1e-10;

/// Scale applied to `Σ_k R̂_k R̂_k*`. Affects eigenvalues only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalizer {
    /// Plain sum over lags.
    Sum,
    /// Average over lags, `1/p`.
    #[default]
    MeanOverLags,
    /// Extra factor `1/(n−p)`.
    PaperRemark,
}

impl Normalizer {
    pub fn factor(self, n: usize, p: usize) -> f64 {
        match self {
            Normalizer::Sum => 1.0,
            Normalizer::MeanOverLags => 1.0 / p as f64,
            Normalizer::PaperRemark => 1.0 / (n - p) as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Normalizer::Sum => "sum",
            Normalizer::MeanOverLags => "mean",
            Normalizer::PaperRemark => "paper",
        }
    }
}

impl std::str::FromStr for Normalizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Normalizer::Sum),
            "mean" | "mean-over-lags" => Ok(Normalizer::MeanOverLags),
            "paper" | "paper-remark" => Ok(Normalizer::PaperRemark),
            other => Err(Error::InvalidSpec(format!("unknown normalizer '{other}'"))),
        }
    }
}

/// Maximum lag `p` and the normalizer of the summed operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    max_lag: usize,
    normalizer: Normalizer,
}

impl LagSpec {
    pub fn new(max_lag: usize, normalizer: Normalizer) -> Result<Self> {
        if max_lag == 0 {
            return Err(Error::InvalidSpec("maximum lag must be at least 1".into()));
        }
        Ok(LagSpec { max_lag, normalizer })
    }

    /// `p = 1` with the default normalizer, i.e. `Ŝ = R̂₁R̂₁*`.
    pub fn single() -> Self {
        LagSpec { max_lag: 1, normalizer: Normalizer::default() }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn with_normalizer(self, normalizer: Normalizer) -> Self {
        LagSpec { normalizer, ..self }
    }

    /// Checks that a sample of size `n` supports this lag.
    pub fn check(&self, n: usize) -> Result<()> {
        if n <= self.max_lag {
            return Err(Error::InsufficientSample { n, lag: self.max_lag });
        }
        Ok(())
    }
}

impl Default for LagSpec {
    fn default() -> Self {
        Self::single()
    }
}

/// Weighted Gram matrices of the leading window and of its lagged copies.
#[derive(Debug, Clone)]
pub struct GramPair {
    /// `G[t][s] = ⟨ζ_t, ζ_s⟩` for `t, s < n − p`.
    pub g: DMatrix<f64>,
    /// Block matrix with block `(k, l)` equal to `⟨ζ_{t+k}, ζ_{s+l}⟩`, `k, l = 1..=p`.
    pub lagged: DMatrix<f64>,
    window: usize,
}

impl GramPair {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn max_lag(&self) -> usize {
        self.lagged.nrows() / self.window.max(1)
    }

    /// `H_k[t][s] = ⟨ζ_{t+k}, ζ_{s+k}⟩`.
    pub fn h(&self, k: usize) -> DMatrix<f64> {
        assert!(k >= 1 && k <= self.max_lag(), "lag {k} out of range");
        let start = (k - 1) * self.window;
        self.lagged.view((start, start), (self.window, self.window)).into_owned()
    }
}

fn require_centered(panel: &CurvePanel) -> Result<()> {
    if !panel.is_centered() {
        return Err(Error::NotCentered);
    }
    Ok(())
}

fn windowed_lag_kernel(values: &DMatrix<f64>, lag: usize, len: usize) -> DMatrix<f64> {
    values.rows(lag, len).transpose() * values.rows(0, len) / len as f64
}

/// Scales the columns of `a` by the quadrature weights, giving `a · diag(w)`.
fn weight_columns(a: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut out = a.clone();
    for (j, w) in weights.iter().enumerate() {
        out.column_mut(j).scale_mut(*w);
    }
    out
}

/// `R̂_k(h) = (1/(n−k)) Σ_{t} ⟨ζ_t, h⟩ ζ_{t+k}`, kernel `K(u,v) = (1/(n−k)) Σ_t ζ_{t+k}(u) ζ_t(v)`.
pub fn lag_autocov(panel: &CurvePanel, k: usize) -> Result<OperatorRep> {
    require_centered(panel)?;
    let n = panel.n();
    if k >= n {
        return Err(Error::InsufficientSample { n, lag: k });
    }
    let kernel = windowed_lag_kernel(panel.values(), k, n - k);
    Ok(OperatorRep::from_parts(kernel, panel.quadrature().clone()))
}

/// `Ŝ` as an `m × m` kernel.
///
/// Every lag uses the common window `t < n − p` with factor `1/(n − p)`, so
/// for `p = 1` this is exactly `R̂₁R̂₁*`.
pub fn s_hat_grid(panel: &CurvePanel, lags: &LagSpec) -> Result<OperatorRep> {
    require_centered(panel)?;
    let n = panel.n();
    lags.check(n)?;
    let p = lags.max_lag();
    let len = n - p;
    let weights = panel.quadrature().weights();
    let m = panel.m();
    let mut kernel = DMatrix::zeros(m, m);
    for k in 1..=p {
        let lag_kernel = windowed_lag_kernel(panel.values(), k, len);
        kernel += weight_columns(&lag_kernel, weights) * lag_kernel.transpose();
    }
    kernel *= lags.normalizer().factor(n, p);
    Ok(OperatorRep::from_parts(symmetrize(&kernel), panel.quadrature().clone()))
}

/// Rows `k..k+len` for every lag `k = 1..=p`, stacked.
fn stacked_lagged_rows(values: &DMatrix<f64>, p: usize, len: usize) -> DMatrix<f64> {
    let m = values.ncols();
    let mut out = DMatrix::zeros(p * len, m);
    for k in 1..=p {
        out.rows_mut((k - 1) * len, len).copy_from(&values.rows(k, len));
    }
    out
}

pub fn gram_matrices(panel: &CurvePanel, lags: &LagSpec) -> Result<GramPair> {
    let n = panel.n();
    lags.check(n)?;
    let p = lags.max_lag();
    let len = n - p;
    let weights = panel.quadrature().weights();
    let lead = panel.values().rows(0, len).into_owned();
    let g = symmetrize(&(weight_columns(&lead, weights) * lead.transpose()));
    let stacked = stacked_lagged_rows(panel.values(), p, len);
    let lagged = symmetrize(&(weight_columns(&stacked, weights) * stacked.transpose()));
    Ok(GramPair { g, lagged, window: len })
}

/// Nonzero eigenpairs of `Ŝ` computed from Gram matrices.
///
/// With `Y` the stacked lagged rows, `Ŝ = c · Y (I_p ⊗ G) Y*`, whose nonzero
/// spectrum equals that of the symmetric matrix `c · H^{1/2} (I_p ⊗ G) H^{1/2}`
/// where `H = Y*Y`. An eigenvector `y` maps back to `ψ = Y H^{+1/2} y`.
pub fn s_hat_dual(panel: &CurvePanel, lags: &LagSpec) -> Result<EigenSystem> {
    require_centered(panel)?;
    let n = panel.n();
    let gram = gram_matrices(panel, lags)?;
    let p = lags.max_lag();
    let len = gram.window();
    let scale = lags.normalizer().factor(n, p) / (len as f64).powi(2);

    let (h_sqrt, h_pinv_sqrt) = psd_sqrt_and_pinv_sqrt(&gram.lagged, PINV_TOL);
    let mut block_g = DMatrix::zeros(p * len, p * len);
    for k in 0..p {
        block_g.view_mut((k * len, k * len), (len, len)).copy_from(&gram.g);
    }
    let core = symmetrize(&(&h_sqrt * block_g * &h_sqrt * scale));
    let (values, vectors) = symmetric_eigen_desc(core);

    let quadrature = panel.quadrature().clone();
    let top = values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return EigenSystem::new(Vec::new(), Vec::new(), quadrature);
    }
    let stacked = stacked_lagged_rows(panel.values(), p, len);
    let mut kept_values = Vec::new();
    let mut kept_vectors = Vec::new();
    for (j, &theta) in values.iter().enumerate() {
        if theta <= RANK_TOL * top {
            break;
        }
        let coeffs = &h_pinv_sqrt * vectors.column(j);
        let psi = HVector::from_parts(stacked.transpose() * coeffs, quadrature.clone());
        let len = psi.norm();
        if len == 0.0 {
            return Err(Error::Contract(format!("dual eigenvector {j} maps to zero")));
        }
        kept_values.push(theta);
        kept_vectors.push(psi.scaled(1.0 / len));
    }
    EigenSystem::new(kept_values, kept_vectors, quadrature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{apply_operator, center_panel, hs_norm, inner_product, Quadrature};
    use crate::spectral::eigendecompose;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn scalar_series() -> CurvePanel {
        let q = Quadrature::euclidean(1).unwrap().shared();
        let raw = CurvePanel::new(DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 1.0]), q).unwrap();
        center_panel(&raw).0
    }

    fn two_row_panel() -> CurvePanel {
        let q = Quadrature::uniform(5, 0.0, 1.0).unwrap().shared();
        let row = [0.3, -1.2, 0.7, 2.0, -0.4];
        let values = DMatrix::from_fn(2, 5, |t, i| if t == 0 { row[i] } else { -row[i] });
        CurvePanel::centered(values, q).unwrap()
    }

    fn wavy_panel(n: usize, m: usize) -> CurvePanel {
        let q = Quadrature::uniform(m, 0.0, 1.0).unwrap().shared();
        let values = DMatrix::from_fn(n, m, |t, i| {
            let u = i as f64 / (m - 1) as f64;
            let t = t as f64;
            (1.3 * t).sin() * (3.0 * u).cos() + (0.7 * t + 0.2).cos() * u * u + 0.1 * ((t * u * 5.0).sin())
        });
        center_panel(&CurvePanel::new(values, q).unwrap()).0
    }

    #[test]
    fn uncentered_panel_is_rejected() {
        let q = Quadrature::euclidean(1).unwrap().shared();
        let raw = CurvePanel::new(DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 1.0]), q).unwrap();
        assert_eq!(lag_autocov(&raw, 1).unwrap_err(), Error::NotCentered);
        assert_eq!(s_hat_grid(&raw, &LagSpec::single()).unwrap_err(), Error::NotCentered);
        assert!(s_hat_dual(&raw, &LagSpec::single()).is_err());
    }

    #[test]
    fn scalar_lag_one_autocovariance() {
        let op = lag_autocov(&scalar_series(), 1).unwrap();
        assert!((op.kernel()[(0, 0)] + 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn two_rows_single_term() {
        let panel = two_row_panel();
        let op = lag_autocov(&panel, 1).unwrap();
        let want = panel.values().row(1).transpose() * panel.values().row(0);
        assert!((op.kernel() - want).amax() < 1e-15);
    }

    #[test]
    fn lag_zero_is_symmetric_sample_covariance() {
        let panel = wavy_panel(9, 6);
        let op = lag_autocov(&panel, 0).unwrap();
        let want = panel.values().transpose() * panel.values() / 9.0;
        assert!((op.kernel() - &want).amax() < 1e-14);
        assert!((op.kernel() - op.kernel().transpose()).amax() < 1e-15);
    }

    #[test]
    fn lag_autocov_matches_direct_sum() {
        let panel = wavy_panel(12, 7);
        let h = HVector::from_fn(panel.quadrature().clone(), |u| (2.0 * u).exp() - 1.5).unwrap();
        for k in 0..4 {
            let got = apply_operator(&lag_autocov(&panel, k).unwrap(), &h).unwrap();
            let mut want = HVector::zeros(panel.quadrature().clone());
            for t in 0..12 - k {
                let c = inner_product(&panel.row(t), &h).unwrap();
                want = want.axpy(c / (12 - k) as f64, &panel.row(t + k)).unwrap();
            }
            assert!((got.coeffs() - want.coeffs()).amax() < 1e-10);
        }
        assert!(lag_autocov(&panel, 12).is_err());
    }

    #[test]
    fn s_hat_two_rows() {
        let panel = two_row_panel();
        let z1 = panel.row(0);
        let z2 = panel.row(1);
        let s = s_hat_grid(&panel, &LagSpec::single()).unwrap();
        let expected = z1.norm().powi(2) * z2.norm().powi(2);
        let eig = eigendecompose(&s).unwrap();
        assert_eq!(eig.count(), 1);
        assert!((eig.values()[0] - expected).abs() < 1e-12 * expected);
        let dir = z2.scaled(1.0 / z2.norm());
        assert!((inner_product(&eig.vectors()[0], &dir).unwrap().abs() - 1.0).abs() < 1e-10);

        let dual = s_hat_dual(&panel, &LagSpec::single()).unwrap();
        assert_eq!(dual.count(), 1);
        assert!((dual.values()[0] - expected).abs() < 1e-12 * expected);
        assert!((inner_product(&dual.vectors()[0], &dir).unwrap().abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_panel() {
        let q = Quadrature::uniform(4, 0.0, 1.0).unwrap().shared();
        let panel = CurvePanel::centered(DMatrix::zeros(5, 4), q).unwrap();
        assert_eq!(hs_norm(&s_hat_grid(&panel, &LagSpec::single()).unwrap()), 0.0);
        assert_eq!(s_hat_dual(&panel, &LagSpec::single()).unwrap().count(), 0);
    }

    #[test]
    fn s_hat_equals_explicit_composition() {
        // Rows alternate between two orthogonal directions, so ζ_{t+1} ⊥ ζ_t.
        let q = Quadrature::uniform(11, 0.0, 1.0).unwrap().shared();
        let a = HVector::from_fn(q.clone(), |u| (2.0 * std::f64::consts::PI * u).sin()).unwrap();
        let b = HVector::from_fn(q.clone(), |u| (2.0 * std::f64::consts::PI * u).cos()).unwrap();
        assert!(inner_product(&a, &b).unwrap().abs() < 1e-12);
        let coef = [1.0, 2.0, -1.0, -2.0];
        let values =
            DMatrix::from_fn(4, 11, |t, i| if t % 2 == 0 { coef[t] * a.coeffs()[i] } else { coef[t] * b.coeffs()[i] });
        let panel = CurvePanel::centered(values, q).unwrap();
        let r1 = lag_autocov(&panel, 1).unwrap();
        assert!(hs_norm(&r1) > 0.0);
        let direct = r1.compose(&r1.adjoint()).unwrap();
        let s = s_hat_grid(&panel, &LagSpec::single()).unwrap();
        assert!((s.kernel() - direct.kernel()).amax() < 1e-10);
    }

    #[test]
    fn gram_of_orthonormal_rows_is_identity() {
        let q = Quadrature::euclidean(4).unwrap().shared();
        let panel = CurvePanel::new(DMatrix::identity(4, 4), q).unwrap();
        let gram = gram_matrices(&panel, &LagSpec::single()).unwrap();
        assert_eq!(gram.g, DMatrix::identity(3, 3));
        assert_eq!(gram.h(1), DMatrix::identity(3, 3));
    }

    #[test]
    fn gram_of_scalar_series() {
        let gram = gram_matrices(&scalar_series(), &LagSpec::single()).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[4.0 / 9.0, -8.0 / 9.0, -8.0 / 9.0, 16.0 / 9.0]);
        assert!((&gram.g - want).amax() < 1e-15);
    }

    #[test]
    fn gram_reproduces_inner_products() {
        let panel = wavy_panel(10, 8);
        let lags = LagSpec::new(3, Normalizer::Sum).unwrap();
        let gram = gram_matrices(&panel, &lags).unwrap();
        for t in 0..7 {
            for s in 0..7 {
                let ip = inner_product(&panel.row(t), &panel.row(s)).unwrap();
                assert!((gram.g[(t, s)] - ip).abs() < 1e-12);
                for k in 1..=3 {
                    let ip = inner_product(&panel.row(t + k), &panel.row(s + k)).unwrap();
                    assert!((gram.h(k)[(t, s)] - ip).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dual_matches_grid_for_several_lags() {
        let panel = wavy_panel(30, 25);
        for p in 1..=3 {
            let lags = LagSpec::new(p, Normalizer::MeanOverLags).unwrap();
            let grid = eigendecompose(&s_hat_grid(&panel, &lags).unwrap()).unwrap();
            let dual = s_hat_dual(&panel, &lags).unwrap();
            let q = grid.count().min(dual.count());
            assert!(q >= 3);
            for j in 0..q {
                let (a, b) = (grid.values()[j], dual.values()[j]);
                assert!((a - b).abs() <= 1e-8 * grid.values()[0], "p={p} j={j} {a} {b}");
            }
        }
    }

    #[test]
    fn insufficient_sample() {
        let panel = wavy_panel(4, 3);
        let lags = LagSpec::new(4, Normalizer::Sum).unwrap();
        assert_eq!(s_hat_grid(&panel, &lags).unwrap_err(), Error::InsufficientSample { n: 4, lag: 4 });
        assert!(LagSpec::new(0, Normalizer::Sum).is_err());
    }

    proptest! {
        #[test]
        fn s_hat_symmetric_psd(vals in prop::collection::vec(-3.0f64..3.0, 6 * 5), p in 1usize..4) {
            let q = Quadrature::uniform(5, 0.0, 2.0).unwrap().shared();
            let raw = CurvePanel::new(DMatrix::from_row_slice(6, 5, &vals), q).unwrap();
            let (panel, _) = center_panel(&raw);
            let lags = LagSpec::new(p, Normalizer::Sum).unwrap();
            let s = s_hat_grid(&panel, &lags).unwrap();
            prop_assert!((s.kernel() - s.kernel().transpose()).amax() <= 1e-12 * (1.0 + s.kernel().amax()));
            let w = q_sqrt(s.quadrature().weights());
            let b = DMatrix::from_fn(5, 5, |i, j| w[i] * s.kernel()[(i, j)] * w[j]);
            let ev = b.symmetric_eigenvalues();
            let top = ev.max();
            prop_assert!(ev.min() >= -1e-9 * top.max(1e-300));
        }

        #[test]
        fn normalizer_rescales_only(vals in prop::collection::vec(-3.0f64..3.0, 8 * 6), p in 1usize..4) {
            let q = Quadrature::uniform(6, 0.0, 1.0).unwrap().shared();
            let raw = CurvePanel::new(DMatrix::from_row_slice(8, 6, &vals), q).unwrap();
            let (panel, _) = center_panel(&raw);
            let sum = s_hat_grid(&panel, &LagSpec::new(p, Normalizer::Sum).unwrap()).unwrap();
            for norm in [Normalizer::MeanOverLags, Normalizer::PaperRemark] {
                let other = s_hat_grid(&panel, &LagSpec::new(p, norm).unwrap()).unwrap();
                let factor = norm.factor(8, p);
                prop_assert!((other.kernel() - sum.kernel() * factor).amax() <= 1e-12 * sum.kernel().amax().max(1e-300));
            }
        }

        #[test]
        fn lag_autocov_adjoint(vals in prop::collection::vec(-3.0f64..3.0, 7 * 4), k in 0usize..5) {
            let q = Quadrature::trapezoid(vec![0.0, 0.2, 0.5, 1.1]).unwrap().shared();
            let raw = CurvePanel::new(DMatrix::from_row_slice(7, 4, &vals), q.clone()).unwrap();
            let (panel, _) = center_panel(&raw);
            let r = lag_autocov(&panel, k).unwrap();
            let f = HVector::new(DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3]), q.clone()).unwrap();
            let g = HVector::new(DVector::from_vec(vec![0.1, 0.4, -1.0, 0.8]), q).unwrap();
            let lhs = inner_product(&apply_operator(&r, &f).unwrap(), &g).unwrap();
            let rhs = inner_product(&f, &apply_operator(&r.adjoint(), &g).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    fn q_sqrt(w: &[f64]) -> Vec<f64> {
        w.iter().map(|x| x.sqrt()).collect()
    }
}
