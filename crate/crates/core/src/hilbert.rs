//! Discretized Hilbert space: grids with quadrature weights, grid-sampled
//! vectors, observation panels and integral operators given by kernel samples.
//!
//! An element `h` of `H` is stored through its values `h(u_i)` on the grid and
//! the inner product is the weighted sum `Σ_i w_i f_i g_i`. An operator with
//! kernel `K` acts as `(K h)_i = Σ_j K[i][j] w_j h_j`, so its adjoint is the
//! kernel transpose and composition is `K_A · diag(w) · K_B`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TRAPEZOID_SUM_TOL: f64 = 1e-12;
const CENTERING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMode {
    /// Trapezoid weights computed from the spacing of the grid.
    TrapezoidOnGrid,
    /// Unit weights, `H = R^m` with the standard inner product.
    Euclidean,
}

/// Grid points and integration weights defining the inner product of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    points: Vec<f64>,
    weights: Vec<f64>,
    mode: QuadratureMode,
}

impl Quadrature {
    /// Trapezoid rule on an arbitrary strictly increasing grid (at least two points).
    pub fn trapezoid(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidQuadrature("trapezoid rule needs at least two grid points".into()));
        }
        check_grid(&points)?;
        let m = points.len();
        let mut weights = vec![0.0; m];
        for i in 0..m - 1 {
            let half = 0.5 * (points[i + 1] - points[i]);
            weights[i] += half;
            weights[i + 1] += half;
        }
        let quad = Quadrature { points, weights, mode: QuadratureMode::TrapezoidOnGrid };
        let (a, b) = quad.domain();
        let total: f64 = quad.weights.iter().sum();
        if (total - (b - a)).abs() > TRAPEZOID_SUM_TOL * (b - a).max(1.0) {
            return Err(Error::InvalidQuadrature(format!("trapezoid weights sum to {total}, expected {}", b - a)));
        }
        Ok(quad)
    }

    /// `m` equispaced points on `[a, b]` with trapezoid weights.
    pub fn uniform(m: usize, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidQuadrature(format!("bad interval [{a}, {b}]")));
        }
        if m < 2 {
            return Err(Error::InvalidQuadrature("uniform grid needs at least two points".into()));
        }
        let step = (b - a) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| a + step * i as f64).collect();
        points[m - 1] = b;
        Self::trapezoid(points)
    }

    /// `R^m` with unit weights; grid points are the indices `0..m`.
    pub fn euclidean(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidQuadrature("empty grid".into()));
        }
        Ok(Quadrature {
            points: (0..m).map(|i| i as f64).collect(),
            weights: vec![1.0; m],
            mode: QuadratureMode::Euclidean,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> QuadratureMode {
        self.mode
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn weight_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.weights)
    }

    pub fn shared(self) -> Arc<Quadrature> {
        Arc::new(self)
    }
}

fn check_grid(points: &[f64]) -> Result<()> {
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidQuadrature(format!("grid point {i} is not finite")));
    }
    if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidQuadrature(format!("grid is not strictly increasing at position {}", i + 1)));
    }
    Ok(())
}

pub(crate) fn same_quadrature(a: &Arc<Quadrature>, b: &Arc<Quadrature>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same(a: &Arc<Quadrature>, b: &Arc<Quadrature>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if !same_quadrature(a, b) {
        return Err(Error::QuadratureMismatch);
    }
    Ok(())
}

/// An element of `H` sampled on the grid.
#[derive(Debug, Clone)]
pub struct HVector {
    coeffs: DVector<f64>,
    quadrature: Arc<Quadrature>,
}

impl HVector {
    pub fn new(coeffs: DVector<f64>, quadrature: Arc<Quadrature>) -> Result<Self> {
        if coeffs.len() != quadrature.len() {
            return Err(Error::DimensionMismatch { expected: quadrature.len(), found: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract("vector has non-finite entries".into()));
        }
        Ok(HVector { coeffs, quadrature })
    }

    pub fn from_fn(quadrature: Arc<Quadrature>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let coeffs = DVector::from_iterator(quadrature.len(), quadrature.points().iter().map(|&u| f(u)));
        Self::new(coeffs, quadrature)
    }

    pub fn zeros(quadrature: Arc<Quadrature>) -> Self {
        HVector { coeffs: DVector::zeros(quadrature.len()), quadrature }
    }

    pub(crate) fn from_parts(coeffs: DVector<f64>, quadrature: Arc<Quadrature>) -> Self {
        debug_assert_eq!(coeffs.len(), quadrature.len());
        HVector { coeffs, quadrature }
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn quadrature(&self) -> &Arc<Quadrature> {
        &self.quadrature
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> HVector {
        HVector { coeffs: &self.coeffs * factor, quadrature: self.quadrature.clone() }
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &HVector) -> Result<HVector> {
        ensure_same(&self.quadrature, &other.quadrature)?;
        Ok(HVector { coeffs: &self.coeffs + &other.coeffs * factor, quadrature: self.quadrature.clone() })
    }

    pub fn sub(&self, other: &HVector) -> Result<HVector> {
        self.axpy(-1.0, other)
    }

    pub fn inner(&self, other: &HVector) -> Result<f64> {
        inner_product(self, other)
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }
}

/// `⟨f, g⟩ = Σ_i w_i f_i g_i`.
pub fn inner_product(f: &HVector, g: &HVector) -> Result<f64> {
    ensure_same(&f.quadrature, &g.quadrature)?;
    Ok(weighted_dot(f.quadrature.weights(), f.coeffs.as_slice(), g.coeffs.as_slice()))
}

pub(crate) fn weighted_dot(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
}

pub fn norm(f: &HVector) -> f64 {
    weighted_dot(f.quadrature.weights(), f.coeffs.as_slice(), f.coeffs.as_slice()).max(0.0).sqrt()
}

/// A sample of `n` observations on a shared grid; row `t` is `ζ_t`.
#[derive(Debug, Clone)]
pub struct CurvePanel {
    values: DMatrix<f64>,
    quadrature: Arc<Quadrature>,
    centered: bool,
    removed_mean: Option<DVector<f64>>,
}

impl CurvePanel {
    pub fn new(values: DMatrix<f64>, quadrature: Arc<Quadrature>) -> Result<Self> {
        validate_values(&values, &quadrature)?;
        Ok(CurvePanel { values, quadrature, centered: false, removed_mean: None })
    }

    /// Wraps values that are already centered; their column means are checked.
    pub fn centered(values: DMatrix<f64>, quadrature: Arc<Quadrature>) -> Result<Self> {
        validate_values(&values, &quadrature)?;
        let n = values.nrows() as f64;
        for (j, col) in values.column_iter().enumerate() {
            let mean = col.sum() / n;
            let scale = col.amax();
            if mean.abs() > CENTERING_TOL * scale {
                return Err(Error::InvalidPanel(format!("column {j} has mean {mean:e}, panel is not centered")));
            }
        }
        Ok(CurvePanel { values, quadrature, centered: true, removed_mean: None })
    }

    pub fn from_rows(rows: &[Vec<f64>], quadrature: Arc<Quadrature>) -> Result<Self> {
        let m = quadrature.len();
        if let Some(t) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::InvalidPanel(format!("row {t} has {} entries, grid has {m}", rows[t].len())));
        }
        let values = DMatrix::from_fn(rows.len(), m, |t, i| rows[t][i]);
        Self::new(values, quadrature)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn quadrature(&self) -> &Arc<Quadrature> {
        &self.quadrature
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Total mean removed by [`center_panel`], if any centering happened.
    pub fn removed_mean(&self) -> Option<HVector> {
        self.removed_mean.as_ref().map(|m| HVector::from_parts(m.clone(), self.quadrature.clone()))
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of grid points.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, t: usize) -> HVector {
        HVector::from_parts(self.values.row(t).transpose(), self.quadrature.clone())
    }
}

fn validate_values(values: &DMatrix<f64>, quadrature: &Quadrature) -> Result<()> {
    if values.nrows() < 2 {
        return Err(Error::InvalidPanel(format!("need at least 2 observations, got {}", values.nrows())));
    }
    if values.ncols() != quadrature.len() {
        return Err(Error::DimensionMismatch { expected: quadrature.len(), found: values.ncols() });
    }
    if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
        let n = values.nrows();
        return Err(Error::InvalidPanel(format!("non-finite entry at row {}, column {}", idx % n, idx / n)));
    }
    Ok(())
}

/// Subtracts the sample mean from every observation. Returns the centered
/// panel and the mean that was removed.
pub fn center_panel(panel: &CurvePanel) -> (CurvePanel, HVector) {
    let n = panel.n() as f64;
    let mean = panel.values.row_mean().transpose();
    let mut values = panel.values.clone();
    for mut row in values.row_iter_mut() {
        row -= mean.transpose();
    }
    let total = match &panel.removed_mean {
        Some(prev) => prev + &mean,
        None => mean.clone(),
    };
    debug_assert!(n >= 2.0);
    let centered =
        CurvePanel { values, quadrature: panel.quadrature.clone(), centered: true, removed_mean: Some(total) };
    (centered, HVector::from_parts(mean, panel.quadrature.clone()))
}

/// Integral operator on `H` represented by its kernel samples `K(u_i, u_j)`.
#[derive(Debug, Clone)]
pub struct OperatorRep {
    kernel: DMatrix<f64>,
    quadrature: Arc<Quadrature>,
}

impl OperatorRep {
    pub fn new(kernel: DMatrix<f64>, quadrature: Arc<Quadrature>) -> Result<Self> {
        let m = quadrature.len();
        if kernel.nrows() != m || kernel.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, found: kernel.nrows().max(kernel.ncols()) });
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("kernel has non-finite entries".into()));
        }
        Ok(OperatorRep { kernel, quadrature })
    }

    pub(crate) fn from_parts(kernel: DMatrix<f64>, quadrature: Arc<Quadrature>) -> Self {
        OperatorRep { kernel, quadrature }
    }

    pub fn zeros(quadrature: Arc<Quadrature>) -> Self {
        let m = quadrature.len();
        OperatorRep { kernel: DMatrix::zeros(m, m), quadrature }
    }

    /// Kernel `a(u) b(v)`, i.e. the operator `h ↦ ⟨b, h⟩ a`.
    pub fn rank_one(a: &HVector, b: &HVector) -> Result<Self> {
        ensure_same(&a.quadrature, &b.quadrature)?;
        Ok(OperatorRep { kernel: &a.coeffs * b.coeffs.transpose(), quadrature: a.quadrature.clone() })
    }

    /// `Σ_j values[j] · v_j ⊗ v_j`.
    pub fn spectral_sum(values: &[f64], vectors: &[HVector], quadrature: Arc<Quadrature>) -> Result<Self> {
        if values.len() != vectors.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: vectors.len() });
        }
        let m = quadrature.len();
        let mut kernel = DMatrix::zeros(m, m);
        for (&value, v) in values.iter().zip(vectors) {
            ensure_same(&quadrature, &v.quadrature)?;
            kernel += &v.coeffs * v.coeffs.transpose() * value;
        }
        Ok(OperatorRep { kernel, quadrature })
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn quadrature(&self) -> &Arc<Quadrature> {
        &self.quadrature
    }

    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn apply(&self, h: &HVector) -> Result<HVector> {
        apply_operator(self, h)
    }

    /// Adjoint with respect to the quadrature inner product.
    pub fn adjoint(&self) -> OperatorRep {
        OperatorRep { kernel: self.kernel.transpose(), quadrature: self.quadrature.clone() }
    }

    /// Kernel of `self ∘ other`.
    pub fn compose(&self, other: &OperatorRep) -> Result<OperatorRep> {
        ensure_same(&self.quadrature, &other.quadrature)?;
        let mut weighted = other.kernel.clone();
        for (i, w) in self.quadrature.weights().iter().enumerate() {
            weighted.row_mut(i).scale_mut(*w);
        }
        Ok(OperatorRep { kernel: &self.kernel * weighted, quadrature: self.quadrature.clone() })
    }

    pub fn sub(&self, other: &OperatorRep) -> Result<OperatorRep> {
        ensure_same(&self.quadrature, &other.quadrature)?;
        Ok(OperatorRep { kernel: &self.kernel - &other.kernel, quadrature: self.quadrature.clone() })
    }

    pub fn scaled(&self, factor: f64) -> OperatorRep {
        OperatorRep { kernel: &self.kernel * factor, quadrature: self.quadrature.clone() }
    }

    pub fn hs_norm(&self) -> f64 {
        hs_norm(self)
    }
}

/// `(A h)_i = Σ_j K[i][j] w_j h_j`.
pub fn apply_operator(op: &OperatorRep, h: &HVector) -> Result<HVector> {
    ensure_same(&op.quadrature, &h.quadrature)?;
    let weighted = h.coeffs.component_mul(&op.quadrature.weight_vector());
    Ok(HVector::from_parts(&op.kernel * weighted, op.quadrature.clone()))
}

/// Hilbert–Schmidt norm `sqrt(Σ_ij w_i w_j K[i][j]²)`.
pub fn hs_norm(op: &OperatorRep) -> f64 {
    let w = op.quadrature.weights();
    let mut total = 0.0;
    for (j, col) in op.kernel.column_iter().enumerate() {
        for (i, k) in col.iter().enumerate() {
            total += w[i] * w[j] * k * k;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn unit(m: usize) -> Arc<Quadrature> {
        Quadrature::uniform(m, 0.0, 1.0).unwrap().shared()
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let q = Quadrature::trapezoid(vec![0.0, 0.1, 0.35, 0.9, 2.0]).unwrap();
        let total: f64 = q.weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert!(q.weights().iter().all(|&w| w > 0.0));
        assert_eq!(q.weights()[0], 0.05);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Quadrature::trapezoid(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Quadrature::trapezoid(vec![0.0, f64::NAN]).is_err());
        assert!(Quadrature::trapezoid(vec![0.5]).is_err());
        assert!(Quadrature::euclidean(0).is_err());
        let e = Quadrature::euclidean(1).unwrap();
        assert_eq!(e.weights(), &[1.0]);
    }

    #[test]
    fn constant_one_has_unit_norm() {
        let q = unit(5);
        let one = HVector::from_fn(q, |_| 1.0).unwrap();
        assert!((inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trigonometric_inner_products() {
        let q = unit(1001);
        let s = HVector::from_fn(q.clone(), |u| SQRT_2 * (2.0 * PI * u).sin()).unwrap();
        let c = HVector::from_fn(q, |u| SQRT_2 * (2.0 * PI * u).cos()).unwrap();
        assert!((inner_product(&s, &s).unwrap() - 1.0).abs() < 1e-4);
        assert!(inner_product(&s, &c).unwrap().abs() < 1e-4);
        assert!((norm(&s) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn norm_of_constants() {
        let q = unit(7);
        assert!((norm(&HVector::from_fn(q.clone(), |_| 2.0).unwrap()) - 2.0).abs() < 1e-14);
        assert_eq!(norm(&HVector::zeros(q)), 0.0);
    }

    #[test]
    fn mismatched_quadratures_are_rejected() {
        let a = HVector::zeros(unit(5));
        let b = HVector::zeros(unit(6));
        assert!(matches!(inner_product(&a, &b), Err(Error::DimensionMismatch { .. })));
        let c = HVector::zeros(Quadrature::trapezoid(vec![0.0, 0.1, 0.2, 0.3, 1.0]).unwrap().shared());
        assert_eq!(inner_product(&a, &c), Err(Error::QuadratureMismatch));
    }

    #[test]
    fn center_two_rows() {
        let q = Quadrature::euclidean(2).unwrap().shared();
        let panel = CurvePanel::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]], q).unwrap();
        let (c, mean) = center_panel(&panel);
        assert!(c.is_centered());
        assert_eq!(c.values().as_slice(), &[-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(mean.coeffs().as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn centering_is_idempotent() {
        let q = unit(4);
        let panel =
            CurvePanel::new(DMatrix::from_fn(6, 4, |t, i| ((t * 7 + i * 3) % 5) as f64 - 0.3 * i as f64), q).unwrap();
        let (once, _) = center_panel(&panel);
        let (twice, mean) = center_panel(&once);
        assert!((once.values() - twice.values()).amax() < 1e-12);
        assert!(mean.coeffs().amax() < 1e-12);
        assert!((twice.removed_mean().unwrap().coeffs() - panel.values().row_mean().transpose()).amax() < 1e-12);
    }

    #[test]
    fn centered_constructor_checks_means() {
        let q = Quadrature::euclidean(1).unwrap().shared();
        assert!(CurvePanel::centered(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), q.clone()).is_ok());
        assert!(CurvePanel::centered(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), q).is_err());
    }

    #[test]
    fn panel_validation() {
        let q = unit(3);
        assert!(CurvePanel::new(DMatrix::zeros(1, 3), q.clone()).is_err());
        assert!(CurvePanel::new(DMatrix::zeros(3, 2), q.clone()).is_err());
        let mut bad = DMatrix::zeros(3, 3);
        bad[(2, 1)] = f64::INFINITY;
        let err = CurvePanel::new(bad, q).unwrap_err();
        assert!(err.to_string().contains("row 2, column 1"), "{err}");
    }

    #[test]
    fn identity_kernel_in_euclidean_mode() {
        let q = Quadrature::euclidean(4).unwrap().shared();
        let id = OperatorRep::new(DMatrix::identity(4, 4), q.clone()).unwrap();
        let h = HVector::new(DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]), q).unwrap();
        assert_eq!(apply_operator(&id, &h).unwrap().coeffs(), h.coeffs());
    }

    #[test]
    fn rank_one_action() {
        let q = unit(9);
        let a = HVector::from_fn(q.clone(), |u| u * u).unwrap();
        let b = HVector::from_fn(q.clone(), |u| 1.0 - u).unwrap();
        let h = HVector::from_fn(q.clone(), |u| (3.0 * u).cos()).unwrap();
        let op = OperatorRep::rank_one(&a, &b).unwrap();
        let got = apply_operator(&op, &h).unwrap();
        let want = a.scaled(inner_product(&b, &h).unwrap());
        assert!((got.coeffs() - want.coeffs()).amax() < 1e-14);
        let zero = apply_operator(&OperatorRep::zeros(q), &h).unwrap();
        assert_eq!(zero.coeffs().amax(), 0.0);
    }

    #[test]
    fn hs_norm_of_spectral_sums() {
        let q = unit(201);
        let p1 = HVector::from_fn(q.clone(), |u| SQRT_2 * (2.0 * PI * u).sin()).unwrap();
        let p2 = HVector::from_fn(q.clone(), |u| SQRT_2 * (2.0 * PI * u).cos()).unwrap();
        assert_eq!(hs_norm(&OperatorRep::zeros(q.clone())), 0.0);
        let one = OperatorRep::rank_one(&p1, &p1).unwrap();
        assert!((hs_norm(&one) - 1.0).abs() < 1e-10);
        let two = OperatorRep::spectral_sum(&[1.0, 2.0], &[p1, p2], q).unwrap();
        assert!((hs_norm(&two) - 5f64.sqrt()).abs() < 1e-6);
    }

    fn random_setup(m: usize, seed: &[f64]) -> (Arc<Quadrature>, DMatrix<f64>) {
        let mut points = vec![0.0];
        for i in 1..m {
            points.push(points[i - 1] + 0.05 + seed[i % seed.len()].abs());
        }
        let q = Quadrature::trapezoid(points).unwrap().shared();
        let k = DMatrix::from_fn(m, m, |i, j| seed[(i * 31 + j * 17) % seed.len()]);
        (q, k)
    }

    proptest! {
        #[test]
        fn inner_product_is_symmetric_and_bilinear(
            f in prop::collection::vec(-5.0f64..5.0, 8),
            g in prop::collection::vec(-5.0f64..5.0, 8),
            h in prop::collection::vec(-5.0f64..5.0, 8),
            a in -3.0f64..3.0,
        ) {
            let q = Quadrature::trapezoid(vec![0.0, 0.1, 0.15, 0.4, 0.5, 0.8, 0.95, 1.0]).unwrap().shared();
            let f = HVector::new(DVector::from_vec(f), q.clone()).unwrap();
            let g = HVector::new(DVector::from_vec(g), q.clone()).unwrap();
            let h = HVector::new(DVector::from_vec(h), q).unwrap();
            let fg = inner_product(&f, &g).unwrap();
            prop_assert!((fg - inner_product(&g, &f).unwrap()).abs() < 1e-12);
            let lhs = inner_product(&f.axpy(a, &h).unwrap(), &g).unwrap();
            let rhs = fg + a * inner_product(&h, &g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn adjoint_identity(seed in prop::collection::vec(-2.0f64..2.0, 13), m in 1usize..12) {
            let m = m + 1;
            let (q, k) = random_setup(m, &seed);
            let op = OperatorRep::new(k, q.clone()).unwrap();
            let f = HVector::from_fn(q.clone(), |u| (u * 1.7).sin() + 0.2).unwrap();
            let g = HVector::from_fn(q, |u| u.cos() - u).unwrap();
            let lhs = inner_product(&apply_operator(&op, &f).unwrap(), &g).unwrap();
            let rhs = inner_product(&f, &apply_operator(&op.adjoint(), &g).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn hs_norm_matches_orthonormal_basis_sum(seed in prop::collection::vec(-2.0f64..2.0, 11), m in 1usize..10) {
            let m = m + 1;
            let (q, k) = random_setup(m, &seed);
            let op = OperatorRep::new(k, q.clone()).unwrap();
            // e_j = δ_j / sqrt(w_j) is orthonormal for the quadrature inner product
            let mut total = 0.0;
            for j in 0..m {
                let mut c = DVector::zeros(m);
                c[j] = 1.0 / q.weights()[j].sqrt();
                let e = HVector::new(c, q.clone()).unwrap();
                total += norm(&apply_operator(&op, &e).unwrap()).powi(2);
            }
            prop_assert!((hs_norm(&op) - total.sqrt()).abs() < 1e-8);
        }

        #[test]
        fn center_panel_idempotent(vals in prop::collection::vec(-10.0f64..10.0, 12)) {
            let q = Quadrature::euclidean(3).unwrap().shared();
            let panel = CurvePanel::new(DMatrix::from_row_slice(4, 3, &vals), q).unwrap();
            let (a, _) = center_panel(&panel);
            let (b, _) = center_panel(&a);
            prop_assert!((a.values() - b.values()).amax() < 1e-12);
        }
    }
}
