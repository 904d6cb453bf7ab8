//! Orthogonal projectors onto finite-dimensional subspaces and the
//! Hilbert–Schmidt distance between them.
//!
//! The distance `ρ(U, V) = ‖Π_U − Π_V‖₂` is a metric on finite-dimensional
//! subspaces. For subspaces of different dimensions it is at least
//! `sqrt(|dim U − dim V|)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{ensure_same, hs_norm, inner_product, HVector, OperatorRep, Quadrature};
use crate::spectral::EigenSystem;

const ORTHONORMAL_TOL: f64 = 1e-8;
const DEPENDENCE_TOL: f64 = 1e-10;

/// Orthonormal basis of a subspace of `H`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    vectors: Vec<HVector>,
    quadrature: Arc<Quadrature>,
}

impl SubspaceBasis {
    /// Wraps vectors that must already be orthonormal.
    pub fn new(vectors: Vec<HVector>) -> Result<Self> {
        let quadrature = match vectors.first() {
            Some(v) => v.quadrature().clone(),
            None => return Err(Error::Contract("use SubspaceBasis::empty for the zero subspace".into())),
        };
        Self::with_quadrature(vectors, quadrature)
    }

    pub fn with_quadrature(vectors: Vec<HVector>, quadrature: Arc<Quadrature>) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for (i, a) in vectors.iter().enumerate() {
            ensure_same(&quadrature, a.quadrature())?;
            for (j, b) in vectors.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner_product(a, b)? - target).abs());
            }
        }
        if worst > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(worst));
        }
        Ok(SubspaceBasis { vectors, quadrature })
    }

    pub fn empty(quadrature: Arc<Quadrature>) -> Self {
        SubspaceBasis { vectors: Vec::new(), quadrature }
    }

    /// Orthonormalizes a spanning set by Gram–Schmidt with a second
    /// reorthogonalization pass. Vectors that are numerically dependent on
    /// their predecessors are dropped.
    pub fn orthonormalize(vectors: &[HVector]) -> Result<Self> {
        let quadrature = match vectors.first() {
            Some(v) => v.quadrature().clone(),
            None => return Err(Error::Contract("cannot orthonormalize an empty set".into())),
        };
        let mut basis: Vec<HVector> = Vec::with_capacity(vectors.len());
        for v in vectors {
            ensure_same(&quadrature, v.quadrature())?;
            let original = v.norm();
            let mut w = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    w = w.axpy(-inner_product(&w, b)?, b)?;
                }
            }
            let len = w.norm();
            if len > DEPENDENCE_TOL * original && len > 0.0 {
                basis.push(w.scaled(1.0 / len));
            }
        }
        Self::with_quadrature(basis, quadrature)
    }

    /// Span of the leading `k` eigenvectors.
    pub fn from_eigensystem(eig: &EigenSystem, k: usize) -> Result<Self> {
        if k > eig.count() {
            return Err(Error::Contract(format!(
                "subspace of dimension {k} requested from {} eigenvectors",
                eig.count()
            )));
        }
        Self::with_quadrature(eig.vectors()[..k].to_vec(), eig.quadrature().clone())
    }

    pub fn vectors(&self) -> &[HVector] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn quadrature(&self) -> &Arc<Quadrature> {
        &self.quadrature
    }
}

/// Kernel `Σ_j ψ_j(u) ψ_j(v)` of the orthogonal projector onto the span.
pub fn projector(basis: &SubspaceBasis) -> OperatorRep {
    let m = basis.quadrature.len();
    let mut kernel = DMatrix::zeros(m, m);
    for v in &basis.vectors {
        kernel += v.coeffs() * v.coeffs().transpose();
    }
    OperatorRep::from_parts(kernel, basis.quadrature.clone())
}

/// `‖Π_U − Π_V‖₂`.
pub fn projector_distance(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    ensure_same(&u.quadrature, &v.quadrature)?;
    Ok(hs_norm(&projector(u).sub(&projector(v))?))
}

/// The subspace metric `ρ`, realized as the projector distance.
pub fn subspace_metric(u: &SubspaceBasis, v: &SubspaceBasis) -> Result<f64> {
    projector_distance(u, v)
}

/// Orthogonal projection `Σ_j ⟨h, ψ_j⟩ ψ_j` and its norm.
pub fn project(h: &HVector, basis: &SubspaceBasis) -> Result<(HVector, f64)> {
    ensure_same(h.quadrature(), &basis.quadrature)?;
    let mut out = HVector::zeros(basis.quadrature.clone());
    let mut sq = 0.0;
    for v in &basis.vectors {
        let c = inner_product(h, v)?;
        out = out.axpy(c, v)?;
        sq += c * c;
    }
    Ok((out, sq.sqrt()))
}
