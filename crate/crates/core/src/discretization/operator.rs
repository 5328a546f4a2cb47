use std::sync::Arc;

use num_complex::Complex64;

use super::field::{check_same_grid, ComplexField, RealField};
use super::grid::Grid;
use super::hermite::HermiteBasis;
use crate::error::{Error, Result};

/// Schrödinger-type operator `-Δ + |x|² + W(x) - shift` on the grid.
///
/// H₀, H₀ - c, L₋ and L₊ are all of this form; the Laplacian acts through
/// the exact Fourier multiplier and W pointwise.
#[derive(Debug, Clone)]
pub struct SchrodingerOperator {
    grid: Arc<Grid>,
    extra: Option<Vec<f64>>,
    shift: f64,
}

impl SchrodingerOperator {
    pub fn h0(grid: Arc<Grid>) -> Self {
        Self {
            grid,
            extra: None,
            shift: 0.0,
        }
    }

    pub fn new(grid: Arc<Grid>, extra: Option<&RealField>, shift: f64) -> Result<Self> {
        if let Some(w) = extra {
            check_same_grid(&grid, w.grid())?;
        }
        Ok(Self {
            grid,
            extra: extra.map(|w| w.values().to_vec()),
            shift,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn extra(&self) -> Option<&[f64]> {
        self.extra.as_deref()
    }

    /// Same operator with a different scalar shift.
    pub fn with_shift(&self, shift: f64) -> Self {
        Self {
            shift,
            ..self.clone()
        }
    }

    /// Pointwise part |x|² + W - shift.
    fn local(&self, idx: usize) -> f64 {
        let w = self.extra.as_ref().map_or(0.0, |w| w[idx]);
        self.grid.potential()[idx] + w - self.shift
    }

    /// A value strictly below the spectrum: the grid H₀ is bounded below by
    /// 2 up to discretization error, and W by its minimum.
    pub fn lower_bound(&self) -> f64 {
        let wmin = self
            .extra
            .as_ref()
            .map_or(0.0, |w| w.iter().cloned().fold(f64::INFINITY, f64::min));
        2.0 + wmin.min(0.0) - self.shift - 1e-6
    }

    pub fn apply_real(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.grid.neg_laplacian_real(u);
        for (idx, o) in out.iter_mut().enumerate() {
            *o += self.local(idx) * u[idx];
        }
        out
    }

    pub fn apply_field(&self, u: &RealField) -> RealField {
        RealField::from_vec(u.grid().clone(), self.apply_real(u.values()))
    }

    /// Real and imaginary parts go through separate transforms, so rounding
    /// of a large part does not leak into a small one.
    pub fn apply_complex(&self, u: &ComplexField) -> ComplexField {
        let re: Vec<f64> = u.values().iter().map(|z| z.re).collect();
        let im: Vec<f64> = u.values().iter().map(|z| z.im).collect();
        let (a, b) = (self.apply_real(&re), self.apply_real(&im));
        let out = a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect();
        ComplexField::from_vec(u.grid().clone(), out)
    }
}

/// A symmetric operator with an optional dense Galerkin matrix in the
/// tensor-Hermite basis.
#[derive(Debug, Clone)]
pub struct OperatorRep {
    pub op: SchrodingerOperator,
    pub dense: Option<DenseHermite>,
}

#[derive(Debug, Clone)]
pub struct DenseHermite {
    pub basis: Arc<HermiteBasis>,
    pub matrix: nalgebra::DMatrix<f64>,
}

impl OperatorRep {
    pub fn grid_only(op: SchrodingerOperator) -> Self {
        Self { op, dense: None }
    }

    /// Attaches the dense Hermite matrix, rejecting assembly asymmetry above
    /// `sym_tol` (relative to the largest entry).
    pub fn with_dense(op: SchrodingerOperator, basis: Arc<HermiteBasis>, sym_tol: f64) -> Result<Self> {
        let matrix = basis.project_operator(&op);
        let scale = matrix.amax().max(1.0);
        let defect = (&matrix - matrix.transpose()).amax() / scale;
        if defect > sym_tol {
            return Err(Error::Asymmetric { defect });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self {
            op,
            dense: Some(DenseHermite { basis, matrix }),
        })
    }
}

/// Result of applying H₀ with the boundary-decay diagnostic.
#[derive(Debug, Clone)]
pub struct H0Applied {
    pub field: ComplexField,
    /// Set when the input had not decayed below 1e-8·‖u‖∞ near the box edge.
    pub decay_warning: bool,
}

/// -Δu + |x|²u with the Laplacian through the Fourier multiplier.
pub fn apply_h0(u: &ComplexField) -> H0Applied {
    let op = SchrodingerOperator::h0(u.grid().clone());
    let decay_warning = u.boundary_decay() > 1e-8 * u.max_abs();
    H0Applied {
        field: op.apply_complex(u),
        decay_warning,
    }
}

/// Symmetry defect |⟨Au, v⟩ - ⟨u, Av⟩|.
pub fn symmetry_defect(op: &SchrodingerOperator, u: &RealField, v: &RealField) -> f64 {
    (op.apply_field(u).dot(v) - u.dot(&op.apply_field(v))).abs()
}
