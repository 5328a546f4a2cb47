use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Real samples on a grid (profiles, densities, potentials).
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

/// Complex samples on a grid (wave functions).
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

/// Quadratic and quartic functionals of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    /// ‖u‖₂²
    pub l2sq: f64,
    /// ‖u‖₄⁴
    pub l4fourth: f64,
    /// ‖∇u‖₂²
    pub gradsq: f64,
    /// ‖xu‖₂²
    pub xmomsq: f64,
    /// ‖u‖²_Σ = ‖∇u‖₂² + ‖xu‖₂² + ‖u‖₂²
    pub sigma_norm_sq: f64,
}

/// Largest modulus over |x| ≥ 0.9 L. Fields are expected to have decayed
/// there; otherwise the periodic box distorts them.
fn boundary_decay_of(grid: &Grid, moduli: impl Iterator<Item = f64>) -> f64 {
    let n = grid.n();
    let cut = 0.9 * grid.spec().extent;
    let c = grid.coords();
    moduli
        .enumerate()
        .filter(|(idx, _)| c[idx / n].hypot(c[idx % n]) >= cut)
        .map(|(_, m)| m)
        .fold(0.0, f64::max)
}

pub(crate) fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.spec() != b.spec() {
        return Err(Error::GridMismatch {
            left: a.spec().to_string(),
            right: b.spec().to_string(),
        });
    }
    Ok(())
}

impl RealField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without validation; for internal arithmetic whose
    /// inputs are already known to be finite.
    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len();
        Self::from_vec(grid, vec![0.0; len])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let c = grid.coords();
        let values = (0..n * n).map(|idx| f(c[idx / n], c[idx % n])).collect();
        Self::from_vec(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid.spec(), other.grid.spec());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_vec(self.grid.clone(), values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.grid.dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn boundary_decay(&self) -> f64 {
        boundary_decay_of(&self.grid, self.values.iter().map(|v| v.abs()))
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_vec(
            self.grid.clone(),
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn norms(&self) -> Norms {
        self.to_complex().norms()
    }

    /// Largest deviation from the grid symmetries x ↦ -x, y ↦ -y and x ↔ y.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i * n + j];
                let mi = self.grid.mirror(i);
                let mj = self.grid.mirror(j);
                defect = defect
                    .max((v - self.values[mi * n + j]).abs())
                    .max((v - self.values[i * n + mj]).abs())
                    .max((v - self.values[j * n + i]).abs());
            }
        }
        defect
    }
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len();
        Self::from_vec(grid, vec![Complex64::default(); len])
    }

    pub fn from_parts(re: &RealField, im: &RealField) -> Self {
        let values = re
            .values()
            .iter()
            .zip(im.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Self::from_vec(re.grid().clone(), values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn re(&self) -> RealField {
        RealField::from_vec(self.grid.clone(), self.values.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> RealField {
        RealField::from_vec(self.grid.clone(), self.values.iter().map(|z| z.im).collect())
    }

    pub fn density(&self) -> RealField {
        RealField::from_vec(self.grid.clone(), self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn conj(&self) -> Self {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|z| z.conj()).collect())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::from_vec(self.grid.clone(), self.values.iter().map(|z| z * s).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::from_vec(self.grid.clone(), values)
    }

    /// L² inner product (u, v)₂ = ∫ u v̄.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn boundary_decay(&self) -> f64 {
        boundary_decay_of(&self.grid, self.values.iter().map(|z| z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norms(&self) -> Norms {
        let g = &self.grid;
        let area = g.cell_area();
        let l2sq = self.norm_sqr();
        let l4fourth = area * self.values.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>();
        let xmomsq = area
            * self
                .values
                .iter()
                .zip(g.potential())
                .map(|(z, v)| v * z.norm_sqr())
                .sum::<f64>();
        let gradsq = g.gradient_norm_sq(&self.values);
        Norms {
            l2sq,
            l4fourth,
            gradsq,
            xmomsq,
            sigma_norm_sq: gradsq + xmomsq + l2sq,
        }
    }
}

/// Σ-norm of a real field.
pub fn sigma_norm(u: &RealField) -> f64 {
    u.norms().sigma_norm_sq.sqrt()
}
