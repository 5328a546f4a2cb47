//! Uniform periodic grid on the square [-L, L)² and its Fourier machinery.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points per axis and half-width of the computational box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub extent: f64,
}

impl GridSpec {
    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {} is not a power of two", self.n)));
        }
        if !(16..=1024).contains(&self.n) {
            return Err(Error::InvalidGrid(format!("n = {} outside [16, 1024]", self.n)));
        }
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::InvalidGrid(format!("extent L = {} must be positive", self.extent)));
        }
        if !(4.0..=32.0).contains(&self.extent) {
            return Err(Error::InvalidGrid(format!("extent L = {} outside [4, 32]", self.extent)));
        }
        Ok(())
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid(n={}, L={})", self.n, self.extent)
    }
}

/// Immutable grid context: coordinates, wavenumbers, trap potential and FFT
/// plans. Shared between fields through `Arc`.
///
/// Samples are stored row-major: index `i * n + j` holds `u(x_i, y_j)` with
/// `x_i = -L + i h`.
pub struct Grid {
    spec: GridSpec,
    coords: Vec<f64>,
    wavenumbers: Vec<f64>,
    k2: Vec<f64>,
    potential: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

pub fn build_grid(n: usize, extent: f64) -> Result<Arc<Grid>> {
    Grid::new(GridSpec { n, extent }).map(Arc::new)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let h = spec.spacing();
        let coords: Vec<f64> = (0..n).map(|j| -spec.extent + j as f64 * h).collect();
        let dk = std::f64::consts::PI / spec.extent;
        let wavenumbers: Vec<f64> = (0..n)
            .map(|m| {
                let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                m * dk
            })
            .collect();
        let mut k2 = vec![0.0; n * n];
        let mut potential = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k2[i * n + j] = wavenumbers[i].powi(2) + wavenumbers[j].powi(2);
                potential[i * n + j] = coords[i].powi(2) + coords[j].powi(2);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self {
            spec,
            coords,
            wavenumbers,
            k2,
            potential,
            fwd,
            inv,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    /// Quadrature weight h² of the periodic trapezoid rule.
    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(2)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// |k|² on the Fourier grid, same layout as the samples.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Largest |k|² represented on the grid.
    pub fn k2_max(&self) -> f64 {
        2.0 * (std::f64::consts::PI / self.spacing()).powi(2)
    }

    /// Trap potential V(x) = |x|² at every sample.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Index of the point reflected through the origin along each axis,
    /// using periodic wraparound (x_0 = -L is its own mirror).
    pub fn mirror(&self, i: usize) -> usize {
        (self.spec.n - i) % self.spec.n
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.cell_area() * f.iter().sum::<f64>()
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cell_area() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Unnormalized forward 2D DFT in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse 2D DFT in place, normalized so that `inverse(forward(u)) = u`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.spec.n;
        assert_eq!(data.len(), n * n);
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, n);
    }

    /// Applies a real Fourier multiplier to complex samples.
    pub fn fourier_multiply(&self, u: &[Complex64], multiplier: &[f64]) -> Vec<Complex64> {
        let mut buf = u.to_vec();
        self.forward(&mut buf);
        buf.iter_mut().zip(multiplier).for_each(|(z, m)| *z *= m);
        self.inverse(&mut buf);
        buf
    }

    pub fn neg_laplacian(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.fourier_multiply(u, &self.k2)
    }

    /// -Δu for a real field. The multiplier is real and even, so the result
    /// is real up to rounding and the imaginary part is discarded.
    pub fn neg_laplacian_real(&self, u: &[f64]) -> Vec<f64> {
        let buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.neg_laplacian(&buf).into_iter().map(|z| z.re).collect()
    }

    /// ‖∇u‖₂² through Parseval, consistent with ⟨-Δu, u⟩.
    pub fn gradient_norm_sq(&self, u: &[Complex64]) -> f64 {
        let mut buf = u.to_vec();
        self.forward(&mut buf);
        let sum: f64 = buf.iter().zip(&self.k2).map(|(z, k2)| z.norm_sqr() * k2).sum();
        self.cell_area() * sum / self.len() as f64
    }

    /// Spectral partial derivatives (∂ₓu, ∂ᵧu); the Nyquist mode is dropped.
    pub fn gradient(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.spec.n;
        let mut hat = u.to_vec();
        self.forward(&mut hat);
        let mut dx = hat.clone();
        let mut dy = hat;
        for i in 0..n {
            let kx = if i == n / 2 { 0.0 } else { self.wavenumbers[i] };
            for j in 0..n {
                let ky = if j == n / 2 { 0.0 } else { self.wavenumbers[j] };
                dx[i * n + j] *= Complex64::new(0.0, kx);
                dy[i * n + j] *= Complex64::new(0.0, ky);
            }
        }
        self.inverse(&mut dx);
        self.inverse(&mut dy);
        (dx, dy)
    }
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
