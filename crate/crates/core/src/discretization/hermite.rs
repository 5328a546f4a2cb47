//! Tensor-Hermite basis φ_{k₁k₂}(x, y) = h_{k₁}(x) h_{k₂}(y), in which H₀ is
//! diagonal with eigenvalues 2(k₁ + k₂ + 1).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::field::{check_same_grid, RealField};
use super::grid::Grid;
use super::operator::SchrodingerOperator;
use crate::error::{Error, Result};

/// Normalized Hermite functions h_0..h_{count-1} at `x`, by the stable
/// three-term recurrence.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(count);
    if count == 0 {
        return h;
    }
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    h.push(h0);
    if count > 1 {
        h.push(std::f64::consts::SQRT_2 * x * h0);
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * h[k] - (kf / (kf + 1.0)).sqrt() * h[k - 1];
        h.push(next);
    }
    h
}

/// Gauss–Hermite nodes for `count` points and the weights λ_p of
/// ∫ f ≈ Σ λ_p f(x_p), valid for f = (polynomial of degree < 2·count)·e^{-x²}.
pub fn gauss_hermite(count: usize) -> (Vec<f64>, Vec<f64>) {
    // Golub–Welsch on the Jacobi matrix, then Newton on h_count
    let mut jac = DMatrix::<f64>::zeros(count, count);
    for k in 1..count {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().cloned().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = count as f64;
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_functions(*x, count + 1);
            let deriv = (2.0 * nf).sqrt() * h[count - 1] - *x * h[count];
            if deriv != 0.0 {
                *x -= h[count] / deriv;
            }
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| 1.0 / hermite_functions(x, count).iter().map(|v| v * v).sum::<f64>())
        .collect();
    (nodes, weights)
}

/// Change of basis between grid samples and K×K tensor-Hermite coefficients.
///
/// Coefficient `c[a*K + b]` multiplies h_a(x) h_b(y). Grid samples are carried
/// to the Gauss–Hermite nodes by trigonometric interpolation and projected
/// there with the Gauss–Hermite rule.
pub struct HermiteBasis {
    order: usize,
    grid: Arc<Grid>,
    /// h_k(x_j), row k, column j
    on_grid: DMatrix<f64>,
    /// λ_p h_k(g_p), row k, column p
    weighted_at_nodes: DMatrix<f64>,
    /// trigonometric interpolation from grid to nodes, row p, column j
    interp: DMatrix<f64>,
}

impl fmt::Debug for HermiteBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermiteBasis")
            .field("order", &self.order)
            .field("grid", &self.grid.spec())
            .finish()
    }
}

impl HermiteBasis {
    pub fn new(grid: Arc<Grid>, order: usize) -> Result<Self> {
        if order == 0 || order > 64 {
            return Err(Error::InvalidArgument(format!("Hermite order {order} outside 1..=64")));
        }
        let n = grid.n();
        let xs = grid.coords();
        let mut on_grid = DMatrix::zeros(order, n);
        for (j, &x) in xs.iter().enumerate() {
            for (k, v) in hermite_functions(x, order).into_iter().enumerate() {
                on_grid[(k, j)] = v;
            }
        }
        let (nodes, weights) = gauss_hermite(order);
        let mut weighted_at_nodes = DMatrix::zeros(order, order);
        for (p, (&g, &w)) in nodes.iter().zip(&weights).enumerate() {
            for (k, v) in hermite_functions(g, order).into_iter().enumerate() {
                weighted_at_nodes[(k, p)] = w * v;
            }
        }
        let ks: Vec<f64> = (1..=n / 2).map(|m| m as f64 * std::f64::consts::PI / grid.spec().extent).collect();
        let mut interp = DMatrix::zeros(order, n);
        for (p, &g) in nodes.iter().enumerate() {
            for (j, &x) in xs.iter().enumerate() {
                let d = g - x;
                let mut s = 1.0;
                for (m, k) in ks.iter().enumerate() {
                    let c = (k * d).cos();
                    s += if m + 1 == n / 2 { c } else { 2.0 * c };
                }
                interp[(p, j)] = s / n as f64;
            }
        }
        Ok(Self {
            order,
            grid,
            on_grid,
            weighted_at_nodes,
            interp,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order * self.order
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// H₀ eigenvalue of basis element (k₁, k₂).
    pub fn eigenvalue(k1: usize, k2: usize) -> f64 {
        2.0 * (k1 + k2 + 1) as f64
    }

    pub fn index(&self, k1: usize, k2: usize) -> usize {
        k1 * self.order + k2
    }

    fn grid_matrix(&self, u: &RealField) -> DMatrix<f64> {
        let n = self.grid.n();
        DMatrix::from_fn(n, n, |i, j| u.values()[i * n + j])
    }

    /// Samples Σ c_{ab} h_a(x) h_b(y) on the grid.
    pub fn to_grid(&self, coeffs: &[f64]) -> RealField {
        let k = self.order;
        let c = DMatrix::from_fn(k, k, |a, b| coeffs[a * k + b]);
        let u = self.on_grid.transpose() * c * &self.on_grid;
        let n = self.grid.n();
        let values = (0..n * n).map(|idx| u[(idx / n, idx % n)]).collect();
        RealField::from_vec(self.grid.clone(), values)
    }

    /// Projects a grid field onto the basis through Gauss–Hermite quadrature.
    pub fn from_grid(&self, u: &RealField) -> Result<Vec<f64>> {
        check_same_grid(&self.grid, u.grid())?;
        let at_nodes = &self.interp * self.grid_matrix(u) * self.interp.transpose();
        let c = &self.weighted_at_nodes * at_nodes * self.weighted_at_nodes.transpose();
        let k = self.order;
        Ok((0..k * k).map(|idx| c[(idx / k, idx % k)]).collect())
    }

    /// Galerkin matrix of `-Δ + |x|² + W - shift`: H₀ exactly on the
    /// diagonal, W by the grid trapezoid rule (W is assumed to decay).
    pub fn project_operator(&self, op: &SchrodingerOperator) -> DMatrix<f64> {
        let k = self.order;
        let dim = k * k;
        let mut m = DMatrix::zeros(dim, dim);
        if let Some(w) = op.extra() {
            let n = self.grid.n();
            // pair products P[(a,c), i] = h_a(x_i) h_c(x_i)
            let pairs = DMatrix::from_fn(dim, n, |row, i| self.on_grid[(row / k, i)] * self.on_grid[(row % k, i)]);
            let wmat = DMatrix::from_fn(n, n, |i, j| w[i * n + j]);
            let t = &pairs * wmat;
            let mw = (t * pairs.transpose()) * self.grid.cell_area();
            // mw[(a,c),(b,d)] = ⟨h_a h_b, W h_c h_d⟩
            for a in 0..k {
                for c in 0..k {
                    for b in 0..k {
                        for d in 0..k {
                            m[(a * k + b, c * k + d)] = mw[(a * k + c, b * k + d)];
                        }
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                let idx = a * k + b;
                m[(idx, idx)] += Self::eigenvalue(a, b) - op.shift();
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::grid::build_grid;

    #[test]
    fn hermite_functions_are_orthonormal_under_gauss_hermite() {
        let count = 24;
        let (nodes, weights) = gauss_hermite(count);
        let vals: Vec<Vec<f64>> = nodes.iter().map(|&x| hermite_functions(x, count)).collect();
        for a in 0..count {
            for b in 0..count {
                let s: f64 = (0..count).map(|p| weights[p] * vals[p][a] * vals[p][b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "({a},{b}) -> {s}");
            }
        }
    }

    #[test]
    fn h0_value_at_origin() {
        let h = hermite_functions(0.0, 3);
        assert!((h[0] - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(h[1], 0.0);
    }

    #[test]
    fn round_trip_band_limited() {
        let g = build_grid(128, 8.0).unwrap();
        let basis = HermiteBasis::new(g, 40).unwrap();
        let mut c = vec![0.0; basis.dim()];
        for a in 0..8 {
            for b in 0..8 {
                c[basis.index(a, b)] = ((a * 7 + b * 3) as f64).sin() / (1.0 + (a + b) as f64);
            }
        }
        let u = basis.to_grid(&c);
        let back = basis.from_grid(&u).unwrap();
        let err = c.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "round trip error {err}");
        // Parseval
        let l2 = u.dot(&u);
        let csum: f64 = c.iter().map(|v| v * v).sum();
        assert!((l2 - csum).abs() < 1e-9 * csum);
    }
}
