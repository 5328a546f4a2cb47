//! Lowest eigenpairs of symmetric Schrödinger-type operators.
//!
//! Two routes: a dense symmetric eigensolve of the Hermite Galerkin matrix,
//! and shift-invert subspace iteration on the grid operator itself. The grid
//! route is the one consistent with every other grid computation; it starts
//! from the dense Ritz vectors when those are available.

use nalgebra::{DMatrix, SymmetricEigen};

use super::field::RealField;
use super::hermite::{hermite_functions, HermiteBasis};
use super::krylov::{conjugate_gradient, KrylovConfig};
use super::operator::{DenseHermite, OperatorRep, SchrodingerOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// L²-normalized eigenvector.
    pub vector: RealField,
    /// ‖Av - λv‖₂
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            guard: 4,
        }
    }
}

/// Eigenpairs of a dense Galerkin matrix, as (value, coefficients,
/// coefficient-space residual), ascending.
pub fn dense_lowest(dense: &DenseHermite, k: usize) -> Vec<(f64, Vec<f64>, f64)> {
    let m = &dense.matrix;
    let order = dense.basis.order();
    let dim = m.nrows();
    // even potentials leave the four axis-parity classes uncoupled
    let class = |idx: usize| ((idx / order) % 2) * 2 + (idx % order) % 2;
    let scale = m.amax().max(1.0);
    let mut coupled = 0.0_f64;
    for r in 0..dim {
        for c in 0..dim {
            if class(r) != class(c) {
                coupled = coupled.max(m[(r, c)].abs());
            }
        }
    }
    let blocks: Vec<Vec<usize>> = if coupled <= 1e-13 * scale {
        (0..4).map(|cl| (0..dim).filter(|&i| class(i) == cl).collect()).collect()
    } else {
        vec![(0..dim).collect()]
    };
    let mut pairs = Vec::new();
    for idxs in blocks.iter().filter(|b| !b.is_empty()) {
        let sub = DMatrix::from_fn(idxs.len(), idxs.len(), |r, c| m[(idxs[r], idxs[c])]);
        let eig = SymmetricEigen::new(sub);
        for (col, &val) in eig.eigenvalues.iter().enumerate() {
            let mut v = vec![0.0; dim];
            for (r, &i) in idxs.iter().enumerate() {
                v[i] = eig.eigenvectors[(r, col)];
            }
            pairs.push((val, v));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs
        .into_iter()
        .take(k)
        .map(|(val, v)| {
            let vv = nalgebra::DVector::from_column_slice(&v);
            let res = (m * &vv - &vv * val).norm();
            (val, v, res)
        })
        .collect()
}

/// Dense Hermite eigenpairs with vectors sampled back on the grid.
pub fn dense_eigenpairs(a: &OperatorRep, k: usize) -> Result<Vec<Eigenpair>> {
    let dense = a
        .dense
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("operator has no dense Hermite matrix".into()))?;
    Ok(dense_lowest(dense, k)
        .into_iter()
        .map(|(value, c, residual)| {
            let mut vector = dense.basis.to_grid(&c);
            let nrm = vector.l2_norm();
            vector.values_mut().iter_mut().for_each(|x| *x /= nrm);
            Eigenpair { value, vector, residual }
        })
        .collect())
}

/// The `k` smallest eigenpairs of the grid operator.
pub fn lowest_eigenpairs(a: &OperatorRep, k: usize) -> Result<Vec<Eigenpair>> {
    lowest_eigenpairs_with(a, k, &EigenConfig::default())
}

pub fn lowest_eigenpairs_with(a: &OperatorRep, k: usize, cfg: &EigenConfig) -> Result<Vec<Eigenpair>> {
    if k == 0 || k > 10 {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..=10")));
    }
    let block = k + cfg.guard;
    let start: Vec<RealField> = match &a.dense {
        Some(_) => dense_eigenpairs(a, block)?.into_iter().map(|p| p.vector).collect(),
        None => default_block(&a.op, block),
    };
    subspace_iteration(&a.op, k, start, cfg)
}

/// Low-order Hermite functions on the grid, in H₀ energy order.
fn default_block(op: &SchrodingerOperator, block: usize) -> Vec<RealField> {
    let mut orders: Vec<(usize, usize)> = (0..8).flat_map(|a| (0..8).map(move |b| (a, b))).collect();
    orders.sort_by_key(|&(a, b)| (a + b, a));
    orders
        .into_iter()
        .take(block)
        .map(|(p, q)| {
            RealField::from_fn(op.grid().clone(), |x, y| {
                hermite_functions(x, p + 1)[p] * hermite_functions(y, q + 1)[q]
            })
        })
        .collect()
}

fn orthonormalize(vs: Vec<Vec<f64>>, weight: f64) -> Vec<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        for _ in 0..2 {
            for q in &out {
                let p = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= p * qi);
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= nrm);
            out.push(v);
        }
    }
    out
}

fn subspace_iteration(
    op: &SchrodingerOperator,
    k: usize,
    start: Vec<RealField>,
    cfg: &EigenConfig,
) -> Result<Vec<Eigenpair>> {
    let grid = op.grid().clone();
    let w = grid.cell_area();
    let shift = op.lower_bound() - 0.5;
    let shifted = op.with_shift(op.shift() + shift);
    let inner = KrylovConfig {
        tol: 1e-13,
        ..KrylovConfig::default()
    };
    let mut basis = orthonormalize(start.into_iter().map(|f| f.into_values()).collect(), w);
    let mut best = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let b = basis.len();
        let images: Vec<Vec<f64>> = basis.iter().map(|v| op.apply_real(v)).collect();
        let h = DMatrix::from_fn(b, b, |i, j| {
            let s: f64 = basis[i].iter().zip(&images[j]).map(|(x, y)| x * y).sum();
            w * s
        });
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let mut ritz = Vec::with_capacity(b);
        let mut worst: f64 = 0.0;
        for (rank, &col) in order.iter().enumerate() {
            let theta = eig.eigenvalues[col];
            let len = basis[0].len();
            let mut x = vec![0.0; len];
            let mut ax = vec![0.0; len];
            for i in 0..b {
                let y = eig.eigenvectors[(i, col)];
                x.iter_mut().zip(&basis[i]).for_each(|(xi, vi)| *xi += y * vi);
                ax.iter_mut().zip(&images[i]).for_each(|(xi, vi)| *xi += y * vi);
            }
            let res = (w * ax.iter().zip(&x).map(|(a, v)| (a - theta * v).powi(2)).sum::<f64>()).sqrt();
            if rank < k {
                worst = worst.max(res);
            }
            ritz.push((theta, x, res));
        }
        best = best.min(worst);
        if worst < cfg.tol {
            return Ok(ritz
                .into_iter()
                .take(k)
                .map(|(value, x, residual)| {
                    let mut vector = RealField::from_vec(grid.clone(), x);
                    // fix the sign: positive mass-weighted sum, else first large entry
                    let s = vector.integral();
                    let flip = if s.abs() > 1e-8 {
                        s < 0.0
                    } else {
                        vector.values().iter().find(|v| v.abs() > 1e-6).is_some_and(|v| *v < 0.0)
                    };
                    if flip {
                        vector.values_mut().iter_mut().for_each(|v| *v = -*v);
                    }
                    Eigenpair { value, vector, residual }
                })
                .collect());
        }
        let mut next = Vec::with_capacity(b);
        for (theta, x, _) in &ritz {
            let guess: Vec<f64> = x.iter().map(|v| v / (theta - shift)).collect();
            let (y, _) = conjugate_gradient(|u| shifted.apply_real(u), x, Some(&guess), &inner)?;
            next.push(y);
        }
        basis = orthonormalize(next, w);
    }
    Err(Error::NoConvergence {
        method: "shift-invert subspace iteration",
        iterations: cfg.max_iter,
        residual: best,
    })
}

/// Convenience: the H₀ operator with its exact dense matrix.
pub fn h0_rep(basis: std::sync::Arc<HermiteBasis>) -> Result<OperatorRep> {
    OperatorRep::with_dense(SchrodingerOperator::h0(basis.grid().clone()), basis, 1e-12)
}
