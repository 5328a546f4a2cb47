//! L₋ = H₀ + Q₀² - μ₀ and L₊ = H₀ + 3Q₀² - μ₀ around a balanced ground state.

use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{
    conjugate_gradient, dense_eigenpairs, lowest_eigenpairs, minres, ComplexField, Grid, HermiteBasis, KrylovConfig,
    OperatorRep, RealField, SchrodingerOperator, DEFAULT_HERMITE_ORDER,
};
use crate::error::{Error, Result};
use crate::groundstate::{minimize_vm, residual_sp0, FlowConfig};

#[derive(Debug, Clone, Copy)]
pub struct PairConfig {
    /// Hermite modes per axis for the dense matrices; `None` skips them.
    pub hermite_order: Option<usize>,
    /// Relative factor c in kernel_tol = c·(1 + μ₀).
    pub kernel_factor: f64,
    pub inversion_tol: f64,
    pub ortho_tol: f64,
    /// Residual target of the Krylov solves.
    pub solve_tol: f64,
    /// Required ground-state residual of Q₀.
    pub input_tol: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            hermite_order: Some(DEFAULT_HERMITE_ORDER),
            kernel_factor: 1e-6,
            inversion_tol: 1e-6,
            ortho_tol: 1e-8,
            solve_tol: 1e-14,
            input_tol: 1e-8,
        }
    }
}

/// The two linearized operators with their spectral certificates.
#[derive(Debug, Clone)]
pub struct LinearizedPair {
    pub lminus: OperatorRep,
    pub lplus: OperatorRep,
    pub q0: RealField,
    pub mu0: f64,
    pub lminus_lambda_min: f64,
    pub lminus_lambda_2: f64,
    pub lplus_lambda_min: f64,
    /// |⟨e_min(L₋), Q₀/‖Q₀‖⟩|
    pub kernel_overlap: f64,
    pub kernel_tol: f64,
    /// Lowest eigenvalues of the dense Hermite matrices (L₋, L₊), if built.
    pub dense_lambda: Option<(f64, f64)>,
    /// Q'(μ₀) = L₊⁻¹Q₀
    pub q_prime: RealField,
    cfg: PairConfig,
    q_unit: Vec<f64>,
}

fn operator(q0: &RealField, factor: f64, mu0: f64) -> Result<SchrodingerOperator> {
    let w = q0.map(|v| factor * v * v);
    SchrodingerOperator::new(q0.grid().clone(), Some(&w), mu0)
}

fn rep(op: SchrodingerOperator, basis: Option<&Arc<HermiteBasis>>) -> Result<OperatorRep> {
    match basis {
        // assembly asymmetry above 1e-8 means a bug, not a regime
        Some(b) => OperatorRep::with_dense(op, b.clone(), 1e-8),
        None => Ok(OperatorRep::grid_only(op)),
    }
}

pub fn build_pair(q0: &RealField, mu0: f64) -> Result<LinearizedPair> {
    build_pair_with(q0, mu0, &PairConfig::default())
}

pub fn build_pair_with(q0: &RealField, mu0: f64, cfg: &PairConfig) -> Result<LinearizedPair> {
    let res = residual_sp0(q0, mu0)?;
    if res > cfg.input_tol {
        return Err(Error::InvalidArgument(format!(
            "Q0 is not a converged ground state: residual {res:.3e} > {:.1e}",
            cfg.input_tol
        )));
    }
    let grid = q0.grid().clone();
    let basis = match cfg.hermite_order {
        Some(k) => Some(Arc::new(HermiteBasis::new(grid.clone(), k)?)),
        None => None,
    };
    let lminus = rep(operator(q0, 1.0, mu0)?, basis.as_ref())?;
    let lplus = rep(operator(q0, 3.0, mu0)?, basis.as_ref())?;
    let dense_lambda = match (&lminus.dense, &lplus.dense) {
        (Some(_), Some(_)) => Some((dense_eigenpairs(&lminus, 1)?[0].value, dense_eigenpairs(&lplus, 1)?[0].value)),
        _ => None,
    };
    let em = lowest_eigenpairs(&lminus, 2)?;
    let ep = lowest_eigenpairs(&lplus, 1)?;
    let nrm = q0.l2_norm();
    let q_unit: Vec<f64> = q0.values().iter().map(|v| v / nrm).collect();
    let kernel_overlap = em[0].vector.dot(&RealField::new(grid.clone(), q_unit.clone())?).abs();
    let kernel_tol = cfg.kernel_factor * (1.0 + mu0);
    let mut pair = LinearizedPair {
        lminus,
        lplus,
        q0: q0.clone(),
        mu0,
        lminus_lambda_min: em[0].value,
        lminus_lambda_2: em[1].value,
        lplus_lambda_min: ep[0].value,
        kernel_overlap,
        kernel_tol,
        dense_lambda,
        q_prime: RealField::zeros(grid),
        cfg: *cfg,
        q_unit,
    };
    debug!(
        "pair: lambda(L-) = {:.3e}, {:.4}; lambda(L+) = {:.4}; overlap {:.9}",
        pair.lminus_lambda_min, pair.lminus_lambda_2, pair.lplus_lambda_min, pair.kernel_overlap
    );
    if pair.lminus_lambda_min.abs() >= kernel_tol {
        warn!("L- lowest eigenvalue {:.3e} exceeds kernel tolerance {kernel_tol:.1e}", pair.lminus_lambda_min);
    }
    pair.q_prime = pair.solve_lplus(q0)?;
    Ok(pair)
}

impl LinearizedPair {
    pub fn grid(&self) -> &Arc<Grid> {
        self.q0.grid()
    }

    pub fn config(&self) -> &PairConfig {
        &self.cfg
    }

    pub fn apply_lminus(&self, u: &RealField) -> RealField {
        self.lminus.op.apply_field(u)
    }

    pub fn apply_lplus(&self, u: &RealField) -> RealField {
        self.lplus.op.apply_field(u)
    }

    fn krylov(&self) -> KrylovConfig {
        KrylovConfig {
            tol: self.cfg.solve_tol,
            accept: 1e-10,
            ..KrylovConfig::default()
        }
    }

    fn project(&self, v: &mut [f64]) {
        let w = self.grid().cell_area();
        let p = w * v.iter().zip(&self.q_unit).map(|(a, b)| a * b).sum::<f64>();
        v.iter_mut().zip(&self.q_unit).for_each(|(x, q)| *x -= p * q);
    }

    /// Solves L₋u = rhs on Q₀^⊥, returning u ⊥ Q₀.
    pub fn solve_lminus_perp(&self, rhs: &RealField) -> Result<RealField> {
        let q = &self.q0;
        let inner = rhs.dot(q);
        let scale = rhs.l2_norm() * q.l2_norm();
        if inner.abs() > self.cfg.ortho_tol * scale {
            return Err(Error::NotOrthogonal {
                inner,
                relative: inner.abs() / scale,
            });
        }
        let mut b = rhs.values().to_vec();
        self.project(&mut b);
        let op = &self.lminus.op;
        let apply = |x: &[f64]| {
            let mut y = x.to_vec();
            self.project(&mut y);
            let mut out = op.apply_real(&y);
            self.project(&mut out);
            out
        };
        let cfg = self.krylov();
        let (mut x, _) = match conjugate_gradient(apply, &b, None, &cfg) {
            Ok(r) => r,
            Err(_) => minres(apply, &b, &cfg)?,
        };
        self.project(&mut x);
        RealField::new(self.grid().clone(), x)
    }

    /// Solves L₊u = rhs.
    pub fn solve_lplus(&self, rhs: &RealField) -> Result<RealField> {
        if self.lplus_lambda_min.abs() <= self.cfg.inversion_tol {
            return Err(Error::NearSingular {
                lambda_min: self.lplus_lambda_min,
            });
        }
        let op = &self.lplus.op;
        let cfg = self.krylov();
        let (x, _) = if self.lplus_lambda_min > 0.0 {
            match conjugate_gradient(|x| op.apply_real(x), rhs.values(), None, &cfg) {
                Ok(r) => r,
                Err(_) => minres(|x| op.apply_real(x), rhs.values(), &cfg)?,
            }
        } else {
            minres(|x| op.apply_real(x), rhs.values(), &cfg)?
        };
        RealField::new(self.grid().clone(), x)
    }

    /// L₊⁻¹ applied to real and imaginary parts.
    pub fn solve_lplus_complex(&self, rhs: &ComplexField) -> Result<ComplexField> {
        let re = self.solve_lplus(&rhs.re())?;
        let im = self.solve_lplus(&rhs.im())?;
        Ok(ComplexField::from_parts(&re, &im))
    }
}

/// One row of the small-mass eigenvalue study.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeRow {
    pub mass: f64,
    /// chem_potential - 2
    pub eta: f64,
    /// λ_min(H₀ + 3v² - μ)
    pub lambda_min: f64,
    pub ratio: f64,
    /// λ_min(H₀ - 3v² - μ), the cubic term with the opposite sign
    pub flipped_lambda_min: f64,
    pub flipped_ratio: f64,
}

/// λ_min(L₊)/η for small masses, alongside the flipped-sign operator.
pub fn bifurcation_slope(grid: Arc<Grid>, masses: &[f64], flow: &FlowConfig) -> Result<Vec<SlopeRow>> {
    masses
        .par_iter()
        .map(|&m| {
            let gs = minimize_vm(grid.clone(), m, flow)?;
            let eta = gs.chem_potential - 2.0;
            let lp = lowest_eigenpairs(&OperatorRep::grid_only(operator(&gs.field, 3.0, gs.chem_potential)?), 1)?;
            let la = lowest_eigenpairs(&OperatorRep::grid_only(operator(&gs.field, -3.0, gs.chem_potential)?), 1)?;
            Ok(SlopeRow {
                mass: m,
                eta,
                lambda_min: lp[0].value,
                ratio: lp[0].value / eta,
                flipped_lambda_min: la[0].value,
                flipped_ratio: la[0].value / eta,
            })
        })
        .collect()
}
