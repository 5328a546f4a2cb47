//! Constrained minimization of H at fixed mass by normalized gradient flow.

use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{
    conjugate_gradient, minres, phi1_reference, ComplexField, Grid, KrylovConfig, RealField, SchrodingerOperator,
};
use crate::error::{Error, Result};

/// Settings of the semi-implicit normalized gradient flow.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowConfig {
    pub tau: f64,
    pub max_iters: usize,
    /// Stop when |ΔH| < energy_tol·max(1, H).
    pub energy_tol: f64,
    /// Newton refinement target for the stationary residual; 0 disables it.
    pub polish_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            max_iters: 200_000,
            energy_tol: 1e-12,
            polish_tol: 1e-11,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.energy_tol > 0.0) || self.max_iters == 0 || self.polish_tol < 0.0 {
            return Err(Error::InvalidArgument(format!("bad flow configuration {self:?}")));
        }
        Ok(())
    }
}

/// M, H₀, H and S_μ of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    pub mass: f64,
    /// ½(‖∇u‖² + ‖xu‖²)
    pub h0: f64,
    /// H₀ + ¼‖u‖₄⁴
    pub h: f64,
    /// H - (μ/2)M
    pub s_mu: f64,
}

pub fn energy_functionals(u: &ComplexField, mu: f64) -> Energies {
    let n = u.norms();
    let h0 = 0.5 * (n.gradsq + n.xmomsq);
    let h = h0 + 0.25 * n.l4fourth;
    Energies {
        mass: n.l2sq,
        h0,
        h,
        s_mu: h - 0.5 * mu * n.l2sq,
    }
}

fn energy_real(u: &RealField) -> f64 {
    energy_functionals(&u.to_complex(), 0.0).h
}

/// L² gradient of H: H₀u + u³.
pub fn energy_gradient(u: &RealField) -> RealField {
    let h0 = SchrodingerOperator::h0(u.grid().clone());
    let mut g = h0.apply_field(u);
    g.values_mut().iter_mut().zip(u.values()).for_each(|(gi, v)| *gi += v * v * v);
    g
}

/// The constrained minimizer v_M with its diagnostics.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub field: RealField,
    pub mass: f64,
    /// μ_M = H(v_M)
    pub energy: f64,
    /// (‖∇v‖² + ‖xv‖² + ‖v‖₄⁴)/M
    pub chem_potential: f64,
    /// ‖H₀v + v³ - μv‖₂/‖v‖₂
    pub residual: f64,
    pub iterations: usize,
    pub rejected_steps: usize,
    pub newton_steps: usize,
    pub min_value: f64,
    pub symmetry_defect: f64,
    /// Largest increase of v along the positive axes.
    pub monotonicity_defect: f64,
    pub boundary_decay: f64,
    /// Set for M < 1e-8, where discretization error dominates.
    pub tiny_mass: bool,
}

impl GroundState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.field.grid()
    }

    pub fn l4fourth(&self) -> f64 {
        self.field.values().iter().map(|v| v.powi(4)).sum::<f64>() * self.grid().cell_area()
    }

    pub const CSV_HEADER: &'static str = "M,energy,chem_potential,l4fourth,residual,iterations";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.6e},{}",
            self.mass,
            self.energy,
            self.chem_potential,
            self.l4fourth(),
            self.residual,
            self.iterations
        )
    }
}

/// ‖H₀u + u³ - μu‖₂ / ‖u‖₂.
pub fn residual_sp0(u: &RealField, mu: f64) -> Result<f64> {
    let nrm = u.l2_norm();
    if nrm == 0.0 {
        return Err(Error::InvalidArgument("zero field has no relative residual".into()));
    }
    let r = energy_gradient(u).axpy(-mu, u);
    Ok(r.l2_norm() / nrm)
}

/// (‖∇u‖² + ‖xu‖² + ‖u‖₄⁴)/‖u‖².
pub fn chemical_potential(u: &RealField) -> f64 {
    let n = u.norms();
    (n.gradsq + n.xmomsq + n.l4fourth) / n.l2sq
}

fn rescale(u: &RealField, mass: f64) -> RealField {
    let m = u.dot(u);
    u.scaled((mass / m).sqrt())
}

/// Start of the flow: √M·φ₁, or the Thomas–Fermi profile for M > 50.
pub fn initial_guess(grid: Arc<Grid>, mass: f64) -> RealField {
    if mass > 50.0 {
        let nu = (2.0 * mass / std::f64::consts::PI).sqrt();
        let tf = RealField::from_fn(grid, |x, y| (nu - x * x - y * y).max(0.0).sqrt());
        rescale(&tf, mass)
    } else {
        phi1_reference(grid).scaled(mass.sqrt())
    }
}

pub fn minimize_vm(grid: Arc<Grid>, mass: f64, cfg: &FlowConfig) -> Result<GroundState> {
    minimize_vm_from(grid.clone(), mass, None, cfg)
}

/// As [`minimize_vm`], starting from `start` rescaled to mass `mass`.
pub fn minimize_vm_from(grid: Arc<Grid>, mass: f64, start: Option<&RealField>, cfg: &FlowConfig) -> Result<GroundState> {
    cfg.validate()?;
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
    }
    let tiny_mass = mass < 1e-8;
    if tiny_mass {
        warn!("M = {mass:e} is below 1e-8; result dominated by discretization error");
    }
    if let (Some(s), true) = (start, cfg.polish_tol > 0.0) {
        // continuation from a nearby ground state: Newton alone usually suffices
        let u = rescale(s, mass);
        let mu = chemical_potential(&u);
        let (u, mu, steps) = newton_polish(u, mu, mass)?;
        if residual_sp0(&u, mu)? < cfg.polish_tol && energy_real(&u) <= energy_real(&rescale(s, mass)) + 1e-12 {
            return finish(u, mass, mu, 0, 0, steps, tiny_mass);
        }
        debug!("continuation at M = {mass} failed, running the flow");
    }
    let mut u = match start {
        Some(s) => rescale(s, mass),
        None => initial_guess(grid.clone(), mass),
    };
    let h0 = SchrodingerOperator::h0(grid.clone());
    let krylov = KrylovConfig {
        tol: 1e-13,
        ..KrylovConfig::default()
    };
    let mut energy = energy_real(&u);
    let mut tau = cfg.tau;
    let mut iterations = 0;
    let mut rejected = 0;
    let mut converged = false;
    let mut last_gap = f64::INFINITY;
    while iterations < cfg.max_iters {
        // (Id + τH₀)u* = u - τu³, i.e. (H₀ + 1/τ)u* = (u - τu³)/τ
        let shifted = h0.with_shift(-1.0 / tau);
        let rhs: Vec<f64> = u.values().iter().map(|&v| (v - tau * v * v * v) / tau).collect();
        let (star, _) = conjugate_gradient(|x| shifted.apply_real(x), &rhs, Some(u.values()), &krylov)?;
        let next = rescale(&RealField::new(grid.clone(), star)?, mass);
        let e_next = energy_real(&next);
        iterations += 1;
        if e_next > energy + 1e-15 * energy.abs().max(1.0) {
            rejected += 1;
            tau *= 0.5;
            if tau < 1e-12 {
                break;
            }
            continue;
        }
        last_gap = (energy - e_next).abs();
        u = next;
        energy = e_next;
        if last_gap < cfg.energy_tol * energy.max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FlowStalled {
            iterations,
            gap: last_gap,
        });
    }
    debug!("flow at M = {mass}: {iterations} iterations, {rejected} rejected");

    let mut newton_steps = 0;
    let mut mu = chemical_potential(&u);
    if cfg.polish_tol > 0.0 {
        (u, mu, newton_steps) = newton_polish(u, mu, mass)?;
    }
    finish(u, mass, mu, iterations, rejected, newton_steps, tiny_mass)
}

/// Newton on F(u, μ) = H₀u + u³ - μu = 0, G(u) = ‖u‖² - M = 0.
fn newton_polish(mut u: RealField, mut mu: f64, mass: f64) -> Result<(RealField, f64, usize)> {
    let grid = u.grid().clone();
    let krylov = KrylovConfig {
        tol: 1e-9,
        ..KrylovConfig::default()
    };
    let mut steps = 0;
    let mut res = residual_sp0(&u, mu)?;
    // run on to the rounding floor
    while steps < 12 {
        let w3: Vec<f64> = u.values().iter().map(|v| 3.0 * v * v).collect();
        let lplus = SchrodingerOperator::new(grid.clone(), Some(&RealField::new(grid.clone(), w3)?), mu)?;
        let f = energy_gradient(&u).axpy(-mu, &u);
        let neg_f: Vec<f64> = f.values().iter().map(|v| -v).collect();
        let solve = |b: &[f64]| -> Result<Vec<f64>> {
            match conjugate_gradient(|x| lplus.apply_real(x), b, None, &krylov) {
                Ok((x, _)) => Ok(x),
                Err(_) => minres(|x| lplus.apply_real(x), b, &krylov).map(|(x, _)| x),
            }
        };
        let (Ok(w1), Ok(w2)) = (solve(&neg_f), solve(u.values())) else {
            break;
        };
        let w1 = RealField::new(grid.clone(), w1)?;
        let w2 = RealField::new(grid.clone(), w2)?;
        let g = u.dot(&u) - mass;
        let dmu = (-g - 2.0 * u.dot(&w1)) / (2.0 * u.dot(&w2));
        let next = u.axpy(1.0, &w1.axpy(dmu, &w2));
        let next_mu = mu + dmu;
        let next_res = residual_sp0(&next, next_mu)?;
        steps += 1;
        if next_res >= res {
            break;
        }
        let stalled = next_res > 0.5 * res;
        u = next;
        mu = next_mu;
        res = next_res;
        if stalled {
            break;
        }
    }
    // return to the mass sphere exactly; μ from the Rayleigh quotient
    let u = rescale(&u, mass);
    let mu = chemical_potential(&u);
    Ok((u, mu, steps))
}

fn finish(
    u: RealField,
    mass: f64,
    mu: f64,
    iterations: usize,
    rejected_steps: usize,
    newton_steps: usize,
    tiny_mass: bool,
) -> Result<GroundState> {
    let min_value = u.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = u.max_abs();
    if min_value < -1e-10 * scale.max(1.0) {
        return Err(Error::NegativeDensity { value: min_value });
    }
    let grid = u.grid().clone();
    let n = grid.n();
    let mid = n / 2;
    let mut monotonicity_defect: f64 = 0.0;
    for k in mid..n - 1 {
        let along_x = u.values()[(k + 1) * n + mid] - u.values()[k * n + mid];
        let along_y = u.values()[mid * n + k + 1] - u.values()[mid * n + k];
        monotonicity_defect = monotonicity_defect.max(along_x).max(along_y);
    }
    Ok(GroundState {
        residual: residual_sp0(&u, mu)?,
        energy: energy_real(&u),
        chem_potential: mu,
        mass,
        iterations,
        rejected_steps,
        newton_steps,
        min_value,
        symmetry_defect: u.symmetry_defect(),
        monotonicity_defect,
        boundary_decay: u.boundary_decay(),
        tiny_mass,
        field: u,
    })
}

/// One row of the μ_M curve.
#[derive(Debug, Clone, Serialize)]
pub struct MuCurveRow {
    pub mass: f64,
    pub energy: f64,
    pub chem_potential: f64,
    pub l4fourth: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MuCurve {
    pub rows: Vec<MuCurveRow>,
    pub states: Vec<GroundState>,
    /// Largest |Δμ_M| between neighbouring masses.
    pub max_energy_jump: f64,
    /// Largest |Δ chem_potential| between neighbouring masses.
    pub max_mu_jump: f64,
}

/// Ground states along a sorted list of masses, computed in parallel.
pub fn mu_curve(grid: Arc<Grid>, masses: &[f64], cfg: &FlowConfig) -> Result<MuCurve> {
    if masses.is_empty() || masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidArgument("masses must be positive and non-empty".into()));
    }
    if masses.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("masses must be sorted".into()));
    }
    let states: Vec<GroundState> = masses
        .par_iter()
        .map(|&m| minimize_vm(grid.clone(), m, cfg))
        .collect::<Result<_>>()?;
    let rows: Vec<MuCurveRow> = states
        .iter()
        .map(|s| MuCurveRow {
            mass: s.mass,
            energy: s.energy,
            chem_potential: s.chem_potential,
            l4fourth: s.l4fourth(),
            residual: s.residual,
            iterations: s.iterations,
        })
        .collect();
    let jump = |f: fn(&MuCurveRow) -> f64| rows.windows(2).map(|w| (f(&w[1]) - f(&w[0])).abs()).fold(0.0, f64::max);
    Ok(MuCurve {
        max_energy_jump: jump(|r| r.energy),
        max_mu_jump: jump(|r| r.chem_potential),
        rows,
        states,
    })
}

/// ‖v‖₄⁴ / (‖∇v‖²‖v‖²), the constant the Gagliardo–Nirenberg inequality bounds.
pub fn gagliardo_nirenberg_ratio(u: &RealField) -> f64 {
    let n = u.norms();
    n.l4fourth / (n.gradsq * n.l2sq)
}
