//! The true solitary wave (Q_ε, μ_ε) = (Q_ε^a + ψ_r + iψ_i, μ_ε^a + κ) as the
//! fixed point of the map Φ_ε on error triples (ψ_r, ψ_i, κ).
//!
//! With E the stationary residual and W = 3αQ₀² − σ − 2Q₀Q₁ᵢ, the split
//! equations are
//!
//! ```text
//! L₊ψ_r = κQ₀ + G_r
//! L₋ψ_i = ε(κQ₁ᵢ + Wψ_r) + G_i,   ⟨L₋ψ_i, Q₀⟩ = 0
//! ```
//!
//! where G_r, G_i are the exact residual at the previous iterate minus the
//! linear terms kept on the left. For ψ = 0 they reduce to ε⁴g₁ and ε⁵φ₂ up
//! to higher orders.

use log::{debug, info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{sigma_norm, ComplexField, RealField, SchrodingerOperator};
use crate::error::{Error, Result};
use crate::expansion::{assemble_approx, residual_spe, stationary_residual, ExpansionSet};
use crate::linearized::LinearizedPair;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionConfig {
    /// Step size in the weighted ball norm that ends the iteration.
    pub fp_tol: f64,
    pub max_iter: usize,
    /// Beyond this ε results are labelled extrapolated.
    pub eps_max: f64,
    /// Iterates further than this multiple of the ball radius are rejected.
    pub ball_guard: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            fp_tol: 1e-11,
            max_iter: 100,
            eps_max: 0.15,
            ball_guard: 10.0,
        }
    }
}

/// (ψ_r, ψ_i, κ)
#[derive(Debug, Clone)]
pub struct ErrorTriple {
    pub psi_r: RealField,
    pub psi_i: RealField,
    pub kappa: f64,
}

impl ErrorTriple {
    pub fn zeros(grid: std::sync::Arc<crate::discretization::Grid>) -> Self {
        Self {
            psi_r: RealField::zeros(grid.clone()),
            psi_i: RealField::zeros(grid),
            kappa: 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            psi_r: self.psi_r.axpy(1.0, &other.psi_r),
            psi_i: self.psi_i.axpy(1.0, &other.psi_i),
            kappa: self.kappa + other.kappa,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            psi_r: self.psi_r.axpy(-1.0, &other.psi_r),
            psi_i: self.psi_i.axpy(-1.0, &other.psi_i),
            kappa: self.kappa - other.kappa,
        }
    }

    /// (|κ|, ‖ψ_r‖_Σ, ‖ψ_i‖_Σ)
    pub fn sizes(&self) -> [f64; 3] {
        [self.kappa.abs(), sigma_norm(&self.psi_r), sigma_norm(&self.psi_i)]
    }

    fn is_finite(&self) -> bool {
        self.kappa.is_finite()
            && self.psi_r.values().iter().all(|v| v.is_finite())
            && self.psi_i.values().iter().all(|v| v.is_finite())
    }
}

/// Radii of the ball B_ε: |κ| ≤ C₁ε⁴, ‖ψ_r‖_Σ ≤ C₂ε⁴, ‖ψ_i‖_Σ ≤ C₃ε⁵.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BallConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BallConstants {
    /// C₁ = 2‖g₁‖/‖Q₀‖, C₂ = 2(C₁‖Q′‖_Σ + ‖L₊⁻¹g₁‖_Σ),
    /// C₃ = 2C₁‖L₋⁻¹P(Q₁ᵢ + WQ′)‖_Σ + 2‖L₋⁻¹P(W·L₊⁻¹g₁)‖_Σ with P the
    /// projection off Q₀.
    pub fn compute(set: &ExpansionSet, pair: &LinearizedPair) -> Result<Self> {
        let w = weight_field(set);
        let c1 = 2.0 * set.g1.l2_norm() / set.q0.l2_norm();
        let lg = pair.solve_lplus(&set.g1)?;
        let c2 = 2.0 * (c1 * sigma_norm(&pair.q_prime) + sigma_norm(&lg));
        let a = set.q1i.axpy(1.0, &w.zip_map(&pair.q_prime, |x, y| x * y));
        let b = w.zip_map(&lg, |x, y| x * y);
        let c3 = 2.0 * c1 * sigma_norm(&solve_projected(pair, &a)?) + 2.0 * sigma_norm(&solve_projected(pair, &b)?);
        Ok(Self { c1, c2, c3 })
    }

    /// Radii (C₁ε⁴, C₂ε⁴, C₃ε⁵).
    pub fn radii(&self, eps: f64) -> [f64; 3] {
        let e4 = eps.powi(4);
        [self.c1 * e4, self.c2 * e4, self.c3 * e4 * eps]
    }

    /// The weighted max norm of the ball; components with a zero radius fall
    /// back to their plain size.
    pub fn weighted_norm(&self, t: &ErrorTriple, eps: f64) -> f64 {
        t.sizes()
            .iter()
            .zip(self.radii(eps))
            .map(|(s, r)| if r > 0.0 { s / r } else { *s })
            .fold(0.0, f64::max)
    }

    fn weighted_components(&self, t: &ErrorTriple, eps: f64) -> Vec<f64> {
        t.sizes()
            .iter()
            .zip(self.radii(eps))
            .map(|(s, r)| if r > 0.0 { s / r } else { *s })
            .collect()
    }
}

fn solve_projected(pair: &LinearizedPair, rhs: &RealField) -> Result<RealField> {
    let q0 = &pair.q0;
    let c = rhs.dot(q0) / q0.dot(q0);
    pair.solve_lminus_perp(&rhs.axpy(-c, q0))
}

/// W = 3αQ₀² − σ − 2Q₀Q₁ᵢ
pub fn weight_field(set: &ExpansionSet) -> RealField {
    let a = set.alpha;
    let v = (0..set.q0.values().len())
        .map(|k| {
            let q = set.q0.values()[k];
            3.0 * a * q * q - set.sigma_field.values()[k] - 2.0 * q * set.q1i.values()[k]
        })
        .collect();
    RealField::new(set.q0.grid().clone(), v).expect("finite")
}

/// Everything the map needs at one ε.
pub struct ContractionContext<'a> {
    pub set: &'a ExpansionSet,
    pub pair: &'a LinearizedPair,
    pub eps: f64,
    pub constants: BallConstants,
    qa: ComplexField,
    mua: f64,
    /// E(Q_ε^a, μ_ε^a)
    ea: ComplexField,
    w: RealField,
    h0: SchrodingerOperator,
}

impl<'a> ContractionContext<'a> {
    pub fn new(set: &'a ExpansionSet, pair: &'a LinearizedPair, eps: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be finite and nonnegative, got {eps}")));
        }
        if set.q0.grid().spec() != pair.grid().spec() {
            return Err(Error::GridMismatch {
                left: set.q0.grid().spec().to_string(),
                right: pair.grid().spec().to_string(),
            });
        }
        let constants = BallConstants::compute(set, pair)?;
        let (qa, mua) = assemble_approx(set, eps);
        let ea = stationary_residual(&qa, mua, eps, &set.sigma_field, set.alpha);
        Ok(Self {
            set,
            pair,
            eps,
            constants,
            qa,
            mua,
            ea,
            w: weight_field(set),
            h0: SchrodingerOperator::h0(pair.grid().clone()),
        })
    }

    /// The approximate solitary wave (Q_ε^a, μ_ε^a).
    pub fn approx(&self) -> (&ComplexField, f64) {
        (&self.qa, self.mua)
    }

    /// Exact residual E(Q_ε^a + ψ, μ_ε^a + κ), with the O(1) part E(Q_ε^a)
    /// precomputed and the increment evaluated without cancellation.
    pub fn residual_at(&self, t: &ErrorTriple) -> ComplexField {
        let p = ComplexField::from_parts(&t.psi_r, &t.psi_i);
        let hp = self.h0.apply_complex(&p);
        let (eps, alpha, kappa) = (self.eps, self.set.alpha, t.kappa);
        let mu = self.mua + kappa;
        let mut e = self.ea.clone();
        let sigma = self.set.sigma_field.values();
        let (qa, pv, hv) = (self.qa.values(), p.values(), hp.values());
        for (k, ek) in e.values_mut().iter_mut().enumerate() {
            let (a, pk) = (qa[k], pv[k]);
            let cross = 2.0 * (a.conj() * pk).re + pk.norm_sqr();
            let nl = a.norm_sqr() * pk + cross * (a + pk);
            *ek += hv[k] - mu * pk - kappa * a
                + nl * Complex64::new(1.0, -eps * alpha)
                + Complex64::new(0.0, eps * sigma[k]) * pk;
        }
        e
    }

    /// (G_r, G_i) at the previous iterate.
    pub fn remainders(&self, t: &ErrorTriple) -> (RealField, RealField) {
        let e = self.residual_at(t);
        let q0 = &self.set.q0;
        let lp = self.pair.apply_lplus(&t.psi_r);
        let lm = self.pair.apply_lminus(&t.psi_i);
        let eps = self.eps;
        let n = q0.values().len();
        let mut gr = vec![0.0; n];
        let mut gi = vec![0.0; n];
        for k in 0..n {
            gr[k] = lp.values()[k] - e.values()[k].re - t.kappa * q0.values()[k];
            gi[k] = lm.values()[k]
                - e.values()[k].im
                - eps * (t.kappa * self.set.q1i.values()[k] + self.w.values()[k] * t.psi_r.values()[k]);
        }
        let g = q0.grid().clone();
        (
            RealField::new(g.clone(), gr).expect("finite"),
            RealField::new(g, gi).expect("finite"),
        )
    }

    /// The linear part of Φ_ε: solves the split system for given forcing.
    /// Returns the triple and the relative solvability defect
    /// ⟨L₋ψ_i, Q₀⟩/(‖L₋ψ_i‖‖Q₀‖).
    pub fn linear_response(&self, gr: &RealField, gi: &RealField) -> Result<(ErrorTriple, f64)> {
        let pair = self.pair;
        let q0 = &self.set.q0;
        let eps = self.eps;
        let y = pair.solve_lplus(gr)?;
        let kappa = if eps == 0.0 {
            0.0
        } else {
            let wy = self.w.zip_map(&y, |a, b| a * b);
            -(eps * wy.dot(q0) + gi.dot(q0)) / (eps * self.set.diagnostics.denominator)
        };
        let psi_r = y.axpy(kappa, &pair.q_prime);
        let wpr = self.w.zip_map(&psi_r, |a, b| a * b);
        let rhs = gi.axpy(eps * kappa, &self.set.q1i).axpy(eps, &wpr);
        let scale = rhs.l2_norm() * q0.l2_norm();
        let inner = rhs.dot(q0);
        // the κ selection leaves only the ⟨Q₁ᵢ,Q₀⟩ rounding behind
        let rel = if scale > 0.0 { inner / scale } else { 0.0 };
        if eps > 0.0 && rel.abs() > 1e-6 {
            return Err(Error::NotOrthogonal { inner, relative: rel.abs() });
        }
        let psi_i = pair.solve_lminus_perp(&rhs.axpy(-inner / q0.dot(q0), q0))?;
        let lm = pair.apply_lminus(&psi_i);
        let lscale = lm.l2_norm() * q0.l2_norm();
        let selection = if lscale > 0.0 { lm.dot(q0) / lscale } else { 0.0 };
        Ok((ErrorTriple { psi_r, psi_i, kappa }, selection))
    }
}

/// One application of Φ_ε.
pub fn phi_map(prev: &ErrorTriple, ctx: &ContractionContext) -> Result<ErrorTriple> {
    let guard = ctx.constants.weighted_norm(prev, ctx.eps);
    if guard > ContractionConfig::default().ball_guard {
        return Err(Error::ContractionDiverged {
            eps: ctx.eps,
            norms: ctx.constants.weighted_components(prev, ctx.eps),
        });
    }
    let (gr, gi) = ctx.remainders(prev);
    Ok(ctx.linear_response(&gr, &gi)?.0)
}

#[derive(Debug, Clone)]
pub struct SolitaryWave {
    pub q: ComplexField,
    pub mu: f64,
    pub eps: f64,
    /// residual_spe(Q_ε, μ_ε)
    pub residual: f64,
    /// ‖Re E‖/‖Q‖ and ‖Im E‖/‖Q‖.
    pub real_residual: f64,
    pub imag_residual: f64,
    /// residual_spe of the approximate wave at the same ε.
    pub approx_residual: f64,
    pub iterations: usize,
    pub triple: ErrorTriple,
    pub extrapolated: bool,
    pub constants: BallConstants,
    /// Weighted norm of the final triple (≤ 1 inside B_ε).
    pub ball_norm: f64,
    /// ‖Φ²(0) − Φ(0)‖/‖Φ(0)‖ in the weighted norm.
    pub contraction_ratio: f64,
    /// Weighted step sizes of the iteration.
    pub steps: Vec<f64>,
    /// Largest relative ⟨L₋ψ_i, Q₀⟩ seen over the iteration.
    pub max_selection_defect: f64,
}

impl SolitaryWave {
    pub fn summary(&self) -> SolitarySummary {
        let [k, r, i] = self.triple.sizes();
        SolitarySummary {
            eps: self.eps,
            mu: self.mu,
            kappa: self.triple.kappa,
            kappa_abs: k,
            psi_r_sigma: r,
            psi_i_sigma: i,
            residual: self.residual,
            real_residual: self.real_residual,
            imag_residual: self.imag_residual,
            approx_residual: self.approx_residual,
            iterations: self.iterations,
            extrapolated: self.extrapolated,
            c1: self.constants.c1,
            c2: self.constants.c2,
            c3: self.constants.c3,
            ball_norm: self.ball_norm,
            contraction_ratio: self.contraction_ratio,
            max_selection_defect: self.max_selection_defect,
            mass: self.q.norm_sqr(),
        }
    }
}

/// Serializable scalars of a [`SolitaryWave`].
#[derive(Debug, Clone, Serialize)]
pub struct SolitarySummary {
    pub eps: f64,
    pub mu: f64,
    pub kappa: f64,
    pub kappa_abs: f64,
    pub psi_r_sigma: f64,
    pub psi_i_sigma: f64,
    pub residual: f64,
    pub real_residual: f64,
    pub imag_residual: f64,
    pub approx_residual: f64,
    pub iterations: usize,
    pub extrapolated: bool,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub ball_norm: f64,
    pub contraction_ratio: f64,
    pub max_selection_defect: f64,
    pub mass: f64,
}

/// Iterates Φ_ε from zero to its fixed point.
///
/// Φ_ε is affine in (G_r, G_i), so after the first step the update is
/// applied in increments: x_{k+1} = x_k + Λ(G(x_k) − G(x_{k−1})). The
/// Krylov error then scales with the step rather than with the iterate.
pub fn solve_error_terms(
    set: &ExpansionSet,
    pair: &LinearizedPair,
    eps: f64,
    cfg: &ContractionConfig,
) -> Result<SolitaryWave> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let extrapolated = eps > cfg.eps_max;
    if extrapolated {
        warn!("eps = {eps} beyond eps_max = {}: result is extrapolated", cfg.eps_max);
    }
    let ctx = ContractionContext::new(set, pair, eps)?;
    let consts = ctx.constants;
    let diverged = |t: &ErrorTriple| Error::ContractionDiverged {
        eps,
        norms: consts.weighted_components(t, eps),
    };

    let mut x = ErrorTriple::zeros(pair.grid().clone());
    let (mut g_prev_r, mut g_prev_i) = ctx.remainders(&x);
    let (first, sel) = ctx.linear_response(&g_prev_r, &g_prev_i)?;
    let mut max_sel = sel.abs();
    let mut steps = vec![consts.weighted_norm(&first, eps)];
    x = x.add(&first);
    let mut growth = 0;
    let mut iterations = 1;
    let mut converged = steps[0] < cfg.fp_tol;
    while !converged && iterations < cfg.max_iter {
        if !x.is_finite() {
            return Err(diverged(&x));
        }
        if consts.weighted_norm(&x, eps) > cfg.ball_guard {
            return Err(diverged(&x));
        }
        let (gr, gi) = ctx.remainders(&x);
        let (dx, sel) = ctx.linear_response(&gr.axpy(-1.0, &g_prev_r), &gi.axpy(-1.0, &g_prev_i))?;
        max_sel = max_sel.max(sel.abs());
        g_prev_r = gr;
        g_prev_i = gi;
        x = x.add(&dx);
        iterations += 1;
        let step = consts.weighted_norm(&dx, eps);
        debug!("contraction eps={eps} iter {iterations}: step {step:.3e}");
        if step > *steps.last().unwrap() {
            growth += 1;
            if growth >= 3 {
                return Err(diverged(&x));
            }
        } else {
            growth = 0;
        }
        steps.push(step);
        converged = step < cfg.fp_tol;
    }
    if !converged {
        return Err(Error::NoConvergence {
            method: "contraction",
            iterations,
            residual: *steps.last().unwrap(),
        });
    }
    let contraction_ratio = if steps.len() > 1 && steps[0] > 0.0 { steps[1] / steps[0] } else { 0.0 };

    let (qa, mua) = ctx.approx();
    let approx_residual = residual_spe(qa, mua, eps, &set.sigma_field, set.alpha)?;
    let q = qa_plus(qa, &x);
    let mu = mua + x.kappa;
    let e = stationary_residual(&q, mu, eps, &set.sigma_field, set.alpha);
    let qn = q.l2_norm();
    let wave = SolitaryWave {
        residual: e.l2_norm() / qn,
        real_residual: e.re().l2_norm() / qn,
        imag_residual: e.im().l2_norm() / qn,
        approx_residual,
        q,
        mu,
        eps,
        iterations,
        ball_norm: consts.weighted_norm(&x, eps),
        triple: x,
        extrapolated,
        constants: consts,
        contraction_ratio,
        steps,
        max_selection_defect: max_sel,
    };
    info!(
        "solitary wave eps={eps}: mu={:.12}, kappa={:.3e}, residual={:.3e}, {} iterations, ratio {:.3e}",
        wave.mu, wave.triple.kappa, wave.residual, wave.iterations, wave.contraction_ratio
    );
    if wave.residual > 1e-9 {
        warn!("solitary residual {:.3e} above 1e-9", wave.residual);
    }
    Ok(wave)
}

fn qa_plus(qa: &ComplexField, t: &ErrorTriple) -> ComplexField {
    let v = qa
        .values()
        .iter()
        .zip(t.psi_r.values().iter().zip(t.psi_i.values()))
        .map(|(a, (r, i))| a + Complex64::new(*r, *i))
        .collect();
    ComplexField::new(qa.grid().clone(), v).expect("finite")
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub kappa_abs: f64,
    pub psi_r_sigma: f64,
    pub psi_i_sigma: f64,
    /// residual_spe of the approximate wave.
    pub residual: f64,
    /// residual_spe of the converged wave.
    pub final_residual: f64,
    pub iterations: usize,
    pub contraction_ratio: f64,
}

impl ScalingRow {
    pub const CSV_HEADER: &'static str =
        "eps,kappa_abs,psi_r_sigma,psi_i_sigma,residual,final_residual,iterations,contraction_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6e}",
            self.eps,
            self.kappa_abs,
            self.psi_r_sigma,
            self.psi_i_sigma,
            self.residual,
            self.final_residual,
            self.iterations,
            self.contraction_ratio
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// ε values that failed, with the reason.
    pub excluded: Vec<(f64, String)>,
    /// Fitted slopes of |κ|, ‖ψ_r‖_Σ, ‖ψ_i‖_Σ and the approximate residual.
    pub slopes: [f64; 4],
}

impl ScalingStudy {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(ScalingRow::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        let [a, b, c, d] = self.slopes;
        out.push_str(&format!("slope,{a:.6},{b:.6},{c:.6},{d:.6},,,\n"));
        out
    }
}

/// Solves at each ε (in parallel) and fits log-log slopes.
pub fn scaling_study(
    set: &ExpansionSet,
    pair: &LinearizedPair,
    eps_list: &[f64],
    cfg: &ContractionConfig,
) -> Result<ScalingStudy> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "scaling study needs at least 4 eps values, got {}",
            eps_list.len()
        )));
    }
    let mut sorted = eps_list.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] <= 0.0 {
        return Err(Error::InvalidArgument("eps values must be positive".into()));
    }
    let ratios: Vec<f64> = sorted.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|r| (r / ratios[0] - 1.0).abs() > 1e-6) {
        return Err(Error::InvalidArgument("eps values must form a geometric sequence".into()));
    }
    let results: Vec<(f64, Result<SolitaryWave>)> = sorted
        .par_iter()
        .map(|&e| (e, solve_error_terms(set, pair, e, cfg)))
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (eps, r) in results {
        match r {
            Ok(w) => {
                let [k, pr, pi] = w.triple.sizes();
                rows.push(ScalingRow {
                    eps,
                    kappa_abs: k,
                    psi_r_sigma: pr,
                    psi_i_sigma: pi,
                    residual: w.approx_residual,
                    final_residual: w.residual,
                    iterations: w.iterations,
                    contraction_ratio: w.contraction_ratio,
                });
            }
            Err(e) => {
                warn!("scaling study: eps = {eps} excluded: {e}");
                excluded.push((eps, e.to_string()));
            }
        }
    }
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "scaling study: only {} eps values converged",
            rows.len()
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let col = |f: fn(&ScalingRow) -> f64| loglog_slope(&xs, &rows.iter().map(f).collect::<Vec<_>>());
    let slopes = [
        col(|r| r.kappa_abs),
        col(|r| r.psi_r_sigma),
        col(|r| r.psi_i_sigma),
        col(|r| r.residual),
    ];
    info!("scaling slopes: {slopes:?}");
    Ok(ScalingStudy { rows, excluded, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> &'static (LinearizedPair, ExpansionSet) {
        crate::fixture::balanced()
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(5)).collect();
        assert!((loglog_slope(&xs, &ys) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_eps_zero_forcing() {
        let (pair, set) = fixture();
        let ctx = ContractionContext::new(set, pair, 0.0).unwrap();
        let t = phi_map(&ErrorTriple::zeros(pair.grid().clone()), &ctx).unwrap();
        assert_eq!(t.kappa, 0.0);
        // E(Q₀, μ₀) is the ground-state residual, so only solver-level noise
        assert!(t.psi_r.l2_norm() < 1e-9 && t.psi_i.l2_norm() < 1e-9);
    }

    #[test]
    fn first_step_matches_forcing() {
        let (pair, set) = fixture();
        let eps = 0.1;
        let ctx = ContractionContext::new(set, pair, eps).unwrap();
        let zero = ErrorTriple::zeros(pair.grid().clone());
        let (gr, gi) = ctx.remainders(&zero);
        // G(0) = ε⁴g₁ + O(ε⁶) and ε⁵φ₂ + O(ε⁷)
        let dr = gr.axpy(-eps.powi(4), &set.g1).l2_norm() / (eps.powi(4) * set.g1.l2_norm());
        let di = gi.axpy(-eps.powi(5), &set.phi2).l2_norm() / (eps.powi(5) * set.phi2.l2_norm());
        assert!(dr < 0.1 && di < 0.1, "{dr} {di}");
        let t = phi_map(&zero, &ctx).unwrap();
        let back = t.psi_r.axpy(-t.kappa, &pair.q_prime);
        let lg = pair.solve_lplus(&gr).unwrap();
        assert!(back.axpy(-1.0, &lg).l2_norm() <= 1e-12 * lg.l2_norm().max(1e-300));
        let radii = ctx.constants.radii(eps);
        let sizes = t.sizes();
        for k in 0..3 {
            assert!(sizes[k] <= radii[k], "component {k}: {} vs {}", sizes[k], radii[k]);
        }
    }

    #[test]
    fn fixed_point_solves_both_equations() {
        let (pair, set) = fixture();
        let w = solve_error_terms(set, pair, 0.1, &ContractionConfig::default()).unwrap();
        assert!(w.residual < 1e-9, "{}", w.residual);
        assert!(w.real_residual < 1e-9 && w.imag_residual < 1e-9);
        assert!(w.max_selection_defect < 1e-9, "{}", w.max_selection_defect);
        assert!(w.contraction_ratio < 0.5);
        assert!(w.mu > 2.0);
        assert!(!w.extrapolated);
        // the fixed point is invariant under Φ
        let ctx = ContractionContext::new(set, pair, 0.1).unwrap();
        let again = phi_map(&w.triple, &ctx).unwrap();
        let d = ctx.constants.weighted_norm(&again.sub(&w.triple), 0.1);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn gauge_invariance() {
        let (pair, set) = fixture();
        let w = solve_error_terms(set, pair, 0.1, &ContractionConfig::default()).unwrap();
        let r0 = residual_spe(&w.q, w.mu, 0.1, &set.sigma_field, set.alpha).unwrap();
        let rot = w.q.scaled(Complex64::from_polar(1.0, 0.7));
        let r1 = residual_spe(&rot, w.mu, 0.1, &set.sigma_field, set.alpha).unwrap();
        assert!((r0 - r1).abs() < 1e-13, "{r0} {r1}");
    }

    #[test]
    fn study_rejects_bad_lists() {
        let (pair, set) = fixture();
        let cfg = ContractionConfig::default();
        assert!(scaling_study(set, pair, &[0.1, 0.2, 0.4], &cfg).is_err());
        assert!(scaling_study(set, pair, &[0.1, 0.2, 0.3, 0.4], &cfg).is_err());
        assert!(solve_error_terms(set, pair, 0.0, &cfg).is_err());
    }
}
