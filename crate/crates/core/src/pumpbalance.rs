//! Pump/damp functional K and the balanced mass M* with K(v_{M*}) = 0.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{ComplexField, Grid, RealField};
use crate::error::{Error, Result};
use crate::groundstate::{minimize_vm, minimize_vm_from, FlowConfig, GroundState};

/// Pumping profile σ(x) ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PumpProfile {
    /// s₀·exp(-|x - c|²/w²)
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 2],
    },
    /// s₀ on |x| ≤ R, zero outside
    Disk { amplitude: f64, radius: f64 },
    Constant { amplitude: f64 },
}

impl PumpProfile {
    pub fn disk(amplitude: f64, radius: f64) -> Self {
        Self::Disk { amplitude, radius }
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian {
            amplitude,
            width,
            center: [0.0, 0.0],
        }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self::Constant { amplitude }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::Gaussian { amplitude, .. } | Self::Disk { amplitude, .. } | Self::Constant { amplitude } => amplitude,
        }
    }

    /// Same shape, amplitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut p = *self;
        match &mut p {
            Self::Gaussian { amplitude, .. } | Self::Disk { amplitude, .. } | Self::Constant { amplitude } => {
                *amplitude *= c
            }
        }
        p
    }

    /// True when the profile is smooth, so ∇σ is an ordinary function.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Self::Disk { .. })
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let dx = x - center[0];
                let dy = y - center[1];
                amplitude * (-(dx * dx + dy * dy) / (width * width)).exp()
            }
            Self::Disk { amplitude, radius } => {
                if x * x + y * y <= radius * radius {
                    amplitude
                } else {
                    0.0
                }
            }
            Self::Constant { amplitude } => amplitude,
        }
    }

    /// Samples σ on the grid, checking σ ≥ 0, finite and ∫σ > 0.
    pub fn sample(&self, grid: Arc<Grid>) -> Result<RealField> {
        if !(self.amplitude() > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid pump profile {self}")));
        }
        let s = self.sample_nonnegative(grid)?;
        if !(s.integral() > 0.0) {
            return Err(Error::InvalidArgument(format!("pump profile {self} vanishes on the grid")));
        }
        Ok(s)
    }

    /// Samples σ on the grid; a vanishing pump is allowed.
    pub fn sample_nonnegative(&self, grid: Arc<Grid>) -> Result<RealField> {
        let valid = match *self {
            Self::Gaussian { width, center, .. } => width > 0.0 && center.iter().all(|c| c.is_finite()),
            Self::Disk { radius, .. } => radius > 0.0,
            Self::Constant { .. } => true,
        };
        if !valid || !(self.amplitude() >= 0.0) || !self.amplitude().is_finite() {
            return Err(Error::InvalidArgument(format!("invalid pump profile {self}")));
        }
        Ok(RealField::from_fn(grid, |x, y| self.value(x, y)))
    }

    /// ‖σ‖∞
    pub fn sup_norm(&self) -> f64 {
        self.amplitude()
    }
}

impl fmt::Display for PumpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => write!(f, "kind=gaussian,s0={amplitude},w={width},cx={},cy={}", center[0], center[1]),
            Self::Disk { amplitude, radius } => write!(f, "kind=disk,s0={amplitude},r={radius}"),
            Self::Constant { amplitude } => write!(f, "kind=constant,s0={amplitude}"),
        }
    }
}

/// Parses `kind=disk,s0=1,r=1`, `kind=gaussian,s0=1,w=2[,cx=0,cy=0]` or
/// `kind=constant,s0=1`.
impl FromStr for PumpProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kind = None;
        let mut s0 = 1.0;
        let mut r = 1.0;
        let mut w = 1.0;
        let mut c = [0.0, 0.0];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value in sigma spec, got '{part}'")))?;
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number '{v}' for '{k}'")))
            };
            match k {
                "kind" => kind = Some(v.to_string()),
                "s0" | "amplitude" => s0 = num()?,
                "r" | "radius" => r = num()?,
                "w" | "width" => w = num()?,
                "cx" => c[0] = num()?,
                "cy" => c[1] = num()?,
                _ => return Err(Error::InvalidArgument(format!("unknown sigma key '{k}'"))),
            }
        }
        match kind.as_deref() {
            Some("disk") => Ok(Self::Disk {
                amplitude: s0,
                radius: r,
            }),
            Some("gaussian") => Ok(Self::Gaussian {
                amplitude: s0,
                width: w,
                center: c,
            }),
            Some("constant") => Ok(Self::Constant { amplitude: s0 }),
            other => Err(Error::InvalidArgument(format!("unknown sigma kind {other:?}"))),
        }
    }
}

/// K(u) = ∫σ|u|² - α∫|u|⁴.
pub fn kfunctional(u: &ComplexField, sigma: &RealField, alpha: f64) -> f64 {
    let (pump, damp) = k_parts(u, sigma);
    pump - alpha * damp
}

/// (∫σ|u|², ∫|u|⁴)
pub fn k_parts(u: &ComplexField, sigma: &RealField) -> (f64, f64) {
    let area = u.grid().cell_area();
    let mut pump = 0.0;
    let mut damp = 0.0;
    for (z, s) in u.values().iter().zip(sigma.values()) {
        let rho = z.norm_sqr();
        pump += s * rho;
        damp += rho * rho;
    }
    (area * pump, area * damp)
}

fn k_real(u: &RealField, sigma: &RealField, alpha: f64) -> (f64, f64) {
    let (pump, damp) = k_parts(&u.to_complex(), sigma);
    (pump - alpha * damp, pump + alpha * damp)
}

/// Balanced ground state (Q₀, μ₀) with K(Q₀) = 0.
#[derive(Debug, Clone)]
pub struct BalancePoint {
    pub m_star: f64,
    pub q0: RealField,
    pub mu0: f64,
    pub alpha: f64,
    pub sigma: PumpProfile,
    /// |K(Q₀)|
    pub k_residual: f64,
    /// ∫σQ₀² + α‖Q₀‖₄⁴
    pub k_scale: f64,
    pub bisection_steps: usize,
    /// Every (M, K(v_M)) probed, in probe order.
    pub probes: Vec<(f64, f64)>,
    pub ground: GroundState,
}

#[derive(Debug, Clone, Copy)]
pub struct BalanceConfig {
    pub tol: f64,
    pub max_steps: usize,
    pub flow: FlowConfig,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_steps: 60,
            flow: FlowConfig::default(),
        }
    }
}

struct Probes {
    states: Vec<GroundState>,
}

impl Probes {
    fn nearest(&self, mass: f64) -> Option<&RealField> {
        self.states
            .iter()
            .min_by(|a, b| {
                let da = (a.mass / mass).ln().abs();
                let db = (b.mass / mass).ln().abs();
                da.partial_cmp(&db).unwrap()
            })
            .map(|s| &s.field)
    }
}

/// Bracketed root of M ↦ K(v_M): bisection safeguarding Illinois steps.
pub fn find_balanced_mass(
    grid: Arc<Grid>,
    sigma: &PumpProfile,
    alpha: f64,
    bracket: (f64, f64),
    cfg: &BalanceConfig,
) -> Result<BalancePoint> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad bracket ({lo}, {hi})")));
    }
    let s = sigma.sample(grid.clone())?;
    let mut probes = Probes { states: Vec::new() };
    let mut log = Vec::new();
    let mut eval = |m: f64, probes: &mut Probes| -> Result<(f64, f64, GroundState)> {
        let gs = match probes.nearest(m) {
            Some(start) => minimize_vm_from(grid.clone(), m, Some(start), &cfg.flow)?,
            None => minimize_vm(grid.clone(), m, &cfg.flow)?,
        };
        let (k, scale) = k_real(&gs.field, &s, alpha);
        debug!("balance probe M = {m:.12e}: K = {k:.3e}, {} flow steps, {} newton", gs.iterations, gs.newton_steps);
        log.push((m, k));
        probes.states.push(gs.clone());
        Ok((k, scale, gs))
    };
    let (k_lo, _, _) = eval(lo, &mut probes)?;
    if !(k_lo > 0.0) {
        return Err(Error::BracketSign {
            endpoint: "lower",
            mass: lo,
            k: k_lo,
        });
    }
    let (k_hi, _, _) = eval(hi, &mut probes)?;
    if !(k_hi < 0.0) {
        return Err(Error::BracketSign {
            endpoint: "upper",
            mass: hi,
            k: k_hi,
        });
    }
    let width_tol = 1e-14 * hi;
    let mut best: Option<(f64, f64, f64, GroundState)> = None;
    let mut steps = 0;
    let (mut f_lo, mut f_hi) = (k_lo, k_hi);
    // Illinois regula falsi, with a bisection step whenever the secant point
    // hugs an endpoint or one side has been kept three times
    let mut side = 0i32;
    while steps < cfg.max_steps {
        let secant = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let margin = 1e-3 * (hi - lo);
        let mid = if side.abs() >= 3 || !(secant > lo + margin && secant < hi - margin) {
            side = 0;
            0.5 * (lo + hi)
        } else {
            secant
        };
        let (k, scale, gs) = eval(mid, &mut probes)?;
        steps += 1;
        let rel = k.abs() / scale;
        if best.as_ref().is_none_or(|b| rel < b.1.abs() / b.2) {
            best = Some((mid, k, scale, gs));
        }
        if rel < cfg.tol || hi - lo < width_tol {
            break;
        }
        if k > 0.0 {
            lo = mid;
            f_lo = k;
            side = if side > 0 { side + 1 } else { 1 };
            if side >= 2 {
                f_hi *= 0.5;
            }
        } else {
            hi = mid;
            f_hi = k;
            side = if side < 0 { side - 1 } else { -1 };
            if side <= -2 {
                f_lo *= 0.5;
            }
        }
    }
    let (m_star, k, scale, ground) = best.expect("at least one bisection step");
    if k.abs() >= cfg.tol * scale {
        warn!("bisection stopped with |K|/scale = {:.3e}", k.abs() / scale);
    }
    Ok(BalancePoint {
        m_star,
        q0: ground.field.clone(),
        mu0: ground.chem_potential,
        alpha,
        sigma: *sigma,
        k_residual: k.abs(),
        k_scale: scale,
        bisection_steps: steps,
        probes: log,
        ground,
    })
}

/// α = ∫σv_M²/∫v_M⁴, the damping that makes K(v_M) vanish, with v_M.
pub fn alpha_for_mass(grid: Arc<Grid>, sigma: &PumpProfile, mass: f64, flow: &FlowConfig) -> Result<(f64, GroundState)> {
    let s = sigma.sample(grid.clone())?;
    let gs = minimize_vm(grid, mass, flow)?;
    Ok((alpha_for_state(&gs.field, &s)?, gs))
}

pub fn alpha_for_state(v: &RealField, sigma: &RealField) -> Result<f64> {
    let (pump, damp) = k_parts(&v.to_complex(), sigma);
    if !(damp > 0.0) {
        return Err(Error::InvalidArgument("field has zero L4 norm".into()));
    }
    Ok(pump / damp)
}

/// (M, K(v_M)) along a sorted list of masses, computed in parallel.
pub fn k_scan(
    grid: Arc<Grid>,
    sigma: &PumpProfile,
    alpha: f64,
    masses: &[f64],
    flow: &FlowConfig,
) -> Result<Vec<(f64, f64)>> {
    let s = sigma.sample(grid.clone())?;
    masses
        .par_iter()
        .map(|&m| {
            let gs = minimize_vm(grid.clone(), m, flow)?;
            Ok((m, k_real(&gs.field, &s, alpha).0))
        })
        .collect()
}
