//! Acceptance run at (n, L) = (128, 8). Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails. Pass criterion numbers as
//! arguments to run a subset.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use gp_pump_core::contraction::{loglog_slope, scaling_study, solve_error_terms, ContractionConfig, SolitaryWave};
use gp_pump_core::discretization::{
    build_grid, lowest_eigenpairs, phi1_reference, Grid, OperatorRep, SchrodingerOperator,
};
use gp_pump_core::evolve::{
    bounds_check, evolve_run, gaussian_data, law_checks, phi1_data, reversibility_error, self_convergence,
    stationarity_check, EvolutionConfig,
};
use gp_pump_core::expansion::{assemble_approx, build_expansion, residual_spe, ExpansionSet};
use gp_pump_core::groundstate::{minimize_vm, mu_curve, FlowConfig, GroundState};
use gp_pump_core::linearized::{bifurcation_slope, build_pair_with, LinearizedPair, PairConfig};
use gp_pump_core::pumpbalance::{find_balanced_mass, k_scan, BalanceConfig, BalancePoint, PumpProfile};
use gp_pump_core::Result;

const SWEEP: [f64; 4] = [0.0125, 0.025, 0.05, 0.1];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn grid() -> Arc<Grid> {
    static G: OnceLock<Arc<Grid>> = OnceLock::new();
    G.get_or_init(|| build_grid(128, 8.0).unwrap()).clone()
}

fn flow() -> FlowConfig {
    FlowConfig::default()
}

fn disk() -> PumpProfile {
    PumpProfile::disk(1.0, 1.0)
}

fn ground(mass: f64) -> Result<GroundState> {
    minimize_vm(grid(), mass, &flow())
}

struct Disk {
    balance: BalancePoint,
    pair: LinearizedPair,
    set: ExpansionSet,
}

fn disk_model() -> &'static Disk {
    static D: OnceLock<Disk> = OnceLock::new();
    D.get_or_init(|| {
        let balance = find_balanced_mass(grid(), &disk(), 1.0, (0.01, 100.0), &BalanceConfig::default()).unwrap();
        let cfg = PairConfig { hermite_order: None, ..PairConfig::default() };
        let pair = build_pair_with(&balance.q0, balance.mu0, &cfg).unwrap();
        let set = build_expansion(&pair, &disk(), 1.0).unwrap();
        Disk { balance, pair, set }
    })
}

fn wave_at(eps: f64) -> Result<SolitaryWave> {
    let d = disk_model();
    solve_error_terms(&d.set, &d.pair, eps, &ContractionConfig::default())
}

fn c1_linear_spectrum() -> Result<Outcome> {
    let rep = OperatorRep::grid_only(SchrodingerOperator::h0(grid()));
    let e = &lowest_eigenpairs(&rep, 1)?[0];
    let phi = phi1_reference(grid());
    let dist = e.vector.axpy(-1.0, &phi).l2_norm().min(e.vector.axpy(1.0, &phi).l2_norm());
    let rel = (e.value - 2.0).abs() / 2.0;
    outcome(rel < 1e-6 && dist < 1e-6, format!("lambda_min = {:.12}, rel err {rel:.2e}, |e - phi1| = {dist:.2e}", e.value))
}

fn c2_small_mass_mu() -> Result<Outcome> {
    let m = 0.1;
    let gs = ground(m)?;
    let want = 2.0 + m / (2.0 * PI);
    let err = (gs.chem_potential - want).abs();
    outcome(err < 1e-3, format!("mu = {:.8}, 2 + M/2pi = {want:.8}, |diff| = {err:.2e}", gs.chem_potential))
}

fn c3_sandwich() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [0.1, 1.0, 10.0] {
        let n = ground(m)?.field.norms();
        let q = n.gradsq + n.xmomsq + n.l4fourth;
        let (lo, hi) = (2.0 * m, 2.0 * m + m * m / (2.0 * PI));
        pass &= lo - 1e-8 <= q && q <= hi + 1e-8;
        parts.push(format!("M={m}: {lo:.6} <= {q:.6} <= {hi:.6}"));
    }
    outcome(pass, parts.join("; "))
}

fn c4_thomas_fermi() -> Result<Outcome> {
    let curve = mu_curve(grid(), &[30.0, 100.0], &flow())?;
    let tf_h = PI / 6.0 * (2.0 / PI).powf(1.5);
    let gs = &curve.states[1];
    let m: f64 = 100.0;
    let ratio = gs.l4fourth() / (PI / 3.0 * (2.0 * m / PI).powf(1.5));
    let h = |s: &GroundState| s.energy / s.mass.powf(1.5);
    let (h30, h100) = (h(&curve.states[0]), h(gs));
    // H/M^{3/2} sits above its Thomas-Fermi limit and decreases towards it
    let bounded = h100 >= tf_h && h100 <= h30 && h100 <= 1.1 * tf_h;
    outcome(
        (0.6..=1.05).contains(&ratio) && bounded,
        format!("L4 ratio {ratio:.4}; H/M^1.5 = {h30:.4} (M=30), {h100:.4} (M=100), TF limit {tf_h:.4}"),
    )
}

fn c5_balance() -> Result<Outcome> {
    let scan = k_scan(grid(), &disk(), 1.0, &[0.01, 100.0], &flow())?;
    let b = &disk_model().balance;
    let rel = b.k_residual / b.k_scale;
    outcome(
        scan[0].1 > 0.0 && scan[1].1 < 0.0 && rel < 1e-8,
        format!("K(0.01) = {:.3e}, K(100) = {:.3e}, M* = {:.10}, |K(Q0)|/scale = {rel:.2e}", scan[0].1, scan[1].1, b.m_star),
    )
}

fn c6_kernel() -> Result<Outcome> {
    let d = disk_model();
    let p = &d.pair;
    let lmin = p.lminus_lambda_min;
    let q0 = &d.balance.q0;
    let cube = q0.map(|v| 2.0 * v * v * v);
    let rel = p.apply_lplus(q0).axpy(-1.0, &cube).l2_norm() / cube.l2_norm();
    outcome(
        lmin.abs() < 1e-6 * (1.0 + p.mu0) && p.kernel_overlap > 0.999 && rel < 1e-7,
        format!("lambda_min(L-) = {lmin:.2e}, overlap {:.8}, |L+Q0 - 2Q0^3|/|2Q0^3| = {rel:.2e}", p.kernel_overlap),
    )
}

fn c7_bifurcation_slope() -> Result<Outcome> {
    let rows = bifurcation_slope(grid(), &[1e-3, 3e-3, 1e-2], &flow())?;
    let pass = rows.iter().all(|r| (-4.4..=-3.6).contains(&r.ratio));
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("M={}: L+ {:.4} (H0-3v^2-mu {:.4})", r.mass, r.ratio, r.flipped_ratio))
        .collect();
    outcome(pass, format!("lambda_min/(mu-2): {}", parts.join("; ")))
}

fn c8_expansion_residual() -> Result<Outcome> {
    let set = &disk_model().set;
    let mut res = Vec::new();
    for eps in SWEEP {
        let (q, mu) = assemble_approx(set, eps);
        res.push(residual_spe(&q, mu, eps, &set.sigma_field, set.alpha)?);
    }
    let slope = loglog_slope(&SWEEP, &res);
    let shown: Vec<String> = res.iter().map(|r| format!("{r:.2e}")).collect();
    outcome(slope >= 3.5, format!("slope {slope:.3}, residuals [{}]", shown.join(", ")))
}

fn c9_contraction_scalings() -> Result<Outcome> {
    let d = disk_model();
    let study = scaling_study(&d.set, &d.pair, &SWEEP, &ContractionConfig::default())?;
    let [sk, sr, si, _] = study.slopes;
    let slopes_ok = (sk - 4.0).abs() <= 0.5 && (sr - 4.0).abs() <= 0.5 && (si - 5.0).abs() <= 0.5;
    let worst = study.rows.iter().map(|r| r.final_residual).fold(0.0, f64::max);
    let ratio = study
        .rows
        .iter()
        .find(|r| r.eps == 0.05)
        .map(|r| r.contraction_ratio)
        .unwrap_or(f64::INFINITY);
    outcome(
        study.excluded.is_empty() && slopes_ok && worst < 1e-9 && ratio < 0.5,
        format!("slopes kappa {sk:.3}, psi_r {sr:.3}, psi_i {si:.3}; max final residual {worst:.2e}; ratio at 0.05 {ratio:.2e}"),
    )
}

fn c10_stationarity() -> Result<Outcome> {
    let w = wave_at(0.05)?;
    let cfg = EvolutionConfig::new(1e-4, 1.0, 0.05, disk(), 1.0);
    let r = stationarity_check(&w, &cfg)?;
    outcome(
        r.modulus_drift < 1e-4 && r.phase_rate_error < 1e-3,
        format!("modulus drift {:.2e}, phase rate {:.10} vs -mu {:.10}, rel err {:.2e}", r.modulus_drift, r.phase_rate, -r.mu, r.phase_rate_error),
    )
}

fn gaussian_pump() -> PumpProfile {
    PumpProfile::gaussian(1.0, 1.5)
}

fn gaussian_initial() -> gp_pump_core::discretization::ComplexField {
    gaussian_data(grid(), 2.0, [0.5, -0.3])
}

fn c11_mass_law() -> Result<Outcome> {
    let traj = evolve_run(&gaussian_initial(), &EvolutionConfig::new(1e-3, 0.5, 1.0, gaussian_pump(), 1.0))?;
    let laws = law_checks(&traj)?;
    let cons = evolve_run(&gaussian_initial(), &EvolutionConfig::new(1e-3, 0.5, 0.0, gaussian_pump(), 1.0))?;
    let drift = law_checks(&cons)?.mass_drift_per_time;
    outcome(
        laws.mass_law_stated < 1e-4 && drift < 1e-10,
        format!(
            "|dM/dt - eps K| rel {:.2e} (with 2 eps K: {:.2e}); eps=0 drift {drift:.2e} per unit time",
            laws.mass_law_stated, laws.mass_law_doubled
        ),
    )
}

fn c12_global_bounds() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [1.0, 10.0] {
        let traj = evolve_run(&phi1_data(grid(), m), &EvolutionConfig::new(1e-3, 2.0, 1.0, disk(), 1.0))?;
        let b = bounds_check(&traj);
        pass &= b.mass_ratio_stated <= 1.0 + 1e-6 && b.l4_integral <= b.l4_bound_stated * (1.0 + 1e-4);
        parts.push(format!(
            "M0={m}: max M/bound {:.6}, int L4 {:.4} <= {:.4}",
            b.mass_ratio_stated, b.l4_integral, b.l4_bound_stated
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c13_hamiltonian_law() -> Result<Outcome> {
    let traj = evolve_run(&gaussian_initial(), &EvolutionConfig::new(1e-3, 0.5, 1.0, gaussian_pump(), 1.0))?;
    let l = law_checks(&traj)?;
    let stated = l.hamiltonian_stated < 1e-3;
    let isolated = l.hamiltonian_full < 1e-3 && l.hamiltonian_match == "full";
    outcome(
        stated || isolated,
        format!(
            "stated rel {:.2e}, with grad-sigma term {:.2e}, grad-sigma share {:.2}, matched '{}'",
            l.hamiltonian_stated, l.hamiltonian_full, l.grad_sigma_share, l.hamiltonian_match
        ),
    )
}

fn c14_splitting_order() -> Result<Outcome> {
    let psi0 = gaussian_initial();
    let cfg = EvolutionConfig::new(1e-3, 0.5, 1.0, gaussian_pump(), 1.0);
    let conv = self_convergence(&psi0, &cfg, &[2e-3, 1e-3, 5e-4])?;
    let rev = reversibility_error(&psi0, &EvolutionConfig::new(1e-3, 1.0, 0.0, gaussian_pump(), 1.0))?;
    outcome(
        (conv.slope - 2.0).abs() <= 0.2 && rev < 1e-8,
        format!("self-convergence slope {:.4}; eps=0 reversibility {rev:.2e}", conv.slope),
    )
}

/// CSV tables and scalars of a small parallel workload.
fn determinism_workload() -> (String, Vec<f64>) {
    let g = build_grid(64, 8.0).unwrap();
    let curve = mu_curve(g.clone(), &[0.5, 1.0, 2.0, 4.0], &flow()).unwrap();
    let scan = k_scan(g.clone(), &gaussian_pump(), 1.0, &[0.1, 1.0, 10.0], &flow()).unwrap();
    let traj = evolve_run(&gaussian_data(g, 2.0, [0.5, -0.3]), &EvolutionConfig::new(1e-3, 0.2, 1.0, gaussian_pump(), 1.0)).unwrap();
    let mut csv = String::new();
    let mut scalars = Vec::new();
    for s in &curve.states {
        csv.push_str(&s.csv_row());
        csv.push('\n');
        scalars.extend([s.energy, s.chem_potential]);
    }
    for (m, k) in scan {
        csv.push_str(&format!("{m},{k:.17e}\n"));
        scalars.push(k);
    }
    csv.push_str(&traj.to_csv());
    scalars.extend(traj.samples.iter().flat_map(|s| [s.mass, s.hamiltonian]));
    (csv, scalars)
}

fn c15_determinism() -> Result<Outcome> {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let single = pool(1);
    let (a, sa) = single.install(determinism_workload);
    let (b, _) = single.install(determinism_workload);
    let (_, sm) = pool(4).install(determinism_workload);
    let worst = sa
        .iter()
        .zip(&sm)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1e-300))
        .fold(0.0, f64::max);
    outcome(
        a == b && sa.len() == sm.len() && worst < 1e-12,
        format!("single-thread repeat identical: {}; max rel diff 1 vs 4 threads {worst:.2e}", a == b),
    )
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 15] = [
    (1, "linear spectrum", c1_linear_spectrum),
    (2, "small-mass chemical potential", c2_small_mass_mu),
    (3, "sandwich bound", c3_sandwich),
    (4, "Thomas-Fermi regime", c4_thomas_fermi),
    (5, "balance existence", c5_balance),
    (6, "kernel of L-", c6_kernel),
    (7, "bifurcation slope", c7_bifurcation_slope),
    (8, "expansion residual", c8_expansion_residual),
    (9, "contraction scalings", c9_contraction_scalings),
    (10, "stationarity", c10_stationarity),
    (11, "mass law", c11_mass_law),
    (12, "global bounds", c12_global_bounds),
    (13, "Hamiltonian law", c13_hamiltonian_law),
    (14, "splitting order", c14_splitting_order),
    (15, "determinism", c15_determinism),
];

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let start = Instant::now();
    for (n, name, run) in CRITERIA {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let out = match std::panic::catch_unwind(run) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome { pass: false, detail: format!("error: {e}") },
            Err(_) => Outcome { pass: false, detail: "panicked".into() },
        };
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {} [{:.1}s]", out.detail, t.elapsed().as_secs_f64());
        if !out.pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} failed {failed:?} in {:.0}s", failed.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
