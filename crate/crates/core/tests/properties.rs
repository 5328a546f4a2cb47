use std::sync::{Arc, OnceLock};

use gp_pump_core::discretization::{build_grid, Grid, HermiteBasis, RealField, SchrodingerOperator};
use gp_pump_core::evolve::{evolve_run, gaussian_data, EvolutionConfig, PositionStep, Stepper};
use gp_pump_core::expansion::{assemble_approx, build_expansion, residual_spe, ExpansionSet};
use gp_pump_core::groundstate::{energy_functionals, energy_gradient, minimize_vm, FlowConfig};
use gp_pump_core::linearized::{build_pair_with, LinearizedPair, PairConfig};
use gp_pump_core::pumpbalance::{alpha_for_mass, alpha_for_state, kfunctional, PumpProfile};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> Arc<Grid> {
    static G: OnceLock<Arc<Grid>> = OnceLock::new();
    G.get_or_init(|| build_grid(64, 8.0).unwrap()).clone()
}

/// Quadratic polynomial times a Gaussian envelope.
#[derive(Debug, Clone)]
struct Blob {
    coeffs: [f64; 6],
    width: f64,
    center: [f64; 2],
}

impl Blob {
    fn field(&self) -> RealField {
        let c = self.coeffs;
        let [cx, cy] = self.center;
        let w2 = self.width * self.width;
        RealField::from_fn(grid(), |x, y| {
            let (x, y) = (x - cx, y - cy);
            let p = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
            p * (-(x * x + y * y) / (2.0 * w2)).exp()
        })
    }
}

fn blob() -> impl Strategy<Value = Blob> {
    (prop::array::uniform6(-1.0..1.0f64), 0.6..1.4f64, prop::array::uniform2(-1.0..1.0f64))
        .prop_filter("nonzero", |(c, _, _)| c.iter().any(|v| v.abs() > 0.05))
        .prop_map(|(coeffs, width, center)| Blob { coeffs, width, center })
}

fn pump() -> impl Strategy<Value = PumpProfile> {
    prop_oneof![
        (0.1..3.0f64, 0.5..2.0f64).prop_map(|(a, r)| PumpProfile::disk(a, r)),
        (0.1..3.0f64, 0.5..2.0f64).prop_map(|(a, w)| PumpProfile::gaussian(a, w)),
    ]
}

fn pair() -> &'static LinearizedPair {
    static P: OnceLock<LinearizedPair> = OnceLock::new();
    P.get_or_init(|| {
        let gs = minimize_vm(grid(), 1.0, &FlowConfig::default()).unwrap();
        let cfg = PairConfig { hermite_order: None, ..PairConfig::default() };
        build_pair_with(&gs.field, gs.chem_potential, &cfg).unwrap()
    })
}

fn expansion() -> &'static ExpansionSet {
    static E: OnceLock<ExpansionSet> = OnceLock::new();
    E.get_or_init(|| {
        let sigma = PumpProfile::gaussian(1.0, 1.5);
        let (alpha, gs) = alpha_for_mass(grid(), &sigma, 2.0, &FlowConfig::default()).unwrap();
        let cfg = PairConfig { hermite_order: None, ..PairConfig::default() };
        let pair = build_pair_with(&gs.field, gs.chem_potential, &cfg).unwrap();
        build_expansion(&pair, &sigma, alpha).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn h0_is_symmetric(a in blob(), b in blob()) {
        let h0 = SchrodingerOperator::h0(grid());
        let (u, v) = (a.field(), b.field());
        let lhs = h0.apply_field(&u).dot(&v);
        let rhs = u.dot(&h0.apply_field(&v));
        let scale = u.norms().sigma_norm_sq.sqrt() * v.norms().sigma_norm_sq.sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn h0_is_bounded_below_by_two(a in blob()) {
        let u = a.field();
        let q = SchrodingerOperator::h0(grid()).apply_field(&u).dot(&u);
        let m = u.dot(&u);
        prop_assert!(q >= 2.0 * m * (1.0 - 1e-10), "{q} < 2·{m}");
        let n = u.norms();
        prop_assert!(n.gradsq + n.xmomsq >= 2.0 * n.l2sq * (1.0 - 1e-10));
    }

    #[test]
    fn parseval_on_band_limited_fields(coeffs in prop::collection::vec(-1.0..1.0f64, 64)) {
        let basis = HermiteBasis::new(grid(), 8).unwrap();
        let u = basis.to_grid(&coeffs);
        let sum: f64 = coeffs.iter().map(|c| c * c).sum();
        prop_assume!(sum > 1e-3);
        prop_assert!((u.norms().l2sq - sum).abs() <= 1e-9 * sum);
        let back = basis.from_grid(&u).unwrap();
        let err = back.iter().zip(&coeffs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn energy_gradient_matches_central_differences(a in blob(), b in blob(), scale in 0.2..2.0f64) {
        let u = a.field().scaled(scale);
        let v = b.field();
        let h = 1e-4;
        let energy = |w: &RealField| energy_functionals(&w.to_complex(), 0.0).h;
        let fd = (energy(&u.axpy(h, &v)) - energy(&u.axpy(-h, &v))) / (2.0 * h);
        let exact = energy_gradient(&u).dot(&v);
        prop_assert!((fd - exact).abs() <= 1e-6 * fd.abs().max(exact.abs()).max(1e-3), "{fd} vs {exact}");
    }

    #[test]
    fn alpha_for_state_zeroes_k(a in blob(), sigma in pump()) {
        let u = a.field();
        let s = sigma.sample(grid()).unwrap();
        let alpha = alpha_for_state(&u, &s).unwrap();
        let z = u.to_complex();
        let pump_part = kfunctional(&z, &s, 0.0);
        let k = kfunctional(&z, &s, alpha);
        prop_assert!(alpha > 0.0);
        prop_assert!(k.abs() <= 1e-13 * pump_part.abs().max(1e-300), "K = {k}, scale {pump_part}");
    }

    #[test]
    fn closed_position_flow_matches_rk4_and_composes(
        a in blob(),
        sigma in pump(),
        eps in 0.0..2.0f64,
        alpha in 0.1..3.0f64,
        tau in 1e-4..0.02f64,
    ) {
        let u = a.field().to_complex();
        let mut cfg = EvolutionConfig::new(1e-3, 0.1, eps, sigma, alpha);
        let closed = Stepper::new(grid(), &cfg, 1e-3).unwrap();
        cfg.position = PositionStep::Rk4 { substeps: 64 };
        let rk = Stepper::new(grid(), &cfg, 1e-3).unwrap();
        let mut x = u.values().to_vec();
        let mut y = x.clone();
        let mut z = x.clone();
        closed.position_flow(&mut x, 2.0 * tau);
        rk.position_flow(&mut y, 2.0 * tau);
        closed.position_flow(&mut z, tau);
        closed.position_flow(&mut z, tau);
        let norm = |w: &[Complex64]| w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let diff = |p: &[Complex64], q: &[Complex64]| p.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let n = norm(&x);
        prop_assert!(diff(&x, &y) <= 1e-10 * n, "rk4 gap {}", diff(&x, &y) / n);
        prop_assert!(diff(&x, &z) <= 1e-12 * n, "composition gap {}", diff(&x, &z) / n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lplus_dominates_lminus(a in blob()) {
        let p = pair();
        let u = a.field();
        let gap = p.apply_lplus(&u).dot(&u) - p.apply_lminus(&u).dot(&u);
        let want = 2.0 * p.q0.zip_map(&u, |q, v| q * q * v * v).integral();
        prop_assert!(gap >= -1e-12 * u.dot(&u));
        prop_assert!((gap - want).abs() <= 1e-10 * want.max(1e-300) + 1e-12 * u.dot(&u));
    }

    #[test]
    fn lplus_solve_inverts_apply(a in blob()) {
        let p = pair();
        let u = a.field();
        let back = p.solve_lplus(&p.apply_lplus(&u)).unwrap();
        prop_assert!(back.axpy(-1.0, &u).l2_norm() <= 1e-8 * u.l2_norm());
    }

    #[test]
    fn conservative_flow_keeps_mass(a in blob(), sigma in pump()) {
        let u = a.field().to_complex();
        let cfg = EvolutionConfig::new(1e-3, 0.02, 0.0, sigma, 1.0);
        let stepper = Stepper::new(grid(), &cfg, 1e-3).unwrap();
        let mut psi = u.values().to_vec();
        let m0 = u.norm_sqr();
        for _ in 0..20 {
            stepper.step(&mut psi);
        }
        let m1: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid().cell_area();
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0, "{m0} -> {m1}");
    }

    #[test]
    fn damping_alone_decreases_mass_and_energy(
        mass in 0.5..5.0f64,
        cx in -1.0..1.0f64,
        eps in 0.1..2.0f64,
        alpha in 0.5..2.0f64,
    ) {
        let psi0 = gaussian_data(grid(), mass, [cx, 0.3]);
        let cfg = EvolutionConfig::new(1e-3, 0.05, eps, PumpProfile::constant(0.0), alpha);
        let traj = evolve_run(&psi0, &cfg).unwrap();
        for w in traj.samples.windows(2) {
            prop_assert!(w[1].mass <= w[0].mass * (1.0 + 1e-14));
            prop_assert!(w[1].hamiltonian <= w[0].hamiltonian * (1.0 + 1e-12), "H rose at t = {}", w[1].t);
        }
    }

    #[test]
    fn residual_is_gauge_invariant(theta in 0.0..std::f64::consts::TAU, eps in 0.01..0.2f64) {
        let set = expansion();
        let (q, mu) = assemble_approx(set, eps);
        let r = residual_spe(&q, mu, eps, &set.sigma_field, set.alpha).unwrap();
        let turned = q.scaled(Complex64::from_polar(1.0, theta));
        let s = residual_spe(&turned, mu, eps, &set.sigma_field, set.alpha).unwrap();
        prop_assert!((r - s).abs() <= 1e-10 * r + 1e-14, "{r} vs {s}");
    }
}
