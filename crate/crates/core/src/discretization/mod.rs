//! Grid and Hermite representations of 2D fields and of the operators
//! -Δ, |x|², H₀ = -Δ + |x|².

mod eigen;
mod field;
mod grid;
mod hermite;
mod krylov;
mod operator;

use std::sync::Arc;

pub use eigen::{
    dense_eigenpairs, dense_lowest, h0_rep, lowest_eigenpairs, lowest_eigenpairs_with, EigenConfig, Eigenpair,
};
pub use field::{sigma_norm, ComplexField, Norms, RealField};
pub use grid::{build_grid, Grid, GridSpec};
pub use hermite::{gauss_hermite, hermite_functions, HermiteBasis};
pub use krylov::{conjugate_gradient, minres, KrylovConfig, SolveStats};
pub use operator::{apply_h0, symmetry_defect, DenseHermite, H0Applied, OperatorRep, SchrodingerOperator};

/// Default resolution: 128 points per axis on [-8, 8)².
pub const DEFAULT_N: usize = 128;
pub const DEFAULT_EXTENT: f64 = 8.0;
/// Default Hermite modes per axis.
pub const DEFAULT_HERMITE_ORDER: usize = 40;

/// ‖u‖₂², ‖u‖₄⁴, ‖∇u‖₂², ‖xu‖₂² and the Σ-norm on the grid.
pub fn norms(u: &ComplexField) -> Norms {
    u.norms()
}

/// The H₀ ground state φ₁(x) = π^{-1/2} e^{-|x|²/2}.
pub fn phi1_reference(grid: Arc<Grid>) -> RealField {
    let c = std::f64::consts::FRAC_1_SQRT_2 * std::f64::consts::FRAC_2_SQRT_PI * std::f64::consts::FRAC_1_SQRT_2;
    RealField::from_fn(grid, |x, y| c * (-(x * x + y * y) / 2.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_grid() -> Arc<Grid> {
        build_grid(DEFAULT_N, DEFAULT_EXTENT).unwrap()
    }

    #[test]
    fn phi1_samples() {
        let g = default_grid();
        let phi = phi1_reference(g.clone());
        let n = g.n();
        let origin = (n / 2) * n + n / 2;
        assert!((phi.values()[origin] - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((phi.values()[origin] - 0.5641896).abs() < 1e-7);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(phi.values()[i * n + j], phi.values()[g.mirror(i) * n + g.mirror(j)]);
            }
        }
        assert!((phi.norms().l2sq - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi1_gaussian_moments() {
        let phi = phi1_reference(default_grid()).norms();
        assert!((phi.l2sq - 1.0).abs() < 1e-12);
        assert!((phi.l4fourth - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!((phi.l4fourth - 0.1591549).abs() < 1e-7);
        assert!((phi.gradsq - 1.0).abs() < 1e-12);
        assert!((phi.xmomsq - 1.0).abs() < 1e-12);
        assert!((phi.sigma_norm_sq - 3.0).abs() < 1e-12);
    }

    #[test]
    fn h0_phi1_is_twice_phi1() {
        let phi = phi1_reference(default_grid());
        let out = apply_h0(&phi.to_complex());
        assert!(!out.decay_warning);
        let r = out.field.sub(&phi.to_complex().scaled(2.0.into()));
        assert!(r.l2_norm() / phi.l2_norm() < 1e-8);
        let zero = apply_h0(&ComplexField::zeros(phi.grid().clone()));
        assert_eq!(zero.field.max_abs(), 0.0);
    }

    #[test]
    fn h0_first_excited_mode() {
        let g = default_grid();
        let u = RealField::from_fn(g, |x, y| hermite_functions(x, 2)[1] * hermite_functions(y, 1)[0]);
        let out = apply_h0(&u.to_complex()).field;
        let r = out.sub(&u.to_complex().scaled(4.0.into()));
        assert!(r.l2_norm() < 1e-8);
        assert_eq!(HermiteBasis::eigenvalue(1, 0), 4.0);
    }

    #[test]
    fn decay_warning_flags_wide_fields() {
        let g = default_grid();
        let wide = RealField::from_fn(g, |x, y| (-(x * x + y * y) / 40.0).exp());
        assert!(apply_h0(&wide.to_complex()).decay_warning);
    }

    #[test]
    fn refinement_leaves_l4_unchanged() {
        let a = phi1_reference(build_grid(128, 8.0).unwrap()).norms().l4fourth;
        let b = phi1_reference(build_grid(256, 8.0).unwrap()).norms().l4fourth;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn h0_spectrum_dense_and_grid() {
        let g = default_grid();
        let basis = Arc::new(HermiteBasis::new(g.clone(), 16).unwrap());
        let rep = h0_rep(basis).unwrap();
        let dense = dense_eigenpairs(&rep, 3).unwrap();
        let grid = lowest_eigenpairs(&rep, 3).unwrap();
        for (want, (d, q)) in [2.0, 4.0, 4.0].iter().zip(dense.iter().zip(&grid)) {
            assert!((d.value - want).abs() < 1e-12);
            assert!((q.value - want).abs() < 1e-9, "{} vs {}", q.value, want);
            assert!(q.residual < 1e-8);
        }
        let phi = phi1_reference(g);
        let dist = grid[0].vector.axpy(-1.0, &phi).l2_norm();
        assert!(dist < 1e-6, "distance {dist}");
        // shifted operator: H₀ - 2
        let shifted = OperatorRep::grid_only(SchrodingerOperator::h0(phi.grid().clone()).with_shift(2.0));
        let low = lowest_eigenpairs(&shifted, 1).unwrap();
        assert!(low[0].value.abs() < 1e-9);
    }
}
