//! Order-dependent Fourier multipliers: Riesz projections, the Hilbert
//! transform `−i·sgn`, analytic completion and the H¹/BMO norm functionals
//! built from them.
//!
//! The positive cone contains the unit character, so `P₊` keeps the mean and
//! `P₋` keeps exactly the frequencies with negative sign.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, lp_norm, sample, GridFunction, GridSpec, Norm};
use crate::lattice::{same_dim, OrderSpec};
use crate::trigpoly::{SpectralBox, TrigPoly};

/// Relative tolerance for the conjugate-symmetry check on inputs that must be real.
const REAL_TOL: f64 = 1e-12;

/// The order together with the spectral window every operand must live in.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorContext {
    order: OrderSpec,
    truncation: SpectralBox,
}

impl OperatorContext {
    pub fn new(order: OrderSpec, truncation: SpectralBox) -> Result<Self> {
        same_dim(order.dim(), truncation.dim())?;
        if !truncation.contains_zero() {
            return Err(Error::InvalidBox("truncation window must contain the origin".into()));
        }
        Ok(Self { order, truncation })
    }

    pub fn order(&self) -> &OrderSpec {
        &self.order
    }

    pub fn truncation(&self) -> &SpectralBox {
        &self.truncation
    }

    pub fn dim(&self) -> usize {
        self.order.dim()
    }

    pub fn check(&self, f: &TrigPoly) -> Result<()> {
        same_dim(self.dim(), f.dim())?;
        match f.terms().find(|(k, _)| !self.truncation.contains(k)) {
            Some((k, _)) => Err(Error::OutsideWindow(k.to_string())),
            None => Ok(()),
        }
    }

    fn sign(&self, k: &crate::lattice::LatticePoint) -> i32 {
        self.order.sign_unchecked(k.coords())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

pub fn project(f: &TrigPoly, side: Side, ctx: &OperatorContext) -> Result<TrigPoly> {
    ctx.check(f)?;
    Ok(match side {
        Side::Plus => f.filter(|k| ctx.sign(k) >= 0),
        Side::Minus => f.filter(|k| ctx.sign(k) < 0),
    })
}

/// `ĝ(χ) = −i·sgn(χ)·f̂(χ)`.
pub fn hilbert(f: &TrigPoly, ctx: &OperatorContext) -> Result<TrigPoly> {
    ctx.check(f)?;
    Ok(f.map_coeffs(|k, c| c * Complex64::new(0.0, -(ctx.sign(k) as f64))))
}

pub fn is_analytic(f: &TrigPoly, ctx: &OperatorContext) -> bool {
    f.terms().all(|(k, _)| ctx.sign(k) >= 0)
}

fn require_real(f: &TrigPoly) -> Result<()> {
    let scale = f.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    if f.is_real(REAL_TOL * scale.max(1.0)) {
        Ok(())
    } else {
        Err(Error::NotReal)
    }
}

/// `u + i·𝓗u` for real `u`: the analytic function with real part `u` whose
/// imaginary part has zero mean.
pub fn analytic_completion(u: &TrigPoly, ctx: &OperatorContext) -> Result<TrigPoly> {
    require_real(u)?;
    let tilde = hilbert(u, ctx)?;
    u.add(&tilde.scale(Complex64::new(0.0, 1.0)))
}

/// Coefficient-space norm of `i𝓗q − (2P₊q − q − q̂(0))`.
///
/// The constant term enters once: at the unit character `i𝓗q` vanishes and
/// `2P₊q − q` equals `q̂(0)`. The identity then holds for every complex `q`.
pub fn hilbert_identity_residual(q: &TrigPoly, ctx: &OperatorContext) -> Result<f64> {
    let lhs = hilbert(q, ctx)?.scale(Complex64::new(0.0, 1.0));
    let mean = TrigPoly::constant(q.dim(), q.mean());
    let rhs = project(q, Side::Plus, ctx)?
        .scale(2.0.into())
        .sub(q)?
        .sub(&mean)?;
    lhs.coeff_distance(&rhs)
}

fn l1(f: &TrigPoly, grid: &GridSpec) -> Result<f64> {
    lp_norm(&sample(f, grid)?, Norm::P(1.0))
}

/// `‖P₋q‖₁ + ‖P₊q‖₁` by grid quadrature, for real `q`.
pub fn h1_star_norm(q: &TrigPoly, grid: &GridSpec, ctx: &OperatorContext) -> Result<f64> {
    require_real(q)?;
    Ok(l1(&project(q, Side::Minus, ctx)?, grid)? + l1(&project(q, Side::Plus, ctx)?, grid)?)
}

/// `‖q‖₁ + ‖𝓗q‖₁` by grid quadrature.
pub fn hilbert_equiv_norm(q: &TrigPoly, grid: &GridSpec, ctx: &OperatorContext) -> Result<f64> {
    Ok(l1(q, grid)? + l1(&hilbert(q, ctx)?, grid)?)
}

/// For bounded `f, g` returns `φ = f + 𝓗g` together with
/// `‖f‖_sup + ‖g‖_sup`, an upper bound for `‖φ‖_BMO`.
pub fn bmo_upper_from_decomposition(
    f: &TrigPoly,
    g: &TrigPoly,
    grid: &GridSpec,
    ctx: &OperatorContext,
) -> Result<(TrigPoly, f64)> {
    let phi = f.add(&hilbert(g, ctx)?)?;
    let bound = lp_norm(&sample(f, grid)?, Norm::Sup)? + lp_norm(&sample(g, grid)?, Norm::Sup)?;
    Ok((phi, bound))
}

/// Riesz projection of sampled data, via the discrete spectrum (Nyquist bins dropped).
pub fn project_grid(g: &GridFunction, side: Side, order: &OrderSpec) -> Result<GridFunction> {
    same_dim(order.dim(), g.spec().dim())?;
    let offsets = g.spec().offsets().to_vec();
    apply_multiplier(
        g,
        |k| {
            let keep = match side {
                Side::Plus => order.sign_unchecked(k) >= 0,
                Side::Minus => order.sign_unchecked(k) < 0,
            };
            if keep {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        },
        &offsets,
    )
}

/// Multiplier Hilbert transform of sampled data, resampled on `out_offsets`.
pub fn hilbert_grid(g: &GridFunction, order: &OrderSpec, out_offsets: &[bool]) -> Result<GridFunction> {
    same_dim(order.dim(), g.spec().dim())?;
    apply_multiplier(g, |k| Complex64::new(0.0, -(order.sign_unchecked(k) as f64)), out_offsets)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::lattice::LatticePoint;
    use crate::trigpoly::{random_poly, PolyConstraint};

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec()).unwrap()
    }

    fn chi(c: &[i64]) -> TrigPoly {
        TrigPoly::character(pt(c))
    }

    fn ctx1() -> OperatorContext {
        OperatorContext::new(OrderSpec::lex(1), SpectralBox::symmetric(1, 64).unwrap()).unwrap()
    }

    fn ctx2() -> OperatorContext {
        OperatorContext::new(OrderSpec::lex(2), SpectralBox::symmetric(2, 16).unwrap()).unwrap()
    }

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn context_validation() {
        assert!(OperatorContext::new(OrderSpec::lex(1), SpectralBox::interval(1, 4).unwrap()).is_err());
        assert!(OperatorContext::new(OrderSpec::lex(2), SpectralBox::interval(-1, 4).unwrap()).is_err());
        assert!(matches!(
            project(&chi(&[65]), Side::Plus, &ctx1()),
            Err(Error::OutsideWindow(_))
        ));
    }

    #[test]
    fn projection_examples() {
        let cos = TrigPoly::cosine(pt(&[1]));
        assert_eq!(project(&cos, Side::Plus, &ctx1()).unwrap(), chi(&[1]).scale(0.5.into()));
        assert!(project(&chi(&[0]), Side::Minus, &ctx1()).unwrap().is_zero());
        let f = chi(&[0, -1]).add(&chi(&[1, -9])).unwrap();
        assert_eq!(project(&f, Side::Plus, &ctx2()).unwrap(), chi(&[1, -9]));
    }

    #[test]
    fn hilbert_examples() {
        let cos = TrigPoly::cosine(pt(&[1]));
        let sin = TrigPoly::sine(pt(&[1]));
        assert!(hilbert(&cos, &ctx1()).unwrap().max_abs_diff(&sin) < 1e-16);
        assert!(hilbert(&chi(&[0]), &ctx1()).unwrap().is_zero());
        assert_eq!(
            hilbert(&chi(&[0, 2]), &ctx2()).unwrap(),
            chi(&[0, 2]).scale(cx(0.0, -1.0))
        );
    }

    #[test]
    fn analytic_completion_examples() {
        let ctx = ctx1();
        let cos = TrigPoly::cosine(pt(&[1]));
        assert!(analytic_completion(&cos, &ctx).unwrap().max_abs_diff(&chi(&[1])) < 1e-16);
        let one = TrigPoly::constant(1, 1.0.into());
        assert_eq!(analytic_completion(&one, &ctx).unwrap(), one);
        let sin = TrigPoly::sine(pt(&[1]));
        let completed = analytic_completion(&sin, &ctx).unwrap();
        assert!(completed.max_abs_diff(&chi(&[1]).scale(cx(0.0, -1.0))) < 1e-16);
        assert!(matches!(analytic_completion(&chi(&[1]), &ctx), Err(Error::NotReal)));
    }

    #[test]
    fn analytic_completion_kills_negative_cone_2d() {
        let ctx = ctx2();
        let u = random_poly(&SpectralBox::symmetric(2, 4).unwrap(), &PolyConstraint::Real, 17).unwrap();
        let f = analytic_completion(&u, &ctx).unwrap();
        assert!(f.terms().all(|(k, c)| ctx.order().sign(k).unwrap() >= 0 || c.norm() < 1e-15));
        // The conjugate part has zero mean.
        assert!((f.mean() - u.mean()).norm() < 1e-15);
    }

    #[test]
    fn identity_residual_examples() {
        let ctx = ctx1();
        assert!(hilbert_identity_residual(&TrigPoly::cosine(pt(&[1])), &ctx).unwrap() < 1e-16);
        assert!(hilbert_identity_residual(&chi(&[0]), &ctx).unwrap() < 1e-16);
        let q = random_poly(&SpectralBox::symmetric(1, 10).unwrap(), &PolyConstraint::Real, 1).unwrap();
        assert!(hilbert_identity_residual(&q, &ctx).unwrap() <= 1e-12);
        let z = random_poly(&SpectralBox::symmetric(2, 3).unwrap(), &PolyConstraint::None, 1).unwrap();
        assert!(hilbert_identity_residual(&z, &ctx2()).unwrap() <= 1e-12);
    }

    #[test]
    fn h1_norm_examples() {
        let ctx = ctx1();
        let grid = GridSpec::new(vec![256]).unwrap();
        let one = TrigPoly::constant(1, 1.0.into());
        assert!((h1_star_norm(&one, &grid, &ctx).unwrap() - 1.0).abs() < 1e-14);
        let cos = TrigPoly::cosine(pt(&[1]));
        assert!((h1_star_norm(&cos, &grid, &ctx).unwrap() - 1.0).abs() < 1e-3);
        assert_eq!(h1_star_norm(&TrigPoly::zero(1), &grid, &ctx).unwrap(), 0.0);
        assert!(matches!(h1_star_norm(&chi(&[1]), &grid, &ctx), Err(Error::NotReal)));

        assert!((hilbert_equiv_norm(&one, &grid, &ctx).unwrap() - 1.0).abs() < 1e-14);
        assert!((hilbert_equiv_norm(&cos, &grid, &ctx).unwrap() - 4.0 / PI).abs() < 1e-3);
        assert_eq!(hilbert_equiv_norm(&TrigPoly::zero(1), &grid, &ctx).unwrap(), 0.0);

        let small = GridSpec::new(vec![4]).unwrap();
        assert!(matches!(
            h1_star_norm(&TrigPoly::cosine(pt(&[3])), &small, &ctx),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn bmo_decomposition_examples() {
        let ctx = ctx1();
        let grid = GridSpec::new(vec![64]).unwrap();
        let one = TrigPoly::constant(1, 1.0.into());
        let zero = TrigPoly::zero(1);
        let cos = TrigPoly::cosine(pt(&[1]));
        let sin = TrigPoly::sine(pt(&[1]));

        let (phi, b) = bmo_upper_from_decomposition(&one, &zero, &grid, &ctx).unwrap();
        assert_eq!((phi, b), (one.clone(), 1.0));
        let (phi, b) = bmo_upper_from_decomposition(&zero, &cos, &grid, &ctx).unwrap();
        assert!(phi.max_abs_diff(&sin) < 1e-16 && (b - 1.0).abs() < 1e-14);
        let (phi, b) = bmo_upper_from_decomposition(&cos, &cos, &grid, &ctx).unwrap();
        assert!(phi.max_abs_diff(&cos.add(&sin).unwrap()) < 1e-16 && (b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_projection_matches_coefficient_projection() {
        let ctx = ctx2();
        let f = random_poly(&SpectralBox::symmetric(2, 5).unwrap(), &PolyConstraint::None, 8).unwrap();
        let grid = GridSpec::cube(2, 16).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let via_grid = project_grid(&sample(&f, &grid).unwrap(), side, ctx.order()).unwrap();
            let via_coeffs = sample(&project(&f, side, &ctx).unwrap(), &grid).unwrap();
            assert!(via_grid.relative_l2_error(&via_coeffs).unwrap() < 1e-13);
        }
    }
}
