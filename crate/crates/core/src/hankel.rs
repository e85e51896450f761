//! Finite sections of Hankel operators `H_φ f = P₋(φ·f)` in character bases.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{same_dim, LatticePoint, OrderSpec};
use crate::multiplier::OperatorContext;
use crate::trigpoly::{SpectralBox, TrigPoly};

/// Seed of the fixed perturbation added to the all-ones start vector.
const POWER_SEED: u64 = 0x005e_ed4a_4ee1_u64;

/// A dense finite section of a Hankel operator.
///
/// Rows are indexed by `out_basis` (negative characters, descending), columns
/// by `in_basis` (the positive cone, ascending); `entry(η, ξ) = φ̂(η − ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelMatrix {
    order: OrderSpec,
    in_basis: Vec<LatticePoint>,
    out_basis: Vec<LatticePoint>,
    entries: Vec<Complex64>,
}

impl HankelMatrix {
    pub fn order(&self) -> &OrderSpec {
        &self.order
    }

    pub fn in_basis(&self) -> &[LatticePoint] {
        &self.in_basis
    }

    pub fn out_basis(&self) -> &[LatticePoint] {
        &self.out_basis
    }

    pub fn rows(&self) -> usize {
        self.out_basis.len()
    }

    pub fn cols(&self) -> usize {
        self.in_basis.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols() + col]
    }

    /// Overwrites one entry; the result is in general no longer Hankel.
    pub fn set_entry(&mut self, row: usize, col: usize, value: Complex64) {
        let cols = self.cols();
        self.entries[row * cols + col] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |s, c| s + c.norm_sqr()).sqrt()
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.entries
            .chunks_exact(self.cols())
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.cols()];
        for (row, &wi) in self.entries.chunks_exact(self.cols()).zip(w) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * wi;
            }
        }
        out
    }

    /// Row-major dense entries as `[re, im]` pairs together with both bases,
    /// for cross-checks in external linear-algebra tools.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Descriptor<'a> {
            order: &'a OrderSpec,
            in_basis: &'a [LatticePoint],
            out_basis: &'a [LatticePoint],
            rows: usize,
            cols: usize,
            entries: Vec<[f64; 2]>,
        }
        Ok(serde_json::to_string(&Descriptor {
            order: &self.order,
            in_basis: &self.in_basis,
            out_basis: &self.out_basis,
            rows: self.rows(),
            cols: self.cols(),
            entries: self.entries.iter().map(|c| [c.re, c.im]).collect(),
        })?)
    }
}

fn sorted_basis(window: &SpectralBox, order: &OrderSpec, keep: impl Fn(i32) -> bool, descending: bool) -> Vec<LatticePoint> {
    let mut basis: Vec<_> = window
        .points()
        .filter(|k| keep(order.sign_unchecked(k.coords())))
        .collect();
    basis.sort_by(|a, b| {
        let o = order.compare(a, b).unwrap_or(Ordering::Equal);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    basis
}

/// Section of `H_φ` from `in_window ∩ X₊` to `out_window ∩ (−X₊∖{0})`.
pub fn assemble_hankel(
    phi: &TrigPoly,
    in_window: &SpectralBox,
    out_window: &SpectralBox,
    ctx: &OperatorContext,
) -> Result<HankelMatrix> {
    let order = ctx.order();
    same_dim(order.dim(), phi.dim())?;
    same_dim(order.dim(), in_window.dim())?;
    same_dim(order.dim(), out_window.dim())?;
    let in_basis = sorted_basis(in_window, order, |s| s >= 0, false);
    let out_basis = sorted_basis(out_window, order, |s| s < 0, true);
    if in_basis.is_empty() {
        return Err(Error::EmptyBasis("input window misses the positive cone".into()));
    }
    if out_basis.is_empty() {
        return Err(Error::EmptyBasis("output window misses the negative cone".into()));
    }
    let mut entries = Vec::with_capacity(in_basis.len() * out_basis.len());
    for eta in &out_basis {
        for xi in &in_basis {
            entries.push(phi.coeff(&eta.checked_sub(xi)?));
        }
    }
    Ok(HankelMatrix {
        order: order.clone(),
        in_basis,
        out_basis,
        entries,
    })
}

/// Outcome of the power iteration on `H*H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIterate {
    /// Square root of the final Rayleigh quotient; never exceeds σ_max.
    pub value: f64,
    /// `‖H*Hv − λv‖` for the final unit vector `v`.
    pub residual: f64,
    /// `residual / value`: the distance from `value` to a singular value of `H` is at most this.
    pub bound: f64,
    pub iterations: usize,
}

/// Largest singular value by power iteration on the Gram operator `H*H`.
///
/// Stops once the eigen-residual certifies that the estimate is within `tol`
/// of a singular value. The start vector is all-ones plus a fixed seeded
/// perturbation, so it is not orthogonal to the dominant singular vector for
/// any structured section.
pub fn power_iteration(h: &HankelMatrix, tol: f64, max_iter: usize) -> Result<PowerIterate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if h.frobenius_norm() == 0.0 {
        return Ok(PowerIterate {
            value: 0.0,
            residual: 0.0,
            bound: 0.0,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vec<Complex64> = (0..h.cols())
        .map(|_| Complex64::new(1.0 + 0.1 * rng.random_range(-1.0..1.0), 0.1 * rng.random_range(-1.0..1.0)))
        .collect();
    normalize(&mut v);
    let mut last = PowerIterate {
        value: 0.0,
        residual: f64::INFINITY,
        bound: f64::INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let u = h.apply_adjoint(&h.apply(&v));
        let lambda: f64 = v.iter().zip(&u).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0);
        let residual = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let value = lambda.sqrt();
        let bound = if value > 0.0 { residual / value } else { f64::INFINITY };
        last = PowerIterate {
            value,
            residual,
            bound,
            iterations: it,
        };
        if bound <= tol {
            return Ok(last);
        }
        v = u;
        if normalize(&mut v) == 0.0 {
            // Start vector fell in the null space: restart from a fresh perturbation.
            v = (0..h.cols())
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            normalize(&mut v);
        }
    }
    Err(Error::NonConvergence {
        iterations: last.iterations,
        estimate: last.value,
        residual: last.residual,
    })
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = v.iter().fold(0.0, |s, c| s + c.norm_sqr()).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c /= n);
    }
    n
}

/// Operator norm of a section; see [`power_iteration`].
pub fn operator_norm(h: &HankelMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    power_iteration(h, tol, max_iter).map(|p| p.value)
}

/// Frobenius norm of `H S_χ − P₋ S_χ H` on the part of the section where
/// both compositions are defined: columns ξ with ξ + χ in the input basis and
/// rows η with η − χ in the output basis. Zero for a true Hankel section.
pub fn intertwining_residual(h: &HankelMatrix, shift: &LatticePoint) -> Result<f64> {
    same_dim(h.order.dim(), shift.dim())?;
    if h.order.sign(shift)? < 0 {
        return Err(Error::InvalidArgument(format!("shift {shift} is not in the positive cone")));
    }
    let col_of = |k: &LatticePoint| h.in_basis.iter().position(|x| x == k);
    let row_of = |k: &LatticePoint| h.out_basis.iter().position(|x| x == k);
    let mut pairs = 0usize;
    let mut sum = 0.0;
    for (r, eta) in h.out_basis.iter().enumerate() {
        let Some(r_src) = row_of(&eta.checked_sub(shift)?) else {
            continue;
        };
        for (c, xi) in h.in_basis.iter().enumerate() {
            let Some(c_dst) = col_of(&xi.checked_add(shift)?) else {
                continue;
            };
            // (H S_χ)[η, ξ] = H[η, ξ+χ];  (P₋ S_χ H)[η, ξ] = H[η−χ, ξ].
            sum += (h.entry(r, c_dst) - h.entry(r_src, c)).norm_sqr();
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::InvalidArgument(format!("section too small for the shift {shift}")));
    }
    Ok(sum.sqrt())
}

/// Assembles the section of `H_φ` and evaluates [`intertwining_residual`].
pub fn intertwining_residual_for_symbol(
    phi: &TrigPoly,
    shift: &LatticePoint,
    in_window: &SpectralBox,
    out_window: &SpectralBox,
    ctx: &OperatorContext,
) -> Result<f64> {
    intertwining_residual(&assemble_hankel(phi, in_window, out_window, ctx)?, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trigpoly::{random_poly, PolyConstraint};

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec()).unwrap()
    }

    fn chi(c: &[i64]) -> TrigPoly {
        TrigPoly::character(pt(c))
    }

    fn ctx1() -> OperatorContext {
        OperatorContext::new(OrderSpec::lex(1), SpectralBox::symmetric(1, 128).unwrap()).unwrap()
    }

    fn ctx2() -> OperatorContext {
        OperatorContext::new(OrderSpec::lex(2), SpectralBox::symmetric(2, 32).unwrap()).unwrap()
    }

    fn iv(lo: i64, hi: i64) -> SpectralBox {
        SpectralBox::interval(lo, hi).unwrap()
    }

    #[test]
    fn single_entry_section() {
        let h = assemble_hankel(&chi(&[-1]), &iv(0, 3), &iv(-4, -1), &ctx1()).unwrap();
        assert_eq!(h.out_basis()[0], pt(&[-1]));
        assert_eq!(h.in_basis()[0], pt(&[0]));
        let nonzero: Vec<_> = (0..h.rows())
            .flat_map(|r| (0..h.cols()).map(move |c| (r, c)))
            .filter(|&(r, c)| h.entry(r, c).norm() > 0.0)
            .collect();
        assert_eq!(nonzero, vec![(0, 0)]);
        assert_eq!(h.entry(0, 0), Complex64::new(1.0, 0.0));
        assert!((operator_norm(&h, 1e-12, 1000).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_symbol_gives_zero_matrix() {
        let h = assemble_hankel(&TrigPoly::zero(1), &iv(0, 3), &iv(-4, -1), &ctx1()).unwrap();
        assert_eq!(h.frobenius_norm(), 0.0);
        assert_eq!(operator_norm(&h, 1e-9, 10).unwrap(), 0.0);
    }

    #[test]
    fn two_dimensional_lex_entry() {
        let window = SpectralBox::symmetric(2, 1).unwrap();
        let h = assemble_hankel(&chi(&[-1, 0]), &window, &window, &ctx2()).unwrap();
        let r = h.out_basis().iter().position(|k| *k == pt(&[-1, 0])).unwrap();
        let c = h.in_basis().iter().position(|k| *k == pt(&[0, 0])).unwrap();
        assert_eq!(h.entry(r, c), Complex64::new(1.0, 0.0));
        // Bases are sorted: ascending positive cone, descending negative cone.
        assert_eq!(h.in_basis()[0], pt(&[0, 0]));
        assert_eq!(h.out_basis()[0], pt(&[0, -1]));
    }

    #[test]
    fn empty_bases_are_errors() {
        assert!(matches!(
            assemble_hankel(&chi(&[-1]), &iv(-3, -1), &iv(-4, -1), &ctx1()),
            Err(Error::EmptyBasis(_))
        ));
        assert!(matches!(
            assemble_hankel(&chi(&[-1]), &iv(0, 3), &iv(0, 4), &ctx1()),
            Err(Error::EmptyBasis(_))
        ));
    }

    #[test]
    fn rank_one_norm() {
        let mut h = assemble_hankel(&TrigPoly::zero(1), &iv(0, 2), &iv(-3, -1), &ctx1()).unwrap();
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 0.0, 4.0];
        for (r, ar) in a.iter().enumerate() {
            for (c, bc) in b.iter().enumerate() {
                h.set_entry(r, c, Complex64::new(ar * bc, 0.0));
            }
        }
        let want = (1.0f64 + 4.0 + 0.25).sqrt() * 5.0;
        assert!((operator_norm(&h, 1e-12, 1000).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let phi = random_poly(&iv(-20, -1), &PolyConstraint::None, 3).unwrap();
        let h = assemble_hankel(&phi, &iv(0, 20), &iv(-20, -1), &ctx1()).unwrap();
        assert!(matches!(power_iteration(&h, 1e-14, 2), Err(Error::NonConvergence { .. })));
        assert!(power_iteration(&h, 0.0, 2).is_err());
    }

    #[test]
    fn intertwining_examples() {
        let ctx = ctx1();
        let r = intertwining_residual_for_symbol(&chi(&[-2]), &pt(&[1]), &iv(0, 6), &iv(-7, -1), &ctx).unwrap();
        assert_eq!(r, 0.0);

        let phi = random_poly(&SpectralBox::symmetric(2, 3).unwrap(), &PolyConstraint::None, 21).unwrap();
        let window = SpectralBox::symmetric(2, 3).unwrap();
        let r = intertwining_residual_for_symbol(&phi, &pt(&[0, 1]), &window, &window, &ctx2()).unwrap();
        assert!(r <= 1e-12);

        let mut h = assemble_hankel(&chi(&[-2]), &iv(0, 6), &iv(-7, -1), &ctx).unwrap();
        h.set_entry(2, 2, Complex64::new(0.25, 0.0));
        // The corrupted entry (η, ξ) = (−3, 2) is compared twice: against (−4, 1) and against (−2, 3).
        let r = intertwining_residual(&h, &pt(&[1])).unwrap();
        assert!((r - (2.0f64 * 0.0625).sqrt()).abs() < 1e-15);

        assert!(intertwining_residual_for_symbol(&chi(&[-2]), &pt(&[10]), &iv(0, 6), &iv(-7, -1), &ctx).is_err());
        assert!(intertwining_residual(&h, &pt(&[-1])).is_err());
    }

    fn dense(h: &HankelMatrix) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(h.rows(), h.cols(), |r, c| h.entry(r, c))
    }

    fn svd_norm(h: &HankelMatrix) -> f64 {
        dense(h).singular_values().max()
    }

    #[test]
    fn matches_dense_svd() {
        let phi = chi(&[-1]).add(&chi(&[-2])).unwrap();
        let h = assemble_hankel(&phi, &iv(0, 7), &iv(-8, -1), &ctx1()).unwrap();
        let want = svd_norm(&h);
        // Only the 2×2 corner [[1,1],[1,0]] is nonzero: the golden ratio.
        assert!((want - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let got = power_iteration(&h, 1e-10, 10_000).unwrap();
        assert!((got.value - want).abs() <= 1e-10);
        assert!(got.value >= 1.0 && got.value <= 2.0);

        for seed in 0..4 {
            let phi = random_poly(&SpectralBox::symmetric(2, 3).unwrap(), &PolyConstraint::None, seed).unwrap();
            let window = SpectralBox::symmetric(2, 3).unwrap();
            let h = assemble_hankel(&phi, &window, &window, &ctx2()).unwrap();
            let got = operator_norm(&h, 1e-9, 100_000).unwrap();
            assert!((got - svd_norm(&h)).abs() <= 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn json_descriptor() {
        let h = assemble_hankel(&chi(&[-1]), &iv(0, 1), &iv(-1, -1), &ctx1()).unwrap();
        assert_eq!(
            h.to_json().unwrap(),
            r#"{"order":{"kind":"lex","perm":[0]},"in_basis":[[0],[1]],"out_basis":[[-1]],"rows":1,"cols":2,"entries":[[1.0,0.0],[0.0,0.0]]}"#
        );
    }
}
