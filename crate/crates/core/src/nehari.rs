//! Sup-norm minimax over negative-spectrum perturbations and the resulting
//! two-sided bracket for the star-norm of an analytic polynomial.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, GridSpec};
use crate::hankel::{assemble_hankel, operator_norm};
use crate::lattice::{same_dim, LatticePoint};
use crate::multiplier::{is_analytic, OperatorContext};
use crate::trigpoly::{SpectralBox, TrigPoly};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub max_iter: usize,
    /// Step length at iteration k is `step · f₀ / √k`, with f₀ the starting sup.
    pub step: f64,
    /// Stop once the best value improved by less than `tol` over `patience` iterations.
    pub tol: f64,
    pub patience: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            step: 0.2,
            tol: 1e-7,
            patience: 5_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxResult {
    /// Grid sup of `|φ + g|` for the returned `g`.
    pub value: f64,
    /// Best perturbation found; spectrum inside the strictly negative cone.
    pub argument: TrigPoly,
    pub iterations: usize,
    /// Improvement of the best value over the last `patience` iterations.
    pub tolerance: f64,
    /// False when `max_iter` ran out before the improvement dropped below `tol`.
    pub converged: bool,
    /// Best value after each iteration (index 0 is the starting point `g = 0`).
    pub trace: Vec<f64>,
}

fn argmax_abs(v: &[Complex64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in v.iter().enumerate() {
        let a = c.norm();
        if a > best.1 {
            best = (i, a);
        }
    }
    best
}

/// Minimizes the grid sup of `|φ + g|` over `g` with spectrum in
/// `perturbation_box ∩ {sgn = −1}` by projected subgradient descent.
///
/// The subgradient is taken at the first grid maximizer; every iterate is
/// feasible by construction, so the projection is the identity on the chosen
/// coordinates.
pub fn nehari_minimax(
    phi: &TrigPoly,
    perturbation_box: &SpectralBox,
    grid: &GridSpec,
    ctx: &OperatorContext,
    params: &SolverParams,
) -> Result<MinimaxResult> {
    same_dim(ctx.dim(), phi.dim())?;
    same_dim(ctx.dim(), perturbation_box.dim())?;
    same_dim(ctx.dim(), grid.dim())?;
    if !is_analytic(phi, ctx) {
        return Err(Error::NotAnalytic);
    }
    if !(params.step > 0.0) || !(params.tol >= 0.0) || params.patience == 0 {
        return Err(Error::InvalidArgument("solver step must be positive and patience nonzero".into()));
    }
    let order = ctx.order();
    let basis: Vec<LatticePoint> = perturbation_box
        .points()
        .filter(|k| order.sign_unchecked(k.coords()) < 0)
        .collect();
    if basis.is_empty() {
        return Err(Error::EmptySet("perturbation box misses the strictly negative cone".into()));
    }
    if let Some(k) = basis.iter().find(|k| !grid.resolves(k)) {
        return Err(Error::InvalidGrid(format!("grid does not resolve perturbation frequency {k}")));
    }

    let mut values = sample(phi, grid)?.into_values();
    let table: Vec<Vec<Complex64>> = basis
        .iter()
        .map(|k| Ok(sample(&TrigPoly::character(k.clone()), grid)?.into_values()))
        .collect::<Result<_>>()?;

    let mut g = vec![Complex64::default(); basis.len()];
    let (mut at, f0) = argmax_abs(&values);
    let mut best = (f0, g.clone());
    let mut trace = vec![f0];
    let mut iterations = 0;
    let mut converged = f0 == 0.0;
    let scale = params.step * f0 / (basis.len() as f64).sqrt();

    while !converged && iterations < params.max_iter {
        iterations += 1;
        let u = values[at] / values[at].norm();
        let alpha = scale / (iterations as f64).sqrt();
        for (j, row) in table.iter().enumerate() {
            // Wirtinger gradient of |φ + g|(t*) in g_j is u·conj(e_j(t*)).
            let delta = -alpha * u * row[at].conj();
            g[j] += delta;
            for (v, e) in values.iter_mut().zip(row) {
                *v += delta * e;
            }
        }
        let (next, value) = argmax_abs(&values);
        at = next;
        if value < best.0 {
            best = (value, g.clone());
        }
        trace.push(best.0);
        if iterations >= params.patience {
            let gain = trace[iterations - params.patience] - best.0;
            converged = gain <= params.tol;
        }
    }

    let argument = TrigPoly::from_terms(ctx.dim(), basis.into_iter().zip(best.1))?;
    // Recompute from scratch so the reported value is exactly re-checkable.
    let value = sample(&phi.add(&argument)?, grid)?
        .values()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let tolerance = if iterations >= params.patience {
        trace[iterations - params.patience] - trace[iterations]
    } else {
        trace[0] - trace[iterations]
    };
    Ok(MinimaxResult {
        value,
        argument,
        iterations,
        tolerance,
        converged: converged || f0 == 0.0,
        trace,
    })
}

/// Windows for the two halves of [`bmo_star_bracket`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketWindows {
    pub hankel_in: SpectralBox,
    pub hankel_out: SpectralBox,
    pub perturbation: SpectralBox,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    /// Norm of a finite section of `H_{conj φ}`.
    pub lower: f64,
    /// Minimax value: a certified (grid) sup of a symbol `h` with `P₊h = φ`.
    pub upper: f64,
    pub minimax: MinimaxResult,
}

/// Star-norm bracket `‖H_{conj φ}‖ ≤ ‖φ‖_* ≤ min ‖φ + g‖_∞`.
pub fn bmo_star_bracket(
    phi: &TrigPoly,
    windows: &BracketWindows,
    grid: &GridSpec,
    ctx: &OperatorContext,
    params: &SolverParams,
    norm_tol: f64,
) -> Result<Bracket> {
    let minimax = nehari_minimax(phi, &windows.perturbation, grid, ctx, params)?;
    let h = assemble_hankel(&phi.conjugate(), &windows.hankel_in, &windows.hankel_out, ctx)?;
    let lower = operator_norm(&h, norm_tol, 100_000)?;
    Ok(Bracket {
        lower,
        upper: minimax.value,
        minimax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::OrderSpec;
    use crate::trigpoly::{random_poly, PolyConstraint};

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec()).unwrap()
    }

    fn chi(k: i64) -> TrigPoly {
        TrigPoly::character(pt(&[k]))
    }

    fn ctx1() -> OperatorContext {
        OperatorContext::new(OrderSpec::lex(1), SpectralBox::symmetric(1, 256).unwrap()).unwrap()
    }

    fn iv(lo: i64, hi: i64) -> SpectralBox {
        SpectralBox::interval(lo, hi).unwrap()
    }

    fn windows() -> BracketWindows {
        BracketWindows {
            hankel_in: iv(0, 15),
            hankel_out: iv(-16, -1),
            perturbation: iv(-8, -1),
        }
    }

    /// Cyclic coordinate descent with golden-section line searches on the
    /// real and imaginary part of each coefficient, evaluated by direct summation.
    fn coordinate_descent_oracle(phi: &TrigPoly, basis: &[i64], n: usize, sweeps: usize) -> f64 {
        let nodes: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64).collect();
        let base: Vec<Complex64> = nodes.iter().map(|&t| phi.evaluate(&[t]).unwrap()).collect();
        let sup = |g: &[Complex64]| -> f64 {
            nodes
                .iter()
                .zip(&base)
                .map(|(&t, b)| {
                    let s: Complex64 = basis
                        .iter()
                        .zip(g)
                        .map(|(&k, c)| c * Complex64::from_polar(1.0, k as f64 * t))
                        .sum();
                    (b + s).norm()
                })
                .fold(0.0, f64::max)
        };
        let mut g = vec![Complex64::default(); basis.len()];
        let mut radius = 1.0;
        for _ in 0..sweeps {
            for j in 0..basis.len() {
                for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                    let line = |s: f64, g: &mut Vec<Complex64>| {
                        let old = g[j];
                        g[j] = old + dir * s;
                        let v = sup(g);
                        g[j] = old;
                        v
                    };
                    let (mut a, mut b) = (-radius, radius);
                    let r = (5f64.sqrt() - 1.0) / 2.0;
                    while b - a > 1e-10 {
                        let (c, d) = (b - r * (b - a), a + r * (b - a));
                        if line(c, &mut g) <= line(d, &mut g) {
                            b = d;
                        } else {
                            a = c;
                        }
                    }
                    let s = 0.5 * (a + b);
                    if line(s, &mut g) < sup(&g) {
                        g[j] += dir * s;
                    }
                }
            }
            radius = (radius * 0.7).max(1e-3);
        }
        sup(&g)
    }

    #[test]
    fn constant_symbol() {
        let grid = GridSpec::cube(1, 256).unwrap();
        let r = nehari_minimax(&TrigPoly::constant(1, Complex64::new(1.0, 0.0)), &iv(-8, -1), &grid, &ctx1(), &SolverParams::default())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.argument.l2_norm() < 1e-12);
    }

    #[test]
    fn single_character() {
        let grid = GridSpec::cube(1, 256).unwrap();
        let r = nehari_minimax(&chi(1), &iv(-8, -1), &grid, &ctx1(), &SolverParams::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn trace_is_non_increasing_and_value_rechecks() {
        let phi = random_poly(&iv(0, 6), &PolyConstraint::None, 4).unwrap();
        let grid = GridSpec::cube(1, 512).unwrap();
        let params = SolverParams {
            max_iter: 3000,
            ..SolverParams::default()
        };
        let r = nehari_minimax(&phi, &iv(-8, -1), &grid, &ctx1(), &params).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.value - r.trace.last().unwrap()).abs() < 1e-10);
        assert!(r.argument.terms().all(|(k, _)| k.coords()[0] < 0 && k.coords()[0] >= -8));
        assert!(r.iterations <= 3000);
    }

    #[test]
    fn two_characters_against_oracles() {
        let phi = chi(1).add(&chi(2)).unwrap();
        let grid = GridSpec::cube(1, 512).unwrap();
        let r = nehari_minimax(&phi, &iv(-8, -1), &grid, &ctx1(), &SolverParams::default()).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let oracle = coordinate_descent_oracle(&phi, &(-8..=-1).collect::<Vec<_>>(), 512, 30);
        assert!(oracle >= golden - 1e-9 && oracle <= 2.0);
        assert!(r.value <= oracle, "solver {} oracle {oracle}", r.value);
        // Polygonal LP relaxation (64 directions) of the same grid problem:
        // 1.807177 ≤ optimum ≤ 1.807177 / cos(π/64) = 1.809357.
        assert!(r.value >= 1.807177 - 1e-6, "{}", r.value);
        assert!(r.value <= 1.809357 + 1e-3, "{}", r.value);
        // The finite section lower bound is the golden ratio.
        let h = assemble_hankel(&phi.conjugate(), &iv(0, 7), &iv(-8, -1), &ctx1()).unwrap();
        assert!((operator_norm(&h, 1e-12, 10_000).unwrap() - golden).abs() < 1e-10);
    }

    #[test]
    fn bracket_examples() {
        let grid = GridSpec::cube(1, 1024).unwrap();
        let params = SolverParams::default();
        let b = bmo_star_bracket(&chi(1), &windows(), &grid, &ctx1(), &params, 1e-12).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 1.0).abs() < 1e-9);

        let one = TrigPoly::constant(1, Complex64::new(1.0, 0.0));
        let b = bmo_star_bracket(&one, &windows(), &grid, &ctx1(), &params, 1e-12).unwrap();
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - 1.0).abs() < 1e-12);

        let b = bmo_star_bracket(&TrigPoly::zero(1), &windows(), &grid, &ctx1(), &params, 1e-12).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));

        for seed in 0..5 {
            let phi = random_poly(&iv(0, 5), &PolyConstraint::None, seed).unwrap();
            let b = bmo_star_bracket(&phi, &windows(), &grid, &ctx1(), &params, 1e-10).unwrap();
            assert!(b.lower <= b.upper + 1e-3, "seed {seed}: {} > {}", b.lower, b.upper);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let grid = GridSpec::cube(1, 64).unwrap();
        let p = SolverParams::default();
        assert!(matches!(nehari_minimax(&chi(-1), &iv(-8, -1), &grid, &ctx1(), &p), Err(Error::NotAnalytic)));
        assert!(matches!(nehari_minimax(&chi(1), &iv(0, 8), &grid, &ctx1(), &p), Err(Error::EmptySet(_))));
        assert!(nehari_minimax(&chi(1), &iv(-40, -1), &grid, &ctx1(), &p).is_err());
    }

    #[test]
    fn two_dimensional_lex() {
        let ctx = OperatorContext::new(OrderSpec::lex(2), SpectralBox::symmetric(2, 16).unwrap()).unwrap();
        let grid = GridSpec::cube(2, 64).unwrap();
        let phi = TrigPoly::character(pt(&[0, 1])).add(&TrigPoly::character(pt(&[1, -1]))).unwrap();
        let windows = BracketWindows {
            hankel_in: SpectralBox::symmetric(2, 3).unwrap(),
            hankel_out: SpectralBox::symmetric(2, 3).unwrap(),
            perturbation: SpectralBox::symmetric(2, 2).unwrap(),
        };
        let params = SolverParams {
            max_iter: 4000,
            ..SolverParams::default()
        };
        let b = bmo_star_bracket(&phi, &windows, &grid, &ctx, &params, 1e-10).unwrap();
        assert!(b.lower > 0.0);
        assert!(b.lower <= b.upper + 1e-3);
        assert!(b.upper <= 2.0 + 1e-12);
    }
}
