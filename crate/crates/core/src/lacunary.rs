//! Lacunary spectra: the interval-count constant `K_E`, gap-set generators and
//! the experiments around the ℓ²-restriction and Hankel-norm inequalities.
//!
//! The multiplicative interval `[χ, χ²]` reads additively as `[χ, 2χ]`, with
//! `χ` ranging over the positive cone without the origin.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, sample, GridSpec, Norm};
use crate::hankel::{assemble_hankel, operator_norm};
use crate::lattice::{same_dim, LatticePoint, OrderSpec, COORD_BOUND};
use crate::multiplier::OperatorContext;
use crate::nehari::{bmo_star_bracket, BracketWindows, SolverParams};
use crate::report::{run_trials, trial_seed, ExperimentReport, Row};
use crate::trigpoly::{random_poly, PolyConstraint, SpectralBox, TrigPoly};

/// A finite set of strictly positive characters, sorted ascending in the order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LacunarySpectrum {
    order: OrderSpec,
    points: Vec<LatticePoint>,
}

impl LacunarySpectrum {
    pub fn new(order: OrderSpec, mut points: Vec<LatticePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet("lacunary spectrum".into()));
        }
        for p in &points {
            same_dim(order.dim(), p.dim())?;
            if order.sign(p)? <= 0 {
                return Err(Error::InvalidArgument(format!("{p} is not strictly positive")));
            }
        }
        points.sort_by(|a, b| order.compare(a, b).unwrap_or(Ordering::Equal));
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate point {}", w[0])));
        }
        Ok(Self { order, points })
    }

    /// Integers on the line under the usual order.
    pub fn from_integers(values: &[i64]) -> Result<Self> {
        let points = values.iter().map(|&v| LatticePoint::new(vec![v])).collect::<Result<_>>()?;
        Self::new(OrderSpec::lex(1), points)
    }

    pub fn order(&self) -> &OrderSpec {
        &self.order
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.order.dim()
    }

    pub fn contains(&self, k: &LatticePoint) -> bool {
        self.points
            .binary_search_by(|p| self.order.compare(p, k).unwrap_or(Ordering::Less))
            .is_ok()
    }

    /// Smallest box containing every point.
    pub fn bounding_box(&self) -> SpectralBox {
        let ranges = (0..self.dim())
            .map(|a| {
                let it = self.points.iter().map(|p| p.coords()[a]);
                (it.clone().min().unwrap_or(0), it.max().unwrap_or(0))
            })
            .collect();
        SpectralBox::new(ranges).expect("nonempty point set")
    }

    /// For a lexicographic order with every point on the most significant
    /// axis, that axis and the (positive) coordinates along it.
    fn leading_axis(&self) -> Option<(usize, Vec<i64>)> {
        let OrderSpec::Lexicographic { perm } = &self.order else {
            return None;
        };
        let axis = perm[0];
        let on_axis = self
            .points
            .iter()
            .all(|p| p.coords().iter().enumerate().all(|(a, &c)| a == axis || c == 0));
        on_axis.then(|| (axis, self.points.iter().map(|p| p.coords()[axis]).collect()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KMode {
    Exact,
    /// Maximum over the box only: a lower bound for `K_E`.
    SearchBox { bounds: SpectralBox },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KConstantReport {
    pub k: usize,
    pub witness: LatticePoint,
    #[serde(flatten)]
    pub mode: KMode,
}

/// Number of points of `E` in the order interval `[χ, 2χ]`.
pub fn interval_count(e: &LacunarySpectrum, chi: &LatticePoint) -> Result<usize> {
    let twice = chi.checked_scale(2)?;
    let mut n = 0;
    for p in &e.points {
        if e.order.compare(p, chi)? != Ordering::Less && e.order.compare(p, &twice)? != Ordering::Greater {
            n += 1;
        }
    }
    Ok(n)
}

/// `K_E = max_χ #{ξ ∈ E : χ ≤ ξ ≤ 2χ}`.
///
/// Without a search box the computation is exact, which needs the points to
/// lie on the most significant axis of a lexicographic order (in particular
/// any set of positive integers): the count only changes when `2χ` reaches a
/// point or `χ` passes one, so the candidates `{1} ∪ {⌈ξ/2⌉}` suffice, and an
/// off-axis `χ` only shrinks the interval along that axis. With a box the
/// maximum is taken over the box and is a lower bound. The witness is the
/// smallest `χ` attaining the maximum.
pub fn k_constant(e: &LacunarySpectrum, search: Option<&SpectralBox>) -> Result<KConstantReport> {
    match search {
        None => {
            let (axis, coords) = e
                .leading_axis()
                .ok_or_else(|| Error::InvalidArgument("exact K needs points on the leading lex axis; pass a search box".into()))?;
            let mut candidates: Vec<i64> = coords.iter().map(|&x| (x + 1) / 2).collect();
            candidates.push(1);
            candidates.sort_unstable();
            candidates.dedup();
            let count = |chi: i64| {
                let lo = coords.partition_point(|&x| x < chi);
                let hi = coords.partition_point(|&x| x <= 2 * chi);
                hi - lo
            };
            let mut best = (0, 0);
            for &c in &candidates {
                let n = count(c);
                if n > best.0 {
                    best = (n, c);
                }
            }
            Ok(KConstantReport {
                k: best.0,
                witness: LatticePoint::on_axis(e.dim(), axis, best.1)?,
                mode: KMode::Exact,
            })
        }
        Some(bounds) => {
            same_dim(e.dim(), bounds.dim())?;
            let mut chis: Vec<LatticePoint> = bounds
                .points()
                .filter(|c| e.order.sign_unchecked(c.coords()) > 0)
                .collect();
            if chis.is_empty() {
                return Err(Error::EmptySet("search box misses the positive cone".into()));
            }
            chis.sort_by(|a, b| e.order.compare(a, b).unwrap_or(Ordering::Equal));
            let mut best: Option<(usize, LatticePoint)> = None;
            for chi in chis {
                let n = interval_count(e, &chi)?;
                if best.as_ref().is_none_or(|(b, _)| n > *b) {
                    best = Some((n, chi));
                }
            }
            let (k, witness) = best.expect("nonempty candidates");
            Ok(KConstantReport {
                k,
                witness,
                mode: KMode::SearchBox { bounds: bounds.clone() },
            })
        }
    }
}

/// `K_E` by direct counting at every `χ = 1, …, max E` on the leading axis.
/// Quadratic in the size of `E`; kept as a cross-check for [`k_constant`].
pub fn k_constant_naive(e: &LacunarySpectrum) -> Result<KConstantReport> {
    let (axis, coords) = e
        .leading_axis()
        .ok_or_else(|| Error::InvalidArgument("naive K needs points on the leading lex axis".into()))?;
    let top = coords.iter().copied().max().unwrap_or(1);
    let mut best = (0, 1);
    for c in 1..=top {
        let n = interval_count(e, &LatticePoint::on_axis(e.dim(), axis, c)?)?;
        if n > best.0 {
            best = (n, c);
        }
    }
    Ok(KConstantReport {
        k: best.0,
        witness: LatticePoint::on_axis(e.dim(), axis, best.1)?,
        mode: KMode::Exact,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embed {
    Line,
    /// `(qᵏ, 0)` in ℤ² under the standard lexicographic order.
    LexAxis,
}

/// `{1, q, …, q^{m−1}}`.
pub fn hadamard_set(q: u64, m: u32, embed: Embed) -> Result<LacunarySpectrum> {
    if q < 2 || m == 0 {
        return Err(Error::InvalidArgument("need ratio q ≥ 2 and count m ≥ 1".into()));
    }
    let powers: Vec<i64> = (0..m)
        .map(|k| {
            q.checked_pow(k)
                .filter(|&v| v <= COORD_BOUND as u64)
                .map(|v| v as i64)
                .ok_or(Error::CoordinateOverflow {
                    value: (q as i128).saturating_pow(k),
                    bound: COORD_BOUND,
                })
        })
        .collect::<Result<_>>()?;
    match embed {
        Embed::Line => LacunarySpectrum::from_integers(&powers),
        Embed::LexAxis => LacunarySpectrum::new(
            OrderSpec::lex(2),
            powers.iter().map(|&v| LatticePoint::new(vec![v, 0])).collect::<Result<_>>()?,
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RudinCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub k: usize,
    pub l1: f64,
    pub pass: bool,
}

/// `‖f̂|_E‖₂ ≤ 2√K_E ‖f‖₁`, with `‖f‖₁` by grid quadrature; passes when
/// `lhs ≤ rhs·(1 + rel_slack)`.
pub fn rudin_l2_check(f: &TrigPoly, e: &LacunarySpectrum, grid: &GridSpec, rel_slack: f64) -> Result<RudinCheck> {
    same_dim(e.dim(), f.dim())?;
    if f.terms().any(|(k, _)| e.order.sign_unchecked(k.coords()) < 0) {
        return Err(Error::NotAnalytic);
    }
    let k = k_constant(e, None)?.k;
    let lhs = e.points.iter().map(|p| f.coeff(p).norm_sqr()).sum::<f64>().sqrt();
    let l1 = lp_norm(&sample(f, grid)?, Norm::P(1.0))?;
    let rhs = 2.0 * (k as f64).sqrt() * l1;
    Ok(RudinCheck {
        lhs,
        rhs,
        k,
        l1,
        pass: lhs <= rhs * (1.0 + rel_slack),
    })
}

fn random_on(e: &LacunarySpectrum, seed: u64) -> Result<TrigPoly> {
    random_poly(&e.bounding_box(), &PolyConstraint::Spectrum(e.points.clone()), seed)
}

/// Truncation window large enough for every box the experiments touch.
fn context_for(order: &OrderSpec, boxes: &[&SpectralBox]) -> Result<OperatorContext> {
    let r = boxes
        .iter()
        .flat_map(|b| b.max_abs())
        .max()
        .unwrap_or(0)
        .max(1);
    OperatorContext::new(order.clone(), SpectralBox::symmetric(order.dim(), 2 * r)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem3Params {
    pub trials: usize,
    pub seed: u64,
    pub windows: BracketWindows,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverParams,
    /// Relative slack on `upper ≤ 6√K ‖φ‖₂`.
    pub rel_tol: f64,
    /// Allowed excess of the Hankel lower bound over the minimax value.
    pub sandwich_tol: f64,
    pub norm_tol: f64,
}

/// For random `φ` with spectrum in `E`: `‖φ‖₂`, the star-norm bracket and the
/// chain `‖φ‖_* ≤ 2‖φ‖_BMO ≤ 6√K_E ‖φ‖₂`.
pub fn theorem3_experiment(e: &LacunarySpectrum, p: &Theorem3Params, parallel: bool) -> Result<ExperimentReport> {
    let kr = k_constant(e, None)?;
    let sqrt_k = (kr.k as f64).sqrt();
    let ctx = context_for(
        &e.order,
        &[&e.bounding_box(), &p.windows.hankel_in, &p.windows.hankel_out, &p.windows.perturbation],
    )?;
    let rows = run_trials(p.trials, parallel, |i| {
        let seed = trial_seed(p.seed, i);
        let mut row = Row::new().with("case", i).with("seed", seed);
        let outcome = random_on(e, seed).and_then(|phi| {
            let b = bmo_star_bracket(&phi, &p.windows, &p.grid, &ctx, &p.solver, p.norm_tol)?;
            Ok((phi.l2_norm(), b))
        });
        match outcome {
            Ok((l2, b)) => {
                let bound = 6.0 * sqrt_k * l2;
                let upper_ok = b.upper <= bound * (1.0 + p.rel_tol);
                let lower_ok = b.lower <= bound;
                let sandwich_ok = b.lower <= b.upper + p.sandwich_tol;
                row.set("l2", l2);
                row.set("lower", b.lower);
                row.set("upper", b.upper);
                row.set("bound", bound);
                row.set("iterations", b.minimax.iterations);
                row.set("converged", b.minimax.converged);
                row.set("upper_ok", upper_ok);
                row.set("lower_ok", lower_ok);
                row.set("sandwich_ok", sandwich_ok);
                row.set("pass", upper_ok && lower_ok && sandwich_ok);
            }
            Err(err) => {
                row.set("error", err.to_string());
                row.set("pass", false);
            }
        }
        row
    });
    let mut report = ExperimentReport::new("theorem3", p)?;
    let max_ratio = rows
        .iter()
        .filter_map(|r| Some(r.f64("upper")? / r.f64("l2")?))
        .fold(0.0, f64::max);
    rows.into_iter().for_each(|r| report.push(r));
    report.summary.set("k", kr.k);
    report.summary.set("witness", &kr.witness);
    report.summary.set("max_upper_over_l2", max_ratio);
    report.summary.set("constant", 6.0 * sqrt_k);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem4Params {
    pub trials: usize,
    pub seed: u64,
    pub hankel_in: SpectralBox,
    pub hankel_out: SpectralBox,
    pub tol: f64,
    pub norm_tol: f64,
}

/// For random `φ` with spectrum in `E`: `‖H_{conj φ}‖ ≤ 6√K_E ‖φ‖₂` on finite
/// sections, and the smallest observed ratio `‖H_{conj φ}‖ / ‖φ‖₂`.
pub fn theorem4_experiment(e: &LacunarySpectrum, p: &Theorem4Params, parallel: bool) -> Result<ExperimentReport> {
    let kr = k_constant(e, None)?;
    let sqrt_k = (kr.k as f64).sqrt();
    let ctx = context_for(&e.order, &[&e.bounding_box(), &p.hankel_in, &p.hankel_out])?;
    let rows = run_trials(p.trials, parallel, |i| {
        let seed = trial_seed(p.seed, i);
        let mut row = Row::new().with("case", i).with("seed", seed);
        let outcome = random_on(e, seed).and_then(|phi| {
            let h = assemble_hankel(&phi.conjugate(), &p.hankel_in, &p.hankel_out, &ctx)?;
            Ok((phi.l2_norm(), operator_norm(&h, p.norm_tol, 1_000_000)?, h.rows(), h.cols()))
        });
        match outcome {
            Ok((0.0, _, _, _)) => {
                row.set("skipped", true);
            }
            Ok((l2, h, rows, cols)) => {
                let bound = 6.0 * sqrt_k * l2;
                row.set("l2", l2);
                row.set("hankel", h);
                row.set("section", format!("{rows}x{cols}"));
                row.set("bound", bound);
                row.set("ratio", h / l2);
                row.set("pass", h <= bound + p.tol);
            }
            Err(err) => {
                row.set("error", err.to_string());
                row.set("pass", false);
            }
        }
        row
    });
    let mut report = ExperimentReport::new("theorem4", p)?;
    let a_e = rows.iter().filter_map(|r| r.f64("ratio")).fold(f64::INFINITY, f64::min);
    rows.into_iter().for_each(|r| report.push(r));
    if !(a_e > 0.0 && a_e.is_finite()) {
        report.fail();
    }
    report.summary.set("k", kr.k);
    report.summary.set("witness", &kr.witness);
    report.summary.set("empirical_a_e", if a_e.is_finite() { a_e } else { 0.0 });
    report.summary.set("constant", 6.0 * sqrt_k);
    Ok(report)
}
