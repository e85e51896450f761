//! Trigonometric polynomials on Tⁿ stored as sparse Fourier coefficient maps.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{same_dim, LatticePoint};

/// Closed integer interval per axis; a finite window in the dual lattice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, i64)>", into = "Vec<(i64, i64)>")]
pub struct SpectralBox {
    ranges: Vec<(i64, i64)>,
}

impl SpectralBox {
    pub fn new(ranges: Vec<(i64, i64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidBox("a box needs at least one axis".into()));
        }
        for (axis, &(lo, hi)) in ranges.iter().enumerate() {
            if lo > hi {
                return Err(Error::InvalidBox(format!("axis {axis}: {lo} > {hi}")));
            }
            LatticePoint::new(vec![lo])?;
            LatticePoint::new(vec![hi])?;
        }
        Ok(Self { ranges })
    }

    /// The cube `[−r, r]ⁿ`.
    pub fn symmetric(dim: usize, r: i64) -> Result<Self> {
        Self::new(vec![(-r.abs(), r.abs()); dim])
    }

    pub fn interval(lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(i64, i64)] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|&(lo, hi)| (hi - lo + 1) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &LatticePoint) -> bool {
        x.dim() == self.dim()
            && x
                .coords()
                .iter()
                .zip(&self.ranges)
                .all(|(&c, &(lo, hi))| lo <= c && c <= hi)
    }

    pub fn contains_zero(&self) -> bool {
        self.ranges.iter().all(|&(lo, hi)| lo <= 0 && 0 <= hi)
    }

    /// Maximum absolute coordinate per axis.
    pub fn max_abs(&self) -> Vec<i64> {
        self.ranges.iter().map(|&(lo, hi)| lo.abs().max(hi.abs())).collect()
    }

    /// All points of the box, first axis slowest.
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        let total = self.len();
        (0..total).map(move |mut idx| {
            let mut coords = vec![0; self.dim()];
            for (axis, &(lo, hi)) in self.ranges.iter().enumerate().rev() {
                let width = (hi - lo + 1) as usize;
                coords[axis] = lo + (idx % width) as i64;
                idx /= width;
            }
            LatticePoint::new(coords).expect("box corners are within bounds")
        })
    }
}

impl TryFrom<Vec<(i64, i64)>> for SpectralBox {
    type Error = Error;

    fn try_from(v: Vec<(i64, i64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpectralBox> for Vec<(i64, i64)> {
    fn from(b: SpectralBox) -> Self {
        b.ranges
    }
}

/// A finite linear combination of characters of Tⁿ.
///
/// Only nonzero coefficients are stored; construction removes exact zeros
/// and [`TrigPoly::prune`] removes coefficients below a tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    coeffs: BTreeMap<LatticePoint, Complex64>,
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        Self::zero(dim).with_term(LatticePoint::origin(dim), c)
    }

    /// The character `χ_k`.
    pub fn character(k: LatticePoint) -> Self {
        Self::zero(k.dim()).with_term(k, Complex64::new(1.0, 0.0))
    }

    /// Builds a polynomial, summing repeated frequencies.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (LatticePoint, Complex64)>) -> Result<Self> {
        let mut p = Self::zero(dim);
        for (k, c) in terms {
            same_dim(dim, k.dim())?;
            *p.coeffs.entry(k).or_default() += c;
        }
        p.coeffs.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        Ok(p)
    }

    /// `cos⟨k, t⟩ = (χ_k + χ_{−k}) / 2`.
    pub fn cosine(k: LatticePoint) -> Self {
        let neg = k.neg();
        Self::from_terms(k.dim(), [(k, 0.5.into()), (neg, 0.5.into())]).expect("same dimension")
    }

    /// `sin⟨k, t⟩ = (χ_k − χ_{−k}) / 2i`.
    pub fn sine(k: LatticePoint) -> Self {
        let neg = k.neg();
        Self::from_terms(k.dim(), [(k, Complex64::new(0.0, -0.5)), (neg, Complex64::new(0.0, 0.5))])
            .expect("same dimension")
    }

    fn with_term(mut self, k: LatticePoint, c: Complex64) -> Self {
        if c != Complex64::new(0.0, 0.0) {
            self.coeffs.insert(k, c);
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn coeff(&self, k: &LatticePoint) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LatticePoint, &Complex64)> {
        self.coeffs.iter()
    }

    /// Smallest box containing the spectrum; `None` for the zero polynomial.
    pub fn support_box(&self) -> Option<SpectralBox> {
        let mut ranges: Option<Vec<(i64, i64)>> = None;
        for k in self.coeffs.keys() {
            let r = ranges.get_or_insert_with(|| k.coords().iter().map(|&c| (c, c)).collect());
            for (range, &c) in r.iter_mut().zip(k.coords()) {
                range.0 = range.0.min(c);
                range.1 = range.1.max(c);
            }
        }
        ranges.map(|r| SpectralBox::new(r).expect("built from valid points"))
    }

    /// Keeps the coefficients whose frequency satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&LatticePoint) -> bool) -> Self {
        Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
        }
    }

    /// Multiplies each coefficient by `m(k)`, dropping results that are exactly zero.
    pub fn map_coeffs(&self, mut m: impl FnMut(&LatticePoint, Complex64) -> Complex64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, &c)| (k.clone(), m(k, c)))
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .collect(),
        }
    }

    /// Drops coefficients with modulus at most `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(_, c)| c.norm() > tol)
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim, other.dim)?;
        Self::from_terms(
            self.dim,
            self.coeffs
                .iter()
                .chain(&other.coeffs)
                .map(|(k, c)| (k.clone(), *c)),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    /// Coefficient convolution; the spectrum of the product lies in the
    /// Minkowski sum of the two spectra.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        same_dim(self.dim, other.dim)?;
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (k1, c1) in &self.coeffs {
            for (k2, c2) in &other.coeffs {
                terms.push((k1.checked_add(k2)?, c1 * c2));
            }
        }
        Self::from_terms(self.dim, terms)
    }

    /// Pointwise complex conjugate: `(f̄)^(k) = conj(f̂(−k))`.
    pub fn conjugate(&self) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|(k, c)| (k.neg(), c.conj())).collect(),
        }
    }

    /// The coefficient of the unit character, i.e. the integral over Tⁿ.
    pub fn mean(&self) -> Complex64 {
        self.coeff(&LatticePoint::origin(self.dim))
    }

    /// Value at the point `t` of Tⁿ given as n angles.
    pub fn evaluate(&self, t: &[f64]) -> Result<Complex64> {
        same_dim(self.dim, t.len())?;
        Ok(self
            .coeffs
            .iter()
            .map(|(k, c)| {
                let phase: f64 = k.coords().iter().zip(t).map(|(&ki, &ti)| ki as f64 * ti).sum();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum())
    }

    /// L² norm on the normalized torus, by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().fold(0.0, |s, c| s + c.norm_sqr()).sqrt()
    }

    /// `∫ f·conj(φ) dm`, computed on the coefficient side.
    pub fn dual_pairing(&self, phi: &Self) -> Result<Complex64> {
        same_dim(self.dim, phi.dim)?;
        Ok(self
            .coeffs
            .iter()
            .filter_map(|(k, c)| phi.coeffs.get(k).map(|d| c * d.conj()))
            .sum())
    }

    /// Conjugate symmetry `f̂(−k) = conj(f̂(k))` up to `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .all(|(k, c)| (self.coeff(&k.neg()) - c.conj()).norm() <= tol)
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .keys()
            .chain(other.coeffs.keys())
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance between coefficient vectors.
    pub fn coeff_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Term {
    k: LatticePoint,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrigPolyRepr {
    dim: usize,
    terms: Vec<Term>,
}

impl Serialize for TrigPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrigPolyRepr {
            dim: self.dim,
            terms: self
                .coeffs
                .iter()
                .map(|(k, c)| Term {
                    k: k.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TrigPolyRepr::deserialize(d)?;
        Self::from_terms(
            repr.dim,
            repr.terms.into_iter().map(|t| (t.k, Complex64::new(t.re, t.im))),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Constraint applied by [`random_poly`].
#[derive(Clone, Debug, PartialEq)]
pub enum PolyConstraint {
    None,
    /// Conjugate-symmetric coefficients (a real-valued polynomial).
    Real,
    /// Spectrum restricted to the given points, which must lie in the box.
    Spectrum(Vec<LatticePoint>),
}

/// A random polynomial with i.i.d. standard complex Gaussian coefficients
/// (real and imaginary parts independent N(0, ½)) on the box.
///
/// Under [`PolyConstraint::Real`] the coefficient at `−k` mirrors the one at
/// `k` and the constant term is real; frequencies whose mirror leaves the box
/// are skipped.
pub fn random_poly(window: &SpectralBox, constraint: &PolyConstraint, seed: u64) -> Result<TrigPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || -> Complex64 {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };
    let dim = window.dim();
    match constraint {
        PolyConstraint::None => TrigPoly::from_terms(dim, window.points().map(|k| (k, gauss()))),
        PolyConstraint::Real => {
            let mut terms = Vec::new();
            for k in window.points() {
                let neg = k.neg();
                if !window.contains(&neg) {
                    continue;
                }
                match k.cmp(&neg) {
                    std::cmp::Ordering::Greater => {
                        let c = gauss();
                        terms.push((neg, c.conj()));
                        terms.push((k, c));
                    }
                    std::cmp::Ordering::Equal => {
                        let c = gauss();
                        terms.push((k, Complex64::new(c.re * std::f64::consts::SQRT_2, 0.0)));
                    }
                    std::cmp::Ordering::Less => {}
                }
            }
            TrigPoly::from_terms(dim, terms)
        }
        PolyConstraint::Spectrum(points) => {
            if points.is_empty() {
                return Err(Error::EmptySet("spectrum constraint".into()));
            }
            for p in points {
                if !window.contains(p) {
                    return Err(Error::InvalidArgument(format!("spectrum point {p} lies outside the box")));
                }
            }
            TrigPoly::from_terms(dim, points.iter().map(|k| (k.clone(), gauss())))
        }
    }
}
