//! Exact translation-invariant total orders on the character lattice ℤⁿ.
//!
//! Every multiplier operator in the crate (Riesz projections, the Hilbert
//! transform, Hankel sections) depends on the sign of a lattice point with
//! respect to a positive cone. Two families of orders are supported, both
//! decidable in integer arithmetic:
//!
//! * lexicographic orders with an arbitrary axis priority, on any ℤⁿ;
//! * the order on ℤ² induced by the embedding `(n₁, n₂) ↦ n₁ + n₂·√(p/q)`
//!   into ℝ, for `p/q` not the square of a rational.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible absolute coordinate. Differences of two admissible
/// points stay below 2³², so every quadratic comparison fits in `i128`.
pub const COORD_BOUND: i64 = i32::MAX as i64;

/// A character of Tⁿ, indexed by a point of ℤⁿ.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: impl Into<Vec<i64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.is_empty() {
            return Err(Error::InvalidArgument("lattice point needs at least one coordinate".into()));
        }
        for &c in &coords {
            check_bound(c as i128)?;
        }
        Ok(Self(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0; dim.max(1)])
    }

    /// The point with value `v` on `axis` and zero elsewhere.
    pub fn on_axis(dim: usize, axis: usize, v: i64) -> Result<Self> {
        let mut coords = vec![0; dim];
        *coords
            .get_mut(axis)
            .ok_or_else(|| Error::InvalidArgument(format!("axis {axis} out of range for dimension {dim}")))? = v;
        Self::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a as i128 + b as i128)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a as i128 - b as i128)
    }

    pub fn neg(&self) -> Self {
        // The bound is symmetric, so negation never leaves it.
        Self(self.0.iter().map(|&c| -c).collect())
    }

    pub fn checked_scale(&self, k: i64) -> Result<Self> {
        self.0
            .iter()
            .map(|&c| check_bound(c as i128 * k as i128))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(i64, i64) -> i128) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| check_bound(op(a, b)))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl TryFrom<Vec<i64>> for LatticePoint {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LatticePoint> for Vec<i64> {
    fn from(p: LatticePoint) -> Self {
        p.0
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn check_bound(v: i128) -> Result<i64> {
    if v.unsigned_abs() > COORD_BOUND as u128 {
        Err(Error::CoordinateOverflow {
            value: v,
            bound: COORD_BOUND,
        })
    } else {
        Ok(v as i64)
    }
}

pub(crate) fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// A translation-invariant total order on ℤⁿ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawOrderSpec", into = "RawOrderSpec")]
pub enum OrderSpec {
    /// Lexicographic order; `perm[0]` is the most significant axis.
    Lexicographic { perm: Vec<usize> },
    /// Order on ℤ² given by the sign of `n₁ + n₂·√(p/q)`.
    WeightedQuadratic { p: u32, q: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum RawOrderSpec {
    #[serde(rename = "lex")]
    Lex { perm: Vec<usize> },
    #[serde(rename = "quad")]
    Quad { p: u32, q: u32 },
}

impl TryFrom<RawOrderSpec> for OrderSpec {
    type Error = Error;

    fn try_from(raw: RawOrderSpec) -> Result<Self> {
        match raw {
            RawOrderSpec::Lex { perm } => Self::lex_with_perm(perm),
            RawOrderSpec::Quad { p, q } => Self::quadratic(p, q),
        }
    }
}

impl From<OrderSpec> for RawOrderSpec {
    fn from(o: OrderSpec) -> Self {
        match o {
            OrderSpec::Lexicographic { perm } => RawOrderSpec::Lex { perm },
            OrderSpec::WeightedQuadratic { p, q } => RawOrderSpec::Quad { p, q },
        }
    }
}

impl OrderSpec {
    /// Lexicographic order with the natural axis priority (first axis decides).
    pub fn lex(dim: usize) -> Self {
        Self::Lexicographic {
            perm: (0..dim.max(1)).collect(),
        }
    }

    pub fn lex_with_perm(perm: Vec<usize>) -> Result<Self> {
        if perm.is_empty() {
            return Err(Error::InvalidOrder("empty axis permutation".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &a in &perm {
            match seen.get_mut(a) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::InvalidOrder(format!("{perm:?} is not a permutation"))),
            }
        }
        Ok(Self::Lexicographic { perm })
    }

    /// Order on ℤ² with weight √(p/q); rejects rational weights.
    pub fn quadratic(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidOrder("p and q must be positive".into()));
        }
        let g = gcd(p as u64, q as u64);
        let (pr, qr) = (p as u64 / g, q as u64 / g);
        if is_square(pr) && is_square(qr) {
            return Err(Error::InvalidOrder(format!(
                "weight sqrt({p}/{q}) is rational; the induced preorder is not total"
            )));
        }
        Ok(Self::WeightedQuadratic { p, q })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lexicographic { perm } => perm.len(),
            Self::WeightedQuadratic { .. } => 2,
        }
    }

    pub fn is_standard_lex(&self) -> bool {
        matches!(self, Self::Lexicographic { perm } if perm.iter().enumerate().all(|(i, &a)| i == a))
    }

    /// Sign of `x` relative to the positive cone: +1, 0 or −1.
    pub fn sign(&self, x: &LatticePoint) -> Result<i32> {
        same_dim(self.dim(), x.dim())?;
        Ok(self.sign_unchecked(x.coords()))
    }

    /// Sign of raw coordinates; the caller guarantees the dimension and
    /// the coordinate bound.
    pub(crate) fn sign_unchecked(&self, x: &[i64]) -> i32 {
        match self {
            Self::Lexicographic { perm } => perm
                .iter()
                .map(|&a| x[a].signum() as i32)
                .find(|&s| s != 0)
                .unwrap_or(0),
            Self::WeightedQuadratic { p, q } => quadratic_sign(x[0] as i128, x[1] as i128, *p, *q),
        }
    }

    pub fn compare(&self, x: &LatticePoint, y: &LatticePoint) -> Result<Ordering> {
        same_dim(self.dim(), x.dim())?;
        same_dim(self.dim(), y.dim())?;
        // Differences are taken in i128 so that compare works on the full
        // coordinate range, where x − y may exceed COORD_BOUND.
        let diff: Vec<i128> = x
            .coords()
            .iter()
            .zip(y.coords())
            .map(|(&a, &b)| a as i128 - b as i128)
            .collect();
        let s = match self {
            Self::Lexicographic { perm } => perm
                .iter()
                .map(|&a| diff[a].signum() as i32)
                .find(|&s| s != 0)
                .unwrap_or(0),
            Self::WeightedQuadratic { p, q } => quadratic_sign(diff[0], diff[1], *p, *q),
        };
        Ok(s.cmp(&0))
    }
}

/// Sign of `a + b·√(p/q)` without floating point: multiply through by √q
/// and compare `q·a²` with `p·b²` when the two terms have opposite signs.
fn quadratic_sign(a: i128, b: i128, p: u32, q: u32) -> i32 {
    let (sa, sb) = (a.signum() as i32, b.signum() as i32);
    if sb == 0 || sa == sb {
        return if sa != 0 { sa } else { sb };
    }
    if sa == 0 {
        return sb;
    }
    // |a|, |b| < 2³³ and p, q < 2³², so both products stay below 2⁹⁸.
    let lhs = q as i128 * a * a;
    let rhs = p as i128 * b * b;
    match lhs.cmp(&rhs) {
        Ordering::Greater => sa,
        Ordering::Less => sb,
        // Unreachable for irrational weights and nonzero (a, b).
        Ordering::Equal => 0,
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn is_square(n: u64) -> bool {
    let r = n.isqrt();
    r * r == n
}

/// Total order comparison of two points.
pub fn compare(x: &LatticePoint, y: &LatticePoint, ord: &OrderSpec) -> Result<Ordering> {
    ord.compare(x, y)
}

/// +1 on the positive cone minus the origin, 0 at the origin, −1 elsewhere.
pub fn sgn_cone(x: &LatticePoint, ord: &OrderSpec) -> Result<i32> {
    ord.sign(x)
}

/// The three signs in the splitting of the lexicographic sign on ℤ² into a
/// first-axis sign and a sign supported on the line `{0} × ℤ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignDecomposition {
    pub lex: i32,
    pub first_axis: i32,
    pub second_axis: i32,
}

/// Splits `sgn_lex(n₁, n₂)` as `sgn(n₁) + [n₁ = 0]·sgn(n₂)`, checking the
/// identity before returning.
pub fn sign_decomposition(x: &LatticePoint) -> Result<SignDecomposition> {
    same_dim(2, x.dim())?;
    let lex = OrderSpec::lex(2).sign(x)?;
    let [n1, n2] = [x.coords()[0], x.coords()[1]];
    let first_axis = n1.signum() as i32;
    let second_axis = if n1 == 0 { n2.signum() as i32 } else { 0 };
    if lex != first_axis + second_axis {
        return Err(Error::InvalidArgument(format!(
            "sign decomposition failed at {x}: {lex} != {first_axis} + {second_axis}"
        )));
    }
    Ok(SignDecomposition {
        lex,
        first_axis,
        second_axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[i64]) -> LatticePoint {
        LatticePoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn lex_examples() {
        let lex = OrderSpec::lex(2);
        assert_eq!(compare(&pt(&[0, 3]), &pt(&[0, 0]), &lex).unwrap(), Ordering::Greater);
        assert_eq!(
            compare(&pt(&[1, -1_000_000]), &pt(&[0, 1_000_000]), &lex).unwrap(),
            Ordering::Greater
        );
        assert_eq!(sgn_cone(&pt(&[0, 0]), &lex).unwrap(), 0);
        assert_eq!(sgn_cone(&pt(&[0, 3]), &lex).unwrap(), 1);
        assert_eq!(sgn_cone(&pt(&[-1, 100]), &lex).unwrap(), -1);
    }

    #[test]
    fn permuted_lex_uses_priority() {
        let ord = OrderSpec::lex_with_perm(vec![1, 0]).unwrap();
        assert_eq!(ord.sign(&pt(&[5, -1])).unwrap(), -1);
        assert_eq!(ord.sign(&pt(&[-5, 0])).unwrap(), -1);
        assert_eq!(ord.sign(&pt(&[5, 0])).unwrap(), 1);
    }

    #[test]
    fn quadratic_examples() {
        let sqrt2 = OrderSpec::quadratic(2, 1).unwrap();
        assert_eq!(compare(&pt(&[1, -1]), &pt(&[0, 0]), &sqrt2).unwrap(), Ordering::Less);
        assert_eq!(sqrt2.sign(&pt(&[2, -1])).unwrap(), 1);
        assert_eq!(sqrt2.sign(&pt(&[-3, 2])).unwrap(), -1);
        assert_eq!(sqrt2.sign(&pt(&[0, 0])).unwrap(), 0);
    }

    #[test]
    fn quadratic_rejects_rational_weights() {
        assert!(OrderSpec::quadratic(4, 1).is_err());
        assert!(OrderSpec::quadratic(8, 2).is_err());
        assert!(OrderSpec::quadratic(9, 4).is_err());
        assert!(OrderSpec::quadratic(0, 3).is_err());
        assert!(OrderSpec::quadratic(3, 4).is_ok());
    }

    #[test]
    fn invalid_permutations() {
        assert!(OrderSpec::lex_with_perm(vec![0, 0]).is_err());
        assert!(OrderSpec::lex_with_perm(vec![0, 2]).is_err());
        assert!(OrderSpec::lex_with_perm(vec![]).is_err());
    }

    #[test]
    fn dimension_errors() {
        let lex = OrderSpec::lex(2);
        assert!(matches!(
            lex.sign(&pt(&[1, 2, 3])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(sign_decomposition(&pt(&[1])).is_err());
    }

    #[test]
    fn sign_decomposition_examples() {
        let d = |c: &[i64]| {
            let s = sign_decomposition(&pt(c)).unwrap();
            (s.lex, s.first_axis, s.second_axis)
        };
        assert_eq!(d(&[3, -7]), (1, 1, 0));
        assert_eq!(d(&[0, -2]), (-1, 0, -1));
        assert_eq!(d(&[0, 0]), (0, 0, 0));
    }

    #[test]
    fn coordinate_bound_enforced() {
        assert!(LatticePoint::new(vec![COORD_BOUND + 1]).is_err());
        let big = pt(&[COORD_BOUND]);
        assert!(big.checked_add(&pt(&[1])).is_err());
        assert_eq!(big.neg().coords(), &[-COORD_BOUND]);
    }

    #[test]
    fn extreme_quadratic_compare_is_exact() {
        let ord = OrderSpec::quadratic(u32::MAX, u32::MAX - 1).unwrap();
        let a = pt(&[COORD_BOUND, -COORD_BOUND]);
        let b = pt(&[-COORD_BOUND, COORD_BOUND]);
        // n₁ + n₂α with α slightly above 1 and n₁ = −n₂: the weighted term wins.
        assert_eq!(ord.compare(&a, &b).unwrap(), Ordering::Less);
    }

    #[test]
    fn order_json_shape() {
        let lex = OrderSpec::lex_with_perm(vec![1, 0]).unwrap();
        assert_eq!(serde_json::to_string(&lex).unwrap(), r#"{"kind":"lex","perm":[1,0]}"#);
        let quad: OrderSpec = serde_json::from_str(r#"{"kind":"quad","p":2,"q":1}"#).unwrap();
        assert_eq!(quad, OrderSpec::WeightedQuadratic { p: 2, q: 1 });
        assert!(serde_json::from_str::<OrderSpec>(r#"{"kind":"quad","p":4,"q":1}"#).is_err());
        assert!(serde_json::from_str::<OrderSpec>(r#"{"kind":"lex"}"#).is_err());
    }
}
