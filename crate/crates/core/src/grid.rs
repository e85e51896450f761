//! Uniform tensor grids on Tⁿ: sampling, discrete Fourier analysis,
//! quadrature norms and principal-value cotangent-kernel transforms.
//!
//! Node `j` on an axis with `N` samples sits at angle `(j + o/2)·2π/N`, where
//! `o ∈ {0, 1}` is the axis offset flag. Values are stored row-major with the
//! first axis slowest. The quadrature weight of every node is `1/ΠNᵢ`, which
//! discretizes the normalized Haar measure.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::{same_dim, LatticePoint};
use crate::trigpoly::{SpectralBox, TrigPoly};

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    sizes: Vec<usize>,
    offsets: Vec<bool>,
}

impl GridSpec {
    /// A grid with the given power-of-two sizes and no offsets.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        let offsets = vec![false; sizes.len()];
        Self::with_offsets(sizes, offsets)
    }

    /// The n-dimensional grid with `size` samples per axis.
    pub fn cube(dim: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; dim])
    }

    pub fn with_offsets(sizes: Vec<usize>, offsets: Vec<bool>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        same_dim(sizes.len(), offsets.len())?;
        for &n in &sizes {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("axis size {n} must be a power of two and at least 4")));
            }
        }
        Ok(Self { sizes, offsets })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[bool] {
        &self.offsets
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Angle of node `j` on `axis`.
    pub fn node(&self, axis: usize, j: usize) -> f64 {
        let n = self.sizes[axis] as f64;
        let shift = if self.offsets[axis] { 0.5 } else { 0.0 };
        (j as f64 + shift) * 2.0 * PI / n
    }

    /// Angles of the node with flat index `idx`.
    pub fn angles(&self, mut idx: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            t[axis] = self.node(axis, idx % self.sizes[axis]);
            idx /= self.sizes[axis];
        }
        t
    }

    /// Whether `k` lies strictly inside the Nyquist box `|kᵢ| < Nᵢ/2`.
    pub fn resolves(&self, k: &LatticePoint) -> bool {
        k.dim() == self.dim()
            && k
                .coords()
                .iter()
                .zip(&self.sizes)
                .all(|(&c, &n)| c.unsigned_abs() < (n / 2) as u64)
    }

    fn check_resolves(&self, k: &[i64]) -> Result<()> {
        for (axis, (&c, &n)) in k.iter().zip(&self.sizes).enumerate() {
            if c.unsigned_abs() >= (n / 2) as u64 {
                return Err(Error::Aliasing {
                    axis,
                    frequency: c,
                    size: n,
                });
            }
        }
        Ok(())
    }

    fn with_toggled_offset(&self, axis: usize) -> Self {
        let mut out = self.clone();
        out.offsets[axis] = !out.offsets[axis];
        out
    }
}

/// Samples of a function on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<Complex64>,
}

/// Exponent selector for [`lp_norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    P(f64),
    Sup,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.total() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                spec.total()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..spec.total()).map(|i| f(&spec.angles(i))).collect();
        Self { spec, values }
    }

    pub fn constant(spec: GridSpec, c: Complex64) -> Self {
        let values = vec![c; spec.total()];
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::InvalidGrid("grid functions live on different grids".into()));
        }
        Ok(Self {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn map(&self, op: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    /// Quadrature integral of the samples.
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// `‖self − other‖₂ / ‖other‖₂` by quadrature (absolute when `other` vanishes).
    pub fn relative_l2_error(&self, reference: &Self) -> Result<f64> {
        let diff = lp_norm(&self.sub(reference)?, Norm::P(2.0))?;
        let scale = lp_norm(reference, Norm::P(2.0))?;
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    const MAGIC: &'static [u8; 4] = b"TGRD";
    const VERSION: u32 = 1;

    /// Little-endian binary layout: magic `TGRD`, u32 version, u32 dim,
    /// u64 size per axis, u8 offset flag per axis, then the row-major values
    /// as (re, im) f64 pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.spec.dim();
        let mut out = Vec::with_capacity(12 + 9 * dim + 16 * self.values.len());
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&Self::VERSION.to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        for &n in &self.spec.sizes {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for &o in &self.spec.offsets {
            out.push(o as u8);
        }
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidGrid(format!("binary grid: {msg}"));
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4)? != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != Self::VERSION {
            return Err(bad("unsupported version"));
        }
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let sizes = (0..dim)
            .map(|_| Ok(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize))
            .collect::<Result<Vec<_>>>()?;
        let offsets = (0..dim)
            .map(|_| match take(1)?[0] {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(bad("offset flag must be 0 or 1")),
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = GridSpec::with_offsets(sizes, offsets)?;
        let values = (0..spec.total())
            .map(|_| {
                let re = f64::from_le_bytes(take(8)?.try_into().unwrap());
                let im = f64::from_le_bytes(take(8)?.try_into().unwrap());
                Ok(Complex64::new(re, im))
            })
            .collect::<Result<Vec<_>>>()?;
        if !cur.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Self::new(spec, values)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place DFT along every axis.
fn fft_nd(values: &mut [Complex64], sizes: &[usize], inverse: bool) {
    for axis in 0..sizes.len() {
        let n = sizes[axis];
        let fft = plan(n, inverse);
        for_each_lane(values, sizes, axis, |lane| fft.process(lane));
    }
}

/// Runs `op` on every 1-D lane along `axis`, gathering strided lanes into a
/// scratch buffer.
fn for_each_lane(values: &mut [Complex64], sizes: &[usize], axis: usize, mut op: impl FnMut(&mut [Complex64])) {
    let n = sizes[axis];
    let stride: usize = sizes[axis + 1..].iter().product();
    if stride == 1 {
        values.chunks_exact_mut(n).for_each(op);
        return;
    }
    let block = n * stride;
    let mut lane = vec![Complex64::default(); n];
    for outer in (0..values.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for (j, slot) in lane.iter_mut().enumerate() {
                *slot = values[base + j * stride];
            }
            op(&mut lane);
            for (j, v) in lane.iter().enumerate() {
                values[base + j * stride] = *v;
            }
        }
    }
}

/// Signed frequency of DFT bin `i`; `None` for the Nyquist bin.
fn bin_frequency(i: usize, n: usize) -> Option<i64> {
    use std::cmp::Ordering::*;
    match i.cmp(&(n / 2)) {
        Less => Some(i as i64),
        Equal => None,
        Greater => Some(i as i64 - n as i64),
    }
}

fn offset_phase(k: i64, n: usize, offset: bool) -> Complex64 {
    if offset {
        Complex64::from_polar(1.0, k as f64 * PI / n as f64)
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Evaluates `f` at every node. The spectrum must sit inside the Nyquist box.
pub fn sample(f: &TrigPoly, spec: &GridSpec) -> Result<GridFunction> {
    same_dim(spec.dim(), f.dim())?;
    let sizes = spec.sizes();
    let mut values = vec![Complex64::default(); spec.total()];
    for (k, c) in f.terms() {
        spec.check_resolves(k.coords())?;
        let mut idx = 0;
        let mut coeff = *c;
        for (axis, &kc) in k.coords().iter().enumerate() {
            let n = sizes[axis];
            idx = idx * n + kc.rem_euclid(n as i64) as usize;
            coeff *= offset_phase(kc, n, spec.offsets[axis]);
        }
        values[idx] += coeff;
    }
    fft_nd(&mut values, sizes, true);
    GridFunction::new(spec.clone(), values)
}

/// Discrete Fourier coefficients on `window`, the exact inverse of [`sample`]
/// for polynomials inside the Nyquist box.
pub fn fourier_coeffs(g: &GridFunction, window: &SpectralBox) -> Result<TrigPoly> {
    let spec = g.spec();
    same_dim(spec.dim(), window.dim())?;
    for (axis, (&(lo, hi), &n)) in window.ranges().iter().zip(spec.sizes()).enumerate() {
        for c in [lo, hi] {
            if c.unsigned_abs() >= (n / 2) as u64 {
                return Err(Error::Aliasing {
                    axis,
                    frequency: c,
                    size: n,
                });
            }
        }
    }
    let mut spectrum = g.values().to_vec();
    fft_nd(&mut spectrum, spec.sizes(), false);
    let total = spec.total() as f64;
    let terms = window.points().map(|k| {
        let mut idx = 0;
        let mut phase = Complex64::new(1.0, 0.0);
        for (axis, &kc) in k.coords().iter().enumerate() {
            let n = spec.sizes()[axis];
            idx = idx * n + kc.rem_euclid(n as i64) as usize;
            phase *= offset_phase(kc, n, spec.offsets()[axis]).conj();
        }
        let c = spectrum[idx] * phase / total;
        (k, c)
    });
    TrigPoly::from_terms(spec.dim(), terms)
}

/// Applies the Fourier multiplier `mult` to the discrete spectrum of `g`
/// (Nyquist bins dropped) and resamples on the grid with `out_offsets`.
pub fn apply_multiplier(
    g: &GridFunction,
    mult: impl Fn(&[i64]) -> Complex64,
    out_offsets: &[bool],
) -> Result<GridFunction> {
    let spec = g.spec();
    let out_spec = GridSpec::with_offsets(spec.sizes().to_vec(), out_offsets.to_vec())?;
    let sizes = spec.sizes();
    let mut data = g.values().to_vec();
    fft_nd(&mut data, sizes, false);
    let total = spec.total() as f64;
    let mut k = vec![0i64; sizes.len()];
    for (idx, slot) in data.iter_mut().enumerate() {
        let mut rest = idx;
        let mut nyquist = false;
        for axis in (0..sizes.len()).rev() {
            match bin_frequency(rest % sizes[axis], sizes[axis]) {
                Some(f) => k[axis] = f,
                None => nyquist = true,
            }
            rest /= sizes[axis];
        }
        if nyquist {
            *slot = Complex64::default();
            continue;
        }
        let mut phase = Complex64::new(1.0, 0.0);
        for (axis, &kc) in k.iter().enumerate() {
            phase *= offset_phase(kc, sizes[axis], out_offsets[axis])
                * offset_phase(kc, sizes[axis], spec.offsets()[axis]).conj();
        }
        *slot *= mult(&k) * phase / total;
    }
    fft_nd(&mut data, sizes, true);
    GridFunction::new(out_spec, data)
}

/// Rectangle-rule `(∫|g|^p dm)^{1/p}`, or the maximum modulus.
pub fn lp_norm(g: &GridFunction, norm: Norm) -> Result<f64> {
    match norm {
        Norm::Sup => Ok(g.values().iter().map(|v| v.norm()).fold(0.0, f64::max)),
        Norm::P(p) if p > 0.0 && p.is_finite() => {
            let n = g.values().len() as f64;
            let s: f64 = if p == 1.0 {
                g.values().iter().map(|v| v.norm()).sum()
            } else if p == 2.0 {
                g.values().iter().map(|v| v.norm_sqr()).sum()
            } else {
                g.values().iter().map(|v| v.norm().powf(p)).sum()
            };
            let m = s / n;
            Ok(if p == 1.0 {
                m
            } else if p == 2.0 {
                m.sqrt()
            } else {
                m.powf(1.0 / p)
            })
        }
        Norm::P(p) => Err(Error::InvalidArgument(format!("norm exponent {p} must be positive and finite"))),
    }
}

/// Precomputed spectrum of a circular convolution kernel.
struct CircularKernel {
    n: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CircularKernel {
    fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let forward = plan(n, false);
        let inverse = plan(n, true);
        let mut spectrum: Vec<Complex64> = weights.into_iter().map(|w| Complex64::new(w, 0.0)).collect();
        forward.process(&mut spectrum);
        let scale = 1.0 / n as f64;
        spectrum.iter_mut().for_each(|s| *s *= scale);
        Self {
            n,
            spectrum,
            forward,
            inverse,
        }
    }

    /// Quadrature kernel on the half-step-shifted output grid:
    /// `out(θ_k + h/2) = (1/N) Σⱼ g(θⱼ) cot((θ_k + h/2 − θⱼ)/2)`. The kernel
    /// is never evaluated at its singularity and stays odd about the output
    /// node.
    fn half_step(n: usize) -> Self {
        let weights = (0..n)
            .map(|m| (PI * (m as f64 + 0.5) / n as f64).tan().recip() / n as f64)
            .collect();
        Self::new(weights)
    }

    /// Alternate-point rule at the input nodes themselves: only nodes an odd
    /// number of steps away contribute, with doubled weight.
    fn alternate_point(n: usize) -> Self {
        let weights = (0..n)
            .map(|m| {
                if m % 2 == 1 {
                    2.0 * (PI * m as f64 / n as f64).tan().recip() / n as f64
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(weights)
    }

    /// `out[k] = Σⱼ lane[j]·w[(k − j) mod N]`.
    fn convolve(&self, lane: &mut [Complex64]) {
        debug_assert_eq!(lane.len(), self.n);
        self.forward.process(lane);
        lane.iter_mut().zip(&self.spectrum).for_each(|(v, s)| *v *= s);
        self.inverse.process(lane);
    }
}

/// Principal-value conjugate function on T¹ by the cotangent kernel, with
/// the output on the grid shifted half a step from the input.
pub fn kernel_hilbert_1d(g: &GridFunction) -> Result<GridFunction> {
    same_dim(1, g.spec().dim())?;
    let n = g.spec().sizes()[0];
    let mut values = g.values().to_vec();
    CircularKernel::half_step(n).convolve(&mut values);
    Ok(place_half_step_output(g.spec(), 0, values))
}

/// Raw half-step output sits at `θ_k + h/2`. On an offset input grid that is
/// node `k + 1` of the unshifted grid, so rotate accordingly.
fn place_half_step_output(spec: &GridSpec, axis: usize, raw: Vec<Complex64>) -> GridFunction {
    let out_spec = spec.with_toggled_offset(axis);
    if !spec.offsets()[axis] {
        return GridFunction {
            spec: out_spec,
            values: raw,
        };
    }
    let sizes = spec.sizes();
    let n = sizes[axis];
    let stride: usize = sizes[axis + 1..].iter().product();
    let block = n * stride;
    let mut values = vec![Complex64::default(); raw.len()];
    for (idx, v) in raw.into_iter().enumerate() {
        let outer = idx / block * block;
        let j = (idx % block) / stride;
        let inner = idx % stride;
        values[outer + ((j + 1) % n) * stride + inner] = v;
    }
    GridFunction {
        spec: out_spec,
        values,
    }
}

/// The two summands of the lexicographic Hilbert transform on T² computed
/// from cotangent kernels: `A₁` is the first-variable transform of every
/// row, `A₂` the θ₁-average of the second-variable transform (a function of
/// t₂ only, broadcast over t₁).
///
/// Both live on the output grid whose first axis is shifted half a step from
/// the input; the second axis keeps the input nodes and uses the
/// alternate-point rule.
pub fn kernel_hilbert_t2_parts(g: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let spec = g.spec();
    same_dim(2, spec.dim())?;
    let (n1, n2) = (spec.sizes()[0], spec.sizes()[1]);

    let mut first = g.values().to_vec();
    let k1 = CircularKernel::half_step(n1);
    for_each_lane(&mut first, spec.sizes(), 0, |lane| k1.convolve(lane));
    let a1 = place_half_step_output(spec, 0, first);

    let mut second = g.values().to_vec();
    let k2 = CircularKernel::alternate_point(n2);
    for_each_lane(&mut second, spec.sizes(), 1, |lane| k2.convolve(lane));
    let mut averaged = vec![Complex64::default(); n2];
    for row in second.chunks_exact(n2) {
        for (acc, v) in averaged.iter_mut().zip(row) {
            *acc += v;
        }
    }
    averaged.iter_mut().for_each(|v| *v /= n1 as f64);
    let a2 = GridFunction {
        spec: a1.spec.clone(),
        values: (0..n1).flat_map(|_| averaged.iter().copied()).collect(),
    };
    Ok((a1, a2))
}

/// `A₁ + A₂` from [`kernel_hilbert_t2_parts`].
pub fn kernel_hilbert_t2(g: &GridFunction) -> Result<GridFunction> {
    let (a1, a2) = kernel_hilbert_t2_parts(g)?;
    a1.add(&a2)
}
