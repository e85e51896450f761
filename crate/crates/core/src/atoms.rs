//! Atoms on T² (lexicographic order): grid-aligned step functions supported
//! on rectangles `J₁ × J₂` with per-line cancellation, their H¹ star-norms and
//! the cotangent-kernel decay of the first-variable transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{kernel_hilbert_t2_parts, lp_norm, GridFunction, GridSpec, Norm};
use crate::lattice::OrderSpec;
use crate::multiplier::{project_grid, Side};
use crate::report::{run_trials, splitmix64, trial_seed, ExperimentReport, Row};

/// Minimum number of grid cells an arc must cover.
pub const MIN_ARC_CELLS: usize = 4;

/// An arc of the circle: center angle and normalized length in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arc {
    pub center: f64,
    pub length: f64,
}

impl Arc {
    pub fn new(center: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length <= 1.0) || !center.is_finite() {
            return Err(Error::Atom(format!("arc length {length} not in (0, 1]")));
        }
        Ok(Self {
            center: center.rem_euclid(2.0 * PI),
            length,
        })
    }

    /// The symmetric arc `(−πℓ, πℓ)`.
    pub fn centered(length: f64) -> Result<Self> {
        Self::new(0.0, length)
    }

    /// Snaps to a run of whole cells of a grid axis. Haar profiles need an
    /// even number of cells, so `even` rounds the cell count to even.
    pub fn snap(&self, size: usize, offset: bool, even: bool) -> Result<CellArc> {
        let exact = self.length * size as f64;
        let cells = if even {
            2 * (exact / 2.0).round() as usize
        } else {
            exact.round() as usize
        }
        .min(size);
        if cells < MIN_ARC_CELLS {
            return Err(Error::Atom(format!(
                "arc of length {} covers {exact:.2} < {MIN_ARC_CELLS} cells of a {size}-point grid",
                self.length
            )));
        }
        let h = 2.0 * PI / size as f64;
        let shift = if offset { 0.5 } else { 0.0 };
        let start_angle = self.center - 0.5 * cells as f64 * h;
        let start = ((start_angle / h - shift).round() as i64).rem_euclid(size as i64) as usize;
        Ok(CellArc { start, cells, size })
    }
}

/// An arc aligned to grid cells: nodes `start, start+1, …` (cyclically).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellArc {
    pub start: usize,
    pub cells: usize,
    pub size: usize,
}

impl CellArc {
    pub fn length(&self) -> f64 {
        self.cells as f64 / self.size as f64
    }

    /// Position of node `j` inside the arc, if any.
    pub fn position(&self, j: usize) -> Option<usize> {
        let p = (j + self.size - self.start) % self.size;
        (p < self.cells).then_some(p)
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells).map(move |p| (self.start + p) % self.size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Profile {
    /// `+1` on the first half of each arc, `−1` on the second.
    HaarTensor,
    /// Gaussian values on a `pieces × pieces` partition, then double mean removal.
    SeededPiecewise { seed: u64, pieces: usize },
}

impl Profile {
    pub fn label(&self) -> &'static str {
        match self {
            Self::HaarTensor => "haar",
            Self::SeededPiecewise { .. } => "piecewise",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AtomSpec {
    One,
    /// Depends on θ_axis only (`axis` is 1 or 2), supported on `J × T` or `T × J`.
    T1 { axis: u8, arc: Arc, profile: Profile },
    T2 { j1: Arc, j2: Arc, profile: Profile },
}

impl AtomSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::One => "one",
            Self::T1 { axis: 1, .. } => "t1-axis1",
            Self::T1 { .. } => "t1-axis2",
            Self::T2 { .. } => "t2",
        }
    }
}

/// Support of a realized atom after snapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Support {
    One,
    /// `axis` is 0-based here.
    T1 { axis: usize, arc: CellArc },
    T2 { j1: CellArc, j2: CellArc },
}

impl Support {
    /// The bound (i) / (i′).
    pub fn bound(&self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::T1 { arc, .. } => 1.0 / arc.length(),
            Self::T2 { j1, j2 } => (1.0 / j1.length()).min(1.0 / j2.length()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub spec: AtomSpec,
    pub support: Support,
    pub function: GridFunction,
    /// Number of times a seeded profile was redrawn because it vanished.
    pub reseeds: u32,
}

const MAX_RESEEDS: u32 = 16;

fn check_grid(grid: &GridSpec) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: grid.dim(),
        });
    }
    Ok(())
}

fn haar(p: usize, cells: usize) -> f64 {
    if p < cells / 2 {
        1.0
    } else {
        -1.0
    }
}

/// Piece index of arc position `p` when `cells` positions are split into `pieces` runs.
fn piece(p: usize, cells: usize, pieces: usize) -> usize {
    p * pieces / cells
}

/// Subtracts the mean over the arc; returns the largest remaining magnitude.
fn remove_mean(v: &mut [f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Removes row and column means of a matrix (row-major, `rows × cols`).
fn remove_double_mean(m: &mut [f64], rows: usize, cols: usize) -> f64 {
    for r in m.chunks_exact_mut(cols) {
        remove_mean(r);
    }
    for c in 0..cols {
        let mean = (0..rows).map(|r| m[r * cols + c]).sum::<f64>() / rows as f64;
        (0..rows).for_each(|r| m[r * cols + c] -= mean);
    }
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Realizes an atom on a 2-D grid; arcs snap to whole cells.
pub fn build_atom(spec: &AtomSpec, grid: &GridSpec) -> Result<Atom> {
    check_grid(grid)?;
    let (n1, n2) = (grid.sizes()[0], grid.sizes()[1]);
    let offsets = grid.offsets();
    let mut values = vec![0.0f64; n1 * n2];
    let mut reseeds = 0;

    let support = match *spec {
        AtomSpec::One => {
            values.iter_mut().for_each(|v| *v = 1.0);
            Support::One
        }
        AtomSpec::T1 { axis, arc, profile } => {
            let axis = match axis {
                1 | 2 => axis as usize - 1,
                other => return Err(Error::Atom(format!("axis {other} is not 1 or 2"))),
            };
            let size = grid.sizes()[axis];
            let cell = arc.snap(size, offsets[axis], matches!(profile, Profile::HaarTensor))?;
            let mut line: Vec<f64> = match profile {
                Profile::HaarTensor => (0..cell.cells).map(|p| haar(p, cell.cells)).collect(),
                Profile::SeededPiecewise { seed, pieces } => {
                    let mut s = seed;
                    loop {
                        let mut v = piecewise_line(s, pieces, cell.cells)?;
                        if remove_mean(&mut v) > 1e-9 {
                            break v;
                        }
                        reseeds += 1;
                        if reseeds > MAX_RESEEDS || pieces < 2 {
                            return Err(Error::Atom("seeded profile vanishes after mean removal".into()));
                        }
                        s = splitmix64(s);
                    }
                }
            };
            let peak = line.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = 1.0 / cell.length() / peak;
            line.iter_mut().for_each(|x| *x *= scale);
            for i in 0..n1 {
                for j in 0..n2 {
                    let node = if axis == 0 { i } else { j };
                    if let Some(p) = cell.position(node) {
                        values[i * n2 + j] = line[p];
                    }
                }
            }
            Support::T1 { axis, arc: cell }
        }
        AtomSpec::T2 { j1, j2, profile } => {
            let even = matches!(profile, Profile::HaarTensor);
            let c1 = j1.snap(n1, offsets[0], even)?;
            let c2 = j2.snap(n2, offsets[1], even)?;
            let block: Vec<f64> = match profile {
                Profile::HaarTensor => (0..c1.cells)
                    .flat_map(|p| (0..c2.cells).map(move |q| haar(p, c1.cells) * haar(q, c2.cells)))
                    .collect(),
                Profile::SeededPiecewise { seed, pieces } => {
                    let mut s = seed;
                    loop {
                        let mut m = piecewise_block(s, pieces, c1.cells, c2.cells)?;
                        if remove_double_mean(&mut m, c1.cells, c2.cells) > 1e-9 {
                            break m;
                        }
                        reseeds += 1;
                        if reseeds > MAX_RESEEDS || pieces < 2 {
                            return Err(Error::Atom("seeded profile vanishes after mean removal".into()));
                        }
                        s = splitmix64(s);
                    }
                }
            };
            let support = Support::T2 { j1: c1, j2: c2 };
            let peak = block.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = support.bound() / peak;
            for (p, i) in c1.nodes().enumerate() {
                for (q, j) in c2.nodes().enumerate() {
                    values[i * n2 + j] = block[p * c2.cells + q] * scale;
                }
            }
            support
        }
    };
    let function = GridFunction::new(grid.clone(), values.into_iter().map(|v| Complex64::new(v, 0.0)).collect())?;
    Ok(Atom {
        spec: *spec,
        support,
        function,
        reseeds,
    })
}

fn check_pieces(pieces: usize, cells: usize) -> Result<()> {
    if pieces == 0 || pieces > cells {
        return Err(Error::Atom(format!("{pieces} pieces on an arc of {cells} cells")));
    }
    Ok(())
}

fn piecewise_line(seed: u64, pieces: usize, cells: usize) -> Result<Vec<f64>> {
    check_pieces(pieces, cells)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f64> = (0..pieces).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok((0..cells).map(|p| levels[piece(p, cells, pieces)]).collect())
}

fn piecewise_block(seed: u64, pieces: usize, rows: usize, cols: usize) -> Result<Vec<f64>> {
    check_pieces(pieces, rows)?;
    check_pieces(pieces, cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<f64> = (0..pieces * pieces).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok((0..rows)
        .flat_map(|p| {
            let a = piece(p, rows, pieces);
            let levels = &levels;
            (0..cols).map(move |q| levels[a * pieces + piece(q, cols, pieces)])
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomValidation {
    pub real: bool,
    pub support: bool,
    pub bound: bool,
    pub cancellation: bool,
    /// Largest `|a| / bound − 1` (positive means a violation).
    pub bound_excess: f64,
    /// Largest absolute line integral (normalized measure) over the arcs.
    pub max_line_integral: f64,
    pub pass: bool,
}

/// Checks support, the pointwise bound and per-line cancellation by grid
/// quadrature; `tol` is relative to the bound.
pub fn validate_atom(a: &GridFunction, support: &Support, tol: f64) -> Result<AtomValidation> {
    check_grid(a.spec())?;
    let (n1, n2) = (a.spec().sizes()[0], a.spec().sizes()[1]);
    let bound = support.bound();
    let v = a.values();
    let at = |i: usize, j: usize| v[i * n2 + j].re;
    let real = v.iter().all(|c| c.im.abs() <= tol * bound);
    let bound_excess = v.iter().map(|c| c.norm() / bound - 1.0).fold(f64::NEG_INFINITY, f64::max);

    let (inside, integral): (Box<dyn Fn(usize, usize) -> bool>, f64) = match *support {
        Support::One => {
            let constant = v.iter().all(|c| (c.re - 1.0).abs() <= tol);
            let report = AtomValidation {
                real,
                support: true,
                bound: constant,
                cancellation: true,
                bound_excess,
                max_line_integral: 0.0,
                pass: real && constant,
            };
            return Ok(report);
        }
        Support::T1 { axis, arc } => {
            // Line integral along the atom's own variable; also require independence of the other.
            let lines = if axis == 0 { n2 } else { n1 };
            let mut worst = 0.0f64;
            for l in 0..lines {
                let s: f64 = arc
                    .nodes()
                    .map(|k| if axis == 0 { at(k, l) } else { at(l, k) })
                    .sum::<f64>()
                    / arc.size as f64;
                worst = worst.max(s.abs());
            }
            let same = (0..n1).all(|i| {
                (0..n2).all(|j| {
                    let (ri, rj) = if axis == 0 { (i, 0) } else { (0, j) };
                    (at(i, j) - at(ri, rj)).abs() <= tol * bound
                })
            });
            let inside: Box<dyn Fn(usize, usize) -> bool> =
                Box::new(move |i, j| arc.position(if axis == 0 { i } else { j }).is_some());
            (inside, if same { worst } else { f64::INFINITY })
        }
        Support::T2 { j1, j2 } => {
            let mut worst = 0.0f64;
            for j in 0..n2 {
                let s = j1.nodes().map(|i| at(i, j)).sum::<f64>() / n1 as f64;
                worst = worst.max(s.abs());
            }
            for i in 0..n1 {
                let s = j2.nodes().map(|j| at(i, j)).sum::<f64>() / n2 as f64;
                worst = worst.max(s.abs());
            }
            let inside: Box<dyn Fn(usize, usize) -> bool> =
                Box::new(move |i, j| j1.position(i).is_some() && j2.position(j).is_some());
            (inside, worst)
        }
    };
    let support_ok = (0..n1).all(|i| (0..n2).all(|j| inside(i, j) || v[i * n2 + j].norm() == 0.0));
    let bound_ok = bound_excess <= tol;
    let cancellation = integral <= tol * bound;
    Ok(AtomValidation {
        real,
        support: support_ok,
        bound: bound_ok,
        cancellation,
        bound_excess,
        max_line_integral: integral,
        pass: real && support_ok && bound_ok && cancellation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H1Star {
    pub total: f64,
    pub minus: f64,
    pub plus: f64,
}

/// `‖a‖₁* = ‖P₋a‖₁ + ‖P₊a‖₁` from the discrete spectrum on the Nyquist box.
/// Atoms are not polynomials, so this is a truncation at the grid resolution.
pub fn atom_h1_star_norm(a: &GridFunction, order: &OrderSpec) -> Result<H1Star> {
    check_grid(a.spec())?;
    let minus = lp_norm(&project_grid(a, Side::Minus, order)?, Norm::P(1.0))?;
    let plus = lp_norm(&project_grid(a, Side::Plus, order)?, Norm::P(1.0))?;
    Ok(H1Star {
        total: minus + plus,
        minus,
        plus,
    })
}

/// `𝓗a = A₁ + A₂` with `A₁` the first-variable transform and `A₂` the
/// θ₁-average of the second-variable transform; both on the output grid
/// shifted half a step along θ₁.
pub fn hilbert_decomposition(a: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    kernel_hilbert_t2_parts(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// Normalized half-length: `J₁` covers angles `(−2πδ, 2πδ)`.
    pub delta: f64,
    /// `max |A₁(t₁,t₂)|·t₁² / (δ_θ ‖a(·,t₂)‖₁)` over `|t₁| ≥ 2δ_θ`, `δ_θ = 2πδ`.
    pub c9: f64,
    pub nodes: usize,
}

/// Smallest constant in `|A₁(t₁,t₂)| ≤ C δ ‖a(·,t₂)‖₁ t₁⁻²` away from `J₁`,
/// with angles in radians. `J₁` must be centered at 0.
pub fn kernel_decay_check(atom: &Atom) -> Result<DecayCheck> {
    let j1 = match atom.support {
        Support::T2 { j1, .. } => j1,
        Support::T1 { axis: 0, arc } => arc,
        _ => return Err(Error::Atom("decay check needs an atom in θ₁".into())),
    };
    let grid = atom.function.spec();
    let (n1, n2) = (grid.sizes()[0], grid.sizes()[1]);
    let delta = 0.5 * j1.length();
    if delta >= 0.5 {
        return Err(Error::Atom("decay check needs δ < 1/2".into()));
    }
    let lo = grid.node(0, j1.start);
    let hi = grid.node(0, (j1.start + j1.cells - 1) % n1);
    let center = (wrap(lo) + wrap(hi)) / 2.0;
    let h = 2.0 * PI / n1 as f64;
    if wrap(hi) < wrap(lo) || center.abs() > h {
        return Err(Error::Atom("decay check needs J₁ centered at 0".into()));
    }
    let delta_angle = 2.0 * PI * delta;

    let (a1, _) = hilbert_decomposition(&atom.function)?;
    let out = a1.spec();
    let v = atom.function.values();
    let row_l1: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| v[i * n2 + j].norm()).sum::<f64>() / n1 as f64)
        .collect();
    let floor = 1e-14 * row_l1.iter().fold(0.0f64, |m, &x| m.max(x));

    let mut c9 = 0.0f64;
    let mut nodes = 0;
    let mut far = 0;
    for i in 0..n1 {
        let t1 = wrap(out.node(0, i));
        if t1.abs() < 2.0 * delta_angle {
            continue;
        }
        far += 1;
        for (j, &l1) in row_l1.iter().enumerate() {
            if l1 <= floor || l1 == 0.0 {
                continue;
            }
            let ratio = a1.values()[i * n2 + j].norm() * t1 * t1 / (delta_angle * l1);
            c9 = c9.max(ratio);
            nodes += 1;
        }
    }
    if far == 0 {
        return Err(Error::Atom("no grid nodes with |t₁| ≥ 2δ".into()));
    }
    Ok(DecayCheck { delta, c9, nodes })
}

/// Angle in (−π, π].
fn wrap(t: f64) -> f64 {
    let r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma2Params {
    /// Normalized half-lengths: `|J₁| = 2δ`.
    pub deltas: Vec<f64>,
    /// Profile labels: "haar" and/or "piecewise".
    pub profiles: Vec<String>,
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    pub trials: usize,
    pub grids: Vec<usize>,
    pub seed: u64,
    pub tol: f64,
    /// Allowed ratio of the max star-norm over the finer deltas to the coarsest.
    #[serde(default = "default_growth")]
    pub growth_factor: f64,
}

fn default_pieces() -> usize {
    4
}

fn default_growth() -> f64 {
    2.0
}

struct Case {
    delta: f64,
    spec: AtomSpec,
    profile: String,
    seed: u64,
    n: usize,
}

fn profile_for(label: &str, seed: u64, pieces: usize) -> Result<Profile> {
    match label {
        "haar" => Ok(Profile::HaarTensor),
        "piecewise" => Ok(Profile::SeededPiecewise { seed, pieces }),
        other => Err(Error::Config(format!("unknown atom profile {other:?}"))),
    }
}

/// The corpus for one δ: T¹-atoms in either variable and T²-atoms on a
/// square and on a wide rectangle, `J₁` centered at 0 and `J₂` at a seeded angle.
fn corpus(p: &Lemma2Params) -> Result<Vec<Case>> {
    let mut cases = Vec::new();
    for &n in &p.grids {
        cases.push(Case {
            delta: 0.5,
            spec: AtomSpec::One,
            profile: "one".into(),
            seed: 0,
            n,
        });
    }
    for (di, &delta) in p.deltas.iter().enumerate() {
        for label in &p.profiles {
            for trial in 0..p.trials {
                let seed = trial_seed(p.seed, (di * 64 + trial) * 8);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c2 = Uniform::new(0.0, 2.0 * PI).map_err(|e| Error::Atom(e.to_string()))?.sample(&mut rng);
                let profile = profile_for(label, seed, p.pieces)?;
                let j1 = Arc::centered(2.0 * delta)?;
                let specs = [
                    AtomSpec::T1 { axis: 1, arc: j1, profile },
                    AtomSpec::T1 {
                        axis: 2,
                        arc: Arc::new(c2, 2.0 * delta)?,
                        profile,
                    },
                    AtomSpec::T2 {
                        j1,
                        j2: Arc::new(c2, 2.0 * delta)?,
                        profile,
                    },
                    AtomSpec::T2 {
                        j1,
                        j2: Arc::new(c2, 0.5)?,
                        profile,
                    },
                ];
                for spec in specs {
                    for &n in &p.grids {
                        cases.push(Case {
                            delta,
                            spec,
                            profile: label.clone(),
                            seed,
                            n,
                        });
                    }
                }
            }
        }
    }
    Ok(cases)
}

fn arc_lengths(support: &Support) -> (f64, f64) {
    match *support {
        Support::One => (1.0, 1.0),
        Support::T1 { axis: 0, arc } => (arc.length(), 1.0),
        Support::T1 { arc, .. } => (1.0, arc.length()),
        Support::T2 { j1, j2 } => (j1.length(), j2.length()),
    }
}

/// Star-norms and transform pieces over an atom corpus swept in δ.
///
/// Asserts `‖a‖₁ ≤ 1 + tol` and validity for every atom, and that for every
/// grid the largest `‖a‖₁*` over the finer deltas stays within
/// `growth_factor` of the largest over the coarsest.
pub fn lemma2_sweep(p: &Lemma2Params, parallel: bool) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("atoms-lemma2", p)?;
    if p.deltas.is_empty() {
        return Ok(report);
    }
    let order = OrderSpec::lex(2);
    let cases = corpus(p)?;
    let rows = run_trials(cases.len(), parallel, |i| {
        let c = &cases[i];
        let mut row = Row::new().with("kind", c.spec.label());
        let outcome = (|| -> Result<_> {
            let grid = GridSpec::cube(2, c.n)?;
            let atom = build_atom(&c.spec, &grid)?;
            let valid = validate_atom(&atom.function, &atom.support, p.tol)?;
            let l1 = lp_norm(&atom.function, Norm::P(1.0))?;
            let (a1, a2) = hilbert_decomposition(&atom.function)?;
            let star = atom_h1_star_norm(&atom.function, &order)?;
            Ok((
                arc_lengths(&atom.support),
                valid,
                l1,
                lp_norm(&a1, Norm::P(1.0))?,
                lp_norm(&a2, Norm::P(1.0))?,
                star,
                atom.reseeds,
            ))
        })();
        match outcome {
            Ok(((len1, len2), valid, l1, a1, a2, star, reseeds)) => {
                row.set("delta1", len1 / 2.0);
                row.set("delta2", len2 / 2.0);
                row.set("profile", &c.profile);
                row.set("seed", c.seed);
                row.set("N", c.n);
                row.set("l1", l1);
                row.set("a1_l1", a1);
                row.set("a2_l1", a2);
                row.set("h1_star", star.total);
                row.set("sweep_delta", c.delta);
                row.set("reseeds", reseeds);
                row.set("valid", valid.pass);
                row.set("pass", valid.pass && l1 <= 1.0 + p.tol);
            }
            Err(err) => {
                row.set("profile", &c.profile);
                row.set("seed", c.seed);
                row.set("N", c.n);
                row.set("error", err.to_string());
                row.set("pass", false);
            }
        }
        row
    });

    let mut deltas = p.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut flat = true;
    for &n in &p.grids {
        let max_at = |d: f64| {
            rows.iter()
                .filter(|r| r.f64("N") == Some(n as f64) && r.f64("sweep_delta") == Some(d) && r.get("kind").and_then(|k| k.as_str()) != Some("one"))
                .filter_map(|r| r.f64("h1_star"))
                .fold(0.0, f64::max)
        };
        let coarse = max_at(deltas[0]);
        let fine = deltas[1..].iter().map(|&d| max_at(d)).fold(0.0, f64::max);
        let ratio = if coarse > 0.0 { fine / coarse } else { 0.0 };
        let ok = deltas.len() < 2 || ratio <= p.growth_factor;
        flat &= ok;
        let per_delta: Vec<f64> = deltas.iter().map(|&d| max_at(d)).collect();
        report.summary.set(&format!("max_h1_star_N{n}"), per_delta);
        report.summary.set(&format!("growth_ratio_N{n}"), ratio);
    }
    let max_l1 = rows.iter().filter_map(|r| r.f64("l1")).fold(0.0, f64::max);
    rows.into_iter().for_each(|r| report.push(r));
    report.summary.set("deltas_desc", &deltas);
    report.summary.set("max_l1", max_l1);
    report.summary.set("flat", flat);
    if !flat {
        report.fail();
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub deltas: Vec<f64>,
    pub profile: String,
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    pub grids: Vec<usize>,
    pub seed: u64,
    /// Allowed ratio between C₉ on consecutive grids.
    pub stability_factor: f64,
}

/// C₉ for square T²-atoms `J₁ = J₂ = (−2πδ, 2πδ)` across a grid ladder.
pub fn decay_experiment(p: &DecayParams, parallel: bool) -> Result<ExperimentReport> {
    let cases: Vec<(f64, usize)> = p
        .deltas
        .iter()
        .flat_map(|&d| p.grids.iter().map(move |&n| (d, n)))
        .collect();
    let rows = run_trials(cases.len(), parallel, |i| {
        let (delta, n) = cases[i];
        let seed = trial_seed(p.seed, i);
        let mut row = Row::new().with("delta", delta).with("N", n).with("seed", seed);
        let outcome = (|| -> Result<DecayCheck> {
            let profile = profile_for(&p.profile, seed, p.pieces)?;
            let j = Arc::centered(2.0 * delta)?;
            let atom = build_atom(&AtomSpec::T2 { j1: j, j2: j, profile }, &GridSpec::cube(2, n)?)?;
            kernel_decay_check(&atom)
        })();
        match outcome {
            Ok(d) => {
                row.set("c9", d.c9);
                row.set("nodes", d.nodes);
                row.set("pass", d.c9.is_finite());
            }
            Err(err) => {
                row.set("error", err.to_string());
                row.set("pass", false);
            }
        }
        row
    });
    let mut report = ExperimentReport::new("atoms-decay", p)?;
    let mut worst = 1.0f64;
    for &d in &p.deltas {
        let c: Vec<f64> = rows
            .iter()
            .filter(|r| r.f64("delta") == Some(d))
            .filter_map(|r| r.f64("c9"))
            .collect();
        for w in c.windows(2) {
            let r = if w[0] > 0.0 && w[1] > 0.0 { (w[1] / w[0]).max(w[0] / w[1]) } else { f64::INFINITY };
            worst = worst.max(r);
        }
    }
    rows.into_iter().for_each(|r| report.push(r));
    let stable = worst <= p.stability_factor;
    report.summary.set("worst_refinement_ratio", if worst.is_finite() { worst } else { -1.0 });
    report.summary.set("stable", stable);
    if !stable {
        report.fail();
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;
    use crate::lattice::LatticePoint;
    use crate::trigpoly::TrigPoly;

    fn grid(n: usize) -> GridSpec {
        GridSpec::cube(2, n).unwrap()
    }

    fn haar_t1(axis: u8, length: f64) -> AtomSpec {
        AtomSpec::T1 {
            axis,
            arc: Arc::centered(length).unwrap(),
            profile: Profile::HaarTensor,
        }
    }

    #[test]
    fn t1_haar_example() {
        let g = grid(64);
        let atom = build_atom(&haar_t1(1, 0.5), &g).unwrap();
        let Support::T1 { arc, .. } = atom.support else { panic!() };
        assert_eq!(arc.cells, 32);
        // J = (−π/2, π/2): nodes 48..63 then 0..15.
        assert_eq!(arc.start, 48);
        let v = |i: usize, j: usize| atom.function.values()[i * 64 + j].re;
        for j in [0, 17, 63] {
            assert_eq!(v(48, j), 2.0);
            assert_eq!(v(63, j), 2.0);
            assert_eq!(v(0, j), -2.0);
            assert_eq!(v(15, j), -2.0);
            assert_eq!(v(16, j), 0.0);
            assert_eq!(v(47, j), 0.0);
        }
        assert!((lp_norm(&atom.function, Norm::P(1.0)).unwrap() - 1.0).abs() < 1e-14);
        assert!(validate_atom(&atom.function, &atom.support, 1e-12).unwrap().pass);
    }

    #[test]
    fn one_and_t2_haar() {
        let g = grid(64);
        let one = build_atom(&AtomSpec::One, &g).unwrap();
        assert!(one.function.values().iter().all(|c| *c == Complex64::new(1.0, 0.0)));
        assert!(validate_atom(&one.function, &one.support, 1e-12).unwrap().pass);

        let q = Arc::centered(0.25).unwrap();
        let atom = build_atom(
            &AtomSpec::T2 {
                j1: q,
                j2: Arc::new(2.0, 0.25).unwrap(),
                profile: Profile::HaarTensor,
            },
            &g,
        )
        .unwrap();
        let sup = atom.function.values().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert_eq!(sup, 4.0);
        let check = validate_atom(&atom.function, &atom.support, 1e-12).unwrap();
        assert!(check.pass, "{check:?}");
        assert_eq!(check.max_line_integral, 0.0);
    }

    #[test]
    fn seeded_atoms_validate() {
        for seed in 0..10 {
            for (n, len1, len2) in [(64, 0.25, 0.5), (128, 0.1, 0.3)] {
                let spec = AtomSpec::T2 {
                    j1: Arc::new(1.0, len1).unwrap(),
                    j2: Arc::new(5.9, len2).unwrap(),
                    profile: Profile::SeededPiecewise { seed, pieces: 3 },
                };
                let atom = build_atom(&spec, &grid(n)).unwrap();
                let check = validate_atom(&atom.function, &atom.support, 1e-12).unwrap();
                assert!(check.pass, "{check:?}");
                assert!(lp_norm(&atom.function, Norm::P(1.0)).unwrap() <= 1.0 + 1e-12);
                let t1 = AtomSpec::T1 {
                    axis: 2,
                    arc: Arc::new(3.0, len1).unwrap(),
                    profile: Profile::SeededPiecewise { seed, pieces: 5 },
                };
                let atom = build_atom(&t1, &grid(n)).unwrap();
                assert!(validate_atom(&atom.function, &atom.support, 1e-12).unwrap().pass);
            }
        }
        let degenerate = AtomSpec::T1 {
            axis: 1,
            arc: Arc::centered(0.5).unwrap(),
            profile: Profile::SeededPiecewise { seed: 1, pieces: 1 },
        };
        assert!(matches!(build_atom(&degenerate, &grid(64)), Err(Error::Atom(_))));
    }

    #[test]
    fn validation_catches_violations() {
        let g = grid(32);
        let q = Arc::centered(0.25).unwrap();
        let support = Support::T2 {
            j1: q.snap(32, false, true).unwrap(),
            j2: q.snap(32, false, true).unwrap(),
        };
        let Support::T2 { j1, j2 } = support else { unreachable!() };
        let mut values = vec![Complex64::default(); 32 * 32];
        for i in j1.nodes() {
            for j in j2.nodes() {
                values[i * 32 + j] = Complex64::new(1.0, 0.0);
            }
        }
        let box_fn = GridFunction::new(g.clone(), values).unwrap();
        let check = validate_atom(&box_fn, &support, 1e-12).unwrap();
        assert!(check.bound && !check.cancellation && !check.pass);

        let atom = build_atom(&AtomSpec::T2 { j1: q, j2: q, profile: Profile::HaarTensor }, &g).unwrap();
        let mut f = atom.function.clone();
        let i = j1.start * 32 + j2.start;
        f.values_mut()[i] *= 1.5;
        let check = validate_atom(&f, &atom.support, 1e-12).unwrap();
        assert!(!check.bound && !check.pass);
    }

    #[test]
    fn arcs_too_small() {
        assert!(build_atom(&haar_t1(1, 0.03), &grid(64)).is_err());
        assert!(build_atom(&haar_t1(3, 0.5), &grid(64)).is_err());
        assert!(Arc::new(0.0, 1.5).is_err());
        assert!(Arc::new(0.0, 0.0).is_err());
    }

    #[test]
    fn star_norm_examples() {
        let order = OrderSpec::lex(2);
        let g = grid(64);
        let one = build_atom(&AtomSpec::One, &g).unwrap();
        let s = atom_h1_star_norm(&one.function, &order).unwrap();
        assert!((s.total - 1.0).abs() < 1e-12 && s.minus < 1e-12 && (s.plus - 1.0).abs() < 1e-12);
        let zero = GridFunction::constant(g, Complex64::default());
        let s = atom_h1_star_norm(&zero.clone(), &order).unwrap();
        assert_eq!((s.total, s.minus, s.plus), (0.0, 0.0, 0.0));
    }

    /// `∫ √(a² + (𝓗a)²)` for the T¹ Haar atom on `(−π/2, π/2)`, with the
    /// closed-form conjugate of an arc indicator,
    /// `𝓗1_(α,β)(t) = (1/π) log|sin((t−α)/2) / sin((t−β)/2)|`,
    /// by a midpoint rule offset from the singular points.
    fn haar_t1_star_oracle() -> f64 {
        let conj = |t: f64, a: f64, b: f64| ((((t - a) / 2.0).sin() / ((t - b) / 2.0).sin()).abs()).ln() / PI;
        let m = 1 << 22;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|k| {
                let t = -PI + (k as f64 + 0.5) * h;
                let a = if (-PI / 2.0..0.0).contains(&t) {
                    2.0
                } else if (0.0..PI / 2.0).contains(&t) {
                    -2.0
                } else {
                    0.0
                };
                let ht = 2.0 * conj(t, -PI / 2.0, 0.0) - 2.0 * conj(t, 0.0, PI / 2.0);
                (a * a + ht * ht).sqrt()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn t1_haar_star_norm_converges_to_closed_form() {
        let oracle = haar_t1_star_oracle();
        let order = OrderSpec::lex(2);
        let at = |n: usize| {
            let atom = build_atom(&haar_t1(1, 0.5), &GridSpec::new(vec![n, 4]).unwrap()).unwrap();
            atom_h1_star_norm(&atom.function, &order).unwrap().total
        };
        let (s512, s4096) = (at(512), at(4096));
        assert!((oracle - 1.647198).abs() < 1e-5);
        assert!(s512 <= 10.0);
        assert!((s512 - oracle).abs() < 2e-4);
        assert!((s4096 - oracle).abs() < 2e-5);
    }

    #[test]
    fn decomposition_examples() {
        let g = grid(64);
        let order = OrderSpec::lex(2);
        // Depends on θ₂ only: A₁ = 0.
        let f = GridFunction::from_fn(g.clone(), |t| Complex64::new((3.0 * t[1]).cos() + (t[1]).sin(), 0.0));
        let (a1, _) = hilbert_decomposition(&f).unwrap();
        assert!(lp_norm(&a1, Norm::Sup).unwrap() < 1e-12);

        let f = sample(&TrigPoly::cosine(LatticePoint::new(vec![1, 0]).unwrap()), &g).unwrap();
        let (a1, a2) = hilbert_decomposition(&f).unwrap();
        let want = GridFunction::from_fn(a1.spec().clone(), |t| Complex64::new(t[0].sin(), 0.0));
        assert!(a1.sub(&want).map(|d| lp_norm(&d, Norm::Sup).unwrap()).unwrap() < 1e-12);
        assert!(lp_norm(&a2, Norm::Sup).unwrap() < 1e-12);

        let atom = build_atom(
            &AtomSpec::T2 {
                j1: Arc::centered(0.25).unwrap(),
                j2: Arc::new(1.0, 0.25).unwrap(),
                profile: Profile::SeededPiecewise { seed: 4, pieces: 3 },
            },
            &grid(1024),
        )
        .unwrap();
        let (a1, a2) = hilbert_decomposition(&atom.function).unwrap();
        let sum = a1.add(&a2).unwrap();
        let mult = crate::multiplier::hilbert_grid(&atom.function, &order, sum.spec().offsets()).unwrap();
        let err = sum.relative_l2_error(&mult).unwrap();
        assert!(err <= 1e-2);
    }

    #[test]
    fn decay_constant_stable() {
        let haar = |delta: f64, n: usize| {
            let j = Arc::centered(2.0 * delta).unwrap();
            let atom = build_atom(&AtomSpec::T2 { j1: j, j2: j, profile: Profile::HaarTensor }, &grid(n)).unwrap();
            kernel_decay_check(&atom).unwrap().c9
        };
        let (c512, c1024) = (haar(1.0 / 16.0, 512), haar(1.0 / 16.0, 1024));
        assert!(c512.is_finite() && c512 > 0.0);
        assert!((c1024 / c512 - 1.0).abs() <= 0.2);
        let ratio = haar(0.125, 512) / haar(1.0 / 32.0, 512);
        assert!(ratio > 0.2 && ratio < 5.0, "{ratio}");

        let zero = Atom {
            spec: AtomSpec::One,
            support: Support::T2 {
                j1: Arc::centered(0.125).unwrap().snap(64, false, true).unwrap(),
                j2: Arc::centered(0.125).unwrap().snap(64, false, true).unwrap(),
            },
            function: GridFunction::constant(grid(64), Complex64::default()),
            reseeds: 0,
        };
        assert_eq!(kernel_decay_check(&zero).unwrap().c9, 0.0);
        let wide = build_atom(
            &AtomSpec::T2 {
                j1: Arc::centered(0.9).unwrap(),
                j2: Arc::centered(0.5).unwrap(),
                profile: Profile::HaarTensor,
            },
            &grid(64),
        )
        .unwrap();
        assert!(kernel_decay_check(&wide).is_err());
    }

    #[test]
    fn sweep_small() {
        let p = Lemma2Params {
            deltas: vec![0.25, 0.125],
            profiles: vec!["haar".into(), "piecewise".into()],
            pieces: 4,
            trials: 1,
            grids: vec![128],
            seed: 9,
            tol: 1e-12,
            growth_factor: 2.0,
        };
        let r = lemma2_sweep(&p, true).unwrap();
        assert!(r.pass, "{}", r.to_json().unwrap());
        assert_eq!(r.rows.len(), 1 + 2 * 2 * 4);
        let one = &r.rows[0];
        assert!((one.f64("h1_star").unwrap() - 1.0).abs() < 1e-12);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("kind,delta1,delta2,profile,seed,N,l1,a1_l1,a2_l1,h1_star"));
        assert_eq!(r.to_json().unwrap(), lemma2_sweep(&p, false).unwrap().to_json().unwrap());

        let empty = lemma2_sweep(&Lemma2Params { deltas: vec![], ..p }, false).unwrap();
        assert!(empty.rows.is_empty() && empty.pass);
    }
}
