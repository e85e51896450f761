//! Declarative experiment configs and the dispatcher behind the CLI.

use std::time::Instant;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atoms::{decay_experiment, lemma2_sweep, DecayParams, Lemma2Params};
use crate::error::{Error, Result};
use crate::grid::{kernel_hilbert_t2, lp_norm, sample, GridSpec, Norm};
use crate::hankel::intertwining_residual_for_symbol;
use crate::lacunary::{
    hadamard_set, k_constant, k_constant_naive, theorem3_experiment, theorem4_experiment, Embed, LacunarySpectrum,
    Theorem3Params, Theorem4Params,
};
use crate::lattice::{LatticePoint, OrderSpec};
use crate::multiplier::{hilbert, hilbert_identity_residual, project, OperatorContext, Side};
use crate::nehari::{bmo_star_bracket, BracketWindows, SolverParams};
use crate::report::{run_trials, trial_seed, ExperimentReport, Row};
use crate::trigpoly::{random_poly, PolyConstraint, SpectralBox, TrigPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Identities,
    Riesz,
    Prop3Crosscheck,
    LacunaryK,
    Theorem3,
    Theorem4,
    Nehari,
    AtomsLemma2,
    AtomsDecay,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Identities => "identities",
            Self::Riesz => "riesz",
            Self::Prop3Crosscheck => "prop3-crosscheck",
            Self::LacunaryK => "lacunary-k",
            Self::Theorem3 => "theorem3",
            Self::Theorem4 => "theorem4",
            Self::Nehari => "nehari",
            Self::AtomsLemma2 => "atoms-lemma2",
            Self::AtomsDecay => "atoms-decay",
        }
    }
}

/// Everything a run depends on; echoed verbatim into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub order: OrderSpec,
    pub seed: u64,
    /// Samples per axis of the quadrature grid.
    pub grid: usize,
    pub trials: usize,
    /// Kind-specific boxes, corpus and tolerances; omitted keys take defaults.
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub parallel: bool,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Built-in configuration used when the CLI gets no `--config`.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let (order, grid, trials) = match kind {
            ExperimentKind::Identities | ExperimentKind::Riesz => (OrderSpec::lex(1), 64, 100),
            ExperimentKind::Prop3Crosscheck => (OrderSpec::lex(2), 256, 25),
            ExperimentKind::LacunaryK => (OrderSpec::lex(1), 64, 50),
            ExperimentKind::Theorem3 => (OrderSpec::lex(1), 512, 20),
            ExperimentKind::Theorem4 => (OrderSpec::lex(1), 64, 20),
            ExperimentKind::Nehari => (OrderSpec::lex(1), 1024, 20),
            ExperimentKind::AtomsLemma2 => (OrderSpec::lex(2), 1024, 1),
            ExperimentKind::AtomsDecay => (OrderSpec::lex(2), 1024, 1),
        };
        Self {
            kind,
            order,
            seed: 1,
            grid,
            trials,
            params: empty_object(),
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GridSpec::cube(self.order.dim(), self.grid).map_err(|e| Error::Config(e.to_string()))?;
        let needs_t2 = matches!(
            self.kind,
            ExperimentKind::Prop3Crosscheck | ExperimentKind::AtomsLemma2 | ExperimentKind::AtomsDecay
        );
        if needs_t2 && !(self.order.dim() == 2 && self.order.is_standard_lex()) {
            return Err(Error::Config(format!(
                "{} needs the standard lexicographic order on Z^2",
                self.kind.name()
            )));
        }
        // Parse the kind-specific block eagerly so schema errors surface before running.
        match self.kind {
            ExperimentKind::Identities => self.params::<IdentityParams>().map(drop),
            ExperimentKind::Riesz => self.params::<RieszParams>().map(drop),
            ExperimentKind::Prop3Crosscheck => self.params::<Prop3Params>().map(drop),
            ExperimentKind::LacunaryK => self.params::<LacunaryKParams>().map(drop),
            ExperimentKind::Theorem3 => self.params::<Theorem3Config>().map(drop),
            ExperimentKind::Theorem4 => self.params::<Theorem4Config>().map(drop),
            ExperimentKind::Nehari => self.params::<NehariParams>().map(drop),
            ExperimentKind::AtomsLemma2 => self.params::<Lemma2Config>().map(drop),
            ExperimentKind::AtomsDecay => self.params::<DecayConfig>().map(drop),
        }
    }

    fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| Error::Config(format!("params for {}: {e}", self.kind.name())))
    }

    fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::cube(self.order.dim(), self.grid)
    }
}

/// Runs the configured experiment. Per-case failures become report rows;
/// only configuration problems are returned as errors.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_timed(cfg, false)
}

pub fn run_timed(cfg: &ExperimentConfig, timing: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = match cfg.kind {
        ExperimentKind::Identities => identities(cfg)?,
        ExperimentKind::Riesz => riesz(cfg)?,
        ExperimentKind::Prop3Crosscheck => prop3(cfg)?,
        ExperimentKind::LacunaryK => lacunary_k(cfg)?,
        ExperimentKind::Theorem3 => {
            let p: Theorem3Config = cfg.params()?;
            let e = p.set.build(&cfg.order)?;
            let windows = p.windows.unwrap_or(default_windows(&e, cfg.grid)?);
            let params = Theorem3Params {
                trials: cfg.trials,
                seed: cfg.seed,
                windows,
                grid: cfg.grid_spec()?,
                solver: p.solver,
                rel_tol: p.rel_tol,
                sandwich_tol: p.sandwich_tol,
                norm_tol: p.norm_tol,
            };
            theorem3_experiment(&e, &params, cfg.parallel)?
        }
        ExperimentKind::Theorem4 => {
            let p: Theorem4Config = cfg.params()?;
            let e = p.set.build(&cfg.order)?;
            let dim = cfg.order.dim();
            let params = Theorem4Params {
                trials: cfg.trials,
                seed: cfg.seed,
                hankel_in: p.hankel_in.map_or_else(|| cone_box(dim, 0, p.section - 1), Ok)?,
                hankel_out: p.hankel_out.map_or_else(|| cone_box(dim, -p.section, -1), Ok)?,
                tol: p.tol,
                norm_tol: p.norm_tol,
            };
            theorem4_experiment(&e, &params, cfg.parallel)?
        }
        ExperimentKind::Nehari => nehari(cfg)?,
        ExperimentKind::AtomsLemma2 => {
            let p: Lemma2Config = cfg.params()?;
            let params = Lemma2Params {
                deltas: p.deltas,
                profiles: p.profiles,
                pieces: p.pieces,
                trials: cfg.trials,
                grids: p.grids.unwrap_or(vec![cfg.grid]),
                seed: cfg.seed,
                tol: p.tol,
                growth_factor: p.growth_factor,
            };
            lemma2_sweep(&params, cfg.parallel)?
        }
        ExperimentKind::AtomsDecay => {
            let p: DecayConfig = cfg.params()?;
            let params = DecayParams {
                deltas: p.deltas,
                profile: p.profile,
                pieces: p.pieces,
                grids: p.grids.unwrap_or(vec![cfg.grid / 2, cfg.grid]),
                seed: cfg.seed,
                stability_factor: p.stability_factor,
            };
            decay_experiment(&params, cfg.parallel)?
        }
    };
    report.kind = cfg.kind.name().to_string();
    report.config = serde_json::to_value(cfg)?;
    if timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// A 1-D interval or, on ℤ², the box `[lo, hi] × [lo, hi]`.
fn cone_box(dim: usize, lo: i64, hi: i64) -> Result<SpectralBox> {
    SpectralBox::new(vec![(lo, hi); dim])
}

fn default_windows(e: &LacunarySpectrum, grid: usize) -> Result<BracketWindows> {
    let dim = e.dim();
    let top = e.bounding_box().max_abs().into_iter().max().unwrap_or(1);
    let pert = (2 * top).min(grid as i64 / 2 - 1 - top).max(1);
    Ok(BracketWindows {
        hankel_in: cone_box(dim, 0, top.max(1))?,
        hankel_out: cone_box(dim, -top.max(1), -1)?,
        perturbation: cone_box(dim, -pert, -1)?,
    })
}

fn context(order: &OrderSpec, radius: i64) -> Result<OperatorContext> {
    OperatorContext::new(order.clone(), SpectralBox::symmetric(order.dim(), radius)?)
}

fn finish(mut report: ExperimentReport, rows: Vec<Row>) -> ExperimentReport {
    rows.into_iter().for_each(|r| report.push(r));
    report
}

fn error_row(mut row: Row, err: Error) -> Row {
    row.set("error", err.to_string());
    row.set("pass", false);
    row
}

fn max_of(rows: &[Row], key: &str) -> f64 {
    rows.iter().filter_map(|r| r.f64(key)).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityParams {
    /// Spectra live in `[−radius, radius]ⁿ`.
    pub radius: i64,
    pub tol: f64,
    /// Relative slack on `|⟨f, P₊h⟩| ≤ ‖h‖_sup ‖f‖₁`.
    pub duality_slack: f64,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            radius: 8,
            tol: 1e-12,
            duality_slack: 1e-6,
        }
    }
}

fn coefficient_max_diff(a: &TrigPoly, b: &TrigPoly) -> f64 {
    a.max_abs_diff(b)
}

/// Hilbert identity on real polynomials, `P₊ + P₋ = I`, `P₊P₋ = 0`,
/// idempotence, and the duality inequality for analytic `f`.
fn identities(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let p: IdentityParams = cfg.params()?;
    let dim = cfg.order.dim();
    let window = SpectralBox::symmetric(dim, p.radius)?;
    let ctx = context(&cfg.order, p.radius)?;
    let grid = cfg.grid_spec()?;
    if !grid.resolves(&LatticePoint::new(vec![2 * p.radius; dim])?) {
        return Err(Error::Config("grid must resolve twice the spectral radius".into()));
    }
    let rows = run_trials(cfg.trials, cfg.parallel, |i| {
        let seed = trial_seed(cfg.seed, i);
        let row = Row::new().with("case", i).with("seed", seed);
        let outcome = (|| -> Result<Row> {
            let q = random_poly(&window, &PolyConstraint::Real, seed)?;
            let identity = hilbert_identity_residual(&q, &ctx)?;
            // The identity as usually stated, with the constant term counted twice.
            let literal = hilbert(&q, &ctx)?.scale(Complex64::i()).coeff_distance(
                &project(&q, Side::Plus, &ctx)?
                    .scale(2.0.into())
                    .sub(&q)?
                    .sub(&TrigPoly::constant(q.dim(), q.mean().scale(2.0)))?,
            )?;

            let f = random_poly(&window, &PolyConstraint::None, seed ^ 1)?;
            let plus = project(&f, Side::Plus, &ctx)?;
            let minus = project(&f, Side::Minus, &ctx)?;
            let split = coefficient_max_diff(&plus.add(&minus)?, &f);
            let cross = project(&minus, Side::Plus, &ctx)?
                .l2_norm()
                .max(project(&plus, Side::Minus, &ctx)?.l2_norm());
            let idempotent = coefficient_max_diff(&project(&plus, Side::Plus, &ctx)?, &plus)
                .max(coefficient_max_diff(&project(&minus, Side::Minus, &ctx)?, &minus));

            let analytic = project(&random_poly(&window, &PolyConstraint::None, seed ^ 2)?, Side::Plus, &ctx)?;
            let h = random_poly(&window, &PolyConstraint::None, seed ^ 3)?;
            let pairing = analytic.dual_pairing(&project(&h, Side::Plus, &ctx)?)?.norm();
            let bound = lp_norm(&sample(&h, &grid)?, Norm::Sup)? * lp_norm(&sample(&analytic, &grid)?, Norm::P(1.0))?;

            let exact = split == 0.0 && cross == 0.0 && idempotent == 0.0;
            let duality = pairing <= bound * (1.0 + p.duality_slack);
            Ok(row
                .clone()
                .with("identity_residual", identity)
                .with("literal_residual", literal)
                .with("split_residual", split)
                .with("cross_residual", cross)
                .with("idempotence_residual", idempotent)
                .with("pairing", pairing)
                .with("pairing_bound", bound)
                .with("projections_exact", exact)
                .with("duality_ok", duality)
                .with("pass", identity <= p.tol && exact && duality))
        })();
        outcome.unwrap_or_else(|e| error_row(row, e))
    });
    let mut report = ExperimentReport::new("identities", cfg)?;
    report.summary.set("max_identity_residual", max_of(&rows, "identity_residual"));
    report.summary.set("max_literal_residual", max_of(&rows, "literal_residual"));
    report
        .summary
        .set("max_pairing_ratio", rows.iter().filter_map(|r| Some(r.f64("pairing")? / r.f64("pairing_bound")?)).fold(0.0, f64::max));
    Ok(finish(report, rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RieszParams {
    pub radius: i64,
    pub tol: f64,
}

impl Default for RieszParams {
    fn default() -> Self {
        Self { radius: 8, tol: 1e-12 }
    }
}

/// `‖𝓗f‖₂ ≤ ‖f‖₂`, with equality once the mean is removed.
fn riesz(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let p: RieszParams = cfg.params()?;
    let window = SpectralBox::symmetric(cfg.order.dim(), p.radius)?;
    let ctx = context(&cfg.order, p.radius)?;
    let rows = run_trials(cfg.trials, cfg.parallel, |i| {
        let seed = trial_seed(cfg.seed, i);
        let row = Row::new().with("case", i).with("seed", seed);
        let outcome = (|| -> Result<Row> {
            let f = random_poly(&window, &PolyConstraint::None, seed)?;
            let (nf, nh) = (f.l2_norm(), hilbert(&f, &ctx)?.l2_norm());
            let f0 = f.sub(&TrigPoly::constant(f.dim(), f.mean()))?;
            let (n0, nh0) = (f0.l2_norm(), hilbert(&f0, &ctx)?.l2_norm());
            let contraction = nh <= nf + p.tol;
            let equality = (nh0 - n0).abs() <= p.tol;
            Ok(row
                .clone()
                .with("l2", nf)
                .with("hilbert_l2", nh)
                .with("mean_free_l2", n0)
                .with("mean_free_hilbert_l2", nh0)
                .with("pass", contraction && equality))
        })();
        outcome.unwrap_or_else(|e| error_row(row, e))
    });
    let report = ExperimentReport::new("riesz", cfg)?;
    Ok(finish(report, rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prop3Params {
    pub radius: i64,
    pub tol: f64,
}

impl Default for Prop3Params {
    fn default() -> Self {
        Self { radius: 16, tol: 1e-3 }
    }
}

/// Kernel form of the lexicographic Hilbert transform against the multiplier.
fn prop3(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let p: Prop3Params = cfg.params()?;
    let window = SpectralBox::symmetric(2, p.radius)?;
    let ctx = context(&cfg.order, p.radius)?;
    let grid = cfg.grid_spec()?;
    let rows = run_trials(cfg.trials, cfg.parallel, |i| {
        let seed = trial_seed(cfg.seed, i);
        let row = Row::new().with("case", i).with("seed", seed);
        let outcome = (|| -> Result<Row> {
            let f = random_poly(&window, &PolyConstraint::None, seed)?;
            let kernel = kernel_hilbert_t2(&sample(&f, &grid)?)?;
            let multiplier = sample(&hilbert(&f, &ctx)?, kernel.spec())?;
            let err = kernel.relative_l2_error(&multiplier)?;
            Ok(row.clone().with("relative_l2_error", err).with("pass", err <= p.tol))
        })();
        outcome.unwrap_or_else(|e| error_row(row, e))
    });
    let mut report = ExperimentReport::new("prop3-crosscheck", cfg)?;
    report.summary.set("max_relative_l2_error", max_of(&rows, "relative_l2_error"));
    Ok(finish(report, rows))
}

/// Source of a lacunary set: explicit points or a Hadamard sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    /// Points as coordinate lists (dimension of the configured order).
    Explicit(Vec<Vec<i64>>),
    /// `{1, q, …, q^{m−1}}`, on the leading lexicographic axis in ℤ².
    Hadamard { q: u64, m: u32 },
}

impl SetSpec {
    pub fn build(&self, order: &OrderSpec) -> Result<LacunarySpectrum> {
        match self {
            Self::Explicit(points) => LacunarySpectrum::new(
                order.clone(),
                points.iter().map(|c| LatticePoint::new(c.clone())).collect::<Result<_>>()?,
            ),
            Self::Hadamard { q, m } => {
                let embed = match order.dim() {
                    1 => Embed::Line,
                    2 if order.is_standard_lex() => Embed::LexAxis,
                    _ => return Err(Error::Config("hadamard sets need lex order on Z or Z^2".into())),
                };
                hadamard_set(*q, *m, embed)
            }
        }
    }
}

fn default_set() -> SetSpec {
    SetSpec::Hadamard { q: 2, m: 6 }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LacunaryKParams {
    pub set: SetSpec,
    /// Search box for sets off the leading axis (lower bound mode).
    pub search_box: Option<SpectralBox>,
    /// Expected constant, if known.
    pub expect_k: Option<usize>,
    /// Random subsets of `[1, subset_range]` compared against the naive count (`trials` of them).
    pub subset_range: i64,
    pub subset_max_len: usize,
}

impl Default for LacunaryKParams {
    fn default() -> Self {
        Self {
            set: SetSpec::Hadamard { q: 2, m: 11 },
            search_box: None,
            expect_k: Some(2),
            subset_range: 4096,
            subset_max_len: 64,
        }
    }
}

/// `K_E` for the configured set, then exact-vs-naive agreement on random subsets.
fn lacunary_k(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    use rand::{Rng, SeedableRng};
    let p: LacunaryKParams = cfg.params()?;
    let e = p.set.build(&cfg.order)?;
    let main = k_constant(&e, p.search_box.as_ref())?;
    let mut report = ExperimentReport::new("lacunary-k", cfg)?;
    let mut row = Row::new()
        .with("case", "configured")
        .with("size", e.points().len())
        .with("k", main.k)
        .with("witness", main.witness.to_string())
        .with("mode", &main.mode);
    let mut ok = p.expect_k.is_none_or(|k| k == main.k);
    if p.search_box.is_none() {
        let naive = k_constant_naive(&e)?;
        row.set("naive_k", naive.k);
        row.set("naive_witness", naive.witness.to_string());
        ok &= naive.k == main.k && naive.witness == main.witness;
    }
    row.set("pass", ok);
    report.summary.set("k", main.k);
    report.summary.set("witness", main.witness.to_string());
    report.push(row);

    if p.subset_range < 1 || p.subset_max_len == 0 {
        return Err(Error::Config("subset_range and subset_max_len must be positive".into()));
    }
    let rows = run_trials(cfg.trials, cfg.parallel, |i| {
        let seed = trial_seed(cfg.seed, i);
        let row = Row::new().with("case", i).with("seed", seed);
        let outcome = (|| -> Result<Row> {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = rng.random_range(1..=p.subset_max_len);
            let mut v: Vec<i64> = (0..len).map(|_| rng.random_range(1..=p.subset_range)).collect();
            v.sort_unstable();
            v.dedup();
            let e = LacunarySpectrum::from_integers(&v)?;
            let exact = k_constant(&e, None)?;
            let naive = k_constant_naive(&e)?;
            Ok(row
                .clone()
                .with("size", v.len())
                .with("k", exact.k)
                .with("witness", exact.witness.to_string())
                .with("naive_k", naive.k)
                .with("naive_witness", naive.witness.to_string())
                .with("pass", exact == naive))
        })();
        outcome.unwrap_or_else(|e| error_row(row, e))
    });
    Ok(finish(report, rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Theorem3Config {
    pub set: SetSpec,
    pub windows: Option<BracketWindows>,
    pub solver: SolverParams,
    pub rel_tol: f64,
    pub sandwich_tol: f64,
    pub norm_tol: f64,
}

impl Default for Theorem3Config {
    fn default() -> Self {
        Self {
            set: default_set(),
            windows: None,
            solver: SolverParams::default(),
            rel_tol: 1e-2,
            sandwich_tol: 1e-3,
            norm_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Theorem4Config {
    pub set: SetSpec,
    /// Side of the default square sections `[0, s−1]` × `[−s, −1]`.
    pub section: i64,
    pub hankel_in: Option<SpectralBox>,
    pub hankel_out: Option<SpectralBox>,
    pub tol: f64,
    pub norm_tol: f64,
}

impl Default for Theorem4Config {
    fn default() -> Self {
        Self {
            set: default_set(),
            section: 64,
            hankel_in: None,
            hankel_out: None,
            tol: 1e-9,
            norm_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NehariParams {
    /// Random analytic symbols have spectrum in this box ∩ X₊.
    pub symbol_box: Option<SpectralBox>,
    pub windows: Option<BracketWindows>,
    /// Shift for the intertwining check; defaults to the last unit vector.
    pub shift: Option<LatticePoint>,
    pub solver: SolverParams,
    pub sandwich_tol: f64,
    pub unit_tol: f64,
    pub intertwining_tol: f64,
    pub norm_tol: f64,
}

impl Default for NehariParams {
    fn default() -> Self {
        Self {
            symbol_box: None,
            windows: None,
            shift: None,
            solver: SolverParams::default(),
            sandwich_tol: 1e-3,
            unit_tol: 1e-3,
            intertwining_tol: 1e-12,
            norm_tol: 1e-10,
        }
    }
}

/// Star-norm brackets: the unit character first, then random analytic symbols.
fn nehari(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let p: NehariParams = cfg.params()?;
    let dim = cfg.order.dim();
    let symbol_box = match p.symbol_box.clone() {
        Some(b) => b,
        None => SpectralBox::symmetric(dim, 4)?,
    };
    let windows = match p.windows.clone() {
        Some(w) => w,
        None => BracketWindows {
            hankel_in: SpectralBox::symmetric(dim, 8)?,
            hankel_out: SpectralBox::symmetric(dim, 8)?,
            perturbation: SpectralBox::symmetric(dim, 8)?,
        },
    };
    let shift = match p.shift.clone() {
        Some(s) => s,
        None => LatticePoint::on_axis(dim, dim - 1, 1)?,
    };
    let radius = [&symbol_box, &windows.hankel_in, &windows.hankel_out, &windows.perturbation]
        .iter()
        .flat_map(|b| b.max_abs())
        .max()
        .unwrap_or(1);
    let ctx = context(&cfg.order, 2 * radius + shift.coords().iter().map(|c| c.abs()).max().unwrap_or(0))?;
    let grid = cfg.grid_spec()?;
    let unit = TrigPoly::character(LatticePoint::on_axis(dim, 0, 1)?);
    let unit = if cfg.order.sign(&unit.terms().next().expect("one term").0.clone())? > 0 {
        unit
    } else {
        unit.conjugate()
    };

    let rows = run_trials(cfg.trials + 1, cfg.parallel, |i| {
        let seed = trial_seed(cfg.seed, i);
        let row = Row::new().with("case", i).with("seed", seed);
        let outcome = (|| -> Result<Row> {
            let phi = if i == 0 {
                unit.clone()
            } else {
                project(&random_poly(&symbol_box, &PolyConstraint::None, seed)?, Side::Plus, &ctx)?
            };
            let b = bmo_star_bracket(&phi, &windows, &grid, &ctx, &p.solver, p.norm_tol)?;
            let inter = intertwining_residual_for_symbol(&phi.conjugate(), &shift, &windows.hankel_in, &windows.hankel_out, &ctx)?;
            let mut ok = b.lower <= b.upper + p.sandwich_tol && inter <= p.intertwining_tol;
            if i == 0 {
                ok &= (b.lower - 1.0).abs() <= p.unit_tol && (b.upper - 1.0).abs() <= p.unit_tol;
            }
            Ok(row
                .clone()
                .with("symbol", if i == 0 { "unit" } else { "random" })
                .with("l2", phi.l2_norm())
                .with("lower", b.lower)
                .with("upper", b.upper)
                .with("gap", b.upper - b.lower)
                .with("iterations", b.minimax.iterations)
                .with("converged", b.minimax.converged)
                .with("intertwining_residual", inter)
                .with("pass", ok))
        })();
        outcome.unwrap_or_else(|e| error_row(row, e))
    });
    let mut report = ExperimentReport::new("nehari", cfg)?;
    report.summary.set("max_gap", max_of(&rows, "gap"));
    report.summary.set("max_intertwining_residual", max_of(&rows, "intertwining_residual"));
    Ok(finish(report, rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lemma2Config {
    pub deltas: Vec<f64>,
    pub profiles: Vec<String>,
    pub pieces: usize,
    pub grids: Option<Vec<usize>>,
    pub tol: f64,
    pub growth_factor: f64,
}

impl Default for Lemma2Config {
    fn default() -> Self {
        Self {
            deltas: vec![0.25, 0.125, 0.0625, 0.03125],
            profiles: vec!["haar".into(), "piecewise".into()],
            pieces: 4,
            grids: None,
            tol: 1e-12,
            growth_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub deltas: Vec<f64>,
    pub profile: String,
    pub pieces: usize,
    pub grids: Option<Vec<usize>>,
    pub stability_factor: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.125, 0.0625, 0.03125],
            profile: "haar".into(),
            pieces: 4,
            grids: None,
            stability_factor: 2.0,
        }
    }
}

/// Parses `lex`, `lex:1,0` or `quad:p/q` for an order on ℤ^dim.
pub fn parse_order(s: &str, dim: usize) -> Result<OrderSpec> {
    let bad = || Error::Config(format!("cannot parse order {s:?}; expected lex, lex:<perm> or quad:p/q"));
    if s == "lex" {
        return Ok(OrderSpec::lex(dim));
    }
    if let Some(perm) = s.strip_prefix("lex:") {
        let perm = perm
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        return OrderSpec::lex_with_perm(perm);
    }
    if let Some(w) = s.strip_prefix("quad:") {
        let (p, q) = w.split_once('/').ok_or_else(bad)?;
        return OrderSpec::quadratic(p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
    }
    Err(bad())
}
