//! Python bindings: orders, trigonometric polynomials, the Riesz/Hilbert
//! operators, Hankel norms, lacunary constants and the experiment runner.

use pyo3::prelude::*;

#[pymodule(name = "torus_hardy")]
mod torus_hardy_py {
    use std::collections::HashMap;

    use num_complex::Complex64;
    use pyo3::exceptions::PyValueError;
    use pyo3::prelude::*;
    use torus_hardy::experiment::{parse_order, run, ExperimentConfig};
    use torus_hardy::grid::{kernel_hilbert_t2, sample, GridSpec};
    use torus_hardy::hankel::{assemble_hankel, operator_norm};
    use torus_hardy::lacunary::{hadamard_set as hadamard, k_constant as k_const, Embed, LacunarySpectrum};
    use torus_hardy::lattice::{LatticePoint, OrderSpec};
    use torus_hardy::multiplier::{self, OperatorContext, Side};
    use torus_hardy::trigpoly::{random_poly, PolyConstraint, SpectralBox, TrigPoly};

    fn err(e: impl std::fmt::Display) -> PyErr {
        PyValueError::new_err(e.to_string())
    }

    fn point(c: Vec<i64>) -> PyResult<LatticePoint> {
        LatticePoint::new(c).map_err(err)
    }

    fn window(ranges: Vec<(i64, i64)>) -> PyResult<SpectralBox> {
        SpectralBox::new(ranges).map_err(err)
    }

    /// A total order on ℤⁿ: `"lex"`, `"lex:<perm>"` or `"quad:p/q"`.
    #[pyclass(name = "Order", frozen)]
    pub struct PyOrder(OrderSpec);

    impl PyOrder {
        fn context(&self, radius: i64) -> PyResult<OperatorContext> {
            let b = SpectralBox::symmetric(self.0.dim(), radius).map_err(err)?;
            OperatorContext::new(self.0.clone(), b).map_err(err)
        }
    }

    #[pymethods]
    impl PyOrder {
        #[new]
        #[pyo3(signature = (spec, dim = 2))]
        fn new(spec: &str, dim: usize) -> PyResult<Self> {
            parse_order(spec, dim).map(Self).map_err(err)
        }

        #[getter]
        fn dim(&self) -> usize {
            self.0.dim()
        }

        fn sign(&self, k: Vec<i64>) -> PyResult<i32> {
            self.0.sign(&point(k)?).map_err(err)
        }

        /// −1, 0 or 1 as `a` is below, equal to or above `b`.
        fn compare(&self, a: Vec<i64>, b: Vec<i64>) -> PyResult<i32> {
            Ok(self.0.compare(&point(a)?, &point(b)?).map_err(err)? as i32)
        }

        fn __repr__(&self) -> String {
            format!("Order({})", serde_json::to_string(&self.0).unwrap_or_default())
        }
    }

    #[pyclass(name = "TrigPoly", frozen)]
    pub struct PyPoly(TrigPoly);

    #[pymethods]
    impl PyPoly {
        /// `terms` maps frequency tuples to complex coefficients.
        #[new]
        fn new(dim: usize, terms: HashMap<Vec<i64>, Complex64>) -> PyResult<Self> {
            let terms = terms.into_iter().map(|(k, c)| Ok((point(k)?, c))).collect::<PyResult<Vec<_>>>()?;
            TrigPoly::from_terms(dim, terms).map(Self).map_err(err)
        }

        /// Gaussian coefficients on the box `[(lo, hi), …]`; `real` mirrors them.
        #[staticmethod]
        #[pyo3(signature = (ranges, seed, real = false))]
        fn random(ranges: Vec<(i64, i64)>, seed: u64, real: bool) -> PyResult<Self> {
            let c = if real { PolyConstraint::Real } else { PolyConstraint::None };
            random_poly(&window(ranges)?, &c, seed).map(Self).map_err(err)
        }

        #[staticmethod]
        fn from_json(text: &str) -> PyResult<Self> {
            serde_json::from_str(text).map(Self).map_err(err)
        }

        fn to_json(&self) -> PyResult<String> {
            serde_json::to_string(&self.0).map_err(err)
        }

        #[getter]
        fn dim(&self) -> usize {
            self.0.dim()
        }

        fn __len__(&self) -> usize {
            self.0.len()
        }

        fn terms(&self) -> Vec<(Vec<i64>, Complex64)> {
            self.0.terms().map(|(k, c)| (k.coords().to_vec(), *c)).collect()
        }

        fn coeff(&self, k: Vec<i64>) -> PyResult<Complex64> {
            Ok(self.0.coeff(&point(k)?))
        }

        fn evaluate(&self, t: Vec<f64>) -> PyResult<Complex64> {
            self.0.evaluate(&t).map_err(err)
        }

        fn mean(&self) -> Complex64 {
            self.0.mean()
        }

        fn l2_norm(&self) -> f64 {
            self.0.l2_norm()
        }

        fn conjugate(&self) -> Self {
            Self(self.0.conjugate())
        }

        fn scale(&self, s: Complex64) -> Self {
            Self(self.0.scale(s))
        }

        fn __add__(&self, other: &Self) -> PyResult<Self> {
            self.0.add(&other.0).map(Self).map_err(err)
        }

        fn __sub__(&self, other: &Self) -> PyResult<Self> {
            self.0.sub(&other.0).map(Self).map_err(err)
        }

        fn __mul__(&self, other: &Self) -> PyResult<Self> {
            self.0.multiply(&other.0).map(Self).map_err(err)
        }

        /// Values on the cube grid with `size` nodes per axis, first axis slowest.
        fn sample(&self, size: usize) -> PyResult<Vec<Complex64>> {
            let spec = GridSpec::cube(self.0.dim(), size).map_err(err)?;
            Ok(sample(&self.0, &spec).map_err(err)?.into_values())
        }

        fn __repr__(&self) -> String {
            format!("TrigPoly(dim={}, terms={})", self.0.dim(), self.0.len())
        }
    }

    /// Riesz projection; `side` is `"plus"` (closed cone) or `"minus"`.
    #[pyfunction]
    fn project(f: &PyPoly, side: &str, order: &PyOrder, radius: i64) -> PyResult<PyPoly> {
        let side = match side {
            "plus" => Side::Plus,
            "minus" => Side::Minus,
            other => return Err(err(format!("unknown side {other:?}"))),
        };
        multiplier::project(&f.0, side, &order.context(radius)?).map(PyPoly).map_err(err)
    }

    #[pyfunction]
    fn hilbert(f: &PyPoly, order: &PyOrder, radius: i64) -> PyResult<PyPoly> {
        multiplier::hilbert(&f.0, &order.context(radius)?).map(PyPoly).map_err(err)
    }

    #[pyfunction]
    fn is_analytic(f: &PyPoly, order: &PyOrder, radius: i64) -> PyResult<bool> {
        Ok(multiplier::is_analytic(&f.0, &order.context(radius)?))
    }

    /// Coefficient-norm residual of `i𝓗q = 2P₊q − q − q̂(0)`.
    #[pyfunction]
    fn hilbert_identity_residual(q: &PyPoly, order: &PyOrder, radius: i64) -> PyResult<f64> {
        multiplier::hilbert_identity_residual(&q.0, &order.context(radius)?).map_err(err)
    }

    /// Relative L² gap between the kernel and multiplier Hilbert transforms
    /// of `f` on T² (standard lexicographic order) at `size` nodes per axis.
    #[pyfunction]
    fn kernel_hilbert_error(f: &PyPoly, size: usize) -> PyResult<f64> {
        let radius = f.0.support_box().map_or(1, |b| b.max_abs().into_iter().max().unwrap_or(1));
        let ctx = PyOrder(OrderSpec::lex(2)).context(radius)?;
        let spec = GridSpec::cube(2, size).map_err(err)?;
        let kernel = kernel_hilbert_t2(&sample(&f.0, &spec).map_err(err)?).map_err(err)?;
        let exact = sample(&multiplier::hilbert(&f.0, &ctx).map_err(err)?, kernel.spec()).map_err(err)?;
        kernel.relative_l2_error(&exact).map_err(err)
    }

    /// Certified operator norm of the Hankel section with symbol `phi`.
    #[pyfunction]
    #[pyo3(signature = (phi, hankel_in, hankel_out, order, tol = 1e-10, max_iter = 100_000))]
    fn hankel_norm(
        phi: &PyPoly,
        hankel_in: Vec<(i64, i64)>,
        hankel_out: Vec<(i64, i64)>,
        order: &PyOrder,
        tol: f64,
        max_iter: usize,
    ) -> PyResult<f64> {
        let (win, wout) = (window(hankel_in)?, window(hankel_out)?);
        let radius = [&win, &wout].iter().flat_map(|b| b.max_abs()).max().unwrap_or(1) * 2;
        let h = assemble_hankel(&phi.0, &win, &wout, &order.context(radius)?).map_err(err)?;
        operator_norm(&h, tol, max_iter).map_err(err)
    }

    /// `(K_E, witness)` for a finite set of positive integers.
    #[pyfunction]
    fn k_constant(points: Vec<i64>) -> PyResult<(usize, i64)> {
        let e = LacunarySpectrum::from_integers(&points).map_err(err)?;
        let r = k_const(&e, None).map_err(err)?;
        Ok((r.k, r.witness.coords()[0]))
    }

    #[pyfunction]
    fn hadamard_set(q: u64, m: u32) -> PyResult<Vec<i64>> {
        let e = hadamard(q, m, Embed::Line).map_err(err)?;
        Ok(e.points().iter().map(|p| p.coords()[0]).collect())
    }

    /// Runs a JSON experiment config and returns the JSON report.
    #[pyfunction]
    fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
        let cfg = ExperimentConfig::from_json(config).map_err(err)?;
        let report = py.detach(|| run(&cfg)).map_err(err)?;
        report.to_json().map_err(err)
    }
}
