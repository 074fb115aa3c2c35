use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use weylab::catalog::{catalog_geometry, GeometrySpec};
use weylab::mongeampere::{convexity_certificate, ma_residual, projective_hessian, weyl_from_density, DensityField};
use weylab::section::SectionTolerances;
use weylab::tensor::weight;
use weylab::{BundlePoint, Expr, RunOptions, Scenario};

create_exception!(weylab_py, WeylabError, PyValueError);
create_exception!(weylab_py, NumericalError, WeylabError);

fn to_py(e: weylab::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        WeylabError::new_err(e.to_string())
    }
}

fn rows(v: &[f64], n: usize) -> Vec<Vec<f64>> {
    v.chunks(n).map(<[f64]>::to_vec).collect()
}

/// A catalog geometry: chart, connection and optional metric.
#[pyclass(frozen, skip_from_py_object, module = "weylab_py")]
#[derive(Clone)]
struct Geometry {
    inner: weylab::Geometry,
}

#[pymethods]
impl Geometry {
    /// Build from the JSON form of a geometry spec, e.g. `{"kind": "flat", "n": 2}`.
    #[staticmethod]
    fn from_json(spec: &str) -> PyResult<Self> {
        let spec: GeometrySpec = serde_json::from_str(spec).map_err(|e| WeylabError::new_err(e.to_string()))?;
        Ok(Geometry { inner: catalog_geometry(&spec).map_err(to_py)? })
    }

    #[staticmethod]
    fn flat(n: usize) -> PyResult<Self> {
        Self::build(GeometrySpec::Flat { n })
    }

    #[staticmethod]
    fn klein_ball(n: usize) -> PyResult<Self> {
        Self::build(GeometrySpec::KleinBall { n })
    }

    #[staticmethod]
    fn random_poly(n: usize, degree: usize, seed: u64) -> PyResult<Self> {
        Self::build(GeometrySpec::RandomPoly { n, degree, seed })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.chart.dim()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.spec.name()
    }

    /// `Γ^k_ij` flattened in `[k][i][j]` order.
    fn christoffel(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.connection.gamma_jet(&x, 0).map_err(to_py)?.values())
    }

    fn rho(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.connection.rho(&x, 0).map_err(to_py)?.rho.values(), self.dim()))
    }

    /// Projective Weyl curvature flattened in `[i][j][k][l]` order.
    fn weyl(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.connection.weyl(&x, 0).map_err(to_py)?.weyl.values())
    }

    /// Cotton-York tensor flattened in `[i][j][k]` order.
    fn cotton_york(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.connection.cotton_york(&x, 0).map_err(to_py)?.cy.values())
    }

    fn metric(&self, x: Vec<f64>) -> PyResult<Option<Vec<Vec<f64>>>> {
        match &self.inner.metric {
            Some(g) => Ok(Some(rows(&g.values(&x).map_err(to_py)?, self.dim()))),
            None => Ok(None),
        }
    }

    /// Seeded low-discrepancy points inside the chart domain.
    fn sample_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        weylab::sampling::sample_points(&self.inner.chart.domain(), self.dim(), count, seed)
    }

    fn __repr__(&self) -> String {
        format!("Geometry({})", self.inner.spec.name())
    }
}

impl Geometry {
    fn build(spec: GeometrySpec) -> PyResult<Self> {
        Ok(Geometry { inner: catalog_geometry(&spec).map_err(to_py)? })
    }

    fn density(&self, expr: &str) -> PyResult<DensityField> {
        let e = Expr::parse(expr, self.dim()).map_err(to_py)?;
        DensityField::new(self.inner.chart, e, weight(1)).map_err(to_py)
    }
}

/// The bundle of Weyl structures over a geometry, in coordinates `(x, ψ)`.
#[pyclass(frozen, module = "weylab_py")]
struct BundleSpace {
    inner: weylab::BundleSpace,
}

#[pymethods]
impl BundleSpace {
    #[new]
    fn new(geometry: &Geometry) -> Self {
        BundleSpace { inner: weylab::BundleSpace::new(geometry.inner.connection.clone()) }
    }

    /// The neutral metric `h` at `(x, ψ)` as a `2n × 2n` matrix.
    fn h(&self, x: Vec<f64>, psi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let f = self.inner.bundle_forms(&BundlePoint::new(x, psi)).map_err(to_py)?;
        Ok(rows(&f.h, f.dim))
    }

    /// The symplectic form `Ω` at `(x, ψ)` as a `2n × 2n` matrix.
    fn omega(&self, x: Vec<f64>, psi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let f = self.inner.bundle_forms(&BundlePoint::new(x, psi)).map_err(to_py)?;
        Ok(rows(&f.omega, f.dim))
    }

    /// Max `|dΩ|` over coordinate triples.
    fn closedness(&self, x: Vec<f64>, psi: Vec<f64>) -> PyResult<f64> {
        self.inner.closedness_at(&BundlePoint::new(x, psi)).map_err(to_py)
    }

    /// `(λ, max|Ric(h) − λh| / max|h|)`.
    fn einstein(&self, x: Vec<f64>, psi: Vec<f64>) -> PyResult<(f64, f64)> {
        let s = self.inner.einstein_at(&BundlePoint::new(x, psi)).map_err(to_py)?;
        Ok((s.lambda, s.einstein_residual))
    }

    fn curvature_dictionary<'py>(&self, py: Python<'py>, x: Vec<f64>, psi: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.curvature_dictionary(&BundlePoint::new(x, psi)).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("torsion_plus", d.torsion_plus)?;
        out.set_item("torsion_minus", d.torsion_minus)?;
        out.set_item("rho_minus", d.rho_minus)?;
        out.set_item("rho_mixed", d.rho_mixed)?;
        out.set_item("rho_plus", d.rho_plus)?;
        Ok(out)
    }
}

/// A Weyl structure, given by its covector `ψ` relative to the base connection.
#[pyclass(frozen, module = "weylab_py")]
struct WeylSection {
    inner: weylab::WeylSection,
}

#[pymethods]
impl WeylSection {
    /// `psi` holds one expression in `x1..xn` per component; `None` is the zero section.
    #[new]
    #[pyo3(signature = (geometry, psi=None))]
    fn new(geometry: &Geometry, psi: Option<Vec<String>>) -> PyResult<Self> {
        let space = weylab::BundleSpace::new(geometry.inner.connection.clone());
        let inner = match psi {
            None => weylab::WeylSection::zero(space),
            Some(src) => {
                let n = geometry.dim();
                let comps = src.iter().map(|e| Expr::parse(e, n)).collect::<weylab::Result<Vec<_>>>().map_err(to_py)?;
                weylab::WeylSection::from_exprs(space, comps).map_err(to_py)?
            }
        };
        Ok(WeylSection { inner })
    }

    /// The Weyl structure preserving the weight-1 density `density`.
    #[staticmethod]
    fn from_density(geometry: &Geometry, density: &str, points: Vec<Vec<f64>>) -> PyResult<Self> {
        let space = weylab::BundleSpace::new(geometry.inner.connection.clone());
        let inner = weyl_from_density(&geometry.density(density)?, &space, &points).map_err(to_py)?;
        Ok(WeylSection { inner })
    }

    fn psi(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.psi().values(&x).map_err(to_py)
    }

    fn rho(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.rho_jet(&x, 0).map_err(to_py)?.values(), self.inner.dim()))
    }

    /// Pulled back `(h, Ω)` along the graph.
    fn pullbacks(&self, x: Vec<f64>) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (h, w) = self.inner.pullbacks(&x).map_err(to_py)?;
        let n = self.inner.dim();
        Ok((rows(&h, n), rows(&w, n)))
    }

    /// Closed-form `(II_D, II_h)`, each flattened in `[k][i][j]` order.
    fn second_fundamental_forms(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (d, h) = self.inner.second_fundamental_forms(&x, &SectionTolerances::default()).map_err(to_py)?;
        Ok((d.values, h.values))
    }

    fn residuals<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.residuals(&x, &SectionTolerances::default()).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("minimal", r.minimal)?;
        out.set_item("mean_curvature", r.mean_curvature)?;
        out.set_item("totally_geodesic", r.totally_geodesic)?;
        Ok(out)
    }

    fn classify<'py>(&self, py: Python<'py>, points: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let c = weylab::classify_section(&self.inner, &points, &SectionTolerances::default()).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("lagrangian", c.lagrangian)?;
        out.set_item("nondegenerate", c.nondegenerate)?;
        out.set_item("positive_definite", c.positive_definite)?;
        out.set_item("max_skew", c.max_skew)?;
        out.set_item("min_abs_det", c.min_abs_det)?;
        out.set_item("pullback_residual", c.pullback_residual)?;
        Ok(out)
    }
}

/// Projective Hessian `H(σ)` of a weight-1 density at `x`.
#[pyfunction]
fn hessian(geometry: &Geometry, density: &str, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let h = projective_hessian(&geometry.density(density)?, &geometry.inner.connection).map_err(to_py)?;
    Ok(rows(&h.values(&x).map_err(to_py)?, geometry.dim()))
}

/// Per-point Monge-Ampère samples as dicts.
#[pyfunction]
fn monge_ampere<'py>(py: Python<'py>, geometry: &Geometry, density: &str, sign: f64, points: Vec<Vec<f64>>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let space = weylab::BundleSpace::new(geometry.inner.connection.clone());
    let samples = ma_residual(&geometry.density(density)?, &space, sign, &points).map_err(to_py)?;
    samples
        .into_iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("point", s.point)?;
            d.set_item("sigma", s.sigma)?;
            d.set_item("det_h", s.det_h)?;
            d.set_item("residual", s.residual)?;
            d.set_item("det_identity_residual", s.det_identity_residual)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (geometry, density, points, tol=1e-9))]
fn certificate<'py>(py: Python<'py>, geometry: &Geometry, density: &str, points: Vec<Vec<f64>>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let space = weylab::BundleSpace::new(geometry.inner.connection.clone());
    let c = convexity_certificate(&geometry.density(density)?, &space, &points, tol).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("is_ma_solution", c.is_ma_solution)?;
    d.set_item("rho_positive_definite", c.rho_positive_definite)?;
    d.set_item("minimal_lagrangian_residual", c.minimal_lagrangian_residual)?;
    d.set_item("scale", c.scale)?;
    d.set_item("sign", c.sign)?;
    d.set_item("ma_residual", c.ma_residual)?;
    Ok(d)
}

/// Runs a scenario given as JSON text; returns the JSON report.
#[pyfunction]
#[pyo3(signature = (scenario, tol_scale=1.0, points=None, seed=None))]
fn run_scenario(py: Python<'_>, scenario: &str, tol_scale: f64, points: Option<usize>, seed: Option<u64>) -> PyResult<String> {
    let s = Scenario::from_json(scenario).map_err(to_py)?;
    let opts = RunOptions { tol_scale, points, seed };
    let report = py.detach(|| weylab::run_scenario(&s, &opts)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| WeylabError::new_err(e.to_string()))
}

/// The built-in acceptance scenarios as JSON texts.
#[pyfunction]
fn acceptance_scenarios(seed: u64) -> Vec<String> {
    weylab::verify::acceptance_scenarios(seed).iter().map(Scenario::to_json).collect()
}

#[pymodule]
fn weylab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Geometry>()?;
    m.add_class::<BundleSpace>()?;
    m.add_class::<WeylSection>()?;
    m.add_function(wrap_pyfunction!(hessian, m)?)?;
    m.add_function(wrap_pyfunction!(monge_ampere, m)?)?;
    m.add_function(wrap_pyfunction!(certificate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_scenarios, m)?)?;
    m.add("WeylabError", m.py().get_type::<WeylabError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
