//! Python bindings: the quasi-equilibrium map, dataset generation, the
//! lookup table and network closures, and degree-of-freedom counts.

use fene_core::closures::{
    gen_dataset as core_gen_dataset, nn_infer, nn_load, pla_build_table, pla_lookup, MlpWeights, PlaGridSpec,
    PlaTable as CoreTable, QeIntegrator, SamplingSpec,
};
use fene_core::layout::degrees_of_freedom as core_dof;
use fene_core::radial::BasisKind;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn py_err(e: fene_core::Error) -> PyErr {
    use fene_core::Error as E;
    match e {
        E::InvalidParameter(_) | E::Inadmissible(_) | E::Format(_) | E::Json(_) => PyValueError::new_err(e.to_string()),
        E::Io(io) => io.into(),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Quasi-equilibrium map between multipliers λ and conformation
/// eigenvalues c at fixed extensibility b.
#[pyclass(module = "fene", frozen)]
pub struct QeMap {
    inner: QeIntegrator,
}

#[pymethods]
impl QeMap {
    #[new]
    #[pyo3(signature = (b = 12.0))]
    fn new(b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: QeIntegrator::new(b).map_err(py_err)?,
        })
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    /// Second moments `c` for multipliers `lam`.
    fn forward(&self, lam: [f64; 3]) -> PyResult<[f64; 3]> {
        self.inner.forward(lam).map_err(py_err)
    }

    /// Multipliers reproducing the admissible triple `c` (Newton).
    fn invert(&self, c: [f64; 3]) -> PyResult<[f64; 3]> {
        Ok(self.inner.invert(c).map_err(py_err)?.lambda)
    }

    /// Covariance `∂c_i/∂λ_j` at `lam`.
    fn jacobian(&self, lam: [f64; 3]) -> PyResult<[[f64; 3]; 3]> {
        Ok(self.inner.moments(lam).map_err(py_err)?.cov)
    }
}

/// Piecewise-linear multiplier lookup table.
#[pyclass(module = "fene", frozen)]
pub struct PlaTable {
    inner: CoreTable,
}

#[pymethods]
impl PlaTable {
    /// Builds a table over the default trace range at `shape`.
    #[staticmethod]
    #[pyo3(signature = (qe, shape = (40, 40, 40)))]
    fn build(py: Python<'_>, qe: &QeMap, shape: (usize, usize, usize)) -> PyResult<Self> {
        let grid = PlaGridSpec {
            shape: [shape.0, shape.1, shape.2],
            ..PlaGridSpec::default()
        };
        let inner = py.detach(|| pla_build_table(&qe.inner, grid)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: CoreTable::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.inner.grid.shape;
        (s[0], s[1], s[2])
    }

    /// Multipliers for a sorted admissible triple.
    fn lookup(&self, c: [f64; 3]) -> PyResult<[f64; 3]> {
        pla_lookup(&self.inner, c).map_err(py_err)
    }
}

/// Network multiplier map loaded from a weight file.
#[pyclass(module = "fene", frozen)]
pub struct Mlp {
    inner: MlpWeights,
}

#[pymethods]
impl Mlp {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: nn_load(&path).map_err(py_err)?,
        })
    }

    /// Multipliers for a sorted triple.
    fn infer(&self, c: [f64; 3]) -> [f64; 3] {
        nn_infer(&self.inner, c)
    }

    /// Largest relative deviation from the stored probe outputs.
    fn probe_mismatch(&self) -> f64 {
        self.inner.probe_mismatch()
    }

    #[getter]
    fn arch(&self) -> Vec<usize> {
        self.inner.arch.clone()
    }
}

/// Writes a training dataset (CSV plus JSON sidecar); returns the number
/// of records kept.
#[pyfunction]
#[pyo3(signature = (path, b = 12.0, count = 20000, seed = 0, lambda_min = -10.0, lambda_max = 60.0, trace_margin = 0.01))]
fn gen_dataset(
    py: Python<'_>,
    path: PathBuf,
    b: f64,
    count: usize,
    seed: u64,
    lambda_min: f64,
    lambda_max: f64,
    trace_margin: f64,
) -> PyResult<usize> {
    let spec = SamplingSpec {
        lambda_min,
        lambda_max,
        count,
        seed,
        trace_margin,
    };
    py.detach(|| {
        let qe = QeIntegrator::new(b)?;
        let ds = core_gen_dataset(&qe, &spec)?;
        ds.save(&path)?;
        Ok(ds.records.len())
    })
    .map_err(py_err)
}

/// Unknowns of the truncated expansion for `basis` in {"JG1", "JGinf"}.
#[pyfunction]
fn degrees_of_freedom(basis: &str, l_max: usize, n_max: usize) -> PyResult<usize> {
    let kind: BasisKind = basis.parse().map_err(py_err)?;
    Ok(core_dof(kind, l_max, n_max))
}

#[pymodule]
pub fn fene(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<QeMap>()?;
    m.add_class::<PlaTable>()?;
    m.add_class::<Mlp>()?;
    m.add_function(wrap_pyfunction!(gen_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(degrees_of_freedom, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
