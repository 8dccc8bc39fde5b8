use std::collections::HashMap;
use std::sync::Arc;

use aomdd::{CompileOptions, Evidence, GraphicalModel, NoPruning, Ordering, PrimalGraph, PseudoTree};
use pyo3::exceptions::{PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: aomdd::Error) -> PyErr {
    match e {
        aomdd::Error::Resource(_) => PyMemoryError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn evidence(n: usize, domains: &[usize], e: Option<HashMap<usize, usize>>) -> PyResult<Evidence> {
    let mut values = vec![None; n];
    for (v, x) in e.unwrap_or_default() {
        if v >= n {
            return Err(PyValueError::new_err(format!("evidence variable {v} out of range")));
        }
        values[v] = Some(x);
    }
    Evidence::new(values, domains).map_err(err)
}

/// A graphical model read from UAI or DIMACS CNF text.
#[pyclass(module = "pyaomdd", frozen)]
struct Model {
    inner: GraphicalModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_uai(text: &str) -> PyResult<Self> {
        Ok(Model { inner: aomdd::parse_uai(text).map_err(err)? })
    }

    #[staticmethod]
    fn from_cnf(text: &str) -> PyResult<Self> {
        Ok(Model { inner: aomdd::parse_dimacs_cnf(text).map_err(err)? })
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn domains(&self) -> Vec<usize> {
        self.inner.domains().to_vec()
    }

    #[getter]
    fn weighted(&self) -> bool {
        self.inner.kind() == aomdd::ModelKind::Weighted
    }

    #[getter]
    fn num_functions(&self) -> usize {
        self.inner.functions().len()
    }

    /// Product of all functions at a full assignment.
    fn weight(&self, assignment: Vec<usize>) -> PyResult<f64> {
        if assignment.len() != self.inner.num_vars() {
            return Err(PyValueError::new_err("assignment must give one value per variable"));
        }
        self.inner.weight_of(&aomdd::Assignment::full(&assignment)).map_err(err)
    }

    fn min_fill_order(&self, seed: u64) -> Vec<usize> {
        aomdd::min_fill_ordering(&PrimalGraph::from_model(&self.inner), seed).as_slice().to_vec()
    }

    fn induced_width(&self, order: Vec<usize>) -> PyResult<usize> {
        let d = Ordering::new(order).map_err(err)?;
        Ok(aomdd::induced_width(&PrimalGraph::from_model(&self.inner), &d))
    }

    fn to_uai(&self) -> String {
        aomdd::write_uai(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Model(num_vars={}, functions={}, weighted={})", self.num_vars(), self.num_functions(), self.weighted())
    }
}

/// A compiled, canonical AND/OR decision diagram.
#[pyclass(module = "pyaomdd", frozen)]
struct Diagram {
    inner: aomdd::Aomdd,
}

#[pymethods]
impl Diagram {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Diagram { inner: aomdd::deserialize(text).map_err(err)? })
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn root_constant(&self) -> f64 {
        self.inner.root_constant()
    }

    #[getter]
    fn meta_nodes(&self) -> usize {
        self.inner.stats().meta_nodes
    }

    #[getter]
    fn edges(&self) -> usize {
        self.inner.stats().edges
    }

    fn per_var(&self) -> Vec<usize> {
        self.inner.stats().per_var
    }

    fn evaluate(&self, assignment: Vec<usize>) -> PyResult<f64> {
        aomdd::evaluate(&self.inner, &assignment).map_err(err)
    }

    #[pyo3(signature = (evidence=None))]
    fn count<'py>(&self, py: Python<'py>, evidence: Option<HashMap<usize, usize>>) -> PyResult<Bound<'py, PyAny>> {
        let e = self.evidence(evidence)?;
        let c = aomdd::count_solutions(&self.inner, &e).map_err(err)?;
        Ok(c.into_pyobject(py)?.into_any())
    }

    #[pyo3(signature = (evidence=None))]
    fn sum(&self, evidence: Option<HashMap<usize, usize>>) -> PyResult<f64> {
        aomdd::sum_over(&self.inner, &self.evidence(evidence)?).map_err(err)
    }

    #[pyo3(signature = (evidence=None))]
    fn mpe(&self, evidence: Option<HashMap<usize, usize>>) -> PyResult<(f64, Vec<usize>)> {
        aomdd::mpe(&self.inner, &self.evidence(evidence)?).map_err(err)
    }

    #[pyo3(signature = (var, evidence=None))]
    fn belief(&self, var: usize, evidence: Option<HashMap<usize, usize>>) -> PyResult<Vec<f64>> {
        if var >= self.inner.num_vars() {
            return Err(PyValueError::new_err(format!("variable {var} out of range")));
        }
        aomdd::belief(&self.inner, &self.evidence(evidence)?, var).map_err(err)
    }

    #[pyo3(signature = (limit=None, evidence=None))]
    fn solutions(
        &self,
        limit: Option<usize>,
        evidence: Option<HashMap<usize, usize>>,
    ) -> PyResult<Vec<(Vec<usize>, f64)>> {
        aomdd::enumerate_solutions(&self.inner, &self.evidence(evidence)?, limit).map_err(err)
    }

    fn equivalent(&self, other: &Diagram) -> PyResult<bool> {
        aomdd::equivalent(&self.inner, &other.inner).map_err(err)
    }

    fn serialize(&self) -> String {
        aomdd::serialize(&self.inner)
    }

    fn to_dot(&self) -> String {
        aomdd::to_dot(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Diagram(meta_nodes={}, edges={}, root_constant={})",
            self.meta_nodes(),
            self.edges(),
            self.root_constant()
        )
    }
}

impl Diagram {
    fn evidence(&self, e: Option<HashMap<usize, usize>>) -> PyResult<Evidence> {
        evidence(self.inner.num_vars(), self.inner.domains(), e)
    }
}

/// Compiles `model` and returns the diagram with a dict of statistics.
#[pyfunction]
#[pyo3(signature = (model, method="search", order=None, seed=0, chain=false, prune="none", digits=aomdd::DEFAULT_DIGITS, node_cap=None))]
#[allow(clippy::too_many_arguments)]
fn compile<'py>(
    py: Python<'py>,
    model: &Model,
    method: &str,
    order: Option<Vec<usize>>,
    seed: u64,
    chain: bool,
    prune: &str,
    digits: u32,
    node_cap: Option<usize>,
) -> PyResult<(Diagram, Bound<'py, PyDict>)> {
    let m = &model.inner;
    let g = PrimalGraph::from_model(m);
    let d = match order {
        Some(o) => Ordering::new(o).map_err(err)?,
        None => aomdd::min_fill_ordering(&g, seed),
    };
    if d.len() != m.num_vars() {
        return Err(PyValueError::new_err("ordering must list every variable once"));
    }
    let tree = Arc::new(if chain { PseudoTree::chain(&d) } else { PseudoTree::generate(&g, &d) });
    let opts = CompileOptions { digits, node_cap };
    let stats = PyDict::new(py);
    stats.set_item("induced_width", aomdd::induced_width(&g, &d))?;
    stats.set_item("height", tree.height())?;
    let inner = match (method, prune) {
        ("search", "none" | "bcp") => {
            let (diagram, s) = if prune == "bcp" {
                py.detach(|| aomdd::compile_search(m, tree, &mut aomdd::bcp_hook(m), &opts))
            } else {
                py.detach(|| aomdd::compile_search(m, tree, &mut NoPruning, &opts))
            }
            .map_err(err)?;
            stats.set_item("or_expansions", s.or_expansions.iter().sum::<usize>())?;
            stats.set_item("and_expansions", s.and_expansions.iter().sum::<usize>())?;
            stats.set_item("cache_hits", s.cache_hits.iter().sum::<usize>())?;
            diagram
        }
        ("be", "none") => py.detach(|| aomdd::compile_be(m, tree, &opts)).map_err(err)?.0,
        _ => return Err(PyValueError::new_err(format!("unsupported method/prune combination {method}/{prune}"))),
    };
    let s = inner.stats();
    stats.set_item("meta_nodes", s.meta_nodes)?;
    stats.set_item("edges", s.edges)?;
    stats.set_item("per_var", s.per_var)?;
    Ok((Diagram { inner }, stats))
}

#[pymodule]
pub fn pyaomdd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Diagram>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    Ok(())
}
