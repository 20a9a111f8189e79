//! Python bindings. Nodes are 0-indexed and edges are `(source, target)`
//! pairs throughout; `coefficients[i][j]` is the effect of `j` on `i`.

use cyclo::io::{read_trace, write_trace};
use cyclo::{
    ChainConfig, DataMatrix, GaussianMixture, GraphDistance, IntervalMethod, IntervalScope,
    MotifMode, MotifSpec, NoiseModel, PriorHyper, ShdMode, WeightedSem,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn err(e: cyclo::Error) -> PyErr {
    match e {
        cyclo::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[pyclass(name = "Graph", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyGraph(cyclo::Graph);

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (p, edges = Vec::new()))]
    fn new(p: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        cyclo::Graph::from_edges(p, &edges).map(PyGraph).map_err(err)
    }

    #[staticmethod]
    fn from_key(p: usize, key: &str) -> PyResult<Self> {
        cyclo::Graph::from_canonical_key(p, key).map(PyGraph).map_err(err)
    }

    /// Parse adjacency text: the node count, then one 1-indexed `source target` per line.
    #[staticmethod]
    fn from_adjacency_text(text: &str) -> PyResult<Self> {
        cyclo::Graph::parse_adjacency_text(text).map(PyGraph).map_err(err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().collect()
    }

    fn has_edge(&self, source: usize, target: usize) -> bool {
        source < self.0.p() && target < self.0.p() && self.0.contains(source, target)
    }

    fn is_acyclic(&self) -> bool {
        self.0.is_acyclic()
    }

    fn canonical_key(&self) -> String {
        self.0.canonical_key()
    }

    fn to_adjacency_text(&self) -> String {
        self.0.to_adjacency_text()
    }

    fn __len__(&self) -> usize {
        self.0.edge_count()
    }

    fn __repr__(&self) -> String {
        format!("Graph(p={}, edges={:?})", self.0.p(), self.edges())
    }
}

/// Structural Hamming distance; `mode` is "standard" (a reversal costs 1)
/// or "hamming" (a reversal costs 2).
#[pyfunction]
#[pyo3(signature = (a, b, mode = "standard"))]
fn shd(a: &PyGraph, b: &PyGraph, mode: &str) -> PyResult<usize> {
    cyclo::shd(&a.0, &b.0, shd_mode(mode)?).map_err(err)
}

fn shd_mode(mode: &str) -> PyResult<ShdMode> {
    match mode {
        "standard" => Ok(ShdMode::Standard),
        "hamming" => Ok(ShdMode::Hamming),
        other => Err(PyValueError::new_err(format!("unknown SHD mode {other:?}"))),
    }
}

/// Structural intervention distance of `estimate` from `truth` (DAGs only).
#[pyfunction]
fn sid(truth: &PyGraph, estimate: &PyGraph) -> PyResult<usize> {
    cyclo::sid(&truth.0, &estimate.0).map_err(err)
}

fn mixture(spec: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>) -> PyResult<GaussianMixture> {
    match spec {
        None => GaussianMixture::gaussian(0.0, 1.0).map_err(err),
        Some((w, m, v)) => GaussianMixture::new(w, m, v).map_err(err),
    }
}

/// Draw `n` rows from `Y = (I - B)^-1 e`. `noise` is `(weights, means,
/// variances)` shared by every node, standard normal when omitted. Returns
/// `(rows, spectral_radius)`.
#[pyfunction]
#[pyo3(signature = (coefficients, n, seed = 0, noise = None))]
fn simulate(
    coefficients: Vec<Vec<f64>>,
    n: usize,
    seed: u64,
    noise: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let b = matrix(&coefficients)?;
    let p = b.nrows();
    let sem = WeightedSem::from_coefficients(b).map_err(err)?;
    let sim = cyclo::simulate_sem(&sem, &NoiseModel::uniform(p, mixture(noise)?), n, seed).map_err(err)?;
    Ok((rows(sim.data.matrix()), sim.spectral_radius))
}

#[pyclass(name = "Trace", frozen)]
struct PyTrace(cyclo::Trace);

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        read_trace(path).map(PyTrace).map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_trace(&self.0, path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.meta.p
    }

    #[getter]
    fn model_kind(&self) -> &'static str {
        match self.0.meta.model_kind {
            cyclo::ModelKind::Dag => "dag",
            cyclo::ModelKind::Dcg => "dcg",
        }
    }

    fn graphs(&self) -> Vec<PyGraph> {
        self.0.graphs().cloned().map(PyGraph).collect()
    }

    /// `probs[i][j]` is the posterior probability of the edge `j -> i`.
    fn edge_probs(&self) -> PyResult<Vec<Vec<f64>>> {
        cyclo::edge_inclusion_probs(&self.0).map_err(err)
    }

    /// Samples of `B[i][j]`, on the original data scale unless `standardized`.
    #[pyo3(signature = (i, j, standardized = false))]
    fn coefficients(&self, i: usize, j: usize, standardized: bool) -> PyResult<Vec<f64>> {
        let p = self.0.meta.p;
        if i >= p || j >= p {
            return Err(err(cyclo::Error::NodeOutOfRange { index: i.max(j), p }));
        }
        Ok(if standardized {
            self.0.coefficient_values(i, j)
        } else {
            self.0.coefficient_values_original(i, j)
        })
    }

    /// `(lower, upper)` credible interval for `B[i][j]`.
    #[pyo3(signature = (i, j, level = 0.95, method = "hpd", scope = "marginal", standardized = false))]
    fn interval(
        &self,
        i: usize,
        j: usize,
        level: f64,
        method: &str,
        scope: &str,
        standardized: bool,
    ) -> PyResult<(f64, f64)> {
        let method = match method {
            "hpd" => IntervalMethod::Hpd,
            "equal-tailed" => IntervalMethod::EqualTailed,
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        let scope = match scope {
            "marginal" => IntervalScope::Marginal,
            "conditional" => IntervalScope::Conditional,
            other => return Err(PyValueError::new_err(format!("unknown scope {other:?}"))),
        };
        let values = self.coefficients(i, j, standardized)?;
        let ci = cyclo::posterior_interval(&values, level, method, scope).map_err(err)?;
        Ok((ci.lower, ci.upper))
    }

    /// Weighted-medoid point estimate. `metric` is "shd", "shd-hamming",
    /// "sid" or a callable `(candidate, reference) -> float`. Returns
    /// `(graph, [(key, weight, count, expected_loss), ...])`.
    #[pyo3(signature = (metric = None))]
    fn point_graph(
        &self,
        py: Python<'_>,
        metric: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<(PyGraph, Vec<(String, f64, usize, f64)>)> {
        let d = match metric {
            None => GraphDistance::Shd(ShdMode::Standard),
            Some(m) if m.is_callable() => {
                let f: Py<PyAny> = m.clone().unbind();
                GraphDistance::custom(move |a, b| {
                    Python::attach(|py| {
                        f.call1(py, (PyGraph(a.clone()), PyGraph(b.clone())))
                            .and_then(|v| v.extract::<f64>(py))
                            .unwrap_or(f64::NAN)
                    })
                })
            }
            Some(m) => match m.extract::<String>()?.as_str() {
                "shd" => GraphDistance::Shd(ShdMode::Standard),
                "shd-hamming" => GraphDistance::Shd(ShdMode::Hamming),
                "sid" => GraphDistance::Sid,
                other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
            },
        };
        // the distance table runs on worker threads that may call back into Python
        let report = py.detach(|| cyclo::point_est_graph(&self.0, &d)).map_err(err)?;
        let rows = report
            .rows
            .iter()
            .map(|r| (r.key.clone(), r.weight, r.count, r.expected_loss))
            .collect();
        Ok((PyGraph(report.graph), rows))
    }

    /// Fraction of samples containing every edge in `edges`; with
    /// `exact_induced` the subgraph on the motif's nodes must equal it.
    #[pyo3(signature = (edges, nodes = Vec::new(), exact_induced = false))]
    fn motif_probability(&self, edges: Vec<(usize, usize)>, nodes: Vec<usize>, exact_induced: bool) -> PyResult<f64> {
        let mut node_set: Vec<usize> = edges.iter().flat_map(|&(s, t)| [s, t]).collect();
        node_set.extend(nodes);
        let mode = if exact_induced { MotifMode::ExactInduced } else { MotifMode::AllPresent };
        let spec = MotifSpec::new(edges, node_set, mode).map_err(err)?;
        cyclo::motif_probability(&self.0, &spec).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Trace(kind={}, p={}, samples={})", self.model_kind(), self.p(), self.0.len())
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    kind: cyclo::ModelKind,
    data: Vec<Vec<f64>>,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    k: usize,
    seed: u64,
    chains: usize,
    standardize: bool,
    mh_step: f64,
) -> PyResult<PyTrace> {
    let raw = DataMatrix::new(matrix(&data)?).map_err(err)?;
    let (data, transform) = if standardize {
        let (d, t) = raw.standardize().map_err(err)?;
        (d, Some(t))
    } else {
        (raw, None)
    };
    let cfg = ChainConfig {
        iterations,
        burn_in,
        thin,
        k,
        seed,
        mh_step,
        prior: PriorHyper::default(),
        ..ChainConfig::default()
    };
    let mut trace = py
        .detach(|| cyclo::run_chains(&data, &cfg, kind, chains))
        .map_err(err)?;
    trace.meta.standardization = transform;
    Ok(PyTrace(trace))
}

/// Sample the posterior over acyclic structures. `data` is a list of rows.
#[pyfunction]
#[pyo3(signature = (data, iterations = 20_000, burn_in = 10_000, thin = 10, k = 2, seed = 0, chains = 1, standardize = true))]
#[allow(clippy::too_many_arguments)]
fn sample_dag(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    k: usize,
    seed: u64,
    chains: usize,
    standardize: bool,
) -> PyResult<PyTrace> {
    let step = ChainConfig::default().mh_step;
    run(py, cyclo::ModelKind::Dag, data, iterations, burn_in, thin, k, seed, chains, standardize, step)
}

/// Sample the posterior over structures that may contain cycles.
#[pyfunction]
#[pyo3(signature = (data, iterations = 20_000, burn_in = 10_000, thin = 10, k = 2, seed = 0, chains = 1, standardize = true, mh_step = 0.1))]
#[allow(clippy::too_many_arguments)]
fn sample_dcg(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    k: usize,
    seed: u64,
    chains: usize,
    standardize: bool,
    mh_step: f64,
) -> PyResult<PyTrace> {
    run(py, cyclo::ModelKind::Dcg, data, iterations, burn_in, thin, k, seed, chains, standardize, mh_step)
}

#[pymodule]
fn cyclo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(shd, m)?)?;
    m.add_function(wrap_pyfunction!(sid, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dag, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dcg, m)?)?;
    Ok(())
}
