//! Python module `proxitrace`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use proxitrace_core::classifier::{self, ThresholdClassifier, TreeNode, TreeParams};
use proxitrace_core::dataset::{
    self, DeviceKind, PositionPair, ProximityLabel, RssSample, SchemaMap,
};
use proxitrace_core::protocol::Mode;
use proxitrace_core::sim::{self, ScenarioConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label(s: &str) -> PyResult<ProximityLabel> {
    match s {
        "close" => Ok(ProximityLabel::Close),
        "far" => Ok(ProximityLabel::Far),
        other => Err(PyValueError::new_err(format!(
            "label must be 'close' or 'far', got {other:?}"
        ))),
    }
}

#[pyclass(name = "PathLossModel", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyPathLoss(sim::PathLossModel);

#[pymethods]
impl PyPathLoss {
    #[new]
    #[pyo3(signature = (p0_dbm=-60.0, n_exp=2.0, sigma_dbm=4.0))]
    fn new(p0_dbm: f64, n_exp: f64, sigma_dbm: f64) -> PyResult<Self> {
        let m = sim::PathLossModel {
            p0_dbm,
            n_exp,
            sigma_dbm,
        };
        m.validate().map_err(value_err)?;
        Ok(PyPathLoss(m))
    }

    #[getter]
    fn p0_dbm(&self) -> f64 {
        self.0.p0_dbm
    }

    #[getter]
    fn n_exp(&self) -> f64 {
        self.0.n_exp
    }

    #[getter]
    fn sigma_dbm(&self) -> f64 {
        self.0.sigma_dbm
    }

    fn mean_rss(&self, d: f64) -> f64 {
        self.0.mean_rss(d)
    }

    /// `count` shadowed draws at distance `d` from a generator seeded with `seed`.
    fn draw(&self, d: f64, seed: u64, count: usize) -> PyResult<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| sim::rss_at(&self.0, d, &mut rng).map_err(value_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "PathLossModel(p0_dbm={}, n_exp={}, sigma_dbm={})",
            self.0.p0_dbm, self.0.n_exp, self.0.sigma_dbm
        )
    }
}

/// Least-squares path-loss fit on paired distances and RSS values.
#[pyfunction]
fn fit_path_loss(distances: Vec<f64>, rss: Vec<f64>) -> PyResult<PyPathLoss> {
    if distances.len() != rss.len() {
        return Err(PyValueError::new_err("distances and rss differ in length"));
    }
    let samples: Vec<RssSample> = distances
        .iter()
        .zip(&rss)
        .map(|(&d, &r)| RssSample {
            rss_dbm: r,
            distance_m: d,
            position_pair: PositionPair::HH,
            device_kind: DeviceKind::Smartphone,
            session_id: String::new(),
            t_offset_s: None,
        })
        .collect();
    sim::fit_path_loss(&samples)
        .map(PyPathLoss)
        .map_err(value_err)
}

#[pyclass(name = "DecisionTree", frozen)]
struct PyTree(TreeNode);

#[pymethods]
impl PyTree {
    fn predict(&self, row: Vec<f64>) -> PyResult<String> {
        self.0
            .predict(&row)
            .map(|l| l.to_string())
            .map_err(value_err)
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn leaves(&self) -> usize {
        self.0.leaf_count()
    }

    fn to_json(&self) -> String {
        classifier::tree_to_json(&self.0)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        classifier::tree_from_json(text)
            .map(PyTree)
            .map_err(value_err)
    }
}

/// Greedy CART on a feature matrix with labels 'close' / 'far'.
#[pyfunction]
#[pyo3(signature = (rows, labels, max_depth=8, min_leaf=5, min_impurity_decrease=0.0))]
fn train_tree(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
    max_depth: usize,
    min_leaf: usize,
    min_impurity_decrease: f64,
) -> PyResult<PyTree> {
    let y = labels
        .iter()
        .map(|s| label(s))
        .collect::<PyResult<Vec<_>>>()?;
    if rows.len() != y.len() {
        return Err(PyValueError::new_err("rows and labels differ in length"));
    }
    let params = TreeParams {
        max_depth,
        min_leaf,
        min_impurity_decrease,
    };
    py.detach(|| classifier::train_tree_on(&rows, &y, &params))
        .map(PyTree)
        .map_err(value_err)
}

#[pyfunction]
fn compute_gini(close: u64, far: u64) -> PyResult<f64> {
    classifier::compute_gini([close, far]).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (rss_dbm, cutoff_dbm=-80.0))]
fn threshold_baseline(rss_dbm: f64, cutoff_dbm: f64) -> String {
    classifier::threshold_baseline(rss_dbm, cutoff_dbm).to_string()
}

/// Parses corpus text with a schema map; returns
/// `(rss_dbm, distance_m, position_pair, session_id)` tuples.
#[pyfunction]
fn parse_dataset(text: &str, schema: &str) -> PyResult<Vec<(f64, f64, String, String)>> {
    let schema: SchemaMap = schema.parse().map_err(value_err)?;
    let parsed = dataset::parse_dataset(text.as_bytes(), &schema).map_err(value_err)?;
    Ok(parsed
        .samples
        .into_iter()
        .map(|s| {
            (
                s.rss_dbm,
                s.distance_m,
                s.position_pair.as_str().to_string(),
                s.session_id,
            )
        })
        .collect())
}

#[pyclass(name = "SimMetrics", frozen)]
struct PyMetrics(sim::SimMetrics);

#[pymethods]
impl PyMetrics {
    #[getter]
    fn sensitivity(&self) -> f64 {
        self.0.sensitivity
    }

    #[getter]
    fn specificity(&self) -> f64 {
        self.0.specificity
    }

    /// `(source, target, day)` triples that raised an alert.
    #[getter]
    fn alerted_pairs(&self) -> Vec<(u32, u32, u32)> {
        self.0
            .alerted_pairs
            .iter()
            .map(|p| (p.agent_a, p.agent_b, p.day))
            .collect()
    }

    #[getter]
    fn true_contact_pairs(&self) -> Vec<(u32, u32, u32)> {
        self.0
            .true_contact_pairs
            .iter()
            .map(|p| (p.agent_a, p.agent_b, p.day))
            .collect()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn pair_table_csv(&self) -> String {
        self.0.pair_table_csv()
    }
}

/// Runs a TOML scenario with its threshold classifier. `mode` overrides the
/// scenario's protocol flow; `seed` its generator seed.
#[pyfunction]
#[pyo3(signature = (scenario_toml, mode=None, seed=None))]
fn run_scenario(
    py: Python<'_>,
    scenario_toml: &str,
    mode: Option<&str>,
    seed: Option<u64>,
) -> PyResult<PyMetrics> {
    let mut cfg: ScenarioConfig = scenario_toml.parse().map_err(value_err)?;
    match mode {
        None => {}
        Some("centralized") => cfg.mode = Mode::Centralized,
        Some("decentralized") => cfg.mode = Mode::Decentralized,
        Some(other) => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    }
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    if cfg.classifier.kind != sim::ClassifierKind::Threshold {
        return Err(PyValueError::new_err(
            "only threshold classifiers run from Python",
        ));
    }
    let cls = ThresholdClassifier {
        cutoff_dbm: cfg
            .classifier
            .cutoff_dbm
            .unwrap_or_else(|| cfg.default_cutoff_dbm()),
    };
    py.detach(|| sim::run_scenario(&cfg, &cls))
        .map(PyMetrics)
        .map_err(value_err)
}

/// Runs one random world through both protocol flows; true when they agree
/// with each other and with the brute-force oracle.
#[pyfunction]
fn check_world(py: Python<'_>, seed: u64) -> PyResult<bool> {
    py.detach(|| sim::check_world(seed))
        .map(|c| c.ok())
        .map_err(value_err)
}

#[pyfunction]
fn benchmark_scenario() -> &'static str {
    sim::BENCHMARK_SCENARIO
}

#[pymodule]
fn proxitrace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPathLoss>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyMetrics>()?;
    m.add_function(wrap_pyfunction!(fit_path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(train_tree, m)?)?;
    m.add_function(wrap_pyfunction!(compute_gini, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(parse_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(check_world, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_scenario, m)?)?;
    Ok(())
}
