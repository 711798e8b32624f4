//! Python bindings: presets, trial generation, training, evaluation,
//! classification and the streaming service.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tofgrasp::dataset::{generate_trials, rebalance, split, Role};
use tofgrasp::evalsel::{auc_pairwise, evaluate};
use tofgrasp::experiment::{run_preset_grid, train_model, Summary};
use tofgrasp::features::featurize_all;
use tofgrasp::forest::ForestModel;
use tofgrasp::io::to_line;
use tofgrasp::presets::{load_preset_or_file, preset_names, ExperimentPreset};
use tofgrasp::scene::{Pose, Ray, Scene, SceneObject, Shape, Vec3};
use tofgrasp::serve::{Classifier, ServeRequest, Server};
use tofgrasp::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn role(name: &str) -> PyResult<Role> {
    name.parse().map_err(py_err)
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A resolved experiment preset.
#[pyclass(name = "Preset", frozen)]
struct PyPreset(ExperimentPreset);

#[pymethods]
impl PyPreset {
    /// Built-in preset name or path to a preset file.
    #[staticmethod]
    fn load(name: &str) -> PyResult<Self> {
        load_preset_or_file(name).map(Self).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold
    }

    /// `(object_id, role, requested trials)` per roster entry.
    fn roster(&self) -> Vec<(String, String, usize)> {
        self.0.roster.iter().map(|e| (e.object_id.clone(), e.role.to_string(), e.requested)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Preset({:?}, {} objects)", self.0.name, self.0.roster.len())
    }
}

#[pyclass(name = "TrialSet", frozen)]
struct PyTrialSet(tofgrasp::dataset::TrialSet);

#[pymethods]
impl PyTrialSet {
    /// Generate trials for every roster entry. `seed` defaults to the preset's.
    #[staticmethod]
    #[pyo3(signature = (preset, seed=None))]
    fn generate(py: Python<'_>, preset: &PyPreset, seed: Option<u64>) -> PyResult<Self> {
        let p = &preset.0;
        let seed = seed.unwrap_or(p.seeds.generate);
        py.detach(|| generate_trials(&p.zoo, &p.roster, &p.generation, seed)).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        tofgrasp::dataset::TrialSet::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.trials.len()
    }

    fn success_rate(&self) -> f64 {
        self.0.success_rate()
    }

    fn labels(&self) -> Vec<bool> {
        self.0.trials.iter().map(|t| t.label).collect()
    }

    fn object_ids(&self) -> Vec<String> {
        self.0.trials.iter().map(|t| t.object_id.clone()).collect()
    }

    fn failure_reasons(&self) -> Vec<String> {
        self.0.trials.iter().map(|t| format!("{:?}", t.failure_reason)).collect()
    }

    fn with_role(&self, role_name: &str) -> PyResult<Self> {
        Ok(Self(self.0.with_role(role(role_name)?)))
    }

    fn rebalance(&self, seed: u64) -> Self {
        Self(rebalance(&self.0, seed).0)
    }

    /// `(train, seen_validation)` from the training-role trials.
    fn split(&self, ratio: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (a, b) = split(&self.0, ratio, seed).map_err(py_err)?;
        Ok((Self(a), Self(b)))
    }

    /// Feature rows in the preset's layout.
    fn features(&self, preset: &PyPreset) -> PyResult<Vec<Vec<f64>>> {
        Ok(featurize_all(&self.0.trials, &preset.0.features).map_err(py_err)?.rows)
    }

    /// Trial `i` as a service request record.
    fn request(&self, i: usize) -> PyResult<String> {
        let t = self.0.trials.get(i).ok_or_else(|| PyValueError::new_err(format!("trial index {i} out of range")))?;
        let req = ServeRequest {
            request_id: Some(t.trial_id.into()),
            joint_angles: t.joint_angles,
            frames: [t.frame_left.clone(), t.frame_right.clone()],
            threshold: None,
            second: None,
        };
        to_line(&req).map_err(py_err)
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel(Arc<ForestModel>);

#[pymethods]
impl PyModel {
    /// Train on the training-role trials. `hp` uses the command-line syntax.
    #[staticmethod]
    #[pyo3(signature = (trials, preset, hp="default", seed=None))]
    fn train(py: Python<'_>, trials: &PyTrialSet, preset: &PyPreset, hp: &str, seed: Option<u64>) -> PyResult<Self> {
        let hp = tofgrasp::cli::parse_hyperparams(hp, seed.unwrap_or(preset.0.seeds.train)).map_err(|e| PyValueError::new_err(format!("{e:#}")))?;
        let model = py.detach(|| train_model(&trials.0, &hp, &preset.0.features)).map_err(py_err)?;
        Ok(Self(Arc::new(model)))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ForestModel::load(&path).map(|m| Self(Arc::new(m))).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    fn hash(&self) -> PyResult<String> {
        self.0.hash().map_err(py_err)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.0.trees.len()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.0.n_features
    }

    /// Success probability for each row.
    fn predict_proba(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        rows.iter()
            .map(|r| {
                if r.len() == self.0.n_features {
                    Ok(self.0.predict_proba_values(r))
                } else {
                    Err(PyValueError::new_err(format!("expected {} features, got {}", self.0.n_features, r.len())))
                }
            })
            .collect()
    }

    /// `(n, auc, accuracy)` on the trials of one role.
    #[pyo3(signature = (trials, role_name, threshold=0.6))]
    fn evaluate(&self, trials: &PyTrialSet, role_name: &str, threshold: f64) -> PyResult<(usize, Option<f64>, f64)> {
        let set = trials.0.with_role(role(role_name)?);
        let m = featurize_all(&set.trials, &self.0.feature_config).map_err(py_err)?;
        let e = evaluate(role_name, &self.0, &m, threshold).map_err(py_err)?;
        Ok((e.n, e.auc, e.accuracy))
    }
}

#[pyclass(name = "Classifier", frozen)]
struct PyClassifier(Arc<Classifier>);

#[pymethods]
impl PyClassifier {
    #[new]
    #[pyo3(signature = (model, threshold=0.6))]
    fn new(model: &PyModel, threshold: f64) -> PyResult<Self> {
        Classifier::new((*model.0).clone(), threshold).map(|c| Self(Arc::new(c))).map_err(py_err)
    }

    /// One request record in, one response record out, as the service does.
    fn respond(&self, line: &str) -> String {
        self.0.respond(line.as_bytes())
    }

    /// `(p_success, predicted)` for a request record.
    fn classify(&self, line: &str) -> PyResult<(f64, bool)> {
        let req: ServeRequest = serde_json::from_str(line).map_err(json_err)?;
        let r = self.0.classify(&req).map_err(py_err)?;
        Ok((r.p_success, r.predicted))
    }

    /// Start the TCP service in the background.
    #[pyo3(signature = (addr="127.0.0.1:0"))]
    fn serve(&self, addr: &str) -> PyResult<PyServer> {
        let s = Server::bind(addr, Arc::clone(&self.0)).map_err(py_err)?;
        Ok(PyServer(Mutex::new(Some(s))))
    }
}

#[pyclass(name = "Server", frozen)]
struct PyServer(Mutex<Option<Server>>);

#[pymethods]
impl PyServer {
    #[getter]
    fn address(&self) -> PyResult<String> {
        let g = self.0.lock().map_err(|_| PyRuntimeError::new_err("server lock poisoned"))?;
        g.as_ref().map(|s| s.local_addr().to_string()).ok_or_else(|| PyRuntimeError::new_err("server stopped"))
    }

    fn shutdown(&self) -> PyResult<()> {
        let s = self.0.lock().map_err(|_| PyRuntimeError::new_err("server lock poisoned"))?.take();
        if let Some(s) = s {
            s.shutdown();
        }
        Ok(())
    }
}

/// Full protocol on a trial set; returns the summary as a JSON string.
#[pyfunction]
fn run_grid(py: Python<'_>, preset: &PyPreset, trials: &PyTrialSet) -> PyResult<String> {
    let (_, out) = py.detach(|| run_preset_grid(&preset.0, &trials.0)).map_err(py_err)?;
    let s: Summary = out.summary();
    to_line(&s).map_err(py_err)
}

/// Probability that a random positive outscores a random negative.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    auc_pairwise(&scores, &labels).map_err(py_err)
}

/// Distance to the nearest sphere along a ray, or None. Spheres are
/// `(x, y, z, radius)` in metres.
#[pyfunction]
#[pyo3(signature = (origin, direction, spheres, max_range=4.0))]
fn ray_cast_spheres(origin: [f64; 3], direction: [f64; 3], spheres: Vec<[f64; 4]>, max_range: f64) -> PyResult<Option<f64>> {
    let objects = spheres
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(SceneObject {
                id: format!("sphere{i}"),
                shape: Shape::sphere(s[3], 0.5, 0.1)?,
                pose: Pose::from_translation(Vec3::new(s[0], s[1], s[2])),
            })
        })
        .collect::<tofgrasp::Result<Vec<_>>>()
        .map_err(py_err)?;
    let scene = Scene::new(objects, None).map_err(py_err)?;
    let ray = Ray::new(Vec3::from(origin), Vec3::from(direction)).map_err(py_err)?;
    Ok(scene.ray_cast(&ray, max_range).map(|h| h.distance))
}

#[pymodule]
fn pytofgrasp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPreset>()?;
    m.add_class::<PyTrialSet>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyClassifier>()?;
    m.add_class::<PyServer>()?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(ray_cast_spheres, m)?)?;
    m.add("PRESETS", preset_names())?;
    Ok(())
}
