//! Browser demo: a planted 2-D scene with four seen and three unseen
//! classes. The page can regenerate the scene, run constrained clustering
//! and compare the simple and joint predictors.
//!
//! [`Scene`] is plain Rust and tested natively; [`Demo`] is the thin
//! wasm-bindgen face that hands JSON strings to the page.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use zslc::clustering::{run_constrained_kmeans, ClusteringProblem};
use zslc::eval::{accuracy, majority_vote_accuracy};
use zslc::io::{generate_synthetic, SynthConfig, SyntheticData};
use zslc::mapper::map_signatures;
use zslc::pipeline::{fit_joint, fit_simple, InitMode};
use zslc::{FeatureMatrix, Hyperparams, MappingMatrix};

pub const SEEN: usize = 4;
pub const UNSEEN: usize = 3;
const PER_CLASS: usize = 40;
const SEPARATION: f64 = 6.0;
const MAX_ITERS: usize = 100;

type Point = [f64; 2];

fn points_of(m: &nalgebra::DMatrix<f64>) -> Vec<Point> {
    m.column_iter().map(|c| [c[0], c[1]]).collect()
}

#[derive(Debug, Serialize)]
pub struct PointsView {
    pub seen: Vec<Point>,
    pub seen_labels: Vec<usize>,
    pub unseen: Vec<Point>,
    pub truth: Vec<usize>,
    /// True class centroids, seen classes first.
    pub centroids: Vec<Point>,
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    /// Cluster of every instance, seen instances first.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Point>,
    pub objective: f64,
    pub iterations: usize,
    /// Majority-vote accuracy of the clustering on the unseen instances.
    pub majority_vote: f64,
}

#[derive(Debug, Serialize)]
pub struct PredictView {
    pub labels: Vec<usize>,
    pub seen_representatives: Vec<Point>,
    pub unseen_representatives: Vec<Point>,
    pub accuracy: f64,
    pub per_class_accuracy: f64,
    pub iterations: usize,
}

pub struct Scene {
    synth: SyntheticData,
    seed: u64,
}

impl Scene {
    pub fn generate(seed: u64, noise: f64, shift: f64) -> Result<Scene, String> {
        let cfg = SynthConfig {
            d: 2,
            r: 2,
            n_s: SEEN,
            n_u: UNSEEN,
            per_class: PER_CLASS,
            noise_std: noise,
            separation: SEPARATION,
            shift,
            seed,
        };
        let synth = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
        Ok(Scene { synth, seed })
    }

    fn truth(&self) -> &zslc::Assignment {
        self.synth.dataset.truth_u.as_ref().expect("synthetic data has truth")
    }

    pub fn points(&self) -> PointsView {
        let data = &self.synth.dataset;
        PointsView {
            seen: points_of(data.x_s.data()),
            seen_labels: data.labels_s.indices().to_vec(),
            unseen: points_of(data.x_u.data()),
            truth: self.truth().indices().to_vec(),
            centroids: points_of(&self.synth.centroids),
        }
    }

    /// Constrained k-means over all instances with one cluster per class.
    pub fn cluster(&self, beta: f64) -> Result<ClusterView, String> {
        let data = &self.synth.dataset;
        let all = data.x_s.concat(&data.x_u).map_err(|e| e.to_string())?;
        let problem = ClusteringProblem::new(&all, &data.labels_s, SEEN + UNSEEN, beta, self.seed)
            .map_err(|e| e.to_string())?;
        let res = run_constrained_kmeans(&problem, MAX_ITERS).map_err(|e| e.to_string())?;
        let unseen = res.assignment.select(&(data.x_s.len()..all.len()).collect::<Vec<_>>());
        let majority_vote = majority_vote_accuracy(&unseen, self.truth()).map_err(|e| e.to_string())?;
        Ok(ClusterView {
            assignment: res.assignment.indices().to_vec(),
            centroids: points_of(res.centroids.data()),
            objective: res.objective,
            iterations: res.iterations,
            majority_vote,
        })
    }

    /// `method` is `simple`, `joint-initR` or `joint-initD`.
    pub fn predict(&self, method: &str, gamma: f64, beta: f64) -> Result<PredictView, String> {
        let data = &self.synth.dataset;
        let hyper = Hyperparams::new(gamma).with_beta(beta).with_seed(self.seed);
        let (labels, mapping, iterations): (_, MappingMatrix, usize) = match method {
            "simple" => {
                let fit = fit_simple(data, &hyper).map_err(|e| e.to_string())?;
                (fit.prediction.labels_u, fit.mapping, fit.clustering.iterations)
            }
            other => {
                let mode = other
                    .strip_prefix("joint-")
                    .ok_or_else(|| format!("unknown method {other}"))?
                    .parse::<InitMode>()
                    .map_err(|e| e.to_string())?;
                let fit = fit_joint(data, &hyper, mode).map_err(|e| e.to_string())?;
                (fit.prediction.labels_u, fit.result.d, fit.result.iterations)
            }
        };
        let reps = |s| -> Result<Vec<Point>, String> {
            let m: FeatureMatrix = map_signatures(&mapping, s).map_err(|e| e.to_string())?;
            Ok(points_of(m.data()))
        };
        let acc = accuracy(&labels, self.truth()).map_err(|e| e.to_string())?;
        Ok(PredictView {
            seen_representatives: reps(&data.s_s)?,
            unseen_representatives: reps(&data.s_u)?,
            labels: labels.indices().to_vec(),
            accuracy: acc.overall,
            per_class_accuracy: acc.per_class,
            iterations,
        })
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("views serialize")
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, noise: f64, shift: f64) -> Result<Demo, JsError> {
        let scene = Scene::generate(seed as u64, noise, shift).map_err(|e| JsError::new(&e))?;
        Ok(Demo { scene })
    }

    pub fn points(&self) -> String {
        to_json(&self.scene.points())
    }

    pub fn cluster(&self, beta: f64) -> Result<String, JsError> {
        self.scene.cluster(beta).map(|v| to_json(&v)).map_err(|e| JsError::new(&e))
    }

    pub fn predict(&self, method: &str, gamma: f64, beta: f64) -> Result<String, JsError> {
        self.scene
            .predict(method, gamma, beta)
            .map(|v| to_json(&v))
            .map_err(|e| JsError::new(&e))
    }
}
