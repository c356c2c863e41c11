#![allow(dead_code)]

use std::path::PathBuf;

use fedsurv::data::{load_csv, Dataset};
use fedsurv::model::{Model, ModelConfig, ModelKind};
use fedsurv::rng::seeded;
use fedsurv::survival::DiscreteLabel;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_problem(kind: ModelKind, n: usize, p: usize, m: usize, seed: u64) -> (Model, Array2<f64>, Vec<DiscreteLabel>) {
    let mut rng = seeded(seed);
    let model = Model::init(ModelConfig::new(kind, p, m, seed)).unwrap();
    let x = Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal));
    let labels = (0..n)
        .map(|_| DiscreteLabel { interval: rng.gen_range(0..m), event: rng.gen_bool(0.6) })
        .collect();
    (model, x, labels)
}

/// Directory holding the exported benchmark CSVs, if present.
pub fn data_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("FEDSURV_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    dir.join("metabric.csv").exists().then_some(dir)
}

pub fn benchmark(name: &str) -> Option<Dataset> {
    let path = data_dir()?.join(format!("{name}.csv"));
    path.exists().then(|| load_csv(&path, "duration", "event").unwrap())
}
