//! Cross-validated experiments: pooled or federated training, learning-rate
//! search, evaluation and report assembly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold, load_csv, split_indices, standardize, Dataset, FoldSplit, Standardization};
use crate::error::{Error, Result};
use crate::federation::{fed_avg, partition, FederationConfig, Partition};
use crate::metrics::{rebase, MetricReport, PredictionSet, DEFAULT_BRIER_POINTS};
use crate::model::{train_pooled, Model, ModelConfig, ModelKind, OptimizerKind, TrainSettings};
use crate::rng::derive_seed;
use crate::survival::{discretize_labels, km_quantile_grid, DiscreteLabel, TimeGrid};

pub const LR_GRID: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataMode {
    Pooled,
    Iid,
    Stratified,
}

impl DataMode {
    pub const ALL: [DataMode; 3] = [DataMode::Pooled, DataMode::Iid, DataMode::Stratified];

    pub fn name(self) -> &'static str {
        match self {
            DataMode::Pooled => "pooled",
            DataMode::Iid => "iid",
            DataMode::Stratified => "stratified",
        }
    }
}

impl std::str::FromStr for DataMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DataMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode `{s}`")))
    }
}

impl std::fmt::Display for DataMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

/// Keys mirror the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub time_col: String,
    pub event_col: String,
    pub model: ModelKind,
    pub mode: DataMode,
    pub centres: usize,
    pub global_rounds: usize,
    pub local_rounds: usize,
    pub time_steps: usize,
    pub folds: usize,
    /// Used when `lr_grid` is off.
    pub lr: f64,
    pub lr_grid: bool,
    pub batch_size: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Run folds concurrently. Does not change results.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            time_col: "duration".into(),
            event_col: "event".into(),
            model: ModelKind::NnNonph,
            mode: DataMode::Pooled,
            centres: 4,
            global_rounds: 100,
            local_rounds: 1,
            time_steps: 10,
            folds: 5,
            lr: 1e-3,
            lr_grid: false,
            batch_size: 256,
            seed: 0,
            out: None,
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.global_rounds == 0 || self.local_rounds == 0 {
            return bad("global and local rounds must be at least 1");
        }
        if self.time_steps == 0 {
            return bad("time-steps must be at least 1");
        }
        if self.mode != DataMode::Pooled && self.centres == 0 {
            return bad("centres must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch-size must be positive");
        }
        if !self.lr_grid && !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        Ok(())
    }

    /// Total local epochs; the only round setting pooled training uses.
    pub fn total_epochs(&self) -> usize {
        self.global_rounds * self.local_rounds
    }
}

/// Training-split state fitted without looking at the held-out fold.
#[derive(Debug, Clone)]
pub struct PreparedFold {
    pub standardization: Standardization,
    pub grid: TimeGrid,
    pub train: Dataset,
    pub test: Dataset,
    pub x_train: Array2<f64>,
    pub labels: Vec<DiscreteLabel>,
}

pub fn prepare_fold(d: &Dataset, split: &FoldSplit, time_steps: usize) -> Result<PreparedFold> {
    let (train, standardization) = standardize(&d.subset(&split.train_indices))?;
    let test = standardization.apply(&d.subset(&split.test_indices))?;
    let grid = km_quantile_grid(&train.times(), &train.events(), time_steps)?;
    let labels = discretize_labels(&train, &grid)?;
    Ok(PreparedFold {
        standardization,
        grid,
        x_train: train.features(),
        train,
        test,
        labels,
    })
}

/// Trains a model on `train` with the configured mode and round budget.
/// `labels` must be aligned with `train.records`.
pub fn train_model(
    cfg: &ExperimentConfig,
    train: &Dataset,
    x: &Array2<f64>,
    labels: &[DiscreteLabel],
    num_intervals: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Model> {
    let model0 = Model::init(ModelConfig::new(cfg.model, train.num_features(), num_intervals, derive_seed(seed, &[0])))?;
    let settings = TrainSettings {
        optimizer: OptimizerKind::adam(),
        learning_rate,
        batch_size: cfg.batch_size,
        seed: derive_seed(seed, &[1]),
        ..TrainSettings::default()
    };
    let scheme = match cfg.mode {
        DataMode::Pooled => return train_pooled(&model0, x, labels, cfg.total_epochs(), settings),
        DataMode::Iid => Partition::Iid { seed: derive_seed(seed, &[2]) },
        DataMode::Stratified => Partition::Stratified,
    };
    let all: Vec<usize> = (0..train.len()).collect();
    let centres = partition(train, &all, cfg.centres, scheme)?;
    let fed = FederationConfig {
        num_centres: cfg.centres,
        partition: scheme,
        global_rounds: cfg.global_rounds,
        local_rounds: cfg.local_rounds,
        train: settings,
        parallel: false,
        log_global_loss: false,
    };
    Ok(fed_avg(&model0, &centres, &fed, x, labels)?.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTrial {
    pub learning_rate: f64,
    /// Validation mean loss; `None` when training diverged.
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSearch {
    pub chosen: f64,
    pub trials: Vec<LrTrial>,
}

/// Trains one model per learning rate on 80% of the training data and keeps
/// the one with the lowest validation loss on the remaining 20%. Ties go to
/// the smaller rate; diverged runs are skipped.
pub fn grid_search_lr(
    cfg: &ExperimentConfig,
    train: &Dataset,
    labels: &[DiscreteLabel],
    num_intervals: usize,
    grid: &[f64],
    seed: u64,
) -> Result<LrSearch> {
    let (fit_idx, val_idx) = split_indices(train.len(), VALIDATION_FRACTION, derive_seed(seed, &[0]))?;
    let fit = train.subset(&fit_idx);
    let fit_labels: Vec<DiscreteLabel> = fit_idx.iter().map(|&i| labels[i]).collect();
    let val = train.subset(&val_idx);
    let val_labels: Vec<DiscreteLabel> = val_idx.iter().map(|&i| labels[i]).collect();
    let x_fit = fit.features();
    let x_val = val.features();

    let mut trials = Vec::with_capacity(grid.len());
    for &lr in grid {
        let loss = match train_model(cfg, &fit, &x_fit, &fit_labels, num_intervals, lr, derive_seed(seed, &[1])) {
            Ok(model) => Some(model.nll_loss(x_val.view(), &val_labels)?).filter(|l| l.is_finite()),
            Err(Error::NonFinite { .. }) => None,
            Err(e) => return Err(e),
        };
        trials.push(LrTrial { learning_rate: lr, validation_loss: loss });
    }
    let mut best: Option<(f64, f64)> = None;
    for t in &trials {
        if let Some(loss) = t.validation_loss {
            let better = match best {
                None => true,
                Some((best_lr, best_loss)) => loss < best_loss || (loss == best_loss && t.learning_rate < best_lr),
            };
            if better {
                best = Some((t.learning_rate, loss));
            }
        }
    }
    let (chosen, _) = best.ok_or(Error::AllDiverged)?;
    Ok(LrSearch { chosen, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub learning_rate: f64,
    pub lr_search: Option<LrSearch>,
    pub effective_time_steps: usize,
    pub cuts: Vec<f64>,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary { mean, std: var.sqrt() })
    }

    pub fn rebased(self) -> Summary {
        Summary { mean: rebase(self.mean), std: rebase(self.std) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport>,
    /// Over folds with a defined index.
    pub c_index: Option<Summary>,
    pub integrated_brier: Summary,
    /// Both summaries above, times 100 to one decimal.
    pub c_index_rebased: Option<Summary>,
    pub integrated_brier_rebased: Summary,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the wall clock zeroed, for reproducibility comparisons.
    pub fn fingerprint(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        r.to_json()
    }
}

pub fn run_fold(cfg: &ExperimentConfig, d: &Dataset, fold: usize, split: &FoldSplit) -> Result<FoldReport> {
    let seed = derive_seed(cfg.seed, &[fold as u64]);
    let prep = prepare_fold(d, split, cfg.time_steps)?;
    let m = prep.grid.m();
    let lr_search = if cfg.lr_grid {
        Some(grid_search_lr(cfg, &prep.train, &prep.labels, m, &LR_GRID, derive_seed(seed, &[0]))?)
    } else {
        None
    };
    let learning_rate = lr_search.as_ref().map_or(cfg.lr, |s| s.chosen);
    let model = train_model(cfg, &prep.train, &prep.x_train, &prep.labels, m, learning_rate, derive_seed(seed, &[1]))?;
    let curves = model.predict_survival(prep.test.features().view(), &prep.grid)?;
    let preds = PredictionSet::from_curves(prep.grid.clone(), &curves, prep.test.times(), prep.test.events())?;
    Ok(FoldReport {
        fold,
        train_size: prep.train.len(),
        test_size: prep.test.len(),
        learning_rate,
        lr_search,
        effective_time_steps: m,
        cuts: prep.grid.cuts().to_vec(),
        metrics: MetricReport::evaluate(&preds, DEFAULT_BRIER_POINTS)?,
    })
}

/// Runs cross-validation on an in-memory dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, d: &Dataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let splits = kfold(d, cfg.folds, cfg.seed)?;
    let run = |(fold, split): (usize, &FoldSplit)| {
        run_fold(cfg, d, fold, split).map_err(|e| Error::Fold { fold, source: Box::new(e) })
    };
    let folds: Vec<FoldReport> = if cfg.parallel {
        splits.par_iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        splits.iter().enumerate().map(run).collect::<Result<_>>()?
    };
    let cs: Vec<f64> = folds.iter().filter_map(|f| f.metrics.c_index).collect();
    let ibs: Vec<f64> = folds.iter().map(|f| f.metrics.integrated_brier).collect();
    let c_index = Summary::of(&cs);
    let integrated_brier = Summary::of(&ibs).expect("at least two folds");
    Ok(ExperimentReport {
        config: cfg.clone(),
        folds,
        c_index,
        integrated_brier,
        c_index_rebased: c_index.map(Summary::rebased),
        integrated_brier_rebased: integrated_brier.rebased(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Loads the configured dataset, runs cross-validation and writes the
/// report to `cfg.out` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let d = load_csv(&cfg.dataset, &cfg.time_col, &cfg.event_col)?;
    let report = run_experiment_on(cfg, &d)?;
    if let Some(out) = &cfg.out {
        std::fs::write(out, report.to_json()?).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub time_steps: usize,
    pub mode: DataMode,
    pub model: ModelKind,
    pub c_index_mean: Option<f64>,
    pub c_index_std: Option<f64>,
    pub ibs_mean: f64,
    pub ibs_std: f64,
}

/// One experiment per `(m, mode, model)` with 100 global and 1 local round.
/// Rows come out in that nesting order, rebased to 100.
pub fn sweep_fineness(
    base: &ExperimentConfig,
    d: &Dataset,
    time_steps: &[usize],
    models: &[ModelKind],
    modes: &[DataMode],
) -> Result<(Vec<SweepRow>, Vec<ExperimentReport>)> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &m in time_steps {
        for &mode in modes {
            for &model in models {
                let cfg = ExperimentConfig {
                    time_steps: m,
                    mode,
                    model,
                    global_rounds: 100,
                    local_rounds: 1,
                    out: None,
                    ..base.clone()
                };
                let r = run_experiment_on(&cfg, d)?;
                rows.push(SweepRow {
                    time_steps: m,
                    mode,
                    model,
                    c_index_mean: r.c_index_rebased.map(|s| s.mean),
                    c_index_std: r.c_index_rebased.map(|s| s.std),
                    ibs_mean: r.integrated_brier_rebased.mean,
                    ibs_std: r.integrated_brier_rebased.std,
                });
                reports.push(r);
            }
        }
    }
    Ok((rows, reports))
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
