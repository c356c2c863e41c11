//! Simulated federations: split training data across centres and run
//! federated averaging over local trainers.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{contiguous_blocks, Dataset};
use crate::error::{Error, Result};
use crate::model::{LocalTrainer, Model, Parameters, TrainSettings};
use crate::rng;
use crate::survival::DiscreteLabel;

/// `(global, local)` round budgets keeping 100 local rounds in total.
pub const ROUND_PRESETS: [(usize, usize); 3] = [(100, 1), (20, 5), (1, 100)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    /// Uniformly random assignment.
    Iid { seed: u64 },
    /// Contiguous blocks of the training set sorted by observed time.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_centres: usize,
    pub partition: Partition,
    pub global_rounds: usize,
    /// Epochs each centre runs between aggregations.
    pub local_rounds: usize,
    pub train: TrainSettings,
    /// Train centres concurrently. Results do not depend on this flag.
    #[serde(default)]
    pub parallel: bool,
    /// Evaluate the aggregated model's training loss after every round.
    #[serde(default)]
    pub log_global_loss: bool,
}

impl FederationConfig {
    fn validate(&self) -> Result<()> {
        if self.num_centres == 0 || self.global_rounds == 0 || self.local_rounds == 0 {
            return Err(Error::InvalidArgument(
                "centres, global rounds and local rounds must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CentreData {
    pub centre_id: usize,
    /// Indices into the training data.
    pub indices: Vec<usize>,
}

fn check_count(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} records across {k} centres")));
    }
    Ok(())
}

/// Seeded shuffle followed by contiguous blocks; sizes differ by at most one.
pub fn partition_iid(train: &[usize], k: usize, seed: u64) -> Result<Vec<CentreData>> {
    check_count(train.len(), k)?;
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut rng::seeded(seed));
    Ok(contiguous_blocks(shuffled.len(), k)
        .into_iter()
        .enumerate()
        .map(|(centre_id, r)| CentreData {
            centre_id,
            indices: shuffled[r].to_vec(),
        })
        .collect())
}

/// Sorts by observed time (ties by index) and cuts into `k` contiguous
/// blocks: centre 0 sees the shortest times, centre `k-1` the longest.
pub fn partition_stratified(d: &Dataset, train: &[usize], k: usize) -> Result<Vec<CentreData>> {
    check_count(train.len(), k)?;
    let mut sorted = train.to_vec();
    sorted.sort_by(|&a, &b| d.records[a].time.total_cmp(&d.records[b].time).then(a.cmp(&b)));
    Ok(contiguous_blocks(sorted.len(), k)
        .into_iter()
        .enumerate()
        .map(|(centre_id, r)| CentreData {
            centre_id,
            indices: sorted[r].to_vec(),
        })
        .collect())
}

pub fn partition(d: &Dataset, train: &[usize], k: usize, scheme: Partition) -> Result<Vec<CentreData>> {
    match scheme {
        Partition::Iid { seed } => partition_iid(train, k, seed),
        Partition::Stratified => partition_stratified(d, train, k),
    }
}

/// Element-wise weighted average of parameter sets.
pub fn aggregate(params: &[Parameters], weights: &[f64]) -> Result<Parameters> {
    if params.is_empty() || params.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameter sets with {} weights",
            params.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("aggregation weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("aggregation weights sum to {total}, not 1")));
    }
    for p in &params[1..] {
        params[0].check_same_shape(p)?;
    }
    let mut out = params[0].clone();
    out.map_inplace(|v| weights[0] * v);
    for (p, &w) in params[1..].iter().zip(&weights[1..]) {
        for (o, v) in out.values_mut().zip(p.values()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// One line of the round-by-round training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based global round.
    pub round: usize,
    /// Mean batch loss of each centre's last local epoch.
    pub centre_losses: Vec<f64>,
    /// Training loss of the aggregated model, when requested.
    pub global_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FedAvgOutcome {
    pub model: Model,
    pub log: Vec<RoundRecord>,
}

impl FedAvgOutcome {
    /// Round log as line-delimited JSON.
    pub fn log_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Federated averaging. Each global round broadcasts the current model,
/// lets every centre run `local_rounds` epochs from it with its own
/// optimizer, and replaces the model with the size-weighted average of the
/// returned parameters.
///
/// `x` and `labels` are indexed by the ids in `centres`. Optimizer state
/// stays with its centre across rounds and is never averaged.
pub fn fed_avg(
    model0: &Model,
    centres: &[CentreData],
    cfg: &FederationConfig,
    x: &Array2<f64>,
    labels: &[DiscreteLabel],
) -> Result<FedAvgOutcome> {
    cfg.validate()?;
    if centres.is_empty() {
        return Err(Error::InvalidArgument("no centres".into()));
    }
    let mut trainers = centres
        .iter()
        .map(|c| {
            if c.indices.is_empty() {
                return Err(Error::InvalidArgument(format!("centre {} holds no data", c.centre_id)));
            }
            let xs = x.select(Axis(0), &c.indices);
            let ls = c.indices.iter().map(|&i| labels[i]).collect();
            LocalTrainer::new(c.centre_id, xs, ls, cfg.train, model0)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = trainers.iter().map(LocalTrainer::len).sum();
    let weights: Vec<f64> = trainers.iter().map(|t| t.len() as f64 / total as f64).collect();

    let mut global = model0.clone();
    let mut log = Vec::with_capacity(cfg.global_rounds);
    for round in 0..cfg.global_rounds {
        let first_epoch = round * cfg.local_rounds;
        let local = |trainer: &mut LocalTrainer| -> Result<(Parameters, f64)> {
            let mut m = global.clone();
            let loss = trainer.run(&mut m, first_epoch, cfg.local_rounds)?;
            if !m.params.all_finite() {
                return Err(Error::NonFinite {
                    round: round + 1,
                    centre: trainer.centre_id,
                });
            }
            Ok((m.params, loss))
        };
        let results: Vec<Result<(Parameters, f64)>> = if cfg.parallel {
            trainers.par_iter_mut().map(local).collect()
        } else {
            trainers.iter_mut().map(local).collect()
        };
        let (params, centre_losses): (Vec<Parameters>, Vec<f64>) =
            results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        global.params = aggregate(&params, &weights)?;

        let global_loss = if cfg.log_global_loss {
            let mut sum = 0.0;
            for (t, w) in trainers.iter().zip(&weights) {
                sum += w * t.loss(&global)?;
            }
            Some(sum)
        } else {
            None
        };
        log.push(RoundRecord {
            round: round + 1,
            centre_losses,
            global_loss,
        });
    }
    Ok(FedAvgOutcome { model: global, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;
    use crate::model::Tensor;
    use std::collections::BTreeSet;

    fn scalar(v: f64) -> Parameters {
        Parameters::new(vec![Tensor {
            name: "w".into(),
            shape: vec![1],
            data: vec![v],
        }])
    }

    fn sizes(c: &[CentreData]) -> Vec<usize> {
        c.iter().map(|c| c.indices.len()).collect()
    }

    fn with_times(times: &[f64]) -> Dataset {
        let records = times
            .iter()
            .map(|&t| SurvivalRecord { features: vec![0.0], time: t, event: true })
            .collect();
        Dataset::new(records, vec!["x".into()]).unwrap()
    }

    fn is_partition(c: &[CentreData], train: &[usize]) -> bool {
        let all: Vec<usize> = c.iter().flat_map(|c| c.indices.iter().copied()).collect();
        let set: BTreeSet<usize> = all.iter().copied().collect();
        all.len() == train.len() && set == train.iter().copied().collect()
    }

    #[test]
    fn iid_sizes_spread_remainder() {
        let train: Vec<usize> = (0..10).collect();
        let c = partition_iid(&train, 4, 1).unwrap();
        assert_eq!(sizes(&c), vec![3, 3, 2, 2]);
        assert!(is_partition(&c, &train));
        assert_eq!(c, partition_iid(&train, 4, 1).unwrap());
        let one = partition_iid(&train, 1, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(is_partition(&one, &train));
        assert!(partition_iid(&train, 11, 1).is_err());
    }

    #[test]
    fn stratified_sorts_by_time() {
        let d = with_times(&[5.0, 1.0, 3.0, 2.0]);
        let c = partition_stratified(&d, &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(c[0].indices, vec![1, 3]);
        assert_eq!(c[1].indices, vec![2, 0]);
        let one = partition_stratified(&d, &[0, 1, 2, 3], 1).unwrap();
        assert_eq!(one[0].indices.len(), 4);
        assert!(partition_stratified(&d, &[0, 1], 3).is_err());
    }

    #[test]
    fn stratified_breaks_ties_by_index() {
        let d = with_times(&[2.0, 1.0, 2.0, 2.0]);
        let c = partition_stratified(&d, &[3, 2, 1, 0], 2).unwrap();
        assert_eq!(c[0].indices, vec![1, 0]);
        assert_eq!(c[1].indices, vec![2, 3]);
    }

    #[test]
    fn aggregate_examples() {
        let avg = aggregate(&[scalar(0.0), scalar(4.0)], &[0.25, 0.75]).unwrap();
        assert_eq!(avg, scalar(3.0));
        let same = aggregate(&[scalar(1.5), scalar(1.5), scalar(1.5)], &[0.2, 0.3, 0.5]).unwrap();
        assert!((same.tensors[0].data[0] - 1.5).abs() < 1e-15);
        let swapped = aggregate(&[scalar(4.0), scalar(0.0)], &[0.75, 0.25]).unwrap();
        assert_eq!(swapped, avg);
    }

    #[test]
    fn aggregate_rejects_bad_input() {
        assert!(aggregate(&[scalar(0.0), scalar(1.0)], &[0.5, 0.6]).is_err());
        assert!(aggregate(&[scalar(0.0), scalar(1.0)], &[1.5, -0.5]).is_err());
        assert!(aggregate(&[scalar(0.0)], &[0.5, 0.5]).is_err());
        let other = Parameters::new(vec![Tensor { name: "v".into(), shape: vec![1], data: vec![0.0] }]);
        assert!(aggregate(&[scalar(0.0), other], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn aggregate_keeps_negative_zero_for_a_single_centre() {
        let out = aggregate(&[scalar(-0.0)], &[1.0]).unwrap();
        assert_eq!(out.tensors[0].data[0].to_bits(), (-0.0f64).to_bits());
    }
}
