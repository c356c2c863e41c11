//! FedAvg across four simulated centres, with IID and time-stratified
//! partitions, printing the per-round log.

use fedsurv::data::standardize;
use fedsurv::federation::{fed_avg, partition, FederationConfig, Partition};
use fedsurv::model::{Model, ModelConfig, ModelKind, TrainSettings};
use fedsurv::survival::{discretize_labels, km_quantile_grid};
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let (d, _) = standardize(&generate_synthetic(&SynthConfig::new(1200, 4, 3))?.dataset)?;
    let grid = km_quantile_grid(&d.times(), &d.events(), 10)?;
    let labels = discretize_labels(&d, &grid)?;
    let x = d.features();
    let all: Vec<usize> = (0..d.len()).collect();
    let model0 = Model::init(ModelConfig::new(ModelKind::NnNonph, d.num_features(), grid.m(), 0))?;

    for scheme in [Partition::Iid { seed: 1 }, Partition::Stratified] {
        let centres = partition(&d, &all, 4, scheme)?;
        let cfg = FederationConfig {
            num_centres: 4,
            partition: scheme,
            global_rounds: 10,
            local_rounds: 2,
            train: TrainSettings { learning_rate: 1e-2, ..TrainSettings::default() },
            parallel: false,
            log_global_loss: true,
        };
        let out = fed_avg(&model0, &centres, &cfg, &x, &labels)?;
        println!("{scheme:?}: centre sizes {:?}", centres.iter().map(|c| c.indices.len()).collect::<Vec<_>>());
        print!("{}", out.log_jsonl()?);
    }
    Ok(())
}
