//! Pick a learning rate from the standard grid on a validation slice.

use fedsurv::data::standardize;
use fedsurv::experiment::{grid_search_lr, DataMode, ExperimentConfig, LR_GRID};
use fedsurv::model::ModelKind;
use fedsurv::survival::{discretize_labels, km_quantile_grid};
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let (d, _) = standardize(&generate_synthetic(&SynthConfig::new(1000, 5, 9))?.dataset)?;
    let grid = km_quantile_grid(&d.times(), &d.events(), 10)?;
    let labels = discretize_labels(&d, &grid)?;
    for mode in [DataMode::Pooled, DataMode::Stratified] {
        let cfg = ExperimentConfig { model: ModelKind::NnNonph, mode, global_rounds: 20, ..ExperimentConfig::default() };
        let s = grid_search_lr(&cfg, &d, &labels, grid.m(), &LR_GRID, 0)?;
        println!("{mode}: chose {}", s.chosen);
        for t in &s.trials {
            println!("  {:>7}: {:?}", t.learning_rate, t.validation_loss);
        }
    }
    Ok(())
}
