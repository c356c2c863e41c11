//! Five-fold cross-validated experiment. Pass a CSV path to use real data.

use fedsurv::data::load_csv;
use fedsurv::experiment::{run_experiment_on, DataMode, ExperimentConfig};
use fedsurv::model::ModelKind;
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let d = match std::env::args().nth(1) {
        Some(path) => load_csv(path, "duration", "event")?,
        None => generate_synthetic(&SynthConfig::new(1500, 6, 2))?.dataset,
    };
    for mode in DataMode::ALL {
        let cfg = ExperimentConfig { model: ModelKind::LinearPh, mode, lr_grid: true, ..ExperimentConfig::default() };
        let r = run_experiment_on(&cfg, &d)?;
        let c = r.c_index_rebased.expect("comparable pairs");
        let b = r.integrated_brier_rebased;
        println!("{mode:<10} c-index {:.1} ± {:.1}   IBS {:.1} ± {:.1}", c.mean, c.std, b.mean, b.std);
    }
    Ok(())
}
