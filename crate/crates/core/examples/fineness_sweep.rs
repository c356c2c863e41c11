//! Sweep the number of time steps and print the plot-ready table.

use fedsurv::experiment::{sweep_fineness, write_sweep_csv, DataMode, ExperimentConfig};
use fedsurv::model::ModelKind;
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let d = generate_synthetic(&SynthConfig::new(1000, 4, 8))?.dataset;
    let base = ExperimentConfig { lr: 1e-2, ..ExperimentConfig::default() };
    let (rows, _) = sweep_fineness(
        &base,
        &d,
        &[5, 10, 20],
        &[ModelKind::LinearPh, ModelKind::NnNonph],
        &[DataMode::Pooled, DataMode::Iid],
    )?;
    write_sweep_csv(&rows, std::io::stdout())
}
