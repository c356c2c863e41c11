//! Train the three model families on pooled data and score a held-out set.

use fedsurv::data::{standardize, train_test_split};
use fedsurv::metrics::{MetricReport, PredictionSet};
use fedsurv::model::{train_pooled, Model, ModelConfig, ModelKind, TrainSettings};
use fedsurv::survival::{discretize_labels, km_quantile_grid};
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let d = generate_synthetic(&SynthConfig::new(2000, 6, 7))?.dataset;
    let (train_idx, test_idx) = train_test_split(&d, 0.2, 0)?;
    let (train, st) = standardize(&d.subset(&train_idx))?;
    let test = st.apply(&d.subset(&test_idx))?;

    let grid = km_quantile_grid(&train.times(), &train.events(), 10)?;
    let labels = discretize_labels(&train, &grid)?;
    let x = train.features();
    let settings = TrainSettings { learning_rate: 1e-2, ..TrainSettings::default() };

    for kind in ModelKind::ALL {
        let model0 = Model::init(ModelConfig::new(kind, train.num_features(), grid.m(), 0))?;
        let model = train_pooled(&model0, &x, &labels, 50, settings)?;
        let curves = model.predict_survival(test.features().view(), &grid)?;
        let preds = PredictionSet::from_curves(grid.clone(), &curves, test.times(), test.events())?;
        let r = MetricReport::evaluate(&preds, 100)?;
        println!(
            "{kind:<9} params {:>5}  train loss {:.4}  c-index {:.3}  IBS {:.4}",
            model.parameter_count(),
            model.nll_loss(x.view(), &labels)?,
            r.c_index.unwrap_or(f64::NAN),
            r.integrated_brier
        );
    }
    Ok(())
}
