//! Save a model to JSON and load it back unchanged.

use fedsurv::model::{Model, ModelConfig, ModelKind};

fn main() -> fedsurv::Result<()> {
    let model = Model::init(ModelConfig::new(ModelKind::NnPh, 9, 10, 5))?;
    let path = std::env::temp_dir().join("fedsurv-checkpoint.json");
    model.save(&path)?;
    let back = Model::load(&path)?;
    assert_eq!(model, back);
    for t in &back.params.tensors {
        println!("{:<16} {:?}", t.name, t.shape);
    }
    println!("{} parameters round-tripped through {}", back.parameter_count(), path.display());
    Ok(())
}
