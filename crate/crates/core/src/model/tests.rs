use ndarray::{array, Array2};
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::survival::TimeGrid;

fn cfg(kind: ModelKind, p: usize, m: usize) -> ModelConfig {
    ModelConfig::new(kind, p, m, 11)
}

fn normal_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::seeded(seed);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut r))
}

fn labels(pairs: &[(usize, bool)]) -> Vec<DiscreteLabel> {
    pairs.iter().map(|&(interval, event)| DiscreteLabel { interval, event }).collect()
}

fn randomize(model: &mut Model, seed: u64) {
    let mut r = rng::seeded(seed);
    model.params.map_inplace(|_| StandardNormal.sample(&mut r));
}

#[test]
fn parameter_counts_follow_layer_shapes() {
    let nonph = Model::init(cfg(ModelKind::NnNonph, 9, 10)).unwrap();
    assert_eq!(nonph.parameter_count(), 9 * 32 + 32 + 32 * 32 + 32 + 32 * 10 + 10);
    let ph = Model::init(cfg(ModelKind::NnPh, 9, 10)).unwrap();
    assert_eq!(ph.params.get("head.risk").unwrap().data.len(), 32);
    assert_eq!(ph.params.get("head.baseline").unwrap().data.len(), 10);
    assert_eq!(ph.parameter_count(), 9 * 32 + 32 + 32 * 32 + 32 + 32 + 10);
    let lin = Model::init(cfg(ModelKind::LinearPh, 9, 10)).unwrap();
    assert_eq!(lin.parameter_count(), 9 + 10);
}

#[test]
fn init_is_seeded_and_bounded() {
    let a = Model::init(cfg(ModelKind::NnNonph, 4, 3)).unwrap();
    assert_eq!(a, Model::init(cfg(ModelKind::NnNonph, 4, 3)).unwrap());
    let mut other = cfg(ModelKind::NnNonph, 4, 3);
    other.seed = 12;
    assert_ne!(a, Model::init(other).unwrap());
    let w = a.params.get("hidden.0.weight").unwrap();
    assert!(w.data.iter().all(|v| v.abs() <= 0.5));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(Model::init(cfg(ModelKind::NnPh, 0, 3)).is_err());
    assert!(Model::init(cfg(ModelKind::NnPh, 3, 0)).is_err());
    let mut c = cfg(ModelKind::NnPh, 3, 3);
    c.predictor = Predictor::Dense { hidden: vec![4, 0] };
    assert!(Model::init(c).is_err());
    // a non-PH head on a linear predictor is a dense predictor without hidden layers
    let mut c = cfg(ModelKind::LinearPh, 3, 4);
    c.head = Head::NonPh;
    assert_eq!(Model::init(c).unwrap().parameter_count(), 3 * 4 + 4);
}

#[test]
fn zero_model_has_half_hazards() {
    let model = Model::zeros(cfg(ModelKind::NnNonph, 3, 4)).unwrap();
    let h = model.forward(normal_matrix(5, 3, 1).view()).unwrap();
    assert!(h.values.iter().all(|&v| v == 0.5));
}

#[test]
fn forward_rejects_wrong_width() {
    let model = Model::init(cfg(ModelKind::NnPh, 3, 4)).unwrap();
    assert!(matches!(
        model.forward(normal_matrix(2, 4, 0).view()),
        Err(Error::DimensionMismatch { expected: 3, actual: 4 })
    ));
}

#[test]
fn linear_ph_hazards() {
    let mut model = Model::zeros(cfg(ModelKind::LinearPh, 3, 2)).unwrap();
    model.params.get_mut("head.risk").unwrap().data[0] = 1.0;
    let h = model.forward(array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]].view()).unwrap();
    assert_eq!(h.values[[0, 0]], 0.5);
    assert!((h.values[[1, 1]] - 0.731_058_578_630_004_9).abs() < 1e-15);
}

#[test]
fn ph_logit_differences_keep_sign_across_intervals() {
    let mut model = Model::init(cfg(ModelKind::NnPh, 5, 6)).unwrap();
    randomize(&mut model, 3);
    let z = model.logits(normal_matrix(20, 5, 4).view()).unwrap();
    for a in 0..20 {
        for b in 0..20 {
            let d0 = z[[a, 0]] - z[[b, 0]];
            for t in 1..6 {
                let dt = z[[a, t]] - z[[b, t]];
                assert!((dt - d0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn single_term_losses() {
    let model = Model::zeros(cfg(ModelKind::LinearPh, 2, 3)).unwrap();
    let x = array![[0.3, -1.0]];
    let event0 = model.nll_loss(x.view(), &labels(&[(0, true)])).unwrap();
    assert!((event0 + 0.5f64.ln()).abs() < 1e-15);
    let censored1 = model.nll_loss(x.view(), &labels(&[(1, false)])).unwrap();
    assert!((censored1 + 2.0 * 0.5f64.ln()).abs() < 1e-15);
}

/// Per-patient loss from hazards, written independently of the logit path.
fn patient_loss(h: &[f64], label: DiscreteLabel) -> f64 {
    (0..=label.interval)
        .map(|k| {
            if label.event && k == label.interval {
                -h[k].ln()
            } else {
                -(1.0 - h[k]).ln()
            }
        })
        .sum()
}

#[test]
fn batch_loss_is_mean_of_patient_losses() {
    let mut model = Model::init(cfg(ModelKind::NnNonph, 4, 5)).unwrap();
    randomize(&mut model, 8);
    model.params.map_inplace(|v| v * 0.3);
    let x = normal_matrix(7, 4, 2);
    let ls = labels(&[(0, true), (4, false), (2, true), (3, true), (1, false), (4, true), (0, false)]);
    let h = model.forward(x.view()).unwrap();
    let oracle: f64 = ls
        .iter()
        .enumerate()
        .map(|(i, l)| patient_loss(&h.values.row(i).to_vec(), *l))
        .sum::<f64>()
        / 7.0;
    let loss = model.nll_loss(x.view(), &ls).unwrap();
    assert!((loss - oracle).abs() < 1e-12, "{loss} vs {oracle}");
    let sum = model.nll_loss_sum(x.view(), &ls).unwrap();
    assert!((sum - 7.0 * oracle).abs() < 1e-11);
}

#[test]
fn labels_beyond_the_grid_are_rejected() {
    let model = Model::zeros(cfg(ModelKind::LinearPh, 1, 2)).unwrap();
    assert!(model.nll_loss(array![[0.0]].view(), &labels(&[(2, true)])).is_err());
    assert!(model.nll_loss(array![[0.0]].view(), &labels(&[(0, true), (1, true)])).is_err());
}

fn finite_difference_check(kind: ModelKind, seed: u64) {
    let (n, p, m) = (5, 9, 10);
    let mut model = Model::init(cfg(kind, p, m)).unwrap();
    randomize(&mut model, seed);
    let x = normal_matrix(n, p, seed + 1);
    let ls = labels(&[(0, true), (9, false), (4, true), (7, false), (2, true)]);
    let (loss, grads) = model.gradient(x.view(), &ls, LossReduction::Mean).unwrap();
    let h = 1e-5;
    // round-off of a central difference on a loss of this size
    let fd_noise = 8.0 * f64::EPSILON * loss.abs().max(1.0) / h;
    for (ti, t) in model.params.tensors.iter().enumerate() {
        for k in 0..t.data.len() {
            let mut plus = model.clone();
            plus.params.tensors[ti].data[k] += h;
            let mut minus = model.clone();
            minus.params.tensors[ti].data[k] -= h;
            let fd = (plus.nll_loss(x.view(), &ls).unwrap() - minus.nll_loss(x.view(), &ls).unwrap()) / (2.0 * h);
            let an = grads.tensors[ti].data[k];
            let scale = an.abs().max(fd.abs());
            assert!((an - fd).abs() <= 1e-4 * scale + fd_noise, "{kind} {}[{k}]: analytic {an} vs fd {fd}", t.name);
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for kind in ModelKind::ALL {
        finite_difference_check(kind, 21);
    }
}

#[test]
fn baseline_gradient_of_zero_linear_model() {
    let model = Model::zeros(cfg(ModelKind::LinearPh, 2, 3)).unwrap();
    let x = Array2::zeros((3, 2));
    let ls = labels(&[(0, true), (2, false), (1, true)]);
    let (_, g) = model.gradient(x.view(), &ls, LossReduction::Mean).unwrap();
    // intervals at risk: {0}, {0,1,2}, {0,1}; y=1 at (0,0) and (2,1)
    let expected = [(-0.5 + 0.5 + 0.5) / 3.0, (0.5 - 0.5) / 3.0, 0.5 / 3.0];
    let got = &g.get("head.baseline").unwrap().data;
    for (a, b) in got.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(g.get("head.risk").unwrap().data.iter().all(|&v| v == 0.0));
}

#[test]
fn duplicating_samples_keeps_mean_gradient() {
    let mut model = Model::init(cfg(ModelKind::NnPh, 3, 4)).unwrap();
    randomize(&mut model, 5);
    let x = normal_matrix(4, 3, 6);
    let ls = labels(&[(0, true), (3, false), (1, true), (2, false)]);
    let x2 = ndarray::concatenate(ndarray::Axis(0), &[x.view(), x.view()]).unwrap();
    let ls2: Vec<_> = ls.iter().chain(&ls).copied().collect();
    let (_, g1) = model.gradient(x.view(), &ls, LossReduction::Mean).unwrap();
    let (_, g2) = model.gradient(x2.view(), &ls2, LossReduction::Mean).unwrap();
    assert!(g1.max_abs_diff(&g2) < 1e-12);
}

#[test]
fn large_parameters_stay_finite() {
    for kind in ModelKind::ALL {
        let mut model = Model::init(cfg(kind, 4, 5)).unwrap();
        randomize(&mut model, 2);
        model.params.map_inplace(|v| v * 1e3);
        let x = normal_matrix(6, 4, 3);
        let h = model.forward(x.view()).unwrap();
        assert!(h.values.iter().all(|&v| v > 0.0 && v < 1.0));
        let ls = labels(&[(0, true), (4, false), (2, true), (1, true), (3, false), (4, true)]);
        let (loss, g) = model.gradient(x.view(), &ls, LossReduction::Mean).unwrap();
        assert!(loss.is_finite() && g.all_finite());
    }
}

#[test]
fn zero_model_survival_curves() {
    let model = Model::zeros(cfg(ModelKind::NnNonph, 2, 2)).unwrap();
    let grid = TimeGrid::new(vec![1.0, 3.0]).unwrap();
    let curves = model.predict_survival(array![[1.0, 2.0], [0.0, -1.0]].view(), &grid).unwrap();
    for c in curves {
        assert_eq!(c.values, vec![0.5, 0.25]);
        assert_eq!(c.times, vec![1.0, 3.0]);
    }
    let wrong = TimeGrid::new(vec![1.0]).unwrap();
    assert!(model.predict_survival(array![[1.0, 2.0]].view(), &wrong).is_err());
}

#[test]
fn ph_survival_curves_never_cross() {
    let mut model = Model::init(cfg(ModelKind::NnPh, 3, 8)).unwrap();
    randomize(&mut model, 9);
    let grid = TimeGrid::new((1..=8).map(f64::from).collect()).unwrap();
    let x = normal_matrix(30, 3, 10);
    let curves = model.predict_survival(x.view(), &grid).unwrap();
    let risk = model.risk_scores(x.view()).unwrap().unwrap();
    for a in 0..30 {
        for b in 0..30 {
            if risk[a] < risk[b] {
                assert!(curves[a].values.iter().zip(&curves[b].values).all(|(sa, sb)| sa >= sb));
            }
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut model = Model::init(cfg(ModelKind::NnNonph, 3, 4)).unwrap();
    randomize(&mut model, 13);
    model.params.tensors[0].data[0] = 1.0 / 3.0;
    model.params.tensors[0].data[1] = -0.0;
    let back = Model::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back.config, model.config);
    for (a, b) in model.params.values().zip(back.params.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let mut broken = model.clone();
    broken.params.tensors[0].data.pop();
    assert!(Model::from_json(&broken.to_json().unwrap()).is_err());
}
