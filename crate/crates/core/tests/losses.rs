mod common;

use tilesight_core::encoding::{
    classification_loss, focal_loss, orientation_loss, regression_loss, softmax, LossConfig, LossOutput,
    PredictionTensor,
};

const REL_TOL: f64 = 1e-5;
const STEP: f64 = 1e-6;

fn check_gradient(pred: &PredictionTensor, f: impl Fn(&PredictionTensor) -> LossOutput) {
    let analytic = f(pred).grad;
    for (i, &a) in analytic.iter().enumerate() {
        let mut up = pred.clone();
        up.data_mut()[i] += STEP;
        let mut dn = pred.clone();
        dn.data_mut()[i] -= STEP;
        let fd = (f(&up).value - f(&dn).value) / (2.0 * STEP);
        let scale = fd.abs().max(a.abs());
        assert!(
            (fd - a).abs() <= REL_TOL * scale + 1e-9,
            "index {i}: analytic {a:e}, finite difference {fd:e}"
        );
    }
}

#[test]
fn gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    let mut rng = common::rng(1);
    for _ in 0..10 {
        let targets = common::random_targets(&mut rng, 12, 7, 48);
        let pred = common::random_tensor(&mut rng, 12, 7, 48);
        let neg = targets.sampled_negative_mask.clone();
        check_gradient(&pred, |p| classification_loss(p, &targets, &neg, &cfg).unwrap());
        check_gradient(&pred, |p| orientation_loss(p, &targets, &cfg).unwrap());
        check_gradient(&pred, |p| regression_loss(p, &targets).unwrap());
    }
}

#[test]
fn orientation_loss_special_cases() {
    let cfg = LossConfig::default();
    let mut rng = common::rng(2);
    let targets = common::random_targets(&mut rng, 20, 7, 48);
    let npos = targets.num_positives() as f64;
    assert!(npos > 0.0);
    // uniform logits
    let uniform = PredictionTensor::zeros(20, 7, 48);
    let expected = -cfg.alpha * (1.0 - 1.0 / 48.0f64).powf(cfg.gamma) * (1.0 / 48.0f64).ln();
    let got = orientation_loss(&uniform, &targets, &cfg).unwrap().value;
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    // one-hot at the target with a huge margin
    let mut perfect = PredictionTensor::zeros(20, 7, 48);
    for a in 0..20 {
        if let Some(b) = targets.orientation_target[a] {
            perfect.record_mut(a)[7 + b] = 60.0;
        }
    }
    assert!(orientation_loss(&perfect, &targets, &cfg).unwrap().value < 1e-20);
    // matches the scalar path
    let pred = common::random_tensor(&mut rng, 20, 7, 48);
    let mut sum = 0.0;
    for a in 0..20 {
        if let Some(b) = targets.orientation_target[a] {
            sum += focal_loss(softmax(pred.orientation_logits(a))[b], &cfg).unwrap();
        }
    }
    let got = orientation_loss(&pred, &targets, &cfg).unwrap().value;
    assert!((got - sum / npos).abs() < 1e-12);
}

#[test]
fn regression_loss_special_cases() {
    let mut rng = common::rng(3);
    let targets = common::random_targets(&mut rng, 16, 7, 48);
    let npos = targets.num_positives() as f64;
    let mut pred = PredictionTensor::zeros(16, 7, 48);
    for a in 0..16 {
        let off = pred.offsets_index(a);
        for k in 0..4 {
            pred.data_mut()[off + k] = targets.offset_target[a][k];
        }
    }
    assert_eq!(regression_loss(&pred, &targets).unwrap().value, 0.0);
    for a in 0..16 {
        let off = pred.offsets_index(a);
        for k in 0..4 {
            pred.data_mut()[off + k] += if k % 2 == 0 { 0.5 } else { -0.5 };
        }
    }
    // 0.125 per coordinate, 4 coordinates per positive, averaged over positives
    let v = regression_loss(&pred, &targets).unwrap().value;
    assert!((v - 0.5).abs() < 1e-12, "{v} with {npos} positives");
}

#[test]
fn focal_reduces_to_cross_entropy() {
    let ce = LossConfig {
        alpha: 1.0,
        gamma: 0.0,
        regression_weight: 1.0,
    };
    for i in 1..=1000 {
        let p = i as f64 / 1000.0;
        assert!((focal_loss(p, &ce).unwrap() + p.ln()).abs() <= 1e-9);
    }
    assert_eq!(focal_loss(1.0, &LossConfig::default()).unwrap(), 0.0);
}
