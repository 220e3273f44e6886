use serde::{Deserialize, Serialize};

use super::{hardest_negatives, PredictionTensor, TargetTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub regression_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.25,
            gamma: 2.0,
            regression_weight: 1.0,
        }
    }
}

impl LossConfig {
    /// `alpha = 1` is accepted so the loss can reduce to cross-entropy.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("loss.alpha", "must be in (0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("loss.gamma", "must be finite and >= 0"));
        }
        if !(self.regression_weight >= 0.0 && self.regression_weight.is_finite()) {
            return Err(Error::invalid("loss.regression_weight", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `-alpha * (1 - p_t)^gamma * ln(p_t)`.
pub fn focal_loss(p_t: f64, cfg: &LossConfig) -> Result<f64> {
    if !(p_t > 0.0 && p_t <= 1.0) {
        return Err(Error::invalid("p_t", format!("must be in (0, 1], got {p_t}")));
    }
    Ok(focal(p_t, cfg))
}

fn focal(p: f64, cfg: &LossConfig) -> f64 {
    let v = -cfg.alpha * (1.0 - p).powf(cfg.gamma) * p.ln();
    // -0.0 at p = 1
    v.max(0.0)
}

/// `p * dFL/dp`, finite for every `p` in (0, 1].
fn focal_slope(p: f64, cfg: &LossConfig) -> f64 {
    let q = 1.0 - p;
    let first = if cfg.gamma == 0.0 || q <= 0.0 {
        0.0
    } else {
        cfg.gamma * q.powf(cfg.gamma - 1.0) * p * p.ln()
    };
    cfg.alpha * (first - q.powf(cfg.gamma))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Focal loss of a softmax distribution and its gradient w.r.t. the logits.
pub fn softmax_focal(logits: &[f64], target: usize, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    // floor keeps ln finite when the target logit is hopelessly low
    let pt = p[target].max(f64::MIN_POSITIVE);
    let k = focal_slope(pt, cfg);
    let grad = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| k * (if j == target { 1.0 } else { 0.0 } - pj))
        .collect();
    (focal(pt, cfg), grad)
}

/// A scalar loss and its gradient over the flat prediction tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Vec<f64>,
}

fn check(pred: &PredictionTensor, targets: &TargetTensor) -> Result<()> {
    if pred.anchors() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "tensor has {} anchors, targets have {}",
            pred.anchors(),
            targets.len()
        )));
    }
    if let Some(&c) = targets.class_target.iter().find(|&&c| c >= pred.classes()) {
        return Err(Error::ShapeMismatch(format!(
            "class target {c} outside {} classes",
            pred.classes()
        )));
    }
    if let Some(b) = targets.orientation_target.iter().flatten().find(|&&b| b >= pred.bins()) {
        return Err(Error::ShapeMismatch(format!(
            "orientation target {b} outside {} bins",
            pred.bins()
        )));
    }
    Ok(())
}

/// Mean focal loss over positives and the anchors flagged in `negatives`.
pub fn classification_loss(
    pred: &PredictionTensor,
    targets: &TargetTensor,
    negatives: &[bool],
    cfg: &LossConfig,
) -> Result<LossOutput> {
    cfg.validate()?;
    check(pred, targets)?;
    let used: Vec<usize> = (0..targets.len())
        .filter(|&a| targets.positive_mask[a] || negatives[a])
        .collect();
    let norm = used.len().max(1) as f64;
    let mut grad = vec![0.0; pred.data().len()];
    let mut value = 0.0;
    for a in used {
        let target = if targets.positive_mask[a] {
            targets.class_target[a]
        } else {
            0
        };
        let (v, g) = softmax_focal(pred.class_logits(a), target, cfg);
        value += v;
        let base = pred.class_index(a);
        for (j, gj) in g.into_iter().enumerate() {
            grad[base + j] = gj / norm;
        }
    }
    Ok(LossOutput {
        value: value / norm,
        grad,
    })
}

/// Mean focal loss of the orientation distribution over positives.
pub fn orientation_loss(pred: &PredictionTensor, targets: &TargetTensor, cfg: &LossConfig) -> Result<LossOutput> {
    cfg.validate()?;
    check(pred, targets)?;
    let norm = targets.num_positives().max(1) as f64;
    let mut grad = vec![0.0; pred.data().len()];
    let mut value = 0.0;
    for (a, bin) in targets.orientation_target.iter().enumerate() {
        let Some(bin) = *bin else { continue };
        let (v, g) = softmax_focal(pred.orientation_logits(a), bin, cfg);
        value += v;
        let base = pred.orientation_index(a);
        for (j, gj) in g.into_iter().enumerate() {
            grad[base + j] = gj / norm;
        }
    }
    Ok(LossOutput {
        value: value / norm,
        grad,
    })
}

/// Smooth-L1 (beta = 1) summed over the 4 offsets, averaged over positives.
pub fn regression_loss(pred: &PredictionTensor, targets: &TargetTensor) -> Result<LossOutput> {
    check(pred, targets)?;
    let norm = targets.num_positives().max(1) as f64;
    let mut grad = vec![0.0; pred.data().len()];
    let mut value = 0.0;
    for a in (0..targets.len()).filter(|&a| targets.positive_mask[a]) {
        let o = pred.offsets(a);
        let base = pred.offsets_index(a);
        for k in 0..4 {
            let e = o[k] - targets.offset_target[a][k];
            let (v, d) = if e.abs() < 1.0 {
                (0.5 * e * e, e)
            } else {
                (e.abs() - 0.5, e.signum())
            };
            value += v;
            grad[base + k] = d / norm;
        }
    }
    Ok(LossOutput {
        value: value / norm,
        grad,
    })
}

/// Per-anchor focal loss of predicting background, used to rank negatives.
pub fn background_loss(pred: &PredictionTensor, cfg: &LossConfig) -> Vec<f64> {
    (0..pred.anchors())
        .map(|a| focal(softmax(pred.class_logits(a))[0].max(f64::MIN_POSITIVE), cfg))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// The seeded sample stored in the targets.
    Static,
    /// The highest-loss candidates under the current predictions.
    #[default]
    Hardest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionLoss {
    pub classification: f64,
    pub orientation: f64,
    pub regression: f64,
    pub total: f64,
    pub grad: Vec<f64>,
}

/// `classification + orientation + regression_weight * regression`.
pub fn detection_loss(
    pred: &PredictionTensor,
    targets: &TargetTensor,
    sampling: NegativeSampling,
    cfg: &LossConfig,
) -> Result<DetectionLoss> {
    let negatives = match sampling {
        NegativeSampling::Static => targets.sampled_negative_mask.clone(),
        NegativeSampling::Hardest => hardest_negatives(targets, &background_loss(pred, cfg)),
    };
    let cls = classification_loss(pred, targets, &negatives, cfg)?;
    let ori = orientation_loss(pred, targets, cfg)?;
    let reg = regression_loss(pred, targets)?;
    let w = cfg.regression_weight;
    let grad = cls
        .grad
        .iter()
        .zip(&ori.grad)
        .zip(&reg.grad)
        .map(|((c, o), r)| c + o + w * r)
        .collect();
    Ok(DetectionLoss {
        classification: cls.value,
        orientation: ori.value,
        regression: reg.value,
        total: cls.value + ori.value + w * reg.value,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn focal_values() {
        assert_eq!(focal_loss(1.0, &cfg()).unwrap(), 0.0);
        let v = focal_loss(0.9, &cfg()).unwrap();
        assert!((v - 2.634e-4).abs() < 5e-8, "{v}");
        assert!(focal_loss(0.0, &cfg()).is_err());
        assert!(focal_loss(-0.1, &cfg()).is_err());
    }

    #[test]
    fn reduces_to_cross_entropy() {
        let ce = LossConfig {
            alpha: 1.0,
            gamma: 0.0,
            ..cfg()
        };
        for p in [1e-6, 0.01, 0.3, 0.5, 0.99, 1.0] {
            let v: f64 = focal_loss(p, &ce).unwrap();
            assert!((v - -p.ln()).abs() <= 1e-12);
        }
    }

    #[test]
    fn decreasing_in_pt() {
        let mut prev = f64::INFINITY;
        for i in 1..=100 {
            let v = focal_loss(i as f64 / 100.0, &cfg()).unwrap();
            assert!(v < prev || v == 0.0);
            prev = v;
        }
    }

    #[test]
    fn softmax_focal_matches_scalar_path() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        let (v, _) = softmax_focal(&logits, 1, &cfg());
        let p = softmax(&logits);
        assert!((v - focal_loss(p[1], &cfg()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn softmax_focal_gradient() {
        let logits = [0.3, -1.2, 2.0, 0.0];
        for c in [
            cfg(),
            LossConfig { gamma: 0.5, ..cfg() },
            LossConfig { gamma: 0.0, ..cfg() },
        ] {
            let (_, g) = softmax_focal(&logits, 1, &c);
            for j in 0..4 {
                let h = 1e-5;
                let mut up = logits;
                up[j] += h;
                let mut dn = logits;
                dn[j] -= h;
                let fd = (softmax_focal(&up, 1, &c).0 - softmax_focal(&dn, 1, &c).0) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6 * fd.abs().max(1e-3), "{j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn config_bounds() {
        assert!(LossConfig { alpha: 0.0, ..cfg() }.validate().is_err());
        assert!(LossConfig { gamma: -1.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
