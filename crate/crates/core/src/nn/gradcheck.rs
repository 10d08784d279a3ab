use super::model::{ClassifierModel, Params};
use crate::error::{Error, Result};
use crate::simmat::{PairFeatures, SimilarityMatrix};
use crate::types::RelationshipLabel;

/// Gradients smaller than this are compared in absolute rather than relative
/// terms; central differences cannot resolve them any better.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter (tensor name, flat index) with the worst error.
    pub worst: Option<(&'static str, usize)>,
    pub checked: usize,
    /// Parameters whose perturbation flipped a ReLU gate or a pooling winner;
    /// the loss is not differentiable across those points.
    pub skipped: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compare backpropagated gradients against central finite differences of the
/// cross-entropy loss, parameter by parameter, with dropout off.
pub fn gradient_check(
    model: &ClassifierModel,
    matrix: &SimilarityMatrix,
    pair: &PairFeatures,
    target: RelationshipLabel,
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let t = model
        .class_index(target)
        .ok_or_else(|| Error::Config(format!("label {target} is not a model class")))?;
    let analytic = model.gradients(matrix, pair, target)?;
    let base_pattern = model.forward_cached(matrix, pair, None)?.pattern();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for (ti, name) in Params::NAMES.iter().enumerate() {
        let n = analytic.tensors()[ti].len();
        for i in 0..n {
            let original = probe.params.tensors()[ti].data[i];
            let eval = |value: f64, probe: &mut ClassifierModel| -> Result<(f64, bool)> {
                probe.params.tensors_mut()[ti].data[i] = value;
                let acts = probe.forward_cached(matrix, pair, None)?;
                let same = acts.pattern() == base_pattern;
                Ok((ClassifierModel::loss(&acts, t, 1.0), same))
            };
            let (plus, same_plus) = eval(original + eps, &mut probe)?;
            let (minus, same_minus) = eval(original - eps, &mut probe)?;
            probe.params.tensors_mut()[ti].data[i] = original;
            if !(same_plus && same_minus) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic.tensors()[ti].data[i], numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((name, i));
            }
        }
    }
    Ok(report)
}
