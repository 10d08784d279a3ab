use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ClassifierModel;
use crate::types::{PairExample, RelationshipLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub ground_truth: RelationshipLabel,
    pub left_id: String,
    pub right_id: String,
    pub confidence: f64,
}

/// The `top_k` pairs with the highest OVERLAPS probability, most confident
/// first. Equal confidences keep input order.
pub fn surface_overlaps(model: &ClassifierModel, pairs: &[PairExample], top_k: usize) -> Result<Vec<OverlapRow>> {
    let idx = model.class_index(RelationshipLabel::Overlaps).ok_or_else(|| {
        Error::Config("the model was not trained with an OVERLAPS class".into())
    })?;
    let mut rows = Vec::with_capacity(pairs.len());
    for p in pairs {
        let probs = model.forward(&p.matrix, &p.features, None)?;
        rows.push(OverlapRow {
            ground_truth: p.label,
            left_id: p.left_id.clone(),
            right_id: p.right_id.clone(),
            confidence: probs[idx],
        });
    }
    rows.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    rows.truncate(top_k);
    Ok(rows)
}

pub const OVERLAP_HEADER: [&str; 4] = ["ground_truth", "left", "right", "confidence"];

pub fn render_overlaps(rows: &[OverlapRow]) -> String {
    crate::tsv::render(
        &OVERLAP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.ground_truth.to_string(),
                r.left_id.clone(),
                r.right_id.clone(),
                format!("{:.6}", r.confidence),
            ]
        }),
    )
}
