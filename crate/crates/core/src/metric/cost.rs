//! Feature and total cost matrices over normalized penultimate activations.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which component a cost matrix carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostComponent {
    Feature,
    Label,
    Total,
}

/// Per-pair costs for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub class: usize,
    pub values: Array2<f64>,
    pub component: CostComponent,
}

/// Feature-cost variant: `1 - cos` (canonical) or the chord distance on the
/// unit sphere `sqrt(2 (1 - cos))`. Both are bounded by [0,2].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCostKind {
    OneMinusCos,
    SphericalDistance,
}

impl Default for FeatureCostKind {
    fn default() -> Self {
        FeatureCostKind::OneMinusCos
    }
}

/// Scale every row to unit l2 norm.
pub fn l2_normalize(h: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = h.clone();
    for (row, mut r) in out.rows_mut().into_iter().enumerate() {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormRow { row });
        }
        r.mapv_inplace(|v| v / norm);
    }
    Ok(out)
}

/// Turn a cross-client cosine Gram matrix into a feature-cost matrix.
pub(crate) fn feature_cost_from_gram(
    gram: &Array2<f64>,
    kind: FeatureCostKind,
    class: usize,
) -> CostMatrix {
    let values = gram.mapv(|g| {
        let cos = g.clamp(-1.0, 1.0);
        match kind {
            FeatureCostKind::OneMinusCos => 1.0 - cos,
            FeatureCostKind::SphericalDistance => (2.0 * (1.0 - cos)).sqrt(),
        }
    });
    CostMatrix { class, values, component: CostComponent::Feature }
}

/// Pairwise cosine dissimilarities between l2-normalized rows of the two
/// activation blocks for one class.
pub fn feature_cost(
    h_a: &Array2<f64>,
    h_b: &Array2<f64>,
    kind: FeatureCostKind,
    class: usize,
) -> Result<CostMatrix> {
    if h_a.nrows() == 0 || h_b.nrows() == 0 {
        return Err(Error::InvalidInput("feature cost needs nonempty blocks".into()));
    }
    if h_a.ncols() != h_b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "activation dims {} vs {}",
            h_a.ncols(),
            h_b.ncols()
        )));
    }
    let an = l2_normalize(h_a)?;
    let bn = l2_normalize(h_b)?;
    let gram = an.dot(&bn.t());
    Ok(feature_cost_from_gram(&gram, kind, class))
}

/// Weighted total cost `w_f * C_feat[i,j] + w_l * h`, with the label term
/// constant across the class.
pub fn total_cost(c_feat: &CostMatrix, h: f64, w_f: f64, w_l: f64) -> Result<CostMatrix> {
    if c_feat.component != CostComponent::Feature {
        return Err(Error::InvalidInput("total_cost expects a feature cost matrix".into()));
    }
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::InvalidInput(format!(
            "label cost must lie in [0,1], got {h}"
        )));
    }
    if w_f <= 0.0 || w_l <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "cost weights must be positive, got w_f={w_f}, w_l={w_l}"
        )));
    }
    Ok(CostMatrix {
        class: c_feat.class,
        values: c_feat.values.mapv(|c| w_f * c + w_l * h),
        component: CostComponent::Total,
    })
}
