//! Value, field and record similarity, and the pairwise vote behind the
//! Condorcet criterion.
//!
//! Continuous fields use the Cauchy kernel `τ² / (τ² + d²)`, which is 1 at
//! distance zero, exactly 0.5 at `d = τ` and strictly decreasing in `d`.
//! Categorical fields match on exact string equality.

use std::collections::BTreeMap;

use crate::schema::{FieldKind, FieldSpec, Record, Schema, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimilarityError {
    #[error("field {field}: value kind does not match a {expected} field")]
    KindMismatch { field: String, expected: &'static str },
    #[error("field {0}: similarity scale must be positive and finite")]
    BadScale(String),
    #[error("continuous active field {0} has no similarity scale")]
    MissingScale(String),
}

/// Accuracy plus the effective per-field scale of every continuous field.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityParams {
    accuracy: f64,
    /// Indexed by schema position; `None` for categorical and identifier
    /// fields.
    scales: Vec<Option<f64>>,
}

impl SimilarityParams {
    /// Derives effective scales from base scales via [`effective_scale`].
    pub fn from_base_scales(
        schema: &Schema,
        accuracy: f64,
        base: &[Option<f64>],
    ) -> Result<Self, SimilarityError> {
        let scales = base
            .iter()
            .map(|b| b.map(|s| effective_scale(s, accuracy)))
            .collect();
        Self::from_effective_scales(schema, accuracy, scales)
    }

    /// Uses already-effective scales verbatim, e.g. when reloading a model.
    pub fn from_effective_scales(
        schema: &Schema,
        accuracy: f64,
        scales: Vec<Option<f64>>,
    ) -> Result<Self, SimilarityError> {
        assert_eq!(scales.len(), schema.len(), "one scale slot per field");
        for (field, scale) in schema.fields().iter().zip(&scales) {
            match scale {
                Some(s) if !(s.is_finite() && *s > 0.0) => {
                    return Err(SimilarityError::BadScale(field.name.clone()))
                }
                None if field.is_active() && field.kind == FieldKind::Continuous => {
                    return Err(SimilarityError::MissingScale(field.name.clone()))
                }
                _ => {}
            }
        }
        Ok(Self { accuracy, scales })
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// Effective scale of the field at `index`, if it is continuous.
    pub fn scale(&self, index: usize) -> Option<f64> {
        self.scales.get(index).copied().flatten()
    }

    pub fn scales(&self) -> &[Option<f64>] {
        &self.scales
    }

    /// Field name → effective scale.
    pub fn effective_scales(&self, schema: &Schema) -> BTreeMap<String, f64> {
        schema
            .fields()
            .iter()
            .zip(&self.scales)
            .filter_map(|(f, s)| s.map(|s| (f.name.clone(), s)))
            .collect()
    }

    /// Similarity of two values of the field at `index`.
    pub fn field_similarity(
        &self,
        schema: &Schema,
        index: usize,
        a: &Value,
        b: &Value,
    ) -> Result<Option<f64>, SimilarityError> {
        field_similarity(schema.field(index), a, b, self.scale(index).unwrap_or(1.0))
    }
}

/// Maps a base scale through the accuracy setting. Accuracy 0.5 is neutral;
/// higher accuracy shrinks the scale (stricter matching).
pub fn effective_scale(base_scale: f64, accuracy: f64) -> f64 {
    base_scale * (1.0 - accuracy) / accuracy
}

/// `τ² / (τ² + d²)` for a non-negative distance `d`.
#[inline]
pub fn continuous_kernel(distance: f64, scale: f64) -> f64 {
    let r = distance / scale;
    1.0 / (1.0 + r * r)
}

/// Similarity in `[0, 1]` of two values of one field, or `None` when either
/// value is missing. `scale` is the effective scale and is ignored for
/// categorical fields.
pub fn field_similarity(
    spec: &FieldSpec,
    a: &Value,
    b: &Value,
    scale: f64,
) -> Result<Option<f64>, SimilarityError> {
    let mismatch = || SimilarityError::KindMismatch {
        field: spec.name.clone(),
        expected: spec.kind.as_str(),
    };
    match (spec.kind, a, b) {
        (_, Value::Missing, Value::Missing) => Ok(None),
        (FieldKind::Continuous, Value::Number(_), Value::Missing)
        | (FieldKind::Continuous, Value::Missing, Value::Number(_))
        | (FieldKind::Categorical, Value::Category(_), Value::Missing)
        | (FieldKind::Categorical, Value::Missing, Value::Category(_)) => Ok(None),
        (FieldKind::Continuous, Value::Number(x), Value::Number(y)) => {
            Ok(Some(continuous_kernel((x - y).abs(), scale)))
        }
        (FieldKind::Categorical, Value::Category(x), Value::Category(y)) => {
            Ok(Some(if x == y { 1.0 } else { 0.0 }))
        }
        _ => Err(mismatch()),
    }
}

/// Weighted mean of field similarities over the active fields both records
/// can be compared on. Returns 0.5 when no active field is comparable.
pub fn record_similarity(r1: &Record, r2: &Record, schema: &Schema, params: &SimilarityParams) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, field) in schema.fields().iter().enumerate() {
        if !field.is_active() {
            continue;
        }
        let scale = params.scale(i).unwrap_or(1.0);
        if let Ok(Some(s)) = field_similarity(field, &r1.values[i], &r2.values[i], scale) {
            num += field.weight * s;
            den += field.weight;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.5
    }
}

/// Similar-minus-dissimilar vote: `2s - 1`.
#[inline]
pub fn vote(similarity: f64) -> f64 {
    2.0 * similarity - 1.0
}
