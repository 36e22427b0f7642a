//! Field declarations, typed values and record coercion.
//!
//! A [`Schema`] is an ordered list of [`FieldSpec`]s. The declaration order is
//! the "database order" used by the importance reports and by every file
//! format in this crate.

use std::fmt;

/// Measurement kind of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Continuous,
    Categorical,
}

/// What a field is used for.
///
/// Active fields define clusters; supplementary fields are carried along for
/// profiling only; the identifier names the customer and takes part in
/// neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldRole {
    Identifier,
    Active,
    Supplementary,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Continuous => "continuous",
            FieldKind::Categorical => "categorical",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "continuous" => Some(FieldKind::Continuous),
            "categorical" => Some(FieldKind::Categorical),
            _ => None,
        }
    }
}

impl FieldRole {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldRole::Identifier => "identifier",
            FieldRole::Active => "active",
            FieldRole::Supplementary => "supplementary",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "identifier" => Some(FieldRole::Identifier),
            "active" => Some(FieldRole::Active),
            "supplementary" => Some(FieldRole::Supplementary),
            _ => None,
        }
    }
}

/// Declaration of a single variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub role: FieldRole,
    /// Relative weight in record similarity. Only meaningful for active fields.
    pub weight: f64,
    /// Base similarity scale in field units. Continuous fields only; when
    /// `None` the engine derives one from the data.
    pub similarity_scale: Option<f64>,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, kind: FieldKind, role: FieldRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
            weight: 1.0,
            similarity_scale: None,
        }
    }

    pub fn identifier(name: impl Into<String>) -> Self {
        Self::new(name, FieldKind::Categorical, FieldRole::Identifier)
    }

    pub fn active(name: impl Into<String>, kind: FieldKind) -> Self {
        Self::new(name, kind, FieldRole::Active)
    }

    pub fn supplementary(name: impl Into<String>, kind: FieldKind) -> Self {
        Self::new(name, kind, FieldRole::Supplementary)
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.similarity_scale = Some(scale);
        self
    }

    pub fn is_active(&self) -> bool {
        self.role == FieldRole::Active
    }

    /// Active and supplementary fields: everything that is profiled.
    pub fn is_profiled(&self) -> bool {
        self.role != FieldRole::Identifier
    }
}

/// A schema rule that does not hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending field, or `None` for schema-wide rules.
    pub field: Option<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(name) => write!(f, "{name}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid schema: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct SchemaError {
    pub violations: Vec<Violation>,
}

/// Ordered field declarations.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    fields: Vec<FieldSpec>,
}

impl Schema {
    /// Builds a schema, rejecting it when [`validate_schema`] reports anything.
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self, SchemaError> {
        let schema = Self { fields };
        let violations = validate_schema(&schema);
        if violations.is_empty() {
            Ok(schema)
        } else {
            Err(SchemaError { violations })
        }
    }

    /// Builds a schema without validating it. Useful for inspecting bad input.
    pub fn unchecked(fields: Vec<FieldSpec>) -> Self {
        Self { fields }
    }

    /// The four-variable layout used in the retail study, with a leading
    /// `customer_id` identifier.
    pub fn retail() -> Self {
        Self::new(vec![
            FieldSpec::identifier("customer_id"),
            FieldSpec::active("recency", FieldKind::Continuous),
            FieldSpec::active("total_profit", FieldKind::Continuous),
            FieldSpec::active("total_revenue", FieldKind::Continuous),
            FieldSpec::supplementary("top_revenue_department", FieldKind::Categorical),
        ])
        .expect("retail schema is valid")
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, index: usize) -> &FieldSpec {
        &self.fields[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Position of the identifier field. Panics on an unvalidated schema
    /// without one.
    pub fn identifier_index(&self) -> usize {
        self.fields
            .iter()
            .position(|f| f.role == FieldRole::Identifier)
            .expect("schema has an identifier field")
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.fields
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_active())
            .map(|(i, _)| i)
    }

    /// Active and supplementary field positions, in declaration order.
    pub fn profiled_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.fields
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_profiled())
            .map(|(i, _)| i)
    }
}

/// Checks every schema and field rule, reporting violations in field order
/// followed by schema-wide violations.
pub fn validate_schema(schema: &Schema) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for field in &schema.fields {
        let mut push = |reason: String| {
            violations.push(Violation {
                field: Some(field.name.clone()),
                reason,
            })
        };
        if field.name.trim().is_empty() {
            push("empty field name".into());
        }
        if !seen.insert(field.name.as_str()) {
            push("duplicate field name".into());
        }
        if field.role == FieldRole::Active && !(field.weight.is_finite() && field.weight > 0.0) {
            push(format!("active weight must be > 0, got {}", field.weight));
        }
        if let Some(scale) = field.similarity_scale {
            if field.kind != FieldKind::Continuous {
                push("similarity scale given for a categorical field".into());
            } else if !(scale.is_finite() && scale > 0.0) {
                push(format!("similarity scale must be > 0, got {scale}"));
            }
        }
    }
    let identifiers = schema
        .fields
        .iter()
        .filter(|f| f.role == FieldRole::Identifier)
        .count();
    if identifiers == 0 {
        violations.push(Violation {
            field: None,
            reason: "no identifier field".into(),
        });
    } else if identifiers > 1 {
        violations.push(Violation {
            field: None,
            reason: "multiple identifiers".into(),
        });
    }
    if !schema.fields.iter().any(FieldSpec::is_active) {
        violations.push(Violation {
            field: None,
            reason: "no active fields".into(),
        });
    }
    violations
}

/// A single typed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Always finite.
    Number(f64),
    Category(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(s) => Some(s),
            _ => None,
        }
    }
}

/// One customer row, positionally aligned with its schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub id: String,
    pub values: Vec<Value>,
}

impl Record {
    pub fn value(&self, index: usize) -> &Value {
        &self.values[index]
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum CoerceError {
    #[error("field {field}: cannot parse {token:?} as a number")]
    UnparseableNumber { field: String, token: String },
    #[error("empty identifier")]
    EmptyIdentifier,
    #[error("expected {expected} values, found {found}")]
    ArityMismatch { expected: usize, found: usize },
}

/// Parses one raw row against `schema`.
///
/// Continuous cells are decimal reals with a period separator; an empty cell
/// becomes [`Value::Missing`]. Categorical cells are trimmed and kept verbatim.
pub fn coerce_record<S: AsRef<str>>(raw: &[S], schema: &Schema) -> Result<Record, CoerceError> {
    if raw.len() != schema.len() {
        return Err(CoerceError::ArityMismatch {
            expected: schema.len(),
            found: raw.len(),
        });
    }
    let mut id = None;
    let mut values = Vec::with_capacity(raw.len());
    for (field, cell) in schema.fields().iter().zip(raw) {
        let token = cell.as_ref().trim();
        let value = if field.role == FieldRole::Identifier {
            if token.is_empty() {
                return Err(CoerceError::EmptyIdentifier);
            }
            id = Some(token.to_string());
            Value::Category(token.to_string())
        } else if token.is_empty() {
            Value::Missing
        } else {
            match field.kind {
                FieldKind::Categorical => Value::Category(token.to_string()),
                FieldKind::Continuous => Value::Number(parse_decimal(token).ok_or_else(|| {
                    CoerceError::UnparseableNumber {
                        field: field.name.clone(),
                        token: token.to_string(),
                    }
                })?),
            }
        };
        values.push(value);
    }
    let id = id.ok_or(CoerceError::EmptyIdentifier)?;
    Ok(Record { id, values })
}

/// Finite decimal with an optional sign and exponent. Rejects `inf`, `nan`
/// and comma separators that `f64::from_str` would otherwise accept or
/// misread.
fn parse_decimal(token: &str) -> Option<f64> {
    let ok = token
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if !ok || !token.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    token.parse::<f64>().ok().filter(|x| x.is_finite())
}
