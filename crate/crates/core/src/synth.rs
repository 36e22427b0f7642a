//! Seeded retail-like data with planted segments, and recovery scoring.
//!
//! A [`SynthSpec`] lists output fields and segments. Each segment draws
//! continuous fields from a normal distribution (optionally clipped at zero)
//! and categorical fields from a weighted table. Specs are TOML:
//!
//! ```toml
//! n_records = 100
//! seed = 1
//!
//! [[fields]]
//! name = "spend"
//! kind = "continuous"
//! clip_at_zero = true
//!
//! [[segments]]
//! name = "a"
//! proportion = 1.0
//! continuous = { spend = { mean = 10.0, sd = 2.0 } }
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::Deserialize;

use crate::analysis::{adjusted_rand_index_slices, AnalysisError};
use crate::engine::Assignment;
use crate::schema::{FieldKind, FieldRole, FieldSpec, Schema, SchemaError};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("segment proportions sum to {0}, expected 1")]
    ProportionSum(f64),
    #[error("segment {segment}: proportion {value} is outside (0, 1]")]
    Proportion { segment: String, value: f64 },
    #[error("segment {segment}: field {field}: sd must be positive")]
    Sd { segment: String, field: String },
    #[error("segment {segment}: field {field}: weights must be non-negative and not all zero")]
    Weights { segment: String, field: String },
    #[error("segment {segment}: no distribution for field {field}")]
    MissingField { segment: String, field: String },
    #[error("segment {segment}: unknown field {field}")]
    UnknownField { segment: String, field: String },
    #[error("n_records ({n}) is smaller than the number of segments ({segments})")]
    TooFewRecords { n: usize, segments: usize },
    #[error("no segments")]
    NoSegments,
    #[error("field {field}: unknown role {role:?}")]
    Role { field: String, role: String },
    #[error("unknown builtin spec {0:?}")]
    UnknownBuiltin(String),
    #[error("{0}")]
    Schema(#[from] SchemaError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthField {
    pub name: String,
    pub kind: SynthKind,
    /// Role in the schema returned by [`SynthSpec::schema`].
    #[serde(default = "default_role")]
    pub role: String,
    /// Monetary and count fields cannot go negative.
    #[serde(default)]
    pub clip_at_zero: bool,
}

fn default_role() -> String {
    "active".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub name: String,
    pub proportion: f64,
    #[serde(default)]
    pub continuous: BTreeMap<String, NormalSpec>,
    /// Category → weight.
    #[serde(default)]
    pub categorical: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_records: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_id_field")]
    pub id_field: String,
    pub fields: Vec<SynthField>,
    pub segments: Vec<SegmentSpec>,
}

fn default_id_field() -> String {
    "customer_id".into()
}

pub const TABLE1_LIKE: &str = include_str!("../configs/table1-like.toml");
pub const PLANTED_4: &str = include_str!("../configs/planted-4.toml");

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, SynthError> {
        let text = fs::read_to_string(path).map_err(|source| SynthError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    /// Bundled specs by name: `table1-like` and `planted-4`.
    pub fn builtin(name: &str) -> Result<Self, SynthError> {
        match name {
            "table1-like" => Self::from_toml(TABLE1_LIKE),
            "planted-4" => Self::from_toml(PLANTED_4),
            _ => Err(SynthError::UnknownBuiltin(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.segments.is_empty() {
            return Err(SynthError::NoSegments);
        }
        if self.n_records < self.segments.len() {
            return Err(SynthError::TooFewRecords { n: self.n_records, segments: self.segments.len() });
        }
        let total: f64 = self.segments.iter().map(|s| s.proportion).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SynthError::ProportionSum(total));
        }
        for seg in &self.segments {
            if !(seg.proportion > 0.0 && seg.proportion <= 1.0) {
                return Err(SynthError::Proportion { segment: seg.name.clone(), value: seg.proportion });
            }
            let err = |field: &str| (seg.name.clone(), field.to_string());
            for f in &self.fields {
                let present = match f.kind {
                    SynthKind::Continuous => seg.continuous.contains_key(&f.name),
                    SynthKind::Categorical => seg.categorical.contains_key(&f.name),
                };
                if !present {
                    let (segment, field) = err(&f.name);
                    return Err(SynthError::MissingField { segment, field });
                }
            }
            let known = |name: &str, kind| self.fields.iter().any(|f| f.name == name && f.kind == kind);
            for (name, n) in &seg.continuous {
                if !known(name, SynthKind::Continuous) {
                    let (segment, field) = err(name);
                    return Err(SynthError::UnknownField { segment, field });
                }
                if !(n.sd > 0.0 && n.sd.is_finite() && n.mean.is_finite()) {
                    let (segment, field) = err(name);
                    return Err(SynthError::Sd { segment, field });
                }
            }
            for (name, weights) in &seg.categorical {
                if !known(name, SynthKind::Categorical) {
                    let (segment, field) = err(name);
                    return Err(SynthError::UnknownField { segment, field });
                }
                let ok = weights.values().all(|w| *w >= 0.0 && w.is_finite()) && weights.values().any(|w| *w > 0.0);
                if !ok {
                    let (segment, field) = err(name);
                    return Err(SynthError::Weights { segment, field });
                }
            }
        }
        self.schema()?;
        Ok(())
    }

    /// Identifier plus the spec's fields with their declared roles.
    pub fn schema(&self) -> Result<Schema, SynthError> {
        let mut fields = vec![FieldSpec::identifier(self.id_field.clone())];
        for f in &self.fields {
            let kind = match f.kind {
                SynthKind::Continuous => FieldKind::Continuous,
                SynthKind::Categorical => FieldKind::Categorical,
            };
            let role = FieldRole::parse(&f.role)
                .ok_or_else(|| SynthError::Role { field: f.name.clone(), role: f.role.clone() })?;
            fields.push(FieldSpec::new(f.name.clone(), kind, role));
        }
        Ok(Schema::new(fields)?)
    }

    /// Records per segment by the largest-remainder rule.
    pub fn segment_sizes(&self) -> Vec<usize> {
        largest_remainder(self.n_records, &self.segments.iter().map(|s| s.proportion).collect::<Vec<_>>())
    }
}

/// Floors `n · p_i`, then hands the leftover units to the largest fractional
/// parts, lower index first on ties.
pub fn largest_remainder(n: usize, proportions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Generated table plus the planted segment of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// `(id, segment name)` in row order.
    pub truth: Vec<(String, String)>,
}

impl SynthData {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn truth_csv(&self) -> String {
        let mut out = String::from("id,segment\n");
        for (id, seg) in &self.truth {
            let _ = writeln!(out, "{id},{seg}");
        }
        out
    }

    /// Writes `data.csv` and `truth.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |path: PathBuf| move |source| SynthError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.into()))?;
        let data = dir.join("data.csv");
        fs::write(&data, self.to_csv()).map_err(io(data.clone()))?;
        let truth = dir.join("truth.csv");
        fs::write(&truth, self.truth_csv()).map_err(io(truth.clone()))?;
        Ok(())
    }
}

/// Draws the dataset. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<usize> = spec
        .segment_sizes()
        .into_iter()
        .enumerate()
        .flat_map(|(seg, n)| std::iter::repeat_n(seg, n))
        .collect();
    labels.shuffle(&mut rng);

    enum Draw {
        Normal(Normal<f64>, bool),
        Weighted(WeightedIndex<f64>, Vec<String>),
    }
    let samplers: Vec<Vec<Draw>> = spec
        .segments
        .iter()
        .map(|seg| {
            spec.fields
                .iter()
                .map(|f| match f.kind {
                    SynthKind::Continuous => {
                        let n = seg.continuous[&f.name];
                        Draw::Normal(Normal::new(n.mean, n.sd).expect("validated sd"), f.clip_at_zero)
                    }
                    SynthKind::Categorical => {
                        let table = &seg.categorical[&f.name];
                        let cats = table.keys().cloned().collect();
                        Draw::Weighted(WeightedIndex::new(table.values().copied()).expect("validated weights"), cats)
                    }
                })
                .collect()
        })
        .collect();

    let mut header = vec![spec.id_field.clone()];
    header.extend(spec.fields.iter().map(|f| f.name.clone()));
    let mut rows = Vec::with_capacity(labels.len());
    let mut truth = Vec::with_capacity(labels.len());
    for (i, &seg) in labels.iter().enumerate() {
        let id = format!("S{:06}", i + 1);
        let mut row = vec![id.clone()];
        for draw in &samplers[seg] {
            row.push(match draw {
                Draw::Normal(d, clip) => {
                    let x = d.sample(&mut rng);
                    let x = if *clip { x.max(0.0) } else { x };
                    // Avoid "-0.00".
                    let s = format!("{x:.2}");
                    if s == "-0.00" { "0.00".to_string() } else { s }
                }
                Draw::Weighted(d, cats) => cats[d.sample(&mut rng)].clone(),
            });
        }
        rows.push(row);
        truth.push((id, spec.segments[seg].name.clone()));
    }
    Ok(SynthData { header, rows, truth })
}

/// Parses `truth.csv` text.
pub fn parse_truth(text: &str) -> Result<Vec<(String, String)>, csv::Error> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.records()
        .map(|r| r.map(|r| (r.get(0).unwrap_or("").to_string(), r.get(1).unwrap_or("").to_string())))
        .collect()
}

/// Cluster × segment counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub clusters: Vec<usize>,
    pub segments: Vec<String>,
    /// `counts[cluster][segment]`.
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        (0..self.segments.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:>8}", "cluster");
        for s in &self.segments {
            let _ = write!(out, " {s:>10}");
        }
        out.push('\n');
        for (c, row) in self.clusters.iter().zip(&self.counts) {
            let _ = write!(out, "{c:>8}");
            for n in row {
                let _ = write!(out, " {n:>10}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ari: f64,
    pub non_empty_clusters: usize,
    pub confusion: Confusion,
}

/// Compares assignments to planted segments; both must cover the same ids.
pub fn evaluate(assignments: &[Assignment], truth: &[(String, String)]) -> Result<Evaluation, SynthError> {
    let segment_of: HashMap<&str, &str> = truth.iter().map(|(i, s)| (i.as_str(), s.as_str())).collect();
    let ids: BTreeSet<&str> = assignments.iter().map(|a| a.record_id.as_str()).collect();
    if ids.len() != assignments.len() || ids.len() != segment_of.len() || ids.iter().any(|i| !segment_of.contains_key(i)) {
        return Err(AnalysisError::RecordSetMismatch.into());
    }
    let clusters: Vec<usize> = assignments.iter().map(|a| a.cluster_id).collect();
    let segs: Vec<&str> = assignments.iter().map(|a| segment_of[a.record_id.as_str()]).collect();
    let ari = adjusted_rand_index_slices(&clusters, &segs)?;

    let cluster_ids: Vec<usize> = clusters.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let segment_names: Vec<String> = segs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut counts = vec![vec![0; segment_names.len()]; cluster_ids.len()];
    for (c, s) in clusters.iter().zip(&segs) {
        let i = cluster_ids.binary_search(c).expect("collected");
        let j = segment_names.binary_search_by(|n| n.as_str().cmp(s)).expect("collected");
        counts[i][j] += 1;
    }
    Ok(Evaluation {
        ari,
        non_empty_clusters: cluster_ids.len(),
        confusion: Confusion { clusters: cluster_ids, segments: segment_names, counts },
    })
}
