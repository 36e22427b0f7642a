//! Demographic clustering: multi-pass greedy maximisation of the Condorcet
//! criterion.
//!
//! Pass 1 reads records in input order. The first record founds cluster 0;
//! every later record either founds a new cluster (when its best mean
//! similarity falls below the threshold and capacity remains) or joins the
//! cluster with the largest vote sum. Later passes take each record out of
//! its cluster and put it back where the vote sum is largest. Moving a
//! record changes the global criterion by exactly the difference of the two
//! vote sums (divided by the pair count), so refinement never lowers it.
//!
//! Clusters keep per-field histograms and frequency tables. In
//! [`Mode::Histogram`] these are what records are scored against; in
//! [`Mode::Exact`] every member is compared individually.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::params::{Mode, ParamsError, RunParams};
use crate::schema::{validate_schema, FieldKind, Record, Schema, SchemaError, Value};
use crate::similarity::{
    continuous_kernel, record_similarity, vote, SimilarityError, SimilarityParams,
};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("record {id} has {found} values, schema has {expected}")]
    RecordShape { id: String, found: usize, expected: usize },
    #[error("record {0}: an active value is missing")]
    MissingActive(String),
}

/// Non-fatal conditions noticed while initialising a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineWarning {
    /// A continuous field has zero variance; its base scale fell back to 1.0.
    DegenerateField(String),
}

impl std::fmt::Display for EngineWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineWarning::DegenerateField(name) => {
                write!(f, "field {name} has zero variance; base scale set to 1.0")
            }
        }
    }
}

/// Equal-width bins over `[lo, hi]` plus an underflow slot (0) and an
/// overflow slot (`bins + 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramEdges {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramEdges {
    /// Edges spanning an observed range. A zero-width range is widened to
    /// one unit, placed so the constant value is a bin midpoint.
    pub fn spanning(min: f64, max: f64, bins: usize) -> Self {
        if max > min {
            Self { lo: min, hi: max, bins }
        } else {
            let width = 1.0 / bins as f64;
            let lo = min - ((bins / 2) as f64 + 0.5) * width;
            Self { lo, hi: lo + 1.0, bins }
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Total number of slots including the two overflow slots.
    pub fn slots(&self) -> usize {
        self.bins + 2
    }

    pub fn slot(&self, x: f64) -> usize {
        if x < self.lo {
            0
        } else if x > self.hi {
            self.bins + 1
        } else {
            let k = ((x - self.lo) / self.width()) as usize;
            k.min(self.bins - 1) + 1
        }
    }

    /// Value standing in for every member of a slot: the bin midpoint, or
    /// the nearer range end for the overflow slots.
    pub fn representative(&self, slot: usize) -> f64 {
        if slot == 0 {
            self.lo
        } else if slot > self.bins {
            self.hi
        } else {
            self.lo + (slot as f64 - 0.5) * self.width()
        }
    }

    /// The `bins + 1` regular bin edges.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|k| {
                if k == self.bins {
                    self.hi
                } else {
                    self.lo + k as f64 * self.width()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousStats {
    pub edges: HistogramEdges,
    /// One count per slot, see [`HistogramEdges::slots`].
    pub counts: Vec<u64>,
    /// Non-missing values.
    pub count: u64,
    pub missing: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ContinuousStats {
    pub fn new(edges: HistogramEdges) -> Self {
        Self {
            edges,
            counts: vec![0; edges.slots()],
            count: 0,
            missing: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    fn add(&mut self, value: &Value) {
        match value.as_number() {
            Some(x) => {
                self.counts[self.edges.slot(x)] += 1;
                self.count += 1;
                self.sum += x;
                self.sum_sq += x * x;
            }
            None => self.missing += 1,
        }
    }

    fn remove(&mut self, value: &Value) {
        match value.as_number() {
            Some(x) => {
                self.counts[self.edges.slot(x)] -= 1;
                self.count -= 1;
                self.sum -= x;
                self.sum_sq -= x * x;
            }
            None => self.missing -= 1,
        }
    }

    /// Expected kernel similarity of `x` to a value drawn from this
    /// distribution, optionally with one copy of `x` itself taken out.
    fn expected_similarity(&self, x: f64, scale: f64, exclude_self: bool) -> Option<f64> {
        let mut total = 0.0;
        for (slot, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                let rep = self.edges.representative(slot);
                total += c as f64 * continuous_kernel((x - rep).abs(), scale);
            }
        }
        let mut count = self.count as f64;
        if exclude_self {
            let rep = self.edges.representative(self.edges.slot(x));
            total -= continuous_kernel((x - rep).abs(), scale);
            count -= 1.0;
        }
        (count > 0.0).then(|| (total / count).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoricalStats {
    pub count: u64,
    pub missing: u64,
    pub freq: BTreeMap<String, u64>,
}

impl CategoricalStats {
    fn add(&mut self, value: &Value) {
        match value.as_category() {
            Some(c) => {
                *self.freq.entry(c.to_string()).or_insert(0) += 1;
                self.count += 1;
            }
            None => self.missing += 1,
        }
    }

    fn remove(&mut self, value: &Value) {
        match value.as_category() {
            Some(c) => {
                let slot = self.freq.get_mut(c).expect("removed category was added");
                *slot -= 1;
                if *slot == 0 {
                    self.freq.remove(c);
                }
                self.count -= 1;
            }
            None => self.missing -= 1,
        }
    }

    fn expected_similarity(&self, category: &str, exclude_self: bool) -> Option<f64> {
        let mut hits = self.freq.get(category).copied().unwrap_or(0) as f64;
        let mut count = self.count as f64;
        if exclude_self {
            hits -= 1.0;
            count -= 1.0;
        }
        (count > 0.0).then(|| (hits / count).clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldStats {
    Continuous(ContinuousStats),
    Categorical(CategoricalStats),
}

impl FieldStats {
    fn add(&mut self, value: &Value) {
        match self {
            FieldStats::Continuous(s) => s.add(value),
            FieldStats::Categorical(s) => s.add(value),
        }
    }

    fn remove(&mut self, value: &Value) {
        match self {
            FieldStats::Continuous(s) => s.remove(value),
            FieldStats::Categorical(s) => s.remove(value),
        }
    }

    pub fn count(&self) -> u64 {
        match self {
            FieldStats::Continuous(s) => s.count,
            FieldStats::Categorical(s) => s.count,
        }
    }

    pub fn missing(&self) -> u64 {
        match self {
            FieldStats::Continuous(s) => s.missing,
            FieldStats::Categorical(s) => s.missing,
        }
    }
}

/// Sufficient statistics of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub cluster_id: usize,
    pub size: usize,
    /// Aligned with the schema; `None` at the identifier position.
    pub fields: Vec<Option<FieldStats>>,
    /// Member records, kept in [`Mode::Exact`] only, in input order.
    pub members: Vec<Record>,
}

impl ClusterStats {
    fn empty(cluster_id: usize, template: &[Option<FieldStats>]) -> Self {
        Self {
            cluster_id,
            size: 0,
            fields: template.to_vec(),
            members: Vec::new(),
        }
    }

    fn add(&mut self, record: &Record) {
        self.size += 1;
        for (stats, value) in self.fields.iter_mut().zip(&record.values) {
            if let Some(stats) = stats {
                stats.add(value);
            }
        }
    }

    fn remove(&mut self, record: &Record) {
        self.size -= 1;
        for (stats, value) in self.fields.iter_mut().zip(&record.values) {
            if let Some(stats) = stats {
                stats.remove(value);
            }
        }
    }

    pub fn member_ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|r| r.id.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}


/// A clustering: schema, parameters, similarity scales and cluster stats.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub schema: Schema,
    pub params: RunParams,
    pub similarity: SimilarityParams,
    /// Histogram edges per field, fixed at init; `None` off continuous
    /// profiled fields.
    pub edges: Vec<Option<HistogramEdges>>,
    /// Cluster ids are positions in this list, assigned in creation order.
    pub clusters: Vec<ClusterStats>,
    /// Non-empty cluster ids by size descending, ties by lower id.
    pub display_order: Vec<usize>,
}

impl ClusterModel {
    fn template(&self) -> Vec<Option<FieldStats>> {
        self.schema
            .fields()
            .iter()
            .zip(&self.edges)
            .map(|(field, edges)| {
                if !field.is_profiled() {
                    return None;
                }
                Some(match field.kind {
                    FieldKind::Continuous => FieldStats::Continuous(ContinuousStats::new(
                        edges.expect("continuous field has edges"),
                    )),
                    FieldKind::Categorical => FieldStats::Categorical(CategoricalStats::default()),
                })
            })
            .collect()
    }

    /// A new empty cluster with the next free id.
    pub fn new_cluster(&self) -> ClusterStats {
        ClusterStats::empty(self.clusters.len(), &self.template())
    }

    pub fn non_empty(&self) -> impl Iterator<Item = &ClusterStats> {
        self.clusters.iter().filter(|c| c.size > 0)
    }

    pub fn cluster(&self, id: usize) -> Option<&ClusterStats> {
        self.clusters.get(id)
    }

    /// Replaces the clusters with `n_clusters` clusters built from `labels`
    /// (aligned with `dataset`), keeping the histogram edges.
    pub fn rebuild(&mut self, dataset: &[Record], labels: &[usize], n_clusters: usize) {
        let template = self.template();
        let mut clusters: Vec<ClusterStats> =
            (0..n_clusters).map(|id| ClusterStats::empty(id, &template)).collect();
        for (record, &label) in dataset.iter().zip(labels) {
            clusters[label].add(record);
            if self.params.mode == Mode::Exact {
                clusters[label].members.push(record.clone());
            }
        }
        self.clusters = clusters;
        self.refresh_display_order();
    }

    pub fn refresh_display_order(&mut self) {
        let mut order: Vec<usize> = self.non_empty().map(|c| c.cluster_id).collect();
        order.sort_by_key(|&id| (std::cmp::Reverse(self.clusters[id].size), id));
        self.display_order = order;
    }
}

/// An empty model plus anything worth reporting about the data.
#[derive(Debug, Clone)]
pub struct ModelInit {
    pub model: ClusterModel,
    pub warnings: Vec<EngineWarning>,
}

/// Observed range and population standard deviation of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSummary {
    pub min: f64,
    pub max: f64,
    pub sd: f64,
}

/// Summary of the non-missing numbers at `index`, if there are any.
pub fn summarize_field(dataset: &[Record], index: usize) -> Option<FieldSummary> {
    let xs: Vec<f64> = dataset.iter().filter_map(|r| r.values[index].as_number()).collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Some(FieldSummary { min, max, sd: var.sqrt() })
}

/// Computes ranges, default scales (half the population standard
/// deviation) and histogram edges, and returns a model with no clusters.
pub fn init_model(
    dataset: &[Record],
    schema: &Schema,
    params: &RunParams,
) -> Result<ModelInit, EngineError> {
    if dataset.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    let violations = validate_schema(schema);
    if !violations.is_empty() {
        return Err(SchemaError { violations }.into());
    }
    params.validate()?;
    for record in dataset {
        if record.values.len() != schema.len() {
            return Err(EngineError::RecordShape {
                id: record.id.clone(),
                found: record.values.len(),
                expected: schema.len(),
            });
        }
    }

    let mut warnings = Vec::new();
    let mut base = vec![None; schema.len()];
    let mut edges = vec![None; schema.len()];
    for (i, field) in schema.fields().iter().enumerate() {
        if !field.is_profiled() || field.kind != FieldKind::Continuous {
            continue;
        }
        let summary = summarize_field(dataset, i);
        let (min, max) = summary.map_or((0.0, 0.0), |s| (s.min, s.max));
        edges[i] = Some(HistogramEdges::spanning(min, max, params.histogram_bins));
        base[i] = Some(match (field.similarity_scale, summary) {
            (Some(scale), _) => scale,
            (None, Some(s)) if s.sd > 0.0 => s.sd / 2.0,
            _ => {
                warnings.push(EngineWarning::DegenerateField(field.name.clone()));
                1.0
            }
        });
    }
    let similarity = SimilarityParams::from_base_scales(schema, params.accuracy, &base)?;
    let model = ClusterModel {
        schema: schema.clone(),
        params: params.clone(),
        similarity,
        edges,
        clusters: Vec::new(),
        display_order: Vec::new(),
    };
    Ok(ModelInit { model, warnings })
}

/// How well a record fits one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// Sum of votes `2s - 1` over the members.
    pub sum_vote: f64,
    pub mean_similarity: f64,
}

/// Scores `record` against `cluster` using the model's mode. The record is
/// treated as an outsider; use [`score_record_excluding_self`] for a member.
pub fn score_record(
    model: &ClusterModel,
    cluster: &ClusterStats,
    record: &Record,
) -> Result<Score, EngineError> {
    score_with_mode(model, cluster, record, model.params.mode, false)
}

/// Scores a member of `cluster` against the rest of it.
pub fn score_record_excluding_self(
    model: &ClusterModel,
    cluster: &ClusterStats,
    record: &Record,
) -> Result<Score, EngineError> {
    score_with_mode(model, cluster, record, model.params.mode, true)
}

/// Scores with an explicit mode. [`Mode::Exact`] needs member records, so
/// the model must have been built in exact mode.
pub fn score_with_mode(
    model: &ClusterModel,
    cluster: &ClusterStats,
    record: &Record,
    mode: Mode,
    exclude_self: bool,
) -> Result<Score, EngineError> {
    let size = cluster.size - usize::from(exclude_self && cluster.size > 0);
    if size == 0 {
        return Err(EngineError::EmptyCluster(cluster.cluster_id));
    }
    match mode {
        Mode::Exact => {
            let mut skipped = !exclude_self;
            let mut sum = 0.0;
            let mut votes = 0.0;
            let mut n = 0usize;
            for member in &cluster.members {
                if !skipped && member.id == record.id {
                    skipped = true;
                    continue;
                }
                let s = record_similarity(record, member, &model.schema, &model.similarity);
                sum += s;
                votes += vote(s);
                n += 1;
            }
            if n == 0 {
                return Err(EngineError::EmptyCluster(cluster.cluster_id));
            }
            Ok(Score { sum_vote: votes, mean_similarity: sum / n as f64 })
        }
        Mode::Histogram => {
            let mean = histogram_mean_similarity(model, cluster, record, exclude_self);
            Ok(Score { sum_vote: size as f64 * vote(mean), mean_similarity: mean })
        }
    }
}

/// Weighted mean over active fields of the expected field similarity
/// against the cluster's stored distributions.
fn histogram_mean_similarity(
    model: &ClusterModel,
    cluster: &ClusterStats,
    record: &Record,
    exclude_self: bool,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, field) in model.schema.fields().iter().enumerate() {
        if !field.is_active() {
            continue;
        }
        let expected = match (&cluster.fields[i], &record.values[i]) {
            (Some(FieldStats::Continuous(s)), Value::Number(x)) => {
                let scale = model.similarity.scale(i).unwrap_or(1.0);
                s.expected_similarity(*x, scale, exclude_self)
            }
            (Some(FieldStats::Categorical(s)), Value::Category(c)) => {
                s.expected_similarity(c, exclude_self)
            }
            _ => None,
        };
        if let Some(e) = expected {
            num += field.weight * e;
            den += field.weight;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.5
    }
}

/// Mean similarity of a member to the rest of its cluster; 1.0 for a
/// singleton.
pub fn condorcet_value(record: &Record, own_cluster: &ClusterStats, model: &ClusterModel) -> f64 {
    if own_cluster.size <= 1 {
        return 1.0;
    }
    score_record_excluding_self(model, own_cluster, record)
        .map(|s| s.mean_similarity)
        .unwrap_or(1.0)
}

/// Margin between the best and runner-up mean similarities, mapped to
/// `[0, 1]`: `(s1 - s2 + 1) / 2`. With one cluster it is `s1` itself.
pub fn confidence(scores: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &s in scores {
        if s > best {
            second = best;
            best = s;
        } else if s > second {
            second = s;
        }
    }
    match scores.len() {
        0 => 0.0,
        1 => best.clamp(0.0, 1.0),
        _ => ((best - second + 1.0) / 2.0).clamp(0.0, 1.0),
    }
}

/// Per-record output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub record_id: String,
    pub cluster_id: usize,
    pub condorcet_value: f64,
    pub confidence: f64,
}

/// Rounds to the six decimals written to flat files, so that written and
/// reloaded assignments compare equal.
pub fn quantize6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassTrace {
    pub pass: usize,
    /// Pass 1 counts every placed record; later passes count reassignments.
    pub moves: usize,
    /// Size of every cluster id, empty ones included.
    pub sizes: Vec<usize>,
    /// Global Condorcet criterion, exact mode only.
    pub criterion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub passes: Vec<PassTrace>,
}

impl RunTrace {
    /// One line per pass: `pass=… moves=… sizes=a,b,… criterion=…`, with the
    /// criterion left blank in histogram mode.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for p in &self.passes {
            let sizes: Vec<String> = p.sizes.iter().map(ToString::to_string).collect();
            let criterion = p.criterion.map(|c| format!("{c:.12}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "pass={} moves={} sizes={} criterion={}",
                p.pass,
                p.moves,
                sizes.join(","),
                criterion
            );
        }
        out
    }

    pub fn final_criterion(&self) -> Option<f64> {
        self.passes.last().and_then(|p| p.criterion)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub model: ClusterModel,
    /// In dataset order.
    pub assignments: Vec<Assignment>,
    pub trace: RunTrace,
    pub warnings: Vec<EngineWarning>,
}

impl RunOutput {
    pub fn labels(&self) -> Vec<usize> {
        self.assignments.iter().map(|a| a.cluster_id).collect()
    }
}

const UNASSIGNED: usize = usize::MAX;

/// Mutable run state. Histogram stats are updated incrementally; exact-mode
/// scoring walks the label array.
struct Run<'a> {
    data: &'a [Record],
    model: ClusterModel,
    labels: Vec<usize>,
    /// Scratch: per-cluster similarity sums and counts (exact mode).
    sim_sum: Vec<f64>,
    sim_n: Vec<usize>,
}

impl<'a> Run<'a> {
    fn sizes(&self) -> Vec<usize> {
        self.model.clusters.iter().map(|c| c.size).collect()
    }

    fn place(&mut self, i: usize, cluster: usize) {
        self.labels[i] = cluster;
        self.model.clusters[cluster].add(&self.data[i]);
    }

    fn unplace(&mut self, i: usize) -> usize {
        let cluster = self.labels[i];
        self.labels[i] = UNASSIGNED;
        self.model.clusters[cluster].remove(&self.data[i]);
        cluster
    }

    fn found(&mut self, i: usize) -> usize {
        let cluster = self.model.new_cluster();
        let id = cluster.cluster_id;
        self.model.clusters.push(cluster);
        self.sim_sum.push(0.0);
        self.sim_n.push(0);
        self.place(i, id);
        id
    }

    /// Scores record `i` against every cluster, ignoring `i` itself. Empty
    /// clusters score `None`.
    fn score_all(&mut self, i: usize) -> Vec<Option<Score>> {
        let record = &self.data[i];
        match self.model.params.mode {
            Mode::Exact => {
                self.sim_sum.iter_mut().for_each(|s| *s = 0.0);
                self.sim_n.iter_mut().for_each(|n| *n = 0);
                for (j, other) in self.data.iter().enumerate() {
                    let label = self.labels[j];
                    if j == i || label == UNASSIGNED {
                        continue;
                    }
                    let s = record_similarity(record, other, &self.model.schema, &self.model.similarity);
                    self.sim_sum[label] += s;
                    self.sim_n[label] += 1;
                }
                self.sim_sum
                    .iter()
                    .zip(&self.sim_n)
                    .map(|(&sum, &n)| {
                        (n > 0).then(|| Score {
                            sum_vote: 2.0 * sum - n as f64,
                            mean_similarity: sum / n as f64,
                        })
                    })
                    .collect()
            }
            Mode::Histogram => self
                .model
                .clusters
                .iter()
                .map(|c| {
                    (c.size > 0).then(|| {
                        let mean = histogram_mean_similarity(&self.model, c, record, false);
                        Score { sum_vote: c.size as f64 * vote(mean), mean_similarity: mean }
                    })
                })
                .collect(),
        }
    }

    /// Sum over all record pairs of `s` (same cluster) or `1 - s`
    /// (different clusters), normalised by the pair count.
    fn criterion(&self) -> Option<f64> {
        let n = self.data.len();
        if n < 2 {
            return None;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = record_similarity(
                    &self.data[i],
                    &self.data[j],
                    &self.model.schema,
                    &self.model.similarity,
                );
                total += if self.labels[i] == self.labels[j] { s } else { 1.0 - s };
            }
        }
        Some(total / pair_count(n))
    }
}

fn pair_count(n: usize) -> f64 {
    n as f64 * (n as f64 - 1.0) / 2.0
}

/// Index of the largest value, ties to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Runs demographic clustering over `dataset` in input order.
pub fn run(dataset: &[Record], schema: &Schema, params: &RunParams) -> Result<RunOutput, EngineError> {
    let ModelInit { model, warnings } = init_model(dataset, schema, params)?;
    for record in dataset {
        let missing = schema.active_indices().any(|i| record.values[i].is_missing());
        if missing {
            return Err(EngineError::MissingActive(record.id.clone()));
        }
    }
    let exact = params.mode == Mode::Exact;
    let n = dataset.len();
    let mut run = Run {
        data: dataset,
        model,
        labels: vec![UNASSIGNED; n],
        sim_sum: Vec::new(),
        sim_n: Vec::new(),
    };
    let mut trace = RunTrace::default();

    // Pass 1: seeding.
    run.found(0);
    for i in 1..n {
        let scores = run.score_all(i);
        let best_mean = scores
            .iter()
            .flatten()
            .map(|s| s.mean_similarity)
            .fold(f64::NEG_INFINITY, f64::max);
        if best_mean < params.similarity_threshold && run.model.clusters.len() < params.max_clusters {
            run.found(i);
        } else {
            let (target, _) = argmax(scores.iter().map(|s| s.map_or(f64::NEG_INFINITY, |s| s.sum_vote)))
                .expect("at least one cluster exists");
            run.place(i, target);
        }
    }
    let mut criterion = if exact { run.criterion() } else { None };
    trace.passes.push(PassTrace { pass: 1, moves: n, sizes: run.sizes(), criterion });

    // Refinement passes: no new clusters.
    for pass in 2..=params.max_passes {
        let mut moves = 0;
        for i in 0..n {
            let current = run.unplace(i);
            let scores = run.score_all(i);
            let votes: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| s.sum_vote)).collect();
            let (best, best_vote) = argmax(votes.iter().copied()).expect("clusters exist");
            let target = if best != current && best_vote > votes[current] {
                moves += 1;
                if let Some(c) = criterion.as_mut() {
                    *c += (best_vote - votes[current]) / pair_count(n);
                }
                best
            } else {
                current
            };
            run.place(i, target);
        }
        trace.passes.push(PassTrace { pass, moves, sizes: run.sizes(), criterion });
        if moves == 0 {
            break;
        }
    }

    // Final stats are rebuilt from the labels so they do not depend on the
    // add/remove history.
    let labels = run.labels.clone();
    let n_clusters = run.model.clusters.len();
    let mut model = run.model;
    model.rebuild(dataset, &labels, n_clusters);
    let assignments = final_assignments(&model, dataset, &labels);
    Ok(RunOutput { model, assignments, trace, warnings })
}

/// Condorcet value and confidence for every record of a finished run.
fn final_assignments(model: &ClusterModel, dataset: &[Record], labels: &[usize]) -> Vec<Assignment> {
    let k = model.clusters.len();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    dataset
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let own = labels[i];
            let means: Vec<Option<f64>> = match model.params.mode {
                Mode::Exact => {
                    sums.iter_mut().for_each(|s| *s = 0.0);
                    counts.iter_mut().for_each(|c| *c = 0);
                    for (j, other) in dataset.iter().enumerate() {
                        if j != i {
                            sums[labels[j]] += record_similarity(record, other, &model.schema, &model.similarity);
                            counts[labels[j]] += 1;
                        }
                    }
                    (0..k).map(|c| (counts[c] > 0).then(|| sums[c] / counts[c] as f64)).collect()
                }
                Mode::Histogram => model
                    .clusters
                    .iter()
                    .map(|c| {
                        let exclude = c.cluster_id == own;
                        (c.size > usize::from(exclude))
                            .then(|| histogram_mean_similarity(model, c, record, exclude))
                    })
                    .collect(),
            };
            let condorcet = means[own].unwrap_or(1.0);
            let scores: Vec<f64> = model
                .clusters
                .iter()
                .filter(|c| c.size > 0)
                .map(|c| if c.cluster_id == own { condorcet } else { means[c.cluster_id].unwrap_or(0.0) })
                .collect();
            Assignment {
                record_id: record.id.clone(),
                cluster_id: own,
                condorcet_value: quantize6(condorcet),
                confidence: quantize6(confidence(&scores)),
            }
        })
        .collect()
}

/// Assigns a new record to a frozen model: the non-empty cluster with the
/// largest vote sum, no threshold and no new clusters.
///
/// In exact mode a record whose id belongs to a stored member is scored the
/// way the run scored it: without itself, staying put unless another
/// cluster has a strictly larger vote sum.
pub fn assign_to_model(model: &ClusterModel, record: &Record) -> Result<Assignment, EngineError> {
    let home = match model.params.mode {
        Mode::Exact => model
            .non_empty()
            .find(|c| c.members.iter().any(|m| m.id == record.id))
            .map(|c| c.cluster_id),
        Mode::Histogram => None,
    };
    // (cluster id, vote sum, mean similarity if defined)
    let mut scored = Vec::new();
    for cluster in model.non_empty() {
        let exclude = home == Some(cluster.cluster_id);
        if exclude && cluster.size == 1 {
            scored.push((cluster.cluster_id, 0.0, None));
            continue;
        }
        let score = score_with_mode(model, cluster, record, model.params.mode, exclude)?;
        scored.push((cluster.cluster_id, score.sum_vote, Some(score.mean_similarity)));
    }
    let (mut best, mut best_vote, _) = *scored.first().ok_or(EngineError::EmptyCluster(0))?;
    for &(id, v, _) in &scored[1..] {
        if v > best_vote {
            best = id;
            best_vote = v;
        }
    }
    if let Some(h) = home {
        let home_vote = scored.iter().find(|s| s.0 == h).map_or(0.0, |s| s.1);
        if best_vote <= home_vote {
            best = h;
        }
    }
    let mean_of = |id: usize| scored.iter().find(|s| s.0 == id).and_then(|s| s.2);
    let condorcet = mean_of(best).unwrap_or(1.0);
    let means: Vec<f64> = scored
        .iter()
        .map(|&(id, _, m)| if id == best { condorcet } else { m.unwrap_or(0.0) })
        .collect();
    Ok(Assignment {
        record_id: record.id.clone(),
        cluster_id: best,
        condorcet_value: quantize6(condorcet),
        confidence: quantize6(confidence(&means)),
    })
}
