//! Partition quality and variable importance.
//!
//! All functions take a dataset and a label slice aligned with it. Variable
//! importance is reported for every active and supplementary field.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use crate::schema::{FieldKind, Record, Schema, Value};
use crate::similarity::{field_similarity, record_similarity, SimilarityParams};

/// Bins used for continuous variables in contingency tables.
pub const DEFAULT_IMPORTANCE_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("importance needs at least 2 non-empty clusters, found {0}")]
    DegenerateClustering(usize),
    #[error("{labels} labels for {records} records")]
    LengthMismatch { records: usize, labels: usize },
    #[error("the two labellings cover different records")]
    RecordSetMismatch,
    #[error("at least {needed} records are required, found {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("unknown importance metric {0:?}")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    ChiSquare,
    Entropy,
    Condorcet,
    DatabaseOrder,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ChiSquare => "chi-square",
            Metric::Entropy => "entropy",
            Metric::Condorcet => "condorcet",
            Metric::DatabaseOrder => "database-order",
        }
    }

    pub fn parse(token: &str) -> Result<Self, AnalysisError> {
        match token.to_ascii_lowercase().replace('_', "-").as_str() {
            "chi-square" | "chisquare" | "chi2" => Ok(Metric::ChiSquare),
            "entropy" => Ok(Metric::Entropy),
            "condorcet" => Ok(Metric::Condorcet),
            "database-order" | "database" => Ok(Metric::DatabaseOrder),
            _ => Err(AnalysisError::UnknownMetric(token.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEntry {
    pub field: String,
    pub score: f64,
    pub rank: usize,
}

/// Fields ordered by descending score, ties sharing the smaller rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub metric: Metric,
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    /// Sorts `(field, score)` pairs by score, keeping input order on ties.
    fn ranked(metric: Metric, mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut entries: Vec<ImportanceEntry> = Vec::with_capacity(scored.len());
        for (pos, (field, score)) in scored.into_iter().enumerate() {
            let rank = match entries.last() {
                Some(prev) if prev.score == score => prev.rank,
                _ => pos + 1,
            };
            entries.push(ImportanceEntry { field, score, rank });
        }
        Self { metric, entries }
    }

    pub fn rank_of(&self, field: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.field == field).map(|e| e.rank)
    }

    /// CSV block `metric,field,score,rank`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,field,score,rank\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:.6},{}", self.metric.as_str(), e.field, e.score, e.rank);
        }
        out
    }
}

fn check_lengths(dataset: &[Record], labels: &[usize]) -> Result<(), AnalysisError> {
    if dataset.len() != labels.len() {
        return Err(AnalysisError::LengthMismatch { records: dataset.len(), labels: labels.len() });
    }
    Ok(())
}

fn check_clusters(labels: &[usize]) -> Result<(), AnalysisError> {
    let k = labels.iter().collect::<BTreeSet<_>>().len();
    if k < 2 {
        return Err(AnalysisError::DegenerateClustering(k));
    }
    Ok(())
}

/// Global Condorcet criterion in `[0, 1]`: over all record pairs, the
/// similarity of same-cluster pairs plus the dissimilarity of split pairs,
/// divided by the number of pairs.
pub fn partition_condorcet(
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    params: &SimilarityParams,
) -> Result<f64, AnalysisError> {
    check_lengths(dataset, labels)?;
    let n = dataset.len();
    if n < 2 {
        return Err(AnalysisError::TooFewRecords { needed: 2, found: n });
    }
    let mut total = 0.0;
    let mut pairs = 0u64;
    for (i, a) in dataset.iter().enumerate() {
        for (j, b) in dataset.iter().enumerate().skip(i + 1) {
            let s = record_similarity(a, b, schema, params);
            total += if labels[i] == labels[j] { s } else { 1.0 - s };
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Observed counts of one variable (rows) against cluster ids (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    /// Row labels: a category, or a `[lo, hi)` bin.
    pub rows: Vec<String>,
    pub cols: Vec<usize>,
    /// `counts[row][col]`.
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    /// Builds a table from per-record row keys (`None` = missing, skipped)
    /// and cluster labels.
    pub fn from_pairs(row_labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>, cols: Vec<usize>) -> Self {
        let col_index: HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut counts = vec![vec![0u64; cols.len()]; row_labels.len()];
        for (row, col) in pairs {
            counts[row][col_index[&col]] += 1;
        }
        Self::from_counts(row_labels, cols, counts)
    }

    pub fn from_counts(rows: Vec<String>, cols: Vec<usize>, counts: Vec<Vec<u64>>) -> Self {
        let row_totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_totals: Vec<u64> = (0..cols.len()).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        let total = row_totals.iter().sum();
        Self { rows, cols, counts, row_totals, col_totals, total }
    }

    /// Pearson statistic `Σ (O - E)² / E` with `E = row · col / N`, skipping
    /// cells whose expectation is zero.
    pub fn chi_square(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut chi2 = 0.0;
        for (r, row) in self.counts.iter().enumerate() {
            for (c, &observed) in row.iter().enumerate() {
                let expected = (self.row_totals[r] * self.col_totals[c]) as f64 / n;
                if expected > 0.0 {
                    let diff = observed as f64 - expected;
                    chi2 += diff * diff / expected;
                }
            }
        }
        chi2
    }

    /// Mutual information between rows and columns, in bits.
    pub fn mutual_information(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut mi = 0.0;
        for (r, row) in self.counts.iter().enumerate() {
            for (c, &observed) in row.iter().enumerate() {
                if observed == 0 {
                    continue;
                }
                // p(v,c) / (p(v) p(c)) = O · N / (row · col), exact in integers.
                let ratio = (observed * self.total) as f64
                    / (self.row_totals[r] * self.col_totals[c]) as f64;
                mi += observed as f64 / n * ratio.log2();
            }
        }
        mi.max(0.0)
    }
}

/// Contingency table of the field at `index` against the labels.
/// Continuous values go into `bins` equal-width bins over the observed
/// range; a constant field gets a single bin.
pub fn contingency_table(dataset: &[Record], labels: &[usize], index: usize, kind: FieldKind, bins: usize) -> ContingencyTable {
    let cols: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    match kind {
        FieldKind::Categorical => {
            let cats: BTreeSet<&str> = dataset.iter().filter_map(|r| r.values[index].as_category()).collect();
            let row_of: BTreeMap<&str, usize> = cats.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let pairs = dataset.iter().zip(labels).filter_map(|(r, &l)| {
                r.values[index].as_category().map(|c| (row_of[c], l))
            });
            let rows = cats.iter().map(|c| c.to_string()).collect();
            ContingencyTable::from_pairs(rows, pairs.collect::<Vec<_>>(), cols)
        }
        FieldKind::Continuous => {
            let binning = Binning::over(dataset.iter().filter_map(|r| r.values[index].as_number()), bins);
            let pairs = dataset.iter().zip(labels).filter_map(|(r, &l)| {
                r.values[index].as_number().map(|x| (binning.bin(x), l))
            });
            ContingencyTable::from_pairs(binning.labels(), pairs.collect::<Vec<_>>(), cols)
        }
    }
}

/// Equal-width bins over an observed range; one bin for a constant range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Binning {
    pub fn over(values: impl Iterator<Item = f64>, bins: usize) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if !lo.is_finite() {
            return Self { lo: 0.0, hi: 0.0, bins: 1 };
        }
        let bins = if hi > lo { bins.max(1) } else { 1 };
        Self { lo, hi, bins }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn bin(&self, x: f64) -> usize {
        if self.bins == 1 || self.hi <= self.lo {
            return 0;
        }
        let k = ((x - self.lo) / self.width()).floor();
        (k.max(0.0) as usize).min(self.bins - 1)
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        let lo = self.lo + bin as f64 * self.width();
        let hi = if bin + 1 == self.bins { self.hi } else { self.lo + (bin + 1) as f64 * self.width() };
        (lo, hi)
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.bins)
            .map(|b| {
                let (lo, hi) = self.bounds(b);
                format!("[{lo}, {hi})")
            })
            .collect()
    }
}

fn table_importance(
    metric: Metric,
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    bins: usize,
    score: impl Fn(&ContingencyTable) -> f64,
) -> Result<ImportanceReport, AnalysisError> {
    check_lengths(dataset, labels)?;
    check_clusters(labels)?;
    let scored = schema
        .profiled_indices()
        .map(|i| {
            let field = schema.field(i);
            let table = contingency_table(dataset, labels, i, field.kind, bins);
            (field.name.clone(), score(&table))
        })
        .collect();
    Ok(ImportanceReport::ranked(metric, scored))
}

/// Chi-square test statistic between each variable and the cluster id.
pub fn chi_square_importance(dataset: &[Record], labels: &[usize], schema: &Schema, bins: usize) -> Result<ImportanceReport, AnalysisError> {
    table_importance(Metric::ChiSquare, dataset, labels, schema, bins, ContingencyTable::chi_square)
}

/// Mutual information (bits) between each binned variable and the cluster id.
pub fn entropy_importance(dataset: &[Record], labels: &[usize], schema: &Schema, bins: usize) -> Result<ImportanceReport, AnalysisError> {
    table_importance(Metric::Entropy, dataset, labels, schema, bins, ContingencyTable::mutual_information)
}

/// The partition criterion restricted to one field at a time. Pairs where
/// either value is missing are left out.
pub fn condorcet_importance(
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    params: &SimilarityParams,
) -> Result<ImportanceReport, AnalysisError> {
    check_lengths(dataset, labels)?;
    check_clusters(labels)?;
    let mut scored = Vec::new();
    for i in schema.profiled_indices() {
        let field = schema.field(i);
        let scale = params.scale(i).unwrap_or(1.0);
        let mut total = 0.0;
        let mut pairs = 0u64;
        for (a, ra) in dataset.iter().enumerate() {
            for (b, rb) in dataset.iter().enumerate().skip(a + 1) {
                if let Ok(Some(s)) = field_similarity(field, &ra.values[i], &rb.values[i], scale) {
                    total += if labels[a] == labels[b] { s } else { 1.0 - s };
                    pairs += 1;
                }
            }
        }
        let score = if pairs > 0 { total / pairs as f64 } else { 0.0 };
        scored.push((field.name.clone(), score));
    }
    Ok(ImportanceReport::ranked(Metric::Condorcet, scored))
}

/// Active and supplementary fields in declaration order, all scored 0.
pub fn database_order(schema: &Schema) -> ImportanceReport {
    let entries = schema
        .profiled_indices()
        .enumerate()
        .map(|(pos, i)| ImportanceEntry { field: schema.field(i).name.clone(), score: 0.0, rank: pos + 1 })
        .collect();
    ImportanceReport { metric: Metric::DatabaseOrder, entries }
}

/// Dispatches on `metric`.
pub fn importance(
    metric: Metric,
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    params: &SimilarityParams,
    bins: usize,
) -> Result<ImportanceReport, AnalysisError> {
    match metric {
        Metric::ChiSquare => chi_square_importance(dataset, labels, schema, bins),
        Metric::Entropy => entropy_importance(dataset, labels, schema, bins),
        Metric::Condorcet => condorcet_importance(dataset, labels, schema, params),
        Metric::DatabaseOrder => Ok(database_order(schema)),
    }
}

fn comb2(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Pair-counting adjusted Rand index of two aligned labellings.
pub fn adjusted_rand_index_slices<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::RecordSetMismatch);
    }
    if a.len() < 2 {
        return Err(AnalysisError::TooFewRecords { needed: 2, found: a.len() });
    }
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    let mut cells: HashMap<(&A, &B), u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
        *cells.entry((x, y)).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&n| comb2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| comb2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| comb2(n)).sum();
    let total = comb2(a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both labellings are all-one-cluster or all-singletons.
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Adjusted Rand index of two labellings keyed by record id.
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(
    labels_a: &HashMap<String, A>,
    labels_b: &HashMap<String, B>,
) -> Result<f64, AnalysisError> {
    if labels_a.len() != labels_b.len() || labels_a.keys().any(|k| !labels_b.contains_key(k)) {
        return Err(AnalysisError::RecordSetMismatch);
    }
    let ids: Vec<&String> = labels_a.keys().collect();
    let a: Vec<&A> = ids.iter().map(|id| &labels_a[*id]).collect();
    let b: Vec<&B> = ids.iter().map(|id| &labels_b[*id]).collect();
    adjusted_rand_index_slices(&a, &b)
}

/// Values of `index` as plain floats, missing skipped.
pub fn numbers(dataset: &[Record], index: usize) -> Vec<f64> {
    dataset.iter().filter_map(|r| match r.values[index] {
        Value::Number(x) => Some(x),
        _ => None,
    }).collect()
}
