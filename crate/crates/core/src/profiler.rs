//! Cluster profiling on shareholder-value variables.
//!
//! Aggregates revenue and profit per cluster, ranks clusters by total
//! profit, places each in a value quadrant (per-capita revenue against
//! per-capita cost, both relative to the whole customer base) and attaches a
//! strategy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::analysis::Binning;
use crate::schema::{FieldKind, FieldRole, Record, Schema};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("field {0} is not continuous")]
    NotContinuous(String),
    #[error("record {id}: {field} is missing")]
    MissingValue { id: String, field: String },
    #[error("{labels} labels for {records} records")]
    LengthMismatch { records: usize, labels: usize },
}

/// Which fields carry revenue and profit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub revenue_field: String,
    pub profit_field: String,
    /// Relative per-capita revenue gap under which two neighbouring clusters
    /// are paired for cross-selling.
    pub cross_sell_gap: f64,
}

impl ProfileSpec {
    pub const DEFAULT_CROSS_SELL_GAP: f64 = 0.25;

    pub fn new(revenue_field: impl Into<String>, profit_field: impl Into<String>) -> Self {
        Self {
            revenue_field: revenue_field.into(),
            profit_field: profit_field.into(),
            cross_sell_gap: Self::DEFAULT_CROSS_SELL_GAP,
        }
    }

    /// `total_revenue` / `total_profit`, as in [`Schema::retail`].
    pub fn retail() -> Self {
        Self::new("total_revenue", "total_profit")
    }

    fn resolve(&self, schema: &Schema) -> Result<(usize, usize), ProfileError> {
        let find = |name: &str| {
            let i = schema.index_of(name).ok_or_else(|| ProfileError::UnknownField(name.to_string()))?;
            if schema.field(i).kind != FieldKind::Continuous {
                return Err(ProfileError::NotContinuous(name.to_string()));
            }
            Ok(i)
        };
        Ok((find(&self.revenue_field)?, find(&self.profit_field)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueClass {
    High,
    Medium,
    Low,
    Negative,
}

impl ValueClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueClass::High => "High",
            ValueClass::Medium => "Medium",
            ValueClass::Low => "Low",
            ValueClass::Negative => "Negative",
        }
    }
}

impl fmt::Display for ValueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProfile {
    pub cluster_id: usize,
    pub customer_count: usize,
    pub total_profit: f64,
    pub total_revenue: f64,
    pub customer_count_pct: f64,
    pub total_revenue_pct: f64,
    pub per_capita_revenue: f64,
    /// Cost is revenue minus profit.
    pub per_capita_cost: f64,
    pub rank: usize,
    pub value_class: ValueClass,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniverseAggregates {
    pub total_customers: usize,
    pub total_revenue: f64,
    pub total_profit: f64,
    pub per_capita_revenue: f64,
    pub per_capita_cost: f64,
}

/// Ranked cluster profiles plus universe totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    /// Rank 1 first.
    pub clusters: Vec<ClusterProfile>,
    pub universe: UniverseAggregates,
}

impl Profile {
    pub fn by_id(&self, cluster_id: usize) -> Option<&ClusterProfile> {
        self.clusters.iter().find(|p| p.cluster_id == cluster_id)
    }

    /// CSV with one row per cluster in rank order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "cluster_rank",
            "cluster_id",
            "customer_count",
            "total_profit",
            "total_revenue",
            "customer_count_pct",
            "total_revenue_pct",
            "value_class",
            "strategy",
        ])
        .expect("in-memory write");
        for p in &self.clusters {
            w.write_record([
                p.rank.to_string(),
                p.cluster_id.to_string(),
                p.customer_count.to_string(),
                format!("{:.2}", p.total_profit),
                format!("{:.2}", p.total_revenue),
                format!("{:.2}", p.customer_count_pct),
                format!("{:.2}", p.total_revenue_pct),
                p.value_class.to_string(),
                p.strategy.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Fixed-column text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4} {:>7} {:>9} {:>14} {:>14} {:>8} {:>8}  {:<8} strategy",
            "rank", "cluster", "customers", "total_profit", "total_revenue", "count%", "rev%", "class"
        );
        for p in &self.clusters {
            let _ = writeln!(
                out,
                "{:>4} {:>7} {:>9} {:>14.2} {:>14.2} {:>8.2} {:>8.2}  {:<8} {}",
                p.rank,
                p.cluster_id,
                p.customer_count,
                p.total_profit,
                p.total_revenue,
                p.customer_count_pct,
                p.total_revenue_pct,
                p.value_class.as_str(),
                p.strategy
            );
        }
        out
    }
}

/// Aggregates revenue and profit per non-empty cluster and ranks, classifies
/// and annotates the result.
pub fn profile(
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    spec: &ProfileSpec,
) -> Result<Profile, ProfileError> {
    if dataset.len() != labels.len() {
        return Err(ProfileError::LengthMismatch { records: dataset.len(), labels: labels.len() });
    }
    let (rev_i, profit_i) = spec.resolve(schema)?;
    // cluster id -> (count, revenue, profit)
    let mut sums: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    for (record, &label) in dataset.iter().zip(labels) {
        let get = |i: usize| {
            record.values[i].as_number().ok_or_else(|| ProfileError::MissingValue {
                id: record.id.clone(),
                field: schema.field(i).name.clone(),
            })
        };
        let (revenue, profit) = (get(rev_i)?, get(profit_i)?);
        let entry = sums.entry(label).or_insert((0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += revenue;
        entry.2 += profit;
    }

    let total_customers: usize = sums.values().map(|s| s.0).sum();
    let total_revenue: f64 = sums.values().map(|s| s.1).sum();
    let total_profit: f64 = sums.values().map(|s| s.2).sum();
    let per_capita = |x: f64, n: usize| if n > 0 { x / n as f64 } else { 0.0 };
    let universe = UniverseAggregates {
        total_customers,
        total_revenue,
        total_profit,
        per_capita_revenue: per_capita(total_revenue, total_customers),
        per_capita_cost: per_capita(total_revenue - total_profit, total_customers),
    };
    let pct = |part: f64, whole: f64| if whole != 0.0 { 100.0 * part / whole } else { 0.0 };

    let mut clusters: Vec<ClusterProfile> = sums
        .into_iter()
        .map(|(cluster_id, (count, revenue, profit))| ClusterProfile {
            cluster_id,
            customer_count: count,
            total_profit: profit,
            total_revenue: revenue,
            customer_count_pct: pct(count as f64, total_customers as f64),
            total_revenue_pct: pct(revenue, total_revenue),
            per_capita_revenue: per_capita(revenue, count),
            per_capita_cost: per_capita(revenue - profit, count),
            rank: 0,
            value_class: ValueClass::Low,
            strategy: String::new(),
        })
        .collect();
    // BTreeMap order is ascending id, so a stable sort breaks ties by id.
    clusters.sort_by(|a, b| b.total_profit.total_cmp(&a.total_profit));
    for (i, p) in clusters.iter_mut().enumerate() {
        p.rank = i + 1;
        p.value_class = classify_quadrant(p, &universe);
    }
    let strategies = recommend(&clusters, spec.cross_sell_gap);
    for (p, s) in clusters.iter_mut().zip(strategies) {
        p.strategy = s;
    }
    Ok(Profile { clusters, universe })
}

/// Revenue axis high iff per-capita revenue exceeds the universe's; cost
/// axis likewise. Equality counts as not high.
pub fn classify_quadrant(p: &ClusterProfile, u: &UniverseAggregates) -> ValueClass {
    let high_revenue = p.per_capita_revenue > u.per_capita_revenue;
    let high_cost = p.per_capita_cost > u.per_capita_cost;
    match (high_revenue, high_cost) {
        (true, false) => ValueClass::High,
        (true, true) => ValueClass::Medium,
        (false, false) => ValueClass::Low,
        (false, true) => ValueClass::Negative,
    }
}

pub const RETENTION: &str = "retention";
pub const WAIT_AND_SEE: &str = "wait and see (insufficient behavioral evidence)";
pub const COST_REDUCTION: &str = "cost reduction / deprioritize";
pub const DEVELOP: &str = "develop (up-sell)";

/// Strategy text for each profile, aligned with `profiles` (which must be
/// ranked and classified).
///
/// The rank-1 cluster gets retention. Clusters adjacent in per-capita
/// revenue order whose revenues differ by less than `cross_sell_gap`
/// (relative to the larger) are paired for cross-selling. Other clusters
/// get a class-driven strategy; a Low cluster gets "develop" only when
/// nothing else applies.
pub fn recommend(profiles: &[ClusterProfile], cross_sell_gap: f64) -> Vec<String> {
    let mut notes: Vec<Vec<String>> = vec![Vec::new(); profiles.len()];
    let mut by_revenue: Vec<usize> = (0..profiles.len()).collect();
    by_revenue.sort_by(|&a, &b| {
        profiles[b]
            .per_capita_revenue
            .total_cmp(&profiles[a].per_capita_revenue)
            .then(profiles[a].cluster_id.cmp(&profiles[b].cluster_id))
    });
    let mut partners: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); profiles.len()];
    for w in by_revenue.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ra, rb) = (profiles[a].per_capita_revenue, profiles[b].per_capita_revenue);
        let larger = ra.abs().max(rb.abs());
        let gap = if larger > 0.0 { (ra - rb).abs() / larger } else { 0.0 };
        if gap < cross_sell_gap {
            partners[a].insert(profiles[b].cluster_id);
            partners[b].insert(profiles[a].cluster_id);
        }
    }
    for (i, p) in profiles.iter().enumerate() {
        if p.rank == 1 {
            notes[i].push(RETENTION.to_string());
        }
        for other in &partners[i] {
            notes[i].push(format!("cross-sell/up-sell pair with cluster {other}"));
        }
        if p.rank != 1 {
            match p.value_class {
                ValueClass::High => notes[i].push(RETENTION.to_string()),
                ValueClass::Medium => notes[i].push(WAIT_AND_SEE.to_string()),
                ValueClass::Negative => notes[i].push(COST_REDUCTION.to_string()),
                ValueClass::Low if notes[i].is_empty() => notes[i].push(DEVELOP.to_string()),
                ValueClass::Low => {}
            }
        }
    }
    notes.into_iter().map(|n| n.join("; ")).collect()
}

/// Distribution of one variable inside each cluster against the whole base.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableProfile {
    pub field: String,
    pub supplementary: bool,
    /// `(bin_lo, bin_hi)` labels; for categories both are the category.
    pub bins: Vec<(String, String)>,
    /// Proportions over the whole base.
    pub universe: Vec<f64>,
    /// `(cluster id, proportions)` in ascending id order.
    pub clusters: Vec<(usize, Vec<f64>)>,
}

fn proportions(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 })
        .collect()
}

/// Per-cluster and universe histograms of the field at `index`, sharing the
/// same bins. Missing values are left out.
pub fn cluster_variable_profile(
    dataset: &[Record],
    labels: &[usize],
    schema: &Schema,
    index: usize,
    bins: usize,
) -> VariableProfile {
    let field = schema.field(index);
    type SlotOf = Box<dyn Fn(&Record) -> Option<usize>>;
    let (bin_labels, slot_of): (Vec<(String, String)>, SlotOf) = match field.kind {
        FieldKind::Continuous => {
            let binning = Binning::over(dataset.iter().filter_map(|r| r.values[index].as_number()), bins.max(1));
            let labels = (0..binning.bins)
                .map(|b| {
                    let (lo, hi) = binning.bounds(b);
                    (lo.to_string(), hi.to_string())
                })
                .collect();
            (labels, Box::new(move |r: &Record| r.values[index].as_number().map(|x| binning.bin(x))))
        }
        FieldKind::Categorical => {
            let cats: BTreeSet<String> = dataset
                .iter()
                .filter_map(|r| r.values[index].as_category().map(str::to_string))
                .collect();
            let slot: BTreeMap<String, usize> = cats.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
            let labels = cats.into_iter().map(|c| (c.clone(), c)).collect();
            (labels, Box::new(move |r: &Record| r.values[index].as_category().map(|c| slot[c])))
        }
    };
    let mut universe = vec![0u64; bin_labels.len()];
    let mut per_cluster: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (record, &label) in dataset.iter().zip(labels) {
        let counts = per_cluster.entry(label).or_insert_with(|| vec![0; bin_labels.len()]);
        if let Some(slot) = slot_of(record) {
            universe[slot] += 1;
            counts[slot] += 1;
        }
    }
    VariableProfile {
        field: field.name.clone(),
        supplementary: field.role == FieldRole::Supplementary,
        bins: bin_labels,
        universe: proportions(&universe),
        clusters: per_cluster.into_iter().map(|(id, c)| (id, proportions(&c))).collect(),
    }
}

/// Histogram profiles for every active and supplementary field.
pub fn all_variable_profiles(dataset: &[Record], labels: &[usize], schema: &Schema, bins: usize) -> Vec<VariableProfile> {
    schema
        .profiled_indices()
        .map(|i| cluster_variable_profile(dataset, labels, schema, i, bins))
        .collect()
}

/// CSV `cluster_id,field,bin_lo,bin_hi,cluster_prop,universe_prop,supplementary_flag`.
pub fn histograms_to_csv(profiles: &[VariableProfile]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cluster_id", "field", "bin_lo", "bin_hi", "cluster_prop", "universe_prop", "supplementary_flag"])
        .expect("in-memory write");
    for vp in profiles {
        for (cluster, props) in &vp.clusters {
            for (b, (lo, hi)) in vp.bins.iter().enumerate() {
                w.write_record([
                    cluster.to_string(),
                    vp.field.clone(),
                    lo.clone(),
                    hi.clone(),
                    format!("{:.6}", props[b]),
                    format!("{:.6}", vp.universe[b]),
                    u8::from(vp.supplementary).to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
