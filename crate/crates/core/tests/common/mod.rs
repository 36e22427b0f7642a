//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use custseg::similarity::SimilarityParams;
use custseg::{FieldKind, FieldSpec, Record, Schema, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Records whose per-cluster revenue and profit sums equal the retail
/// study's published totals, with their cluster labels.
pub const RETAIL_TOTALS: [(usize, usize, f64, f64); 4] = [
    (3, 486, 117256.59, 563643.71),
    (1, 5977, 85812.08, 382009.43),
    (2, 529, 82169.06, 379789.03),
    (0, 902, 51561.46, 263656.0),
];

pub fn retail_fixture() -> (Vec<Record>, Vec<usize>) {
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (cluster, count, profit, revenue) in RETAIL_TOTALS {
        for k in 0..count {
            let id = format!("T{:05}", records.len());
            records.push(Record {
                id: id.clone(),
                values: vec![
                    Value::Category(id),
                    Value::Number((k % 90) as f64),
                    Value::Number(profit / count as f64),
                    Value::Number(revenue / count as f64),
                    Value::Category(["Grocery", "Home", "Toys"][k % 3].into()),
                ],
            });
            labels.push(cluster);
        }
    }
    (records, labels)
}

/// Two continuous and one categorical active field.
pub fn mixed_schema() -> Schema {
    Schema::new(vec![
        FieldSpec::identifier("id"),
        FieldSpec::active("a", FieldKind::Continuous),
        FieldSpec::active("b", FieldKind::Continuous).with_weight(0.5),
        FieldSpec::active("c", FieldKind::Categorical),
    ])
    .unwrap()
}

/// `n` records around a few random centres, so that structure exists but
/// is noisy.
pub fn random_mixed(rng: &mut ChaCha8Rng, n: usize) -> Vec<Record> {
    let k = rng.random_range(1..=4);
    let centres: Vec<(f64, f64)> =
        (0..k).map(|_| (rng.random_range(-20.0..20.0), rng.random_range(0.0..100.0))).collect();
    (0..n)
        .map(|i| {
            let (ca, cb) = centres[rng.random_range(0..k)];
            let id = format!("r{i}");
            Record {
                id: id.clone(),
                values: vec![
                    Value::Category(id),
                    Value::Number(ca + rng.random_range(-5.0..5.0)),
                    Value::Number(cb + rng.random_range(-10.0..10.0)),
                    Value::Category(["x", "y", "z"][rng.random_range(0..3)].into()),
                ],
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Record similarity written out from its definition: weighted mean over
/// active fields of `τ²/(τ²+d²)` or exact-match, ignoring missing values,
/// 0.5 when nothing is comparable.
pub fn oracle_similarity(a: &Record, b: &Record, schema: &Schema, sim: &SimilarityParams) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, f) in schema.fields().iter().enumerate() {
        if !f.is_active() {
            continue;
        }
        let s = match (&a.values[i], &b.values[i]) {
            (Value::Number(x), Value::Number(y)) => {
                let tau = sim.scale(i).unwrap();
                tau * tau / (tau * tau + (x - y) * (x - y))
            }
            (Value::Category(x), Value::Category(y)) => f64::from(u8::from(x == y)),
            _ => continue,
        };
        num += f.weight * s;
        den += f.weight;
    }
    if den > 0.0 { num / den } else { 0.5 }
}

pub fn similarity_matrix(records: &[Record], schema: &Schema, sim: &SimilarityParams) -> Vec<Vec<f64>> {
    records
        .iter()
        .map(|a| records.iter().map(|b| oracle_similarity(a, b, schema, sim)).collect())
        .collect()
}

/// Condorcet criterion of a labelling from a precomputed similarity matrix.
pub fn oracle_criterion(s: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += if labels[i] == labels[j] { s[i][j] } else { 1.0 - s[i][j] };
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Calls `f` on every partition of `0..n` into at most `max_blocks`
/// blocks, as restricted growth strings.
pub fn for_each_partition(n: usize, max_blocks: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(labels: &mut Vec<usize>, n: usize, used: usize, max_blocks: usize, f: &mut dyn FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        let limit = (used + 1).min(max_blocks);
        for b in 0..limit {
            labels.push(b);
            go(labels, n, used.max(b + 1), max_blocks, f);
            labels.pop();
        }
    }
    go(&mut Vec::with_capacity(n), n, 0, max_blocks, f);
}

/// Pair-counting Rand agreement adjusted for chance, computed over every
/// pair directly.
pub fn oracle_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += f64::from(u8::from(sa && sb));
            in_a += f64::from(u8::from(sa));
            in_b += f64::from(u8::from(sb));
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = in_a * in_b / pairs;
    (both - expected) / (0.5 * (in_a + in_b) - expected)
}
