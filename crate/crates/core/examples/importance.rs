//! Ranks variables by how well they separate the clusters, under each metric.

use custseg::analysis::{importance, Metric, DEFAULT_IMPORTANCE_BINS};
use custseg::synth::{generate, SynthSpec};
use custseg::{coerce_record, run, FieldKind, FieldSpec, RunParams, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::builtin("planted-4")?;
    let data = generate(&spec)?;
    let base = spec.schema()?;

    // Append an independent noise column as a supplementary field.
    let mut fields = base.fields().to_vec();
    fields.push(FieldSpec::supplementary("noise", FieldKind::Continuous));
    let schema = Schema::new(fields)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let records = data
        .rows
        .iter()
        .map(|row| {
            let mut row = row.clone();
            row.push(format!("{:.2}", rng.random_range(0.0..100.0)));
            coerce_record(&row, &schema)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let out = run(&records, &schema, &RunParams::default())?;
    let labels = out.labels();
    for metric in [Metric::ChiSquare, Metric::Entropy, Metric::Condorcet, Metric::DatabaseOrder] {
        let report = importance(metric, &records, &labels, &schema, &out.model.similarity, DEFAULT_IMPORTANCE_BINS)?;
        print!("{}", report.to_csv());
    }
    Ok(())
}
