//! Saves a model, reloads it and assigns customers it has never seen.

use custseg::engine::assign_to_model;
use custseg::io::{cleanse, read_csv_from, CleansingRules};
use custseg::model_file;
use custseg::synth::{generate, SynthSpec};
use custseg::{coerce_record, run, RunParams, Schema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = Schema::retail();
    let spec = SynthSpec::builtin("table1-like")?;
    let rows = read_csv_from(generate(&spec)?.to_csv().as_bytes(), &schema)?;
    let records = cleanse(&rows, &schema, &CleansingRules::default()).records;
    let out = run(&records, &schema, &RunParams::default())?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.txt");
    model_file::save(&out.model, &path)?;
    let model = model_file::load(&path)?;
    println!("model: {} clusters, schema hash {}", model.display_order.len(), model_file::schema_hash(&model.schema));
    for &id in &model.display_order {
        println!("  cluster {id}: {} customers", model.clusters[id].size);
    }

    let newcomers = [
        ["N1", "3", "250.00", "1150.00", "Electronics"],
        ["N2", "95", "4.00", "30.00", "Grocery"],
        ["N3", "40", "35.00", "160.00", "Home"],
    ];
    for raw in newcomers {
        let r = coerce_record(&raw, &schema)?;
        let a = assign_to_model(&model, &r)?;
        println!(
            "{} -> cluster {} (condorcet {:.3}, confidence {:.3})",
            a.record_id, a.cluster_id, a.condorcet_value, a.confidence
        );
    }
    Ok(())
}
