//! How the continuous kernel, the accuracy setting and the vote interact.

use custseg::engine::init_model;
use custseg::similarity::{continuous_kernel, effective_scale, record_similarity, vote};
use custseg::{coerce_record, RunParams, Schema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = 10.0;
    println!("distance  acc=0.3  acc=0.5  acc=0.8");
    for d in [0.0, 2.5, 5.0, 10.0, 20.0, 40.0] {
        let row: Vec<String> = [0.3, 0.5, 0.8]
            .iter()
            .map(|&a| format!("{:.4}", continuous_kernel(d, effective_scale(base, a))))
            .collect();
        println!("{d:>8}  {}", row.join("   "));
    }

    let schema = Schema::retail();
    let customers = [
        ["C1", "4", "120.00", "610.00", "Grocery"],
        ["C2", "6", "110.00", "580.00", "Toys"],
        ["C3", "80", "-3.50", "25.00", "Grocery"],
    ];
    let records = customers
        .iter()
        .map(|raw| coerce_record(raw, &schema))
        .collect::<Result<Vec<_>, _>>()?;
    let sim = init_model(&records, &schema, &RunParams::default())?.model.similarity;
    println!("\neffective scales: {:?}", sim.effective_scales(&schema));
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let s = record_similarity(&records[i], &records[j], &schema, &sim);
        println!("{} ~ {}: similarity {s:.4}, vote {:+.4}", records[i].id, records[j].id, vote(s));
    }
    Ok(())
}
