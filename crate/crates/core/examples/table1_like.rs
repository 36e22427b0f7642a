//! Generates the retail-like customer base, clusters it with the default
//! parameters and prints the ranked value profile.

use std::time::Instant;

use custseg::io::{cleanse, read_csv_from, CleansingRules};
use custseg::profiler::{profile, ProfileSpec};
use custseg::synth::{evaluate, generate, SynthSpec};
use custseg::{run, RunParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::builtin("table1-like")?;
    let data = generate(&spec)?;
    let schema = spec.schema()?;
    let rows = read_csv_from(data.to_csv().as_bytes(), &schema)?;
    let records = cleanse(&rows, &schema, &CleansingRules::default()).records;

    let started = Instant::now();
    let out = run(&records, &schema, &RunParams::default())?;
    println!("clustered {} customers in {:.2?}", records.len(), started.elapsed());

    let p = profile(&records, &out.labels(), &schema, &ProfileSpec::retail())?;
    print!("{}", p.to_table());

    let ev = evaluate(&out.assignments, &data.truth)?;
    println!("ARI against planted segments: {:.4}", ev.ari);
    print!("{}", ev.confusion.to_table());
    Ok(())
}
