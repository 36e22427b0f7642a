//! Plants four Gaussian segments, clusters them and scores the recovery.

use std::time::Instant;

use custseg::io::{cleanse, read_csv_from, CleansingRules};
use custseg::synth::{evaluate, generate, SynthSpec};
use custseg::{run, Mode, RunParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::builtin("planted-4")?;
    let data = generate(&spec)?;
    let schema = spec.schema()?;
    let rows = read_csv_from(data.to_csv().as_bytes(), &schema)?;
    let records = cleanse(&rows, &schema, &CleansingRules::default()).records;

    for mode in [Mode::Histogram, Mode::Exact] {
        let params = RunParams { mode, ..RunParams::default() };
        let started = Instant::now();
        let out = run(&records, &schema, &params)?;
        let ev = evaluate(&out.assignments, &data.truth)?;
        println!(
            "{mode:>9}: {} clusters, ARI {:.4}, {:.2?}",
            ev.non_empty_clusters,
            ev.ari,
            started.elapsed()
        );
        print!("{}", ev.confusion.to_table());
    }
    Ok(())
}
