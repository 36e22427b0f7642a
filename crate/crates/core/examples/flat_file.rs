//! Writes clustering results in the fixed-width flat file and reads them back.

use custseg::io::{cleanse, parse_fixed_width, read_csv_from, write_fixed_width_to, CleansingRules};
use custseg::synth::{generate, SynthSpec};
use custseg::{run, RunParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::builtin("planted-4")?;
    let schema = spec.schema()?;
    let rows = read_csv_from(generate(&spec)?.to_csv().as_bytes(), &schema)?;
    let records = cleanse(&rows, &schema, &CleansingRules::default()).records;
    let out = run(&records, &schema, &RunParams::default())?;

    let mut buf = Vec::new();
    let layout = write_fixed_width_to(&mut buf, &records, &out.assignments, &schema)?;
    for c in &layout.columns {
        println!("{:<16} width {:>2}", c.name, c.width);
    }
    let text = String::from_utf8(buf)?;
    println!();
    for line in text.lines().take(5) {
        println!("|{line}|");
    }

    let back = parse_fixed_width(&text, &schema)?;
    assert_eq!(back.assignments, out.assignments);
    println!("\n{} lines of {} characters read back unchanged", back.assignments.len(), layout.record_width());
    Ok(())
}
