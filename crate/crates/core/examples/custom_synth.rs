//! Generates data from an inline segment spec and inspects the planted truth.

use custseg::synth::{generate, SynthSpec};

const SPEC: &str = r#"
n_records = 10
seed = 3

[[fields]]
name = "spend"
kind = "continuous"
clip_at_zero = true

[[fields]]
name = "channel"
kind = "categorical"

[[segments]]
name = "online"
proportion = 0.7
continuous = { spend = { mean = 40.0, sd = 25.0 } }
categorical = { channel = { web = 0.9, store = 0.1 } }

[[segments]]
name = "store"
proportion = 0.3
continuous = { spend = { mean = 120.0, sd = 10.0 } }
categorical = { channel = { web = 0.2, store = 0.8 } }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::from_toml(SPEC)?;
    println!("segment sizes: {:?}", spec.segment_sizes());
    let data = generate(&spec)?;
    print!("{}", data.to_csv());
    println!();
    print!("{}", data.truth_csv());
    Ok(())
}
