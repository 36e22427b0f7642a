//! Drives the `custseg` command line end to end in a scratch directory:
//! synth, cleanse, cluster, profile, then score.

use std::fs;

use custseg::cli::main_with_args;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    fs::write(p("retail.conf"), include_str!("../configs/retail.conf"))?;
    let [conf, synth, data, clean, report, flat, model, trace, reports, scored] = ["retail.conf", "synth", "synth/data.csv", "clean.csv", "cleansing.txt", "flat.txt", "model.txt", "trace.log", "reports", "scored.txt"].map(p);

    let steps = [
        vec!["synth", "--spec", "table1-like", "--out", &synth],
        vec!["cleanse", "--config", &conf, "--in", &data, "--out", &clean, "--report", &report],
        vec!["cluster", "--config", &conf, "--in", &clean, "--out-flat", &flat, "--out-model", &model, "--trace", &trace],
        vec!["profile", "--config", &conf, "--in", &clean, "--assignments", &flat, "--out", &reports],
        vec!["score", "--model", &model, "--in", &clean, "--out", &scored],
    ];
    for step in steps {
        println!("$ custseg {}", step[0]);
        let mut args = vec!["custseg"];
        args.extend(step.iter().copied());
        let code = main_with_args(args, &mut std::io::stdout(), &mut std::io::stderr());
        if code != 0 {
            return Err(format!("{} exited with {code}", step[0]).into());
        }
    }

    println!("\ntrace.log:\n{}", fs::read_to_string(&trace)?);
    println!("reports/importance.csv:\n{}", fs::read_to_string(p("reports/importance.csv"))?);
    Ok(())
}
