//! The `custseg` command line: synth, cleanse, cluster, profile and score.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{importance, AnalysisError, ImportanceReport, Metric, DEFAULT_IMPORTANCE_BINS};
use crate::config::{Config, ConfigError};
use crate::engine::{assign_to_model, init_model, run, EngineError};
use crate::io::{
    cleanse, read_csv, read_fixed_width, write_csv, write_fixed_width, write_reports, CleansingRules, IoError,
    ReportBundle,
};
use crate::model_file::{self, ModelFileError};
use crate::profiler::{all_variable_profiles, profile, ProfileError};
use crate::schema::{Record, Schema};
use crate::synth::{generate, SynthError, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "custseg", version, about = "Customer segmentation by demographic clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic customer base with planted segments.
    Synth {
        /// TOML spec file, or a bundled spec name (table1-like, planted-4).
        #[arg(long)]
        spec: String,
        /// Directory receiving data.csv and truth.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop unusable rows and write the clean records.
    Cleanse {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Cluster clean records and write the flat file and model.
    Cluster {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_flat: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Profile clusters on revenue and profit and write the reports.
    Profile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Flat file written by `cluster`.
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// chi-square, entropy, condorcet or database-order.
        #[arg(long, default_value = "chi-square")]
        importance: String,
    },
    /// Assign new records to the clusters of a saved model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File { path: path.into(), source }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out`. Returns the process exit code: 0 on success, 2 on any
/// usage or data error.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synth { spec, out: dir } => cmd_synth(spec, dir, out),
        Command::Cleanse { config, input, out: path, report } => cmd_cleanse(config, input, path, report, out),
        Command::Cluster { config, input, out_flat, out_model, trace } => {
            cmd_cluster(config, input, out_flat, out_model, trace.as_deref(), out, err)
        }
        Command::Profile { config, input, assignments, out: dir, importance } => {
            cmd_profile(config, input, assignments, dir, importance, out)
        }
        Command::Score { model, input, out: path } => cmd_score(model, input, path, out),
    }
}

fn cmd_synth(spec: &str, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let path = Path::new(spec);
    let spec = if path.exists() { SynthSpec::from_file(path)? } else { SynthSpec::builtin(spec)? };
    let data = generate(&spec)?;
    data.write(dir)?;
    let _ = writeln!(out, "wrote {} records to {}", data.rows.len(), dir.join("data.csv").display());
    Ok(())
}

fn cmd_cleanse(config: &Path, input: &Path, output: &Path, report: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let config = Config::from_file(config)?;
    let rows = read_csv(input, &config.schema)?;
    let cleansed = cleanse(&rows, &config.schema, &CleansingRules::default());
    write_csv(output, &cleansed.records, &config.schema)?;
    fs::write(report, cleansed.report.to_string()).map_err(file_err(report))?;
    let r = &cleansed.report;
    let _ = writeln!(out, "read {}, kept {}, dropped {}", r.rows_read, r.rows_kept, r.rows_dropped);
    Ok(())
}

/// Reads a CSV that must already be clean.
fn read_clean(path: &Path, schema: &Schema) -> Result<Vec<Record>, CliError> {
    let rows = read_csv(path, schema)?;
    let cleansed = cleanse(&rows, schema, &CleansingRules::default());
    if cleansed.report.rows_dropped > 0 {
        return Err(CliError::Data(format!(
            "{}: {} of {} rows are unusable; run `custseg cleanse` first",
            path.display(),
            cleansed.report.rows_dropped,
            cleansed.report.rows_read
        )));
    }
    Ok(cleansed.records)
}

fn cmd_cluster(
    config: &Path,
    input: &Path,
    flat: &Path,
    model_path: &Path,
    trace: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let config = Config::from_file(config)?;
    let records = read_clean(input, &config.schema)?;
    let result = run(&records, &config.schema, &config.params)?;
    for w in &result.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    write_fixed_width(&records, &result.assignments, &config.schema, flat)?;
    model_file::save(&result.model, model_path)?;
    if let Some(t) = trace {
        fs::write(t, result.trace.to_log()).map_err(file_err(t))?;
    }
    let model = &result.model;
    let _ = writeln!(out, "clusters: {}", model.display_order.len());
    for &id in &model.display_order {
        let _ = writeln!(out, "cluster {id}: {}", model.clusters[id].size);
    }
    Ok(())
}

fn cmd_profile(
    config: &Path,
    input: &Path,
    assignments: &Path,
    dir: &Path,
    metric: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let config = Config::from_file(config)?;
    let metric = Metric::parse(metric)?;
    let records = read_clean(input, &config.schema)?;
    let flat = read_fixed_width(assignments, &config.schema)?;
    let by_id: HashMap<&str, usize> =
        flat.assignments.iter().map(|a| (a.record_id.as_str(), a.cluster_id)).collect();
    if by_id.len() != records.len() || flat.assignments.len() != records.len() {
        return Err(CliError::Data(format!(
            "{} records but {} assignments",
            records.len(),
            flat.assignments.len()
        )));
    }
    let mut labels = Vec::with_capacity(records.len());
    for r in &records {
        let &c = by_id
            .get(r.id.as_str())
            .ok_or_else(|| CliError::Data(format!("record {} has no assignment", r.id)))?;
        if c >= config.params.max_clusters {
            return Err(CliError::Data(format!(
                "record {} is in cluster {c}, beyond max_clusters {}",
                r.id, config.params.max_clusters
            )));
        }
        labels.push(c);
    }

    let p = profile(&records, &labels, &config.schema, &config.profile)?;
    let similarity = init_model(&records, &config.schema, &config.params)?.model.similarity;
    let imp = match importance(metric, &records, &labels, &config.schema, &similarity, DEFAULT_IMPORTANCE_BINS) {
        Ok(r) => r,
        // A single cluster has nothing to discriminate.
        Err(AnalysisError::DegenerateClustering(_)) => ImportanceReport { metric, entries: Vec::new() },
        Err(e) => return Err(e.into()),
    };
    let hist = all_variable_profiles(&records, &labels, &config.schema, DEFAULT_IMPORTANCE_BINS);
    let bundle = ReportBundle { profile: &p, importance: &imp, histograms: &hist, trace: None, cleansing: None };
    write_reports(&bundle, dir)?;
    let _ = write!(out, "{}", p.to_table());
    Ok(())
}

fn cmd_score(model_path: &Path, input: &Path, output: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let model = model_file::load(model_path)?;
    let records = read_clean(input, &model.schema)?;
    let assignments = records
        .iter()
        .map(|r| assign_to_model(&model, r))
        .collect::<Result<Vec<_>, _>>()?;
    write_fixed_width(&records, &assignments, &model.schema, output)?;
    let _ = writeln!(out, "scored {} records", records.len());
    Ok(())
}
