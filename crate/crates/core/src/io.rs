//! Input CSV, cleansing, the fixed-width assignment file and report output.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::analysis::ImportanceReport;
use crate::engine::{Assignment, RunTrace};
use crate::profiler::{histograms_to_csv, Profile, VariableProfile};
use crate::schema::{coerce_record, CoerceError, FieldKind, FieldRole, Record, Schema, Value};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header lacks field {0}")]
    MissingHeaderField(String),
    #[error("identifier {0:?} is wider than 16 characters")]
    IdentifierTooWide(String),
    #[error("field {field}: {value:?} does not fit the fixed-width column")]
    ValueTooWide { field: String, value: String },
    #[error("field {field}: {value:?} is not ASCII")]
    NonAscii { field: String, value: String },
    #[error("no assignment for record {0}")]
    MissingAssignment(String),
    #[error("line {line}: expected {expected} bytes, found {found}")]
    LayoutMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: column {column}: cannot parse {token:?}")]
    BadField { line: usize, column: String, token: String },
}

impl IoError {
    fn at(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
        move |source| IoError::Io { path: path.to_path_buf(), source }
    }
}

/// One CSV data row, realigned to schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawRow {
    Fields(Vec<String>),
    /// The row's cell count disagreed with the header.
    Malformed { line: u64, found: usize, expected: usize },
}

/// Reads a headed CSV file. Columns are matched to schema fields by header
/// name, in any order; columns the schema does not name are ignored.
pub fn read_csv(path: &Path, schema: &Schema) -> Result<Vec<RawRow>, IoError> {
    let file = fs::File::open(path).map_err(IoError::at(path))?;
    read_csv_from(file, schema)
}

pub fn read_csv_from<R: Read>(reader: R, schema: &Schema) -> Result<Vec<RawRow>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut columns = Vec::with_capacity(schema.len());
    for field in schema.fields() {
        let pos = header
            .iter()
            .position(|h| *h == field.name)
            .ok_or_else(|| IoError::MissingHeaderField(field.name.clone()))?;
        columns.push(pos);
    }
    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        if rec.len() != header.len() {
            let line = rec.position().map_or(0, |p| p.line());
            rows.push(RawRow::Malformed { line, found: rec.len(), expected: header.len() });
            continue;
        }
        rows.push(RawRow::Fields(columns.iter().map(|&c| rec[c].to_string()).collect()));
    }
    Ok(rows)
}

/// Which cleansing steps run. Both are on by default; the arity and parse
/// checks always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleansingRules {
    pub drop_missing_active: bool,
    pub drop_duplicate_ids: bool,
}

impl Default for CleansingRules {
    fn default() -> Self {
        Self { drop_missing_active: true, drop_duplicate_ids: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropReasons {
    pub missing_active: usize,
    pub unparseable: usize,
    pub duplicate_id: usize,
    pub arity_mismatch: usize,
}

impl DropReasons {
    pub fn total(&self) -> usize {
        self.missing_active + self.unparseable + self.duplicate_id + self.arity_mismatch
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleansingReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub reasons: DropReasons,
    /// `(field, missing count)` in schema order, over rows that parsed.
    pub missing_by_field: Vec<(String, usize)>,
}

impl fmt::Display for CleansingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows_read {}", self.rows_read)?;
        writeln!(f, "rows_kept {}", self.rows_kept)?;
        writeln!(f, "rows_dropped {}", self.rows_dropped)?;
        writeln!(f, "dropped.missing_active {}", self.reasons.missing_active)?;
        writeln!(f, "dropped.unparseable {}", self.reasons.unparseable)?;
        writeln!(f, "dropped.duplicate_id {}", self.reasons.duplicate_id)?;
        writeln!(f, "dropped.arity_mismatch {}", self.reasons.arity_mismatch)?;
        for (field, n) in &self.missing_by_field {
            writeln!(f, "missing.{field} {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cleansed {
    pub records: Vec<Record>,
    pub report: CleansingReport,
}

/// Arity check, coercion, missing-active filter, then duplicate-id filter
/// (first occurrence wins). Every dropped row is tallied, never raised.
pub fn cleanse(rows: &[RawRow], schema: &Schema, rules: &CleansingRules) -> Cleansed {
    let mut report = CleansingReport {
        rows_read: rows.len(),
        missing_by_field: schema.fields().iter().map(|f| (f.name.clone(), 0)).collect(),
        ..Default::default()
    };
    let active: Vec<usize> = schema.active_indices().collect();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in rows {
        let cells = match row {
            RawRow::Fields(cells) => cells,
            RawRow::Malformed { .. } => {
                report.reasons.arity_mismatch += 1;
                continue;
            }
        };
        let record = match coerce_record(cells, schema) {
            Ok(r) => r,
            Err(CoerceError::ArityMismatch { .. }) => {
                report.reasons.arity_mismatch += 1;
                continue;
            }
            Err(_) => {
                report.reasons.unparseable += 1;
                continue;
            }
        };
        for (slot, value) in report.missing_by_field.iter_mut().zip(&record.values) {
            if value.is_missing() {
                slot.1 += 1;
            }
        }
        if rules.drop_missing_active && active.iter().any(|&i| record.values[i].is_missing()) {
            report.reasons.missing_active += 1;
            continue;
        }
        if rules.drop_duplicate_ids && !seen.insert(record.id.clone()) {
            report.reasons.duplicate_id += 1;
            continue;
        }
        records.push(record);
    }
    report.rows_kept = records.len();
    report.rows_dropped = report.reasons.total();
    Cleansed { records, report }
}

/// Back to raw cells, for re-cleansing or writing.
pub fn record_cells(record: &Record) -> Vec<String> {
    record
        .values
        .iter()
        .map(|v| match v {
            Value::Number(x) => x.to_string(),
            Value::Category(s) => s.clone(),
            Value::Missing => String::new(),
        })
        .collect()
}

/// Headed CSV in schema order. Numbers use the shortest round-trip form.
pub fn write_csv_to<W: Write>(writer: W, records: &[Record], schema: &Schema) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.fields().iter().map(|f| f.name.as_str()))?;
    for r in records {
        w.write_record(record_cells(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[Record], schema: &Schema) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(IoError::at(path))?;
    write_csv_to(std::io::BufWriter::new(file), records, schema)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Justify {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnFormat {
    Text,
    Integer,
    /// Fixed point, six decimals.
    Fixed6,
    /// Fixed point, two decimals.
    Fixed2,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub width: usize,
    pub justify: Justify,
    pub format: ColumnFormat,
}

/// Column layout of the assignment flat file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedWidthLayout {
    pub columns: Vec<Column>,
}

pub const ID_WIDTH: usize = 16;
pub const CLUSTER_WIDTH: usize = 4;
pub const SCORE_WIDTH: usize = 8;
pub const CONTINUOUS_WIDTH: usize = 14;
pub const CATEGORICAL_WIDTH: usize = 16;

impl FixedWidthLayout {
    /// Identifier, cluster id, condorcet value, confidence, then every other
    /// schema field in order.
    pub fn for_schema(schema: &Schema) -> Self {
        let col = |name: &str, width, justify, format| Column { name: name.to_string(), width, justify, format };
        let id_name = &schema.field(schema.identifier_index()).name;
        let mut columns = vec![
            col(id_name, ID_WIDTH, Justify::Left, ColumnFormat::Text),
            col("cluster_id", CLUSTER_WIDTH, Justify::Right, ColumnFormat::Integer),
            col("condorcet_value", SCORE_WIDTH, Justify::Right, ColumnFormat::Fixed6),
            col("confidence", SCORE_WIDTH, Justify::Right, ColumnFormat::Fixed6),
        ];
        for field in schema.fields().iter().filter(|f| f.role != FieldRole::Identifier) {
            columns.push(match field.kind {
                FieldKind::Continuous => col(&field.name, CONTINUOUS_WIDTH, Justify::Right, ColumnFormat::Fixed2),
                FieldKind::Categorical => col(&field.name, CATEGORICAL_WIDTH, Justify::Left, ColumnFormat::Text),
            });
        }
        Self { columns }
    }

    /// Bytes per line, excluding the line feed.
    pub fn record_width(&self) -> usize {
        self.columns.iter().map(|c| c.width).sum()
    }
}

fn pad(out: &mut String, text: &str, width: usize, justify: Justify) {
    match justify {
        Justify::Left => {
            let _ = write!(out, "{text:<width$}");
        }
        Justify::Right => {
            let _ = write!(out, "{text:>width$}");
        }
    }
}

fn fit(out: &mut String, field: &str, text: &str, width: usize, justify: Justify) -> Result<(), IoError> {
    if text.len() > width {
        return Err(IoError::ValueTooWide { field: field.to_string(), value: text.to_string() });
    }
    pad(out, text, width, justify);
    Ok(())
}

fn ascii(field: &str, value: &str) -> Result<(), IoError> {
    if value.is_ascii() {
        Ok(())
    } else {
        Err(IoError::NonAscii { field: field.to_string(), value: value.to_string() })
    }
}

/// One flat-file line, without the line feed.
pub fn fixed_width_line(record: &Record, assignment: &Assignment, schema: &Schema) -> Result<String, IoError> {
    let id_name = &schema.field(schema.identifier_index()).name;
    ascii(id_name, &record.id)?;
    if record.id.len() > ID_WIDTH {
        return Err(IoError::IdentifierTooWide(record.id.clone()));
    }
    let mut line = String::new();
    pad(&mut line, &record.id, ID_WIDTH, Justify::Left);
    fit(&mut line, "cluster_id", &assignment.cluster_id.to_string(), CLUSTER_WIDTH, Justify::Right)?;
    fit(&mut line, "condorcet_value", &format!("{:.6}", assignment.condorcet_value), SCORE_WIDTH, Justify::Right)?;
    fit(&mut line, "confidence", &format!("{:.6}", assignment.confidence), SCORE_WIDTH, Justify::Right)?;
    for (field, value) in schema.fields().iter().zip(&record.values) {
        if field.role == FieldRole::Identifier {
            continue;
        }
        match (field.kind, value) {
            (FieldKind::Continuous, Value::Number(x)) => {
                fit(&mut line, &field.name, &format!("{x:.2}"), CONTINUOUS_WIDTH, Justify::Right)?
            }
            (FieldKind::Continuous, _) => pad(&mut line, "", CONTINUOUS_WIDTH, Justify::Right),
            (FieldKind::Categorical, Value::Category(s)) => {
                ascii(&field.name, s)?;
                let cut = &s[..s.len().min(CATEGORICAL_WIDTH)];
                pad(&mut line, cut, CATEGORICAL_WIDTH, Justify::Left);
            }
            (FieldKind::Categorical, _) => pad(&mut line, "", CATEGORICAL_WIDTH, Justify::Left),
        }
    }
    Ok(line)
}

/// Writes one line per record. Assignments are matched by record id.
pub fn write_fixed_width_to<W: Write>(
    mut writer: W,
    records: &[Record],
    assignments: &[Assignment],
    schema: &Schema,
) -> Result<FixedWidthLayout, IoError> {
    let by_id: HashMap<&str, &Assignment> = assignments.iter().map(|a| (a.record_id.as_str(), a)).collect();
    let io_err = |source| IoError::Io { path: PathBuf::from("<flat file>"), source };
    for r in records {
        let a = by_id.get(r.id.as_str()).ok_or_else(|| IoError::MissingAssignment(r.id.clone()))?;
        let mut line = fixed_width_line(r, a, schema)?;
        line.push('\n');
        writer.write_all(line.as_bytes()).map_err(io_err)?;
    }
    writer.flush().map_err(io_err)?;
    Ok(FixedWidthLayout::for_schema(schema))
}

pub fn write_fixed_width(
    records: &[Record],
    assignments: &[Assignment],
    schema: &Schema,
    path: &Path,
) -> Result<FixedWidthLayout, IoError> {
    let file = fs::File::create(path).map_err(IoError::at(path))?;
    write_fixed_width_to(std::io::BufWriter::new(file), records, assignments, schema)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatFile {
    pub records: Vec<Record>,
    pub assignments: Vec<Assignment>,
}

/// Parses flat-file text written for `schema`.
pub fn parse_fixed_width(text: &str, schema: &Schema) -> Result<FlatFile, IoError> {
    let layout = FixedWidthLayout::for_schema(schema);
    let width = layout.record_width();
    let mut out = FlatFile { records: Vec::new(), assignments: Vec::new() };
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(out);
    }
    let id_index = schema.identifier_index();
    for (n, line) in body.split('\n').enumerate() {
        let line_no = n + 1;
        if line.len() != width || !line.is_ascii() {
            return Err(IoError::LayoutMismatch { line: line_no, expected: width, found: line.len() });
        }
        let mut cells = Vec::with_capacity(layout.columns.len());
        let mut at = 0;
        for c in &layout.columns {
            cells.push(&line[at..at + c.width]);
            at += c.width;
        }
        let bad = |column: &str, token: &str| IoError::BadField {
            line: line_no,
            column: column.to_string(),
            token: token.to_string(),
        };
        let id = cells[0].trim_end().to_string();
        let number = |i: usize| -> Result<f64, IoError> {
            cells[i].trim().parse::<f64>().map_err(|_| bad(&layout.columns[i].name, cells[i]))
        };
        let cluster_id = cells[1].trim().parse::<usize>().map_err(|_| bad("cluster_id", cells[1]))?;
        out.assignments.push(Assignment {
            record_id: id.clone(),
            cluster_id,
            condorcet_value: number(2)?,
            confidence: number(3)?,
        });
        let mut values = Vec::with_capacity(schema.len());
        let mut col = 4;
        for (i, field) in schema.fields().iter().enumerate() {
            if i == id_index {
                values.push(Value::Category(id.clone()));
                continue;
            }
            let cell = cells[col];
            values.push(match field.kind {
                _ if cell.trim().is_empty() => Value::Missing,
                FieldKind::Continuous => Value::Number(number(col)?),
                FieldKind::Categorical => Value::Category(cell.trim_end().to_string()),
            });
            col += 1;
        }
        out.records.push(Record { id, values });
    }
    Ok(out)
}

pub fn read_fixed_width(path: &Path, schema: &Schema) -> Result<FlatFile, IoError> {
    let text = fs::read_to_string(path).map_err(IoError::at(path))?;
    parse_fixed_width(&text, schema)
}

/// Outputs of a finished run, for [`write_reports`].
#[derive(Debug, Clone, Copy)]
pub struct ReportBundle<'a> {
    pub profile: &'a Profile,
    pub importance: &'a ImportanceReport,
    pub histograms: &'a [VariableProfile],
    pub trace: Option<&'a RunTrace>,
    pub cleansing: Option<&'a CleansingReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    /// Data rows for CSV files, lines for text files.
    pub rows: usize,
}

/// Writes `profiles.csv`, `importance.csv`, `histograms.csv` and, when
/// present, `trace.log` and `cleansing.txt`.
pub fn write_reports(bundle: &ReportBundle<'_>, out_dir: &Path) -> Result<Vec<ManifestEntry>, IoError> {
    fs::create_dir_all(out_dir).map_err(IoError::at(out_dir))?;
    let mut files: Vec<(&str, String, bool)> = vec![
        ("profiles.csv", bundle.profile.to_csv(), true),
        ("importance.csv", bundle.importance.to_csv(), true),
        ("histograms.csv", histograms_to_csv(bundle.histograms), true),
    ];
    if let Some(t) = bundle.trace {
        files.push(("trace.log", t.to_log(), false));
    }
    if let Some(c) = bundle.cleansing {
        files.push(("cleansing.txt", c.to_string(), false));
    }
    let mut manifest = Vec::new();
    for (name, text, headed) in files {
        let path = out_dir.join(name);
        fs::write(&path, &text).map_err(IoError::at(&path))?;
        let lines = count_csv_rows(&text, headed);
        manifest.push(ManifestEntry { file: name.to_string(), rows: lines });
    }
    Ok(manifest)
}

fn count_csv_rows(text: &str, headed: bool) -> usize {
    if headed {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        rdr.records().count()
    } else {
        text.lines().count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FieldSpec;
    use proptest::prelude::*;

    fn raw(cells: &[&str]) -> RawRow {
        RawRow::Fields(cells.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn header_realignment_and_quoting() {
        let text = "total_revenue,top_revenue_department,customer_id,extra,recency,total_profit\n\
                    500,\"Home, Garden\",C1,zzz,3,50\n";
        let rows = read_csv_from(text.as_bytes(), &Schema::retail()).unwrap();
        assert_eq!(rows, vec![raw(&["C1", "3", "50", "500", "Home, Garden"])]);
        let quoted = "customer_id,recency,total_profit,total_revenue,top_revenue_department\nC2,1,2,3,\"say \"\"hi\"\"\"\n";
        let rows = read_csv_from(quoted.as_bytes(), &Schema::retail()).unwrap();
        assert_eq!(rows, vec![raw(&["C2", "1", "2", "3", "say \"hi\""])]);
    }

    #[test]
    fn missing_header_field() {
        let text = "customer_id,total_profit,total_revenue,top_revenue_department\n";
        let err = read_csv_from(text.as_bytes(), &Schema::retail()).unwrap_err();
        assert!(matches!(err, IoError::MissingHeaderField(ref f) if f == "recency"));
    }

    #[test]
    fn short_rows_flagged() {
        let text = "customer_id,recency,total_profit,total_revenue,top_revenue_department\nC1,1,2\n";
        let rows = read_csv_from(text.as_bytes(), &Schema::retail()).unwrap();
        assert!(matches!(rows[0], RawRow::Malformed { found: 3, expected: 5, .. }));
    }

    /// Ten rows: one missing an active value, one duplicate.
    fn fixture() -> Vec<RawRow> {
        let mut rows: Vec<RawRow> = (0..8)
            .map(|i| {
                RawRow::Fields(vec![
                    format!("C{i:03}"),
                    i.to_string(),
                    "10".into(),
                    "100".into(),
                    if i % 3 == 0 { String::new() } else { "Toys".into() },
                ])
            })
            .collect();
        rows.push(raw(&["C100", "", "10", "100", "Toys"]));
        rows.push(raw(&["C001", "9", "10", "100", "Toys"]));
        rows
    }

    #[test]
    fn cleanse_counts() {
        let out = cleanse(&fixture(), &Schema::retail(), &CleansingRules::default());
        let r = &out.report;
        assert_eq!((r.rows_read, r.rows_kept, r.rows_dropped), (10, 8, 2));
        assert_eq!(r.reasons.missing_active, 1);
        assert_eq!(r.reasons.duplicate_id, 1);
        assert_eq!(r.reasons.total(), 2);
        // The first C001 survives.
        assert_eq!(out.records[1].id, "C001");
        assert_eq!(out.records[1].values[1], Value::Number(1.0));
        // Supplementary gaps are kept and counted.
        assert!(out.records[0].values[4].is_missing());
        let dept = r.missing_by_field.iter().find(|(f, _)| f == "top_revenue_department").unwrap();
        assert_eq!(dept.1, 3);
        assert!(r.to_string().contains("dropped.duplicate_id 1\n"));
    }

    #[test]
    fn cleanse_unparseable_and_arity() {
        let rows = vec![
            raw(&["C1", "abc", "1", "1", "x"]),
            raw(&["C2", "1", "1"]),
            RawRow::Malformed { line: 4, found: 2, expected: 5 },
            raw(&["", "1", "1", "1", "x"]),
        ];
        let out = cleanse(&rows, &Schema::retail(), &CleansingRules::default());
        assert_eq!(out.report.reasons.unparseable, 2);
        assert_eq!(out.report.reasons.arity_mismatch, 2);
        assert!(out.records.is_empty());
    }

    fn assignment(id: &str, cluster: usize, condorcet: f64, confidence: f64) -> Assignment {
        Assignment { record_id: id.into(), cluster_id: cluster, condorcet_value: condorcet, confidence }
    }

    #[test]
    fn fixed_width_example_line() {
        let schema = Schema::retail();
        let rec = coerce_record(&["C001", "12", "500.25", "2300.0", "Grocery"], &schema).unwrap();
        let line = fixed_width_line(&rec, &assignment("C001", 3, 1.0, 0.75), &schema).unwrap();
        let expected = String::new()
            + "C001            "
            + "   3"
            + "1.000000"
            + "0.750000"
            + "         12.00"
            + "        500.25"
            + "       2300.00"
            + "Grocery         ";
        assert_eq!(line, expected);
        assert_eq!(line.len(), FixedWidthLayout::for_schema(&schema).record_width());
    }

    #[test]
    fn fixed_width_rejections() {
        let schema = Schema::retail();
        let rec = coerce_record(&["C0000000000000001", "1", "1", "1", "x"], &schema).unwrap();
        let err = fixed_width_line(&rec, &assignment(&rec.id, 0, 1.0, 1.0), &schema).unwrap_err();
        assert!(matches!(err, IoError::IdentifierTooWide(_)));
        let rec = coerce_record(&["C1", "1", "1", "1", "Café"], &schema).unwrap();
        let err = fixed_width_line(&rec, &assignment("C1", 0, 1.0, 1.0), &schema).unwrap_err();
        assert!(matches!(err, IoError::NonAscii { .. }));
        let rec = coerce_record(&["C1", "1e20", "1", "1", "x"], &schema).unwrap();
        let err = fixed_width_line(&rec, &assignment("C1", 0, 1.0, 1.0), &schema).unwrap_err();
        assert!(matches!(err, IoError::ValueTooWide { .. }));
    }

    #[test]
    fn categorical_truncated() {
        let schema = Schema::retail();
        let rec = coerce_record(&["C1", "1", "1", "1", "Consumer Electronics"], &schema).unwrap();
        let line = fixed_width_line(&rec, &assignment("C1", 0, 0.5, 0.5), &schema).unwrap();
        assert!(line.ends_with("Consumer Electro"));
    }

    #[test]
    fn empty_and_truncated_files() {
        let schema = Schema::retail();
        assert!(parse_fixed_width("", &schema).unwrap().records.is_empty());
        let rec = coerce_record(&["C1", "1", "1", "1", "x"], &schema).unwrap();
        let line = fixed_width_line(&rec, &assignment("C1", 0, 0.5, 0.5), &schema).unwrap();
        let text = format!("{line}\n{}\n", &line[..line.len() - 3]);
        let err = parse_fixed_width(&text, &schema).unwrap_err();
        assert!(matches!(err, IoError::LayoutMismatch { line: 2, .. }));
    }

    #[test]
    fn missing_assignment() {
        let schema = Schema::retail();
        let rec = coerce_record(&["C1", "1", "1", "1", "x"], &schema).unwrap();
        let err = write_fixed_width_to(Vec::new(), &[rec], &[], &schema).unwrap_err();
        assert!(matches!(err, IoError::MissingAssignment(_)));
    }

    #[test]
    fn reports_and_manifest() {
        use crate::analysis::Metric;
        use crate::profiler::{profile, ProfileSpec};
        let schema = Schema::retail();
        let recs: Vec<Record> = (0..4)
            .map(|i| coerce_record(&[format!("C{i}"), "1".into(), "2".into(), (10 * i).to_string(), "x".into()], &schema).unwrap())
            .collect();
        let labels = [0, 0, 1, 1];
        let p = profile(&recs, &labels, &schema, &ProfileSpec::retail()).unwrap();
        let imp = ImportanceReport { metric: Metric::ChiSquare, entries: Vec::new() };
        let hist = crate::profiler::all_variable_profiles(&recs, &labels, &schema, 2);
        let dir = tempfile::tempdir().unwrap();
        let bundle = ReportBundle { profile: &p, importance: &imp, histograms: &hist, trace: None, cleansing: None };
        let manifest = write_reports(&bundle, dir.path()).unwrap();
        assert_eq!(manifest.len(), 3);
        assert_eq!(manifest[0], ManifestEntry { file: "profiles.csv".into(), rows: 2 });
        assert_eq!(manifest[1].rows, 0);
        assert_eq!(fs::read_to_string(dir.path().join("importance.csv")).unwrap(), "metric,field,score,rank\n");
        let hist_text = fs::read_to_string(dir.path().join("histograms.csv")).unwrap();
        assert_eq!(manifest[2].rows, hist_text.lines().count() - 1);
    }

    fn schema_with_missing_sup() -> Schema {
        Schema::new(vec![
            FieldSpec::identifier("id"),
            FieldSpec::active("a", FieldKind::Continuous),
            FieldSpec::active("c", FieldKind::Categorical),
            FieldSpec::supplementary("s", FieldKind::Continuous),
        ])
        .unwrap()
    }

    proptest! {
        #[test]
        fn round_trip(
            rows in proptest::collection::vec(
                ("[A-Za-z0-9]{1,16}", 0usize..10_000, 0u32..=1_000_000, 0u32..=1_000_000,
                 -1e9f64..1e9, "[A-Za-z][A-Za-z ]{0,14}[A-Za-z]", proptest::option::of(0f64..1e6)),
                0..40),
        ) {
            let schema = schema_with_missing_sup();
            let mut records = Vec::new();
            let mut assignments = Vec::new();
            for (i, (id, cluster, cv, cf, a, c, s)) in rows.into_iter().enumerate() {
                let id = format!("{id}{i}").chars().rev().take(16).collect::<String>();
                let values = vec![
                    Value::Category(id.clone()),
                    Value::Number(a),
                    Value::Category(c),
                    s.map_or(Value::Missing, Value::Number),
                ];
                assignments.push(assignment(&id, cluster, cv as f64 / 1e6, cf as f64 / 1e6));
                records.push(Record { id, values });
            }
            let mut buf = Vec::new();
            let layout = write_fixed_width_to(&mut buf, &records, &assignments, &schema).unwrap();
            let text = String::from_utf8(buf).unwrap();
            for line in text.lines() {
                prop_assert_eq!(line.len(), layout.record_width());
            }
            let back = parse_fixed_width(&text, &schema).unwrap();
            prop_assert_eq!(&back.assignments, &assignments);
            for (r, b) in records.iter().zip(&back.records) {
                prop_assert_eq!(&r.id, &b.id);
                prop_assert_eq!(&r.values[2], &b.values[2]);
                for i in [1, 3] {
                    match (&r.values[i], &b.values[i]) {
                        (Value::Number(x), Value::Number(y)) => prop_assert!((x - y).abs() <= 0.005 + 1e-9 * x.abs()),
                        (Value::Missing, Value::Missing) => {}
                        other => prop_assert!(false, "{:?}", other),
                    }
                }
            }
        }

        #[test]
        fn cleanse_conserves_and_is_idempotent(
            rows in proptest::collection::vec(
                proptest::collection::vec(prop_oneof!["", "C[0-9]", "[0-9]{1,3}", "x|y", "1e3", "abc"], 3..7),
                0..60),
        ) {
            let schema = Schema::retail();
            let rows: Vec<RawRow> = rows.into_iter().map(RawRow::Fields).collect();
            let first = cleanse(&rows, &schema, &CleansingRules::default());
            let r = &first.report;
            prop_assert_eq!(r.rows_read, r.rows_kept + r.rows_dropped);
            prop_assert_eq!(r.reasons.total(), r.rows_dropped);
            prop_assert_eq!(r.rows_kept, first.records.len());

            let mut buf = Vec::new();
            write_csv_to(&mut buf, &first.records, &schema).unwrap();
            let again = cleanse(&read_csv_from(buf.as_slice(), &schema).unwrap(), &schema, &CleansingRules::default());
            prop_assert_eq!(again.report.rows_dropped, 0);
            prop_assert_eq!(&again.records, &first.records);
        }
    }
}
