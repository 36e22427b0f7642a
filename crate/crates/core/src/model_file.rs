//! Line-oriented text serialization of a [`ClusterModel`].
//!
//! ```text
//! custseg-model 1 <schema hash>
//! field <name> <kind> <role> <weight> <scale or ->
//! params <key>=<value> ...
//! scale <field> <effective scale>
//! edges <field> <lo> <hi> <bins>
//! cluster <id> <size>
//! cont <field> <count> <missing> <sum> <sum_sq> <slot counts, comma separated>
//! cat <field> <count> <missing> [<category> <count>]...
//! member <cell>...
//! end
//! ```
//!
//! Tokens are tab separated; backslash, tab and line feed inside a token are
//! escaped. Floats use Rust's shortest round-trip formatting, so a reloaded
//! model scores exactly like the original.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::engine::{CategoricalStats, ClusterModel, ClusterStats, ContinuousStats, FieldStats, HistogramEdges};
use crate::io::record_cells;
use crate::params::{Mode, RunParams};
use crate::schema::{coerce_record, FieldKind, FieldRole, FieldSpec, Schema};
use crate::similarity::SimilarityParams;

pub const MAGIC: &str = "custseg-model";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a model file (missing {MAGIC} header)")]
    NotAModel,
    #[error("unsupported model version {0}")]
    Version(String),
    #[error("schema hash mismatch: header says {expected}, fields hash to {found}")]
    HashMismatch { expected: String, found: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// First 16 hex digits of the SHA-256 of the schema's canonical text.
pub fn schema_hash(schema: &Schema) -> String {
    let mut hasher = Sha256::new();
    for f in schema.fields() {
        hasher.update(field_line(f).as_bytes());
        hasher.update(b"\n");
    }
    hasher.finalize().iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn escape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut chars = token.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn line(tokens: &[String]) -> String {
    let mut s = tokens.join("\t");
    s.push('\n');
    s
}

fn field_line(f: &FieldSpec) -> String {
    let scale = f.similarity_scale.map_or("-".to_string(), |s| s.to_string());
    [
        "field".to_string(),
        escape(&f.name),
        f.kind.as_str().to_string(),
        f.role.as_str().to_string(),
        f.weight.to_string(),
        scale,
    ]
    .join("\t")
}

/// Serializes `model` to text.
pub fn to_text(model: &ClusterModel) -> String {
    let schema = &model.schema;
    let name = |i: usize| escape(&schema.field(i).name);
    let mut out = format!("{MAGIC}\t{VERSION}\t{}\n", schema_hash(schema));
    for f in schema.fields() {
        out.push_str(&field_line(f));
        out.push('\n');
    }
    let p = &model.params;
    out.push_str(&line(&[
        "params".into(),
        format!("max_clusters={}", p.max_clusters),
        format!("max_passes={}", p.max_passes),
        format!("accuracy={}", p.accuracy),
        format!("similarity_threshold={}", p.similarity_threshold),
        format!("histogram_bins={}", p.histogram_bins),
        format!("mode={}", p.mode),
        format!("seed={}", p.seed),
    ]));
    for (i, scale) in model.similarity.scales().iter().enumerate() {
        if let Some(s) = scale {
            out.push_str(&line(&["scale".into(), name(i), s.to_string()]));
        }
    }
    for (i, edges) in model.edges.iter().enumerate() {
        if let Some(e) = edges {
            out.push_str(&line(&["edges".into(), name(i), e.lo.to_string(), e.hi.to_string(), e.bins.to_string()]));
        }
    }
    for c in &model.clusters {
        out.push_str(&line(&["cluster".into(), c.cluster_id.to_string(), c.size.to_string()]));
        for (i, stats) in c.fields.iter().enumerate() {
            match stats {
                Some(FieldStats::Continuous(s)) => {
                    let counts: Vec<String> = s.counts.iter().map(ToString::to_string).collect();
                    out.push_str(&line(&[
                        "cont".into(),
                        name(i),
                        s.count.to_string(),
                        s.missing.to_string(),
                        s.sum.to_string(),
                        s.sum_sq.to_string(),
                        counts.join(","),
                    ]));
                }
                Some(FieldStats::Categorical(s)) => {
                    let mut tokens = vec!["cat".into(), name(i), s.count.to_string(), s.missing.to_string()];
                    for (cat, n) in &s.freq {
                        tokens.push(escape(cat));
                        tokens.push(n.to_string());
                    }
                    out.push_str(&line(&tokens));
                }
                None => {}
            }
        }
        for m in &c.members {
            let mut tokens = vec!["member".to_string()];
            tokens.extend(record_cells(m).iter().map(|t| escape(t)));
            out.push_str(&line(&tokens));
        }
        out.push_str("end\n");
    }
    out
}

pub fn save(model: &ClusterModel, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, to_text(model)).map_err(|source| ModelFileError::Io { path: path.into(), source })
}

pub fn load(path: &Path) -> Result<ClusterModel, ModelFileError> {
    let text = fs::read_to_string(path).map_err(|source| ModelFileError::Io { path: path.into(), source })?;
    from_text(&text)
}

struct Parser<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Option<(usize, Vec<String>)> {
        self.lines.next().map(|(i, l)| (i + 1, l.split('\t').map(unescape).collect()))
    }

    fn peek_keyword(&mut self) -> Option<&'a str> {
        self.lines.peek().map(|(_, l)| l.split('\t').next().unwrap_or(""))
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Syntax { line, message: message.into() }
}

fn num<T: std::str::FromStr>(line: usize, token: Option<&String>, what: &str) -> Result<T, ModelFileError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| syntax(line, format!("bad {what}")))
}

/// Parses and validates model text.
pub fn from_text(text: &str) -> Result<ClusterModel, ModelFileError> {
    let mut p = Parser { lines: text.lines().enumerate().peekable() };
    let (_, header) = p.next().ok_or(ModelFileError::NotAModel)?;
    if header.first().map(String::as_str) != Some(MAGIC) || header.len() != 3 {
        return Err(ModelFileError::NotAModel);
    }
    if header[1] != VERSION.to_string() {
        return Err(ModelFileError::Version(header[1].clone()));
    }

    let mut fields = Vec::new();
    while p.peek_keyword() == Some("field") {
        let (n, t) = p.next().expect("peeked");
        if t.len() != 6 {
            return Err(syntax(n, "field needs name, kind, role, weight and scale"));
        }
        let kind = FieldKind::parse(&t[2]).ok_or_else(|| syntax(n, "bad kind"))?;
        let role = FieldRole::parse(&t[3]).ok_or_else(|| syntax(n, "bad role"))?;
        let mut f = FieldSpec::new(t[1].clone(), kind, role).with_weight(num(n, t.get(4), "weight")?);
        if t[5] != "-" {
            f = f.with_scale(num(n, t.get(5), "scale")?);
        }
        fields.push(f);
    }
    let schema = Schema::new(fields).map_err(|e| syntax(1, e.to_string()))?;
    let found = schema_hash(&schema);
    if found != header[2] {
        return Err(ModelFileError::HashMismatch { expected: header[2].clone(), found });
    }
    let index = |n: usize, name: &str| schema.index_of(name).ok_or_else(|| syntax(n, format!("unknown field {name}")));

    let (n, t) = p.next().ok_or_else(|| syntax(0, "missing params"))?;
    if t[0] != "params" {
        return Err(syntax(n, "expected params"));
    }
    let kv: BTreeMap<&str, &str> = t[1..].iter().filter_map(|s| s.split_once('=')).collect();
    let get = |k: &str| kv.get(k).map(|v| v.to_string());
    let params = RunParams {
        max_clusters: num(n, get("max_clusters").as_ref(), "max_clusters")?,
        max_passes: num(n, get("max_passes").as_ref(), "max_passes")?,
        accuracy: num(n, get("accuracy").as_ref(), "accuracy")?,
        similarity_threshold: num(n, get("similarity_threshold").as_ref(), "similarity_threshold")?,
        histogram_bins: num(n, get("histogram_bins").as_ref(), "histogram_bins")?,
        mode: get("mode").as_deref().and_then(Mode::parse).ok_or_else(|| syntax(n, "bad mode"))?,
        seed: num(n, get("seed").as_ref(), "seed")?,
    };
    params.validate().map_err(|e| syntax(n, e.to_string()))?;

    let mut scales = vec![None; schema.len()];
    while p.peek_keyword() == Some("scale") {
        let (n, t) = p.next().expect("peeked");
        let i = index(n, t.get(1).map_or("", String::as_str))?;
        scales[i] = Some(num(n, t.get(2), "scale")?);
    }
    let similarity = SimilarityParams::from_effective_scales(&schema, params.accuracy, scales)
        .map_err(|e| syntax(n, e.to_string()))?;

    let mut edges = vec![None; schema.len()];
    while p.peek_keyword() == Some("edges") {
        let (n, t) = p.next().expect("peeked");
        let i = index(n, t.get(1).map_or("", String::as_str))?;
        let bins: usize = num(n, t.get(4), "bins")?;
        if bins == 0 {
            return Err(syntax(n, "bins must be positive"));
        }
        edges[i] = Some(HistogramEdges { lo: num(n, t.get(2), "lo")?, hi: num(n, t.get(3), "hi")?, bins });
    }
    for (i, f) in schema.fields().iter().enumerate() {
        if f.is_profiled() && f.kind == FieldKind::Continuous && edges[i].is_none() {
            return Err(syntax(0, format!("no edges for {}", f.name)));
        }
    }

    let mut clusters = Vec::new();
    while let Some((n, t)) = p.next() {
        if t[0] != "cluster" {
            return Err(syntax(n, format!("expected cluster, found {}", t[0])));
        }
        let cluster_id: usize = num(n, t.get(1), "cluster id")?;
        if cluster_id != clusters.len() {
            return Err(syntax(n, "cluster ids must be consecutive from 0"));
        }
        let size: usize = num(n, t.get(2), "size")?;
        let mut stats: Vec<Option<FieldStats>> = vec![None; schema.len()];
        let mut members = Vec::new();
        loop {
            let (n, t) = p.next().ok_or_else(|| syntax(0, "unterminated cluster"))?;
            match t[0].as_str() {
                "end" => break,
                "cont" => {
                    let i = index(n, t.get(1).map_or("", String::as_str))?;
                    let e = edges[i].ok_or_else(|| syntax(n, "continuous stats without edges"))?;
                    let counts: Vec<u64> = t
                        .get(6)
                        .map_or("", String::as_str)
                        .split(',')
                        .map(|c| c.parse().map_err(|_| syntax(n, "bad slot count")))
                        .collect::<Result<_, _>>()?;
                    if counts.len() != e.slots() {
                        return Err(syntax(n, "slot count does not match edges"));
                    }
                    stats[i] = Some(FieldStats::Continuous(ContinuousStats {
                        edges: e,
                        counts,
                        count: num(n, t.get(2), "count")?,
                        missing: num(n, t.get(3), "missing")?,
                        sum: num(n, t.get(4), "sum")?,
                        sum_sq: num(n, t.get(5), "sum_sq")?,
                    }));
                }
                "cat" => {
                    let i = index(n, t.get(1).map_or("", String::as_str))?;
                    if t.len() % 2 != 0 {
                        return Err(syntax(n, "category without count"));
                    }
                    let mut freq = BTreeMap::new();
                    for pair in t[4..].chunks(2) {
                        freq.insert(pair[0].clone(), num(n, pair.get(1), "category count")?);
                    }
                    stats[i] = Some(FieldStats::Categorical(CategoricalStats {
                        count: num(n, t.get(2), "count")?,
                        missing: num(n, t.get(3), "missing")?,
                        freq,
                    }));
                }
                "member" => {
                    let record = coerce_record(&t[1..], &schema).map_err(|e| syntax(n, e.to_string()))?;
                    members.push(record);
                }
                other => return Err(syntax(n, format!("unexpected {other}"))),
            }
        }
        for (i, f) in schema.fields().iter().enumerate() {
            if f.is_profiled() && stats[i].is_none() {
                return Err(syntax(n, format!("cluster {cluster_id} lacks stats for {}", f.name)));
            }
        }
        if params.mode == Mode::Exact && members.len() != size {
            return Err(syntax(n, format!("cluster {cluster_id} lists {} members, size {size}", members.len())));
        }
        clusters.push(ClusterStats { cluster_id, size, fields: stats, members });
    }

    let mut model = ClusterModel { schema, params, similarity, edges, clusters, display_order: Vec::new() };
    model.refresh_display_order();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{assign_to_model, run};
    use crate::schema::Record;

    fn records() -> Vec<Record> {
        let schema = Schema::retail();
        (0..30)
            .map(|i| {
                let dept = match i % 4 {
                    0 => "",
                    1 => "Home\tGarden",
                    2 => "Toys",
                    _ => "back\\slash",
                };
                let cells = [
                    format!("C{i}"),
                    (i % 7).to_string(),
                    (i as f64 * 1.1).to_string(),
                    (if i < 15 { 10.0 } else { 500.0 } + i as f64 / 3.0).to_string(),
                    dept.to_string(),
                ];
                coerce_record(&cells, &schema).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trip_both_modes() {
        for params in [RunParams::default(), RunParams::default().exact()] {
            let data = records();
            let out = run(&data, &Schema::retail(), &params).unwrap();
            let text = to_text(&out.model);
            let back = from_text(&text).unwrap();
            assert_eq!(back, out.model);
            assert_eq!(to_text(&back), text);
            for r in &data {
                assert_eq!(assign_to_model(&back, r).unwrap(), assign_to_model(&out.model, r).unwrap());
            }
        }
    }

    #[test]
    fn header_checks() {
        let out = run(&records(), &Schema::retail(), &RunParams::default()).unwrap();
        let text = to_text(&out.model);
        assert!(text.starts_with(&format!("custseg-model\t1\t{}\n", schema_hash(&Schema::retail()))));
        assert!(matches!(from_text("hello"), Err(ModelFileError::NotAModel)));
        let v2 = text.replacen("custseg-model\t1", "custseg-model\t2", 1);
        assert!(matches!(from_text(&v2), Err(ModelFileError::Version(_))));
        let renamed = text.replace("field\trecency", "field\trecent");
        assert!(matches!(from_text(&renamed), Err(ModelFileError::HashMismatch { .. })));
        let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(from_text(&truncated).is_err());
    }

    #[test]
    fn hash_depends_on_fields() {
        let a = schema_hash(&Schema::retail());
        assert_eq!(a.len(), 16);
        let mut fields = Schema::retail().fields().to_vec();
        fields[1].weight = 2.0;
        assert_ne!(schema_hash(&Schema::new(fields).unwrap()), a);
    }

    #[test]
    fn escaping() {
        for s in ["plain", "tab\there", "new\nline", "back\\slash", "\\t literal"] {
            assert_eq!(unescape(&escape(s)), s);
            assert!(!escape(s).contains('\t'));
        }
    }
}
