//! Run configuration files.
//!
//! ```text
//! # comment
//! [schema]
//! customer_id   categorical identifier
//! recency       continuous  active      1.0  15.0
//! top_department categorical supplementary
//!
//! [params]
//! max_clusters = 4
//! mode = histogram
//!
//! [profile]
//! revenue_field = total_revenue
//! profit_field = total_profit
//! ```
//!
//! Schema lines are `name kind role [weight] [scale]`. `[params]` and
//! `[profile]` may be omitted, in which case defaults apply. Unknown sections
//! and keys are errors.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::params::{Mode, ParamsError, RunParams};
use crate::profiler::ProfileSpec;
use crate::schema::{FieldKind, FieldRole, FieldSpec, Schema, SchemaError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no [schema] section")]
    NoSchema,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub schema: Schema,
    pub params: RunParams,
    pub profile: ProfileSpec,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Schema,
    Params,
    Profile,
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| syntax(line, format!("{key}: cannot parse {value:?}")))
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section = None;
        let mut seen_sections = HashSet::new();
        let mut fields = Vec::new();
        let mut params = RunParams::default();
        let mut profile = ProfileSpec::retail();
        let mut seen_keys = HashSet::new();

        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let s = match name.trim() {
                    "schema" => Section::Schema,
                    "params" => Section::Params,
                    "profile" => Section::Profile,
                    other => return Err(syntax(n, format!("unknown section [{other}]"))),
                };
                if !seen_sections.insert(name.trim().to_string()) {
                    return Err(syntax(n, format!("section [{}] repeated", name.trim())));
                }
                section = Some(s);
                continue;
            }
            match section {
                None => return Err(syntax(n, "content before any section")),
                Some(Section::Schema) => fields.push(parse_field(n, line)?),
                Some(s) => {
                    let (key, value) = line
                        .split_once('=')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| syntax(n, "expected key = value"))?;
                    let qualified = format!("{}.{key}", if s == Section::Params { "params" } else { "profile" });
                    if !seen_keys.insert(qualified) {
                        return Err(syntax(n, format!("{key} given twice")));
                    }
                    if s == Section::Params {
                        set_param(&mut params, n, key, value)?;
                    } else {
                        set_profile(&mut profile, n, key, value)?;
                    }
                }
            }
        }
        if !seen_sections.contains("schema") {
            return Err(ConfigError::NoSchema);
        }
        let schema = Schema::new(fields)?;
        params.validate()?;
        Ok(Self { schema, params, profile })
    }
}

fn parse_field(n: usize, line: &str) -> Result<FieldSpec, ConfigError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if !(3..=5).contains(&tokens.len()) {
        return Err(syntax(n, "expected: name kind role [weight] [scale]"));
    }
    let kind = FieldKind::parse(tokens[1]).ok_or_else(|| syntax(n, format!("unknown kind {:?}", tokens[1])))?;
    let role = FieldRole::parse(tokens[2]).ok_or_else(|| syntax(n, format!("unknown role {:?}", tokens[2])))?;
    let mut field = FieldSpec::new(tokens[0], kind, role);
    if let Some(w) = tokens.get(3) {
        field.weight = parse_num(n, "weight", w)?;
    }
    if let Some(s) = tokens.get(4) {
        field.similarity_scale = Some(parse_num(n, "scale", s)?);
    }
    Ok(field)
}

fn set_param(p: &mut RunParams, n: usize, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "max_clusters" => p.max_clusters = parse_num(n, key, value)?,
        "max_passes" => p.max_passes = parse_num(n, key, value)?,
        "accuracy" => p.accuracy = parse_num(n, key, value)?,
        "similarity_threshold" => p.similarity_threshold = parse_num(n, key, value)?,
        "histogram_bins" => p.histogram_bins = parse_num(n, key, value)?,
        "mode" => p.mode = Mode::parse(value).ok_or_else(|| syntax(n, format!("unknown mode {value:?}")))?,
        "seed" => p.seed = parse_num(n, key, value)?,
        _ => return Err(syntax(n, format!("unknown key {key}"))),
    }
    Ok(())
}

fn set_profile(p: &mut ProfileSpec, n: usize, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "revenue_field" => p.revenue_field = value.to_string(),
        "profit_field" => p.profit_field = value.to_string(),
        "cross_sell_gap" => p.cross_sell_gap = parse_num(n, key, value)?,
        _ => return Err(syntax(n, format!("unknown key {key}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const RETAIL: &str = include_str!("../configs/retail.conf");

    #[test]
    fn bundled_retail_config() {
        let c = Config::parse(RETAIL).unwrap();
        assert_eq!(c.schema, Schema::retail());
        assert_eq!(c.params, RunParams::default());
        assert_eq!(c.profile, ProfileSpec::retail());
    }

    #[test]
    fn weights_scales_and_params() {
        let c = Config::parse(
            "[schema]\nid categorical identifier\nx continuous active 2 7.5 # tuned\n\
             [params]\nmax_clusters=6\nmode = exact\naccuracy = 0.8\n[profile]\ncross_sell_gap = 0.1\n",
        )
        .unwrap();
        let x = c.schema.field(1);
        assert_eq!((x.weight, x.similarity_scale), (2.0, Some(7.5)));
        assert_eq!(c.params.max_clusters, 6);
        assert_eq!(c.params.mode, Mode::Exact);
        assert_eq!(c.params.accuracy, 0.8);
        assert_eq!(c.profile.cross_sell_gap, 0.1);
    }

    #[test]
    fn rejections() {
        let base = "[schema]\nid categorical identifier\nx continuous active\n";
        let cases = [
            format!("{base}[params]\nbogus = 1\n"),
            format!("{base}[params]\nmax_clusters = 1\nmax_clusters = 2\n"),
            format!("{base}[extra]\n"),
            format!("{base}[params]\naccuracy = 1.5\n"),
            format!("{base}[params]\nmode = fuzzy\n"),
            format!("{base}[profile]\ncolour = red\n"),
            format!("{base}y continuous\n"),
            "[schema]\nx continuous active\n".to_string(),
            "[params]\nmax_clusters = 2\n".to_string(),
            "stray\n[schema]\n".to_string(),
        ];
        for text in &cases {
            assert!(Config::parse(text).is_err(), "{text}");
        }
    }
}
