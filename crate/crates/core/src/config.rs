//! Flat `key = value` text with `[section]` headers and `#` comments, and the
//! model block built on it.
//!
//! ```text
//! model = potts
//! beta = 0.4
//! q = 3
//! field = 0.5, 0, 0   # optional, one value per state
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::group::Parity;
use crate::interaction::{coloring, hardcore, ising, potts, InteractionError, InteractionSpec, ModelKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    /// `(key, value, line)` in file order.
    pub entries: Vec<(String, String, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.name.clone(),
            key: key.into(),
        })
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.entries.iter().find(|(k, _, _)| !allowed.contains(&k.as_str())) {
            Some((k, _, _)) => Err(ConfigError::UnknownKey {
                section: self.name.clone(),
                key: k.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: v.into(),
                })
            })
            .transpose()
    }

    /// Comma- or whitespace-separated list.
    pub fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse().map_err(|_| ConfigError::BadValue {
                            key: key.into(),
                            value: v.into(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Splits text into sections; entries before any header go to a section
/// named `""`. Keys may not repeat within a section.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut out = vec![Section::default()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if out.iter().any(|sec| sec.name == name) {
                return Err(ConfigError::Syntax { line, msg: format!("repeated section [{name}]") });
            }
            out.push(Section { name, entries: Vec::new() });
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: "expected `key = value`".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line, msg: "empty key".into() });
        }
        let sec = out.last_mut().expect("non-empty");
        if sec.get(k).is_some() {
            return Err(ConfigError::Syntax { line, msg: format!("repeated key `{k}`") });
        }
        sec.entries.push((k.into(), v.into(), line));
    }
    if out[0].entries.is_empty() {
        out.remove(0);
    }
    Ok(out)
}

pub const MODEL_KEYS: [&str; 5] = ["model", "beta", "lambda", "q", "field"];

/// A named model and an optional constant field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub field: Option<Vec<f64>>,
}

impl ModelConfig {
    /// Reads a model block from a whole file: either the unnamed leading
    /// section or a `[model]` section.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let sections = parse_sections(text)?;
        let sec = match sections.as_slice() {
            [s] if s.name.is_empty() || s.name == "model" => s,
            _ => sections
                .iter()
                .find(|s| s.name == "model")
                .ok_or_else(|| ConfigError::MissingKey { section: "model".into(), key: "model".into() })?,
        };
        ModelConfig::from_section(sec)
    }

    pub fn from_section(sec: &Section) -> Result<Self, ConfigError> {
        sec.check_keys(&MODEL_KEYS)?;
        let name = sec.require("model")?;
        let need_f = |k: &str| -> Result<f64, ConfigError> {
            sec.require(k)?;
            Ok(sec.parse(k)?.expect("present"))
        };
        let need_q = || -> Result<usize, ConfigError> {
            sec.require("q")?;
            Ok(sec.parse("q")?.expect("present"))
        };
        // reject keys that do not belong to the chosen model
        let used: &[&str] = match name {
            "ising" => &["model", "beta", "field"],
            "potts" => &["model", "beta", "q", "field"],
            "hardcore" => &["model", "lambda", "field"],
            "coloring" => &["model", "q", "field"],
            other => {
                return Err(ConfigError::BadValue { key: "model".into(), value: other.into() });
            }
        };
        sec.check_keys(used)?;
        let kind = match name {
            "ising" => ModelKind::Ising { beta: need_f("beta")? },
            "potts" => ModelKind::Potts { beta: need_f("beta")?, q: need_q()? },
            "hardcore" => ModelKind::Hardcore { lambda: need_f("lambda")? },
            _ => ModelKind::Coloring { q: need_q()? },
        };
        Ok(ModelConfig { kind, field: sec.parse_list("field")? })
    }

    pub fn build(&self, parity: Parity) -> Result<InteractionSpec, ConfigError> {
        let spec = match self.kind {
            ModelKind::Ising { beta } => ising(parity, beta)?,
            ModelKind::Potts { beta, q } => potts(parity, beta, q)?,
            ModelKind::Hardcore { lambda } => hardcore(parity, lambda)?,
            ModelKind::Coloring { q } => coloring(parity, q)?,
            ModelKind::Custom => {
                return Err(ConfigError::BadValue { key: "model".into(), value: "custom".into() })
            }
        };
        Ok(match &self.field {
            Some(f) => spec.with_field(f)?,
            None => spec,
        })
    }

    /// Canonical text form, parseable by [`ModelConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.kind {
            ModelKind::Ising { beta } => write!(s, "model = ising\nbeta = {beta}\n"),
            ModelKind::Potts { beta, q } => write!(s, "model = potts\nbeta = {beta}\nq = {q}\n"),
            ModelKind::Hardcore { lambda } => write!(s, "model = hardcore\nlambda = {lambda}\n"),
            ModelKind::Coloring { q } => write!(s, "model = coloring\nq = {q}\n"),
            ModelKind::Custom => write!(s, "model = custom\n"),
        }
        .expect("write to string");
        if let Some(f) = &self.field {
            let vals: Vec<String> = f.iter().map(|x| x.to_string()).collect();
            writeln!(s, "field = {}", vals.join(", ")).expect("write to string");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV3: Parity = Parity::Involutive { d: 3 };

    #[test]
    fn sections_and_comments() {
        let secs = parse_sections("# top\n[model]\nmodel = ising # trailing\nbeta=0.2\n\n[run]\nradii = 1, 2 3\n").unwrap();
        assert_eq!(secs.len(), 2);
        assert_eq!(secs[0].get("model"), Some("ising"));
        assert_eq!(secs[0].parse::<f64>("beta").unwrap(), Some(0.2));
        assert_eq!(secs[1].parse_list::<usize>("radii").unwrap(), Some(vec![1, 2, 3]));
        assert!(matches!(parse_sections("[a\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_sections("x\n"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse_sections("a = 1\na = 2\n"), Err(ConfigError::Syntax { line: 2, .. })));
    }

    #[test]
    fn model_blocks() {
        let m = ModelConfig::parse("model = potts\nbeta = 0.4\nq = 3\n").unwrap();
        assert_eq!(m.kind, ModelKind::Potts { beta: 0.4, q: 3 });
        assert_eq!(m.build(INV3).unwrap().alphabet(), 3);
        let m = ModelConfig::parse("[model]\nmodel = ising\nbeta = 0.2\nfield = 0.5 0\n").unwrap();
        assert_eq!(m.field, Some(vec![0.5, 0.0]));
        assert_eq!(ModelConfig::parse(&m.to_text()).unwrap(), m);
        assert_eq!(m.build(INV3).unwrap().field(), &[0.5, 0.0]);
        for bad in [
            "model = ising\nbeta = 0.2\ntemperature = 3\n",
            "model = ising\nbeta = 0.2\nq = 3\n",
            "model = glass\n",
            "model = potts\nbeta = 1\n",
            "model = hardcore\nlambda = x\n",
        ] {
            assert!(ModelConfig::parse(bad).is_err(), "{bad}");
        }
        let hc = ModelConfig::parse("model = hardcore\nlambda = -1\n").unwrap();
        assert!(matches!(hc.build(INV3), Err(ConfigError::Interaction(_))));
    }
}
