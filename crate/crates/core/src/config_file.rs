//! Flat `key = value` config files with `[section]` headers.
//!
//! ```text
//! # comment
//! [erfd]
//! dropout = 0.3
//! ```
//!
//! Every value can be overridden from the command line as `section.key=value`.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {msg}")]
    Syntax {
        origin: String,
        line: usize,
        msg: String,
    },
    #[error("{origin}:{line}: bad value for {key}: {msg}")]
    BadValue {
        origin: String,
        line: usize,
        key: String,
        msg: String,
    },
    #[error("{origin}:{line}: unknown key {key}")]
    UnknownKey {
        origin: String,
        line: usize,
        key: String,
    },
    #[error("{origin}:{line}: unknown section [{section}]")]
    UnknownSection {
        origin: String,
        line: usize,
        section: String,
    },
    #[error("missing required key {0}")]
    Missing(String),
    #[error("bad override '{0}' (expected section.key=value)")]
    BadOverride(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line; 0 for command-line overrides.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigDoc {
    /// File name (or `<string>`) used in diagnostics.
    pub origin: String,
    pub sections: Vec<Section>,
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl ConfigDoc {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut doc = ConfigDoc {
            origin: origin.to_string(),
            sections: Vec::new(),
        };
        let syntax = |line: usize, msg: String| ConfigError::Syntax {
            origin: origin.to_string(),
            line,
            msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(rest) = t.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line, "unterminated section header".into()))?
                    .trim();
                if name.is_empty() {
                    return Err(syntax(line, "empty section name".into()));
                }
                if doc.section(name).is_some() {
                    return Err(syntax(line, format!("duplicate section [{name}]")));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected key = value, got '{t}'")))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(syntax(line, "empty key".into()));
            }
            let value = v.split(" #").next().unwrap_or("");
            if doc.sections.is_empty() {
                doc.sections.push(Section {
                    name: String::new(),
                    line: 0,
                    entries: Vec::new(),
                });
            }
            let sec = doc.sections.last_mut().expect("pushed above");
            if sec.entries.iter().any(|e| e.key == key) {
                return Err(syntax(line, format!("duplicate key {key}")));
            }
            sec.entries.push(Entry {
                key: key.to_string(),
                value: unquote(value).to_string(),
                line,
            });
        }
        Ok(doc)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    /// Sets (or adds) `section.key`.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: 0,
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.to_string();
                e.line = 0;
            }
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
    }

    /// Applies `section.key=value`; the section is everything before the last dot.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
        let path = path.trim();
        let (section, key) = path.rsplit_once('.').unwrap_or(("", path));
        if key.is_empty() {
            return Err(ConfigError::BadOverride(spec.to_string()));
        }
        self.set(section, key, unquote(value));
        Ok(())
    }

    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| ConfigError::BadValue {
                origin: self.origin.clone(),
                line: e.line,
                key: qualified(section, key),
                msg: err.to_string(),
            }),
        }
    }

    pub fn get_or<T>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(section, key)?
            .ok_or_else(|| ConfigError::Missing(qualified(section, key)))
    }

    /// Error for any key in `section` not listed in `known`.
    pub fn check_keys(&self, section: &str, known: &[&str]) -> Result<(), ConfigError> {
        if let Some(sec) = self.section(section) {
            if let Some(e) = sec.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
                return Err(ConfigError::UnknownKey {
                    origin: self.origin.clone(),
                    line: e.line,
                    key: qualified(section, &e.key),
                });
            }
        }
        Ok(())
    }

    /// Error for any section not accepted by `known`.
    pub fn check_sections(&self, known: impl Fn(&str) -> bool) -> Result<(), ConfigError> {
        match self.sections.iter().find(|s| !known(&s.name)) {
            Some(s) => Err(ConfigError::UnknownSection {
                origin: self.origin.clone(),
                line: s.line,
                section: s.name.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn bad_value(&self, section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            origin: self.origin.clone(),
            line: self.entry(section, key).map_or(0, |e| e.line),
            key: qualified(section, key),
            msg: msg.into(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            if !s.name.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{}]\n", s.name));
            }
            for e in &s.entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        out
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// A `(rows, cols)` pair written as `3x3` or a single `3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair(pub usize, pub usize);

impl FromStr for Pair {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
        match s.split_once(['x', 'X', ',']) {
            Some((a, b)) => Ok(Pair(parse(a)?, parse(b)?)),
            None => {
                let v = parse(s)?;
                Ok(Pair(v, v))
            }
        }
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# top\n[erfd]\ndropout = 0.3\nn_classes = 7 # inline\n\n[mfl.0]\nkernel = 3x3\n";

    #[test]
    fn parse_and_get() {
        let doc = ConfigDoc::parse(TEXT, "t.cfg").unwrap();
        assert_eq!(doc.get::<f64>("erfd", "dropout").unwrap(), Some(0.3));
        assert_eq!(doc.get::<usize>("erfd", "n_classes").unwrap(), Some(7));
        assert_eq!(doc.require::<Pair>("mfl.0", "kernel").unwrap(), Pair(3, 3));
        assert_eq!(doc.get::<usize>("erfd", "hidden").unwrap(), None);
    }

    #[test]
    fn line_numbered_errors() {
        let err = ConfigDoc::parse("[a]\nx = 1\nnot a pair\n", "f.cfg").unwrap_err();
        assert!(err.to_string().starts_with("f.cfg:3:"), "{err}");
        let doc = ConfigDoc::parse("[a]\n\nx = abc\n", "f.cfg").unwrap();
        let err = doc.get::<u32>("a", "x").unwrap_err();
        assert!(err.to_string().starts_with("f.cfg:3:"), "{err}");
        let err = doc.check_keys("a", &["y"]).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
    }

    #[test]
    fn overrides() {
        let mut doc = ConfigDoc::parse(TEXT, "t").unwrap();
        doc.apply_override("erfd.dropout=0.5").unwrap();
        doc.apply_override("mfl.1.kernel=5x3").unwrap();
        assert_eq!(doc.get::<f64>("erfd", "dropout").unwrap(), Some(0.5));
        assert_eq!(doc.require::<Pair>("mfl.1", "kernel").unwrap(), Pair(5, 3));
        assert!(doc.apply_override("novalue").is_err());
    }

    #[test]
    fn render_round_trip() {
        let doc = ConfigDoc::parse(TEXT, "t").unwrap();
        let again = ConfigDoc::parse(&doc.render(), "t").unwrap();
        assert_eq!(again.get::<f64>("erfd", "dropout").unwrap(), Some(0.3));
        assert_eq!(again.sections.len(), doc.sections.len());
    }
}
