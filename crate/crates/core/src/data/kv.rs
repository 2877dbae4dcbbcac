//! Flat `key=value` text files. Blank lines and lines starting with `#`
//! are ignored; keys must be unique.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    path: std::path::PathBuf,
    entries: Vec<(String, String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, idx + 1, format!("expected key=value, found '{line}'")))?;
            let k = k.trim().to_string();
            if entries.iter().any(|(e, _, _)| *e == k) {
                return Err(Error::parse(path, idx + 1, format!("duplicate key '{k}'")));
            }
            entries.push((k, v.trim().to_string(), idx + 1));
        }
        Ok(KeyValues { path: path.to_path_buf(), entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _, _)| k == key).map(|(_, v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::parse(&self.path, 0, format!("missing key '{key}'")))
    }

    /// Parses the value of `key` with `FromStr`, naming the line on failure.
    pub fn parsed<T>(&self, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let (_, v, line) = self
            .entries
            .iter()
            .find(|(k, _, _)| k == key)
            .ok_or_else(|| Error::parse(&self.path, 0, format!("missing key '{key}'")))?;
        v.parse()
            .map_err(|e| Error::parse(&self.path, *line, format!("bad value for '{key}': {e}")))
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        if self.get(key).is_some() {
            self.parsed(key)
        } else {
            Ok(default)
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }
}

/// Renders `(key, value)` pairs one per line.
pub fn render(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let kv = KeyValues::parse("# c\nd = 3\n\nbeta=0.5\n", Path::new("m.txt")).unwrap();
        assert_eq!(kv.parsed::<usize>("d").unwrap(), 3);
        assert_eq!(kv.parsed::<f64>("beta").unwrap(), 0.5);
        assert_eq!(kv.parsed_or::<usize>("m", 1).unwrap(), 1);
        let err = kv.parsed::<usize>("beta").unwrap_err().to_string();
        assert!(err.contains("m.txt:4"), "{err}");
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(KeyValues::parse("a=1\na=2\n", Path::new("x")).is_err());
        assert!(KeyValues::parse("nonsense\n", Path::new("x")).is_err());
    }
}
