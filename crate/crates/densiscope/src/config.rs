//! Configuration files, either a JSON object or flat `key = value` lines.
//!
//! In the flat form `#` starts a comment, dotted keys build nested objects
//! (`fdo.regions = [[0.2, 0.8]]`), and each value is read as JSON when it
//! parses and as a bare string otherwise.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value = if text.trim_start().starts_with('{') { serde_json::from_str(text)? } else { parse_flat(text)? };
    Ok(serde_json::from_value(value)?)
}

pub fn parse_flat(text: &str) -> Result<Value> {
    let mut root = Map::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`", no + 1);
        };
        let value = value.trim();
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()));
        let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
        if path.iter().any(|p| p.is_empty()) {
            bail!("line {}: empty key", no + 1);
        }
        insert(&mut root, &path, value).with_context(|| format!("line {}", no + 1))?;
    }
    Ok(Value::Object(root))
}

fn insert(map: &mut Map<String, Value>, path: &[&str], value: Value) -> Result<()> {
    let (head, rest) = path.split_first().expect("nonempty key path");
    if rest.is_empty() {
        if map.insert((*head).to_owned(), value).is_some() {
            bail!("key `{head}` given twice");
        }
        return Ok(());
    }
    match map.entry((*head).to_owned()).or_insert_with(|| Value::Object(Map::new())) {
        Value::Object(inner) => insert(inner, rest, value),
        _ => bail!("key `{head}` is both a value and a table"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flat_keys_nest_and_parse_json_values() {
        let v = parse_flat("# c\nseed = 7\nfdo.regions = [[0.2, 0.8]]\nfdo.name = abc # tail\n").unwrap();
        assert_eq!(v, json!({"seed": 7, "fdo": {"regions": [[0.2, 0.8]], "name": "abc"}}));
    }

    #[test]
    fn duplicate_and_conflicting_keys_fail() {
        assert!(parse_flat("a = 1\na = 2").is_err());
        assert!(parse_flat("a = 1\na.b = 2").is_err());
        assert!(parse_flat("novalue").is_err());
    }
}
