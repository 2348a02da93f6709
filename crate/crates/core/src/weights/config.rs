//! Weight descriptors.
//!
//! Inline form: `power_log(a=1, b=0)`, `monomial(c=2, scale=2)`, `one`,
//! `oscillating(K=2, base=one)`, `tabulated(path=w.csv)`,
//! `inverse_log_tail(levels=60)`.
//!
//! Config form, one `key = value` per line (`#` comments), nested weights
//! through dotted keys:
//!
//! ```text
//! family = oscillating
//! K = 2
//! base.family = power_log
//! base.a = 0.5
//! base.b = 0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{Oscillating, RadialWeight, Tabulated};

#[derive(Debug, Clone)]
enum Param {
    Text(String),
    Node(Node),
}

#[derive(Debug, Clone, Default)]
struct Node {
    name: String,
    params: BTreeMap<String, Param>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Splits on commas at parenthesis depth zero.
fn split_top(s: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(parse_err(format!("unbalanced ')' in '{s}'")));
                }
            }
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(parse_err(format!("unbalanced '(' in '{s}'")));
    }
    out.push(&s[start..]);
    Ok(out)
}

fn is_call(s: &str) -> bool {
    let s = s.trim();
    s.ends_with(')') && s.find('(').is_some_and(|i| i > 0 && s[..i].chars().all(|c| c.is_alphanumeric() || c == '_'))
}

fn parse_inline(s: &str) -> Result<Node> {
    let s = s.trim();
    if s.is_empty() {
        return Err(parse_err("empty weight descriptor"));
    }
    let Some(open) = s.find('(') else {
        return Ok(Node {
            name: s.to_string(),
            params: BTreeMap::new(),
        });
    };
    if !s.ends_with(')') {
        return Err(parse_err(format!("expected ')' at the end of '{s}'")));
    }
    let name = s[..open].trim().to_string();
    let inner = &s[open + 1..s.len() - 1];
    let mut params = BTreeMap::new();
    if !inner.trim().is_empty() {
        for arg in split_top(inner)? {
            let (k, v) = arg
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected key=value, got '{}'", arg.trim())))?;
            let v = v.trim();
            let value = if is_call(v) {
                Param::Node(parse_inline(v)?)
            } else {
                Param::Text(v.to_string())
            };
            if params.insert(k.trim().to_string(), value).is_some() {
                return Err(parse_err(format!("duplicate key '{}'", k.trim())));
            }
        }
    }
    Ok(Node { name, params })
}

fn insert_dotted(node: &mut Node, key: &str, value: &str) -> Result<()> {
    match key.split_once('.') {
        None if key == "family" => {
            node.name = value.to_string();
            Ok(())
        }
        None => {
            node.params.insert(key.to_string(), Param::Text(value.to_string()));
            Ok(())
        }
        Some((head, rest)) => {
            let child = node
                .params
                .entry(head.to_string())
                .or_insert_with(|| Param::Node(Node::default()));
            match child {
                Param::Node(n) => insert_dotted(n, rest, value),
                Param::Text(_) => Err(parse_err(format!("'{head}' is both a value and a section"))),
            }
        }
    }
}

fn parse_kv(text: &str) -> Result<Node> {
    let mut root = Node::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("line {}: expected key = value", lineno + 1)))?;
        insert_dotted(&mut root, k.trim(), v.trim())?;
    }
    if root.name.is_empty() {
        return Err(parse_err("config has no 'family' key"));
    }
    Ok(root)
}

fn number(node: &Node, key: &str) -> Result<Option<f64>> {
    match node.params.get(key) {
        None => Ok(None),
        Some(Param::Text(t)) => t
            .parse::<f64>()
            .map(Some)
            .map_err(|_| parse_err(format!("{}: '{key}' is not a number: '{t}'", node.name))),
        Some(Param::Node(_)) => Err(parse_err(format!("{}: '{key}' must be a number", node.name))),
    }
}

fn required(node: &Node, key: &str) -> Result<f64> {
    number(node, key)?.ok_or_else(|| parse_err(format!("{} needs '{key}'", node.name)))
}

fn check_keys(node: &Node, allowed: &[&str]) -> Result<()> {
    for k in node.params.keys() {
        if k != "scale" && !allowed.contains(&k.as_str()) {
            return Err(parse_err(format!("{}: unknown parameter '{k}'", node.name)));
        }
    }
    Ok(())
}

fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn build(node: &Node, base_dir: &Path) -> Result<RadialWeight> {
    let w = match node.name.as_str() {
        "power_log" | "powerlog" => {
            check_keys(node, &["a", "b"])?;
            RadialWeight::power_log(number(node, "a")?.unwrap_or(0.0), number(node, "b")?.unwrap_or(0.0))?
        }
        "monomial" => {
            check_keys(node, &["c"])?;
            RadialWeight::monomial(required(node, "c")?)?
        }
        "one" | "const" | "constant" => {
            check_keys(node, &["c"])?;
            RadialWeight::one().scaled(number(node, "c")?.unwrap_or(1.0))?
        }
        "zero" => {
            check_keys(node, &[])?;
            RadialWeight::zero()
        }
        "oscillating" | "counterexample" => {
            check_keys(node, &["K", "base"])?;
            let base = match node.params.get("base") {
                None => RadialWeight::one(),
                Some(Param::Node(n)) => build(n, base_dir)?,
                Some(Param::Text(t)) => build(&parse_inline(t)?, base_dir)?,
            };
            RadialWeight::from_oscillating(Oscillating::new(base, number(node, "K")?.unwrap_or(2.0))?)
        }
        "tabulated" => {
            check_keys(node, &["path"])?;
            let Some(Param::Text(p)) = node.params.get("path") else {
                return Err(parse_err("tabulated needs 'path'"));
            };
            RadialWeight::tabulated(Tabulated::from_csv(&resolve(base_dir, p))?)
        }
        "inverse_log_tail" => {
            check_keys(node, &["levels"])?;
            let levels = number(node, "levels")?.unwrap_or(60.0);
            if !(levels >= 1.0 && levels <= 1000.0 && levels.fract() == 0.0) {
                return Err(parse_err(format!("inverse_log_tail: bad levels {levels}")));
            }
            RadialWeight::tabulated(Tabulated::inverse_log_tail(levels as u32)?)
        }
        other => return Err(parse_err(format!("unknown weight family '{other}'"))),
    };
    match number(node, "scale")? {
        Some(s) => w.scaled(s),
        None => Ok(w),
    }
}

/// Parses an inline descriptor, or loads it from a file when `spec` names
/// one (`.csv` files are read as tabulated weights, anything else as config).
pub fn parse_weight(spec: &str) -> Result<RadialWeight> {
    let path = Path::new(spec.trim());
    if !spec.contains('(') && path.is_file() {
        let dir = path.parent().unwrap_or(Path::new("."));
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            return Ok(RadialWeight::tabulated(Tabulated::from_csv(path)?));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return parse_config(&text, dir);
    }
    build(&parse_inline(spec)?, Path::new("."))
}

/// Parses the `key = value` config form; relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RadialWeight> {
    build(&parse_kv(text)?, base_dir)
}
