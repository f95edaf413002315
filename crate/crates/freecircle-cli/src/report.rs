//! Report rendering: a small value model serialized as canonical JSON or
//! CSV, written atomically so reruns are byte-for-byte comparable.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// A report value. Floats are rendered with a fixed 17-significant-digit
/// scientific format so identical runs produce identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    /// Rendered with keys in sorted order, whatever the insertion order.
    Object(Vec<(String, Value)>),
}

impl Value {
    pub fn object(fields: Vec<(&str, Value)>) -> Self {
        Value::Object(
            fields
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    pub fn complex(z: num_complex::Complex64) -> Self {
        Value::List(vec![Value::Float(z.re), Value::Float(z.im)])
    }
}

/// Canonical float rendering: round-trippable and stable across runs.
/// Non-finite values (possible only for degenerate inputs, e.g. a minimum
/// over an empty grid) get spelled-out names.
pub fn float_repr(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_string()
        } else if x > 0.0 {
            "Infinity".to_string()
        } else {
            "-Infinity".to_string()
        };
    }
    if x == 0.0 && x.is_sign_positive() {
        // Avoid "0.0000000000000000e0" noise for exact zeros.
        return "0.0".to_string();
    }
    format!("{x:.16e}")
}

fn push_json_string(out: &mut String, s: &str) {
    // serde_json's escaping is the JSON standard one; reuse it.
    out.push_str(&serde_json::to_string(s).expect("string serialization cannot fail"));
}

fn push_json(out: &mut String, value: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    let pad_in = "  ".repeat(indent + 1);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Value::UInt(n) => {
            let _ = write!(out, "{n}");
        }
        Value::Float(x) if !x.is_finite() => {
            // JSON has no non-finite numbers; emit the name as a string.
            push_json_string(out, &float_repr(*x));
        }
        Value::Float(x) => out.push_str(&float_repr(*x)),
        Value::Text(s) => push_json_string(out, s),
        Value::List(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                out.push('\n');
                out.push_str(&pad_in);
                push_json(out, item, indent + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
            }
            out.push('\n');
            out.push_str(&pad);
            out.push(']');
        }
        Value::Object(fields) => {
            if fields.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut fields: Vec<&(String, Value)> = fields.iter().collect();
            fields.sort_by(|a, b| a.0.cmp(&b.0));
            out.push('{');
            for (i, (key, item)) in fields.iter().enumerate() {
                out.push('\n');
                out.push_str(&pad_in);
                push_json_string(out, key);
                out.push_str(": ");
                push_json(out, item, indent + 1);
                if i + 1 < fields.len() {
                    out.push(',');
                }
            }
            out.push('\n');
            out.push_str(&pad);
            out.push('}');
        }
    }
}

pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    push_json(&mut out, value, 0);
    out.push('\n');
    out
}

/// One CSV cell. Text cells are always quoted; numbers never are.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(n) => n.to_string(),
            Cell::Float(x) => float_repr(*x),
            Cell::Text(s) => format!("\"{}\"", s.replace('"', "\"\"")),
        }
    }
}

/// A rectangular CSV table with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn to_csv(table: &Table) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        debug_assert_eq!(row.len(), table.columns.len());
        let rendered: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&rendered.join(","));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` atomically: a temp file in the same directory
/// is persisted over the target, so readers never observe a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), String> {
    let parent = match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => dir.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let mut file = tempfile::Builder::new()
        .prefix(".freecircle-")
        .tempfile_in(&parent)
        .map_err(|e| format!("cannot create temp file in {}: {e}", parent.display()))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    file.persist(path)
        .map_err(|e| format!("cannot persist {}: {e}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_canonically() {
        assert_eq!(float_repr(0.0), "0.0");
        assert_eq!(float_repr(1.0), "1.0000000000000000e0");
        assert_eq!(float_repr(-0.8), "-8.0000000000000004e-1");
        // Round trip: the rendering carries full precision.
        let x = 0.1234567890123456789;
        assert_eq!(float_repr(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn json_layout_is_stable_and_keys_sort() {
        // Insertion order differs from sorted order on purpose.
        let value = Value::object(vec![
            ("command", Value::Text("demo".into())),
            ("count", Value::Int(2)),
            ("items", Value::List(vec![
                Value::object(vec![("x", Value::Float(0.5)), ("k", Value::Int(1))]),
            ])),
            ("note", Value::Null),
            ("empty", Value::List(vec![])),
        ]);
        let expected = "{\n  \"command\": \"demo\",\n  \"count\": 2,\n  \"empty\": [],\n  \"items\": [\n    {\n      \"k\": 1,\n      \"x\": 5.0000000000000000e-1\n    }\n  ],\n  \"note\": null\n}\n";
        assert_eq!(to_json(&value), expected);
    }

    #[test]
    fn csv_quotes_text_only() {
        let table = Table {
            columns: vec!["name", "value"],
            rows: vec![
                vec![Cell::Text("u \"q\"".into()), Cell::Float(1.5)],
                vec![Cell::Text("n".into()), Cell::Int(3)],
            ],
        };
        assert_eq!(
            to_csv(&table),
            "name,value\n\"u \"\"q\"\"\",1.5000000000000000e0\n\"n\",3\n"
        );
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        // No temp-file litter left behind.
        let names: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["report.json".to_string()]);
    }
}
