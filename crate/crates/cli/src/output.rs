//! Rendering of JSON reports as aligned human-readable tables.

use serde_json::Value;

/// Render a report object as an indented key/value table. Matrices (arrays
/// of arrays) get their own block; scalar arrays print inline.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    render_into(value, 0, &mut out);
    out
}

fn is_scalar(v: &Value) -> bool {
    matches!(
        v,
        Value::Null | Value::Bool(_) | Value::Number(_) | Value::String(_)
    )
}

fn is_pair(v: &Value) -> bool {
    v.as_array()
        .map(|a| a.len() == 2 && a.iter().all(|x| x.is_number()))
        .unwrap_or(false)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => "-".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if f != 0.0 && (f.abs() >= 1e5 || f.abs() < 1e-3) && n.as_i64().is_none() {
                    format!("{f:.6e}")
                } else {
                    format!("{f}")
                }
            } else {
                n.to_string()
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn inline_text(v: &Value) -> Option<String> {
    if is_scalar(v) {
        return Some(scalar_text(v));
    }
    if let Some(arr) = v.as_array() {
        if arr.iter().all(is_scalar) {
            let parts: Vec<String> = arr.iter().map(scalar_text).collect();
            return Some(format!("[{}]", parts.join(", ")));
        }
        if is_pair(v) {
            return Some(scalar_text(&arr[0]));
        }
    }
    None
}

fn render_into(value: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match value {
        Value::Object(map) => {
            let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in map {
                if let Some(text) = inline_text(v) {
                    out.push_str(&format!("{pad}{k:<width$}  {text}\n"));
                } else if let Some(rows) = matrix_rows(v) {
                    out.push_str(&format!("{pad}{k}:\n"));
                    for row in rows {
                        out.push_str(&format!("{pad}    {row}\n"));
                    }
                } else {
                    out.push_str(&format!("{pad}{k}:\n"));
                    render_into(v, indent + 1, out);
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                if let Some(text) = inline_text(item) {
                    out.push_str(&format!("{pad}[{i}] {text}\n"));
                } else {
                    out.push_str(&format!("{pad}[{i}]\n"));
                    render_into(item, indent + 1, out);
                }
            }
        }
        other => {
            out.push_str(&format!("{pad}{}\n", scalar_text(other)));
        }
    }
}

/// Interpret an array of arrays as matrix rows, formatting complex
/// `[re, im]` entries as `re+imi`.
fn matrix_rows(v: &Value) -> Option<Vec<String>> {
    let outer = v.as_array()?;
    if outer.is_empty() || !outer.iter().all(|r| r.is_array()) {
        return None;
    }
    let mut rows = Vec::with_capacity(outer.len());
    for r in outer {
        let entries = r.as_array()?;
        let mut cells = Vec::with_capacity(entries.len());
        for e in entries {
            if let Some(pair) = e.as_array() {
                if pair.len() == 2 && pair.iter().all(|x| x.is_number()) {
                    let re = pair[0].as_f64()?;
                    let im = pair[1].as_f64()?;
                    if im == 0.0 {
                        cells.push(format!("{re:>12.6}"));
                    } else {
                        cells.push(format!("{re:>10.4}{im:+.4}i"));
                    }
                    continue;
                }
                return None;
            }
            if e.is_number() {
                cells.push(format!("{:>12.6}", e.as_f64()?));
            } else {
                return None;
            }
        }
        rows.push(cells.join(" "));
    }
    Some(rows)
}
