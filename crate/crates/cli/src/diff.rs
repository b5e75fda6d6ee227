//! Locate the first differing field between two JSON values, for replay
//! divergence reports.

use serde_json::Value;

pub fn first_difference(a: &Value, b: &Value) -> Option<String> {
    diff_at(a, b, String::from("$"))
}

fn diff_at(a: &Value, b: &Value, path: String) -> Option<String> {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            // Insertion order = struct field order, so the chronologically
            // first divergence is reported (e.g. an iteration before the
            // final status it caused).
            let mut keys: Vec<&String> = ma.keys().collect();
            for k in mb.keys() {
                if !ma.contains_key(k) {
                    keys.push(k);
                }
            }
            for key in keys {
                match (ma.get(key), mb.get(key)) {
                    (Some(va), Some(vb)) => {
                        if let Some(d) = diff_at(va, vb, format!("{path}.{key}")) {
                            return Some(d);
                        }
                    }
                    (Some(_), None) => return Some(format!("{path}.{key} (missing in replay)")),
                    (None, Some(_)) => return Some(format!("{path}.{key} (missing in original)")),
                    (None, None) => unreachable!(),
                }
            }
            None
        }
        (Value::Array(va), Value::Array(vb)) => {
            if va.len() != vb.len() {
                return Some(format!("{path} (length {} vs {})", va.len(), vb.len()));
            }
            for (i, (ea, eb)) in va.iter().zip(vb.iter()).enumerate() {
                if let Some(d) = diff_at(ea, eb, format!("{path}[{i}]")) {
                    return Some(d);
                }
            }
            None
        }
        _ => {
            if a == b {
                None
            } else {
                Some(path)
            }
        }
    }
}
