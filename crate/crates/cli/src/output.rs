use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

/// Leaf values keyed by their dotted path (`a.b.0.c`).
fn flatten(v: &Value, path: &mut String, out: &mut Vec<(String, String)>) {
    let mut push = |key: &str, child: &Value, out: &mut Vec<(String, String)>| {
        let len = path.len();
        if !path.is_empty() {
            path.push('.');
        }
        path.push_str(key);
        flatten(child, path, out);
        path.truncate(len);
    };
    match v {
        Value::Object(m) => {
            for (k, c) in m {
                push(k, c, out);
            }
        }
        Value::Array(a) => {
            for (i, c) in a.iter().enumerate() {
                push(&i.to_string(), c, out);
            }
        }
        Value::String(s) => out.push((path.clone(), s.clone())),
        Value::Null => out.push((path.clone(), String::new())),
        other => out.push((path.clone(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(v).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv | Format::Plain => {
            let mut rows = Vec::new();
            flatten(v, &mut String::new(), &mut rows);
            let mut s = String::new();
            if format == Format::Csv {
                s.push_str("key,value\n");
            }
            for (k, val) in rows {
                if format == Format::Csv {
                    s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&val)));
                } else {
                    s.push_str(&format!("{k} = {val}\n"));
                }
            }
            s
        }
    }
}
