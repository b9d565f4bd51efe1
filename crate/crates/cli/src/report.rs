//! Report text: `key=value` lines, a `---` separator, then one JSON document.
//!
//! Infinite values are written as the literal `inf` in both parts (as the
//! string `"inf"` inside JSON, which has no infinity).

use adlab_core::divergences::DivergenceValue;
use serde_json::{Map, Value};

#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
    body: Map<String, Value>,
}

/// `inf`, `-inf`, `nan`, or the shortest decimal that round-trips.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        serde_json::to_string(&x).expect("finite")
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() { Value::from(x) } else { Value::from(fmt_f64(x)) }
}

pub fn div_value(v: DivergenceValue) -> Value {
    num(v.to_f64())
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.line("tool", "adlab");
        r.line("version", env!("CARGO_PKG_VERSION"));
        r.line("command", command);
        r
    }

    /// Adds a line and mirrors it into the JSON block.
    pub fn line(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let v = value.to_string();
        self.body.insert(key.to_string(), Value::from(v.clone()));
        self.lines.push((key.to_string(), v));
        self
    }

    pub fn real(&mut self, key: &str, x: f64) -> &mut Self {
        self.lines.push((key.to_string(), fmt_f64(x)));
        self.body.insert(key.to_string(), num(x));
        self
    }

    pub fn int(&mut self, key: &str, n: u64) -> &mut Self {
        self.lines.push((key.to_string(), n.to_string()));
        self.body.insert(key.to_string(), Value::from(n));
        self
    }

    pub fn flag(&mut self, key: &str, b: bool) -> &mut Self {
        self.lines.push((key.to_string(), b.to_string()));
        self.body.insert(key.to_string(), Value::from(b));
        self
    }

    /// JSON-only field.
    pub fn field(&mut self, key: &str, v: Value) -> &mut Self {
        self.body.insert(key.to_string(), v);
        self
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s.push_str("---\n");
        s.push_str(&serde_json::to_string_pretty(&Value::Object(self.body.clone())).expect("report is JSON"));
        s.push('\n');
        s
    }
}

/// Splits rendered text back into its lines and JSON block.
pub fn parse(text: &str) -> Option<(Vec<(String, String)>, Value)> {
    let (head, json) = text.split_once("---\n")?;
    let lines = head
        .lines()
        .map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect::<Option<Vec<_>>>()?;
    Some((lines, serde_json::from_str(json).ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_token() {
        let mut r = Report::new("compute");
        r.real("value", f64::INFINITY).real("gap", 1e-9);
        let text = r.render();
        assert!(text.contains("value=inf\n"));
        let (lines, json) = parse(&text).unwrap();
        assert_eq!(lines[0], ("tool".into(), "adlab".into()));
        assert_eq!(json["value"], "inf");
        assert_eq!(json["gap"].as_f64(), Some(1e-9));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
