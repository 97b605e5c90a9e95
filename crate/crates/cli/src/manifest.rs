//! `manifest.txt`: `key: value` lines nested by two-space indentation, with
//! values written as TOML literals. The `config` block maps line for line
//! onto the TOML text of the resolved configuration.

use anyhow::{bail, Result};
use toml::{Table, Value};

/// TOML literal for `v`. Floats use the shortest representation that
/// round-trips.
pub fn literal(v: &Value) -> String {
    match v {
        Value::Float(x) if x.is_nan() => "nan".into(),
        Value::Float(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
        Value::Float(x) => format!("{x:?}"),
        Value::Array(items) => format!("[{}]", items.iter().map(literal).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section(&mut self, indent: usize, key: &str) {
        self.lines.push(format!("{}{key}:", "  ".repeat(indent)));
    }

    pub fn value(&mut self, indent: usize, key: &str, v: impl Into<Value>) {
        self.lines
            .push(format!("{}{key}: {}", "  ".repeat(indent), literal(&v.into())));
    }

    /// Appends a top-level `config` section echoing a table of sections.
    pub fn config(&mut self, config: &Table) {
        self.section(0, "config");
        for (name, section) in config {
            self.section(1, name);
            if let Value::Table(entries) = section {
                for (k, v) in entries {
                    self.value(2, k, v.clone());
                }
            }
        }
    }

    /// Appends another manifest's lines, indented one level.
    pub fn nest(&mut self, other: &Manifest) {
        self.lines.extend(other.lines.iter().map(|l| format!("  {l}")));
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches(' ').len()
}

/// Recovers the TOML text of the `config` section of a manifest.
pub fn config_from_manifest(text: &str) -> Result<String> {
    let mut lines = text.lines().skip_while(|l| *l != "config:");
    if lines.next().is_none() {
        bail!("manifest has no config section");
    }
    let mut out = String::new();
    for line in lines.take_while(|l| indent_of(l) > 0) {
        match indent_of(line) {
            2 => match line.trim().strip_suffix(':') {
                Some(name) => out.push_str(&format!("[{name}]\n")),
                None => bail!("malformed config section line \"{line}\""),
            },
            4 => match line.trim().split_once(": ") {
                Some((k, v)) => out.push_str(&format!("{k} = {v}\n")),
                None => bail!("malformed config entry \"{line}\""),
            },
            _ => bail!("unexpected indentation in \"{line}\""),
        }
    }
    Ok(out)
}

/// `key: value` pairs at the top level of a manifest.
pub fn top_level(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| indent_of(l) == 0)
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_block_round_trips() {
        let table: Table = "[grid]\ndim = 1\nextents = [1.0]\n\n[time]\ndt = 1e-10\nflux = \"upwind\"\n"
            .parse()
            .unwrap();
        let mut m = Manifest::new();
        m.value(0, "command", "run");
        m.config(&table);
        m.section(0, "outputs");
        m.value(1, "diagnostics", "diagnostics.csv");
        let text = m.render();
        assert!(text.contains("config:\n  grid:\n    dim: 1\n"), "{text}");
        let back = config_from_manifest(&text).unwrap();
        assert_eq!(
            back,
            "[grid]\ndim = 1\nextents = [1.0]\n[time]\ndt = 1e-10\nflux = \"upwind\"\n"
        );
        assert_eq!(back.parse::<Table>().unwrap(), table);
    }

    #[test]
    fn values_are_toml_literals() {
        let mut m = Manifest::new();
        m.value(0, "exit_status", 2i64);
        m.value(0, "verdict", "n/a");
        m.value(1, "ratio", 1.7761000509737385e-15);
        m.value(1, "xs", vec![0.5, f64::INFINITY]);
        assert_eq!(
            m.render(),
            "exit_status: 2\nverdict: \"n/a\"\n  ratio: 1.7761000509737385e-15\n  xs: [0.5, inf]\n"
        );
        assert_eq!(top_level(&m.render()).len(), 2);
    }

    #[test]
    fn float_literals_parse_back_exactly() {
        for x in [0.1, 1e-10, 1e6, 1e300, 5e-324, -2.5, 1.0 / 3.0] {
            let text = format!("x = {}\n", literal(&Value::Float(x)));
            let t: Table = text.parse().unwrap();
            assert_eq!(t["x"].as_float().unwrap().to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn missing_config_is_an_error() {
        assert!(config_from_manifest("command: \"run\"\n").is_err());
    }
}
