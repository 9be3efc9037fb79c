//! Fixed-format report files: tab-separated key/value lines plus optional
//! per-item tables, every number at 6 significant digits so identical
//! runs produce identical bytes.

use std::path::Path;

use crate::error::Result;

/// Format a float with 6 significant digits, locale-independent.
pub fn format_sig(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = 5 - exponent;
    if (0..=17).contains(&decimals) {
        format!("{:.*}", decimals as usize, value)
    } else {
        format!("{:.5e}", value)
    }
}

/// A report: named scalar fields and optional tabular sections.
#[derive(Debug, Clone, Default)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn new(title: &str) -> Report {
        Report {
            lines: vec![format!("# {title}")],
        }
    }

    pub fn field(&mut self, key: &str, value: f64) -> &mut Self {
        self.lines.push(format!("{key}\t{}", format_sig(value)));
        self
    }

    pub fn field_int(&mut self, key: &str, value: u64) -> &mut Self {
        self.lines.push(format!("{key}\t{value}"));
        self
    }

    pub fn field_str(&mut self, key: &str, value: &str) -> &mut Self {
        self.lines.push(format!("{key}\t{value}"));
        self
    }

    /// Start a tabular section with the given column header.
    pub fn table(&mut self, header: &[&str]) -> &mut Self {
        self.lines.push(String::new());
        self.lines.push(header.join("\t"));
        self
    }

    pub fn row(&mut self, cells: &[String]) -> &mut Self {
        self.lines.push(cells.join("\t"));
        self
    }

    pub fn to_string_body(&self) -> String {
        let mut body = self.lines.join("\n");
        body.push('\n');
        body
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let body = self.to_string_body();
        super::atomic_write(path.as_ref(), |w| {
            w.write_all(body.as_bytes())?;
            Ok(())
        })
    }
}
