//! Plain-text table output with fixed number formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Formats a float with 15 significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0" vs "0" differences between runs
        return "0.00000000000000e0".to_string();
    }
    format!("{v:.14e}")
}

/// A CSV table built in memory.
#[derive(Debug, Clone, Default)]
pub struct Table {
    preamble: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            preamble: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds a `# key=value` line printed before the header.
    pub fn annotate(&mut self, key: &str, value: f64) {
        self.preamble.push(format!("# {key}={}", fmt_num(value)));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.preamble {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }
}

/// Writes `text`, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(fmt_num(6.061458241811056), "6.06145824181106e0");
        assert_eq!(fmt_num(-0.0), fmt_num(0.0));
        assert_eq!(fmt_num(1.0e-3), "1.00000000000000e-3");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,2\n");
        t.annotate("period", 2.0);
        assert!(t.to_csv().starts_with("# period=2.00000000000000e0\na,b\n"));
    }
}
