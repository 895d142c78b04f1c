//! Tabular results with metadata, serialized as CSV or JSON.
//!
//! CSV output carries run metadata in `# key: value` comment lines before
//! the header row; the data section itself is standard CSV, so the file
//! loads into any reader that accepts comment lines. JSON output mirrors
//! the same content as an object with `metadata`, `columns`, and `rows`.
//! Serialization is fully deterministic: no timestamps, no locale, and a
//! fixed number format.

use std::io::Write;

use crate::error::GossipError;

/// An ordered table of stringified results plus key/value metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats a number compactly and deterministically: integers and
/// moderate magnitudes use plain decimal notation, extremes fall back to
/// scientific notation, non-finite values become empty cells, and negative
/// zero is normalized.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs();
    if (1e-4..1e9).contains(&mag) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> ResultTable {
        ResultTable {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(cells);
    }

    /// Writes `# key: value` metadata lines followed by an RFC-4180 CSV
    /// body (header + rows).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), GossipError> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes the same content as a JSON object with `metadata` (ordered
    /// map), `columns`, and `rows`.
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<(), GossipError> {
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        let doc = serde_json::json!({
            "metadata": meta,
            "columns": self.columns,
            "rows": self.rows,
        });
        serde_json::to_writer_pretty(&mut out, &doc)?;
        writeln!(out)?;
        Ok(())
    }

    /// The CSV serialization as bytes (metadata + data), for determinism
    /// comparisons in tests.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, GossipError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting_is_compact_and_deterministic() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0", "negative zero must normalize");
        assert_eq!(fmt_num(1.5), "1.5");
        assert_eq!(fmt_num(-3.0), "-3");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(1e-5), "1e-5");
        assert_eq!(fmt_num(2.5e12), "2.5e12");
        assert_eq!(fmt_num(f64::NAN), "");
        assert_eq!(fmt_num(f64::INFINITY), "");
    }

    #[test]
    fn csv_has_metadata_comments_then_rfc4180_body() {
        let mut t = ResultTable::new(&["t", "note"]);
        t.meta("seed", 42);
        t.meta("kind", "demo");
        t.push_row(vec!["0.5".into(), "plain".into()]);
        t.push_row(vec!["1".into(), "needs,\"quoting\"".into()]);
        let text = String::from_utf8(t.to_csv_bytes().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed: 42");
        assert_eq!(lines[1], "# kind: demo");
        assert_eq!(lines[2], "t,note");
        assert_eq!(lines[3], "0.5,plain");
        assert_eq!(
            lines[4], "1,\"needs,\"\"quoting\"\"\"",
            "embedded commas and quotes must be escaped per RFC 4180"
        );
    }

    #[test]
    fn json_mirrors_csv_content() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.meta("x", "1");
        t.push_row(vec!["2".into(), "3".into()]);
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc["metadata"]["x"], "1");
        assert_eq!(doc["columns"][0], "a");
        assert_eq!(doc["rows"][0][1], "3");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn mismatched_row_width_is_rejected() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.push_row(vec!["1".into()]);
    }
}
