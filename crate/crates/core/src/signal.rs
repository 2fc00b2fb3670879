//! Signals: finite real vectors in the ambient Hilbert space R^n.

use crate::error::{Error, Result};

/// A vector in H = R^n with an optional label. Immutable after
/// construction; every entry is finite and n >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    label: Option<String>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("signal must have at least one entry".into()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite entry at index {bad}")));
        }
        Ok(Signal { values, label: None })
    }

    pub fn with_label(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let mut s = Signal::new(values)?;
        s.label = Some(label.into());
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Parse a CSV body with one value per line. Blank lines and lines
    /// starting with '#' are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let v: f64 = trimmed
                .parse()
                .map_err(|_| Error::InvalidInput(format!("line {}: cannot parse '{}'", lineno + 1, trimmed)))?;
            values.push(v);
        }
        Signal::new(values)
    }

    /// Parse a JSON array of numbers.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad JSON: {e}")))?;
        let arr = v.as_array().ok_or_else(|| Error::InvalidInput("expected a JSON array".into()))?;
        let mut values = Vec::with_capacity(arr.len());
        for (i, x) in arr.iter().enumerate() {
            let f = x.as_f64().ok_or_else(|| Error::InvalidInput(format!("element {i} is not a number")))?;
            values.push(f);
        }
        Signal::new(values)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for v in &self.values {
            out.push_str(&crate::io::format_f64(*v));
            out.push('\n');
        }
        out
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nonfinite() {
        assert!(Signal::new(vec![]).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN]).is_err());
        assert!(Signal::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = Signal::new(vec![2.0, -1.0, 0.0]).unwrap();
        let text = s.to_csv_string();
        let back = Signal::from_csv_str(&text).unwrap();
        assert_eq!(s.values(), back.values());
    }

    #[test]
    fn json_parse() {
        let s = Signal::from_json_str("[1.5, -2, 0]").unwrap();
        assert_eq!(s.values(), &[1.5, -2.0, 0.0]);
    }
}
