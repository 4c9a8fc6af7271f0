//! Plain CSV emission with round-trip exact number formatting.

use std::fmt::Write as _;

use crate::scalar::Scalar;

/// 17 significant digits in scientific notation.
pub fn num<T: Scalar>(v: T) -> String {
    let v = v.as_f64();
    if v == 0.0 {
        // Avoid `-0.0` rendering differently from `0.0`.
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}

/// Builds a CSV document line by line.
#[derive(Debug, Default, Clone)]
pub struct CsvWriter {
    buf: String,
}

impl CsvWriter {
    pub fn new(header: &str) -> Self {
        let mut buf = String::with_capacity(1024);
        buf.push_str(header);
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{f}");
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
