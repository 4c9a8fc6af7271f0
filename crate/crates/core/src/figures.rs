//! Curves of the four reference figure pairs, as CSV.

use std::fmt;
use std::str::FromStr;

use crate::csv::{num, CsvWriter};
use crate::error::{invalid, Error, Result};
use crate::fpt::{fpt_constant_closed, fpt_ehrenfest_closed, taboo_constant_closed, taboo_ehrenfest_closed};

/// Figure number (1 to 4) and panel (`a` or `b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureId {
    pub number: u8,
    pub panel: char,
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid("figure", format!("expected one of 1a..4b, got `{s}`"));
        let mut chars = s.chars();
        let (Some(d), Some(p), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(bad());
        };
        let number = d.to_digit(10).ok_or_else(bad)? as u8;
        if !(1..=4).contains(&number) || !matches!(p, 'a' | 'b') {
            return Err(bad());
        }
        Ok(Self { number, panel: p })
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.number, self.panel)
    }
}

impl FigureId {
    pub fn all() -> Vec<FigureId> {
        (1..=4).flat_map(|number| ['a', 'b'].map(|panel| FigureId { number, panel })).collect()
    }

    /// `μ` for figures 1 and 2, `α` for figures 3 and 4.
    pub fn rate(&self) -> f64 {
        if self.panel == 'a' {
            0.5
        } else {
            1.0
        }
    }

    /// Curve labels in column order.
    pub fn curves(&self) -> Vec<String> {
        match self.number {
            1 | 3 => (6..=9).map(|k| format!("k={k}")).collect(),
            2 => (7..=9).map(|n| format!("n={n}")).collect(),
            _ => (6..=9).map(|n| format!("n={n}")).collect(),
        }
    }
}

pub const DEFAULT_T_MIN: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_STEPS: usize = 1000;

const S: i64 = 10;

/// Curve values `[curve][time]`.
pub fn figure_curves(id: FigureId, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let rate = id.rate();
    let big_n = 2 * S;
    match id.number {
        1 => (6..=9).map(|k| fpt_constant_closed(big_n, 1.0, rate, k, times).map(|g| g.density)).collect(),
        3 => (6..=9).map(|k| fpt_ehrenfest_closed(big_n, rate, k, times).map(|g| g.density)).collect(),
        n => {
            let states: Vec<i64> = if n == 2 { (7..=9).collect() } else { (6..=9).collect() };
            let grid = if n == 2 {
                taboo_constant_closed(big_n, 1.0, rate, 9, &states, times)?
            } else {
                taboo_ehrenfest_closed(big_n, rate, 9, &states, times)?
            };
            Ok((0..states.len()).map(|j| grid.values.iter().map(|row| row[j]).collect()).collect())
        }
    }
}

/// CSV with a `t` column followed by one column per curve.
pub fn figure_csv(id: FigureId, times: &[f64]) -> Result<String> {
    let curves = figure_curves(id, times)?;
    let mut header = String::from("t");
    for c in id.curves() {
        header.push(',');
        header.push_str(&c);
    }
    let mut w = CsvWriter::new(&header);
    for (i, &t) in times.iter().enumerate() {
        let mut fields: Vec<String> = vec![num(t)];
        fields.extend(curves.iter().map(|c| num(c[i])));
        let refs: Vec<&dyn fmt::Display> = fields.iter().map(|f| f as &dyn fmt::Display).collect();
        w.row(&refs);
    }
    Ok(w.finish())
}
