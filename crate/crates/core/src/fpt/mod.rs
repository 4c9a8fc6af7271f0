//! First-passage-time densities and taboo (avoiding) probabilities.

mod renewal;
mod series;
mod symmetric;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use renewal::{fpt_renewal, taboo_renewal};
pub use series::{
    fpt_catastrophe_series, fpt_constant_closed, fpt_ehrenfest_closed, taboo_catastrophe_series, taboo_constant_closed,
    taboo_ehrenfest_closed,
};
pub use symmetric::{
    fpt_bilateral, fpt_catastrophe, fpt_symmetric_absorbing, fpt_symmetric_reflecting, taboo_bilateral, taboo_catastrophe,
    taboo_reflecting, taboo_symmetric_absorbing,
};

use crate::csv::{num, CsvWriter};
use crate::error::{invalid, Error, Result};
use crate::rates::{Family, RateModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FptMethod {
    Renewal,
    SymmetricClosedForm,
    Series,
}

impl fmt::Display for FptMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FptMethod::Renewal => "renewal",
            FptMethod::SymmetricClosedForm => "symmetric-closed-form",
            FptMethod::Series => "series",
        })
    }
}

/// Which side of the taboo state a taboo grid lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

impl Side {
    pub fn of(state: i64, taboo: i64) -> Option<Side> {
        match state.cmp(&taboo) {
            std::cmp::Ordering::Less => Some(Side::Below),
            std::cmp::Ordering::Greater => Some(Side::Above),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Total mass of the density: cumulative mass at the last grid time plus
/// an exponential tail fitted over the last tenth of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventualEstimate<T> {
    pub value: T,
    pub tail: T,
    /// Whether a tail was fitted. Without one the value is only the mass
    /// observed on the grid.
    pub extrapolated: bool,
}

/// Probability currents into state 0 from below (`up`) and above (`down`).
#[derive(Debug, Clone, PartialEq)]
pub struct Currents<T> {
    pub up: Vec<T>,
    pub down: Vec<T>,
    /// Mass outside the summation window.
    pub tail_bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FptDensity<T> {
    pub start: i64,
    pub target: i64,
    pub direction: Direction,
    pub times: Vec<T>,
    pub density: Vec<T>,
    /// Trapezoidal integral of the density from 0 to each grid time.
    pub cumulative: Vec<T>,
    pub eventual: EventualEstimate<T>,
    pub method: FptMethod,
    /// Estimated sup-norm error of `density`.
    pub error_estimate: T,
    pub currents: Option<Currents<T>>,
}

pub(crate) struct Assembly<T> {
    pub start: i64,
    pub target: i64,
    pub direction: Direction,
    pub method: FptMethod,
    /// Density limit at `t = 0`, used for the first trapezoid.
    pub at_zero: T,
    pub error_estimate: T,
}

impl<T: Scalar> FptDensity<T> {
    pub(crate) fn assemble(a: Assembly<T>, times: &[T], density: Vec<T>) -> Self {
        let cumulative = cumulative(times, &density, a.at_zero);
        let eventual = eventual(times, &density, &cumulative);
        Self {
            start: a.start,
            target: a.target,
            direction: a.direction,
            times: times.to_vec(),
            density,
            cumulative,
            eventual,
            method: a.method,
            error_estimate: a.error_estimate,
            currents: None,
        }
    }

    /// Most negative density value (zero if none).
    pub fn min_value(&self) -> T {
        self.density.iter().fold(T::zero(), |m, &v| m.min(v))
    }

    /// CSV `t,value,method`.
    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new("t,value,method");
        for (t, g) in self.times.iter().zip(&self.density) {
            w.row(&[&num(*t), &num(*g), &self.method]);
        }
        w.finish()
    }
}

fn cumulative<T: Scalar>(times: &[T], g: &[T], at_zero: T) -> Vec<T> {
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(g.len());
    let mut acc = half * times[0] * (at_zero + g[0]);
    out.push(acc);
    for i in 1..g.len() {
        acc = acc + half * (times[i] - times[i - 1]) * (g[i] + g[i - 1]);
        out.push(acc);
    }
    out
}

fn eventual<T: Scalar>(times: &[T], g: &[T], cum: &[T]) -> EventualEstimate<T> {
    let n = g.len();
    let last = cum[n - 1];
    let plain = EventualEstimate { value: last, tail: T::zero(), extrapolated: false };
    if n < 10 {
        return plain;
    }
    let a = n - 1 - n / 10;
    let b = n - 1;
    let (ga, gb) = (g[a], g[b]);
    let span = times[b] - times[a];
    if !(ga > T::zero() && gb > T::zero() && span > T::zero() && gb < ga) {
        return plain;
    }
    let rate = (ga / gb).ln() / span;
    let tail = gb / rate;
    EventualEstimate { value: last + tail, tail, extrapolated: true }
}

/// Taboo probabilities `p^{<r>}_{k,n}(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabooGrid<T> {
    pub start: i64,
    pub taboo: i64,
    pub states: Vec<i64>,
    pub times: Vec<T>,
    /// `values[time][state]`.
    pub values: Vec<Vec<T>>,
    pub side: Side,
    pub method: FptMethod,
    /// Largest disagreement between two equivalent closed forms, when both are evaluated.
    pub cross_check: Option<T>,
}

impl<T: Scalar> TabooGrid<T> {
    pub fn get(&self, i: usize, n: i64) -> Option<T> {
        self.states.iter().position(|&s| s == n).map(|j| self.values[i][j])
    }

    /// CSV `t,state,value,method`, time-major.
    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new("t,state,value,method");
        for (i, t) in self.times.iter().enumerate() {
            for (j, n) in self.states.iter().enumerate() {
                w.row(&[&num(*t), n, &num(self.values[i][j]), &self.method]);
            }
        }
        w.finish()
    }
}

/// Rounding noise below zero is clamped; larger negative values are kept
/// so callers can see them.
pub(crate) fn clamp_rounding<T: Scalar>(v: T) -> T {
    if v < T::zero() && v > -T::lit(1e-12) {
        T::zero()
    } else {
        v
    }
}

/// Rate of the direct jump `k -> s`: the `t -> 0` limit of the density.
pub(crate) fn direct_rate<T: Scalar>(model: &RateModel<T>, k: i64, s: i64) -> T {
    let mut r = T::zero();
    if s == k + 1 {
        r = r + model.lambda(k);
    }
    if s == k - 1 {
        r = r + model.mu(k);
    }
    if s == 0 && k != 0 && model.family() == Family::Catastrophe {
        r = r + model.alpha(k);
    }
    r
}

pub(crate) fn side_for(k: i64, states: &[i64], taboo: i64) -> Result<Side> {
    let side = Side::of(k, taboo).ok_or_else(|| Error::SideMismatch(format!("start state {k} equals the taboo state")))?;
    for &n in states {
        if Side::of(n, taboo) != Some(side) {
            return Err(Error::SideMismatch(format!("state {n} and start {k} lie on different sides of {taboo}")));
        }
    }
    Ok(side)
}

/// `s` with `N = 2s` for truncated models.
pub(crate) fn half_size<T: Scalar>(model: &RateModel<T>) -> Result<i64> {
    let n = model.size().ok_or(Error::FamilyMismatch { expected: Family::Absorbing, found: model.family() })?;
    if n % 2 != 0 {
        return Err(invalid("N", format!("symmetry-state formulas need an even N, got {n}")));
    }
    Ok(n / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_of_exponential() {
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let g: Vec<f64> = times.iter().map(|t| 0.5 * (-0.5 * t).exp()).collect();
        let c = cumulative(&times, &g, 0.5);
        assert!((c[4000] - (1.0 - (-20.0_f64).exp())).abs() < 1e-5);
        let e = eventual(&times, &g, &c);
        assert!(e.extrapolated);
        assert!((e.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sides() {
        assert_eq!(side_for(3, &[1, 2, 4], 5).unwrap(), Side::Below);
        assert!(side_for(3, &[6], 5).is_err());
        assert!(side_for(5, &[6], 5).is_err());
    }
}
