//! Transition probabilities `p_{k,n}(t)` by closed form or uniformization.

mod closed;
mod generator;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use closed::{p_bilateral_poisson, p_catastrophe_constant, p_constant_absorbing, p_ehrenfest_reflecting, CATASTROPHE_QUAD_TOL};
pub(crate) use closed::{image_range, ln_walk_prefactor, poisson_walk, scale_by_exp, walk_table};
use closed::{constant_absorbing_row, poisson_row};
pub use generator::{poisson_weights, Generator};

use crate::csv::{num, CsvWriter};
use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate_vec;
use crate::rates::{residual, Family, Preset, RateModel, StateSpace, SymmetryReport, SymmetryWeights};
use crate::scalar::Scalar;

/// How a grid was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Uniformization,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Uniformization => "uniformization",
        })
    }
}

/// `p_{k,n}(t)` over a state × time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid<T> {
    pub start: i64,
    pub states: Vec<i64>,
    pub times: Vec<T>,
    /// `values[i][j] = p_{start, states[j]}(times[i])`.
    pub values: Vec<Vec<T>>,
    pub method: Method,
    /// Computational window for bilateral models.
    pub window: Option<(i64, i64)>,
    /// Largest probability mass outside `states` over the time grid.
    pub tail_bound: T,
}

impl<T: Scalar> ProbabilityGrid<T> {
    pub fn state_index(&self, n: i64) -> Option<usize> {
        let first = *self.states.first()?;
        let i = n.checked_sub(first)?;
        if i >= 0 && (i as usize) < self.states.len() && self.states[i as usize] == n {
            Some(i as usize)
        } else {
            self.states.iter().position(|&s| s == n)
        }
    }

    /// `p_{start,n}(times[i])`, zero for states outside the grid.
    pub fn get(&self, i: usize, n: i64) -> T {
        self.state_index(n).map_or_else(T::zero, |j| self.values[i][j])
    }

    pub fn row_sum(&self, i: usize) -> T {
        self.values[i].iter().fold(T::zero(), |a, &b| a + b)
    }

    /// CSV `t,state,probability,method`, time-major.
    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new("t,state,probability,method");
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &n) in self.states.iter().enumerate() {
                w.row(&[&num(t), &n, &num(self.values[i][j]), &self.method]);
            }
        }
        w.finish()
    }
}

/// Rejects empty, negative, non-finite or descending time grids.
pub fn validate_times<T: Scalar>(times: &[T]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidTimeGrid("no time points".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t >= T::zero() && t.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("time {t} at position {i} is negative or not finite")));
        }
        if i > 0 && t < times[i - 1] {
            return Err(Error::InvalidTimeGrid(format!("times must be ascending; {t} follows {}", times[i - 1])));
        }
    }
    Ok(())
}

/// `steps + 1` equally spaced times from `t_min` to `t_max` inclusive.
pub fn time_grid<T: Scalar>(t_min: T, t_max: T, steps: usize) -> Result<Vec<T>> {
    if steps == 0 || !(t_max > t_min) || !(t_min >= T::zero()) || !t_max.is_finite() {
        return Err(Error::InvalidTimeGrid(format!(
            "need 0 <= t_min < t_max and at least one step, got [{t_min}, {t_max}] with {steps} steps"
        )));
    }
    let h = (t_max - t_min) / T::int(steps as i64);
    Ok((0..=steps).map(|i| if i == steps { t_max } else { t_min + h * T::int(i as i64) }).collect())
}

fn validate_tol<T: Scalar>(tol: T) -> Result<()> {
    if !(tol > T::zero() && tol < T::one()) {
        return Err(invalid("tol", format!("must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn check_start<T: Scalar>(model: &RateModel<T>, k: i64) -> Result<()> {
    if let StateSpace::Truncated { n } = model.space() {
        if k < 0 || k > n {
            return Err(Error::StateOutOfRange { state: k, lo: 0, hi: n });
        }
    }
    if let Some((lo, hi)) = model.rate_domain() {
        if k < lo || k > hi {
            return Err(Error::StateOutOfRange { state: k, lo, hi });
        }
    }
    Ok(())
}

/// Seed half-width for bilateral windows, from a Poisson bound on the
/// number of jumps by `t_max` at total rate `rate`.
fn seed_half_width<T: Scalar>(rate: T, t_max: T) -> i64 {
    let a = rate * t_max;
    (a + T::lit(12.0) * a.sqrt() + T::lit(20.0)).ceil().to_i64().unwrap_or(i64::MAX / 8)
}

/// Window around the start state (and state 0 for catastrophe models).
fn window_for<T: Scalar>(model: &RateModel<T>, k: i64, m: i64) -> (i64, i64) {
    let (a, b) = if model.family() == Family::Catastrophe { (k.min(0), k.max(0)) } else { (k, k) };
    (a - m, b + m)
}

fn max_exit_rate<T: Scalar>(model: &RateModel<T>, lo: i64, hi: i64) -> T {
    (lo..=hi).fold(T::zero(), |m, n| m.max(model.exit_rate(n)))
}

/// Generic oracle: `v(t) = e_k exp(Q t)` by uniformization. Truncated
/// models use the full state space; bilateral models use a window grown
/// until the mass lost through its edges stays below `tol`.
pub fn uniformize<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<ProbabilityGrid<T>> {
    validate_times(times)?;
    validate_tol(tol)?;
    check_start(model, k)?;
    let t_max = *times.last().expect("validated nonempty");
    match model.space() {
        StateSpace::Truncated { n } => {
            let generator = Generator::from_model(model, 0, n)?;
            let values = propagate_grid(&generator, k, times, tol);
            let tail = tail_of(&values);
            Ok(ProbabilityGrid {
                start: k,
                states: (0..=n).collect(),
                times: times.to_vec(),
                values,
                method: Method::Uniformization,
                window: None,
                tail_bound: tail,
            })
        }
        StateSpace::Bilateral { .. } => {
            let (lo0, hi0) = window_for(model, k, 64);
            let rate = max_exit_rate(model, lo0, hi0);
            let mut m = seed_half_width(rate, t_max);
            loop {
                let (mut lo, mut hi) = window_for(model, k, m);
                let mut clipped = false;
                if let Some((dlo, dhi)) = model.rate_domain() {
                    if lo < dlo {
                        lo = dlo;
                        clipped = true;
                    }
                    if hi > dhi {
                        hi = dhi;
                        clipped = true;
                    }
                }
                let generator = Generator::from_model(model, lo, hi)?;
                let values = propagate_grid(&generator, k, times, tol / T::lit(2.0));
                let lost = tail_of(&values);
                if lost < tol {
                    return Ok(ProbabilityGrid {
                        start: k,
                        states: (lo..=hi).collect(),
                        times: times.to_vec(),
                        values,
                        method: Method::Uniformization,
                        window: Some((lo, hi)),
                        tail_bound: lost,
                    });
                }
                if clipped {
                    return Err(Error::WindowTooSmall {
                        lo,
                        hi,
                        tol: tol.as_f64(),
                        lost: lost.as_f64(),
                        required: 2 * m,
                    });
                }
                m *= 2;
            }
        }
    }
}

fn propagate_grid<T: Scalar>(generator: &Generator<T>, k: i64, times: &[T], tol: T) -> Vec<Vec<T>> {
    let mut v = vec![T::zero(); generator.dim()];
    v[(k - generator.lo()) as usize] = T::one();
    let eps = tol / T::int(10 * times.len() as i64);
    let mut prev = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > prev {
            generator.propagate(&mut v, t - prev, eps);
            prev = t;
        }
        out.push(v.iter().map(|&p| p.max(T::zero()).min(T::one())).collect());
    }
    out
}

fn tail_of<T: Scalar>(values: &[Vec<T>]) -> T {
    values
        .iter()
        .map(|row| (T::one() - row.iter().fold(T::zero(), |a, &b| a + b)).max(T::zero()))
        .fold(T::zero(), T::max)
}

/// `p_{k,·}(t)` on a time grid: closed form for the constant-absorbing,
/// Ehrenfest, constant-bilateral and constant-catastrophe presets,
/// uniformization otherwise.
pub fn transition_grid<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<ProbabilityGrid<T>> {
    validate_times(times)?;
    validate_tol(tol)?;
    check_start(model, k)?;
    match (model.preset(), model.space()) {
        (Preset::ConstantAbsorbing { lambda, mu }, StateSpace::Truncated { n }) => {
            constant_absorbing_grid(n, *lambda, *mu, k, times, tol)
        }
        (Preset::Ehrenfest { alpha }, StateSpace::Truncated { n }) => {
            let values = times
                .par_iter()
                .map(|&t| (0..=n).map(|m| p_ehrenfest_reflecting(n, *alpha, k, m, t)).collect::<Result<Vec<T>>>())
                .collect::<Result<Vec<_>>>()?;
            let tail = tail_of(&values);
            Ok(ProbabilityGrid {
                start: k,
                states: (0..=n).collect(),
                times: times.to_vec(),
                values,
                method: Method::ClosedForm,
                window: None,
                tail_bound: tail,
            })
        }
        (Preset::ConstantBilateral { lambda, mu }, StateSpace::Bilateral { .. }) => {
            let (lambda, mu) = (*lambda, *mu);
            bilateral_closed(model, k, times, tol, |lo, hi| {
                Ok(times.par_iter().map(|&t| poisson_row(lambda, mu, k, lo..=hi, t)).collect())
            })
        }
        (Preset::ConstantCatastrophe { lambda, mu, alpha }, StateSpace::Bilateral { .. }) => {
            let (lambda, mu, alpha) = (*lambda, *mu, *alpha);
            bilateral_closed(model, k, times, tol, |lo, hi| {
                closed::catastrophe_rows(lambda, mu, alpha, k, lo..=hi, times, tol / T::lit(10.0))
            })
        }
        _ => uniformize(model, k, times, tol),
    }
}

fn bilateral_closed<T: Scalar, F>(model: &RateModel<T>, k: i64, times: &[T], tol: T, rows: F) -> Result<ProbabilityGrid<T>>
where
    F: Fn(i64, i64) -> Result<Vec<Vec<T>>>,
{
    let t_max = *times.last().expect("validated nonempty");
    let mut m = seed_half_width(model.exit_rate(k).max(model.exit_rate(k + 1)), t_max);
    loop {
        let (lo, hi) = window_for(model, k, m);
        let values = rows(lo, hi)?;
        let lost = tail_of(&values);
        if lost < tol {
            return Ok(ProbabilityGrid {
                start: k,
                states: (lo..=hi).collect(),
                times: times.to_vec(),
                values,
                method: Method::ClosedForm,
                window: Some((lo, hi)),
                tail_bound: lost,
            });
        }
        m *= 2;
    }
}

/// Interior by the image series; absorbed masses `p_{k,0}`, `p_{k,N}` by
/// integrating the boundary fluxes `μ p_{k,1}` and `λ p_{k,N−1}`.
fn constant_absorbing_grid<T: Scalar>(n: i64, lambda: T, mu: T, k: i64, times: &[T], tol: T) -> Result<ProbabilityGrid<T>> {
    if k == 0 || k == n {
        let values = times.iter().map(|_| (0..=n).map(|m| if m == k { T::one() } else { T::zero() }).collect()).collect();
        return Ok(ProbabilityGrid {
            start: k,
            states: (0..=n).collect(),
            times: times.to_vec(),
            values,
            method: Method::ClosedForm,
            window: None,
            tail_bound: T::zero(),
        });
    }
    let interior: Vec<Vec<T>> = times.par_iter().map(|&t| constant_absorbing_row(n, lambda, mu, k, t)).collect();
    let seg_tol = tol / T::int(10 * times.len() as i64);
    let flux = |tau: T| -> Vec<T> {
        let row = constant_absorbing_row(n, lambda, mu, k, tau);
        vec![mu * row[0], lambda * row[(n - 2) as usize]]
    };
    let mut absorbed = [T::zero(), T::zero()];
    let mut prev = T::zero();
    let mut values = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if t > prev {
            let seg = integrate_vec(flux, prev, t, seg_tol)?;
            absorbed[0] = absorbed[0] + seg.value[0];
            absorbed[1] = absorbed[1] + seg.value[1];
            prev = t;
        }
        let mut row = Vec::with_capacity(n as usize + 1);
        row.push(absorbed[0].min(T::one()));
        row.extend(interior[i].iter().map(|&p| p.max(T::zero())));
        row.push(absorbed[1].min(T::one()));
        values.push(row);
    }
    let tail = values
        .iter()
        .map(|row: &Vec<T>| (T::one() - row.iter().fold(T::zero(), |a, &b| a + b)).abs())
        .fold(T::zero(), T::max);
    Ok(ProbabilityGrid {
        start: k,
        states: (0..=n).collect(),
        times: times.to_vec(),
        values,
        method: Method::ClosedForm,
        window: None,
        tail_bound: tail,
    })
}

/// `p_{k,n}(t)` for the listed states only, `values[time][state]`.
/// Closed forms are evaluated state by state where available; other
/// models go through [`transition_grid`]. Also returns the grid's tail bound.
pub(crate) fn transition_values<T: Scalar>(
    model: &RateModel<T>,
    k: i64,
    states: &[i64],
    times: &[T],
    tol: T,
) -> Result<(Vec<Vec<T>>, Method, T)> {
    validate_times(times)?;
    check_start(model, k)?;
    match (model.preset(), model.space()) {
        (Preset::ConstantAbsorbing { lambda, mu }, StateSpace::Truncated { n })
            if k > 0 && k < n && states.iter().all(|&m| m > 0 && m < n) =>
        {
            let values = times
                .par_iter()
                .map(|&t| {
                    let row = constant_absorbing_row(n, *lambda, *mu, k, t);
                    states.iter().map(|&m| row[(m - 1) as usize].max(T::zero())).collect()
                })
                .collect();
            Ok((values, Method::ClosedForm, T::zero()))
        }
        (Preset::Ehrenfest { alpha }, StateSpace::Truncated { n }) => {
            let values = times
                .par_iter()
                .map(|&t| states.iter().map(|&m| p_ehrenfest_reflecting(n, *alpha, k, m, t)).collect::<Result<Vec<T>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok((values, Method::ClosedForm, T::zero()))
        }
        (Preset::ConstantBilateral { lambda, mu }, StateSpace::Bilateral { .. }) => {
            let values = times
                .par_iter()
                .map(|&t| states.iter().map(|&m| closed::poisson_walk(*lambda, *mu, m - k, t)).collect())
                .collect();
            Ok((values, Method::ClosedForm, T::zero()))
        }
        _ => {
            let g = transition_grid(model, k, times, tol)?;
            let values = (0..times.len()).map(|i| states.iter().map(|&m| g.get(i, m)).collect()).collect();
            Ok((values, g.method, g.tail_bound))
        }
    }
}

/// Identity relating a grid to its mirror-image grid.
#[derive(Debug, Clone, Copy)]
pub enum MirrorRelation<'a, T> {
    /// `p_{N−k,N−n}(t) = (x_n / x_k) p_{k,n}(t)`.
    Weighted(&'a SymmetryWeights<T>),
    /// `p_{a−k,a−n}(t) = p_{k,n}(t)`.
    Reflection { axis: i64 },
}

impl<T: Scalar> MirrorRelation<'_, T> {
    fn axis(&self) -> i64 {
        match self {
            MirrorRelation::Weighted(w) => w.size(),
            MirrorRelation::Reflection { axis } => *axis,
        }
    }
}

/// Worst residual of the mirror identity between `grid` (start `k`) and
/// `mirrored` (start `axis − k`) over shared states and all times.
pub fn verify_quasi_symmetry<T: Scalar>(
    grid: &ProbabilityGrid<T>,
    mirrored: &ProbabilityGrid<T>,
    relation: MirrorRelation<'_, T>,
    family: Family,
    tol: T,
) -> Result<SymmetryReport<T>> {
    if grid.times != mirrored.times {
        return Err(Error::GridMismatch("time grids differ".into()));
    }
    let axis = relation.axis();
    let k = grid.start;
    if mirrored.start != axis - k {
        return Err(Error::GridMismatch(format!("mirrored grid starts at {}, expected {}", mirrored.start, axis - k)));
    }
    let mut res = Vec::new();
    for i in 0..grid.times.len() {
        for (j, &n) in grid.states.iter().enumerate() {
            let Some(jm) = mirrored.state_index(axis - n) else { continue };
            let lhs = mirrored.values[i][jm];
            let rhs = match relation {
                MirrorRelation::Weighted(w) => w.get(n) / w.get(k) * grid.values[i][j],
                MirrorRelation::Reflection { .. } => grid.values[i][j],
            };
            res.push((n, residual(lhs, rhs)));
        }
    }
    Ok(SymmetryReport::from_residuals(family, tol, res))
}
