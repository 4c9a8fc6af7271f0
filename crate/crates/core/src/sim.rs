//! Exact-event Monte Carlo simulation of birth-death paths.
//!
//! Replication `i` draws from the ChaCha8 stream `i` of the generator seeded
//! with the run seed, so results do not depend on scheduling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv::{num, CsvWriter};
use crate::error::{invalid, Error, Result};
use crate::rates::{Family, RateModel};
use crate::scalar::Scalar;
use crate::twod::PlaneModel;

/// Random stream of replication `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn exponential<T: Scalar, R: Rng>(rng: &mut R, rate: T) -> T {
    // 1 − U lies in (0, 1].
    let u: f64 = 1.0 - rng.gen::<f64>();
    -T::lit(u.ln()) / rate
}

fn uniform<T: Scalar, R: Rng>(rng: &mut R) -> T {
    T::lit(rng.gen::<f64>())
}

/// A jump at `time` into `state`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<T, S> {
    pub time: T,
    pub state: S,
}

pub type Path<T> = Vec<Event<T, i64>>;
pub type PlanePath<T> = Vec<Event<T, (i64, i64)>>;

fn check_horizon<T: Scalar>(horizon: T) -> Result<()> {
    if !(horizon > T::zero() && horizon.is_finite()) {
        return Err(invalid("horizon", format!("must be positive and finite, got {horizon}")));
    }
    Ok(())
}

fn check_start<T: Scalar>(model: &RateModel<T>, start: i64) -> Result<()> {
    if let Some((lo, hi)) = model.rate_domain() {
        if start < lo || start > hi {
            return Err(Error::StateOutOfRange { state: start, lo, hi });
        }
    }
    Ok(())
}

/// Jumps of one path on `(0, horizon]`. The path stops early in an
/// absorbing state, or once `stop` returns true for a new state.
fn run_path<T: Scalar, R: Rng>(
    model: &RateModel<T>,
    start: i64,
    horizon: T,
    rng: &mut R,
    mut stop: impl FnMut(i64) -> bool,
) -> Result<Path<T>> {
    let domain = model.rate_domain();
    let mut events = Vec::new();
    let mut t = T::zero();
    let mut n = start;
    loop {
        let (lambda, mu, alpha) = (model.lambda(n), model.mu(n), model.alpha(n));
        let total = lambda + mu + alpha;
        if total == T::zero() {
            if model.family() == Family::Absorbing {
                return Ok(events);
            }
            return Err(Error::ZeroRate(n));
        }
        t = t + exponential(rng, total);
        if t > horizon {
            return Ok(events);
        }
        let u = uniform::<T, _>(rng) * total;
        n = if u < lambda {
            n + 1
        } else if u < lambda + mu {
            n - 1
        } else {
            0
        };
        if let Some((lo, hi)) = domain {
            if n < lo || n > hi {
                return Err(Error::StateOutOfRange { state: n, lo, hi });
            }
        }
        events.push(Event { time: t, state: n });
        if stop(n) {
            return Ok(events);
        }
    }
}

/// Jump sequence of one path of `model` from `start` up to `horizon`.
pub fn simulate_path<T: Scalar, R: Rng>(model: &RateModel<T>, start: i64, horizon: T, rng: &mut R) -> Result<Path<T>> {
    check_horizon(horizon)?;
    check_start(model, start)?;
    run_path(model, start, horizon, rng, |_| false)
}

fn run_plane<T: Scalar, R: Rng>(
    model: &PlaneModel<T>,
    start: (i64, i64),
    horizon: T,
    rng: &mut R,
    mut stop: impl FnMut((i64, i64)) -> bool,
) -> PlanePath<T> {
    let rates = [model.lambda1, model.mu1, model.lambda2, model.mu2];
    let total = rates.iter().fold(T::zero(), |a, &b| a + b);
    let mut events = Vec::new();
    let mut t = T::zero();
    let mut p = start;
    loop {
        t = t + exponential(rng, total);
        if t > horizon {
            return events;
        }
        let u = uniform::<T, _>(rng) * total;
        p = if u < rates[0] {
            (p.0 + 1, p.1)
        } else if u < rates[0] + rates[1] {
            (p.0 - 1, p.1)
        } else if u < rates[0] + rates[1] + rates[2] {
            (p.0, p.1 + 1)
        } else {
            (p.0, p.1 - 1)
        };
        events.push(Event { time: t, state: p });
        if stop(p) {
            return events;
        }
    }
}

/// Jump sequence of one path of the planar process up to `horizon`.
pub fn simulate_plane_path<T: Scalar, R: Rng>(model: &PlaneModel<T>, start: (i64, i64), horizon: T, rng: &mut R) -> Result<PlanePath<T>> {
    check_horizon(horizon)?;
    Ok(run_plane(model, start, horizon, rng, |_| false))
}

fn state_at<T: Scalar, S: Copy>(start: S, path: &[Event<T, S>], t: T) -> S {
    path.iter().take_while(|e| e.time <= t).last().map_or(start, |e| e.state)
}

fn first_hit<T: Scalar, S: Copy>(path: &[Event<T, S>], hit: impl Fn(S) -> bool) -> Option<T> {
    path.iter().find(|e| hit(e.state)).map(|e| e.time)
}

/// Quantities recorded from one-dimensional paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable<T> {
    /// `X(t) = n`.
    StateAt { n: i64, t: T },
    /// `X(t) = n` and the path never visits `taboo` on `[0, t]`.
    AvoidingAt { taboo: i64, n: i64, t: T },
    /// `target` is reached by time `t`.
    HitBy { target: i64, t: T },
}

impl<T: Scalar> Observable<T> {
    fn time(&self) -> T {
        match *self {
            Observable::StateAt { t, .. } | Observable::AvoidingAt { t, .. } | Observable::HitBy { t, .. } => t,
        }
    }

    fn indicator(&self, start: i64, path: &[Event<T, i64>]) -> bool {
        match *self {
            Observable::StateAt { n, t } => state_at(start, path, t) == n,
            Observable::AvoidingAt { taboo, n, t } => {
                start != taboo && first_hit(path, |s| s == taboo).is_none_or(|h| h > t) && state_at(start, path, t) == n
            }
            Observable::HitBy { target, t } => start == target || first_hit(path, |s| s == target).is_some_and(|h| h <= t),
        }
    }
}

impl<T: Scalar> fmt::Display for Observable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::StateAt { n, t } => write!(f, "state_at:n={n}:t={t}"),
            Observable::AvoidingAt { taboo, n, t } => write!(f, "avoiding_at:taboo={taboo}:n={n}:t={t}"),
            Observable::HitBy { target, t } => write!(f, "hit_by:target={target}:t={t}"),
        }
    }
}

/// Quantities recorded from planar paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlaneObservable<T> {
    /// `X(t) = n`.
    StateAt { n: (i64, i64), t: T },
    /// `X(t) = n` and the line `x2 = x1 + r` is not touched on `[0, t]`.
    AvoidingAt { r: i64, n: (i64, i64), t: T },
    /// The line `x2 = x1 + r` is reached by time `t`.
    CrossBy { r: i64, t: T },
}

fn on_line(p: (i64, i64), r: i64) -> bool {
    p.1 == p.0 + r
}

impl<T: Scalar> PlaneObservable<T> {
    fn time(&self) -> T {
        match *self {
            PlaneObservable::StateAt { t, .. } | PlaneObservable::AvoidingAt { t, .. } | PlaneObservable::CrossBy { t, .. } => t,
        }
    }

    fn indicator(&self, start: (i64, i64), path: &[Event<T, (i64, i64)>]) -> bool {
        match *self {
            PlaneObservable::StateAt { n, t } => state_at(start, path, t) == n,
            PlaneObservable::AvoidingAt { r, n, t } => {
                !on_line(start, r) && first_hit(path, |p| on_line(p, r)).is_none_or(|h| h > t) && state_at(start, path, t) == n
            }
            PlaneObservable::CrossBy { r, t } => on_line(start, r) || first_hit(path, |p| on_line(p, r)).is_some_and(|h| h <= t),
        }
    }
}

impl<T: Scalar> fmt::Display for PlaneObservable<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaneObservable::StateAt { n, t } => write!(f, "state_at:n=({} {}):t={t}", n.0, n.1),
            PlaneObservable::AvoidingAt { r, n, t } => write!(f, "avoiding_at:r={r}:n=({} {}):t={t}", n.0, n.1),
            PlaneObservable::CrossBy { r, t } => write!(f, "cross_by:r={r}:t={t}"),
        }
    }
}

/// Replication settings shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub replications: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(replications: u64, seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(invalid("replications", "need at least one replication"));
        }
        Ok(Self { replications, seed })
    }
}

/// Frequency estimate of one probability.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimate<T> {
    pub observable: String,
    pub count: u64,
    pub replications: u64,
    pub estimate: T,
    /// `√(p̂(1 − p̂)/R)`.
    pub stderr: T,
}

impl<T: Scalar> EmpiricalEstimate<T> {
    fn from_count(observable: String, count: u64, replications: u64) -> Self {
        let r = T::int(replications as i64);
        let p = T::int(count as i64) / r;
        Self { observable, count, replications, estimate: p, stderr: (p * (T::one() - p) / r).sqrt() }
    }

    /// `|p̂ − p| / √(p(1 − p)/R)`: the deviation in standard errors under the
    /// hypothesis that `p` is exact. Infinite when `p` is 0 or 1 but `p̂` differs.
    pub fn z_score(&self, p: T) -> T {
        let r = T::int(self.replications as i64);
        let se = (p * (T::one() - p) / r).sqrt();
        let d = (self.estimate - p).abs();
        if se > T::zero() {
            d / se
        } else if d == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    }
}

/// CSV `observable,estimate,stderr,R`.
pub fn estimates_csv<T: Scalar>(estimates: &[EmpiricalEstimate<T>]) -> String {
    let mut w = CsvWriter::new("observable,estimate,stderr,R");
    for e in estimates {
        w.row(&[&e.observable, &num(e.estimate), &num(e.stderr), &e.replications]);
    }
    w.finish()
}

fn count_indicators<F>(config: SimConfig, width: usize, replicate: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Vec<bool>> + Sync,
{
    (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            replicate(&mut rng).map(|hits| hits.into_iter().map(u64::from).collect::<Vec<_>>())
        })
        .try_reduce(
            || vec![0; width],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

fn horizon_of<T: Scalar>(times: impl Iterator<Item = T>) -> Result<T> {
    let mut h = T::zero();
    for t in times {
        if !(t >= T::zero() && t.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("observable time must be finite and nonnegative, got {t}")));
        }
        h = h.max(t);
    }
    Ok(if h > T::zero() { h } else { T::one() })
}

/// Frequencies of `observables` over independent paths from `start`.
pub fn estimate<T: Scalar>(model: &RateModel<T>, start: i64, observables: &[Observable<T>], config: SimConfig) -> Result<Vec<EmpiricalEstimate<T>>> {
    check_start(model, start)?;
    let horizon = horizon_of(observables.iter().map(Observable::time))?;
    let counts = count_indicators(config, observables.len(), |rng| {
        let path = run_path(model, start, horizon, rng, |_| false)?;
        Ok(observables.iter().map(|o| o.indicator(start, &path)).collect())
    })?;
    Ok(observables
        .iter()
        .zip(counts)
        .map(|(o, c)| EmpiricalEstimate::from_count(o.to_string(), c, config.replications))
        .collect())
}

/// Frequencies of planar `observables` over independent paths from `start`.
pub fn estimate_plane<T: Scalar>(
    model: &PlaneModel<T>,
    start: (i64, i64),
    observables: &[PlaneObservable<T>],
    config: SimConfig,
) -> Result<Vec<EmpiricalEstimate<T>>> {
    let horizon = horizon_of(observables.iter().map(PlaneObservable::time))?;
    // Paths may stop at the first touch when only crossings are recorded.
    let crossing_only: Option<i64> = observables.iter().try_fold(None, |acc: Option<i64>, o| match (o, acc) {
        (PlaneObservable::CrossBy { r, .. }, None) => Some(Some(*r)),
        (PlaneObservable::CrossBy { r, .. }, Some(q)) if *r == q => Some(Some(q)),
        _ => None,
    }).flatten();
    let counts = count_indicators(config, observables.len(), |rng| {
        let path = run_plane(model, start, horizon, rng, |p| crossing_only.is_some_and(|r| on_line(p, r)));
        Ok(observables.iter().map(|o| o.indicator(start, &path)).collect())
    })?;
    Ok(observables
        .iter()
        .zip(counts)
        .map(|(o, c)| EmpiricalEstimate::from_count(o.to_string(), c, config.replications))
        .collect())
}

/// First-passage times from `start` to `target`, one entry per
/// replication in replication order; `None` when not reached by `horizon`.
pub fn fpt_samples<T: Scalar>(model: &RateModel<T>, start: i64, target: i64, horizon: T, config: SimConfig) -> Result<Vec<Option<T>>> {
    check_horizon(horizon)?;
    check_start(model, start)?;
    if start == target {
        return Err(invalid("target", "start and target coincide"));
    }
    (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            let path = run_path(model, start, horizon, &mut rng, |n| n == target)?;
            Ok(first_hit(&path, |n| n == target))
        })
        .collect()
}

/// First times the planar process reaches `x2 = x1 + r`, per replication.
pub fn crossing_samples<T: Scalar>(model: &PlaneModel<T>, start: (i64, i64), r: i64, horizon: T, config: SimConfig) -> Result<Vec<Option<T>>> {
    check_horizon(horizon)?;
    if on_line(start, r) {
        return Err(invalid("k", "start lies on the line"));
    }
    Ok((0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, i);
            let path = run_plane(model, start, horizon, &mut rng, |p| on_line(p, r));
            first_hit(&path, |p| on_line(p, r))
        })
        .collect())
}

/// Counts of samples in equal-width bins over `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    pub edges: Vec<T>,
    pub counts: Vec<u64>,
    /// Number of samples, including those outside the bins or missing.
    pub total: u64,
}

impl<T: Scalar> Histogram<T> {
    pub fn new(samples: &[Option<T>], lo: T, hi: T, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(invalid("bins", "need at least one bin over a nonempty range"));
        }
        let width = (hi - lo) / T::int(bins as i64);
        let edges: Vec<T> = (0..=bins).map(|i| lo + width * T::int(i as i64)).collect();
        let mut counts = vec![0u64; bins];
        for v in samples.iter().flatten() {
            if *v >= lo && *v < hi {
                let i = ((*v - lo) / width).floor().to_usize().unwrap_or(bins - 1).min(bins - 1);
                counts[i] += 1;
            }
        }
        Ok(Self { edges, counts, total: samples.len() as u64 })
    }

    /// CSV `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut w = CsvWriter::new("bin_lo,bin_hi,count");
        for (i, c) in self.counts.iter().enumerate() {
            w.row(&[&num(self.edges[i]), &num(self.edges[i + 1]), c]);
        }
        w.finish()
    }
}
