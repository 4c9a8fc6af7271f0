//! Two independent constant-rate birth-death walks `X(t) = (X1(t), X2(t))`
//! on the integer plane, and first passage through the line `x2 = x1 + r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{num, CsvWriter};
use crate::error::{invalid, Error, Result};
use crate::fpt::clamp_rounding;
use crate::kernels::{ln_walk_prefactor, poisson_walk, scale_by_exp, validate_times, walk_table};
use crate::quadrature::integrate;
use crate::rates::{residual, Family, SymmetryReport, DEFAULT_SYMMETRY_TOL};
use crate::scalar::Scalar;

/// Rates of the planar process: coordinate `i` moves up with `λi` and down
/// with `μi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub mu1: T,
    pub mu2: T,
}

impl<T: Scalar> PlaneModel<T> {
    pub fn new(lambda1: T, lambda2: T, mu1: T, mu2: T) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("mu1", mu1), ("mu2", mu2)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { lambda1, lambda2, mu1, mu2 })
    }

    pub fn symmetry_report(&self) -> SymmetryReport<T> {
        self.symmetry_report_with_tol(T::lit(DEFAULT_SYMMETRY_TOL))
    }

    /// Residual of `λ1/λ2 = μ2/μ1`.
    pub fn symmetry_report_with_tol(&self, tol: T) -> SymmetryReport<T> {
        let r = residual(self.lambda1 / self.lambda2, self.mu2 / self.mu1);
        SymmetryReport::from_residuals(Family::TwoD, tol, [(0, r)])
    }

    /// `ξ = λ1/λ2` when the model is symmetric.
    pub fn xi(&self) -> Option<T> {
        self.symmetry_report().satisfied.then(|| self.lambda1 / self.lambda2)
    }

    fn require_xi(&self) -> Result<T> {
        self.symmetry_report().into_result()?;
        Ok(self.lambda1 / self.lambda2)
    }

    pub fn total_rate(&self) -> T {
        self.lambda1 + self.lambda2 + self.mu1 + self.mu2
    }

    /// Smallest time at which line-crossing densities are evaluated.
    pub fn t_min(&self) -> T {
        T::lit(1e-6) / self.total_rate()
    }
}

fn check_time<T: Scalar>(t: T) -> Result<()> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::InvalidTimeGrid(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// Transition probability `P(n, t | k)` as a product of two Poisson walks.
pub fn p2d<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), n: (i64, i64), t: T) -> Result<T> {
    check_time(t)?;
    Ok(poisson_walk(model.lambda1, model.mu1, n.0 - k.0, t) * poisson_walk(model.lambda2, model.mu2, n.1 - k.1, t))
}

/// `P(n2 − r, n1 + r, t | k2 − r, k1 + r)` against
/// `ξ^{n2−k2−n1+k1} P(n, t | k)` with `ξ = λ1/λ2`, relative to the larger
/// of the two.
pub fn quasi_symmetry_residual<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), n: (i64, i64), r: i64, t: T) -> Result<T> {
    let xi = model.lambda1 / model.lambda2;
    let lhs = p2d(model, (k.1 - r, k.0 + r), (n.1 - r, n.0 + r), t)?;
    let rhs = xi.powi((n.1 - k.1 - n.0 + k.0) as i32) * p2d(model, k, n, t)?;
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale > T::zero() { (lhs - rhs).abs() / scale } else { T::zero() })
}

fn line_side(p: (i64, i64), r: i64) -> std::cmp::Ordering {
    p.1.cmp(&(p.0 + r))
}

fn distance(k: (i64, i64), r: i64) -> Result<i64> {
    let d = k.1 - k.0 - r;
    if d == 0 {
        return Err(invalid("k", format!("start ({}, {}) lies on the line x2 = x1 + {r}", k.0, k.1)));
    }
    Ok(d.abs())
}

/// Probability of reaching `n` at time `t` without touching `x2 = x1 + r`.
pub fn taboo2d<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), n: (i64, i64), r: i64, t: T) -> Result<T> {
    let xi = model.require_xi()?;
    let (sk, sn) = (line_side(k, r), line_side(n, r));
    if sk == std::cmp::Ordering::Equal || sk != sn {
        return Err(Error::SideMismatch(format!(
            "({}, {}) and ({}, {}) are not strictly on the same side of x2 = x1 + {r}",
            k.0, k.1, n.0, n.1
        )));
    }
    let direct = p2d(model, k, n, t)?;
    let mirror = p2d(model, k, (n.1 - r, n.0 + r), t)?;
    Ok(clamp_rounding(direct - xi.powi((n.0 + r - n.1) as i32) * mirror))
}

/// Landing sites `x` whose term in the diagonal sum is not negligible:
/// each coordinate's band is centred on its drift.
fn diagonal_band<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, t: T) -> Option<(i64, i64)> {
    let band = |lambda: T, mu: T, start: i64| -> Option<(i64, i64)> {
        let a = (lambda + mu) * t;
        let centre = T::int(start) + (lambda - mu) * t;
        let half = T::lit(40.0) * a.sqrt() + T::lit(40.0);
        Some(((centre - half).floor().to_i64()?, (centre + half).ceil().to_i64()?))
    };
    let (lo1, hi1) = band(model.lambda1, model.mu1, k.0)?;
    let (lo2, hi2) = band(model.lambda2, model.mu2, k.1 - r)?;
    let (lo, hi) = (lo1.max(lo2), hi1.min(hi2));
    (lo <= hi).then_some((lo, hi))
}

/// Terms `P(x, x + r, t | k)` over the diagonal band, with the first site.
fn diagonal_terms<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, t: T) -> (i64, Vec<T>) {
    if t == T::zero() {
        return if k.1 == k.0 + r { (k.0, vec![T::one()]) } else { (k.0, Vec::new()) };
    }
    let Some((lo, hi)) = diagonal_band(model, k, r, t) else {
        return (k.0, Vec::new());
    };
    let t1 = walk_table(model.lambda1, model.mu1, t);
    let t2 = walk_table(model.lambda2, model.mu2, t);
    let terms = (lo..=hi)
        .map(|x| {
            let (d1, d2) = (x - k.0, x + r - k.1);
            let ln = ln_walk_prefactor(model.lambda1, model.mu1, d1, t) + ln_walk_prefactor(model.lambda2, model.mu2, d2, t);
            scale_by_exp(ln, t1.get(d1) * t2.get(d2))
        })
        .collect();
    (lo, terms)
}

/// `P{X2(t) = X1(t) + r | X(0) = k}`.
pub fn diagonal_probability<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, t: T) -> Result<T> {
    check_time(t)?;
    Ok(diagonal_terms(model, k, r, t).1.into_iter().fold(T::zero(), |a, b| a + b))
}

fn check_positive_time<T: Scalar>(t: T) -> Result<()> {
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::InvalidTimeGrid(format!("line-crossing densities need t > 0, got {t}")));
    }
    Ok(())
}

/// Density of first reaching the line at `(x, x + r)` at time `t`.
pub fn fpt2d_subdensity<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, x: i64, t: T) -> Result<T> {
    model.require_xi()?;
    let d = distance(k, r)?;
    check_positive_time(t)?;
    Ok(T::int(d) / t * p2d(model, k, (x, x + r), t)?)
}

/// Density `h_r(t | k)` of the first-passage time through the line.
pub fn fpt2d_total<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, t: T) -> Result<T> {
    model.require_xi()?;
    let d = distance(k, r)?;
    check_positive_time(t)?;
    Ok(T::int(d) / t * diagonal_probability(model, k, r, t)?)
}

/// Sub-densities at one time over a contiguous run of landing sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteBand<T> {
    pub first: i64,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineCrossing<T> {
    pub r: i64,
    pub start: (i64, i64),
    pub times: Vec<T>,
    /// `h_r(t | k)` at each time.
    pub h: Vec<T>,
    /// `g(x, x + r, t | k)` per time over the retained sites.
    pub sub: Vec<SiteBand<T>>,
    pub crossing: CrossingProbability<T>,
}

impl<T: Scalar> LineCrossing<T> {
    /// CSV `t,h_r`.
    pub fn h_csv(&self) -> String {
        let mut w = CsvWriter::new("t,h_r");
        for (t, h) in self.times.iter().zip(&self.h) {
            w.row(&[&num(*t), &num(*h)]);
        }
        w.finish()
    }

    /// CSV `t,x,g`.
    pub fn g_csv(&self) -> String {
        let mut w = CsvWriter::new("t,x,g");
        for (t, band) in self.times.iter().zip(&self.sub) {
            for (j, g) in band.values.iter().enumerate() {
                w.row(&[&num(*t), &(band.first + j as i64), &num(*g)]);
            }
        }
        w.finish()
    }
}

/// Line-crossing densities on a time grid. Every time must be at least
/// [`PlaneModel::t_min`].
pub fn line_crossing<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64, times: &[T]) -> Result<LineCrossing<T>> {
    let crossing = crossing_probability(model, k, r)?;
    let d = T::int(distance(k, r)?);
    validate_times(times)?;
    let t_min = model.t_min();
    if let Some(&t) = times.iter().find(|&&t| t < t_min) {
        return Err(Error::InvalidTimeGrid(format!("time {t} below the smallest supported time {t_min}")));
    }
    let sub: Vec<SiteBand<T>> = times
        .par_iter()
        .map(|&t| {
            let (first, terms) = diagonal_terms(model, k, r, t);
            SiteBand { first, values: terms.into_iter().map(|p| d / t * p).collect() }
        })
        .collect();
    let h = sub.iter().map(|b| b.values.iter().fold(T::zero(), |a, &v| a + v)).collect();
    Ok(LineCrossing { r, start: k, times: times.to_vec(), h, sub, crossing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `π_r = ξ^{k2−k1−r}`.
    Power,
    /// `π_r = 1`.
    Certain,
}

/// Probability that the process ever reaches the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingProbability<T> {
    pub xi: T,
    pub branch: Branch,
    pub pi: T,
}

impl<T: Scalar + Serialize> CrossingProbability<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn crossing_probability<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64) -> Result<CrossingProbability<T>> {
    let xi = model.require_xi()?;
    distance(k, r)?;
    let away = model.lambda1 + model.mu2;
    let toward = model.mu1 + model.lambda2;
    let below = k.1 < k.0 + r;
    let power = (away >= toward && below) || (away <= toward && !below);
    let (branch, pi) = if power {
        (Branch::Power, xi.powi((k.1 - k.0 - r) as i32))
    } else {
        (Branch::Certain, T::one())
    };
    Ok(CrossingProbability { xi, branch, pi })
}

/// `∫ h_r dt` up to a finite horizon plus an exponential tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingIntegral<T> {
    pub value: T,
    pub horizon: T,
    pub tail: T,
    pub quadrature_error: T,
}

/// Integrates `h_r` over `[t_min, 50 / min rate]` and adds an exponential
/// tail fitted over the last tenth of that horizon.
pub fn crossing_integral<T: Scalar>(model: &PlaneModel<T>, k: (i64, i64), r: i64) -> Result<CrossingIntegral<T>> {
    model.require_xi()?;
    distance(k, r)?;
    let min_rate = model.lambda1.min(model.lambda2).min(model.mu1).min(model.mu2);
    let horizon = T::lit(50.0) / min_rate;
    let t0 = model.t_min();
    let h = |t: T| fpt2d_total(model, k, r, t).unwrap_or_else(|_| T::nan());
    let pieces = 16;
    let mut value = T::zero();
    let mut error = T::zero();
    let mut a = t0;
    for i in 1..=pieces {
        let b = t0 + (horizon - t0) * T::int(i) / T::int(pieces);
        let (v, e) = integrate(h, a, b, T::lit(1e-9))?;
        value = value + v;
        error = error + e;
        a = b;
    }
    let ta = horizon * T::lit(0.9);
    let (ha, hb) = (h(ta), h(horizon));
    let tail = if ha > T::zero() && hb > T::zero() && hb < ha {
        hb / ((ha / hb).ln() / (horizon - ta))
    } else {
        T::zero()
    };
    Ok(CrossingIntegral { value: value + tail, horizon, tail, quadrature_error: error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::p_bilateral_poisson;

    fn xi2() -> PlaneModel<f64> {
        PlaneModel::new(2.0, 1.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(PlaneModel::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(PlaneModel::new(1.0, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn xi_and_report() {
        assert_eq!(xi2().xi(), Some(2.0));
        let m = PlaneModel::new(2.0, 1.0, 1.0, 1.5).unwrap();
        assert_eq!(m.xi(), None);
        assert!((m.symmetry_report().worst_residual - 0.25_f64).abs() < 1e-15);
    }

    #[test]
    fn initial_condition_and_factorization() {
        let m = xi2();
        assert_eq!(p2d(&m, (1, -2), (1, -2), 0.0).unwrap(), 1.0);
        assert_eq!(p2d(&m, (1, -2), (1, -1), 0.0).unwrap(), 0.0);
        let a = p2d(&m, (0, 0), (2, -1), 1.3).unwrap();
        let b = p_bilateral_poisson(2.0, 1.0, 0, 2, 1.3).unwrap() * p_bilateral_poisson(1.0, 2.0, 0, -1, 1.3).unwrap();
        assert!((a - b).abs() <= 1e-15 * b);
    }

    #[test]
    fn quasi_symmetry_example() {
        let m = xi2();
        // P(0, 1, t | 0, 0) = 2^{−1} P(1, 0, t | 0, 0)
        let lhs = p2d(&m, (0, 0), (0, 1), 0.7).unwrap();
        let rhs = 0.5 * p2d(&m, (0, 0), (1, 0), 0.7).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
        assert!(quasi_symmetry_residual(&m, (0, 0), (1, 0), 0, 0.7).unwrap() < 1e-15);
        let bad = PlaneModel::new(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!(quasi_symmetry_residual(&bad, (0, 0), (3, 0), 0, 0.7).unwrap() > 1e-3);
    }

    #[test]
    fn taboo_same_side() {
        let m: PlaneModel<f64> = PlaneModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
        for t in [0.1, 1.0, 5.0] {
            let v = taboo2d(&m, (0, -2), (0, -1), 0, t).unwrap();
            let want = p2d(&m, (0, -2), (0, -1), t).unwrap() - p2d(&m, (0, -2), (-1, 0), t).unwrap();
            assert!(v >= 0.0 && (v - want).abs() < 1e-16);
        }
        assert!(matches!(taboo2d(&m, (0, -2), (0, 1), 0, 1.0), Err(Error::SideMismatch(_))));
        assert!(matches!(taboo2d(&m, (0, -2), (1, 1), 0, 1.0), Err(Error::SideMismatch(_))));
    }

    #[test]
    fn diagonal_matches_difference_walk() {
        // X2 − X1 is itself a Poisson walk with up rate λ2+μ1 and down rate λ1+μ2.
        let m = xi2();
        for (k, r) in [((0, 0), 1), ((0, -3), 0), ((5, 2), -1)] {
            for t in [1e-3, 0.3, 2.0, 40.0] {
                let p = diagonal_probability(&m, k, r, t).unwrap();
                let q = p_bilateral_poisson(m.lambda2 + m.mu1, m.lambda1 + m.mu2, k.1 - k.0, r, t).unwrap();
                assert!((p - q).abs() < 1e-13, "k={k:?} r={r} t={t} {p} {q}");
            }
        }
    }

    #[test]
    fn proph_relation() {
        let m = xi2();
        let (k, r) = ((1, -1), 0);
        for t in [0.05, 0.5, 3.0] {
            let a: f64 = fpt2d_total(&m, (k.1 - r, k.0 + r), r, t).unwrap();
            let b = 2f64.powi((k.0 + r - k.1) as i32) * fpt2d_total(&m, k, r, t).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn crossing_branches() {
        let m = xi2();
        let c = crossing_probability(&m, (0, -1), 0).unwrap();
        assert_eq!(c.branch, Branch::Power);
        assert_eq!(c.pi, 0.5);
        let c = crossing_probability(&m, (0, 1), 0).unwrap();
        assert_eq!((c.branch, c.pi), (Branch::Certain, 1.0));
        let flat = PlaneModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(crossing_probability(&flat, (0, -3), 0).unwrap().pi, 1.0);
        assert_eq!(crossing_probability(&flat, (0, 3), 0).unwrap().pi, 1.0);
        assert!(crossing_probability(&m, (2, 2), 0).is_err());
        let json = crossing_probability(&m, (0, -1), 0).unwrap().to_json().unwrap();
        assert!(json.contains("\"branch\": \"power\""));
    }

    #[test]
    fn line_crossing_sums_and_csv() {
        let m = xi2();
        let lc = line_crossing(&m, (0, -1), 0, &[0.1, 1.0]).unwrap();
        for (i, &t) in lc.times.iter().enumerate() {
            let total = fpt2d_total(&m, (0, -1), 0, t).unwrap();
            assert!((lc.h[i] - total).abs() < 1e-15);
        }
        assert!(lc.h_csv().starts_with("t,h_r\n"));
        assert!(lc.g_csv().starts_with("t,x,g\n"));
        assert!(line_crossing(&m, (0, -1), 0, &[0.0]).is_err());
    }

    #[test]
    fn integral_matches_both_branches() {
        let m = xi2();
        for k in [(0, -1), (0, 1), (0, -2)] {
            let exact = crossing_probability(&m, k, 0).unwrap().pi;
            let num = crossing_integral(&m, k, 0).unwrap();
            assert!((num.value - exact).abs() < 1e-3, "k={k:?} {} vs {exact}", num.value);
        }
    }
}
