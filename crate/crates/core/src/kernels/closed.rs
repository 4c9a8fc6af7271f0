//! Closed-form transition probabilities.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, integrate_vec};
use crate::scalar::Scalar;
use crate::special::{ln_binomial, significant_order_bound, ScaledBesselTable};

/// `v · e^{ln_scale}` without overflowing the intermediate exponential.
pub(crate) fn scale_by_exp<T: Scalar>(ln_scale: T, v: T) -> T {
    if v == T::zero() {
        return T::zero();
    }
    let limit = T::max_value().ln() * T::lit(0.75);
    if ln_scale.abs() < limit {
        ln_scale.exp() * v
    } else {
        v.signum() * (ln_scale + v.abs().ln()).exp()
    }
}

/// `ln[(λ/μ)^{d/2} e^{−(λ+μ)t} e^{x}]` with `x = 2t√(λμ)`: the factor that turns
/// a scaled Bessel value of order `d` into a Poisson-walk probability.
pub(crate) fn ln_walk_prefactor<T: Scalar>(lambda: T, mu: T, d: i64, t: T) -> T {
    let gap = lambda.sqrt() - mu.sqrt();
    -(gap * gap) * t + T::int(d) / T::lit(2.0) * (lambda.ln() - mu.ln())
}

/// Retained image index range for a sum whose Bessel orders are
/// `base + step·j`: all `j` with `|base + step·j| <= bound`, plus `j = 0`.
pub(crate) fn image_range<T: Scalar>(bases: &[i64], step: i64, bound: T) -> (i64, i64) {
    let b = bound.floor().to_i64().unwrap_or(i64::MAX / 4);
    let s = step.abs();
    let mut lo = 0;
    let mut hi = 0;
    for &base in bases {
        // |base + s j| <= b  <=>  (−b − base)/s <= j <= (b − base)/s
        let jl = (-b - base).div_euclid(s) + if (-b - base).rem_euclid(s) == 0 { 0 } else { 1 };
        let jh = (b - base).div_euclid(s);
        if jl <= jh {
            lo = lo.min(jl);
            hi = hi.max(jh);
        }
    }
    if step < 0 {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}

/// Largest Bessel order worth keeping in a walk of rates `λ, μ` over `t`:
/// the Bessel cutoff of the argument, widened under strong drift to the
/// jump count `(λ+μ)t + 40√((λ+μ)t) + 40`.
pub(crate) fn walk_order_bound<T: Scalar>(lambda: T, mu: T, t: T) -> u64 {
    let x = T::lit(2.0) * t * (lambda * mu).sqrt();
    let a = (lambda + mu) * t;
    let jumps = a + T::lit(40.0) * a.sqrt() + T::lit(40.0);
    significant_order_bound(x).max(jumps).ceil().to_u64().unwrap_or(u64::MAX / 4)
}

pub(crate) fn walk_table<T: Scalar>(lambda: T, mu: T, t: T) -> ScaledBesselTable<T> {
    let x = T::lit(2.0) * t * (lambda * mu).sqrt();
    ScaledBesselTable::with_max_order(x, walk_order_bound(lambda, mu, t))
}

fn check_rates<T: Scalar>(lambda: T, mu: T) -> Result<()> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive, got {mu}")));
    }
    Ok(())
}

fn check_time<T: Scalar>(t: T) -> Result<()> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::InvalidTimeGrid(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// Interior transition probabilities `p_{k,n}(t)`, `n = 1..N−1`, of the
/// constant-rate process on `{0..N}` with absorbing endpoints, by the
/// method-of-images Bessel series.
pub(crate) fn constant_absorbing_row<T: Scalar>(big_n: i64, lambda: T, mu: T, k: i64, t: T) -> Vec<T> {
    if t == T::zero() {
        return (1..big_n).map(|n| if n == k { T::one() } else { T::zero() }).collect();
    }
    let table = walk_table(lambda, mu, t);
    let bound = T::int(table.max_order());
    (1..big_n)
        .map(|n| {
            let a0 = n - k;
            let b0 = n + k - 2 * big_n;
            let (jl, jh) = image_range(&[a0, b0], -2 * big_n, bound);
            let mut sum = T::zero();
            for j in jl..=jh {
                sum = sum + table.get(a0 - 2 * j * big_n) - table.get(b0 - 2 * j * big_n);
            }
            scale_by_exp(ln_walk_prefactor(lambda, mu, n - k, t), sum)
        })
        .collect()
}

/// `p_{k,n}(t)` for the constant-rate absorbing process, `1 <= k, n <= N−1`.
pub fn p_constant_absorbing<T: Scalar>(big_n: i64, lambda: T, mu: T, k: i64, n: i64, t: T) -> Result<T> {
    check_rates(lambda, mu)?;
    check_time(t)?;
    if big_n <= 1 {
        return Err(Error::StateSpaceTooSmall(big_n));
    }
    for s in [k, n] {
        if s < 1 || s > big_n - 1 {
            return Err(Error::StateOutOfRange { state: s, lo: 1, hi: big_n - 1 });
        }
    }
    if t == T::zero() {
        return Ok(if k == n { T::one() } else { T::zero() });
    }
    let table = walk_table(lambda, mu, t);
    let a0 = n - k;
    let b0 = n + k - 2 * big_n;
    let (jl, jh) = image_range(&[a0, b0], -2 * big_n, T::int(table.max_order()));
    let mut sum = T::zero();
    for j in jl..=jh {
        sum = sum + table.get(a0 - 2 * j * big_n) - table.get(b0 - 2 * j * big_n);
    }
    Ok(scale_by_exp(ln_walk_prefactor(lambda, mu, n - k, t), sum))
}

/// Ehrenfest-model transition probability on `{0..N}` with rates
/// `λ_n = α(N−n)`, `μ_n = αn`, summed in log space.
pub fn p_ehrenfest_reflecting<T: Scalar>(big_n: i64, alpha: T, k: i64, n: i64, t: T) -> Result<T> {
    if big_n <= 1 {
        return Err(Error::StateSpaceTooSmall(big_n));
    }
    if !(alpha > T::zero()) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    check_time(t)?;
    for s in [k, n] {
        if s < 0 || s > big_n {
            return Err(Error::StateOutOfRange { state: s, lo: 0, hi: big_n });
        }
    }
    if t == T::zero() {
        return Ok(if k == n { T::one() } else { T::zero() });
    }
    let e = (-T::lit(2.0) * alpha * t).exp();
    let ln_minus = (-(-T::lit(2.0) * alpha * t).exp_m1()).ln();
    let ln_plus = e.ln_1p();
    Ok(binomial_mixture(big_n, k, n, ln_minus, ln_plus))
}

/// `2^{−N} Σ_j C(k,j) C(N−k,n−j) (1−e)^{n+k−2j} (1+e)^{N−n−k+2j}`.
fn binomial_mixture<T: Scalar>(big_n: i64, k: i64, n: i64, ln_minus: T, ln_plus: T) -> T {
    let lo = 0.max(n + k - big_n);
    let hi = n.min(k);
    let ln2n = T::int(big_n) * T::LN_2();
    let mut sum = T::zero();
    for j in lo..=hi {
        let a = n + k - 2 * j;
        let b = big_n - a;
        let mut ln_term = ln_binomial::<T>(k as u64, j as u64) + ln_binomial::<T>((big_n - k) as u64, (n - j) as u64) - ln2n;
        if a > 0 {
            ln_term = ln_term + T::int(a) * ln_minus;
        }
        if b > 0 {
            ln_term = ln_term + T::int(b) * ln_plus;
        }
        sum = sum + ln_term.exp();
    }
    sum
}

/// Bilateral Poisson walk: `(λ/μ)^{(n−k)/2} I_{n−k}(2√(λμ) t) e^{−(λ+μ)t}`.
pub fn p_bilateral_poisson<T: Scalar>(lambda: T, mu: T, k: i64, n: i64, t: T) -> Result<T> {
    check_rates(lambda, mu)?;
    check_time(t)?;
    Ok(poisson_walk(lambda, mu, n - k, t))
}

pub(crate) fn poisson_walk<T: Scalar>(lambda: T, mu: T, d: i64, t: T) -> T {
    if t == T::zero() {
        return if d == 0 { T::one() } else { T::zero() };
    }
    let x = T::lit(2.0) * t * (lambda * mu).sqrt();
    let s = crate::special::bessel_i_scaled(d, x).unwrap_or_else(|_| T::zero());
    scale_by_exp(ln_walk_prefactor(lambda, mu, d, t), s)
}

/// Poisson-walk probabilities from `k` to every state of `states`.
pub(crate) fn poisson_row<T: Scalar>(lambda: T, mu: T, k: i64, states: std::ops::RangeInclusive<i64>, t: T) -> Vec<T> {
    if t == T::zero() {
        return states.map(|n| if n == k { T::one() } else { T::zero() }).collect();
    }
    let x = T::lit(2.0) * t * (lambda * mu).sqrt();
    let (lo, hi) = (*states.start(), *states.end());
    let reach = (lo - k).abs().max((hi - k).abs()) as u64;
    let cap = walk_order_bound(lambda, mu, t);
    let table = ScaledBesselTable::with_max_order(x, reach.min(cap));
    states
        .map(|n| scale_by_exp(ln_walk_prefactor(lambda, mu, n - k, t), table.get(n - k)))
        .collect()
}

/// Default absolute accuracy of the catastrophe-model time integral.
pub const CATASTROPHE_QUAD_TOL: f64 = 1e-10;

/// Bilateral process with constant birth, death and catastrophe rates:
/// `e^{−αt} p̂_{k,n}(t) + α ∫_0^t e^{−ατ} p̂_{0,n}(τ) dτ` where `p̂` is the
/// Poisson walk.
pub fn p_catastrophe_constant<T: Scalar>(lambda: T, mu: T, alpha: T, k: i64, n: i64, t: T) -> Result<T> {
    check_rates(lambda, mu)?;
    check_time(t)?;
    if !(alpha >= T::zero() && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be nonnegative, got {alpha}")));
    }
    let direct = poisson_walk(lambda, mu, n - k, t);
    if alpha == T::zero() {
        return Ok(direct);
    }
    let tol = T::lit(CATASTROPHE_QUAD_TOL).max(T::epsilon() * T::lit(64.0));
    let (integral, _) = integrate(|tau| (-alpha * tau).exp() * poisson_walk(lambda, mu, n, tau), T::zero(), t, tol / alpha)?;
    Ok((-alpha * t).exp() * direct + alpha * integral)
}

/// Catastrophe-model probabilities over `states` on an ascending time grid.
/// The time integral is accumulated segment by segment.
pub(crate) fn catastrophe_rows<T: Scalar>(
    lambda: T,
    mu: T,
    alpha: T,
    k: i64,
    states: std::ops::RangeInclusive<i64>,
    times: &[T],
    tol: T,
) -> Result<Vec<Vec<T>>> {
    let direct: Vec<Vec<T>> = times
        .par_iter()
        .map(|&t| poisson_row(lambda, mu, k, states.clone(), t).into_iter().map(|p| (-alpha * t).exp() * p).collect())
        .collect();
    if alpha == T::zero() {
        return Ok(direct);
    }
    let dim = states.clone().count();
    let seg_tol = tol / (alpha * T::int(times.len().max(1) as i64));
    let mut acc = vec![T::zero(); dim];
    let mut prev = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if t > prev {
            let seg = integrate_vec(
                |tau| {
                    let w = (-alpha * tau).exp();
                    poisson_row(lambda, mu, 0, states.clone(), tau).into_iter().map(|p| w * p).collect()
                },
                prev,
                t,
                seg_tol,
            )?;
            for (a, v) in acc.iter_mut().zip(seg.value) {
                *a = *a + v;
            }
            prev = t;
        }
        out.push(direct[i].iter().zip(&acc).map(|(&d, &a)| d + alpha * a).collect());
    }
    Ok(out)
}
