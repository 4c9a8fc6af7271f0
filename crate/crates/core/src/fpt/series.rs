//! Explicit Bessel and binomial series for the constant-rate, Ehrenfest
//! and constant-catastrophe examples.

use rayon::prelude::*;

use super::{clamp_rounding, side_for, Assembly, Direction, FptDensity, FptMethod, Side, TabooGrid};
use crate::error::{invalid, Error, Result};
use crate::kernels::{image_range, ln_walk_prefactor, scale_by_exp, validate_times, walk_table};
use crate::scalar::Scalar;
use crate::special::{ln_binomial, significant_order_bound, ScaledBesselTable};

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {v}")))
    }
}

fn even_half(big_n: i64) -> Result<i64> {
    if big_n <= 1 {
        return Err(Error::StateSpaceTooSmall(big_n));
    }
    if big_n % 2 != 0 {
        return Err(invalid("N", format!("must be even, got {big_n}")));
    }
    Ok(big_n / 2)
}

/// Upward density from `k` to the symmetry state `s = N/2` of the
/// constant-rate absorbing process, by its Bessel series. At `t = 0` the
/// removable limit (`λ` for `k = s−1`, else 0) is used.
pub fn fpt_constant_closed<T: Scalar>(big_n: i64, lambda: T, mu: T, k: i64, times: &[T]) -> Result<FptDensity<T>> {
    positive("lambda", lambda)?;
    positive("mu", mu)?;
    validate_times(times)?;
    let s = even_half(big_n)?;
    if k <= 0 || k >= s {
        return Err(Error::StateOutOfRange { state: k, lo: 1, hi: s - 1 });
    }
    let at_zero = if k == s - 1 { lambda } else { T::zero() };
    let density = times
        .par_iter()
        .map(|&t| {
            if t == T::zero() {
                return at_zero;
            }
            let table = walk_table(lambda, mu, t);
            let (a0, b0) = (s - k, s + k);
            let (jl, jh) = image_range(&[a0, b0], -4 * s, T::int(table.max_order()));
            let mut sum = T::zero();
            for j in jl..=jh {
                let (a, b) = (a0 - 4 * s * j, b0 - 4 * s * j);
                sum = sum + T::int(a) * table.get(a) - T::int(b) * table.get(b);
            }
            scale_by_exp(ln_walk_prefactor(lambda, mu, s - k, t), sum) / t
        })
        .collect();
    Ok(FptDensity::assemble(
        Assembly { start: k, target: s, direction: Direction::Up, method: FptMethod::Series, at_zero, error_estimate: T::zero() },
        times,
        density,
    ))
}

/// `s`-avoiding probabilities of the constant-rate absorbing process
/// (`N = 2s`) by their Bessel series; `k` and every state on the same side
/// of `s`, strictly inside `(0, 2s)`.
pub fn taboo_constant_closed<T: Scalar>(
    big_n: i64,
    lambda: T,
    mu: T,
    k: i64,
    states: &[i64],
    times: &[T],
) -> Result<TabooGrid<T>> {
    positive("lambda", lambda)?;
    positive("mu", mu)?;
    validate_times(times)?;
    let s = even_half(big_n)?;
    let side = side_for(k, states, s)?;
    for &m in states.iter().chain(std::iter::once(&k)) {
        if m <= 0 || m >= big_n {
            return Err(Error::StateOutOfRange { state: m, lo: 1, hi: big_n - 1 });
        }
    }
    let values = times
        .par_iter()
        .map(|&t| {
            if t == T::zero() {
                return states.iter().map(|&n| if n == k { T::one() } else { T::zero() }).collect();
            }
            let table = walk_table(lambda, mu, t);
            let bound = T::int(table.max_order());
            states
                .iter()
                .map(|&n| {
                    let bases = [n - k, n + k, n + k - 2 * s, n - k - 2 * s];
                    let (jl, jh) = image_range(&bases, -4 * s, bound);
                    let mut sum = T::zero();
                    for j in jl..=jh {
                        let sh = 4 * s * j;
                        sum = sum + table.get(n - k - sh) - table.get(n + k - sh) - table.get(n + k - 2 * s - sh)
                            + table.get(n - k - 2 * s - sh);
                    }
                    clamp_rounding(scale_by_exp(ln_walk_prefactor(lambda, mu, n - k, t), sum))
                })
                .collect()
        })
        .collect();
    Ok(TabooGrid { start: k, taboo: s, states: states.to_vec(), times: times.to_vec(), values, side, method: FptMethod::Series, cross_check: None })
}

/// `ln(1 − e^{−2αt})` and `ln(1 + e^{−2αt})`.
fn ehrenfest_logs<T: Scalar>(alpha: T, t: T) -> (T, T) {
    let u = -T::lit(2.0) * alpha * t;
    ((-u.exp_m1()).ln(), u.exp().ln_1p())
}

/// `C(a, b)` in log form, `None` when the coefficient vanishes.
fn ln_choose<T: Scalar>(a: i64, b: i64) -> Option<T> {
    if b < 0 || a < 0 || b > a {
        None
    } else {
        Some(ln_binomial::<T>(a as u64, b as u64))
    }
}

fn pow_ln<T: Scalar>(ln_base: T, e: i64) -> T {
    if e == 0 {
        T::zero()
    } else {
        T::int(e) * ln_base
    }
}

/// Upward density through the symmetry state `s = N/2` of the Ehrenfest
/// model, `0 <= k < s`, evaluated from its binomial series.
pub fn fpt_ehrenfest_closed<T: Scalar>(big_n: i64, alpha: T, k: i64, times: &[T]) -> Result<FptDensity<T>> {
    positive("alpha", alpha)?;
    validate_times(times)?;
    let s = even_half(big_n)?;
    if k < 0 || k >= s {
        return Err(Error::StateOutOfRange { state: k, lo: 0, hi: s - 1 });
    }
    let ln_scale = (alpha * T::int(s + 1)).ln() - T::int(2 * s) * T::LN_2();
    let density: Vec<T> = times
        .par_iter()
        .map(|&t| {
            let (lm, lp) = ehrenfest_logs(alpha, t);
            let mut sum = T::zero();
            for j in 0..=k {
                let cj = ln_binomial::<T>(k as u64, j as u64);
                if let Some(c) = ln_choose::<T>(2 * s - k, s - 1 - j) {
                    sum = sum + (ln_scale + cj + c + pow_ln(lm, s - 1 + k - 2 * j) + pow_ln(lp, s + 1 - k + 2 * j)).exp();
                }
                if let Some(c) = ln_choose::<T>(2 * s - k, s + 1 - j) {
                    sum = sum - (ln_scale + cj + c + pow_ln(lm, s + 1 + k - 2 * j) + pow_ln(lp, s - 1 - k + 2 * j)).exp();
                }
            }
            sum
        })
        .collect();
    let at_zero = if k == s - 1 { alpha * T::int(2 * s - k) } else { T::zero() };
    Ok(FptDensity::assemble(
        Assembly { start: k, target: s, direction: Direction::Up, method: FptMethod::Series, at_zero, error_estimate: T::zero() },
        times,
        density,
    ))
}

/// `s`-avoiding probabilities of the Ehrenfest model (`N = 2s`) from the
/// difference of two binomial sums; `0 <= n, k < s` or `s < n, k <= 2s`.
pub fn taboo_ehrenfest_closed<T: Scalar>(big_n: i64, alpha: T, k: i64, states: &[i64], times: &[T]) -> Result<TabooGrid<T>> {
    positive("alpha", alpha)?;
    validate_times(times)?;
    let s = even_half(big_n)?;
    let side = side_for(k, states, s)?;
    for &m in states.iter().chain(std::iter::once(&k)) {
        if m < 0 || m > big_n {
            return Err(Error::StateOutOfRange { state: m, lo: 0, hi: big_n });
        }
    }
    let n2 = 2 * s;
    let ln_norm = T::int(n2) * T::LN_2();
    let values = times
        .par_iter()
        .map(|&t| {
            let (lm, lp) = ehrenfest_logs(alpha, t);
            states
                .iter()
                .map(|&n| {
                    let mut first = T::zero();
                    for j in 0.max(n + k - n2)..=n.min(k) {
                        if let (Some(a), Some(b)) = (ln_choose::<T>(k, j), ln_choose::<T>(n2 - k, n - j)) {
                            first = first + (a + b - ln_norm + pow_ln(lm, n + k - 2 * j) + pow_ln(lp, n2 - n - k + 2 * j)).exp();
                        }
                    }
                    let mut second = T::zero();
                    for j in 0.max(n - k)..=n.min(n2 - k) {
                        if let (Some(a), Some(b)) = (ln_choose::<T>(n2 - k, j), ln_choose::<T>(k, n - j)) {
                            second = second + (a + b - ln_norm + pow_ln(lm, n + n2 - k - 2 * j) + pow_ln(lp, k - n + 2 * j)).exp();
                        }
                    }
                    clamp_rounding(first - second)
                })
                .collect()
        })
        .collect();
    Ok(TabooGrid { start: k, taboo: s, states: states.to_vec(), times: times.to_vec(), values, side, method: FptMethod::Series, cross_check: None })
}

/// Downward density to 0 from `k >= 1` of the bilateral process with
/// `λ = μ` and constant catastrophe rate `α`, from its Bessel series with
/// the `j`-sum cut where every remaining order exceeds the significance bound.
pub fn fpt_catastrophe_series<T: Scalar>(lambda: T, alpha: T, k: i64, times: &[T]) -> Result<FptDensity<T>> {
    positive("lambda", lambda)?;
    if !(alpha >= T::zero() && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be nonnegative, got {alpha}")));
    }
    validate_times(times)?;
    if k < 1 {
        return Err(Error::StateOutOfRange { state: k, lo: 1, hi: i64::MAX });
    }
    let density = times
        .par_iter()
        .map(|&t| {
            let x = T::lit(2.0) * lambda * t;
            let table = ScaledBesselTable::new(x);
            let bound = significant_order_bound(x).ceil().to_i64().unwrap_or(i64::MAX / 4);
            let mut tail = T::zero();
            let mut j = 1;
            while j <= k + bound {
                tail = tail + table.get(k - j) - table.get(k + j);
                j += 1;
            }
            // e^{−(2λ+α)t} I_m(2λt) = e^{−αt} · (scaled I_m).
            (-alpha * t).exp() * (lambda * (table.get(k - 1) - table.get(k + 1)) + alpha * tail)
        })
        .collect();
    let at_zero = alpha + if k == 1 { lambda } else { T::zero() };
    Ok(FptDensity::assemble(
        Assembly { start: k, target: 0, direction: Direction::Down, method: FptMethod::Series, at_zero, error_estimate: T::zero() },
        times,
        density,
    ))
}

/// 0-avoiding probabilities for `λ = μ` with constant catastrophes,
/// `k, n >= 1`: `e^{−(2λ+α)t}[I_{n−k}(2λt) − I_{n+k}(2λt)]`.
pub fn taboo_catastrophe_series<T: Scalar>(lambda: T, alpha: T, k: i64, states: &[i64], times: &[T]) -> Result<TabooGrid<T>> {
    positive("lambda", lambda)?;
    if !(alpha >= T::zero() && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be nonnegative, got {alpha}")));
    }
    validate_times(times)?;
    let side = side_for(k, states, 0)?;
    if side != Side::Above {
        return Err(Error::SideMismatch("the series is stated for positive states".into()));
    }
    let values = times
        .par_iter()
        .map(|&t| {
            let table = ScaledBesselTable::new(T::lit(2.0) * lambda * t);
            let damp = (-alpha * t).exp();
            states.iter().map(|&n| clamp_rounding(damp * (table.get(n - k) - table.get(n + k)))).collect()
        })
        .collect();
    Ok(TabooGrid { start: k, taboo: 0, states: states.to_vec(), times: times.to_vec(), values, side, method: FptMethod::Series, cross_check: None })
}
