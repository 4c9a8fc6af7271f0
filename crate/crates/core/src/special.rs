//! Modified Bessel functions of the first kind for integer order.
//!
//! Small arguments (`x <= 30`) are summed from the power series. Larger
//! arguments use Miller's backward recurrence on the exponentially scaled
//! values `e^{-x} I_k(x)`, normalised with `1 = e^{-x} (I_0 + 2 Σ_{m>=1} I_m)`.
//! Downstream lattice sums consume the scaled values so that the
//! exponential prefactors of the transition probabilities can be folded
//! in analytically.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest |order| accepted by the public evaluators.
pub const DEFAULT_MAX_ORDER: i64 = 1_000_000;

/// Arguments up to this value are summed from the series.
const SERIES_LIMIT: f64 = 30.0;

/// `I_k(x)` evaluated both ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval<T> {
    pub order: i64,
    pub argument: T,
    /// `None` when `I_k(x)` exceeds the floating range.
    pub value: Option<T>,
    /// `e^{-x} I_k(x)`, always within `[0, 1]`.
    pub scaled_value: T,
}

impl<T: Scalar> BesselEval<T> {
    pub fn new(order: i64, x: T) -> Result<Self> {
        let scaled_value = bessel_i_scaled(order, x)?;
        let value = match bessel_i(order, x) {
            Ok(v) => Some(v),
            Err(Error::Overflow { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { order, argument: x, value, scaled_value })
    }
}

/// Orders beyond `x + 40 sqrt(x) + 40` contribute nothing at double precision.
pub fn significant_order_bound<T: Scalar>(x: T) -> T {
    x + T::lit(40.0) * x.sqrt() + T::lit(40.0)
}

/// `ln(n!)`.
pub fn ln_factorial<T: Scalar>(n: u64) -> T {
    if n < 2 {
        return T::zero();
    }
    if n <= 20 {
        let mut f = 1.0_f64;
        for i in 2..=n {
            f *= i as f64;
        }
        return T::lit(f.ln());
    }
    // Stirling series, accurate to well below f64 epsilon for n > 20.
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let corr = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    T::lit(x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + corr)
}

/// `ln C(n, k)` for `0 <= k <= n`.
pub fn ln_binomial<T: Scalar>(n: u64, k: u64) -> T {
    debug_assert!(k <= n);
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

fn check_args<T: Scalar>(order: i64, x: T) -> Result<u64> {
    if !(x >= T::zero()) {
        return Err(Error::NegativeArgument(x.as_f64()));
    }
    let k = order.unsigned_abs();
    if k > DEFAULT_MAX_ORDER as u64 {
        return Err(Error::OrderTooLarge { order, max: DEFAULT_MAX_ORDER });
    }
    Ok(k)
}

/// Series `Σ_i (x/2)^{k+2i} / (i! (k+i)!)` multiplied by `e^{-shift}`.
fn series<T: Scalar>(k: u64, x: T, shift: T) -> T {
    if x == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    let half = x / T::lit(2.0);
    let lead = T::int(k as i64) * half.ln() - ln_factorial::<T>(k) - shift;
    if lead < T::lit(-745.0) {
        return T::zero();
    }
    let q = half * half;
    let mut term = T::one();
    let mut sum = T::one();
    let kf = T::int(k as i64);
    let mut i = T::zero();
    loop {
        i = i + T::one();
        term = term * q / (i * (kf + i));
        sum = sum + term;
        if term <= sum * T::epsilon() * T::lit(0.25) {
            break;
        }
    }
    lead.exp() * sum
}

/// Scaled values `e^{-x} I_m(x)` for `m = 0..=max_order` by Miller's algorithm.
fn miller_scaled<T: Scalar>(max_order: u64, x: T) -> Vec<T> {
    let extra = 50 + (T::lit(10.0) * x.sqrt()).ceil().to_u64().unwrap_or(0);
    let start = max_order + extra;
    let two_over_x = T::lit(2.0) / x;
    let big = T::max_value().sqrt();
    let mut out = vec![T::zero(); max_order as usize + 1];
    let mut next = T::zero(); // f_{m+1}
    let mut cur = T::min_positive_value().sqrt(); // f_m
    let mut norm = T::zero();
    let mut m = start;
    loop {
        if m <= max_order {
            out[m as usize] = cur;
        }
        if m == 0 {
            norm = norm + cur;
            break;
        }
        norm = norm + T::lit(2.0) * cur;
        let prev = T::int(m as i64) * two_over_x * cur + next;
        next = cur;
        cur = prev;
        m -= 1;
        if cur > big {
            let s = T::one() / big;
            cur = cur * s;
            next = next * s;
            norm = norm * s;
            for v in out.iter_mut().skip(m as usize + 1) {
                *v = *v * s;
            }
        }
    }
    for v in &mut out {
        *v = *v / norm;
    }
    out
}

/// `I_k(x)` for integer `k` and `x >= 0`.
pub fn bessel_i<T: Scalar>(order: i64, x: T) -> Result<T> {
    let k = check_args(order, x)?;
    if x <= T::lit(SERIES_LIMIT) {
        return Ok(series(k, x, T::zero()));
    }
    let scaled = miller_scaled(k, x)[k as usize];
    let v = scaled * x.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { order, x: x.as_f64() })
    }
}

/// `e^{-x} I_k(x)`.
pub fn bessel_i_scaled<T: Scalar>(order: i64, x: T) -> Result<T> {
    let k = check_args(order, x)?;
    if x <= T::lit(SERIES_LIMIT) {
        Ok(series(k, x, x))
    } else {
        Ok(miller_scaled(k, x)[k as usize])
    }
}

/// `e^{-x} I_k(x)` for every `k` in a contiguous range.
pub fn bessel_i_scaled_band<T: Scalar>(orders: RangeInclusive<i64>, x: T) -> Result<Vec<T>> {
    if orders.is_empty() {
        return Err(Error::EmptyRange);
    }
    let (lo, hi) = (*orders.start(), *orders.end());
    let kmax = check_args(lo, x)?.max(check_args(hi, x)?);
    let table = ScaledBesselTable::with_max_order(x, kmax);
    Ok(orders.map(|k| table.get(k)).collect())
}

/// Scaled Bessel values `e^{-x} I_m(x)` for `|m| <= max_order` at one argument.
///
/// Orders beyond the table read as zero, which is exact to working precision
/// once the table covers [`significant_order_bound`].
#[derive(Debug, Clone)]
pub struct ScaledBesselTable<T> {
    x: T,
    values: Vec<T>,
}

impl<T: Scalar> ScaledBesselTable<T> {
    pub fn new(x: T) -> Self {
        let bound = significant_order_bound(x).ceil().to_u64().unwrap_or(0);
        Self::with_max_order(x, bound)
    }

    pub fn with_max_order(x: T, max_order: u64) -> Self {
        let values = if x <= T::lit(SERIES_LIMIT) {
            (0..=max_order).map(|k| series(k, x, x)).collect()
        } else {
            miller_scaled(max_order, x)
        };
        Self { x, values }
    }

    pub fn argument(&self) -> T {
        self.x
    }

    pub fn max_order(&self) -> i64 {
        self.values.len() as i64 - 1
    }

    #[inline]
    pub fn get(&self, order: i64) -> T {
        self.values
            .get(order.unsigned_abs() as usize)
            .copied()
            .unwrap_or_else(T::zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Direct summation of the defining series in f64 with explicit factorials.
    fn series_oracle(k: u32, x: f64, terms: u32) -> f64 {
        let half = x / 2.0;
        let mut sum = 0.0;
        for i in 0..terms {
            let mut den = 1.0;
            for j in 1..=i {
                den *= j as f64;
            }
            for j in 1..=(k + i) {
                den *= j as f64;
            }
            sum += half.powi((k + 2 * i) as i32) / den;
        }
        sum
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_i(0, 0.0_f64).unwrap(), 1.0);
        assert_eq!(bessel_i(3, 0.0_f64).unwrap(), 0.0);
        assert_eq!(bessel_i_scaled(-2, 0.0_f64).unwrap(), 0.0);
    }

    #[test]
    fn order_one_at_two_matches_series() {
        let oracle = series_oracle(1, 2.0, 50);
        assert_relative_eq!(bessel_i(1, 2.0_f64).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn series_region_against_oracle() {
        for &x in &[0.1, 1.0, 5.0, 12.5, 29.0] {
            for k in [0u32, 1, 2, 7, 20] {
                let oracle = series_oracle(k, x, 120);
                assert_relative_eq!(bessel_i(k as i64, x).unwrap(), oracle, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn recurrence_branch_matches_series_near_switch() {
        // Both algorithms at x = 30 +/- tiny should agree.
        for k in [0i64, 1, 5, 30, 60] {
            let a = series(k as u64, 30.0_f64, 30.0);
            let b = miller_scaled(k as u64, 30.0_f64)[k as usize];
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn large_argument_known_values() {
        // I_0(50) = 2.93255378284878e20, I_1(100) = 1.068369390338162e42
        assert_relative_eq!(bessel_i(0, 50.0_f64).unwrap(), 2.932_553_783_849_336e20, max_relative = 1e-12);
        assert_relative_eq!(bessel_i(1, 100.0_f64).unwrap(), 1.068_369_390_338_163e42, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(bessel_i(0, -1.0_f64), Err(Error::NegativeArgument(_))));
        assert!(matches!(bessel_i(2_000_000, 1.0_f64), Err(Error::OrderTooLarge { .. })));
        assert!(matches!(bessel_i(0, 800.0_f64), Err(Error::Overflow { .. })));
        assert!(bessel_i_scaled(0, 800.0_f64).is_ok());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = bessel_i_scaled_band(3..=1, 1.0_f64);
        assert!(matches!(empty, Err(Error::EmptyRange)));
    }

    #[test]
    fn band_examples() {
        let b = bessel_i_scaled_band(-2..=2, 0.0_f64).unwrap();
        assert_eq!(b, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = bessel_i_scaled_band(0..=1, 2.0_f64).unwrap();
        for (i, v) in b.iter().enumerate() {
            let want = (-2.0_f64).exp() * bessel_i(i as i64, 2.0).unwrap();
            assert_relative_eq!(*v, want, max_relative = 1e-12);
        }
        let b = bessel_i_scaled_band(-40..=40, 5.0_f64).unwrap();
        for k in 0..=40 {
            assert_eq!(b[40 + k], b[40 - k]);
        }
    }

    #[test]
    fn band_consistent_with_pointwise() {
        for &x in &[3.0, 31.0, 250.0, 4000.0] {
            let band = bessel_i_scaled_band(-60..=60, x).unwrap();
            for (i, k) in (-60..=60).enumerate() {
                let p = bessel_i_scaled(k, x).unwrap();
                assert_relative_eq!(band[i], p, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn scaled_sum_normalisation() {
        for &x in &[0.5, 10.0, 45.0, 900.0] {
            let y = 2.0 * x;
            let table = ScaledBesselTable::new(y);
            let k = table.max_order();
            let total: f64 = (-k..=k).map(|m| table.get(m)).sum();
            assert!((total - 1.0).abs() < 1e-12, "x={x} total={total}");
        }
    }

    #[test]
    fn ln_factorial_matches_products() {
        let mut acc = 0.0_f64;
        for n in 1..=200u64 {
            acc += (n as f64).ln();
            let v: f64 = ln_factorial(n);
            assert!((v - acc).abs() <= 1e-12 * acc.max(1.0), "n={n}");
        }
    }

    #[test]
    fn single_precision_evaluates() {
        let v = bessel_i_scaled(2, 40.0_f32).unwrap();
        let w = bessel_i_scaled(2, 40.0_f64).unwrap();
        assert!((v as f64 - w).abs() < 1e-5 * w);
    }
}
