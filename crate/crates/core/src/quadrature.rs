//! Globally adaptive Gauss-Kronrod (7/15) quadrature for scalar and
//! vector-valued integrands.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct Integral<T> {
    pub value: Vec<T>,
    /// Sum over subintervals of the max-norm Kronrod-Gauss discrepancy.
    pub error: T,
    pub evaluations: usize,
}

struct Piece<T> {
    a: T,
    b: T,
    value: Vec<T>,
    error: T,
}

fn gk15<T: Scalar, F: FnMut(T) -> Vec<T>>(f: &mut F, a: T, b: T, evals: &mut usize) -> Piece<T> {
    let c = (a + b) / T::lit(2.0);
    let h = (b - a) / T::lit(2.0);
    let fc = f(c);
    let dim = fc.len();
    let mut kron: Vec<T> = fc.iter().map(|&v| v * T::lit(WGK[7])).collect();
    let mut gauss: Vec<T> = fc.iter().map(|&v| v * T::lit(WG[3])).collect();
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..dim {
            let s = f1[i] + f2[i];
            kron[i] = kron[i] + T::lit(WGK[j]) * s;
            if j % 2 == 1 {
                gauss[i] = gauss[i] + T::lit(WG[j / 2]) * s;
            }
        }
    }
    *evals += 15;
    let mut error = T::zero();
    for i in 0..dim {
        kron[i] = kron[i] * h;
        let e = (kron[i] - gauss[i] * h).abs();
        error = if e.is_finite() { error.max(e) } else { T::infinity() };
    }
    Piece { a, b, value: kron, error }
}

/// Integrates a vector-valued function over `[a, b]` to an absolute
/// max-norm tolerance. The integrand is never evaluated at the endpoints.
pub fn integrate_vec<T, F>(mut f: F, a: T, b: T, abs_tol: T) -> Result<Integral<T>>
where
    T: Scalar,
    F: FnMut(T) -> Vec<T>,
{
    let mut evaluations = 0;
    if b == a {
        let dim = f(a).len();
        return Ok(Integral { value: vec![T::zero(); dim], error: T::zero(), evaluations: 1 });
    }
    let mut pieces = vec![gk15(&mut f, a, b, &mut evaluations)];
    loop {
        let total_err: T = pieces.iter().map(|p| p.error).fold(T::zero(), |x, y| x + y);
        if total_err <= abs_tol {
            break;
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err.as_f64(),
                requested: abs_tol.as_f64(),
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) / T::lit(2.0);
        if mid <= p.a || mid >= p.b {
            return Err(Error::QuadratureNonConvergence {
                achieved: total_err.as_f64(),
                requested: abs_tol.as_f64(),
            });
        }
        pieces.push(gk15(&mut f, p.a, mid, &mut evaluations));
        pieces.push(gk15(&mut f, mid, p.b, &mut evaluations));
    }
    // Sum in interval order so the result does not depend on refinement history.
    pieces.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(std::cmp::Ordering::Equal));
    let dim = pieces[0].value.len();
    let mut value = vec![T::zero(); dim];
    let mut error = T::zero();
    for p in &pieces {
        for i in 0..dim {
            value[i] = value[i] + p.value[i];
        }
        error = error + p.error;
    }
    Ok(Integral { value, error, evaluations })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<T, F>(mut f: F, a: T, b: T, abs_tol: T) -> Result<(T, T)>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let r = integrate_vec(|x| vec![f(x)], a, b, abs_tol)?;
    Ok((r.value[0], r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x: f64| 3.0 * x * x, 0.0, 2.0, 1e-14).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let (v, _) = integrate(|x: f64| (10.0 * x).sin(), 0.0, 3.0, 1e-12).unwrap();
        let want = (1.0 - (30.0_f64).cos()) / 10.0;
        assert!((v - want).abs() < 1e-11);
        let (v, _) = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10).unwrap();
        let want = 2.0 * (1.0 / 1e-2_f64) * (1.0 / 1e-2_f64).atan();
        assert!((v - want).abs() < 1e-8 * want);
    }

    #[test]
    fn vector_integrand() {
        let r = integrate_vec(|x: f64| vec![x.exp(), x.cos()], 0.0, 1.0, 1e-13).unwrap();
        assert!((r.value[0] - (1.0_f64.exp() - 1.0)).abs() < 1e-13);
        assert!((r.value[1] - 1.0_f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence() {
        let r = integrate(|x: f64| if x > 0.0 { 1.0 / x } else { 0.0 }, 0.0, 1.0, 1e-12);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
