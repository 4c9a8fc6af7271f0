//! Densities and taboo probabilities through the symmetry state, from
//! transition probabilities of symmetric models.

use super::{clamp_rounding, direct_rate, half_size, side_for, Assembly, Currents, Direction, FptDensity, FptMethod, TabooGrid};
use crate::error::{invalid, Error, Result};
use crate::kernels::{transition_grid, transition_values, Method};
use crate::rates::{check_symmetry, weights, Family, RateModel};
use crate::scalar::Scalar;

fn require_symmetric<T: Scalar>(model: &RateModel<T>, family: Family) -> Result<()> {
    check_symmetry(model, family)?.into_result()?;
    if matches!(family, Family::Bilateral | Family::Catastrophe) && model.mirror_axis() != 0 {
        return Err(invalid("model", "closed forms through 0 need a model symmetric about state 0"));
    }
    Ok(())
}

fn kernel_error<T: Scalar>(method: Method, rate: T, tol: T) -> T {
    match method {
        Method::ClosedForm => T::zero(),
        Method::Uniformization => rate * tol,
    }
}

/// Upward (`0 < k < s`) or downward (`s < k < 2s`) density through the
/// symmetry state `s = N/2` of a symmetric absorbing model.
pub fn fpt_symmetric_absorbing<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<FptDensity<T>> {
    require_symmetric(model, Family::Absorbing)?;
    let s = half_size(model)?;
    let direction = match k {
        _ if k > 0 && k < s => Direction::Up,
        _ if k > s && k < 2 * s => Direction::Down,
        _ => return Err(Error::StateOutOfRange { state: k, lo: 1, hi: 2 * s - 1 }),
    };
    let (p, method, _) = transition_values(model, k, &[s - 1, s + 1], times, tol)?;
    let (lam, mu) = (model.lambda(s - 1), model.mu(s + 1));
    let sign = if direction == Direction::Up { T::one() } else { -T::one() };
    let density = p.iter().map(|row| sign * (lam * row[0] - mu * row[1])).collect();
    Ok(FptDensity::assemble(
        Assembly {
            start: k,
            target: s,
            direction,
            method: FptMethod::SymmetricClosedForm,
            at_zero: direct_rate(model, k, s),
            error_estimate: kernel_error(method, lam + mu, tol),
        },
        times,
        density,
    ))
}

/// `p_{k,n}(t) − (x_k/x_s) p_{2s−k,n}(t)` for a symmetric absorbing model.
pub fn taboo_symmetric_absorbing<T: Scalar>(model: &RateModel<T>, k: i64, states: &[i64], times: &[T], tol: T) -> Result<TabooGrid<T>> {
    require_symmetric(model, Family::Absorbing)?;
    let s = half_size(model)?;
    let side = side_for(k, states, s)?;
    for &m in states.iter().chain(std::iter::once(&k)) {
        if m <= 0 || m >= 2 * s {
            return Err(Error::StateOutOfRange { state: m, lo: 1, hi: 2 * s - 1 });
        }
    }
    let w = weights(model)?;
    let ratio = w.get(k) / w.get(s);
    let (direct, _, _) = transition_values(model, k, states, times, tol)?;
    let (mirror, _, _) = transition_values(model, 2 * s - k, states, times, tol)?;
    let values = direct
        .iter()
        .zip(&mirror)
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| clamp_rounding(x - ratio * y)).collect())
        .collect();
    Ok(TabooGrid {
        start: k,
        taboo: s,
        states: states.to_vec(),
        times: times.to_vec(),
        values,
        side,
        method: FptMethod::SymmetricClosedForm,
        cross_check: None,
    })
}

/// Density through `s = N/2` of a symmetric reflecting model: upward for
/// `0 <= k < s`, downward for `s < k <= 2s`.
pub fn fpt_symmetric_reflecting<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<FptDensity<T>> {
    require_symmetric(model, Family::Reflecting)?;
    let s = half_size(model)?;
    let direction = match k {
        _ if k >= 0 && k < s => Direction::Up,
        _ if k > s && k <= 2 * s => Direction::Down,
        _ => return Err(Error::StateOutOfRange { state: k, lo: 0, hi: 2 * s }),
    };
    let (p, method, _) = transition_values(model, k, &[s - 1, s + 1], times, tol)?;
    let rate = match direction {
        Direction::Up => model.mu(s + 1),
        Direction::Down => model.lambda(s - 1),
    };
    let sign = if direction == Direction::Up { T::one() } else { -T::one() };
    let density = p.iter().map(|row| sign * rate * (row[0] - row[1])).collect();
    Ok(FptDensity::assemble(
        Assembly {
            start: k,
            target: s,
            direction,
            method: FptMethod::SymmetricClosedForm,
            at_zero: direct_rate(model, k, s),
            error_estimate: kernel_error(method, rate + rate, tol),
        },
        times,
        density,
    ))
}

/// `p_{k,n} − p_{2s−k,n}` for a symmetric reflecting model. The equivalent
/// form `p_{k,n} − p_{k,2s−n}` is evaluated too; their largest difference
/// is reported in `cross_check`.
pub fn taboo_reflecting<T: Scalar>(model: &RateModel<T>, k: i64, states: &[i64], times: &[T], tol: T) -> Result<TabooGrid<T>> {
    require_symmetric(model, Family::Reflecting)?;
    let s = half_size(model)?;
    let side = side_for(k, states, s)?;
    for &m in states.iter().chain(std::iter::once(&k)) {
        if m < 0 || m > 2 * s {
            return Err(Error::StateOutOfRange { state: m, lo: 0, hi: 2 * s });
        }
    }
    let mut both: Vec<i64> = states.to_vec();
    both.extend(states.iter().map(|&n| 2 * s - n));
    let (direct, _, _) = transition_values(model, k, &both, times, tol)?;
    let (mirror, _, _) = transition_values(model, 2 * s - k, states, times, tol)?;
    let m = states.len();
    let mut cross = T::zero();
    let values = direct
        .iter()
        .zip(&mirror)
        .map(|(a, b)| {
            (0..m)
                .map(|j| {
                    let first = a[j] - b[j];
                    let second = a[j] - a[m + j];
                    cross = cross.max((first - second).abs());
                    clamp_rounding(first)
                })
                .collect()
        })
        .collect();
    Ok(TabooGrid {
        start: k,
        taboo: s,
        states: states.to_vec(),
        times: times.to_vec(),
        values,
        side,
        method: FptMethod::SymmetricClosedForm,
        cross_check: Some(cross),
    })
}

/// Density through 0 of a bilateral model symmetric about 0: upward for
/// `k < 0`, downward for `k > 0`.
pub fn fpt_bilateral<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<FptDensity<T>> {
    require_symmetric(model, Family::Bilateral)?;
    let direction = match k {
        _ if k < 0 => Direction::Up,
        _ if k > 0 => Direction::Down,
        _ => return Err(invalid("k", "start state must differ from 0")),
    };
    let (p, method, _) = transition_values(model, k, &[-1, 1], times, tol)?;
    let mu1 = model.mu(1);
    let sign = if direction == Direction::Up { T::one() } else { -T::one() };
    let density = p.iter().map(|row| sign * mu1 * (row[0] - row[1])).collect();
    Ok(FptDensity::assemble(
        Assembly {
            start: k,
            target: 0,
            direction,
            method: FptMethod::SymmetricClosedForm,
            at_zero: direct_rate(model, k, 0),
            error_estimate: kernel_error(method, mu1 + mu1, tol),
        },
        times,
        density,
    ))
}

fn mirrored_taboo<T: Scalar>(model: &RateModel<T>, k: i64, states: &[i64], times: &[T], tol: T) -> Result<TabooGrid<T>> {
    let side = side_for(k, states, 0)?;
    let (direct, _, _) = transition_values(model, k, states, times, tol)?;
    let (mirror, _, _) = transition_values(model, -k, states, times, tol)?;
    let values = direct
        .iter()
        .zip(&mirror)
        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| clamp_rounding(x - y)).collect())
        .collect();
    Ok(TabooGrid {
        start: k,
        taboo: 0,
        states: states.to_vec(),
        times: times.to_vec(),
        values,
        side,
        method: FptMethod::SymmetricClosedForm,
        cross_check: None,
    })
}

/// `p_{k,n} − p_{−k,n}` for a bilateral model symmetric about 0.
pub fn taboo_bilateral<T: Scalar>(model: &RateModel<T>, k: i64, states: &[i64], times: &[T], tol: T) -> Result<TabooGrid<T>> {
    require_symmetric(model, Family::Bilateral)?;
    mirrored_taboo(model, k, states, times, tol)
}

/// `p_{k,n} − p_{−k,n}` for a symmetric catastrophe model.
pub fn taboo_catastrophe<T: Scalar>(model: &RateModel<T>, k: i64, states: &[i64], times: &[T], tol: T) -> Result<TabooGrid<T>> {
    require_symmetric(model, Family::Catastrophe)?;
    mirrored_taboo(model, k, states, times, tol)
}

/// Density through 0 of a symmetric catastrophe model as the difference
/// of the probability currents into 0 from either side.
pub fn fpt_catastrophe<T: Scalar>(model: &RateModel<T>, k: i64, times: &[T], tol: T) -> Result<FptDensity<T>> {
    require_symmetric(model, Family::Catastrophe)?;
    let direction = match k {
        _ if k < 0 => Direction::Up,
        _ if k > 0 => Direction::Down,
        _ => return Err(invalid("k", "start state must differ from 0")),
    };
    let grid = transition_grid(model, k, times, tol)?;
    let (lam_m1, mu_1) = (model.lambda(-1), model.mu(1));
    let mut up = Vec::with_capacity(times.len());
    let mut down = Vec::with_capacity(times.len());
    let mut alpha_max = T::zero();
    for i in 0..times.len() {
        let mut hp = lam_m1 * grid.get(i, -1);
        let mut hm = mu_1 * grid.get(i, 1);
        for (j, &n) in grid.states.iter().enumerate() {
            let a = model.alpha(n);
            alpha_max = alpha_max.max(a);
            if n < 0 {
                hp = hp + a * grid.values[i][j];
            } else if n > 0 {
                hm = hm + a * grid.values[i][j];
            }
        }
        up.push(hp);
        down.push(hm);
    }
    let density = match direction {
        Direction::Up => up.iter().zip(&down).map(|(&a, &b)| a - b).collect(),
        Direction::Down => down.iter().zip(&up).map(|(&a, &b)| a - b).collect(),
    };
    let error = kernel_error(grid.method, lam_m1 + mu_1 + alpha_max, tol) + alpha_max * grid.tail_bound;
    let mut out = FptDensity::assemble(
        Assembly {
            start: k,
            target: 0,
            direction,
            method: FptMethod::SymmetricClosedForm,
            at_zero: direct_rate(model, k, 0),
            error_estimate: error,
        },
        times,
        density,
    );
    out.currents = Some(Currents { up, down, tail_bound: grid.tail_bound });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpt::{fpt_catastrophe_series, fpt_constant_closed, taboo_catastrophe_series, taboo_constant_closed};
    use crate::rates::{build_preset, PresetParams, PresetTag};

    fn model(tag: PresetTag, p: PresetParams<f64>) -> RateModel<f64> {
        build_preset(tag, p).unwrap()
    }

    fn absorbing(mu: f64) -> RateModel<f64> {
        build_preset(PresetTag::ConstantAbsorbing, PresetParams { n: Some(20), lambda: Some(1.0), mu: Some(mu), ..Default::default() }).unwrap()
    }

    #[test]
    fn absorbing_routes_agree() {
        let times = [0.1, 1.0, 4.0];
        for mu in [0.5, 1.0] {
            let m = absorbing(mu);
            let a = fpt_symmetric_absorbing(&m, 7, &times, 1e-10).unwrap();
            let b = fpt_constant_closed(20, 1.0, mu, 7, &times).unwrap();
            for i in 0..3 {
                assert!((a.density[i] - b.density[i]).abs() < 1e-12);
            }
            let ta = taboo_symmetric_absorbing(&m, 9, &[6, 7, 8, 9], &times, 1e-10).unwrap();
            let tb = taboo_constant_closed(20, 1.0, mu, 9, &[6, 7, 8, 9], &times).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    assert!((ta.values[i][j] - tb.values[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mirror_density_relation() {
        // g+_{N-k,N-s} = (x_s / x_k) g-_{k,s} with s = N/2.
        let m = absorbing(0.5);
        let w = weights(&m).unwrap();
        let times = [0.2, 1.0, 3.0];
        let down = fpt_symmetric_absorbing(&m, 13, &times, 1e-10).unwrap();
        let up = fpt_symmetric_absorbing(&m, 7, &times, 1e-10).unwrap();
        for i in 0..3 {
            let want = w.get(10) / w.get(13) * down.density[i];
            assert!((up.density[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_model_rejected() {
        let m = RateModel::absorbing(vec![0.0, 1.0, 2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(fpt_symmetric_absorbing(&m, 1, &[1.0], 1e-9), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn bilateral_constant_case() {
        let m = model(PresetTag::ConstantBilateral, PresetParams { lambda: Some(1.0), mu: Some(1.0), window: Some((-30, 30)), ..Default::default() });
        let times = [0.05, 0.5, 2.0, 5.0];
        for k in [1, 2, 3] {
            let down = fpt_bilateral(&m, k, &times, 1e-10).unwrap();
            let up = fpt_bilateral(&m, -k, &times, 1e-10).unwrap();
            let series = fpt_catastrophe_series(1.0, 0.0, k, &times).unwrap();
            for i in 0..times.len() {
                assert!((down.density[i] - up.density[i]).abs() < 1e-15);
                assert!((down.density[i] - series.density[i]).abs() < 1e-13);
            }
            let tb = taboo_bilateral(&m, k, &[1, 2, 3, 4], &times, 1e-10).unwrap();
            let ts = taboo_catastrophe_series(1.0, 0.0, k, &[1, 2, 3, 4], &times).unwrap();
            for i in 0..times.len() {
                for j in 0..4 {
                    assert!((tb.values[i][j] - ts.values[i][j]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn catastrophe_currents_match_series() {
        for alpha in [0.5, 1.0] {
            let m = model(
                PresetTag::ConstantCatastrophe,
                PresetParams { lambda: Some(1.0), mu: Some(1.0), alpha: Some(alpha), window: Some((-30, 30)), ..Default::default() },
            );
            let times = [0.05, 0.6, 2.0, 5.0];
            for k in [1, 3] {
                let g = fpt_catastrophe(&m, k, &times, 1e-11).unwrap();
                let s = fpt_catastrophe_series(1.0, alpha, k, &times).unwrap();
                let mirror = fpt_catastrophe(&m, -k, &times, 1e-11).unwrap();
                for i in 0..times.len() {
                    assert!((g.density[i] - s.density[i]).abs() < 1e-8, "alpha={alpha} k={k} t={}", times[i]);
                    assert!((g.density[i] - mirror.density[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn reflecting_cross_check() {
        let m = build_preset(PresetTag::QuadraticEhrenfest, PresetParams { n: Some(8), alpha: Some(0.2), ..Default::default() }).unwrap();
        let tg = taboo_reflecting(&m, 2, &[0, 1, 2, 3], &[0.1, 0.5, 2.0], 1e-11).unwrap();
        assert!(tg.cross_check.unwrap() < 1e-9);
        assert!(tg.values.iter().flatten().all(|&v| v >= 0.0));
    }
}
