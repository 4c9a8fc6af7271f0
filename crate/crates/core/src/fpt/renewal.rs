//! Volterra renewal route: valid for any skip-free model.

use super::{direct_rate, side_for, Assembly, Direction, FptDensity, FptMethod, Side, TabooGrid};
use crate::error::{invalid, Error, Result};
use crate::kernels::{transition_values, validate_times};
use crate::rates::{BoundaryKind, Family, RateModel, StateSpace};
use crate::scalar::Scalar;

/// Fewest base intervals of the trapezoid grid.
const MIN_INTERVALS: usize = 200;
/// Most base intervals tried before giving up.
const MAX_INTERVALS: usize = 3200;

fn check_states<T: Scalar>(model: &RateModel<T>, k: i64, s: i64, direction: Direction) -> Result<()> {
    if model.family() == Family::Catastrophe {
        return Err(invalid("model", "the renewal route needs a skip-free model; catastrophe models use the current route"));
    }
    match direction {
        Direction::Up if k >= s => return Err(invalid("k", format!("upward passage needs k < s, got k={k}, s={s}"))),
        Direction::Down if k <= s => return Err(invalid("k", format!("downward passage needs k > s, got k={k}, s={s}"))),
        _ => {}
    }
    if let StateSpace::Truncated { n } = model.space() {
        for m in [k, s] {
            if m < 0 || m > n {
                return Err(Error::StateOutOfRange { state: m, lo: 0, hi: n });
            }
        }
        if model.boundary() == BoundaryKind::Absorbing && (k == 0 || k == n) {
            return Err(Error::StateOutOfRange { state: k, lo: 1, hi: n - 1 });
        }
    }
    Ok(())
}

/// Base step and the three nested trapezoid levels `h`, `h/2`, `h/4`.
struct Levels<T> {
    base: usize,
    t_max: T,
    /// Density on each level, `g[level][i]` at `i · h / 2^level`.
    g: Vec<Vec<T>>,
    /// Finest grid.
    fine: Vec<T>,
}

impl<T: Scalar> Levels<T> {
    fn step(&self, level: usize) -> T {
        self.t_max / T::int((self.base << level) as i64)
    }
}

fn solve_levels<T: Scalar>(
    model: &RateModel<T>,
    k: i64,
    s: i64,
    direction: Direction,
    t_max: T,
    base: usize,
    tol: T,
) -> Result<Levels<T>> {
    let (neighbour, rate) = match direction {
        Direction::Up => (s - 1, model.lambda(s - 1)),
        Direction::Down => (s + 1, model.mu(s + 1)),
    };
    let m = base * 4;
    let fine: Vec<T> = (0..=m).map(|i| t_max * T::int(i as i64) / T::int(m as i64)).collect();
    let kernel_tol = (tol / T::lit(10.0)).max(T::lit(1e-15)).min(T::lit(1e-3));
    let (a, _, _) = transition_values(model, k, &[neighbour], &fine, kernel_tol)?;
    let (kern, _, _) = transition_values(model, s, &[neighbour], &fine, kernel_tol)?;
    let a: Vec<T> = a.into_iter().map(|r| r[0]).collect();
    let kern: Vec<T> = kern.into_iter().map(|r| r[0]).collect();
    let half = T::lit(0.5);
    let g = (0..3)
        .map(|level| {
            let stride = 4 >> level;
            let n = base << level;
            let h = t_max / T::int(n as i64);
            let mut g = Vec::with_capacity(n + 1);
            g.push(rate * a[0]);
            for i in 1..=n {
                // K(0) = 0 since the kernel starts away from its target.
                let mut conv = half * g[0] * kern[i * stride];
                for j in 1..i {
                    conv = conv + g[j] * kern[(i - j) * stride];
                }
                g.push(rate * (a[i * stride] - h * conv));
            }
            g
        })
        .collect();
    Ok(Levels { base, t_max, g, fine })
}

/// Two Richardson steps over the coarse nodes; returns the extrapolated
/// values and the error estimate `max |R2 − R1'|`.
fn extrapolate<T: Scalar>(base: usize, level: &[Vec<T>]) -> (Vec<T>, T) {
    let (three, fifteen, four, sixteen) = (T::lit(3.0), T::lit(15.0), T::lit(4.0), T::lit(16.0));
    let mut err = T::zero();
    let out = (0..=base)
        .map(|i| {
            let (g1, g2, g3) = (level[0][i], level[1][2 * i], level[2][4 * i]);
            let r1 = (four * g2 - g1) / three;
            let r1b = (four * g3 - g2) / three;
            let r2 = (sixteen * r1b - r1) / fifteen;
            err = err.max((r2 - r1b).abs());
            r2
        })
        .collect();
    (out, err)
}

/// Extrapolated solution on the finest level: the `h/4` values plus the
/// Richardson correction, which is smooth and is interpolated from the
/// coarse nodes.
struct Reconstruction<T> {
    h: T,
    fine: Vec<T>,
    halved: Vec<T>,
    correction: Vec<T>,
}

impl<T: Scalar> Reconstruction<T> {
    fn new(base: usize, h: T, level: &[Vec<T>]) -> (Self, T) {
        let (nodes, err) = extrapolate(base, level);
        let fine = level[2].clone();
        let halved = fine.iter().step_by(2).copied().collect();
        let correction = nodes.iter().enumerate().map(|(i, &r)| r - fine[4 * i]).collect();
        (Self { h, fine, halved, correction }, err)
    }

    /// Value at `t` and an estimate of its interpolation error, from the
    /// gap between the `h/4` and `h/2` interpolants.
    fn eval(&self, t: T) -> (T, T) {
        let quarter = self.h / T::lit(4.0);
        let a = interpolate(&self.fine, quarter, t);
        let b = interpolate(&self.halved, quarter + quarter, t);
        let c = interpolate(&self.correction, self.h, t);
        (a + c, (a - b).abs() / T::lit(15.0))
    }
}

/// 4-point Lagrange interpolation of nodal values `v` on `[0, t_max]`.
fn interpolate<T: Scalar>(v: &[T], h: T, t: T) -> T {
    let n = v.len() - 1;
    let pos = t / h;
    let i = pos.floor().to_usize().unwrap_or(0).min(n);
    if pos == T::int(i as i64) {
        return v[i];
    }
    let i0 = i.saturating_sub(1).min(n.saturating_sub(3));
    let mut sum = T::zero();
    for a in i0..(i0 + 4).min(n + 1) {
        let mut w = T::one();
        for b in i0..(i0 + 4).min(n + 1) {
            if a != b {
                w = w * (pos - T::int(b as i64)) / T::int(a as i64 - b as i64);
            }
        }
        sum = sum + w * v[a];
    }
    sum
}

/// Doubles the base grid from `start` until `attempt` reports an error
/// estimate within `tol`, or the grid limit is reached.
fn refine<T: Scalar, R>(start: usize, tol: T, mut attempt: impl FnMut(usize) -> Result<(R, T)>) -> Result<(R, T)> {
    let mut base = start;
    loop {
        let (out, err) = attempt(base)?;
        if err <= tol {
            return Ok((out, err));
        }
        if base * 2 > MAX_INTERVALS {
            return Err(Error::GridTooCoarse { achieved: err.as_f64(), tol: tol.as_f64() });
        }
        base *= 2;
    }
}

/// Solves `g(t) = r [p_{k,s∓1}(t) − ∫_0^t g(θ) p_{s,s∓1}(t−θ) dθ]` with
/// `r = λ_{s−1}` (up) or `μ_{s+1}` (down) by the product trapezoid rule at
/// steps `h`, `h/2`, `h/4` and Richardson extrapolation. The base grid is
/// doubled while the extrapolation or interpolation error estimate exceeds
/// `tol`; past `MAX_INTERVALS` the call fails with `GridTooCoarse`.
pub fn fpt_renewal<T: Scalar>(
    model: &RateModel<T>,
    k: i64,
    s: i64,
    direction: Direction,
    times: &[T],
    tol: T,
) -> Result<FptDensity<T>> {
    validate_times(times)?;
    check_states(model, k, s, direction)?;
    let at_zero = direct_rate(model, k, s);
    let t_max = *times.last().expect("validated nonempty");
    let assembly = |err| Assembly { start: k, target: s, direction, method: FptMethod::Renewal, at_zero, error_estimate: err };
    if t_max == T::zero() {
        return Ok(FptDensity::assemble(assembly(T::zero()), times, vec![at_zero; times.len()]));
    }
    let start = times.len().saturating_sub(1).max(MIN_INTERVALS);
    let (density, err) = refine(start, tol, |base| {
        let lv = solve_levels(model, k, s, direction, t_max, base, tol)?;
        let (rec, mut err) = Reconstruction::new(base, lv.step(0), &lv.g);
        let density = times
            .iter()
            .map(|&t| {
                let (v, e) = rec.eval(t);
                err = err.max(e);
                v
            })
            .collect::<Vec<T>>();
        Ok((density, err))
    })?;
    Ok(FptDensity::assemble(assembly(err), times, density))
}

/// `p_{k,n}(t) − ∫_0^t g(θ) p_{s,n}(t−θ) dθ` with `g` from the renewal
/// route, for `n` and `k` on the same side of the taboo state `s`.
pub fn taboo_renewal<T: Scalar>(
    model: &RateModel<T>,
    k: i64,
    s: i64,
    states: &[i64],
    times: &[T],
    tol: T,
) -> Result<TabooGrid<T>> {
    validate_times(times)?;
    let side = side_for(k, states, s)?;
    let direction = if side == Side::Below { Direction::Up } else { Direction::Down };
    check_states(model, k, s, direction)?;
    let t_max = *times.last().expect("validated nonempty");
    let start = times.len().saturating_sub(1).max(MIN_INTERVALS);
    let kernel_tol = (tol / T::lit(10.0)).max(T::lit(1e-15)).min(T::lit(1e-3));
    if t_max == T::zero() {
        let (p, _, _) = transition_values(model, k, states, times, kernel_tol)?;
        return Ok(TabooGrid { start: k, taboo: s, states: states.to_vec(), times: times.to_vec(), values: p, side, method: FptMethod::Renewal, cross_check: None });
    }
    let (values, _) = refine(start, tol, |base| {
        let lv = solve_levels(model, k, s, direction, t_max, base, tol)?;
        let (direct, _, _) = transition_values(model, k, states, &lv.fine, kernel_tol)?;
        let (from_s, _, _) = transition_values(model, s, states, &lv.fine, kernel_tol)?;
        let half = T::lit(0.5);
        let mut columns = Vec::with_capacity(states.len());
        let mut worst = T::zero();
        for j in 0..states.len() {
            let levels: Vec<Vec<T>> = (0..3)
                .map(|level| {
                    let stride = 4 >> level;
                    let n = base << level;
                    let h = lv.step(level);
                    let g = &lv.g[level];
                    (0..=n)
                        .map(|i| {
                            let mut conv = half * g[0] * from_s[i * stride][j];
                            for l in 1..i {
                                conv = conv + g[l] * from_s[(i - l) * stride][j];
                            }
                            // The end term vanishes: p_{s,n}(0) = 0 for n != s.
                            direct[i * stride][j] - h * conv
                        })
                        .collect()
                })
                .collect();
            let (rec, err) = Reconstruction::new(base, lv.step(0), &levels);
            worst = worst.max(err);
            columns.push(rec);
        }
        let values: Vec<Vec<T>> = times
            .iter()
            .map(|&t| {
                columns
                    .iter()
                    .map(|c| {
                        let (v, e) = c.eval(t);
                        worst = worst.max(e);
                        v
                    })
                    .collect()
            })
            .collect();
        Ok((values, worst))
    })?;
    Ok(TabooGrid { start: k, taboo: s, states: states.to_vec(), times: times.to_vec(), values, side, method: FptMethod::Renewal, cross_check: None })
}
