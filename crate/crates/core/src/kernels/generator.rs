//! Tridiagonal generator (plus catastrophe column) and uniformization.

use crate::error::{Error, Result};
use crate::rates::RateModel;
use crate::scalar::Scalar;
use crate::special::ln_factorial;

/// Above this many expected jumps per step, small generators switch to
/// dense squaring instead of a single Poisson sum.
const DENSE_SWITCH: f64 = 5.0e4;
const DENSE_MAX_DIM: usize = 256;

/// Conservative rate matrix of a birth-death process restricted to the
/// window `[lo, lo + dim − 1]`. Births out of the top state and deaths
/// out of the bottom state leave the window (for truncated models those
/// rates are zero).
#[derive(Debug, Clone)]
pub struct Generator<T> {
    lo: i64,
    birth: Vec<T>,
    death: Vec<T>,
    catastrophe: Vec<T>,
    diag: Vec<T>,
    zero: Option<usize>,
}

impl<T: Scalar> Generator<T> {
    pub fn from_model(model: &RateModel<T>, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidParameter { name: "window", reason: format!("empty window [{lo}, {hi}]") });
        }
        let states = lo..=hi;
        let birth: Vec<T> = states.clone().map(|n| model.lambda(n)).collect();
        let death: Vec<T> = states.clone().map(|n| model.mu(n)).collect();
        let catastrophe: Vec<T> = states.clone().map(|n| model.alpha(n)).collect();
        let zero = if (lo..=hi).contains(&0) { Some((-lo) as usize) } else { None };
        if zero.is_none() && catastrophe.iter().any(|&a| a > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "catastrophe models need state 0 inside the window".into(),
            });
        }
        let diag = (0..birth.len()).map(|i| -(birth[i] + death[i] + catastrophe[i])).collect();
        Ok(Self { lo, birth, death, catastrophe, diag, zero })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.dim() as i64 - 1
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Off-diagonal entry `Q[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        if i == j {
            return self.diag[i];
        }
        let mut v = T::zero();
        if j + 1 == i {
            v = v + self.death[i];
        }
        if i + 1 == j {
            v = v + self.birth[i];
        }
        if Some(j) == self.zero {
            v = v + self.catastrophe[i];
        }
        v
    }

    /// Rate at which state `i` leaves the window.
    pub fn leak_rate(&self, i: usize) -> T {
        let mut v = T::zero();
        if i + 1 == self.dim() {
            v = v + self.birth[i];
        }
        if i == 0 {
            v = v + self.death[i];
        }
        v
    }

    /// Row sum of `Q` counting transitions that leave the window.
    pub fn row_sum(&self, i: usize) -> T {
        let inside: T = (0..self.dim()).map(|j| self.entry(i, j)).fold(T::zero(), |a, b| a + b);
        inside + self.leak_rate(i)
    }

    /// Uniformization rate `max_i |Q_ii|`.
    pub fn uniformization_rate(&self) -> T {
        self.diag.iter().fold(T::zero(), |m, &d| m.max(-d))
    }

    /// `out = v (I + Q / rate)`.
    fn step(&self, v: &[T], out: &mut [T], inv_rate: T) {
        let n = self.dim();
        let mut to_zero = T::zero();
        for j in 0..n {
            let mut s = v[j] * (T::one() + self.diag[j] * inv_rate);
            if j > 0 {
                s = s + v[j - 1] * self.birth[j - 1] * inv_rate;
            }
            if j + 1 < n {
                s = s + v[j + 1] * self.death[j + 1] * inv_rate;
            }
            out[j] = s;
            to_zero = to_zero + v[j] * self.catastrophe[j];
        }
        if let Some(z) = self.zero {
            out[z] = out[z] + to_zero * inv_rate;
        }
    }

    /// Advances the row vector `v` by `dt`: `v <- v exp(Q dt)`. Poisson
    /// weights are truncated once the discarded tail falls below `eps`.
    pub fn propagate(&self, v: &mut [T], dt: T, eps: T) {
        let rate = self.uniformization_rate();
        let a = rate * dt;
        if a <= T::zero() {
            return;
        }
        if a > T::lit(DENSE_SWITCH) && self.dim() <= DENSE_MAX_DIM {
            let p = self.dense_transition(dt, eps);
            let out = vec_mat(v, &p);
            v.copy_from_slice(&out);
            return;
        }
        let chunk = T::lit(DENSE_SWITCH);
        if a > chunk {
            let pieces = (a / chunk).ceil().to_usize().unwrap_or(1).max(1);
            let sub = dt / T::int(pieces as i64);
            let sub_eps = eps / T::int(pieces as i64);
            for _ in 0..pieces {
                self.propagate(v, sub, sub_eps);
            }
            return;
        }
        let weights = poisson_weights(a, eps);
        let inv_rate = T::one() / rate;
        let mut cur = v.to_vec();
        let mut next = vec![T::zero(); cur.len()];
        let mut acc = vec![T::zero(); cur.len()];
        for (m, &w) in weights.iter().enumerate() {
            if w > T::zero() {
                for (a, &c) in acc.iter_mut().zip(&cur) {
                    *a = *a + w * c;
                }
            }
            if m + 1 < weights.len() {
                self.step(&cur, &mut next, inv_rate);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        v.copy_from_slice(&acc);
    }

    /// Dense `exp(Q dt)` by uniformization over a short step followed by
    /// repeated squaring.
    pub fn dense_transition(&self, dt: T, eps: T) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut squarings = 0u32;
        let mut tau = dt;
        while self.uniformization_rate() * tau > T::lit(32.0) {
            tau = tau / T::lit(2.0);
            squarings += 1;
        }
        let step_eps = eps / T::lit(2.0f64.powi(squarings as i32 + 1));
        let mut p: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut row = vec![T::zero(); n];
                row[i] = T::one();
                self.propagate(&mut row, tau, step_eps);
                row
            })
            .collect();
        for _ in 0..squarings {
            p = mat_mul(&p, &p);
        }
        p
    }
}

fn vec_mat<T: Scalar>(v: &[T], m: &[Vec<T>]) -> Vec<T> {
    let n = v.len();
    let mut out = vec![T::zero(); n];
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            continue;
        }
        for j in 0..n {
            out[j] = out[j] + vi * m[i][j];
        }
    }
    out
}

fn mat_mul<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    a.iter().map(|row| vec_mat(row, b)).collect()
}

/// Poisson(`a`) probabilities for `m = 0..=R`, with `R` chosen so the
/// right tail beyond `R` is below `eps`.
pub fn poisson_weights<T: Scalar>(a: T, eps: T) -> Vec<T> {
    let mode = a.floor().to_u64().unwrap_or(0);
    let ln_mode = -a + T::int(mode as i64) * a.ln() - ln_factorial::<T>(mode);
    let w_mode = ln_mode.exp();
    let mut right = vec![w_mode];
    let mut m = mode;
    loop {
        let w = *right.last().expect("nonempty");
        let ratio = a / T::int(m as i64 + 1);
        if ratio < T::one() {
            let tail = w * ratio / (T::one() - ratio);
            if tail < eps {
                break;
            }
        }
        m += 1;
        right.push(w * ratio);
    }
    let mut left = Vec::with_capacity(mode as usize);
    let mut w = w_mode;
    for j in (1..=mode).rev() {
        w = w * T::int(j as i64) / a;
        left.push(w);
    }
    left.reverse();
    left.extend(right);
    // The mode weight carries the cancellation error of its log; the
    // retained weights are renormalised instead.
    let total = left.iter().fold(T::zero(), |s, &w| s + w);
    left.iter().map(|&w| w / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{build_preset, PresetParams, PresetTag};

    #[test]
    fn poisson_weights_sum_to_one() {
        for &a in &[0.01, 1.0, 17.3, 400.0, 30000.0] {
            let w = poisson_weights(a, 1e-16_f64);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "a={a} s={s}");
        }
    }

    #[test]
    fn generator_rows_conservative() {
        let m = build_preset(
            PresetTag::ConstantCatastrophe,
            PresetParams { lambda: Some(1.0), mu: Some(2.0), alpha: Some(0.5), window: Some((-5, 5)), ..Default::default() },
        )
        .unwrap();
        let g: Generator<f64> = Generator::from_model(&m, -5, 5).unwrap();
        for i in 0..g.dim() {
            assert!(g.row_sum(i).abs() < 1e-15);
            for j in 0..g.dim() {
                if i != j {
                    assert!(g.entry(i, j) >= 0.0);
                }
            }
        }
        assert_eq!(g.entry(2, 5), 0.5 + 0.0);
        assert_eq!(g.diagonal()[0], -3.5);
        assert_eq!(g.diagonal()[5], -3.0);
    }

    #[test]
    fn dense_and_poisson_paths_agree() {
        let m = build_preset(PresetTag::Ehrenfest, PresetParams { n: Some(6), alpha: Some(1.0), ..Default::default() }).unwrap();
        let g: Generator<f64> = Generator::from_model(&m, 0, 6).unwrap();
        let mut v = vec![0.0; 7];
        v[2] = 1.0;
        let mut w = v.clone();
        g.propagate(&mut v, 3.0, 1e-16);
        let p = g.dense_transition(3.0, 1e-16);
        for j in 0..7 {
            w[j] = p[2][j];
        }
        for j in 0..7 {
            assert!((v[j] - w[j]).abs() < 1e-13);
        }
    }
}
