//! Independent routes to the same quantity, compared pairwise.

use bd_sym::fpt::{
    fpt_bilateral, fpt_catastrophe_series, fpt_constant_closed, fpt_ehrenfest_closed, fpt_renewal, fpt_symmetric_absorbing,
    fpt_symmetric_reflecting, taboo_bilateral, taboo_catastrophe, taboo_reflecting, taboo_symmetric_absorbing, Direction,
};
use bd_sym::kernels::{
    p_bilateral_poisson, p_catastrophe_constant, p_constant_absorbing, p_ehrenfest_reflecting, transition_grid, uniformize, Method,
};
use bd_sym::quadrature::integrate;
use bd_sym::rates::{build_preset, PresetParams, PresetTag, RateModel};
use bd_sym::twod::{fpt2d_subdensity, p2d, taboo2d, PlaneModel};
use bd_sym::Error;

fn preset(tag: PresetTag, p: PresetParams<f64>) -> RateModel<f64> {
    build_preset(tag, p).unwrap()
}

fn absorbing(n: i64, lambda: f64, mu: f64) -> RateModel<f64> {
    preset(PresetTag::ConstantAbsorbing, PresetParams { n: Some(n), lambda: Some(lambda), mu: Some(mu), ..Default::default() })
}

fn window(lo: i64, hi: i64) -> Option<(i64, i64)> {
    Some((lo, hi))
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const TIMES: [f64; 6] = [0.05, 0.3, 1.0, 2.5, 6.0, 15.0];

fn closed_vs_uniformized(model: &RateModel<f64>, starts: &[i64], tol: f64) {
    for &k in starts {
        let closed = transition_grid(model, k, &TIMES, tol).unwrap();
        assert_eq!(closed.method, Method::ClosedForm);
        let uni = uniformize(model, k, &TIMES, tol).unwrap();
        for i in 0..TIMES.len() {
            for &n in &uni.states {
                let d = (closed.get(i, n) - uni.get(i, n)).abs();
                assert!(d <= 1e-8_f64.max(10.0 * tol), "{:?} k={k} n={n} t={} diff {d:e}", model.preset_tag(), TIMES[i]);
            }
        }
    }
}

#[test]
fn constant_absorbing_closed_vs_uniformized() {
    for (lambda, mu) in [(1.0, 0.5), (1.0, 1.0), (0.3, 2.0)] {
        closed_vs_uniformized(&absorbing(20, lambda, mu), &[1, 7, 10, 19], 1e-10);
    }
    closed_vs_uniformized(&absorbing(3, 2.0, 1.0), &[1, 2], 1e-10);
}

#[test]
fn ehrenfest_closed_vs_uniformized() {
    for (n, alpha) in [(6, 1.0), (20, 0.5), (40, 0.2)] {
        let m = preset(PresetTag::Ehrenfest, PresetParams { n: Some(n), alpha: Some(alpha), ..Default::default() });
        closed_vs_uniformized(&m, &[0, n / 2 - 1, n], 1e-10);
    }
}

#[test]
fn bilateral_closed_vs_uniformized() {
    for (lambda, mu) in [(1.0, 1.0), (2.0, 0.5)] {
        let m = preset(PresetTag::ConstantBilateral, PresetParams { lambda: Some(lambda), mu: Some(mu), window: window(-60, 60), ..Default::default() });
        closed_vs_uniformized(&m, &[-3, 0, 5], 1e-10);
    }
}

#[test]
fn catastrophe_closed_vs_uniformized() {
    for (lambda, mu, alpha) in [(1.0, 1.0, 0.5), (1.5, 0.5, 2.0)] {
        let m = preset(
            PresetTag::ConstantCatastrophe,
            PresetParams { lambda: Some(lambda), mu: Some(mu), alpha: Some(alpha), window: window(-60, 60), ..Default::default() },
        );
        closed_vs_uniformized(&m, &[-2, 0, 4], 1e-10);
    }
}

#[test]
fn closed_forms_agree_pointwise() {
    // Each per-state closed form against its grid evaluation.
    let m = absorbing(12, 1.3, 0.4);
    let g = transition_grid(&m, 4, &TIMES, 1e-10).unwrap();
    for (i, &t) in TIMES.iter().enumerate() {
        for n in 1..12 {
            assert!((g.get(i, n) - p_constant_absorbing(12, 1.3, 0.4, 4, n, t).unwrap()).abs() < 1e-13);
        }
    }
    let e = preset(PresetTag::Ehrenfest, PresetParams { n: Some(10), alpha: Some(0.7), ..Default::default() });
    let g = transition_grid(&e, 3, &TIMES, 1e-10).unwrap();
    for (i, &t) in TIMES.iter().enumerate() {
        for n in 0..=10 {
            assert!((g.get(i, n) - p_ehrenfest_reflecting(10, 0.7, 3, n, t).unwrap()).abs() < 1e-14);
        }
    }
}

fn grid(t_max: f64, steps: usize) -> Vec<f64> {
    bd_sym::kernels::time_grid(0.01, t_max, steps).unwrap()
}

#[test]
fn absorbing_fpt_triangle() {
    let times = grid(8.0, 400);
    for (lambda, mu) in [(1.0, 2.0), (0.7, 0.7)] {
        let m = absorbing(12, lambda, mu);
        for k in [2, 5] {
            let series = fpt_constant_closed(12, lambda, mu, k, &times).unwrap();
            let symmetric = fpt_symmetric_absorbing(&m, k, &times, 1e-12).unwrap();
            let renewal = fpt_renewal(&m, k, 6, Direction::Up, &times, 1e-6).unwrap();
            assert!(sup(&series.density, &symmetric.density) < 1e-10);
            assert!(sup(&series.density, &renewal.density) < 1e-6);
        }
        let down = fpt_symmetric_absorbing(&m, 9, &times, 1e-12).unwrap();
        let renewal = fpt_renewal(&m, 9, 6, Direction::Down, &times, 1e-6).unwrap();
        assert!(sup(&down.density, &renewal.density) < 1e-6);
    }
}

#[test]
fn reflecting_fpt_triangle() {
    let times = grid(6.0, 300);
    for alpha in [0.5, 1.0] {
        let m = preset(PresetTag::Ehrenfest, PresetParams { n: Some(12), alpha: Some(alpha), ..Default::default() });
        for k in [0, 3, 5] {
            let series = fpt_ehrenfest_closed(12, alpha, k, &times).unwrap();
            let symmetric = fpt_symmetric_reflecting(&m, k, &times, 1e-12).unwrap();
            let renewal = fpt_renewal(&m, k, 6, Direction::Up, &times, 1e-6).unwrap();
            assert!(sup(&series.density, &symmetric.density) < 1e-10, "alpha={alpha} k={k}");
            assert!(sup(&series.density, &renewal.density) < 1e-6, "alpha={alpha} k={k}");
        }
    }
    let q = preset(PresetTag::QuadraticEhrenfest, PresetParams { n: Some(8), alpha: Some(0.1), ..Default::default() });
    for k in [1, 6] {
        let direction = if k < 4 { Direction::Up } else { Direction::Down };
        let symmetric = fpt_symmetric_reflecting(&q, k, &times, 1e-12).unwrap();
        let renewal = fpt_renewal(&q, k, 4, direction, &times, 1e-6).unwrap();
        assert!(sup(&symmetric.density, &renewal.density) < 1e-6, "k={k}");
    }
}

#[test]
fn bilateral_fpt_routes() {
    let times = grid(5.0, 250);
    let models = [
        preset(PresetTag::Sigmoidal, PresetParams { lambda: Some(1.0), mu: Some(0.5), c: Some(1.0), window: window(-80, 80), ..Default::default() }),
        preset(PresetTag::AlternatingB, PresetParams { lambda: Some(1.2), mu: Some(0.6), window: window(-80, 80), ..Default::default() }),
        preset(PresetTag::ConstantBilateral, PresetParams { lambda: Some(0.8), mu: Some(0.8), window: window(-80, 80), ..Default::default() }),
    ];
    for m in &models {
        for k in [-3, -1] {
            let closed = fpt_bilateral(m, k, &times, 1e-12).unwrap();
            let renewal = fpt_renewal(m, k, 0, Direction::Up, &times, 1e-6).unwrap();
            assert!(sup(&closed.density, &renewal.density) < 1e-6, "{:?} k={k}", m.preset_tag());
            let mirror = fpt_bilateral(m, -k, &times, 1e-12).unwrap();
            let renewal = fpt_renewal(m, -k, 0, Direction::Down, &times, 1e-6).unwrap();
            assert!(sup(&mirror.density, &renewal.density) < 1e-6, "{:?} k={}", m.preset_tag(), -k);
        }
    }
    let series = fpt_catastrophe_series(0.8, 0.0, 2, &times).unwrap();
    let closed = fpt_bilateral(&models[2], 2, &times, 1e-12).unwrap();
    assert!(sup(&series.density, &closed.density) < 1e-12);
}

#[test]
fn closed_forms_reject_what_they_cannot_handle() {
    let alt_a = preset(PresetTag::AlternatingA, PresetParams { lambda: Some(1.2), mu: Some(0.6), window: window(-20, 20), ..Default::default() });
    assert!(matches!(fpt_bilateral(&alt_a, -3, &[1.0], 1e-10), Err(Error::InvalidParameter { .. })));
    let cat = preset(
        PresetTag::ConstantCatastrophe,
        PresetParams { lambda: Some(1.0), mu: Some(1.0), alpha: Some(0.5), window: window(-20, 20), ..Default::default() },
    );
    assert!(fpt_renewal(&cat, 2, 0, Direction::Down, &[1.0], 1e-6).is_err());
    let asym = preset(PresetTag::ConstantBilateral, PresetParams { lambda: Some(1.0), mu: Some(0.5), window: window(-20, 20), ..Default::default() });
    assert!(matches!(fpt_bilateral(&asym, -3, &[1.0], 1e-10), Err(Error::Asymmetric { .. })));
}

/// `p_{k,n}(t) − p^{<s>}_{k,n}(t)` against `∫_0^t g_{k,s}(θ) p_{s,n}(t − θ) dθ`.
fn decomposition(g: impl Fn(f64) -> f64, p_from_s: impl Fn(f64) -> f64, direct: f64, taboo: f64, t: f64) {
    let (crossed, _) = integrate(|th| g(th) * p_from_s(t - th), 0.0, t, 1e-11).unwrap();
    assert!((direct - taboo - crossed).abs() < 1e-8, "direct {direct} taboo {taboo} crossed {crossed}");
}

#[test]
fn taboo_decomposition_absorbing() {
    let (big_n, lambda, mu, k, s) = (20, 1.0, 0.5, 7, 10);
    let m = absorbing(big_n, lambda, mu);
    for &t in &[0.4, 2.0, 6.0] {
        for n in [4, 8, 9] {
            let taboo = taboo_symmetric_absorbing(&m, k, &[n], &[t], 1e-12).unwrap().values[0][0];
            decomposition(
                |th| fpt_constant_closed(big_n, lambda, mu, k, &[th]).unwrap().density[0],
                |u| p_constant_absorbing(big_n, lambda, mu, s, n, u).unwrap(),
                p_constant_absorbing(big_n, lambda, mu, k, n, t).unwrap(),
                taboo,
                t,
            );
        }
    }
}

#[test]
fn taboo_decomposition_reflecting() {
    let (big_n, alpha, k, s) = (20, 0.5, 9, 10);
    let m = preset(PresetTag::Ehrenfest, PresetParams { n: Some(big_n), alpha: Some(alpha), ..Default::default() });
    for &t in &[0.3, 1.5, 5.0] {
        for n in [6, 9] {
            let taboo = taboo_reflecting(&m, k, &[n], &[t], 1e-12).unwrap().values[0][0];
            decomposition(
                |th| fpt_ehrenfest_closed(big_n, alpha, k, &[th]).unwrap().density[0],
                |u| p_ehrenfest_reflecting(big_n, alpha, s, n, u).unwrap(),
                p_ehrenfest_reflecting(big_n, alpha, k, n, t).unwrap(),
                taboo,
                t,
            );
        }
    }
}

#[test]
fn taboo_decomposition_bilateral_and_catastrophe() {
    for alpha in [0.0, 0.7] {
        let m = if alpha == 0.0 {
            preset(PresetTag::ConstantBilateral, PresetParams { lambda: Some(1.0), mu: Some(1.0), window: window(-60, 60), ..Default::default() })
        } else {
            preset(
                PresetTag::ConstantCatastrophe,
                PresetParams { lambda: Some(1.0), mu: Some(1.0), alpha: Some(alpha), window: window(-60, 60), ..Default::default() },
            )
        };
        for &t in &[0.3, 2.0, 4.0] {
            for n in [1, 3] {
                let taboo = if alpha == 0.0 {
                    taboo_bilateral(&m, 2, &[n], &[t], 1e-12).unwrap().values[0][0]
                } else {
                    taboo_catastrophe(&m, 2, &[n], &[t], 1e-12).unwrap().values[0][0]
                };
                decomposition(
                    |th| fpt_catastrophe_series(1.0, alpha, 2, &[th]).unwrap().density[0],
                    |u| p_catastrophe_constant(1.0, 1.0, alpha, 0, n, u).unwrap(),
                    p_catastrophe_constant(1.0, 1.0, alpha, 2, n, t).unwrap(),
                    taboo,
                    t,
                );
            }
        }
    }
    // Bilateral transition probability reduces to the Poisson walk.
    assert_eq!(p_catastrophe_constant(1.0, 1.0, 0.0, 2, 5, 1.0).unwrap(), p_bilateral_poisson(1.0, 1.0, 2, 5, 1.0).unwrap());
}

/// `Σ_x ∫_0^t g(x, x + r, τ | k) P(n, t − τ | x, x + r) dτ`.
fn crossed_mass(m: &PlaneModel<f64>, k: (i64, i64), n: (i64, i64), r: i64, t: f64) -> f64 {
    let sites = (k.0.min(n.0) - 30)..=(k.0.max(n.0) + 30);
    let f = |tau: f64| -> f64 {
        sites
            .clone()
            .map(|x| fpt2d_subdensity(m, k, r, x, tau).unwrap() * p2d(m, (x, x + r), n, t - tau).unwrap())
            .sum()
    };
    integrate(f, 0.0, t, 1e-10).unwrap().0
}

#[test]
fn plane_continuity() {
    let m = PlaneModel::new(2.0, 1.0, 1.0, 2.0).unwrap();
    let (k, r) = ((0, -2), 0);
    for &t in &[0.5, 1.5, 3.0] {
        // Same side: taboo plus crossed mass recovers the total.
        for n in [(0, -1), (1, -2), (-1, -3)] {
            let total = p2d(&m, k, n, t).unwrap();
            let taboo = taboo2d(&m, k, n, r, t).unwrap();
            assert!((taboo + crossed_mass(&m, k, n, r, t) - total).abs() < 1e-6, "n={n:?} t={t}");
        }
        // Opposite side: every path crossed.
        for n in [(0, 1), (-1, 2)] {
            let total = p2d(&m, k, n, t).unwrap();
            assert!((crossed_mass(&m, k, n, r, t) - total).abs() < 1e-6, "n={n:?} t={t}");
        }
    }
    let flat = PlaneModel::new(1.0, 1.0, 1.0, 1.0).unwrap();
    for &t in &[0.2, 1.0, 4.0] {
        let v = taboo2d(&flat, (0, -2), (0, -1), 0, t).unwrap();
        assert!(v >= 0.0);
        assert!((v + crossed_mass(&flat, (0, -2), (0, -1), 0, t) - p2d(&flat, (0, -2), (0, -1), t).unwrap()).abs() < 1e-6);
    }
}
