use bd_sym::fpt::{fpt_symmetric_absorbing, taboo_ehrenfest_closed};
use bd_sym::kernels::p_ehrenfest_reflecting;
use bd_sym::quadrature::integrate;
use bd_sym::rates::{build_preset, PresetParams, PresetTag};
use bd_sym::sim::{crossing_samples, estimate, estimate_plane, fpt_samples, Histogram, Observable, PlaneObservable, SimConfig};
use bd_sym::twod::{crossing_probability, fpt2d_total, taboo2d, PlaneModel};

const R: u64 = 100_000;

fn ehrenfest(big_n: i64, alpha: f64) -> bd_sym::RateModel {
    build_preset(PresetTag::Ehrenfest, PresetParams { n: Some(big_n), alpha: Some(alpha), ..Default::default() }).unwrap()
}

/// Every bin count within `3√E` of its expectation `E = R ∫ g` over the bin.
fn assert_histogram_matches(h: &Histogram<f64>, density: impl Fn(f64) -> f64) {
    for (i, &count) in h.counts.iter().enumerate() {
        let (a, b) = (h.edges[i], h.edges[i + 1]);
        let (mass, err) = integrate(&density, a, b, 1e-12).unwrap();
        assert!(err < 1e-8, "bin {i}: quadrature error {err:e}");
        let expected = h.total as f64 * mass;
        let band = 3.0 * expected.sqrt();
        assert!(
            (count as f64 - expected).abs() <= band,
            "bin [{a}, {b}): count {count}, expected {expected:.1} ± {band:.1}"
        );
    }
}

#[test]
fn ehrenfest_occupation_frequencies() {
    let m = ehrenfest(6, 0.8);
    let t = 0.7;
    let obs: Vec<Observable<f64>> = (0..=6).map(|n| Observable::StateAt { n, t }).collect();
    let est = estimate(&m, 1, &obs, SimConfig::new(R, 61).unwrap()).unwrap();
    for (n, e) in (0..=6).zip(&est) {
        let p = p_ehrenfest_reflecting(6, 0.8, 1, n, t).unwrap();
        assert!(e.z_score(p) <= 4.0, "n={n}: {} vs {p}, z={}", e.estimate, e.z_score(p));
    }
    let total: u64 = est.iter().map(|e| e.count).sum();
    assert_eq!(total, R);
}

#[test]
fn taboo_frequencies() {
    let (big_n, alpha, k, s) = (6, 0.6, 1, 3);
    let times = [0.4, 1.5];
    let states = [0, 1, 2];
    let grid = taboo_ehrenfest_closed(big_n, alpha, k, &states, &times).unwrap();
    let m = ehrenfest(big_n, alpha);
    let obs: Vec<Observable<f64>> =
        times.iter().flat_map(|&t| states.iter().map(move |&n| Observable::AvoidingAt { taboo: s, n, t })).collect();
    let est = estimate(&m, k, &obs, SimConfig::new(R, 62).unwrap()).unwrap();
    for (i, e) in est.iter().enumerate() {
        let p = grid.values[i / states.len()][i % states.len()];
        assert!(e.z_score(p) <= 4.0, "{}: {} vs {p}", e.observable, e.estimate);
    }
}

#[test]
fn first_passage_histogram() {
    let m = build_preset(
        PresetTag::ConstantAbsorbing,
        PresetParams { n: Some(10), lambda: Some(1.0), mu: Some(0.6), ..Default::default() },
    )
    .unwrap();
    let k = 3;
    let samples = fpt_samples(&m, k, 5, 12.0, SimConfig::new(R, 63).unwrap()).unwrap();
    let h = Histogram::new(&samples, 0.0, 12.0, 24).unwrap();
    assert_histogram_matches(&h, |t| fpt_symmetric_absorbing(&m, k, &[t], 1e-13).unwrap().density[0]);
}

#[test]
fn plane_taboo_frequency() {
    let m = PlaneModel::new(1.0, 0.5, 0.5, 1.0).unwrap();
    let (k, r, t) = ((0, -3), 0, 1.5);
    let sites = [(0, -3), (1, -1), (-1, -2), (2, -2)];
    let obs: Vec<PlaneObservable<f64>> = sites.iter().map(|&n| PlaneObservable::AvoidingAt { r, n, t }).collect();
    let est = estimate_plane(&m, k, &obs, SimConfig::new(R, 64).unwrap()).unwrap();
    for (n, e) in sites.iter().zip(&est) {
        let p = taboo2d(&m, k, *n, r, t).unwrap();
        assert!(e.z_score(p) <= 3.0, "{:?}: {} vs {p}", n, e.estimate);
    }
}

#[test]
fn plane_crossing_histogram() {
    let m = PlaneModel::new(1.0, 0.5, 0.5, 1.0).unwrap();
    let (k, r) = ((0, -3), 0);
    let samples = crossing_samples(&m, k, r, 20.0, SimConfig::new(R, 65).unwrap()).unwrap();
    let h = Histogram::new(&samples, 0.0, 20.0, 20).unwrap();
    assert_histogram_matches(&h, |t| if t > 0.0 { fpt2d_total(&m, k, r, t).unwrap() } else { 0.0 });
    let (by_horizon, _) = integrate(|t| if t > 0.0 { fpt2d_total(&m, k, r, t).unwrap() } else { 0.0 }, 0.0, 20.0, 1e-12).unwrap();
    let pi = crossing_probability(&m, k, r).unwrap().pi;
    assert!(by_horizon <= pi);
    let crossed = samples.iter().flatten().count() as f64 / R as f64;
    let se = (by_horizon * (1.0 - by_horizon) / R as f64).sqrt();
    assert!((crossed - by_horizon).abs() <= 4.0 * se, "{crossed} vs {by_horizon}");
}

#[test]
fn absorbed_mass_is_nondecreasing() {
    let m = build_preset(
        PresetTag::ConstantAbsorbing,
        PresetParams { n: Some(8), lambda: Some(0.7), mu: Some(1.1), ..Default::default() },
    )
    .unwrap();
    let obs: Vec<Observable<f64>> = (1..=30).map(|i| Observable::HitBy { target: 0, t: 0.25 * i as f64 }).collect();
    let est = estimate(&m, 3, &obs, SimConfig::new(20_000, 66).unwrap()).unwrap();
    for w in est.windows(2) {
        assert!(w[1].count >= w[0].count, "{} then {}", w[0].observable, w[1].observable);
    }
    assert!(est.last().unwrap().count > est[0].count);
}
