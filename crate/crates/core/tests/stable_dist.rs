use std::f64::consts::PI;

use fmtrack::stable_dist::{median_scale, quantile_in_place, ScaleTable, StableSampler, SCALE_SAMPLES};

/// `P(|X| <= x)` for standard p-stable X with characteristic function
/// `exp(-|t|^p)`, by Fourier inversion `(2/pi) int_0^inf sin(t x) / t e^{-t^p} dt`
/// and composite Simpson quadrature.
fn abs_cdf(x: f64, p: f64) -> f64 {
    let upper = 60f64.powf(1.0 / p);
    let n = 200_000;
    let h = upper / n as f64;
    let g = |t: f64| {
        if t == 0.0 {
            x
        } else {
            (t * x).sin() / t * (-t.powf(p)).exp()
        }
    };
    let mut sum = g(0.0) + g(upper);
    for i in 1..n {
        sum += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 / PI * sum * h / 3.0
}

fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal CDF via Simpson quadrature of the density.
fn normal_cdf(z: f64) -> f64 {
    let n = 20_000;
    let h = z / n as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut sum = phi(0.0) + phi(z);
    for i in 1..n {
        sum += phi(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + sum * h / 3.0
}

fn draws(p: f64, seed: u64, n: u64) -> Vec<f64> {
    let s = StableSampler::new(p, seed).unwrap();
    (0..n).map(|i| s.sample(i)).collect()
}

fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn cauchy_median_of_abs_is_one() {
    let mut abs: Vec<f64> = draws(1.0, 3, 1_000_000).into_iter().map(f64::abs).collect();
    let median = quantile_in_place(&mut abs, 0.5);
    assert!((median - 1.0).abs() <= 0.02, "median {median}");
}

#[test]
fn gaussian_case_has_variance_two() {
    let x = draws(2.0, 5, 1_000_000);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    assert!((var - 2.0).abs() <= 0.02, "variance {var}");
}

#[test]
fn draws_are_symmetric() {
    for p in [1.0, 1.5, 2.0] {
        let mut x = draws(p, 11, 1_000_000);
        let median = quantile_in_place(&mut x, 0.5);
        assert!(median.abs() <= 0.01, "p {p}: median {median}");
    }
}

#[test]
fn stability_closure() {
    let n = 100_000;
    for p in [1.0, 1.5, 2.0] {
        for (a, b) in [(1.0, 1.0), (0.3, -2.0)] {
            let x = draws(p, 21, n);
            let y = draws(p, 22, n);
            let z = draws(p, 23, n);
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
            let c = (f64::abs(a).powf(p) + f64::abs(b).powf(p)).powf(1.0 / p);
            let scaled: Vec<f64> = z.iter().map(|z| c * z).collect();
            let d = ks_distance(mixed, scaled);
            assert!(d < 0.01, "p {p} a {a} b {b}: KS {d}");
        }
    }
}

#[test]
fn fourier_oracle_reproduces_known_cases() {
    // p = 1: P(|X| <= 1) = 1/2 exactly; p = 2: |X| is half-normal with sigma sqrt 2
    assert!((abs_cdf(1.0, 1.0) - 0.5).abs() < 1e-7);
    let z = 0.7;
    let half_normal = 2.0 * normal_cdf(z / 2f64.sqrt()) - 1.0;
    assert!((abs_cdf(z, 2.0) - half_normal).abs() < 1e-7);
}

#[test]
fn builtin_scales_match_independent_oracles() {
    let table = ScaleTable::builtin();
    assert_eq!(table.lookup(1.0, 0.5), Some(1.0));

    let gaussian = 2f64.sqrt() * bisect(normal_cdf, 0.75, 0.0, 3.0);
    let p2 = table.lookup(2.0, 0.5).unwrap();
    assert!((p2 - gaussian).abs() < 1e-9, "{p2} vs {gaussian}");

    let p15 = table.lookup(1.5, 0.5).unwrap();
    let fourier = bisect(|x| abs_cdf(x, 1.5), 0.5, 0.1, 5.0);
    // Monte-Carlo standard error of a 1e7-sample median is about 4e-4
    assert!((p15 - fourier).abs() < 2e-3, "{p15} vs {fourier}");
}

#[test]
fn monte_carlo_scales_are_reproducible() {
    let p2 = median_scale(2.0, 0.5, SCALE_SAMPLES).unwrap();
    let analytic = ScaleTable::builtin().lookup(2.0, 0.5).unwrap();
    assert!((p2 - analytic).abs() < 2e-3, "{p2} vs {analytic}");
    assert_eq!(median_scale(1.5, 0.5, SCALE_SAMPLES).unwrap(), ScaleTable::builtin().lookup(1.5, 0.5).unwrap());
}

#[test]
fn shipped_scale_file_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/scales.txt");
    let shipped = ScaleTable::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(shipped, ScaleTable::builtin());
}
