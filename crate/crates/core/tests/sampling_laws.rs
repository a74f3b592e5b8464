use sabr_core::numerics::{norm_cdf, reg_gamma_lower, reg_gamma_upper};
use sabr_core::sampling::{
    sample_gamma, sample_gamma_conditional_lt, sample_normal, sample_poisson,
    sample_shifted_poisson, sample_uniform, SpParams,
};
use sabr_core::summation::{mean, sample_stdev};
use sabr_core::RngStream;

/// Kolmogorov distance between the sample and a continuous CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

// 99.9% Kolmogorov quantile is 1.95/√n.
fn ks_bound(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn uniform_and_normal_laws() {
    let n = 100_000;
    let mut s = RngStream::new(11, 0);
    let u: Vec<f64> = (0..n).map(|_| sample_uniform(&mut s)).collect();
    assert!(u.iter().all(|&x| x > 0.0 && x < 1.0));
    assert!(ks_distance(u, |x| x) < ks_bound(n));
    let z: Vec<f64> = (0..n).map(|_| sample_normal(&mut s)).collect();
    assert!(ks_distance(z, norm_cdf) < ks_bound(n));
}

#[test]
fn gamma_law_across_shapes() {
    let n = 100_000;
    for (i, &shape) in [0.2, 0.5, 0.714_285_714, 1.0, 3.5, 40.0].iter().enumerate() {
        let mut s = RngStream::new(12, i as u64);
        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(&mut s, shape).unwrap()).collect();
        let d = ks_distance(xs, |x| reg_gamma_lower(x, shape).unwrap());
        assert!(d < ks_bound(n), "shape {shape}: {d}");
    }
    let mut s = RngStream::new(12, 99);
    assert!(sample_gamma(&mut s, 0.0).is_err());
    assert!(sample_gamma(&mut s, f64::NAN).is_err());
}

#[test]
fn poisson_law_chi_square() {
    let n = 200_000;
    for (i, &lambda) in [0.3, 2.5, 17.0, 250.0].iter().enumerate() {
        let mut s = RngStream::new(13, i as u64);
        let draws: Vec<u64> = (0..n).map(|_| sample_poisson(&mut s, lambda).unwrap()).collect();
        let cdf = |k: i64| -> f64 {
            if k < 0 {
                0.0
            } else {
                reg_gamma_upper(lambda, k as f64 + 1.0).unwrap()
            }
        };
        // bins of expected count >= 50, tails merged
        let lo = draws.iter().copied().min().unwrap() as i64;
        let hi = draws.iter().copied().max().unwrap() as i64;
        let mut edges = vec![lo - 1];
        let mut last = cdf(lo - 1);
        for k in lo..hi {
            if (cdf(k) - last) * n as f64 >= 50.0 && (1.0 - cdf(k)) * n as f64 >= 50.0 {
                edges.push(k);
                last = cdf(k);
            }
        }
        edges.push(i64::MAX);
        let mut chi2 = 0.0;
        let mut tv = 0.0;
        for w in edges.windows(2) {
            let p = if w[1] == i64::MAX { 1.0 - cdf(w[0]) } else { cdf(w[1]) - cdf(w[0]) };
            let observed = draws
                .iter()
                .filter(|&&k| (k as i64) > w[0] && (k as i64) <= w[1])
                .count() as f64;
            let expected = p * n as f64;
            chi2 += (observed - expected).powi(2) / expected;
            tv += 0.5 * (observed / n as f64 - p).abs();
        }
        let dof = (edges.len() - 2) as f64;
        // mean + 5 sd of a chi-square
        assert!(chi2 < dof + 5.0 * (2.0 * dof).sqrt(), "lambda {lambda}: chi2 {chi2} dof {dof}");
        assert!(tv < 0.01, "lambda {lambda}: tv {tv}");
    }
    let mut s = RngStream::new(13, 9);
    assert_eq!(sample_poisson(&mut s, 0.0).unwrap(), 0);
    assert!(sample_poisson(&mut s, -1.0).is_err());
}

#[test]
fn shifted_poisson_mean() {
    let n = 200_000;
    for (i, &(lambda, shift)) in [(2.0, 0.7), (10.0, 1.5), (0.8, 0.714)].iter().enumerate() {
        let p = SpParams::new(lambda, shift).unwrap();
        let mut s = RngStream::new(14, i as u64);
        let xs: Vec<f64> = (0..n).map(|_| sample_shifted_poisson(&mut s, p) as f64).collect();
        // E[λ - X | X < λ] for X ~ G(shift)
        let cond_x = shift * reg_gamma_lower(lambda, shift + 1.0).unwrap()
            / reg_gamma_lower(lambda, shift).unwrap();
        let expect = lambda - cond_x;
        let se = sample_stdev(&xs).unwrap() / (n as f64).sqrt();
        assert!((mean(&xs) - expect).abs() < 4.0 * se, "{} vs {expect}", mean(&xs));
    }
    assert!(SpParams::new(0.0, 1.0).is_err());
    assert!(SpParams::new(1.0, 0.0).is_err());
}

#[test]
fn conditional_gamma_acceptance_rate() {
    let n = 200_000;
    let (shape, bound) = (0.714_285_714, 0.9);
    let mut s = RngStream::new(15, 0);
    let hits = (0..n)
        .filter(|_| sample_gamma_conditional_lt(&mut s, shape, bound).unwrap().is_some())
        .count() as f64;
    let p = reg_gamma_lower(bound, shape).unwrap();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((hits / n as f64 - p).abs() < 4.0 * sigma);
    assert!(sample_gamma_conditional_lt(&mut s, shape, 0.0).is_err());
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let draw = |seed, id| {
        let mut s = RngStream::new(seed, id);
        (0..8).map(|_| sample_uniform(&mut s).to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(draw(1, 2), draw(1, 2));
    assert_ne!(draw(1, 2), draw(1, 3));
    assert_ne!(draw(1, 2), draw(2, 2));
}
