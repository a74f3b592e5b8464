use sabr_core::cev::{absorption_prob, cev_sample, cev_survival, islah_sample, CevParams};
use sabr_core::summation::{mean, sample_stdev};
use sabr_core::RngStream;

fn draws(params: &CevParams, n: usize, seed: u64) -> Vec<f64> {
    let mut s = RngStream::new(seed, 0);
    (0..n).map(|_| cev_sample(&mut s, params)).collect()
}

/// Largest gap between the empirical and exact CDF over the positive draws,
/// checked at every `stride`-th order statistic.
fn survival_gap(mut xs: Vec<f64>, params: &CevParams, stride: usize) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let first = xs.partition_point(|&x| x <= 0.0);
    (first..xs.len())
        .step_by(stride)
        .map(|i| {
            let c = 1.0 - cev_survival(xs[i], params).unwrap();
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampler_matches_closed_form() {
    let n = 400_000;
    let triples = [(0.3, 1.0, 0.36), (0.5, 0.05, 0.004), (0.8, 1.0, 0.2)];
    for (i, &(beta, f, v)) in triples.iter().enumerate() {
        let p = CevParams::new(beta, f, v).unwrap();
        let xs = draws(&p, n, 30 + i as u64);
        let absorbed = xs.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64;
        let pa = absorption_prob(&p).unwrap();
        let bin_sd = (pa * (1.0 - pa) / n as f64).sqrt().max(1.0 / n as f64);
        assert!((absorbed - pa).abs() < 4.0 * bin_sd, "{i}: absorbed {absorbed} vs {pa}");
        let se = sample_stdev(&xs).unwrap() / (n as f64).sqrt();
        assert!((mean(&xs) - f).abs() < 4.0 * se, "{i}: mean {}", mean(&xs));
        let gap = survival_gap(xs, &p, 20);
        assert!(gap < 0.004, "{i}: gap {gap}");
    }
}

#[test]
fn mean_is_preserved_in_heavy_absorption() {
    // β* small: z0 is tiny, most paths die, survivors carry the mean
    let p = CevParams::new(0.2, 0.05, 0.5).unwrap();
    let n = 400_000;
    let xs = draws(&p, n, 40);
    assert!(absorption_prob(&p).unwrap() > 0.5);
    let se = sample_stdev(&xs).unwrap() / (n as f64).sqrt();
    assert!((mean(&xs) - 0.05).abs() < 4.0 * se);
}

#[test]
fn islah_law_is_a_power_of_cev() {
    // F^{β*} under the Islah draw is an affine image of Y^{β*'} with Y CEV.
    let (beta, rho, f, d, v): (f64, f64, f64, f64, f64) = (0.4, -0.5, 1.0, 0.03, 0.2);
    let bs = 1.0 - beta;
    let denom = 1.0 - bs * rho * rho;
    let (beta_p, bs_p) = (beta / denom, bs * (1.0 - rho * rho) / denom);
    let ratio = bs_p / bs;
    let mean_p = (ratio * (f.powf(bs) + d)).powf(1.0 / bs_p);
    let inner = CevParams::new(beta_p, mean_p, v).unwrap();
    let n = 200_000;
    let mut s = RngStream::new(41, 0);
    let mut xs: Vec<f64> = (0..n)
        .map(|_| islah_sample(&mut s, beta, rho, f, d, v).unwrap())
        .collect();
    xs.sort_by(f64::total_cmp);
    let first = xs.partition_point(|&x| x <= 0.0);
    let nf = n as f64;
    let mut gap: f64 = 0.0;
    for i in (first..n).step_by(50) {
        let y = (ratio * xs[i].powf(bs)).powf(1.0 / bs_p);
        let c = 1.0 - cev_survival(y, &inner).unwrap();
        gap = gap.max((c - i as f64 / nf).abs());
    }
    assert!(gap < 0.006, "{gap}");
}
