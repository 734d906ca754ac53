use rand::Rng;
use svdro_core::rng::stream;

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation; zero for a single value.
pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn variance(xs: &[f64]) -> Option<f64> {
    std_dev(xs).map(|s| s * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`. Needs two distinct `x` values.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fraction of paired bootstrap resamples in which the per-group means are
/// non-decreasing in group order.
///
/// `samples[g][t]` is group g's value on trial t, `None` when the trial has
/// no value (a failed trial has no completion time). A resample in which a
/// group has no values counts against the ordering.
pub fn ordering_confidence(samples: &[Vec<Option<f64>>], resamples: usize, seed: u64) -> f64 {
    let trials = samples.first().map_or(0, |g| g.len());
    if trials == 0 || resamples == 0 || samples.iter().any(|g| g.len() != trials) {
        return 0.0;
    }
    let mut rng = stream(seed, &[]);
    let mut hits = 0;
    for _ in 0..resamples {
        let idx: Vec<usize> = (0..trials).map(|_| rng.random_range(0..trials)).collect();
        let means: Vec<Option<f64>> = samples
            .iter()
            .map(|g| mean(&idx.iter().filter_map(|&i| g[i]).collect::<Vec<_>>()))
            .collect();
        let ordered = means.iter().all(Option::is_some)
            && means.windows(2).all(|w| w[0].unwrap() <= w[1].unwrap());
        if ordered {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}
