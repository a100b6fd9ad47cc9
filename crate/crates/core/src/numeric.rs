//! Small numerical kernels shared by the estimators.

/// `log Σ exp(xᵢ)`, max-stabilised. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log((1/n) Σ exp(xᵢ))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Monte Carlo standard error of the mean by non-overlapping batch means with
/// `floor(√R)` batches of `floor(R / batches)` values; a trailing remainder is dropped.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let r = xs.len();
    if r < 4 {
        return if r < 2 { 0.0 } else { sample_std(xs) / (r as f64).sqrt() };
    }
    let batches = (r as f64).sqrt().floor() as usize;
    let size = r / batches;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(mean)
        .collect();
    sample_std(&means) / (batches as f64).sqrt()
}

/// Kish effective sample size of importance weights given as log-weights.
pub fn kish_ess_log(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(a, b), &lw| {
        let w = (lw - max).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Derive an independent 64-bit seed for stream `index` of `master` (splitmix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
