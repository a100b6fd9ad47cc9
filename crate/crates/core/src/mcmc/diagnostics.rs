use crate::error::{Error, Result};

/// Effective sample size by Geyer's initial positive sequence.
///
/// Autocorrelations are summed in adjacent pairs until a pair sum turns
/// non-positive. The result is clamped to `(0, len]`; a constant series
/// returns `len`.
pub fn effective_sample_size(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 10 {
        return Err(Error::Config(format!("ESS needs at least 10 values, got {n}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("ESS input has non-finite values".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 <= 0.0 {
        return Ok(n as f64);
    }

    let mut pair_sum_total = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        pair_sum_total += pair;
        lag += 2;
    }
    let tau = -1.0 + 2.0 * pair_sum_total;
    if tau <= 0.0 {
        return Ok(n as f64);
    }
    Ok((n as f64 / tau).min(n as f64))
}
