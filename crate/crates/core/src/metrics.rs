//! Evaluation statistics: discounted returns, empirical CDFs, Jain fairness
//! and the adaptation convergence criterion.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("all-zero throughputs have no fairness index")]
    AllZero,
}

/// Discounted cumulative reward: sum of gamma^t * r_t.
pub fn cumulative_reward(rewards: &[f64], gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Step CDF of the samples: sorted unique values with cumulative fractions;
/// the fraction at the maximum sample is 1.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyInput("empirical_cdf samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = fraction,
            _ => out.push((v, fraction)),
        }
    }
    Ok(out)
}

/// Jain's fairness index (sum x)^2 / (n * sum x^2), in (0, 1].
pub fn jain_index(throughputs: &[f64]) -> Result<f64, MetricsError> {
    if throughputs.is_empty() {
        return Err(MetricsError::EmptyInput("jain_index throughputs"));
    }
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok(sum * sum / (throughputs.len() as f64 * sum_sq))
}

/// First shot (1-based) at which the trailing moving average (window 3) stays
/// within `threshold` of the trace maximum for `patience` consecutive shots;
/// the trace length if that never happens.
pub fn shots_to_converge(trace: &[f64], threshold: f64, patience: usize) -> usize {
    let n = trace.len();
    if n == 0 {
        return 0;
    }
    let max = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // threshold * max for positive maxima; the symmetric band handles traces
    // that plateau at or below zero.
    let floor = max - (1.0 - threshold) * max.abs();
    let window = 3usize;
    let moving_avg: Vec<f64> = (0..n)
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &trace[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    let patience = patience.max(1);
    'outer: for start in 0..n {
        if start + patience > n {
            break;
        }
        for j in start..start + patience {
            if moving_avg[j] < floor {
                continue 'outer;
            }
        }
        return start + 1;
    }
    n
}
