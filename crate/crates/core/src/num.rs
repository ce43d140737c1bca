//! Small numeric helpers shared across modules.

/// Numerically stable logistic function 1 / (1 + e^-x).
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted softmax. Invariant under adding a constant to every input.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Largest-remainder apportionment of `total` integer units proportional to
/// `weights`. Ties go to the lowest index. Non-positive weight sums yield all
/// zeros. Weights must be finite and non-negative.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let n = weights.len();
    let mut out = vec![0usize; n];
    let sum: f64 = weights.iter().sum();
    if n == 0 || total == 0 || !(sum > 0.0) {
        return out;
    }
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let target = w / sum * total as f64;
        let base = target.floor() as usize;
        out[i] = base;
        assigned += base;
        remainders.push((i, target - base as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// splitmix64 finalizer; derives independent stream seeds from (seed, salt).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softmax_normalizes_and_shift_invariant() {
        let w = softmax(&[0.3, -1.2, 2.0]);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let shifted = softmax(&[0.3 + 5.0, -1.2 + 5.0, 2.0 + 5.0]);
        for (a, b) in w.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn largest_remainder_sums_to_total() {
        let b = largest_remainder(&[1.0, 1.0, 1.0], 100);
        assert_eq!(b, vec![34, 33, 33]);
        let b = largest_remainder(&[0.5, 0.5], 5);
        assert_eq!(b, vec![3, 2]);
        assert_eq!(largest_remainder(&[1.0, 2.0], 0), vec![0, 0]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 4), vec![0, 0]);
    }

    #[test]
    fn mix_seed_varies_with_salt() {
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
