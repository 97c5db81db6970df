//! Small numeric helpers shared across the crate: log-domain arithmetic,
//! log-binomials, moment accumulators, and a subset iterator.

use statrs::function::gamma::ln_gamma;

/// log(exp(a) + exp(b)), safe for -inf operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(sum_i exp(x_i)); -inf for an empty slice or all -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// log|exp(a) - exp(b)|; -inf when a == b.
pub fn log_abs_diff_exp(a: f64, b: f64) -> f64 {
    if a == b {
        return f64::NEG_INFINITY;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    // |e^hi - e^lo| = e^hi (1 - e^{lo-hi})
    hi + (-(lo - hi).exp()).ln_1p()
}

pub fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// log of the binomial coefficient C(n, k).
pub fn ln_choose(n: usize, k: usize) -> f64 {
    assert!(k <= n, "ln_choose requires k <= n");
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// C(n, k) as f64, saturating to +inf for large arguments.
pub fn choose_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ln_choose(n, k).exp()
}

/// Sample mean; NaN for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance ((n-1)-denominator); 0 for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    sample_variance(xs).sqrt()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Visit every k-subset of {0, .., n-1} in lexicographic order.
///
/// The callback receives the current index set; it must copy what it needs.
pub fn for_each_combination<F: FnMut(&[usize])>(n: usize, k: usize, mut visit: F) {
    if k > n {
        return;
    }
    if k == 0 {
        visit(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // advance: find rightmost index that can move
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_add_exp_matches_direct() {
        assert_relative_eq!(log_add_exp(0.0, 0.0), 2.0_f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(
            log_add_exp((0.3_f64).ln(), (0.2_f64).ln()),
            (0.5_f64).ln(),
            epsilon = 1e-14
        );
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -1.5), -1.5);
        assert_eq!(
            log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log_abs_diff_exp_matches_direct() {
        assert_relative_eq!(
            log_abs_diff_exp((0.5_f64).ln(), (0.2_f64).ln()),
            (0.3_f64).ln(),
            epsilon = 1e-12
        );
        assert_eq!(log_abs_diff_exp(-1.0, -1.0), f64::NEG_INFINITY);
        assert_relative_eq!(
            log_abs_diff_exp(f64::NEG_INFINITY, (0.25_f64).ln()),
            (0.25_f64).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn ln_choose_exact_small_values() {
        assert_relative_eq!(ln_choose(4, 2).exp(), 6.0, epsilon = 1e-10);
        assert_relative_eq!(ln_choose(10, 3).exp(), 120.0, epsilon = 1e-9);
        // C(49,13) = 262596783764
        assert_relative_eq!(
            ln_choose(49, 13),
            (262596783764.0_f64).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn combination_iterator_counts() {
        let mut seen = Vec::new();
        for_each_combination(5, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        // all distinct, all strictly increasing
        for c in &seen {
            assert!(c.windows(2).all(|w| w[0] < w[1]));
        }

        let mut count = 0;
        for_each_combination(6, 6, |_| count += 1);
        assert_eq!(count, 1);
        let mut count0 = 0;
        for_each_combination(4, 0, |c| {
            assert!(c.is_empty());
            count0 += 1;
        });
        assert_eq!(count0, 1);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(quantile(&xs, 0.0), 1.0);
        assert_relative_eq!(quantile(&xs, 1.0), 4.0);
        assert_relative_eq!(quantile(&xs, 0.5), 2.5);
    }
}
