//! Small special-function helpers shared by the density code.

use once_cell::sync::Lazy;

const TABLE_LEN: usize = 16_384;

/// Cumulative log-factorial table; hot path of every Poisson PMF evaluation.
static LN_FACTORIAL: Lazy<Vec<f64>> = Lazy::new(|| {
    let mut t = vec![0.0; TABLE_LEN];
    for k in 2..TABLE_LEN {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
});

/// ln(k!) with table lookup for small k and Stirling via `ln_gamma` beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < TABLE_LEN {
        LN_FACTORIAL[k as usize]
    } else {
        statrs::function::gamma::ln_gamma(k as f64 + 1.0)
    }
}

/// log PMF of Poisson(mean) at count y.
pub fn poisson_ln_pmf(mean: f64, y: u64) -> f64 {
    (y as f64) * mean.ln() - mean - ln_factorial(y)
}

/// Upper truncation point for Poisson tail mass below `tol`.
///
/// Uses the Chernoff bound P(Y >= y) <= exp(-mean) (e*mean/y)^y for y > mean,
/// searched along y = mean + k*sqrt(mean).
pub fn poisson_upper_cutoff(mean: f64, tol: f64) -> u64 {
    let sd = mean.sqrt().max(1.0);
    let mut y = (mean + 4.0 * sd).ceil().max(8.0);
    loop {
        let yf = y;
        // ln of Chernoff bound at y
        let b = -mean + yf * (1.0 + (mean / yf).ln());
        if b < tol.ln() || yf > mean + 400.0 * sd {
            return yf as u64;
        }
        y += sd.max(1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_gamma() {
        for k in [0u64, 1, 5, 100, 20_000] {
            let expect = statrs::function::gamma::ln_gamma(k as f64 + 1.0);
            let tol = 1e-12 + 1e-12 * expect.abs();
            assert!((ln_factorial(k) - expect).abs() < tol, "k = {k}");
        }
    }

    #[test]
    fn poisson_pmf_normalizes() {
        let mean = 7.3;
        let cut = poisson_upper_cutoff(mean, 1e-14);
        let total: f64 = (0..=cut).map(|y| poisson_ln_pmf(mean, y).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");
    }

    #[test]
    fn cutoff_tail_is_small() {
        let mean = 150.0;
        let cut = poisson_upper_cutoff(mean, 1e-14);
        // mass beyond the cutoff, summed far out
        let tail: f64 = (cut + 1..cut + 2000)
            .map(|y| poisson_ln_pmf(mean, y).exp())
            .sum();
        assert!(tail < 1e-13, "tail {tail}");
    }
}
