//! Derivative-free minimization and root finding used by the fitters.

use crate::error::{Error, Result};

/// Termination settings for the simplex minimizer.
#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_iters: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    /// Rebuild the simplex around the incumbent this many times; helps the
    /// method escape narrow ridges where a single run stalls.
    pub restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            x_tol: 1e-9,
            f_tol: 1e-12,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimization with periodic restarts.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: &[f64],
    opts: &NmOptions,
) -> NmOutcome {
    assert_eq!(x0.len(), step.len());
    let mut best = NmOutcome {
        x: x0.to_vec(),
        value: f(x0),
        iterations: 0,
        converged: false,
    };
    let mut scale = 1.0;
    for _ in 0..=opts.restarts {
        let out = nm_single(f, &best.x, step, scale, opts);
        best.iterations += out.iterations;
        let improved = out.value < best.value - opts.f_tol;
        if out.value < best.value {
            best.x = out.x;
            best.value = out.value;
        }
        best.converged = out.converged;
        if !improved {
            break;
        }
        scale *= 0.25;
    }
    best
}

fn nm_single<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: &[f64],
    scale: f64,
    opts: &NmOptions,
) -> NmOutcome {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for j in 0..d {
        let mut v = x0.to_vec();
        v[j] += step[j] * scale;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;
        // order ascending by value
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ordered_v;

        let f_spread = values[d] - values[0];
        let diam = (0..d)
            .map(|j| {
                simplex
                    .iter()
                    .map(|v| v[j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max);
        if f_spread.abs() <= opts.f_tol && diam <= opts.x_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; d];
        for v in simplex.iter().take(d) {
            for j in 0..d {
                centroid[j] += v[j] / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let reflect: Vec<f64> = (0..d)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst[j]))
            .collect();
        let fr = f(&reflect);
        if fr < values[0] {
            let expand: Vec<f64> = (0..d)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[d] = expand;
                values[d] = fe;
            } else {
                simplex[d] = reflect;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflect;
            values[d] = fr;
        } else {
            let (base, fbase) = if fr < values[d] {
                (reflect.clone(), fr)
            } else {
                (worst.clone(), values[d])
            };
            let contract: Vec<f64> = (0..d)
                .map(|j| centroid[j] + rho * (base[j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < fbase {
                simplex[d] = contract;
                values[d] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=d {
                    for j in 0..d {
                        simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut besti = 0;
    for i in 1..=d {
        if values[i] < values[besti] {
            besti = i;
        }
    }
    NmOutcome {
        x: simplex[besti].clone(),
        value: values[besti],
        iterations: iters,
        converged,
    }
}

/// Bisection on a bracketing interval `[lo, hi]` with `f(lo)` and `f(hi)` of
/// opposite sign. Returns the midpoint once the bracket width falls below
/// `x_tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if !(flo.is_finite() && fhi.is_finite()) {
        return Err(Error::Numerical("non-finite endpoint value".into()));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at x = {mid}")));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < x_tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve a small dense linear system in place (partial pivoting).
pub fn solve_small(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Numerical("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= m * a[col][c];
            }
            b[r] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rosenbrock_minimum() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = nelder_mead(&mut f, &[-1.2, 1.0], &[0.5, 0.5], &NmOptions::default());
        assert_abs_diff_eq!(out.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(out.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn bisect_cubic() {
        let r = bisect(&|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert_abs_diff_eq!(r, 2f64.powf(1.0 / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn bisect_requires_bracket() {
        assert!(bisect(&|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn solve_2x2() {
        let mut a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let mut b = vec![5.0, 10.0];
        let x = solve_small(&mut a, &mut b).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }
}
