//! Asymptotic breakdown-point lower bounds and empirical breakdown detection.
//!
//! The theoretical bound is the root in `(0, 1)` of
//!
//! ```text
//! (C/a) x^{1+a} + q_a(1 − x) L0 = 0,
//! ```
//!
//! capped at 1/2, where `L0 = n^{-1} Σ_i ∫ g_i^{1+a}` averages the power
//! norms of the true densities and `C` bounds the limiting average power
//! norm of the contaminating sequence (`C = 1` covers any discrete
//! contamination; `C = 0` yields the maximal bound 1/2).
//!
//! The empirical side sweeps the population minimizer over a contamination
//! grid and reports where the solution leaves the neighborhood of the clean
//! parameter for the contaminant's basin.

use crate::divergence::{self, DpdConfig, UnivariateDensity};
use crate::error::{Error, Result};
use crate::estimation::OptimizerConfig;
use crate::functional::{self, IntegrationMode, Population};
use crate::models::{DesignMatrix, Model};
use crate::optim;
use crate::quad;
use crate::special::poisson_upper_cutoff;

/// Inputs of the theoretical lower-bound equation.
#[derive(Debug, Clone, Copy)]
pub struct BoundProblem {
    pub alpha: f64,
    /// Limiting average power norm of the true densities.
    pub l0: f64,
    /// Upper bound on the limiting average power norm of the contaminants.
    pub c: f64,
}

impl BoundProblem {
    /// Solve the bound equation; the result is capped at 1/2.
    pub fn abp_lower_bound(&self) -> Result<f64> {
        let BoundProblem { alpha, l0, c } = *self;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
        }
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(Error::Domain(format!("L0 must be > 0, got {l0}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("C must be >= 0, got {c}")));
        }
        let h = |x: f64| {
            c / alpha * x.powf(1.0 + alpha) + divergence::q_alpha(alpha, 1.0 - x).unwrap() * l0
        };
        // h(0) = (1 − (1+a)/a) L0 < 0 and h(1) = C/a + L0 > 0
        let root = optim::bisect(&h, 0.0, 1.0, 1e-12)?;
        Ok(root.min(0.5))
    }
}

/// `n^{-1} Σ_i ∫ f_{i,θ0}^{1+a}` over the design.
pub fn compute_l0(
    model: &Model,
    theta0: &[f64],
    design: &DesignMatrix,
    alpha: f64,
    cfg: &DpdConfig,
) -> Result<f64> {
    model.validate_theta(theta0, design.p())?;
    let mut total = 0.0;
    for x in design.rows() {
        let g = model.obs_density(theta0, x)?;
        total += divergence::power_norm(&g, alpha, cfg)?;
    }
    Ok(total / design.n() as f64)
}

/// One row of a theoretical bound sweep.
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub alpha: f64,
    pub l0: f64,
    pub bound: f64,
}

/// Evaluate the lower bound across a grid of tuning constants.
pub fn bound_sweep(
    model: &Model,
    theta0: &[f64],
    design: &DesignMatrix,
    alphas: &[f64],
    c: f64,
    cfg: &DpdConfig,
) -> Result<Vec<BoundRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let l0 = compute_l0(model, theta0, design, alpha, cfg)?;
            let bound = BoundProblem { alpha, l0, c }.abp_lower_bound()?;
            Ok(BoundRow { alpha, l0, bound })
        })
        .collect()
}

/// Monte Carlo estimate of `L0` (power norms estimated as `E_g[g^a]` from
/// draws); a cross-check on the exact computation.
pub fn compute_l0_mc(
    model: &Model,
    theta0: &[f64],
    design: &DesignMatrix,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    use rand::SeedableRng;
    if draws == 0 {
        return Err(Error::Config("Monte Carlo mode needs at least one draw".into()));
    }
    model.validate_theta(theta0, design.p())?;
    let mut total = 0.0;
    for i in 0..design.n() {
        let x = design.row(i);
        let g = model.obs_density(theta0, x)?;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(crate::seed::derive_seed(
            seed,
            &[i as u64],
        ));
        let mut acc = 0.0;
        for _ in 0..draws {
            let y = model.sample(theta0, x, &mut rng);
            acc += (alpha * g.ln_pdf(y)).exp();
        }
        total += acc / draws as f64;
    }
    Ok(total / design.n() as f64)
}

/// Evaluate the lower bound on an explicit `(alpha, L0)` grid; the carrier
/// for level-set plots of the bound surface.
pub fn bound_grid(alphas: &[f64], l0s: &[f64], c: f64) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * l0s.len());
    for &alpha in alphas {
        for &l0 in l0s {
            let bound = BoundProblem { alpha, l0, c }.abp_lower_bound()?;
            rows.push(BoundRow { alpha, l0, bound });
        }
    }
    Ok(rows)
}

/// Mass shared by two densities, `∫ min{f, k}`; equals 1 iff they coincide.
pub fn overlap_mass(f: &UnivariateDensity, k: &UnivariateDensity, cfg: &DpdConfig) -> Result<f64> {
    use UnivariateDensity::{Exponential, Poisson};
    f.validate()?;
    k.validate()?;
    match (*f, *k) {
        (Exponential { mean: p }, Exponential { mean: q }) => {
            if (p - q).abs() < 1e-14 {
                return Ok(1.0);
            }
            // the densities cross once, at v
            let v = (q.ln() - p.ln()) / (1.0 / p - 1.0 / q);
            let (wider, narrower) = if p < q { (q, p) } else { (p, q) };
            // below v the wider density is smaller; above, the narrower one
            Ok(1.0 - (-v / wider).exp() + (-v / narrower).exp())
        }
        (Poisson { mean: a }, Poisson { mean: b }) => {
            let cut = poisson_upper_cutoff(a.max(b), cfg.tail_tol);
            Ok((0..=cut)
                .map(|y| f.pdf(y as f64).min(k.pdf(y as f64)))
                .sum())
        }
        _ if !f.is_discrete() && !k.is_discrete() => {
            let (lo_f, hi_f) = window_of(f);
            let (lo_k, hi_k) = window_of(k);
            quad::integrate_with_breaks(
                &|x| f.pdf(x).min(k.pdf(x)),
                lo_f.min(lo_k),
                hi_f.max(hi_k),
                &breaks_of(f, k),
                cfg.quad_tol,
            )
        }
        _ => Err(Error::Domain(
            "overlap between discrete and continuous densities".into(),
        )),
    }
}

fn window_of(d: &UnivariateDensity) -> (f64, f64) {
    use UnivariateDensity::{Exponential, Normal, Poisson};
    match *d {
        Normal { mean, sd } => (mean - 14.0 * sd, mean + 14.0 * sd),
        Exponential { mean } => (0.0, 60.0 * mean),
        Poisson { mean } => (0.0, poisson_upper_cutoff(mean, 1e-15) as f64),
    }
}

fn breaks_of(a: &UnivariateDensity, b: &UnivariateDensity) -> Vec<f64> {
    use UnivariateDensity::{Exponential, Normal, Poisson};
    let mut pts = Vec::new();
    for d in [a, b] {
        match *d {
            Normal { mean, sd } => {
                pts.push(mean);
                for k in [1.0, 2.0, 4.0, 8.0] {
                    pts.push(mean - k * sd);
                    pts.push(mean + k * sd);
                }
            }
            Exponential { mean } => pts.extend([0.25 * mean, mean, 4.0 * mean, 16.0 * mean]),
            Poisson { .. } => {}
        }
    }
    pts
}

/// One grid point of a functional contamination sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub theta: Vec<f64>,
    pub objective: f64,
}

/// Functional minimizers along an ascending contamination grid, at one
/// tuning constant.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub alpha: f64,
    pub rows: Vec<SweepRow>,
}

/// Track the population minimizer along `eps_grid` (ascending), warm-starting
/// each grid point at the previous solution.
pub fn functional_sweep(
    base: &Population,
    design: &DesignMatrix,
    alpha: f64,
    eps_grid: &[f64],
    mode: IntegrationMode,
    opts: &OptimizerConfig,
) -> Result<SweepTable> {
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("contamination grid must be ascending".into()));
    }
    let mut rows = Vec::with_capacity(eps_grid.len());
    let mut warm: Vec<Vec<f64>> = Vec::new();
    for &eps in eps_grid {
        let pop = Population {
            eps,
            ..base.clone()
        };
        let r = functional::mdpdf(&pop, design, alpha, &warm, mode, opts)?;
        warm = vec![r.theta.clone()];
        rows.push(SweepRow {
            eps,
            theta: r.theta,
            objective: r.objective,
        });
    }
    Ok(SweepTable { alpha, rows })
}

/// Outcome of empirical breakdown detection on a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BreakdownPoint {
    /// The minimizer tracked the clean parameter across the whole grid.
    NotObserved,
    /// Smallest grid level from which the minimizer stays broken away.
    At { eps: f64 },
    /// The broken state was entered and left again; both the first entry and
    /// the start of the final sustained run are reported.
    Ambiguous { first: f64, sustained: f64 },
}

/// Detect the contamination level at which the functional breaks down.
///
/// The fitted path is compared, coordinate by coordinate, against the clean
/// parameter and an anchor representing the contaminant (the functional at
/// full contamination). Distances are normalized by the per-coordinate
/// separation of the two references (floored to guard against coordinates
/// they nearly share). A grid point counts as broken when the path is closer
/// to the anchor than to the clean parameter, or further from the clean
/// parameter than `depart_frac` of the reference separation — the latter
/// catches escapes toward a boundary (exploding scale) that approach neither
/// reference.
pub fn empirical_breakdown_point(
    sweep: &SweepTable,
    theta0: &[f64],
    anchor: &[f64],
    depart_frac: f64,
) -> Result<BreakdownPoint> {
    if sweep.rows.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    let d = theta0.len();
    if anchor.len() != d || sweep.rows.iter().any(|r| r.theta.len() != d) {
        return Err(Error::Config("parameter dimension mismatch in sweep".into()));
    }
    let scales: Vec<f64> = theta0
        .iter()
        .zip(anchor)
        .map(|(&a, &b)| {
            let floor = 0.05 * a.abs().max(b.abs()).max(1.0);
            (a - b).abs().max(floor)
        })
        .collect();
    let dist = |u: &[f64], v: &[f64]| -> f64 {
        u.iter()
            .zip(v)
            .zip(&scales)
            .map(|((&a, &b), &s)| ((a - b) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let separation = dist(theta0, anchor);
    let broken: Vec<bool> = sweep
        .rows
        .iter()
        .map(|r| {
            let d0 = dist(&r.theta, theta0);
            let dc = dist(&r.theta, anchor);
            dc < d0 || d0 > depart_frac * separation
        })
        .collect();
    let first = match broken.iter().position(|&b| b) {
        None => return Ok(BreakdownPoint::NotObserved),
        Some(i) => i,
    };
    let last_clean = broken.iter().rposition(|&b| !b);
    match last_clean {
        None => Ok(BreakdownPoint::At {
            eps: sweep.rows[first].eps,
        }),
        Some(i) if i < first => Ok(BreakdownPoint::At {
            eps: sweep.rows[first].eps,
        }),
        Some(i) if i + 1 < sweep.rows.len() => Ok(BreakdownPoint::Ambiguous {
            first: sweep.rows[first].eps,
            sustained: sweep.rows[i + 1].eps,
        }),
        // the grid ends in a clean state after an excursion
        Some(_) => Ok(BreakdownPoint::Ambiguous {
            first: sweep.rows[first].eps,
            sustained: sweep.rows.last().unwrap().eps,
        }),
    }
}

/// The anchor used by [`empirical_breakdown_point`]: the functional under
/// full contamination, i.e. the model-space projection of the contaminant.
pub fn contaminant_anchor(
    base: &Population,
    design: &DesignMatrix,
    alpha: f64,
    mode: IntegrationMode,
    opts: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let pop = Population {
        eps: 1.0,
        ..base.clone()
    };
    Ok(functional::mdpdf(&pop, design, alpha, &[], mode, opts)?.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::ContaminationScheme;
    use crate::models::{MeanFunction, ObservationFamily};
    use approx::assert_abs_diff_eq;

    #[test]
    fn bound_matches_closed_form_quadratic() {
        // alpha = 1, C = 1: x^2 + 2 L0 x − L0 = 0
        let l0 = 1.0 / 15.0;
        let b = BoundProblem {
            alpha: 1.0,
            l0,
            c: 1.0,
        }
        .abp_lower_bound()
        .unwrap();
        let exact = -l0 + (l0 * l0 + l0).sqrt();
        assert_abs_diff_eq!(b, exact, epsilon = 1e-9);
        assert_abs_diff_eq!(b, 0.2, epsilon = 1e-9);
    }

    #[test]
    fn zero_c_gives_half() {
        for &alpha in &[0.1, 0.5, 1.0] {
            let b = BoundProblem {
                alpha,
                l0: 0.3,
                c: 0.0,
            }
            .abp_lower_bound()
            .unwrap();
            // root 1/(1+a) >= 1/2 on (0, 1], so the cap binds
            assert_abs_diff_eq!(b, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn bound_decreases_in_alpha_with_discrete_contamination() {
        let model = Model::new(ObservationFamily::Poisson, MeanFunction::Linear);
        let design = DesignMatrix::new(
            (0..50).map(|i| vec![4.0 * i as f64 / 49.0]).collect(),
        )
        .unwrap();
        let cfg = DpdConfig::default();
        let alphas = [0.05, 0.2, 0.5, 1.0];
        let rows = bound_sweep(&model, &[1.0, 1.0], &design, &alphas, 1.0, &cfg).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].bound > w[1].bound, "{:?}", rows);
        }
        assert!(rows[0].bound < 0.5 && rows[0].bound > 0.4);
    }

    #[test]
    fn l0_constant_design_equals_power_norm() {
        let model = Model::new(ObservationFamily::Normal, MeanFunction::Linear);
        let design = DesignMatrix::new(vec![vec![1.0]; 7]).unwrap();
        let cfg = DpdConfig::default();
        let alpha = 0.7;
        let l0 = compute_l0(&model, &[2.0, 3.0, 1.5], &design, alpha, &cfg).unwrap();
        let g = UnivariateDensity::Normal { mean: 5.0, sd: 1.5 };
        assert_abs_diff_eq!(
            l0,
            divergence::power_norm(&g, alpha, &cfg).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn exponential_overlap_matches_quadrature() {
        let cfg = DpdConfig::default();
        let f = UnivariateDensity::Exponential { mean: 2.0 };
        let k = UnivariateDensity::Exponential { mean: 7.0 };
        let closed = overlap_mass(&f, &k, &cfg).unwrap();
        let numeric = quad::integrate(&|x| f.pdf(x).min(k.pdf(x)), 0.0, 500.0, 1e-12).unwrap();
        assert_abs_diff_eq!(closed, numeric, epsilon = 1e-8);
        assert!(closed < 1.0 && closed > 0.0);
        // symmetric, and 1 on coincident densities
        assert_abs_diff_eq!(closed, overlap_mass(&k, &f, &cfg).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(overlap_mass(&f, &f, &cfg).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_overlap_bounded() {
        let cfg = DpdConfig::default();
        let f = UnivariateDensity::Poisson { mean: 3.0 };
        let k = UnivariateDensity::Poisson { mean: 11.0 };
        let v = overlap_mass(&f, &k, &cfg).unwrap();
        assert!(v > 0.0 && v < 0.5, "overlap {v}");
    }

    fn fake_sweep(path: &[(f64, [f64; 2])]) -> SweepTable {
        SweepTable {
            alpha: 1.0,
            rows: path
                .iter()
                .map(|&(eps, t)| SweepRow {
                    eps,
                    theta: t.to_vec(),
                    objective: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn detector_sustained_jump() {
        let t0 = [0.0, 0.0];
        let tc = [10.0, 10.0];
        let sweep = fake_sweep(&[
            (0.1, [0.1, 0.0]),
            (0.2, [0.3, 0.2]),
            (0.3, [9.8, 9.9]),
            (0.4, [10.0, 10.0]),
        ]);
        let bp = empirical_breakdown_point(&sweep, &t0, &tc, 0.75).unwrap();
        assert_eq!(bp, BreakdownPoint::At { eps: 0.3 });
    }

    #[test]
    fn detector_departure_without_capture() {
        // escapes toward neither reference (e.g. exploding scale)
        let t0 = [0.0, 1.0];
        let tc = [10.0, 1.0];
        let sweep = fake_sweep(&[(0.1, [0.2, 1.0]), (0.2, [0.0, 30.0]), (0.3, [0.0, 80.0])]);
        let bp = empirical_breakdown_point(&sweep, &t0, &tc, 0.75).unwrap();
        assert_eq!(bp, BreakdownPoint::At { eps: 0.2 });
    }

    #[test]
    fn detector_flip_back_is_ambiguous() {
        let t0 = [0.0, 0.0];
        let tc = [10.0, 10.0];
        let sweep = fake_sweep(&[
            (0.1, [0.0, 0.0]),
            (0.2, [9.9, 9.9]),
            (0.3, [0.1, 0.0]),
            (0.4, [10.0, 10.0]),
        ]);
        let bp = empirical_breakdown_point(&sweep, &t0, &tc, 0.75).unwrap();
        assert_eq!(
            bp,
            BreakdownPoint::Ambiguous {
                first: 0.2,
                sustained: 0.4
            }
        );
    }

    #[test]
    fn detector_clean_path() {
        let t0 = [0.0, 0.0];
        let tc = [10.0, 10.0];
        let sweep = fake_sweep(&[(0.1, [0.0, 0.1]), (0.2, [0.2, 0.1])]);
        let bp = empirical_breakdown_point(&sweep, &t0, &tc, 0.75).unwrap();
        assert_eq!(bp, BreakdownPoint::NotObserved);
    }

    #[test]
    fn slr_sweep_tracks_then_jumps() {
        // a coarse sweep at alpha = 1: the minimizer holds near the truth at
        // low contamination and sits in the contaminant basin at high levels
        let model = Model::new(ObservationFamily::Normal, MeanFunction::Linear);
        let base = Population {
            model,
            theta0: vec![35.0, 1.0, 1.2],
            contaminant: ContaminationScheme::all_rows(model, vec![50.0, 2.0, 0.5]),
            eps: 0.0,
        };
        let design = DesignMatrix::new(
            (0..12).map(|i| vec![20.0 + 5.0 * i as f64]).collect(),
        )
        .unwrap();
        let sweep = functional_sweep(
            &base,
            &design,
            1.0,
            &[0.1, 0.3, 0.7],
            IntegrationMode::Exact,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!((sweep.rows[0].theta[1] - 1.0).abs() < 0.05, "{:?}", sweep.rows[0]);
        assert!((sweep.rows[2].theta[1] - 2.0).abs() < 0.05, "{:?}", sweep.rows[2]);
    }
}
