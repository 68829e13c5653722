//! Density power divergence between univariate densities.
//!
//! For tuning constant `alpha > 0` the divergence between a data density `g`
//! and a model density `f` is
//!
//! ```text
//! d_a(g, f) = ∫ f^{1+a} − (1 + 1/a) ∫ f^a g + (1/a) ∫ g^{1+a},
//! ```
//!
//! which tends to the Kullback-Leibler divergence ∫ g ln(g/f) as `a → 0`.
//! Closed forms are used for the normal, exponential and Poisson families;
//! everything else falls back to adaptive quadrature (continuous pairs) or
//! truncated sums (discrete pairs).

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{poisson_ln_pmf, poisson_upper_cutoff};

/// Numerical settings for quadrature / series fallbacks.
#[derive(Debug, Clone, Copy)]
pub struct DpdConfig {
    /// Absolute tolerance for adaptive quadrature.
    pub quad_tol: f64,
    /// Tail mass tolerance for Poisson truncation.
    pub tail_tol: f64,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-11,
            tail_tol: 1e-13,
        }
    }
}

/// A univariate density from one of the supported observation families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnivariateDensity {
    /// Normal with the given mean and standard deviation.
    Normal { mean: f64, sd: f64 },
    /// Exponential parameterized by its mean.
    Exponential { mean: f64 },
    /// Poisson with the given mean.
    Poisson { mean: f64 },
}

use UnivariateDensity::{Exponential, Normal, Poisson};

impl UnivariateDensity {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Exponential { mean } | Poisson { mean } => mean.is_finite() && mean > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Poisson { .. })
    }

    /// Density (or PMF) at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Exponential { mean } => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x / mean).exp() / mean
                }
            }
            Poisson { mean } => {
                if x < 0.0 || x.fract() != 0.0 {
                    0.0
                } else {
                    poisson_ln_pmf(mean, x as u64).exp()
                }
            }
        }
    }

    /// Log density (or log PMF) at `x`; `-inf` off the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Exponential { mean } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x / mean - mean.ln()
                }
            }
            Poisson { mean } => {
                if x < 0.0 || x.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else {
                    poisson_ln_pmf(mean, x as u64)
                }
            }
        }
    }

    /// A finite window containing all but a negligible part of the mass.
    fn window(&self) -> (f64, f64) {
        match *self {
            Normal { mean, sd } => (mean - 14.0 * sd, mean + 14.0 * sd),
            Exponential { mean } => (0.0, 60.0 * mean),
            Poisson { mean } => (0.0, poisson_upper_cutoff(mean, 1e-15) as f64),
        }
    }
}

fn joint_window(a: &UnivariateDensity, b: &UnivariateDensity) -> (f64, f64) {
    let (la, ha) = a.window();
    let (lb, hb) = b.window();
    (la.min(lb), ha.max(hb))
}

/// Locations where either density varies quickly; used to seed refinement.
fn joint_breaks(a: &UnivariateDensity, b: &UnivariateDensity) -> Vec<f64> {
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

/// The power norm `∫ f^{1+a}` (sum for discrete families). Equals 1 at `a = 0`.
pub fn power_norm(f: &UnivariateDensity, alpha: f64, cfg: &DpdConfig) -> Result<f64> {
    f.validate()?;
    check_alpha(alpha)?;
    match *f {
        Normal { sd, .. } => Ok((2.0 * std::f64::consts::PI).powf(-0.5 * alpha)
            / (1.0 + alpha).sqrt()
            / sd.powf(alpha)),
        Exponential { mean } => Ok(1.0 / ((1.0 + alpha) * mean.powf(alpha))),
        Poisson { mean } => {
            if alpha == 0.0 {
                return Ok(1.0);
            }
            let cut = poisson_upper_cutoff(mean, cfg.tail_tol);
            Ok((0..=cut)
                .map(|y| ((1.0 + alpha) * poisson_ln_pmf(mean, y)).exp())
                .sum())
        }
    }
}

/// The cross moment `∫ f^a g` of a model density `f` against a data density
/// `g` (power on the first argument). Equals 1 at `a = 0`.
pub fn cross_moment(
    f: &UnivariateDensity,
    g: &UnivariateDensity,
    alpha: f64,
    cfg: &DpdConfig,
) -> Result<f64> {
    f.validate()?;
    g.validate()?;
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    match (*f, *g) {
        (
            Normal {
                mean: mf, sd: sf, ..
            },
            Normal { mean: mg, sd: sg },
        ) => Ok(gaussian_cross_moment(mg, sg, mf, sf, alpha)),
        (Exponential { mean: p }, Exponential { mean: b }) => {
            Ok(p.powf(1.0 - alpha) / (alpha * b + p))
        }
        (Poisson { .. }, Poisson { mean: mg }) => {
            let cut = poisson_upper_cutoff(mg.max(poisson_mean(f)), cfg.tail_tol);
            Ok((0..=cut)
                .map(|y| {
                    (alpha * poisson_ln_pmf(poisson_mean(f), y) + poisson_ln_pmf(mg, y)).exp()
                })
                .sum())
        }
        _ if !f.is_discrete() && !g.is_discrete() => {
            let (lo, hi) = joint_window(f, g);
            quad::integrate_with_breaks(
                &|x| f.pdf(x).powf(alpha) * g.pdf(x),
                lo,
                hi,
                &joint_breaks(f, g),
                cfg.quad_tol,
            )
        }
        _ => Err(Error::Domain(
            "cross moment between discrete and continuous densities".into(),
        )),
    }
}

fn poisson_mean(d: &UnivariateDensity) -> f64 {
    match *d {
        Poisson { mean } => mean,
        _ => unreachable!(),
    }
}

/// `∫ φ_{mu1,s1}(x) φ_{mu2,s2}(x)^a dx` in closed form.
pub fn gaussian_cross_moment(mu1: f64, s1: f64, mu2: f64, s2: f64, alpha: f64) -> f64 {
    let denom = alpha * s1 * s1 + s2 * s2;
    (2.0 * std::f64::consts::PI).powf(-0.5 * alpha) * s2.powf(1.0 - alpha) / denom.sqrt()
        * (-0.5 * alpha * (mu1 - mu2).powi(2) / denom).exp()
}

/// Density power divergence `d_a(g, f)`; the KL divergence when `a = 0`.
pub fn dpd(g: &UnivariateDensity, f: &UnivariateDensity, alpha: f64, cfg: &DpdConfig) -> Result<f64> {
    f.validate()?;
    g.validate()?;
    check_alpha(alpha)?;
    if f.is_discrete() != g.is_discrete() {
        return Err(Error::Domain(
            "divergence between discrete and continuous densities".into(),
        ));
    }
    if alpha == 0.0 {
        return kl(g, f, cfg);
    }
    let mf = power_norm(f, alpha, cfg)?;
    let mg = power_norm(g, alpha, cfg)?;
    let cross = cross_moment(f, g, alpha, cfg)?;
    let v = mf - (1.0 + 1.0 / alpha) * cross + mg / alpha;
    // The divergence is nonnegative; clamp roundoff at coincident densities.
    Ok(v.max(0.0))
}

fn kl(g: &UnivariateDensity, f: &UnivariateDensity, cfg: &DpdConfig) -> Result<f64> {
    match (*g, *f) {
        (Normal { mean: mg, sd: sg }, Normal { mean: mf, sd: sf }) => Ok((sf / sg).ln()
            + (sg * sg + (mg - mf).powi(2)) / (2.0 * sf * sf)
            - 0.5),
        (Exponential { mean: pg }, Exponential { mean: pf }) => {
            Ok((pf / pg).ln() + pg / pf - 1.0)
        }
        (Poisson { mean: a }, Poisson { mean: b }) => Ok(a * (a / b).ln() - a + b),
        _ if !g.is_discrete() && !f.is_discrete() => {
            let (lo, hi) = joint_window(g, f);
            let v = quad::integrate_with_breaks(
                &|x| {
                    let gx = g.pdf(x);
                    if gx <= 0.0 {
                        0.0
                    } else {
                        gx * (gx.ln() - f.pdf(x).ln())
                    }
                },
                lo,
                hi,
                &joint_breaks(g, f),
                cfg.quad_tol,
            )?;
            Ok(v.max(0.0))
        }
        _ => Err(Error::Domain(
            "divergence between discrete and continuous densities".into(),
        )),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")))
    } else {
        Ok(())
    }
}

/// The constant `q_a(e) = 1 − ((1+a)/a) e` from the breakdown bound.
pub fn q_alpha(alpha: f64, eps: f64) -> Result<f64> {
    check_positive_alpha(alpha)?;
    check_eps(eps)?;
    Ok(1.0 - (1.0 + alpha) / alpha * eps)
}

/// The constant `r_a(e) = q_a(e) + e^{1+a}/a` from the breakdown bound.
pub fn r_alpha(alpha: f64, eps: f64) -> Result<f64> {
    Ok(q_alpha(alpha, eps)? + eps.powf(1.0 + alpha) / alpha)
}

fn check_positive_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        Err(Error::Domain(format!("alpha must be > 0, got {alpha}")))
    } else {
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        Err(Error::Domain(format!(
            "contamination level must lie in [0, 1], got {eps}"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    // Independent composite-Simpson oracle used to pin the closed forms.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn normal_power_norm_matches_simpson() {
        let cfg = DpdConfig::default();
        let f = Normal { mean: 35.0, sd: 1.2 };
        for &a in &[0.1, 0.5, 1.0] {
            let oracle = simpson(|x| f.pdf(x).powf(1.0 + a), 35.0 - 20.0, 35.0 + 20.0, 20_000);
            assert_relative_eq!(power_norm(&f, a, &cfg).unwrap(), oracle, max_relative = 1e-10);
        }
    }

    #[test]
    fn exponential_power_norm_matches_simpson() {
        let cfg = DpdConfig::default();
        let f = Exponential { mean: 2.5 };
        for &a in &[0.1, 0.5, 1.0] {
            let oracle = simpson(|x| f.pdf(x).powf(1.0 + a), 0.0, 120.0, 400_000);
            assert_relative_eq!(power_norm(&f, a, &cfg).unwrap(), oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn gaussian_cross_moment_matches_simpson() {
        let oracle = simpson(
            |x| {
                let g = Normal { mean: 50.0, sd: 0.5 };
                let f = Normal { mean: 47.0, sd: 1.2 };
                g.pdf(x) * f.pdf(x).powf(0.7)
            },
            30.0,
            70.0,
            40_000,
        );
        assert_relative_eq!(
            gaussian_cross_moment(50.0, 0.5, 47.0, 1.2, 0.7),
            oracle,
            max_relative = 1e-10
        );
    }

    #[test]
    fn exponential_cross_moment_matches_simpson() {
        let cfg = DpdConfig::default();
        let f = Exponential { mean: 2.0 };
        let g = Exponential { mean: 5.0 };
        let oracle = simpson(|x| f.pdf(x).powf(0.5) * g.pdf(x), 0.0, 300.0, 600_000);
        assert_relative_eq!(
            cross_moment(&f, &g, 0.5, &cfg).unwrap(),
            oracle,
            max_relative = 1e-8
        );
    }

    #[test]
    fn poisson_divergence_self_is_zero() {
        let cfg = DpdConfig::default();
        let f = Poisson { mean: 6.0 };
        for &a in &[0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(dpd(&f, &f, a, &cfg).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kl_limit_of_dpd() {
        // d_a -> KL as a -> 0 for a separated normal pair
        let cfg = DpdConfig::default();
        let g = Normal { mean: 1.0, sd: 1.5 };
        let f = Normal { mean: 0.0, sd: 1.0 };
        let kl0 = dpd(&g, &f, 0.0, &cfg).unwrap();
        let near = dpd(&g, &f, 1e-6, &cfg).unwrap();
        assert_abs_diff_eq!(near, kl0, epsilon = 1e-4);
        // closed-form KL for this pair
        let exact = (1.0f64 / 1.5).ln() + (1.5f64.powi(2) + 1.0) / 2.0 - 0.5;
        assert_abs_diff_eq!(kl0, exact, epsilon = 1e-12);
    }

    #[test]
    fn mixed_support_rejected() {
        let cfg = DpdConfig::default();
        let g = Poisson { mean: 3.0 };
        let f = Normal { mean: 3.0, sd: 1.0 };
        assert!(matches!(dpd(&g, &f, 0.5, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn q_and_r_known_values() {
        // q_1(0.25) = 1 - 2*0.25 = 0.5; r adds 0.25^2 / 1
        assert_abs_diff_eq!(q_alpha(1.0, 0.25).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r_alpha(1.0, 0.25).unwrap(), 0.5625, epsilon = 1e-15);
        assert!(q_alpha(0.0, 0.1).is_err());
        assert!(q_alpha(0.5, 1.5).is_err());
    }

    fn arb_density() -> impl Strategy<Value = UnivariateDensity> {
        prop_oneof![
            ((-5.0..5.0f64), (0.2..3.0f64)).prop_map(|(m, s)| Normal { mean: m, sd: s }),
            (0.2..8.0f64).prop_map(|m| Exponential { mean: m }),
            (0.2..15.0f64).prop_map(|m| Poisson { mean: m }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn divergence_nonnegative(g in arb_density(), f in arb_density(), a in 0.0..1.5f64) {
            if g.is_discrete() == f.is_discrete() {
                let v = dpd(&g, &f, a, &DpdConfig::default()).unwrap();
                prop_assert!(v >= 0.0 && v.is_finite());
            }
        }

        #[test]
        fn power_norm_at_zero_is_one(f in arb_density()) {
            let v = power_norm(&f, 0.0, &DpdConfig::default()).unwrap();
            prop_assert!((v - 1.0).abs() < 1e-12);
        }

        #[test]
        fn r_minus_q_identity(a in 0.05..2.0f64, e in 0.0..1.0f64) {
            let q = q_alpha(a, e).unwrap();
            let r = r_alpha(a, e).unwrap();
            prop_assert!((r - q - e.powf(1.0 + a) / a).abs() < 1e-12);
        }
    }
}
