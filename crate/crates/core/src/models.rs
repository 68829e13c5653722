//! Fixed-design regression models with normal, Poisson and exponential
//! observation families.
//!
//! A model pairs a mean function evaluated on covariate rows with an
//! observation family. Normal models carry an extra scale parameter as the
//! final coordinate of the parameter vector; the count/lifetime families use
//! a log link, `mean_i = exp(eta_i)`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson as PoissonDistr, StandardNormal};

use crate::divergence::UnivariateDensity;
use crate::error::{Error, Result};

/// Covariate rows of a fixed design, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<Vec<f64>>,
    p: usize,
}

impl DesignMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || p == 0 {
            return Err(Error::Config("empty design".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Config(format!(
                    "row {i} has {} covariates, expected {p}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("non-finite covariate in row {i}")));
            }
        }
        Ok(Self { rows, p })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(Vec::as_slice)
    }
}

/// A design together with observed responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub design: DesignMatrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(design: DesignMatrix, y: Vec<f64>) -> Result<Self> {
        if design.n() != y.len() {
            return Err(Error::Config(format!(
                "design has {} rows but {} responses",
                design.n(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite response".into()));
        }
        Ok(Self { design, y })
    }

    /// Read a dataset from a CSV file with header `x1,...,xp,y`.
    ///
    /// Lines starting with `#` are treated as comments.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            .clone();
        let cols = headers.len();
        if cols < 2 || headers.iter().last() != Some("y") {
            return Err(Error::Config(format!(
                "{}: expected header x1,...,xp,y",
                path.display()
            )));
        }
        for (j, h) in headers.iter().take(cols - 1).enumerate() {
            if h != format!("x{}", j + 1) {
                return Err(Error::Config(format!(
                    "{}: column {} named {h:?}, expected x{}",
                    path.display(),
                    j + 1,
                    j + 1
                )));
            }
        }
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if rec.len() != cols {
                return Err(Error::Config(format!(
                    "{}: record {} has {} fields, expected {cols}",
                    path.display(),
                    i + 1,
                    rec.len()
                )));
            }
            let mut parsed: Vec<f64> = Vec::with_capacity(cols);
            for field in rec.iter() {
                parsed.push(field.parse().map_err(|_| {
                    Error::Config(format!(
                        "{}: record {}: not a number: {field:?}",
                        path.display(),
                        i + 1
                    ))
                })?);
            }
            y.push(parsed.pop().unwrap());
            rows.push(parsed);
        }
        Dataset::new(DesignMatrix::new(rows)?, y)
    }
}

/// How covariates map to the (link-scale) mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanFunction {
    /// `eta = t_0 + t_1 x_1 + ... + t_p x_p`.
    Linear,
    /// `eta = t_1 x_1 + ... + t_p x_p` (no intercept).
    LinearNoIntercept,
    /// `eta = t_0 x / (t_1 + x)` for a scalar covariate.
    MichaelisMenten,
}

impl MeanFunction {
    /// Number of mean parameters for a design with `p` covariates.
    pub fn n_params(&self, p: usize) -> Result<usize> {
        match self {
            MeanFunction::Linear => Ok(p + 1),
            MeanFunction::LinearNoIntercept => Ok(p),
            MeanFunction::MichaelisMenten => {
                if p == 1 {
                    Ok(2)
                } else {
                    Err(Error::Config(format!(
                        "Michaelis-Menten needs a scalar covariate, design has {p}"
                    )))
                }
            }
        }
    }

    pub fn eval(&self, theta: &[f64], x: &[f64]) -> f64 {
        match self {
            MeanFunction::Linear => {
                theta[0] + theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
            }
            MeanFunction::LinearNoIntercept => {
                theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
            }
            MeanFunction::MichaelisMenten => theta[0] * x[0] / (theta[1] + x[0]),
        }
    }

    /// Gradient of `eval` in the mean parameters.
    pub fn grad(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            MeanFunction::Linear => {
                out[0] = 1.0;
                out[1..].copy_from_slice(x);
            }
            MeanFunction::LinearNoIntercept => out.copy_from_slice(x),
            MeanFunction::MichaelisMenten => {
                let d = theta[1] + x[0];
                out[0] = x[0] / d;
                out[1] = -theta[0] * x[0] / (d * d);
            }
        }
    }
}

/// Observation family attached to the mean function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationFamily {
    /// Normal responses; the mean function gives the location and the last
    /// parameter coordinate is the common standard deviation.
    Normal,
    /// Poisson counts with `mean = exp(eta)`.
    Poisson,
    /// Exponential lifetimes with `mean = exp(eta)`.
    Exponential,
}

/// How the linear/nonlinear predictor maps to the response mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Log,
}

/// A regression model: observation family, mean structure and link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Model {
    pub family: ObservationFamily,
    pub mean: MeanFunction,
    pub link: Link,
}

impl Model {
    /// A model with the family's canonical link: identity for normal
    /// responses, log for counts and lifetimes.
    pub fn new(family: ObservationFamily, mean: MeanFunction) -> Self {
        let link = match family {
            ObservationFamily::Normal => Link::Identity,
            _ => Link::Log,
        };
        Self { family, mean, link }
    }

    /// A model whose mean is the predictor itself (no log link); used for
    /// contaminating distributions specified directly on the mean scale.
    pub fn identity_link(family: ObservationFamily, mean: MeanFunction) -> Self {
        Self {
            family,
            mean,
            link: Link::Identity,
        }
    }

    /// Total parameter dimension for a design with `p` covariates.
    pub fn dim(&self, p: usize) -> Result<usize> {
        let m = self.mean.n_params(p)?;
        Ok(match self.family {
            ObservationFamily::Normal => m + 1,
            _ => m,
        })
    }

    /// Number of mean parameters (excludes the normal scale).
    pub fn mean_dim(&self, p: usize) -> Result<usize> {
        self.mean.n_params(p)
    }

    /// Which coordinates are constrained positive (optimized on log scale).
    pub fn positivity(&self, p: usize) -> Result<Vec<bool>> {
        let d = self.dim(p)?;
        let mut mask = vec![false; d];
        if self.family == ObservationFamily::Normal {
            mask[d - 1] = true;
        }
        Ok(mask)
    }

    pub fn validate_theta(&self, theta: &[f64], p: usize) -> Result<()> {
        let d = self.dim(p)?;
        if theta.len() != d {
            return Err(Error::InvalidParameter(format!(
                "parameter has {} coordinates, model needs {d}",
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.family == ObservationFamily::Normal && theta[d - 1] <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {}",
                theta[d - 1]
            )));
        }
        Ok(())
    }

    /// Mean response at covariate row `x` (after the link).
    pub fn mean_response(&self, theta: &[f64], x: &[f64]) -> f64 {
        let eta = self.mean.eval(self.mean_part(theta), x);
        match self.link {
            Link::Identity => eta,
            Link::Log => eta.exp(),
        }
    }

    /// Gradient of the mean response in the mean parameters, written into
    /// `out` (whose length is the number of mean parameters).
    pub fn mean_grad_response(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let mp = self.mean_part(theta);
        self.mean.grad(mp, x, out);
        if self.link == Link::Log {
            let p = self.mean.eval(mp, x).exp();
            for g in out.iter_mut() {
                *g *= p;
            }
        }
    }

    fn mean_part<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        match self.family {
            ObservationFamily::Normal => &theta[..theta.len() - 1],
            _ => theta,
        }
    }

    /// The response density at covariate row `x`.
    pub fn obs_density(&self, theta: &[f64], x: &[f64]) -> Result<UnivariateDensity> {
        let d = match self.family {
            ObservationFamily::Normal => UnivariateDensity::Normal {
                mean: self.mean_response(theta, x),
                sd: theta[theta.len() - 1],
            },
            ObservationFamily::Poisson => UnivariateDensity::Poisson {
                mean: self.mean_response(theta, x),
            },
            ObservationFamily::Exponential => UnivariateDensity::Exponential {
                mean: self.mean_response(theta, x),
            },
        };
        d.validate()?;
        Ok(d)
    }

    /// Score `∂/∂θ ln f_θ(y | x)` written into `out`.
    pub fn score(&self, theta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let md = self.mean_part(theta).len();
        self.mean_grad_response(theta, x, &mut out[..md]);
        match self.family {
            ObservationFamily::Normal => {
                let mu = self.mean_response(theta, x);
                let s = theta[theta.len() - 1];
                let z = (y - mu) / s;
                for g in out[..md].iter_mut() {
                    *g *= z / s;
                }
                out[md] = (z * z - 1.0) / s;
            }
            ObservationFamily::Poisson => {
                let p = self.mean_response(theta, x);
                for g in out[..md].iter_mut() {
                    *g *= (y - p) / p;
                }
            }
            ObservationFamily::Exponential => {
                let p = self.mean_response(theta, x);
                for g in out[..md].iter_mut() {
                    *g *= (y - p) / (p * p);
                }
            }
        }
    }

    /// Draw one response at covariate row `x`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], x: &[f64], rng: &mut R) -> f64 {
        let m = self.mean_response(theta, x);
        match self.family {
            ObservationFamily::Normal => {
                let s = theta[theta.len() - 1];
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            }
            ObservationFamily::Poisson => PoissonDistr::new(m).unwrap().sample(rng),
            ObservationFamily::Exponential => {
                let e: f64 = Exp1.sample(rng);
                m * e
            }
        }
    }
}
