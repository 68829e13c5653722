//! TOML experiment configuration and its translation into core types.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Deserialize;

use dpdbp_core::{
    ContaminationRule, ContaminationScheme, DesignMatrix, Error, IntegrationMode, Link,
    MeanFunction, Model, ObservationFamily, OptimizerConfig, Population, Result,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional sanity tag; must match the subcommand when present.
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub theta0: Option<Vec<f64>>,
    pub contamination: Option<ContaminationConfig>,
    pub grids: Option<GridsConfig>,
    pub optimizer: Option<OptimizerOverrides>,
    pub monte_carlo: Option<MonteCarloConfig>,
    pub fit: Option<FitConfig>,
    pub simulate: Option<SimulateConfig>,
    pub bound: Option<BoundConfig>,
    pub assumptions: Option<AssumptionsConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    pub mean: String,
    pub link: Option<String>,
    pub design: DesignConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// CSV file with a `x1,...,xp` header; exclusive with `columns`.
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub columns: Option<Vec<ColumnConfig>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnConfig {
    pub kind: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationConfig {
    pub theta: Vec<f64>,
    pub family: Option<String>,
    pub mean: Option<String>,
    pub link: Option<String>,
    /// Row indices hit by contamination; every row when absent.
    pub rows: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    pub alphas: Vec<f64>,
    pub eps: Option<EpsGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum EpsGrid {
    List(Vec<f64>),
    Range { lo: f64, hi: f64, step: f64 },
}

impl EpsGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            EpsGrid::List(v) => {
                if v.is_empty() {
                    return Err(Error::Config("grids.eps must be nonempty".into()));
                }
                Ok(v.clone())
            }
            EpsGrid::Range { lo, hi, step } => {
                if !(step.is_finite() && *step > 0.0) || hi < lo {
                    return Err(Error::Config("grids.eps range is malformed".into()));
                }
                let mut v = Vec::new();
                let mut k = 0u64;
                loop {
                    let e = lo + k as f64 * step;
                    if e > hi + 1e-12 {
                        break;
                    }
                    v.push((e * 1e12).round() / 1e12);
                    k += 1;
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
    pub initial_step: Option<f64>,
    pub polish: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Dataset CSV with a `x1,...,xp,y` header.
    pub data: PathBuf,
    pub alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_reps: usize,
    pub fixed_count: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub c: f64,
    /// When present, evaluate the bound over this explicit `L0` grid instead
    /// of computing `L0` from the design.
    pub l0_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionsConfig {
    /// Overlaps are evaluated along the divergence schedule `10^m`,
    /// `m = 1..=schedule_max`.
    pub schedule_max: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub prefix: Option<String>,
    /// Optional vertical clip `[lo, hi]` applied to plots only.
    pub y_clip: Option<[f64; 2]>,
}

fn parse_family(s: &str) -> Result<ObservationFamily> {
    match s {
        "normal" => Ok(ObservationFamily::Normal),
        "poisson" => Ok(ObservationFamily::Poisson),
        "exponential" => Ok(ObservationFamily::Exponential),
        other => Err(Error::Config(format!(
            "model.family: unknown family `{other}` (expected normal | poisson | exponential)"
        ))),
    }
}

fn parse_mean(s: &str) -> Result<MeanFunction> {
    match s {
        "linear" => Ok(MeanFunction::Linear),
        "linear-no-intercept" => Ok(MeanFunction::LinearNoIntercept),
        "michaelis-menten" => Ok(MeanFunction::MichaelisMenten),
        other => Err(Error::Config(format!(
            "model.mean: unknown mean function `{other}` \
             (expected linear | linear-no-intercept | michaelis-menten)"
        ))),
    }
}

fn build_model(family: &str, mean: &str, link: Option<&str>, key: &str) -> Result<Model> {
    let family = parse_family(family)?;
    let mean = parse_mean(mean)?;
    match link {
        None | Some("canonical") => Ok(Model::new(family, mean)),
        Some("identity") => Ok(Model::identity_link(family, mean)),
        Some("log") => {
            let m = Model::new(family, mean);
            if m.link != Link::Log {
                return Err(Error::Config(format!(
                    "{key}.link: log link is not available for this family"
                )));
            }
            Ok(m)
        }
        Some(other) => Err(Error::Config(format!(
            "{key}.link: unknown link `{other}` (expected canonical | identity | log)"
        ))),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn check_kind(&self, expected: &str) -> Result<()> {
        match &self.kind {
            Some(k) if k != expected => Err(Error::Config(format!(
                "kind: config declares `{k}` but the `{expected}` command was invoked"
            ))),
            _ => Ok(()),
        }
    }

    pub fn model(&self) -> Result<Model> {
        build_model(
            &self.model.family,
            &self.model.mean,
            self.model.link.as_deref(),
            "model",
        )
    }

    /// Materialize the design, either from a file or from the column
    /// generators. `seed_override` comes from `--seed`.
    pub fn design(&self, seed_override: Option<u64>) -> Result<DesignMatrix> {
        let d = &self.model.design;
        if let Some(path) = &d.path {
            if d.columns.is_some() {
                return Err(Error::Config(
                    "model.design: give either `path` or `columns`, not both".into(),
                ));
            }
            return read_design_csv(path);
        }
        let cols = d.columns.as_ref().ok_or_else(|| {
            Error::Config("model.design: needs either `path` or `columns`".into())
        })?;
        let n = d
            .n
            .ok_or_else(|| Error::Config("model.design.n: required with generators".into()))?;
        if n == 0 || cols.is_empty() {
            return Err(Error::Config("model.design: empty generator spec".into()));
        }
        let needs_seed = cols.iter().any(|c| c.kind != "equispaced");
        let seed = match seed_override.or(d.seed) {
            Some(s) => s,
            None if needs_seed => {
                return Err(Error::Config(
                    "model.design.seed: required with random generators".into(),
                ))
            }
            None => 0,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut rows = vec![Vec::with_capacity(cols.len()); n];
        for (ci, c) in cols.iter().enumerate() {
            let key = format!("model.design.columns[{ci}]");
            match c.kind.as_str() {
                "normal" => {
                    let mean = c
                        .mean
                        .ok_or_else(|| Error::Config(format!("{key}.mean: required")))?;
                    let sd = c
                        .sd
                        .ok_or_else(|| Error::Config(format!("{key}.sd: required")))?;
                    for row in rows.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        row.push(mean + sd * z);
                    }
                }
                "uniform" => {
                    let lo = c
                        .lo
                        .ok_or_else(|| Error::Config(format!("{key}.lo: required")))?;
                    let hi = c
                        .hi
                        .ok_or_else(|| Error::Config(format!("{key}.hi: required")))?;
                    let u = Uniform::new(lo, hi);
                    for row in rows.iter_mut() {
                        row.push(u.sample(&mut rng));
                    }
                }
                "equispaced" => {
                    let lo = c
                        .lo
                        .ok_or_else(|| Error::Config(format!("{key}.lo: required")))?;
                    let hi = c
                        .hi
                        .ok_or_else(|| Error::Config(format!("{key}.hi: required")))?;
                    for (i, row) in rows.iter_mut().enumerate() {
                        let t = if n == 1 {
                            0.0
                        } else {
                            i as f64 / (n - 1) as f64
                        };
                        row.push(lo + (hi - lo) * t);
                    }
                }
                other => {
                    return Err(Error::Config(format!(
                        "{key}.kind: unknown generator `{other}` \
                         (expected normal | uniform | equispaced)"
                    )))
                }
            }
        }
        DesignMatrix::new(rows)
    }

    pub fn theta0(&self) -> Result<&[f64]> {
        self.theta0
            .as_deref()
            .ok_or_else(|| Error::Config("theta0: required for this command".into()))
    }

    pub fn contaminant(&self) -> Result<ContaminationScheme> {
        let c = self
            .contamination
            .as_ref()
            .ok_or_else(|| Error::Config("contamination: required for this command".into()))?;
        let model = build_model(
            c.family.as_deref().unwrap_or(&self.model.family),
            c.mean.as_deref().unwrap_or(&self.model.mean),
            c.link.as_deref().or(self.model.link.as_deref()),
            "contamination",
        )?;
        let rule = match &c.rows {
            None => ContaminationRule::AllRows,
            Some(rows) => ContaminationRule::Rows(rows.clone()),
        };
        Ok(ContaminationScheme {
            model,
            theta: c.theta.clone(),
            rule,
        })
    }

    pub fn population(&self) -> Result<Population> {
        Ok(Population {
            model: self.model()?,
            theta0: self.theta0()?.to_vec(),
            contaminant: self.contaminant()?,
            eps: 0.0,
        })
    }

    pub fn alphas(&self) -> Result<&[f64]> {
        let g = self
            .grids
            .as_ref()
            .ok_or_else(|| Error::Config("grids.alphas: required for this command".into()))?;
        if g.alphas.is_empty() {
            return Err(Error::Config("grids.alphas: must be nonempty".into()));
        }
        Ok(&g.alphas)
    }

    pub fn eps_grid(&self) -> Result<Vec<f64>> {
        self.grids
            .as_ref()
            .and_then(|g| g.eps.as_ref())
            .ok_or_else(|| Error::Config("grids.eps: required for this command".into()))?
            .values()
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        let mut opts = OptimizerConfig::default();
        if let Some(o) = &self.optimizer {
            if let Some(r) = o.restarts {
                opts.nm.restarts = r;
            }
            if let Some(m) = o.max_iters {
                opts.nm.max_iters = m;
            }
            if let Some(s) = o.initial_step {
                opts.initial_step = s;
            }
            if let Some(p) = o.polish {
                opts.polish = p;
            }
        }
        opts
    }

    pub fn integration_mode(&self, seed_override: Option<u64>) -> IntegrationMode {
        match &self.monte_carlo {
            Some(mc) => IntegrationMode::MonteCarlo {
                draws: mc.draws,
                seed: seed_override.unwrap_or(mc.seed),
            },
            None => IntegrationMode::Exact,
        }
    }

    pub fn prefix(&self) -> &str {
        self.output
            .as_ref()
            .and_then(|o| o.prefix.as_deref())
            .unwrap_or("experiment")
    }

    pub fn y_clip(&self) -> Option<(f64, f64)> {
        self.output
            .as_ref()
            .and_then(|o| o.y_clip)
            .map(|c| (c[0], c[1]))
    }
}

fn read_design_csv(path: &Path) -> Result<DesignMatrix> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "model.design.path: file not found: {}",
            path.display()
        )));
    }
    let read_err = |e: csv::Error| Error::Config(format!("model.design.path: {e}"));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(read_err)?;
    let headers = rdr.headers().map_err(read_err)?.clone();
    for (i, h) in headers.iter().enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(Error::Config(format!(
                "model.design.path: header must be x1,...,xp; found `{h}` in column {}",
                i + 1
            )));
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(read_err)?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::Config(format!("model.design.path: non-numeric value `{v}`"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DesignMatrix::new(rows)
}
