//! The five experiment commands: each reads a config, writes CSV tables, and
//! then draws its plots back from the CSVs it just wrote.

use std::io::Write;
use std::path::{Path, PathBuf};

use dpdbp_core::breakdown;
use dpdbp_core::estimation;
use dpdbp_core::functional::{self, Population};
use dpdbp_core::report;
use dpdbp_core::{Dataset, DpdConfig, Error, Result, UnivariateDensity};

use crate::config::ExperimentConfig;
use crate::plot::{Chart, Series};

pub struct Context {
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    fn path(&self, cfg: &ExperimentConfig, suffix: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(format!("{}_{suffix}", cfg.prefix())))
    }
}

// ---------- CSV read-back used by the plotting stage ----------

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let read_err = |e: csv::Error| Error::Numerical(format!("csv read: {e}"));
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(read_err)?;
        let header = rdr.headers().map_err(read_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Numerical(format!("csv read: {e}")))?;
            rows.push(
                rec.iter()
                    .map(|v| v.parse::<f64>().unwrap_or(f64::NAN))
                    .collect(),
            );
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Numerical(format!("csv column `{name}` missing")))
    }

    /// Distinct values of a column, in first-appearance order.
    fn levels(&self, c: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|&v| v == r[c]) {
                out.push(r[c]);
            }
        }
        out
    }
}

// ---------- fit ----------

pub fn cmd_fit(cfg: &ExperimentConfig, ctx: &Context) -> Result<()> {
    cfg.check_kind("fit")?;
    let fit_cfg = cfg
        .fit
        .as_ref()
        .ok_or_else(|| Error::Config("fit: section required".into()))?;
    if !fit_cfg.data.exists() {
        return Err(Error::Config(format!(
            "fit.data: file not found: {}",
            fit_cfg.data.display()
        )));
    }
    // the design section stays authoritative for the covariate layout; a
    // missing referenced file is reported under its own key
    if let Some(p) = &cfg.model.design.path {
        if !p.exists() {
            return Err(Error::Config(format!(
                "model.design.path: file not found: {}",
                p.display()
            )));
        }
    }
    let model = cfg.model()?;
    let data = Dataset::from_csv(&fit_cfg.data)?;
    let opts = cfg.optimizer();
    let extra: Vec<Vec<f64>> = cfg.theta0.iter().cloned().collect();
    let fit = estimation::mdpde_fit(&model, &data, fit_cfg.alpha, &extra, &opts)?;

    let path = ctx.path(cfg, "fit.csv")?;
    let mut header = vec![
        "alpha".to_string(),
        "objective".to_string(),
        "ee_norm".to_string(),
        "iterations".to_string(),
        "n_starts".to_string(),
        "converged".to_string(),
    ];
    header.extend((1..=fit.theta.len()).map(|j| format!("theta_{j}")));
    let mut rec = vec![
        format!("{}", fit_cfg.alpha),
        format!("{}", fit.objective),
        format!("{}", fit.ee_norm),
        format!("{}", fit.iterations),
        format!("{}", fit.n_starts),
        format!("{}", fit.converged),
    ];
    rec.extend(fit.theta.iter().map(|v| format!("{v}")));
    write_csv(&path, &header, &[rec])?;
    println!("wrote {}", path.display());
    Ok(())
}

// ---------- mdpdf-sweep ----------

pub fn cmd_mdpdf_sweep(cfg: &ExperimentConfig, ctx: &Context) -> Result<()> {
    cfg.check_kind("mdpdf-sweep")?;
    let design = cfg.design(ctx.seed)?;
    let base = cfg.population()?;
    base.validate(&design)?;
    let alphas = cfg.alphas()?.to_vec();
    let eps_grid = cfg.eps_grid()?;
    let opts = cfg.optimizer();
    let mode = cfg.integration_mode(ctx.seed);
    let d = base.model.dim(design.p())?;

    // cells are evaluated one by one so a failed cell becomes a CSV row
    // instead of killing the sweep
    let mut header = vec!["alpha".to_string(), "eps".to_string()];
    header.extend((1..=d).map(|j| format!("theta_{j}")));
    header.push("objective".to_string());
    header.push("status".to_string());
    let mut records: Vec<Vec<String>> = Vec::new();
    for &alpha in &alphas {
        let mut warm: Vec<Vec<f64>> = Vec::new();
        for &eps in &eps_grid {
            let pop = Population {
                eps,
                ..base.clone()
            };
            let mut rec = vec![format!("{alpha}"), format!("{eps}")];
            match functional::mdpdf(&pop, &design, alpha, &warm, mode, &opts) {
                Ok(r) => {
                    warm = vec![r.theta.clone()];
                    rec.extend(r.theta.iter().map(|v| format!("{v}")));
                    rec.push(format!("{}", r.objective));
                    rec.push("ok".to_string());
                }
                Err(e) => {
                    rec.extend(std::iter::repeat("nan".to_string()).take(d + 1));
                    rec.push(format!("error: {e}"));
                }
            }
            records.push(rec);
        }
    }
    let csv_path = ctx.path(cfg, "sweep.csv")?;
    write_csv(&csv_path, &header, &records)?;
    println!("wrote {}", csv_path.display());

    plot_sweep(cfg, ctx, &csv_path, d)
}

fn plot_sweep(cfg: &ExperimentConfig, ctx: &Context, csv_path: &Path, d: usize) -> Result<()> {
    let table = Table::read(csv_path)?;
    let ca = table.col("alpha")?;
    let ce = table.col("eps")?;
    for j in 1..=d {
        let cj = table.col(&format!("theta_{j}"))?;
        let series = table
            .levels(ca)
            .into_iter()
            .map(|alpha| Series {
                label: format!("alpha = {alpha}"),
                points: table
                    .rows
                    .iter()
                    .filter(|r| r[ca] == alpha)
                    .map(|r| (r[ce], r[cj]))
                    .collect(),
                band: Vec::new(),
            })
            .collect();
        let path = ctx.path(cfg, &format!("sweep_theta_{j}.svg"))?;
        Chart {
            title: &format!("Functional coordinate {j} vs contamination"),
            x_label: "contamination proportion",
            y_label: &format!("theta_{j}"),
            series,
            y_clip: cfg.y_clip(),
            h_line: None,
        }
        .render_to(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------- abp-bound ----------

pub fn cmd_abp_bound(cfg: &ExperimentConfig, ctx: &Context) -> Result<()> {
    cfg.check_kind("abp-bound")?;
    let bound_cfg = cfg
        .bound
        .as_ref()
        .ok_or_else(|| Error::Config("bound: section required".into()))?;
    let alphas = cfg.alphas()?;
    let dpd_cfg = DpdConfig::default();
    let rows = match &bound_cfg.l0_grid {
        Some(l0s) => breakdown::bound_grid(alphas, l0s, bound_cfg.c)?,
        None => {
            let model = cfg.model()?;
            let design = cfg.design(ctx.seed)?;
            breakdown::bound_sweep(&model, cfg.theta0()?, &design, alphas, bound_cfg.c, &dpd_cfg)?
        }
    };
    let csv_path = ctx.path(cfg, "bound.csv")?;
    report::write_bound_csv(&csv_path, &rows)?;
    println!("wrote {}", csv_path.display());

    let table = Table::read(&csv_path)?;
    let ca = table.col("alpha")?;
    let cl = table.col("L0")?;
    let cb = table.col("bound")?;
    let svg_path = ctx.path(cfg, "bound.svg")?;
    let chart = if bound_cfg.l0_grid.is_some() {
        // level plot over L0, one curve per tuning constant, with the 0.2
        // level marked for reading off the implicit curve
        Chart {
            title: "Breakdown lower bound over L0",
            x_label: "L0",
            y_label: "lower bound",
            series: table
                .levels(ca)
                .into_iter()
                .map(|alpha| Series {
                    label: format!("alpha = {alpha}"),
                    points: table
                        .rows
                        .iter()
                        .filter(|r| r[ca] == alpha)
                        .map(|r| (r[cl], r[cb]))
                        .collect(),
                    band: Vec::new(),
                })
                .collect(),
            y_clip: cfg.y_clip(),
            h_line: Some(0.2),
        }
    } else {
        Chart {
            title: "Breakdown lower bound vs tuning constant",
            x_label: "alpha",
            y_label: "lower bound",
            series: vec![Series {
                label: "lower bound".to_string(),
                points: table.rows.iter().map(|r| (r[ca], r[cb])).collect(),
                band: Vec::new(),
            }],
            y_clip: cfg.y_clip(),
            h_line: None,
        }
    };
    chart.render_to(&svg_path)?;
    println!("wrote {}", svg_path.display());
    Ok(())
}

// ---------- simulate ----------

pub fn cmd_simulate(cfg: &ExperimentConfig, ctx: &Context) -> Result<()> {
    cfg.check_kind("simulate")?;
    let sim_cfg = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("simulate: section required".into()))?;
    let seed = ctx
        .seed
        .or(cfg.seed)
        .ok_or_else(|| Error::Config("seed: required for simulate".into()))?;
    let design = cfg.design(ctx.seed)?;
    let theta0 = cfg.theta0()?.to_vec();
    let contaminant = cfg.contaminant()?;
    // a start at the contaminant parameter keeps heavily contaminated fits
    // out of the leftover clean-basin local minimum
    let extra_starts = if contaminant.theta.len() == theta0.len() {
        vec![contaminant.theta.clone()]
    } else {
        Vec::new()
    };
    let plan = dpdbp_core::SimulationPlan {
        model: cfg.model()?,
        theta0,
        contaminant,
        design,
        alphas: cfg.alphas()?.to_vec(),
        eps_grid: cfg.eps_grid()?,
        n_reps: sim_cfg.n_reps,
        seed,
        fixed_count: sim_cfg.fixed_count.unwrap_or(false),
        extra_starts,
        optimizer: cfg.optimizer(),
    };
    let cells = dpdbp_core::simulation::run_simulation(&plan)?;
    let csv_path = ctx.path(cfg, "simulate.csv")?;
    report::write_simulation_csv(&csv_path, &cells)?;
    println!("wrote {}", csv_path.display());
    for c in &cells {
        if c.conv_rate < 1.0 {
            eprintln!(
                "warning: alpha {} eps {}: only {:.0}% of replicates converged",
                c.alpha,
                c.eps,
                100.0 * c.conv_rate
            );
        }
    }

    let table = Table::read(&csv_path)?;
    let ca = table.col("alpha")?;
    let ce = table.col("eps")?;
    let cc = table.col("coord")?;
    let cm = table.col("median")?;
    let cq25 = table.col("q25")?;
    let cq75 = table.col("q75")?;
    for coord in table.levels(cc) {
        let series = table
            .levels(ca)
            .into_iter()
            .map(|alpha| {
                let rows: Vec<&Vec<f64>> = table
                    .rows
                    .iter()
                    .filter(|r| r[ca] == alpha && r[cc] == coord)
                    .collect();
                Series {
                    label: format!("alpha = {alpha}"),
                    points: rows.iter().map(|r| (r[ce], r[cm])).collect(),
                    band: rows.iter().map(|r| (r[ce], r[cq25], r[cq75])).collect(),
                }
            })
            .collect();
        let j = coord as usize;
        let path = ctx.path(cfg, &format!("simulate_theta_{j}.svg"))?;
        Chart {
            title: &format!("Median estimate and quartile band, coordinate {j}"),
            x_label: "contamination proportion",
            y_label: &format!("theta_{j}"),
            series,
            y_clip: cfg.y_clip(),
            h_line: None,
        }
        .render_to(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------- check-assumptions ----------

pub fn cmd_check_assumptions(cfg: &ExperimentConfig, ctx: &Context) -> Result<()> {
    cfg.check_kind("check-assumptions")?;
    let a_cfg = cfg
        .assumptions
        .as_ref()
        .ok_or_else(|| Error::Config("assumptions: section required".into()))?;
    let model = cfg.model()?;
    let design = cfg.design(ctx.seed)?;
    let theta0 = cfg.theta0()?;
    let contaminant = cfg.contaminant()?;
    let alphas = cfg.alphas()?;
    let alpha_max = alphas.iter().cloned().fold(0.0, f64::max);
    let dpd_cfg = DpdConfig::default();

    // Schedule 10^m with an unscaled m = 0 row as the sanity baseline.
    let header = vec![
        "m".to_string(),
        "eta".to_string(),
        "overlap_model_contaminant".to_string(),
        "overlap_contaminant_model".to_string(),
        "sup_mk".to_string(),
    ];
    let mut records = Vec::new();
    for m in 0..=a_cfg.schedule_max {
        let eta = 10f64.powi(m as i32);
        let mut fk = 0.0;
        let mut gf = 0.0;
        let mut sup_mk: f64 = 0.0;
        for i in 0..design.n() {
            let x = design.row(i);
            let f0 = model.obs_density(theta0, x)?;
            let g = contaminant.model.obs_density(&contaminant.theta, x)?;
            // contaminant pushed out along the schedule (B1/B2 decay) and the
            // model parameter pushed out against the fixed contaminant
            let k_m = diverge(&g, eta);
            let f_m = diverge(&f0, eta);
            fk += breakdown::overlap_mass(&f0, &k_m, &dpd_cfg)?;
            gf += breakdown::overlap_mass(&g, &f_m, &dpd_cfg)?;
            sup_mk = sup_mk.max(dpdbp_core::divergence::power_norm(&k_m, alpha_max, &dpd_cfg)?);
        }
        let n = design.n() as f64;
        records.push(vec![
            format!("{m}"),
            format!("{eta}"),
            format!("{}", fk / n),
            format!("{}", gf / n),
            format!("{sup_mk}"),
        ]);
    }
    let csv_path = ctx.path(cfg, "assumptions.csv")?;
    write_csv(&csv_path, &header, &records)?;
    println!("wrote {}", csv_path.display());

    let table = Table::read(&csv_path)?;
    let cm = table.col("m")?;
    let c1 = table.col("overlap_model_contaminant")?;
    let c2 = table.col("overlap_contaminant_model")?;
    let svg_path = ctx.path(cfg, "assumptions.svg")?;
    Chart {
        title: "Shared mass along the divergence schedule",
        x_label: "schedule index m (eta = 10^m)",
        y_label: "mean overlap",
        series: vec![
            Series {
                label: "model vs diverging contaminant".to_string(),
                points: table.rows.iter().map(|r| (r[cm], r[c1])).collect(),
                band: Vec::new(),
            },
            Series {
                label: "contaminant vs diverging model".to_string(),
                points: table.rows.iter().map(|r| (r[cm], r[c2])).collect(),
                band: Vec::new(),
            },
        ],
        y_clip: cfg.y_clip(),
        h_line: None,
    }
    .render_to(&svg_path)?;
    println!("wrote {}", svg_path.display());
    Ok(())
}

/// Push a density out along the schedule: location families drift, positive
/// families stretch.
fn diverge(d: &UnivariateDensity, eta: f64) -> UnivariateDensity {
    match *d {
        UnivariateDensity::Normal { mean, sd } => UnivariateDensity::Normal {
            mean: mean + (eta - 1.0),
            sd,
        },
        UnivariateDensity::Exponential { mean } => UnivariateDensity::Exponential {
            mean: mean * eta,
        },
        UnivariateDensity::Poisson { mean } => UnivariateDensity::Poisson { mean: mean * eta },
    }
}

// ---------- shared CSV writer ----------

fn write_csv(path: &Path, header: &[String], records: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::Numerical(format!("csv serialization: {e}")))?;
    for rec in records {
        w.write_record(rec)
            .map_err(|e| Error::Numerical(format!("csv serialization: {e}")))?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let mut fh = std::fs::File::create(path)?;
    writeln!(fh, "#schema=v1")?;
    fh.write_all(&body)?;
    Ok(())
}
