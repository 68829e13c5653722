use std::fs;
use std::path::Path;
use std::process::Command;

fn dpdbp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dpdbp"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Least-squares oracle for the alpha = 0 fit of a linear model.
#[test]
fn fit_at_zero_matches_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    // small fixed dataset, two covariate values each repeated
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
    let ys = [1.1, 2.9, 5.2, 7.1, 8.8, 11.2, 12.9, 15.3];
    let mut text = String::from("x1,y\n");
    for (x, y) in xs.iter().zip(&ys) {
        text.push_str(&format!("{x},{y}\n"));
    }
    write(&data, &text);
    let cfg = dir.path().join("fit.toml");
    write(
        &cfg,
        &format!(
            r#"
kind = "fit"

[model]
family = "normal"
mean = "linear"

[model.design]
n = 8

[[model.design.columns]]
kind = "equispaced"
lo = 0.0
hi = 7.0

[fit]
data = "{}"
alpha = 0.0

[output]
prefix = "ls"
"#,
            data.display()
        ),
    );
    let out = dpdbp()
        .args(["fit", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // normal equations by hand
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let b1 = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let b0 = (sy - b1 * sx) / n;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - b0 - b1 * x).powi(2))
        .sum();
    let sigma = (rss / n).sqrt();

    let csv = fs::read_to_string(dir.path().join("ls_fit.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let header: Vec<&str> = lines[1].split(',').collect();
    let values: Vec<&str> = lines[2].split(',').collect();
    let get = |name: &str| -> f64 {
        values[header.iter().position(|h| *h == name).unwrap()]
            .parse()
            .unwrap()
    };
    assert!((get("theta_1") - b0).abs() < 1e-6, "{} vs {b0}", get("theta_1"));
    assert!((get("theta_2") - b1).abs() < 1e-6);
    assert!((get("theta_3") - sigma).abs() < 1e-6);
}

#[test]
fn missing_design_file_reports_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    write(
        &cfg,
        r#"
kind = "mdpdf-sweep"
theta0 = [0.0, 1.0, 1.0]

[model]
family = "normal"
mean = "linear"

[model.design]
path = "/nonexistent/design.csv"

[contamination]
theta = [5.0, 1.0, 1.0]

[grids]
alphas = [0.5]
eps = [0.0]
"#,
    );
    let out = dpdbp()
        .args(["mdpdf-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.design.path"), "stderr: {err}");
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, "this is not valid toml ===");
    let out = dpdbp()
        .args(["fit", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn sweep_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("sweep.toml");
    write(
        &cfg,
        r#"
kind = "mdpdf-sweep"
theta0 = [2.0, 1.0, 0.8]

[model]
family = "normal"
mean = "linear"

[model.design]
n = 8
seed = 11

[[model.design.columns]]
kind = "normal"
mean = 0.0
sd = 2.0

[contamination]
theta = [10.0, -1.0, 0.4]

[grids]
alphas = [0.5]
eps = [0.0, 0.1]

[output]
prefix = "tiny"
"#,
    );
    cfg
}

#[test]
fn sweep_is_deterministic_and_fisher_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        fs::create_dir(&out_dir).unwrap();
        let out = dpdbp()
            .args(["mdpdf-sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["tiny_sweep.csv", "tiny_sweep_theta_1.svg", "tiny_sweep_theta_3.svg"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }

    // the eps = 0 row is the uncontaminated functional, i.e. theta0 itself
    let csv = fs::read_to_string(dir.path().join("a").join("tiny_sweep.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row[1], "0");
    let theta: Vec<f64> = row[2..5].iter().map(|v| v.parse().unwrap()).collect();
    assert!((theta[0] - 2.0).abs() < 1e-4, "{theta:?}");
    assert!((theta[1] - 1.0).abs() < 1e-4, "{theta:?}");
    assert!((theta[2] - 0.8).abs() < 1e-4, "{theta:?}");
    assert!(csv.lines().nth(2).unwrap().ends_with("ok"));
}

#[test]
fn simulate_single_replicate_collapses_bands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    write(
        &cfg,
        r#"
kind = "simulate"
seed = 7
theta0 = [2.0, 1.0, 0.8]

[model]
family = "normal"
mean = "linear"

[model.design]
n = 10
seed = 11

[[model.design.columns]]
kind = "normal"
mean = 0.0
sd = 2.0

[contamination]
theta = [10.0, -1.0, 0.4]

[grids]
alphas = [0.5]
eps = [0.0, 0.2]

[simulate]
n_reps = 1

[output]
prefix = "one"
"#,
    );
    let out = dpdbp()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("one_simulate.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[3], f[4], "median != q25 in {line}");
        assert_eq!(f[3], f[5], "median != q75 in {line}");
    }
}
