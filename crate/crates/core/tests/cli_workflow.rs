use std::fs;
use std::path::PathBuf;

use latent_signal::cli::{
    cmd_cast, cmd_diagnose, cmd_extract, cmd_filters, cmd_fit, cmd_simulate, ingest, Bundle, ExtractFlags, Method,
    RunConfig,
};

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("latsig-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const MODEL: &str = r#"
[data]
path = "sim/simulated.csv"
start_year = 2001
start_period = 1
period = 12
series = ["a", "b"]

[[model.components]]
label = "trend"
class = "white_noise"
delta = [1, -1]

[[model.components]]
label = "irregular"
class = "white_noise"

[simulate]
t = 90
seed = 11
psi = [0.3, -1.0, -2.0, 0.5, 0.0, 0.0, 1.0, 2.0]

[extract]
window = 30
grid = 1000
horizon = 3

[[extract.signals]]
name = "trend"
components = [1]
fixed = ["Trend"]
displace = 5.0

[[extract.signals]]
name = "irregular"
components = [2]

[extract.publish]
signal = "trend"
complement = "irregular"
"#;

fn setup(name: &str, extra: &str) -> (PathBuf, RunConfig) {
    let dir = workdir(name);
    let cfg = RunConfig::from_toml(&format!("{MODEL}{extra}"), &dir).unwrap();
    cmd_simulate(&cfg, None, &dir.join("sim")).unwrap();
    (dir, cfg)
}

#[test]
fn fit_bundle_round_trip_and_reproducibility() {
    let (dir, cfg) = setup("fit", "");
    let (bundle, report) = cmd_fit(&cfg, None, &dir.join("a")).unwrap();
    assert!(report.contains("divergence"));
    let cond_rows: Vec<&str> = report.lines().filter(|l| l.starts_with("trend ") || l.starts_with("irregular ")).collect();
    assert_eq!(cond_rows.len(), 2);
    assert!(cond_rows.iter().all(|l| l.split_whitespace().count() == 3));

    let loaded = Bundle::load(&dir.join("a/bundle.json")).unwrap();
    let again = latent_signal::gauss::lik(&loaded.psi, &loaded.model, &loaded.data_matrix()).unwrap();
    assert!((again - bundle.divergence).abs() < 1e-10);

    let (second, _) = cmd_fit(&cfg, None, &dir.join("b")).unwrap();
    assert_eq!(second.divergence, bundle.divergence);
    cmd_cast(&bundle, Some(6), &dir.join("a")).unwrap();
    cmd_cast(&second, Some(6), &dir.join("b")).unwrap();
    assert_eq!(fs::read(dir.join("a/casts.csv")).unwrap(), fs::read(dir.join("b/casts.csv")).unwrap());
    let casts = fs::read_to_string(dir.join("a/casts.csv")).unwrap();
    assert!(casts.starts_with("year,period,a_point"));
    assert_eq!(casts.lines().count(), 1 + 90 + 12);
    assert!(casts.lines().nth(1).unwrap().starts_with("2000,7,"));
}

#[test]
fn simulate_is_deterministic() {
    let (dir, cfg) = setup("sim", "");
    cmd_simulate(&cfg, None, &dir.join("again")).unwrap();
    assert_eq!(fs::read(dir.join("sim/simulated.csv")).unwrap(), fs::read(dir.join("again/simulated.csv")).unwrap());
    let meta = fs::read_to_string(dir.join("again/simulated_psi.json")).unwrap();
    assert!(meta.contains("\"seed\": 11"));
    cmd_simulate(&cfg, Some(12), &dir.join("other")).unwrap();
    assert_ne!(fs::read(dir.join("sim/simulated.csv")).unwrap(), fs::read(dir.join("other/simulated.csv")).unwrap());
}

#[test]
fn method_of_moments_skips_likelihood() {
    let (dir, cfg) = setup("mom", "");
    let (bundle, report) = cmd_fit(&cfg, Some(Method::Mom), &dir.join("out")).unwrap();
    assert_eq!(bundle.method, Method::Mom);
    assert!(bundle.hessian.is_empty());
    assert!(!report.contains("t statistics"));
}

#[test]
fn violating_initial_value_is_refused() {
    let dir = workdir("constraint");
    fs::write(dir.join("c.csv"), "0.5,0,0,0,0,0,0,1,-1\n").unwrap();
    let text = MODEL.replacen("[[model.components]]", "[model]\nconstraint = \"c.csv\"\n\n[[model.components]]", 1);
    let cfg = RunConfig::from_toml(&text, &dir).unwrap();
    cmd_simulate(&cfg, None, &dir.join("sim")).unwrap();
    let err = cmd_fit(&cfg, None, &dir.join("out")).unwrap_err().to_string();
    assert!(err.contains("row 1"), "{err}");
    assert!(err.contains("psi[7]") && err.contains("psi[8]"), "{err}");
}

#[test]
fn extraction_outputs() {
    let (dir, cfg) = setup("extract", "");
    let (bundle, _) = cmd_fit(&cfg, None, &dir.join("out")).unwrap();
    let flags = ExtractFlags { frf: true, wk_coeffs: true, ..ExtractFlags::default() };
    let report = cmd_extract(&bundle, &flags, &dir.join("out")).unwrap();
    let trend = fs::read_to_string(dir.join("out/trend.csv")).unwrap();
    let header = trend.lines().next().unwrap();
    assert!(header.ends_with(",displace"));
    assert!(trend.lines().nth(1).unwrap().ends_with(",5"));
    assert_eq!(trend.lines().count(), 1 + 90 + 6);
    for f in ["trend.svg", "trend_frf.csv", "trend_wk.csv", "irregular_frf.csv", "decomposition.csv"] {
        assert!(dir.join("out").join(f).exists(), "{f}");
    }
    let dev: f64 = report
        .lines()
        .find(|l| l.starts_with("decomposition additivity"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-10);
    let svg = fs::read_to_string(dir.join("out/trend.svg")).unwrap();
    assert!(svg.contains("<polygon") && svg.contains("<polyline"));

    let diag = cmd_diagnose(&bundle, &dir.join("out")).unwrap();
    assert!(diag.starts_with("portmanteau lag 48"));
    assert_eq!(diag.lines().nth(1).unwrap().split_whitespace().count(), 4);
    let acf = fs::read_to_string(dir.join("out/residual_acf.csv")).unwrap();
    assert_eq!(acf.lines().count(), 1 + 48);
}

#[test]
fn tampered_bundle_rejected() {
    let (dir, cfg) = setup("tamper", "");
    cmd_fit(&cfg, Some(Method::Mom), &dir.join("out")).unwrap();
    let path = dir.join("out/bundle.json");
    let mut b: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    b["data"][0][0] = serde_json::json!(123.0);
    fs::write(&path, b.to_string()).unwrap();
    assert!(Bundle::load(&path).unwrap_err().to_string().contains("checksum"));
}

#[test]
fn ingest_preparation() {
    let dir = workdir("ingest");
    fs::write(dir.join("d.csv"), "x,y,z\nNA,2,4\n1,3,NA\n2,5,8\n").unwrap();
    let base = "[data]\npath = \"d.csv\"\nseries = [\"x\", \"z\"]\n";
    let cfg = RunConfig::from_toml(&format!("{base}transform = \"log\"\n"), &dir).unwrap();
    let s = ingest(&cfg).unwrap();
    assert!(s.values[(0, 0)].is_nan());
    assert!((s.values[(2, 1)] - 8f64.ln()).abs() < 1e-15);
    let cfg = RunConfig::from_toml(&format!("{base}aggregate = true\nrange = [2, 3]\n"), &dir).unwrap();
    let s = ingest(&cfg).unwrap();
    assert_eq!(s.names, vec!["aggregate"]);
    assert!(s.values[(0, 0)].is_nan());
    assert_eq!(s.values[(1, 0)], 10.0);
    let cfg = RunConfig::from_toml("[data]\npath = \"d.csv\"\nseries = [\"w\"]\n", &dir).unwrap();
    assert!(ingest(&cfg).is_err());
}

#[test]
fn filter_kernels_written() {
    let dir = workdir("filters");
    let cfg = RunConfig::from_toml("[data]\nperiod = 12\n[filters]\nembed = 3\n", &dir).unwrap();
    let report = cmd_filters(&cfg, true, &dir).unwrap();
    assert!(report.contains("trend: length 13 shift 6 sum 1"));
    for f in ["x11_trend.csv", "x11_seasonal.csv", "x11_sa.csv", "x11_trend_embedded.csv", "x11_frf.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn simulated_file_reads_back_without_selection() {
    let dir = workdir("readback");
    let text = MODEL.replace("series = [\"a\", \"b\"]\n", "").replace("[simulate]\n", "[fit]\nmom_init = true\n\n[simulate]\nn = 2\n");
    let cfg = RunConfig::from_toml(&text, &dir).unwrap();
    cmd_simulate(&cfg, None, &dir.join("sim")).unwrap();
    let s = ingest(&cfg).unwrap();
    assert_eq!(s.values.shape(), (90, 2));
    let (bundle, _) = cmd_fit(&cfg, None, &dir.join("out")).unwrap();
    assert_eq!(bundle.names.len(), 2);
    assert!(bundle.divergence.is_finite());
}
