//! The command verbs driven from code: simulate data, fit, diagnose,
//! extract signals, cast and write nonparametric filters.

use std::fs;

use latent_signal::cli::{cmd_cast, cmd_diagnose, cmd_extract, cmd_filters, cmd_fit, cmd_simulate, ExtractFlags, RunConfig};

const CONFIG: &str = r#"
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
t = 120
seed = 7
psi = [0.3, -1.0, -2.0, 0.5, 0.0, 0.0, 0.5, 1.0]

[extract]
window = 40
grid = 1000
horizon = 6

[[extract.signals]]
name = "trend"
components = [1]
fixed = ["Trend"]

[[extract.signals]]
name = "irregular"
components = [2]

[extract.publish]
signal = "trend"
complement = "irregular"
"#;

fn main() -> latent_signal::Result<()> {
    let dir = std::env::temp_dir().join("latsig-cli-workflow");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("model.toml"), CONFIG)?;
    let cfg = RunConfig::load(&dir.join("model.toml"))?;

    print!("{}", cmd_simulate(&cfg, None, &dir.join("sim"))?);
    let out = dir.join("out");
    let (bundle, report) = cmd_fit(&cfg, None, &out)?;
    print!("{report}");
    print!("{}", cmd_diagnose(&bundle, &out)?);
    let flags = ExtractFlags { frf: true, ..ExtractFlags::default() };
    print!("{}", cmd_extract(&bundle, &flags, &out)?);
    print!("{}", cmd_cast(&bundle, Some(12), &out)?);
    print!("{}", cmd_filters(&cfg, false, &out)?);

    let mut files: Vec<String> = fs::read_dir(&out)?.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect();
    files.sort();
    println!("written to {}:", out.display());
    for f in files {
        println!("  {f}");
    }
    Ok(())
}
