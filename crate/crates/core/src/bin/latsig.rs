use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_signal::cli::{
    cmd_cast, cmd_diagnose, cmd_extract, cmd_filters, cmd_fit, cmd_simulate, Bundle, ExtractFlags, Method, RunConfig,
};

#[derive(Parser)]
#[command(name = "latsig", version, about = "Latent component time series models: fit, cast and extract")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Directory for output files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Verb {
    /// Fit the configured model and write bundle.json.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["mle", "mom"])]
        method: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Residual diagnostics of a fitted bundle.
    Diagnose {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Signal extraction for the signals configured in the bundle.
    Extract {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Also write frequency response functions.
        #[arg(long)]
        frf: bool,
        /// Also write truncated filter coefficients.
        #[arg(long)]
        wk_coeffs: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Forecasts, aftcasts and midcasts with bands.
    Cast {
        #[arg(long)]
        bundle: PathBuf,
        /// Number of fore- and aftcasts.
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// X-11 style filter kernels for the configured period.
    Filters {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        frf: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate data from the configured model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> latent_signal::Result<String> {
    match cli.verb {
        Verb::Fit { config, method, common } => {
            let cfg = RunConfig::load(&config)?;
            let method = method.map(|m| m.parse::<Method>()).transpose()?;
            Ok(cmd_fit(&cfg, method, &common.out_dir)?.1)
        }
        Verb::Diagnose { bundle, common } => cmd_diagnose(&Bundle::load(&bundle)?, &common.out_dir),
        Verb::Extract { bundle, window, grid, horizon, frf, wk_coeffs, common } => {
            let flags = ExtractFlags { window, grid, horizon, frf, wk_coeffs };
            cmd_extract(&Bundle::load(&bundle)?, &flags, &common.out_dir)
        }
        Verb::Cast { bundle, horizon, common } => cmd_cast(&Bundle::load(&bundle)?, horizon, &common.out_dir),
        Verb::Filters { config, frf, common } => cmd_filters(&RunConfig::load(&config)?, frf, &common.out_dir),
        Verb::Simulate { config, seed, common } => cmd_simulate(&RunConfig::load(&config)?, seed, &common.out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("latsig: {e}");
            ExitCode::FAILURE
        }
    }
}
