#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opo_ng::OpoError;

/// Non-Gaussian statistics of a below-threshold degenerate OPO.
///
/// Every command prints a delimited table preceded by `#` header lines that
/// record the resolved configuration. Numbers are written in full double
/// precision scientific notation.
#[derive(Debug, Parser)]
#[command(name = "opo-ng", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Key-value config file (kappa0_hat, e_mag, psi, psi0, gamma1_hat,
    /// g_chi, g_mu, g_phase, g_nu, g_temp, spectrum_mu_band, omega_f,
    /// gamma_f). Missing keys: tuned device, kappa0 = 2, E = 0.5, default
    /// weights, filter omega_f = 0.3, gamma_f = 0.15.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the normalized excitation |E|.
    #[arg(long = "e", global = true)]
    pub e_mag: Option<f64>,
    /// Override the normalized pump damping (real, tuned device).
    #[arg(long, global = true)]
    pub kappa0: Option<f64>,
    /// Write the table to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// On coincident filter and cavity poles, retry with gamma_f shifted by
    /// 1e-6 instead of failing.
    #[arg(long, global = true)]
    pub perturb_degenerate: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonlinear corrections lambda to intracavity squeezing.
    Lambda(commands::LambdaArgs),
    /// Unit-weight Upsilon_theta over a theta grid for one channel.
    Upsilon(commands::UpsilonArgs),
    /// Kurtosis excess K_theta, optionally with a detuning drift.
    Kurtosis(commands::KurtosisArgs),
    /// Monte Carlo kurtosis estimate for one channel.
    Mc(commands::McArgs),
    /// Fit the drift model to measured kurtosis records.
    Fit(commands::FitArgs),
    /// Tables behind the figures.
    Figs(commands::FigsArgs),
    /// Dump the linear Green's matrix and spectrum on a frequency grid.
    Green(commands::GreenArgs),
}

/// Exit status for a library error.
fn exit_code(e: &OpoError) -> u8 {
    match e {
        OpoError::NonConvergence(_) | OpoError::QuadratureFailure { .. } => 2,
        OpoError::ParseError { .. } | OpoError::Io(_) | OpoError::EmptyDataset => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("OPO_NG_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
