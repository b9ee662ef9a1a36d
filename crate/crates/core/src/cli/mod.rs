//! `pluridyn` command line: one experiment per invocation, artifacts in `--out`.
//!
//! Exit codes: 0 success, 2 hypothesis failure (trapping or star shape),
//! 3 numerical or configuration failure. Failures print one line
//! `ERROR <module> <code> <detail>` on stderr.

mod artifacts;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

pub use artifacts::{sha256_hex, ArtifactEntry, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "pluridyn", version, about = "Attracting currents and equilibrium measures of endomorphisms of P^k")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Map definition file (`pmap` monomial format); default is the
    /// perturbed power map with ε = 0.05.
    #[arg(long, global = true)]
    pub map: Option<PathBuf>,
    /// Region definition file (TOML); default `{|z2| < 0.2 max(|z0|, |z1|)}`.
    #[arg(long, global = true)]
    pub region: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads; `PLURIDYN_THREADS` takes precedence. Results do not
    /// depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NuModeArg {
    Density,
    Exact,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check that the components have no common zero.
    ValidateMap,
    /// Trapping, star-shape and Jacobian diagnostics of a region.
    CheckRegion,
    /// Green function `g_n` at random points.
    Green,
    /// Sample of the equilibrium measure by random preimage walks.
    Mu,
    /// Attracting current `τ_n` from a random line in `U`.
    Tau {
        /// Refinement gap of the pushforward quadrature.
        #[arg(long, default_value_t = 0.05)]
        gap: f64,
    },
    /// Cesàro approximant of `ν`.
    Nu {
        #[arg(long, value_enum, default_value = "density")]
        mode: NuModeArg,
        #[arg(long, default_value_t = 0.1)]
        gap: f64,
        /// Random lines of the Crofton average (exact mode).
        #[arg(long, default_value_t = 40)]
        lines: usize,
    },
    /// Separated-set and graph-volume entropy estimates.
    Entropy {
        /// Separation scales for the cloud in `U`.
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.05")]
        eps: Vec<f64>,
        /// Separation scales for the global cloud.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4")]
        global_eps: Vec<f64>,
        /// Depth of the preimage tree used as global cloud.
        #[arg(long, default_value_t = 6)]
        tree_depth: usize,
    },
    /// Correlations `⟨ν, φ·ψ∘f^j⟩ − ⟨ν,φ⟩⟨ν,ψ⟩`.
    Mixing {
        #[arg(long, default_value_t = 10)]
        lags: usize,
        #[arg(long, default_value_t = 0.1)]
        gap: f64,
    },
    /// Power-map example without star-shaped fibers.
    Counterexample {
        #[arg(long, default_value_t = 2)]
        d: u32,
        #[arg(long, default_value_t = 1)]
        lines_per_axis: usize,
    },
    /// Compare canonical potentials of two finite-n currents.
    Potentials {
        #[arg(long, default_value_t = 1000)]
        u_points: usize,
    },
    /// Fraction of `f^{-n}(a)` in `U` over random `a`.
    PreimageStat,
    /// Aggregate the run manifests found in `--out`.
    Report,
}

/// Thread count from `PLURIDYN_THREADS`, then `--threads`.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("PLURIDYN_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("PLURIDYN_THREADS={v} is not a thread count"))),
        _ => Ok(flag),
    }
}

pub fn run(cli: &Cli) -> Result<RunManifest> {
    let threads = resolve_threads(cli.common.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| commands::dispatch(&cli.common, &cli.command))
}

fn report_error(e: &Error) -> i32 {
    eprintln!("ERROR {} {} {}", e.module(), e.code(), e);
    if e.is_hypothesis_failure() {
        2
    } else {
        3
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => return report_error(&Error::Config(e.to_string().lines().next().unwrap_or("").to_string())),
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => report_error(&e),
    }
}
