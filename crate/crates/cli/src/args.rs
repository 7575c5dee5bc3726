use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsum::bayes::{BetaMeanDispersion, McmcConfig};
use nsum::classic::ClassicMethod;
use nsum::method::Method;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(name = "nsum", version, about = "Network scale-up size estimation from aggregated relational data")]
pub struct Cli {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the size of an unknown subpopulation.
    Estimate(EstimateArgs),
    /// Generate synthetic surveys from a scenario file.
    Simulate(SimulateArgs),
    /// Apply a visibility, calibration-curve or errors-in-variables correction.
    Calibrate(CalibrateArgs),
    /// Leave-one-out checks, stepwise trimming and chain diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Run estimators over replicated synthetic worlds.
    Benchmark(BenchmarkArgs),
    /// Check a survey against the data invariants.
    Validate(SurveyArgs),
    /// Per-column means, variances and zero shares.
    Summarize(SurveyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SurveyArgs {
    /// Survey file: CSV (with --sizes) or JSON.
    #[arg(long)]
    pub survey: PathBuf,
    /// Known-sizes JSON accompanying a CSV survey.
    #[arg(long)]
    pub sizes: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 2000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 2000)]
    pub keep: usize,
}

impl McmcArgs {
    pub fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            chains: self.chains,
            burn_in: self.burnin,
            keep: self.keep,
            seed,
            ..McmcConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CliMethod {
    Johnsen,
    Model(Method),
}

impl FromStr for CliMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "johnsen" {
            return Ok(CliMethod::Johnsen);
        }
        s.parse::<Method>()
            .map(CliMethod::Model)
            .map_err(|_| format!("unknown method `{s}`; expected johnsen or one of {}", Method::labels().join(", ")))
    }
}

impl CliMethod {
    pub fn label(&self) -> String {
        match self {
            CliMethod::Johnsen => "johnsen".into(),
            CliMethod::Model(m) => m.label(),
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_classic(s: &str) -> Result<ClassicMethod, String> {
    s.parse::<ClassicMethod>().map_err(|e| e.to_string())
}

/// `eta,nu`: prior mean and dispersion of the visibility factor.
pub fn parse_tau_prior(s: &str) -> Result<BetaMeanDispersion, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [eta, nu] = parts.as_slice() else {
        return Err(format!("expected `eta,nu`, got `{s}`"));
    };
    let mean: f64 = eta.parse().map_err(|_| format!("bad eta `{eta}`"))?;
    let dispersion: f64 = nu.parse().map_err(|_| format!("bad nu `{nu}`"))?;
    if !(mean > 0.0 && mean < 1.0 && dispersion > 0.0 && dispersion < 1.0) {
        return Err(format!("eta and nu must lie in (0, 1), got {mean} and {dispersion}"));
    }
    Ok(BetaMeanDispersion { mean, dispersion })
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub survey: SurveyArgs,
    #[arg(long, value_parser = CliMethod::from_str)]
    pub method: CliMethod,
    /// Target column; required when the survey has several unknown columns.
    #[arg(long)]
    pub unknown: Option<String>,
    /// Enriched hidden-population CSV for gnsum.
    #[arg(long)]
    pub enriched: Option<PathBuf>,
    /// Frame-sample inclusion probability of every respondent (gnsum); n/N when absent.
    #[arg(long)]
    pub frame_prob: Option<f64>,
    /// Divide the estimate by this visibility factor.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_parser = parse_tau_prior)]
    pub tau_prior: Option<BetaMeanDispersion>,
    /// Known columns used to renormalize the overdispersed model.
    #[arg(long, value_delimiter = ',')]
    pub rare: Option<Vec<String>>,
    /// Write per-respondent latent draws as well.
    #[arg(long)]
    pub all_params: bool,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Only this scenario of a multi-scenario file.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationKind {
    Visibility,
    Curve,
    Eiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Beta,
    LogSize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub calibration: CalibrationKind,
    /// Estimate JSON to adjust.
    #[arg(long)]
    pub estimate: Option<PathBuf>,
    /// Posterior draws CSV to adjust.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    #[arg(long)]
    pub draws_manifest: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Where the visibility factor came from.
    #[arg(long, default_value = "cli")]
    pub tau_source: String,
    #[arg(long, requires = "curve_b")]
    pub curve_a: Option<f64>,
    #[arg(long, requires = "curve_a")]
    pub curve_b: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScaleArg::Beta)]
    pub scale: ScaleArg,
    /// Survey whose leave-one-out back-estimates fit the curve or EIV model.
    #[arg(long)]
    pub survey: Option<PathBuf>,
    #[arg(long)]
    pub sizes: Option<PathBuf>,
    #[arg(long, value_parser = parse_classic, default_value = "mle")]
    pub loo_method: ClassicMethod,
    #[arg(long)]
    pub unknown: Option<String>,
    /// Bootstrap replicates for the back-estimate variances.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
}

#[derive(Debug, Subcommand)]
pub enum DiagnoseCommand {
    /// Leave-one-out back-estimates of every known column.
    Loo {
        #[command(flatten)]
        survey: SurveyArgs,
        #[arg(long, value_parser = parse_classic, default_value = "mle")]
        method: ClassicMethod,
    },
    /// Drop the worst known column until all |log ratio| are within tolerance.
    Trim {
        #[command(flatten)]
        survey: SurveyArgs,
        #[arg(long, value_parser = parse_classic, default_value = "mle")]
        method: ClassicMethod,
        #[arg(long, default_value_t = 0.25)]
        tolerance: f64,
        #[arg(long)]
        max_removals: Option<usize>,
    },
    /// Split R-hat, effective sample size and acceptance of saved draws.
    Chains {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        draws_manifest: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "pimle,mle,mos")]
    pub method: Vec<Method>,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, value_parser = parse_tau_prior)]
    pub tau_prior: Option<BetaMeanDispersion>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}
