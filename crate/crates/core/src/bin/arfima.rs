use arfima::cli::{
    self, DPriorConfig, EstimateConfig, FitConfig, InnovationConfig, LikelihoodConfig,
    McStudyCliConfig, MuPriorConfig, PriorConfig, RjFitConfig, RunConfig, SigmaPriorConfig,
    SimulateConfig, TuningConfig,
};
use arfima::Error;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "arfima",
    version,
    about = "Bayesian inference for ARFIMA long-memory processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ARFIMA(p,d,q) series to CSV
    Simulate(SimulateArgs),
    /// Fit a fixed-order model by MCMC
    Fit(FitArgs),
    /// Fit with reversible-jump MCMC over unknown (p,q)
    Rjfit(RjFitArgs),
    /// Classical estimators of d (R/S, GPH, DFA)
    Estimate(EstimateArgs),
    /// Monte Carlo study over a (d, n) grid
    Mcstudy(McStudyArgs),
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn parse_model(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected p,q".into());
    }
    let p = parts[0].trim().parse().map_err(|e| format!("p: {e}"))?;
    let q = parts[1].trim().parse().map_err(|e| format!("q: {e}"))?;
    Ok((p, q))
}

#[derive(Args)]
struct ConfigArg {
    /// JSON config file (a bare config or a previous result embedding one);
    /// overrides all other flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    d: f64,
    /// AR coefficients, comma separated ("+" convention)
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    phi: Option<Vec<f64>>,
    /// MA coefficients, comma separated ("+" convention)
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Innovation family: gaussian or student-t
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Student-t degrees of freedom (requires --family student-t)
    #[arg(long)]
    dof: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ARMA filter burn-in (default 10*max(p,q,50))
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write retained draws as CSV
    #[arg(long)]
    samples_out: Option<PathBuf>,
    /// Total iterations including burn-in
    #[arg(long, default_value_t = 12_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Likelihood: approx or exact
    #[arg(long, default_value = "approx")]
    likelihood: String,
    /// Short-memory order as p,q
    #[arg(long, value_parser = parse_model, default_value = "0,0")]
    model: (usize, usize),
    #[arg(long, default_value_t = 5)]
    chains: usize,
    /// Disable the likelihood (prior calibration runs)
    #[arg(long)]
    prior_only: bool,
    /// Switch to reversible-jump over (p,q); --pmax/--qmax/--lambda apply
    #[arg(long)]
    rj: bool,
    #[arg(long, default_value_t = 5)]
    pmax: usize,
    #[arg(long, default_value_t = 5)]
    qmax: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// AR(infinity) truncation order P (default n)
    #[arg(long)]
    truncation: Option<usize>,
    /// Refresh x_A every this many iterations (0 = never)
    #[arg(long, default_value_t = 0)]
    xa_period: usize,
    /// Gaussian mu prior as "mu0,sigma0" (default flat)
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    mu_prior: Option<Vec<f64>>,
    /// Root-inverse-gamma sigma prior as "alpha0,beta0" (default diffuse)
    #[arg(long, value_parser = parse_f64_list)]
    sigma_prior: Option<Vec<f64>>,
    /// Truncated-Gaussian d prior as "mean,sd" (default uniform)
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    d_prior: Option<Vec<f64>>,
    /// Innovation family: gaussian or student-t
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long)]
    dof: Option<f64>,
}

#[derive(Args)]
struct RjFitArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    samples_out: Option<PathBuf>,
    #[arg(long, default_value_t = 12_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    pmax: usize,
    #[arg(long, default_value_t = 5)]
    qmax: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 5)]
    chains: usize,
    #[arg(long)]
    prior_only: bool,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long, default_value_t = 5_000)]
    pilot_iters: usize,
    #[arg(long, default_value_t = 0.05)]
    pilot_sigma: f64,
    #[arg(long, default_value_t = 0)]
    xa_period: usize,
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    mu_prior: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_f64_list)]
    sigma_prior: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_f64_list, allow_hyphen_values = true)]
    d_prior: Option<Vec<f64>>,
    #[arg(long, default_value = "gaussian")]
    family: String,
    #[arg(long)]
    dof: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    gph_bandwidth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    dfa_order: usize,
}

#[derive(Args)]
struct McStudyArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Per-replicate results CSV
    #[arg(long)]
    replicates_out: Option<PathBuf>,
    #[arg(long, value_parser = parse_f64_list, default_value = "0.0", allow_hyphen_values = true)]
    d_values: Vec<f64>,
    #[arg(long, value_parser = parse_usize_list, default_value = "1024")]
    n_values: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 12_000)]
    iters: usize,
    #[arg(long, default_value_t = 2_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "approx")]
    likelihood: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Run replicates sequentially
    #[arg(long)]
    serial: bool,
}

fn innovation_from(family: &str, dof: Option<f64>) -> Result<InnovationConfig, Error> {
    match family {
        "gaussian" => Ok(InnovationConfig::Gaussian),
        "student-t" | "student_t" => {
            let dof =
                dof.ok_or_else(|| Error::Config("--family student-t requires --dof".into()))?;
            Ok(InnovationConfig::StudentT { dof })
        }
        other => Err(Error::Config(format!(
            "unknown innovation family '{other}' (expected gaussian or student-t)"
        ))),
    }
}

fn likelihood_from(s: &str) -> Result<LikelihoodConfig, Error> {
    match s {
        "approx" | "approximate" => Ok(LikelihoodConfig::Approx),
        "exact" => Ok(LikelihoodConfig::Exact),
        other => {
            Err(Error::Config(format!("unknown likelihood '{other}' (expected approx or exact)")))
        }
    }
}

fn priors_from(
    mu: &Option<Vec<f64>>,
    sigma: &Option<Vec<f64>>,
    d: &Option<Vec<f64>>,
) -> Result<PriorConfig, Error> {
    let pair = |v: &Option<Vec<f64>>, what: &str| -> Result<Option<(f64, f64)>, Error> {
        match v {
            None => Ok(None),
            Some(xs) if xs.len() == 2 => Ok(Some((xs[0], xs[1]))),
            Some(_) => Err(Error::Config(format!("{what} expects two comma-separated values"))),
        }
    };
    Ok(PriorConfig {
        mu: match pair(mu, "--mu-prior")? {
            Some((mu0, sigma0)) => MuPriorConfig::Gaussian { mu0, sigma0 },
            None => MuPriorConfig::Flat,
        },
        sigma: match pair(sigma, "--sigma-prior")? {
            Some((alpha0, beta0)) => SigmaPriorConfig::RootInverseGamma { alpha0, beta0 },
            None => SigmaPriorConfig::Diffuse,
        },
        d: match pair(d, "--d-prior")? {
            Some((mean, sd)) => DPriorConfig::TruncatedGaussian { mean, sd },
            None => DPriorConfig::Uniform,
        },
    })
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, Error> {
    v.ok_or_else(|| Error::Config(format!("missing required option {flag}")))
}

fn build_config(cmd: Command) -> Result<RunConfig, Error> {
    match cmd {
        Command::Simulate(a) => {
            if let Some(path) = &a.config.config {
                return cli::load_config(path);
            }
            Ok(RunConfig::Simulate(SimulateConfig {
                n: a.n,
                d: a.d,
                phi: a.phi.unwrap_or_default(),
                theta: a.theta.unwrap_or_default(),
                mu: a.mu,
                sigma: a.sigma,
                innovation: innovation_from(&a.family, a.dof)?,
                seed: a.seed,
                burnin: a.burnin,
                output: require(a.output, "--output")?,
            }))
        }
        Command::Fit(a) => {
            if let Some(path) = &a.config.config {
                return cli::load_config(path);
            }
            let input = require(a.input, "--input")?;
            let output = require(a.output, "--output")?;
            let priors = priors_from(&a.mu_prior, &a.sigma_prior, &a.d_prior)?;
            let innovation = innovation_from(&a.family, a.dof)?;
            if a.rj {
                return Ok(RunConfig::RjFit(RjFitConfig {
                    input,
                    output,
                    samples_output: a.samples_out,
                    iters: a.iters,
                    burnin: a.burnin,
                    thin: a.thin,
                    seed: a.seed,
                    pmax: a.pmax,
                    qmax: a.qmax,
                    lambda: a.lambda,
                    chains: a.chains,
                    prior_only: a.prior_only,
                    priors,
                    innovation,
                    truncation: a.truncation,
                    pilot_iters: 5_000,
                    pilot_sigma: 0.05,
                    xa_update_period: a.xa_period,
                }));
            }
            Ok(RunConfig::Fit(FitConfig {
                input,
                output,
                samples_output: a.samples_out,
                iters: a.iters,
                burnin: a.burnin,
                thin: a.thin,
                seed: a.seed,
                likelihood: likelihood_from(&a.likelihood)?,
                model: a.model,
                chains: a.chains,
                prior_only: a.prior_only,
                priors,
                tuning: TuningConfig { xa_update_period: a.xa_period, ..TuningConfig::default() },
                innovation,
                truncation: a.truncation,
            }))
        }
        Command::Rjfit(a) => {
            if let Some(path) = &a.config.config {
                return cli::load_config(path);
            }
            Ok(RunConfig::RjFit(RjFitConfig {
                input: require(a.input, "--input")?,
                output: require(a.output, "--output")?,
                samples_output: a.samples_out,
                iters: a.iters,
                burnin: a.burnin,
                thin: a.thin,
                seed: a.seed,
                pmax: a.pmax,
                qmax: a.qmax,
                lambda: a.lambda,
                chains: a.chains,
                prior_only: a.prior_only,
                priors: priors_from(&a.mu_prior, &a.sigma_prior, &a.d_prior)?,
                innovation: innovation_from(&a.family, a.dof)?,
                truncation: a.truncation,
                pilot_iters: a.pilot_iters,
                pilot_sigma: a.pilot_sigma,
                xa_update_period: a.xa_period,
            }))
        }
        Command::Estimate(a) => {
            if let Some(path) = &a.config.config {
                return cli::load_config(path);
            }
            Ok(RunConfig::Estimate(EstimateConfig {
                input: require(a.input, "--input")?,
                output: require(a.output, "--output")?,
                gph_bandwidth: a.gph_bandwidth,
                dfa_order: a.dfa_order,
            }))
        }
        Command::Mcstudy(a) => {
            if let Some(path) = &a.config.config {
                return cli::load_config(path);
            }
            Ok(RunConfig::McStudy(McStudyCliConfig {
                output: require(a.output, "--output")?,
                replicates_output: a.replicates_out,
                d_values: a.d_values,
                n_values: a.n_values,
                replicates: a.replicates,
                iters: a.iters,
                burnin: a.burnin,
                thin: a.thin,
                seed: a.seed,
                likelihood: likelihood_from(&a.likelihood)?,
                mu: a.mu,
                sigma: a.sigma,
                parallel: !a.serial,
            }))
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let config = match build_config(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("arfima: {e}");
            std::process::exit(e.exit_code());
        }
    };
    if let Err(e) = cli::run(&config) {
        eprintln!("arfima: {e}");
        std::process::exit(e.exit_code());
    }
}
