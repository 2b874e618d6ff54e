//! Command-line surface: simulate, fit, rjfit, estimate, mcstudy.
//!
//! Every command is driven by a fully-resolved, serialisable config struct;
//! the emitted result JSON embeds that config, so any run can be reproduced
//! from its own output file via `--config` (results are deterministic given
//! config and seed, except for the `timestamp` field).
//!
//! Input series are headerless or single-header CSV, one observation per
//! line. Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
//! failure.

use crate::diagnostics::{self, ModelProbTable, PosteriorSummary};
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodMode;
use crate::model::{InnovationFamily, ReparamMemory};
use crate::rjmcmc::{self, ModelIndex, ModelPrior, PilotConfig, RjConfig};
use crate::samplers::{
    ChainConfig, DPrior, MuPrior, MuSigmaKernel, PriorSpec, SampleMatrix, SigmaPrior, TuningSpec,
};
use crate::simulate::{simulate_arfima, SimSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: &str = "1";

const DEFAULT_ITERS: usize = 12_000;
const DEFAULT_BURNIN: usize = 2_000;

fn d1() -> f64 {
    1.0
}
fn u1() -> usize {
    1
}
fn default_iters() -> usize {
    DEFAULT_ITERS
}
fn default_burnin() -> usize {
    DEFAULT_BURNIN
}
fn default_chains() -> usize {
    5
}
fn default_pmax() -> usize {
    5
}
fn default_lambda() -> f64 {
    1.0
}
fn default_dfa_order() -> usize {
    1
}

/// Innovation distribution in configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationConfig {
    Gaussian,
    StudentT { dof: f64 },
}

impl Default for InnovationConfig {
    fn default() -> Self {
        InnovationConfig::Gaussian
    }
}

impl InnovationConfig {
    fn family(&self) -> InnovationFamily {
        match self {
            InnovationConfig::Gaussian => InnovationFamily::Gaussian,
            InnovationConfig::StudentT { .. } => InnovationFamily::StudentT,
        }
    }

    fn shape(&self) -> Vec<f64> {
        match self {
            InnovationConfig::Gaussian => vec![],
            InnovationConfig::StudentT { dof } => vec![*dof],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodConfig {
    Approx,
    Exact,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        LikelihoodConfig::Approx
    }
}

impl LikelihoodConfig {
    fn mode(&self) -> LikelihoodMode {
        match self {
            LikelihoodConfig::Approx => LikelihoodMode::Approximate,
            LikelihoodConfig::Exact => LikelihoodMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuPriorConfig {
    Flat,
    Gaussian { mu0: f64, sigma0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaPriorConfig {
    Diffuse,
    RootInverseGamma { alpha0: f64, beta0: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DPriorConfig {
    Uniform,
    TruncatedGaussian { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default = "mu_flat")]
    pub mu: MuPriorConfig,
    #[serde(default = "sigma_diffuse")]
    pub sigma: SigmaPriorConfig,
    #[serde(default = "d_uniform")]
    pub d: DPriorConfig,
}

fn mu_flat() -> MuPriorConfig {
    MuPriorConfig::Flat
}
fn sigma_diffuse() -> SigmaPriorConfig {
    SigmaPriorConfig::Diffuse
}
fn d_uniform() -> DPriorConfig {
    DPriorConfig::Uniform
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { mu: mu_flat(), sigma: sigma_diffuse(), d: d_uniform() }
    }
}

impl PriorConfig {
    fn to_spec(&self) -> PriorSpec {
        PriorSpec {
            mu: match &self.mu {
                MuPriorConfig::Flat => MuPrior::Flat,
                MuPriorConfig::Gaussian { mu0, sigma0 } => {
                    MuPrior::Gaussian { mu0: *mu0, sigma0: *sigma0 }
                }
            },
            sigma: match &self.sigma {
                SigmaPriorConfig::Diffuse => SigmaPrior::Diffuse,
                SigmaPriorConfig::RootInverseGamma { alpha0, beta0 } => {
                    SigmaPrior::RootInverseGamma { alpha0: *alpha0, beta0: *beta0 }
                }
            },
            d: match &self.d {
                DPriorConfig::Uniform => DPrior::Uniform,
                DPriorConfig::TruncatedGaussian { mean, sd } => {
                    DPrior::TruncatedGaussian { mean: *mean, sd: *sd }
                }
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    /// Resolved to sd(x)/sqrt(n) when absent.
    #[serde(default)]
    pub sigma_mu: Option<f64>,
    #[serde(default = "default_sigma_sigma")]
    pub sigma_sigma: f64,
    #[serde(default = "default_sigma_d")]
    pub sigma_d: f64,
    #[serde(default)]
    pub xa_update_period: usize,
}

fn default_sigma_sigma() -> f64 {
    crate::samplers::DEFAULT_SIGMA_SIGMA
}
fn default_sigma_d() -> f64 {
    crate::samplers::DEFAULT_SIGMA_D
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            sigma_mu: None,
            sigma_sigma: default_sigma_sigma(),
            sigma_d: default_sigma_d(),
            xa_update_period: 0,
        }
    }
}

impl TuningConfig {
    fn resolve(&self, series: &[f64]) -> (TuningSpec, TuningConfig) {
        let defaults = TuningSpec::default_for(series);
        let sigma_mu = self.sigma_mu.unwrap_or(defaults.sigma_mu);
        let spec = TuningSpec {
            sigma_mu,
            sigma_sigma: self.sigma_sigma,
            sigma_d: self.sigma_d,
            sigma_varpi: None,
            xa_update_period: self.xa_update_period,
        };
        let resolved = TuningConfig { sigma_mu: Some(sigma_mu), ..self.clone() };
        (spec, resolved)
    }
}

/// simulate: write one synthetic series as CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub d: f64,
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "d1")]
    pub sigma: f64,
    #[serde(default)]
    pub innovation: InnovationConfig,
    #[serde(default)]
    pub seed: u64,
    /// ARMA filter burn-in; resolved to 10*max(p,q,50) when absent.
    #[serde(default)]
    pub burnin: Option<usize>,
    pub output: PathBuf,
}

/// fit: fixed-order Bayesian inference.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub samples_output: Option<PathBuf>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "u1")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub likelihood: LikelihoodConfig,
    /// Short-memory order (p, q).
    #[serde(default)]
    pub model: (usize, usize),
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub prior_only: bool,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub tuning: TuningConfig,
    #[serde(default)]
    pub innovation: InnovationConfig,
    /// AR(infinity) truncation order; resolved to n when absent.
    #[serde(default)]
    pub truncation: Option<usize>,
}

/// rjfit: reversible-jump inference over unknown (p, q).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RjFitConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub samples_output: Option<PathBuf>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "u1")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pmax")]
    pub pmax: usize,
    #[serde(default = "default_pmax")]
    pub qmax: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub prior_only: bool,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub innovation: InnovationConfig,
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default = "default_pilot_iters")]
    pub pilot_iters: usize,
    #[serde(default = "default_pilot_sigma")]
    pub pilot_sigma: f64,
    #[serde(default)]
    pub xa_update_period: usize,
}

fn default_pilot_iters() -> usize {
    5_000
}
fn default_pilot_sigma() -> f64 {
    0.05
}

/// estimate: classical comparator estimators on one series.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub gph_bandwidth: Option<usize>,
    #[serde(default = "default_dfa_order")]
    pub dfa_order: usize,
}

/// mcstudy: simulate-and-fit over a (d, n) grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McStudyCliConfig {
    pub output: PathBuf,
    #[serde(default)]
    pub replicates_output: Option<PathBuf>,
    pub d_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "u1")]
    pub thin: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub likelihood: LikelihoodConfig,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "d1")]
    pub sigma: f64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

/// Any command's config, tagged for config-file dispatch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "lowercase", deny_unknown_fields)]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Fit(FitConfig),
    RjFit(RjFitConfig),
    Estimate(EstimateConfig),
    McStudy(McStudyCliConfig),
}

/// Load a config file; accepts either a bare [`RunConfig`] document or a
/// result JSON that embeds one under `"config"`.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    let node = if value.get("config").is_some() && value.get("schema_version").is_some() {
        value.get("config").unwrap().clone()
    } else {
        value
    };
    serde_json::from_value(node)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

/// Read a series from headerless or single-header CSV, one value per line.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => {
                return Err(Error::Data(format!(
                    "{}:{}: non-finite value {v}",
                    path.display(),
                    lineno + 1
                )))
            }
            Err(_) if lineno == 0 => continue, // header line
            Err(_) => {
                return Err(Error::Data(format!(
                    "{}:{}: cannot parse '{line}' as a number",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{}: no observations", path.display())));
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", dir.display()))))?;
        }
    }
    let mut f = fs::File::create(path)
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    Ok(())
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Posterior entry in result JSON: {mean, sd, ci95}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub mean: f64,
    pub sd: f64,
    pub ci95: [f64; 2],
}

fn posterior_map(summary: &PosteriorSummary) -> (BTreeMap<String, PosteriorEntry>, BTreeMap<String, f64>) {
    let mut post = BTreeMap::new();
    let mut ess = BTreeMap::new();
    for (name, p) in &summary.params {
        post.insert(
            name.clone(),
            PosteriorEntry { mean: p.mean, sd: p.sd, ci95: [p.ci_low, p.ci_high] },
        );
        ess.insert(name.clone(), p.ess);
    }
    (post, ess)
}

fn acceptance_map(chains: &[SampleMatrix]) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for chain in chains {
        for (name, rate) in &chain.acceptance {
            let e = sums.entry(name.clone()).or_insert((0.0, 0));
            e.0 += rate;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn pooled(chains: &[SampleMatrix]) -> SampleMatrix {
    let mut rows = Vec::new();
    for c in chains {
        rows.extend(c.rows.iter().cloned());
    }
    SampleMatrix { columns: chains[0].columns.clone(), rows, acceptance: vec![] }
}

fn rhat_map(chains: &[SampleMatrix], names: &[&str]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if chains.len() < 2 {
        return out;
    }
    for name in names {
        let cols: Vec<Vec<f64>> = chains
            .iter()
            .filter_map(|c| c.column(name))
            .map(|col| col.into_iter().filter(|v| v.is_finite()).collect::<Vec<f64>>())
            .filter(|c: &Vec<f64>| c.len() >= 2)
            .collect();
        if cols.len() == chains.len() {
            out.insert(name.to_string(), diagnostics::rhat(&cols));
        }
    }
    out
}

/// Starting points for multi-chain runs: d cycles over the five regular
/// points; the chain index seeds the PACF starts.
pub fn chain_start_d(chain: usize) -> f64 {
    const STARTS: [f64; 5] = [-0.4, -0.2, 0.0, 0.2, 0.4];
    STARTS[chain % 5]
}

fn float_csv(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------------------
// simulate

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<PathBuf> {
    let memory = crate::model::MemoryParams::new(cfg.d, cfg.phi.clone(), cfg.theta.clone())?;
    let innovation = match &cfg.innovation {
        InnovationConfig::Gaussian => crate::model::InnovationSpec::gaussian(cfg.sigma),
        InnovationConfig::StudentT { dof } => {
            crate::model::InnovationSpec::student_t(cfg.sigma, *dof)
        }
    };
    let burnin = cfg.burnin.unwrap_or_else(|| default_burnin_for(&memory));
    let spec =
        SimSpec { n: cfg.n, memory, mu: cfg.mu, innovation, seed: cfg.seed, burnin };
    let x = simulate_arfima(&spec)?;
    let mut out = String::with_capacity(x.len() * 12 + 2);
    out.push_str("x\n");
    for v in &x {
        out.push_str(&format!("{v}\n"));
    }
    write_file(&cfg.output, &out)?;
    Ok(cfg.output.clone())
}

fn default_burnin_for(memory: &crate::model::MemoryParams) -> usize {
    crate::simulate::default_burnin(memory)
}

// ---------------------------------------------------------------------------
// fit

/// Result JSON of `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: String,
    pub version: String,
    pub command: String,
    pub timestamp: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub data: DataInfo,
    pub model: ModelInfo,
    pub likelihood: LikelihoodConfig,
    pub chains: usize,
    pub draws: usize,
    pub posterior: BTreeMap<String, PosteriorEntry>,
    pub ess: BTreeMap<String, f64>,
    pub acceptance: BTreeMap<String, f64>,
    pub rhat: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataInfo {
    pub path: PathBuf,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInfo {
    pub p: usize,
    pub q: usize,
}

fn validate_common(iters: usize, burnin: usize, thin: usize, chains: usize) -> Result<()> {
    if iters <= burnin {
        return Err(Error::Config(format!("iters ({iters}) must exceed burnin ({burnin})")));
    }
    if thin == 0 {
        return Err(Error::Config("thin must be at least 1".into()));
    }
    if chains == 0 {
        return Err(Error::Config("chains must be at least 1".into()));
    }
    Ok(())
}

pub fn cmd_fit(cfg: &FitConfig) -> Result<FitReport> {
    validate_common(cfg.iters, cfg.burnin, cfg.thin, cfg.chains)?;
    let (p, q) = cfg.model;
    if cfg.likelihood == LikelihoodConfig::Exact && (p > 0 || q > 0) {
        return Err(Error::Config(
            "exact likelihood supports only model (0,0); use --likelihood approx".into(),
        ));
    }
    let series = read_series(&cfg.input)?;
    let (tuning, tuning_resolved) = cfg.tuning.resolve(&series);
    let truncation = cfg.truncation.unwrap_or(series.len());

    let chain_results: Vec<Result<SampleMatrix>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain_idx| {
            let mut rng = crate::rng::stream_rng(cfg.seed, &[0xf1_7, chain_idx as u64, 0]);
            use rand::Rng;
            let init = ReparamMemory {
                d: chain_start_d(chain_idx),
                varphi: (0..p).map(|_| rng.random_range(-0.95..0.95)).collect(),
                vartheta: (0..q).map(|_| rng.random_range(-0.95..0.95)).collect(),
            };
            let chain_cfg = ChainConfig {
                init,
                innovation_family: cfg.innovation.family(),
                innovation_shape: cfg.innovation.shape(),
                priors: cfg.priors.to_spec(),
                tuning: tuning.clone(),
                mode: cfg.likelihood.mode(),
                kernel: if cfg.innovation == InnovationConfig::Gaussian {
                    MuSigmaKernel::Gibbs
                } else {
                    MuSigmaKernel::RandomWalk
                },
                iters: cfg.iters,
                burnin: cfg.burnin,
                thin: cfg.thin,
                seed: cfg.seed,
                stream: vec![0xf1_7, chain_idx as u64, 1],
                prior_only: cfg.prior_only,
                truncation: Some(truncation),
            };
            crate::samplers::run_chain(&series, &chain_cfg)
        })
        .collect();
    let mut chains = Vec::with_capacity(cfg.chains);
    for r in chain_results {
        chains.push(r?);
    }

    let pooled_samples = pooled(&chains);
    let summary = diagnostics::summarize(&pooled_samples)?;
    let (posterior, ess) = posterior_map(&summary);

    let mut resolved = cfg.clone();
    resolved.tuning = tuning_resolved;
    resolved.truncation = Some(truncation);

    let report = FitReport {
        schema_version: SCHEMA_VERSION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "fit".into(),
        timestamp: timestamp(),
        seed: cfg.seed,
        config: RunConfig::Fit(resolved),
        data: DataInfo { path: cfg.input.clone(), n: series.len() },
        model: ModelInfo { p, q },
        likelihood: cfg.likelihood,
        chains: cfg.chains,
        draws: pooled_samples.len(),
        posterior,
        ess,
        acceptance: acceptance_map(&chains),
        rhat: rhat_map(&chains, &["d", "mu", "sigma"]),
    };
    write_file(&cfg.output, &to_json(&report)?)?;

    if let Some(samples_path) = &cfg.samples_output {
        let mut out = String::new();
        out.push_str("iter");
        for col in &pooled_samples.columns {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for (i, row) in pooled_samples.rows.iter().enumerate() {
            out.push_str(&format!("{i}"));
            for v in row {
                out.push(',');
                out.push_str(&float_csv(*v));
            }
            out.push('\n');
        }
        write_file(samples_path, &out)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// rjfit

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RjFitReport {
    pub schema_version: String,
    pub version: String,
    pub command: String,
    pub timestamp: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub data: DataInfo,
    pub chains: usize,
    pub draws: usize,
    pub posterior: BTreeMap<String, PosteriorEntry>,
    pub ess: BTreeMap<String, f64>,
    pub acceptance: BTreeMap<String, f64>,
    pub rhat: BTreeMap<String, f64>,
    pub model_probabilities: ModelTableJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelTableJson {
    pub pmax: usize,
    pub qmax: usize,
    /// probs[p][q]
    pub probs: Vec<Vec<f64>>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
    pub modal: ModalEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModalEntry {
    pub p: usize,
    pub q: usize,
    pub prob: f64,
}

impl From<&ModelProbTable> for ModelTableJson {
    fn from(t: &ModelProbTable) -> Self {
        let (p, q, prob) = t.modal();
        ModelTableJson {
            pmax: t.p_max,
            qmax: t.q_max,
            probs: t.probs.clone(),
            row_marginals: t.row_marginals.clone(),
            col_marginals: t.col_marginals.clone(),
            modal: ModalEntry { p, q, prob },
        }
    }
}

pub fn cmd_rjfit(cfg: &RjFitConfig) -> Result<RjFitReport> {
    validate_common(cfg.iters, cfg.burnin, cfg.thin, cfg.chains)?;
    if !(cfg.lambda > 0.0) {
        return Err(Error::Config("lambda must be positive".into()));
    }
    let series = read_series(&cfg.input)?;
    let model_prior = ModelPrior { lambda: cfg.lambda, p_max: cfg.pmax, q_max: cfg.qmax };

    let chain_results: Vec<Result<SampleMatrix>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain_idx| {
            let rj_cfg = RjConfig {
                model_prior,
                init_model: ModelIndex { p: 1.min(cfg.pmax), q: 1.min(cfg.qmax) },
                init_d: chain_start_d(chain_idx),
                priors: cfg.priors.to_spec(),
                kernel: if cfg.innovation == InnovationConfig::Gaussian {
                    MuSigmaKernel::Gibbs
                } else {
                    MuSigmaKernel::RandomWalk
                },
                innovation_family: cfg.innovation.family(),
                innovation_shape: cfg.innovation.shape(),
                proposal: None,
                pilot: PilotConfig {
                    iters: cfg.pilot_iters,
                    burnin: cfg.pilot_iters / 5,
                    sigma: cfg.pilot_sigma,
                    seed: cfg.seed,
                    stream: vec![0x12_9, chain_idx as u64, 2],
                    priors: cfg.priors.to_spec(),
                    kernel: MuSigmaKernel::Gibbs,
                    truncation: cfg.truncation,
                },
                iters: cfg.iters,
                burnin: cfg.burnin,
                thin: cfg.thin,
                seed: cfg.seed,
                stream: vec![0x12_9, chain_idx as u64, 1],
                prior_only: cfg.prior_only,
                truncation: cfg.truncation,
                xa_update_period: cfg.xa_update_period,
            };
            rjmcmc::run_rj_chain(&series, &rj_cfg)
        })
        .collect();
    let mut chains = Vec::with_capacity(cfg.chains);
    for r in chain_results {
        chains.push(r?);
    }

    let pooled_samples = pooled(&chains);
    let summary = diagnostics::summarize(&pooled_samples)?;
    let (posterior, ess) = posterior_map(&summary);
    let table = diagnostics::model_table(&pooled_samples, cfg.pmax, cfg.qmax)?;

    let mut resolved = cfg.clone();
    resolved.truncation = Some(cfg.truncation.unwrap_or(series.len()));

    let report = RjFitReport {
        schema_version: SCHEMA_VERSION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "rjfit".into(),
        timestamp: timestamp(),
        seed: cfg.seed,
        config: RunConfig::RjFit(resolved),
        data: DataInfo { path: cfg.input.clone(), n: series.len() },
        chains: cfg.chains,
        draws: pooled_samples.len(),
        posterior,
        ess,
        acceptance: acceptance_map(&chains),
        rhat: rhat_map(&chains, &["d", "mu", "sigma"]),
        model_probabilities: ModelTableJson::from(&table),
    };
    write_file(&cfg.output, &to_json(&report)?)?;

    if let Some(samples_path) = &cfg.samples_output {
        let mut out = String::new();
        out.push_str("iter");
        for col in &pooled_samples.columns {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for (i, row) in pooled_samples.rows.iter().enumerate() {
            out.push_str(&format!("{i}"));
            for v in row {
                out.push(',');
                out.push_str(&float_csv(*v));
            }
            out.push('\n');
        }
        write_file(samples_path, &out)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: String,
    pub version: String,
    pub command: String,
    pub timestamp: u64,
    pub config: RunConfig,
    pub data: DataInfo,
    pub estimates: BTreeMap<String, EstimateEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimateEntry {
    Ok {
        d_hat: f64,
        stderr: Option<f64>,
        slope: f64,
        n_points: usize,
        scales: Vec<usize>,
    },
    Failed {
        error: String,
    },
}

pub fn cmd_estimate(cfg: &EstimateConfig) -> Result<EstimateReport> {
    let series = read_series(&cfg.input)?;
    let mut estimates = BTreeMap::new();
    let mut any_ok = false;
    let mut record = |name: &str, res: Result<crate::estimators::EstimatorResult>| match res {
        Ok(r) => {
            estimates.insert(
                name.to_string(),
                EstimateEntry::Ok {
                    d_hat: r.d_hat,
                    stderr: r.stderr,
                    slope: r.slope,
                    n_points: r.n_points,
                    scales: r.scales,
                },
            );
            true
        }
        Err(e) => {
            estimates.insert(name.to_string(), EstimateEntry::Failed { error: e.to_string() });
            false
        }
    };
    any_ok |= record("rs", crate::estimators::estimate_rs(&series));
    any_ok |= record("gph", crate::estimators::estimate_gph(&series, cfg.gph_bandwidth));
    any_ok |= record("dfa", crate::estimators::estimate_dfa(&series, cfg.dfa_order));

    let report = EstimateReport {
        schema_version: SCHEMA_VERSION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "estimate".into(),
        timestamp: timestamp(),
        config: RunConfig::Estimate(cfg.clone()),
        data: DataInfo { path: cfg.input.clone(), n: series.len() },
        estimates,
    };
    write_file(&cfg.output, &to_json(&report)?)?;
    if !any_ok {
        return Err(Error::Data("all estimators failed on this series".into()));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// mcstudy

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McStudyReportJson {
    pub schema_version: String,
    pub version: String,
    pub command: String,
    pub timestamp: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub replicates_run: usize,
    pub failures: usize,
    pub coverage: f64,
    pub mean_d_residual: f64,
    pub slope_log_sd_d_vs_log_n: Option<f64>,
    pub slope_log_sd_mu_vs_d: Option<f64>,
    /// log(n) reference for the sigma_mu-vs-d slope at fixed n.
    pub log_n_reference: Option<f64>,
}

pub fn cmd_mcstudy(cfg: &McStudyCliConfig) -> Result<McStudyReportJson> {
    validate_common(cfg.iters, cfg.burnin, cfg.thin, 1)?;
    if cfg.d_values.is_empty() || cfg.n_values.is_empty() || cfg.replicates == 0 {
        return Err(Error::Config("mcstudy grid must be non-empty".into()));
    }
    let total = cfg.d_values.len() * cfg.n_values.len() * cfg.replicates;
    if total < 10 {
        return Err(Error::Config(format!(
            "mcstudy needs at least 10 replicate runs, configured {total}"
        )));
    }
    for &d in &cfg.d_values {
        if d.abs() >= 0.5 {
            return Err(Error::Config(format!("d values must lie in (-1/2, 1/2), got {d}")));
        }
    }
    let study = diagnostics::McStudyConfig {
        d_values: cfg.d_values.clone(),
        n_values: cfg.n_values.clone(),
        replicates: cfg.replicates,
        mu: cfg.mu,
        sigma: cfg.sigma,
        mode: cfg.likelihood.mode(),
        iters: cfg.iters,
        burnin: cfg.burnin,
        thin: cfg.thin,
        seed: cfg.seed,
        parallel: cfg.parallel,
    };
    let report = diagnostics::mc_study(&study)?;

    let json = McStudyReportJson {
        schema_version: SCHEMA_VERSION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "mcstudy".into(),
        timestamp: timestamp(),
        seed: cfg.seed,
        config: RunConfig::McStudy(cfg.clone()),
        replicates_run: report.replicates.len(),
        failures: report.failures.len(),
        coverage: report.coverage,
        mean_d_residual: report.mean_d_residual,
        slope_log_sd_d_vs_log_n: report.slope_log_sd_d_vs_log_n,
        slope_log_sd_mu_vs_d: report.slope_log_sd_mu_vs_d,
        log_n_reference: if cfg.n_values.len() == 1 {
            Some((cfg.n_values[0] as f64).ln())
        } else {
            None
        },
    };
    write_file(&cfg.output, &to_json(&json)?)?;

    if let Some(csv_path) = &cfg.replicates_output {
        let mut out = String::new();
        out.push_str(
            "cell,replicate,d_input,n,d_mean,d_sd,d_ci_low,d_ci_high,covered,\
             mu_mean,mu_sd,sigma_mean,sigma_sd\n",
        );
        for r in &report.replicates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.cell,
                r.replicate,
                r.d_input,
                r.n,
                r.d.mean,
                r.d.sd,
                r.d.ci_low,
                r.d.ci_high,
                r.covered as u8,
                r.mu.mean,
                r.mu.sd,
                r.sigma.mean,
                r.sigma.sd
            ));
        }
        write_file(csv_path, &out)?;
    }
    Ok(json)
}

// ---------------------------------------------------------------------------

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("serialisation failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Dispatch a loaded config.
pub fn run(config: &RunConfig) -> Result<()> {
    match config {
        RunConfig::Simulate(c) => cmd_simulate(c).map(|_| ()),
        RunConfig::Fit(c) => cmd_fit(c).map(|_| ()),
        RunConfig::RjFit(c) => cmd_rjfit(c).map(|_| ()),
        RunConfig::Estimate(c) => cmd_estimate(c).map(|_| ()),
        RunConfig::McStudy(c) => cmd_mcstudy(c).map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"{"command":"estimate","input":"a.csv","output":"b.json","bogus":1}"#;
        let r: std::result::Result<RunConfig, _> = serde_json::from_str(text);
        assert!(r.is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::Fit(FitConfig {
            input: "x.csv".into(),
            output: "out.json".into(),
            samples_output: None,
            iters: 500,
            burnin: 100,
            thin: 2,
            seed: 7,
            likelihood: LikelihoodConfig::Exact,
            model: (0, 0),
            chains: 1,
            prior_only: false,
            priors: PriorConfig::default(),
            tuning: TuningConfig::default(),
            innovation: InnovationConfig::Gaussian,
            truncation: None,
        });
        let s = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn read_series_accepts_header_and_rejects_nan() {
        let dir = std::env::temp_dir().join("arfima_cli_unit");
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("ok.csv");
        fs::write(&p, "x\n1.0\n2.5\n-3\n").unwrap();
        assert_eq!(read_series(&p).unwrap(), vec![1.0, 2.5, -3.0]);

        let p = dir.join("headerless.csv");
        fs::write(&p, "1.0\n2.0\n").unwrap();
        assert_eq!(read_series(&p).unwrap(), vec![1.0, 2.0]);

        let p = dir.join("nan.csv");
        fs::write(&p, "1.0\nNaN\n").unwrap();
        assert!(matches!(read_series(&p), Err(Error::Data(_))));

        let p = dir.join("bad.csv");
        fs::write(&p, "1.0\noops\n").unwrap();
        assert!(matches!(read_series(&p), Err(Error::Data(_))));

        let p = dir.join("empty.csv");
        fs::write(&p, "").unwrap();
        assert!(matches!(read_series(&p), Err(Error::Data(_))));
    }
}
