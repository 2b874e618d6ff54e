//! Fixed-model MCMC: blocked Metropolis-within-Gibbs updates for mu, sigma
//! and the memory parameter, plus the optional pre-sample refresh.
//!
//! One sweep updates, in order: mu (Gibbs or random-walk MH), sigma (Gibbs or
//! log-space random-walk MH), the memory parameter (interval-truncated RW for
//! FI(d), hypercuboid-truncated MVN RW over (d, varphi, vartheta) otherwise),
//! and periodically the auxiliary pre-sample vector x_A by an independence
//! proposal that backward-projects the observed series.
//!
//! Under the approximate likelihood the expensive part of a memory update is
//! one coefficient recurrence plus one FFT convolution; under the exact
//! likelihood it is one Durbin-Levinson pass, whose whitened output is cached
//! so the mu and sigma updates stay O(n).

use crate::error::{Error, Result};
use crate::likelihood::{
    conditional_loglik, dl_whiten, AugmentedSeries, CVectorContext, DlWhitened, LikelihoodMode,
};
use crate::model::{
    acv_fid, arfima_pi_coeffs, CoeffVector, InnovationFamily, InnovationSpec, MemoryParams,
    ProcessParams, ReparamMemory,
};
use crate::rng::stream_rng;
use crate::truncnorm::{
    mvn_box_prob, normal_interval_prob, normal_logpdf, sample_trunc_mvn, sample_trunc_normal,
};
use crate::util::{mean, sd};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Gamma, StandardNormal, StudentT};

const LN_2PI: f64 = 1.8378770664093453;

/// Prior on the process mean.
#[derive(Debug, Clone, PartialEq)]
pub enum MuPrior {
    Gaussian { mu0: f64, sigma0: f64 },
    Flat,
}

impl MuPrior {
    fn logpdf(&self, mu: f64) -> f64 {
        match self {
            MuPrior::Gaussian { mu0, sigma0 } => normal_logpdf((mu - mu0) / sigma0) - sigma0.ln(),
            MuPrior::Flat => 0.0,
        }
    }
}

/// Prior on the innovation scale: sigma ~ R(alpha0, beta0) means
/// sigma^{-2} ~ Gamma(alpha0, rate beta0). The diffuse limit is p(sigma)
/// proportional to 1/sigma.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaPrior {
    RootInverseGamma { alpha0: f64, beta0: f64 },
    Diffuse,
}

impl SigmaPrior {
    fn logpdf(&self, sigma: f64) -> f64 {
        match self {
            SigmaPrior::RootInverseGamma { alpha0, beta0 } => {
                2f64.ln() + alpha0 * beta0.ln()
                    - statrs::function::gamma::ln_gamma(*alpha0)
                    - (2.0 * alpha0 + 1.0) * sigma.ln()
                    - beta0 / (sigma * sigma)
            }
            SigmaPrior::Diffuse => -sigma.ln(),
        }
    }
}

/// Prior on the memory parameter d, supported on (-1/2, 1/2).
#[derive(Debug, Clone, PartialEq)]
pub enum DPrior {
    Uniform,
    /// Gaussian density restricted to (-1/2, 1/2).
    TruncatedGaussian { mean: f64, sd: f64 },
}

impl DPrior {
    fn logpdf(&self, d: f64) -> f64 {
        if d.abs() >= 0.5 {
            return f64::NEG_INFINITY;
        }
        match self {
            DPrior::Uniform => 0.0,
            DPrior::TruncatedGaussian { mean, sd } => {
                normal_logpdf((d - mean) / sd)
                    - sd.ln()
                    - normal_interval_prob(*mean, *sd, -0.5, 0.5).ln()
            }
        }
    }
}

/// Independent priors for (mu, sigma, d); the PACF coordinates always carry
/// the flat prior on (-1,1) per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mu: MuPrior,
    pub sigma: SigmaPrior,
    pub d: DPrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec { mu: MuPrior::Flat, sigma: SigmaPrior::Diffuse, d: DPrior::Uniform }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if let MuPrior::Gaussian { sigma0, .. } = self.mu {
            if !(sigma0 > 0.0) {
                return Err(Error::Config("mu prior sd must be positive".into()));
            }
        }
        if let SigmaPrior::RootInverseGamma { alpha0, beta0 } = self.sigma {
            if !(alpha0 > 0.0 && beta0 > 0.0) {
                return Err(Error::Config("sigma prior hyperparameters must be positive".into()));
            }
        }
        if let DPrior::TruncatedGaussian { sd, .. } = self.d {
            if !(sd > 0.0) {
                return Err(Error::Config("d prior sd must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Random-walk scales and related knobs.
#[derive(Debug, Clone)]
pub struct TuningSpec {
    pub sigma_mu: f64,
    /// log-scale RW step for sigma
    pub sigma_sigma: f64,
    pub sigma_d: f64,
    /// Proposal covariance for the joint memory update, dimension 1+p+q.
    /// When absent a diagonal fallback is used.
    pub sigma_varpi: Option<DMatrix<f64>>,
    /// Refresh x_A every this many iterations; 0 = never.
    pub xa_update_period: usize,
}

pub const DEFAULT_SIGMA_D: f64 = 0.05;
pub const DEFAULT_SIGMA_SIGMA: f64 = 0.1;
pub const DEFAULT_PACF_STEP: f64 = 0.05;

impl TuningSpec {
    /// Data-driven defaults: sigma_mu = sd(x)/sqrt(n), sigma_sigma = 0.1,
    /// sigma_d = 0.05, x_A never refreshed.
    pub fn default_for(series: &[f64]) -> Self {
        let s = if series.len() > 1 { sd(series) } else { 1.0 };
        TuningSpec {
            sigma_mu: (s / (series.len() as f64).sqrt()).max(1e-8),
            sigma_sigma: DEFAULT_SIGMA_SIGMA,
            sigma_d: DEFAULT_SIGMA_D,
            sigma_varpi: None,
            xa_update_period: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_mu > 0.0 && self.sigma_sigma > 0.0 && self.sigma_d > 0.0) {
            return Err(Error::Config("random-walk scales must be positive".into()));
        }
        if let Some(m) = &self.sigma_varpi {
            if m.nrows() != m.ncols() {
                return Err(Error::Config("proposal covariance must be square".into()));
            }
            if nalgebra::Cholesky::new(m.clone()).is_none() {
                return Err(Error::Config(
                    "proposal covariance must be symmetric positive definite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Which kernels drive mu and sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuSigmaKernel {
    /// Conjugate Gibbs draws (Gaussian innovations only).
    Gibbs,
    /// Random-walk Metropolis-Hastings.
    RandomWalk,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Counter {
    pub accepted: u64,
    pub attempted: u64,
}

impl Counter {
    pub(crate) fn bump(&mut self, accepted: bool) {
        self.attempted += 1;
        if accepted {
            self.accepted += 1;
        }
    }

    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

/// Per-kernel acceptance counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptCounters {
    pub mu: Counter,
    pub sigma: Counter,
    pub memory: Counter,
    pub xa: Counter,
    pub model: Counter,
}

impl AcceptCounters {
    pub fn rates(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (name, c) in [
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("memory", self.memory),
            ("xa", self.xa),
            ("model", self.model),
        ] {
            if c.attempted > 0 {
                out.push((name.to_string(), c.rate()));
            }
        }
        out
    }
}

pub(crate) enum LikCache {
    Approx { ctx: CVectorContext, pi: CoeffVector, pi_sum: f64, c: Vec<f64> },
    Exact { w: DlWhitened },
}

/// Mutable sampler state: current parameters in both parametrisations, the
/// augmented data, cached likelihood pieces, the RNG stream and acceptance
/// counters.
pub struct ChainState {
    pub psi: ProcessParams,
    pub reparam: ReparamMemory,
    pub aug: AugmentedSeries,
    pub prior_only: bool,
    pub mode: LikelihoodMode,
    pub(crate) cache: LikCache,
    pub rng: ChaCha12Rng,
    pub accept: AcceptCounters,
}

impl ChainState {
    /// Initialise at the given memory parameter with mu = sample mean and
    /// sigma = sample standard deviation of the series.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        series: &[f64],
        init_memory: ReparamMemory,
        innovation_family: InnovationFamily,
        shape: Vec<f64>,
        mode: LikelihoodMode,
        truncation: usize,
        prior_only: bool,
        rng: ChaCha12Rng,
    ) -> Result<Self> {
        if series.len() < 2 {
            return Err(Error::Data("need at least two observations".into()));
        }
        if !init_memory.is_valid() {
            return Err(Error::Argument("initial memory parameter out of range".into()));
        }
        let memory = init_memory.to_memory()?;
        if mode == LikelihoodMode::Exact {
            if memory.p() != 0 || memory.q() != 0 {
                return Err(Error::Unsupported(
                    "exact likelihood is only available for FI(d) (p = q = 0)".into(),
                ));
            }
            if innovation_family != InnovationFamily::Gaussian {
                return Err(Error::Unsupported(
                    "exact likelihood requires Gaussian innovations".into(),
                ));
            }
        }
        let sigma0 = sd(series);
        if !(sigma0 > 0.0) {
            return Err(Error::Data("series is constant".into()));
        }
        let innovation = InnovationSpec { family: innovation_family, sigma: sigma0, shape };
        innovation.validate()?;
        let psi = ProcessParams { mu: mean(series), innovation, memory };
        let presample = if mode == LikelihoodMode::Approximate { truncation } else { 0 };
        let aug = AugmentedSeries::with_presample_mean(series.to_vec(), presample)?;
        let cache = Self::build_cache(&aug, &psi.memory, mode)?;
        Ok(ChainState {
            psi,
            reparam: init_memory,
            aug,
            prior_only,
            mode,
            cache,
            rng,
            accept: AcceptCounters::default(),
        })
    }

    fn build_cache(
        aug: &AugmentedSeries,
        memory: &MemoryParams,
        mode: LikelihoodMode,
    ) -> Result<LikCache> {
        match mode {
            LikelihoodMode::Approximate => {
                let mut ctx = CVectorContext::new(aug);
                let pi = arfima_pi_coeffs(memory, aug.truncation())?;
                let c = ctx.compute(&pi)?;
                let pi_sum = pi.sum();
                Ok(LikCache::Approx { ctx, pi, pi_sum, c })
            }
            LikelihoodMode::Exact => {
                let n = aug.n();
                let acv = acv_fid(memory.d, n - 1, 1.0)?;
                let w = dl_whiten(&acv, aug.observed())?;
                Ok(LikCache::Exact { w })
            }
        }
    }

    pub fn n(&self) -> usize {
        self.aug.n()
    }

    pub fn d(&self) -> f64 {
        self.psi.memory.d
    }

    pub fn sigma(&self) -> f64 {
        self.psi.innovation.sigma
    }

    /// Filtered series and AR-weight sum of the current memory parameter
    /// (approximate mode only).
    pub fn c_vector(&self) -> Option<(&[f64], f64)> {
        match &self.cache {
            LikCache::Approx { c, pi_sum, .. } => Some((c, *pi_sum)),
            LikCache::Exact { .. } => None,
        }
    }

    /// AR(infinity) weights of the current memory parameter
    /// (approximate mode only).
    pub fn pi_coeffs(&self) -> Option<&CoeffVector> {
        match &self.cache {
            LikCache::Approx { pi, .. } => Some(pi),
            LikCache::Exact { .. } => None,
        }
    }

    /// Whitened pieces of the exact likelihood (exact mode only).
    pub fn whitened(&self) -> Option<&DlWhitened> {
        match &self.cache {
            LikCache::Exact { w } => Some(w),
            LikCache::Approx { .. } => None,
        }
    }

    /// Log-likelihood at the current state (0 when the likelihood is
    /// disabled for prior-only runs).
    pub fn loglik(&self) -> Result<f64> {
        if self.prior_only {
            return Ok(0.0);
        }
        match &self.cache {
            LikCache::Approx { c, pi_sum, .. } => {
                conditional_loglik(c, *pi_sum, self.psi.mu, &self.psi.innovation)
            }
            LikCache::Exact { w } => {
                Ok(self.exact_loglik_from(w, self.psi.mu, self.psi.innovation.sigma))
            }
        }
    }

    fn exact_loglik_from(&self, w: &DlWhitened, mu: f64, sigma: f64) -> f64 {
        let n = self.n() as f64;
        -0.5 * n * LN_2PI - n * sigma.ln() - 0.5 * w.logdet - w.q(mu) / (2.0 * sigma * sigma)
    }

    fn loglik_at_mu(&self, mu: f64) -> Result<f64> {
        if self.prior_only {
            return Ok(0.0);
        }
        match &self.cache {
            LikCache::Approx { c, pi_sum, .. } => {
                conditional_loglik(c, *pi_sum, mu, &self.psi.innovation)
            }
            LikCache::Exact { w } => Ok(self.exact_loglik_from(w, mu, self.psi.innovation.sigma)),
        }
    }

    fn loglik_at_sigma(&self, sigma: f64) -> Result<f64> {
        if self.prior_only {
            return Ok(0.0);
        }
        let mut innovation = self.psi.innovation.clone();
        innovation.sigma = sigma;
        match &self.cache {
            LikCache::Approx { c, pi_sum, .. } => {
                conditional_loglik(c, *pi_sum, self.psi.mu, &innovation)
            }
            LikCache::Exact { w } => Ok(self.exact_loglik_from(w, self.psi.mu, sigma)),
        }
    }

    /// Replace the memory parameter and install the proposal's precomputed
    /// likelihood pieces (the FFT context / planner is kept).
    pub(crate) fn adopt_memory(
        &mut self,
        reparam: ReparamMemory,
        memory: MemoryParams,
        pieces: CachePieces,
    ) -> Result<()> {
        match (&mut self.cache, pieces) {
            (LikCache::Approx { pi, pi_sum, c, .. }, CachePieces::Approx(npi, nsum, nc)) => {
                *pi = npi;
                *pi_sum = nsum;
                *c = nc;
            }
            (LikCache::Exact { w }, CachePieces::Exact(nw)) => {
                *w = nw;
            }
            _ => return Err(Error::Numerical("likelihood cache mode mismatch".into())),
        }
        self.reparam = reparam;
        self.psi.memory = memory;
        Ok(())
    }

    /// Verify the hard state invariants; called once per sweep.
    fn check_invariants(&self) -> Result<()> {
        if !self.reparam.is_valid() || !(self.psi.innovation.sigma > 0.0) {
            return Err(Error::Numerical(format!(
                "chain state left the parameter space: d = {}, sigma = {}",
                self.reparam.d, self.psi.innovation.sigma
            )));
        }
        Ok(())
    }
}

pub(crate) fn accept(rng: &mut ChaCha12Rng, log_ratio: f64) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_ratio
}

pub(crate) fn mu_log_ratio(state: &ChainState, xi_mu: f64, priors: &PriorSpec) -> Result<f64> {
    Ok(state.loglik_at_mu(xi_mu)? - state.loglik_at_mu(state.psi.mu)? + priors.mu.logpdf(xi_mu)
        - priors.mu.logpdf(state.psi.mu))
}

/// Symmetric random-walk MH update of mu.
pub fn mh_update_mu(
    state: &mut ChainState,
    tuning: &TuningSpec,
    priors: &PriorSpec,
) -> Result<bool> {
    let z: f64 = state.rng.sample(StandardNormal);
    let xi = state.psi.mu + tuning.sigma_mu * z;
    let a = mu_log_ratio(state, xi, priors)?;
    let ok = accept(&mut state.rng, a);
    if ok {
        state.psi.mu = xi;
    }
    state.accept.mu.bump(ok);
    Ok(ok)
}

/// Conjugate Gibbs draw of mu (Gaussian innovations).
pub fn gibbs_update_mu(state: &mut ChainState, priors: &PriorSpec) -> Result<()> {
    if state.psi.innovation.family != InnovationFamily::Gaussian {
        return Err(Error::Unsupported("Gibbs update of mu requires Gaussian innovations".into()));
    }
    let sigma2 = state.sigma() * state.sigma();
    let (prior_prec, prior_term) = match priors.mu {
        MuPrior::Gaussian { mu0, sigma0 } => (1.0 / (sigma0 * sigma0), mu0 / (sigma0 * sigma0)),
        MuPrior::Flat => (0.0, 0.0),
    };
    let (like_prec, like_term) = if state.prior_only {
        (0.0, 0.0)
    } else {
        match &state.cache {
            LikCache::Approx { c, pi_sum, .. } => {
                let n = c.len() as f64;
                let cbar = mean(c);
                (n * pi_sum * pi_sum / sigma2, pi_sum * n * cbar / sigma2)
            }
            LikCache::Exact { w } => (w.one_sinv_one() / sigma2, w.x_sinv_one() / sigma2),
        }
    };
    let prec = prior_prec + like_prec;
    if !(prec > 0.0) {
        return Err(Error::Unsupported(
            "Gibbs update of mu needs a proper prior when the likelihood is disabled".into(),
        ));
    }
    let var = 1.0 / prec;
    let m = var * (prior_term + like_term);
    let z: f64 = state.rng.sample(StandardNormal);
    state.psi.mu = m + var.sqrt() * z;
    state.accept.mu.bump(true);
    Ok(())
}

pub(crate) fn sigma_log_ratio(
    state: &ChainState,
    xi_sigma: f64,
    priors: &PriorSpec,
) -> Result<f64> {
    // log-normal RW proposal: q(sigma; xi)/q(xi; sigma) = xi/sigma
    Ok(state.loglik_at_sigma(xi_sigma)? - state.loglik_at_sigma(state.sigma())?
        + priors.sigma.logpdf(xi_sigma)
        - priors.sigma.logpdf(state.sigma())
        + (xi_sigma / state.sigma()).ln())
}

/// Log-space random-walk MH update of sigma.
pub fn mh_update_sigma(
    state: &mut ChainState,
    tuning: &TuningSpec,
    priors: &PriorSpec,
) -> Result<bool> {
    let z: f64 = state.rng.sample(StandardNormal);
    let xi = state.sigma() * (tuning.sigma_sigma * z).exp();
    let a = sigma_log_ratio(state, xi, priors)?;
    let ok = accept(&mut state.rng, a);
    if ok {
        state.psi.innovation.sigma = xi;
    }
    state.accept.sigma.bump(ok);
    Ok(ok)
}

/// Conjugate Gibbs draw of sigma: R(alpha0 + n/2, beta0 + SS/2) where SS is
/// the conditional sum of squares (approximate) or Q(x | mu, d) (exact).
pub fn gibbs_update_sigma(state: &mut ChainState, priors: &PriorSpec) -> Result<()> {
    if state.psi.innovation.family != InnovationFamily::Gaussian {
        return Err(Error::Unsupported(
            "Gibbs update of sigma requires Gaussian innovations".into(),
        ));
    }
    let (alpha0, beta0) = match priors.sigma {
        SigmaPrior::RootInverseGamma { alpha0, beta0 } => (alpha0, beta0),
        SigmaPrior::Diffuse => (0.0, 0.0),
    };
    let (shape, rate) = if state.prior_only {
        if alpha0 <= 0.0 || beta0 <= 0.0 {
            return Err(Error::Unsupported(
                "Gibbs update of sigma needs a proper prior when the likelihood is disabled"
                    .into(),
            ));
        }
        (alpha0, beta0)
    } else {
        let ss = match &state.cache {
            LikCache::Approx { c, pi_sum, .. } => {
                let mut ss = 0.0;
                for &ct in c.iter() {
                    let e = ct - pi_sum * state.psi.mu;
                    ss += e * e;
                }
                ss
            }
            LikCache::Exact { w } => w.q(state.psi.mu),
        };
        (alpha0 + state.n() as f64 / 2.0, beta0 + 0.5 * ss)
    };
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Numerical(format!("invalid Gamma draw parameters: {e}")))?;
    let tau: f64 = state.rng.sample(gamma);
    if !(tau > 0.0) {
        return Err(Error::Numerical("Gibbs sigma draw produced non-positive precision".into()));
    }
    state.psi.innovation.sigma = 1.0 / tau.sqrt();
    state.accept.sigma.bump(true);
    Ok(())
}

pub(crate) enum CachePieces {
    Approx(CoeffVector, f64, Vec<f64>),
    Exact(DlWhitened),
}

pub(crate) struct MemoryProposal {
    reparam: ReparamMemory,
    memory: MemoryParams,
    log_ratio: f64,
    cache_pieces: CachePieces,
}

/// Proposal machinery shared by the d-update and the joint memory update:
/// compute the proposal's likelihood pieces and the likelihood difference.
pub(crate) fn memory_delta_loglik(
    state: &mut ChainState,
    memory: &MemoryParams,
) -> Result<(f64, CachePieces)> {
    match &mut state.cache {
        LikCache::Approx { ctx, c, pi_sum, .. } => {
            let xi_pi = arfima_pi_coeffs(memory, state.aug.truncation())?;
            let xi_c = ctx.compute(&xi_pi)?;
            let xi_pi_sum = xi_pi.sum();
            let delta = if state.prior_only {
                0.0
            } else {
                conditional_loglik(&xi_c, xi_pi_sum, state.psi.mu, &state.psi.innovation)?
                    - conditional_loglik(c, *pi_sum, state.psi.mu, &state.psi.innovation)?
            };
            Ok((delta, CachePieces::Approx(xi_pi, xi_pi_sum, xi_c)))
        }
        LikCache::Exact { w } => {
            let acv = acv_fid(memory.d, state.aug.n() - 1, 1.0)?;
            let xi_w = dl_whiten(&acv, state.aug.observed())?;
            let delta = if state.prior_only {
                0.0
            } else {
                let sigma2 = state.psi.innovation.sigma * state.psi.innovation.sigma;
                0.5 * (w.logdet - xi_w.logdet)
                    + (w.q(state.psi.mu) - xi_w.q(state.psi.mu)) / (2.0 * sigma2)
            };
            Ok((delta, CachePieces::Exact(xi_w)))
        }
    }
}

fn d_proposal(
    state: &mut ChainState,
    tuning: &TuningSpec,
    priors: &PriorSpec,
) -> Result<MemoryProposal> {
    let d = state.d();
    let (xi_d, _) = sample_trunc_normal(d, tuning.sigma_d, -0.5, 0.5, &mut state.rng)?;
    let mut memory = state.psi.memory.clone();
    memory.d = xi_d;
    let (delta_ll, cache_pieces) = memory_delta_loglik(state, &memory)?;
    // truncated-proposal asymmetry: ratio of the normalising windows
    let window = normal_interval_prob(d, tuning.sigma_d, -0.5, 0.5).ln()
        - normal_interval_prob(xi_d, tuning.sigma_d, -0.5, 0.5).ln();
    let log_ratio = delta_ll + priors.d.logpdf(xi_d) - priors.d.logpdf(d) + window;
    let mut reparam = state.reparam.clone();
    reparam.d = xi_d;
    Ok(MemoryProposal { reparam, memory, log_ratio, cache_pieces })
}

/// Interval-truncated random-walk MH update of the memory parameter d,
/// re-deriving the AR(infinity) weights and filtered series for the proposal.
pub fn mh_update_d(
    state: &mut ChainState,
    tuning: &TuningSpec,
    priors: &PriorSpec,
) -> Result<bool> {
    let prop = d_proposal(state, tuning, priors)?;
    let ok = accept(&mut state.rng, prop.log_ratio);
    if ok {
        state.adopt_memory(prop.reparam, prop.memory, prop.cache_pieces)?;
    }
    state.accept.memory.bump(ok);
    Ok(ok)
}

fn varpi_vector(reparam: &ReparamMemory) -> DVector<f64> {
    let mut v = Vec::with_capacity(1 + reparam.varphi.len() + reparam.vartheta.len());
    v.push(reparam.d);
    v.extend(&reparam.varphi);
    v.extend(&reparam.vartheta);
    DVector::from_vec(v)
}

fn varpi_box(p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lower = vec![-0.5];
    let mut upper = vec![0.5];
    lower.extend(std::iter::repeat(-1.0).take(p + q));
    upper.extend(std::iter::repeat(1.0).take(p + q));
    (lower, upper)
}

pub(crate) fn default_varpi_cov(r: usize, sigma_d: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, r, |i, j| {
        if i != j {
            0.0
        } else if i == 0 {
            sigma_d * sigma_d
        } else {
            DEFAULT_PACF_STEP * DEFAULT_PACF_STEP
        }
    })
}

pub(crate) fn varpi_log_ratio(
    state: &ChainState,
    xi: &ReparamMemory,
    cov: &DMatrix<f64>,
    xi_loglik: f64,
    priors: &PriorSpec,
) -> Result<f64> {
    let (lower, upper) = varpi_box(xi.varphi.len(), xi.vartheta.len());
    let z_cur = mvn_box_prob(&varpi_vector(&state.reparam), cov, &lower, &upper)?;
    let z_prop = mvn_box_prob(&varpi_vector(xi), cov, &lower, &upper)?;
    Ok(xi_loglik - state.loglik()? + priors.d.logpdf(xi.d) - priors.d.logpdf(state.d())
        + z_cur.ln()
        - z_prop.ln())
}

/// Simultaneous hypercuboid-truncated Gaussian RW update of the whole memory
/// parameter (d, varphi, vartheta); approximate likelihood only.
pub fn joint_update_memory(
    state: &mut ChainState,
    tuning: &TuningSpec,
    priors: &PriorSpec,
) -> Result<bool> {
    if state.mode != LikelihoodMode::Approximate {
        return Err(Error::Unsupported(
            "joint memory updates require the approximate likelihood".into(),
        ));
    }
    let p = state.reparam.varphi.len();
    let q = state.reparam.vartheta.len();
    let r = 1 + p + q;
    let cov = match &tuning.sigma_varpi {
        Some(m) if m.nrows() == r => m.clone(),
        Some(_) => {
            return Err(Error::Config(format!(
                "proposal covariance dimension does not match r = {r}"
            )))
        }
        None => default_varpi_cov(r, tuning.sigma_d),
    };
    let chol = nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::Config("proposal covariance must be positive definite".into()))?;
    let (lower, upper) = varpi_box(p, q);
    let (xi_vec, _) = sample_trunc_mvn(
        &varpi_vector(&state.reparam),
        &chol.l().clone_owned(),
        &lower,
        &upper,
        &mut state.rng,
    )?;
    let xi = ReparamMemory {
        d: xi_vec[0],
        varphi: xi_vec.as_slice()[1..1 + p].to_vec(),
        vartheta: xi_vec.as_slice()[1 + p..].to_vec(),
    };
    let memory = xi.to_memory()?;
    let (delta_ll, cache_pieces) = memory_delta_loglik(state, &memory)?;
    let xi_loglik = state.loglik()? + delta_ll;
    let a = varpi_log_ratio(state, &xi, &cov, xi_loglik, priors)?;
    let ok = accept(&mut state.rng, a);
    if ok {
        state.adopt_memory(xi, memory, cache_pieces)?;
    }
    state.accept.memory.bump(ok);
    Ok(ok)
}

/// Innovation means of the backward-projection recursion: given values
/// y_1..y_P and the reversed observed history, the conditional mean of Y_t is
/// Pi_P mu - sum_{k=1}^P pi_k Y_{t-k}.
fn xa_conditional_means(pi: &[f64], mu_term: f64, observed: &[f64], y: &[f64]) -> Vec<f64> {
    let cap = y.len();
    let mut means = Vec::with_capacity(cap);
    for t in 1..=cap {
        let mut m = mu_term;
        for (k, &pik) in pi.iter().enumerate().skip(1) {
            let s = t as isize - k as isize;
            let past = if s >= 1 { y[(s - 1) as usize] } else { observed[(k - t) as usize] };
            m -= pik * past;
        }
        means.push(m);
    }
    means
}

fn innovation_std_draw(state: &mut ChainState) -> Result<f64> {
    match state.psi.innovation.family {
        InnovationFamily::Gaussian => Ok(state.rng.sample(StandardNormal)),
        InnovationFamily::StudentT => {
            let dof = state.psi.innovation.dof().unwrap();
            let t = StudentT::new(dof)
                .map_err(|e| Error::Argument(format!("invalid student-t dof: {e}")))?;
            Ok(state.rng.sample(t))
        }
    }
}

/// Forward-simulate the backward projection: relabel the observed series in
/// reverse, run the truncated AR recursion P steps ahead with the current
/// parameters, and return those values (element i is the proposal for
/// x_{-i}).
pub(crate) fn xa_backward_project(state: &mut ChainState) -> Result<Vec<f64>> {
    let (pi, pi_sum) = match &state.cache {
        LikCache::Approx { pi, pi_sum, .. } => (pi.coeffs.clone(), *pi_sum),
        LikCache::Exact { .. } => {
            return Err(Error::Unsupported(
                "x_A updates require the approximate likelihood".into(),
            ))
        }
    };
    let cap = state.aug.truncation();
    let sigma = state.sigma();
    let mu_term = pi_sum * state.psi.mu;
    let observed = state.aug.observed().to_vec();
    let mut y: Vec<f64> = Vec::with_capacity(cap);
    for t in 1..=cap {
        let mut m = mu_term;
        for (k, &pik) in pi.iter().enumerate().skip(1) {
            let s = t as isize - k as isize;
            let past = if s >= 1 { y[(s - 1) as usize] } else { observed[(k - t) as usize] };
            m -= pik * past;
        }
        let e = innovation_std_draw(state)?;
        y.push(m + sigma * e);
    }
    Ok(y)
}

fn xa_log_proposal_density(state: &ChainState, xa: &[f64]) -> Result<f64> {
    let (pi, pi_sum) = match &state.cache {
        LikCache::Approx { pi, pi_sum, .. } => (&pi.coeffs, *pi_sum),
        LikCache::Exact { .. } => unreachable!(),
    };
    let sigma = state.sigma();
    let means = xa_conditional_means(pi, pi_sum * state.psi.mu, state.aug.observed(), xa);
    let mut lq = -(xa.len() as f64) * sigma.ln();
    for (yt, mt) in xa.iter().zip(&means) {
        let z = (yt - mt) / sigma;
        lq += crate::likelihood::innovation_logpdf(
            z,
            state.psi.innovation.family,
            &state.psi.innovation.shape,
        )?;
    }
    Ok(lq)
}

/// Independence-sampler refresh of the auxiliary pre-sample vector x_A
/// (uniform prior on x_A, so only likelihood and proposal densities enter).
pub fn update_xa(state: &mut ChainState) -> Result<bool> {
    if state.mode != LikelihoodMode::Approximate {
        return Err(Error::Unsupported("x_A updates require the approximate likelihood".into()));
    }
    if state.prior_only {
        return Err(Error::Unsupported(
            "x_A has an improper prior; refreshing it in a prior-only run is undefined".into(),
        ));
    }
    if state.aug.truncation() > state.n() {
        return Err(Error::Unsupported(
            "x_A updates need truncation P <= n (backward projection history)".into(),
        ));
    }
    let proposal = xa_backward_project(state)?;

    // proposal's likelihood pieces: same coefficients, new augmented data
    let mut aug_prop = state.aug.clone();
    aug_prop.set_presample(proposal.clone())?;
    let (pi, pi_sum) = match &state.cache {
        LikCache::Approx { pi, pi_sum, .. } => (pi.clone(), *pi_sum),
        LikCache::Exact { .. } => unreachable!(),
    };
    let c_prop = crate::likelihood::compute_c(&aug_prop, &pi)?;
    let ll_prop = conditional_loglik(&c_prop, pi_sum, state.psi.mu, &state.psi.innovation)?;
    let ll_cur = state.loglik()?;
    let q_prop = xa_log_proposal_density(state, &proposal)?;
    let q_cur = xa_log_proposal_density(state, state.aug.presample())?;

    let a = (ll_prop + q_cur) - (ll_cur + q_prop);
    let ok = accept(&mut state.rng, a);
    if ok {
        state.aug = aug_prop;
        state.cache =
            LikCache::Approx { ctx: CVectorContext::new(&state.aug), pi, pi_sum, c: c_prop };
    }
    state.accept.xa.bump(ok);
    Ok(ok)
}

/// Retained draws of one chain, column-labelled, with acceptance rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub acceptance: Vec<(String, f64)>,
}

impl SampleMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Full configuration of one fixed-model chain.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub init: ReparamMemory,
    pub innovation_family: InnovationFamily,
    pub innovation_shape: Vec<f64>,
    pub priors: PriorSpec,
    pub tuning: TuningSpec,
    pub mode: LikelihoodMode,
    pub kernel: MuSigmaKernel,
    /// Total iterations including burn-in.
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Distinguishes parallel chains/replicates sharing one seed.
    pub stream: Vec<u64>,
    pub prior_only: bool,
    /// AR(infinity) truncation order P; defaults to n.
    pub truncation: Option<usize>,
}

impl ChainConfig {
    pub fn new(init: ReparamMemory, seed: u64) -> Self {
        ChainConfig {
            init,
            innovation_family: InnovationFamily::Gaussian,
            innovation_shape: Vec::new(),
            priors: PriorSpec::default(),
            tuning: TuningSpec {
                sigma_mu: 0.0, // resolved from the data in run_chain
                sigma_sigma: DEFAULT_SIGMA_SIGMA,
                sigma_d: DEFAULT_SIGMA_D,
                sigma_varpi: None,
                xa_update_period: 0,
            },
            mode: LikelihoodMode::Approximate,
            kernel: MuSigmaKernel::Gibbs,
            iters: 12_000,
            burnin: 2_000,
            thin: 1,
            seed,
            stream: vec![0],
            prior_only: false,
            truncation: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::Config(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.truncation == Some(0) {
            return Err(Error::Config("truncation order P must be at least 1".into()));
        }
        self.priors.validate()
    }
}

/// Run one blocked Metropolis-within-Gibbs chain on `series`. Deterministic
/// given (config, seed, stream).
pub fn run_chain(series: &[f64], config: &ChainConfig) -> Result<SampleMatrix> {
    config.validate()?;
    let mut tuning = config.tuning.clone();
    if !(tuning.sigma_mu > 0.0) {
        tuning.sigma_mu = TuningSpec::default_for(series).sigma_mu;
    }
    tuning.validate()?;
    let trunc = config.truncation.unwrap_or(series.len());
    let rng = stream_rng(config.seed, &config.stream);
    let mut state = ChainState::init(
        series,
        config.init.clone(),
        config.innovation_family,
        config.innovation_shape.clone(),
        config.mode,
        trunc,
        config.prior_only,
        rng,
    )?;

    let p = config.init.varphi.len();
    let q = config.init.vartheta.len();
    let mut columns = vec!["d".to_string(), "mu".to_string(), "sigma".to_string()];
    for i in 1..=p {
        columns.push(format!("varphi{i}"));
    }
    for i in 1..=q {
        columns.push(format!("vartheta{i}"));
    }

    // in prior-only runs an improper prior has no marginal to sample
    let do_mu = !config.prior_only || matches!(config.priors.mu, MuPrior::Gaussian { .. });
    let do_sigma =
        !config.prior_only || matches!(config.priors.sigma, SigmaPrior::RootInverseGamma { .. });

    let retained = (config.iters - config.burnin).div_ceil(config.thin);
    let mut rows = Vec::with_capacity(retained);
    for iter in 0..config.iters {
        match config.kernel {
            MuSigmaKernel::Gibbs => {
                if do_mu {
                    gibbs_update_mu(&mut state, &config.priors)?;
                }
                if do_sigma {
                    gibbs_update_sigma(&mut state, &config.priors)?;
                }
            }
            MuSigmaKernel::RandomWalk => {
                if do_mu {
                    mh_update_mu(&mut state, &tuning, &config.priors)?;
                }
                if do_sigma {
                    mh_update_sigma(&mut state, &tuning, &config.priors)?;
                }
            }
        }
        if p + q == 0 {
            mh_update_d(&mut state, &tuning, &config.priors)?;
        } else {
            joint_update_memory(&mut state, &tuning, &config.priors)?;
        }
        if tuning.xa_update_period > 0
            && state.mode == LikelihoodMode::Approximate
            && !state.prior_only
            && (iter + 1) % tuning.xa_update_period == 0
        {
            update_xa(&mut state)?;
        }
        state.check_invariants()?;

        if iter >= config.burnin && (iter - config.burnin) % config.thin == 0 {
            let mut row = Vec::with_capacity(columns.len());
            row.push(state.d());
            row.push(state.psi.mu);
            row.push(state.sigma());
            row.extend(&state.reparam.varphi);
            row.extend(&state.reparam.vartheta);
            rows.push(row);
        }
    }

    Ok(SampleMatrix { columns, rows, acceptance: state.accept.rates() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_state(mode: LikelihoodMode, prior_only: bool) -> ChainState {
        let x = crate::simulate::simulate_fid_exact(128, 0.2, 0.5, 1.0, 42).unwrap();
        ChainState::init(
            &x,
            ReparamMemory { d: 0.1, varphi: vec![], vartheta: vec![] },
            InnovationFamily::Gaussian,
            vec![],
            mode,
            128,
            prior_only,
            stream_rng(1, &[9]),
        )
        .unwrap()
    }

    #[test]
    fn zero_proposals_give_zero_log_ratio() {
        let priors = PriorSpec::default();
        for mode in [LikelihoodMode::Approximate, LikelihoodMode::Exact] {
            let state = toy_state(mode, false);
            let a = mu_log_ratio(&state, state.psi.mu, &priors).unwrap();
            assert!(a.abs() < 1e-12, "mu ratio {a}");
            let a = sigma_log_ratio(&state, state.sigma(), &priors).unwrap();
            assert!(a.abs() < 1e-12, "sigma ratio {a}");
        }
        // joint memory ratio at the current point
        let state = toy_state(LikelihoodMode::Approximate, false);
        let cov = default_varpi_cov(1, 0.05);
        let ll = state.loglik().unwrap();
        let a = varpi_log_ratio(&state, &state.reparam.clone(), &cov, ll, &priors).unwrap();
        assert!(a.abs() < 1e-12, "varpi ratio {a}");
    }

    #[test]
    fn mu_ratio_reduces_to_iid_form() {
        // d = 0, Gaussian, flat prior: A = -(S(xi) - S(mu))/(2 sigma^2)
        let x = vec![0.4, -0.8, 1.2, 0.1, -0.5, 0.9, 1.4, -1.1];
        let mut state = ChainState::init(
            &x,
            ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] },
            InnovationFamily::Gaussian,
            vec![],
            LikelihoodMode::Approximate,
            x.len(),
            false,
            stream_rng(1, &[10]),
        )
        .unwrap();
        state.psi.mu = 0.2;
        let sigma = state.sigma();
        let xi = 0.5;
        let a = mu_log_ratio(&state, xi, &PriorSpec::default()).unwrap();
        let ss = |m: f64| x.iter().map(|&v| (v - m) * (v - m)).sum::<f64>();
        let expect = -(ss(xi) - ss(state.psi.mu)) / (2.0 * sigma * sigma);
        assert!((a - expect).abs() < 1e-9, "{a} vs {expect}");
    }

    #[test]
    fn exact_sigma_ratio_matches_closed_form() {
        // A = (1/sigma^2 - 1/xi^2) Q/2 + prior ratio + (n-1) log(sigma/xi)
        let state = toy_state(LikelihoodMode::Exact, false);
        let xi = state.sigma() * 1.15;
        let priors = PriorSpec::default();
        let a = sigma_log_ratio(&state, xi, &priors).unwrap();
        let w = state.whitened().unwrap();
        let q = w.q(state.psi.mu);
        let n = state.n() as f64;
        let sigma = state.sigma();
        let expect = 0.5 * (1.0 / (sigma * sigma) - 1.0 / (xi * xi)) * q
            + priors.sigma.logpdf(xi)
            - priors.sigma.logpdf(sigma)
            + (n - 1.0) * (sigma / xi).ln();
        assert!((a - expect).abs() < 1e-9, "{a} vs {expect}");
    }

    #[test]
    fn gibbs_mu_flat_prior_iid_case() {
        // d = 0, flat prior: mu | . ~ N(xbar, sigma^2/n)
        let x = vec![1.0, 2.0, 0.5, 1.5, 0.7, 1.3, 0.2, 1.8];
        let mut state = ChainState::init(
            &x,
            ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] },
            InnovationFamily::Gaussian,
            vec![],
            LikelihoodMode::Approximate,
            x.len(),
            false,
            stream_rng(1, &[11]),
        )
        .unwrap();
        let priors = PriorSpec::default();
        let n = x.len() as f64;
        let xbar = mean(&x);
        let sigma = state.sigma();
        let mut draws = Vec::new();
        for _ in 0..40_000 {
            gibbs_update_mu(&mut state, &priors).unwrap();
            draws.push(state.psi.mu);
        }
        let m = mean(&draws);
        let s = sd(&draws);
        let se = sigma / n.sqrt() / (draws.len() as f64).sqrt();
        assert!((m - xbar).abs() < 4.0 * se, "mean {m} vs {xbar}");
        assert!((s - sigma / n.sqrt()).abs() < 0.02 * sigma, "sd {s}");
    }

    #[test]
    fn gibbs_mu_vague_prior_agrees_with_flat() {
        let state = toy_state(LikelihoodMode::Approximate, false);
        let sigma2 = state.sigma() * state.sigma();
        let (c, pi_sum) = state.c_vector().unwrap();
        let n = c.len() as f64;
        let cbar = mean(c);
        // conditional means under flat and under N(0, 1e6^2)
        let m_flat = cbar / pi_sum;
        let prec = 1.0 / 1e12 + n * pi_sum * pi_sum / sigma2;
        let m_vague = (pi_sum * n * cbar / sigma2) / prec;
        assert!((m_flat - m_vague).abs() < 1e-6);
    }

    #[test]
    fn gibbs_sigma_draws_match_gamma_transform() {
        // repeated draws: 1/sigma^2 ~ Gamma(alpha0 + n/2, rate beta0 + SS/2)
        let mut state = toy_state(LikelihoodMode::Approximate, false);
        let priors = PriorSpec {
            mu: MuPrior::Flat,
            sigma: SigmaPrior::RootInverseGamma { alpha0: 2.0, beta0: 1.5 },
            d: DPrior::Uniform,
        };
        let mu_fixed = state.psi.mu;
        let (shape, rate) = {
            let (c, pi_sum) = state.c_vector().unwrap();
            let ss: f64 =
                c.iter().map(|&v| (v - pi_sum * mu_fixed) * (v - pi_sum * mu_fixed)).sum();
            (2.0 + state.n() as f64 / 2.0, 1.5 + ss / 2.0)
        };
        let mut taus = Vec::new();
        for _ in 0..40_000 {
            state.psi.mu = mu_fixed;
            gibbs_update_sigma(&mut state, &priors).unwrap();
            let s = state.sigma();
            taus.push(1.0 / (s * s));
        }
        let m = mean(&taus);
        let v = taus.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (taus.len() as f64 - 1.0);
        let expect_mean = shape / rate;
        let expect_var = shape / (rate * rate);
        assert!((m / expect_mean - 1.0).abs() < 0.03, "tau mean {m} vs {expect_mean}");
        assert!((v / expect_var - 1.0).abs() < 0.10, "tau var {v} vs {expect_var}");
    }

    #[test]
    fn gibbs_rejects_student_t() {
        let x = crate::simulate::simulate_fid_exact(64, 0.0, 0.0, 1.0, 1).unwrap();
        let mut state = ChainState::init(
            &x,
            ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] },
            InnovationFamily::StudentT,
            vec![5.0],
            LikelihoodMode::Approximate,
            64,
            false,
            stream_rng(1, &[12]),
        )
        .unwrap();
        assert!(matches!(
            gibbs_update_mu(&mut state, &PriorSpec::default()),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            gibbs_update_sigma(&mut state, &PriorSpec::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn xa_backward_projection_wiring() {
        // replicate the generator by hand for the first value
        let mut state = toy_state(LikelihoodMode::Approximate, false);
        let pi = state.pi_coeffs().unwrap().coeffs.clone();
        let (_, pi_sum) = state.c_vector().unwrap();
        let observed = state.aug.observed().to_vec();
        let sigma = state.sigma();
        let mu_term = pi_sum * state.psi.mu;
        let mut rng_copy = state.rng.clone();
        let y = xa_backward_project(&mut state).unwrap();
        assert_eq!(y.len(), state.aug.truncation());

        // Y_1 = Pi_P mu - sum_k pi_k x_k + sigma z_1, history y_{1-k} = x_k
        let z1: f64 = rng_copy.sample(StandardNormal);
        let mut m1 = mu_term;
        for (k, &pik) in pi.iter().enumerate().skip(1) {
            m1 -= pik * observed[k - 1];
        }
        assert!((y[0] - (m1 + sigma * z1)).abs() < 1e-12);
    }

    #[test]
    fn xa_update_runs_and_preserves_length() {
        let mut state = toy_state(LikelihoodMode::Approximate, false);
        let p_before = state.aug.truncation();
        for _ in 0..20 {
            update_xa(&mut state).unwrap();
        }
        assert_eq!(state.aug.truncation(), p_before);
        assert_eq!(state.accept.xa.attempted, 20);
    }

    #[test]
    fn run_chain_is_deterministic() {
        let x = crate::simulate::simulate_fid_exact(128, 0.1, 0.0, 1.0, 5).unwrap();
        let mut cfg =
            ChainConfig::new(ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] }, 99);
        cfg.iters = 300;
        cfg.burnin = 100;
        let a = run_chain(&x, &cfg).unwrap();
        let b = run_chain(&x, &cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.len(), 200);
        assert_eq!(a.columns, vec!["d", "mu", "sigma"]);
    }

    #[test]
    fn run_chain_rejects_bad_iteration_counts() {
        let x = vec![0.0, 1.0, 2.0, 1.5];
        let mut cfg =
            ChainConfig::new(ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] }, 1);
        cfg.iters = 10;
        cfg.burnin = 10;
        assert!(matches!(run_chain(&x, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn chain_state_rejects_exact_arma() {
        let x = crate::simulate::simulate_fid_exact(64, 0.0, 0.0, 1.0, 1).unwrap();
        let r = ChainState::init(
            &x,
            ReparamMemory { d: 0.0, varphi: vec![0.3], vartheta: vec![] },
            InnovationFamily::Gaussian,
            vec![],
            LikelihoodMode::Exact,
            64,
            false,
            stream_rng(1, &[13]),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn sampled_parameters_stay_in_bounds() {
        let x = crate::simulate::simulate_fid_exact(128, 0.3, 0.0, 1.0, 6).unwrap();
        let mut cfg = ChainConfig::new(
            ReparamMemory { d: 0.2, varphi: vec![0.5], vartheta: vec![-0.2] },
            3,
        );
        cfg.iters = 400;
        cfg.burnin = 0;
        let out = run_chain(&x, &cfg).unwrap();
        let di = out.columns.iter().position(|c| c == "d").unwrap();
        let vi = out.columns.iter().position(|c| c == "varphi1").unwrap();
        let ti = out.columns.iter().position(|c| c == "vartheta1").unwrap();
        let si = out.columns.iter().position(|c| c == "sigma").unwrap();
        for row in &out.rows {
            assert!(row[di].abs() < 0.5);
            assert!(row[vi].abs() < 1.0);
            assert!(row[ti].abs() < 1.0);
            assert!(row[si] > 0.0);
        }
    }

    #[test]
    fn reparam_memory_consistency_after_sweeps() {
        let x = crate::simulate::simulate_fid_exact(128, 0.2, 0.0, 1.0, 8).unwrap();
        let mut state = ChainState::init(
            &x,
            ReparamMemory { d: 0.1, varphi: vec![0.4, 0.1], vartheta: vec![] },
            InnovationFamily::Gaussian,
            vec![],
            LikelihoodMode::Approximate,
            128,
            false,
            stream_rng(2, &[14]),
        )
        .unwrap();
        let tuning = TuningSpec::default_for(&x);
        let priors = PriorSpec::default();
        for _ in 0..50 {
            gibbs_update_mu(&mut state, &priors).unwrap();
            gibbs_update_sigma(&mut state, &priors).unwrap();
            joint_update_memory(&mut state, &tuning, &priors).unwrap();
            let back = ReparamMemory::from_memory(&state.psi.memory).unwrap();
            assert!((back.d - state.reparam.d).abs() < 1e-10);
            for (a, b) in back.varphi.iter().zip(&state.reparam.varphi) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
