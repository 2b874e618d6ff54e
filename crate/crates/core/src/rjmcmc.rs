//! Transdimensional sampling over ARFIMA model orders (p, q).
//!
//! Models live on the bounded grid 0 <= p <= P_max, 0 <= q <= Q_max with a
//! truncated joint Poisson prior p(p,q) proportional to lambda^{p+q}/(p! q!).
//! Between-model moves are a two-dimensional birth/death process on the grid:
//! a birth appends a fresh PACF coordinate u ~ U(-1,1) to the chosen side,
//! a death drops the last one, all other parameters are carried across
//! unchanged. With the uniform prior over the reparametrised space and the
//! U(-1,1) dimension-matching proposal the Jacobian and density terms cancel,
//! leaving
//!
//! ```text
//! log A = delta loglik + log prior-model-odds + log (U_rev / U_fwd).
//! ```
//!
//! Within-model moves use the blocked proposal covariance of
//! [`build_proposal_cov`]: one dense 3x3 block over (d, varphi_1, vartheta_1)
//! tuned by a pilot chain, and independent diagonal entries for the higher
//! PACF coordinates.

use crate::diagnostics::ModelProbTable;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodMode;
use crate::model::{InnovationFamily, ReparamMemory};
use crate::rng::stream_rng;
use crate::samplers::{
    accept, gibbs_update_mu, gibbs_update_sigma, joint_update_memory, memory_delta_loglik,
    mh_update_mu, mh_update_sigma, update_xa, ChainState, MuPrior, MuSigmaKernel, PriorSpec,
    SampleMatrix, SigmaPrior, TuningSpec,
};
use crate::util::{mean, variance};
use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// ARFIMA short-memory order (p, q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelIndex {
    pub p: usize,
    pub q: usize,
}

/// Truncated joint Poisson model prior on the bounded (p, q) grid.
#[derive(Debug, Clone, Copy)]
pub struct ModelPrior {
    pub lambda: f64,
    pub p_max: usize,
    pub q_max: usize,
}

impl Default for ModelPrior {
    fn default() -> Self {
        ModelPrior { lambda: 1.0, p_max: 5, q_max: 5 }
    }
}

impl ModelPrior {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn contains(&self, m: ModelIndex) -> bool {
        m.p <= self.p_max && m.q <= self.q_max
    }

    fn log_normaliser(&self) -> f64 {
        let mut terms = Vec::with_capacity((self.p_max + 1) * (self.q_max + 1));
        for p in 0..=self.p_max {
            for q in 0..=self.q_max {
                terms.push(self.log_unnormalised(ModelIndex { p, q }));
            }
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    fn log_unnormalised(&self, m: ModelIndex) -> f64 {
        (m.p + m.q) as f64 * self.lambda.ln()
            - ln_gamma(m.p as f64 + 1.0)
            - ln_gamma(m.q as f64 + 1.0)
    }
}

/// Normalised log prior mass of a model; -inf outside the grid.
pub fn model_prior_logmass(m: ModelIndex, prior: &ModelPrior) -> f64 {
    if !prior.contains(m) {
        return f64::NEG_INFINITY;
    }
    prior.log_unnormalised(m) - prior.log_normaliser()
}

/// Grid neighbours at L1 distance one, each with its uniform transition
/// probability (1/4 interior, 1/3 edges, 1/2 corners).
pub fn neighbors(m: ModelIndex, prior: &ModelPrior) -> Vec<(ModelIndex, f64)> {
    let mut out = Vec::with_capacity(4);
    if m.p > 0 {
        out.push(ModelIndex { p: m.p - 1, q: m.q });
    }
    if m.p < prior.p_max {
        out.push(ModelIndex { p: m.p + 1, q: m.q });
    }
    if m.q > 0 {
        out.push(ModelIndex { p: m.p, q: m.q - 1 });
    }
    if m.q < prior.q_max {
        out.push(ModelIndex { p: m.p, q: m.q + 1 });
    }
    let prob = 1.0 / out.len() as f64;
    out.into_iter().map(|mi| (mi, prob)).collect()
}

/// Dimension-matching birth map: append u to the chosen PACF vector.
pub(crate) fn birth(reparam: &ReparamMemory, ar_side: bool, u: f64) -> ReparamMemory {
    let mut next = reparam.clone();
    if ar_side {
        next.varphi.push(u);
    } else {
        next.vartheta.push(u);
    }
    next
}

/// Inverse of [`birth`]: drop the last PACF coordinate of the chosen side.
pub(crate) fn death(reparam: &ReparamMemory, ar_side: bool) -> ReparamMemory {
    let mut next = reparam.clone();
    if ar_side {
        next.varphi.pop();
    } else {
        next.vartheta.pop();
    }
    next
}

/// One reversible-jump birth/death attempt on the chain state.
pub fn rj_step(state: &mut ChainState, prior: &ModelPrior) -> Result<bool> {
    let m = ModelIndex { p: state.reparam.varphi.len(), q: state.reparam.vartheta.len() };
    if !prior.contains(m) {
        return Err(Error::Argument(format!(
            "current model ({}, {}) is outside the prior grid",
            m.p, m.q
        )));
    }
    let nbrs = neighbors(m, prior);
    let pick = state.rng.random_range(0..nbrs.len());
    let (target, u_fwd) = nbrs[pick];
    let u_rev = 1.0 / neighbors(target, prior).len() as f64;

    let ar_side = target.p != m.p;
    let xi = if (ar_side && target.p > m.p) || (!ar_side && target.q > m.q) {
        let u: f64 = state.rng.random_range(-1.0..1.0);
        birth(&state.reparam, ar_side, u)
    } else {
        death(&state.reparam, ar_side)
    };
    let memory = xi.to_memory()?;
    let (delta_ll, pieces) = memory_delta_loglik(state, &memory)?;

    let a = delta_ll + model_prior_logmass(target, prior) - model_prior_logmass(m, prior)
        + u_rev.ln()
        - u_fwd.ln();
    let ok = accept(&mut state.rng, a);
    if ok {
        state.adopt_memory(xi, memory, pieces)?;
    }
    state.accept.model.bump(ok);
    Ok(ok)
}

/// Pilot-tuned blocks of the within-model proposal covariance.
#[derive(Debug, Clone)]
pub struct ProposalCov {
    /// Dense covariance over (d, varphi_1, vartheta_1).
    pub sigma11: Matrix3<f64>,
    /// Shared variance of varphi_2..varphi_p proposals.
    pub sigma2_varphi: f64,
    /// Shared variance of vartheta_2..vartheta_q proposals.
    pub sigma2_vartheta: f64,
}

impl Default for ProposalCov {
    fn default() -> Self {
        let s = crate::samplers::DEFAULT_SIGMA_D;
        let t = 0.1;
        ProposalCov {
            sigma11: Matrix3::from_diagonal(&nalgebra::Vector3::new(s * s, t * t, t * t)),
            sigma2_varphi: t * t,
            sigma2_vartheta: t * t,
        }
    }
}

/// Assemble the full (1+p+q)-dimensional proposal covariance for one model:
/// sigma11 entries land on the (d, varphi_1, vartheta_1) coordinates, higher
/// PACF coordinates get independent diagonal entries, blocks for an absent
/// side are omitted.
pub fn build_proposal_cov(m: ModelIndex, pc: &ProposalCov) -> Result<DMatrix<f64>> {
    let r = 1 + m.p + m.q;
    let mut cov = DMatrix::zeros(r, r);
    cov[(0, 0)] = pc.sigma11[(0, 0)];
    if m.p >= 1 {
        cov[(0, 1)] = pc.sigma11[(0, 1)];
        cov[(1, 0)] = pc.sigma11[(0, 1)];
        cov[(1, 1)] = pc.sigma11[(1, 1)];
    }
    if m.q >= 1 {
        let j = 1 + m.p;
        cov[(0, j)] = pc.sigma11[(0, 2)];
        cov[(j, 0)] = pc.sigma11[(0, 2)];
        cov[(j, j)] = pc.sigma11[(2, 2)];
        if m.p >= 1 {
            cov[(1, j)] = pc.sigma11[(1, 2)];
            cov[(j, 1)] = pc.sigma11[(1, 2)];
        }
    }
    for i in 2..=m.p {
        cov[(i, i)] = pc.sigma2_varphi;
    }
    for i in 2..=m.q {
        let j = m.p + i;
        cov[(j, j)] = pc.sigma2_vartheta;
    }
    if nalgebra::Cholesky::new(cov.clone()).is_none() {
        return Err(Error::Config(
            "assembled proposal covariance is not positive definite".into(),
        ));
    }
    Ok(cov)
}

/// Pilot chain configuration.
#[derive(Debug, Clone)]
pub struct PilotConfig {
    pub iters: usize,
    pub burnin: usize,
    /// Scale of the independent (diagonal) pilot proposals.
    pub sigma: f64,
    pub seed: u64,
    pub stream: Vec<u64>,
    pub priors: PriorSpec,
    pub kernel: MuSigmaKernel,
    pub truncation: Option<usize>,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig {
            iters: 5_000,
            burnin: 1_000,
            sigma: 0.05,
            seed: 0,
            stream: vec![0x9_107],
            priors: PriorSpec::default(),
            kernel: MuSigmaKernel::Gibbs,
            truncation: None,
        }
    }
}

/// Run a short fixed-model chain with independent proposals and return the
/// rescaled sample covariance of (d, varphi_1, vartheta_1) — the classic
/// 2.38^2/r optimal-scaling heuristic — plus pooled variances for the higher
/// PACF coordinates.
pub fn pilot_tune(series: &[f64], m: ModelIndex, cfg: &PilotConfig) -> Result<ProposalCov> {
    if series.len() < 128 {
        return Err(Error::Argument(format!(
            "pilot tuning needs at least 128 observations, got {}",
            series.len()
        )));
    }
    let r = 1 + m.p + m.q;
    let mut chain_cfg = crate::samplers::ChainConfig::new(
        ReparamMemory { d: 0.0, varphi: vec![0.0; m.p], vartheta: vec![0.0; m.q] },
        cfg.seed,
    );
    chain_cfg.stream = cfg.stream.clone();
    chain_cfg.iters = cfg.iters;
    chain_cfg.burnin = cfg.burnin.min(cfg.iters.saturating_sub(1));
    chain_cfg.priors = cfg.priors.clone();
    chain_cfg.kernel = cfg.kernel;
    chain_cfg.truncation = cfg.truncation;
    chain_cfg.tuning.sigma_d = cfg.sigma;
    chain_cfg.tuning.sigma_varpi =
        Some(DMatrix::from_diagonal_element(r, r, cfg.sigma * cfg.sigma));
    let samples = crate::samplers::run_chain(series, &chain_cfg)?;

    let scale = 2.38 * 2.38 / r as f64;
    let fallback = ProposalCov::default();
    let d_col = samples.column("d").unwrap();
    let v1 = samples.column("varphi1");
    let t1 = samples.column("vartheta1");

    let mut cols: Vec<Option<Vec<f64>>> = vec![Some(d_col), v1, t1];
    let mut sigma11 = fallback.sigma11;
    for i in 0..3 {
        for j in i..3 {
            if let (Some(a), Some(b)) = (&cols[i], &cols[j]) {
                let ma = mean(a);
                let mb = mean(b);
                let cov = a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - ma) * (y - mb))
                    .sum::<f64>()
                    / (a.len() as f64 - 1.0);
                sigma11[(i, j)] = scale * cov;
                sigma11[(j, i)] = scale * cov;
            } else if i == j {
                // coordinate absent from this model: keep the default step
                sigma11[(i, j)] = fallback.sigma11[(i, i)];
            } else {
                sigma11[(i, j)] = 0.0;
                sigma11[(j, i)] = 0.0;
            }
        }
    }
    cols.clear();

    let pooled = |prefix: &str, count: usize| -> Option<f64> {
        if count < 2 {
            return None;
        }
        let mut vars = Vec::new();
        for i in 2..=count {
            if let Some(col) = samples.column(&format!("{prefix}{i}")) {
                vars.push(variance(&col));
            }
        }
        if vars.is_empty() {
            None
        } else {
            Some(scale * mean(&vars))
        }
    };
    let sigma2_varphi = pooled("varphi", m.p).unwrap_or(fallback.sigma2_varphi);
    let sigma2_vartheta = pooled("vartheta", m.q).unwrap_or(fallback.sigma2_vartheta);

    let mut pc = ProposalCov {
        sigma11,
        sigma2_varphi: sigma2_varphi.max(1e-10),
        sigma2_vartheta: sigma2_vartheta.max(1e-10),
    };
    // degenerate pilot output: drop correlations, keep variances
    if nalgebra::Cholesky::new(pc.sigma11).is_none() {
        let mut diag = Matrix3::zeros();
        for i in 0..3 {
            diag[(i, i)] = pc.sigma11[(i, i)].max(1e-10);
        }
        pc.sigma11 = diag;
    }
    for i in 0..3 {
        if !(pc.sigma11[(i, i)] > 1e-12) {
            pc.sigma11[(i, i)] = fallback.sigma11[(i, i)];
        }
    }
    Ok(pc)
}

/// Reversible-jump chain configuration.
#[derive(Debug, Clone)]
pub struct RjConfig {
    pub model_prior: ModelPrior,
    pub init_model: ModelIndex,
    pub init_d: f64,
    pub priors: PriorSpec,
    pub kernel: MuSigmaKernel,
    pub innovation_family: InnovationFamily,
    pub innovation_shape: Vec<f64>,
    /// Within-model proposal blocks; None runs a pilot chain on (1,1) first.
    pub proposal: Option<ProposalCov>,
    pub pilot: PilotConfig,
    /// Total iterations including burn-in.
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream: Vec<u64>,
    pub prior_only: bool,
    pub truncation: Option<usize>,
    pub xa_update_period: usize,
}

impl RjConfig {
    pub fn new(seed: u64) -> Self {
        RjConfig {
            model_prior: ModelPrior::default(),
            init_model: ModelIndex { p: 1, q: 1 },
            init_d: 0.0,
            priors: PriorSpec::default(),
            kernel: MuSigmaKernel::Gibbs,
            innovation_family: InnovationFamily::Gaussian,
            innovation_shape: Vec::new(),
            proposal: None,
            pilot: PilotConfig::default(),
            iters: 12_000,
            burnin: 2_000,
            thin: 1,
            seed,
            stream: vec![1],
            prior_only: false,
            truncation: None,
            xa_update_period: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model_prior.validate()?;
        self.priors.validate()?;
        if self.iters <= self.burnin {
            return Err(Error::Config(format!(
                "iters ({}) must exceed burnin ({})",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if !self.model_prior.contains(self.init_model) {
            return Err(Error::Config("initial model outside the prior grid".into()));
        }
        if self.init_d.abs() >= 0.5 {
            return Err(Error::Config("initial d must lie in (-1/2, 1/2)".into()));
        }
        Ok(())
    }
}

/// Run one reversible-jump chain: per iteration a mu update, a sigma update,
/// a within-model joint memory move and one birth/death attempt. Emits
/// (p, q, d, mu, sigma, varphi.., vartheta..) with PACF columns padded to the
/// grid bounds (NaN when the coordinate is absent from the current model).
pub fn run_rj_chain(series: &[f64], cfg: &RjConfig) -> Result<SampleMatrix> {
    cfg.validate()?;
    let prior = cfg.model_prior;

    let pc = match &cfg.proposal {
        Some(pc) => pc.clone(),
        None if cfg.prior_only => ProposalCov::default(),
        None => {
            let mut pilot_cfg = cfg.pilot.clone();
            pilot_cfg.seed = cfg.seed;
            pilot_cfg.stream = cfg.stream.iter().cloned().chain([0x9_107]).collect();
            pilot_cfg.priors = cfg.priors.clone();
            pilot_cfg.truncation = cfg.truncation;
            let pilot_model =
                ModelIndex { p: 1.min(prior.p_max), q: 1.min(prior.q_max) };
            pilot_tune(series, pilot_model, &pilot_cfg)?
        }
    };

    let mut rng = stream_rng(cfg.seed, &cfg.stream);
    let init = ReparamMemory {
        d: cfg.init_d,
        varphi: (0..cfg.init_model.p).map(|_| rng.random_range(-0.95..0.95)).collect(),
        vartheta: (0..cfg.init_model.q).map(|_| rng.random_range(-0.95..0.95)).collect(),
    };
    let trunc = cfg.truncation.unwrap_or(series.len());
    let mut state = ChainState::init(
        series,
        init,
        cfg.innovation_family,
        cfg.innovation_shape.clone(),
        LikelihoodMode::Approximate,
        trunc,
        cfg.prior_only,
        rng,
    )?;

    let mut columns =
        vec!["p".to_string(), "q".to_string(), "d".to_string(), "mu".to_string(), "sigma".to_string()];
    for i in 1..=prior.p_max {
        columns.push(format!("varphi{i}"));
    }
    for i in 1..=prior.q_max {
        columns.push(format!("vartheta{i}"));
    }

    let do_mu = !cfg.prior_only || matches!(cfg.priors.mu, MuPrior::Gaussian { .. });
    let do_sigma =
        !cfg.prior_only || matches!(cfg.priors.sigma, SigmaPrior::RootInverseGamma { .. });
    let mut tuning = TuningSpec::default_for(series);
    tuning.xa_update_period = cfg.xa_update_period;

    let retained = (cfg.iters - cfg.burnin).div_ceil(cfg.thin);
    let mut rows = Vec::with_capacity(retained);
    for iter in 0..cfg.iters {
        match cfg.kernel {
            MuSigmaKernel::Gibbs => {
                if do_mu {
                    gibbs_update_mu(&mut state, &cfg.priors)?;
                }
                if do_sigma {
                    gibbs_update_sigma(&mut state, &cfg.priors)?;
                }
            }
            MuSigmaKernel::RandomWalk => {
                if do_mu {
                    mh_update_mu(&mut state, &tuning, &cfg.priors)?;
                }
                if do_sigma {
                    mh_update_sigma(&mut state, &tuning, &cfg.priors)?;
                }
            }
        }

        let m = ModelIndex { p: state.reparam.varphi.len(), q: state.reparam.vartheta.len() };
        tuning.sigma_varpi = Some(build_proposal_cov(m, &pc)?);
        joint_update_memory(&mut state, &tuning, &cfg.priors)?;

        rj_step(&mut state, &prior)?;

        if cfg.xa_update_period > 0
            && !cfg.prior_only
            && (iter + 1) % cfg.xa_update_period == 0
        {
            update_xa(&mut state)?;
        }

        if iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0 {
            let mut row = Vec::with_capacity(columns.len());
            row.push(state.reparam.varphi.len() as f64);
            row.push(state.reparam.vartheta.len() as f64);
            row.push(state.reparam.d);
            row.push(state.psi.mu);
            row.push(state.sigma());
            for i in 0..prior.p_max {
                row.push(state.reparam.varphi.get(i).copied().unwrap_or(f64::NAN));
            }
            for i in 0..prior.q_max {
                row.push(state.reparam.vartheta.get(i).copied().unwrap_or(f64::NAN));
            }
            rows.push(row);
        }
    }

    Ok(SampleMatrix { columns, rows, acceptance: state.accept.rates() })
}

/// Posterior model-probability table of an RJ run.
pub fn model_table_of(samples: &SampleMatrix, prior: &ModelPrior) -> Result<ModelProbTable> {
    crate::diagnostics::model_table(samples, prior.p_max, prior.q_max)
}
