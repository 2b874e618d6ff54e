//! Exact and approximate ARFIMA likelihoods.
//!
//! Exact (Gaussian FI(d) only): the log-likelihood
//!
//! ```text
//! l(x | mu, sigma, d) = -(n/2) log 2pi - n log sigma
//!                       - log det(S_d)/2 - Q(x | mu, d)/(2 sigma^2)
//! ```
//!
//! is evaluated through the Durbin-Levinson recursion on the Toeplitz
//! autocovariance sequence, O(n^2) time and O(n) memory, never materialising
//! the covariance matrix. `log det(S_d)` and the quadratic form `Q` are
//! returned separately so MH acceptance ratios can reuse them.
//!
//! Approximate (any ARFIMA order, any location-scale innovation): truncate
//! the AR(infinity) representation at P terms and condition on a pre-sample
//! vector x_A, giving
//!
//! ```text
//! l(x | psi, x_A) ~ -n log sigma + sum_t log f((c_t - Pi_P mu)/sigma),
//! c_t = sum_{k=0}^P pi_k x_{t-k},  Pi_P = sum_{k=0}^P pi_k,
//! ```
//!
//! where the c vector is a single FFT convolution of the augmented series.

use crate::error::{Error, Result};
use crate::fft::FixedSignalConv;
use crate::model::{CoeffVector, InnovationFamily, InnovationSpec, ProcessParams};
use crate::model::{acv_fid, arfima_pi_coeffs};
use crate::util::all_finite;
use statrs::function::gamma::ln_gamma;

const LN_2PI: f64 = 1.8378770664093453;

/// Observed series plus the auxiliary pre-sample vector.
///
/// `x_a` is stored in time-reversed order: `x_a[i]` plays the role of the
/// unobserved value x_{-i}, so `x_a[0]` is the value immediately before the
/// first observation.
#[derive(Debug, Clone)]
pub struct AugmentedSeries {
    x: Vec<f64>,
    x_a: Vec<f64>,
}

impl AugmentedSeries {
    pub fn new(x: Vec<f64>, x_a: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Argument("series must be non-empty".into()));
        }
        if !all_finite(&x) || !all_finite(&x_a) {
            return Err(Error::Data("series values must all be finite".into()));
        }
        Ok(AugmentedSeries { x, x_a })
    }

    /// Initialise the pre-sample at the sample mean of the observations.
    pub fn with_presample_mean(x: Vec<f64>, trunc: usize) -> Result<Self> {
        let xbar = x.iter().sum::<f64>() / x.len() as f64;
        let x_a = vec![xbar; trunc];
        AugmentedSeries::new(x, x_a)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Truncation order P (the pre-sample length).
    pub fn truncation(&self) -> usize {
        self.x_a.len()
    }

    pub fn observed(&self) -> &[f64] {
        &self.x
    }

    pub fn presample(&self) -> &[f64] {
        &self.x_a
    }

    pub fn set_presample(&mut self, x_a: Vec<f64>) -> Result<()> {
        if x_a.len() != self.x_a.len() {
            return Err(Error::Argument("pre-sample length must stay equal to P".into()));
        }
        if !all_finite(&x_a) {
            return Err(Error::Data("pre-sample values must be finite".into()));
        }
        self.x_a = x_a;
        Ok(())
    }

    /// The augmented series in forward time order:
    /// (x_{1-P}, ..., x_0, x_1, ..., x_n).
    pub fn forward_augmented(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x_a.len() + self.x.len());
        out.extend(self.x_a.iter().rev());
        out.extend(&self.x);
        out
    }
}

/// Likelihood evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodMode {
    Exact,
    Approximate,
}

/// Convolution of the augmented data with the AR(infinity) weights:
/// c_t = sum_{k=0}^P pi_k x_{t-k} for t = 1..n, computed via FFT.
pub fn compute_c(aug: &AugmentedSeries, pi: &CoeffVector) -> Result<Vec<f64>> {
    if pi.coeffs.len() != aug.truncation() + 1 {
        return Err(Error::Argument(format!(
            "coefficient vector has length {}, expected P+1 = {}",
            pi.coeffs.len(),
            aug.truncation() + 1
        )));
    }
    let mut conv = FixedSignalConv::new(&aug.forward_augmented(), pi.coeffs.len());
    Ok(conv.convolve(&pi.coeffs, aug.truncation(), aug.n()))
}

/// Reusable convolution context for one fixed augmented series: the data
/// transform is cached so each new coefficient vector costs two FFTs.
pub struct CVectorContext {
    conv: FixedSignalConv,
    trunc: usize,
    n: usize,
}

impl CVectorContext {
    pub fn new(aug: &AugmentedSeries) -> Self {
        let trunc = aug.truncation();
        CVectorContext {
            conv: FixedSignalConv::new(&aug.forward_augmented(), trunc + 1),
            trunc,
            n: aug.n(),
        }
    }

    pub fn compute(&mut self, pi: &CoeffVector) -> Result<Vec<f64>> {
        if pi.coeffs.len() != self.trunc + 1 {
            return Err(Error::Argument(format!(
                "coefficient vector has length {}, expected P+1 = {}",
                pi.coeffs.len(),
                self.trunc + 1
            )));
        }
        Ok(self.conv.convolve(&pi.coeffs, self.trunc, self.n))
    }
}

/// Cached pieces of the approximate likelihood for one memory parameter.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    pub pi: CoeffVector,
    /// Pi_P = sum of the AR(infinity) weights; multiplies mu.
    pub pi_sum: f64,
    pub c: Vec<f64>,
    pub mode: LikelihoodMode,
}

impl LikelihoodContext {
    pub fn build(aug: &AugmentedSeries, pi: CoeffVector) -> Result<Self> {
        let c = compute_c(aug, &pi)?;
        let pi_sum = pi.sum();
        Ok(LikelihoodContext { pi, pi_sum, c, mode: LikelihoodMode::Approximate })
    }

    pub fn loglik(&self, mu: f64, innovation: &InnovationSpec) -> Result<f64> {
        conditional_loglik(&self.c, self.pi_sum, mu, innovation)
    }
}

/// Log density of the standardised innovation at z (unit scale).
pub fn innovation_logpdf(z: f64, family: InnovationFamily, shape: &[f64]) -> Result<f64> {
    match family {
        InnovationFamily::Gaussian => Ok(-0.5 * LN_2PI - 0.5 * z * z),
        InnovationFamily::StudentT => {
            let nu = shape.first().copied().unwrap_or(f64::NAN);
            if !(nu > 2.0) {
                return Err(Error::Argument(format!(
                    "student-t degrees of freedom must exceed 2, got {nu}"
                )));
            }
            Ok(ln_gamma((nu + 1.0) / 2.0)
                - ln_gamma(nu / 2.0)
                - 0.5 * (nu * std::f64::consts::PI).ln()
                - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p())
        }
    }
}

/// Approximate conditional log-likelihood given the filtered series c.
pub fn conditional_loglik(
    c: &[f64],
    pi_sum: f64,
    mu: f64,
    innovation: &InnovationSpec,
) -> Result<f64> {
    innovation.validate()?;
    let n = c.len() as f64;
    let sigma = innovation.sigma;
    let mut ll = -n * sigma.ln();
    match innovation.family {
        InnovationFamily::Gaussian => {
            let mut ss = 0.0;
            for &ct in c {
                let z = ct - pi_sum * mu;
                ss += z * z;
            }
            ll += -0.5 * n * LN_2PI - 0.5 * ss / (sigma * sigma);
        }
        InnovationFamily::StudentT => {
            for &ct in c {
                let z = (ct - pi_sum * mu) / sigma;
                ll += innovation_logpdf(z, innovation.family, &innovation.shape)?;
            }
        }
    }
    Ok(ll)
}

/// Truncated-AR(infinity) conditional log-likelihood of the observed series.
pub fn approx_loglik(aug: &AugmentedSeries, psi: &ProcessParams) -> Result<f64> {
    psi.validate()?;
    let pi = arfima_pi_coeffs(&psi.memory, aug.truncation())?;
    let ctx = LikelihoodContext::build(aug, pi)?;
    ctx.loglik(psi.mu, &psi.innovation)
}

/// Whitened representation of a series under the FI(d) covariance: the
/// innovations of x and of the all-ones vector, plus prediction variances and
/// log det. One O(n^2) Durbin-Levinson pass; everything the exact-likelihood
/// kernels need afterwards is O(n).
#[derive(Debug, Clone)]
pub struct DlWhitened {
    pub logdet: f64,
    pub e_x: Vec<f64>,
    pub e_one: Vec<f64>,
    pub v: Vec<f64>,
}

impl DlWhitened {
    /// Quadratic form Q(x | mu, d) = (x - mu 1)' S_d^{-1} (x - mu 1).
    pub fn q(&self, mu: f64) -> f64 {
        let mut q = 0.0;
        for t in 0..self.v.len() {
            let e = self.e_x[t] - mu * self.e_one[t];
            q += e * e / self.v[t];
        }
        q
    }

    /// 1' S_d^{-1} 1
    pub fn one_sinv_one(&self) -> f64 {
        self.v.iter().zip(&self.e_one).map(|(&v, &e)| e * e / v).sum()
    }

    /// x' S_d^{-1} 1
    pub fn x_sinv_one(&self) -> f64 {
        (0..self.v.len()).map(|t| self.e_x[t] * self.e_one[t] / self.v[t]).sum()
    }
}

/// Core Durbin-Levinson state: one-step prediction coefficients and variance,
/// advanced lag by lag. Shared by the exact likelihood and the exact
/// simulator.
pub(crate) struct DlRecursion {
    acv: Vec<f64>,
    /// prediction coefficients a_1..a_m: xhat_{m+1} = sum_j a_j y_{m+1-j}
    pub a: Vec<f64>,
    scratch: Vec<f64>,
    /// current one-step prediction variance
    pub v: f64,
    m: usize,
}

impl DlRecursion {
    pub fn new(acv: Vec<f64>) -> Result<Self> {
        if acv.is_empty() || acv[0] <= 0.0 {
            return Err(Error::Numerical("autocovariance at lag 0 must be positive".into()));
        }
        let v = acv[0];
        let cap = acv.len();
        Ok(DlRecursion {
            acv,
            a: Vec::with_capacity(cap),
            scratch: Vec::with_capacity(cap),
            v,
            m: 0,
        })
    }

    /// Advance from conditioning on m past values to m+1.
    pub fn advance(&mut self) -> Result<()> {
        let m = self.m;
        if m + 1 >= self.acv.len() {
            return Err(Error::Argument("autocovariance sequence exhausted".into()));
        }
        let mut k = self.acv[m + 1];
        for j in 1..=m {
            k -= self.a[j - 1] * self.acv[m + 1 - j];
        }
        k /= self.v;
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.a);
        self.a.push(k);
        for j in 1..=m {
            self.a[j - 1] = self.scratch[j - 1] - k * self.scratch[m - j];
        }
        self.v *= 1.0 - k * k;
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::Numerical(
                "Durbin-Levinson prediction variance is not positive".into(),
            ));
        }
        self.m += 1;
        Ok(())
    }
}

/// Whiten x (and implicitly the ones vector) under the Toeplitz covariance
/// with autocovariances `acv[0..n-1]`.
pub fn dl_whiten(acv: &[f64], x: &[f64]) -> Result<DlWhitened> {
    let n = x.len();
    if acv.len() < n {
        return Err(Error::Argument("need autocovariances up to lag n-1".into()));
    }
    let mut rec = DlRecursion::new(acv.to_vec())?;
    let mut e_x = Vec::with_capacity(n);
    let mut e_one = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut logdet = 0.0;
    for t in 0..n {
        let mut px = 0.0;
        let mut pone = 0.0;
        for (j, &aj) in rec.a.iter().enumerate() {
            px += aj * x[t - 1 - j];
            pone += aj;
        }
        e_x.push(x[t] - px);
        e_one.push(1.0 - pone);
        v.push(rec.v);
        logdet += rec.v.ln();
        if t + 1 < n {
            rec.advance()?;
        }
    }
    Ok(DlWhitened { logdet, e_x, e_one, v })
}

/// Exact Gaussian FI(d) log-likelihood with its reusable pieces.
#[derive(Debug, Clone, Copy)]
pub struct ExactLoglik {
    pub loglik: f64,
    pub logdet: f64,
    pub q: f64,
}

/// Exact Gaussian log-likelihood of an FI(d) series via Durbin-Levinson.
pub fn exact_loglik(x: &[f64], mu: f64, sigma: f64, d: f64) -> Result<ExactLoglik> {
    if x.is_empty() {
        return Err(Error::Argument("series must be non-empty".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let acv = acv_fid(d, x.len().saturating_sub(1), 1.0)?;
    let w = dl_whiten(&acv, x)?;
    let q = w.q(mu);
    let n = x.len() as f64;
    let loglik = -0.5 * n * LN_2PI - n * sigma.ln() - 0.5 * w.logdet - q / (2.0 * sigma * sigma);
    Ok(ExactLoglik { loglik, logdet: w.logdet, q })
}
