//! ARFIMA(p,d,q) process definitions.
//!
//! Sign convention: AR and MA polynomials are written with a **plus** sign,
//!
//! ```text
//! Phi(z) = 1 + phi_1 z + ... + phi_p z^p,
//! Theta(z) = 1 + theta_1 z + ... + theta_q z^q,
//! ```
//!
//! so an ARFIMA(p,d,q) process satisfies Phi(B)(1-B)^d (X_t - mu) = Theta(B) e_t.
//! Most other libraries use `1 - sum(...)`; negate coefficients when porting.
//!
//! The memory parameter `d` lives in the open interval (-1/2, 1/2); d > 0 is
//! long memory, d < 0 negative memory, d = 0 plain ARMA.

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Full memory parameter omega = (phi, theta, d).
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryParams {
    pub d: f64,
    /// AR coefficients phi_1..phi_p in the "+" convention.
    pub phi: Vec<f64>,
    /// MA coefficients theta_1..theta_q in the "+" convention.
    pub theta: Vec<f64>,
}

impl MemoryParams {
    /// Pure fractional noise FI(d), no short-memory structure.
    pub fn fid(d: f64) -> Self {
        MemoryParams { d, phi: Vec::new(), theta: Vec::new() }
    }

    /// Validating constructor: requires |d| < 1/2, a stationary AR polynomial
    /// and an invertible MA polynomial.
    pub fn new(d: f64, phi: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        let m = MemoryParams { d, phi, theta };
        m.validate()?;
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn q(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() || self.d.abs() >= 0.5 {
            return Err(Error::Domain(format!(
                "memory parameter d must lie in (-1/2, 1/2), got {}",
                self.d
            )));
        }
        monahan_to_pacf(&self.phi)
            .map_err(|_| Error::Domain("AR polynomial is not stationary".into()))?;
        monahan_to_pacf(&self.theta)
            .map_err(|_| Error::Domain("MA polynomial is not invertible".into()))?;
        Ok(())
    }
}

/// Memory parameter in the PACF parametrisation: d plus one value in (-1,1)
/// per AR and MA coefficient. Bijective with [`MemoryParams`] via the Monahan
/// recursions, which is what makes box-constrained proposals and
/// reversible-jump moves possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamMemory {
    pub d: f64,
    pub varphi: Vec<f64>,
    pub vartheta: Vec<f64>,
}

impl ReparamMemory {
    pub fn from_memory(m: &MemoryParams) -> Result<Self> {
        Ok(ReparamMemory {
            d: m.d,
            varphi: monahan_to_pacf(&m.phi)?,
            vartheta: monahan_to_pacf(&m.theta)?,
        })
    }

    pub fn to_memory(&self) -> Result<MemoryParams> {
        Ok(MemoryParams {
            d: self.d,
            phi: pacf_to_monahan(&self.varphi)?,
            theta: pacf_to_monahan(&self.vartheta)?,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.d.is_finite()
            && self.d.abs() < 0.5
            && self.varphi.iter().all(|v| v.abs() < 1.0)
            && self.vartheta.iter().all(|v| v.abs() < 1.0)
    }
}

/// Innovation distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationFamily {
    Gaussian,
    StudentT,
}

/// Zero-mean location-scale innovation specification: family, scale sigma and
/// optional shape vector (degrees of freedom for Student-t).
///
/// The Student-t density is standardised to unit *scale*, not unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationSpec {
    pub family: InnovationFamily,
    pub sigma: f64,
    pub shape: Vec<f64>,
}

impl InnovationSpec {
    pub fn gaussian(sigma: f64) -> Self {
        InnovationSpec { family: InnovationFamily::Gaussian, sigma, shape: Vec::new() }
    }

    pub fn student_t(sigma: f64, dof: f64) -> Self {
        InnovationSpec { family: InnovationFamily::StudentT, sigma, shape: vec![dof] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        match self.family {
            InnovationFamily::Gaussian => Ok(()),
            InnovationFamily::StudentT => {
                let dof = self.shape.first().copied().unwrap_or(f64::NAN);
                // dof <= 2 means infinite variance: not stationary in the L2 sense.
                if !(dof > 2.0) {
                    return Err(Error::Argument(format!(
                        "student-t degrees of freedom must exceed 2, got {dof}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dof(&self) -> Option<f64> {
        match self.family {
            InnovationFamily::Gaussian => None,
            InnovationFamily::StudentT => self.shape.first().copied(),
        }
    }
}

/// Everything the likelihood needs: mean, innovation spec and memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessParams {
    pub mu: f64,
    pub innovation: InnovationSpec,
    pub memory: MemoryParams,
}

impl ProcessParams {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Domain("mu must be finite".into()));
        }
        self.innovation.validate()?;
        self.memory.validate()
    }
}

/// Truncated series expansion weights, coeffs[0..=P] with coeffs[0] = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub coeffs: Vec<f64>,
}

impl CoeffVector {
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// AR(infinity) weights pi_k of the fractional differencing operator
/// (1-B)^d, truncated at `trunc`.
///
/// Uses the ratio recurrence pi_k = pi_{k-1} (k-1-d)/k with pi_0 = 1, which
/// is algebraically identical to the binomial/Gamma forms but free of
/// Gamma-function overflow.
pub fn fi_pi_coeffs(d: f64, trunc: usize) -> CoeffVector {
    let mut coeffs = Vec::with_capacity(trunc + 1);
    coeffs.push(1.0);
    for k in 1..=trunc {
        let k = k as f64;
        let prev = coeffs[coeffs.len() - 1];
        coeffs.push(prev * (k - 1.0 - d) / k);
    }
    CoeffVector { coeffs }
}

/// MA(infinity) weights psi_k of (1-B)^{-d}; psi_k^{(d)} = pi_k^{(-d)}.
pub fn fi_psi_coeffs(d: f64, trunc: usize) -> CoeffVector {
    fi_pi_coeffs(-d, trunc)
}

/// AR(infinity) weights of a full ARFIMA(p,d,q) process:
/// the expansion of Theta(z)^{-1} Phi(z) (1-z)^d to order `trunc`.
///
/// Computed by convolving the FI(d) weights with Phi and then long-dividing
/// by Theta. Requires an invertible Theta.
pub fn arfima_pi_coeffs(memory: &MemoryParams, trunc: usize) -> Result<CoeffVector> {
    if !memory.theta.is_empty() {
        monahan_to_pacf(&memory.theta)
            .map_err(|_| Error::Domain("MA polynomial is not invertible".into()))?;
    }
    let base = fi_pi_coeffs(memory.d, trunc);
    if memory.phi.is_empty() && memory.theta.is_empty() {
        return Ok(base);
    }

    // numerator: Phi(z) * (1-z)^d, truncated
    let mut num = vec![0.0; trunc + 1];
    for (k, &b) in base.coeffs.iter().enumerate() {
        num[k] += b;
        for (j, &phi) in memory.phi.iter().enumerate() {
            if k + j + 1 <= trunc {
                num[k + j + 1] += phi * b;
            }
        }
    }

    // divide by Theta(z): Theta * out = num, theta_0 = 1
    let mut out = vec![0.0; trunc + 1];
    for k in 0..=trunc {
        let mut v = num[k];
        for (j, &theta) in memory.theta.iter().enumerate() {
            if j + 1 > k {
                break;
            }
            v -= theta * out[k - j - 1];
        }
        out[k] = v;
    }
    Ok(CoeffVector { coeffs: out })
}

/// Autocovariance gamma_d(k; sigma) of a Gaussian FI(d) process for
/// k = 0..=maxlag.
///
/// gamma(0) = sigma^2 Gamma(1-2d)/Gamma(1-d)^2, evaluated in log space, then
/// the exact ratio recurrence gamma(k) = gamma(k-1) (k-1+d)/(k-d).
pub fn acv_fid(d: f64, maxlag: usize, sigma: f64) -> Result<Vec<f64>> {
    if d.abs() >= 0.5 || !d.is_finite() {
        return Err(Error::Domain(format!("d must lie in (-1/2, 1/2), got {d}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let g0 = sigma * sigma * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
    let mut acv = Vec::with_capacity(maxlag + 1);
    acv.push(g0);
    for k in 1..=maxlag {
        let k = k as f64;
        let prev = acv[acv.len() - 1];
        acv.push(prev * (k - 1.0 + d) / (k - d));
    }
    Ok(acv)
}

/// Autocorrelation rho_d(k) of FI(d); behaves as (Gamma(1-d)/Gamma(d)) k^{2d-1}
/// for large k.
pub fn acf_fid(d: f64, k: usize) -> Result<f64> {
    if d.abs() >= 0.5 || !d.is_finite() {
        return Err(Error::Domain(format!("d must lie in (-1/2, 1/2), got {d}")));
    }
    let mut rho = 1.0;
    for j in 1..=k {
        let j = j as f64;
        rho *= (j - 1.0 + d) / (j - d);
    }
    Ok(rho)
}

/// Spectral density of an ARFIMA(p,d,q) process at angular frequency
/// `freq` in (0, pi]:
///
/// ```text
/// f(l) = sigma^2/(2 pi) |Theta(e^{-il})|^2 / |Phi(e^{-il})|^2 |1-e^{il}|^{-2d}
/// ```
pub fn sdf_arfima(memory: &MemoryParams, sigma: f64, freq: f64) -> Result<f64> {
    if !(freq > 0.0) || freq > std::f64::consts::PI {
        return Err(Error::Domain(format!(
            "frequency must lie in (0, pi]; the spectrum diverges at 0 for d > 0 (got {freq})"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let theta2 = poly_modulus_sq(&memory.theta, freq);
    let phi2 = poly_modulus_sq(&memory.phi, freq);
    // |1 - e^{il}|^2 = (2 sin(l/2))^2
    let s = 2.0 * (freq / 2.0).sin();
    let frac = (s * s).powf(-memory.d);
    Ok(sigma * sigma / (2.0 * std::f64::consts::PI) * theta2 / phi2 * frac)
}

/// |1 + sum_k c_k e^{-i k l}|^2 for the "+" convention polynomials.
fn poly_modulus_sq(coeffs: &[f64], freq: f64) -> f64 {
    let mut re = 1.0;
    let mut im = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        let a = (k + 1) as f64 * freq;
        re += c * a.cos();
        im -= c * a.sin();
    }
    re * re + im * im
}

/// Map AR coefficients (stationarity region C_p, "+" convention) to the PACF
/// parametrisation in (-1,1)^p via the Monahan backward recursion
///
/// ```text
/// phi_i^{(k-1)} = (phi_i^{(k)} - phi_k^{(k)} phi_{k-i}^{(k)}) / (1 - phi_k^{(k)2})
/// ```
///
/// Fails iff the input is outside C_p (some diagonal element reaches 1 in
/// absolute value), so this doubles as the stationarity test.
pub fn monahan_to_pacf(phi: &[f64]) -> Result<Vec<f64>> {
    let p = phi.len();
    let mut varphi = vec![0.0; p];
    let mut work = phi.to_vec();
    for k in (1..=p).rev() {
        let last = work[k - 1];
        if !last.is_finite() || last.abs() >= 1.0 {
            return Err(Error::Domain(
                "coefficients are not in the stationarity region".into(),
            ));
        }
        varphi[k - 1] = last;
        let denom = 1.0 - last * last;
        let prev = work.clone();
        for i in 1..k {
            work[i - 1] = (prev[i - 1] - last * prev[k - i - 1]) / denom;
        }
        work.truncate(k - 1);
    }
    Ok(varphi)
}

/// Inverse of [`monahan_to_pacf`]: build AR coefficients from PACF values,
/// guaranteed to land in the stationarity region.
pub fn pacf_to_monahan(varphi: &[f64]) -> Result<Vec<f64>> {
    for &v in varphi {
        if !v.is_finite() || v.abs() >= 1.0 {
            return Err(Error::Argument(format!(
                "PACF components must lie strictly inside (-1,1), got {v}"
            )));
        }
    }
    let p = varphi.len();
    let mut phi: Vec<f64> = Vec::with_capacity(p);
    for k in 1..=p {
        let vk = varphi[k - 1];
        let prev = phi.clone();
        phi.push(0.0);
        for i in 1..k {
            phi[i - 1] = prev[i - 1] + vk * prev[k - i - 1];
        }
        phi[k - 1] = vk;
    }
    Ok(phi)
}

/// True iff |d| < 1/2, Phi is stationary and Theta is invertible.
pub fn is_stationary_invertible(memory: &MemoryParams) -> bool {
    memory.d.is_finite()
        && memory.d.abs() < 0.5
        && monahan_to_pacf(&memory.phi).is_ok()
        && monahan_to_pacf(&memory.theta).is_ok()
}
