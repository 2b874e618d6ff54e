//! Synthetic ARFIMA data generation.
//!
//! The FI(d) core is drawn exactly for Gaussian innovations (Durbin-Levinson
//! innovations recursion on the closed-form autocovariance, O(n^2)); for
//! non-Gaussian innovations it falls back to a truncated MA(infinity) filter.
//! Short-memory structure is then applied with the ARMA recursion in the "+"
//! convention, discarding a burn-in.

use crate::error::{Error, Result};
use crate::fft::convolve_full;
use crate::likelihood::DlRecursion;
use crate::model::{acv_fid, fi_psi_coeffs, InnovationFamily, InnovationSpec, MemoryParams};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{StandardNormal, StudentT};

/// Simulation request.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub n: usize,
    pub memory: MemoryParams,
    pub mu: f64,
    pub innovation: InnovationSpec,
    pub seed: u64,
    /// ARMA filter burn-in; 0 is forced when p = q = 0.
    pub burnin: usize,
}

impl SimSpec {
    /// Spec with the default burn-in 10*max(p, q, 50) (0 for pure FI(d)).
    pub fn new(
        n: usize,
        memory: MemoryParams,
        mu: f64,
        innovation: InnovationSpec,
        seed: u64,
    ) -> Self {
        let burnin = default_burnin(&memory);
        SimSpec { n, memory, mu, innovation, seed, burnin }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Argument("n must be at least 1".into()));
        }
        self.memory.validate()?;
        self.innovation.validate()?;
        if !self.mu.is_finite() {
            return Err(Error::Argument("mu must be finite".into()));
        }
        Ok(())
    }
}

pub fn default_burnin(memory: &MemoryParams) -> usize {
    if memory.p() == 0 && memory.q() == 0 {
        0
    } else {
        10 * memory.p().max(memory.q()).max(50)
    }
}

/// Exact Gaussian FI(d) sample of length n via the Durbin-Levinson
/// innovations recursion; deterministic given the seed.
pub fn simulate_fid_exact(n: usize, d: f64, mu: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = stream_rng(seed, &[0x51_4d]);
    let core = fid_core_gaussian(n, d, sigma, &mut rng)?;
    Ok(core.into_iter().map(|v| v + mu).collect())
}

fn fid_core_gaussian<R: Rng + ?Sized>(
    n: usize,
    d: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let acv = acv_fid(d, n.saturating_sub(1), sigma)?;
    let mut rec = DlRecursion::new(acv)?;
    let mut x = Vec::with_capacity(n);
    for t in 0..n {
        let mut pred = 0.0;
        for (j, &aj) in rec.a.iter().enumerate() {
            pred += aj * x[t - 1 - j];
        }
        let z: f64 = rng.sample(StandardNormal);
        x.push(pred + rec.v.sqrt() * z);
        if t + 1 < n {
            rec.advance()?;
        }
    }
    Ok(x)
}

fn fid_core_student_t<R: Rng + ?Sized>(
    n: usize,
    d: f64,
    sigma: f64,
    dof: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    // truncated MA(infinity): z_t = sum_{k=0}^{P} psi_k e_{t-k}, P = n
    let trunc = n;
    let psi = fi_psi_coeffs(d, trunc);
    let tdist = StudentT::new(dof)
        .map_err(|e| Error::Argument(format!("invalid student-t dof: {e}")))?;
    let eps: Vec<f64> = (0..n + trunc).map(|_| sigma * rng.sample(tdist)).collect();
    let full = convolve_full(&psi.coeffs, &eps);
    // z_t for t = 1..n uses eps_{t-P}..eps_t: full conv index t+P-1
    Ok(full[trunc..trunc + n].to_vec())
}

/// General ARFIMA(p,d,q) sample: FI(d) core of length n + burnin, ARMA
/// recursion Phi(B) Y = Theta(B) Z in the "+" convention, burn-in discarded,
/// mean added last.
pub fn simulate_arfima(spec: &SimSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let burn = if spec.memory.p() == 0 && spec.memory.q() == 0 { 0 } else { spec.burnin };
    let total = spec.n + burn;
    let mut rng = stream_rng(spec.seed, &[0x51_4d]);
    let core = match spec.innovation.family {
        InnovationFamily::Gaussian => {
            fid_core_gaussian(total, spec.memory.d, spec.innovation.sigma, &mut rng)?
        }
        InnovationFamily::StudentT => {
            let dof = spec.innovation.dof().unwrap();
            fid_core_student_t(total, spec.memory.d, spec.innovation.sigma, dof, &mut rng)?
        }
    };

    let phi = &spec.memory.phi;
    let theta = &spec.memory.theta;
    let mut y = Vec::with_capacity(total);
    for t in 0..total {
        // X_t = Z_t + sum_j theta_j Z_{t-j} - sum_k phi_k X_{t-k}
        let mut v = core[t];
        for (j, &th) in theta.iter().enumerate() {
            if t > j {
                v += th * core[t - j - 1];
            }
        }
        for (k, &ph) in phi.iter().enumerate() {
            if t > k {
                v -= ph * y[t - k - 1];
            }
        }
        y.push(v);
    }
    Ok(y[burn..].iter().map(|v| v + spec.mu).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sdf_arfima;
    use crate::util::{mean, sd};

    #[test]
    fn fixed_seed_reproducible() {
        let a = simulate_fid_exact(100, 0.3, 1.0, 2.0, 7).unwrap();
        let b = simulate_fid_exact(100, 0.3, 1.0, 2.0, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_fid_exact(100, 0.3, 1.0, 2.0, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn d_zero_is_iid_gaussian() {
        // Kolmogorov-Smirnov against N(mu, sigma^2) at the 1% level
        let n = 4096;
        let (mu, sigma) = (0.5, 2.0);
        let mut x = simulate_fid_exact(n, 0.0, mu, sigma, 31).unwrap();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut dmax: f64 = 0.0;
        for (i, &v) in x.iter().enumerate() {
            let f = crate::truncnorm::normal_cdf((v - mu) / sigma);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            dmax = dmax.max((f - lo).abs()).max((f - hi).abs());
        }
        let crit = 1.628 / (n as f64).sqrt();
        assert!(dmax < crit, "KS statistic {dmax} exceeds 1% critical value {crit}");
    }

    #[test]
    fn lag_one_autocorrelation_matches_theory() {
        let n = 1 << 14;
        let x = simulate_fid_exact(n, 0.25, 0.0, 1.0, 12).unwrap();
        let m = mean(&x);
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..n {
            let dt = x[t] - m;
            den += dt * dt;
            if t + 1 < n {
                num += dt * (x[t + 1] - m);
            }
        }
        let rho1 = num / den;
        assert!((rho1 - 1.0 / 3.0).abs() < 0.03, "sample rho(1) = {rho1}");
    }

    #[test]
    fn arfima_reduces_to_fid_when_no_short_memory() {
        let spec = SimSpec::new(
            64,
            MemoryParams::fid(0.2),
            0.7,
            InnovationSpec::gaussian(1.5),
            77,
        );
        let a = simulate_arfima(&spec).unwrap();
        let b = simulate_fid_exact(64, 0.2, 0.7, 1.5, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn arfima_spectrum_elevated_at_both_ends() {
        // (1 + 0.92 B)(1-B)^{0.25} X = e
        let n = 1 << 13;
        let spec = SimSpec::new(
            n,
            MemoryParams::new(0.25, vec![0.92], vec![]).unwrap(),
            0.0,
            InnovationSpec::gaussian(1.0),
            5,
        );
        let x = simulate_arfima(&spec).unwrap();
        let m = mean(&x);
        // crude band periodogram averages near 0, pi/2 and pi
        let band_power = |lo: f64, hi: f64| {
            let mut total = 0.0;
            let mut count = 0;
            for j in 1..n / 2 {
                let l = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                if l >= lo && l < hi {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (t, &v) in x.iter().enumerate() {
                        let a = l * t as f64;
                        re += (v - m) * a.cos();
                        im -= (v - m) * a.sin();
                    }
                    total += (re * re + im * im) / (2.0 * std::f64::consts::PI * n as f64);
                    count += 1;
                }
            }
            total / count as f64
        };
        let lo = band_power(0.0, 0.05);
        let mid = band_power(1.5, 1.65);
        let hi = band_power(3.09, std::f64::consts::PI + 0.001);
        assert!(lo > 3.0 * mid, "low band {lo} vs mid {mid}");
        assert!(hi > 3.0 * mid, "high band {hi} vs mid {mid}");
    }

    #[test]
    fn arfima_sample_acv_matches_sdf_quadrature() {
        // gamma(k) = int_{-pi}^{pi} e^{ikl} f(l) dl against replicate sims
        let memory = MemoryParams::new(0.25, vec![0.92], vec![]).unwrap();
        let reps = 10;
        let n = 1 << 12;
        let maxlag = 10;
        let mut acvs = vec![Vec::with_capacity(reps); maxlag + 1];
        for r in 0..reps {
            let spec = SimSpec::new(
                n,
                memory.clone(),
                0.0,
                InnovationSpec::gaussian(1.0),
                900 + r as u64,
            );
            let x = simulate_arfima(&spec).unwrap();
            let m = mean(&x);
            for k in 0..=maxlag {
                let mut s = 0.0;
                for t in 0..n - k {
                    s += (x[t] - m) * (x[t + k] - m);
                }
                acvs[k].push(s / n as f64);
            }
        }
        // graded-mesh trapezoid for the singular spectral integrand
        let quad_gamma = |k: usize| {
            let steps = 200_000;
            let s = 6.0;
            let upper = std::f64::consts::PI.powf(1.0 / s);
            let h = upper / steps as f64;
            let mut total = 0.0;
            for i in 1..=steps {
                let u = i as f64 * h;
                let l = u.powf(s).min(std::f64::consts::PI);
                let w = if i == steps { 0.5 } else { 1.0 };
                let f = sdf_arfima(&memory, 1.0, l).unwrap();
                total += w * (k as f64 * l).cos() * f * s * u.powf(s - 1.0) * h;
            }
            2.0 * total
        };
        for k in 0..=maxlag {
            let m = mean(&acvs[k]);
            let se = sd(&acvs[k]) / (reps as f64).sqrt();
            let g = quad_gamma(k);
            assert!(
                (m - g).abs() < 3.0 * se,
                "lag {k}: sample {m} vs quadrature {g} (3se = {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn sample_moments_converge() {
        let reps = 10;
        let n = 1 << 14;
        let d = 0.2;
        let (mu, sigma) = (1.5, 0.8);
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for r in 0..reps {
            let x = simulate_fid_exact(n, d, mu, sigma, 40 + r as u64).unwrap();
            means.push(mean(&x));
            sds.push(sd(&x));
        }
        let mm = mean(&means);
        let sem = sd(&means) / (reps as f64).sqrt();
        assert!((mm - mu).abs() < 3.0 * sem, "mean {mm} vs {mu}");
        let target = acv_fid(d, 0, sigma).unwrap()[0].sqrt();
        let ms = mean(&sds);
        let ses = sd(&sds) / (reps as f64).sqrt();
        assert!((ms - target).abs() < 3.0 * ses, "sd {ms} vs {target}");
    }

    #[test]
    fn different_seeds_uncorrelated() {
        let n = 1 << 12;
        let a = simulate_fid_exact(n, 0.3, 0.0, 1.0, 1).unwrap();
        let b = simulate_fid_exact(n, 0.3, 0.0, 1.0, 2).unwrap();
        let (ma, mb) = (mean(&a), mean(&b));
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for t in 0..n {
            num += (a[t] - ma) * (b[t] - mb);
            da += (a[t] - ma) * (a[t] - ma);
            db += (b[t] - mb) * (b[t] - mb);
        }
        let corr = num / (da * db).sqrt();
        assert!(corr.abs() < 0.05, "cross-seed correlation {corr}");
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(simulate_fid_exact(0, 0.2, 0.0, 1.0, 1).is_err());
        assert!(simulate_fid_exact(10, 0.7, 0.0, 1.0, 1).is_err());
        let spec = SimSpec::new(
            10,
            MemoryParams::fid(0.2),
            0.0,
            InnovationSpec::gaussian(-1.0),
            1,
        );
        assert!(simulate_arfima(&spec).is_err());
    }

    #[test]
    fn student_t_core_runs_and_has_heavy_tails() {
        let spec = SimSpec::new(
            4096,
            MemoryParams::fid(0.1),
            0.0,
            InnovationSpec::student_t(1.0, 4.0),
            3,
        );
        let x = simulate_arfima(&spec).unwrap();
        assert_eq!(x.len(), 4096);
        // excess kurtosis should be clearly positive for t_4 driven series
        let m = mean(&x);
        let s2 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
        let k4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / x.len() as f64;
        let kurt = k4 / (s2 * s2) - 3.0;
        assert!(kurt > 0.5, "expected heavy tails, excess kurtosis {kurt}");
    }
}
