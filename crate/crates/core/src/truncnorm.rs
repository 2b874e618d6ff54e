//! Truncated Gaussian sampling and Gaussian box probabilities.
//!
//! The MH kernels propose from interval- and hypercuboid-truncated normals by
//! rejection (the proposal mode always lies inside the box, so acceptance is
//! high), and their Hastings corrections need the corresponding normalisation
//! constants. Univariate and bivariate cases are closed form / classic
//! quadrature; the trivariate case integrates the conditional bivariate box
//! along the first axis; anything larger falls back to a deterministic
//! quasi-Monte Carlo rule with sequential conditioning.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::{erfc, erfc_inv};

const REJECTION_CAP: u64 = 1_000_000;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step tightens the library inverse to full precision
    let dens = normal_logpdf(x).exp();
    if dens > 0.0 {
        x -= (normal_cdf(x) - p) / dens;
    }
    x
}

/// Standard normal log density.
pub fn normal_logpdf(z: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
}

/// P(a < X < b) for X ~ N(mean, sd^2).
pub fn normal_interval_prob(mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    normal_cdf((b - mean) / sd) - normal_cdf((a - mean) / sd)
}

/// Rejection sample from N(mean, sd^2) truncated to (a, b).
/// Returns the draw and the number of proposals consumed.
pub fn sample_trunc_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<(f64, u64)> {
    if !(a < b) {
        return Err(Error::Argument(format!("empty truncation interval ({a}, {b})")));
    }
    if !(sd > 0.0) {
        return Err(Error::Argument(format!("sd must be positive, got {sd}")));
    }
    for trial in 1..=REJECTION_CAP {
        let z: f64 = rng.sample(StandardNormal);
        let x = mean + sd * z;
        if x > a && x < b {
            return Ok((x, trial));
        }
    }
    Err(Error::Numerical(format!(
        "truncated normal rejection sampler exhausted {REJECTION_CAP} trials"
    )))
}

/// Log density of the interval-truncated normal (normalised).
pub fn trunc_normal_logpdf(x: f64, mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    if x <= a || x >= b {
        return f64::NEG_INFINITY;
    }
    normal_logpdf((x - mean) / sd) - sd.ln() - normal_interval_prob(mean, sd, a, b).ln()
}

/// Rejection sample from N(mean, Sigma) truncated to the box (lower, upper),
/// with Sigma supplied through its lower Cholesky factor.
pub fn sample_trunc_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    rng: &mut R,
) -> Result<(DVector<f64>, u64)> {
    let r = mean.len();
    let mut z = DVector::zeros(r);
    for trial in 1..=REJECTION_CAP {
        for i in 0..r {
            z[i] = rng.sample(StandardNormal);
        }
        let x = mean + chol_lower * &z;
        if (0..r).all(|i| x[i] > lower[i] && x[i] < upper[i]) {
            return Ok((x, trial));
        }
    }
    Err(Error::Numerical(format!(
        "box-truncated MVN rejection sampler exhausted {REJECTION_CAP} trials"
    )))
}

// Gauss-Legendre node/weight pairs used by the bivariate rule (Genz 2004).
const GL6_W: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
const GL6_X: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970];
const GL12_W: [f64; 6] = [
    0.04717533638651177,
    0.1069393259953183,
    0.1600783285433464,
    0.2031674267230659,
    0.2334925365383547,
    0.2491470458134029,
];
const GL12_X: [f64; 6] = [
    0.9815606342467191,
    0.9041172563704750,
    0.7699026741943050,
    0.5873179542866171,
    0.3678314989981802,
    0.1252334085114692,
];
const GL20_W: [f64; 10] = [
    0.01761400713915212,
    0.04060142980038694,
    0.06267204833410906,
    0.08327674157670475,
    0.1019301198172404,
    0.1181945319615184,
    0.1316886384491766,
    0.1420961093183821,
    0.1491729864726037,
    0.1527533871307259,
];
const GL20_X: [f64; 10] = [
    0.9931285991850949,
    0.9639719272779138,
    0.9122344282513259,
    0.8391169718222188,
    0.7463319064601508,
    0.6360536807265150,
    0.5108670019508271,
    0.3737060887154196,
    0.2277858511416451,
    0.07652652113349733,
];

/// Upper-tail bivariate normal probability P(X > h, Y > k) with correlation
/// rho; Genz's adaptation of the Drezner-Wesolowsky method.
fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    let (w, x): (&[f64], &[f64]) = if rho.abs() < 0.3 {
        (&GL6_W, &GL6_X)
    } else if rho.abs() < 0.75 {
        (&GL12_W, &GL12_X)
    } else {
        (&GL20_W, &GL20_X)
    };
    let twopi = 2.0 * std::f64::consts::PI;
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if rho.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = rho.asin();
        for i in 0..w.len() {
            for pm in [-1.0, 1.0] {
                let sn = (asr * (1.0 + pm * x[i]) / 2.0).sin();
                bvn += w[i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / (2.0 * twopi) + normal_cdf(-h) * normal_cdf(-k);
    } else {
        if rho < 0.0 {
            k = -k;
            hk = -hk;
        }
        if rho.abs() < 1.0 {
            let ass = (1.0 - rho) * (1.0 + rho);
            let mut a = ass.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -(bs / ass + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp()
                    * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0 + c * d * ass * ass / 5.0);
            }
            if -hk < 100.0 {
                let b = bs.sqrt();
                let sp = twopi.sqrt() * normal_cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for i in 0..GL20_W.len() {
                for pm in [-1.0, 1.0] {
                    let xs = (a * (1.0 + pm * GL20_X[i])) * (a * (1.0 + pm * GL20_X[i]));
                    let rs = (1.0 - xs).sqrt();
                    let asr = -(bs / xs + hk) / 2.0;
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + d * xs);
                        let ep = (-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs;
                        bvn += a * GL20_W[i] * asr.exp() * (ep - sp);
                    }
                }
            }
            bvn = -bvn / twopi;
        }
        if rho > 0.0 {
            bvn += normal_cdf(-h.max(k));
        } else {
            bvn = -bvn + (normal_cdf(-h) - normal_cdf(-k)).max(0.0);
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// P(X <= h, Y <= k) for standard bivariate normal with correlation rho.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> f64 {
    bvn_upper(-h, -k, rho)
}

fn bvn_box(l1: f64, u1: f64, l2: f64, u2: f64, rho: f64) -> f64 {
    (bvn_cdf(u1, u2, rho) - bvn_cdf(l1, u2, rho) - bvn_cdf(u1, l2, rho) + bvn_cdf(l1, l2, rho))
        .clamp(0.0, 1.0)
}

fn gauss_legendre_nodes(n: usize) -> Vec<(f64, f64)> {
    // nodes/weights on (-1, 1) by Newton iteration on Legendre polynomials
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let k = k as f64;
            let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn trivariate_box(mean: &DVector<f64>, cov: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    let s0 = cov[(0, 0)].sqrt();
    let lo = lower[0].max(mean[0] - 8.5 * s0);
    let hi = upper[0].min(mean[0] + 8.5 * s0);
    if lo >= hi {
        return 0.0;
    }
    // conditional distribution of (x2, x3) given x1
    let k1 = cov[(0, 1)] / cov[(0, 0)];
    let k2 = cov[(0, 2)] / cov[(0, 0)];
    let c11 = cov[(1, 1)] - cov[(0, 1)] * k1;
    let c22 = cov[(2, 2)] - cov[(0, 2)] * k2;
    let c12 = cov[(1, 2)] - cov[(0, 1)] * k2;
    let s1 = c11.max(1e-300).sqrt();
    let s2 = c22.max(1e-300).sqrt();
    let rho = (c12 / (s1 * s2)).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
    let nodes = gauss_legendre_nodes(48);
    let half = (hi - lo) / 2.0;
    let mid = (hi + lo) / 2.0;
    let mut total = 0.0;
    for &(x, w) in &nodes {
        let t = mid + half * x;
        let z = (t - mean[0]) / s0;
        let dens = normal_logpdf(z).exp() / s0;
        let m1 = mean[1] + k1 * (t - mean[0]);
        let m2 = mean[2] + k2 * (t - mean[0]);
        let p2 = bvn_box(
            (lower[1] - m1) / s1,
            (upper[1] - m1) / s1,
            (lower[2] - m2) / s2,
            (upper[2] - m2) / s2,
            rho,
        );
        total += w * dens * p2;
    }
    (total * half).clamp(0.0, 1.0)
}

/// Deterministic quasi-Monte Carlo box probability with Genz's sequential
/// conditioning; used for dense blocks of dimension > 3.
fn qmc_box(mean: &DVector<f64>, cov: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let r = mean.len();
    let chol = nalgebra::Cholesky::new(cov.clone())
        .ok_or_else(|| Error::Numerical("box probability: covariance not PD".into()))?;
    let l = chol.l();
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let sq: Vec<f64> = (0..r).map(|j| (PRIMES[j % 12] as f64).sqrt().fract()).collect();
    let n_pts = 16384usize;
    let mut total = 0.0;
    let mut y = vec![0.0; r];
    for i in 1..=n_pts {
        let mut prod = 1.0;
        for j in 0..r {
            let mut shifted = mean[j];
            for (k, &yk) in y.iter().enumerate().take(j) {
                shifted += l[(j, k)] * yk;
            }
            let s = l[(j, j)];
            let d = normal_cdf((lower[j] - shifted) / s);
            let e = normal_cdf((upper[j] - shifted) / s);
            let width = (e - d).max(0.0);
            prod *= width;
            if prod == 0.0 {
                break;
            }
            let u = (i as f64 * sq[j]).fract();
            let p = (d + u * width).clamp(1e-16, 1.0 - 1e-16);
            y[j] = normal_quantile(p);
        }
        total += prod;
    }
    Ok((total / n_pts as f64).clamp(0.0, 1.0))
}

/// P(lower < X < upper) for X ~ N(mean, cov).
///
/// Exploits independence structure: the probability factorises over connected
/// components of the covariance sparsity pattern, so the block proposal
/// covariances used by the samplers (one dense 3x3 block plus a diagonal)
/// never need more than the trivariate rule.
pub fn mvn_box_prob(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
) -> Result<f64> {
    let r = mean.len();
    if lower.len() != r || upper.len() != r || cov.nrows() != r || cov.ncols() != r {
        return Err(Error::Argument("box probability: dimension mismatch".into()));
    }
    if r == 0 {
        return Ok(1.0);
    }
    // connected components of the dependence graph
    let mut comp = vec![usize::MAX; r];
    let mut ncomp = 0;
    for start in 0..r {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = ncomp;
        while let Some(i) = stack.pop() {
            for j in 0..r {
                if comp[j] == usize::MAX {
                    let scale = (cov[(i, i)] * cov[(j, j)]).sqrt();
                    if cov[(i, j)].abs() > 1e-12 * scale {
                        comp[j] = ncomp;
                        stack.push(j);
                    }
                }
            }
        }
        ncomp += 1;
    }

    let mut prob = 1.0;
    for c in 0..ncomp {
        let idx: Vec<usize> = (0..r).filter(|&i| comp[i] == c).collect();
        let m = DVector::from_iterator(idx.len(), idx.iter().map(|&i| mean[i]));
        let cv = DMatrix::from_fn(idx.len(), idx.len(), |a, b| cov[(idx[a], idx[b])]);
        let lo: Vec<f64> = idx.iter().map(|&i| lower[i]).collect();
        let up: Vec<f64> = idx.iter().map(|&i| upper[i]).collect();
        let p = match idx.len() {
            1 => normal_interval_prob(m[0], cv[(0, 0)].sqrt(), lo[0], up[0]),
            2 => {
                let s1 = cv[(0, 0)].sqrt();
                let s2 = cv[(1, 1)].sqrt();
                let rho = (cv[(0, 1)] / (s1 * s2)).clamp(-1.0 + 1e-12, 1.0 - 1e-12);
                bvn_box(
                    (lo[0] - m[0]) / s1,
                    (up[0] - m[0]) / s1,
                    (lo[1] - m[1]) / s2,
                    (up[1] - m[1]) / s2,
                    rho,
                )
            }
            3 => trivariate_box(&m, &cv, &lo, &up),
            _ => qmc_box(&m, &cv, &lo, &up)?,
        };
        prob *= p;
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn normal_cdf_quantile_roundtrip() {
        for &p in &[0.001, 0.1, 0.5, 0.9, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-12);
        }
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.9750021048517795).abs() < 1e-10);
    }

    #[test]
    fn trunc_normal_stays_in_bounds() {
        let mut rng = crate::rng::stream_rng(11, &[1]);
        for _ in 0..2000 {
            let (x, _) = sample_trunc_normal(0.3, 0.5, -0.5, 0.5, &mut rng).unwrap();
            assert!(x > -0.5 && x < 0.5);
        }
    }

    #[test]
    fn trunc_normal_expected_trials_below_two() {
        // proposal sd 0.5 on (-1/2, 1/2): fewer than two draws needed on average
        let mut rng = crate::rng::stream_rng(11, &[2]);
        for &d in &[-0.4, -0.2, 0.0, 0.2, 0.4] {
            let mut trials = 0u64;
            let n = 20_000;
            for _ in 0..n {
                let (_, t) = sample_trunc_normal(d, 0.5, -0.5, 0.5, &mut rng).unwrap();
                trials += t;
            }
            let mean_trials = trials as f64 / n as f64;
            assert!(mean_trials < 2.0, "mean trials {mean_trials} at centre {d}");
            // and it matches the closed-form expectation 1/P(inside)
            let expect = 1.0 / normal_interval_prob(d, 0.5, -0.5, 0.5);
            assert!((mean_trials - expect).abs() < 0.05);
        }
    }

    #[test]
    fn trunc_normal_mean_matches_quadrature() {
        let (mean, sd, a, b) = (0.2, 0.3, -0.5, 0.5);
        // quadrature of x f(x) over (a, b) for the truncated density
        let nsteps = 20_000;
        let h = (b - a) / nsteps as f64;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..=nsteps {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == nsteps { 0.5 } else { 1.0 };
            let f = normal_logpdf((x - mean) / sd).exp() / sd;
            num += w * x * f * h;
            den += w * f * h;
        }
        let expect = num / den;

        let mut rng = crate::rng::stream_rng(11, &[3]);
        let ndraw = 100_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..ndraw {
            let (x, _) = sample_trunc_normal(mean, sd, a, b, &mut rng).unwrap();
            s += x;
            s2 += x * x;
        }
        let m = s / ndraw as f64;
        let sdm = ((s2 / ndraw as f64 - m * m) / ndraw as f64).sqrt();
        assert!((m - expect).abs() < 3.0 * sdm, "{m} vs {expect} (3se={})", 3.0 * sdm);
    }

    #[test]
    fn trunc_normal_rejects_empty_interval() {
        let mut rng = crate::rng::stream_rng(11, &[4]);
        assert!(sample_trunc_normal(0.0, 1.0, 1.0, -1.0, &mut rng).is_err());
    }

    #[test]
    fn bvn_independent_case() {
        let p = bvn_cdf(0.5, -0.3, 0.0);
        assert!((p - normal_cdf(0.5) * normal_cdf(-0.3)).abs() < 1e-12);
    }

    #[test]
    fn bvn_perfect_correlation_limits() {
        assert!((bvn_cdf(0.5, 1.5, 0.9999999) - normal_cdf(0.5)).abs() < 1e-4);
        // rho -> -1: P(X<=h, Y<=k) -> max(0, Phi(h)+Phi(k)-1)
        let p = bvn_cdf(0.5, 0.2, -0.9999999);
        let expect = (normal_cdf(0.5) + normal_cdf(0.2) - 1.0).max(0.0);
        assert!((p - expect).abs() < 1e-4);
    }

    #[test]
    fn bvn_matches_quadrature() {
        // P(X<=h, Y<=k; rho) by direct 2D integration
        for &(h, k, rho) in &[(0.3, -0.6, 0.5), (1.0, 1.0, -0.8), (0.0, 0.0, 0.3)] {
            let n = 400;
            let span = 8.0;
            let hsz = (h + span) / n as f64;
            let ksz = (k + span) / n as f64;
            let mut total = 0.0;
            let det = 1.0 - rho * rho;
            for i in 0..n {
                let x = -span + (i as f64 + 0.5) * hsz;
                for j in 0..n {
                    let y = -span + (j as f64 + 0.5) * ksz;
                    let e = (x * x - 2.0 * rho * x * y + y * y) / (2.0 * det);
                    total += (-e).exp();
                }
            }
            total *= hsz * ksz / (2.0 * std::f64::consts::PI * det.sqrt());
            let p = bvn_cdf(h, k, rho);
            assert!((p - total).abs() < 5e-4, "bvn({h},{k},{rho}) = {p}, quad {total}");
        }
    }

    #[test]
    fn box_prob_factorises_and_matches_monte_carlo() {
        let mean = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.0]);
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.04, 0.01, 0.015, 0.0, //
                0.01, 0.09, -0.02, 0.0, //
                0.015, -0.02, 0.06, 0.0, //
                0.0, 0.0, 0.0, 0.25,
            ],
        );
        let lower = [-0.5, -1.0, -1.0, -1.0];
        let upper = [0.5, 1.0, 1.0, 1.0];
        let p = mvn_box_prob(&mean, &cov, &lower, &upper).unwrap();

        let chol = nalgebra::Cholesky::new(cov.clone()).unwrap();
        let l = chol.l().clone_owned();
        let mut rng = crate::rng::stream_rng(11, &[5]);
        let n = 400_000;
        let mut hits = 0u64;
        let mut z = DVector::zeros(4);
        for _ in 0..n {
            for i in 0..4 {
                z[i] = rng.sample(StandardNormal);
            }
            let x = &mean + &l * &z;
            if (0..4).all(|i| x[i] > lower[i] && x[i] < upper[i]) {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((p - mc).abs() < 4.0 * se + 1e-4, "box prob {p} vs mc {mc}");
    }

    #[test]
    fn qmc_box_agrees_with_factorised_path() {
        // dense 4x4 with weak couplings everywhere forces the QMC branch
        let mean = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0]);
        let mut cov = DMatrix::identity(4, 4) * 0.1;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    cov[(i, j)] = 0.02;
                }
            }
        }
        let lower = [-0.4; 4];
        let upper = [0.4; 4];
        let p = mvn_box_prob(&mean, &cov, &lower, &upper).unwrap();
        // Monte Carlo reference
        let chol = nalgebra::Cholesky::new(cov.clone()).unwrap();
        let l = chol.l().clone_owned();
        let mut rng = crate::rng::stream_rng(11, &[6]);
        let n = 300_000;
        let mut hits = 0u64;
        let mut z = DVector::zeros(4);
        for _ in 0..n {
            for i in 0..4 {
                z[i] = rng.sample(StandardNormal);
            }
            let x = &mean + &l * &z;
            if (0..4).all(|i| x[i] > lower[i] && x[i] < upper[i]) {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!((p - mc).abs() < 4.0 * se + 2e-3, "qmc box {p} vs mc {mc}");
    }

    #[test]
    fn trunc_mvn_stays_in_box() {
        let mean = DVector::from_vec(vec![0.0, 0.3]);
        let cov = DMatrix::from_row_slice(2, 2, &[0.09, 0.04, 0.04, 0.09]);
        let l = nalgebra::Cholesky::new(cov).unwrap().l().clone_owned();
        let mut rng = crate::rng::stream_rng(11, &[7]);
        for _ in 0..2000 {
            let (x, _) =
                sample_trunc_mvn(&mean, &l, &[-0.5, -1.0], &[0.5, 1.0], &mut rng).unwrap();
            assert!(x[0] > -0.5 && x[0] < 0.5 && x[1] > -1.0 && x[1] < 1.0);
        }
    }
}
