//! Classical comparator estimators of the memory parameter d.
//!
//! All three are scale- and location-free regressions on log-log summaries:
//! rescaled adjusted range (R/S), Geweke-Porter-Hudak log-periodogram
//! regression (GPH), and detrended fluctuation analysis (DFA). They exist as
//! baselines for the Bayesian estimators, with standard-literature defaults
//! exposed as parameters.

use crate::error::{Error, Result};
use crate::util::{mean, ols};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMethod {
    RS,
    GPH,
    DFA,
}

impl EstimatorMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorMethod::RS => "rs",
            EstimatorMethod::GPH => "gph",
            EstimatorMethod::DFA => "dfa",
        }
    }
}

/// Point estimate of d with regression diagnostics.
#[derive(Debug, Clone)]
pub struct EstimatorResult {
    pub d_hat: f64,
    pub stderr: Option<f64>,
    pub method: EstimatorMethod,
    /// Fitted log-log regression slope (before any shift to the d scale).
    pub slope: f64,
    /// Number of points entering the regression.
    pub n_points: usize,
    /// GPH bandwidth or the block/window sizes used.
    pub scales: Vec<usize>,
}

fn check_series(x: &[f64], min_n: usize, method: &str) -> Result<()> {
    if x.len() < min_n {
        return Err(Error::Argument(format!(
            "{method} needs at least {min_n} observations, got {}",
            x.len()
        )));
    }
    if !crate::util::all_finite(x) {
        return Err(Error::Data("series values must all be finite".into()));
    }
    let m = mean(x);
    if x.iter().all(|v| (v - m).abs() < 1e-12 * m.abs().max(1.0)) {
        return Err(Error::Data(format!("{method}: series is constant")));
    }
    Ok(())
}

/// Rescaled adjusted range over dyadic block sizes; d_hat = slope - 1/2.
pub fn estimate_rs(x: &[f64]) -> Result<EstimatorResult> {
    check_series(x, 64, "R/S")?;
    let n = x.len();
    let mut sizes = Vec::new();
    let mut s = 8;
    while s <= n / 2 {
        sizes.push(s);
        s *= 2;
    }
    let mut log_s = Vec::new();
    let mut log_rs = Vec::new();
    let mut used = Vec::new();
    for &size in &sizes {
        let blocks = n / size;
        let mut vals = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let seg = &x[b * size..(b + 1) * size];
            let m = mean(seg);
            let mut cum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut ss = 0.0;
            for &v in seg {
                cum += v - m;
                lo = lo.min(cum);
                hi = hi.max(cum);
                ss += (v - m) * (v - m);
            }
            let sd_block = (ss / size as f64).sqrt();
            // the cumulative-deviation path starts at 0
            let range = hi.max(0.0) - lo.min(0.0);
            if sd_block > 0.0 && range > 0.0 {
                vals.push(range / sd_block);
            }
        }
        if !vals.is_empty() {
            log_s.push((size as f64).ln());
            log_rs.push(mean(&vals).ln());
            used.push(size);
        }
    }
    if log_s.len() < 3 {
        return Err(Error::Data("R/S: too few usable block sizes".into()));
    }
    let (slope, _, se) = ols(&log_s, &log_rs);
    Ok(EstimatorResult {
        d_hat: slope - 0.5,
        stderr: Some(se),
        method: EstimatorMethod::RS,
        slope,
        n_points: log_s.len(),
        scales: used,
    })
}

/// Log-periodogram regression at the first m Fourier frequencies:
/// regress log I(l_j) on -log(4 sin^2(l_j/2)); d_hat = slope.
/// Default bandwidth m = floor(sqrt(n)).
pub fn estimate_gph(x: &[f64], bandwidth: Option<usize>) -> Result<EstimatorResult> {
    check_series(x, 64, "GPH")?;
    let n = x.len();
    let m = bandwidth.unwrap_or_else(|| (n as f64).sqrt().floor() as usize);
    if m < 4 {
        return Err(Error::Argument(format!("GPH bandwidth must be at least 4, got {m}")));
    }
    if m >= n / 2 {
        return Err(Error::Argument(format!(
            "GPH bandwidth {m} too large for series length {n}"
        )));
    }
    let xbar = mean(x);
    let mut buf: Vec<Complex<f64>> =
        x.iter().map(|&v| Complex::new(v - xbar, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let mut regressor = Vec::with_capacity(m);
    let mut log_i = Vec::with_capacity(m);
    for j in 1..=m {
        let lambda = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let periodogram = buf[j].norm_sqr() / (2.0 * std::f64::consts::PI * n as f64);
        if periodogram <= 0.0 {
            continue;
        }
        let s = 2.0 * (lambda / 2.0).sin();
        regressor.push(-(s * s).ln());
        log_i.push(periodogram.ln());
    }
    if regressor.len() < 4 {
        return Err(Error::Data("GPH: too few usable periodogram ordinates".into()));
    }
    let (slope, _, se) = ols(&regressor, &log_i);
    Ok(EstimatorResult {
        d_hat: slope,
        stderr: Some(se),
        method: EstimatorMethod::GPH,
        slope,
        n_points: regressor.len(),
        scales: vec![m],
    })
}

fn detrend_residual_ss(seg: &[f64], order: usize) -> f64 {
    // least-squares polynomial fit on centred, scaled abscissae
    let n = seg.len();
    let k = order + 1;
    let ts: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n as f64 - 1.0) - 1.0).collect();
    // normal equations (order <= 3 keeps this well conditioned)
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (i, &t) in ts.iter().enumerate() {
        let mut basis = vec![1.0; k];
        for j in 1..k {
            basis[j] = basis[j - 1] * t;
        }
        for a in 0..k {
            for b in 0..k {
                ata[a][b] += basis[a] * basis[b];
            }
            atb[a] += basis[a] * seg[i];
        }
    }
    // solve via Gaussian elimination
    let mut mat = ata;
    let mut rhs = atb;
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if mat[r][col].abs() > mat[piv][col].abs() {
                piv = r;
            }
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        let diag = mat[col][col];
        for r in col + 1..k {
            let f = mat[r][col] / diag;
            for c in col..k {
                mat[r][c] -= f * mat[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut coef = vec![0.0; k];
    for col in (0..k).rev() {
        let mut v = rhs[col];
        for c in col + 1..k {
            v -= mat[col][c] * coef[c];
        }
        coef[col] = v / mat[col][col];
    }
    let mut ss = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        let mut basis = 1.0;
        let mut fit = coef[0];
        for j in 1..k {
            basis *= t;
            fit += coef[j] * basis;
        }
        let r = seg[i] - fit;
        ss += r * r;
    }
    ss
}

/// Detrended fluctuation analysis; d_hat = slope(log F vs log s) - 1/2.
///
/// `order` is the polynomial degree of series-level trends removed: order 1
/// eliminates linear trends in the data, which means the cumulative profile
/// is detrended with polynomials of degree order + 1 inside each window.
pub fn estimate_dfa(x: &[f64], order: usize) -> Result<EstimatorResult> {
    check_series(x, 128, "DFA")?;
    if order == 0 || order > 3 {
        return Err(Error::Argument(format!("DFA detrending order must be 1..=3, got {order}")));
    }
    let profile_degree = order + 1;
    let n = x.len();
    let xbar = mean(x);
    let mut profile = Vec::with_capacity(n);
    let mut cum = 0.0;
    for &v in x {
        cum += v - xbar;
        profile.push(cum);
    }

    // >= 8 log-spaced scales between max(8, 2(degree+1)) and n/4
    let s_min = 8.max(2 * (profile_degree + 1));
    let s_max = n / 4;
    if s_max <= s_min {
        return Err(Error::Argument("series too short for the requested DFA scales".into()));
    }
    let want = 12;
    let ratio = (s_max as f64 / s_min as f64).powf(1.0 / (want as f64 - 1.0));
    let mut scales: Vec<usize> = Vec::new();
    let mut s = s_min as f64;
    for _ in 0..want {
        let si = s.round() as usize;
        if scales.last() != Some(&si) {
            scales.push(si);
        }
        s *= ratio;
    }
    scales.dedup();
    if scales.len() < 8 {
        return Err(Error::Argument("DFA: fewer than 8 usable scales".into()));
    }

    let mut log_s = Vec::new();
    let mut log_f = Vec::new();
    for &size in &scales {
        let blocks = n / size;
        let mut total = 0.0;
        let mut count = 0usize;
        // windows from both ends so trailing data is not discarded
        for b in 0..blocks {
            total += detrend_residual_ss(&profile[b * size..(b + 1) * size], profile_degree);
            count += size;
        }
        for b in 0..blocks {
            let end = n - b * size;
            total += detrend_residual_ss(&profile[end - size..end], profile_degree);
            count += size;
        }
        let f = (total / count as f64).sqrt();
        if f > 0.0 {
            log_s.push((size as f64).ln());
            log_f.push(f.ln());
        }
    }
    if log_s.len() < 8 {
        return Err(Error::Data("DFA: degenerate fluctuation function".into()));
    }
    let (slope, _, se) = ols(&log_s, &log_f);
    Ok(EstimatorResult {
        d_hat: slope - 0.5,
        stderr: Some(se),
        method: EstimatorMethod::DFA,
        slope,
        n_points: log_s.len(),
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_fid_exact;

    #[test]
    fn rs_white_noise_near_zero() {
        let mut ds = Vec::new();
        for rep in 0..20 {
            let x = simulate_fid_exact(4096, 0.0, 0.0, 1.0, 100 + rep).unwrap();
            ds.push(estimate_rs(&x).unwrap().d_hat);
        }
        let m = mean(&ds);
        assert!(m.abs() < 0.1, "mean R/S estimate {m}");
    }

    #[test]
    fn rs_positively_biased_for_negative_memory() {
        let mut resid = Vec::new();
        for rep in 0..10 {
            let x = simulate_fid_exact(4096, -0.35, 0.0, 1.0, 300 + rep).unwrap();
            resid.push(estimate_rs(&x).unwrap().d_hat + 0.35);
        }
        let m = mean(&resid);
        assert!(m > 0.1, "expected positive bias, mean residual {m}");
    }

    #[test]
    fn rs_rejects_constant_and_short_input() {
        assert!(estimate_rs(&vec![1.0; 256]).is_err());
        assert!(estimate_rs(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn gph_white_noise_within_two_stderr() {
        let x = simulate_fid_exact(4096, 0.0, 0.0, 1.0, 7).unwrap();
        let r = estimate_gph(&x, None).unwrap();
        let se = r.stderr.unwrap();
        assert!(r.d_hat.abs() < 2.0 * se, "d_hat {} vs 2se {}", r.d_hat, 2.0 * se);
    }

    #[test]
    fn gph_roughly_unbiased_across_d() {
        for &d in &[-0.3, 0.0, 0.3] {
            let mut ds = Vec::new();
            for rep in 0..10 {
                let x = simulate_fid_exact(1024, d, 0.0, 1.0, 500 + rep).unwrap();
                ds.push(estimate_gph(&x, None).unwrap().d_hat);
            }
            let m = mean(&ds);
            assert!((m - d).abs() < 0.15, "d={d}: mean estimate {m}");
        }
    }

    #[test]
    fn gph_sinusoid_defined_with_large_stderr() {
        // spectral line inside the regression band: one explosive ordinate
        let n = 512;
        let l0 = 2.0 * std::f64::consts::PI * 10.0 / n as f64;
        let x: Vec<f64> = (0..n).map(|t| (l0 * t as f64).sin()).collect();
        let r = estimate_gph(&x, None).unwrap();
        assert!(r.d_hat.is_finite());
        assert!(r.stderr.unwrap() > 0.3, "stderr {}", r.stderr.unwrap());
    }

    #[test]
    fn gph_bandwidth_validation() {
        let x = simulate_fid_exact(256, 0.0, 0.0, 1.0, 1).unwrap();
        assert!(estimate_gph(&x, Some(3)).is_err());
        assert!(estimate_gph(&x, Some(200)).is_err());
    }

    #[test]
    fn dfa_white_noise_near_zero() {
        let mut ds = Vec::new();
        for rep in 0..20 {
            let x = simulate_fid_exact(2048, 0.0, 0.0, 1.0, 700 + rep).unwrap();
            ds.push(estimate_dfa(&x, 1).unwrap().d_hat);
        }
        let m = mean(&ds);
        assert!(m.abs() < 0.1, "mean DFA estimate {m}");
    }

    #[test]
    fn dfa_biased_for_negative_memory_only() {
        // unbiased for d > 0, visibly biased for d < 0
        let bias_at = |d: f64, seed0: u64| {
            let mut resid = Vec::new();
            for rep in 0..10 {
                let x = simulate_fid_exact(2048, d, 0.0, 1.0, seed0 + rep).unwrap();
                resid.push(estimate_dfa(&x, 1).unwrap().d_hat - d);
            }
            mean(&resid)
        };
        let neg = bias_at(-0.25, 900);
        let pos = bias_at(0.25, 950);
        assert!(neg.abs() > pos.abs(), "bias at d=-0.25 ({neg}) vs d=0.25 ({pos})");
        assert!(pos.abs() < 0.05, "should be nearly unbiased for d > 0, got {pos}");
    }

    #[test]
    fn dfa_removes_linear_trend() {
        let mut ds = Vec::new();
        for rep in 0..10 {
            let noise = simulate_fid_exact(2048, 0.0, 0.0, 1.0, 1100 + rep).unwrap();
            let x: Vec<f64> =
                noise.iter().enumerate().map(|(t, &v)| v + 0.002 * t as f64).collect();
            ds.push(estimate_dfa(&x, 1).unwrap().d_hat);
        }
        let m = mean(&ds);
        assert!(m.abs() < 0.15, "trended DFA mean {m}");
    }

    #[test]
    fn dfa_argument_validation() {
        let x = simulate_fid_exact(256, 0.0, 0.0, 1.0, 1).unwrap();
        assert!(estimate_dfa(&x, 0).is_err());
        assert!(estimate_dfa(&x[..100], 1).is_err());
    }

    #[test]
    fn all_estimators_affine_invariant() {
        let x = simulate_fid_exact(1024, 0.2, 0.0, 1.0, 13).unwrap();
        let y: Vec<f64> = x.iter().map(|v| -3.5 * v + 11.0).collect();
        let a = estimate_rs(&x).unwrap().d_hat;
        let b = estimate_rs(&y).unwrap().d_hat;
        assert!((a - b).abs() < 1e-8, "R/S: {a} vs {b}");
        let a = estimate_gph(&x, None).unwrap().d_hat;
        let b = estimate_gph(&y, None).unwrap().d_hat;
        assert!((a - b).abs() < 1e-8, "GPH: {a} vs {b}");
        let a = estimate_dfa(&x, 1).unwrap().d_hat;
        let b = estimate_dfa(&y, 1).unwrap().d_hat;
        assert!((a - b).abs() < 1e-8, "DFA: {a} vs {b}");
    }
}
