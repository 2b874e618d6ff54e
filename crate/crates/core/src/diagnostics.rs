//! Posterior summarisation, convergence diagnostics and Monte Carlo study
//! drivers.

use crate::error::{Error, Result};
use crate::likelihood::LikelihoodMode;
use crate::model::ReparamMemory;
use crate::samplers::{ChainConfig, SampleMatrix};
use crate::simulate::simulate_fid_exact;
use crate::util::{mean, ols, quantile, sd};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Moments, equal-tailed 95% credible interval and effective sample size of
/// one scalar parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: f64,
}

/// Per-parameter posterior summaries plus kernel acceptance rates.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub params: Vec<(String, ParamSummary)>,
    pub acceptance: Vec<(String, f64)>,
    pub n_draws: usize,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Effective sample size by Geyer's initial positive sequence: sum paired
/// autocovariances until a pair goes non-positive.
pub fn ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(x);
    let z: Vec<f64> = x.iter().map(|v| v - m).collect();
    let gamma = |k: usize| -> f64 {
        let mut s = 0.0;
        for t in 0..n - k {
            s += z[t] * z[t + k];
        }
        s / n as f64
    };
    let g0 = gamma(0);
    if !(g0 > 0.0) {
        return n as f64; // constant chain
    }
    let mut var = -g0;
    let mut k = 0;
    while k + 1 < n {
        let pair = gamma(k) + gamma(k + 1);
        if pair <= 0.0 {
            break;
        }
        var += 2.0 * pair;
        k += 2;
    }
    let tau = (var / g0).max(1.0);
    (n as f64 / tau).min(n as f64)
}

/// Multi-chain potential scale reduction factor.
pub fn rhat(chains: &[Vec<f64>]) -> f64 {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 2) {
        return f64::NAN;
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap();
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let within = mean(
        &chains
            .iter()
            .map(|c| {
                let m = mean(&c[..n]);
                c[..n].iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)
            })
            .collect::<Vec<f64>>(),
    );
    let grand = mean(&means);
    let between = n as f64 / (means.len() as f64 - 1.0)
        * means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>();
    let vhat = (n as f64 - 1.0) / n as f64 * within + between / n as f64;
    (vhat / within).sqrt()
}

/// Summarise retained draws: moments, empirical 2.5/97.5 percentiles and ESS
/// per column. Columns that are entirely NaN (padded transdimensional
/// coordinates) are dropped; partially-present columns are summarised over
/// the iterations where the coordinate exists.
pub fn summarize(samples: &SampleMatrix) -> Result<PosteriorSummary> {
    if samples.len() < 100 {
        return Err(Error::Argument(format!(
            "need at least 100 retained draws to summarise, got {}",
            samples.len()
        )));
    }
    let mut params = Vec::new();
    for (j, name) in samples.columns.iter().enumerate() {
        let col: Vec<f64> =
            samples.rows.iter().map(|r| r[j]).filter(|v| v.is_finite()).collect();
        if col.is_empty() {
            continue;
        }
        let mut sorted = col.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = if col.len() > 1 { sd(&col) } else { 0.0 };
        params.push((
            name.clone(),
            ParamSummary {
                mean: mean(&col),
                sd: s,
                ci_low: quantile(&sorted, 0.025),
                ci_high: quantile(&sorted, 0.975),
                ess: ess(&col),
            },
        ));
    }
    Ok(PosteriorSummary { params, acceptance: samples.acceptance.clone(), n_draws: samples.len() })
}

/// Posterior model probabilities over the (p, q) grid with marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelProbTable {
    pub p_max: usize,
    pub q_max: usize,
    /// probs[p][q]
    pub probs: Vec<Vec<f64>>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
}

impl ModelProbTable {
    pub fn modal(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, -1.0);
        for p in 0..=self.p_max {
            for q in 0..=self.q_max {
                if self.probs[p][q] > best.2 {
                    best = (p, q, self.probs[p][q]);
                }
            }
        }
        best
    }
}

/// Frequency table of visited (p, q) models, normalised.
pub fn model_table(samples: &SampleMatrix, p_max: usize, q_max: usize) -> Result<ModelProbTable> {
    let pcol = samples
        .column("p")
        .ok_or_else(|| Error::Argument("samples carry no model column p".into()))?;
    let qcol = samples
        .column("q")
        .ok_or_else(|| Error::Argument("samples carry no model column q".into()))?;
    let mut probs = vec![vec![0.0; q_max + 1]; p_max + 1];
    for (pv, qv) in pcol.iter().zip(&qcol) {
        let p = pv.round() as usize;
        let q = qv.round() as usize;
        if p > p_max || q > q_max {
            return Err(Error::Argument(format!("visited model ({p},{q}) outside the grid")));
        }
        probs[p][q] += 1.0;
    }
    let total: f64 = probs.iter().flatten().sum();
    for row in probs.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    let row_marginals: Vec<f64> = probs.iter().map(|r| r.iter().sum()).collect();
    let col_marginals: Vec<f64> =
        (0..=q_max).map(|q| probs.iter().map(|r| r[q]).sum()).collect();
    Ok(ModelProbTable { p_max, q_max, probs, row_marginals, col_marginals })
}

/// Monte Carlo study configuration: a grid of input memory values and series
/// lengths, several replicates per cell, one posterior fit per replicate.
#[derive(Debug, Clone)]
pub struct McStudyConfig {
    pub d_values: Vec<f64>,
    pub n_values: Vec<usize>,
    /// Replicates per (d, n) cell.
    pub replicates: usize,
    pub mu: f64,
    pub sigma: f64,
    pub mode: LikelihoodMode,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl McStudyConfig {
    pub fn new(seed: u64) -> Self {
        McStudyConfig {
            d_values: vec![0.0],
            n_values: vec![1024],
            replicates: 20,
            mu: 0.0,
            sigma: 1.0,
            mode: LikelihoodMode::Approximate,
            iters: 12_000,
            burnin: 2_000,
            thin: 1,
            seed,
            parallel: true,
        }
    }
}

/// One simulate-then-fit replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub cell: usize,
    pub replicate: usize,
    pub d_input: f64,
    pub n: usize,
    pub d: ParamSummary,
    pub mu: ParamSummary,
    pub sigma: ParamSummary,
    /// d_hat - d_input
    pub d_residual: f64,
    pub covered: bool,
}

/// Aggregated study report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McStudyReport {
    pub replicates: Vec<ReplicateResult>,
    pub failures: Vec<(usize, usize, String)>,
    /// Fraction of replicates whose 95% CI covers d_input.
    pub coverage: f64,
    pub mean_d_residual: f64,
    /// OLS slope of log posterior-sd(d) on log n (needs >= 2 distinct n).
    pub slope_log_sd_d_vs_log_n: Option<f64>,
    /// OLS slope of log posterior-sd(mu) on d_input (needs >= 2 distinct d).
    pub slope_log_sd_mu_vs_d: Option<f64>,
}

fn run_replicate(
    cfg: &McStudyConfig,
    cell: usize,
    rep: usize,
    d_input: f64,
    n: usize,
) -> Result<ReplicateResult> {
    let seed_tags = [0x4d_c5, cell as u64, rep as u64];
    let x = simulate_fid_exact(
        n,
        d_input,
        cfg.mu,
        cfg.sigma,
        crate::rng::stream_rng(cfg.seed, &seed_tags).random_range(0..u64::MAX),
    )?;
    let mut chain = ChainConfig::new(
        ReparamMemory { d: 0.0, varphi: vec![], vartheta: vec![] },
        cfg.seed,
    );
    chain.stream = vec![0x4d_c6, cell as u64, rep as u64];
    chain.mode = cfg.mode;
    chain.iters = cfg.iters;
    chain.burnin = cfg.burnin;
    chain.thin = cfg.thin;
    let samples = crate::samplers::run_chain(&x, &chain)?;
    let summary = summarize(&samples)?;
    let d = *summary.param("d").unwrap();
    let mu = *summary.param("mu").unwrap();
    let sigma = *summary.param("sigma").unwrap();
    Ok(ReplicateResult {
        cell,
        replicate: rep,
        d_input,
        n,
        d,
        mu,
        sigma,
        d_residual: d.mean - d_input,
        covered: d.ci_low <= d_input && d_input <= d.ci_high,
    })
}

/// Run the full study grid; replicates are independent and may run in
/// parallel (deterministic per-replicate seeding either way).
pub fn mc_study(cfg: &McStudyConfig) -> Result<McStudyReport> {
    let mut jobs = Vec::new();
    let mut cell = 0usize;
    for &d in &cfg.d_values {
        for &n in &cfg.n_values {
            for rep in 0..cfg.replicates {
                jobs.push((cell, rep, d, n));
            }
            cell += 1;
        }
    }
    if jobs.is_empty() {
        return Err(Error::Config("study grid is empty".into()));
    }

    let outcomes: Vec<(usize, usize, Result<ReplicateResult>)> = if cfg.parallel {
        jobs.par_iter()
            .map(|&(c, r, d, n)| (c, r, run_replicate(cfg, c, r, d, n)))
            .collect()
    } else {
        jobs.iter().map(|&(c, r, d, n)| (c, r, run_replicate(cfg, c, r, d, n))).collect()
    };

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (c, r, out) in outcomes {
        match out {
            Ok(res) => replicates.push(res),
            Err(e) => failures.push((c, r, e.to_string())),
        }
    }
    if replicates.is_empty() {
        return Err(Error::Numerical("every replicate failed".into()));
    }

    let coverage =
        replicates.iter().filter(|r| r.covered).count() as f64 / replicates.len() as f64;
    let mean_d_residual = mean(&replicates.iter().map(|r| r.d_residual).collect::<Vec<f64>>());

    let distinct_n: std::collections::BTreeSet<usize> =
        replicates.iter().map(|r| r.n).collect();
    let slope_log_sd_d_vs_log_n = if distinct_n.len() >= 2 {
        let xs: Vec<f64> = replicates.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = replicates.iter().map(|r| r.d.sd.ln()).collect();
        Some(ols(&xs, &ys).0)
    } else {
        None
    };

    let distinct_d: std::collections::BTreeSet<u64> =
        replicates.iter().map(|r| r.d_input.to_bits()).collect();
    let slope_log_sd_mu_vs_d = if distinct_d.len() >= 2 && distinct_n.len() == 1 {
        let xs: Vec<f64> = replicates.iter().map(|r| r.d_input).collect();
        let ys: Vec<f64> = replicates.iter().map(|r| r.mu.sd.ln()).collect();
        Some(ols(&xs, &ys).0)
    } else {
        None
    };

    Ok(McStudyReport {
        replicates,
        failures,
        coverage,
        mean_d_residual,
        slope_log_sd_d_vs_log_n,
        slope_log_sd_mu_vs_d,
    })
}

use rand::Rng;

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn matrix_of(col: &str, values: Vec<f64>) -> SampleMatrix {
        SampleMatrix {
            columns: vec![col.to_string()],
            rows: values.into_iter().map(|v| vec![v]).collect(),
            acceptance: vec![],
        }
    }

    #[test]
    fn summarize_requires_draws() {
        let m = matrix_of("d", vec![0.0; 50]);
        assert!(summarize(&m).is_err());
    }

    #[test]
    fn summarise_constant_chain() {
        let m = matrix_of("d", vec![1.5; 200]);
        let s = summarize(&m).unwrap();
        let p = s.param("d").unwrap();
        assert_eq!(p.mean, 1.5);
        assert_eq!(p.sd, 0.0);
        assert_eq!(p.ci_low, 1.5);
        assert_eq!(p.ci_high, 1.5);
    }

    #[test]
    fn summarise_iid_normal_quantiles() {
        let mut rng = crate::rng::stream_rng(9, &[1]);
        let draws: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let m = matrix_of("z", draws);
        let s = summarize(&m).unwrap();
        let p = s.param("z").unwrap();
        assert!(p.mean.abs() < 0.02);
        assert!((p.ci_low + 1.96).abs() < 0.02, "{}", p.ci_low);
        assert!((p.ci_high - 1.96).abs() < 0.02, "{}", p.ci_high);
        // iid input: ESS within 10% of the draw count
        assert!(p.ess > 0.9 * 100_000.0);
        assert!(p.ess <= 100_000.0);
    }

    #[test]
    fn summarize_is_permutation_invariant() {
        let mut rng = crate::rng::stream_rng(9, &[2]);
        let mut draws: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = summarize(&matrix_of("x", draws.clone())).unwrap();
        // deterministic shuffle
        for i in (1..draws.len()).rev() {
            let j = rng.random_range(0..=i);
            draws.swap(i, j);
        }
        let b = summarize(&matrix_of("x", draws)).unwrap();
        let (pa, pb) = (a.param("x").unwrap(), b.param("x").unwrap());
        // summation order may shift the last bits
        assert!((pa.mean - pb.mean).abs() < 1e-12);
        assert!((pa.sd - pb.sd).abs() < 1e-12);
        assert_eq!(pa.ci_low, pb.ci_low);
        assert_eq!(pa.ci_high, pb.ci_high);
        // ESS is ordering-sensitive by construction and excluded here
    }

    #[test]
    fn ess_correlated_chain_is_smaller() {
        let mut rng = crate::rng::stream_rng(9, &[3]);
        let n = 20_000;
        let mut x = vec![0.0; n];
        for t in 1..n {
            let z: f64 = rng.sample(StandardNormal);
            x[t] = 0.9 * x[t - 1] + z;
        }
        let e = ess(&x);
        // AR(1) with rho = 0.9 has IACT = (1+rho)/(1-rho) = 19
        assert!(e < 0.12 * n as f64, "ess {e}");
        assert!(e > 0.02 * n as f64, "ess {e}");
    }

    #[test]
    fn rhat_near_one_for_identical_chains() {
        let mut rng = crate::rng::stream_rng(9, &[4]);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let r = rhat(&chains);
        assert!((r - 1.0).abs() < 0.02, "rhat {r}");
    }

    #[test]
    fn model_table_single_model() {
        let m = SampleMatrix {
            columns: vec!["p".into(), "q".into()],
            rows: (0..200).map(|_| vec![1.0, 0.0]).collect(),
            acceptance: vec![],
        };
        let t = model_table(&m, 3, 3).unwrap();
        assert_eq!(t.probs[1][0], 1.0);
        assert_eq!(t.modal(), (1, 0, 1.0));
        assert!((t.row_marginals[1] - 1.0).abs() < 1e-15);
        assert!((t.col_marginals[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_table_marginals_are_sums() {
        let mut rows = Vec::new();
        for p in 0..=2 {
            for q in 0..=2 {
                for _ in 0..(1 + p + 2 * q) {
                    rows.push(vec![p as f64, q as f64]);
                }
            }
        }
        let m = SampleMatrix { columns: vec!["p".into(), "q".into()], rows, acceptance: vec![] };
        let t = model_table(&m, 2, 2).unwrap();
        let total: f64 = t.probs.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for p in 0..=2 {
            let s: f64 = t.probs[p].iter().sum();
            assert!((t.row_marginals[p] - s).abs() < 1e-15);
        }
        for q in 0..=2 {
            let s: f64 = t.probs.iter().map(|r| r[q]).sum();
            assert!((t.col_marginals[q] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn mc_study_smoke() {
        let mut cfg = McStudyConfig::new(77);
        cfg.d_values = vec![0.0, 0.2];
        cfg.n_values = vec![128];
        cfg.replicates = 2;
        cfg.iters = 600;
        cfg.burnin = 200;
        let report = mc_study(&cfg).unwrap();
        assert_eq!(report.replicates.len(), 4);
        assert!(report.failures.is_empty());
        assert!(report.slope_log_sd_mu_vs_d.is_some());
        assert!(report.slope_log_sd_d_vs_log_n.is_none());
        // deterministic under the same config
        let report2 = mc_study(&cfg).unwrap();
        assert_eq!(report.replicates.len(), report2.replicates.len());
        assert_eq!(report.replicates[0].d.mean, report2.replicates[0].d.mean);
        let serial = mc_study(&McStudyConfig { parallel: false, ..cfg.clone() }).unwrap();
        assert_eq!(report.replicates[0].d.mean, serial.replicates[0].d.mean);
    }
}
