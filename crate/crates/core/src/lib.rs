//! Bayesian inference for ARFIMA(p,d,q) long-memory processes.
//!
//! The crate provides:
//!
//! - process definitions: fractional-differencing coefficient expansions,
//!   FI(d) autocovariances, ARFIMA spectral densities, and the PACF
//!   reparametrisation of the AR/MA stationarity regions ([`model`]);
//! - exact (Durbin-Levinson) and fast approximate (truncated AR(infinity),
//!   FFT convolution) likelihoods ([`likelihood`]);
//! - blocked Metropolis-within-Gibbs samplers for fixed model orders
//!   ([`samplers`]) and reversible-jump MCMC over unknown ARMA orders
//!   ([`rjmcmc`]);
//! - classical comparator estimators of the memory parameter: rescaled
//!   range, log-periodogram regression, detrended fluctuation analysis
//!   ([`estimators`]);
//! - an exact Gaussian FI(d) / general ARFIMA simulator ([`simulate`]);
//! - posterior summaries, convergence diagnostics and Monte Carlo study
//!   drivers ([`diagnostics`]);
//! - a command-line interface ([`cli`], binary `arfima`).
//!
//! Polynomials use the "+" sign convention Phi(z) = 1 + sum phi_k z^k; see
//! [`model`] for details.

pub mod diagnostics;
pub mod error;
pub mod estimators;
mod fft;
pub mod likelihood;
pub mod model;
pub mod rjmcmc;
pub mod rng;
pub mod samplers;
pub mod simulate;
pub mod truncnorm;
mod util;

pub mod cli;

pub use error::{Error, Result};
