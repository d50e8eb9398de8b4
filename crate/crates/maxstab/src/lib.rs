//! Max-stable Brown-Resnick processes on space-time grids.
//!
//! The process under study is
//!
//! ```text
//!     eta(s, t) = max_j  xi_j * exp( W_j(s, t) - delta(s, t) )
//! ```
//!
//! where `{xi_j}` are the points of a Poisson process with intensity
//! `xi^-2 dxi` on `(0, inf)` and the `W_j` are independent copies of a
//! Gaussian process with stationary increments, `W(0,0) = 0` and
//! `Var W(s,t) = 2 delta(s,t)`. The dependence function is anisotropic
//! and separable across axes,
//!
//! ```text
//!     delta(h, u) = sum_j C_j |h_j|^alpha_j  +  C_{d+1} |u|^alpha_{d+1}
//! ```
//!
//! with scales `C_j > 0` and smoothness `alpha_j` in `(0, 2]`. Margins are
//! standard Frechet.
//!
//! The crate provides, in rough pipeline order:
//!
//! * [`dependence`]: the dependence function, tail dependence coefficient,
//!   bivariate exponent function, pair density and its parameter gradient;
//! * [`gaussian`]: covariance assembly and multivariate normal sampling for
//!   the increment process;
//! * [`simulate`]: exact (extremal functions) and truncated-spectral
//!   simulation of the max-stable process, plus an empirical tail
//!   dependence estimator;
//! * [`margins`]: Gumbel marginal fitting and transforms to standard
//!   Gumbel / Frechet scales;
//! * [`pairwise`]: the pairwise log-likelihood over a space-time design
//!   mask, its gradient, and maximum pairwise likelihood fitting;
//! * [`subsample`]: overlapping-block subsampling, the spatial isotropy
//!   test in both asymptotic regimes, and subsampling confidence intervals;
//! * [`diagnostics`]: max-stability and goodness-of-fit checks based on
//!   group maxima, conditional exceedance probability fields, and tail
//!   integral utilities;
//! * [`io`] / [`cli`]: the observation-cube CSV format, JSON reports, and
//!   the command line front end.

pub mod cli;
pub mod dependence;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod io;
pub mod margins;
pub mod normal;
pub mod optim;
pub mod pairwise;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod subsample;

pub use error::MaxstabError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, MaxstabError>;
