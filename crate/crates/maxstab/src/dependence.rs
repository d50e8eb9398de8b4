//! Anisotropic space-time dependence function and the bivariate
//! distribution it induces.
//!
//! The dependence function is
//!
//! ```text
//!     delta(h, u) = sum_{j=1}^d C_j |h_j|^alpha_j + C_{d+1} |u|^alpha_{d+1}
//! ```
//!
//! For a pair of sites at space-time lag `(h, u)` with `delta = delta(h,u)`,
//! the joint law of the process pair on standard Frechet margins is the
//! Huesler-Reiss type distribution `G(y1, y2) = exp(-V(y1, y2))` with
//! exponent function
//!
//! ```text
//!     V(y1, y2) = Phi(w)/y1 + Phi(v)/y2,
//!     a = sqrt(2 delta),  z = log(y2/y1),  w = a/2 + z/a,  v = a/2 - z/a.
//! ```
//!
//! Differentiating twice and using `phi(w) y2 = phi(v) y1` (an identity that
//! follows from `w^2 - v^2 = 2z`) gives closed forms for everything the
//! likelihood needs:
//!
//! ```text
//!     dV/dy1   = -Phi(w)/y1^2
//!     d2V/dy1dy2 = -phi(w) / (a y1^2 y2)
//!     g(y1,y2) = exp(-V) * [ Phi(w) Phi(v) + (y2/a) phi(w) ] / (y1^2 y2^2)
//!     dV/da    = phi(w)/y1
//! ```
//!
//! The parameter gradient of `log g` factors through `delta` by the chain
//! rule, with `d delta / dC_j = |l_j|^alpha_j` and
//! `d delta / dalpha_j = C_j |l_j|^alpha_j log |l_j|` (zero when `l_j = 0`
//! and when `|l_j| = 1`).

use crate::error::MaxstabError;
use crate::normal::{phi, std_normal_cdf};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Floor for `delta` in bivariate quantities; below it the pair is treated
/// as degenerate (fully dependent) and rejected.
pub const DELTA_MIN: f64 = 1e-10;

/// Upper bound of the smoothness range, included.
pub const ALPHA_MAX: f64 = 2.0;

/// Scale and smoothness parameters per axis: `d` spatial axes followed by
/// the time axis, so `c.len() == alpha.len() == d + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepParams {
    c: Vec<f64>,
    alpha: Vec<f64>,
}

impl DepParams {
    /// Validated constructor. `c` and `alpha` list the spatial axes first
    /// and the time axis last; all `C_j > 0`, all `alpha_j` in `(0, 2]`.
    pub fn new(c: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if c.len() != alpha.len() {
            return Err(MaxstabError::InvalidParams {
                reason: format!("c has {} entries, alpha has {}", c.len(), alpha.len()),
            });
        }
        if c.len() < 2 {
            return Err(MaxstabError::InvalidParams {
                reason: "need at least one spatial axis and the time axis".into(),
            });
        }
        for (j, &cj) in c.iter().enumerate() {
            if !cj.is_finite() || cj <= 0.0 {
                return Err(MaxstabError::InvalidParams {
                    reason: format!("C_{} = {} must be finite and > 0", j + 1, cj),
                });
            }
        }
        for (j, &aj) in alpha.iter().enumerate() {
            if !aj.is_finite() || aj <= 0.0 || aj > ALPHA_MAX {
                return Err(MaxstabError::InvalidParams {
                    reason: format!("alpha_{} = {} must lie in (0, 2]", j + 1, aj),
                });
            }
        }
        Ok(Self { c, alpha })
    }

    /// Number of spatial axes.
    pub fn spatial_dim(&self) -> usize {
        self.c.len() - 1
    }

    /// Number of axes including time.
    pub fn n_axes(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Flat parameter vector `(C_1..C_{d+1}, alpha_1..alpha_{d+1})`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.c.clone();
        v.extend_from_slice(&self.alpha);
        v
    }

    /// Inverse of [`DepParams::to_vec`].
    pub fn from_vec(theta: &[f64]) -> Result<Self> {
        if theta.len() % 2 != 0 {
            return Err(MaxstabError::InvalidParams {
                reason: format!("parameter vector length {} is odd", theta.len()),
            });
        }
        let k = theta.len() / 2;
        Self::new(theta[..k].to_vec(), theta[k..].to_vec())
    }
}

/// Space-time lag `(h, u)` with `h` one entry per spatial axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeLag {
    pub h: Vec<f64>,
    pub u: f64,
}

impl SpaceTimeLag {
    pub fn new(h: Vec<f64>, u: f64) -> Result<Self> {
        if h.iter().any(|x| !x.is_finite()) || !u.is_finite() {
            return Err(MaxstabError::InvalidInput {
                reason: "lag components must be finite".into(),
            });
        }
        Ok(Self { h, u })
    }

    pub fn spatial_dim(&self) -> usize {
        self.h.len()
    }

    /// True when every component is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.u == 0.0 && self.h.iter().all(|&x| x == 0.0)
    }

    /// Absolute lag per axis, time last.
    fn axis_abs(&self) -> impl Iterator<Item = f64> + '_ {
        self.h.iter().copied().chain(std::iter::once(self.u)).map(f64::abs)
    }
}

fn check_dims(params: &DepParams, lag: &SpaceTimeLag) -> Result<()> {
    if params.spatial_dim() != lag.spatial_dim() {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "lag has {} spatial axes, parameters have {}",
                lag.spatial_dim(),
                params.spatial_dim()
            ),
        });
    }
    Ok(())
}

/// Dependence function `delta(h, u)`.
pub fn delta(params: &DepParams, lag: &SpaceTimeLag) -> Result<f64> {
    check_dims(params, lag)?;
    let mut s = 0.0;
    for (j, l) in lag.axis_abs().enumerate() {
        if l > 0.0 {
            s += params.c[j] * l.powf(params.alpha[j]);
        }
    }
    Ok(s)
}

/// Gradient of `delta` in the flat parameter vector,
/// `(d delta/dC_1, .., d delta/dC_{d+1}, d delta/dalpha_1, ..)`.
///
/// At `l_j = 0` both partials vanish; at `|l_j| = 1` the alpha partial
/// vanishes through `log 1 = 0`.
pub fn delta_grad(params: &DepParams, lag: &SpaceTimeLag) -> Result<Vec<f64>> {
    check_dims(params, lag)?;
    let k = params.n_axes();
    let mut g = vec![0.0; 2 * k];
    for (j, l) in lag.axis_abs().enumerate() {
        if l > 0.0 {
            let pw = l.powf(params.alpha[j]);
            g[j] = pw;
            g[k + j] = params.c[j] * pw * l.ln();
        }
    }
    Ok(g)
}

/// Tail dependence coefficient `chi(h, u) = 2 (1 - Phi(sqrt(delta/2)))`.
///
/// Continuous at the origin with `chi(0,0) = 1` exactly.
pub fn chi(params: &DepParams, lag: &SpaceTimeLag) -> Result<f64> {
    let dl = delta(params, lag)?;
    Ok(2.0 * crate::normal::std_normal_sf((dl / 2.0).sqrt()))
}

fn check_pair_inputs(y1: f64, y2: f64, delta: f64) -> Result<()> {
    if !(y1.is_finite() && y2.is_finite()) || y1 <= 0.0 || y2 <= 0.0 {
        return Err(MaxstabError::InvalidInput {
            reason: format!("Frechet arguments must be finite and positive, got ({y1}, {y2})"),
        });
    }
    if !delta.is_finite() || delta < DELTA_MIN {
        return Err(MaxstabError::DegenerateLag);
    }
    Ok(())
}

/// Pieces shared by the exponent function, the density and its gradient.
struct PairCore {
    a: f64,
    z: f64,
    w: f64,
    v: f64,
    phi_w: f64,
    phi_v: f64,
    cap_w: f64,
    cap_v: f64,
}

impl PairCore {
    fn new(y1: f64, y2: f64, delta: f64) -> Self {
        Self::with_logs(y1.ln(), y2.ln(), (2.0 * delta).sqrt())
    }

    /// Hot-path constructor: caller supplies `ln y` and `a = sqrt(2 delta)`.
    fn with_logs(ln_y1: f64, ln_y2: f64, a: f64) -> Self {
        let z = ln_y2 - ln_y1;
        let w = 0.5 * a + z / a;
        let v = 0.5 * a - z / a;
        Self {
            a,
            z,
            w,
            v,
            phi_w: phi(w),
            phi_v: phi(v),
            cap_w: std_normal_cdf(w),
            cap_v: std_normal_cdf(v),
        }
    }

    fn exponent(&self, y1: f64, y2: f64) -> f64 {
        self.cap_w / y1 + self.cap_v / y2
    }

    /// `Phi(w) Phi(v) + (y2/a) phi(w)`, symmetrized so that swapping the
    /// arguments reproduces the value bit for bit.
    fn bracket(&self, y1: f64, y2: f64) -> f64 {
        self.cap_w * self.cap_v + 0.5 * (y2 * self.phi_w + y1 * self.phi_v) / self.a
    }
}

/// Bivariate exponent function `V(y1, y2)` at dependence value `delta`.
pub fn exponent_v(y1: f64, y2: f64, delta: f64) -> Result<f64> {
    check_pair_inputs(y1, y2, delta)?;
    Ok(PairCore::new(y1, y2, delta).exponent(y1, y2))
}

/// Log of the bivariate pair density `g(y1, y2)`.
///
/// Returns `-inf` when the density underflows (extremely unbalanced pairs
/// under near-complete dependence); never NaN on valid input.
pub fn log_pair_density(y1: f64, y2: f64, delta: f64) -> Result<f64> {
    check_pair_inputs(y1, y2, delta)?;
    let core = PairCore::new(y1, y2, delta);
    Ok(log_density_from_core(&core, y1, y2))
}

fn log_density_from_core(core: &PairCore, y1: f64, y2: f64) -> f64 {
    log_density_prelogged(core, y1, y2, y1.ln() + y2.ln())
}

fn log_density_prelogged(core: &PairCore, y1: f64, y2: f64, sum_ln: f64) -> f64 {
    -core.exponent(y1, y2) + core.bracket(y1, y2).ln() - 2.0 * sum_ln
}

/// Bivariate pair density `g(y1, y2) = d^2/dy1 dy2 exp(-V)`.
pub fn pair_density(y1: f64, y2: f64, delta: f64) -> Result<f64> {
    Ok(log_pair_density(y1, y2, delta)?.exp())
}

/// `(log g, d log g / d delta)` in one pass.
///
/// The delta derivative comes from `d/d delta = (1/a) d/da` applied to
/// `log g = -V + log B - 2 log(y1 y2)` with `dV/da = phi(w)/y1` and
///
/// ```text
///     dB/da = phi(w) w'a Phi(v) + Phi(w) phi(v) v'a
///             - (y2/a^2) phi(w) (w w'a a + 1),
///     w'a = 1/2 - z/a^2,  v'a = 1/2 + z/a^2.
/// ```
pub fn log_pair_density_ddelta(y1: f64, y2: f64, delta: f64) -> Result<(f64, f64)> {
    check_pair_inputs(y1, y2, delta)?;
    let core = PairCore::new(y1, y2, delta);
    Ok(loglik_ddelta_from_core(&core, y1, y2, y1.ln() + y2.ln()))
}

fn loglik_ddelta_from_core(core: &PairCore, y1: f64, y2: f64, sum_ln: f64) -> (f64, f64) {
    let logg = log_density_prelogged(core, y1, y2, sum_ln);

    let a = core.a;
    let z_over_a2 = core.z / (a * a);
    let dw_da = 0.5 - z_over_a2;
    let dv_da = 0.5 + z_over_a2;
    let dexp_da = core.phi_w / y1;
    let bracket = core.bracket(y1, y2);
    // Last term symmetrized like the bracket itself (the two forms agree
    // through phi(w) y2 = phi(v) y1).
    let tail = -0.5
        * (y2 * core.phi_w * (core.w * dw_da * a + 1.0)
            + y1 * core.phi_v * (core.v * dv_da * a + 1.0))
        / (a * a);
    let dbracket_da = core.phi_w * dw_da * core.cap_v + core.cap_w * core.phi_v * dv_da + tail;
    let dlogg_da = -dexp_da + dbracket_da / bracket;
    (logg, dlogg_da / a)
}

/// Unvalidated hot-loop kernel for the pairwise likelihood: the caller
/// precomputes `ln y` once per observation and `a = sqrt(2 delta)` once
/// per lag. Returns `(log g, d log g / d delta)`.
pub(crate) fn loglik_ddelta_kernel(
    y1: f64,
    y2: f64,
    ln_y1: f64,
    ln_y2: f64,
    a: f64,
) -> (f64, f64) {
    let core = PairCore::with_logs(ln_y1, ln_y2, a);
    loglik_ddelta_from_core(&core, y1, y2, ln_y1 + ln_y2)
}

/// Gradient of `log g` in the flat parameter vector, via the chain rule
/// through `delta`.
pub fn log_density_grad_theta(
    y1: f64,
    y2: f64,
    params: &DepParams,
    lag: &SpaceTimeLag,
) -> Result<Vec<f64>> {
    if lag.is_zero() {
        return Err(MaxstabError::DegenerateLag);
    }
    let dl = delta(params, lag)?;
    let (_, dd) = log_pair_density_ddelta(y1, y2, dl)?;
    let mut g = delta_grad(params, lag)?;
    for gi in g.iter_mut() {
        *gi *= dd;
    }
    Ok(g)
}
