//! Marginal estimation and transforms.
//!
//! Block maxima of a max-stable series at a single location follow a GEV
//! law; for the processes in this crate the shape is zero, i.e. Gumbel
//! with location `mu` and scale `sigma`. Fitting is per location, maximum
//! likelihood. The fitted margins are then pushed to the standard Gumbel
//! or standard Frechet scale for dependence estimation.
//!
//! The Gumbel MLE reduces to a one-dimensional root find: with weights
//! `w_i = exp(-x_i / sigma)`, the profile score in `sigma` is
//!
//! ```text
//! f(sigma) = sigma - mean(x) + sum(x_i w_i) / sum(w_i)
//! ```
//!
//! whose derivative `f'(sigma) = 1 + Var_w(x) / sigma^2 >= 1`, so `f` is
//! strictly increasing and a safeguarded Newton iteration cannot miss the
//! root. Given `sigma`, `mu = -sigma ln mean(exp(-x/sigma))`.

use crate::error::MaxstabError;
use crate::grid::{Margin, ObsCube};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    pub mu: f64,
    pub sigma: f64,
}

/// Kolmogorov-Smirnov two-sided critical values (asymptotic), used for the
/// QQ band half-width `c / sqrt(n)`.
pub const KS_CRIT_05: f64 = 1.3580986393225506;
pub const KS_CRIT_01: f64 = 1.62762361151895035;

pub fn gumbel_cdf(x: f64, p: GumbelParams) -> f64 {
    (-(-(x - p.mu) / p.sigma).exp()).exp()
}

pub fn gumbel_quantile(q: f64, p: GumbelParams) -> Result<f64> {
    if !(0.0 < q && q < 1.0) {
        return Err(MaxstabError::InvalidInput {
            reason: format!("quantile level {q} must lie in (0, 1)"),
        });
    }
    Ok(p.mu - p.sigma * (-q.ln()).ln())
}

/// log-sum-exp of `-x_i / sigma`, shifted so the largest term is 1.
fn lse_neg_scaled(xs: &[f64], sigma: f64) -> f64 {
    let m = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let s: f64 = xs.iter().map(|&x| (-(x - m) / sigma).exp()).sum();
    -m / sigma + s.ln()
}

/// Fit a Gumbel distribution by maximum likelihood.
pub fn fit_gumbel(xs: &[f64]) -> Result<GumbelParams> {
    if xs.len() < 2 {
        return Err(MaxstabError::DegenerateSample {
            reason: format!("need at least 2 observations to fit a margin, got {}", xs.len()),
        });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(MaxstabError::InvalidInput {
            reason: "margin sample contains non-finite values".into(),
        });
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if spread <= 0.0 {
        return Err(MaxstabError::DegenerateSample {
            reason: "margin sample is constant".into(),
        });
    }
    let n = xs.len() as f64;
    // Standardize to center 0, scale `spread` for conditioning; the profile
    // equation is equivariant, so the root maps back exactly.
    let mid = 0.5 * (lo + hi);
    let zs: Vec<f64> = xs.iter().map(|&x| (x - mid) / spread).collect();
    let mean_z = zs.iter().sum::<f64>() / n;

    // Moment start: sigma ~ sqrt(6 Var) / pi.
    let var = zs.iter().map(|&z| (z - mean_z).powi(2)).sum::<f64>() / n;
    let mut sigma = (6.0 * var).sqrt() / std::f64::consts::PI;
    let (mut s_lo, mut s_hi) = (1e-6, 10.0);
    sigma = sigma.clamp(s_lo, s_hi);

    // f is strictly increasing; keep a shrinking bracket and fall back to
    // bisection whenever the Newton step leaves it.
    let profile = |s: f64| -> (f64, f64) {
        let mut sw = 0.0;
        let mut sxw = 0.0;
        let mut sxxw = 0.0;
        // Shift by the minimum so weights are at most 1.
        let zmin = zs.iter().cloned().fold(f64::INFINITY, f64::min);
        for &z in &zs {
            let w = (-(z - zmin) / s).exp();
            sw += w;
            sxw += z * w;
            sxxw += z * z * w;
        }
        let wmean = sxw / sw;
        let wvar = (sxxw / sw - wmean * wmean).max(0.0);
        (s - mean_z + wmean, 1.0 + wvar / (s * s))
    };
    let mut converged = false;
    for _ in 0..200 {
        let (f, df) = profile(sigma);
        if f.abs() < 1e-12 {
            converged = true;
            break;
        }
        if f > 0.0 {
            s_hi = sigma;
        } else {
            s_lo = sigma;
        }
        let step = f / df;
        let mut next = sigma - step;
        if !(next > s_lo && next < s_hi) {
            next = 0.5 * (s_lo + s_hi);
        }
        if (next - sigma).abs() < 1e-15 * sigma.max(1e-15) {
            sigma = next;
            converged = true;
            break;
        }
        sigma = next;
    }
    if !converged {
        let (f, _) = profile(sigma);
        if f.abs() > 1e-8 {
            return Err(MaxstabError::NoConvergence {
                reason: format!("Gumbel profile score stalled at |f| = {:.3e}", f.abs()),
            });
        }
    }
    let mu_z = -sigma * (lse_neg_scaled(&zs, sigma) - n.ln());
    // Undo standardization.
    Ok(GumbelParams {
        mu: mid + spread * mu_z,
        sigma: spread * sigma,
    })
}

/// Transform a sample to the standard Gumbel scale under fitted parameters.
pub fn to_standard_gumbel(xs: &[f64], p: GumbelParams) -> Vec<f64> {
    xs.iter().map(|&x| (x - p.mu) / p.sigma).collect()
}

/// Transform to standard Frechet: `exp(z)` of the standard Gumbel value.
///
/// Fails when the fitted CDF of an observation saturates to 0 or 1 in
/// double precision, since the Frechet value then carries no information
/// about the original ordering. On the standard Gumbel scale this happens
/// for `z > 36.7` or `z < -6.6` or so; with correctly fitted margins that
/// indicates either contaminated data or a wrong margin.
pub fn to_standard_frechet(xs: &[f64], p: GumbelParams) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len());
    for (i, &x) in xs.iter().enumerate() {
        let z = (x - p.mu) / p.sigma;
        let cdf = (-(-z).exp()).exp();
        if cdf <= 0.0 || cdf >= 1.0 {
            return Err(MaxstabError::Saturated {
                location: 0,
                time: i,
                value: x,
                cdf,
            });
        }
        out.push(z.exp());
    }
    Ok(out)
}

/// One location's fit plus a simple adequacy summary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginFit {
    pub location: usize,
    pub params: GumbelParams,
    /// KS distance between the empirical CDF of the transformed sample and
    /// the standard Gumbel CDF.
    pub ks_statistic: f64,
    /// PWM estimate of the GEV shape; near zero when Gumbel is adequate.
    pub gev_shape: f64,
    /// Set when `|gev_shape| >= 0.1`.
    pub shape_warning: bool,
}

/// QQ-style report for a single transformed sample against the standard
/// Gumbel law: theoretical vs empirical quantiles at the plotting
/// positions `i / (n + 1)`, with KS bands.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QqReport {
    pub theoretical: Vec<f64>,
    pub empirical: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_band_05: f64,
    pub ks_band_01: f64,
}

pub fn qq_report(zs: &[f64]) -> Result<QqReport> {
    let n = zs.len();
    if n < 2 {
        return Err(MaxstabError::DegenerateSample {
            reason: "QQ report needs at least 2 points".into(),
        });
    }
    let mut sorted = zs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let std = GumbelParams { mu: 0.0, sigma: 1.0 };
    let mut theo = Vec::with_capacity(n);
    for i in 1..=n {
        let q = i as f64 / (n as f64 + 1.0);
        theo.push(gumbel_quantile(q, std)?);
    }
    let mut ks = 0.0_f64;
    for (i, &z) in sorted.iter().enumerate() {
        let f = gumbel_cdf(z, std);
        let hi = (i + 1) as f64 / n as f64 - f;
        let lo = f - i as f64 / n as f64;
        ks = ks.max(hi).max(lo);
    }
    Ok(QqReport {
        theoretical: theo,
        empirical: sorted,
        ks_statistic: ks,
        ks_band_05: KS_CRIT_05 / (n as f64).sqrt(),
        ks_band_01: KS_CRIT_01 / (n as f64).sqrt(),
    })
}

/// Probability-weighted-moment estimate of the GEV shape (Hosking's
/// rational approximation). Returns `xi`; positive means heavy tailed.
pub fn gev_shape_pwm(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 10 {
        return Err(MaxstabError::DegenerateSample {
            reason: format!("PWM shape estimate needs at least 10 points, got {n}"),
        });
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (idx, &x) in sorted.iter().enumerate() {
        let j = idx as f64; // number of smaller observations
        b0 += x;
        b1 += x * j / (nf - 1.0);
        b2 += x * j * (j - 1.0) / ((nf - 1.0) * (nf - 2.0));
    }
    b0 /= nf;
    b1 /= nf;
    b2 /= nf;
    let denom = 3.0 * b2 - b0;
    if denom.abs() < 1e-300 {
        return Err(MaxstabError::DegenerateSample {
            reason: "PWM moments degenerate".into(),
        });
    }
    let c = (2.0 * b1 - b0) / denom - std::f64::consts::LN_2 / 3.0_f64.ln();
    let k = 7.8590 * c + 2.9554 * c * c;
    Ok(-k)
}

/// Fit Gumbel margins at every location of a raw cube and return the
/// transformed cube on the requested standard margin plus per-location
/// fits. `target` must be [`Margin::Gumbel`] or [`Margin::Frechet`].
pub fn fit_margins(cube: &ObsCube, target: Margin) -> Result<(ObsCube, Vec<MarginFit>)> {
    if cube.margin() != Margin::Raw {
        return Err(MaxstabError::MarginMismatch {
            expected: "raw".into(),
            found: cube.margin().as_str().into(),
        });
    }
    if target == Margin::Raw {
        return Err(MaxstabError::InvalidInput {
            reason: "transform target must be gumbel or frechet".into(),
        });
    }
    let n_loc = cube.n_locations();
    let t_len = cube.t_len();
    let mut values = vec![0.0; n_loc * t_len];
    let mut fits = Vec::with_capacity(n_loc);
    for loc in 0..n_loc {
        let series = cube.series(loc);
        let params = fit_gumbel(series)?;
        let zs = to_standard_gumbel(series, params);
        let ks = qq_report(&zs)?.ks_statistic;
        let shape = gev_shape_pwm(series).unwrap_or(0.0);
        fits.push(MarginFit {
            location: loc,
            params,
            ks_statistic: ks,
            gev_shape: shape,
            shape_warning: shape.abs() >= 0.1,
        });
        let out = &mut values[loc * t_len..(loc + 1) * t_len];
        match target {
            Margin::Gumbel => out.copy_from_slice(&zs),
            Margin::Frechet => {
                let fr = to_standard_frechet(series, params).map_err(|e| match e {
                    MaxstabError::Saturated {
                        time, value, cdf, ..
                    } => MaxstabError::Saturated {
                        location: loc,
                        time,
                        value,
                        cdf,
                    },
                    other => other,
                })?;
                out.copy_from_slice(&fr);
            }
            Margin::Raw => unreachable!(),
        }
    }
    let out = cube.with_values(target, values)?;
    Ok((out, fits))
}
