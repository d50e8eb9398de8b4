//! Model diagnostics on the Gumbel scale.
//!
//! Three checks plus one numeric utility:
//!
//! * Max-stability group test: for a group `D` of `k` space-time points
//!   repeated over `R` separated time blocks, the block maxima `eta_D`
//!   are Gumbel with unit scale and location `mu_D = log V_D(1,...,1)`
//!   in `[0, log k]` when the data are max-stable with standard Gumbel
//!   margins. Pooled centered maxima are compared to standard Gumbel
//!   quantiles with block-bootstrap bands.
//! * Order-statistics goodness of fit: observed block maxima over a fixed
//!   group are compared against the order-statistic envelope of exact
//!   simulations from the fitted model.
//! * Conditional probability fields: the probability that a prediction
//!   point exceeds level `z` given an exceedance of `z*` at a reference
//!   point, evaluated from the fitted margins and bivariate exponent.
//! * Upper tail integrals `int_y^inf u^r exp(-C u^alpha) du` and their
//!   first-order asymptotic, used to reason about truncation error.

use std::collections::HashSet;

use rand::Rng;

use crate::dependence::{delta, exponent_v, DepParams, SpaceTimeLag};
use crate::error::MaxstabError;
use crate::grid::{Margin, ObsCube, PointSet};
use crate::margins::GumbelParams;
use crate::quad::integrate_to_inf;
use crate::rng::{nested, stream};
use crate::simulate::{simulate_br, SimConfig, SimMethod};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Fraction of quantile points that must keep the bisecting line inside
/// the bootstrap band for a check to pass.
pub const IN_BAND_PASS: f64 = 0.9;
/// Parametric bootstrap replicates for the location bias correction.
pub const BIAS_BOOT_REPS: usize = 200;
/// Bands are evaluated on at most this many evenly spaced ranks.
pub const MAX_BAND_RANKS: usize = 500;

/// Group test layout: subsets of size `k` drawn from the `b1 * M^d`
/// coordinates of a time block, replicated over `r_blocks` blocks
/// separated by `b2` slices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpec {
    pub k: usize,
    pub b1: usize,
    pub b2: usize,
    pub r_blocks: usize,
    pub m: usize,
    pub seed: u64,
}

/// `C(n, k)` capped at `cap`; exact integer arithmetic, the running
/// product `C(n, i)` is always an integer.
fn binomial_capped(n: usize, k: usize, cap: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c >= cap as u128 {
            return cap;
        }
    }
    c as usize
}

impl GroupSpec {
    /// Resolve the layout against a cube: `r_blocks = floor(T/(b1+b2))`
    /// and `m` defaults to `min(r_blocks, C(b1 * M^d, k))`, the largest
    /// admissible subset count.
    pub fn for_cube(
        cube: &ObsCube,
        k: usize,
        b1: usize,
        b2: usize,
        m: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if k == 0 || b1 == 0 {
            return Err(MaxstabError::InvalidParams {
                reason: "group cardinality and block span must be positive".into(),
            });
        }
        let n_within = b1 * cube.n_locations();
        if k > n_within {
            return Err(MaxstabError::Infeasible {
                reason: format!("group of {k} points exceeds the {n_within} block coordinates"),
            });
        }
        let r_blocks = cube.t_len() / (b1 + b2);
        if r_blocks < 2 {
            return Err(MaxstabError::Infeasible {
                reason: format!(
                    "T = {} gives {r_blocks} blocks of span {}; need at least 2",
                    cube.t_len(),
                    b1 + b2
                ),
            });
        }
        let m_max = r_blocks.min(binomial_capped(n_within, k, r_blocks + 1));
        let m = m.unwrap_or(m_max);
        if m == 0 || m > m_max {
            return Err(MaxstabError::Infeasible {
                reason: format!("subset count {m} outside 1..={m_max}"),
            });
        }
        Ok(Self {
            k,
            b1,
            b2,
            r_blocks,
            m,
            seed,
        })
    }
}

fn require_gumbel(cube: &ObsCube) -> Result<()> {
    if cube.margin() != Margin::Gumbel {
        return Err(MaxstabError::MarginMismatch {
            expected: "gumbel",
            found: cube.margin().as_str(),
        });
    }
    Ok(())
}

/// Uniform k-subset of `0..n` without replacement (Floyd's algorithm),
/// returned sorted.
fn sample_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut chosen: HashSet<usize> = HashSet::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut out: Vec<usize> = chosen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Block maxima per subset: `m` distinct random groups of `k` within-block
/// coordinates, each evaluated over all `r_blocks` blocks. The same
/// relative coordinates are used in every block so that the `R` maxima
/// are independent replicates of the same `eta_D`.
pub fn group_maxima(cube: &ObsCube, spec: &GroupSpec) -> Result<Vec<Vec<f64>>> {
    require_gumbel(cube)?;
    let n_within = spec.b1 * cube.n_locations();
    if spec.k > n_within || spec.r_blocks * (spec.b1 + spec.b2) > cube.t_len() || spec.m == 0 {
        return Err(MaxstabError::Infeasible {
            reason: "group spec does not match the cube layout".into(),
        });
    }
    let mut rng = stream(spec.seed, nested(0, 0));
    let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(spec.m);
    let mut subsets = Vec::with_capacity(spec.m);
    let mut attempts = 0usize;
    while subsets.len() < spec.m {
        attempts += 1;
        if attempts > 1000 * spec.m + 1000 {
            return Err(MaxstabError::Infeasible {
                reason: format!(
                    "could not sample {} distinct subsets of size {} from {n_within} coordinates",
                    spec.m, spec.k
                ),
            });
        }
        let s = sample_subset(&mut rng, n_within, spec.k);
        if seen.insert(s.clone()) {
            subsets.push(s);
        }
    }

    let vals = cube.values();
    let t_len = cube.t_len();
    let out = subsets
        .iter()
        .map(|subset| {
            (0..spec.r_blocks)
                .map(|i| {
                    let t0 = i * (spec.b1 + spec.b2);
                    let mut mx = f64::NEG_INFINITY;
                    for &c in subset {
                        // Within-block coordinate: location-major, then
                        // relative time inside the block.
                        let loc = c / spec.b1;
                        let rel_t = c % spec.b1;
                        mx = mx.max(vals[loc * t_len + t0 + rel_t]);
                    }
                    mx
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Unit-scale Gumbel location MLE constrained to `[0, log k]`:
/// `mu = log R - log sum(exp(-v))`.
fn gumbel_location_mle(values: &[f64], log_k: f64) -> f64 {
    let r = values.len() as f64;
    let s: f64 = values.iter().map(|v| (-v).exp()).sum();
    (r.ln() - s.ln()).clamp(0.0, log_k)
}

/// QQ table with pointwise bootstrap bands. `theoretical` holds the
/// reference quantiles (standard Gumbel, or simulated means for the
/// order-statistics check); the pass criterion counts ranks where the
/// reference stays inside `[band_lo, band_hi]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QqBandReport {
    pub k: usize,
    pub r_blocks: usize,
    pub m_subsets: usize,
    pub n_pooled: usize,
    /// Bias-corrected location estimates per subset.
    pub mu_hat: Vec<f64>,
    pub theoretical: Vec<f64>,
    pub observed: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub in_band_fraction: f64,
    pub pass: bool,
}

/// Evenly spaced rank indices `0..n`, at most `MAX_BAND_RANKS` of them,
/// always including both extremes.
fn band_ranks(n: usize) -> Vec<usize> {
    let n_band = n.min(MAX_BAND_RANKS);
    if n_band <= 1 {
        return vec![0];
    }
    (0..n_band).map(|i| i * (n - 1) / (n_band - 1)).collect()
}

/// Lower inf-quantile of a sorted slice, `inf {x : F(x) >= level}`.
fn sorted_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn std_gumbel_quantile(p: f64) -> f64 {
    -(-p.ln()).ln()
}

/// Max-stability check: pooled centered group maxima against standard
/// Gumbel quantiles, with a circular block bootstrap (block length
/// `ceil(R^{1/3})`, shared resample indices across subsets) providing 95%
/// pointwise bands, and a parametric bootstrap bias correction of each
/// location estimate.
pub fn maxstable_check(
    cube: &ObsCube,
    spec: &GroupSpec,
    bootstrap_reps: usize,
) -> Result<QqBandReport> {
    if bootstrap_reps < 40 {
        return Err(MaxstabError::InvalidParams {
            reason: format!("{bootstrap_reps} bootstrap replicates cannot resolve 95% bands"),
        });
    }
    let groups = group_maxima(cube, spec)?;
    let r = spec.r_blocks;
    let log_k = (spec.k as f64).ln();

    // Location MLE + parametric bootstrap bias correction per subset.
    let mut mu_hat = Vec::with_capacity(groups.len());
    for (j, g) in groups.iter().enumerate() {
        let mu = gumbel_location_mle(g, log_k);
        let mut rng = stream(spec.seed, nested(1, j as u32));
        let mut acc = 0.0;
        let mut sim = vec![0.0; r];
        for _ in 0..BIAS_BOOT_REPS {
            for s in sim.iter_mut() {
                *s = mu + std_gumbel_quantile(open01(&mut rng));
            }
            acc += gumbel_location_mle(&sim, log_k);
        }
        let bias = acc / BIAS_BOOT_REPS as f64 - mu;
        mu_hat.push((mu - bias).clamp(0.0, log_k));
    }

    // Observed pooled curve.
    let n = groups.len() * r;
    let mut pooled = Vec::with_capacity(n);
    for (g, mu) in groups.iter().zip(&mu_hat) {
        pooled.extend(g.iter().map(|v| v - mu));
    }
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ranks = band_ranks(n);
    let observed: Vec<f64> = ranks.iter().map(|&i| pooled[i]).collect();
    let theoretical: Vec<f64> = ranks
        .iter()
        .map(|&i| std_gumbel_quantile((i + 1) as f64 / (n + 1) as f64))
        .collect();

    // Circular block bootstrap over the R block indices; the same
    // resampled indices apply to every subset (subsets share blocks).
    let block_len = (r as f64).powf(1.0 / 3.0).ceil() as usize;
    let exp_neg: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.iter().map(|v| (-v).exp()).collect())
        .collect();
    let biases: Vec<f64> = groups
        .iter()
        .zip(&mu_hat)
        .map(|(g, corrected)| gumbel_location_mle(g, log_k) - corrected)
        .collect();
    let mut band_samples = vec![Vec::with_capacity(bootstrap_reps); ranks.len()];
    let mut idx = Vec::with_capacity(r + block_len);
    let mut resampled = Vec::with_capacity(n);
    for b in 0..bootstrap_reps {
        let mut rng = stream(spec.seed, nested(2, b as u32));
        idx.clear();
        while idx.len() < r {
            let start = rng.gen_range(0..r);
            for o in 0..block_len {
                idx.push((start + o) % r);
            }
        }
        idx.truncate(r);
        resampled.clear();
        for (j, g) in groups.iter().enumerate() {
            let s: f64 = idx.iter().map(|&i| exp_neg[j][i]).sum();
            let mu_star = ((r as f64).ln() - s.ln()).clamp(0.0, log_k);
            let centered = (mu_star - biases[j]).clamp(0.0, log_k);
            resampled.extend(idx.iter().map(|&i| g[i] - centered));
        }
        resampled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (slot, &i) in band_samples.iter_mut().zip(&ranks) {
            slot.push(resampled[i]);
        }
    }
    let mut band_lo = Vec::with_capacity(ranks.len());
    let mut band_hi = Vec::with_capacity(ranks.len());
    for slot in band_samples.iter_mut() {
        slot.sort_by(|a, b| a.partial_cmp(b).unwrap());
        band_lo.push(sorted_quantile(slot, 0.025));
        band_hi.push(sorted_quantile(slot, 0.975));
    }
    let in_band = theoretical
        .iter()
        .zip(band_lo.iter().zip(&band_hi))
        .filter(|(t, (lo, hi))| **t >= **lo && **t <= **hi)
        .count();
    let in_band_fraction = in_band as f64 / ranks.len() as f64;
    Ok(QqBandReport {
        k: spec.k,
        r_blocks: r,
        m_subsets: groups.len(),
        n_pooled: n,
        mu_hat,
        theoretical,
        observed,
        band_lo,
        band_hi,
        in_band_fraction,
        pass: in_band_fraction >= IN_BAND_PASS,
    })
}

/// Uniform draw strictly inside (0, 1).
fn open01<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

/// Order-statistics goodness-of-fit report: observed sorted block maxima
/// against the mean and 95% envelope of simulated order statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GofReport {
    pub r_blocks: usize,
    pub n_group_points: usize,
    pub m_sims: usize,
    pub observed: Vec<f64>,
    pub sim_mean: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub in_band_fraction: f64,
    pub pass: bool,
}

/// Compare the observed order statistics of `eta_D` (group `D` =
/// `locations x {0..b1-1}` repeated over `R` blocks with gap `b2`)
/// against `m_sims` simulated ensembles of `R` copies each, simulated
/// exactly from `theta` on the group's point set.
pub fn gof_orderstats(
    cube: &ObsCube,
    theta: &DepParams,
    locations: &[Vec<usize>],
    b1: usize,
    b2: usize,
    m_sims: usize,
    seed: u64,
) -> Result<GofReport> {
    require_gumbel(cube)?;
    if locations.is_empty() || b1 == 0 {
        return Err(MaxstabError::InvalidParams {
            reason: "need at least one location and a positive block span".into(),
        });
    }
    if m_sims < 40 {
        return Err(MaxstabError::InvalidParams {
            reason: format!("{m_sims} simulated ensembles cannot resolve 95% bands"),
        });
    }
    let d = cube.spatial_dim();
    for loc in locations {
        if loc.len() != d || loc.iter().any(|&c| c >= cube.m()) {
            return Err(MaxstabError::InvalidInput {
                reason: format!("location {loc:?} outside the {}^{d} grid", cube.m()),
            });
        }
    }
    let r = cube.t_len() / (b1 + b2);
    if r < 2 {
        return Err(MaxstabError::Infeasible {
            reason: format!("block span {} leaves {r} blocks; need at least 2", b1 + b2),
        });
    }

    // Observed: R block maxima over the group, sorted.
    let vals = cube.values();
    let t_len = cube.t_len();
    let loc_idx: Vec<usize> = locations.iter().map(|c| cube.loc_index(c)).collect();
    let mut observed: Vec<f64> = (0..r)
        .map(|i| {
            let t0 = i * (b1 + b2);
            let mut mx = f64::NEG_INFINITY;
            for &li in &loc_idx {
                for rel_t in 0..b1 {
                    mx = mx.max(vals[li * t_len + t0 + rel_t]);
                }
            }
            mx
        })
        .collect();
    observed.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Simulated: m_sims ensembles of R copies of eta_D on the group's
    // relative point set, on the Gumbel scale.
    let mut space = Vec::with_capacity(locations.len() * b1);
    let mut time = Vec::with_capacity(locations.len() * b1);
    for loc in locations {
        for rel_t in 0..b1 {
            space.push(loc.iter().map(|&c| c as f64).collect::<Vec<f64>>());
            time.push(rel_t as f64);
        }
    }
    let pts = PointSet::new(d, space, time)?;
    let cfg = SimConfig {
        method: SimMethod::ExactExtremal,
        n_poisson_max: 1000,
        seed,
        replicates: m_sims * r,
    };
    let sims = simulate_br(theta, &pts, &cfg)?;
    let eta: Vec<f64> = sims
        .values
        .iter()
        .map(|rep| rep.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).ln())
        .collect();
    // Per-rank ensemble of order statistics: m_sims sorted blocks of R.
    let mut per_rank = vec![Vec::with_capacity(m_sims); r];
    let mut block = Vec::with_capacity(r);
    for e in 0..m_sims {
        block.clear();
        block.extend_from_slice(&eta[e * r..(e + 1) * r]);
        block.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (rank, &v) in block.iter().enumerate() {
            per_rank[rank].push(v);
        }
    }
    let mut sim_mean = Vec::with_capacity(r);
    let mut band_lo = Vec::with_capacity(r);
    let mut band_hi = Vec::with_capacity(r);
    for ensemble in per_rank.iter_mut() {
        ensemble.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sim_mean.push(ensemble.iter().sum::<f64>() / m_sims as f64);
        band_lo.push(sorted_quantile(ensemble, 0.025));
        band_hi.push(sorted_quantile(ensemble, 0.975));
    }
    let ranks = band_ranks(r);
    let pick = |v: &[f64]| ranks.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let observed = pick(&observed);
    let sim_mean = pick(&sim_mean);
    let band_lo = pick(&band_lo);
    let band_hi = pick(&band_hi);
    let in_band = observed
        .iter()
        .zip(band_lo.iter().zip(&band_hi))
        .filter(|(o, (lo, hi))| **o >= **lo && **o <= **hi)
        .count();
    let in_band_fraction = in_band as f64 / ranks.len() as f64;
    Ok(GofReport {
        r_blocks: r,
        n_group_points: pts.len(),
        m_sims,
        observed,
        sim_mean,
        band_lo,
        band_hi,
        in_band_fraction,
        pass: in_band_fraction >= IN_BAND_PASS,
    })
}

/// Conditional exceedance field setup: reference point, its marginal fit,
/// and the two levels on the observation scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CondFieldSpec {
    pub ref_space: Vec<f64>,
    pub ref_time: f64,
    pub ref_fit: GumbelParams,
    /// Conditioning level `z*` at the reference point.
    pub z_ref: f64,
    /// Prediction level `z` at the prediction points.
    pub z_pred: f64,
}

/// Fréchet coordinate `-1/log Lambda(z)` of a level under a Gumbel fit;
/// equals `exp((z - mu)/sigma)` exactly. `idx` only labels the error.
fn frechet_level(z: f64, fit: &GumbelParams, idx: usize) -> Result<f64> {
    if !(fit.sigma > 0.0) || !fit.mu.is_finite() {
        return Err(MaxstabError::InvalidParams {
            reason: format!("invalid Gumbel fit at point {idx}: {fit:?}"),
        });
    }
    let y = ((z - fit.mu) / fit.sigma).exp();
    if y == 0.0 || !y.is_finite() {
        return Err(MaxstabError::Saturated {
            location: idx,
            time: 0,
            value: z,
            cdf: if y == 0.0 { 0.0 } else { 1.0 },
        });
    }
    Ok(y)
}

/// `P(eta(p) > z | eta(ref) > z*)` for every prediction point, from the
/// bivariate exponent at the lag between the points:
/// `[1 - L* - L_p + exp(-V)] / (1 - L*)` evaluated with `expm1` so the
/// near-saturated regime keeps full relative accuracy. Coincident points
/// use the comonotone special case. Outputs are clamped into `[0, 1]`.
pub fn cond_prob_field(
    spec: &CondFieldSpec,
    theta: &DepParams,
    pts: &PointSet,
    fits: &[GumbelParams],
) -> Result<Vec<f64>> {
    let d = theta.spatial_dim();
    if pts.spatial_dim() != d || spec.ref_space.len() != d {
        return Err(MaxstabError::InvalidInput {
            reason: "prediction points, reference, and parameters disagree on the spatial dimension"
                .into(),
        });
    }
    if fits.len() != pts.len() {
        return Err(MaxstabError::InvalidInput {
            reason: format!("{} marginal fits for {} prediction points", fits.len(), pts.len()),
        });
    }
    let y_star = frechet_level(spec.z_ref, &spec.ref_fit, usize::MAX)?;
    // 1 - Lambda* = -expm1(-1/y*), the exceedance probability.
    let a_star = -(-1.0 / y_star).exp_m1();
    if a_star == 0.0 {
        return Err(MaxstabError::Saturated {
            location: usize::MAX,
            time: 0,
            value: spec.z_ref,
            cdf: 1.0,
        });
    }
    let mut out = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let y_p = frechet_level(spec.z_pred, &fits[i], i)?;
        let a_p = -(-1.0 / y_p).exp_m1();
        let h: Vec<f64> = pts.space(i)
            .iter()
            .zip(&spec.ref_space)
            .map(|(a, b)| a - b)
            .collect();
        let lag = SpaceTimeLag::new(h, pts.time(i) - spec.ref_time)?;
        let p = if lag.is_zero() {
            // Same point: the two events concern one random variable.
            let a_max = -(-1.0 / y_p.max(y_star)).exp_m1();
            a_max / a_star
        } else {
            let dlt = delta(theta, &lag)?;
            let v = exponent_v(y_p, y_star, dlt)?;
            (a_p + a_star + (-v).exp_m1()) / a_star
        };
        out.push(p.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// `int_y^inf u^r exp(-C u^alpha) du` by adaptive quadrature. The
/// exponential lead factor is pulled out so the integrand stays order one
/// even when `exp(-C y^alpha)` underflows toward the smallest doubles.
pub fn tail_integral(y: f64, r: f64, alpha: f64, c: f64) -> Result<f64> {
    check_tail_args(y, r, alpha, c)?;
    let lead = (-c * y.powf(alpha)).exp();
    let scaled = integrate_to_inf(
        |t| {
            let u = y + t;
            u.powf(r) * (-c * (u.powf(alpha) - y.powf(alpha))).exp()
        },
        0.0,
        1e-12,
    );
    Ok(lead * scaled)
}

/// First-order asymptotic `(1/(C alpha)) y^{r-alpha+1} exp(-C y^alpha)`.
pub fn tail_integral_asymptotic(y: f64, r: f64, alpha: f64, c: f64) -> Result<f64> {
    check_tail_args(y, r, alpha, c)?;
    Ok(y.powf(r - alpha + 1.0) * (-c * y.powf(alpha)).exp() / (c * alpha))
}

fn check_tail_args(y: f64, r: f64, alpha: f64, c: f64) -> Result<()> {
    if !(y > 0.0) || !(r >= 1.0) || !(alpha > 0.0 && alpha <= 2.0) || !(c > 0.0) {
        return Err(MaxstabError::InvalidParams {
            reason: format!("tail integral needs y>0, r>=1, alpha in (0,2], C>0; got y={y}, r={r}, alpha={alpha}, C={c}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::qq_report;
    use crate::simulate::simulate_grid_cube;
    use approx::assert_relative_eq;

    fn gumbel_cube(seed: u64, m: usize, t_len: usize) -> ObsCube {
        let p = DepParams::new(vec![0.8, 0.9, 3.0], vec![1.0, 1.2, 0.5]).unwrap();
        let cfg = SimConfig {
            method: SimMethod::ExactExtremal,
            n_poisson_max: 1000,
            seed,
            replicates: 1,
        };
        let frechet = simulate_grid_cube(&p, m, t_len, &cfg).unwrap().pop().unwrap();
        let vals = frechet.values().iter().map(|v| v.ln()).collect();
        frechet.with_values(Margin::Gumbel, vals).unwrap()
    }

    #[test]
    fn group_spec_reference_arithmetic() {
        // M=12, T=732, b1=2, b2=1 -> R = 244; with m = R the pooled
        // sample has N = R^2 = 59536 entries.
        let vals = vec![0.0; 144 * 732];
        let cube = ObsCube::new(2, 12, 732, Margin::Gumbel, vals).unwrap();
        let spec = GroupSpec::for_cube(&cube, 2, 2, 1, None, 0).unwrap();
        assert_eq!(spec.r_blocks, 244);
        assert_eq!(spec.m, 244);
        assert_eq!(spec.m * spec.r_blocks, 59_536);
        // m capped by the number of distinct subsets when it is smaller:
        // a tiny 2x2 grid has only C(8, 8) = 1 full-block subset.
        let small = ObsCube::new(2, 2, 732, Margin::Gumbel, vec![0.0; 4 * 732]).unwrap();
        let spec = GroupSpec::for_cube(&small, 8, 2, 1, None, 0).unwrap();
        assert_eq!(spec.m, 1);
        assert!(GroupSpec::for_cube(&small, 9, 2, 1, None, 0).is_err());
        assert!(GroupSpec::for_cube(&small, 2, 2, 1, Some(300), 0).is_err());
        assert!(GroupSpec::for_cube(&small, 0, 2, 1, None, 0).is_err());
    }

    #[test]
    fn binomials_are_exact_until_capped() {
        assert_eq!(binomial_capped(8, 2, 1000), 28);
        assert_eq!(binomial_capped(50, 5, usize::MAX >> 1), 2_118_760);
        assert_eq!(binomial_capped(50, 5, 100), 100);
        assert_eq!(binomial_capped(4, 9, 10), 0);
        assert_eq!(binomial_capped(6, 6, 10), 1);
    }

    #[test]
    fn singleton_groups_return_raw_series_values() {
        let cube = gumbel_cube(11, 3, 30);
        let spec = GroupSpec::for_cube(&cube, 1, 2, 1, Some(5), 7).unwrap();
        let groups = group_maxima(&cube, &spec).unwrap();
        assert_eq!(groups.len(), 5);
        for g in &groups {
            assert_eq!(g.len(), spec.r_blocks);
            // Every maximum over a singleton is an actual cube value.
            for v in g {
                assert!(cube.values().iter().any(|x| x == v));
            }
        }
        // Distinct subsets: k=1 groups must all differ somewhere.
        let flat: HashSet<Vec<u64>> = groups
            .iter()
            .map(|g| g.iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(flat.len(), 5);
    }

    #[test]
    fn pooled_singletons_pass_ks_against_standard_gumbel() {
        // k=1, mu_D = 0: the pooled values are standard Gumbel draws under
        // the max-stable null (exact simulation), KS at level 0.01.
        let cube = gumbel_cube(5, 4, 90);
        let spec = GroupSpec::for_cube(&cube, 1, 2, 1, Some(16), 3).unwrap();
        let groups = group_maxima(&cube, &spec).unwrap();
        let pooled: Vec<f64> = groups.concat();
        let rep = qq_report(&pooled).unwrap();
        assert!(
            rep.ks_statistic < rep.ks_band_01,
            "KS {} vs crit {}",
            rep.ks_statistic,
            rep.ks_band_01
        );
    }

    #[test]
    fn location_mle_is_clipped_to_the_group_range() {
        // k=4 -> mu in [0, 1.3863].
        let log_k = 4.0_f64.ln();
        assert_relative_eq!(log_k, 1.3862943611198906);
        let high = vec![20.0; 50];
        assert_eq!(gumbel_location_mle(&high, log_k), log_k);
        let low = vec![-20.0; 50];
        assert_eq!(gumbel_location_mle(&low, log_k), 0.0);
        // Unconstrained case recovers the closed form.
        let vals = vec![0.3, 0.9, 1.1, 0.2, 0.7];
        let s: f64 = vals.iter().map(|v: &f64| (-v).exp()).sum();
        assert_relative_eq!(
            gumbel_location_mle(&vals, log_k),
            (5.0_f64).ln() - s.ln(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn maxstable_statistic_invariant_under_block_permutation() {
        let cube = gumbel_cube(21, 3, 48);
        let spec = GroupSpec::for_cube(&cube, 2, 2, 1, Some(8), 5).unwrap();
        let rep1 = maxstable_check(&cube, &spec, 100).unwrap();

        // Permute whole (b1+b2)-slice blocks in time; block contents and
        // the subset coordinates are unchanged, so the pooled statistic
        // must be too (bands may differ: resampling is order-dependent).
        let r = spec.r_blocks;
        let span = spec.b1 + spec.b2;
        let perm: Vec<usize> = (0..r).map(|i| (i * 7 + 3) % r).collect();
        {
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..r).collect::<Vec<_>>());
        }
        let t_len = cube.t_len();
        let mut vals = cube.values().to_vec();
        for loc in 0..cube.n_locations() {
            let base = loc * t_len;
            let orig: Vec<f64> = cube.values()[base..base + t_len].to_vec();
            for (i, &pi) in perm.iter().enumerate() {
                for o in 0..span {
                    vals[base + i * span + o] = orig[pi * span + o];
                }
            }
        }
        let permuted = cube.with_values(Margin::Gumbel, vals).unwrap();
        let rep2 = maxstable_check(&permuted, &spec, 100).unwrap();
        for (a, b) in rep1.observed.iter().zip(&rep2.observed) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-9);
        }
        for (a, b) in rep1.mu_hat.iter().zip(&rep2.mu_hat) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn maxstable_check_report_shape() {
        let cube = gumbel_cube(31, 3, 60);
        let spec = GroupSpec::for_cube(&cube, 2, 2, 1, Some(10), 9).unwrap();
        let rep = maxstable_check(&cube, &spec, 200).unwrap();
        assert_eq!(rep.n_pooled, 10 * spec.r_blocks);
        assert_eq!(rep.theoretical.len(), rep.observed.len());
        assert_eq!(rep.band_lo.len(), rep.band_hi.len());
        assert!(rep.mu_hat.iter().all(|&m| (0.0..=2.0_f64.ln()).contains(&m)));
        // Sorted curves.
        assert!(rep.observed.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.theoretical.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep
            .band_lo
            .iter()
            .zip(&rep.band_hi)
            .all(|(lo, hi)| lo <= hi));
        assert!((0.0..=1.0).contains(&rep.in_band_fraction));
        assert!(maxstable_check(&cube, &spec, 10).is_err());
    }

    #[test]
    fn gof_orderstats_self_consistency_smoke() {
        // Observed data simulated from the same theta: the envelope should
        // hold most ranks even in this small smoke version.
        let theta = DepParams::new(vec![0.8, 0.9, 3.0], vec![1.0, 1.2, 0.5]).unwrap();
        let cube = gumbel_cube(41, 3, 60);
        let locs = vec![vec![0, 0], vec![1, 2], vec![2, 1]];
        let rep = gof_orderstats(&cube, &theta, &locs, 2, 1, 60, 13).unwrap();
        assert_eq!(rep.r_blocks, 20);
        assert_eq!(rep.n_group_points, 6);
        assert!(rep.sim_mean.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.band_lo.iter().zip(&rep.band_hi).all(|(lo, hi)| lo <= hi));
        assert!(rep.in_band_fraction > 0.5, "fraction {}", rep.in_band_fraction);
        // Input validation.
        assert!(gof_orderstats(&cube, &theta, &[], 2, 1, 60, 13).is_err());
        assert!(gof_orderstats(&cube, &theta, &locs, 2, 1, 10, 13).is_err());
        let bad = vec![vec![5, 0]];
        assert!(gof_orderstats(&cube, &theta, &bad, 2, 1, 60, 13).is_err());
    }

    #[test]
    fn cond_prob_matches_direct_oracle() {
        // delta = 2, standard margins, z = z* = 2.5. Frozen high-precision
        // value of the displayed estimator.
        let theta = DepParams::new(vec![2.0, 1.0], vec![1.0, 1.0]).unwrap();
        let std_fit = GumbelParams { mu: 0.0, sigma: 1.0 };
        let spec = CondFieldSpec {
            ref_space: vec![0.0],
            ref_time: 0.0,
            ref_fit: std_fit,
            z_ref: 2.5,
            z_pred: 2.5,
        };
        // One spatial axis with C=2, alpha=1: lag (1, 0) gives delta = 2.
        let pts = PointSet::new(1, vec![vec![1.0]], vec![0.0]).unwrap();
        let p = cond_prob_field(&spec, &theta, &pts, &[std_fit]).unwrap();
        assert_relative_eq!(p[0], 0.3629625394545512731212, max_relative = 1e-10);
        // Direct (unstable) evaluation agrees too.
        let y = 2.5_f64.exp();
        let lam = (-1.0 / y).exp();
        let v = exponent_v(y, y, 2.0).unwrap();
        let direct = (1.0 - 2.0 * lam + (-v).exp()) / (1.0 - lam);
        assert_relative_eq!(p[0], direct, max_relative = 1e-12);
    }

    #[test]
    fn cond_prob_limits_and_monotonicity() {
        let std_fit = GumbelParams { mu: 0.0, sigma: 1.0 };
        // Independence limit: enormous delta factorizes the bracket.
        let theta = DepParams::new(vec![500.0, 1.0], vec![1.0, 1.0]).unwrap();
        let spec = CondFieldSpec {
            ref_space: vec![0.0],
            ref_time: 0.0,
            ref_fit: std_fit,
            z_ref: 1.5,
            z_pred: 2.0,
        };
        let pts = PointSet::new(1, vec![vec![1.0]], vec![0.0]).unwrap();
        let p = cond_prob_field(&spec, &theta, &pts, &[std_fit]).unwrap();
        let marginal = -(-(-2.0_f64).exp()).exp_m1(); // 1 - Lambda(2.0)
        assert_relative_eq!(p[0], marginal, max_relative = 1e-12);

        // Conditioning on itself at the same level -> 1.
        let self_pts = PointSet::new(1, vec![vec![0.0]], vec![0.0]).unwrap();
        let spec_self = CondFieldSpec { z_pred: 1.5, ..spec.clone() };
        let p = cond_prob_field(&spec_self, &theta, &self_pts, &[std_fit]).unwrap();
        assert_relative_eq!(p[0], 1.0, max_relative = 1e-15);

        // Monotone nonincreasing in z over a sweep, all within [0, 1].
        let theta = DepParams::new(vec![0.7, 0.4], vec![1.3, 0.8]).unwrap();
        let mut prev = f64::INFINITY;
        for iz in 0..30 {
            let z = -2.0 + 0.3 * iz as f64;
            let spec = CondFieldSpec {
                ref_space: vec![0.0],
                ref_time: 0.0,
                ref_fit: std_fit,
                z_ref: 1.0,
                z_pred: z,
            };
            let pts = PointSet::new(1, vec![vec![2.0]], vec![1.0]).unwrap();
            let p = cond_prob_field(&spec, &theta, &pts, &[std_fit]).unwrap()[0];
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev + 1e-12, "z={z}: {p} > {prev}");
            prev = p;
        }

        // Saturation raises the dedicated error.
        let spec_sat = CondFieldSpec {
            ref_space: vec![0.0],
            ref_time: 0.0,
            ref_fit: std_fit,
            z_ref: 800.0,
            z_pred: 1.0,
        };
        let pts = PointSet::new(1, vec![vec![1.0]], vec![0.0]).unwrap();
        assert!(matches!(
            cond_prob_field(&spec_sat, &theta, &pts, &[std_fit]),
            Err(MaxstabError::Saturated { .. })
        ));
    }

    #[test]
    fn tail_integral_matches_closed_forms() {
        // (y=10, r=1, alpha=1, C=1): exact (y+1)e^{-y}.
        let i = tail_integral(10.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(i, 11.0 * (-10.0_f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(i, 4.9939922738733336689e-4, max_relative = 1e-10);
        let asym = tail_integral_asymptotic(10.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(i / asym, 1.1, max_relative = 1e-10);
        // Frozen quadrature references for non-closed-form cases.
        assert_relative_eq!(
            tail_integral(2.0, 1.5, 0.8, 0.9).unwrap(),
            3.1873109881091860248,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            tail_integral(1.0, 2.0, 1.3, 2.0).unwrap(),
            0.090237335114303455183,
            max_relative = 1e-9
        );
        // Deep tail: the factored quadrature keeps full precision where
        // the integrand underflows, ratio exactly (y+1)/y.
        let i100 = tail_integral(100.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(i100, 101.0 * (-100.0_f64).exp(), max_relative = 1e-10);
        let a100 = tail_integral_asymptotic(100.0, 1.0, 1.0, 1.0).unwrap();
        assert!((i100 / a100 - 1.0).abs() <= 0.01 + 1e-12);
        // Domain checks.
        assert!(tail_integral(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(tail_integral(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(tail_integral(1.0, 1.0, 2.5, 1.0).is_err());
        assert!(tail_integral(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn tail_ratio_monotone_toward_one() {
        // Triples chosen so exp(-C y^alpha) stays normal at y = 100.
        for (r, alpha, c) in [(1.0, 1.0, 1.0), (1.5, 0.8, 0.9), (2.0, 1.3, 1.5)] {
            let mut prev = f64::INFINITY;
            for y in [5.0, 10.0, 50.0, 100.0] {
                let ratio = tail_integral(y, r, alpha, c).unwrap()
                    / tail_integral_asymptotic(y, r, alpha, c).unwrap();
                assert!(ratio > 1.0, "ratio {ratio} at y={y}");
                assert!(ratio < prev, "ratio {ratio} not decreasing at y={y}");
                prev = ratio;
            }
        }
    }

    #[test]
    fn band_rank_helper_covers_extremes() {
        assert_eq!(band_ranks(1), vec![0]);
        assert_eq!(band_ranks(3), vec![0, 1, 2]);
        let r = band_ranks(59_536);
        assert_eq!(r.len(), MAX_BAND_RANKS);
        assert_eq!(r[0], 0);
        assert_eq!(*r.last().unwrap(), 59_535);
        assert!(r.windows(2).all(|w| w[0] < w[1]));
    }
}
