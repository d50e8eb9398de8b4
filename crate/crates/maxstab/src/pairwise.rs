//! Pairwise log-likelihood for the dependence parameters, and its
//! maximizer.
//!
//! The objective sums `log g` over every ordered pair of cube cells whose
//! offset lies in the design mask: spatial lags `0 <= h <= r`
//! componentwise, temporal lags `0 <= u <= p`, `(h, u) != (0, 0)`, with
//! both endpoints inside the observation window. For one lag the number
//! of such pairs is `(M - h_1) ... (M - h_d) (T - u)`, so the objective
//! costs `O(M^d T)` kernel calls per lag.
//!
//! The textbook form of the objective decomposes into a full-rectangle sum
//! of per-point contributions `q_theta(s, t)` minus a boundary remainder
//! `R` collecting the pairs whose partner leaves the window. The remainder
//! involves data outside the window, so it cannot be computed from the
//! window alone; it is asymptotically negligible (the boundary set for one
//! lag has at most `K_2 (M^{d-1} T + M^d)` points, `K_2 = max{sum r_j, p}`,
//! against `M^d T` interior pairs). Fitting therefore maximizes the
//! interior sum directly, and [`boundary_term`] / [`window_q_sum`] exist
//! as diagnostics evaluated on an enlarged cube, where the decomposition
//! identity `interior = q_sum - R` can be checked exactly.
//!
//! Identifiability depends on the mask. An axis whose maximum lag is 0
//! contributes no pair, so neither its scale nor its smoothness enters the
//! likelihood; an axis whose maximum lag is 1 only ever evaluates
//! `|l|^alpha` at `|l| = 1`, so its smoothness is invisible. [`fit_pmle`]
//! freezes the affected coordinates at their initial values and flags
//! them.

use crate::dependence::{
    delta, delta_grad, loglik_ddelta_kernel, DepParams, SpaceTimeLag,
};
use crate::error::MaxstabError;
use crate::grid::{Margin, ObsCube};
use crate::normal::std_normal_quantile;
use crate::optim::{minimize, OptimOptions, OptimResult};
use crate::rng::stream;
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Maximum space-time lags defining the pairs that enter the likelihood.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignMask {
    r: Vec<usize>,
    p: usize,
}

impl DesignMask {
    pub fn new(r: Vec<usize>, p: usize) -> Result<Self> {
        if r.is_empty() {
            return Err(MaxstabError::InvalidParams {
                reason: "mask needs at least one spatial axis".into(),
            });
        }
        if r.iter().all(|&x| x == 0) && p == 0 {
            return Err(MaxstabError::InvalidParams {
                reason: "mask must allow at least one nonzero lag".into(),
            });
        }
        Ok(Self { r, p })
    }

    pub fn r(&self) -> &[usize] {
        &self.r
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn spatial_dim(&self) -> usize {
        self.r.len()
    }

    pub fn max_r(&self) -> usize {
        self.r.iter().copied().max().unwrap_or(0)
    }

    /// Maximum lag of a flat axis index (spatial axes first, then time).
    fn axis_max_lag(&self, j: usize) -> usize {
        if j < self.r.len() {
            self.r[j]
        } else {
            self.p
        }
    }

    /// All lags `(h, u)` of the mask except `(0, 0)`, in a fixed
    /// deterministic order (odometer over `h` with the last axis fastest,
    /// then `u`).
    pub fn lags(&self) -> Vec<(Vec<usize>, usize)> {
        let mut out = Vec::with_capacity(self.n_lags());
        let d = self.r.len();
        let mut h = vec![0usize; d];
        'h: loop {
            for u in 0..=self.p {
                if u == 0 && h.iter().all(|&x| x == 0) {
                    continue;
                }
                out.push((h.clone(), u));
            }
            let mut j = d;
            while j > 0 {
                j -= 1;
                h[j] += 1;
                if h[j] <= self.r[j] {
                    continue 'h;
                }
                h[j] = 0;
            }
            break;
        }
        out
    }

    /// Number of lags in the mask: `(r_1+1)...(r_d+1)(p+1) - 1`.
    pub fn n_lags(&self) -> usize {
        self.r.iter().map(|&x| x + 1).product::<usize>() * (self.p + 1) - 1
    }

    /// Check the mask against a cube: dimensions agree and every lag fits,
    /// `r_j < M`, `p < T`.
    pub fn check_cube(&self, cube: &ObsCube) -> Result<()> {
        if self.r.len() != cube.spatial_dim() {
            return Err(MaxstabError::InvalidInput {
                reason: format!(
                    "mask has {} spatial axes, cube has {}",
                    self.r.len(),
                    cube.spatial_dim()
                ),
            });
        }
        if self.max_r() >= cube.m() || self.p >= cube.t_len() {
            return Err(MaxstabError::InvalidInput {
                reason: format!(
                    "mask lags (r = {:?}, p = {}) do not fit a {}^{} x {} cube",
                    self.r,
                    self.p,
                    cube.m(),
                    cube.spatial_dim(),
                    cube.t_len()
                ),
            });
        }
        Ok(())
    }

    /// Per-coordinate frozen flags for the flat parameter vector
    /// `(C_1..C_{d+1}, alpha_1..alpha_{d+1})`: the scale is frozen when
    /// the axis max lag is 0, the smoothness when it is at most 1.
    pub fn frozen_flags(&self) -> Vec<bool> {
        let k = self.r.len() + 1;
        let mut flags = vec![false; 2 * k];
        for j in 0..k {
            let ml = self.axis_max_lag(j);
            flags[j] = ml == 0;
            flags[k + j] = ml <= 1;
        }
        flags
    }
}

/// Interior pair count for one lag on an `M^d x T` cube.
pub fn pair_count(m: usize, t_len: usize, h: &[usize], u: usize) -> usize {
    let space: usize = h.iter().map(|&hj| m.saturating_sub(hj)).product();
    space * t_len.saturating_sub(u)
}

/// Number of window points whose lag-`(h, u)` partner leaves the window:
/// `M^d T - (M - h_1)...(M - h_d)(T - u)`.
pub fn boundary_count(m: usize, t_len: usize, h: &[usize], u: usize) -> usize {
    m.pow(h.len() as u32) * t_len - pair_count(m, t_len, h, u)
}

/// Total interior pairs over the whole mask.
pub fn total_pairs(cube: &ObsCube, mask: &DesignMask) -> usize {
    mask.lags()
        .iter()
        .map(|(h, u)| pair_count(cube.m(), cube.t_len(), h, *u))
        .sum()
}

/// Compensated accumulator; the pair sums run over millions of terms.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Visit every interior pair of flat indices for one lag, in deterministic
/// order (locations lexicographic, time fastest).
fn for_each_pair<F: FnMut(usize, usize)>(cube: &ObsCube, h: &[usize], u: usize, mut f: F) {
    let d = cube.spatial_dim();
    let m = cube.m();
    let t_len = cube.t_len();
    let mut shift_loc = 0usize;
    for &hj in h {
        shift_loc = shift_loc * m + hj;
    }
    let n_t = t_len - u;
    let mut s = vec![0usize; d];
    'outer: loop {
        let mut loc = 0usize;
        for &sj in &s {
            loc = loc * m + sj;
        }
        let base_i = loc * t_len;
        let base_j = (loc + shift_loc) * t_len + u;
        for t in 0..n_t {
            f(base_i + t, base_j + t);
        }
        let mut j = d;
        while j > 0 {
            j -= 1;
            s[j] += 1;
            if s[j] < m - h[j] {
                continue 'outer;
            }
            s[j] = 0;
        }
        break;
    }
}

fn require_frechet(cube: &ObsCube) -> Result<()> {
    if cube.margin() != Margin::Frechet {
        return Err(MaxstabError::MarginMismatch {
            expected: "frechet".into(),
            found: cube.margin().as_str().into(),
        });
    }
    Ok(())
}

/// Shared evaluation core: objective always, gradient on demand.
fn accumulate(
    cube: &ObsCube,
    mask: &DesignMask,
    params: &DepParams,
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    require_frechet(cube)?;
    mask.check_cube(cube)?;
    if params.spatial_dim() != cube.spatial_dim() {
        return Err(MaxstabError::InvalidParams {
            reason: format!(
                "parameters have {} spatial axes, cube has {}",
                params.spatial_dim(),
                cube.spatial_dim()
            ),
        });
    }
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let vals = cube.values();
    let ln_vals: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let mut total = 0.0;
    for (h, u) in mask.lags() {
        let lag = SpaceTimeLag::new(h.iter().map(|&x| x as f64).collect(), u as f64)?;
        let dl = delta(params, &lag)?;
        let a = (2.0 * dl).sqrt();
        let mut sum_logg = Kahan::default();
        if let Some(g) = grad.as_deref_mut() {
            let dgrad = delta_grad(params, &lag)?;
            let mut sum_dd = Kahan::default();
            for_each_pair(cube, &h, u, |i, j| {
                let (lg, dd) = loglik_ddelta_kernel(vals[i], vals[j], ln_vals[i], ln_vals[j], a);
                sum_logg.add(lg);
                sum_dd.add(dd);
            });
            for (gk, dk) in g.iter_mut().zip(&dgrad) {
                *gk += sum_dd.sum * dk;
            }
        } else {
            for_each_pair(cube, &h, u, |i, j| {
                let (lg, _) = loglik_ddelta_kernel(vals[i], vals[j], ln_vals[i], ln_vals[j], a);
                sum_logg.add(lg);
            });
        }
        total += sum_logg.sum;
    }
    Ok(total)
}

/// Pairwise log-likelihood over the interior pairs of the cube.
pub fn pl_objective(cube: &ObsCube, mask: &DesignMask, params: &DepParams) -> Result<f64> {
    accumulate(cube, mask, params, None)
}

/// Gradient of [`pl_objective`] in the flat parameter vector
/// `(C_1..C_{d+1}, alpha_1..alpha_{d+1})`.
pub fn pl_gradient(cube: &ObsCube, mask: &DesignMask, params: &DepParams) -> Result<Vec<f64>> {
    let mut g = vec![0.0; 2 * params.n_axes()];
    accumulate(cube, mask, params, Some(&mut g))?;
    Ok(g)
}

/// Per-point contributions summed over the full mask regardless of whether
/// the partner stays inside the window (the first factor of the
/// decomposition). The input cube must be enlarged: its trailing
/// `max r_j` locations per axis and `p` time steps provide the partner
/// data, and the window is the leading `(M - max r_j)^d x (T - p)` block.
pub fn window_q_sum(cube: &ObsCube, mask: &DesignMask, params: &DepParams) -> Result<f64> {
    let (wm, wt) = enlarged_window(cube, mask)?;
    let vals = cube.values();
    let ln_vals: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let mut total = 0.0;
    for (h, u) in mask.lags() {
        let lag = SpaceTimeLag::new(h.iter().map(|&x| x as f64).collect(), u as f64)?;
        let a = (2.0 * delta(params, &lag)?).sqrt();
        let mut sum = Kahan::default();
        for_each_window_pair(cube, wm, wt, &h, u, WindowPairs::All, |i, j| {
            let (lg, _) = loglik_ddelta_kernel(vals[i], vals[j], ln_vals[i], ln_vals[j], a);
            sum.add(lg);
        });
        total += sum.sum;
    }
    Ok(total)
}

/// Remainder of the decomposition: contributions of window points whose
/// lag partner leaves the window (partner data from the enlarged cube).
pub fn boundary_term(cube: &ObsCube, mask: &DesignMask, params: &DepParams) -> Result<f64> {
    let (wm, wt) = enlarged_window(cube, mask)?;
    let vals = cube.values();
    let ln_vals: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let mut total = 0.0;
    for (h, u) in mask.lags() {
        let lag = SpaceTimeLag::new(h.iter().map(|&x| x as f64).collect(), u as f64)?;
        let a = (2.0 * delta(params, &lag)?).sqrt();
        let mut sum = Kahan::default();
        for_each_window_pair(cube, wm, wt, &h, u, WindowPairs::Exiting, |i, j| {
            let (lg, _) = loglik_ddelta_kernel(vals[i], vals[j], ln_vals[i], ln_vals[j], a);
            sum.add(lg);
        });
        total += sum.sum;
    }
    Ok(total)
}

fn enlarged_window(cube: &ObsCube, mask: &DesignMask) -> Result<(usize, usize)> {
    require_frechet(cube)?;
    mask.check_cube(cube)?;
    let wm = cube.m() - mask.max_r();
    let wt = cube.t_len() - mask.p();
    if wm == 0 || wt == 0 {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "enlarged cube {}^{} x {} leaves no window for mask (r = {:?}, p = {})",
                cube.m(),
                cube.spatial_dim(),
                cube.t_len(),
                mask.r(),
                mask.p()
            ),
        });
    }
    Ok((wm, wt))
}

/// Which pairs with base point in the window to visit.
#[derive(Clone, Copy, PartialEq, Eq)]
enum WindowPairs {
    /// Every pair, including those whose partner leaves the window.
    All,
    /// Only the pairs whose partner leaves the window (the boundary set).
    Exiting,
}

/// Pairs whose base point lies in the `wm^d x wt` window of an enlarged
/// cube; the partner may extend into the enlargement.
fn for_each_window_pair<F: FnMut(usize, usize)>(
    cube: &ObsCube,
    wm: usize,
    wt: usize,
    h: &[usize],
    u: usize,
    which: WindowPairs,
    mut f: F,
) {
    let d = cube.spatial_dim();
    let m = cube.m();
    let t_len = cube.t_len();
    let mut shift_loc = 0usize;
    for &hj in h {
        shift_loc = shift_loc * m + hj;
    }
    let mut s = vec![0usize; d];
    'outer: loop {
        let space_exits = s.iter().zip(h).any(|(&sj, &hj)| sj + hj >= wm);
        let mut loc = 0usize;
        for &sj in &s {
            loc = loc * m + sj;
        }
        let base_i = loc * t_len;
        let base_j = (loc + shift_loc) * t_len + u;
        for t in 0..wt {
            let exits = space_exits || t + u >= wt;
            if which == WindowPairs::All || exits {
                f(base_i + t, base_j + t);
            }
        }
        let mut j = d;
        while j > 0 {
            j -= 1;
            s[j] += 1;
            if s[j] < wm {
                continue 'outer;
            }
            s[j] = 0;
        }
        break;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    /// Extra starts from perturbed initial values; best objective wins.
    pub restarts: usize,
    /// Seed for the restart perturbations.
    pub seed: u64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub keep_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 0,
            grad_tol: 1e-6,
            max_iter: 500,
            keep_trace: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: DepParams,
    /// Pairwise log-likelihood at `theta_hat`.
    pub objective: f64,
    pub n_pairs: usize,
    pub converged: bool,
    pub n_iter: usize,
    pub grad_norm: f64,
    /// Flat-coordinate flags: frozen coordinates kept their initial value
    /// because the mask cannot identify them.
    pub frozen: Vec<bool>,
    /// `(objective, gradient norm)` per accepted iteration of the winning
    /// start, objective in log-likelihood orientation.
    pub trace: Vec<(f64, f64)>,
}

/// `C = exp(x)` and `alpha = 2 sigmoid(x)` map the box onto free
/// coordinates; gradients pick up `dC/dx = C`, `dalpha/dx =
/// alpha (2 - alpha) / 2`.
fn to_free(theta: &[f64], frozen: &[bool]) -> Vec<f64> {
    let k = theta.len() / 2;
    let mut x = Vec::new();
    for (i, &t) in theta.iter().enumerate() {
        if frozen[i] {
            continue;
        }
        if i < k {
            x.push(t.ln());
        } else {
            // Clamp away from the closed upper end so the logit exists.
            let a = t.min(2.0 - 1e-12);
            x.push((a / (2.0 - a)).ln());
        }
    }
    x
}

fn from_free(x: &[f64], init: &[f64], frozen: &[bool]) -> Vec<f64> {
    let k = init.len() / 2;
    let mut theta = init.to_vec();
    let mut xi = x.iter();
    for i in 0..init.len() {
        if frozen[i] {
            continue;
        }
        let &v = xi.next().expect("free coordinate count");
        theta[i] = if i < k {
            v.exp()
        } else {
            2.0 / (1.0 + (-v).exp())
        };
    }
    theta
}

/// Maximize the pairwise log-likelihood over the parameters the mask can
/// identify; frozen coordinates keep their value from `init`.
pub fn fit_pmle(
    cube: &ObsCube,
    mask: &DesignMask,
    init: &DepParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    require_frechet(cube)?;
    mask.check_cube(cube)?;
    let frozen = mask.frozen_flags();
    let n_free = frozen.iter().filter(|f| !*f).count();
    if n_free == 0 {
        return Err(MaxstabError::Infeasible {
            reason: "mask freezes every parameter; nothing to fit".into(),
        });
    }
    let theta0 = init.to_vec();
    let k = init.n_axes();
    let x0 = to_free(&theta0, &frozen);

    let optim_opts = OptimOptions {
        grad_tol: opts.grad_tol,
        max_iter: opts.max_iter,
        keep_trace: opts.keep_trace,
        // One stride may scale a parameter by at most e; without the cap
        // the first iterations can vault over the likelihood ridge onto
        // the flat independence plateau at huge C and stall there.
        max_step: 1.0,
    };
    let mut full_grad = vec![0.0; 2 * k];
    let mut objective = |x: &[f64], g: &mut [f64]| -> Result<f64> {
        let theta = from_free(x, &theta0, &frozen);
        let params = DepParams::from_vec(&theta)?;
        let val = accumulate(cube, mask, &params, Some(&mut full_grad))?;
        if !val.is_finite() {
            return Err(MaxstabError::NoConvergence {
                reason: "objective underflowed".into(),
            });
        }
        let mut gi = 0;
        for i in 0..2 * k {
            if frozen[i] {
                continue;
            }
            let chain = if i < k {
                theta[i]
            } else {
                theta[i] * (2.0 - theta[i]) / 2.0
            };
            g[gi] = -full_grad[i] * chain;
            gi += 1;
        }
        Ok(-val)
    };

    let mut best: Option<OptimResult> = None;
    for restart in 0..opts.restarts.max(1) {
        let start = if restart == 0 {
            x0.clone()
        } else {
            let mut rng = stream(opts.seed, restart as u64);
            x0.iter()
                .map(|&v| v + 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let run = match minimize(&mut objective, &start, &optim_opts) {
            Ok(r) => r,
            // A start may sit outside the evaluable region (e.g. objective
            // underflow); skip it rather than fail the fit.
            Err(_) if restart > 0 || opts.restarts > 1 => continue,
            Err(e) => return Err(e),
        };
        let better = match &best {
            None => true,
            Some(b) => run.value < b.value,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.ok_or_else(|| MaxstabError::NoConvergence {
        reason: "no start produced an evaluable objective".into(),
    })?;
    let theta_hat = DepParams::from_vec(&from_free(&best.x, &theta0, &frozen))?;
    Ok(FitResult {
        theta_hat,
        objective: -best.value,
        n_pairs: total_pairs(cube, mask),
        converged: best.converged,
        n_iter: best.n_iter,
        grad_norm: best.grad_norm,
        frozen,
        trace: best.trace.iter().map(|&(v, g)| (-v, g)).collect(),
    })
}

/// One axis of a separated fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxisFit {
    /// Flat axis index: spatial axes first, time last.
    pub axis: usize,
    pub fit: FitResult,
}

/// Result of fitting each axis with all other lags zeroed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparatedFit {
    /// Assembled parameters: each fitted axis contributes its own
    /// `(C, alpha)` pair; unfitted axes keep the initial values.
    pub theta_hat: DepParams,
    pub axis_fits: Vec<AxisFit>,
}

/// Fit each axis individually: axis `j` uses the mask with `max_lags[j]`
/// on that axis and zero elsewhere, which makes the sub-likelihood depend
/// on `(C_j, alpha_j)` alone. `max_lags` has one entry per axis including
/// time; zero entries are skipped (their parameters keep `init`).
pub fn separated_fit(
    cube: &ObsCube,
    max_lags: &[usize],
    init: &DepParams,
    opts: &FitOptions,
) -> Result<SeparatedFit> {
    let d = cube.spatial_dim();
    if max_lags.len() != d + 1 {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "need {} per-axis max lags (spatial axes plus time), got {}",
                d + 1,
                max_lags.len()
            ),
        });
    }
    if max_lags.iter().all(|&l| l == 0) {
        return Err(MaxstabError::Infeasible {
            reason: "all per-axis max lags are zero".into(),
        });
    }
    let mut theta = init.to_vec();
    let mut axis_fits = Vec::new();
    for (j, &lag) in max_lags.iter().enumerate() {
        if lag == 0 {
            continue;
        }
        let mut r = vec![0usize; d];
        let mut p = 0usize;
        if j < d {
            r[j] = lag;
        } else {
            p = lag;
        }
        let mask = DesignMask::new(r, p)?;
        let fit = fit_pmle(cube, &mask, init, opts)?;
        let hat = fit.theta_hat.to_vec();
        theta[j] = hat[j];
        theta[d + 1 + j] = hat[d + 1 + j];
        axis_fits.push(AxisFit { axis: j, fit });
    }
    Ok(SeparatedFit {
        theta_hat: DepParams::from_vec(&theta)?,
        axis_fits,
    })
}

/// Moment-style starting values: the tail dependence coefficient at the
/// unit lag of each axis is inverted for `delta`, which at unit lag equals
/// the axis scale; smoothness starts at 1. Falls back to `C = 1` when an
/// axis has too few exceedance pairs to estimate.
pub fn chi_moment_init(cube: &ObsCube, q: f64) -> Result<DepParams> {
    require_frechet(cube)?;
    if !(0.5 <= q && q < 1.0) {
        return Err(MaxstabError::InvalidInput {
            reason: format!("exceedance level q = {q} must lie in [0.5, 1)"),
        });
    }
    let d = cube.spatial_dim();
    let vals = cube.values();
    let mut sorted = vals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let thr = sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
    let mut c = vec![1.0; d + 1];
    for j in 0..=d {
        let mut h = vec![0usize; d];
        let mut u = 0usize;
        if j < d {
            if cube.m() < 2 {
                continue;
            }
            h[j] = 1;
        } else {
            if cube.t_len() < 2 {
                continue;
            }
            u = 1;
        }
        let (mut both, mut base) = (0usize, 0usize);
        for_each_pair(cube, &h, u, |i, jj| {
            if vals[i] > thr {
                base += 1;
                if vals[jj] > thr {
                    both += 1;
                }
            }
        });
        if base < 20 {
            continue;
        }
        let chi_hat = (both as f64 / base as f64).clamp(1e-3, 1.0 - 1e-3);
        let z = std_normal_quantile(1.0 - chi_hat / 2.0);
        c[j] = (2.0 * z * z).clamp(1e-4, 50.0);
    }
    DepParams::new(c, vec![1.0; d + 1])
}
