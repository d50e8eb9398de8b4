//! Subsampling-based sampling distributions and the isotropy test.
//!
//! The sampling distribution of the pairwise-likelihood estimator has no
//! closed-form covariance, so critical values come from subsampling:
//! refit the estimator on overlapping blocks `E_{i,b,e}` of side
//! `b = (b_1, b_2, b_3)` stepped by `e = (e_1, e_2, e_3)`, and form the
//! empirical distribution of `tau_b |theta_b - theta_hat|` with
//! `tau_b = sqrt(b_1 b_2 b_3)`. Quantiles of that distribution calibrate
//! tests and confidence intervals for the full-window estimate.
//!
//! The isotropy test compares the two spatial axes: under the null the
//! scale and smoothness parameters agree across axes, so the differences
//! `C_2 - C_1` and `alpha_2 - alpha_1` scaled by `tau_{M,T} = M sqrt(T)`
//! (increasing spatial domain) or `tau_T = sqrt(T)` (fixed domain, where
//! the rejection region shrinks by `1/M`) are compared against the
//! subsampled critical value. The two sub-tests at level `beta` combine
//! into a Bonferroni test of the null at level `2 beta`. Both regimes
//! reject in exactly the same cases; they differ only in how the statistic
//! and threshold are reported.

use crate::dependence::DepParams;
use crate::error::MaxstabError;
use crate::grid::ObsCube;
use crate::pairwise::{separated_fit, FitOptions, SeparatedFit};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Percentage of non-converged block refits tolerated before the whole
/// subsampling distribution is considered unreliable.
pub const DROP_LIMIT_PERCENT: u8 = 5;

/// Overlapping-block layout on an `M^2 x T` cube.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    b: [usize; 3],
    e: [usize; 3],
    q: [usize; 3],
    m: usize,
    t_len: usize,
}

impl BlockScheme {
    /// Validated constructor; `b` and `e` are (space, space, time).
    /// The two spatial block sides must agree because blocks are re-fitted
    /// as standalone square cubes.
    pub fn new(m: usize, t_len: usize, b: [usize; 3], e: [usize; 3]) -> Result<Self> {
        if b.iter().any(|&x| x == 0) || e.iter().any(|&x| x == 0) {
            return Err(MaxstabError::InvalidParams {
                reason: "block sides and steps must be positive".into(),
            });
        }
        if b[0] != b[1] {
            return Err(MaxstabError::InvalidParams {
                reason: format!(
                    "spatial block sides must agree (blocks are square), got {} and {}",
                    b[0], b[1]
                ),
            });
        }
        if b[0] > m || b[1] > m || b[2] > t_len {
            return Err(MaxstabError::Infeasible {
                reason: format!(
                    "block {}x{}x{} exceeds the {m}x{m}x{t_len} window",
                    b[0], b[1], b[2]
                ),
            });
        }
        let q = [
            (m - b[0]) / e[0] + 1,
            (m - b[1]) / e[1] + 1,
            (t_len - b[2]) / e[2] + 1,
        ];
        Ok(Self { b, e, q, m, t_len })
    }

    pub fn b(&self) -> [usize; 3] {
        self.b
    }

    pub fn e(&self) -> [usize; 3] {
        self.e
    }

    /// Block counts per axis, `q_j = floor((M - b_j)/e_j) + 1`.
    pub fn q(&self) -> [usize; 3] {
        self.q
    }

    pub fn n_blocks(&self) -> usize {
        self.q.iter().product()
    }

    /// Scaling of block-level estimates, `sqrt(b_1 b_2 b_3)`.
    pub fn tau_b(&self) -> f64 {
        ((self.b[0] * self.b[1] * self.b[2]) as f64).sqrt()
    }

    /// Zero-based block origins `((s_1, s_2), t)` in deterministic order.
    pub fn origins(&self) -> Vec<([usize; 2], usize)> {
        let mut out = Vec::with_capacity(self.n_blocks());
        for i1 in 0..self.q[0] {
            for i2 in 0..self.q[1] {
                for i3 in 0..self.q[2] {
                    out.push(([i1 * self.e[0], i2 * self.e[1]], i3 * self.e[2]));
                }
            }
        }
        out
    }
}

/// Default temporal block length: a third of the series, floored at 50.
/// Short blocks relative to the series keep the block statistics usefully
/// decorrelated from the full-sample estimate.
pub fn default_b3(t_len: usize) -> usize {
    (t_len / 3).max(50).min(t_len)
}

/// Empirical distribution of a finite sample; quantiles use the
/// generalized inverse `inf {x : L(x) >= level}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut xs: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(MaxstabError::DegenerateSample {
                reason: "empirical CDF of an empty sample".into(),
            });
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(MaxstabError::InvalidInput {
                reason: "empirical CDF input contains non-finite values".into(),
            });
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted: xs })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `L(x)`, right-continuous step function.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    /// `inf {x : L(x) >= level}` for `level` in (0, 1].
    pub fn quantile(&self, level: f64) -> Result<f64> {
        if !(0.0 < level && level <= 1.0) {
            return Err(MaxstabError::InvalidInput {
                reason: format!("quantile level {level} must lie in (0, 1]"),
            });
        }
        let q = self.sorted.len();
        let k = ((level * q as f64).ceil() as usize).clamp(1, q);
        Ok(self.sorted[k - 1])
    }
}

/// Which spatial-axis difference the subsampling distribution tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisDiff {
    /// `C_2 - C_1`.
    Scale,
    /// `alpha_2 - alpha_1`.
    Smoothness,
}

fn axis_diff(params: &DepParams, which: AxisDiff) -> f64 {
    match which {
        AxisDiff::Scale => params.c()[1] - params.c()[0],
        AxisDiff::Smoothness => params.alpha()[1] - params.alpha()[0],
    }
}

/// Raw per-block axis differences plus the full-window fit, shared by the
/// two sub-tests so the expensive block refits run once.
pub struct BlockDiffs {
    pub full: SeparatedFit,
    pub diffs_scale: Vec<f64>,
    pub diffs_smoothness: Vec<f64>,
    pub n_blocks: usize,
    pub n_dropped: usize,
}

fn check_dropped(dropped: usize, total: usize) -> Result<()> {
    // Integer form of dropped/total > limit/100, exact.
    if dropped * 100 > DROP_LIMIT_PERCENT as usize * total {
        return Err(MaxstabError::TooManyDroppedBlocks {
            dropped,
            total,
            limit_percent: DROP_LIMIT_PERCENT,
        });
    }
    Ok(())
}

/// Fit the two spatial axes on the full window and on every block.
/// Blocks whose fit errors or fails to converge on a tested axis are
/// dropped and counted; more than [`DROP_LIMIT_PERCENT`] dropped is an
/// error.
pub fn block_axis_diffs(
    cube: &ObsCube,
    scheme: &BlockScheme,
    max_lag: usize,
    init: &DepParams,
    opts: &FitOptions,
) -> Result<BlockDiffs> {
    if cube.spatial_dim() != 2 {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "axis comparison needs d = 2, cube has d = {}",
                cube.spatial_dim()
            ),
        });
    }
    if scheme.m != cube.m() || scheme.t_len != cube.t_len() {
        return Err(MaxstabError::InvalidInput {
            reason: "block scheme was built for a different cube shape".into(),
        });
    }
    if max_lag < 2 {
        return Err(MaxstabError::Infeasible {
            reason: format!("axis max lag {max_lag} < 2 cannot identify the smoothness"),
        });
    }
    if max_lag >= scheme.b[0] {
        return Err(MaxstabError::Infeasible {
            reason: format!(
                "axis max lag {max_lag} does not fit the spatial block side {}",
                scheme.b[0]
            ),
        });
    }
    let lags = [max_lag, max_lag, 0];
    let full = separated_fit(cube, &lags, init, opts)?;
    let mut diffs_scale = Vec::new();
    let mut diffs_smoothness = Vec::new();
    let mut n_dropped = 0usize;
    let origins = scheme.origins();
    for (s0, t0) in &origins {
        let block = cube.block(s0, *t0, scheme.b[0], scheme.b[2])?;
        match separated_fit(&block, &lags, init, opts) {
            Ok(fit) if fit.axis_fits.iter().all(|af| af.fit.converged) => {
                diffs_scale.push(axis_diff(&fit.theta_hat, AxisDiff::Scale));
                diffs_smoothness.push(axis_diff(&fit.theta_hat, AxisDiff::Smoothness));
            }
            _ => n_dropped += 1,
        }
    }
    check_dropped(n_dropped, origins.len())?;
    Ok(BlockDiffs {
        full,
        diffs_scale,
        diffs_smoothness,
        n_blocks: origins.len(),
        n_dropped,
    })
}

/// Subsampling distribution of one axis-difference statistic: the
/// empirical law of `tau_b |theta_b - theta_hat|` over blocks.
pub struct SubsampleDistribution {
    pub cdf: EmpiricalCdf,
    pub theta_hat: f64,
    pub tau_b: f64,
    pub n_blocks: usize,
    pub n_dropped: usize,
    pub full: SeparatedFit,
}

impl SubsampleDistribution {
    /// Critical value `c(level) = inf {x : L(x) >= level}`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        self.cdf.quantile(level)
    }
}

pub fn subsample_distribution(
    cube: &ObsCube,
    scheme: &BlockScheme,
    max_lag: usize,
    which: AxisDiff,
    init: &DepParams,
    opts: &FitOptions,
) -> Result<SubsampleDistribution> {
    let diffs = block_axis_diffs(cube, scheme, max_lag, init, opts)?;
    distribution_from_diffs(diffs, which, scheme.tau_b())
}

fn distribution_from_diffs(
    diffs: BlockDiffs,
    which: AxisDiff,
    tau_b: f64,
) -> Result<SubsampleDistribution> {
    let theta_hat = axis_diff(&diffs.full.theta_hat, which);
    let raw = match which {
        AxisDiff::Scale => &diffs.diffs_scale,
        AxisDiff::Smoothness => &diffs.diffs_smoothness,
    };
    let cdf = EmpiricalCdf::new(raw.iter().map(|d| tau_b * (d - theta_hat).abs()).collect())?;
    Ok(SubsampleDistribution {
        cdf,
        theta_hat,
        tau_b,
        n_blocks: diffs.n_blocks,
        n_dropped: diffs.n_dropped,
        full: diffs.full,
    })
}

/// Asymptotic regime for reporting the isotropy test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Spatial domain grows with the series: statistic scaled by
    /// `M sqrt(T)`, threshold used as is.
    IncreasingDomain,
    /// Spatial extent fixed, only time grows: statistic scaled by
    /// `sqrt(T)`, threshold shrunk by `1/M`. Decisions agree with the
    /// increasing-domain regime exactly.
    FixedDomain,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::IncreasingDomain => "increasing_domain",
            Regime::FixedDomain => "fixed_domain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "increasing" | "increasing_domain" => Ok(Regime::IncreasingDomain),
            "fixed" | "fixed_domain" => Ok(Regime::FixedDomain),
            other => Err(MaxstabError::InvalidInput {
                reason: format!("unknown regime '{other}' (increasing | fixed)"),
            }),
        }
    }
}

/// Two-sided interval `theta_hat +- quantile / tau`; the reporting
/// arithmetic behind the confidence-interval columns.
pub fn asymptotic_ci(theta_hat: f64, quantile: f64, tau: f64) -> (f64, f64) {
    (theta_hat - quantile / tau, theta_hat + quantile / tau)
}

/// Isotropy test report: one row per sub-hypothesis plus the Bonferroni
/// combination.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestReport {
    pub regime: Regime,
    /// Level of each sub-test; the combined test has level `2 beta`.
    pub beta: f64,
    pub m: usize,
    pub t_len: usize,
    pub b: [usize; 3],
    pub e: [usize; 3],
    pub n_blocks: usize,
    pub n_dropped: usize,
    pub tau_b: f64,
    /// Scaling of the reported statistics: `M sqrt(T)` or `sqrt(T)`.
    pub tau: f64,
    pub theta_c_hat: f64,
    pub theta_alpha_hat: f64,
    pub statistic_c: f64,
    pub statistic_alpha: f64,
    /// Rejection thresholds on the scale of the reported statistics.
    pub quantile_c: f64,
    pub quantile_alpha: f64,
    pub reject_c: bool,
    pub reject_alpha: bool,
    pub reject_overall: bool,
    pub ci_c: (f64, f64),
    pub ci_alpha: (f64, f64),
}

/// Bonferroni isotropy test on a `M^2 x T` cube: sub-tests for
/// `C_2 - C_1` and `alpha_2 - alpha_1` at level `beta` each, combined
/// rejection at `2 beta`. Block refits are shared between the sub-tests.
pub fn isotropy_test(
    cube: &ObsCube,
    scheme: &BlockScheme,
    max_lag: usize,
    regime: Regime,
    beta: f64,
    init: &DepParams,
    opts: &FitOptions,
) -> Result<TestReport> {
    if !(0.0 < beta && beta < 0.5) {
        return Err(MaxstabError::InvalidInput {
            reason: format!("sub-test level beta = {beta} must lie in (0, 0.5)"),
        });
    }
    let tau_b = scheme.tau_b();
    let diffs = block_axis_diffs(cube, scheme, max_lag, init, opts)?;
    let n_blocks = diffs.n_blocks;
    let n_dropped = diffs.n_dropped;
    let dist_c = distribution_from_diffs(
        BlockDiffs {
            full: diffs.full.clone(),
            diffs_scale: diffs.diffs_scale.clone(),
            diffs_smoothness: diffs.diffs_smoothness.clone(),
            n_blocks,
            n_dropped,
        },
        AxisDiff::Scale,
        tau_b,
    )?;
    let dist_a = distribution_from_diffs(diffs, AxisDiff::Smoothness, tau_b)?;

    let m = cube.m() as f64;
    let t = cube.t_len() as f64;
    let c_c = dist_c.quantile(1.0 - beta)?;
    let c_a = dist_a.quantile(1.0 - beta)?;
    // Increasing domain: |M sqrt(T) theta| vs c. Fixed domain: the
    // rejection region scales by 1/M, so |sqrt(T) theta| vs c / M. The
    // decisions coincide; only the reported numbers differ.
    let (tau, q_c, q_a) = match regime {
        Regime::IncreasingDomain => (m * t.sqrt(), c_c, c_a),
        Regime::FixedDomain => (t.sqrt(), c_c / m, c_a / m),
    };
    let stat_c = tau * dist_c.theta_hat;
    let stat_a = tau * dist_a.theta_hat;
    let reject_c = stat_c.abs() > q_c;
    let reject_alpha = stat_a.abs() > q_a;
    Ok(TestReport {
        regime,
        beta,
        m: cube.m(),
        t_len: cube.t_len(),
        b: scheme.b(),
        e: scheme.e(),
        n_blocks,
        n_dropped,
        tau_b,
        tau,
        theta_c_hat: dist_c.theta_hat,
        theta_alpha_hat: dist_a.theta_hat,
        statistic_c: stat_c,
        statistic_alpha: stat_a,
        quantile_c: q_c,
        quantile_alpha: q_a,
        reject_c,
        reject_alpha,
        reject_overall: reject_c || reject_alpha,
        ci_c: asymptotic_ci(dist_c.theta_hat, q_c, tau),
        ci_alpha: asymptotic_ci(dist_a.theta_hat, q_a, tau),
    })
}
