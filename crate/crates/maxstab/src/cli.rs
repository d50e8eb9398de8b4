//! Command-line interface: thin argument parsing and dispatch around the
//! library. All heavy lifting lives in the other modules; this one reads
//! cubes, assembles options, and writes reports.
//!
//! Exit codes are stable: 0 success, 2 usage or parameter errors, 3 data
//! errors, 4 numeric or convergence failures, 5 infeasible configurations.
//! Every run logs its effective configuration (including the seed) to
//! stderr, and reruns with the same configuration produce byte-identical
//! reports.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dependence::DepParams;
use crate::diagnostics::{
    cond_prob_field, gof_orderstats, maxstable_check, CondFieldSpec, GofReport, GroupSpec,
    QqBandReport,
};
use crate::error::MaxstabError;
use crate::grid::{Margin, ObsCube, PointSet};
use crate::io::{read_cube, write_cube, write_report, write_table};
use crate::margins::fit_margins;
use crate::pairwise::{
    chi_moment_init, fit_pmle, separated_fit, DesignMask, FitOptions, FitResult, SeparatedFit,
};
use crate::simulate::{simulate_grid_cube, SimConfig, SimMethod};
use crate::subsample::{default_b3, isotropy_test, BlockScheme, Regime};
use crate::Result;

#[derive(Parser)]
#[command(
    name = "maxstab",
    version,
    about = "Anisotropic Brown-Resnick space-time processes on regular grids",
    propagate_version = true
)]
pub struct Cli {
    /// Worker threads (falls back to MAXSTAB_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Simulate Brown-Resnick cubes from a JSON spec.
    Simulate(SimulateArgs),
    /// Fit per-location Gumbel margins and transform a raw cube.
    Margins(MarginsArgs),
    /// Fit dependence parameters by pairwise likelihood.
    Fit(FitArgs),
    /// Subsampling-based test of spatial isotropy (d = 2).
    TestIsotropy(IsotropyArgs),
    /// Group-maxima max-stability diagnostic.
    CheckMaxstable(CheckArgs),
    /// Order-statistics goodness-of-fit check against a fitted model.
    Gof(GofArgs),
    /// Conditional exceedance probability field around a reference point.
    PredictCond(PredictArgs),
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("maxstab: error: {e}");
            e.exit_code()
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("MAXSTAB_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Margins(a) => cmd_margins(a),
        Command::Fit(a) => cmd_fit(a),
        Command::TestIsotropy(a) => cmd_isotropy(a),
        Command::CheckMaxstable(a) => cmd_check(a),
        Command::Gof(a) => cmd_gof(a),
        Command::PredictCond(a) => cmd_predict(a),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON simulation spec; unknown keys are rejected.
    #[arg(long)]
    pub config: PathBuf,
    /// Output cube path; replicate index is appended when replicates > 1.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SimSpec {
    d: usize,
    m: usize,
    t_len: usize,
    c: Vec<f64>,
    alpha: Vec<f64>,
    #[serde(default = "default_method")]
    method: SimMethod,
    #[serde(default = "default_npoisson")]
    n_poisson_max: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_one")]
    replicates: usize,
}

fn default_method() -> SimMethod {
    SimMethod::ExactExtremal
}
fn default_npoisson() -> usize {
    1000
}
fn default_one() -> usize {
    1
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| MaxstabError::Data {
        reason: format!("{}: {e}", a.config.display()),
    })?;
    let spec: SimSpec = serde_json::from_str(&text)?;
    let params = DepParams::new(spec.c.clone(), spec.alpha.clone())?;
    if params.spatial_dim() != spec.d {
        return Err(MaxstabError::InvalidParams {
            reason: format!(
                "spec says d = {}, parameters imply d = {}",
                spec.d,
                params.spatial_dim()
            ),
        });
    }
    eprintln!("maxstab simulate: {}", serde_json::to_string(&spec)?);
    let cfg = SimConfig {
        method: spec.method,
        n_poisson_max: spec.n_poisson_max,
        seed: spec.seed,
        replicates: spec.replicates,
    };
    let cubes = simulate_grid_cube(&params, spec.m, spec.t_len, &cfg)?;
    if cubes.len() == 1 {
        write_cube(&cubes[0], &a.out)?;
        eprintln!("maxstab simulate: wrote {}", a.out.display());
    } else {
        for (i, cube) in cubes.iter().enumerate() {
            let path = numbered(&a.out, i + 1);
            write_cube(cube, &path)?;
            eprintln!("maxstab simulate: wrote {}", path.display());
        }
    }
    Ok(())
}

/// `cube.csv` -> `cube_3.csv`.
fn numbered(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{i}.{ext}"))
}

// ----------------------------------------------------------------- margins

#[derive(Args)]
pub struct MarginsArgs {
    /// Input cube CSV (margin raw).
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Target margin: gumbel or frechet.
    #[arg(long, default_value = "frechet")]
    pub target: String,
    /// Transformed cube output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-location fit report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct MarginsReport {
    target: String,
    n_locations: usize,
    n_shape_warnings: usize,
    fits: Vec<crate::margins::MarginFit>,
}

fn parse_margin(s: &str) -> Result<Margin> {
    match s {
        "raw" => Ok(Margin::Raw),
        "gumbel" => Ok(Margin::Gumbel),
        "frechet" => Ok(Margin::Frechet),
        other => Err(MaxstabError::InvalidInput {
            reason: format!("unknown margin '{other}' (raw | gumbel | frechet)"),
        }),
    }
}

fn cmd_margins(a: MarginsArgs) -> Result<()> {
    let cube = read_cube(&a.r#in)?;
    let target = parse_margin(&a.target)?;
    eprintln!(
        "maxstab margins: in={} d={} M={} T={} target={}",
        a.r#in.display(),
        cube.spatial_dim(),
        cube.m(),
        cube.t_len(),
        target.as_str()
    );
    let (out_cube, fits) = fit_margins(&cube, target)?;
    write_cube(&out_cube, &a.out)?;
    if let Some(rep_path) = &a.report {
        let report = MarginsReport {
            target: target.as_str().into(),
            n_locations: fits.len(),
            n_shape_warnings: fits.iter().filter(|f| f.shape_warning).count(),
            fits,
        };
        write_report(&report, rep_path)?;
    }
    eprintln!("maxstab margins: wrote {}", a.out.display());
    Ok(())
}

// --------------------------------------------------------------------- fit

#[derive(Args)]
pub struct FitArgs {
    /// Input cube CSV (margin frechet).
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Design mask r1,..,rd,p: spatial max lags per axis, then time.
    #[arg(long)]
    pub mask: String,
    /// Fit each axis separately (one-axis masks, assembled afterwards).
    #[arg(long)]
    pub separated: bool,
    /// Initial values c1,..,c{d+1},a1,..,a{d+1}; default all ones.
    #[arg(long, conflicts_with = "init_chi")]
    pub init: Option<String>,
    /// Initialize from the empirical tail dependence at unit lags.
    #[arg(long)]
    pub init_chi: bool,
    /// Quantile level for --init-chi.
    #[arg(long, default_value_t = 0.9)]
    pub chi_q: f64,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitPayload {
    Joint(FitResult),
    Separated(SeparatedFit),
}

#[derive(Serialize)]
struct FitReport {
    mask: Vec<usize>,
    separated: bool,
    seed: u64,
    restarts: usize,
    init: DepParams,
    fit: FitPayload,
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            tok.trim().parse().map_err(|_| MaxstabError::InvalidInput {
                reason: format!("bad {what} entry '{tok}'"),
            })
        })
        .collect()
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim().parse().map_err(|_| MaxstabError::InvalidInput {
                reason: format!("bad {what} entry '{tok}'"),
            })
        })
        .collect()
}

fn parse_theta(s: &str, n_axes: usize) -> Result<DepParams> {
    let vals = parse_f64_list(s, "theta")?;
    if vals.len() != 2 * n_axes {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "theta needs {} entries (c then alpha per axis), got {}",
                2 * n_axes,
                vals.len()
            ),
        });
    }
    DepParams::new(vals[..n_axes].to_vec(), vals[n_axes..].to_vec())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let cube = read_cube(&a.r#in)?;
    let n_axes = cube.spatial_dim() + 1;
    let mask = parse_usize_list(&a.mask, "mask")?;
    if mask.len() != n_axes {
        return Err(MaxstabError::InvalidInput {
            reason: format!("mask needs {} entries for this cube, got {}", n_axes, mask.len()),
        });
    }
    let init = if let Some(s) = &a.init {
        parse_theta(s, n_axes)?
    } else if a.init_chi {
        chi_moment_init(&cube, a.chi_q)?
    } else {
        DepParams::new(vec![1.0; n_axes], vec![1.0; n_axes])?
    };
    let opts = FitOptions {
        restarts: a.restarts,
        seed: a.seed,
        ..Default::default()
    };
    eprintln!(
        "maxstab fit: in={} mask={:?} separated={} seed={} restarts={} init={:?}",
        a.r#in.display(),
        mask,
        a.separated,
        a.seed,
        a.restarts,
        init.to_vec()
    );
    let fit = if a.separated {
        FitPayload::Separated(separated_fit(&cube, &mask, &init, &opts)?)
    } else {
        let (r, p) = mask.split_at(n_axes - 1);
        let design = DesignMask::new(r.to_vec(), p[0])?;
        FitPayload::Joint(fit_pmle(&cube, &design, &init, &opts)?)
    };
    let report = FitReport {
        mask,
        separated: a.separated,
        seed: a.seed,
        restarts: a.restarts,
        init,
        fit,
    };
    write_report(&report, &a.out)?;
    eprintln!("maxstab fit: wrote {}", a.out.display());
    Ok(())
}

// ------------------------------------------------------------ test-isotropy

#[derive(Args)]
pub struct IsotropyArgs {
    /// Input cube CSV (margin frechet), d = 2.
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Block sides b1,b2,b3 (default: half the grid spatially, a third of
    /// the series in time, floored at 50).
    #[arg(long)]
    pub blocks: Option<String>,
    /// Block steps e1,e2,e3 (default: steps keeping the block count small).
    #[arg(long)]
    pub overlap: Option<String>,
    /// Level of each one-sided sub-test; overall level is 2*beta.
    #[arg(long, default_value_t = 0.025)]
    pub beta: f64,
    /// Asymptotic regime: increasing | fixed.
    #[arg(long, default_value = "increasing")]
    pub regime: String,
    /// Spatial max lag of the axiswise fits (>= 2).
    #[arg(long, default_value_t = 2)]
    pub max_lag: usize,
    /// Initial values as in `fit --init`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_isotropy(a: IsotropyArgs) -> Result<()> {
    let cube = read_cube(&a.r#in)?;
    let m = cube.m();
    let t_len = cube.t_len();
    let b = match &a.blocks {
        Some(s) => {
            let v = parse_usize_list(s, "blocks")?;
            if v.len() != 3 {
                return Err(MaxstabError::InvalidInput {
                    reason: "blocks needs b1,b2,b3".into(),
                });
            }
            [v[0], v[1], v[2]]
        }
        None => {
            let bs = (m / 2).max(a.max_lag + 1).min(m);
            [bs, bs, default_b3(t_len)]
        }
    };
    let e = match &a.overlap {
        Some(s) => {
            let v = parse_usize_list(s, "overlap")?;
            if v.len() != 3 {
                return Err(MaxstabError::InvalidInput {
                    reason: "overlap needs e1,e2,e3".into(),
                });
            }
            [v[0], v[1], v[2]]
        }
        // Cap the default grid at roughly 6 x 6 x 5 blocks.
        None => [
            (m.saturating_sub(b[0]) / 5).max(1),
            (m.saturating_sub(b[1]) / 5).max(1),
            (t_len.saturating_sub(b[2]) / 4).max(1),
        ],
    };
    let scheme = BlockScheme::new(m, t_len, b, e)?;
    let regime = Regime::parse(&a.regime)?;
    let n_axes = cube.spatial_dim() + 1;
    let init = match &a.init {
        Some(s) => parse_theta(s, n_axes)?,
        None => DepParams::new(vec![1.0; n_axes], vec![1.0; n_axes])?,
    };
    let opts = FitOptions {
        restarts: a.restarts,
        seed: a.seed,
        ..Default::default()
    };
    eprintln!(
        "maxstab test-isotropy: in={} b={:?} e={:?} q={:?} beta={} regime={} max_lag={} seed={}",
        a.r#in.display(),
        scheme.b(),
        scheme.e(),
        scheme.q(),
        a.beta,
        regime.as_str(),
        a.max_lag,
        a.seed
    );
    let report = isotropy_test(&cube, &scheme, a.max_lag, regime, a.beta, &init, &opts)?;
    write_report(&report, &a.out)?;
    eprintln!(
        "maxstab test-isotropy: reject_c={} reject_alpha={} overall={} -> {}",
        report.reject_c,
        report.reject_alpha,
        report.reject_overall,
        a.out.display()
    );
    Ok(())
}

// --------------------------------------------------------- check-maxstable

#[derive(Args)]
pub struct CheckArgs {
    /// Input cube CSV (margin gumbel; frechet is log-transformed).
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Group cardinalities, e.g. 2,3,5.
    #[arg(long, default_value = "2,3,5")]
    pub k: String,
    /// Within-block time span.
    #[arg(long, default_value_t = 2)]
    pub b1: usize,
    /// Separation gap between blocks.
    #[arg(long, default_value_t = 1)]
    pub b2: usize,
    /// Subsets per cardinality (default: the admissible maximum).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct MsReport {
    b1: usize,
    b2: usize,
    seed: u64,
    bootstrap_reps: usize,
    all_pass: bool,
    checks: Vec<QqBandReport>,
}

/// Accept a Gumbel cube as is; log-transform a Fréchet cube (exact).
fn ensure_gumbel(cube: ObsCube) -> Result<ObsCube> {
    match cube.margin() {
        Margin::Gumbel => Ok(cube),
        Margin::Frechet => {
            let vals = cube.values().iter().map(|v| v.ln()).collect();
            cube.with_values(Margin::Gumbel, vals)
        }
        Margin::Raw => Err(MaxstabError::MarginMismatch {
            expected: "gumbel",
            found: "raw",
        }),
    }
}

fn cmd_check(a: CheckArgs) -> Result<()> {
    let cube = ensure_gumbel(read_cube(&a.r#in)?)?;
    let ks = parse_usize_list(&a.k, "k")?;
    eprintln!(
        "maxstab check-maxstable: in={} k={:?} b1={} b2={} bootstrap={} seed={}",
        a.r#in.display(),
        ks,
        a.b1,
        a.b2,
        a.bootstrap,
        a.seed
    );
    let mut checks = Vec::with_capacity(ks.len());
    for k in ks {
        let spec = GroupSpec::for_cube(&cube, k, a.b1, a.b2, a.m, a.seed)?;
        let rep = maxstable_check(&cube, &spec, a.bootstrap)?;
        eprintln!(
            "maxstab check-maxstable: k={k} in_band={:.3} pass={}",
            rep.in_band_fraction, rep.pass
        );
        checks.push(rep);
    }
    let report = MsReport {
        b1: a.b1,
        b2: a.b2,
        seed: a.seed,
        bootstrap_reps: a.bootstrap,
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    };
    write_report(&report, &a.out)?;
    eprintln!("maxstab check-maxstable: wrote {}", a.out.display());
    Ok(())
}

// --------------------------------------------------------------------- gof

#[derive(Args)]
pub struct GofArgs {
    /// Input cube CSV (margin gumbel; frechet is log-transformed).
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Fitted parameters c1,..,c{d+1},a1,..,a{d+1}.
    #[arg(long)]
    pub theta: String,
    /// Group locations as 1-based coordinates, e.g. "1,1;2,3;4,4".
    #[arg(long)]
    pub locations: String,
    #[arg(long, default_value_t = 2)]
    pub b1: usize,
    #[arg(long, default_value_t = 1)]
    pub b2: usize,
    /// Simulated ensembles (each of R copies).
    #[arg(long, default_value_t = 100)]
    pub sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report output (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct GofCliReport {
    locations: Vec<Vec<usize>>,
    b1: usize,
    b2: usize,
    seed: u64,
    #[serde(flatten)]
    result: GofReport,
}

fn parse_locations(s: &str, d: usize) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|grp| {
            let v = parse_usize_list(grp, "location")?;
            if v.len() != d {
                return Err(MaxstabError::InvalidInput {
                    reason: format!("location '{grp}' needs {d} coordinates"),
                });
            }
            if v.iter().any(|&c| c == 0) {
                return Err(MaxstabError::InvalidInput {
                    reason: format!("location '{grp}' must be 1-based"),
                });
            }
            Ok(v.iter().map(|&c| c - 1).collect())
        })
        .collect()
}

fn cmd_gof(a: GofArgs) -> Result<()> {
    let cube = ensure_gumbel(read_cube(&a.r#in)?)?;
    let d = cube.spatial_dim();
    let theta = parse_theta(&a.theta, d + 1)?;
    let locations = parse_locations(&a.locations, d)?;
    eprintln!(
        "maxstab gof: in={} locations={:?} b1={} b2={} sims={} seed={} theta={:?}",
        a.r#in.display(),
        locations,
        a.b1,
        a.b2,
        a.sims,
        a.seed,
        theta.to_vec()
    );
    let result = gof_orderstats(&cube, &theta, &locations, a.b1, a.b2, a.sims, a.seed)?;
    eprintln!(
        "maxstab gof: in_band={:.3} pass={}",
        result.in_band_fraction, result.pass
    );
    let report = GofCliReport {
        locations,
        b1: a.b1,
        b2: a.b2,
        seed: a.seed,
        result,
    };
    write_report(&report, &a.out)?;
    eprintln!("maxstab gof: wrote {}", a.out.display());
    Ok(())
}

// -------------------------------------------------------------- predict-cond

#[derive(Args)]
pub struct PredictArgs {
    /// Input cube CSV (margin raw; margins are fitted per location).
    #[arg(long, value_name = "PATH")]
    pub r#in: PathBuf,
    /// Fitted parameters c1,..,c{d+1},a1,..,a{d+1}.
    #[arg(long)]
    pub theta: String,
    /// Reference point s1,..,sd,t (1-based).
    #[arg(long, value_name = "COORDS")]
    pub r#ref: String,
    /// Prediction level z on the observation scale.
    #[arg(long)]
    pub z: f64,
    /// Conditioning level z* at the reference point.
    #[arg(long)]
    pub zstar: f64,
    /// Prediction time (1-based; default: the reference time).
    #[arg(long)]
    pub t_pred: Option<usize>,
    /// Output CSV field: s1,..,sd,prob.
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let cube = read_cube(&a.r#in)?;
    if cube.margin() != Margin::Raw {
        return Err(MaxstabError::MarginMismatch {
            expected: "raw",
            found: cube.margin().as_str(),
        });
    }
    let d = cube.spatial_dim();
    let theta = parse_theta(&a.theta, d + 1)?;
    let ref_coords = parse_usize_list(&a.r#ref, "ref")?;
    if ref_coords.len() != d + 1 || ref_coords.iter().any(|&c| c == 0) {
        return Err(MaxstabError::InvalidInput {
            reason: format!("ref needs {} 1-based coordinates s1,..,sd,t", d + 1),
        });
    }
    let ref_s: Vec<usize> = ref_coords[..d].iter().map(|&c| c - 1).collect();
    let ref_t = ref_coords[d] - 1;
    if ref_s.iter().any(|&c| c >= cube.m()) || ref_t >= cube.t_len() {
        return Err(MaxstabError::InvalidInput {
            reason: "reference point outside the grid".into(),
        });
    }
    let t_pred = match a.t_pred {
        Some(0) => {
            return Err(MaxstabError::InvalidInput {
                reason: "t-pred is 1-based".into(),
            })
        }
        Some(t) => t - 1,
        None => ref_t,
    };
    eprintln!(
        "maxstab predict-cond: in={} ref={:?} z={} zstar={} t_pred={} theta={:?}",
        a.r#in.display(),
        ref_coords,
        a.z,
        a.zstar,
        t_pred + 1,
        theta.to_vec()
    );

    // Per-location Gumbel fits from the raw cube.
    let (_, fits) = fit_margins(&cube, Margin::Gumbel)?;
    let ref_fit = fits[cube.loc_index(&ref_s)].params;
    let spec = CondFieldSpec {
        ref_space: ref_s.iter().map(|&c| c as f64).collect(),
        ref_time: ref_t as f64,
        ref_fit,
        z_ref: a.zstar,
        z_pred: a.z,
    };
    // Prediction points: every grid location at t_pred.
    let m = cube.m();
    let n_loc = cube.n_locations();
    let mut space = Vec::with_capacity(n_loc);
    let mut loc_fits = Vec::with_capacity(n_loc);
    for loc in 0..n_loc {
        let mut rem = loc;
        let mut coords = vec![0.0; d];
        for j in (0..d).rev() {
            coords[j] = (rem % m) as f64;
            rem /= m;
        }
        space.push(coords);
        loc_fits.push(fits[loc].params);
    }
    let pts = PointSet::new(d, space.clone(), vec![t_pred as f64; n_loc])?;
    let probs = cond_prob_field(&spec, &theta, &pts, &loc_fits)?;

    // Emit s1,..,sd (1-based), prob.
    let mut headers: Vec<String> = (1..=d).map(|j| format!("s{j}")).collect();
    headers.push("prob".into());
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n_loc); d + 1];
    for (coords, p) in space.iter().zip(&probs) {
        for j in 0..d {
            columns[j].push(coords[j] + 1.0);
        }
        columns[d].push(*p);
    }
    let col_refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    write_table(&a.out, &header_refs, &col_refs)?;
    eprintln!("maxstab predict-cond: wrote {}", a.out.display());
    Ok(())
}
