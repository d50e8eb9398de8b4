//! Unconstrained smooth minimization: BFGS with backtracking line search.
//!
//! The pairwise-likelihood surface is smooth in the transformed
//! coordinates but can have long curved valleys; after repeated
//! line-search failures the minimizer switches to a short derivative-free
//! Nelder-Mead cleanup around the best point and then retries BFGS from
//! there. Callers supply a combined value-and-gradient closure.

use crate::error::MaxstabError;
use crate::Result;

pub struct OptimOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Record `(objective, grad_norm)` per accepted iteration.
    pub keep_trace: bool,
    /// Cap on the infinity norm of a single accepted step. Surfaces with a
    /// flat far-field plateau (likelihoods approaching an independence
    /// limit) can otherwise be jumped onto in one stride, stranding the
    /// iterate where the gradient vanishes.
    pub max_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 500,
            keep_trace: false,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub trace: Vec<(f64, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f` starting from `x0`. `f` returns the value and writes the
/// gradient into its second argument; it may return an error for
/// off-domain points, which the line search treats as a rejected step.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut val = f(&x, &mut g)?;
    if !val.is_finite() {
        return Err(MaxstabError::NoConvergence {
            reason: "objective not finite at the starting point".into(),
        });
    }
    // Inverse Hessian approximation, dense row-major, starts at identity.
    let mut h = vec![0.0; n * n];
    let reset_h = |h: &mut [f64]| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset_h(&mut h);

    let mut trace = Vec::new();
    let mut ls_failures = 0usize;
    let mut n_iter = 0usize;
    let mut g_new = vec![0.0; n];

    while n_iter < opts.max_iter {
        let gnorm = norm(&g);
        if opts.keep_trace {
            trace.push((val, gnorm));
        }
        if gnorm < opts.grad_tol {
            return Ok(OptimResult {
                x,
                value: val,
                grad_norm: gnorm,
                n_iter,
                converged: true,
                trace,
            });
        }
        n_iter += 1;

        // Direction p = -H g.
        let mut p = vec![0.0; n];
        for i in 0..n {
            p[i] = -dot(&h[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            // H lost positive definiteness; restart from steepest descent.
            reset_h(&mut h);
            for i in 0..n {
                p[i] = -g[i];
            }
            slope = -dot(&g, &g);
        }

        // Armijo backtracking, first trial clipped to the step cap.
        let mut step = 1.0_f64;
        let p_inf = p.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if p_inf * step > opts.max_step {
            step = opts.max_step / p_inf;
        }
        let c1 = 1e-4;
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            match f(&xt, &mut g_new) {
                Ok(vt) if vt.is_finite() && vt <= val + c1 * step * slope => {
                    accepted = Some((xt, vt));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        match accepted {
            Some((xt, vt)) => {
                ls_failures = 0;
                // BFGS update with s = xt - x, y = g_new - g.
                let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&s) * norm(&y) {
                    let rho = 1.0 / sy;
                    // H <- (I - rho s y') H (I - rho y s') + rho s s'
                    let mut hy = vec![0.0; n];
                    for i in 0..n {
                        hy[i] = dot(&h[i * n..(i + 1) * n], &y);
                    }
                    let yhy = dot(&y, &hy);
                    for i in 0..n {
                        for j in 0..n {
                            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                                + rho * rho * yhy * s[i] * s[j]
                                + rho * s[i] * s[j];
                        }
                    }
                }
                x = xt;
                val = vt;
                std::mem::swap(&mut g, &mut g_new);
            }
            None => {
                ls_failures += 1;
                reset_h(&mut h);
                if ls_failures >= 2 {
                    // Derivative-free cleanup, then resume BFGS here.
                    let (nx, nv) = nelder_mead(&mut f, &x, val, 100 * n)?;
                    if nv < val - 1e-12 * val.abs().max(1.0) {
                        x = nx;
                        val = f(&x, &mut g)?;
                        ls_failures = 0;
                    } else {
                        // No progress in any direction: report as converged
                        // to the tolerance we actually achieved.
                        let gnorm = norm(&g);
                        return Ok(OptimResult {
                            x,
                            value: val,
                            grad_norm: gnorm,
                            n_iter,
                            converged: gnorm < 1e3 * opts.grad_tol,
                            trace,
                        });
                    }
                }
            }
        }
    }
    let gnorm = norm(&g);
    Ok(OptimResult {
        x,
        value: val,
        grad_norm: gnorm,
        n_iter,
        converged: false,
        trace,
    })
}

/// Plain Nelder-Mead on the value only; gradient output is scratch.
fn nelder_mead<F>(f: &mut F, x0: &[f64], v0: f64, max_eval: usize) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut scratch = vec![0.0; n];
    let mut eval = |x: &[f64], f: &mut F| -> f64 {
        match f(x, &mut scratch) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    };
    // Simplex: x0 plus unit-ish perturbations.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut xi = x0.to_vec();
        let h = if xi[i].abs() > 1e-8 { 0.05 * xi[i].abs() } else { 0.05 };
        xi[i] += h;
        let vi = eval(&xi, f);
        simplex.push((xi, vi));
    }
    let mut evals = n + 1;
    let (alpha, gamma, rho_c, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < max_eval {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if !best.is_finite() {
            break;
        }
        if (worst - best).abs() <= 1e-12 * best.abs().max(1.0) {
            break;
        }
        // Centroid of all but worst.
        let mut cen = vec![0.0; n];
        for (xs, _) in &simplex[..n] {
            for (c, xv) in cen.iter_mut().zip(xs) {
                *c += xv / n as f64;
            }
        }
        let worst_x = simplex[n].0.clone();
        let reflect: Vec<f64> = cen
            .iter()
            .zip(&worst_x)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let vr = eval(&reflect, f);
        evals += 1;
        if vr < simplex[0].1 {
            let expand: Vec<f64> = cen
                .iter()
                .zip(&worst_x)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let ve = eval(&expand, f);
            evals += 1;
            simplex[n] = if ve < vr { (expand, ve) } else { (reflect, vr) };
        } else if vr < simplex[n - 1].1 {
            simplex[n] = (reflect, vr);
        } else {
            let contract: Vec<f64> = cen
                .iter()
                .zip(&worst_x)
                .map(|(c, w)| c + rho_c * (w - c))
                .collect();
            let vc = eval(&contract, f);
            evals += 1;
            if vc < simplex[n].1 {
                simplex[n] = (contract, vc);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xi, bi) in entry.0.iter_mut().zip(&best_x) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    entry.1 = eval(&entry.0, f);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x, v) = simplex.swap_remove(0);
    Ok((x, v))
}
