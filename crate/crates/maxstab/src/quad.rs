//! Adaptive Simpson quadrature.
//!
//! Small and self-contained: the crate only needs one-dimensional integrals
//! of smooth, eventually-decaying integrands (tail integrals, density
//! normalization checks). Semi-infinite ranges are mapped to (0, 1) with
//! u = a + t/(1-t).

/// Recursion depth cap; 2^40 subintervals is far beyond any sane target.
const MAX_DEPTH: u32 = 40;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol {
        // Richardson extrapolation of the composite rule.
        left + right + delta / 15.0
    } else {
        adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}

/// Integral of `f` over the finite interval `[a, b]`.
///
/// `tol` is treated as an absolute tolerance on the Simpson refinement; for
/// a relative target, scale by a magnitude estimate as [`integrate_rel`]
/// does.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adapt(&f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Integral over `[a, b]` with a relative tolerance.
///
/// A coarse 16-panel pass estimates the magnitude used to convert the
/// relative target into the absolute tolerance of the adaptive pass.
pub fn integrate_rel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let n = 16;
    let h = (b - a) / n as f64;
    let mut rough = 0.0_f64;
    for i in 0..n {
        let x0 = a + i as f64 * h;
        rough += simpson(f(x0), f(x0 + 0.5 * h), f(x0 + h), h).abs();
    }
    let scale = if rough > f64::MIN_POSITIVE { rough } else { 1.0 };
    integrate(f, a, b, rel_tol * scale)
}

/// Integral of `f` over `[a, inf)` for integrands decaying to zero.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> f64 {
    let g = move |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - t;
        let u = a + t / om;
        let val = f(u);
        if val == 0.0 {
            0.0
        } else {
            val / (om * om)
        }
    };
    integrate_rel(g, 0.0, 1.0, rel_tol)
}
