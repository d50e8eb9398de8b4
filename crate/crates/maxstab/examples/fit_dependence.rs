//! Fit the dependence parameters of a Brown-Resnick field by maximum
//! pairwise likelihood, starting from a tail-dependence moment match.
//! Shows both the joint fit over a space-time design mask and the cheaper
//! separated per-axis fit.
//!
//! Run with `cargo run --release --example fit_dependence`.

use maxstab::dependence::DepParams;
use maxstab::pairwise::{chi_moment_init, fit_pmle, separated_fit, DesignMask, FitOptions};
use maxstab::simulate::{simulate_grid_cube, SimConfig, SimMethod};

fn print_theta(label: &str, p: &DepParams) {
    let c: Vec<String> = p.c().iter().map(|v| format!("{v:.3}")).collect();
    let a: Vec<String> = p.alpha().iter().map(|v| format!("{v:.3}")).collect();
    println!("{label:<12} C = [{}]  alpha = [{}]", c.join(", "), a.join(", "));
}

fn main() -> Result<(), maxstab::MaxstabError> {
    let truth = DepParams::new(vec![0.6, 0.75, 4.8], vec![0.95, 0.95, 0.2])?;
    let (m, t_len) = (10, 300);
    let cfg = SimConfig {
        method: SimMethod::ExactExtremal,
        n_poisson_max: 1000,
        seed: 42,
        replicates: 1,
    };
    let cube = simulate_grid_cube(&truth, m, t_len, &cfg)?.remove(0);
    println!("one {m} x {m} x {t_len} cube, standard Frechet margins");
    print_theta("truth", &truth);

    // Data-driven starting point from the empirical tail dependence at unit
    // lags; crude but inside the feasible region.
    let init = chi_moment_init(&cube, 0.95)?;
    print_theta("chi init", &init);

    let opts = FitOptions::default();

    // Joint fit: all pairs with spatial lags up to 2 on each axis at zero
    // time lag, plus time lags up to 2 at zero spatial lag.
    let mask = DesignMask::new(vec![2, 2], 2)?;
    let fit = fit_pmle(&cube, &mask, &init, &opts)?;
    print_theta("joint fit", &fit.theta_hat);
    println!(
        "  {} pairs, converged = {}, {} iterations, |grad| = {:.2e}",
        fit.n_pairs, fit.converged, fit.n_iter, fit.grad_norm
    );

    // Separated fit: one small 1-lag-axis problem per coordinate axis. This
    // is the building block the isotropy test refits on every subsample.
    let sep = separated_fit(&cube, &[2, 2, 2], &init, &opts)?;
    print_theta("separated", &sep.theta_hat);
    for axis_fit in &sep.axis_fits {
        println!(
            "  axis {}: {} pairs, converged = {}",
            axis_fit.axis, axis_fit.fit.n_pairs, axis_fit.fit.converged
        );
    }

    // Relative errors of the joint fit.
    let t = truth.to_vec();
    let h = fit.theta_hat.to_vec();
    let rel: Vec<String> = t
        .iter()
        .zip(&h)
        .map(|(a, b)| format!("{:+.1}%", 100.0 * (b - a) / a))
        .collect();
    println!("joint fit relative errors: [{}]", rel.join(", "));
    println!("(the temporal scale C3 is weakly identified at alpha3 = 0.2;");
    println!(" its error shrinks like 1/sqrt(T) but stays the noisiest)");
    Ok(())
}
