//! Check whether gridded data are compatible with max-stability. If the
//! field is max-stable with Gumbel margins, the maximum over any group of k
//! points is Gumbel with a location in [0, ln k]; pooling centered group
//! maxima over disjoint time blocks therefore has to look standard Gumbel
//! for every k at once. The check compares the pooled QQ curve against a
//! block-bootstrap band.
//!
//! A Brown-Resnick sample passes; light-tailed noise with the correct-
//! looking values but the wrong shape exits the band.
//!
//! Run with `cargo run --release --example max_stability_check`.

use maxstab::dependence::DepParams;
use maxstab::diagnostics::{maxstable_check, GroupSpec};
use maxstab::grid::{Margin, ObsCube};
use maxstab::rng::stream;
use maxstab::simulate::{simulate_grid_cube, SimConfig, SimMethod};
use rand_distr::{Distribution, StandardNormal};

fn report_line(data: &str, k: usize, cube: &ObsCube) -> Result<(), maxstab::MaxstabError> {
    // Blocks of 2 consecutive steps, separated by 1; subsets drawn at seed 9.
    let spec = GroupSpec::for_cube(cube, k, 2, 1, Some(40), 9)?;
    let rep = maxstable_check(cube, &spec, 400)?;
    let mean_mu = rep.mu_hat.iter().sum::<f64>() / rep.mu_hat.len() as f64;
    println!(
        "{data:<22} k = {k}: mean mu_hat = {:.3} (cap ln k = {:.3}), in-band {:.1}% -> {}",
        mean_mu,
        (k as f64).ln(),
        100.0 * rep.in_band_fraction,
        if rep.pass { "pass" } else { "REJECT" }
    );
    Ok(())
}

fn main() -> Result<(), maxstab::MaxstabError> {
    // Moderate dependence keeps the group locations log V_D away from the
    // boundaries 0 and ln k, where the clamped location MLE is biased and
    // the diagnostic loses its level.
    let params = DepParams::new(vec![0.35, 0.35, 1.2], vec![1.0, 1.0, 0.7])?;
    let (m, t_len) = (4, 450);
    let cfg = SimConfig {
        method: SimMethod::ExactExtremal,
        n_poisson_max: 1000,
        seed: 77,
        replicates: 1,
    };
    let br = simulate_grid_cube(&params, m, t_len, &cfg)?.remove(0);
    // The diagnostic works on the Gumbel scale; log is exact for Frechet.
    let gumbel_vals = br.values().iter().map(|v| v.ln()).collect();
    let br_gumbel = br.with_values(Margin::Gumbel, gumbel_vals)?;

    // Impostor: independent Gaussian noise labeled as Gumbel data.
    let mut rng = stream(123, 0);
    let noise: Vec<f64> = (0..m * m * t_len)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let gauss = ObsCube::new(2, m, t_len, Margin::Gumbel, noise)?;

    println!("group-maxima max-stability check, 400 bootstrap resamples\n");
    for k in [2, 3, 5] {
        report_line("Brown-Resnick", k, &br_gumbel)?;
    }
    println!();
    for k in [2, 3, 5] {
        report_line("Gaussian noise", k, &gauss)?;
    }
    println!("\nlarger k amplifies the shape mismatch: group maxima of light-");
    println!("tailed noise grow too slowly in k, so the pooled curve drifts");
    println!("out of the band even after location centering.");
    Ok(())
}
