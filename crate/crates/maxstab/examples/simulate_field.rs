//! Simulate an anisotropic Brown-Resnick field on a regular grid and check
//! the sample against two analytic fingerprints: the single-point Frechet
//! margin and the pairwise extremal coefficient `2 * Phi(sqrt(delta / 2))`.
//!
//! Run with `cargo run --release --example simulate_field`.

use maxstab::dependence::{chi, DepParams, SpaceTimeLag};
use maxstab::io::write_cube;
use maxstab::simulate::{simulate_grid_cube, SimConfig, SimMethod};

fn main() -> Result<(), maxstab::MaxstabError> {
    // Strong east-west dependence, weaker north-south, slow temporal decay.
    let params = DepParams::new(vec![0.4, 1.1, 3.0], vec![1.2, 0.8, 0.4])?;
    let (m, t_len) = (8, 150);

    let cfg = SimConfig {
        method: SimMethod::ExactExtremal,
        n_poisson_max: 1000,
        seed: 2024,
        replicates: 60,
    };
    let cubes = simulate_grid_cube(&params, m, t_len, &cfg)?;
    println!(
        "simulated {} replicates of an {m} x {m} x {t_len} cube (exact sampler)",
        cubes.len()
    );

    // Margin check: P(eta <= 1) = exp(-1) for a standard Frechet margin.
    let mut below = 0usize;
    let mut total = 0usize;
    for cube in &cubes {
        for &v in cube.values() {
            total += 1;
            if v <= 1.0 {
                below += 1;
            }
        }
    }
    println!(
        "P(eta <= 1): empirical {:.4}, theory {:.4}",
        below as f64 / total as f64,
        (-1.0f64).exp()
    );

    // Extremal coefficient along each spatial axis: theta(h) = 2 - chi(h).
    // The empirical version uses P(max over the pair <= 1) = exp(-theta).
    for (axis, name) in [(0usize, "axis 1"), (1usize, "axis 2")] {
        let mut h = vec![0.0, 0.0];
        h[axis] = 1.0;
        let lag = SpaceTimeLag::new(h, 0.0)?;
        let theory = 2.0 - chi(&params, &lag)?;

        let mut joint_below = 0usize;
        let mut pairs = 0usize;
        for cube in &cubes {
            for t in 0..t_len {
                for i in 0..m {
                    for j in 0..m + 1 - 2 {
                        let (a, b) = match axis {
                            0 => ([j, i], [j + 1, i]),
                            _ => ([i, j], [i, j + 1]),
                        };
                        pairs += 1;
                        if cube.value(&a, t).max(cube.value(&b, t)) <= 1.0 {
                            joint_below += 1;
                        }
                    }
                }
            }
        }
        let emp = -(joint_below as f64 / pairs as f64).ln();
        println!("extremal coefficient, {name}, lag 1: empirical {emp:.3}, theory {theory:.3}");
    }

    // Persist one replicate in the cube CSV format used by the CLI.
    let out = std::env::temp_dir().join("maxstab_example_cube.csv");
    write_cube(&cubes[0], &out)?;
    println!("wrote first replicate to {}", out.display());
    Ok(())
}
