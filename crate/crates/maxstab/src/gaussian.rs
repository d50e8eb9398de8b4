//! Covariance assembly and sampling for the Gaussian increment process.
//!
//! The process `W` behind the max-stable construction has stationary
//! increments, `W(0) = 0` and `Var W(p) = 2 delta(p)`, hence
//!
//! ```text
//!     Cov[W(p1), W(p2)] = delta(p1) + delta(p2) - delta(p1 - p2).
//! ```
//!
//! Matrices built this way are positive semidefinite but often singular in
//! exact arithmetic (any point at the origin has variance zero), so the
//! factorization below is a Cholesky variant that tolerates zero pivots:
//! a pivot within tolerance of zero zeroes its column, which is valid
//! precisely when the remaining column entries vanish too. If rounding
//! pushes the matrix slightly indefinite, a diagonal jitter escalates
//! through 1e-12, 1e-10, 1e-8 times the largest diagonal entry before the
//! factorization is declared failed.

use crate::dependence::{delta, DepParams};
use crate::error::MaxstabError;
use crate::grid::PointSet;
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative jitter ladder applied to the diagonal on factorization failure.
pub const JITTER_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];

/// Symmetric covariance matrix with its lower Cholesky-type factor.
#[derive(Clone, Debug)]
pub struct CovMatrix {
    n: usize,
    mat: Vec<f64>,
    chol: Vec<f64>,
    jitter: f64,
}

impl CovMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)` of the covariance.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[i * self.n + j]
    }

    /// Jitter that was needed to factorize (0.0 in the usual case).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower triangular factor entry `(i, j)`, `i >= j`.
    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        self.chol[i * self.n + j]
    }

    /// `L z` for a vector of standard normals: one multivariate normal
    /// draw with this covariance.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        self.apply_factor(&z)
    }

    /// `L z` into a fresh vector.
    pub fn apply_factor(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_factor_into(z, &mut out);
        out
    }

    /// `L z` into a caller buffer (hot path for simulation).
    pub fn apply_factor_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i + 1];
            let mut acc = 0.0;
            for (lik, zk) in row.iter().zip(z[..=i].iter()) {
                acc += lik * zk;
            }
            out[i] = acc;
        }
    }
}

/// Covariance of the increment process at the given points, anchored at
/// the coordinate origin.
pub fn build_cov(params: &DepParams, pts: &PointSet) -> Result<CovMatrix> {
    if params.spatial_dim() != pts.spatial_dim() {
        return Err(MaxstabError::InvalidInput {
            reason: format!(
                "point set dimension {} does not match parameters ({})",
                pts.spatial_dim(),
                params.spatial_dim()
            ),
        });
    }
    let n = pts.len();
    let d0: Vec<f64> = (0..n)
        .map(|i| delta(params, &pts.lag_from_origin(i)))
        .collect::<Result<_>>()?;
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        mat[i * n + i] = 2.0 * d0[i];
        for j in 0..i {
            let dij = delta(params, &pts.lag_between(i, j))?;
            let cov = d0[i] + d0[j] - dij;
            mat[i * n + j] = cov;
            mat[j * n + i] = cov;
        }
    }
    from_matrix(n, mat)
}

/// Factorize an explicit symmetric matrix (row-major, length `n*n`).
pub fn from_matrix(n: usize, mat: Vec<f64>) -> Result<CovMatrix> {
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(mat[i * n + i]));
    let mut jitters = vec![0.0];
    jitters.extend(JITTER_LADDER.iter().map(|j| j * max_diag.max(1.0)));
    for &jit in &jitters {
        if let Some(chol) = psd_cholesky(&mat, n, jit, max_diag) {
            return Ok(CovMatrix {
                n,
                mat,
                chol,
                jitter: jit,
            });
        }
    }
    Err(MaxstabError::CovarianceNotPsd {
        max_jitter: JITTER_LADDER[2] * max_diag.max(1.0),
    })
}

/// Cholesky for positive semidefinite matrices.
///
/// Pivots below `tol` are treated as exact zeros; their columns must then
/// be zero up to `tol` as well, otherwise the matrix is not PSD and the
/// attempt fails (returns None so the caller can escalate jitter).
fn psd_cholesky(mat: &[f64], n: usize, jit: f64, max_diag: f64) -> Option<Vec<f64>> {
    let tol = 1e-12 * max_diag.max(1.0);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = mat[j * n + j] + jit;
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag > tol {
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = mat[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        } else if diag > -tol {
            // Zero pivot: admissible only if the column vanishes too.
            l[j * n + j] = 0.0;
            for i in (j + 1)..n {
                let mut s = mat[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > tol * 10.0 {
                    return None;
                }
                l[i * n + j] = 0.0;
            }
        } else {
            return None;
        }
    }
    Some(l)
}
