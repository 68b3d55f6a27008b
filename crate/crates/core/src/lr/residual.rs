//! Best entry-wise product fit of a family of embedded cross vectors.
//!
//! Given `C` with `D` rows and `m * n` columns (column `i * n + k` holds
//! `c_ik`), find `A` (D x m) and `B` (D x n) minimizing
//! `sum_ik |a_i o b_k - c_ik|^2`. The objective splits over rows: row `d` is a
//! rank-one fit `A[d,:]^T B[d,:]` of the m x n matrix `M_d[i,k] = C[d, i*n+k]`,
//! solved here by alternating least squares with random restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 5_000;
const REL_TOL: f64 = 1e-15;

/// Minimum over `restarts` of the ALS residual divided by `|C|^2`.
///
/// `c` is row-major with `d_rows` rows of `m * n` entries. A zero matrix has
/// residual 0.
pub fn cin_residual(c: &[f64], d_rows: usize, m: usize, n: usize, restarts: usize, seed: u64) -> Result<f64> {
    if d_rows == 0 || m == 0 || n == 0 || restarts == 0 {
        return Err(Error::InvalidArgument(format!(
            "need D, m, n, restarts >= 1 (got {d_rows}, {m}, {n}, {restarts})"
        )));
    }
    if c.len() != d_rows * m * n {
        return Err(Error::InvalidArgument(format!(
            "C has {} entries, expected {}",
            c.len(),
            d_rows * m * n
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let total: f64 = c.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let residual: f64 = c
            .chunks_exact(m * n)
            .map(|row| rank_one_residual(row, m, n, &mut rng))
            .sum();
        best = best.min(residual.max(0.0) / total);
    }
    Ok(best)
}

/// ALS on one m x n block; returns the squared Frobenius residual.
fn rank_one_residual(mat: &[f64], m: usize, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut a: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm_sq: f64 = mat.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return 0.0;
    }
    let mut prev = f64::INFINITY;
    let mut res = norm_sq;
    for _ in 0..MAX_SWEEPS {
        // b <- M^T a / |a|^2
        let aa: f64 = a.iter().map(|v| v * v).sum();
        if aa == 0.0 {
            break;
        }
        for (k, bk) in b.iter_mut().enumerate() {
            *bk = (0..m).map(|i| mat[i * n + k] * a[i]).sum::<f64>() / aa;
        }
        // a <- M b / |b|^2
        let bb: f64 = b.iter().map(|v| v * v).sum();
        if bb == 0.0 {
            break;
        }
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = (0..n).map(|k| mat[i * n + k] * b[k]).sum::<f64>() / bb;
        }
        res = frob_residual(mat, &a, &b, n);
        if (prev - res).abs() <= REL_TOL * norm_sq {
            break;
        }
        prev = res;
    }
    res
}

fn frob_residual(mat: &[f64], a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (k, bk) in b.iter().enumerate() {
            let e = ai * bk - mat[i * n + k];
            s += e * e;
        }
    }
    s
}
