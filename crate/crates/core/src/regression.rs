//! Scalar-regressor equation `𝒴 = Ω·θ` built from the DREM output `z`.
//!
//! On a segment the filters see only, `zᵀ = Δ·[A, B, Bϑᵀ, x(t̂)]`, so the
//! column blocks of `zᵀ` give `z_A = ΔA`, `z_B = ΔB`, `z_Bϑ = ΔBϑᵀ`. With
//! `M = adj(z_Bᵀz_B)·z_Bᵀ` we have `M·z_B = Ω·I` and the matching conditions
//! turn into
//!
//! ```text
//!   M(Δ A_ref - z_A) = Ω Kˣ,   M Δ B_ref = Ω Kʳ,   M z_Bϑ = Ω ϑᵀ.
//! ```
//!
//! `Ω` is evaluated by Cauchy–Binet as a sum of squared `m×m` minors of
//! `z_B`, so it is never negative. Expanding the Gram determinant directly
//! can round below zero when `z_B` is close to rank deficient.

use crate::dynamics::Dims;
use crate::matrix::{MatError, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ZBlocks {
    /// `n×n`
    pub z_a: Matrix,
    /// `n×m`
    pub z_b: Matrix,
    /// `n×p`
    pub z_bt: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regression {
    /// `𝒴`, `(n+m+p)×m`.
    pub y: Matrix,
    /// `Ω = det(z_Bᵀz_B)`.
    pub omega: f64,
}

/// `det(zᵀz)` for an `n×m` matrix `z` with `m ≤ n`, as the sum of the
/// squared determinants of its `m×m` row submatrices. Zero when `m > n`.
pub fn gram_det(z: &Matrix) -> f64 {
    let (n, m) = (z.rows(), z.cols());
    if m > n {
        return 0.0;
    }
    if m == 0 {
        return 1.0;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut sub = Matrix::zeros(m, m);
    let mut total = 0.0;
    loop {
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..m {
                sub[(r, c)] = z[(i, c)];
            }
        }
        let d = sub.det().expect("square submatrix");
        total += d * d;
        // next m-combination of 0..n in lexicographic order
        let Some(k) = (0..m).rev().find(|&k| idx[k] < n - m + k) else {
            return total;
        };
        idx[k] += 1;
        for j in k + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Column-block slicing of `zᵀ`. The last row of `z` (the initial-condition
/// channel) is never selected.
pub fn slice_z(z: &Matrix, dims: Dims) -> Result<ZBlocks, MatError> {
    let Dims { n, m, p } = dims;
    if z.rows() != dims.extended_len() || z.cols() != n {
        return Err(MatError::Dimension {
            op: "slice_z",
            detail: format!(
                "z must be {}x{n}, got {}x{}",
                dims.extended_len(),
                z.rows(),
                z.cols()
            ),
        });
    }
    Ok(ZBlocks {
        z_a: z.block(0, 0, n, n).transpose(),
        z_b: z.block(n, 0, m, n).transpose(),
        z_bt: z.block(n + m, 0, p, n).transpose(),
    })
}

pub fn build_regression(
    blocks: &ZBlocks,
    delta: f64,
    a_ref: &Matrix,
    b_ref: &Matrix,
) -> Result<Regression, MatError> {
    let ZBlocks { z_a, z_b, z_bt } = blocks;
    let z_bt_t = z_b.transpose();
    let gram = &z_bt_t * z_b;
    let adj = gram.adjugate()?;
    let omega = gram_det(z_b);
    let mm = adj.try_mul(&z_bt_t)?;
    let kx = mm.try_mul(&(&a_ref.scale(delta) - z_a))?;
    let kr = mm.try_mul(&b_ref.scale(delta))?;
    let vt = mm.try_mul(z_bt)?;
    let y = Matrix::vstack(&[&kx.transpose(), &kr.transpose(), &vt.transpose()])?;
    Ok(Regression { y, omega })
}
