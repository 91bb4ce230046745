//! Small complex-matrix helpers shared by the receiver and the
//! interference-rank analysis.

use crate::{C64, Error, Result};
use nalgebra::DMatrix;

/// Projector onto the orthogonal complement of the column space of `basis`:
/// `P = I - B B⁺`, with the pseudoinverse taken through an SVD whose singular
/// values below `rel_cutoff * sigma_max` are treated as zero.
pub fn complement_projector(basis: &DMatrix<C64>, rel_cutoff: f64) -> Result<DMatrix<C64>> {
    let (b, m) = basis.shape();
    if m >= b {
        return Err(Error::InvalidParameter(format!(
            "projector basis has {m} columns for {b} receive dimensions; it would annihilate the receive space"
        )));
    }
    let svd = basis.clone().svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD did not return left singular vectors".into()))?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let mut p = DMatrix::<C64>::identity(b, b);
    if sigma_max <= 0.0 {
        return Ok(p); // zero basis: nothing to project out
    }
    let cutoff = rel_cutoff * sigma_max;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let ui = u.column(i);
            // p -= ui * ui^H
            for r in 0..b {
                for c in 0..b {
                    p[(r, c)] -= ui[r] * ui[c].conj();
                }
            }
        }
    }
    Ok(p)
}

/// Eigenvalues of a Hermitian PSD matrix, clamped at zero and sorted in
/// descending order.
pub fn hermitian_eigvals_desc(a: &DMatrix<C64>) -> Vec<f64> {
    let eig = a.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    vals
}

/// Number of singular values of `a` above `rel_cutoff * sigma_max`.
pub fn numerical_rank(a: &DMatrix<C64>, rel_cutoff: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max <= 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&s| s > rel_cutoff * sigma_max)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn random_matrix(b: usize, m: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = seeds::rng(seed, &[]);
        DMatrix::from_fn(b, m, |_, _| seeds::standard_cn(&mut rng))
    }

    #[test]
    fn projector_annihilates_basis() {
        for seed in 0..5 {
            let j = random_matrix(6, 3, seed);
            let p = complement_projector(&j, 1e-10).unwrap();
            assert!((&p * &j).norm() < 1e-12);
            // idempotent and Hermitian
            assert!((&p * &p - &p).norm() < 1e-12);
            assert!((p.adjoint() - &p).norm() < 1e-12);
        }
    }

    #[test]
    fn projector_rejects_full_column_count() {
        let j = random_matrix(4, 4, 0);
        assert!(complement_projector(&j, 1e-10).is_err());
    }

    #[test]
    fn zero_basis_gives_identity() {
        let j = DMatrix::<C64>::zeros(5, 2);
        let p = complement_projector(&j, 1e-10).unwrap();
        assert!((p - DMatrix::<C64>::identity(5, 5)).norm() < 1e-15);
    }

    #[test]
    fn rank_counts_match() {
        let j = random_matrix(8, 3, 11);
        assert_eq!(numerical_rank(&j, 1e-10), 3);
        let p = complement_projector(&j, 1e-10).unwrap();
        assert_eq!(numerical_rank(&p, 1e-10), 5);
    }
}
