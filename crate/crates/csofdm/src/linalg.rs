//! Dense complex linear algebra shared by the estimators.
//!
//! Pseudo-inverses and least-squares solves go through a rank-revealing SVD
//! with a relative singular-value cutoff; directions below the cutoff are
//! dropped rather than amplified. This is what keeps near-duplicate delay
//! atoms from blowing up an estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;

pub struct LsSolution {
    pub coeffs: CVector,
    pub rank: usize,
}

/// Minimum-norm least-squares solution of `a x = y` via SVD.
pub fn lstsq(a: &CMatrix, y: &CVector) -> LsSolution {
    assert_eq!(a.nrows(), y.len(), "lstsq: dimension mismatch");
    if a.ncols() == 0 {
        return LsSolution {
            coeffs: CVector::zeros(0),
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_CUTOFF * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let coeffs = svd
        .solve(y, eps)
        .expect("lstsq: SVD factors were requested");
    LsSolution { coeffs, rank }
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank cutoff.
pub fn pinv(a: &CMatrix) -> CMatrix {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_CUTOFF * smax.max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(eps)
        .expect("pinv: SVD factors were requested")
}

/// Numerical rank at the crate-wide relative cutoff.
pub fn numerical_rank(a: &CMatrix) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let eps = RANK_CUTOFF * smax.max(f64::MIN_POSITIVE);
    svd.singular_values.iter().filter(|&&s| s > eps).count()
}

/// Orthogonal projector onto the column space of `a`, `a a⁺`.
pub fn column_space_projector(a: &CMatrix) -> CMatrix {
    a * pinv(a)
}

/// Largest squared singular value of `a`, by power iteration on `aᴴa`.
///
/// Deterministic start vector; used as a Lipschitz constant for gradient
/// steps, so a couple of per-mille accuracy is plenty.
pub fn spectral_norm_sq(a: &CMatrix) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = CVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut lambda = 0.0f64;
    for _ in 0..100 {
        let w = a.ad_mul(&(a * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm; // ‖aᴴa v‖ with ‖v‖=1 converges to σ_max²
        v = w / Complex64::new(norm, 0.0);
        if (next - lambda).abs() <= 1e-10 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    #[test]
    fn lstsq_solves_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 10, 4);
        let y = CVector::from_fn(10, |_, _| Complex64::new(rng.gen(), rng.gen()));
        let sol = lstsq(&a, &y);
        assert_eq!(sol.rank, 4);
        let grad = a.ad_mul(&(&a * &sol.coeffs - &y));
        assert!(grad.norm() < 1e-10, "normal-equation residual {}", grad.norm());
    }

    #[test]
    fn pinv_of_rank_deficient_matrix_drops_null_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_matrix(&mut rng, 6, 2);
        // rank-2 matrix with 4 columns
        let mix = random_matrix(&mut rng, 2, 4);
        let a = &b * &mix;
        assert_eq!(numerical_rank(&a), 2);
        let p = pinv(&a);
        // a a⁺ a = a for the Moore-Penrose inverse
        let back = &a * &p * &a;
        assert!((back - &a).norm() < 1e-9);
    }

    #[test]
    fn projector_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 8, 3);
        let p = column_space_projector(&a);
        assert!((&p * &p - &p).norm() < 1e-9);
        assert!((p.adjoint() - &p).norm() < 1e-9);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 12, 7);
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let est = spectral_norm_sq(&a);
        assert!((est - smax * smax).abs() < 1e-6 * smax * smax);
    }
}
