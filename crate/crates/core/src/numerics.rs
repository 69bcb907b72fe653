//! Dense symmetric linear algebra shared by the filters and estimators.
//!
//! Factorizations are delegated to `nalgebra`; this module adds the symmetry
//! checks, eigenvalue ordering, conditioning flags and a nonnegative
//! least-squares solver on top.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WsfError};

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Largest `|A_ij - A_ji|` relative to the Frobenius norm.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    let scale = a.norm();
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

fn require_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(WsfError::invalid("matrix is not square"));
    }
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOLERANCE {
        return Err(WsfError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Solution of a shifted symmetric system.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    /// Set when the system was too ill-conditioned for the residual guarantee.
    pub ill_conditioned: bool,
    pub relative_residual: f64,
}

/// Solves `(A + shift·I) x = b` for symmetric positive (semi)definite `A`.
///
/// A Cholesky factorization is tried first. If it breaks down the system is
/// solved through the eigendecomposition with eigenvalues below
/// `1e-15·λ_max` discarded, and the result is flagged ill-conditioned.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, shift: f64) -> Result<SpdSolution> {
    require_symmetric(a)?;
    if b.len() != a.nrows() {
        return Err(WsfError::LengthMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if shift < 0.0 || !shift.is_finite() {
        return Err(WsfError::invalid("shift must be a finite nonnegative number"));
    }
    let mut shifted = a.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += shift;
    }
    let residual_of = |x: &DVector<f64>| {
        let bn = b.norm();
        let r = (&shifted * x - b).norm();
        if bn == 0.0 {
            r
        } else {
            r / bn
        }
    };

    if let Some(chol) = shifted.clone().cholesky() {
        let x = chol.solve(b);
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            lo = lo.min(l[(i, i)]);
            hi = hi.max(l[(i, i)]);
        }
        let cond_estimate = (hi / lo).powi(2);
        let rel = residual_of(&x);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(SpdSolution {
                ill_conditioned: cond_estimate > 1e12 || rel > 1e-8,
                relative_residual: rel,
                x,
            });
        }
    }

    let eig = sym_eig(&shifted)?;
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-15 * top;
    if top == 0.0 || eig.eigenvalues[0] <= floor {
        return Err(WsfError::Singular {
            sigma_min: eig.eigenvalues[eig.eigenvalues.len() - 1],
        });
    }
    let x = eig.apply(b, |s| if s > floor { 1.0 / s } else { 0.0 });
    let rel = residual_of(&x);
    Ok(SpdSolution {
        x,
        ill_conditioned: true,
        relative_residual: rel,
    })
}

/// `A = Q diag(λ) Qᵀ` with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymmetricEigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricEigenDecomposition {
    /// `Q diag(f(λ_i)) Qᵀ v` without forming the matrix.
    pub fn apply(&self, v: &DVector<f64>, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let mut coeffs = self.eigenvectors.tr_mul(v);
        for (c, &s) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(s);
        }
        &self.eigenvectors * coeffs
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * self.eigenvectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymmetricEigenDecomposition> {
    require_symmetric(a)?;
    let eig = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymmetricEigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// 2-norm condition number `λ_max / λ_min` of a symmetric PSD matrix.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(eig.max() / eig.min().max(f64::EPSILON * eig.max()))
}

/// Dominant eigenvalue of a PSD matrix by power iteration.
///
/// Iterates the Rayleigh quotient until its relative change drops below
/// `tol`. The estimate approaches the true value from below.
pub fn largest_eigenvalue(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if !a.is_square() {
        return Err(WsfError::invalid("matrix is not square"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    // a positive start vector, not orthogonal to the Perron vector of kernel matrices
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64) * 0.618).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let w = a * &v;
        let rayleigh = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w / wn;
        if (rayleigh - estimate).abs() <= tol * rayleigh.abs() {
            return Ok(rayleigh);
        }
        estimate = rayleigh;
    }
    Ok(estimate)
}

/// Outcome of a nonnegative least-squares solve.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `x` is then the best iterate.
    pub converged: bool,
}

/// `min ‖Ax − b‖ subject to x ≥ 0` by the Lawson–Hanson active-set method.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    nnls_from(a, b, &DVector::zeros(a.ncols()))
}

/// Lawson–Hanson started from a feasible point `x0 ≥ 0`.
///
/// Every variable positive in `x0` starts in the passive set and each
/// subproblem takes the minimum-distance step from the current iterate, so an
/// underdetermined consistent system keeps a wide support instead of
/// collapsing to a basic solution.
pub fn nnls_from(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    if b.len() != m || x0.len() != n {
        return Err(WsfError::LengthMismatch {
            expected: if b.len() != m { m } else { n },
            got: if b.len() != m { b.len() } else { x0.len() },
        });
    }
    if a.iter().chain(b.iter()).chain(x0.iter()).any(|v| !v.is_finite()) {
        return Err(WsfError::invalid("nnls input has non-finite entries"));
    }
    if x0.iter().any(|&v| v < 0.0) {
        return Err(WsfError::invalid("nnls start point must be nonnegative"));
    }

    let scale = a.norm() * b.norm().max(1.0);
    let grad_tol = 1e-13 * scale.max(1.0);
    let max_iter = 10 * n.max(1) + 10;

    let mut x = x0.clone();
    let mut passive: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // inner loop: reach a feasible minimizer on the current passive set
        loop {
            iterations += 1;
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            if idx.is_empty() {
                break;
            }
            let z = min_distance_step(a, b, &x, &idx);
            let blocking = idx.iter().any(|&j| z[j] <= 0.0);
            if !blocking {
                x = z;
                break;
            }
            let mut alpha: f64 = 1.0;
            for &j in &idx {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            for &j in &idx {
                x[j] += alpha * (z[j] - x[j]);
            }
            for &j in &idx {
                if x[j] <= 1e-300 || (z[j] <= 0.0 && x[j] <= 1e-15 * (1.0 + z[j].abs())) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if iterations >= max_iter {
                break;
            }
        }
        if iterations >= max_iter {
            break;
        }

        let r = b - a * &x;
        let g = a.tr_mul(&r);
        let mut best = None;
        for j in 0..n {
            if !passive[j] && g[j] > grad_tol && best.is_none_or(|(_, gb)| g[j] > gb) {
                best = Some((j, g[j]));
            }
        }
        match best {
            Some((j, _)) => passive[j] = true,
            None => {
                converged = true;
                break;
            }
        }
        // the new variable enters at zero; the inner loop moves it
    }

    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let residual_norm = (a * &x - b).norm();
    Ok(NnlsSolution {
        x,
        residual_norm,
        iterations,
        converged,
    })
}

/// `z = x + pinv(A_P)(b − A x)` restricted to the passive columns `idx`.
fn min_distance_step(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let m = a.nrows();
    let ap = a.select_columns(idx);
    let mut z = x.clone();
    for j in 0..x.len() {
        if !idx.contains(&j) {
            z[j] = 0.0;
        }
    }
    // two passes: the second one refines the first against roundoff
    for _ in 0..2 {
        let r = b - a * &z;
        let delta = if idx.len() <= m {
            // full column rank expected: least squares via normal equations of A_P
            let gram = ap.tr_mul(&ap);
            let rhs = ap.tr_mul(&r);
            pinv_solve(&gram, &rhs)
        } else {
            let gram = &ap * ap.transpose();
            ap.tr_mul(&pinv_solve(&gram, &r))
        };
        for (k, &j) in idx.iter().enumerate() {
            z[j] += delta[k];
        }
    }
    z
}

fn pinv_solve(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = gram.clone().cholesky() {
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            lo = lo.min(l[(i, i)]);
            hi = hi.max(l[(i, i)]);
        }
        if hi / lo < 1e6 {
            return chol.solve(rhs);
        }
    }
    let eig = gram.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-13 * top;
    let mut coeffs = eig.eigenvectors.tr_mul(rhs);
    for (c, &s) in coeffs.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = if s > floor { *c / s } else { 0.0 };
    }
    &eig.eigenvectors * coeffs
}

/// Largest violation of the NNLS optimality conditions at `x`.
pub fn kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let g = a.tr_mul(&(b - a * x));
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        worst = worst.max((-x[j]).max(0.0));
        if x[j] > 0.0 {
            worst = worst.max(g[j].abs());
        } else {
            worst = worst.max(g[j].max(0.0));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let g = random_matrix(n, n, seed);
        &g * g.transpose()
    }

    #[test]
    fn solve_spd_examples() {
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sol = solve_spd(&DMatrix::identity(3, 3), &b, 0.0).unwrap();
        assert_eq!(sol.x, b);
        assert!(!sol.ill_conditioned);

        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let sol = solve_spd(&a, &DVector::from_vec(vec![2.0, 3.0]), 1.0).unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.x[1], 0.75, epsilon = 1e-15);

        let zero = DMatrix::zeros(2, 2);
        assert!(matches!(
            solve_spd(&zero, &DVector::from_vec(vec![1.0, 1.0]), 0.0),
            Err(WsfError::Singular { .. })
        ));

        let mut asym = DMatrix::identity(2, 2);
        asym[(0, 1)] = 0.5;
        assert!(matches!(
            solve_spd(&asym, &DVector::zeros(2), 0.0),
            Err(WsfError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn sym_eig_examples() {
        let eig = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = sym_eig(&d).unwrap();
        assert_eq!(eig.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);

        let g = random_matrix(50, 50, 4);
        let a = (&g + g.transpose()) * 0.5;
        let eig = sym_eig(&a).unwrap();
        assert!((eig.reconstruct() - &a).norm() <= 1e-8 * a.norm());
        let qtq = eig.eigenvectors.tr_mul(&eig.eigenvectors);
        assert!((qtq - DMatrix::identity(50, 50)).abs().max() <= 1e-10);
        assert!(eig.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn largest_eigenvalue_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0]));
        assert_abs_diff_eq!(largest_eigenvalue(&d, 1e-12).unwrap(), 5.0, epsilon = 1e-10);

        let v = DVector::from_vec(vec![1.0, 2.0, -2.0]);
        let rank1 = &v * v.transpose();
        assert_abs_diff_eq!(largest_eigenvalue(&rank1, 1e-12).unwrap(), 9.0, epsilon = 1e-10);

        assert_eq!(largest_eigenvalue(&DMatrix::zeros(4, 4), 1e-8).unwrap(), 0.0);

        let a = random_psd(100, 9);
        let top = sym_eig(&a).unwrap().max();
        let est = largest_eigenvalue(&a, 1e-12).unwrap();
        assert!((est - top).abs() <= 1e-6 * top);
    }

    #[test]
    fn solve_spd_agrees_with_eigen_route() {
        let a = random_psd(30, 2) + DMatrix::identity(30, 30) * 0.1;
        let eig = sym_eig(&a).unwrap();
        assert!(eig.max() / eig.min() < 1e8);
        let b = DVector::from_fn(30, |i, _| (i as f64).sin());
        let via_eig = eig.apply(&b, |s| 1.0 / s);
        let direct = solve_spd(&a, &b, 0.0).unwrap().x;
        assert!((via_eig - &direct).norm() <= 1e-6 * direct.norm());
    }

    #[test]
    fn condition_number_is_scale_invariant() {
        let a = random_psd(20, 5) + DMatrix::identity(20, 20);
        let c1 = condition_number(&a).unwrap();
        let c2 = condition_number(&(&a * 7.5)).unwrap();
        assert!(c1 >= 1.0);
        assert!((c1 - c2).abs() <= 1e-8 * c1);
        assert_eq!(condition_number(&DMatrix::identity(3, 3)).unwrap(), 1.0);
    }

    #[test]
    fn nnls_examples() {
        let sol = nnls(&DMatrix::identity(2, 2), &DVector::from_vec(vec![1.0, -1.0])).unwrap();
        assert_eq!(sol.x.as_slice(), &[1.0, 0.0]);

        let col = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let sol = nnls(&col, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-14);
        assert!(sol.residual_norm < 1e-14);

        let a = random_matrix(50, 20, 17);
        let b = DVector::from_fn(50, |i, _| ((i * 7) as f64).cos());
        let sol = nnls(&a, &b).unwrap();
        assert!(sol.converged);
        assert!(sol.x.iter().all(|&v| v >= 0.0));
        assert!(sol.x.iter().any(|&v| v == 0.0));
        assert!(kkt_violation(&a, &b, &sol.x) <= 1e-10);
    }

    #[test]
    fn warm_start_keeps_support_wide() {
        // consistent underdetermined system: 5 equations, 40 unknowns
        let a = random_matrix(5, 40, 3).abs();
        let target = DVector::from_element(40, 1.0);
        let b = &a * &target;
        let cold = nnls(&a, &b).unwrap();
        let warm = nnls_from(&a, &b, &DVector::from_element(40, 0.9)).unwrap();
        assert!(cold.residual_norm < 1e-10 && warm.residual_norm < 1e-10);
        let support = |x: &DVector<f64>| x.iter().filter(|&&v| v > 0.0).count();
        assert!(support(&cold.x) <= 5);
        assert_eq!(support(&warm.x), 40);
    }
}
