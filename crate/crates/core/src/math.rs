//! Small numeric helpers shared by the representation modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Coefficients of the associated Laguerre polynomial `L_n^{(alpha)}(x)` in powers of `x`.
pub fn laguerre_coefficients(n: usize, alpha: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n + alpha, n - k) / factorial(k)
        })
        .collect()
}

/// Evaluates `L_n^{(alpha)}(x)` by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Binary entropy-style term `-p log2 p` with the `0 log 0 = 0` convention.
pub fn neg_p_log2_p(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Real symmetric matrix `[[A, -B], [B, A]]` representing `H = A + iB`.
///
/// Each eigenvalue of `H` appears twice in the embedding. Working in the real
/// embedding sidesteps the complex tridiagonalization, which loses accuracy on
/// matrices with many exact zeros.
fn real_embedding(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = (m[(i % n, j % n)] + m[(j % n, i % n)].conj()) * 0.5;
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Real symmetric eigen-decomposition with a cyclic Jacobi fallback.
///
/// The implicit QR iteration behind `symmetric_eigen` occasionally returns NaN on
/// sparse block-structured density matrices; Jacobi rotations are slower but
/// unconditionally convergent, so they take over whenever a value is not finite.
fn symmetric_eigen_checked(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|x| x.is_finite()) {
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    jacobi_eigen(a)
}

/// Cyclic Jacobi eigenvalue iteration; columns of the second result are eigenvectors.
pub fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = (f64::EPSILON * a.norm()).powi(2);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Eigenvalues of a Hermitian complex matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut values = symmetric_eigen_checked(real_embedding(m)).0;
    values.sort_by(|a, b| a.total_cmp(b));
    values.into_iter().step_by(2).collect()
}

/// Eigen-decomposition of a Hermitian complex matrix: ascending eigenvalues and
/// orthonormal eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let (eigenvalues, eigenvectors) = symmetric_eigen_checked(real_embedding(m));
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let mut values = Vec::with_capacity(n);
    let mut vectors: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    for &k in &order {
        if vectors.len() == n {
            break;
        }
        let col = eigenvectors.column(k);
        let mut w = DVector::from_fn(n, |i, _| Complex64::new(col[i], col[i + n]));
        for v in &vectors {
            let overlap = v.dotc(&w);
            w -= v * overlap;
        }
        // The partner of an accepted vector is `i` times it and projects to zero.
        let norm = w.norm();
        if norm > 0.5 {
            vectors.push(w.unscale(norm));
            values.push(eigenvalues[k]);
        }
    }
    (values, DMatrix::from_columns(&vectors))
}

/// Evenly spaced grid including both endpoints; a single point yields `start`.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}
