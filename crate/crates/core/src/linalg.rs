//! Small dense linear-algebra helpers over plain `Vec<f64>`.
//!
//! Everything here is desk scale (dimension at most a few hundred), so the
//! implementations favor clarity and a fixed, reproducible operation order
//! over speed.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    sq_norm(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest eigenvalue of the Gram matrix `AᵀA / n` for a row-major `n × p`
/// feature matrix, by power iteration on the explicitly formed `p × p` Gram.
pub fn gram_max_eigenvalue(features: &[f64], n: usize, p: usize) -> Result<f64> {
    if n == 0 || p == 0 || features.len() != n * p {
        return Err(Error::InvalidInput(
            "gram_max_eigenvalue: empty or mis-shaped matrix".into(),
        ));
    }
    let mut gram = vec![0.0; p * p];
    for row in features.chunks_exact(p) {
        for i in 0..p {
            let fi = row[i];
            if fi == 0.0 {
                continue;
            }
            for j in 0..p {
                gram[i * p + j] += fi * row[j];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for g in gram.iter_mut() {
        *g *= inv_n;
    }

    // Deterministic start; the slight asymmetry avoids starting orthogonal to
    // the leading eigenvector of structured matrices.
    let mut v: Vec<f64> = (0..p).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }

    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let mut w = vec![0.0; p];
        for i in 0..p {
            w[i] = dot(&gram[i * p..(i + 1) * p], &v);
        }
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        for x in w.iter_mut() {
            *x /= wn;
        }
        let next = {
            let mut gv = vec![0.0; p];
            for i in 0..p {
                gv[i] = dot(&gram[i * p..(i + 1) * p], &w);
            }
            dot(&w, &gv)
        };
        let done = (next - lambda).abs() <= 1e-13 * next.abs().max(1.0);
        lambda = next;
        v = w;
        if done {
            return Ok(lambda);
        }
    }
    // Slow spectral-gap cases still give many converged digits; report the
    // Rayleigh quotient reached.
    Ok(lambda)
}

/// Solve the SPD system `m x = rhs` in place via Cholesky. `m` is row-major
/// `p × p` and is overwritten with its factor.
pub fn cholesky_solve(m: &mut [f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let p = rhs.len();
    if m.len() != p * p {
        return Err(Error::DimensionMismatch {
            expected: p * p,
            got: m.len(),
        });
    }
    for j in 0..p {
        let mut d = m[j * p + j];
        for k in 0..j {
            d -= m[j * p + k] * m[j * p + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NoConvergence(
                "cholesky: matrix not positive definite".into(),
            ));
        }
        let d = d.sqrt();
        m[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = m[i * p + j];
            for k in 0..j {
                s -= m[i * p + k] * m[j * p + k];
            }
            m[i * p + j] = s / d;
        }
    }
    // forward substitution L y = rhs
    let mut y = rhs.to_vec();
    for i in 0..p {
        for k in 0..i {
            y[i] -= m[i * p + k] * y[k];
        }
        y[i] /= m[i * p + i];
    }
    // back substitution Lᵀ x = y
    for i in (0..p).rev() {
        for k in (i + 1)..p {
            y[i] -= m[k * p + i] * y[k];
        }
        y[i] /= m[i * p + i];
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_eigenvalue_hand_case() {
        // A = [[2, 0], [0, 1]], n = 2: AᵀA/2 = diag(2, 0.5), λmax = 2.
        let features = vec![2.0, 0.0, 0.0, 1.0];
        let lambda = gram_max_eigenvalue(&features, 2, 2).unwrap();
        assert!((lambda - 2.0).abs() < 1e-10, "lambda = {lambda}");
    }

    #[test]
    fn cholesky_solves_known_system() {
        // m = [[4, 2], [2, 3]], rhs = [8, 7] → x = [1.25, 1.5]
        let mut m = vec![4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&mut m, &[8.0, 7.0]).unwrap();
        assert!((x[0] - 1.25).abs() < 1e-12);
        assert!((x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_solve(&mut m, &[1.0, 1.0]).is_err());
    }

    /// Cyclic Jacobi eigensolver for small symmetric matrices; test-only
    /// oracle, independent of the power-iteration path.
    fn jacobi_max_eigenvalue(mut m: Vec<f64>, p: usize) -> f64 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    off += m[i * p + j] * m[i * p + j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    let a_ij = m[i * p + j];
                    if a_ij.abs() < 1e-300 {
                        continue;
                    }
                    let a_ii = m[i * p + i];
                    let a_jj = m[j * p + j];
                    let theta = 0.5 * (a_jj - a_ii) / a_ij;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..p {
                        let mik = m[i * p + k];
                        let mjk = m[j * p + k];
                        m[i * p + k] = c * mik - s * mjk;
                        m[j * p + k] = s * mik + c * mjk;
                    }
                    for k in 0..p {
                        let mki = m[k * p + i];
                        let mkj = m[k * p + j];
                        m[k * p + i] = c * mki - s * mkj;
                        m[k * p + j] = s * mki + c * mkj;
                    }
                }
            }
        }
        (0..p)
            .map(|i| m[i * p + i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn power_iteration_matches_jacobi_on_random_matrix() {
        // 20 × 5 feature matrix from a deterministic stream.
        use crate::rng::{stream, Purpose};
        use rand::Rng;
        let (n, p) = (20, 5);
        let mut r = stream(0xE16, Purpose::Estimation, 0, 0);
        let features: Vec<f64> = (0..n * p)
            .map(|_| r.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let lambda = gram_max_eigenvalue(&features, n, p).unwrap();

        let mut gram = vec![0.0; p * p];
        for row in features.chunks_exact(p) {
            for i in 0..p {
                for j in 0..p {
                    gram[i * p + j] += row[i] * row[j] / n as f64;
                }
            }
        }
        let reference = jacobi_max_eigenvalue(gram, p);
        assert!(
            (lambda - reference).abs() <= 1e-6 * reference.max(1.0),
            "power iteration {lambda} vs jacobi {reference}"
        );
    }
}
