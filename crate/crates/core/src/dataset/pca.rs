use serde::Serialize;

use crate::error::{Error, Result};

const MAX_ITERS: usize = 50_000;

/// Top-3 principal components of a set of vectors.
#[derive(Debug, Clone, Serialize)]
pub struct Pca3 {
    pub mean: Vec<f64>,
    /// Orthonormal principal axes, strongest first.
    pub axes: [Vec<f64>; 3],
    /// Covariance eigenvalues (sample covariance, `n - 1` denominator).
    pub eigenvalues: [f64; 3],
    pub explained_variance_ratio: [f64; 3],
    pub total_variance: f64,
    /// Each input projected onto the three axes.
    pub projected: Vec<[f64; 3]>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of Gram-Schmidt keep round-off orthogonality near 1e-16.
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
}

fn mat_vec(cov: &[f64], dim: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&cov[i * dim..(i + 1) * dim], v);
    }
}

/// Any unit vector orthogonal to `basis`, for directions with no variance.
fn fallback_direction(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        orthogonalize(&mut e, basis);
        if normalize(&mut e) > 1e-6 {
            return e;
        }
    }
    unreachable!("dim >= 3 always leaves an orthogonal direction")
}

/// Power iteration with deflation (each new axis is kept orthogonal to the
/// previous ones) on the sample covariance.
pub fn pca3(rows: &[Vec<f64>]) -> Result<Pca3> {
    if rows.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 4 samples, got {}",
            rows.len()
        )));
    }
    let dim = rows[0].len();
    if dim < 3 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("PCA rows must share a dimension >= 3".into()));
    }
    let n = rows.len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for r in rows {
        centered
            .iter_mut()
            .zip(r)
            .zip(&mean)
            .for_each(|((c, x), m)| *c = x - m);
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * dim..(i + 1) * dim];
            row.iter_mut().zip(&centered).for_each(|(v, cj)| *v += ci * cj);
        }
    }
    cov.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    let total_variance: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(3);
    let mut eigenvalues = [0.0; 3];
    let mut next = vec![0.0; dim];
    for (k, slot) in eigenvalues.iter_mut().enumerate() {
        let mut v: Vec<f64> = (0..dim)
            .map(|i| 1.0 + ((i * 7 + k * 13) % 5) as f64 * 0.1)
            .collect();
        orthogonalize(&mut v, &axes);
        normalize(&mut v);
        let mut found = false;
        for _ in 0..MAX_ITERS {
            mat_vec(&cov, dim, &v, &mut next);
            orthogonalize(&mut next, &axes);
            let norm = normalize(&mut next);
            if norm <= total_variance * 1e-13 || norm == 0.0 {
                break;
            }
            found = true;
            let change = 1.0 - dot(&v, &next).abs();
            std::mem::swap(&mut v, &mut next);
            if change < 1e-15 {
                break;
            }
        }
        *slot = if found {
            // Rayleigh quotient of the converged vector.
            mat_vec(&cov, dim, &v, &mut next);
            dot(&v, &next).max(0.0)
        } else {
            v = fallback_direction(dim, &axes);
            0.0
        };
        axes.push(v);
    }

    let ratio = |l: f64| {
        if total_variance > 0.0 {
            l / total_variance
        } else {
            0.0
        }
    };
    let projected = rows
        .iter()
        .map(|r| {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            [dot(&c, &axes[0]), dot(&c, &axes[1]), dot(&c, &axes[2])]
        })
        .collect();
    let [a0, a1, a2]: [Vec<f64>; 3] = axes.try_into().expect("three axes");
    Ok(Pca3 {
        mean,
        axes: [a0, a1, a2],
        eigenvalues,
        explained_variance_ratio: eigenvalues.map(ratio),
        total_variance,
        projected,
    })
}
