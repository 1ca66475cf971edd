use rand::Rng as _;
use rand_distr::StandardNormal;

use super::matrix::{dot, Matrix};
use super::rng::Rng;
use crate::error::{Error, Result};

/// Glorot (Xavier) uniform: entries i.i.d. on `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`.
///
/// The returned matrix is `fan_out x fan_in`, the orientation used for
/// `W x` products throughout the crate.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Matrix> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::invalid("glorot_uniform needs non-zero fan dimensions"));
    }
    let limit = glorot_limit(fan_in, fan_out);
    Ok(Matrix::from_fn(fan_out, fan_in, |_, _| {
        rng.gen_range(-limit..=limit)
    }))
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Random `n x m` matrix with orthonormal columns (n >= m) or orthonormal
/// rows (n < m).
///
/// A Gaussian matrix is orthonormalized along its longer dimension with
/// twice-iterated modified Gram-Schmidt. The implied triangular factor has a
/// positive diagonal, which is the usual sign correction that makes the
/// factorization unique.
pub fn orthogonal(n: usize, m: usize, rng: &mut Rng) -> Result<Matrix> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("orthogonal needs non-zero dimensions"));
    }
    let (tall, short) = if n >= m { (n, m) } else { (m, n) };
    // Columns of a tall x short Gaussian matrix, stored as vectors.
    let mut cols: Vec<Vec<f64>> = (0..short)
        .map(|_| (0..tall).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for j in 0..short {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj = dot(&done[i], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[i]) {
                    *x -= proj * q;
                }
            }
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if norm < 1e-12 {
            return Err(Error::invalid("degenerate Gaussian draw in orthogonal init"));
        }
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    Ok(if n >= m {
        Matrix::from_fn(n, m, |r, c| cols[c][r])
    } else {
        Matrix::from_fn(n, m, |r, c| cols[r][c])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::seeded;

    fn gram_error(q: &Matrix) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        let mut worst: f64 = 0.0;
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g.get(r, c) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = seeded(1);
        let w = glorot_uniform(3, 3, &mut rng).unwrap();
        assert!(w.max_abs() <= 1.0);
        let w = glorot_uniform(1, 1, &mut rng).unwrap();
        assert!(w.max_abs() <= 3f64.sqrt());
        let w = glorot_uniform(7, 50, &mut rng).unwrap();
        assert_eq!(w.shape(), (50, 7));
        assert!(w.max_abs() <= glorot_limit(7, 50));
    }

    #[test]
    fn glorot_rejects_zero_fan() {
        let mut rng = seeded(1);
        assert!(glorot_uniform(0, 3, &mut rng).is_err());
        assert!(glorot_uniform(3, 0, &mut rng).is_err());
    }

    #[test]
    fn glorot_mean_is_centered() {
        let mut rng = seeded(2);
        // 64x64 per draw; ~10^5 samples over 25 draws.
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..25 {
            let w = glorot_uniform(64, 64, &mut rng).unwrap();
            total += w.as_slice().iter().sum::<f64>();
            count += w.len();
        }
        assert!(count >= 100_000);
        assert!((total / count as f64).abs() < 0.01);
    }

    #[test]
    fn orthogonal_scalar_is_unit() {
        let mut rng = seeded(3);
        let q = orthogonal(1, 1, &mut rng).unwrap();
        assert_eq!(q.get(0, 0).abs(), 1.0);
    }

    #[test]
    fn orthogonal_square_and_tall() {
        let mut rng = seeded(4);
        assert!(gram_error(&orthogonal(4, 4, &mut rng).unwrap()) < 1e-10);
        let q = orthogonal(8, 4, &mut rng).unwrap();
        for c in 0..4 {
            let n = dot(&q.col(c), &q.col(c)).sqrt();
            assert!((n - 1.0).abs() < 1e-10);
        }
        assert!(gram_error(&q) < 1e-10);
        assert!(gram_error(&orthogonal(256, 64, &mut rng).unwrap()) < 1e-10);
    }

    #[test]
    fn orthogonal_wide_has_orthonormal_rows() {
        let mut rng = seeded(5);
        let q = orthogonal(3, 9, &mut rng).unwrap();
        assert_eq!(q.shape(), (3, 9));
        assert!(gram_error(&q.transpose()) < 1e-10);
    }
}
