use nalgebra::DMatrix;

use crate::error::{Error, Result};

// Padé(13,13) numerator coefficients b_0..b_13.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which Padé(13) alone meets double precision.
const THETA13: f64 = 5.371920351148152;

/// `exp(tX)` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exp(x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 || n != x.ncols() {
        return Err(Error::invalid(format!("matrix_exp of {}x{} matrix", x.nrows(), x.ncols())));
    }
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix_exp of non-finite input"));
    }
    let a = x * t;
    let norm1 = one_norm(&a);
    if norm1 == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let mut r = pade13(&a);
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn pade13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let w1 = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let w2 = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = a * (&a6 * w1 + w2);
    let z1 = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let z2 = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let v = &a6 * z1 + z2;
    let p = &v + &u;
    let q = &v - &u;
    // q is well conditioned for |a|_1 <= THETA13.
    q.lu().solve(&p).expect("Padé denominator is nonsingular on the scaled domain")
}

/// Principal logarithm of a matrix close to the identity (for instance an
/// orthogonal holonomy map of a short loop), by inverse scaling and squaring.
pub fn log_near_identity(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    if n == 0 || n != q.ncols() {
        return Err(Error::invalid("log of a non-square matrix"));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = q.clone();
    let mut roots = 0;
    while (&x - &id).norm() > 0.05 {
        if roots >= 40 {
            return Err(Error::invalid("matrix has no principal logarithm near the identity"));
        }
        x = sqrt_denman_beavers(&x)?;
        roots += 1;
    }
    let e = &x - &id;
    let mut term = e.clone();
    let mut log = DMatrix::zeros(n, n);
    for k in 1..=60 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        log += &term * (sign / k as f64);
        term = &term * &e;
        if term.norm() < 1e-18 {
            break;
        }
    }
    Ok(log * 2f64.powi(roots))
}

fn sqrt_denman_beavers(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or_else(|| Error::invalid("singular square-root iterate"))?;
        let zi = z.clone().try_inverse().ok_or_else(|| Error::invalid("singular square-root iterate"))?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm() {
            break;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SkewMatrix;
    use std::f64::consts::FRAC_PI_2;

    /// Taylor series with enough terms for small-norm oracles.
    fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for k in 1..60 {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn exp_of_zero_is_identity_exactly() {
        let z = DMatrix::zeros(3, 3);
        assert_eq!(matrix_exp(&z, 2.5).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn quarter_turn() {
        let x = SkewMatrix::elementary(2, 0, 1).into_matrix();
        let r = matrix_exp(&x, FRAC_PI_2).unwrap();
        // exp(t(E12 - E21)) = [[cos, sin], [-sin, cos]]; at pi/2 it maps e1 to
        // -e2 column-wise, i.e. the columns are (0,-1) and (1,0).
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((r - expected).norm() < 1e-10);
    }

    #[test]
    fn agrees_with_taylor_series() {
        let x = DMatrix::from_row_slice(3, 3, &[0.1, -0.4, 0.3, 0.2, 0.05, -0.7, -0.3, 0.6, -0.2]);
        for &t in &[0.5, 1.0, 2.0] {
            let e = matrix_exp(&x, t).unwrap();
            let o = taylor_exp(&(&x * t));
            assert!((&e - &o).norm() <= 1e-13 * o.norm());
        }
    }

    #[test]
    fn large_norm_uses_squaring() {
        let x = SkewMatrix::elementary(2, 0, 1).into_matrix() * 9.0;
        let r = matrix_exp(&x, 1.0).unwrap();
        let (s, c) = 9f64.sin_cos();
        let expected = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((r - expected).norm() < 1e-12);
    }

    #[test]
    fn log_inverts_exp_for_small_skew() {
        let x = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, -0.1, -0.3, 0.0, 0.2, 0.1, -0.2, 0.0]);
        let q = matrix_exp(&x, 1.0).unwrap();
        let l = log_near_identity(&q).unwrap();
        assert!((l - x).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matrix_exp(&DMatrix::zeros(2, 3), 1.0).is_err());
    }
}
