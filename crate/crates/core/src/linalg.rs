//! Fixed-size 3x3 helpers: matrix-vector products, determinants and
//! partial-pivoted Gaussian elimination with residual reporting.

use num_complex::Complex64;

use crate::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type CMat3 = [[Complex64; 3]; 3];
pub type CVec3 = [Complex64; 3];

pub fn to_complex(m: &Mat3) -> CMat3 {
    m.map(|row| row.map(|x| Complex64::new(x, 0.0)))
}

pub fn add(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn transpose<T: Copy>(m: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[j][i]))
}

pub fn matvec(m: &CMat3, v: &CVec3) -> CVec3 {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn det(m: &CMat3) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn max_norm(v: &CVec3) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn sub(a: &CVec3, b: &CVec3) -> CVec3 {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn scale(v: &CVec3, s: Complex64) -> CVec3 {
    v.map(|z| z * s)
}

pub fn conj(v: &CVec3) -> CVec3 {
    v.map(|z| z.conj())
}

/// Plain (non-Hermitian) dot product `sum a_i b_i`.
pub fn dot(a: &CVec3, b: &CVec3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn one_norm(m: &CMat3) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| m[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solution of a 3x3 system together with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solve3 {
    pub x: CVec3,
    /// `max |A x - b|`.
    pub residual: f64,
    /// 1-norm condition number estimate.
    pub condition: f64,
}

fn eliminate(m: &CMat3, rhs: &CVec3, what: &'static str) -> Result<CVec3> {
    let mut a = *m;
    let mut b = *rhs;
    let scale = one_norm(m).max(f64::MIN_POSITIVE);
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[pivot][col].norm() <= 1e-14 * scale {
            return Err(Error::Singular {
                what,
                detail: format!("zero pivot in column {col}"),
            });
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, t) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Solves `m x = rhs`; `what` names the matrix in error messages.
pub fn solve(m: &CMat3, rhs: &CVec3, what: &'static str) -> Result<Solve3> {
    let x = eliminate(m, rhs, what)?;
    let residual = max_norm(&sub(&matvec(m, &x), rhs));
    let mut inv_norm: f64 = 0.0;
    for j in 0..3 {
        let mut e = [Complex64::new(0.0, 0.0); 3];
        e[j] = Complex64::new(1.0, 0.0);
        let col = eliminate(m, &e, what)?;
        inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
    }
    Ok(Solve3 {
        x,
        residual,
        condition: one_norm(m) * inv_norm,
    })
}
