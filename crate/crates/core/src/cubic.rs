//! Closed-form roots of real cubics.
//!
//! Three real roots use the trigonometric form, a single real root uses
//! Cardano's formula with the complex pair recovered by deflation. Every root
//! gets one Newton step against the original coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicRoots {
    /// Real roots in ascending order (one or three entries, repeated roots repeated).
    pub real: Vec<f64>,
    /// Upper member of the complex-conjugate pair, when there is one.
    pub complex: Option<Complex64>,
}

impl CubicRoots {
    /// All three roots, the conjugate pair expanded.
    pub fn all(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.real.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        if let Some(z) = self.complex {
            out.push(z);
            out.push(z.conj());
        }
        out
    }

    pub fn max_real_part(&self) -> f64 {
        self.all()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates `c[0] x^3 + c[1] x^2 + c[2] x + c[3]`.
pub fn eval(c: &[f64; 4], x: Complex64) -> Complex64 {
    ((x * c[0] + c[1]) * x + c[2]) * x + c[3]
}

fn eval_d1(c: &[f64; 4], x: Complex64) -> Complex64 {
    (x * (3.0 * c[0]) + 2.0 * c[1]) * x + c[2]
}

fn polish(c: &[f64; 4], x: Complex64) -> Complex64 {
    let d = eval_d1(c, x);
    if d.norm() < 1e-14 * (1.0 + x.norm().powi(2)) * c[0].abs() {
        return x;
    }
    let next = x - eval(c, x) / d;
    if next.is_finite() && eval(c, next).norm() <= eval(c, x).norm() {
        next
    } else {
        x
    }
}

/// Roots of `c[0] x^3 + c[1] x^2 + c[2] x + c[3]` with `c[0] != 0`.
pub fn solve(c: [f64; 4]) -> CubicRoots {
    assert!(
        c[0] != 0.0,
        "leading coefficient of a cubic must be nonzero"
    );
    let (b, cc, d) = (c[1] / c[0], c[2] / c[0], c[3] / c[0]);
    let shift = b / 3.0;
    let p = cc - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * cc / 3.0 + d;
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);

    let mut roots = if p == 0.0 && q == 0.0 {
        CubicRoots {
            real: vec![-shift; 3],
            complex: None,
        }
    } else if disc >= 0.0 && p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let real = (0..3)
            .map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect();
        CubicRoots {
            real,
            complex: None,
        }
    } else {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        let x1 = t - shift;
        // x^3 + b x^2 + cc x + d = (x - x1)(x^2 + e x + f)
        let e = b + x1;
        let f = cc + e * x1;
        let half = -e / 2.0;
        let rad = f - half * half;
        if rad > 0.0 {
            CubicRoots {
                real: vec![x1],
                complex: Some(Complex64::new(half, rad.sqrt())),
            }
        } else {
            let w = (-rad).sqrt();
            CubicRoots {
                real: vec![x1, half - w, half + w],
                complex: None,
            }
        }
    };

    for x in roots.real.iter_mut() {
        *x = polish(&c, Complex64::new(*x, 0.0)).re;
    }
    roots.real.sort_by(|a, b| a.total_cmp(b));
    if let Some(z) = roots.complex {
        let z = polish(&c, z);
        roots.complex = Some(Complex64::new(z.re, z.im.abs()));
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_real_roots() {
        // (x - 1)(x - 2)(x + 3)
        let r = solve([1.0, 0.0, -7.0, 6.0]);
        assert_eq!(r.real.len(), 3);
        for (got, want) in r.real.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn one_real_and_pair() {
        // (x + 2)(x^2 - 2x + 5): roots -2, 1 +- 2i
        let r = solve([2.0, 0.0, 2.0, 20.0]);
        assert_eq!(r.real.len(), 1);
        assert!((r.real[0] + 2.0).abs() < 1e-13);
        let z = r.complex.unwrap();
        assert!((z - Complex64::new(1.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn triple_and_double_roots() {
        let r = solve([1.0, -3.0, 3.0, -1.0]);
        assert!(r.real.iter().all(|x| (x - 1.0).abs() < 1e-12));
        // (x - 1)^2 (x + 1)
        let r = solve([1.0, -1.0, -1.0, 1.0]);
        assert_eq!(r.real.len(), 3);
        assert!((r.real[0] + 1.0).abs() < 1e-12);
        assert!((r.real[1] - 1.0).abs() < 1e-7 && (r.real[2] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn negative_leading_coefficient() {
        // -(x + 1)(x + 2)(x + 3)
        let r = solve([-1.0, -6.0, -11.0, -6.0]);
        for (got, want) in r.real.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
