//! Small numerical kernels: pivoted tridiagonal solves, cubic root finding,
//! deterministic pairwise reductions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solve a complex tridiagonal system `T x = rhs` with partial pivoting.
///
/// Row `i` of `T` is `sub[i-1], diag[i], sup[i]`. Pivoting introduces one
/// fill-in superdiagonal, carried in a fourth band.
pub fn solve_tridiag_pivoted(
    sub: &[Complex64],
    diag: &[Complex64],
    sup: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    assert_eq!(sub.len(), n - 1);
    assert_eq!(sup.len(), n - 1);
    assert_eq!(rhs.len(), n);
    let mut d: Vec<Complex64> = diag.to_vec();
    let mut du: Vec<Complex64> = sup.to_vec();
    du.push(Complex64::ZERO);
    let mut du2: Vec<Complex64> = vec![Complex64::ZERO; n];
    let mut b: Vec<Complex64> = rhs.to_vec();

    let scale = d
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    for i in 0..n - 1 {
        let dl = sub[i];
        if d[i].norm() >= dl.norm() {
            if d[i].norm() < 1e-280 * scale {
                return Err(Error::numerical(
                    "tridiagonal solve: zero pivot (operator numerically singular)",
                ));
            }
            let fact = dl / d[i];
            d[i + 1] -= fact * du[i];
            let bi = b[i];
            b[i + 1] -= fact * bi;
        } else {
            // Interchange rows i and i+1.
            let fact = d[i] / dl;
            d[i] = dl;
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            let du_next = du[i + 1];
            du2[i] = du_next;
            du[i + 1] = -fact * du_next;
            du[i] = temp;
            let (bi, bj) = (b[i], b[i + 1]);
            b[i] = bj;
            b[i + 1] = bi - fact * bj;
        }
    }
    if d[n - 1].norm() < 1e-280 * scale {
        return Err(Error::numerical(
            "tridiagonal solve: zero pivot (operator numerically singular)",
        ));
    }
    // Back substitution.
    b[n - 1] /= d[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    Ok(b)
}

/// Cubic (degree <= 3) polynomial with real coefficients, `c[0] + c[1] t + ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicPoly {
    pub c: [f64; 4],
}

impl CubicPoly {
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Self {
        CubicPoly { c: [c0, c1, c2, c3] }
    }

    pub fn zero() -> Self {
        CubicPoly { c: [0.0; 4] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        // Horner
        ((self.c[3] * t + self.c[2]) * t + self.c[1]) * t + self.c[0]
    }

    pub fn deriv_eval(&self, t: f64) -> f64 {
        (3.0 * self.c[3] * t + 2.0 * self.c[2]) * t + self.c[1]
    }

    pub fn scale(&self, s: f64) -> Self {
        CubicPoly::new(self.c[0] * s, self.c[1] * s, self.c[2] * s, self.c[3] * s)
    }

    pub fn add(&self, other: &CubicPoly) -> Self {
        CubicPoly::new(
            self.c[0] + other.c[0],
            self.c[1] + other.c[1],
            self.c[2] + other.c[2],
            self.c[3] + other.c[3],
        )
    }

    pub fn sub(&self, other: &CubicPoly) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Product of a quadratic (`q[0] + q[1] t + q[2] t^2`) and a linear
    /// (`l[0] + l[1] t`) polynomial.
    pub fn from_quad_times_linear(q: [f64; 3], l: [f64; 2]) -> Self {
        CubicPoly::new(
            q[0] * l[0],
            q[0] * l[1] + q[1] * l[0],
            q[1] * l[1] + q[2] * l[0],
            q[2] * l[1],
        )
    }

    pub fn degree(&self, tol: f64) -> usize {
        let scale = self.c.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        for d in (0..4).rev() {
            if self.c[d].abs() > tol * scale {
                return d;
            }
        }
        0
    }

    /// All roots via the companion matrix, polished by two Newton steps.
    pub fn roots(&self) -> Vec<Complex64> {
        let scale = self.c.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        if scale == 0.0 {
            return vec![];
        }
        let deg = self.degree(1e-13);
        if deg == 0 {
            return vec![];
        }
        let lead = self.c[deg];
        let m = DMatrix::<f64>::from_fn(deg, deg, |i, j| {
            if j == deg - 1 {
                -self.c[i] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let mut roots: Vec<Complex64> = m
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        for r in roots.iter_mut() {
            for _ in 0..2 {
                let p = self.eval_c(*r);
                let dp = self.deriv_c(*r);
                if dp.norm() > 1e-300 {
                    *r -= p / dp;
                }
            }
        }
        roots
    }

    fn eval_c(&self, t: Complex64) -> Complex64 {
        ((self.c[3] * t + self.c[2]) * t + self.c[1]) * t + self.c[0]
    }

    fn deriv_c(&self, t: Complex64) -> Complex64 {
        (3.0 * self.c[3] * t + 2.0 * self.c[2]) * t + self.c[1]
    }

    /// The unique positive real root; errors if none or several exist.
    pub fn unique_positive_root(&self) -> Result<f64> {
        let roots = self.roots();
        let mut pos: Vec<f64> = roots
            .iter()
            .filter(|z| z.im.abs() < 1e-9 * (1.0 + z.norm()) && z.re > 0.0)
            .map(|z| z.re)
            .collect();
        pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pos.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));
        match pos.len() {
            1 => Ok(pos[0]),
            0 => Err(Error::numerical(
                "no positive real root found (outside the small-sigma_k regime)",
            )),
            n => Err(Error::numerical(format!(
                "{n} positive real roots found (outside the small-sigma_k regime)"
            ))),
        }
    }
}

/// Deterministic pairwise sum: fixed reduction order, lower error than the
/// running sum on long arrays.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn pairwise_sum_c(v: &[Complex64]) -> Complex64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum_c(&v[..mid]) + pairwise_sum_c(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_tridiag(
        sub: &[Complex64],
        diag: &[Complex64],
        sup: &[Complex64],
        x: &[Complex64],
    ) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn tridiag_solve_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 5, 33, 128] {
            let mut c = |lo: f64| {
                Complex64::new(rng.random::<f64>() - 0.5 + lo, rng.random::<f64>() - 0.5)
            };
            let diag: Vec<_> = (0..n).map(|_| c(3.0)).collect();
            let sub: Vec<_> = (0..n - 1).map(|_| c(0.0)).collect();
            let sup: Vec<_> = (0..n - 1).map(|_| c(0.0)).collect();
            let rhs: Vec<_> = (0..n).map(|_| c(0.0)).collect();
            let x = solve_tridiag_pivoted(&sub, &diag, &sup, &rhs).unwrap();
            let back = apply_tridiag(&sub, &diag, &sup, &x);
            for (a, b) in back.iter().zip(rhs.iter()) {
                assert!((a - b).norm() < 1e-10, "residual too large at n={n}");
            }
        }
    }

    #[test]
    fn tridiag_needs_pivoting() {
        // Zero leading diagonal entry forces a row swap.
        let diag = vec![Complex64::ZERO, Complex64::new(1.0, 0.0)];
        let sub = vec![Complex64::new(2.0, 0.0)];
        let sup = vec![Complex64::new(1.0, 0.0)];
        let rhs = vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)];
        let x = solve_tridiag_pivoted(&sub, &diag, &sup, &rhs).unwrap();
        let back = apply_tridiag(&sub, &diag, &sup, &x);
        for (a, b) in back.iter().zip(rhs.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cubic_roots_known() {
        // (t - 1)(t - 2)(t + 3) = t^3 - 7t + 6
        let p = CubicPoly::new(6.0, -7.0, 0.0, 1.0);
        let mut re: Vec<f64> = p.roots().iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 3.0).abs() < 1e-10);
        assert!((re[1] - 1.0).abs() < 1e-10);
        assert!((re[2] - 2.0).abs() < 1e-10);
        assert!(p.unique_positive_root().is_err()); // two positive roots
        let q = CubicPoly::new(-1.0, 1.0, 0.0, 0.0);
        assert!((q.unique_positive_root().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quad_times_linear() {
        let p = CubicPoly::from_quad_times_linear([1.0, 2.0, 3.0], [4.0, 5.0]);
        for t in [-1.3, 0.0, 0.7, 2.1] {
            let direct = (1.0 + 2.0 * t + 3.0 * t * t) * (4.0 + 5.0 * t);
            assert!((p.eval(t) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }
}
