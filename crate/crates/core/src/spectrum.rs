//! Per-positional-mode linearized operators in the angular Fourier basis:
//! assembly, spectra, kernel-dimension counts, and the dispersion relation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::theta::{self, ThetaFun};

/// `k` is non-Pythagorean when `k^2` is not a sum of two positive squares.
pub fn is_non_pythagorean(k: u32) -> bool {
    let k2 = i64::from(k) * i64::from(k);
    for l in 1..i64::from(k) {
        for m in l..i64::from(k) {
            if l * l + m * m == k2 {
                return false;
            }
        }
    }
    true
}

pub fn require_non_pythagorean(k: u32) -> Result<()> {
    if !is_non_pythagorean(k) {
        return Err(Error::validation(format!(
            "wave number k = {k} is Pythagorean (k^2 is a sum of two positive squares); \
             the reduction is only two-dimensional at non-Pythagorean wave numbers"
        )));
    }
    Ok(())
}

/// Dense matrix of the linearized operator restricted to one positional mode,
/// acting on angular Fourier coefficients `n` in `[-n_c, n_c]`.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub kvec: [i64; 2],
    pub chi: f64,
    pub sigma_theta: f64,
    pub n_c: usize,
    pub matrix: DMatrix<Complex64>,
}

/// First/second-neighbour coupling coefficients of the advection multiplier:
/// `M = m0 + m_plus e^{i theta} + m_minus e^{-i theta}`.
fn m_bands(kvec: [i64; 2], params: &ModelParams) -> (Complex64, Complex64, Complex64) {
    let (kx, ky) = (kvec[0] as f64, kvec[1] as f64);
    let m0 = Complex64::new(4.0 * PI * PI * params.sigma_x * (kx * kx + ky * ky), 0.0);
    let m_plus = Complex64::new(0.0, PI * params.lambda) * Complex64::new(kx, -ky);
    let m_minus = Complex64::new(0.0, PI * params.lambda) * Complex64::new(kx, ky);
    (m0, m_plus, m_minus)
}

/// Exact angular modes of `d_theta B_kvec` (a trig polynomial of degree 2),
/// read off a small grid.
fn db_modes(kvec: [i64; 2], params: &ModelParams) -> Result<[Complex64; 5]> {
    let f = theta::multiplier_b_dtheta(kvec, params, 8)?;
    let modes = f.modes();
    // order: n = -2..2
    Ok([modes[6], modes[7], modes[0], modes[1], modes[2]])
}

impl ModeOperator {
    pub fn size(&self) -> usize {
        2 * self.n_c + 1
    }

    pub fn smallest_singular_value(&self) -> (f64, f64) {
        let svd = self.matrix.clone().svd(false, false);
        let min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        (min, max)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let (_, t) = self.matrix.clone().schur().unpack();
        t.diagonal().iter().cloned().collect()
    }

    /// Apply to the modes of an angular profile (for cross-representation
    /// checks against the grid-space operator).
    pub fn apply(&self, profile: &ThetaFun) -> ThetaFun {
        let n = profile.len();
        let modes = profile.modes();
        let nc = self.n_c as i64;
        let mut input = nalgebra::DVector::<Complex64>::zeros(self.size());
        for (m, &v) in modes.iter().enumerate() {
            let nn = theta::signed_index(m, n);
            if nn.abs() <= nc {
                input[(nn + nc) as usize] = v;
            }
        }
        let out = &self.matrix * input;
        let mut out_modes = vec![Complex64::ZERO; n];
        for r in 0..self.size() {
            let nn = r as i64 - nc;
            if nn.abs() < n as i64 / 2 {
                out_modes[nn.rem_euclid(n as i64) as usize] = out[r];
            }
        }
        ThetaFun::from_modes(&out_modes)
    }
}

/// Assemble the operator `(-M + sigma d^2_theta) - (chi/2pi) dB int(.)` at one
/// positional mode. The zero mode is rejected (it is diagonal on zero-mean
/// functions and handled by [`zero_mode_eigenvalues`]).
pub fn assemble_mode_operator(
    kvec: [i64; 2],
    chi: f64,
    sigma_theta: f64,
    params: &ModelParams,
    n_c: usize,
) -> Result<ModeOperator> {
    if kvec == [0, 0] {
        return Err(Error::validation(
            "zero positional mode has no interaction part; use zero_mode_eigenvalues",
        ));
    }
    if n_c < 16 {
        return Err(Error::validation("n_c must be >= 16"));
    }
    let size = 2 * n_c + 1;
    let (m0, m_plus, m_minus) = m_bands(kvec, params);
    let db = db_modes(kvec, params)?;
    let mut a = DMatrix::<Complex64>::zeros(size, size);
    let nc = n_c as i64;
    for r in 0..size {
        let n = r as i64 - nc;
        a[(r, r)] = -m0 - Complex64::new(sigma_theta * (n * n) as f64, 0.0);
        if r > 0 {
            a[(r, r - 1)] = -m_plus;
        }
        if r + 1 < size {
            a[(r, r + 1)] = -m_minus;
        }
    }
    // rank-one part: column at n' = 0 receives -chi (dB)_n since
    // int u dtheta = 2 pi u_0.
    let col0 = n_c;
    for (offset, coeff) in db.iter().enumerate() {
        let n = offset as i64 - 2;
        let r = (n + nc) as usize;
        a[(r, col0)] += Complex64::from(-chi) * coeff;
    }
    Ok(ModeOperator {
        kvec,
        chi,
        sigma_theta,
        n_c,
        matrix: a,
    })
}

/// The spectrum of the zero positional mode on zero-mean angular functions:
/// `{ -sigma_theta n^2, 1 <= |n| <= n_c }`.
pub fn zero_mode_eigenvalues(sigma_theta: f64, n_c: usize) -> Vec<Complex64> {
    let mut out = Vec::new();
    for n in 1..=n_c as i64 {
        let v = Complex64::new(-sigma_theta * (n * n) as f64, 0.0);
        out.push(v);
        out.push(v);
    }
    out
}

/// Discrete-consistent bifurcation point at the matrix resolution: solves the
/// banded part for the eigenprofile and inverts its angular mean. The
/// resulting matrix at `chi` has an exact kernel.
pub fn kernel_chi(kvec: [i64; 2], sigma_theta: f64, params: &ModelParams, n_c: usize) -> Result<f64> {
    let u0 = eigenprofile_mean(kvec, sigma_theta, params, n_c, Complex64::ZERO)?;
    if u0.re.abs() < 1e-300 {
        return Err(Error::numerical("eigenprofile mean vanished"));
    }
    Ok(1.0 / u0.re)
}

/// Mean (0-mode) of `(-mu - M + sigma d2)^{-1} d_theta B` at the matrix
/// resolution, via a pivoted tridiagonal solve on the symmetric mode window.
fn eigenprofile_mean(
    kvec: [i64; 2],
    sigma_theta: f64,
    params: &ModelParams,
    n_c: usize,
    mu: Complex64,
) -> Result<Complex64> {
    let size = 2 * n_c + 1;
    let (m0, m_plus, m_minus) = m_bands(kvec, params);
    let db = db_modes(kvec, params)?;
    let nc = n_c as i64;
    let mut diag = vec![Complex64::ZERO; size];
    for (r, d) in diag.iter_mut().enumerate() {
        let n = r as i64 - nc;
        *d = -mu - m0 - Complex64::new(sigma_theta * (n * n) as f64, 0.0);
    }
    let sub = vec![-m_plus; size - 1];
    let sup = vec![-m_minus; size - 1];
    let mut rhs = vec![Complex64::ZERO; size];
    for (offset, coeff) in db.iter().enumerate() {
        rhs[(offset as i64 - 2 + nc) as usize] = *coeff;
    }
    let sol = crate::linalg::solve_tridiag_pivoted(&sub, &diag, &sup, &rhs)?;
    Ok(sol[n_c])
}

/// The dispersion function `(chi / 2pi) int U(mu) dtheta` whose unit level
/// set is the point spectrum of the mode operators.
pub fn dispersion_value(
    kvec: [i64; 2],
    chi: f64,
    sigma_theta: f64,
    params: &ModelParams,
    n_c: usize,
    mu: Complex64,
) -> Result<Complex64> {
    let u0 = eigenprofile_mean(kvec, sigma_theta, params, n_c, mu)?;
    Ok(Complex64::from(chi) * u0)
}

/// Secant refinement of a root of `dispersion_value - 1` near `guess`.
pub fn dispersion_root(
    kvec: [i64; 2],
    chi: f64,
    sigma_theta: f64,
    params: &ModelParams,
    n_c: usize,
    guess: Complex64,
) -> Result<Complex64> {
    let f = |mu: Complex64| -> Result<Complex64> {
        Ok(dispersion_value(kvec, chi, sigma_theta, params, n_c, mu)? - 1.0)
    };
    let mut x0 = guess;
    let mut x1 = guess + Complex64::new(1e-4, 1e-5);
    let mut f0 = f(x0)?;
    for _ in 0..60 {
        let f1 = f(x1)?;
        let denom = f1 - f0;
        if denom.norm() < 1e-300 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        x0 = x1;
        f0 = f1;
        x1 = x2;
        if (x1 - x0).norm() < 1e-12 * (1.0 + x1.norm()) {
            return Ok(x1);
        }
    }
    if f(x1)?.norm() < 1e-8 {
        Ok(x1)
    } else {
        Err(Error::numerical("dispersion root iteration did not converge"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelReport {
    pub k: u32,
    pub chi: f64,
    pub sigma_theta: f64,
    pub dimension: usize,
    pub modes: Vec<[i64; 2]>,
    pub threshold: f64,
}

/// Count near-null directions of the per-mode operators at the bifurcation
/// point over the lattice `0 < |l| <= k + 2`.
pub fn kernel_report(params: &ModelParams, k: u32, sigma_theta: f64, n_c: usize) -> Result<KernelReport> {
    let chi = kernel_chi([i64::from(k), 0], sigma_theta, params, n_c)?;
    let reach = i64::from(k) + 2;
    let mut lattice = Vec::new();
    for l1 in -reach..=reach {
        for l2 in -reach..=reach {
            if (l1, l2) != (0, 0) && l1 * l1 + l2 * l2 <= reach * reach {
                lattice.push([l1, l2]);
            }
        }
    }
    let threshold = 1e-6;
    let flagged: Vec<[i64; 2]> = lattice
        .par_iter()
        .filter_map(|&kv| {
            let op = assemble_mode_operator(kv, chi, sigma_theta, params, n_c).ok()?;
            let (smin, smax) = op.smallest_singular_value();
            (smin < threshold * smax).then_some(kv)
        })
        .collect();
    let mut modes = flagged;
    modes.sort();
    Ok(KernelReport {
        k,
        chi,
        sigma_theta,
        dimension: modes.len(),
        modes,
        threshold,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub kvec: [i64; 2],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub chi: f64,
    pub sigma_theta: f64,
    pub k_max: i64,
    pub n_c: usize,
    pub max_re: f64,
    /// Distance from `max_re` down to the next eigenvalue outside the
    /// leading cluster.
    pub gap: f64,
    /// Number of eigenvalues in the leading cluster.
    pub n_critical: usize,
    pub modes: Vec<ModeSpectrum>,
    pub zero_mode_re: Vec<f64>,
}

/// Eigenvalues of every positional mode `|l| <= k_max` plus the diagonal
/// zero-mode family.
pub fn full_spectrum_scan(
    params: &ModelParams,
    chi: f64,
    sigma_theta: f64,
    k_max: i64,
    n_c: usize,
) -> Result<SpectrumReport> {
    let mut lattice = Vec::new();
    for l1 in -k_max..=k_max {
        for l2 in -k_max..=k_max {
            if (l1, l2) != (0, 0) && l1 * l1 + l2 * l2 <= k_max * k_max {
                lattice.push([l1, l2]);
            }
        }
    }
    let modes: Result<Vec<ModeSpectrum>> = lattice
        .par_iter()
        .map(|&kv| {
            let op = assemble_mode_operator(kv, chi, sigma_theta, params, n_c)?;
            let eigs = op.eigenvalues();
            Ok(ModeSpectrum {
                kvec: kv,
                re: eigs.iter().map(|z| z.re).collect(),
                im: eigs.iter().map(|z| z.im).collect(),
            })
        })
        .collect();
    let modes = modes?;
    let zero: Vec<f64> = zero_mode_eigenvalues(sigma_theta, n_c)
        .iter()
        .map(|z| z.re)
        .collect();
    let mut all_re: Vec<f64> = modes.iter().flat_map(|m| m.re.iter().cloned()).collect();
    all_re.extend(zero.iter().cloned());
    all_re.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max_re = all_re[0];
    let cluster_tol = 1e-7_f64.max(1e-9 * max_re.abs());
    let n_critical = all_re.iter().take_while(|&&r| max_re - r <= cluster_tol).count();
    let gap = if n_critical < all_re.len() {
        max_re - all_re[n_critical]
    } else {
        f64::INFINITY
    };
    Ok(SpectrumReport {
        chi,
        sigma_theta,
        k_max,
        n_c,
        max_re,
        gap,
        n_critical,
        modes,
        zero_mode_re: zero,
    })
}
