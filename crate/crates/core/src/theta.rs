//! Complex 2pi-periodic functions of the angle, the per-mode Fourier
//! multipliers of the linearized operator, and the resolvent solve.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum_c, solve_tridiag_pivoted};
use crate::params::ModelParams;

thread_local! {
    static PLANNERS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn fft_plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNERS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// A complex function of the angle sampled on the uniform grid
/// `theta_j = 2 pi j / n`. Fourier modes follow the convention
/// `F{g}_n = (1/2pi) int g e^(-i n theta) dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFun {
    values: Vec<Complex64>,
}

impl ThetaFun {
    pub fn new(values: Vec<Complex64>) -> Self {
        assert!(values.len() >= 4 && values.len() % 2 == 0, "grid must be even");
        ThetaFun { values }
    }

    pub fn zeros(n: usize) -> Self {
        ThetaFun::new(vec![Complex64::ZERO; n])
    }

    pub fn constant(n: usize, z: Complex64) -> Self {
        ThetaFun::new(vec![z; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        ThetaFun::new((0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.len() as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Fourier modes in FFT layout: index `m` holds mode `m` for `m < n/2`
    /// and mode `m - n` otherwise.
    pub fn modes(&self) -> Vec<Complex64> {
        let n = self.len();
        let mut buf = self.values.clone();
        fft_plan(n, false).process(&mut buf);
        let scale = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        buf
    }

    pub fn from_modes(modes: &[Complex64]) -> Self {
        let n = modes.len();
        let mut buf = modes.to_vec();
        fft_plan(n, true).process(&mut buf);
        ThetaFun::new(buf)
    }

    /// Mode accessor by signed index `n` in `[-len/2, len/2)`.
    pub fn mode(&self, n: i64) -> Complex64 {
        let len = self.len() as i64;
        assert!(n >= -len / 2 && n < len / 2, "mode index out of range");
        let modes = self.modes();
        modes[n.rem_euclid(len) as usize]
    }

    /// Trapezoid quadrature of `int_0^{2pi} g dtheta` (exact for band-limited g).
    pub fn integral(&self) -> Complex64 {
        pairwise_sum_c(&self.values) * (2.0 * PI / self.len() as f64)
    }

    pub fn derivative(&self) -> ThetaFun {
        let n = self.len();
        let mut modes = self.modes();
        for (m, v) in modes.iter_mut().enumerate() {
            let nn = signed_index(m, n);
            // Zero the Nyquist mode: its derivative is not representable.
            let factor = if nn == -(n as i64) / 2 {
                Complex64::ZERO
            } else {
                Complex64::new(0.0, nn as f64)
            };
            *v *= factor;
        }
        ThetaFun::from_modes(&modes)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ThetaFun {
        ThetaFun::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn conj(&self) -> ThetaFun {
        self.map(|v| v.conj())
    }

    pub fn scale(&self, s: Complex64) -> ThetaFun {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &ThetaFun) -> ThetaFun {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ThetaFun) -> ThetaFun {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ThetaFun) -> ThetaFun {
        self.zip(other, |a, b| a * b)
    }

    pub fn zip(&self, other: &ThetaFun, f: impl Fn(Complex64, Complex64) -> Complex64) -> ThetaFun {
        assert_eq!(self.len(), other.len(), "grid size mismatch");
        ThetaFun::new(
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Shift by a whole number of grid points: returns `g(theta - 2 pi l / n)`.
    pub fn shift_grid(&self, l: i64) -> ThetaFun {
        let n = self.len() as i64;
        ThetaFun::new(
            (0..n)
                .map(|j| self.values[(j - l).rem_euclid(n) as usize])
                .collect(),
        )
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * 2.0 * PI / self.len() as f64).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Columns: theta, re, im.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "theta,re,im")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", self.theta(j), v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

fn check_nonzero(kvec: [i64; 2]) -> Result<()> {
    if kvec == [0, 0] {
        return Err(Error::validation("zero wave vector rejected"));
    }
    Ok(())
}

/// Multiplier of the interaction operator at positional mode `kvec`:
/// `(1/E^c)(2 pi i v_perp . k - 4 pi^2 tau v_perp . (k (x) k) v)`.
pub fn multiplier_b(kvec: [i64; 2], params: &ModelParams, n: usize) -> Result<ThetaFun> {
    check_nonzero(kvec)?;
    let ec = params.elliptic_multiplier(kvec);
    let (kx, ky) = (kvec[0] as f64, kvec[1] as f64);
    let tau = params.tau;
    Ok(ThetaFun::from_fn(n, |t| {
        let vperp_k = -kx * t.sin() + ky * t.cos();
        // v_perp . (k (x) k) v = (v_perp . k)(k . v)
        let quad = vperp_k * (kx * t.cos() + ky * t.sin());
        Complex64::new(-4.0 * PI * PI * tau * quad / ec, 2.0 * PI * vperp_k / ec)
    }))
}

/// `d/dtheta` of [`multiplier_b`], evaluated analytically.
pub fn multiplier_b_dtheta(kvec: [i64; 2], params: &ModelParams, n: usize) -> Result<ThetaFun> {
    check_nonzero(kvec)?;
    let ec = params.elliptic_multiplier(kvec);
    let (kx, ky) = (kvec[0] as f64, kvec[1] as f64);
    let tau = params.tau;
    Ok(ThetaFun::from_fn(n, |t| {
        let d_vperp_k = -kx * t.cos() - ky * t.sin();
        // d/dtheta [(v_perp.k)(k.v)] = ((ky^2-kx^2)/2) 2cos(2t) - kx ky 2 sin(2t)
        let d_quad = (ky * ky - kx * kx) * (2.0 * t).cos() - 2.0 * kx * ky * (2.0 * t).sin();
        Complex64::new(-4.0 * PI * PI * tau * d_quad / ec, 2.0 * PI * d_vperp_k / ec)
    }))
}

/// Multiplier of the advection-diffusion part at positional mode `kvec`:
/// `4 pi^2 sigma_x |k|^2 + 2 pi i lambda v . k`.
pub fn multiplier_m(kvec: [i64; 2], params: &ModelParams, n: usize) -> Result<ThetaFun> {
    check_nonzero(kvec)?;
    let (kx, ky) = (kvec[0] as f64, kvec[1] as f64);
    let k2 = kx * kx + ky * ky;
    let re = 4.0 * PI * PI * params.sigma_x * k2;
    Ok(ThetaFun::from_fn(n, |t| {
        Complex64::new(re, 2.0 * PI * params.lambda * (kx * t.cos() + ky * t.sin()))
    }))
}

/// Tail threshold of the mode-truncation monitor in the banded resolvent solve.
const RESOLVENT_TAIL_TOL: f64 = 1e-12;

/// Solve `(-mu - M_kvec + sigma_theta d_theta^2) u = rhs`.
///
/// With `sigma_theta = 0` the solve is the explicit pointwise division; for
/// positive angular diffusion it is a pivoted tridiagonal system in mode
/// space (`M` couples neighbouring modes only).
pub fn resolvent_solve_shifted(
    kvec: [i64; 2],
    sigma_theta: f64,
    rhs: &ThetaFun,
    params: &ModelParams,
    mu: Complex64,
) -> Result<ThetaFun> {
    resolvent_solve_impl(kvec, sigma_theta, rhs, params, mu, true)
}

/// Same solve without the truncation-tail monitor: the result is the exact
/// solution of the mode-truncated system, used where grid consistency on a
/// deliberately coarse angular grid matters more than continuum accuracy.
pub fn resolvent_solve_truncated(
    kvec: [i64; 2],
    sigma_theta: f64,
    rhs: &ThetaFun,
    params: &ModelParams,
) -> Result<ThetaFun> {
    resolvent_solve_impl(kvec, sigma_theta, rhs, params, Complex64::ZERO, false)
}

fn resolvent_solve_impl(
    kvec: [i64; 2],
    sigma_theta: f64,
    rhs: &ThetaFun,
    params: &ModelParams,
    mu: Complex64,
    check_tail: bool,
) -> Result<ThetaFun> {
    check_nonzero(kvec)?;
    let n = rhs.len();
    if sigma_theta == 0.0 {
        let m = multiplier_m(kvec, params, n)?;
        let denom_min = m
            .values()
            .iter()
            .map(|&v| (-mu - v).norm())
            .fold(f64::INFINITY, f64::min);
        if denom_min < 1e-14 {
            return Err(Error::numerical(
                "inviscid resolvent: multiplier passes through the shift",
            ));
        }
        return Ok(rhs.zip(&m, |r, mv| r / (-mu - mv)));
    }

    // Signed mode order i = 0..n <-> mode nn = i - n/2.
    let half = (n / 2) as i64;
    let (kx, ky) = (kvec[0] as f64, kvec[1] as f64);
    let k2 = kx * kx + ky * ky;
    let m0 = Complex64::new(4.0 * PI * PI * params.sigma_x * k2, 0.0);
    // M = m0 + m_plus e^{i theta} + m_minus e^{-i theta}
    let m_plus = Complex64::new(0.0, PI * params.lambda) * Complex64::new(kx, -ky);
    let m_minus = Complex64::new(0.0, PI * params.lambda) * Complex64::new(kx, ky);

    let rhs_modes = rhs.modes();
    let mut b = vec![Complex64::ZERO; n];
    for i in 0..n {
        let nn = i as i64 - half;
        b[i] = rhs_modes[nn.rem_euclid(n as i64) as usize];
    }
    let mut diag = vec![Complex64::ZERO; n];
    for (i, d) in diag.iter_mut().enumerate() {
        let nn = (i as i64 - half) as f64;
        *d = -mu - m0 - Complex64::new(sigma_theta * nn * nn, 0.0);
    }
    // (M u)_n picks m_plus u_{n-1} + m_minus u_{n+1}; the operator carries -M.
    let sub = vec![-m_plus; n - 1];
    let sup = vec![-m_minus; n - 1];
    let sol = solve_tridiag_pivoted(&sub, &diag, &sup, &b)?;

    let norm = sol.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let tail = sol[0].norm().max(sol[1].norm()).max(sol[n - 1].norm());
    if check_tail && tail > RESOLVENT_TAIL_TOL * norm {
        return Err(Error::numerical(format!(
            "resolvent solve: mode truncation tail {:.2e} exceeds {:.0e} of the solution norm \
             (increase the angular resolution)",
            tail / norm,
            RESOLVENT_TAIL_TOL
        )));
    }

    let mut modes = vec![Complex64::ZERO; n];
    for (i, &v) in sol.iter().enumerate() {
        let nn = i as i64 - half;
        modes[nn.rem_euclid(n as i64) as usize] = v;
    }
    Ok(ThetaFun::from_modes(&modes))
}

/// Unshifted resolvent `(-M + sigma_theta d_theta^2)^{-1} rhs`.
pub fn resolvent_solve(
    kvec: [i64; 2],
    sigma_theta: f64,
    rhs: &ThetaFun,
    params: &ModelParams,
) -> Result<ThetaFun> {
    resolvent_solve_shifted(kvec, sigma_theta, rhs, params, Complex64::ZERO)
}

/// The kernel eigenprofile `U = R^k (d_theta B_k)`.
pub fn compute_u(kvec: [i64; 2], sigma_theta: f64, params: &ModelParams, n: usize) -> Result<ThetaFun> {
    let db = multiplier_b_dtheta(kvec, params, n)?;
    resolvent_solve(kvec, sigma_theta, &db, params)
}

/// Shifted eigenprofile `U(mu) = (-mu - M + sigma d_theta^2)^{-1} d_theta B`.
pub fn compute_u_shifted(
    kvec: [i64; 2],
    sigma_theta: f64,
    params: &ModelParams,
    n: usize,
    mu: Complex64,
) -> Result<ThetaFun> {
    let db = multiplier_b_dtheta(kvec, params, n)?;
    resolvent_solve_shifted(kvec, sigma_theta, &db, params, mu)
}

/// The cokernel eigenprofile `V = -R^{-k} 1`.
pub fn compute_v(kvec: [i64; 2], sigma_theta: f64, params: &ModelParams, n: usize) -> Result<ThetaFun> {
    let one = ThetaFun::constant(n, Complex64::ONE);
    let neg_k = [-kvec[0], -kvec[1]];
    Ok(resolvent_solve(neg_k, sigma_theta, &one, params)?.scale(-Complex64::ONE))
}

/// Grid-consistent eigenprofiles on a fixed (possibly coarse) angular grid:
/// the exact solutions of the mode-truncated systems.
pub fn compute_u_grid(kvec: [i64; 2], sigma_theta: f64, params: &ModelParams, n: usize) -> Result<ThetaFun> {
    let db = multiplier_b_dtheta(kvec, params, n)?;
    resolvent_solve_impl(kvec, sigma_theta, &db, params, Complex64::ZERO, false)
}

pub fn compute_v_grid(kvec: [i64; 2], sigma_theta: f64, params: &ModelParams, n: usize) -> Result<ThetaFun> {
    let one = ThetaFun::constant(n, Complex64::ONE);
    let neg_k = [-kvec[0], -kvec[1]];
    Ok(resolvent_solve_impl(neg_k, sigma_theta, &one, params, Complex64::ZERO, false)?
        .scale(-Complex64::ONE))
}

/// Closed form of `int U_0 dtheta` for the axis mode `(k, 0)`:
/// `(4 pi^2 k e_k / (E^c lambda_k)) (1 - |z_in| + 2 sigma_k |z_in| tau_k)`.
pub fn integral_u_inviscid(k: u32, params: &ModelParams) -> Result<f64> {
    let rc = params.rescale(k)?;
    let z = rc.z_abs();
    Ok(4.0 * PI * PI * f64::from(k) * rc.e_k / (rc.e_elliptic * rc.lambda_k)
        * (1.0 - z + 2.0 * rc.sigma_k * z * rc.tau_k))
}

/// Central-conjugate symmetry classification of an angular profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcsClass {
    /// `u(theta) = conj(u(theta + pi))`
    Ccs,
    /// `u(theta) = -conj(u(theta + pi))`
    Cca,
    Neither,
}

/// Grid test of central-conjugate (anti)symmetry. The zero function reports
/// `Ccs` by convention.
pub fn classify_ccs(f: &ThetaFun, tol: f64) -> CcsClass {
    let n = f.len();
    let half = n / 2;
    let scale = f.norm_inf().max(1e-300);
    let mut dev_s = 0.0_f64;
    let mut dev_a = 0.0_f64;
    for j in 0..n {
        let a = f.values()[j];
        let b = f.values()[(j + half) % n].conj();
        dev_s = dev_s.max((a - b).norm());
        dev_a = dev_a.max((a + b).norm());
    }
    if dev_s <= tol * scale {
        CcsClass::Ccs
    } else if dev_a <= tol * scale {
        CcsClass::Cca
    } else {
        CcsClass::Neither
    }
}
