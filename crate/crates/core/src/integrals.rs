//! Closed-form integral quantities of the reduction: residue-derived Fourier
//! coefficients, the cubic integral polynomials, the kernel/cokernel pairing,
//! and the inviscid dispersion integral, together with independent
//! FFT/series/quadrature oracles for each of them.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CubicPoly;
use crate::params::{shifted_roots, ModelParams, RescaledConstants};
use crate::theta;

/// Fourier coefficient of `|M_(k,0)|^-2` (power = 2) or `|M_(k,0)|^-4`
/// (power = 4) at mode `n`. Zero for odd `n`.
pub fn d_mode(rc: &RescaledConstants, n: i64, power: u32) -> Result<f64> {
    if rc.sigma_k <= 0.0 {
        return Err(Error::validation("d_mode requires sigma_k > 0"));
    }
    if n.rem_euclid(2) != 0 {
        return Ok(0.0);
    }
    let half = n / 2; // exact for even n
    let sign = if half.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let z = rc.z_abs().powf(n.unsigned_abs() as f64 / 2.0);
    let lk2 = rc.lambda_k * rc.lambda_k;
    match power {
        2 => Ok(rc.e_k / lk2 * z * 2.0 * sign),
        4 => Ok((n.unsigned_abs() as f64 + rc.f_k) * rc.e_k * rc.e_k / (lk2 * lk2) * z * 2.0 * sign),
        p => Err(Error::validation(format!("d_mode power must be 2 or 4, got {p}"))),
    }
}

/// Coefficients `[c0, c1, c2]` (in powers of tau_k) of the five quadratic
/// polynomials entering the integral closed forms. `a_x`, `g_x`, `b_x`
/// have vanishing quadratic part.
pub fn table_polys(rc: &RescaledConstants) -> TablePolys {
    let s = rc.z_abs();
    let sk = rc.sigma_k;
    let one_m_s2 = 1.0 - s * s;
    let one_p_s = 1.0 + s;
    TablePolys {
        a_y: [2.0 * sk * s, -one_p_s * one_p_s / 2.0, -sk * (1.0 + s * s)],
        g_y: [-2.0 * sk, (2.0 + s) / 2.0, sk * s],
        a_x: [
            -4.0 * sk * sk * s * one_p_s * one_p_s - one_m_s2 * one_m_s2,
            2.0 * sk * one_m_s2 * one_m_s2,
        ],
        g_x: [
            4.0 * sk * sk * ((1.0 - s.powi(4)) + 4.0 * (s * s + s)) - 2.0 * s * one_m_s2 * one_m_s2,
            4.0 * sk * s * one_m_s2 * one_m_s2,
        ],
        b_x: [
            one_m_s2 * one_m_s2 * (1.0 + s * s) - 8.0 * sk * sk * s * s * one_p_s * one_p_s,
            -2.0 * sk * one_m_s2 * one_m_s2 * (1.0 + s * s),
        ],
    }
}

/// The polynomial building blocks of the integral closed forms.
#[derive(Debug, Clone, Copy)]
pub struct TablePolys {
    pub a_y: [f64; 3],
    pub g_y: [f64; 3],
    pub a_x: [f64; 2],
    pub g_x: [f64; 2],
    pub b_x: [f64; 2],
}

impl TablePolys {
    fn eval2(c: [f64; 3], t: f64) -> f64 {
        (c[2] * t + c[1]) * t + c[0]
    }

    fn eval1(c: [f64; 2], t: f64) -> f64 {
        c[1] * t + c[0]
    }
}

/// `beta^1(s) = -(ln(1-s^2)+s^2)/s^4`, continuous at 0 with value 1/2.
pub fn beta1(s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::validation(format!("beta1 requires 0 <= s < 1, got {s}")));
    }
    Ok(beta_eval(s, false))
}

/// `beta^2(s) = -(ln(1+s^2)-s^2)/s^4`, continuous at 0 with value 1/2.
pub fn beta2(s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::validation(format!("beta2 requires s >= 0, got {s}")));
    }
    Ok(beta_eval(s, true))
}

fn beta_eval(s: f64, alternating: bool) -> f64 {
    let x = s * s;
    if s < 1e-2 {
        // sum_{m>=2} (+-1)^m x^{m-2} / m; six terms reach ~1e-26 at s = 1e-2.
        let mut acc = 0.0;
        let mut xp = 1.0;
        for m in 2..8u32 {
            let sign = if alternating && m % 2 == 1 { -1.0 } else { 1.0 };
            acc += sign * xp / f64::from(m);
            xp *= x;
        }
        return acc;
    }
    if alternating {
        -((1.0 + x).ln() - x) / (x * x)
    } else {
        -((1.0 - x).ln() + x) / (x * x)
    }
}

/// Which of the two integral polynomials to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    K1,
    K2,
}

/// The integral polynomials `I` as cubics in `tau_k`, assembled symbolically
/// from the quadratic table entries (the closed form stays closed).
pub fn i_closed(rc: &RescaledConstants, which: Which) -> Result<CubicPoly> {
    if rc.sigma_k <= 0.0 {
        return Err(Error::validation("i_closed requires sigma_k > 0"));
    }
    let t = table_polys(rc);
    let s = rc.z_abs();
    let prefactor = -16.0 * PI.powi(6) * f64::from(rc.k).powi(3) * rc.e_k.powi(3)
        / (rc.e_elliptic.powi(3) * rc.lambda_k * rc.lambda_k);
    let poly = match which {
        Which::K1 => {
            let b1 = beta1(s)?;
            let gg = CubicPoly::from_quad_times_linear(t.g_y, t.g_x);
            let inner = [t.a_x[0] + b1 * t.b_x[0], t.a_x[1] + b1 * t.b_x[1]];
            gg.add(&CubicPoly::from_quad_times_linear(t.a_y, inner))
        }
        Which::K2 => {
            let b2 = beta2(s)?;
            let w = (1.0 - s * s) / (1.0 + s * s);
            let gg = CubicPoly::from_quad_times_linear(t.g_y, t.g_x).scale(-1.0);
            let inner = [w * t.a_x[0] + b2 * t.b_x[0], w * t.a_x[1] + b2 * t.b_x[1]];
            gg.add(&CubicPoly::from_quad_times_linear(t.a_y, inner))
        }
    };
    Ok(poly.scale(prefactor))
}

/// Closed-form angular Fourier modes of the product functions entering the
/// integral series, at even mode `n >= 2`: `(x_n, y1_n, y2_n)`.
/// Negative modes follow by conjugation; odd modes vanish.
pub fn xy_modes(rc: &RescaledConstants, n: i64) -> Result<(Complex64, Complex64, Complex64)> {
    if rc.sigma_k <= 0.0 {
        return Err(Error::validation("xy_modes requires sigma_k > 0"));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::validation(format!("xy_modes requires even n >= 2, got {n}")));
    }
    let t = table_polys(rc);
    let tau_k = rc.tau_k;
    let s = rc.z_abs();
    let kf = f64::from(rc.k);
    let parity = if (n / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let decay = s.powf((n - 4) as f64 / 2.0);
    let x_scale = -PI * kf / (2.0 * rc.e_elliptic * rc.lambda_k) * rc.e_k * rc.e_k;
    let x_n = Complex64::new(
        x_scale
            * parity
            * decay
            * (TablePolys::eval1(t.a_x, tau_k) * n as f64
                + 2.0 / (1.0 - s * s) * TablePolys::eval1(t.b_x, tau_k)),
        0.0,
    );
    let y_scale = 2.0 * PI * PI * kf * kf / (rc.e_elliptic * rc.e_elliptic * rc.lambda_k)
        * rc.e_k
        * (1.0 - s * s);
    // n = 2 takes the g-polynomial for both orientations; the rotation
    // identity y2_n = (-1)^(n/2) y1_n then holds at every even mode.
    let y1_n = if n == 2 {
        Complex64::new(0.0, -y_scale * TablePolys::eval2(t.g_y, tau_k))
    } else {
        Complex64::new(0.0, -y_scale * parity * decay * TablePolys::eval2(t.a_y, tau_k))
    };
    let y2_n = y1_n * parity;
    Ok((x_n, y1_n, y2_n))
}

/// Series evaluation of the integral: `16 pi^3 sum_w (1/w) Im(conj(y_w) x_w)`
/// truncated at `omega_max`, with a geometric tail estimate.
pub fn i_series_oracle(
    rc: &RescaledConstants,
    which: Which,
    omega_max: u32,
) -> Result<(f64, f64)> {
    if omega_max < 8 {
        return Err(Error::validation("omega_max must be >= 8"));
    }
    let mut acc = 0.0;
    let mut last_term = 0.0_f64;
    let mut w = 2i64;
    while w <= i64::from(omega_max) {
        let (x, y1, y2) = xy_modes(rc, w)?;
        let y = match which {
            Which::K1 => y1,
            Which::K2 => y2,
        };
        let term = (y.conj() * x).im / w as f64;
        acc += term;
        last_term = term.abs();
        w += 2;
    }
    let z2 = rc.z_abs() * rc.z_abs();
    // successive even terms shrink by |z_in|^2; factor 2 absorbs the linear
    // mode growth of the x-coefficients
    let tail = 16.0 * PI.powi(3) * last_term * 2.0 * z2 / (1.0 - z2).max(1e-12);
    Ok((16.0 * PI.powi(3) * acc, tail))
}

/// Leading-order closed form (as sigma_theta -> 0) of the kernel/cokernel
/// pairing `<psi, phi>` for the axis mode.
pub fn pairing_phi_psi_closed(rc: &RescaledConstants) -> f64 {
    let s = rc.z_abs();
    let sk = rc.sigma_k;
    let p1 = 1.0 + s * s - 4.0 * s / (1.0 + s) + 8.0 * sk * sk * s / (1.0 - s * s);
    let p0 = 4.0 * sk * (1.0 - s) / (1.0 + s);
    8.0 * PI * PI * f64::from(rc.k) * rc.e_k * rc.e_k
        / (rc.e_elliptic * rc.lambda_k * rc.lambda_k)
        * (p1 * rc.tau_k + p0)
}

/// Real parts of the angular modes of `d_theta B_(k,0) * (M_(-k,0))^2`; only
/// modes 0, +-2, +-4 are nonzero (odd modes are purely imaginary and even
/// modes beyond 4 vanish). These drive the pairing Cauchy product.
pub fn m_phipsi_mode(rc: &RescaledConstants, n: i64) -> f64 {
    let scale = PI * f64::from(rc.k) * rc.lambda_k * rc.lambda_k / (2.0 * rc.e_elliptic);
    let sk = rc.sigma_k;
    let tk = rc.tau_k;
    match n.abs() {
        0 => scale * (-4.0 * sk - tk),
        2 => scale * (-2.0 * sk - tk + 2.0 * sk * sk * tk),
        4 => scale * (-tk / 2.0),
        _ => 0.0,
    }
}

/// Pairing reassembled from the mode data: `-4 pi sum_n d4_n m_(-n)`.
/// Internal consistency route for [`pairing_phi_psi_closed`].
pub fn pairing_from_modes(rc: &RescaledConstants) -> Result<f64> {
    let mut acc = 0.0;
    for n in [-4i64, -2, 0, 2, 4] {
        acc += d_mode(rc, n, 4)? * m_phipsi_mode(rc, -n);
    }
    Ok(-4.0 * PI * acc)
}

/// Inviscid dispersion integral `J(mu) = int d_theta B / (-mu - M) dtheta`
/// for the axis mode, via the shifted root constants. Analytic in `mu` on
/// `Re mu > -sigma_k lambda_k` away from the branch point.
pub fn dispersion_j_inviscid(
    rc: &RescaledConstants,
    mu: Complex64,
) -> Result<Complex64> {
    if mu.re <= -rc.sigma_k * rc.lambda_k {
        return Err(Error::validation(format!(
            "dispersion integral requires Re mu > {}",
            -rc.sigma_k * rc.lambda_k
        )));
    }
    let (z_in, e_k) = shifted_roots(rc, mu)?;
    let s_shift = rc.sigma_k + mu / rc.lambda_k;
    // |z_in| continues analytically to -z_in (z_in < 0 on the real axis)
    let val = 4.0 * PI * PI * f64::from(rc.k) * e_k / (rc.e_elliptic * rc.lambda_k)
        * (1.0 + z_in - 2.0 * s_shift * z_in * rc.tau_k);
    Ok(val)
}

/// Independent grid/quadrature oracles for every closed form in this module.
pub mod oracle {
    use super::*;
    use crate::theta::ThetaFun;

    /// Angular resolution adapted to the mode decay `|z_in|^(n/2)`.
    pub fn grid_size(rc: &RescaledConstants) -> usize {
        rc.suggested_ntheta(1e-14)
    }

    /// FFT mode of `1/|M_(k,0)|^power` computed on the grid.
    pub fn d_mode_fft(params: &ModelParams, k: u32, n: i64, power: u32) -> Result<f64> {
        let rc = params.rescale(k)?;
        let ng = grid_size(&rc);
        let m = theta::multiplier_m([i64::from(k), 0], params, ng)?;
        let f = m.map(|v| Complex64::new(v.norm_sqr().powf(-(f64::from(power)) / 2.0), 0.0));
        let mode = f.mode(n);
        Ok(mode.re)
    }

    /// The inviscid product functions on the grid:
    /// `X = B d_theta V^- + B^- d_theta V`, `Y_j = B_j U_j^- + B_j^- U_j`.
    pub fn x_fun(params: &ModelParams, k: u32, ng: usize) -> Result<ThetaFun> {
        let kv = [i64::from(k), 0];
        let nkv = [-kv[0], -kv[1]];
        let b = theta::multiplier_b(kv, params, ng)?;
        let bm = theta::multiplier_b(nkv, params, ng)?;
        let v = theta::compute_v(kv, 0.0, params, ng)?;
        let vm = theta::compute_v(nkv, 0.0, params, ng)?;
        Ok(b.mul(&vm.derivative()).add(&bm.mul(&v.derivative())))
    }

    pub fn y_fun(params: &ModelParams, kvec: [i64; 2], ng: usize) -> Result<ThetaFun> {
        let nkv = [-kvec[0], -kvec[1]];
        let b = theta::multiplier_b(kvec, params, ng)?;
        let bm = theta::multiplier_b(nkv, params, ng)?;
        let u = theta::compute_u(kvec, 0.0, params, ng)?;
        let um = theta::compute_u(nkv, 0.0, params, ng)?;
        Ok(b.mul(&um).add(&bm.mul(&u)))
    }

    /// Zero-mean solution of `d_theta^2 W = d_theta Y`, solved spectrally.
    pub fn w_from_y(y: &ThetaFun) -> ThetaFun {
        let n = y.len();
        let mut modes = y.modes();
        for (m, v) in modes.iter_mut().enumerate() {
            let nn = theta::signed_index(m, n);
            if nn == 0 || nn == -(n as i64) / 2 {
                *v = Complex64::ZERO;
            } else {
                // -n^2 w = i n y  =>  w = -i y / n
                *v *= Complex64::new(0.0, -1.0 / nn as f64);
            }
        }
        ThetaFun::from_modes(&modes)
    }

    /// Fully independent double-quadrature oracle for the integral:
    /// build `X`, solve the Poisson equation for `W`, integrate `-4 pi^2 X W`.
    pub fn i_quadrature(params: &ModelParams, k: u32, which: Which) -> Result<f64> {
        let rc = params.rescale(k)?;
        let ng = grid_size(&rc);
        let x = x_fun(params, k, ng)?;
        let kvec = match which {
            Which::K1 => [i64::from(k), 0],
            Which::K2 => [0, i64::from(k)],
        };
        let y = y_fun(params, kvec, ng)?;
        let w = w_from_y(&y);
        let val = x.mul(&w).integral();
        Ok(-4.0 * PI * PI * val.re)
    }

    /// Grid quadrature of the pairing `int (U V^- + U^- V) dtheta` at
    /// `sigma_theta = 0`.
    pub fn pairing_quadrature(params: &ModelParams, k: u32) -> Result<f64> {
        let rc = params.rescale(k)?;
        let ng = grid_size(&rc);
        let kv = [i64::from(k), 0];
        let nkv = [-kv[0], -kv[1]];
        let u = theta::compute_u(kv, 0.0, params, ng)?;
        let um = theta::compute_u(nkv, 0.0, params, ng)?;
        let v = theta::compute_v(kv, 0.0, params, ng)?;
        let vm = theta::compute_v(nkv, 0.0, params, ng)?;
        let val = u.mul(&vm).add(&um.mul(&v)).integral();
        Ok(val.re)
    }

    /// Quadrature of the shifted integral `int d_theta B / (-mu - M) dtheta`.
    pub fn dispersion_quadrature(
        params: &ModelParams,
        k: u32,
        mu: Complex64,
    ) -> Result<Complex64> {
        let rc = params.rescale(k)?;
        let ng = grid_size(&rc);
        let u = theta::compute_u_shifted([i64::from(k), 0], 0.0, params, ng, mu)?;
        Ok(u.integral())
    }

    /// FFT modes of the symmetrized pairing numerator
    /// `(d_theta B (M^-)^2 + conj)/2`; equals [`m_phipsi_mode`] on even modes.
    pub fn m_phipsi_fft(params: &ModelParams, k: u32, n: i64) -> Result<f64> {
        let rc = params.rescale(k)?;
        let ng = grid_size(&rc).min(1024);
        let kv = [i64::from(k), 0];
        let nkv = [-kv[0], -kv[1]];
        let db = theta::multiplier_b_dtheta(kv, params, ng)?;
        let dbm = theta::multiplier_b_dtheta(nkv, params, ng)?;
        let m = theta::multiplier_m(kv, params, ng)?;
        let mm = theta::multiplier_m(nkv, params, ng)?;
        let prod = db.mul(&mm.mul(&mm)).add(&dbm.mul(&m.mul(&m)));
        let mode = prod.mode(n);
        Ok(mode.re / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_for(sigma_k: f64, tau_k: f64) -> (ModelParams, RescaledConstants) {
        let p = ModelParams {
            gamma: 1.0,
            sigma_c: 1.0,
            sigma_x: sigma_k / (2.0 * PI),
            sigma_theta: 0.0,
            lambda: 1.0,
            chi: 0.0,
            tau: tau_k / (2.0 * PI),
        };
        let rc = p.rescale(1).unwrap();
        (p, rc)
    }

    #[test]
    fn d_modes_match_fft() {
        for sigma_k in [0.05, 0.2, 1.0] {
            let (p, rc) = params_for(sigma_k, 0.0);
            for n in -12..=12i64 {
                for power in [2u32, 4] {
                    let closed = d_mode(&rc, n, power).unwrap();
                    let fft = oracle::d_mode_fft(&p, 1, n, power).unwrap();
                    if n % 2 != 0 {
                        assert!(fft.abs() < 1e-12 * d_mode(&rc, 0, power).unwrap());
                        assert_eq!(closed, 0.0);
                    } else {
                        let rel = (closed - fft).abs() / closed.abs();
                        assert!(
                            rel < 1e-10,
                            "sigma_k={sigma_k} n={n} p={power}: {closed} vs {fft} rel={rel}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn d_mode_zero_mode_value() {
        let (_, rc) = params_for(0.3, 0.0);
        let expect = 2.0 * rc.e_k / (rc.lambda_k * rc.lambda_k);
        assert!((d_mode(&rc, 0, 2).unwrap() - expect).abs() < 1e-15 * expect);
    }

    #[test]
    fn beta_limits_and_series() {
        assert!((beta1(1e-9).unwrap() - 0.5).abs() < 1e-12);
        assert!((beta2(1e-9).unwrap() - 0.5).abs() < 1e-12);
        // direct formula vs defining series at s = 0.5
        let s: f64 = 0.5;
        let mut acc = 0.0;
        for m in 2..200u32 {
            acc += s.powi(2 * m as i32 - 4) / f64::from(m);
        }
        assert!((beta1(s).unwrap() - acc).abs() < 1e-12);
        // ordering on a dense grid
        for i in 1..100 {
            let s = i as f64 / 100.0;
            let b1 = beta1(s).unwrap();
            let b2 = beta2(s).unwrap();
            assert!(b1 >= b2 && b2 >= 0.0, "ordering fails at s={s}");
        }
        assert!(beta1(1.0).is_err());
    }

    #[test]
    fn xy_modes_match_fft() {
        for sigma_k in [0.05, 0.2, 1.0] {
            for tau_k in [0.0, 0.1, 1.0, 5.0] {
                let (p, rc) = params_for(sigma_k, tau_k);
                let ng = oracle::grid_size(&rc);
                let x_grid = oracle::x_fun(&p, 1, ng).unwrap();
                let y1_grid = oracle::y_fun(&p, [1, 0], ng).unwrap();
                let y2_grid = oracle::y_fun(&p, [0, 1], ng).unwrap();
                let scale_x = x_grid.norm_inf();
                let scale_y = y1_grid.norm_inf();
                for n in [2i64, 4, 6, 8, 10] {
                    let (x, y1, y2) = xy_modes(&rc, n).unwrap();
                    let xg = x_grid.mode(n);
                    let y1g = y1_grid.mode(n);
                    let y2g = y2_grid.mode(n);
                    assert!(
                        (x - xg).norm() < 1e-8 * scale_x,
                        "x mode {n} sk={sigma_k} tk={tau_k}: {x} vs {xg}"
                    );
                    assert!(
                        (y1 - y1g).norm() < 1e-8 * scale_y,
                        "y1 mode {n} sk={sigma_k} tk={tau_k}: {y1} vs {y1g}"
                    );
                    assert!(
                        (y2 - y2g).norm() < 1e-8 * scale_y,
                        "y2 mode {n} sk={sigma_k} tk={tau_k}: {y2} vs {y2g}"
                    );
                    // conjugation of negative modes
                    assert!((x_grid.mode(-n) - xg.conj()).norm() < 1e-9 * scale_x);
                    // relation between the two axis orientations for n >= 4
                    if n >= 4 {
                        let parity = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
                        assert!((y2 - y1 * parity).norm() < 1e-14 * scale_y);
                    }
                }
                // odd modes vanish on grid
                assert!(y1_grid.mode(3).norm() < 1e-11 * scale_y.max(1e-300));
            }
        }
    }

    #[test]
    fn tau_zero_collapses_a_y() {
        let (_, rc) = params_for(0.4, 0.0);
        let t = table_polys(&rc);
        assert!((TablePolys::eval2(t.a_y, 0.0) - 2.0 * rc.sigma_k * rc.z_abs()).abs() < 1e-14);
    }

    #[test]
    fn i_closed_matches_series_and_quadrature() {
        for sigma_k in [0.05, 0.2, 1.0] {
            for tau_k in [0.0, 0.1, 1.0, 5.0] {
                let (p, rc) = params_for(sigma_k, tau_k);
                for which in [Which::K1, Which::K2] {
                    let closed = i_closed(&rc, which).unwrap().eval(tau_k);
                    let (series, tail) = i_series_oracle(&rc, which, 400).unwrap();
                    let quad = oracle::i_quadrature(&p, 1, which).unwrap();
                    let scale = closed.abs().max(1e-300);
                    assert!(
                        (closed - series).abs() / scale < 1e-8,
                        "closed vs series {which:?} sk={sigma_k} tk={tau_k}: {closed} vs {series}"
                    );
                    assert!(
                        (closed - quad).abs() / scale < 1e-8,
                        "closed vs quad {which:?} sk={sigma_k} tk={tau_k}: {closed} vs {quad}"
                    );
                    assert!(tail < 1e-10 * scale.max(1.0));
                }
            }
        }
    }

    #[test]
    fn series_truncation_geometric() {
        let (_, rc) = params_for(0.2, 1.0);
        let (a, tail_a) = i_series_oracle(&rc, Which::K1, 64).unwrap();
        let (b, _) = i_series_oracle(&rc, Which::K1, 68).unwrap();
        // the dropped terms are part of the remainder estimated at the
        // shorter truncation
        assert!((a - b).abs() <= tail_a.max(1e-14));
    }

    #[test]
    fn i_polys_cubic_with_matching_leading_signs() {
        for sigma_k in [0.02, 0.05, 0.1] {
            let (_, rc) = params_for(sigma_k, 0.0);
            let i1 = i_closed(&rc, Which::K1).unwrap();
            let i2 = i_closed(&rc, Which::K2).unwrap();
            assert_eq!(i1.degree(1e-12), 3);
            let sum = i1.add(&i2);
            let diff = i1.sub(&i2);
            // leading coefficients share their sign as sigma_k -> 0
            assert!(i1.c[3] * sum.c[3] > 0.0);
            assert!(i1.c[3] * diff.c[3] > 0.0);
        }
    }

    #[test]
    fn pairing_closed_matches_quadrature() {
        for sigma_k in [0.05, 0.2, 1.0] {
            for tau_k in [0.0, 0.1, 1.0, 5.0] {
                let (p, rc) = params_for(sigma_k, tau_k);
                let closed = pairing_phi_psi_closed(&rc);
                let quad = oracle::pairing_quadrature(&p, 1).unwrap();
                let modes = pairing_from_modes(&rc).unwrap();
                assert!(
                    (closed - quad).abs() < 1e-8 * closed.abs(),
                    "pairing sk={sigma_k} tk={tau_k}: {closed} vs {quad}"
                );
                assert!((closed - modes).abs() < 1e-10 * closed.abs());
            }
        }
        // tau = 0 leaves only the p0 term; positivity for small sigma_theta
        let (_, rc) = params_for(0.3, 0.0);
        assert!(pairing_phi_psi_closed(&rc) > 0.0);
    }

    #[test]
    fn m_phipsi_matches_fft() {
        for tau_k in [0.0, 0.7, 3.0] {
            let (p, rc) = params_for(0.25, tau_k);
            let scale = m_phipsi_mode(&rc, 0).abs().max(1e-300);
            for n in -8..=8i64 {
                let fft = oracle::m_phipsi_fft(&p, 1, n).unwrap();
                let closed = m_phipsi_mode(&rc, n);
                if [0i64, 2, -2, 4, -4].contains(&n) {
                    assert!(
                        (fft - closed).abs() < 1e-10 * scale,
                        "mode {n} tk={tau_k}: {closed} vs {fft}"
                    );
                } else {
                    assert!(fft.abs() < 1e-12 * scale, "mode {n} should vanish, got {fft}");
                }
            }
        }
    }

    #[test]
    fn dispersion_reduces_to_integral_at_zero() {
        let (p, rc) = params_for(0.3, 0.8);
        let j0 = dispersion_j_inviscid(&rc, Complex64::ZERO).unwrap();
        let i0 = theta::integral_u_inviscid(1, &p).unwrap();
        assert!((j0.re - i0).abs() < 1e-12 * i0.abs());
        assert!(j0.im.abs() < 1e-14);
    }

    #[test]
    fn dispersion_matches_quadrature() {
        let (p, rc) = params_for(0.3, 0.8);
        for mu in [
            Complex64::new(0.05, 0.0),
            Complex64::new(0.3, 0.2),
            Complex64::new(0.0, 0.5),
            Complex64::new(1.0, -0.7),
        ] {
            let closed = dispersion_j_inviscid(&rc, mu).unwrap();
            let quad = oracle::dispersion_quadrature(&p, 1, mu).unwrap();
            assert!(
                (closed - quad).norm() < 1e-10 * closed.norm(),
                "mu={mu}: {closed} vs {quad}"
            );
        }
        // rejects mu beyond the resolvent boundary
        assert!(dispersion_j_inviscid(&rc, Complex64::new(-10.0, 0.0)).is_err());
    }

    #[test]
    fn dispersion_decreasing_along_positive_real_axis() {
        let (_, rc) = params_for(0.3, 0.0);
        let h = 1e-4;
        let j0 = dispersion_j_inviscid(&rc, Complex64::new(0.0, 0.0)).unwrap();
        let j1 = dispersion_j_inviscid(&rc, Complex64::new(h, 0.0)).unwrap();
        assert!((j1.re - j0.re) / h < 0.0);
    }
}
