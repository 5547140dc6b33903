//! Bifurcation point, cubic normal-form coefficients, anticipation
//! thresholds, and branch criticality.
//!
//! All computations here live in partial positional Fourier space: the few
//! active `x`-modes are tracked explicitly and each carries an angular
//! profile. This keeps the quadratic-correction solves one-dimensional.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{self, Which};
use crate::linalg::CubicPoly;
use crate::params::{ModelParams, RescaledConstants};
use crate::theta::{self, ThetaFun};

/// A real field represented by its sparse positional Fourier modes; the map
/// holds every nonzero mode (negative modes stored explicitly).
#[derive(Debug, Clone)]
pub struct ModeField {
    n_theta: usize,
    modes: BTreeMap<(i64, i64), ThetaFun>,
}

impl ModeField {
    pub fn new(n_theta: usize) -> Self {
        ModeField {
            n_theta,
            modes: BTreeMap::new(),
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn insert(&mut self, kvec: (i64, i64), profile: ThetaFun) {
        assert_eq!(profile.len(), self.n_theta);
        self.modes.insert(kvec, profile);
    }

    pub fn get(&self, kvec: (i64, i64)) -> Option<&ThetaFun> {
        self.modes.get(&kvec)
    }

    pub fn modes(&self) -> impl Iterator<Item = (&(i64, i64), &ThetaFun)> {
        self.modes.iter()
    }

    /// Hermitian symmetry defect: a real field satisfies
    /// `F_x(f)_{-k} = conj(F_x(f)_k)`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (&(a, b), prof) in &self.modes {
            match self.modes.get(&(-a, -b)) {
                None => worst = worst.max(prof.norm_inf()),
                Some(conj_prof) => {
                    worst = worst.max(prof.conj().sub(conj_prof).norm_inf());
                }
            }
        }
        worst
    }

    pub fn add(&self, other: &ModeField) -> ModeField {
        let mut out = self.clone();
        for (&k, prof) in &other.modes {
            match out.modes.get_mut(&k) {
                Some(p) => *p = p.add(prof),
                None => {
                    out.modes.insert(k, prof.clone());
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> ModeField {
        let mut out = ModeField::new(self.n_theta);
        for (&k, prof) in &self.modes {
            out.insert(k, prof.scale(s));
        }
        out
    }

    /// Pointwise (in `x`) product: sparse convolution over positional modes,
    /// pointwise multiplication of the angular profiles.
    pub fn product(&self, other: &ModeField) -> ModeField {
        let mut out = ModeField::new(self.n_theta);
        for (&(a1, b1), p1) in &self.modes {
            for (&(a2, b2), p2) in &other.modes {
                let key = (a1 + a2, b1 + b2);
                let prod = p1.mul(p2);
                match out.modes.get_mut(&key) {
                    Some(p) => *p = p.add(&prod),
                    None => {
                        out.modes.insert(key, prod);
                    }
                }
            }
        }
        out
    }

    pub fn dtheta(&self) -> ModeField {
        let mut out = ModeField::new(self.n_theta);
        for (&k, prof) in &self.modes {
            out.insert(k, prof.derivative());
        }
        out
    }

    /// The interaction operator: mode `l` maps to `B_l(theta) int profile dtheta`;
    /// the `x`-constant mode is annihilated.
    pub fn apply_b(&self, params: &ModelParams) -> Result<ModeField> {
        let mut out = ModeField::new(self.n_theta);
        for (&k, prof) in &self.modes {
            if k == (0, 0) {
                continue;
            }
            let b = theta::multiplier_b([k.0, k.1], params, self.n_theta)?;
            out.insert(k, b.scale(prof.integral()));
        }
        Ok(out)
    }

    /// `L^2` pairing `<self, other> = sum_l int conj(self_l) other_l dtheta`.
    pub fn pair(&self, other: &ModeField) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (&k, prof) in &self.modes {
            if let Some(q) = other.modes.get(&k) {
                acc += prof.conj().mul(q).integral();
            }
        }
        acc
    }

    /// The axis-exchange (swap) map in mode space:
    /// mode `(-b, -a)` of the image is `profile(-theta - pi/2)`.
    pub fn swap(&self) -> ModeField {
        let n = self.n_theta;
        assert!(n % 4 == 0, "swap requires the angular grid divisible by 4");
        let mut out = ModeField::new(n);
        for (&(a, b), prof) in &self.modes {
            let vals: Vec<Complex64> = (0..n)
                .map(|j| {
                    let src = (-(j as i64) - (n as i64) / 4).rem_euclid(n as i64) as usize;
                    prof.values()[src]
                })
                .collect();
            out.insert((-b, -a), ThetaFun::new(vals));
        }
        out
    }

    /// Apply the linearized operator about the uniform state at interaction
    /// strength `chi`: per-mode banded part plus the rank-one interaction.
    pub fn apply_linearized(&self, params: &ModelParams, chi: f64, sigma_theta: f64) -> Result<ModeField> {
        let mut out = ModeField::new(self.n_theta);
        for (&k, prof) in &self.modes {
            if k == (0, 0) {
                out.insert(k, prof.derivative().derivative().scale(sigma_theta.into()));
                continue;
            }
            let m = theta::multiplier_m([k.0, k.1], params, self.n_theta)?;
            let db = theta::multiplier_b_dtheta([k.0, k.1], params, self.n_theta)?;
            let banded = m
                .mul(prof)
                .scale((-1.0).into())
                .add(&prof.derivative().derivative().scale(sigma_theta.into()));
            let rank_one = db.scale(prof.integral() * (-chi / (2.0 * PI)));
            out.insert(k, banded.add(&rank_one));
        }
        Ok(out)
    }

    pub fn norm_inf(&self) -> f64 {
        self.modes.values().map(|p| p.norm_inf()).fold(0.0, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        self.modes
            .values()
            .map(|p| p.norm_l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Zero-mean antiderivative-of-antiderivative: solves `d2/dtheta2 u = f`
/// for zero-mean `f`, returning the zero-mean solution.
fn inv_dtheta2(f: &ThetaFun) -> Result<ThetaFun> {
    let n = f.len();
    let mut modes = f.modes();
    let scale = f.norm_inf().max(1e-300);
    if modes[0].norm() > 1e-10 * scale {
        return Err(Error::numerical(
            "inverse angular Laplacian applied to a non-zero-mean function",
        ));
    }
    for (m, v) in modes.iter_mut().enumerate() {
        let nn = theta::signed_index(m, n);
        if nn == 0 || nn == -(n as i64) / 2 {
            *v = Complex64::ZERO;
        } else {
            *v /= -((nn * nn) as f64);
        }
    }
    Ok(ThetaFun::from_modes(&modes))
}

/// Bifurcation point `chi_k(sigma_theta) = 2 pi / int U dtheta`, with the
/// integral by quadrature at positive angular diffusion and the closed form
/// in the inviscid limit.
pub fn chi_k(params: &ModelParams, k: u32, sigma_theta: f64) -> Result<f64> {
    let rc = params.rescale(k)?;
    let i0 = theta::integral_u_inviscid(k, params)?;
    if sigma_theta == 0.0 {
        return Ok(2.0 * PI / i0);
    }
    let n = rc.suggested_ntheta(1e-14);
    let u = theta::compute_u([i64::from(k), 0], sigma_theta, params, n)?;
    let int = u.integral();
    if int.im.abs() > 1e-9 * int.norm() {
        return Err(Error::numerical("eigenprofile integral acquired an imaginary part"));
    }
    if (int.re - i0).abs() >= i0.abs() {
        return Err(Error::numerical(format!(
            "sigma_theta = {sigma_theta} too large: the eigenprofile integral moved by more \
             than 100% of its inviscid value"
        )));
    }
    Ok(2.0 * PI / int.re)
}

/// Everything the coefficient assembly needs at one `(k, sigma_theta)`.
pub struct ReductionContext {
    pub params: ModelParams,
    pub k: u32,
    pub sigma_theta: f64,
    pub n_theta: usize,
    pub chi: f64,
    /// `1 / <phi, psi>`
    pub n_k: f64,
    pub u_k1: ThetaFun,
    pub u_k1_neg: ThetaFun,
    pub u_k2: ThetaFun,
    pub u_k2_neg: ThetaFun,
    pub v_k1: ThetaFun,
    pub v_k1_neg: ThetaFun,
    pub v_k2: ThetaFun,
    pub v_k2_neg: ThetaFun,
}

impl ReductionContext {
    pub fn new(params: &ModelParams, k: u32, sigma_theta: f64) -> Result<Self> {
        if sigma_theta <= 0.0 {
            return Err(Error::validation(
                "the reduction requires sigma_theta > 0 (limits are reported separately)",
            ));
        }
        let rc = params.rescale(k)?;
        let n_theta = rc.suggested_ntheta(1e-14);
        let kk = i64::from(k);
        let chi = chi_k(params, k, sigma_theta)?;
        let u_k1 = theta::compute_u([kk, 0], sigma_theta, params, n_theta)?;
        let u_k1_neg = theta::compute_u([-kk, 0], sigma_theta, params, n_theta)?;
        let u_k2 = theta::compute_u([0, kk], sigma_theta, params, n_theta)?;
        let u_k2_neg = theta::compute_u([0, -kk], sigma_theta, params, n_theta)?;
        let v_k1 = theta::compute_v([kk, 0], sigma_theta, params, n_theta)?;
        let v_k1_neg = theta::compute_v([-kk, 0], sigma_theta, params, n_theta)?;
        let v_k2 = theta::compute_v([0, kk], sigma_theta, params, n_theta)?;
        let v_k2_neg = theta::compute_v([0, -kk], sigma_theta, params, n_theta)?;
        let pairing = u_k1.mul(&v_k1_neg).add(&u_k1_neg.mul(&v_k1)).integral();
        if pairing.im.abs() > 1e-9 * pairing.norm().max(1e-300) {
            return Err(Error::numerical("kernel/cokernel pairing is not real"));
        }
        let scale = u_k1.norm_l2() * v_k1.norm_l2();
        if pairing.re.abs() < 1e-10 * scale {
            return Err(Error::numerical(
                "kernel/cokernel pairing vanished: sigma_theta beyond the positivity regime",
            ));
        }
        Ok(ReductionContext {
            params: *params,
            k,
            sigma_theta,
            n_theta,
            chi,
            n_k: 1.0 / pairing.re,
            u_k1,
            u_k1_neg,
            u_k2,
            u_k2_neg,
            v_k1,
            v_k1_neg,
            v_k2,
            v_k2_neg,
        })
    }

    pub fn phi(&self, which: Which) -> ModeField {
        let kk = i64::from(self.k);
        let mut f = ModeField::new(self.n_theta);
        match which {
            Which::K1 => {
                f.insert((kk, 0), self.u_k1.clone());
                f.insert((-kk, 0), self.u_k1_neg.clone());
            }
            Which::K2 => {
                f.insert((0, kk), self.u_k2.clone());
                f.insert((0, -kk), self.u_k2_neg.clone());
            }
        }
        f
    }

    pub fn psi(&self, which: Which) -> ModeField {
        let kk = i64::from(self.k);
        let mut f = ModeField::new(self.n_theta);
        match which {
            Which::K1 => {
                f.insert((kk, 0), self.v_k1.clone());
                f.insert((-kk, 0), self.v_k1_neg.clone());
            }
            Which::K2 => {
                f.insert((0, kk), self.v_k2.clone());
                f.insert((0, -kk), self.v_k2_neg.clone());
            }
        }
        f
    }

    /// `K(chi, sigma) = 1 - (chi/2pi) int U^l dtheta` for an off-kernel mode.
    pub fn k_guard(&self, kvec: [i64; 2]) -> Result<f64> {
        let u = theta::compute_u(kvec, self.sigma_theta, &self.params, self.n_theta)?;
        let int = u.integral();
        let k_val = 1.0 - self.chi / (2.0 * PI) * int.re;
        if k_val.abs() < 1e-8 {
            return Err(Error::numerical(format!(
                "mode resonance: K at mode {kvec:?} is {k_val:.3e} (parameters too close to a \
                 secondary bifurcation)"
            )));
        }
        Ok(k_val)
    }

    /// Inverse of the linearized operator applied to a field with no modes on
    /// the critical sphere (mode-preserving inversion).
    pub fn invert_linearized(&self, g: &ModeField) -> Result<ModeField> {
        let k2 = i64::from(self.k) * i64::from(self.k);
        let mut out = ModeField::new(self.n_theta);
        for (&kv, prof) in g.modes() {
            if kv == (0, 0) {
                let w = inv_dtheta2(prof)?;
                out.insert(kv, w.scale((1.0 / self.sigma_theta).into()));
                continue;
            }
            if kv.0 * kv.0 + kv.1 * kv.1 == k2 {
                return Err(Error::validation(
                    "inversion requested on the critical mode sphere",
                ));
            }
            let kvec = [kv.0, kv.1];
            let r = theta::resolvent_solve(kvec, self.sigma_theta, prof, &self.params)?;
            let k_val = self.k_guard(kvec)?;
            let u = theta::compute_u(kvec, self.sigma_theta, &self.params, self.n_theta)?;
            let coef = r.integral() * (self.chi / (2.0 * PI * k_val));
            out.insert(kv, r.add(&u.scale(coef)));
        }
        Ok(out)
    }
}

/// The quadratic interaction source `d_theta(B[phi_i] phi_j + B[phi_j] phi_i)`.
pub fn quadratic_source(ctx: &ReductionContext, i: Which, j: Which) -> Result<ModeField> {
    let phi_i = ctx.phi(i);
    let phi_j = ctx.phi(j);
    let b_i = phi_i.apply_b(&ctx.params)?;
    let b_j = phi_j.apply_b(&ctx.params)?;
    Ok(b_i.product(&phi_j).add(&b_j.product(&phi_i)).dtheta())
}

/// The second-order correction `A_ij = chi L^{-1} (quadratic source)`.
pub fn compute_a_ij(ctx: &ReductionContext, i: Which, j: Which) -> Result<ModeField> {
    let g = quadratic_source(ctx, i, j)?;
    Ok(ctx.invert_linearized(&g)?.scale(ctx.chi.into()))
}

/// The three cubic normal-form coefficients at finite `sigma_theta`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn real_part(name: &str, z: Complex64, scale: f64) -> Result<f64> {
    if z.im.abs() > 1e-7 * scale.max(z.norm()).max(1e-300) {
        return Err(Error::numerical(format!(
            "{name} should be real, got imaginary part {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `a = -(1/2pi) <psi, d_theta B[phi]>`.
pub fn coeff_a(ctx: &ReductionContext) -> Result<f64> {
    let psi = ctx.psi(Which::K1);
    let term = ctx.phi(Which::K1).apply_b(&ctx.params)?.dtheta();
    let val = psi.pair(&term) * Complex64::from(-1.0 / (2.0 * PI));
    real_part("coefficient a", val, term.norm_l2())
}

/// `b = (chi/2) <psi, d_theta(A11 B[phi1] + phi1 B[A11])>`.
pub fn coeff_b(ctx: &ReductionContext, a11: &ModeField) -> Result<f64> {
    let psi = ctx.psi(Which::K1);
    let phi1 = ctx.phi(Which::K1);
    let h = a11
        .product(&phi1.apply_b(&ctx.params)?)
        .add(&phi1.product(&a11.apply_b(&ctx.params)?))
        .dtheta();
    let val = psi.pair(&h) * Complex64::from(ctx.chi / 2.0);
    real_part("coefficient b", val, h.norm_l2() * ctx.chi)
}

/// `c = (chi/2) <psi, d_theta(A22 B[phi1] + phi1 B[A22])>
///    + chi <psi, d_theta(phi2 B[A12] + A12 B[phi2])>`.
pub fn coeff_c(ctx: &ReductionContext, a22: &ModeField, a12: &ModeField) -> Result<f64> {
    let psi = ctx.psi(Which::K1);
    let phi1 = ctx.phi(Which::K1);
    let phi2 = ctx.phi(Which::K2);
    let h1 = a22
        .product(&phi1.apply_b(&ctx.params)?)
        .add(&phi1.product(&a22.apply_b(&ctx.params)?))
        .dtheta();
    let h2 = phi2
        .product(&a12.apply_b(&ctx.params)?)
        .add(&a12.product(&phi2.apply_b(&ctx.params)?))
        .dtheta();
    let val = psi.pair(&h1) * Complex64::from(ctx.chi / 2.0)
        + psi.pair(&h2) * Complex64::from(ctx.chi);
    real_part("coefficient c", val, (h1.norm_l2() + h2.norm_l2()) * ctx.chi)
}

/// The swapped route to `c`: pair against the second cokernel direction with
/// the roles of the axes exchanged. Must agree with [`coeff_c`].
pub fn coeff_c_swapped(ctx: &ReductionContext, a11: &ModeField, a12: &ModeField) -> Result<f64> {
    let psi2 = ctx.psi(Which::K2);
    let phi1 = ctx.phi(Which::K1);
    let phi2 = ctx.phi(Which::K2);
    let h1 = a11
        .product(&phi2.apply_b(&ctx.params)?)
        .add(&phi2.product(&a11.apply_b(&ctx.params)?))
        .dtheta();
    let h2 = phi1
        .product(&a12.apply_b(&ctx.params)?)
        .add(&a12.product(&phi1.apply_b(&ctx.params)?))
        .dtheta();
    let val = psi2.pair(&h1) * Complex64::from(ctx.chi / 2.0)
        + psi2.pair(&h2) * Complex64::from(ctx.chi);
    real_part("coefficient c (swapped)", val, (h1.norm_l2() + h2.norm_l2()) * ctx.chi)
}

pub fn coefficients(params: &ModelParams, k: u32, sigma_theta: f64) -> Result<Coefficients> {
    let ctx = ReductionContext::new(params, k, sigma_theta)?;
    let a11 = compute_a_ij(&ctx, Which::K1, Which::K1)?;
    let a22 = compute_a_ij(&ctx, Which::K2, Which::K2)?;
    let a12 = compute_a_ij(&ctx, Which::K1, Which::K2)?;
    Ok(Coefficients {
        a: coeff_a(&ctx)?,
        b: coeff_b(&ctx, &a11)?,
        c: coeff_c(&ctx, &a22, &a12)?,
    })
}

/// Positive roots of the three threshold cubics, both in rescaled `tau_k`
/// units and as physical anticipation lengths (divided by `2 pi k`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TauThresholds {
    pub tau_lambda: f64,
    pub tau_xi: f64,
    pub tau_bmc: f64,
    pub tau_k_b: f64,
    pub tau_k_bpc: f64,
    pub tau_k_bmc: f64,
}

pub fn tau_thresholds(rc: &RescaledConstants, _params: &ModelParams) -> Result<TauThresholds> {
    let i1 = integrals::i_closed(rc, Which::K1)?;
    let i2 = integrals::i_closed(rc, Which::K2)?;
    let root = |p: &CubicPoly| p.unique_positive_root();
    let tau_k_b = root(&i1)?;
    let tau_k_bpc = root(&i1.add(&i2))?;
    let tau_k_bmc = root(&i1.sub(&i2))?;
    let denom = 2.0 * PI * f64::from(rc.k);
    Ok(TauThresholds {
        tau_lambda: tau_k_b / denom,
        tau_xi: tau_k_bpc / denom,
        tau_bmc: tau_k_bmc / denom,
        tau_k_b,
        tau_k_bpc,
        tau_k_bmc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

/// Full per-wave-number bifurcation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub k: u32,
    pub chi_k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Closed-form singular parts: the limits of `sigma_theta * b` and
    /// `sigma_theta * c` evaluated at the model's `tau_k`.
    pub b_minus1: f64,
    pub c_minus1: f64,
    pub tau_lambda: f64,
    pub tau_xi: f64,
    pub tau_bmc: f64,
    pub lane_criticality: Criticality,
    pub spot_criticality: Criticality,
    pub sigma_theta_used: f64,
}

/// Branch criticality from the signs of the cubic coefficients; labels turn
/// `Degenerate` when `tau` sits numerically on a threshold.
pub fn classify_criticality(b: f64, c: f64, tau: f64, th: &TauThresholds) -> (Criticality, Criticality) {
    let near = |t: f64| (tau - t).abs() < 1e-9 * t.abs().max(1.0);
    let lane = if near(th.tau_lambda) {
        Criticality::Degenerate
    } else if b > 0.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    };
    let spot = if near(th.tau_xi) {
        Criticality::Degenerate
    } else if b + c > 0.0 {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    };
    (lane, spot)
}

pub fn bifurcation_report(params: &ModelParams, k: u32, sigma_theta: f64) -> Result<BifurcationReport> {
    let rc = params.rescale(k)?;
    let coeffs = coefficients(params, k, sigma_theta)?;
    let th = tau_thresholds(&rc, params)?;
    let (lane, spot) = classify_criticality(coeffs.b, coeffs.c, params.tau, &th);
    Ok(BifurcationReport {
        k,
        chi_k: chi_k(params, k, sigma_theta)?,
        a: coeffs.a,
        b: coeffs.b,
        c: coeffs.c,
        b_minus1: integrals::i_closed(&rc, Which::K1)?.eval(rc.tau_k),
        c_minus1: integrals::i_closed(&rc, Which::K2)?.eval(rc.tau_k),
        tau_lambda: th.tau_lambda,
        tau_xi: th.tau_xi,
        tau_bmc: th.tau_bmc,
        lane_criticality: lane,
        spot_criticality: spot,
        sigma_theta_used: sigma_theta,
    })
}

/// Leading-order branch amplitudes at interaction strength `chi`:
/// `chi - chi_k = (b/a) s^2` on the lane branch and `((b+c)/a) s^2` on the
/// spot branch. `None` when the branch lives on the other side of onset.
pub fn normal_form_amplitude(report: &BifurcationReport, chi: f64) -> (Option<f64>, Option<f64>) {
    let dchi = chi - report.chi_k;
    let amp = |w: f64| {
        if w == 0.0 {
            return None;
        }
        let s2 = report.a * dchi / w;
        if s2 >= 0.0 {
            Some(s2.sqrt())
        } else {
            None
        }
    };
    (amp(report.b), amp(report.b + report.c))
}
