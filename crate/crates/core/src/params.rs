//! Model parameters and per-wave-number derived constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven physical parameters of the model, in nondimensional form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Chemical decay rate (> 0).
    pub gamma: f64,
    /// Chemical diffusivity (> 0).
    pub sigma_c: f64,
    /// Positional diffusivity (> 0).
    pub sigma_x: f64,
    /// Angular diffusivity (>= 0).
    pub sigma_theta: f64,
    /// Self-propulsion speed (> 0).
    pub lambda: f64,
    /// Interaction strength (the bifurcation parameter).
    pub chi: f64,
    /// Anticipation length (>= 0).
    pub tau: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            gamma: 1.0,
            sigma_c: 1.0,
            sigma_x: 0.03,
            sigma_theta: 1e-3,
            lambda: 1.0,
            chi: 0.0,
            tau: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("gamma", self.gamma),
            ("sigma_c", self.sigma_c),
            ("sigma_x", self.sigma_x),
            ("lambda", self.lambda),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [("sigma_theta", self.sigma_theta), ("tau", self.tau)];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.chi.is_finite() {
            return Err(Error::validation("chi must be finite"));
        }
        Ok(())
    }

    /// Fourier multiplier of the inverse elliptic operator at mode `kvec`:
    /// `gamma + 4 pi^2 |kvec|^2 sigma_c`.
    pub fn elliptic_multiplier(&self, kvec: [i64; 2]) -> f64 {
        let k2 = (kvec[0] * kvec[0] + kvec[1] * kvec[1]) as f64;
        self.gamma + 4.0 * PI * PI * k2 * self.sigma_c
    }

    /// Parse a flat `key = value` configuration file (`#` starts a comment).
    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut p = ModelParams::default();
        p.apply_overrides(&parse_kv_lines(&text)?)?;
        p.validate()?;
        Ok(p)
    }

    /// Apply `key=value` overrides (the CLI `--param` mechanism).
    pub fn apply_overrides(&mut self, kv: &BTreeMap<String, f64>) -> Result<()> {
        for (key, &val) in kv {
            match key.as_str() {
                "gamma" => self.gamma = val,
                "sigma_c" => self.sigma_c = val,
                "sigma_x" => self.sigma_x = val,
                "sigma_theta" => self.sigma_theta = val,
                "lambda" => self.lambda = val,
                "chi" => self.chi = val,
                "tau" => self.tau = val,
                other => {
                    return Err(Error::validation(format!(
                        "unknown parameter key '{other}' (expected one of gamma, sigma_c, \
                         sigma_x, sigma_theta, lambda, chi, tau)"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Derived constants for wave number `k >= 1`.
    pub fn rescale(&self, k: u32) -> Result<RescaledConstants> {
        RescaledConstants::new(self, k)
    }
}

pub fn parse_kv_lines(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("line {}: expected key=value", lineno + 1)))?;
        let v: f64 = value.trim().parse().map_err(|_| {
            Error::validation(format!("line {}: cannot parse '{}' as a number", lineno + 1, value))
        })?;
        map.insert(key.trim().to_string(), v);
    }
    Ok(map)
}

/// Per-wave-number rescaled constants and the roots of the resolvent
/// denominator used by every closed-form integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledConstants {
    pub k: u32,
    /// `2 pi lambda k`
    pub lambda_k: f64,
    /// `2 pi sigma_x k / lambda`
    pub sigma_k: f64,
    /// `2 pi tau k`
    pub tau_k: f64,
    /// `gamma + 4 pi^2 k^2 sigma_c`
    pub e_elliptic: f64,
    /// Inner root of `z^2 + 2(2 sigma_k^2 + 1) z + 1`, in (-1, 0).
    pub z_in: f64,
    /// Outer root, < -1; `z_in * z_out = 1`.
    pub z_out: f64,
    /// `2 / (z_in - z_out) = 1 / sqrt((2 sigma_k^2 + 1)^2 - 1) > 0`
    pub e_k: f64,
    /// `2 (1 + |z_in|^2) / (1 - |z_in|^2) > 0`
    pub f_k: f64,
}

impl RescaledConstants {
    pub fn new(params: &ModelParams, k: u32) -> Result<Self> {
        params.validate()?;
        if k == 0 {
            return Err(Error::validation(
                "wave number k must be >= 1 (the zero mode is handled separately)",
            ));
        }
        let kf = f64::from(k);
        let sigma_k = 2.0 * PI * params.sigma_x * kf / params.lambda;
        Ok(Self::from_sigma_k(params, k, sigma_k))
    }

    /// Build the constants from `sigma_k` directly; shared with the
    /// shifted-parameter variants used by the dispersion relation.
    fn from_sigma_k(params: &ModelParams, k: u32, sigma_k: f64) -> Self {
        let kf = f64::from(k);
        let q = 2.0 * sigma_k * sigma_k + 1.0;
        let disc = (q * q - 1.0).sqrt();
        // z_in = -q + disc suffers cancellation as sigma_k -> 0; use the
        // reciprocal-of-outer-root form instead.
        let z_out = -(q + disc);
        let z_in = 1.0 / z_out;
        RescaledConstants {
            k,
            lambda_k: 2.0 * PI * params.lambda * kf,
            sigma_k,
            tau_k: 2.0 * PI * params.tau * kf,
            e_elliptic: params.elliptic_multiplier([i64::from(k), 0]),
            z_in,
            z_out,
            e_k: 1.0 / disc,
            f_k: 2.0 * (1.0 + z_in * z_in) / (1.0 - z_in * z_in),
        }
    }

    /// `|z_in|`, the decay ratio (per two Fourier modes) of the resolvent kernels.
    pub fn z_abs(&self) -> f64 {
        -self.z_in
    }

    /// Smallest power-of-two angular grid resolving functions whose modes decay
    /// like `|z_in|^(|n|/2)` down to `tol`, clamped to `[64, 8192]`.
    pub fn suggested_ntheta(&self, tol: f64) -> usize {
        let rate = -self.z_abs().ln();
        let needed = if rate <= 0.0 {
            8192.0
        } else {
            4.0 * (-tol.ln()) / rate
        };
        let mut n = 64usize;
        while (n as f64) < needed && n < 8192 {
            n *= 2;
        }
        n
    }
}

/// Empirical substitute for the unquantified smallness constant: checks
/// `sigma_k <= sigma_k_max` and that the three threshold cubics have a unique
/// positive real root each, correctly ordered, before asymptotic
/// classifications are trusted.
pub fn check_smallness(rc: &RescaledConstants, params: &ModelParams, sigma_k_max: f64) -> Result<()> {
    if rc.sigma_k > sigma_k_max {
        return Err(Error::validation(format!(
            "sigma_k = {:.6} exceeds the smallness threshold {sigma_k_max}",
            rc.sigma_k
        )));
    }
    let th = crate::normal_form::tau_thresholds(rc, params)?;
    if !(th.tau_xi < th.tau_lambda && th.tau_lambda < th.tau_bmc) {
        return Err(Error::numerical(format!(
            "threshold ordering violated: tau_xi={:.6}, tau_lambda={:.6}, tau_bmc={:.6}",
            th.tau_xi, th.tau_lambda, th.tau_bmc
        )));
    }
    Ok(())
}

/// Constants for the shifted denominator `z^2 + 2(2 s^2 + 1) z + 1` with a
/// complex `s = sigma_k + mu / lambda_k`; used by the inviscid dispersion
/// integral. Returns `(z_in(mu), e_k(mu))` on the principal branch.
pub fn shifted_roots(rc: &RescaledConstants, mu: num_complex::Complex64) -> Result<(num_complex::Complex64, num_complex::Complex64)> {
    let s = num_complex::Complex64::new(rc.sigma_k, 0.0) + mu / rc.lambda_k;
    let q = 2.0 * s * s + 1.0;
    let disc2 = q * q - 1.0;
    if disc2.norm() < 1e-14 {
        return Err(Error::numerical(
            "mu lies at the branch singularity of the dispersion integral",
        ));
    }
    let disc = disc2.sqrt();
    // Principal sqrt keeps Re(disc) >= 0, so -(q + disc) is the outer root
    // whenever Re(q) > 0 (guaranteed for Re mu > -lambda_k sigma_k).
    let z_out = -(q + disc);
    let z_in = 1.0 / z_out;
    let e_k = 2.0 / (z_in - z_out);
    Ok((z_in, e_k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_direct_substitution() {
        // sigma_x = lambda / (2 pi) makes sigma_k = 1 at k = 1.
        let p = ModelParams {
            sigma_x: 1.0 / (2.0 * PI),
            lambda: 1.0,
            ..ModelParams::default()
        };
        let rc = p.rescale(1).unwrap();
        assert!((rc.sigma_k - 1.0).abs() < 1e-14);
        // 2 sigma_k^2 + 1 = 3: z_in = -3 + 2 sqrt(2), e_k = 1 / (2 sqrt(2)).
        assert!((rc.z_in - (-3.0 + 2.0 * 2.0_f64.sqrt())).abs() < 1e-14);
        assert!((rc.e_k - 1.0 / (2.0 * 2.0_f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn root_product_is_one() {
        let p = ModelParams::default();
        for k in [1u32, 2, 3, 7] {
            let rc = p.rescale(k).unwrap();
            assert!((rc.z_in * rc.z_out - 1.0).abs() < 1e-12);
            assert!(rc.z_in > -1.0 && rc.z_in < 0.0);
            assert!(rc.e_k > 0.0);
            assert!((rc.e_k - 2.0 / (rc.z_in - rc.z_out)).abs() < 1e-12 * rc.e_k.abs());
        }
    }

    #[test]
    fn rejects_k_zero() {
        assert!(ModelParams::default().rescale(0).is_err());
    }

    #[test]
    fn elliptic_multiplier_values() {
        let p = ModelParams {
            gamma: 1.0,
            sigma_c: 1.0,
            ..ModelParams::default()
        };
        assert_eq!(p.elliptic_multiplier([0, 0]), 1.0);
        assert!((p.elliptic_multiplier([1, 0]) - (1.0 + 4.0 * PI * PI)).abs() < 1e-13);
        // doubling |kvec| adds 12 pi^2 |kvec|^2 sigma_c
        let m1 = p.elliptic_multiplier([1, 0]);
        let m2 = p.elliptic_multiplier([2, 0]);
        assert!((m2 - m1 - 12.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rescale_homogeneous_in_sigma_x_lambda() {
        let p = ModelParams::default();
        for factor in [0.5, 2.0, 17.0] {
            let q = ModelParams {
                sigma_x: p.sigma_x * factor,
                lambda: p.lambda * factor,
                ..p
            };
            let a = p.rescale(3).unwrap();
            let b = q.rescale(3).unwrap();
            assert!((a.sigma_k - b.sigma_k).abs() < 1e-14 * a.sigma_k.max(1.0));
        }
    }

    #[test]
    fn z_in_monotone_on_dyadic_grid() {
        // z_in increases toward 0 as sigma_k grows; tends to -1 as sigma_k -> 0.
        let p = ModelParams::default();
        let mut prev = -1.0;
        for i in -20..=6 {
            let sigma_k = 2.0_f64.powi(i);
            let q = ModelParams {
                sigma_x: sigma_k * p.lambda / (2.0 * PI),
                ..p
            };
            let rc = q.rescale(1).unwrap();
            assert!(rc.z_in > prev, "z_in not increasing at sigma_k = {sigma_k}");
            prev = rc.z_in;
        }
        let tiny = ModelParams {
            sigma_x: 1e-9,
            ..p
        };
        assert!((tiny.rescale(1).unwrap().z_in + 1.0).abs() < 1e-4);
    }

    #[test]
    fn config_parsing_and_overrides() {
        let text = "gamma = 2.0\nsigma_x=0.01 # positional\n\n# comment\ntau = 0.5\n";
        let kv = parse_kv_lines(text).unwrap();
        let mut p = ModelParams::default();
        p.apply_overrides(&kv).unwrap();
        assert_eq!(p.gamma, 2.0);
        assert_eq!(p.sigma_x, 0.01);
        assert_eq!(p.tau, 0.5);
        assert!(parse_kv_lines("bogus 1.0").is_err());
        let mut bad = BTreeMap::new();
        bad.insert("nope".to_string(), 1.0);
        assert!(ModelParams::default().apply_overrides(&bad).is_err());
    }
}
