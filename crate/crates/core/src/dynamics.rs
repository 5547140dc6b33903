//! Nonlinear right-hand side of the kinetic chemotaxis model, the elliptic
//! chemical solve, and pseudospectral IMEX time stepping to stationarity.
//!
//! Diffusion (positional and angular) is treated implicitly -- it is diagonal
//! in the full Fourier basis -- while transport and the angular interaction
//! flux are explicit. Transport is applied as an exact spectral stencil (the
//! velocity components only couple neighbouring angular modes), so one step
//! costs one inverse and one forward 3-D transform plus the small 2-D
//! chemical solve.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft3::{signed, Fft3, GridDims};
use crate::field::{Field, KernelBasis};
use crate::params::ModelParams;

/// Symmetries of the initial condition that the evolution re-imposes
/// periodically (roundoff would otherwise let the state drift along the
/// translation directions).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreservedSymmetry {
    None,
    /// Antipodal evenness only.
    Antipodal,
    /// Antipodal evenness and swap symmetry (spot states).
    Spot,
    /// Antipodal evenness and constancy in the second coordinate (lanes).
    Lane,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dims: GridDims,
    pub dt: f64,
    pub t_max: f64,
    /// Stationarity threshold on the sup-norm of the right-hand side.
    pub residual_tol: f64,
    pub dealias: bool,
    /// Re-impose the preserved symmetries every this many steps.
    pub reproject_every: usize,
    /// Residual/diagnostics cadence in steps.
    pub check_every: usize,
    pub divergence_limit: f64,
    pub symmetry: PreservedSymmetry,
}

impl SolverConfig {
    pub fn new(dims: GridDims) -> Self {
        SolverConfig {
            dims,
            dt: 0.0, // filled by suggested_dt at solver construction
            t_max: 400.0,
            residual_tol: 1e-6,
            dealias: true,
            reproject_every: 100,
            check_every: 25,
            divergence_limit: 1e3,
            symmetry: PreservedSymmetry::Antipodal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt < 0.0 || !self.dt.is_finite() {
            return Err(Error::validation("dt must be non-negative and finite"));
        }
        if self.residual_tol <= 0.0 {
            return Err(Error::validation("residual_tol must be positive"));
        }
        if self.dims.n_theta % 4 != 0 || self.dims.n1 % 2 != 0 || self.dims.n2 % 2 != 0 {
            return Err(Error::validation(
                "grid must be even in x and divisible by 4 in the angle",
            ));
        }
        Ok(())
    }
}

/// Advective stability limit: half the positional crossing time per cell,
/// with a matching cap for the explicit angular flux.
pub fn suggested_dt(params: &ModelParams, chi: f64, dims: GridDims) -> f64 {
    let dx = 1.0 / dims.n1.max(dims.n2) as f64;
    let advective = 0.5 * dx / params.lambda.max(1e-12);
    // crude amplitude cap for the angular flux speed chi * |B|
    let dtheta = 2.0 * PI / dims.n_theta as f64;
    let b_cap = 0.02 * (1.0 + 2.0 * PI * params.tau);
    let angular = 0.5 * dtheta / (chi.abs() * b_cap).max(1e-12);
    advective.min(angular)
}

pub fn max_dt(params: &ModelParams, dims: GridDims) -> f64 {
    0.5 / (dims.n1.max(dims.n2) as f64) / params.lambda.max(1e-12)
}

/// Trajectory diagnostics of one relaxation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolveResult {
    pub converged: bool,
    pub steps: usize,
    pub t_final: f64,
    pub residual: f64,
    pub residual_history: Vec<(f64, f64)>,
    pub mass_history: Vec<(f64, f64)>,
    pub min_value_history: Vec<(f64, f64)>,
    pub wall_time_s: f64,
}

/// Standalone elliptic chemical solve on the positional grid:
/// `c_hat = rho_hat / (gamma + 4 pi^2 |k|^2 sigma_c)`.
pub fn chemical_solve(rho: &[f64], n1: usize, n2: usize, params: &ModelParams) -> Vec<f64> {
    assert_eq!(rho.len(), n1 * n2);
    let mut planner = FftPlanner::new();
    let f1 = planner.plan_fft_forward(n1);
    let f2 = planner.plan_fft_forward(n2);
    let i1 = planner.plan_fft_inverse(n1);
    let i2 = planner.plan_fft_inverse(n2);
    let mut buf: Vec<Complex64> = rho.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_forward(&mut buf, n1, n2, &f1, &f2);
    for m1 in 0..n1 {
        let k1 = signed(m1, n1);
        for m2 in 0..n2 {
            let k2 = signed(m2, n2);
            buf[m1 * n2 + m2] /= params.elliptic_multiplier([k1, k2]);
        }
    }
    fft2_inverse(&mut buf, n1, n2, &i1, &i2);
    buf.iter().map(|v| v.re).collect()
}

fn fft2_forward(
    buf: &mut [Complex64],
    n1: usize,
    n2: usize,
    f1: &Arc<dyn Fft<f64>>,
    f2: &Arc<dyn Fft<f64>>,
) {
    for row in buf.chunks_exact_mut(n2) {
        f2.process(row);
    }
    let mut col = vec![Complex64::ZERO; n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = buf[i * n2 + j];
        }
        f1.process(&mut col);
        for i in 0..n1 {
            buf[i * n2 + j] = col[i];
        }
    }
    let scale = 1.0 / (n1 * n2) as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn fft2_inverse(
    buf: &mut [Complex64],
    n1: usize,
    n2: usize,
    f1: &Arc<dyn Fft<f64>>,
    f2: &Arc<dyn Fft<f64>>,
) {
    for row in buf.chunks_exact_mut(n2) {
        f2.process(row);
    }
    let mut col = vec![Complex64::ZERO; n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = buf[i * n2 + j];
        }
        f1.process(&mut col);
        for i in 0..n1 {
            buf[i * n2 + j] = col[i];
        }
    }
}

/// The pseudospectral integrator. Holds the spectral state, cached plans,
/// and every per-step buffer.
pub struct Solver {
    pub params: ModelParams,
    pub chi: f64,
    pub config: SolverConfig,
    fft: Fft3,
    ifft2: [Arc<dyn Fft<f64>>; 2],
    /// spectral state (normalized coefficients)
    spec: Vec<Complex64>,
    t: f64,
    steps: usize,
    /// implicit diffusion symbol per (k, n)
    lap: Vec<f64>,
    /// dealias / Nyquist mask
    mask: Vec<f64>,
    /// elliptic multipliers per positional mode
    elliptic: Vec<f64>,
    sin_t: Vec<f64>,
    cos_t: Vec<f64>,
    sin_2t: Vec<f64>,
    cos_2t: Vec<f64>,
    // buffers
    grid_f: Vec<f64>,
    flux: Vec<Complex64>,
    nhat: Vec<Complex64>,
    chem: [Vec<Complex64>; 5],
    chem_grids: [Vec<f64>; 5],
}

impl Solver {
    pub fn new(params: &ModelParams, chi: f64, mut config: SolverConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if config.dt == 0.0 {
            config.dt = suggested_dt(params, chi, config.dims);
        }
        let dims = config.dims;
        let fft = Fft3::new(dims);
        let mut planner = FftPlanner::new();
        let ifft2 = [
            planner.plan_fft_inverse(dims.n1),
            planner.plan_fft_inverse(dims.n2),
        ];
        let mut lap = vec![0.0; dims.len()];
        let mut mask = vec![0.0; dims.len()];
        let mut elliptic = vec![0.0; dims.n1 * dims.n2];
        let lim1 = (dims.n1 / 2) as i64;
        let lim2 = (dims.n2 / 2) as i64;
        let lim3 = (dims.n_theta / 2) as i64;
        // 2/3-rule ball (or just Nyquist removal when dealiasing is off)
        let (d1, d2, d3) = if config.dealias {
            (
                (dims.n1 as i64) / 3,
                (dims.n2 as i64) / 3,
                (dims.n_theta as i64) / 3,
            )
        } else {
            (lim1 - 1, lim2 - 1, lim3 - 1)
        };
        for m1 in 0..dims.n1 {
            let k1 = signed(m1, dims.n1);
            for m2 in 0..dims.n2 {
                let k2 = signed(m2, dims.n2);
                elliptic[m1 * dims.n2 + m2] = params.elliptic_multiplier([k1, k2]);
                for m3 in 0..dims.n_theta {
                    let n = signed(m3, dims.n_theta);
                    let idx = (m1 * dims.n2 + m2) * dims.n_theta + m3;
                    lap[idx] = 4.0 * PI * PI * params.sigma_x * ((k1 * k1 + k2 * k2) as f64)
                        + params.sigma_theta * ((n * n) as f64);
                    mask[idx] = if k1.abs() <= d1 && k2.abs() <= d2 && n.abs() <= d3 {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
        }
        let nt = dims.n_theta;
        let theta = |j: usize| 2.0 * PI * j as f64 / nt as f64;
        Ok(Solver {
            params: *params,
            chi,
            config,
            fft,
            ifft2,
            spec: vec![Complex64::ZERO; dims.len()],
            t: 0.0,
            steps: 0,
            lap,
            mask,
            elliptic,
            sin_t: (0..nt).map(|j| theta(j).sin()).collect(),
            cos_t: (0..nt).map(|j| theta(j).cos()).collect(),
            sin_2t: (0..nt).map(|j| (2.0 * theta(j)).sin()).collect(),
            cos_2t: (0..nt).map(|j| (2.0 * theta(j)).cos()).collect(),
            grid_f: vec![0.0; dims.len()],
            flux: vec![Complex64::ZERO; dims.len()],
            nhat: vec![Complex64::ZERO; dims.len()],
            chem: std::array::from_fn(|_| vec![Complex64::ZERO; dims.n1 * dims.n2]),
            chem_grids: std::array::from_fn(|_| vec![0.0; dims.n1 * dims.n2]),
        })
    }

    pub fn dims(&self) -> GridDims {
        self.config.dims
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_state(&mut self, f: &Field) {
        assert_eq!(f.dims(), self.config.dims);
        self.fft.forward(f.values(), &mut self.spec);
        self.apply_mask();
        self.t = 0.0;
        self.steps = 0;
    }

    pub fn state(&mut self) -> Field {
        let mut grid = vec![0.0; self.config.dims.len()];
        self.fft.inverse_into(&self.spec, &mut grid);
        Field::from_values(self.config.dims, grid)
    }

    pub fn mass(&self) -> f64 {
        2.0 * PI * self.spec[0].re
    }

    fn apply_mask(&mut self) {
        for (v, m) in self.spec.iter_mut().zip(self.mask.iter()) {
            *v *= m;
        }
    }

    /// Explicit part `-lambda v.grad f - chi d_theta(B f)` of the current
    /// spectral state, written into `self.nhat`. Also refreshes `grid_f`.
    fn explicit_rhs(&mut self) {
        let dims = self.config.dims;
        let (n1, n2, nt) = (dims.n1, dims.n2, dims.n_theta);
        self.fft.inverse_into(&self.spec, &mut self.grid_f);

        // chemical field derivatives: rho_hat = 2 pi f_hat(n = 0)
        for m1 in 0..n1 {
            let k1 = signed(m1, n1);
            for m2 in 0..n2 {
                let k2 = signed(m2, n2);
                let c_hat = 2.0 * PI * self.spec[(m1 * n2 + m2) * nt]
                    / self.elliptic[m1 * n2 + m2];
                let ik1 = Complex64::new(0.0, 2.0 * PI * k1 as f64);
                let ik2 = Complex64::new(0.0, 2.0 * PI * k2 as f64);
                let idx = m1 * n2 + m2;
                self.chem[0][idx] = ik1 * c_hat; // d1 c
                self.chem[1][idx] = ik2 * c_hat; // d2 c
                self.chem[2][idx] = ik1 * ik1 * c_hat; // d11 c
                self.chem[3][idx] = ik1 * ik2 * c_hat; // d12 c
                self.chem[4][idx] = ik2 * ik2 * c_hat; // d22 c
            }
        }
        for (spec2, grid2) in self.chem.iter_mut().zip(self.chem_grids.iter_mut()) {
            let mut buf = spec2.clone();
            fft2_inverse(&mut buf, n1, n2, &self.ifft2[0], &self.ifft2[1]);
            for (g, v) in grid2.iter_mut().zip(buf.iter()) {
                *g = v.re;
            }
        }

        // flux = B(x, theta) * f on the collocation grid
        let tau = self.params.tau;
        for m1 in 0..n1 {
            for m2 in 0..n2 {
                let xi = m1 * n2 + m2;
                let (d1, d2) = (self.chem_grids[0][xi], self.chem_grids[1][xi]);
                let (h11, h12, h22) = (
                    self.chem_grids[2][xi],
                    self.chem_grids[3][xi],
                    self.chem_grids[4][xi],
                );
                let base = xi * nt;
                for j in 0..nt {
                    let b = -self.sin_t[j] * d1
                        + self.cos_t[j] * d2
                        + tau * (self.cos_2t[j] * h12 + 0.5 * self.sin_2t[j] * (h22 - h11));
                    self.flux[base + j] = Complex64::new(b * self.grid_f[base + j], 0.0);
                }
            }
        }
        self.fft.forward_c(&mut self.flux);

        // nhat = -chi * i n * flux_hat (masked) + exact transport stencil
        let lam = self.params.lambda;
        for m1 in 0..n1 {
            let k1 = signed(m1, n1) as f64;
            for m2 in 0..n2 {
                let k2 = signed(m2, n2) as f64;
                let base = (m1 * n2 + m2) * nt;
                for m3 in 0..nt {
                    let n = signed(m3, nt);
                    let idx = base + m3;
                    let dflux = Complex64::new(0.0, n as f64) * self.flux[idx];
                    // v.grad f couples angular modes n -> n +- 1:
                    // (cos, sin) have modes (1/2, 1/2) and (-i/2 e^{i}, +i/2 e^{-i})
                    let up = self.spec[base + (m3 + 1) % nt];
                    let down = self.spec[base + (m3 + nt - 1) % nt];
                    let grad = Complex64::new(0.0, PI * lam)
                        * (Complex64::new(k1, -k2) * down + Complex64::new(k1, k2) * up);
                    self.nhat[idx] = (-grad - self.chi * dflux) * self.mask[idx];
                }
            }
        }
    }

    /// Full right-hand side of the current state, on the grid.
    fn rhs_grid(&mut self) -> Vec<f64> {
        self.explicit_rhs();
        let mut total = vec![Complex64::ZERO; self.spec.len()];
        for i in 0..total.len() {
            total[i] = self.nhat[i] - self.lap[i] * self.spec[i];
        }
        let mut out = vec![0.0; total.len()];
        self.fft.inverse_into(&total, &mut out);
        out
    }

    /// Evaluate the equation right-hand side on a given density field.
    pub fn rhs_of(&mut self, f: &Field) -> Field {
        let saved = self.spec.clone();
        self.fft.forward(f.values(), &mut self.spec);
        self.apply_mask();
        let rhs = self.rhs_grid();
        self.spec = saved;
        Field::from_values(self.config.dims, rhs)
    }

    /// Sup norm of the right-hand side; non-finite values report as
    /// infinite so convergence checks can never pass through a NaN.
    pub fn residual_inf(&mut self) -> f64 {
        self.rhs_grid().iter().fold(0.0_f64, |m, v| {
            if v.is_finite() {
                m.max(v.abs())
            } else {
                f64::INFINITY
            }
        })
    }

    /// One IMEX Euler step: explicit transport and interaction flux,
    /// implicit (diagonal) diffusion.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        if dt > max_dt(&self.params, self.config.dims) {
            return Err(Error::validation(format!(
                "dt = {dt} violates the advective stability bound {}",
                max_dt(&self.params, self.config.dims)
            )));
        }
        self.explicit_rhs();
        for i in 0..self.spec.len() {
            self.spec[i] = (self.spec[i] + dt * self.nhat[i]) / (1.0 + dt * self.lap[i]);
        }
        self.t += dt;
        self.steps += 1;
        Ok(())
    }

    /// Re-impose the configured symmetries on the current state.
    pub fn reproject_state(&mut self) -> Result<()> {
        let f = self.state();
        let projected = match self.config.symmetry {
            PreservedSymmetry::None => return Ok(()),
            PreservedSymmetry::Antipodal => f.symmetrize_antipodal()?,
            PreservedSymmetry::Spot => f.symmetrize_antipodal()?.symmetrize_swap()?,
            PreservedSymmetry::Lane => f.symmetrize_antipodal()?.x2_average(),
        };
        let t = self.t;
        let steps = self.steps;
        self.set_state(&projected);
        self.t = t;
        self.steps = steps;
        Ok(())
    }

    /// March to stationarity: stop when the sup-norm residual falls below the
    /// configured tolerance or the horizon is reached.
    pub fn evolve_to_stationary(&mut self, f0: &Field) -> Result<EvolveResult> {
        let start = Instant::now();
        self.set_state(f0);
        let mass0 = self.mass();
        let mut residual_history = Vec::new();
        let mut mass_history = Vec::new();
        let mut min_history = Vec::new();
        let mut residual = self.residual_inf();
        residual_history.push((self.t, residual));
        let max_steps = (self.config.t_max / self.config.dt).ceil() as usize;
        let mut converged = residual < self.config.residual_tol;
        while !converged && self.steps < max_steps {
            self.step()?;
            if self.config.reproject_every > 0 && self.steps % self.config.reproject_every == 0 {
                self.reproject_state()?;
            }
            if self.steps % self.config.check_every == 0 || self.steps == max_steps {
                residual = self.residual_inf();
                residual_history.push((self.t, residual));
                let f = self.state();
                mass_history.push((self.t, self.mass()));
                min_history.push((self.t, f.min_value()));
                if !(f.norm_inf() <= self.config.divergence_limit)
                    || f.values().iter().any(|v| !v.is_finite())
                {
                    return Err(Error::numerical(format!(
                        "trajectory diverged at t = {:.3}: |f|_inf = {:.3e} (advective or \
                         angular CFL exceeded, or chi far beyond onset)",
                        self.t,
                        f.norm_inf()
                    )));
                }
                if (self.mass() - mass0).abs() > 1e-8 * mass0.abs().max(1.0) {
                    return Err(Error::numerical("mass conservation lost"));
                }
                converged = residual < self.config.residual_tol;
            }
        }
        Ok(EvolveResult {
            converged,
            steps: self.steps,
            t_final: self.t,
            residual,
            residual_history,
            mass_history,
            min_value_history: min_history,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Initial conditions of the relaxation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Uniform,
    Lane,
    Spot,
}

impl SeedKind {
    pub fn symmetry(self) -> PreservedSymmetry {
        match self {
            SeedKind::Uniform => PreservedSymmetry::Antipodal,
            SeedKind::Lane => PreservedSymmetry::Lane,
            SeedKind::Spot => PreservedSymmetry::Spot,
        }
    }
}

/// `uniform + eps * (kernel direction)`; positivity of the density enforced.
pub fn seed_initial(kind: SeedKind, eps: f64, basis: &KernelBasis) -> Result<Field> {
    let dims = basis.phi1.dims();
    let uniform = Field::uniform(dims, 1.0 / (2.0 * PI));
    let seed = match kind {
        SeedKind::Uniform => uniform,
        SeedKind::Lane => {
            let mut f = uniform;
            f.axpy(eps, &basis.phi1);
            f
        }
        SeedKind::Spot => {
            let mut f = uniform;
            f.axpy(eps, &basis.phi1);
            f.axpy(eps, &basis.phi2);
            f
        }
    };
    if seed.min_value() <= 0.0 {
        return Err(Error::validation(format!(
            "seed amplitude {eps} violates positivity (min = {:.3e})",
            seed.min_value()
        )));
    }
    Ok(seed)
}
