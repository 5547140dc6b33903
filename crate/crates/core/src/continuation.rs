//! Warm-started parameter sweeps in the interaction strength: evolve to
//! stationarity at each value, record branch data and leading eigenvalues,
//! and detect subcritical folds by branch loss.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{seed_initial, SeedKind, Solver, SolverConfig};
use crate::error::{Error, Result};
use crate::field::{kernel_basis, Field, KernelBasis};
use crate::normal_form;
use crate::params::ModelParams;
use crate::stability::{linearize_about, StabilityOptions};
use crate::theta::ThetaFun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchLabel {
    Lane,
    Spot,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub chi: f64,
    pub amplitude_l2: f64,
    pub amplitude_mode: f64,
    pub residual: f64,
    /// NaN when eigenvalues were not requested.
    pub max_re_eig: f64,
    pub stable: bool,
    pub branch_label: BranchLabel,
    pub converged: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagram {
    pub params: ModelParams,
    pub k: u32,
    pub branch: SeedKind,
    /// Reference onset value `chi^k(sigma_theta)`.
    pub chi_onset: f64,
    pub chi_start: f64,
    pub chi_end: f64,
    pub points: Vec<BranchPoint>,
}

impl Diagram {
    /// Columns: chi, amplitude_l2, amplitude_mode, residual, max_re_eig,
    /// stable, branch_label.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "chi,amplitude_l2,amplitude_mode,residual,max_re_eig,stable,branch_label"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
                p.chi,
                p.amplitude_l2,
                p.amplitude_mode,
                p.residual,
                p.max_re_eig,
                p.stable,
                match p.branch_label {
                    BranchLabel::Lane => "lane",
                    BranchLabel::Spot => "spot",
                    BranchLabel::Uniform => "uniform",
                }
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub solver: SolverConfig,
    pub chi_start: f64,
    pub chi_end: f64,
    pub steps: usize,
    /// Kernel-direction amplitude of fresh seeds.
    pub seed_eps: f64,
    /// Amplitude floor; a branch dies when it falls below 10x this value.
    pub seed_noise: f64,
    pub compute_eigs: bool,
    pub eig_opts: StabilityOptions,
}

impl SweepConfig {
    pub fn new(solver: SolverConfig, chi_start: f64, chi_end: f64, steps: usize) -> Self {
        SweepConfig {
            solver,
            chi_start,
            chi_end,
            steps,
            seed_eps: 0.02,
            seed_noise: 1e-7,
            compute_eigs: true,
            eig_opts: StabilityOptions::sweep(),
        }
    }
}

/// Default sweep window around the onset, `[0.8, 1.3] chi^k`.
pub fn default_window(params: &ModelParams, k: u32, sigma_theta: f64) -> Result<(f64, f64)> {
    let chi1 = normal_form::chi_k(params, k, sigma_theta)?;
    Ok((1.3 * chi1, 0.8 * chi1))
}

/// Kernel-direction amplitude of a state: the least-squares coefficient of
/// the eigenprofile in the field's critical positional mode. For the branch
/// states this estimates the reduced coordinate `s` directly.
pub fn amplitude_mode(f: &Field, basis: &KernelBasis) -> Result<f64> {
    let prof = f.partial_fourier([i64::from(basis.k), 0])?;
    Ok(project_amplitude(&prof, &basis.u_profile))
}

fn project_amplitude(prof: &ThetaFun, u: &ThetaFun) -> f64 {
    let num = u.conj().mul(prof).integral();
    let den = u.conj().mul(u).integral();
    (num / den).norm()
}

/// Warm-started sweep: march `chi` from `chi_start` to `chi_end`, evolving to
/// stationarity at each value starting from the previous converged state.
pub fn continuation_sweep(
    params: &ModelParams,
    k: u32,
    branch: SeedKind,
    sweep: &SweepConfig,
) -> Result<Diagram> {
    if sweep.steps < 2 {
        return Err(Error::validation("sweep needs at least two steps"));
    }
    let sigma_theta = params.sigma_theta;
    let chi_onset = normal_form::chi_k(params, k, sigma_theta)?;
    let basis = kernel_basis(params, k, sigma_theta, sweep.solver.dims)?;
    let uniform = Field::uniform(sweep.solver.dims, 1.0 / (2.0 * std::f64::consts::PI));
    let death = 10.0 * sweep.seed_noise;

    let mut solver_config = sweep.solver;
    solver_config.symmetry = branch.symmetry();

    let mut points = Vec::with_capacity(sweep.steps);
    let mut warm: Option<Field> = None;
    for i in 0..sweep.steps {
        let frac = i as f64 / (sweep.steps - 1) as f64;
        let chi = sweep.chi_start + frac * (sweep.chi_end - sweep.chi_start);
        let mut config = solver_config;
        if config.dt == 0.0 {
            config.dt = crate::dynamics::suggested_dt(params, chi, config.dims);
        }
        let mut solver = Solver::new(params, chi, config)?;
        let start = match &warm {
            Some(f) => f.clone(),
            None => seed_initial(branch, sweep.seed_eps, &basis)?,
        };
        let outcome = relax(&mut solver, &start, &basis, death)?;
        let (state, residual, steps, converged, died) = outcome;
        let amplitude = amplitude_mode(&state, &basis)?;
        let label = if died || amplitude < death {
            BranchLabel::Uniform
        } else {
            match branch {
                SeedKind::Lane => BranchLabel::Lane,
                SeedKind::Spot => BranchLabel::Spot,
                SeedKind::Uniform => BranchLabel::Uniform,
            }
        };
        let max_re_eig = if sweep.compute_eigs {
            if label == BranchLabel::Uniform {
                // the uniform state is handled exactly by the mode operators
                let n_c = (config.dims.n_theta / 3).max(16);
                crate::spectrum::full_spectrum_scan(params, chi, sigma_theta, i64::from(k) + 2, n_c)?
                    .max_re
            } else {
                linearize_about(&state, chi, params, &config, &sweep.eig_opts)?.max_re
            }
        } else {
            f64::NAN
        };
        points.push(BranchPoint {
            chi,
            amplitude_l2: state.sub(&uniform).norm_l2(),
            amplitude_mode: amplitude,
            residual,
            max_re_eig,
            stable: max_re_eig < 1e-8,
            branch_label: label,
            converged,
            steps,
        });
        warm = if label == BranchLabel::Uniform {
            // branch lost: restart the next point from a fresh seed
            None
        } else {
            Some(state)
        };
    }
    Ok(Diagram {
        params: *params,
        k,
        branch,
        chi_onset,
        chi_start: sweep.chi_start,
        chi_end: sweep.chi_end,
        points,
    })
}

/// March one point to stationarity with early branch-death detection.
/// Returns (state, residual, steps, converged, died).
fn relax(
    solver: &mut Solver,
    start: &Field,
    basis: &KernelBasis,
    death: f64,
) -> Result<(Field, f64, usize, bool, bool)> {
    solver.set_state(start);
    let config = solver.config;
    let max_steps = (config.t_max / config.dt).ceil() as usize;
    let mut residual = solver.residual_inf();
    let mut steps = 0;
    let mut converged = residual < config.residual_tol;
    let mut died = false;
    while !converged && steps < max_steps {
        solver.step()?;
        steps += 1;
        if config.reproject_every > 0 && steps % config.reproject_every == 0 {
            solver.reproject_state()?;
        }
        if steps % config.check_every == 0 || steps == max_steps {
            residual = solver.residual_inf();
            converged = residual < config.residual_tol;
            let state = solver.state();
            if !(state.norm_inf() <= config.divergence_limit)
                || state.values().iter().any(|v| !v.is_finite())
            {
                return Err(Error::numerical("sweep trajectory diverged"));
            }
            let amp = amplitude_mode(&state, basis)?;
            if amp < death {
                died = true;
                break;
            }
        }
    }
    let state = solver.state();
    Ok((state, residual, steps, converged, died))
}

/// Numerical fold proxy: the smallest interaction strength with a converged
/// nontrivial point, when it lies meaningfully below the onset.
pub fn detect_fold(diagram: &Diagram) -> Option<f64> {
    let step = ((diagram.chi_end - diagram.chi_start) / (diagram.points.len().max(2) - 1) as f64)
        .abs();
    let chi_min = diagram
        .points
        .iter()
        .filter(|p| p.converged && p.branch_label != BranchLabel::Uniform)
        .map(|p| p.chi)
        .fold(f64::INFINITY, f64::min);
    if chi_min.is_finite() && chi_min < diagram.chi_onset - 0.5 * step {
        Some(chi_min)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft3::GridDims;

    #[test]
    fn supercritical_smoke_sweep() {
        // three points across onset on a small grid: amplitude decreases and
        // the branch dies below chi^1. The small grid resolves the angular
        // profiles only for a large enough angular diffusion, and the basin
        // of the bifurcating branch is local, so the window hugs the onset.
        let p = ModelParams {
            sigma_theta: 0.02,
            ..ModelParams::default()
        };
        let dims = GridDims::new(16, 16, 32);
        let mut solver = SolverConfig::new(dims);
        solver.t_max = 300.0;
        solver.residual_tol = 2e-6;
        let chi1 = normal_form::chi_k(&p, 1, p.sigma_theta).unwrap();
        let mut sweep = SweepConfig::new(solver, 1.05 * chi1, 0.93 * chi1, 4);
        sweep.compute_eigs = false;
        sweep.seed_noise = 1e-4;
        let diagram = continuation_sweep(&p, 1, SeedKind::Spot, &sweep).unwrap();
        assert_eq!(diagram.points.len(), 4);
        let amps: Vec<f64> = diagram.points.iter().map(|q| q.amplitude_mode).collect();
        assert!(
            amps[0] > amps[1] && amps[1] > 0.02,
            "amplitudes not decreasing toward onset: {amps:?}"
        );
        // below onset the branch dies
        assert_eq!(diagram.points[2].branch_label, BranchLabel::Uniform);
        assert_eq!(diagram.points[3].branch_label, BranchLabel::Uniform);
        assert!(detect_fold(&diagram).is_none());
        // csv round trip sanity
        let mut buf = Vec::new();
        diagram.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("chi,amplitude_l2,amplitude_mode"));
        assert_eq!(text.lines().count(), 5);
    }
}
