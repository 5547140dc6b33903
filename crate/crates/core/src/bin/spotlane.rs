//! Command-line driver: bifurcation reports, spectra, dispersion scans,
//! relaxation runs, continuation diagrams, and the oracle verification suite.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use spotlane::continuation::{self, SweepConfig};
use spotlane::dynamics::{self, SeedKind, Solver, SolverConfig};
use spotlane::error::Error;
use spotlane::fft3::GridDims;
use spotlane::field::{kernel_basis, Field};
use spotlane::normal_form;
use spotlane::params::{parse_kv_lines, ModelParams};
use spotlane::report::ManifestBuilder;
use spotlane::spectrum;
use spotlane::stability::StabilityOptions;
use spotlane::verify;

#[derive(Parser)]
#[command(
    name = "spotlane",
    about = "Bifurcation toolkit for the curvature-chemotaxis model on the periodic torus",
    version
)]
struct Cli {
    /// Flat key=value configuration file (keys: gamma, sigma_c, sigma_x,
    /// sigma_theta, lambda, chi, tau).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter overrides, e.g. --param tau=0.5 (repeatable).
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    outdir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bifurcation point, cubic coefficients, thresholds, criticality.
    Coeffs(CoeffsArgs),
    /// Eigenvalues of the per-mode linearized operators.
    Spectrum(SpectrumArgs),
    /// Scan of the dispersion function along real shifts.
    Dispersion(DispersionArgs),
    /// Relax an initial condition to a stationary state.
    Evolve(EvolveArgs),
    /// Warm-started continuation sweep in the interaction strength.
    Bifdiag(BifdiagArgs),
    /// Closed-form vs oracle cross-validation table.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CoeffsArgs {
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Angular diffusion used for the finite-viscosity coefficients.
    #[arg(long)]
    sigma_theta: Option<f64>,
    /// Convenience override: set sigma_x so the rescaled positional
    /// diffusion equals this value at the chosen wave number.
    #[arg(long)]
    sigma_k: Option<f64>,
    /// Anticipation length (same as --param tau=...).
    #[arg(long)]
    tau: Option<f64>,
    /// Allow Pythagorean wave numbers: coefficients are suppressed and only
    /// the kernel-dimension report is produced.
    #[arg(long)]
    allow_pythagorean: bool,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Interaction strength; absolute or a multiple of the onset like 1.05x.
    #[arg(long, default_value = "1.0x")]
    chi: String,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value_t = 3)]
    k_max: i64,
    #[arg(long, default_value_t = 32)]
    n_c: usize,
    #[arg(long)]
    sigma_theta: Option<f64>,
}

#[derive(Args)]
struct DispersionArgs {
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value = "1.0x")]
    chi: String,
    #[arg(long, default_value_t = -0.2)]
    mu_min: f64,
    #[arg(long, default_value_t = 0.5)]
    mu_max: f64,
    #[arg(long, default_value_t = 141)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    n_c: usize,
    #[arg(long)]
    sigma_theta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitKind {
    Uniform,
    Lane,
    Spot,
    File,
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long, value_enum, default_value_t = InitKind::Spot)]
    init: InitKind,
    /// Snapshot path for --init file.
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long, default_value = "1.05x")]
    chi: String,
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Seed amplitude along the kernel direction.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    /// Grid as n1,n2,ntheta.
    #[arg(long, default_value = "32,32,64")]
    grid: String,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 400.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    residual_tol: f64,
    #[arg(long)]
    no_dealias: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Lane,
    Spot,
}

#[derive(Args)]
struct BifdiagArgs {
    #[arg(long, value_enum, default_value_t = BranchArg::Spot)]
    branch: BranchArg,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value = "1.3x")]
    chi_start: String,
    #[arg(long, default_value = "0.8x")]
    chi_end: String,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    #[arg(long, default_value = "32,32,64")]
    grid: String,
    #[arg(long, default_value_t = 600.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-5)]
    residual_tol: f64,
    #[arg(long, default_value_t = 0.02)]
    seed_eps: f64,
    /// Skip the per-point leading-eigenvalue computation.
    #[arg(long)]
    no_eigs: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated rescaled positional diffusion grid.
    #[arg(long, default_value = "0.05,0.2,1.0")]
    grid_sigma_k: String,
    /// Comma-separated rescaled anticipation grid.
    #[arg(long, default_value = "0.0,0.1,1.0,5.0")]
    grid_tau_k: String,
    /// Test hook: perturb the named check's closed form and expect failure.
    #[arg(long)]
    inject_error: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut params = match &cli.config {
        Some(path) => ModelParams::from_config_file(path)?,
        None => ModelParams::default(),
    };
    let mut overrides = BTreeMap::new();
    for spec in &cli.params {
        let parsed = parse_kv_lines(spec)?;
        if parsed.is_empty() {
            return Err(Error::validation(format!("malformed --param '{spec}'")));
        }
        overrides.extend(parsed);
    }
    params.apply_overrides(&overrides)?;
    params.validate()?;
    std::fs::create_dir_all(&cli.outdir)?;

    match &cli.command {
        Command::Coeffs(args) => cmd_coeffs(&cli, &params, args),
        Command::Spectrum(args) => cmd_spectrum(&cli, &params, args),
        Command::Dispersion(args) => cmd_dispersion(&cli, &params, args),
        Command::Evolve(args) => cmd_evolve(&cli, &params, args),
        Command::Bifdiag(args) => cmd_bifdiag(&cli, &params, args),
        Command::Verify(args) => cmd_verify(&cli, args),
    }
}

/// Parse an interaction strength: absolute, or a multiple of the onset with
/// the suffix `x` (e.g. `1.05x`).
fn parse_chi(spec: &str, params: &ModelParams, k: u32, sigma_theta: f64) -> Result<f64, Error> {
    let spec = spec.trim();
    if let Some(mult) = spec.strip_suffix('x') {
        let m: f64 = mult
            .parse()
            .map_err(|_| Error::validation(format!("cannot parse chi multiplier '{spec}'")))?;
        Ok(m * normal_form::chi_k(params, k, sigma_theta)?)
    } else {
        spec.parse()
            .map_err(|_| Error::validation(format!("cannot parse chi '{spec}'")))
    }
}

fn parse_grid(spec: &str) -> Result<GridDims, Error> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::validation(format!("cannot parse grid '{spec}'")))?;
    if parts.len() != 3 {
        return Err(Error::validation("grid must be n1,n2,ntheta"));
    }
    Ok(GridDims::new(parts[0], parts[1], parts[2]))
}

fn parse_f64_list(spec: &str) -> Result<Vec<f64>, Error> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::validation(format!("cannot parse number '{s}'")))
        })
        .collect()
}

fn cmd_coeffs(cli: &Cli, base: &ModelParams, args: &CoeffsArgs) -> Result<(), Error> {
    let mut params = *base;
    if let Some(tau) = args.tau {
        params.tau = tau;
    }
    if let Some(sk) = args.sigma_k {
        params.sigma_x = sk * params.lambda / (2.0 * std::f64::consts::PI * f64::from(args.k));
    }
    let sigma_theta = args.sigma_theta.unwrap_or(params.sigma_theta);
    let mut manifest = ManifestBuilder::new("coeffs", &params);

    if !spectrum::is_non_pythagorean(args.k) {
        if !args.allow_pythagorean {
            return Err(Error::validation(format!(
                "k = {} is Pythagorean (k^2 is a sum of two positive squares): the kernel is \
                 higher-dimensional and the cubic reduction does not apply; pass \
                 --allow-pythagorean for the kernel report only",
                args.k
            )));
        }
        let report = spectrum::kernel_report(&params, args.k, sigma_theta, 32)?;
        let path = cli.outdir.join("kernel_report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        manifest.record(&path);
        manifest.write(&cli.outdir.join("manifest.json"))?;
        println!(
            "k = {} is Pythagorean; kernel dimension {} at chi = {:.6}",
            args.k, report.dimension, report.chi
        );
        return Ok(());
    }

    let report = normal_form::bifurcation_report(&params, args.k, sigma_theta)?;
    let path = cli.outdir.join("bifurcation_report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    manifest.record(&path);
    manifest.write(&cli.outdir.join("manifest.json"))?;

    println!("wave number k        : {}", report.k);
    println!("bifurcation point    : {:.8}", report.chi_k);
    println!("sigma_theta          : {:.3e}", report.sigma_theta_used);
    println!("a                    : {:.8e}", report.a);
    println!("b                    : {:.8e}", report.b);
    println!("c                    : {:.8e}", report.c);
    println!(
        "singular parts       : b_-1 = {:.6e}, c_-1 = {:.6e}",
        report.b_minus1, report.c_minus1
    );
    println!(
        "thresholds (tau)     : xi = {:.6e}, lambda = {:.6e}, b-c = {:.6e}",
        report.tau_xi, report.tau_lambda, report.tau_bmc
    );
    println!(
        "criticality at tau = {}: lane {:?}, spot {:?}",
        params.tau, report.lane_criticality, report.spot_criticality
    );
    Ok(())
}

fn cmd_spectrum(cli: &Cli, params: &ModelParams, args: &SpectrumArgs) -> Result<(), Error> {
    let sigma_theta = args.sigma_theta.unwrap_or(params.sigma_theta);
    let chi = parse_chi(&args.chi, params, args.k, sigma_theta)?;
    let report = spectrum::full_spectrum_scan(params, chi, sigma_theta, args.k_max, args.n_c)?;
    let mut manifest = ManifestBuilder::new("spectrum", params);
    let path = cli.outdir.join("spectrum.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    manifest.record(&path);
    manifest.write(&cli.outdir.join("manifest.json"))?;
    println!(
        "chi = {:.6}: max Re = {:.6e}, critical cluster size {}, gap {:.6e}",
        chi, report.max_re, report.n_critical, report.gap
    );
    Ok(())
}

fn cmd_dispersion(cli: &Cli, params: &ModelParams, args: &DispersionArgs) -> Result<(), Error> {
    let sigma_theta = args.sigma_theta.unwrap_or(params.sigma_theta);
    let chi = parse_chi(&args.chi, params, args.k, sigma_theta)?;
    let kvec = [i64::from(args.k), 0];
    let mut manifest = ManifestBuilder::new("dispersion", params);
    let path = cli.outdir.join("dispersion.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(file, "mu,dispersion_re,dispersion_im")?;
    for i in 0..args.steps {
        let mu = args.mu_min
            + (args.mu_max - args.mu_min) * i as f64 / (args.steps.max(2) - 1) as f64;
        match spectrum::dispersion_value(kvec, chi, sigma_theta, params, args.n_c, Complex64::from(mu))
        {
            Ok(v) => writeln!(file, "{mu:.10e},{:.10e},{:.10e}", v.re, v.im)?,
            Err(_) => writeln!(file, "{mu:.10e},nan,nan")?,
        }
    }
    drop(file);
    manifest.record(&path);
    match spectrum::dispersion_root(kvec, chi, sigma_theta, params, args.n_c, Complex64::ZERO) {
        Ok(root) => println!("dispersion root near 0: {:.6e} + {:.6e} i", root.re, root.im),
        Err(err) => println!("no dispersion root found near 0 ({err})"),
    }
    manifest.write(&cli.outdir.join("manifest.json"))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_evolve(cli: &Cli, params: &ModelParams, args: &EvolveArgs) -> Result<(), Error> {
    let dims = parse_grid(&args.grid)?;
    let sigma_theta = params.sigma_theta;
    let chi = parse_chi(&args.chi, params, args.k, sigma_theta)?;
    let basis = kernel_basis(params, args.k, sigma_theta, dims)?;
    let (f0, symmetry) = match args.init {
        InitKind::Uniform => (
            dynamics::seed_initial(SeedKind::Uniform, 0.0, &basis)?,
            SeedKind::Uniform.symmetry(),
        ),
        InitKind::Lane => (
            dynamics::seed_initial(SeedKind::Lane, args.eps, &basis)?,
            SeedKind::Lane.symmetry(),
        ),
        InitKind::Spot => (
            dynamics::seed_initial(SeedKind::Spot, args.eps, &basis)?,
            SeedKind::Spot.symmetry(),
        ),
        InitKind::File => {
            let path = args
                .init_file
                .as_ref()
                .ok_or_else(|| Error::validation("--init file needs --init-file"))?;
            (
                Field::read_snapshot(path)?,
                dynamics::PreservedSymmetry::Antipodal,
            )
        }
    };
    let mut config = SolverConfig::new(dims);
    config.t_max = args.t_max;
    config.residual_tol = args.residual_tol;
    config.dealias = !args.no_dealias;
    config.symmetry = symmetry;
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    let mut solver = Solver::new(params, chi, config)?;
    let mut manifest = ManifestBuilder::new("evolve", params).grid(dims);

    // march manually so the diagnostics carry the kernel amplitude
    solver.set_state(&f0);
    let mut diag: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    let mut residual = solver.residual_inf();
    let record = |solver: &mut Solver, residual: f64, rows: &mut Vec<(f64, f64, f64, f64, f64)>| {
        let state = solver.state();
        let amp = continuation::amplitude_mode(&state, &basis).unwrap_or(f64::NAN);
        rows.push((solver.t(), residual, solver.mass(), state.min_value(), amp));
    };
    record(&mut solver, residual, &mut diag);
    let max_steps = (solver.config.t_max / solver.config.dt).ceil() as usize;
    let mut steps = 0;
    while residual >= solver.config.residual_tol && steps < max_steps {
        solver.step()?;
        steps += 1;
        if solver.config.reproject_every > 0 && steps % solver.config.reproject_every == 0 {
            solver.reproject_state()?;
        }
        if steps % solver.config.check_every == 0 || steps == max_steps {
            residual = solver.residual_inf();
            record(&mut solver, residual, &mut diag);
            let state = solver.state();
            if state.norm_inf() > solver.config.divergence_limit {
                return Err(Error::numerical("trajectory diverged"));
            }
        }
    }
    let state = solver.state();

    let snap = cli.outdir.join("final.snapshot");
    state.write_snapshot(&snap)?;
    manifest.record(&snap);
    let dens = cli.outdir.join("density.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&dens)?);
    state.write_density_csv(&mut f)?;
    drop(f);
    manifest.record(&dens);
    let diag_path = cli.outdir.join("diagnostics.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&diag_path)?);
    writeln!(f, "t,residual,mass,min_f,amplitude")?;
    for (t, r, m, mn, a) in &diag {
        writeln!(f, "{t:.8e},{r:.8e},{m:.12e},{mn:.8e},{a:.8e}")?;
    }
    drop(f);
    manifest.record(&diag_path);
    manifest.write(&cli.outdir.join("manifest.json"))?;

    let converged = residual < solver.config.residual_tol;
    println!(
        "t = {:.2}, steps = {steps}, residual = {residual:.3e}, converged = {converged}",
        solver.t()
    );
    if !converged {
        return Err(Error::numerical(format!(
            "residual {residual:.3e} above tolerance {:.1e} at t_max",
            solver.config.residual_tol
        )));
    }
    Ok(())
}

fn cmd_bifdiag(cli: &Cli, params: &ModelParams, args: &BifdiagArgs) -> Result<(), Error> {
    let dims = parse_grid(&args.grid)?;
    let sigma_theta = params.sigma_theta;
    let chi_start = parse_chi(&args.chi_start, params, args.k, sigma_theta)?;
    let chi_end = parse_chi(&args.chi_end, params, args.k, sigma_theta)?;
    let mut solver = SolverConfig::new(dims);
    solver.t_max = args.t_max;
    solver.residual_tol = args.residual_tol;
    let mut sweep = SweepConfig::new(solver, chi_start, chi_end, args.steps);
    sweep.seed_eps = args.seed_eps;
    sweep.compute_eigs = !args.no_eigs;
    sweep.eig_opts = StabilityOptions::sweep();
    let branch = match args.branch {
        BranchArg::Lane => SeedKind::Lane,
        BranchArg::Spot => SeedKind::Spot,
    };
    let diagram = continuation::continuation_sweep(params, args.k, branch, &sweep)?;
    let mut manifest = ManifestBuilder::new("bifdiag", params).grid(dims);
    let path = cli.outdir.join("diagram.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    diagram.write_csv(&mut f)?;
    drop(f);
    manifest.record(&path);
    let meta = cli.outdir.join("diagram.json");
    std::fs::write(&meta, serde_json::to_string_pretty(&diagram)?)?;
    manifest.record(&meta);
    manifest.write(&cli.outdir.join("manifest.json"))?;
    match continuation::detect_fold(&diagram) {
        Some(chi_fold) => println!(
            "subcritical overhang: fold proxy at chi = {chi_fold:.6} (onset {:.6})",
            diagram.chi_onset
        ),
        None => println!(
            "no fold detected (supercritical closing at onset {:.6})",
            diagram.chi_onset
        ),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<(), Error> {
    let opts = verify::VerifyOptions {
        sigma_k_grid: parse_f64_list(&args.grid_sigma_k)?,
        tau_k_grid: parse_f64_list(&args.grid_tau_k)?,
        inject_error: args.inject_error.clone(),
    };
    let rows = verify::run_suite(&opts)?;
    let path = cli.outdir.join("verify.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    verify::write_csv(&rows, &mut f)?;
    drop(f);
    let mut manifest = ManifestBuilder::new("verify", &ModelParams::default());
    manifest.record(&path);
    manifest.write(&cli.outdir.join("manifest.json"))?;
    let failures: Vec<&verify::CheckRow> = rows.iter().filter(|r| !r.pass).collect();
    println!(
        "{} checks, {} failed; table at {}",
        rows.len(),
        failures.len(),
        path.display()
    );
    for fail in &failures {
        println!(
            "FAIL {} (sigma_k={}, tau_k={}): rel err {:.3e} > {:.0e}",
            fail.check, fail.sigma_k, fail.tau_k, fail.rel_err, fail.tol
        );
    }
    if !failures.is_empty() {
        return Err(Error::numerical(format!("{} checks failed", failures.len())));
    }
    Ok(())
}
