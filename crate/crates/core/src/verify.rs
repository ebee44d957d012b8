//! Numerical checks of the identities and inequalities behind the solver.
//!
//! Every check yields a [`CheckReport`]; suites bundle them and run in a
//! fixed order so reports are reproducible for a given configuration and seed.

use std::fmt;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretization::{build_mesh, tau_minus, Mesh};
use crate::equilibria::{DensityProfile, PhysicalParams};
use crate::error::{Error, Result};
use crate::growth_solver::{lattice_magnitudes, GrowthRecord, GrowthSolver};
use crate::modes::{build_normal_mode, outer_coefficients, ModeConfig, NormalMode, OuterSolution};
use crate::spectral_core::{boundary_quotient_spectrum, coercivity_bound, coercivity_ratio};

pub const ENERGY_TOLERANCE: f64 = 1e-5;
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
pub const INEQUALITY_SLACK: f64 = 1e-6;
pub const TIGHTNESS_TOLERANCE: f64 = 1e-4;
pub const APPENDIX_D_TOLERANCE: f64 = 1e-6;
pub const COERCIVITY_SLACK: f64 = 1e-9;
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;
pub const NEUMANN_TOLERANCE: f64 = 1e-8;
pub const SURFACE_BC_TOLERANCE: f64 = 1e-5;
pub const REFINEMENT_TOLERANCE: f64 = 1e-6;
/// Energy residuals below this are eigensolver/bisection noise and do not
/// count as increases in the refinement study.
pub const ENERGY_NOISE_FLOOR: f64 = 1e-9;
/// Relative perturbation of λ_n in the energy sensitivity probe.
pub const ENERGY_PROBE_SHIFT: f64 = 0.01;
/// The perturbed identity must be violated by at least this much.
pub const ENERGY_PROBE_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub metadata: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64, metadata: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            metadata: metadata.into(),
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} residual={:.6e} tolerance={:.1e} {}",
            self.name,
            self.residual,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if !self.metadata.is_empty() {
            write!(f, " [{}]", self.metadata)?;
        }
        Ok(())
    }
}

/// Terms of the energy identity for a real mode, in order
/// `λ²∫ρ₀(k²φ²+φ'²)`, `λμ∫(|φ''+k²φ|²+4k²φ'²)`, `gk²ρ₊φ(0)²`, `−gk²∫ρ₀'φ²`.
pub fn energy_terms(mode: &NormalMode, lambda: f64) -> Result<[f64; 4]> {
    let core = &mode.core;
    let (k, mu, g) = (core.k, core.params.mu, core.params.g);
    let k2 = k * k;
    let prof = &core.profile;
    let mut grad = 0.0;
    let mut visc = 0.0;
    let mut drive = 0.0;
    core.mesh.for_each_point(|e, x, w, sv| {
        let [v, d1, d2, _] = sv.combine(&core.phi[2 * e..2 * e + 4]);
        grad += w * prof.rho0_unchecked(x) * (k2 * v * v + d1 * d1);
        visc += w * ((d2 + k2 * v).powi(2) + 4.0 * k2 * d1 * d1);
        drive += w * prof.drho_unchecked(x) * v * v;
    });
    // outer region: the glue uses the rate the identity is evaluated at
    let (va, da) = core.mesh.left_dofs();
    let (a1, a2) = outer_coefficients(core.phi[va], core.phi[da], k, lambda, prof.rho_minus(), mu)?;
    let outer = OuterSolution {
        a: core.mesh.depth(),
        k,
        tau: tau_minus(k, lambda, prof.rho_minus(), mu),
        a1,
        a2,
    };
    grad += prof.rho_minus() * outer.gradient_integral();
    visc += outer.viscous_integral();
    let (v0, _) = core.mesh.right_dofs();
    let phi0 = core.phi[v0];
    Ok([
        lambda * lambda * grad,
        lambda * mu * visc,
        g * k2 * prof.rho_plus() * phi0 * phi0,
        -g * k2 * drive,
    ])
}

fn energy_residual_at(mode: &NormalMode, lambda: f64) -> Result<f64> {
    let t = energy_terms(mode, lambda)?;
    let total: f64 = t.iter().sum();
    let scale: f64 = t.iter().map(|v| v.abs()).sum();
    Ok(total.abs() / scale)
}

/// `|Σ terms| / Σ |terms|` of the energy identity at the mode's own rate.
pub fn energy_identity_residual(mode: &NormalMode) -> Result<CheckReport> {
    let r = energy_residual_at(mode, mode.lambda())?;
    Ok(CheckReport::new(
        format!("energy.identity[k={:.6},n={},N={}]", mode.k(), mode.n, mode.core.mesh.n_elements()),
        r,
        ENERGY_TOLERANCE,
        format!("lambda={:.12e}", mode.lambda()),
    ))
}

/// The same identity with `λ_n` shifted by `shift` (relative); a large value
/// shows the identity actually constrains `λ`.
pub fn energy_perturbation_residual(mode: &NormalMode, shift: f64) -> Result<f64> {
    energy_residual_at(mode, mode.lambda() * (1.0 + shift))
}

/// A trial profile on the slab, continued below `−a` by the decaying
/// two-exponential tail matched C¹ at `−a`.
#[derive(Debug, Clone)]
pub struct TrialFunction {
    pub coeffs: Vec<f64>,
}

impl TrialFunction {
    /// Sum of `count` Gaussian bumps with random centres in the slab, widths
    /// in `[0.05a, 0.5a]` and amplitudes in `[−1, 1]`, Hermite-interpolated.
    pub fn gaussian_bumps<R: Rng>(mesh: &Mesh, rng: &mut R, count: usize) -> TrialFunction {
        let a = mesh.depth();
        let bumps: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-a..0.0),
                    rng.random_range(0.05 * a..0.5 * a),
                )
            })
            .collect();
        let f = |x: f64| bumps.iter().map(|(c, m, w)| c * (-((x - m) / w).powi(2)).exp()).sum::<f64>();
        let df = |x: f64| {
            bumps
                .iter()
                .map(|(c, m, w)| c * (-2.0 * (x - m) / (w * w)) * (-((x - m) / w).powi(2)).exp())
                .sum::<f64>()
        };
        TrialFunction { coeffs: mesh.interpolate(f, df) }
    }
}

/// Both sides of the maximal-growth inequality for one trial at rate `Λ`:
/// `g∫ρ₀'φ²` and `gρ₊φ(0)² + Λ²∫ρ₀(φ²+φ'²/k²) + Λμ∫((φ''/k+kφ)²+4φ'²)`.
pub fn inequality_sides(
    big_lambda: f64,
    trial: &TrialFunction,
    mesh: &Mesh,
    k: f64,
    profile: &DensityProfile,
    params: &PhysicalParams,
) -> Result<(f64, f64)> {
    mesh.check_len(&trial.coeffs)?;
    let (mu, g) = (params.mu, params.g);
    let k2 = k * k;
    let c = &trial.coeffs;
    let (mut lhs, mut mass, mut visc) = (0.0, 0.0, 0.0);
    mesh.for_each_point(|e, x, w, sv| {
        let [v, d1, d2, _] = sv.combine(&c[2 * e..2 * e + 4]);
        lhs += w * profile.drho_unchecked(x) * v * v;
        mass += w * profile.rho0_unchecked(x) * (v * v + d1 * d1 / k2);
        visc += w * ((d2 / k + k * v).powi(2) + 4.0 * d1 * d1);
    });
    let (va, da) = mesh.left_dofs();
    let (a1, a2) = outer_coefficients(c[va], c[da], k, big_lambda, profile.rho_minus(), mu)?;
    let outer = OuterSolution {
        a: mesh.depth(),
        k,
        tau: tau_minus(k, big_lambda, profile.rho_minus(), mu),
        a1,
        a2,
    };
    mass += profile.rho_minus() * outer.gradient_integral() / k2;
    visc += outer.viscous_integral() / k2;
    let (v0, _) = mesh.right_dofs();
    let rhs = g * profile.rho_plus() * c[v0] * c[v0] + big_lambda * big_lambda * mass + big_lambda * mu * visc;
    Ok((g * lhs, rhs))
}

/// Passes when `lhs ≤ rhs + slack·rhs`; the residual is the relative excess.
pub fn check_variational_inequality(
    big_lambda: f64,
    trial: &TrialFunction,
    mesh: &Mesh,
    k: f64,
    profile: &DensityProfile,
    params: &PhysicalParams,
) -> Result<CheckReport> {
    let (lhs, rhs) = inequality_sides(big_lambda, trial, mesh, k, profile, params)?;
    let excess = if rhs > 0.0 { ((lhs - rhs) / rhs).max(0.0) } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(CheckReport::new(
        format!("inequality.trial[k={k:.6}]"),
        excess,
        INEQUALITY_SLACK,
        format!("lhs={lhs:.6e} rhs={rhs:.6e}"),
    ))
}

/// `|gk²γ_n(λ_n) − λ_n| / λ_n` with `γ_n` recomputed at `λ_n`.
pub fn fixed_point_residual(solver: &GrowthSolver, record: &GrowthRecord) -> Result<CheckReport> {
    let forms = solver.forms(record.k)?;
    let f = solver.fixed_point_function(&forms, record.n, record.lambda_n)?;
    Ok(CheckReport::new(
        format!("fixed_point[k={:.6},n={}]", record.k, record.n),
        f.abs() / record.lambda_n,
        FIXED_POINT_TOLERANCE,
        format!("lambda={:.12e} iterations={} converged={}", record.lambda_n, record.iterations, record.converged),
    ))
}

/// Worst fixed-point residual over `records`; vacuous pass when empty.
pub fn fixed_point_summary(solver: &GrowthSolver, records: &[GrowthRecord]) -> Result<CheckReport> {
    let reports: Vec<CheckReport> = records
        .par_iter()
        .map(|r| fixed_point_residual(solver, r))
        .collect::<Result<_>>()?;
    let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    let unconverged = records.iter().filter(|r| !r.converged).count();
    let residual = if unconverged > 0 { f64::INFINITY } else { worst };
    Ok(CheckReport::new(
        "fixed_point.all",
        residual,
        FIXED_POINT_TOLERANCE,
        format!("count={} unconverged={unconverged} worst={worst:.3e}", records.len()),
    ))
}

/// `γ_n` strictly decreasing and `λ/γ_n` strictly increasing along `grid`.
///
/// Each report's residual counts the violating consecutive pairs.
// negated comparisons so that NaN counts as a violation
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn monotonicity_probe(
    solver: &GrowthSolver,
    k: f64,
    n: usize,
    lambda_grid: &[f64],
) -> Result<(CheckReport, CheckReport)> {
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("lambda grid must be strictly increasing".into()));
    }
    let forms = solver.forms(k)?;
    let gammas: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&l| solver.gamma_n(&forms, n, l))
        .collect::<Result<_>>()?;
    let mut dec_bad = 0usize;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut ratio_bad = 0usize;
    for i in 1..gammas.len() {
        let rise = (gammas[i] - gammas[i - 1]) / gammas[i - 1].abs().max(f64::MIN_POSITIVE);
        worst_rise = worst_rise.max(rise);
        if !(gammas[i] < gammas[i - 1]) {
            dec_bad += 1;
        }
        if !(lambda_grid[i] / gammas[i] > lambda_grid[i - 1] / gammas[i - 1]) {
            ratio_bad += 1;
        }
    }
    let meta = if gammas.len() > 1 {
        format!("points={} worst_relative_rise={worst_rise:.3e}", gammas.len())
    } else {
        format!("points={}", gammas.len())
    };
    Ok((
        CheckReport::new(format!("monotone.gamma_decreasing[k={k:.6},n={n}]"), dec_bad as f64, 0.0, meta.clone()),
        CheckReport::new(format!("monotone.ratio_increasing[k={k:.6},n={n}]"), ratio_bad as f64, 0.0, meta),
    ))
}

/// `points` geometric values on `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo * (hi / lo).powf(i as f64 / (points - 1) as f64)
                }
            })
            .collect(),
    }
}

/// Residuals of the mode's kinematic relations, scaled by the mode size.
pub fn mode_consistency(mode: &NormalMode) -> Result<Vec<CheckReport>> {
    let core = &mode.core;
    let (k1, k2) = mode.k_vec;
    let k = core.k;
    let mu = core.params.mu;
    let mut div = 0.0f64;
    let mut scale = 0.0f64;
    let mut peak_phi = 0.0f64;
    let mut peak_d2 = 0.0f64;
    let mut err = None;
    core.mesh.for_each_point(|_, x, _, _| {
        let [v, d1, d2, _] = match core.phi_at(x) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let (p, q) = (mode.psi.eval(x)[0], mode.varphi.eval(x)[0]);
        div = div.max((k1 * p + k2 * q + d1).abs());
        scale = scale.max(d1.abs()).max((k1 * p).abs()).max((k2 * q).abs());
        peak_phi = peak_phi.max(v.abs());
        peak_d2 = peak_d2.max(d2.abs());
    });
    if let Some(e) = err {
        return Err(e);
    }
    let [phi0, _, dd0, _] = core.phi_at(0.0)?;
    let neumann_scale = k * peak_phi;
    let neu1 = (mode.psi.eval(0.0)[1] - k1 * phi0).abs() / neumann_scale;
    let neu2 = (mode.varphi.eval(0.0)[1] - k2 * phi0).abs() / neumann_scale;
    let bc_scale = mu * (k * k * peak_phi + peak_d2);
    let bc = (mu * (k * k * phi0 + dd0)).abs() / bc_scale;
    let tag = format!("k=({k1},{k2}),n={},N={}", mode.n, core.mesh.n_elements());
    Ok(vec![
        CheckReport::new(format!("mode.divergence[{tag}]"), div / scale, DIVERGENCE_TOLERANCE, format!("scale={scale:.6e}")),
        CheckReport::new(format!("mode.neumann_psi[{tag}]"), neu1, NEUMANN_TOLERANCE, format!("scale={neumann_scale:.6e}")),
        CheckReport::new(format!("mode.neumann_varphi[{tag}]"), neu2, NEUMANN_TOLERANCE, format!("scale={neumann_scale:.6e}")),
        CheckReport::new(format!("mode.surface_bc[{tag}]"), bc, SURFACE_BC_TOLERANCE, format!("scale={bc_scale:.6e}")),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    AppendixD,
    Energy,
    Inequality,
    Monotone,
    Convergence,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "appendixD" => Suite::AppendixD,
            "energy" => Suite::Energy,
            "inequality" => Suite::Inequality,
            "monotone" => Suite::Monotone,
            "convergence" => Suite::Convergence,
            "all" => Suite::All,
            other => {
                return Err(Error::config(
                    "suite",
                    format!("unknown suite `{other}`; expected appendixD, energy, inequality, monotone, convergence or all"),
                ))
            }
        })
    }
}

/// Inputs shared by the suites.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub solver: GrowthSolver,
    pub modes: ModeConfig,
    pub seed: u64,
    /// Lattice cutoff for Λ.
    pub kmax: f64,
    /// Random trials per wavenumber in the inequality suite.
    pub trials: usize,
}

/// Wavenumbers probed by the coercivity and monotonicity checks.
pub const PROBE_WAVENUMBERS: [f64; 3] = [0.5, 1.0, 2.0];
/// Wavenumbers of the randomized inequality trials (all on the unit lattice).
pub const TRIAL_WAVENUMBERS: [f64; 5] = [1.0, 2.0, 3.0, 5.0, 8.0];
/// Mesh ladder of the energy-identity refinement study.
pub const ENERGY_LADDER: [usize; 3] = [32, 64, 128];
/// Mesh of the mode-consistency checks.
pub const MODE_CHECK_ELEMENTS: usize = 128;

pub fn run_suite(suite: Suite, ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    match suite {
        Suite::AppendixD => appendix_d_suite(ctx),
        Suite::Energy => energy_suite(ctx),
        Suite::Inequality => inequality_suite(ctx),
        Suite::Monotone => monotone_suite(ctx),
        Suite::Convergence => convergence_suite(ctx),
        Suite::All => {
            let mut out = Vec::new();
            for s in [Suite::AppendixD, Suite::Energy, Suite::Inequality, Suite::Monotone, Suite::Convergence] {
                out.extend(run_suite(s, ctx)?);
            }
            Ok(out)
        }
    }
}

/// Closed-form stationary values of the boundary quotient, ascending.
pub fn boundary_quotient_closed_form(ka: f64) -> [f64; 4] {
    let s = ka.sinh();
    [-(s + ka) / (3.0 * s - ka), -(s - ka) / (3.0 * s + ka), 1.0, 1.0]
}

pub fn appendix_d_check(mesh: &Mesh, ka: f64) -> Result<CheckReport> {
    let k = ka / mesh.depth();
    let vals = boundary_quotient_spectrum(mesh, k)?;
    let want = boundary_quotient_closed_form(ka);
    let err = if vals.len() == 4 {
        vals.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(CheckReport::new(
        format!("appendixD[ka={ka}]"),
        err,
        APPENDIX_D_TOLERANCE,
        format!("values={vals:?}"),
    ))
}

/// Worst shortfall of the coercivity ratio below its closed-form bound over
/// a 10-point grid in `(0, cap]`.
pub fn coercivity_check(solver: &GrowthSolver, k: f64) -> Result<CheckReport> {
    let mesh = solver.mesh();
    let ka = k * mesh.depth();
    let bound = coercivity_bound(ka);
    let cap = solver.lambda_cap();
    let grid: Vec<f64> = (1..=10).map(|i| cap * i as f64 / 10.0).collect();
    let ratios: Vec<f64> = grid
        .par_iter()
        .map(|&l| coercivity_ratio(mesh, solver.profile(), solver.params(), k, l))
        .collect::<Result<_>>()?;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CheckReport::new(
        format!("coercivity[k={k}]"),
        (bound - min).max(0.0),
        COERCIVITY_SLACK,
        format!("min_ratio={min:.12e} bound={bound:.12e}"),
    ))
}

fn appendix_d_suite(ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    let mesh = build_mesh(ctx.solver.mesh().depth(), 64)?;
    let mut out: Vec<CheckReport> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&ka| appendix_d_check(&mesh, ka))
        .collect::<Result<_>>()?;
    if ctx.solver.lambda_cap() > 0.0 {
        for k in PROBE_WAVENUMBERS {
            out.push(coercivity_check(&ctx.solver, k)?);
        }
    }
    Ok(out)
}

fn energy_suite(ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    let mut residuals = Vec::new();
    let mut out = Vec::new();
    let mut finest = None;
    for n in ENERGY_LADDER {
        let s = ctx.solver.with_elements(n)?;
        let mode = build_normal_mode(&s, (1.0, 0.0), 1, &ctx.modes)?;
        let rep = energy_identity_residual(&mode)?;
        residuals.push(rep.residual);
        if n == *ENERGY_LADDER.last().unwrap() {
            out.push(rep);
            finest = Some(mode);
        }
    }
    // the discrete identity holds to roundoff once λ_n is converged, so the
    // study only flags growth above the noise floor
    let increases = residuals
        .windows(2)
        .filter(|w| w[1] >= w[0] && w[1] > ENERGY_NOISE_FLOOR)
        .count();
    out.push(CheckReport::new(
        "energy.refinement_decrease",
        increases as f64,
        0.0,
        format!(
            "N={ENERGY_LADDER:?} residuals=[{}] noise_floor={ENERGY_NOISE_FLOOR:.0e}",
            residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ));
    let mode = finest.expect("ladder is not empty");
    let probe = energy_perturbation_residual(&mode, ENERGY_PROBE_SHIFT)?;
    out.push(CheckReport::new(
        "energy.perturbation_detected",
        ENERGY_PROBE_MIN / probe,
        1.0,
        format!("shift={ENERGY_PROBE_SHIFT} perturbed_residual={probe:.3e}"),
    ));
    Ok(out)
}

fn inequality_suite(ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    let solver = &ctx.solver;
    let lm = solver.lambda_max(ctx.kmax)?;
    let big = lm.lambda;
    let mesh = solver.mesh();
    let mut out = Vec::new();
    let lattice = lattice_magnitudes(solver.params().l1, solver.params().l2, ctx.kmax)?;
    let on_lattice = |k: f64| lattice.iter().any(|p| (p.magnitude - k).abs() <= 1e-12 * k);
    for (i, &k) in TRIAL_WAVENUMBERS.iter().enumerate().filter(|(_, &k)| on_lattice(k)) {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(i as u64));
        let trials: Vec<TrialFunction> =
            (0..ctx.trials).map(|_| TrialFunction::gaussian_bumps(mesh, &mut rng, 5)).collect();
        let reports: Vec<CheckReport> = trials
            .par_iter()
            .map(|t| check_variational_inequality(big, t, mesh, k, solver.profile(), solver.params()))
            .collect::<Result<_>>()?;
        let violations = reports.iter().filter(|r| !r.pass).count();
        let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
        out.push(CheckReport::new(
            format!("inequality.random[k={k}]"),
            worst,
            INEQUALITY_SLACK,
            format!("Lambda={big:.12e} trials={} violations={violations} seed={}", ctx.trials, ctx.seed),
        ));
    }
    out.push(tightness_check(solver, big, lm.argmax_k)?);
    Ok(out)
}

/// Relative gap `(rhs − lhs)/rhs` of the inequality at the extremal mode.
pub fn tightness_check(solver: &GrowthSolver, big_lambda: f64, k: f64) -> Result<CheckReport> {
    let forms = solver.forms(k)?;
    let spec = forms.spectrum(big_lambda, 1)?;
    let phi = spec
        .vectors
        .first()
        .cloned()
        .ok_or_else(|| Error::NoUnstableBranch { k, n: 1, reason: "no positive eigenvalue".into() })?;
    let trial = TrialFunction { coeffs: phi };
    let (lhs, rhs) = inequality_sides(big_lambda, &trial, solver.mesh(), k, solver.profile(), solver.params())?;
    Ok(CheckReport::new(
        format!("inequality.extremal_gap[k={k:.6}]"),
        ((rhs - lhs) / rhs).abs(),
        TIGHTNESS_TOLERANCE,
        format!("lhs={lhs:.12e} rhs={rhs:.12e}"),
    ))
}

fn monotone_suite(ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    let cap = ctx.solver.lambda_cap();
    if cap <= 0.0 {
        return Ok(vec![CheckReport::new("monotone", 0.0, 0.0, "vacuous: rho0' vanishes")]);
    }
    let grid = geometric_grid(1e-3, cap, 20);
    let mut out = Vec::new();
    for k in PROBE_WAVENUMBERS {
        for n in 1..=4 {
            let (dec, ratio) = monotonicity_probe(&ctx.solver, k, n, &grid)?;
            out.push(dec);
            out.push(ratio);
        }
    }
    Ok(out)
}

/// Geometric sweep used by the convergence suite and the default dispersion run.
pub fn default_sweep() -> Vec<f64> {
    geometric_grid(0.1, 10.0, 20)
}

fn convergence_suite(ctx: &VerifyContext) -> Result<Vec<CheckReport>> {
    let solver = &ctx.solver;
    let mut out = Vec::new();
    let outcomes = solver.dispersion(&default_sweep(), 4)?;
    let mut records = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(Error::NoUnstableBranch { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    out.push(fixed_point_summary(solver, &records)?);
    out.push(ordering_check(solver, &records));
    if solver.lambda_cap() <= 0.0 {
        return Ok(out);
    }
    let r = solver.refinement_agreement(1.0, 1)?;
    out.push(CheckReport::new(
        "convergence.refinement[k=1,n=1]",
        r.relative_change,
        REFINEMENT_TOLERANCE,
        format!(
            "N={} lambda={:.12e} N={} lambda={:.12e}",
            solver.mesh().n_elements(),
            r.coarse.lambda_n,
            2 * solver.mesh().n_elements(),
            r.fine.lambda_n
        ),
    ));
    let fine = solver.with_elements(MODE_CHECK_ELEMENTS)?;
    let mode = build_normal_mode(&fine, (1.0, 1.0), 1, &ctx.modes)?;
    out.extend(mode_consistency(&mode)?);
    Ok(out)
}

/// Strict ordering in `n` at each `k` and the cap `λ_n ≤ sqrt(g/L0)(1+1e−10)`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn ordering_check(solver: &GrowthSolver, records: &[GrowthRecord]) -> CheckReport {
    let cap = solver.lambda_cap() * (1.0 + 1e-10);
    let mut bad = 0usize;
    for r in records {
        if !(r.lambda_n > 0.0 && r.lambda_n <= cap) {
            bad += 1;
        }
    }
    for w in records.windows(2) {
        if w[0].k == w[1].k && w[1].n == w[0].n + 1 && !(w[0].lambda_n > w[1].lambda_n) {
            bad += 1;
        }
    }
    CheckReport::new(
        "spectrum.ordering_and_cap",
        bad as f64,
        0.0,
        format!("records={} cap={:.12e}", records.len(), solver.lambda_cap()),
    )
}
