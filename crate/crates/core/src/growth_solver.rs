//! Characteristic values from the fixed-point equation `g k² γ_n(λ, k) = λ`.
//!
//! `f(λ) = g k² γ_n(λ) − λ` is bracketed on `[1e-12·cap, cap]` and bisected.
//! The sign of `f` equals the sign of `g k² γ_n/λ − 1`, and `λ/γ_n` is strictly
//! increasing, so the root is unique whenever the bracket holds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{build_mesh, Mesh};
use crate::equilibria::{char_length, DensityProfile, PhysicalParams, CHAR_LENGTH_GRID};
use crate::error::{Error, Result};
use crate::spectral_core::PencilForms;

/// Lower end of the bracket as a fraction of the growth-rate cap.
pub const LAMBDA_LO_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_rel: f64,
    pub max_iter: usize,
    pub n_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_rel: 1e-10,
            max_iter: 200,
            n_max: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(Error::config("solver.tol_rel", format!("must lie in (0, 1), got {}", self.tol_rel)));
        }
        if self.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "must be at least 1"));
        }
        if self.n_max == 0 {
            return Err(Error::config("solver.n_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// One solved branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthRecord {
    pub k: f64,
    pub n: usize,
    pub lambda_n: f64,
    /// `|g k² γ_n(λ_n) − λ_n|`, with γ recomputed at the returned λ_n.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GrowthRecord {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.lambda_n
    }
}

/// Shared inputs for repeated branch solves.
#[derive(Debug, Clone)]
pub struct GrowthSolver {
    mesh: Mesh,
    profile: DensityProfile,
    params: PhysicalParams,
    config: SolverConfig,
    lambda_cap: f64,
}

impl GrowthSolver {
    pub fn new(
        mesh: Mesh,
        profile: DensityProfile,
        params: PhysicalParams,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        let lambda_cap = char_length(&profile, params.g, CHAR_LENGTH_GRID).lambda_cap;
        Ok(GrowthSolver {
            mesh,
            profile,
            params,
            config,
            lambda_cap,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }

    /// The same solver on a mesh with a different element count.
    pub fn with_elements(&self, n_elements: usize) -> Result<Self> {
        let mesh = Mesh::with_quadrature(
            self.mesh.depth(),
            n_elements,
            self.mesh.quadrature_points(),
        )?;
        Ok(GrowthSolver {
            mesh,
            ..self.clone()
        })
    }

    pub fn forms(&self, k: f64) -> Result<PencilForms> {
        PencilForms::new(&self.mesh, &self.profile, &self.params, k)
    }

    /// `γ_n(λ)` for branch `n ≥ 1`, zero when the branch is absent.
    pub fn gamma_n(&self, forms: &PencilForms, n: usize, lambda: f64) -> Result<f64> {
        let s = forms.spectrum(lambda, n)?;
        Ok(s.gammas.get(n - 1).copied().unwrap_or(0.0))
    }

    /// `f(λ) = g k² γ_n(λ) − λ`.
    pub fn fixed_point_function(&self, forms: &PencilForms, n: usize, lambda: f64) -> Result<f64> {
        let k = forms.k;
        Ok(self.params.g * k * k * self.gamma_n(forms, n, lambda)? - lambda)
    }

    pub fn solve(&self, k: f64, n: usize) -> Result<GrowthRecord> {
        check_branch(k, n)?;
        let forms = self.forms(k)?;
        self.solve_with(&forms, n)
    }

    /// Bisection for branch `n` with precomputed forms.
    pub fn solve_with(&self, forms: &PencilForms, n: usize) -> Result<GrowthRecord> {
        let k = forms.k;
        check_branch(k, n)?;
        let no_branch = |reason: String| Error::NoUnstableBranch { k, n, reason };
        if self.lambda_cap <= 0.0 {
            return Err(no_branch("growth-rate cap is zero (rho0' vanishes)".into()));
        }
        let mut lo = LAMBDA_LO_FRACTION * self.lambda_cap;
        let mut hi = self.lambda_cap;
        let f_lo = self.fixed_point_function(forms, n, lo)?;
        if f_lo <= 0.0 {
            return Err(no_branch(format!(
                "f(lambda_lo = {lo:e}) = {f_lo:e} <= 0; branch absent or stable"
            )));
        }
        let f_hi = self.fixed_point_function(forms, n, hi)?;
        if f_hi >= 0.0 {
            return Err(no_branch(format!(
                "f(lambda_cap = {hi:e}) = {f_hi:e} >= 0; no sign change"
            )));
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.config.max_iter {
            iterations += 1;
            // geometric steps while the bracket spans decades
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if self.fixed_point_function(forms, n, mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= self.config.tol_rel * lo {
                converged = true;
                break;
            }
        }
        let lambda_n = 0.5 * (lo + hi);
        let residual = self.fixed_point_function(forms, n, lambda_n)?.abs();
        Ok(GrowthRecord {
            k,
            n,
            lambda_n,
            residual,
            iterations,
            converged,
        })
    }

    /// Branches `1..=n_max` at each `k`, ordered by `(k, n)`; failed
    /// branches stay in place as errors.
    pub fn dispersion(&self, k_values: &[f64], n_max: usize) -> Result<Vec<Result<GrowthRecord>>> {
        for &k in k_values {
            check_branch(k, 1)?;
        }
        let forms: Vec<PencilForms> = k_values
            .par_iter()
            .map(|&k| self.forms(k))
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, usize)> = (0..k_values.len())
            .flat_map(|i| (1..=n_max).map(move |n| (i, n)))
            .collect();
        Ok(jobs
            .par_iter()
            .map(|&(i, n)| self.solve_with(&forms[i], n))
            .collect())
    }

    /// λ₁ over the deduplicated lattice magnitudes up to `kmax`.
    pub fn lambda_max(&self, kmax: f64) -> Result<LambdaMaxResult> {
        let lattice = lattice_magnitudes(self.params.l1, self.params.l2, kmax)?;
        let ks: Vec<f64> = lattice.iter().map(|p| p.magnitude).collect();
        let outcomes = self.dispersion(&ks, 1)?;
        let mut records = Vec::new();
        for out in outcomes {
            match out {
                Ok(r) => records.push(r),
                Err(Error::NoUnstableBranch { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let best = records
            .iter()
            .max_by(|a, b| a.lambda_n.total_cmp(&b.lambda_n))
            .copied()
            .ok_or_else(|| Error::NoUnstableBranch {
                k: ks[0],
                n: 1,
                reason: "no lattice wavenumber has an unstable first branch".into(),
            })?;
        Ok(LambdaMaxResult {
            lambda: best.lambda_n,
            argmax_k: best.k,
            lattice_cutoff: kmax,
            lambda_cap: self.lambda_cap,
            records,
        })
    }

    /// Relative change of λ_n between this mesh and one with twice the elements.
    pub fn refinement_agreement(&self, k: f64, n: usize) -> Result<RefinementCheck> {
        let coarse = self.solve(k, n)?;
        let fine = self.with_elements(2 * self.mesh.n_elements())?.solve(k, n)?;
        let rel = (coarse.lambda_n - fine.lambda_n).abs() / fine.lambda_n;
        Ok(RefinementCheck {
            coarse,
            fine,
            relative_change: rel,
            agrees: rel <= REFINEMENT_TOLERANCE,
        })
    }
}

/// Coarse/fine agreement required for a branch to be flagged trustworthy.
pub const REFINEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct RefinementCheck {
    pub coarse: GrowthRecord,
    pub fine: GrowthRecord,
    pub relative_change: f64,
    pub agrees: bool,
}

fn check_branch(k: f64, n: usize) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got k = {k}")));
    }
    if n == 0 {
        return Err(Error::Domain("branch index starts at 1".into()));
    }
    Ok(())
}

/// Solves one branch from scratch with default quadrature.
pub fn solve_lambda_n(
    profile: &DensityProfile,
    params: &PhysicalParams,
    n_elements: usize,
    k: f64,
    n: usize,
    config: SolverConfig,
) -> Result<GrowthRecord> {
    let mesh = build_mesh(profile.depth(), n_elements)?;
    GrowthSolver::new(mesh, profile.clone(), *params, config)?.solve(k, n)
}

#[derive(Debug, Clone)]
pub struct LambdaMaxResult {
    pub lambda: f64,
    pub argmax_k: f64,
    pub lattice_cutoff: f64,
    pub lambda_cap: f64,
    /// λ₁ per lattice magnitude, ascending in k.
    pub records: Vec<GrowthRecord>,
}

/// A distinct lattice magnitude with one representative `(k1, k2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub magnitude: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Distinct `|k|` for `k ∈ L1⁻¹ℤ × L2⁻¹ℤ ∖ {0}` with `|k| ≤ kmax`, ascending.
pub fn lattice_magnitudes(l1: f64, l2: f64, kmax: f64) -> Result<Vec<LatticePoint>> {
    if !(kmax > 0.0 && kmax.is_finite()) {
        return Err(Error::config("lattice.Kmax", format!("must be positive, got {kmax}")));
    }
    let reach = kmax * (1.0 + 1e-12);
    let i_max = (reach * l1).floor() as i64;
    let j_max = (reach * l2).floor() as i64;
    let mut points = Vec::new();
    // first-quadrant representatives cover every magnitude
    for i in 0..=i_max {
        for j in 0..=j_max {
            if i == 0 && j == 0 {
                continue;
            }
            let (k1, k2) = (i as f64 / l1, j as f64 / l2);
            let m = k1.hypot(k2);
            if m <= reach {
                points.push(LatticePoint {
                    magnitude: m,
                    k1,
                    k2,
                });
            }
        }
    }
    points.sort_by(|a, b| a.magnitude.total_cmp(&b.magnitude));
    points.dedup_by(|b, a| (a.magnitude - b.magnitude).abs() <= 1e-12 * a.magnitude);
    if points.is_empty() {
        let smallest = (1.0 / l1).min(1.0 / l2);
        return Err(Error::config(
            "lattice.Kmax",
            format!("no nonzero lattice wavenumber has |k| <= {kmax}; the smallest is {smallest}"),
        ));
    }
    Ok(points)
}

/// Whether `(k1, k2)` lies on the lattice; otherwise returns the nearest point.
pub fn snap_to_lattice(l1: f64, l2: f64, k1: f64, k2: f64) -> std::result::Result<(), (f64, f64)> {
    let i = (k1 * l1).round();
    let j = (k2 * l2).round();
    let (s1, s2) = (i / l1, j / l2);
    let tol = 1e-9 * (1.0 + k1.abs().max(k2.abs()));
    if (s1 - k1).abs() <= tol && (s2 - k2).abs() <= tol {
        Ok(())
    } else {
        Err((s1, s2))
    }
}
