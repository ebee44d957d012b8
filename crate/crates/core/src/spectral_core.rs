//! The stiffness/mass pencil `Mw x = γ K x` and its spectrum.
//!
//! `K` is the full bilinear form at a given growth rate, `Mw` the ρ₀'-weighted
//! mass. Because `Mw` is singular and `K` is SPD, the pencil is reduced through
//! a Cholesky factorization of the (diagonally equilibrated) stiffness side and
//! solved with a dense symmetric eigensolver. Cost is O(dof³) per call.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::discretization::{
    assemble_boundary_forms, assemble_h2_form, assemble_weighted_gradient_form,
    assemble_weighted_mass, boundary_quotient_form, tau_minus, Mesh, SymForm,
};
use crate::equilibria::{DensityProfile, PhysicalParams};
use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of γ₁ are treated as zero.
pub const DROP_THRESHOLD: f64 = 1e-12;

/// Stiffness `K` and mass `Mw` at fixed `(k, λ)`.
#[derive(Debug, Clone)]
pub struct PencilAssembly {
    pub k: f64,
    pub lambda: f64,
    pub stiffness: SymForm,
    pub mass: SymForm,
}

/// The λ-independent pieces of the pencil at one wavenumber.
///
/// Bisection in λ reassembles only the boundary terms.
#[derive(Debug, Clone)]
pub struct PencilForms {
    pub k: f64,
    pub h2: SymForm,
    pub wgrad: SymForm,
    pub wmass: SymForm,
    mesh: Mesh,
    params: PhysicalParams,
    profile: DensityProfile,
    rho_q: Vec<f64>,
    drho_q: Vec<f64>,
}

/// Quadratic-form pieces of one coefficient vector.
///
/// The integrals are sums of squares over quadrature points, so unlike
/// `xᵀ A x` with assembled matrices they carry no cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormEnergies {
    pub h2: f64,
    pub wgrad: f64,
    pub wmass: f64,
    /// `v(0)`, `v'(0)`, `v(−a)`, `v'(−a)`.
    pub v0: f64,
    pub d0: f64,
    pub va: f64,
    pub da: f64,
}

impl PencilForms {
    pub fn new(
        mesh: &Mesh,
        profile: &DensityProfile,
        params: &PhysicalParams,
        k: f64,
    ) -> Result<Self> {
        let wgrad = assemble_weighted_gradient_form(mesh, profile, k)?;
        let mut rho_q = Vec::new();
        let mut drho_q = Vec::new();
        mesh.for_each_point(|_, x, _, _| {
            rho_q.push(profile.rho0_unchecked(x));
            drho_q.push(if profile.is_degenerate() { 0.0 } else { profile.drho_unchecked(x) });
        });
        Ok(PencilForms {
            k,
            h2: assemble_h2_form(mesh, k)?,
            wgrad,
            wmass: assemble_weighted_mass(mesh, profile)?,
            mesh: mesh.clone(),
            params: *params,
            profile: profile.clone(),
            rho_q,
            drho_q,
        })
    }

    /// Pointwise evaluation of the form pieces at `x`.
    pub fn energies(&self, x: &[f64]) -> FormEnergies {
        assert_eq!(x.len(), self.mesh.dof_count());
        let k2 = self.k * self.k;
        let (mut h2, mut wgrad, mut wmass) = (0.0, 0.0, 0.0);
        let mut q = 0;
        self.mesh.for_each_point(|e, _, w, sv| {
            let [v, d1, d2, _] = sv.combine(&x[2 * e..2 * e + 4]);
            h2 += w * (d2 * d2 + 2.0 * k2 * d1 * d1 + k2 * k2 * v * v);
            wgrad += w * self.rho_q[q] * (k2 * v * v + d1 * d1);
            wmass += w * self.drho_q[q] * v * v;
            q += 1;
        });
        let (iv0, id0) = self.mesh.right_dofs();
        let (iva, ida) = self.mesh.left_dofs();
        FormEnergies { h2, wgrad, wmass, v0: x[iv0], d0: x[id0], va: x[iva], da: x[ida] }
    }

    /// `xᵀ K(λ) x` from precomputed pieces.
    pub fn stiffness_energy(&self, e: &FormEnergies, lambda: f64) -> f64 {
        let (k, mu) = (self.k, self.params.mu);
        let k2 = k * k;
        let tau = tau_minus(k, lambda, self.profile.rho_minus(), mu);
        let bv0 = 2.0 * mu * k2 * e.d0 * e.v0
            + self.params.g * k2 * self.profile.rho_plus() / lambda * e.v0 * e.v0;
        let bva = mu
            * (k * tau * (k + tau) * e.va * e.va - 2.0 * k * tau * e.va * e.da
                + (k + tau) * e.da * e.da);
        mu * e.h2 + lambda * e.wgrad + bv0 + bva
    }

    /// Eigenpairs at `λ` with each `γ` replaced by the Rayleigh quotient of
    /// its vector, evaluated pointwise.
    ///
    /// The quotient is stationary, so eigenvector error enters only at second
    /// order, and it varies smoothly with `λ`. Raw eigenvalues of the reduced
    /// matrix carry rounding of order eps·cond(K), which at small `k` reaches
    /// 1e-8 relative and shows up as noise in the fixed-point function.
    pub fn spectrum(&self, lambda: f64, n_max: usize) -> Result<SpectrumResult> {
        let raw = gamma_spectrum(&self.at(lambda)?, n_max)?;
        let mut pairs: Vec<(f64, Vec<f64>)> = raw
            .vectors
            .into_iter()
            .map(|mut x| {
                let e = self.energies(&x);
                let kk = self.stiffness_energy(&e, lambda);
                let s = kk.sqrt();
                x.iter_mut().for_each(|v| *v /= s);
                (e.wmass / kk, x)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (gammas, vectors): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        Ok(SpectrumResult { truncated: gammas.len() < n_max, gammas, vectors, n_max })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    /// `K = λ·WGRAD + μ·H2 + BV0(λ) + BVA(λ)`; Cholesky-checked.
    pub fn at(&self, lambda: f64) -> Result<PencilAssembly> {
        let (bv0, bva) =
            assemble_boundary_forms(&self.mesh, self.k, lambda, &self.params, &self.profile)?;
        let mut k_mat = self.h2.matrix.scaled(self.params.mu);
        k_mat.axpy(lambda, &self.wgrad.matrix);
        k_mat.axpy(1.0, &bv0.matrix);
        k_mat.axpy(1.0, &bva.matrix);
        let pencil = PencilAssembly {
            k: self.k,
            lambda,
            stiffness: SymForm {
                tag: self.h2.tag,
                matrix: k_mat,
            },
            mass: self.wmass.clone(),
        };
        // the banded factorization doubles as the coercivity check
        let probe = vec![0.0; pencil.stiffness.dim()];
        if pencil.stiffness.matrix.solve_spd(&probe).is_err() {
            return Err(Error::Coercivity { k: self.k, lambda });
        }
        Ok(pencil)
    }
}

/// Assembles the pencil at `(k, λ)`.
pub fn assemble_b(
    mesh: &Mesh,
    profile: &DensityProfile,
    params: &PhysicalParams,
    k: f64,
    lambda: f64,
) -> Result<PencilAssembly> {
    PencilForms::new(mesh, profile, params, k)?.at(lambda)
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Positive eigenvalues, decreasing.
    pub gammas: Vec<f64>,
    /// Matching coefficient vectors, normalized so `xᵀ K x = 1`.
    pub vectors: Vec<Vec<f64>>,
    pub n_max: usize,
    /// Fewer than `n_max` positive eigenvalues were available.
    pub truncated: bool,
}

/// Reduction `D A D = L Lᵀ` with `D = diag(A)^{-1/2}`.
struct Reduced {
    scale: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Reduced {
    fn new(a: &SymForm) -> Option<Reduced> {
        let dense = a.to_dense();
        let n = dense.nrows();
        let scale = DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let d = dense[(i, i)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            }),
        );
        let scaled = DMatrix::from_fn(n, n, |i, j| dense[(i, j)] * scale[i] * scale[j]);
        scaled.cholesky().map(|chol| Reduced { scale, chol })
    }

    /// `L⁻¹ D B D L⁻ᵀ`, symmetrized.
    fn transform(&self, b: &SymForm) -> DMatrix<f64> {
        let dense = b.to_dense();
        let n = dense.nrows();
        let s = &self.scale;
        let scaled = DMatrix::from_fn(n, n, |i, j| dense[(i, j)] * s[i] * s[j]);
        let l = self.chol.l_dirty();
        let half = l
            .solve_lower_triangular(&scaled)
            .expect("Cholesky factor has a nonzero diagonal");
        let mut c = l
            .solve_lower_triangular(&half.transpose())
            .expect("Cholesky factor has a nonzero diagonal");
        c = 0.5 * (&c + c.transpose());
        c
    }

    /// Maps a reduced eigenvector `z` back to `x = D L⁻ᵀ z`.
    fn back(&self, z: &DVector<f64>) -> Vec<f64> {
        let l = self.chol.l_dirty();
        let y = l
            .tr_solve_lower_triangular(z)
            .expect("Cholesky factor has a nonzero diagonal");
        y.iter().zip(self.scale.iter()).map(|(a, b)| a * b).collect()
    }
}

fn reduce_stiffness(pencil: &PencilAssembly) -> Result<Reduced> {
    Reduced::new(&pencil.stiffness).ok_or(Error::Coercivity {
        k: pencil.k,
        lambda: pencil.lambda,
    })
}

/// Largest `n_max` eigenpairs of `Mw x = γ K x` with `γ > 0`.
pub fn gamma_spectrum(pencil: &PencilAssembly, n_max: usize) -> Result<SpectrumResult> {
    let red = reduce_stiffness(pencil)?;
    let c = red.transform(&pencil.mass);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let mut gammas = Vec::new();
    let mut vectors = Vec::new();
    for &i in order.iter().take(n_max) {
        let g = eig.eigenvalues[i];
        if !(g > 0.0 && g > DROP_THRESHOLD * top) {
            break;
        }
        let mut x = red.back(&eig.eigenvectors.column(i).into_owned());
        let norm = pencil.stiffness.quad_form(&x).sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        gammas.push(g);
        vectors.push(x);
    }
    Ok(SpectrumResult {
        truncated: gammas.len() < n_max,
        gammas,
        vectors,
        n_max,
    })
}

/// Eigenvalues only; same filtering as [`gamma_spectrum`].
pub fn gamma_values(pencil: &PencilAssembly, n_max: usize) -> Result<Vec<f64>> {
    let red = reduce_stiffness(pencil)?;
    let mut vals: Vec<f64> = red
        .transform(&pencil.mass)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let top = vals.first().copied().unwrap_or(0.0);
    Ok(vals
        .into_iter()
        .take(n_max)
        .take_while(|&g| g > 0.0 && g > DROP_THRESHOLD * top)
        .collect())
}

/// Nonzero stationary values of `BDRYQ(v, v) / H2(v, v)`, ascending.
///
/// `BDRYQ` lives on the four endpoint DOFs, so the pencil is condensed onto
/// them: with `S` the Schur complement of the interior block of `H2`, the
/// nonzero values solve the 4×4 problem `Q₄ y = β S y`. This avoids the
/// h⁻⁴ conditioning of a full dense reduction.
pub fn boundary_quotient_spectrum(mesh: &Mesh, k: f64) -> Result<Vec<f64>> {
    let h2 = assemble_h2_form(mesh, k)?;
    let q = boundary_quotient_form(mesh, k)?;
    let n = mesh.dof_count();
    let (va, da) = mesh.left_dofs();
    let (v0, d0) = mesh.right_dofs();
    let bdry = [va, da, v0, d0];
    let interior = h2.matrix.principal(2, n - 2);

    // discrete H2-harmonic extension of each boundary unit vector
    let mut ext = Vec::with_capacity(4);
    for &b in &bdry {
        let rhs: Vec<f64> = (2..n - 2).map(|i| -h2.matrix.get(i, b)).collect();
        let inner = interior
            .solve_spd(&rhs)
            .map_err(|_| Error::Numerical("interior H2 block is not positive definite".into()))?;
        let mut x = vec![0.0; n];
        x[b] = 1.0;
        x[2..n - 2].copy_from_slice(&inner);
        ext.push(x);
    }
    // Schur complement as the pointwise energy of the extensions; the energy
    // is stationary in the extension, so solve errors enter at second order
    let k2 = k * k;
    let mut schur = DMatrix::<f64>::zeros(4, 4);
    mesh.for_each_point(|e, _, w, sv| {
        let f: Vec<[f64; 4]> = ext.iter().map(|x| sv.combine(&x[2 * e..2 * e + 4])).collect();
        for i in 0..4 {
            for j in 0..=i {
                schur[(i, j)] += w
                    * (f[i][2] * f[j][2] + 2.0 * k2 * f[i][1] * f[j][1] + k2 * k2 * f[i][0] * f[j][0]);
            }
        }
    });
    for i in 0..4 {
        for j in 0..i {
            schur[(j, i)] = schur[(i, j)];
        }
    }
    let schur = 0.5 * (&schur + schur.transpose());
    let q4 = DMatrix::from_fn(4, 4, |i, j| q.matrix.get(bdry[i], bdry[j]));
    let chol = schur
        .cholesky()
        .ok_or_else(|| Error::Numerical("condensed H2 form is not positive definite".into()))?;
    let l = chol.l();
    let half = l.solve_lower_triangular(&q4).expect("nonzero Cholesky diagonal");
    let c = l
        .solve_lower_triangular(&half.transpose())
        .expect("nonzero Cholesky diagonal");
    let c = 0.5 * (&c + c.transpose());
    let mut vals: Vec<f64> = c
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .filter(|v| v.abs() > 1e-10)
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Smallest `r` with `K x = μ r H2 x`.
pub fn coercivity_ratio(
    mesh: &Mesh,
    profile: &DensityProfile,
    params: &PhysicalParams,
    k: f64,
    lambda: f64,
) -> Result<f64> {
    let pencil = assemble_b(mesh, profile, params, k, lambda)?;
    let h2 = assemble_h2_form(mesh, k)?;
    pencil_coercivity_ratio(&pencil, &h2, params.mu)
}

/// As [`coercivity_ratio`], for an already assembled pencil.
pub fn pencil_coercivity_ratio(pencil: &PencilAssembly, h2: &SymForm, mu: f64) -> Result<f64> {
    let red = Reduced::new(h2)
        .ok_or_else(|| Error::Numerical("H2 form failed its Cholesky factorization".into()))?;
    let c = red.transform(&pencil.stiffness) / mu;
    Ok(c.symmetric_eigenvalues().min())
}

/// Closed-form lower bound `2(sinh(ka) − ka)/(3 sinh(ka) − ka)` on the ratio.
pub fn coercivity_bound(ka: f64) -> f64 {
    let s = ka.sinh();
    2.0 * (s - ka) / (3.0 * s - ka)
}

/// `‖Mw x − γ K x‖ / max(‖Mw x‖, γ‖K x‖)`.
pub fn eigen_residual(pencil: &PencilAssembly, gamma: f64, x: &[f64]) -> f64 {
    let mx = pencil.mass.matrix.mat_vec(x);
    let kx = pencil.stiffness.matrix.mat_vec(x);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let r: Vec<f64> = mx.iter().zip(&kx).map(|(m, k)| m - gamma * k).collect();
    norm(&r) / norm(&mx).max(gamma * norm(&kx))
}
