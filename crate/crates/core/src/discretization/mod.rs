//! C¹ finite elements on (−a, 0): uniform mesh, cubic Hermite basis and the
//! symmetric forms of the stability problem.
//!
//! Global DOFs are interleaved `[v(x_0), v'(x_0), v(x_1), v'(x_1), ...]` with
//! `x_0 = −a` and `x_N = 0`, so every form has half-bandwidth 3.

pub mod banded;
pub mod hermite;
pub mod quadrature;

use std::fmt;

use nalgebra::DMatrix;

use crate::equilibria::{DensityProfile, PhysicalParams};
use crate::error::{Error, Result};
use banded::BandedSym;
use hermite::{shape, ShapeValues};
use quadrature::GaussLegendre;

/// Half-bandwidth of every assembled form.
pub const HALF_BANDWIDTH: usize = 3;
pub const DEFAULT_QUADRATURE_POINTS: usize = 10;

#[derive(Debug, Clone)]
pub struct Mesh {
    a: f64,
    n_elements: usize,
    nodes: Vec<f64>,
    rule: GaussLegendre,
}

/// Uniform mesh of `[−a, 0]` with the default 10-point element rule.
pub fn build_mesh(a: f64, n_elements: usize) -> Result<Mesh> {
    Mesh::with_quadrature(a, n_elements, DEFAULT_QUADRATURE_POINTS)
}

impl Mesh {
    pub fn with_quadrature(a: f64, n_elements: usize, quadrature_points: usize) -> Result<Mesh> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config("profile.a", format!("depth must be positive, got {a}")));
        }
        if n_elements < 2 {
            return Err(Error::config(
                "mesh.n_elements",
                format!("need at least 2 elements, got {n_elements}"),
            ));
        }
        if quadrature_points < 4 {
            return Err(Error::config(
                "mesh.quadrature_points",
                format!("need at least 4 points per element, got {quadrature_points}"),
            ));
        }
        let h = a / n_elements as f64;
        let mut nodes: Vec<f64> = (0..=n_elements).map(|i| -a + i as f64 * h).collect();
        nodes[n_elements] = 0.0;
        Ok(Mesh {
            a,
            n_elements,
            nodes,
            rule: GaussLegendre::new(quadrature_points),
        })
    }

    pub fn depth(&self) -> f64 {
        self.a
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self) -> f64 {
        self.a / self.n_elements as f64
    }

    pub fn dof_count(&self) -> usize {
        2 * (self.n_elements + 1)
    }

    pub fn quadrature_points(&self) -> usize {
        self.rule.len()
    }

    /// DOF indices `(value, derivative)` at x = −a.
    pub fn left_dofs(&self) -> (usize, usize) {
        (0, 1)
    }

    /// DOF indices `(value, derivative)` at x = 0.
    pub fn right_dofs(&self) -> (usize, usize) {
        (2 * self.n_elements, 2 * self.n_elements + 1)
    }

    /// Nodal interpolant of a function given with its derivative.
    pub fn interpolate<F, D>(&self, f: F, df: D) -> Vec<f64>
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        self.nodes.iter().flat_map(|&x| [f(x), df(x)]).collect()
    }

    /// Element containing `x`, using half-open elements `[x_e, x_{e+1})` except the last.
    pub fn locate(&self, x: f64) -> Result<usize> {
        if !(x >= -self.a - 1e-12 * self.a && x <= 1e-12 * self.a) {
            return Err(Error::Domain(format!(
                "x3 = {x} lies outside the slab [{}, 0]",
                -self.a
            )));
        }
        let e = ((x + self.a) / self.h()).floor();
        Ok((e.max(0.0) as usize).min(self.n_elements - 1))
    }

    /// `[v, v', v'', v''']` of the finite-element function `coeffs` at `x`.
    pub fn evaluate(&self, coeffs: &[f64], x: f64) -> Result<[f64; 4]> {
        self.check_len(coeffs)?;
        let e = self.locate(x)?;
        let h = self.h();
        let t = ((x - self.nodes[e]) / h).clamp(0.0, 1.0);
        Ok(shape(t, h).combine(&coeffs[2 * e..2 * e + 4]))
    }

    pub(crate) fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dof_count() {
            return Err(Error::Domain(format!(
                "coefficient vector has length {}, mesh expects {}",
                coeffs.len(),
                self.dof_count()
            )));
        }
        Ok(())
    }

    /// Calls `f(element, x, weight, shape)` at every quadrature point.
    pub fn for_each_point<F: FnMut(usize, f64, f64, &ShapeValues)>(&self, mut f: F) {
        let h = self.h();
        for e in 0..self.n_elements {
            let x0 = self.nodes[e];
            for (&s, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let t = 0.5 * (s + 1.0);
                f(e, x0 + t * h, 0.5 * w * h, &shape(t, h));
            }
        }
    }

    /// Integral of `g(x, [v, v', v'', v'''])` using the element rule.
    pub fn integrate_field<G: Fn(f64, [f64; 4]) -> f64>(&self, coeffs: &[f64], g: G) -> f64 {
        let mut total = 0.0;
        self.for_each_point(|e, x, w, sv| {
            total += w * g(x, sv.combine(&coeffs[2 * e..2 * e + 4]));
        });
        total
    }

    fn assemble<F>(&self, tag: FormTag, integrand: F) -> SymForm
    where
        F: Fn(f64, &ShapeValues, usize, usize) -> f64,
    {
        let mut m = BandedSym::zeros(self.dof_count(), HALF_BANDWIDTH);
        self.for_each_point(|e, x, w, sv| {
            for i in 0..4 {
                for j in 0..=i {
                    let v = w * integrand(x, sv, i, j);
                    m.add(2 * e + i, 2 * e + j, v);
                }
            }
        });
        SymForm { tag, matrix: m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormTag {
    H2,
    Wgrad,
    Wmass,
    Bdryq,
    Bv0,
    Bva,
}

impl fmt::Display for FormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormTag::H2 => "H2",
            FormTag::Wgrad => "WGRAD",
            FormTag::Wmass => "WMASS",
            FormTag::Bdryq => "BDRYQ",
            FormTag::Bv0 => "BV0",
            FormTag::Bva => "BVA",
        };
        f.write_str(s)
    }
}

/// A tagged symmetric matrix in banded storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymForm {
    pub tag: FormTag,
    pub matrix: BandedSym,
}

impl SymForm {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.matrix.quad_form(v)
    }

    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        self.matrix.bilinear(v, w)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

fn require_positive_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("wavenumber must be positive, got k = {k}")))
    }
}

/// `∫ (v''w'' + 2k²v'w' + k⁴vw)`.
pub fn assemble_h2_form(mesh: &Mesh, k: f64) -> Result<SymForm> {
    require_positive_k(k)?;
    let k2 = k * k;
    Ok(mesh.assemble(FormTag::H2, |_, s, i, j| {
        s.d2[i] * s.d2[j] + 2.0 * k2 * s.d1[i] * s.d1[j] + k2 * k2 * s.n[i] * s.n[j]
    }))
}

/// `∫ ρ₀ (k²vw + v'w')`.
pub fn assemble_weighted_gradient_form(
    mesh: &Mesh,
    profile: &DensityProfile,
    k: f64,
) -> Result<SymForm> {
    require_positive_k(k)?;
    check_depth(mesh, profile)?;
    let k2 = k * k;
    Ok(mesh.assemble(FormTag::Wgrad, |x, s, i, j| {
        profile.rho0_unchecked(x) * (k2 * s.n[i] * s.n[j] + s.d1[i] * s.d1[j])
    }))
}

/// `∫ ρ₀' v w`.
pub fn assemble_weighted_mass(mesh: &Mesh, profile: &DensityProfile) -> Result<SymForm> {
    check_depth(mesh, profile)?;
    if profile.is_degenerate() {
        return Ok(SymForm {
            tag: FormTag::Wmass,
            matrix: BandedSym::zeros(mesh.dof_count(), HALF_BANDWIDTH),
        });
    }
    Ok(mesh.assemble(FormTag::Wmass, |x, s, i, j| {
        profile.drho_unchecked(x) * s.n[i] * s.n[j]
    }))
}

fn check_depth(mesh: &Mesh, profile: &DensityProfile) -> Result<()> {
    let (a, b) = (mesh.depth(), profile.depth());
    if (a - b).abs() > 1e-14 * a.max(b) {
        return Err(Error::Domain(format!(
            "mesh depth {a} does not match profile depth {b}"
        )));
    }
    Ok(())
}

/// Decay rate `τ₋ = sqrt(k² + λρ₋/μ)` of the lower-fluid tail.
pub fn tau_minus(k: f64, lambda: f64, rho_minus: f64, mu: f64) -> f64 {
    (k * k + lambda * rho_minus / mu).sqrt()
}

/// Boundary forms at the interface and at the bottom of the slab.
///
/// `BV0 = μk²(v'(0)w(0) + v(0)w'(0)) + (gk²ρ₊/λ) v(0)w(0)` and
/// `BVA = μ[kτ(k+τ)vw − kτ(v'w + vw') + (k+τ)v'w']` at x = −a.
pub fn assemble_boundary_forms(
    mesh: &Mesh,
    k: f64,
    lambda: f64,
    params: &PhysicalParams,
    profile: &DensityProfile,
) -> Result<(SymForm, SymForm)> {
    require_positive_k(k)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("growth rate must be positive, got lambda = {lambda}")));
    }
    let n = mesh.dof_count();
    let mu = params.mu;
    let k2 = k * k;

    let mut bv0 = BandedSym::zeros(n, HALF_BANDWIDTH);
    let (v0, d0) = mesh.right_dofs();
    bv0.add(v0, v0, params.g * k2 * profile.rho_plus() / lambda);
    bv0.add(d0, v0, mu * k2);

    let tau = tau_minus(k, lambda, profile.rho_minus(), mu);
    let mut bva = BandedSym::zeros(n, HALF_BANDWIDTH);
    let (va, da) = mesh.left_dofs();
    bva.add(va, va, mu * k * tau * (k + tau));
    bva.add(da, va, -mu * k * tau);
    bva.add(da, da, mu * (k + tau));

    Ok((
        SymForm { tag: FormTag::Bv0, matrix: bv0 },
        SymForm { tag: FormTag::Bva, matrix: bva },
    ))
}

/// `k²(v'(0)w(0) + v(0)w'(0)) − k²(v'(−a)w(−a) + v(−a)w'(−a))`.
pub fn boundary_quotient_form(mesh: &Mesh, k: f64) -> Result<SymForm> {
    require_positive_k(k)?;
    let k2 = k * k;
    let mut q = BandedSym::zeros(mesh.dof_count(), HALF_BANDWIDTH);
    let (v0, d0) = mesh.right_dofs();
    let (va, da) = mesh.left_dofs();
    q.add(d0, v0, k2);
    q.add(da, va, -k2);
    Ok(SymForm { tag: FormTag::Bdryq, matrix: q })
}

#[cfg(test)]
mod tests {
    use super::quadrature::adaptive_integrate;
    use super::*;
    use crate::equilibria::ProfileKind;
    use proptest::prelude::*;

    fn bump() -> DensityProfile {
        DensityProfile::new(ProfileKind::Bump, 1.0, 2.0, 1.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn mesh_nodes_and_dofs() {
        let m = build_mesh(1.0, 4).unwrap();
        assert_eq!(m.nodes(), &[-1.0, -0.75, -0.5, -0.25, 0.0]);
        assert_eq!(m.dof_count(), 10);
        assert_eq!(build_mesh(2.0, 2).unwrap().h(), 1.0);
        match build_mesh(1.0, 1) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "mesh.n_elements"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn h2_form_on_polynomials() {
        let (a, k) = (1.7, 1.3);
        let mesh = build_mesh(a, 8).unwrap();
        let h = assemble_h2_form(&mesh, k).unwrap();
        let one = mesh.interpolate(|_| 1.0, |_| 0.0);
        assert!(rel(h.quad_form(&one), k.powi(4) * a) < 1e-11);
        let lin = mesh.interpolate(|x| x, |_| 1.0);
        let want = 2.0 * k * k * a + k.powi(4) * a.powi(3) / 3.0;
        assert!(rel(h.quad_form(&lin), want) < 1e-11);
        assert!(assemble_h2_form(&mesh, 0.0).is_err());
        assert!(assemble_h2_form(&mesh, -1.0).is_err());
    }

    #[test]
    fn weighted_gradient_on_uniform_density() {
        let (a, k) = (1.5, 0.8);
        let mesh = build_mesh(a, 6).unwrap();
        let prof = DensityProfile::uniform(1.0, a).unwrap();
        let m = assemble_weighted_gradient_form(&mesh, &prof, k).unwrap();
        let one = mesh.interpolate(|_| 1.0, |_| 0.0);
        assert!(rel(m.quad_form(&one), k * k * a) < 1e-11);
        let lin = mesh.interpolate(|x| x, |_| 1.0);
        assert!(rel(m.quad_form(&lin), a + k * k * a.powi(3) / 3.0) < 1e-11);
    }

    #[test]
    fn weighted_mass_examples() {
        let mesh = build_mesh(1.0, 32).unwrap();
        let m = assemble_weighted_mass(&mesh, &bump()).unwrap();
        let one = mesh.interpolate(|_| 1.0, |_| 0.0);
        assert!(rel(m.quad_form(&one), 1.0) < 1e-10);
        let flat = DensityProfile::uniform(3.0, 1.0).unwrap();
        let z = assemble_weighted_mass(&mesh, &flat).unwrap();
        assert_eq!(z.matrix.max_abs(), 0.0);

        let d = m.to_dense();
        let eig = d.clone().symmetric_eigenvalues();
        let norm = d.norm();
        assert!(eig.min() >= -1e-12 * norm);
    }

    #[test]
    fn boundary_forms_touch_only_endpoints() {
        let mesh = build_mesh(1.0, 5).unwrap();
        let prof = DensityProfile::uniform(1.0, 1.0).unwrap();
        let params = PhysicalParams::default();
        let (bv0, bva) = assemble_boundary_forms(&mesh, 1.0, 1.0, &params, &prof).unwrap();
        let tau = tau_minus(1.0, 1.0, 1.0, 1.0);
        assert!((tau - 2f64.sqrt()).abs() < 1e-15);
        let d0 = bv0.to_dense();
        let da = bva.to_dense();
        for i in 0..mesh.dof_count() {
            for j in 0..mesh.dof_count() {
                if i.min(j) < 10 {
                    assert_eq!(d0[(i, j)], 0.0);
                }
                if i.max(j) >= 2 {
                    assert_eq!(da[(i, j)], 0.0);
                }
            }
        }
        assert!(assemble_boundary_forms(&mesh, 1.0, 0.0, &params, &prof).is_err());
    }

    #[test]
    fn bva_matches_completed_square() {
        // μ[kτ(k+τ)v² − 2kτvd + (k+τ)d²] = μ[(k+τ)(d − kτ/(k+τ) v)² + kτ(k²+kτ+τ²)/(k+τ) v²]
        let mesh = build_mesh(1.0, 4).unwrap();
        let prof = DensityProfile::uniform(1.0, 1.0).unwrap();
        for (k, lam, mu) in [(1.0, 1.0, 1.0), (0.4, 2.5, 0.3), (3.0, 0.01, 2.0)] {
            let params = PhysicalParams::new(mu, 1.0, 1.0, 1.0).unwrap();
            let (_, bva) = assemble_boundary_forms(&mesh, k, lam, &params, &prof).unwrap();
            let tau: f64 = (k * k + lam / mu).sqrt();
            for (v, d) in [(1.0, k), (0.3, -1.2), (-2.0, 0.5)] {
                let mut x = vec![0.0; mesh.dof_count()];
                x[0] = v;
                x[1] = d;
                let s = k + tau;
                let want = mu
                    * (s * (d - k * tau / s * v).powi(2) + k * tau * (k * k + k * tau + tau * tau) / s * v * v);
                assert!(rel(bva.quad_form(&x), want) < 1e-13);
            }
        }
    }

    #[test]
    fn boundary_quotient_has_rank_four() {
        let k = 1.1;
        let mesh = build_mesh(1.0, 6).unwrap();
        let q = boundary_quotient_form(&mesh, k).unwrap();
        let cosh = mesh.interpolate(|x| (k * x).cosh(), |x| k * (k * x).sinh());
        let direct = 2.0 * k * k * (0.0 - k * (-k).sinh() * (-k).cosh());
        assert!(rel(q.quad_form(&cosh), direct) < 1e-14);

        let mut interior = vec![0.0; mesh.dof_count()];
        for (i, v) in interior.iter_mut().enumerate().take(10).skip(2) {
            *v = i as f64;
        }
        assert_eq!(q.quad_form(&interior), 0.0);

        let eig = q.to_dense().symmetric_eigenvalues();
        assert_eq!(eig.iter().filter(|e| e.abs() > 1e-12).count(), 4);
    }

    /// Coefficient vector from a small deterministic generator.
    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    /// Per-element adaptive quadrature of the bilinear integrand.
    fn oracle<F: Fn(f64, [f64; 4]) -> f64>(mesh: &Mesh, c: &[f64], g: F) -> f64 {
        let h = mesh.h();
        (0..mesh.n_elements())
            .map(|e| {
                let x0 = mesh.nodes()[e];
                let local = &c[2 * e..2 * e + 4];
                let f = |x: f64| g(x, shape((x - x0) / h, h).combine(local));
                adaptive_integrate(&f, x0, x0 + h, 1e-14)
            })
            .sum()
    }

    #[test]
    fn forms_agree_with_adaptive_oracle() {
        let prof = bump();
        let k = 0.7;
        let mesh = build_mesh(1.0, 64).unwrap();
        let h2 = assemble_h2_form(&mesh, k).unwrap();
        let wg = assemble_weighted_gradient_form(&mesh, &prof, k).unwrap();
        let wm = assemble_weighted_mass(&mesh, &prof).unwrap();
        for seed in 0..5 {
            let c = pseudo_random(mesh.dof_count(), seed);
            let k2 = k * k;
            let o_h2 = oracle(&mesh, &c, |_, v| v[2] * v[2] + 2.0 * k2 * v[1] * v[1] + k2 * k2 * v[0] * v[0]);
            let o_wg = oracle(&mesh, &c, |x, v| prof.rho0(x).unwrap() * (k2 * v[0] * v[0] + v[1] * v[1]));
            let o_wm = oracle(&mesh, &c, |x, v| prof.drho0(x).unwrap() * v[0] * v[0]);
            assert!(rel(h2.quad_form(&c), o_h2) < 1e-10);
            assert!(rel(wg.quad_form(&c), o_wg) < 1e-10);
            assert!(rel(wm.quad_form(&c), o_wm) < 1e-10, "{} vs {}", wm.quad_form(&c), o_wm);
        }
    }

    #[test]
    fn h2_converges_at_fourth_order() {
        let k = 1.0;
        let exact = {
            // v = sin(3x): ∫(81 sin² + 18 cos² + sin²) over (−1, 0)
            let s2 = 0.5 - (6.0f64).sin() / 12.0;
            let c2 = 0.5 + (6.0f64).sin() / 12.0;
            81.0 * s2 + 2.0 * 9.0 * k * k * c2 + k.powi(4) * s2
        };
        let err = |n| {
            let mesh = build_mesh(1.0, n).unwrap();
            let h = assemble_h2_form(&mesh, k).unwrap();
            let v = mesh.interpolate(|x| (3.0 * x).sin(), |x| 3.0 * (3.0 * x).cos());
            (h.quad_form(&v) - exact).abs()
        };
        let (e1, e2) = (err(8), err(16));
        assert!((e1 / e2).log2() > 3.8, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn evaluate_reproduces_interpolant_at_nodes() {
        let mesh = build_mesh(2.0, 10).unwrap();
        let c = mesh.interpolate(|x| x.exp(), |x| x.exp());
        for &x in mesh.nodes() {
            let v = mesh.evaluate(&c, x).unwrap();
            assert!((v[0] - x.exp()).abs() < 1e-15);
            assert!((v[1] - x.exp()).abs() < 1e-15);
        }
        assert!(mesh.evaluate(&c, 0.1).is_err());
        assert!(mesh.evaluate(&c, -2.1).is_err());
    }

    proptest! {
        #[test]
        fn assembled_forms_are_symmetric_and_h2_is_spd(k in 0.05f64..5.0, n in 2usize..40) {
            let mesh = build_mesh(1.0, n).unwrap();
            let h = assemble_h2_form(&mesh, k).unwrap();
            let d = h.to_dense();
            prop_assert!((&d - d.transpose()).norm() <= 1e-13 * d.norm());
            prop_assert!(d.cholesky().is_some());
            let wg = assemble_weighted_gradient_form(&mesh, &bump(), k).unwrap();
            prop_assert!(wg.to_dense().cholesky().is_some());
        }
    }
}
