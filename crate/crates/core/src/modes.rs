//! Normal modes: gluing the interior eigenfunction to the decaying outer
//! solution, pressure, horizontal velocities, 3D fields and the Poisson
//! extension of surface data.
//!
//! A mode with wave vector `(k1, k2)` and rate `λ` is
//! `u = e^{λt}(sin(θ)ψ, sin(θ)ϕ, cos(θ)φ)`, `q = e^{λt}cos(θ)π`,
//! `ζ = e^{λt}cos(θ)ω`, `η = e^{λt}cos(θ)ν` with `θ = k1 x1 + k2 x2`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::banded::BandedSym;
use crate::discretization::hermite::shape;
use crate::discretization::quadrature::GaussLegendre;
use crate::discretization::{tau_minus, Mesh, DEFAULT_QUADRATURE_POINTS, HALF_BANDWIDTH};
use crate::equilibria::{DensityProfile, PhysicalParams};
use crate::error::{Error, Result};
use crate::growth_solver::GrowthSolver;

pub const DEFAULT_SAMPLES: usize = 512;
/// Truncation depth of the velocity problem, in units of `1/k` below the slab.
pub const DEFAULT_TRUNCATION: f64 = 10.0;
/// Sub-elements per slab element in the velocity problem.
pub const DEFAULT_REFINE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    /// Rows in the mode file.
    pub samples: usize,
    /// `X = a + truncation / k`.
    pub truncation: f64,
    pub refine: usize,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig {
            samples: DEFAULT_SAMPLES,
            truncation: DEFAULT_TRUNCATION,
            refine: DEFAULT_REFINE,
        }
    }
}

impl ModeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::config("modes.samples", format!("need at least 2, got {}", self.samples)));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::config(
                "modes.truncation",
                format!("must be positive, got {}", self.truncation),
            ));
        }
        if self.refine == 0 {
            return Err(Error::config("modes.refine", "must be at least 1"));
        }
        Ok(())
    }
}

/// `(A1, A2)` with `A1 + A2 = φ(−a)` and `k A1 + τ₋ A2 = φ'(−a)`.
pub fn outer_coefficients(
    phi_a: f64,
    dphi_a: f64,
    k: f64,
    lambda: f64,
    rho_minus: f64,
    mu: f64,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("outer gluing needs lambda > 0, got {lambda}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be positive, got k = {k}")));
    }
    let tau = tau_minus(k, lambda, rho_minus, mu);
    let d = tau - k;
    Ok(((tau * phi_a - dphi_a) / d, (dphi_a - k * phi_a) / d))
}

/// `A1 e^{k(x+a)} + A2 e^{τ(x+a)}` on `x ≤ −a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterSolution {
    pub a: f64,
    pub k: f64,
    pub tau: f64,
    pub a1: f64,
    pub a2: f64,
}

impl OuterSolution {
    /// `[φ, φ', φ'', φ''']`.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        let s = x + self.a;
        let e1 = self.a1 * (self.k * s).exp();
        let e2 = self.a2 * (self.tau * s).exp();
        let (k, t) = (self.k, self.tau);
        [e1 + e2, k * e1 + t * e2, k * k * e1 + t * t * e2, k * k * k * e1 + t * t * t * e2]
    }

    /// `∫_{−∞}^{−a} f_i f_j` for the exponentials `f = e^{r s}`: `1/(r_i + r_j)`.
    fn gram(&self, ci: [f64; 2], cj: [f64; 2]) -> f64 {
        let r = [self.k, self.tau];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += ci[i] * cj[j] / (r[i] + r[j]);
            }
        }
        s
    }

    /// `∫ (k²φ² + φ'²)` over `(−∞, −a)`.
    pub fn gradient_integral(&self) -> f64 {
        let k2 = self.k * self.k;
        let c = [self.a1, self.a2];
        let d = [self.k * self.a1, self.tau * self.a2];
        k2 * self.gram(c, c) + self.gram(d, d)
    }

    /// `∫ ((φ'' + k²φ)² + 4k²φ'²)` over `(−∞, −a)`.
    pub fn viscous_integral(&self) -> f64 {
        let k2 = self.k * self.k;
        let c = [2.0 * k2 * self.a1, (self.tau * self.tau + k2) * self.a2];
        let d = [self.k * self.a1, self.tau * self.a2];
        self.gram(c, c) + 4.0 * k2 * self.gram(d, d)
    }
}

/// Cubic Hermite function on an arbitrary node list.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteProfile {
    nodes: Vec<f64>,
    coeffs: Vec<f64>,
    /// Decay rate used to continue the profile below the first node.
    tail_rate: f64,
}

impl HermiteProfile {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn depth(&self) -> f64 {
        -self.nodes[0]
    }

    /// `[v, v']` at `x ≤ 0`; below the first node the profile continues as
    /// `v(−X) e^{τ(x+X)}`, matching the Robin condition.
    pub fn eval(&self, x: f64) -> [f64; 2] {
        let x0 = self.nodes[0];
        if x < x0 {
            let v = self.coeffs[0] * (self.tail_rate * (x - x0)).exp();
            return [v, self.tail_rate * v];
        }
        let e = match self.nodes.partition_point(|&n| n <= x) {
            0 => 0,
            i => (i - 1).min(self.nodes.len() - 2),
        };
        let h = self.nodes[e + 1] - self.nodes[e];
        let t = ((x - self.nodes[e]) / h).clamp(0.0, 1.0);
        let [v, d, _, _] = shape(t, h).combine(&self.coeffs[2 * e..2 * e + 4]);
        [v, d]
    }

    pub fn scaled(&self, s: f64) -> HermiteProfile {
        HermiteProfile {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone()
        }
    }
}

/// Everything the velocity and pressure reconstruction needs.
#[derive(Debug, Clone)]
pub struct ModeCore {
    pub k: f64,
    pub lambda: f64,
    pub mesh: Mesh,
    /// Hermite coefficients of `φ` on `mesh`.
    pub phi: Vec<f64>,
    pub outer: OuterSolution,
    pub profile: DensityProfile,
    pub params: PhysicalParams,
}

impl ModeCore {
    /// `[φ, φ', φ'', φ''']` anywhere on `x ≤ 0`.
    pub fn phi_at(&self, x: f64) -> Result<[f64; 4]> {
        if x > 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("x3 = {x} lies above the free surface")));
        }
        if x < -self.mesh.depth() {
            Ok(self.outer.eval(x))
        } else {
            self.mesh.evaluate(&self.phi, x)
        }
    }

    /// Pressure amplitude `π`; `φ'''` is piecewise constant in the slab.
    pub fn pressure_at(&self, x: f64) -> Result<f64> {
        let [_, d1, _, d3] = self.phi_at(x)?;
        let (k, lam, mu) = (self.k, self.lambda, self.params.mu);
        if x < -self.mesh.depth() {
            let s = x + self.mesh.depth();
            return Ok(-(lam * self.profile.rho_minus() / k) * self.outer.a1 * (k * s).exp());
        }
        let rho = self.profile.rho0_unchecked(x);
        Ok(-(lam * rho * d1 + mu * (k * k * d1 - d3)) / (k * k))
    }

    fn pressure_on_element(&self, e: usize, x: f64) -> f64 {
        let h = self.mesh.h();
        let t = ((x - self.mesh.nodes()[e]) / h).clamp(0.0, 1.0);
        let [_, d1, _, d3] = shape(t, h).combine(&self.phi[2 * e..2 * e + 4]);
        let (k, lam, mu) = (self.k, self.lambda, self.params.mu);
        -(lam * self.profile.rho0_unchecked(x) * d1 + mu * (k * k * d1 - d3)) / (k * k)
    }

    /// Truncation depth `X = a + truncation / k` of the velocity problem.
    pub fn truncation_depth(&self, cfg: &ModeConfig) -> f64 {
        self.mesh.depth() + cfg.truncation / self.k
    }
}

/// Horizontal-velocity amplitude for the component `kj` (`k1` → ψ, `k2` → ϕ).
///
/// Solves `−μψ'' + (λρ₀ + μk²)ψ = kj π` on `(−X, 0)` with `ψ'(0) = kj φ(0)`
/// and `ψ'(−X) = τ₋ψ(−X)`, using cubic Hermite elements that refine the
/// slab mesh and continue uniformly below it.
pub fn horizontal_velocity(core: &ModeCore, kj: f64, cfg: &ModeConfig) -> Result<HermiteProfile> {
    cfg.validate()?;
    let a = core.mesh.depth();
    let x_trunc = core.truncation_depth(cfg);
    let (k, lam, mu) = (core.k, core.lambda, core.params.mu);
    let tau = core.outer.tau;
    let h_in = core.mesh.h() / cfg.refine as f64;
    let h_out = h_in.min(0.25 / tau);
    let n_out = (((x_trunc - a) / h_out).ceil() as usize).clamp(1, 50_000);

    let mut nodes: Vec<f64> = (0..n_out).map(|i| -x_trunc + (x_trunc - a) * i as f64 / n_out as f64).collect();
    let n_in = core.mesh.n_elements() * cfg.refine;
    nodes.extend((0..=n_in).map(|i| {
        let e = i / cfg.refine;
        if e >= core.mesh.n_elements() {
            0.0
        } else {
            core.mesh.nodes()[e] + core.mesh.h() * (i % cfg.refine) as f64 / cfg.refine as f64
        }
    }));

    let dofs = 2 * nodes.len();
    let mut m = BandedSym::zeros(dofs, HALF_BANDWIDTH);
    let mut rhs = vec![0.0; dofs];
    let rule = GaussLegendre::new(DEFAULT_QUADRATURE_POINTS);
    let k2 = k * k;
    for e in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let h = x1 - x0;
        // slab element that owns this sub-element, for the elementwise φ'''
        let owner = if e >= n_out { Some((e - n_out) / cfg.refine) } else { None };
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = 0.5 * (s + 1.0);
            let x = x0 + t * h;
            let wq = 0.5 * w * h;
            let sv = shape(t, h);
            let c = lam * core.profile.rho0_unchecked(x) + mu * k2;
            let p = match owner {
                Some(o) => core.pressure_on_element(o, x),
                None => -(lam * core.profile.rho_minus() / k) * core.outer.a1 * (k * (x + a)).exp(),
            };
            for i in 0..4 {
                rhs[2 * e + i] += wq * kj * p * sv.n[i];
                for j in 0..=i {
                    m.add(2 * e + i, 2 * e + j, wq * (mu * sv.d1[i] * sv.d1[j] + c * sv.n[i] * sv.n[j]));
                }
            }
        }
    }
    m.add(0, 0, mu * tau);
    let [phi0, ..] = core.phi_at(0.0)?;
    rhs[dofs - 2] += mu * kj * phi0;
    let coeffs = m
        .solve_spd(&rhs)
        .map_err(|e| Error::Numerical(format!("horizontal velocity solve at k = {k}: {e}")))?;
    Ok(HermiteProfile { nodes, coeffs, tail_rate: tau })
}

#[derive(Debug, Clone)]
pub struct NormalMode {
    pub k_vec: (f64, f64),
    pub n: usize,
    pub core: ModeCore,
    pub psi: HermiteProfile,
    pub varphi: HermiteProfile,
    /// Surface amplitude `φ(0)/λ`.
    pub nu: f64,
    pub config: ModeConfig,
}

/// Sampled values of all vertical profiles at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSample {
    pub x3: f64,
    pub phi: f64,
    pub dphi: f64,
    pub psi: f64,
    pub varphi: f64,
    pub pi: f64,
    pub omega: f64,
}

impl NormalMode {
    pub fn k(&self) -> f64 {
        self.core.k
    }

    pub fn lambda(&self) -> f64 {
        self.core.lambda
    }

    pub fn a1(&self) -> f64 {
        self.core.outer.a1
    }

    pub fn a2(&self) -> f64 {
        self.core.outer.a2
    }

    pub fn tau_minus(&self) -> f64 {
        self.core.outer.tau
    }

    /// `ω = −ρ₀'φ/λ`.
    pub fn omega_at(&self, x: f64) -> Result<f64> {
        let [phi, ..] = self.core.phi_at(x)?;
        Ok(-self.core.profile.drho_unchecked(x) * phi / self.core.lambda)
    }

    pub fn sample(&self, x: f64) -> Result<ModeSample> {
        let [phi, dphi, ..] = self.core.phi_at(x)?;
        Ok(ModeSample {
            x3: x,
            phi,
            dphi,
            psi: self.psi.eval(x)[0],
            varphi: self.varphi.eval(x)[0],
            pi: self.core.pressure_at(x)?,
            omega: self.omega_at(x)?,
        })
    }

    /// `samples` equispaced rows on `[−X, 0]`.
    pub fn samples(&self) -> Result<Vec<ModeSample>> {
        let x_trunc = self.core.truncation_depth(&self.config);
        let n = self.config.samples;
        (0..n)
            .map(|i| {
                let x = if i + 1 == n { 0.0 } else { -x_trunc + x_trunc * i as f64 / (n - 1) as f64 };
                self.sample(x)
            })
            .collect()
    }

    /// Writes the mode file: `#` config lines, a header line with the mode
    /// constants, then one row per sample.
    pub fn write<W: Write>(&self, out: &mut W, echo: &str) -> Result<()> {
        let io = |e: std::io::Error| Error::Numerical(format!("writing mode file: {e}"));
        for line in echo.lines() {
            if line.is_empty() {
                writeln!(out, "#").map_err(io)?;
            } else {
                writeln!(out, "# {line}").map_err(io)?;
            }
        }
        writeln!(out, "k1,k2,n,lambda,A1,A2,tau_minus,nu").map_err(io)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt17(self.k_vec.0),
            fmt17(self.k_vec.1),
            self.n,
            fmt17(self.lambda()),
            fmt17(self.a1()),
            fmt17(self.a2()),
            fmt17(self.tau_minus()),
            fmt17(self.nu)
        )
        .map_err(io)?;
        writeln!(out, "x3,phi,dphi,psi,varphi,pi,omega").map_err(io)?;
        for s in self.samples()? {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt17(s.x3),
                fmt17(s.phi),
                fmt17(s.dphi),
                fmt17(s.psi),
                fmt17(s.varphi),
                fmt17(s.pi),
                fmt17(s.omega)
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Largest `|v|` of a cubic Hermite function, using the critical points of
/// each element cubic; returns `(value, x)` with the sign kept.
fn extreme_value(mesh: &Mesh, c: &[f64]) -> (f64, f64) {
    let h = mesh.h();
    let mut best = (0.0f64, 0.0f64);
    let mut consider = |e: usize, t: f64| {
        let [v, ..] = shape(t, h).combine(&c[2 * e..2 * e + 4]);
        if v.abs() > best.0.abs() {
            best = (v, mesh.nodes()[e] + t * h);
        }
    };
    for e in 0..mesh.n_elements() {
        let l = &c[2 * e..2 * e + 4];
        // v'(t) = p t² + q t + r
        let p = 6.0 * l[0] / h + 3.0 * l[1] - 6.0 * l[2] / h + 3.0 * l[3];
        let q = -6.0 * l[0] / h - 4.0 * l[1] + 6.0 * l[2] / h - 2.0 * l[3];
        let r = l[1];
        consider(e, 0.0);
        consider(e, 1.0);
        let mut roots = Vec::new();
        if p.abs() > 1e-300 {
            let disc = q * q - 4.0 * p * r;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-q + sq) / (2.0 * p));
                roots.push((-q - sq) / (2.0 * p));
            }
        } else if q.abs() > 1e-300 {
            roots.push(-r / q);
        }
        for t in roots.into_iter().filter(|t| (0.0..=1.0).contains(t)) {
            consider(e, t);
        }
    }
    best
}

/// Assembles the normal mode for branch `n` at lattice vector `k_vec`.
pub fn build_normal_mode(
    solver: &GrowthSolver,
    k_vec: (f64, f64),
    n: usize,
    cfg: &ModeConfig,
) -> Result<NormalMode> {
    cfg.validate()?;
    let k = k_vec.0.hypot(k_vec.1);
    if k == 0.0 {
        return Err(Error::Domain("zero wavenumber excluded".into()));
    }
    let forms = solver.forms(k)?;
    let record = solver.solve_with(&forms, n)?;
    if !record.converged {
        return Err(Error::Numerical(format!(
            "branch n = {n} at k = {k} did not converge in {} iterations",
            record.iterations
        )));
    }
    let lambda = record.lambda_n;
    let spec = forms.spectrum(lambda, n)?;
    let mut phi = spec.vectors.get(n - 1).cloned().ok_or_else(|| Error::NoUnstableBranch {
        k,
        n,
        reason: "eigenvector missing at the converged rate".into(),
    })?;
    let mesh = solver.mesh().clone();
    let profile = solver.profile().clone();
    let params = *solver.params();

    let outer_for = |c: &[f64]| -> Result<OuterSolution> {
        let (va, da) = mesh.left_dofs();
        let (a1, a2) = outer_coefficients(c[va], c[da], k, lambda, profile.rho_minus(), params.mu)?;
        Ok(OuterSolution {
            a: mesh.depth(),
            k,
            tau: tau_minus(k, lambda, profile.rho_minus(), params.mu),
            a1,
            a2,
        })
    };
    // normalize so that the largest value of φ on ℝ₋ is +1
    let (mut peak, _) = extreme_value(&mesh, &phi);
    let o = outer_for(&phi)?;
    if o.a1 * o.a2 < 0.0 {
        // the outer sum can have one interior extremum below −a
        let ratio = -(k * o.a1) / (o.tau * o.a2);
        if ratio > 0.0 {
            let s = ratio.ln() / (o.tau - k);
            if s < 0.0 {
                let v = o.eval(s - mesh.depth())[0];
                if v.abs() > peak.abs() {
                    peak = v;
                }
            }
        }
    }
    if peak == 0.0 {
        return Err(Error::Numerical(format!("eigenvector vanishes at k = {k}, n = {n}")));
    }
    phi.iter_mut().for_each(|v| *v /= peak);
    let outer = outer_for(&phi)?;
    let core = ModeCore { k, lambda, mesh, phi, outer, profile, params };
    let psi = horizontal_velocity(&core, k_vec.0, cfg)?;
    let varphi = horizontal_velocity(&core, k_vec.1, cfg)?;
    let [phi0, ..] = core.phi_at(0.0)?;
    Ok(NormalMode {
        k_vec,
        n,
        nu: phi0 / lambda,
        core,
        psi,
        varphi,
        config: *cfg,
    })
}

/// Point values of a mode at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub zeta: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub q: f64,
}

/// `(ζ, u, q)` at `x = (x1, x2, x3)` with `x3 ≤ 0`.
pub fn evaluate_field(mode: &NormalMode, t: f64, x: [f64; 3]) -> Result<FieldValue> {
    let s = mode.sample(x[2])?;
    let phase = mode.k_vec.0 * x[0] + mode.k_vec.1 * x[1];
    let g = (mode.lambda() * t).exp();
    let (sn, cs) = phase.sin_cos();
    Ok(FieldValue {
        zeta: g * cs * s.omega,
        u1: g * sn * s.psi,
        u2: g * sn * s.varphi,
        u3: g * cs * s.phi,
        q: g * cs * s.pi,
    })
}

/// Free-surface elevation `η(t, x_h)`.
pub fn evaluate_eta(mode: &NormalMode, t: f64, xh: [f64; 2]) -> f64 {
    let phase = mode.k_vec.0 * xh[0] + mode.k_vec.1 * xh[1];
    (mode.lambda() * t).exp() * phase.cos() * mode.nu
}

/// One Fourier term `Re(amp · e^{i k·x_h})` of a surface elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceTerm {
    pub k1: f64,
    pub k2: f64,
    pub amp: Complex64,
}

impl SurfaceTerm {
    pub fn magnitude(&self) -> f64 {
        self.k1.hypot(self.k2)
    }

    fn wave(&self, xh: [f64; 2]) -> Complex64 {
        self.amp * Complex64::from_polar(1.0, self.k1 * xh[0] + self.k2 * xh[1])
    }
}

/// Finite zero-mean Fourier series on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSeries {
    terms: Vec<SurfaceTerm>,
}

impl SurfaceSeries {
    pub fn new(terms: Vec<SurfaceTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.k1 == 0.0 && t.k2 == 0.0) {
            return Err(Error::Domain(format!(
                "surface series has a k = 0 term (amplitude {}); zero average required",
                t.amp
            )));
        }
        Ok(SurfaceSeries { terms })
    }

    pub fn terms(&self) -> &[SurfaceTerm] {
        &self.terms
    }

    pub fn eta(&self, xh: [f64; 2]) -> f64 {
        self.terms.iter().map(|t| t.wave(xh).re).sum()
    }
}

/// `θ(x) = Re Σ amp e^{i k·x_h} e^{|k| x3}`.
pub fn poisson_extend(eta: &SurfaceSeries, x: [f64; 3]) -> Result<f64> {
    check_below_surface(x[2])?;
    Ok(eta
        .terms
        .iter()
        .map(|t| t.wave([x[0], x[1]]).re * (t.magnitude() * x[2]).exp())
        .sum())
}

/// `∇θ` at `x`.
pub fn poisson_gradient(eta: &SurfaceSeries, x: [f64; 3]) -> Result<[f64; 3]> {
    check_below_surface(x[2])?;
    let mut g = [0.0; 3];
    for t in &eta.terms {
        let w = t.wave([x[0], x[1]]);
        let m = t.magnitude();
        let decay = (m * x[2]).exp();
        // ∂_j Re(w) = Re(i k_j w) = −k_j Im(w)
        g[0] -= t.k1 * w.im * decay;
        g[1] -= t.k2 * w.im * decay;
        g[2] += m * w.re * decay;
    }
    Ok(g)
}

fn check_below_surface(x3: f64) -> Result<()> {
    if x3 > 0.0 || x3.is_nan() {
        Err(Error::Domain(format!("x3 = {x3} lies above the free surface")))
    } else {
        Ok(())
    }
}

/// Torus `[0, 2πL1) × [0, 2πL2)` sampled on an `n1 × n2` trapezoidal grid,
/// which integrates trigonometric polynomials of low enough degree exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
}

impl TorusGrid {
    /// Grid fine enough for products of two terms of `series`.
    pub fn for_series(l1: f64, l2: f64, series: &SurfaceSeries) -> TorusGrid {
        let deg = |f: &dyn Fn(&SurfaceTerm) -> f64| {
            series.terms.iter().map(|t| f(t).abs().round() as usize).max().unwrap_or(0)
        };
        TorusGrid {
            l1,
            l2,
            n1: 4 * (deg(&|t| t.k1 * l1) + 1),
            n2: 4 * (deg(&|t| t.k2 * l2) + 1),
        }
    }

    fn integrate<F: Fn([f64; 2]) -> f64>(&self, f: F) -> f64 {
        let (p1, p2) = (2.0 * std::f64::consts::PI * self.l1, 2.0 * std::f64::consts::PI * self.l2);
        let mut s = 0.0;
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                s += f([p1 * i as f64 / self.n1 as f64, p2 * j as f64 / self.n2 as f64]);
            }
        }
        s * p1 * p2 / (self.n1 * self.n2) as f64
    }
}

/// `∫_Γ η²` on the torus.
pub fn surface_mass(eta: &SurfaceSeries, grid: &TorusGrid) -> f64 {
    grid.integrate(|xh| eta.eta(xh).powi(2))
}

/// `∫_Ω |∇θ|²`: trapezoidal in `x_h`, closed form in `x3`
/// (`∫_{−∞}^0 e^{(|k_i|+|k_j|)x3} = 1/(|k_i|+|k_j|)`).
pub fn poisson_gradient_energy(eta: &SurfaceSeries, grid: &TorusGrid) -> f64 {
    let terms = &eta.terms;
    grid.integrate(|xh| {
        let mut s = 0.0;
        for ti in terms {
            let wi = ti.wave(xh);
            let mi = ti.magnitude();
            for tj in terms {
                let wj = tj.wave(xh);
                let mj = tj.magnitude();
                let horiz = (ti.k1 * tj.k1 + ti.k2 * tj.k2) * wi.im * wj.im;
                s += (horiz + mi * mj * wi.re * wj.re) / (mi + mj);
            }
        }
        s
    })
}
