//! Equilibrium density profiles and physical parameters.
//!
//! A profile is a density `rho0(x3)` on the half-line `x3 <= 0` whose
//! derivative is nonnegative and supported on `[-a, 0]`: the fluid has the
//! constant density `rho_minus` below the layer and reaches `rho_plus` at the
//! free surface.

use serde::{Deserialize, Serialize};

use crate::discretization::quadrature::adaptive_integrate;
use crate::error::{Error, Result};

/// Number of uniform panels over which the cumulative integral of `rho0'` is
/// tabulated.
const CUMULATIVE_PANELS: usize = 256;

/// Per-panel absolute tolerance for the adaptive quadrature of `rho0'`.
const PANEL_TOL: f64 = 1e-15;

/// Default number of grid points used to locate `max rho0'/rho0`.
pub const CHAR_LENGTH_GRID: usize = 100_000;

/// Viscosity, gravity and the horizontal period scales of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mu: f64,
    pub g: f64,
    pub l1: f64,
    pub l2: f64,
}

impl PhysicalParams {
    pub fn new(mu: f64, g: f64, l1: f64, l2: f64) -> Result<Self> {
        for (key, v) in [("params.mu", mu), ("params.g", g), ("params.L1", l1), ("params.L2", l2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(PhysicalParams { mu, g, l1, l2 })
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            mu: 1.0,
            g: 1.0,
            l1: 1.0,
            l2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// `rho0' = c exp(-1/(1-y^2))` with `y = (2 x3 + a)/a`; C-infinity.
    Bump,
    /// Derivative of the degree-5 smoothstep; C2 only.
    Quintic,
    /// Constant density, `rho0' = 0`. Only useful as a degenerate reference.
    Uniform,
}

impl std::fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ProfileKind::Bump => "bump",
            ProfileKind::Quintic => "quintic",
            ProfileKind::Uniform => "uniform",
        };
        f.write_str(s)
    }
}

/// Equilibrium density `rho0` together with its derivative.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    kind: ProfileKind,
    rho_minus: f64,
    rho_plus: f64,
    a: f64,
    /// Scale making `int rho0' = rho_plus - rho_minus` (bump only).
    norm: f64,
    /// `cumulative[i] = int_{-a}^{-a + i a / P} rho0'`.
    cumulative: Vec<f64>,
}

impl DensityProfile {
    pub fn new(kind: ProfileKind, rho_minus: f64, rho_plus: f64, a: f64) -> Result<Self> {
        if !(rho_minus > 0.0 && rho_minus.is_finite()) {
            return Err(Error::config("profile.rho_minus", format!("must be positive, got {rho_minus}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config("profile.a", format!("must be positive, got {a}")));
        }
        match kind {
            ProfileKind::Uniform => {
                if rho_plus != rho_minus {
                    return Err(Error::config(
                        "profile.rho_plus",
                        "a uniform profile needs rho_plus == rho_minus",
                    ));
                }
            }
            _ => {
                if !(rho_plus > rho_minus && rho_plus.is_finite()) {
                    return Err(Error::config(
                        "profile.rho_plus",
                        format!("must exceed rho_minus = {rho_minus}, got {rho_plus}"),
                    ));
                }
            }
        }
        let mut profile = DensityProfile {
            kind,
            rho_minus,
            rho_plus,
            a,
            norm: 1.0,
            cumulative: Vec::new(),
        };
        if kind == ProfileKind::Bump {
            let raw = |x: f64| bump_shape(x, a);
            let total = adaptive_integrate(&raw, -a, 0.0, PANEL_TOL);
            profile.norm = (rho_plus - rho_minus) / total;
            let h = a / CUMULATIVE_PANELS as f64;
            let mut acc = 0.0;
            profile.cumulative.push(0.0);
            for i in 0..CUMULATIVE_PANELS {
                let x0 = -a + i as f64 * h;
                acc += adaptive_integrate(&|x| profile.drho_unchecked(x), x0, x0 + h, PANEL_TOL);
                profile.cumulative.push(acc);
            }
        }
        Ok(profile)
    }

    /// Constant-density reference profile with `rho0' = 0`.
    pub fn uniform(rho: f64, a: f64) -> Result<Self> {
        Self::new(ProfileKind::Uniform, rho, rho, a)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn rho_minus(&self) -> f64 {
        self.rho_minus
    }

    pub fn rho_plus(&self) -> f64 {
        self.rho_plus
    }

    pub fn depth(&self) -> f64 {
        self.a
    }

    /// Whether `rho0'` vanishes identically.
    pub fn is_degenerate(&self) -> bool {
        self.kind == ProfileKind::Uniform
    }

    pub fn rho0(&self, x3: f64) -> Result<f64> {
        check_domain(x3)?;
        Ok(self.rho0_unchecked(x3))
    }

    pub fn drho0(&self, x3: f64) -> Result<f64> {
        check_domain(x3)?;
        Ok(self.drho_unchecked(x3))
    }

    /// `rho0` without the `x3 <= 0` check; callers guarantee the domain.
    pub(crate) fn rho0_unchecked(&self, x3: f64) -> f64 {
        let a = self.a;
        if x3 <= -a {
            return self.rho_minus;
        }
        if x3 >= 0.0 {
            return self.rho_plus;
        }
        let dr = self.rho_plus - self.rho_minus;
        match self.kind {
            ProfileKind::Uniform => self.rho_minus,
            ProfileKind::Quintic => {
                let t = (x3 + a) / a;
                self.rho_minus + dr * t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
            }
            ProfileKind::Bump => {
                let h = a / CUMULATIVE_PANELS as f64;
                let i = (((x3 + a) / h) as usize).min(CUMULATIVE_PANELS - 1);
                let x0 = -a + i as f64 * h;
                let partial = adaptive_integrate(&|x| self.drho_unchecked(x), x0, x3, PANEL_TOL);
                self.rho_minus + self.cumulative[i] + partial
            }
        }
    }

    pub(crate) fn drho_unchecked(&self, x3: f64) -> f64 {
        let a = self.a;
        if x3 <= -a || x3 >= 0.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Uniform => 0.0,
            ProfileKind::Quintic => {
                let t = (x3 + a) / a;
                (self.rho_plus - self.rho_minus) / a * 30.0 * t * t * (1.0 - t) * (1.0 - t)
            }
            ProfileKind::Bump => self.norm * bump_shape(x3, a),
        }
    }
}

fn bump_shape(x3: f64, a: f64) -> f64 {
    let y = (2.0 * x3 + a) / a;
    let s = 1.0 - y * y;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn check_domain(x3: f64) -> Result<()> {
    if x3 > 0.0 || x3.is_nan() {
        Err(Error::Domain(format!("x3 = {x3} lies above the free surface")))
    } else {
        Ok(())
    }
}

/// Characteristic length of the profile and the resulting growth-rate cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharLength {
    /// `1/L0 = max rho0'/rho0`; zero for a degenerate profile.
    pub inv_length: f64,
    /// `sqrt(g / L0)`.
    pub lambda_cap: f64,
    /// Grid size used for the maximization.
    pub grid_points: usize,
}

impl CharLength {
    pub fn length(&self) -> f64 {
        1.0 / self.inv_length
    }
}

/// Maximizes `rho0'/rho0` over a uniform grid of `grid_points` on `[-a, 0]`.
pub fn char_length(profile: &DensityProfile, g: f64, grid_points: usize) -> CharLength {
    let n = grid_points.max(2);
    let a = profile.depth();
    let inv_length = if profile.is_degenerate() {
        0.0
    } else {
        (0..n)
            .map(|i| {
                let x = -a + a * i as f64 / (n - 1) as f64;
                profile.drho_unchecked(x) / profile.rho0_unchecked(x)
            })
            .fold(0.0, f64::max)
    };
    CharLength {
        inv_length,
        lambda_cap: (g * inv_length).sqrt(),
        grid_points: n,
    }
}
