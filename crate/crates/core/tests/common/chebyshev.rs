//! Independent reference for the leading growth rates: Chebyshev collocation
//! of the fourth-order problem, written as a first-order system in
//! (φ, φ', φ'', φ''') on the slab and closed with the exact decaying outer
//! solution at the bottom. Shares no code with the finite-element path; the
//! bump density is integrated here with its own composite Simpson rule.

use nalgebra::DMatrix;

pub struct Bump {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub a: f64,
    norm: f64,
}

impl Bump {
    pub fn new(rho_minus: f64, rho_plus: f64, a: f64) -> Self {
        let mut b = Bump {
            rho_minus,
            rho_plus,
            a,
            norm: 1.0,
        };
        b.norm = (rho_plus - rho_minus) / b.simpson(-a, 0.0);
        b
    }

    fn shape(&self, x: f64) -> f64 {
        let y = (2.0 * x + self.a) / self.a;
        let s = 1.0 - y * y;
        if s <= 0.0 {
            0.0
        } else {
            (-1.0 / s).exp()
        }
    }

    fn simpson(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let panels = 4000;
        let h = (hi - lo) / panels as f64;
        let mut acc = self.shape(lo) + self.shape(hi);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.shape(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    pub fn drho(&self, x: f64) -> f64 {
        self.norm * self.shape(x)
    }

    pub fn rho(&self, x: f64) -> f64 {
        self.rho_minus + self.norm * self.simpson(-self.a, x)
    }
}

/// Chebyshev differentiation matrix on the Gauss–Lobatto points `cos(πj/N)`.
fn cheb(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let c: Vec<f64> = (0..=n)
        .map(|j| {
            let edge = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 {
                edge
            } else {
                -edge
            }
        })
        .collect();
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c[i] / c[j] / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (d, x)
}

pub struct Oracle {
    pub bump: Bump,
    pub mu: f64,
    pub g: f64,
    pub n: usize,
    xs: Vec<f64>,
    d: DMatrix<f64>,
    r0: Vec<f64>,
    r1: Vec<f64>,
}

impl Oracle {
    pub fn new(bump: Bump, mu: f64, g: f64, n: usize) -> Self {
        let (d, x) = cheb(n);
        let a = bump.a;
        let xs: Vec<f64> = x.iter().map(|v| (v - 1.0) * a / 2.0).collect();
        let d = d * (2.0 / a);
        let r0 = xs.iter().map(|&v| bump.rho(v)).collect();
        let r1 = xs.iter().map(|&v| bump.drho(v)).collect();
        Oracle {
            bump,
            mu,
            g,
            n,
            xs,
            d,
            r0,
            r1,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    /// Real eigenvalues γ of the collocated pencil at `(k, λ)`, descending.
    pub fn gammas(&self, k: f64, lambda: f64) -> Vec<f64> {
        let (mu, g) = (self.mu, self.g);
        let (rm, rp) = (self.bump.rho_minus, self.bump.rho_plus);
        let np = self.n + 1;
        let dim = 4 * np;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DMatrix::<f64>::zeros(dim, dim);
        let k2 = k * k;
        for blk in 0..4 {
            for i in 0..np {
                for j in 0..np {
                    a[(blk * np + i, blk * np + j)] += self.d[(i, j)];
                }
            }
        }
        for i in 0..np {
            for blk in 0..3 {
                a[(blk * np + i, (blk + 1) * np + i)] -= 1.0;
            }
            let row = 3 * np + i;
            a[(row, i)] += lambda * k2 * self.r0[i] / mu + k2 * k2;
            a[(row, np + i)] -= lambda * self.r1[i] / mu;
            a[(row, 2 * np + i)] -= lambda * self.r0[i] / mu + 2.0 * k2;
            b[(row, i)] = self.r1[i] / mu;
        }
        let tau = (k2 + lambda * rm / mu).sqrt();
        let last = self.n;
        let at = |comp: usize, pt: usize| comp * np + pt;
        // surface rows at x = 0 (point 0), matching rows at x = -a (point N)
        let rows: [(usize, Vec<(usize, f64)>); 4] = [
            (at(0, 0), vec![(at(2, 0), 1.0), (at(0, 0), k2)]),
            (
                at(2, 0),
                vec![
                    (at(3, 0), -mu),
                    (at(1, 0), 3.0 * mu * k2 + lambda * rp),
                    (at(0, 0), g * k2 * rp / lambda),
                ],
            ),
            (
                at(1, last),
                vec![(at(2, last), 1.0), (at(1, last), -(k + tau)), (at(0, last), k * tau)],
            ),
            (
                at(3, last),
                vec![
                    (at(3, last), 1.0),
                    (at(1, last), -(k2 + k * tau + tau * tau)),
                    (at(0, last), k * tau * (k + tau)),
                ],
            ),
        ];
        for (r, entries) in rows {
            for c in 0..dim {
                a[(r, c)] = 0.0;
                b[(r, c)] = 0.0;
            }
            for (c, v) in entries {
                a[(r, c)] += v;
            }
        }
        let m = a.lu().solve(&b).expect("collocation matrix is regular");
        let eig = m.complex_eigenvalues();
        let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut real: Vec<f64> = eig
            .iter()
            .filter(|z| z.im.abs() < 1e-10 * scale && z.re > 0.0)
            .map(|z| z.re)
            .collect();
        real.sort_by(|x, y| y.total_cmp(x));
        real
    }

    /// Root of `g k² γ₁(λ) = λ` by bisection on `[lo, hi]`.
    pub fn lambda_1(&self, k: f64, lo: f64, hi: f64) -> f64 {
        let f = |l: f64| self.g * k * k * self.gammas(k, l).first().copied().unwrap_or(0.0) - l;
        let (mut lo, mut hi) = (lo, hi);
        assert!(f(lo) > 0.0 && f(hi) < 0.0, "bracket [{lo}, {hi}] does not straddle the root");
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
