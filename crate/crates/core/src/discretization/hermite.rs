//! Cubic Hermite shape functions on an element of width `h`.
//!
//! Local DOF order is `[v(x0), v'(x0), v(x1), v'(x1)]`; `t in [0, 1]` is the
//! reference coordinate.

/// Values and first three derivatives of the four shape functions.
#[derive(Debug, Clone, Copy)]
pub struct ShapeValues {
    pub n: [f64; 4],
    pub d1: [f64; 4],
    pub d2: [f64; 4],
    pub d3: [f64; 4],
}

pub fn shape(t: f64, h: f64) -> ShapeValues {
    let t2 = t * t;
    let t3 = t2 * t;
    ShapeValues {
        n: [
            1.0 - 3.0 * t2 + 2.0 * t3,
            h * (t - 2.0 * t2 + t3),
            3.0 * t2 - 2.0 * t3,
            h * (t3 - t2),
        ],
        d1: [
            (6.0 * t2 - 6.0 * t) / h,
            1.0 - 4.0 * t + 3.0 * t2,
            (6.0 * t - 6.0 * t2) / h,
            3.0 * t2 - 2.0 * t,
        ],
        d2: [
            (12.0 * t - 6.0) / (h * h),
            (6.0 * t - 4.0) / h,
            (6.0 - 12.0 * t) / (h * h),
            (6.0 * t - 2.0) / h,
        ],
        d3: [12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)],
    }
}

impl ShapeValues {
    /// Combines local coefficients into `[v, v', v'', v''']`.
    pub fn combine(&self, c: &[f64]) -> [f64; 4] {
        let dot = |b: &[f64; 4]| b.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        [dot(&self.n), dot(&self.d1), dot(&self.d2), dot(&self.d3)]
    }
}
