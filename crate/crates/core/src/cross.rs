//! Unordered line pairs ("crosses") defined by the quadratic line equation
//! `-m12 dx^2 + (m11 - m22) dx dy + m21 dy^2 = 0` of a 2x2 matrix.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

pub type Mat2 = [[f64; 2]; 2];

/// Two direction angles mod pi at one point.
///
/// When built from a matrix, `theta1` belongs to the larger eigenvalue
/// (the `kappa_1` line) and `theta2` to the smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSample {
    pub theta1: f64,
    pub theta2: f64,
    pub degenerate: bool,
    /// Computed from the exactly divided matrix near an umbilic segment.
    pub extended: bool,
}

impl CrossSample {
    pub fn degenerate() -> Self {
        Self { theta1: f64::NAN, theta2: f64::NAN, degenerate: true, extended: false }
    }

    pub fn angles(&self) -> [f64; 2] {
        [self.theta1, self.theta2]
    }

    /// Whether this cross equals `other` as an unordered pair, within `tol`.
    pub fn same_cross(&self, other: &CrossSample, tol: f64) -> bool {
        let direct = line_distance(self.theta1, other.theta1) <= tol
            && line_distance(self.theta2, other.theta2) <= tol;
        let swapped = line_distance(self.theta1, other.theta2) <= tol
            && line_distance(self.theta2, other.theta1) <= tol;
        direct || swapped
    }

    pub fn contains_direction(&self, theta: f64, tol: f64) -> bool {
        line_distance(self.theta1, theta) <= tol || line_distance(self.theta2, theta) <= tol
    }
}

/// Reduces an angle to `[0, pi)`.
pub fn reduce_line_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two lines given by angles, in `[0, pi/2]`.
pub fn line_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Signed difference `b - a` reduced to `(-pi/2, pi/2]`.
pub fn line_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a).rem_euclid(PI);
    if d > FRAC_PI_2 {
        d -= PI;
    }
    d
}

/// Signed difference `b - a` reduced to `(-pi, pi]`.
pub fn angle_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a).rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    d
}

/// Coefficients `(a, b, c)` of `a dx^2 + b dx dy + c dy^2 = 0` for `m`.
pub fn line_equation_coeffs(m: &Mat2) -> (f64, f64, f64) {
    (-m[0][1], m[0][0] - m[1][1], m[1][0])
}

/// Coefficients below this fraction of the largest one are treated as zero.
pub const COEFF_REL_ZERO: f64 = 1e-13;

/// Solves `a dx^2 + b dx dy + c dy^2 = 0` for its two line directions in
/// `[0, pi)`. Returns `None` when all coefficients vanish or the roots are
/// complex.
///
/// The larger-magnitude root is computed first and the other one from the
/// product of roots, which avoids cancellation.
pub fn solve_line_equation(a: f64, b: f64, c: f64) -> Option<[f64; 2]> {
    let maxc = a.abs().max(b.abs()).max(c.abs());
    if !(maxc > 0.0) || !maxc.is_finite() {
        return None;
    }
    let z = |v: f64| if v.abs() < COEFF_REL_ZERO * maxc { 0.0 } else { v };
    let (a, b, c) = (z(a), z(b), z(c));
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc < -1e-10 * (b * b + 4.0 * (a * c).abs()) {
            return None;
        }
        disc = 0.0;
    }
    let sq = disc.sqrt();
    let sgn = if b < 0.0 { -1.0 } else { 1.0 };
    let q = -0.5 * (b + sgn * sq);
    let angles = if c.abs() >= a.abs() {
        if c == 0.0 {
            // Only b dx dy = 0 is left.
            [0.0, FRAC_PI_2]
        } else {
            // c m^2 + b m + a = 0 for the slope m = dy/dx.
            let m1 = q / c;
            let m2 = if q != 0.0 { a / q } else { m1 };
            [m1.atan(), m2.atan()]
        }
    } else {
        // a s^2 + b s + c = 0 for s = dx/dy, direction (s, 1).
        let s1 = q / a;
        let s2 = if q != 0.0 { c / q } else { s1 };
        [1.0f64.atan2(s1), 1.0f64.atan2(s2)]
    };
    Some([reduce_line_angle(angles[0]), reduce_line_angle(angles[1])])
}

/// Eigenvalue of `m^T` along the (eigen)direction `theta`.
pub fn rayleigh(m: &Mat2, theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    m[0][0] * c * c + (m[0][1] + m[1][0]) * c * s + m[1][1] * s * s
}

/// The cross of eigenlines of `m^T`, with `theta1` on the larger eigenvalue.
pub fn cross_from_matrix(m: &Mat2) -> Option<CrossSample> {
    let (a, b, c) = line_equation_coeffs(m);
    let [t1, t2] = solve_line_equation(a, b, c)?;
    let (theta1, theta2) = if rayleigh(m, t1) >= rayleigh(m, t2) { (t1, t2) } else { (t2, t1) };
    Some(CrossSample { theta1, theta2, degenerate: false, extended: false })
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn mat_det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn mat_adj(a: &Mat2) -> Mat2 {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}
