//! Umbilic set of a saddle graph near the origin.
//!
//! Under the saddle condition a point is umbilic exactly where the Hessian of
//! `h` vanishes, and any umbilic curve through the origin is a straight
//! segment. Segments are found algebraically: a repeated linear factor of
//! the lowest homogeneous part of `h` proposes a direction, and exact
//! division of `h` by `x_theta^n` confirms it. A grid scan then checks that
//! every Hessian zero is explained by the strata found.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{
    linear_vanishing_order, lowest_homogeneous_part, repeated_linear_factors,
    segment_factorization_tol, AlgebraError, ROTATION_REL_TOL,
};
use crate::jet::{hessian_scale, DiffPoly, Disk, Point2};
use crate::poly::Poly2;

/// Default Hessian threshold relative to the largest Hessian entry on the
/// region.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UmbilicError {
    #[error("{} Hessian zero(s) not explained by straight strata, first at {:?}", .0.len(), .0.first())]
    UnclassifiedZeros(Vec<Point2>),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UmbilicStratum {
    IsolatedOrigin,
    /// The segment `x_theta = 0` with `h = x_theta^n * eta` in rotated
    /// coordinates.
    Segment { theta: f64, n: u32, eta: Poly2 },
}

impl UmbilicStratum {
    pub fn segment_data(&self) -> Option<(f64, u32)> {
        match self {
            UmbilicStratum::Segment { theta, n, .. } => Some((*theta, *n)),
            UmbilicStratum::IsolatedOrigin => None,
        }
    }

    /// Distance from `pt` to the stratum's line (or to the origin).
    pub fn distance(&self, pt: Point2) -> f64 {
        match self {
            UmbilicStratum::IsolatedOrigin => pt[0].hypot(pt[1]),
            UmbilicStratum::Segment { theta, .. } => (theta.cos() * pt[0] + theta.sin() * pt[1]).abs(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocusReport {
    pub strata: Vec<UmbilicStratum>,
    pub residual_zero_points: Vec<Point2>,
    /// Whether the Hessian vanishes at the origin itself.
    pub origin_umbilic: bool,
    /// Hessian zeros found by the grid scan (explained or not).
    pub zero_points: Vec<Point2>,
}

impl LocusReport {
    /// `(theta, n)` of every segment stratum.
    pub fn segments(&self) -> Vec<(f64, u32)> {
        self.strata.iter().filter_map(|s| s.segment_data()).collect()
    }
}

/// Segment strata of `h` found by factoring.
pub fn segment_strata(h: &Poly2) -> Vec<UmbilicStratum> {
    let h2 = h.without_below(2);
    let Ok((m, omega)) = lowest_homogeneous_part(&h2) else {
        return Vec::new();
    };
    if m < 3 {
        return Vec::new();
    }
    let mut out: Vec<UmbilicStratum> = Vec::new();
    for factor in repeated_linear_factors(&omega, 3) {
        if let Ok(seg) = segment_factorization_tol(&h2, factor.theta, ROTATION_REL_TOL) {
            out.push(UmbilicStratum::Segment { theta: seg.theta, n: seg.n, eta: seg.eta });
        }
    }
    out
}

/// Segment strata of an exact polynomial. Candidate directions come from
/// floating root isolation; each one is rationalized and confirmed by exact
/// division, so a reported order is proven for the rational direction.
pub fn segment_strata_exact(h: &Poly2<BigRational>) -> Vec<UmbilicStratum> {
    let h2 = h.without_below(2);
    let hf = h2.to_f64();
    let Ok((m, omega)) = lowest_homogeneous_part(&hf) else {
        return Vec::new();
    };
    if m < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for factor in repeated_linear_factors(&omega, 3) {
        let Some((a, b)) = rational_normal(factor.theta) else {
            continue;
        };
        let n = linear_vanishing_order(&h2, &a, &b, 0.0);
        if n < 3 {
            continue;
        }
        let (af, bf) = (rational_to_f64(&a), rational_to_f64(&b));
        let theta = bf.atan2(af);
        if let Ok(seg) = segment_factorization_tol(&hf, theta, ROTATION_REL_TOL) {
            out.push(UmbilicStratum::Segment { theta, n, eta: seg.eta });
        }
    }
    out
}

fn rational_to_f64(r: &BigRational) -> f64 {
    crate::poly::Coeff::to_f64(r)
}

/// A rational normal `(a, b)` proportional to `(cos theta, sin theta)`,
/// found as a continued-fraction convergent of the slope.
fn rational_normal(theta: f64) -> Option<(BigRational, BigRational)> {
    let (c, s) = (theta.cos(), theta.sin());
    let one = BigRational::from_integer(BigInt::from(1));
    if c.abs() >= s.abs() {
        Some((one, small_rational(s / c)?))
    } else {
        Some((small_rational(c / s)?, one))
    }
}

fn small_rational(v: f64) -> Option<BigRational> {
    const MAX_DEN: i64 = 100_000;
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DEN {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - v).abs() <= 1e-12 * (1.0 + v.abs()) {
            return Some(BigRational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = x - a as f64;
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}

/// Grid points where every Hessian entry is below `tol * scale`, plus the
/// limits of Gauss-Newton refinement started at local minima of the Hessian
/// norm. Refinement catches zero curves that pass between grid nodes.
pub fn hessian_zeros(d: &DiffPoly, region: &Disk, grid_n: usize, tol: f64) -> Vec<Point2> {
    let scale = hessian_scale(d, region, grid_n).max(f64::MIN_POSITIVE);
    let thresh = tol * scale;
    let n = grid_n.max(2);
    let step = region.grid_step(n);
    let nodes = crate::jet::square_grid(region.center, region.radius, n);
    let norms: Vec<f64> = nodes.iter().map(|p| d.jet(*p).hessian_max_abs()).collect();
    let third = [d.fxx.deriv_x(), d.fxx.deriv_y(), d.fxy.deriv_y(), d.fyy.deriv_y()];
    let mut out: Vec<Point2> = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let k = r * n + c;
            let p = nodes[k];
            if !region.contains(p) {
                continue;
            }
            if norms[k] <= thresh {
                out.push(p);
                continue;
            }
            // Local minimum among the 8 neighbours, and small enough that a
            // nearby zero is plausible.
            let mut is_min = norms[k] <= 0.05 * scale;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                        continue;
                    }
                    if norms[rr as usize * n + cc as usize] < norms[k] {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            if let Some(z) = refine_zero(d, &third, p, thresh, step) {
                if region.contains(z) && !out.iter().any(|q| (q[0] - z[0]).hypot(q[1] - z[1]) < 0.5 * step) {
                    out.push(z);
                }
            }
        }
    }
    out
}

/// Gauss-Newton on `(h_xx, h_xy, h_yy) = 0`, restricted to one grid step
/// around the start.
fn refine_zero(d: &DiffPoly, third: &[Poly2; 4], start: Point2, thresh: f64, step: f64) -> Option<Point2> {
    let mut p = start;
    for _ in 0..60 {
        let j = d.jet(p);
        let f = [j.fxx, j.fxy, j.fyy];
        if j.hessian_max_abs() <= thresh {
            return Some(p);
        }
        let e = |k: usize| third[k].eval(p[0], p[1]);
        let (hxxx, hxxy, hxyy, hyyy) = (e(0), e(1), e(2), e(3));
        let jac = [[hxxx, hxxy], [hxxy, hxyy], [hxyy, hyyy]];
        // Normal equations J^T J dp = -J^T f.
        let mut a = [[0.0; 2]; 2];
        let mut b = [0.0; 2];
        for row in 0..3 {
            for i in 0..2 {
                b[i] -= jac[row][i] * f[row];
                for k in 0..2 {
                    a[i][k] += jac[row][i] * jac[row][k];
                }
            }
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let tr = a[0][0] + a[1][1];
        if !(tr > 0.0) {
            return None;
        }
        // Tiny Levenberg damping keeps rank-one (curve) cases solvable.
        let lam = 1e-12 * tr;
        let (a00, a11) = (a[0][0] + lam, a[1][1] + lam);
        let det = if det.abs() < 1e-300 { a00 * a11 - a[0][1] * a[1][0] } else { det + lam * tr + lam * lam };
        let dx = (b[0] * a11 - a[0][1] * b[1]) / det;
        let dy = (a00 * b[1] - a[1][0] * b[0]) / det;
        if !dx.is_finite() || !dy.is_finite() {
            return None;
        }
        p = [p[0] + dx, p[1] + dy];
        if (p[0] - start[0]).hypot(p[1] - start[1]) > 1.5 * step {
            return None;
        }
    }
    None
}

/// Classifies the umbilic set of the saddle graph `h` on `region`.
///
/// `tol` is the Hessian threshold relative to the largest Hessian entry on
/// the region. A grid zero is explained when it lies within one grid step of
/// a segment line or of the origin.
pub fn umbilic_locus(h: &Poly2, region: &Disk, grid_n: usize, tol: f64) -> Result<LocusReport, UmbilicError> {
    classify(h, segment_strata(h), region, grid_n, tol)
}

/// As [`umbilic_locus`], with segment orders proven by exact division.
pub fn umbilic_locus_exact(
    h: &Poly2<BigRational>,
    region: &Disk,
    grid_n: usize,
    tol: f64,
) -> Result<LocusReport, UmbilicError> {
    classify(&h.to_f64(), segment_strata_exact(h), region, grid_n, tol)
}

fn classify(
    h: &Poly2,
    mut strata: Vec<UmbilicStratum>,
    region: &Disk,
    grid_n: usize,
    tol: f64,
) -> Result<LocusReport, UmbilicError> {
    let d = DiffPoly::new(h);
    let scale = hessian_scale(&d, region, grid_n);
    let origin_umbilic = d.jet([0.0, 0.0]).hessian_max_abs() <= tol * scale.max(f64::MIN_POSITIVE);
    if strata.is_empty() {
        strata.push(UmbilicStratum::IsolatedOrigin);
    }
    let zeros = hessian_zeros(&d, region, grid_n, tol);
    let step = region.grid_step(grid_n);
    let residual: Vec<Point2> = zeros
        .iter()
        .copied()
        .filter(|p| {
            let near_origin = p[0].hypot(p[1]) <= step;
            !near_origin && !strata.iter().any(|s| s.distance(*p) <= step)
        })
        .collect();
    if !residual.is_empty() {
        return Err(UmbilicError::UnclassifiedZeros(residual));
    }
    Ok(LocusReport { strata, residual_zero_points: residual, origin_umbilic, zero_points: zeros })
}

/// Largest distance from the samples to their best-fit line through the
/// origin (total least squares).
pub fn straightness_check(samples: &[Point2]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in samples {
        sxx += p[0] * p[0];
        sxy += p[0] * p[1];
        syy += p[1] * p[1];
    }
    // Direction of the larger eigenvector of the scatter matrix.
    let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let normal = [-phi.sin(), phi.cos()];
    samples.iter().map(|p| (p[0] * normal[0] + p[1] * normal[1]).abs()).fold(0.0, f64::max)
}
