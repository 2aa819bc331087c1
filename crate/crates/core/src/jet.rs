//! Second-order jets of bivariate polynomials and the saddle test.

use serde::{Deserialize, Serialize};

use crate::poly::Poly2;

pub type Point2 = [f64; 2];

/// Value, gradient and Hessian of a function at one point.
///
/// `fxy` is the single mixed partial, so the Hessian is symmetric by
/// construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub f: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

impl Jet2 {
    pub fn hessian_det(&self) -> f64 {
        self.fxx * self.fyy - self.fxy * self.fxy
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        [[self.fxx, self.fxy], [self.fxy, self.fyy]]
    }

    /// Largest absolute Hessian entry.
    pub fn hessian_max_abs(&self) -> f64 {
        self.fxx.abs().max(self.fxy.abs()).max(self.fyy.abs())
    }
}

/// Closed disk in the parameter plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn centered(radius: f64) -> Self {
        Self::new([0.0, 0.0], radius)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius * (1.0 + 1e-12)
    }

    /// Points of the `n x n` grid on the bounding square that fall inside
    /// the disk, in row-major order (y outer, x inner).
    pub fn grid(&self, n: usize) -> Vec<Point2> {
        square_grid(self.center, self.radius, n)
            .into_iter()
            .filter(|p| self.contains(*p))
            .collect()
    }

    /// Spacing of the `n x n` grid.
    pub fn grid_step(&self, n: usize) -> f64 {
        2.0 * self.radius / (n.max(2) - 1) as f64
    }
}

/// Row-major `n x n` grid over the square of half-width `half` around
/// `center`.
pub fn square_grid(center: Point2, half: f64, n: usize) -> Vec<Point2> {
    let n = n.max(2);
    let step = 2.0 * half / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let y = center[1] - half + step * r as f64;
        for c in 0..n {
            let x = center[0] - half + step * c as f64;
            out.push([x, y]);
        }
    }
    out
}

/// A polynomial together with its first and second partial derivatives,
/// for repeated jet evaluation.
#[derive(Clone, Debug)]
pub struct DiffPoly {
    pub f: Poly2,
    pub fx: Poly2,
    pub fy: Poly2,
    pub fxx: Poly2,
    pub fxy: Poly2,
    pub fyy: Poly2,
}

impl DiffPoly {
    pub fn new(f: &Poly2) -> Self {
        let fx = f.deriv_x();
        let fy = f.deriv_y();
        Self {
            fxx: fx.deriv_x(),
            fxy: fx.deriv_y(),
            fyy: fy.deriv_y(),
            f: f.clone(),
            fx,
            fy,
        }
    }

    pub fn jet(&self, pt: Point2) -> Jet2 {
        let [x, y] = pt;
        Jet2 {
            f: self.f.eval(x, y),
            fx: self.fx.eval(x, y),
            fy: self.fy.eval(x, y),
            fxx: self.fxx.eval(x, y),
            fxy: self.fxy.eval(x, y),
            fyy: self.fyy.eval(x, y),
        }
    }

    pub fn hessian(&self, pt: Point2) -> [[f64; 2]; 2] {
        let [x, y] = pt;
        let s = self.fxy.eval(x, y);
        [[self.fxx.eval(x, y), s], [s, self.fyy.eval(x, y)]]
    }
}

pub fn evaluate_jet(f: &Poly2, pt: Point2) -> Jet2 {
    DiffPoly::new(f).jet(pt)
}

/// `fxx * fyy - fxy^2` at `pt`.
pub fn hessian_det(f: &Poly2, pt: Point2) -> f64 {
    evaluate_jet(f, pt).hessian_det()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub pass: bool,
    pub worst_point: Point2,
    pub worst_value: f64,
    pub samples: usize,
}

/// Evaluates the Hessian determinant over the grid points inside `region`
/// and passes iff the largest value is at most `tol`.
pub fn saddle_check(f: &Poly2, region: &Disk, grid_n: usize, tol: f64) -> SaddleReport {
    let d = DiffPoly::new(f);
    let mut worst_value = f64::NEG_INFINITY;
    let mut worst_point = region.center;
    let pts = region.grid(grid_n.max(2));
    for p in &pts {
        let v = d.jet(*p).hessian_det();
        if v > worst_value {
            worst_value = v;
            worst_point = *p;
        }
    }
    SaddleReport {
        pass: worst_value <= tol,
        worst_point,
        worst_value,
        samples: pts.len(),
    }
}

/// Largest absolute Hessian entry over the grid points inside `region`.
pub fn hessian_scale(d: &DiffPoly, region: &Disk, grid_n: usize) -> f64 {
    region
        .grid(grid_n)
        .into_iter()
        .map(|p| d.jet(p).hessian_max_abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().cloned())
    }

    fn jet(v: [f64; 6]) -> Jet2 {
        Jet2 { f: v[0], fx: v[1], fy: v[2], fxx: v[3], fxy: v[4], fyy: v[5] }
    }

    #[test]
    fn jet_examples() {
        let saddle = p(&[(2, 0, 1.0), (0, 2, -1.0)]);
        assert_eq!(evaluate_jet(&saddle, [0.0, 0.0]), jet([0., 0., 0., 2., 0., -2.]));
        let monkey = p(&[(3, 0, 1.0), (1, 2, -3.0)]);
        assert_eq!(evaluate_jet(&monkey, [1.0, 0.0]), jet([1., 3., 0., 6., 0., -6.]));
        let xy = p(&[(1, 1, 1.0)]);
        assert_eq!(evaluate_jet(&xy, [2.0, 3.0]), jet([6., 3., 2., 0., 1., 0.]));
    }

    #[test]
    fn hessian_det_examples() {
        let saddle = p(&[(2, 0, 1.0), (0, 2, -1.0)]);
        let xy = p(&[(1, 1, 1.0)]);
        for pt in [[0.0, 0.0], [0.3, -1.2], [5.0, 2.0]] {
            assert_eq!(hessian_det(&saddle, pt), -4.0);
            assert_eq!(hessian_det(&xy, pt), -1.0);
        }
        // x^3 (1 + y): h_xx = 6x(1+y), h_xy = 3x^2, h_yy = 0.
        let f = p(&[(3, 0, 1.0), (3, 1, 1.0)]);
        for (x, y) in [(0.5, 0.25), (-1.0, 2.0), (0.0, 0.7)] {
            let expect = -9.0 * f64::powi(x, 4);
            assert!((hessian_det(&f, [x, y]) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn saddle_check_examples() {
        let unit = Disk::centered(1.0);
        let r = saddle_check(&p(&[(1, 1, 1.0)]), &unit, 21, 0.0);
        assert!(r.pass);
        assert_eq!(r.worst_value, -1.0);

        let r = saddle_check(&p(&[(2, 0, 1.0), (0, 2, 1.0)]), &unit, 21, 0.0);
        assert!(!r.pass);
        assert_eq!(r.worst_value, 4.0);

        // det = -36 (x^2 + y^2), maximal (zero) at the origin.
        let r = saddle_check(&p(&[(3, 0, 1.0), (1, 2, -3.0)]), &unit, 21, 0.0);
        assert!(r.pass);
        assert_eq!(r.worst_value, 0.0);
        assert_eq!(r.worst_point, [0.0, 0.0]);
    }

    #[test]
    fn grid_is_row_major_and_clipped() {
        let g = square_grid([0.0, 0.0], 1.0, 3);
        assert_eq!(g[0], [-1.0, -1.0]);
        assert_eq!(g[1], [0.0, -1.0]);
        assert_eq!(g[3], [-1.0, 0.0]);
        assert_eq!(Disk::centered(1.0).grid(3).len(), 5);
    }
}
