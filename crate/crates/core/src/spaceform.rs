//! The gnomonic chart of the upper hemisphere of S^3, graph immersions and
//! their fundamental forms in R^3 and S^3.
//!
//! A graph `z = h(x, y)` in the chart corresponds to the immersion
//! `psi(x, y) = (1, x, y, h) / sqrt(W)` with `W = 1 + x^2 + y^2 + h^2`. Its
//! forms are
//!
//! ```text
//! I  = M / W^2
//! II = (r s; s t) / (sqrt(W) sqrt(V)),   V = 1 + p^2 + q^2 + (x p + y q - h)^2
//! ```
//!
//! where `p, q, r, s, t` are the first and second partials of `h` and `M` is
//! the polynomial matrix built in [`metric_numerator`]. The Euclidean graph
//! is the same picture with `W = 1`, `M = id + grad h grad h^T` and
//! `V = 1 + p^2 + q^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cross::{cross_from_matrix, mat_adj, mat_det, mat_mul, CrossSample, Mat2};
use crate::jet::{DiffPoly, Jet2, Point2};
use crate::poly::{Coeff, Poly2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is not on the open upper hemisphere (x0 = {0})")]
    HemisphereViolation(f64),
    #[error("shape operator is a multiple of the identity at ({x}, {y})")]
    UmbilicPoint { x: f64, y: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ambient {
    Euclidean,
    Spherical,
}

/// A point of R^4, usually on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point4(pub [f64; 4]);

impl Point4 {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Point4(self.0.map(|v| v / n))
    }

    pub fn dot(&self, other: &Point4) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// Central projection of the open upper hemisphere `x0 > 0` onto R^3.
pub fn gnomonic(p: &Point4) -> Result<[f64; 3], GeometryError> {
    let [x0, x1, x2, x3] = p.0;
    if !(x0 > 0.0) {
        return Err(GeometryError::HemisphereViolation(x0));
    }
    Ok([x1 / x0, x2 / x0, x3 / x0])
}

pub fn gnomonic_inverse(q: [f64; 3]) -> Point4 {
    let w = (1.0 + q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    Point4([1.0 / w, q[0] / w, q[1] / w, q[2] / w])
}

/// `psi(x, y) = (1, x, y, h(x, y)) / sqrt(1 + x^2 + y^2 + h^2)`.
pub fn graph_immersion(h: &Poly2, pt: Point2) -> Point4 {
    gnomonic_inverse([pt[0], pt[1], h.eval(pt[0], pt[1])])
}

/// Coefficients of the first (`E, F, G`) and second (`e, f, g`) fundamental
/// forms of a graph at one point.
#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalForms {
    pub E: f64,
    pub F: f64,
    pub G: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub ambient: Ambient,
}

impl FundamentalForms {
    pub fn first(&self) -> Mat2 {
        [[self.E, self.F], [self.F, self.G]]
    }

    pub fn second(&self) -> Mat2 {
        [[self.e, self.f], [self.f, self.g]]
    }

    /// `II * I^{-1}`, computed directly in floating point.
    pub fn shape_operator(&self) -> Mat2 {
        let first = self.first();
        let inv_det = 1.0 / mat_det(&first);
        let adj = mat_adj(&first);
        let prod = mat_mul(&self.second(), &adj);
        prod.map(|row| row.map(|v| v * inv_det))
    }
}

/// The polynomial-valued matrix `M` with `I = M / W^2` (spherical) or
/// `I = M` (Euclidean), evaluated from a 1-jet.
pub fn metric_numerator(jet: &Jet2, pt: Point2, ambient: Ambient) -> Mat2 {
    let (h, p, q) = (jet.f, jet.fx, jet.fy);
    match ambient {
        Ambient::Euclidean => [[1.0 + p * p, p * q], [p * q, 1.0 + q * q]],
        Ambient::Spherical => {
            let [x, y] = pt;
            let m11 = (h - p * x).powi(2) + (1.0 + p * p) * (1.0 + y * y);
            let m12 = p * (q * (1.0 + x * x + y * y) - h * y) - x * (h * q + y);
            let m22 = (h - q * y).powi(2) + (1.0 + q * q) * (1.0 + x * x);
            [[m11, m12], [m12, m22]]
        }
    }
}

/// The positive factors `(W, V)` of the two forms.
pub fn form_prefactors(jet: &Jet2, pt: Point2, ambient: Ambient) -> (f64, f64) {
    let (h, p, q) = (jet.f, jet.fx, jet.fy);
    match ambient {
        Ambient::Euclidean => (1.0, 1.0 + p * p + q * q),
        Ambient::Spherical => {
            let [x, y] = pt;
            let w = 1.0 + x * x + y * y + h * h;
            let v = 1.0 + p * p + q * q + (x * p + y * q - h).powi(2);
            (w, v)
        }
    }
}

pub fn fundamental_forms_jet(jet: &Jet2, pt: Point2, ambient: Ambient) -> FundamentalForms {
    let m = metric_numerator(jet, pt, ambient);
    let (w, v) = form_prefactors(jet, pt, ambient);
    let i_scale = 1.0 / (w * w);
    let ii_scale = 1.0 / (w.sqrt() * v.sqrt());
    FundamentalForms {
        E: m[0][0] * i_scale,
        F: m[0][1] * i_scale,
        G: m[1][1] * i_scale,
        e: jet.fxx * ii_scale,
        f: jet.fxy * ii_scale,
        g: jet.fyy * ii_scale,
        ambient,
    }
}

pub fn fundamental_forms(h: &Poly2, pt: Point2, ambient: Ambient) -> FundamentalForms {
    fundamental_forms_jet(&DiffPoly::new(h).jet(pt), pt, ambient)
}

/// `B = Hess * adj(M)` at one point.
pub fn shape_numerator_at(jet: &Jet2, pt: Point2, ambient: Ambient) -> Mat2 {
    let m = metric_numerator(jet, pt, ambient);
    mat_mul(&jet.hessian(), &mat_adj(&m))
}

/// The positive scalar `mu` with `II * I^{-1} = B / mu`.
pub fn shape_scale(jet: &Jet2, pt: Point2, ambient: Ambient) -> f64 {
    let m = metric_numerator(jet, pt, ambient);
    let (w, v) = form_prefactors(jet, pt, ambient);
    mat_det(&m) * v.sqrt() / w.powf(1.5)
}

/// The entries of `B = (r s; s t) * adj(M)` as polynomials, so that they can
/// be divided exactly along umbilic segments.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeNumerator<C: Coeff = f64> {
    /// Row-major: `[B11, B12, B21, B22]`.
    pub entries: [Poly2<C>; 4],
    pub ambient: Ambient,
}

impl<C: Coeff> ShapeNumerator<C> {
    pub fn new(h: &Poly2<C>, ambient: Ambient) -> Self {
        let p = h.deriv_x();
        let q = h.deriv_y();
        let r = p.deriv_x();
        let s = p.deriv_y();
        let t = q.deriv_y();
        let one = Poly2::constant(C::one());
        let (m11, m12, m22) = match ambient {
            Ambient::Euclidean => (&one + &(&p * &p), &p * &q, &one + &(&q * &q)),
            Ambient::Spherical => {
                let x = Poly2::x();
                let y = Poly2::y();
                let xx = &x * &x;
                let yy = &y * &y;
                let hp = h - &(&p * &x);
                let hq = h - &(&q * &y);
                let m11 = &(&hp * &hp) + &(&(&one + &(&p * &p)) * &(&one + &yy));
                let inner = &(&q * &(&(&one + &xx) + &yy)) - &(h * &y);
                let m12 = &(&p * &inner) - &(&x * &(&(h * &q) + &y));
                let m22 = &(&hq * &hq) + &(&(&one + &(&q * &q)) * &(&one + &xx));
                (m11, m12, m22)
            }
        };
        let b11 = &(&r * &m22) - &(&s * &m12);
        let b12 = &(&s * &m11) - &(&r * &m12);
        let b21 = &(&s * &m22) - &(&t * &m12);
        let b22 = &(&t * &m11) - &(&s * &m12);
        Self { entries: [b11, b12, b21, b22], ambient }
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&Poly2<C>) -> Poly2<D>) -> ShapeNumerator<D> {
        let [a, b, c, d] = &self.entries;
        ShapeNumerator { entries: [f(a), f(b), f(c), f(d)], ambient: self.ambient }
    }
}

impl ShapeNumerator<f64> {
    pub fn eval(&self, pt: Point2) -> Mat2 {
        let e = |k: usize| self.entries[k].eval(pt[0], pt[1]);
        [[e(0), e(1)], [e(2), e(3)]]
    }
}

/// Sign of `eg - f^2`, which is the sign of the extrinsic curvature.
pub fn extrinsic_curvature_sign(forms: &FundamentalForms) -> i8 {
    let k = forms.e * forms.g - forms.f * forms.f;
    if k > 0.0 {
        1
    } else if k < 0.0 {
        -1
    } else {
        0
    }
}

/// Principal directions from a matrix positively proportional to the shape
/// operator (such as `B`).
pub fn principal_cross(b: &Mat2, pt: Point2) -> Result<CrossSample, GeometryError> {
    let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let coeffs = [b[0][1].abs(), (b[0][0] - b[1][1]).abs(), b[1][0].abs()];
    let umbilic = GeometryError::UmbilicPoint { x: pt[0], y: pt[1] };
    if coeffs.iter().all(|c| *c <= 1e-13 * scale) {
        return Err(umbilic);
    }
    cross_from_matrix(b).ok_or(umbilic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross::line_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn p(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().cloned())
    }

    fn random_poly(rng: &mut ChaCha8Rng, max_deg: u32) -> Poly2 {
        let mut terms = Vec::new();
        for d in 0..=max_deg {
            for i in 0..=d {
                terms.push((i, d - i, rng.gen_range(-1.0..1.0)));
            }
        }
        Poly2::from_terms(terms)
    }

    #[test]
    fn gnomonic_examples() {
        assert_eq!(gnomonic(&Point4([1.0, 0.0, 0.0, 0.0])).unwrap(), [0.0, 0.0, 0.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let q = gnomonic(&Point4([r, r, 0.0, 0.0])).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-15 && q[1] == 0.0 && q[2] == 0.0);
        assert!(matches!(
            gnomonic(&Point4([0.0, 1.0, 0.0, 0.0])),
            Err(GeometryError::HemisphereViolation(_))
        ));
        // Points with x0 = x3 land on the plane z = 1.
        let s = Point4([0.5, 0.5, 0.5, 0.5]);
        assert_eq!(gnomonic(&s).unwrap()[2], 1.0);
        let inv = gnomonic_inverse([1.0, 0.0, 0.0]);
        assert!((inv.0[0] - r).abs() < 1e-15 && (inv.0[1] - r).abs() < 1e-15);
    }

    #[test]
    fn immersion_examples() {
        let h = p(&[(1, 1, 1.0), (3, 0, 2.0)]);
        assert_eq!(graph_immersion(&h, [0.0, 0.0]), Point4([1.0, 0.0, 0.0, 0.0]));
        let r = graph_immersion(&Poly2::zero(), [1.0, 0.0]);
        assert!((r.0[0] - r.0[1]).abs() < 1e-16 && r.0[2] == 0.0 && r.0[3] == 0.0);
    }

    #[test]
    fn forms_at_origin_jet() {
        let h = p(&[(2, 0, 1.5), (1, 1, -0.7), (0, 2, 0.2), (3, 1, 4.0)]);
        let f = fundamental_forms(&h, [0.0, 0.0], Ambient::Spherical);
        assert_eq!((f.E, f.F, f.G), (1.0, 0.0, 1.0));
        assert_eq!((f.e, f.f, f.g), (3.0, -0.7, 0.4));
        let f = fundamental_forms(&Poly2::zero(), [0.4, -2.0], Ambient::Spherical);
        assert_eq!((f.e, f.f, f.g), (0.0, 0.0, 0.0));
        assert_eq!(extrinsic_curvature_sign(&f), 0);
    }

    #[test]
    fn xy_has_negative_curvature_in_both_ambients() {
        let h = p(&[(1, 1, 1.0)]);
        for amb in [Ambient::Spherical, Ambient::Euclidean] {
            assert_eq!(extrinsic_curvature_sign(&fundamental_forms(&h, [0.3, -0.2], amb)), -1);
            assert_eq!(extrinsic_curvature_sign(&fundamental_forms(&h, [0.0, 0.0], amb)), -1);
        }
    }

    fn psi_fd(h: &Poly2, pt: Point2, dx: f64, dy: f64) -> [f64; 4] {
        graph_immersion(h, [pt[0] + dx, pt[1] + dy]).0
    }

    fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
        a.iter().zip(b).map(|(u, v)| u * v).sum()
    }

    /// Unit vector of R^4 orthogonal to three given vectors.
    fn normal4(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> [f64; 4] {
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let mut n = [0.0; 4];
        for (k, nk) in n.iter_mut().enumerate() {
            let cols: Vec<usize> = (0..4).filter(|&j| j != k).collect();
            let minor = [a, b, c].map(|v| [v[cols[0]], v[cols[1]], v[cols[2]]]);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *nk = sign * det3(minor);
        }
        let len = dot4(&n, &n).sqrt();
        n.map(|v| v / len)
    }

    /// Pullback metric and second form of the spherical immersion by finite
    /// differences, independent of the closed-form matrices.
    #[test]
    fn spherical_forms_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = 1e-4;
        for _ in 0..40 {
            let h = random_poly(&mut rng, 3);
            let pt = [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)];
            let c = psi_fd(&h, pt, 0.0, 0.0);
            let xp = psi_fd(&h, pt, e, 0.0);
            let xm = psi_fd(&h, pt, -e, 0.0);
            let yp = psi_fd(&h, pt, 0.0, e);
            let ym = psi_fd(&h, pt, 0.0, -e);
            let pp = psi_fd(&h, pt, e, e);
            let pm = psi_fd(&h, pt, e, -e);
            let mp = psi_fd(&h, pt, -e, e);
            let mm = psi_fd(&h, pt, -e, -e);
            let d = |a: &[f64; 4], b: &[f64; 4], s: f64| {
                let mut o = [0.0; 4];
                for k in 0..4 {
                    o[k] = (a[k] - b[k]) / s;
                }
                o
            };
            let px = d(&xp, &xm, 2.0 * e);
            let py = d(&yp, &ym, 2.0 * e);
            let mut pxx = [0.0; 4];
            let mut pyy = [0.0; 4];
            let mut pxy = [0.0; 4];
            for k in 0..4 {
                pxx[k] = (xp[k] - 2.0 * c[k] + xm[k]) / (e * e);
                pyy[k] = (yp[k] - 2.0 * c[k] + ym[k]) / (e * e);
                pxy[k] = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * e * e);
            }
            let n = normal4(&c, &px, &py);
            let f = fundamental_forms(&h, pt, Ambient::Spherical);
            let tol = 1e-6;
            assert!((dot4(&px, &px) - f.E).abs() < tol);
            assert!((dot4(&px, &py) - f.F).abs() < tol);
            assert!((dot4(&py, &py) - f.G).abs() < tol);
            let ii = [dot4(&pxx, &n), dot4(&pxy, &n), dot4(&pyy, &n)];
            // The normal's orientation is arbitrary; match it to the formula.
            let sign = if ii[0] * f.e + ii[1] * f.f + ii[2] * f.g >= 0.0 { 1.0 } else { -1.0 };
            let scale = 1.0 + f.e.abs().max(f.f.abs()).max(f.g.abs());
            assert!((sign * ii[0] - f.e).abs() < 1e-4 * scale, "{:?} vs {:?}", ii, f);
            assert!((sign * ii[1] - f.f).abs() < 1e-4 * scale);
            assert!((sign * ii[2] - f.g).abs() < 1e-4 * scale);
        }
    }

    #[test]
    fn numerator_is_positive_multiple_of_shape_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let h = random_poly(&mut rng, 4);
            let d = DiffPoly::new(&h);
            for amb in [Ambient::Spherical, Ambient::Euclidean] {
                let pt = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let jet = d.jet(pt);
                let alpha = fundamental_forms_jet(&jet, pt, amb).shape_operator();
                let b = shape_numerator_at(&jet, pt, amb);
                let mu = shape_scale(&jet, pt, amb);
                assert!(mu > 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        let diff = (b[i][j] / mu - alpha[i][j]).abs();
                        assert!(diff < 1e-10 * (1.0 + alpha[i][j].abs()));
                    }
                }
                let poly_b = ShapeNumerator::new(&h, amb).eval(pt);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((poly_b[i][j] - b[i][j]).abs() < 1e-9 * (1.0 + b[i][j].abs()));
                    }
                }
                if let (Ok(c1), Some(c2)) = (principal_cross(&b, pt), cross_from_matrix(&alpha)) {
                    assert!(c1.same_cross(&c2, 1e-8));
                }
            }
        }
    }

    #[test]
    fn numerator_at_origin_is_hessian() {
        let h = p(&[(2, 0, 1.0), (1, 1, 2.0), (0, 2, -3.0), (2, 2, 5.0)]);
        let b = ShapeNumerator::new(&h, Ambient::Spherical).eval([0.0, 0.0]);
        assert_eq!(b, [[2.0, 2.0], [2.0, -6.0]]);
    }

    #[test]
    fn numerator_divisible_along_segment() {
        let h = p(&[(3, 0, 1.0), (3, 1, 1.0)]).to_exact();
        let b = ShapeNumerator::new(&h, Ambient::Spherical);
        let one = <num_rational::BigRational as Coeff>::one();
        let zero = <num_rational::BigRational as Coeff>::zero();
        for e in &b.entries {
            assert!(e.divide_by_linear(&one, &zero, 0.0).is_some());
        }
    }

    #[test]
    fn principal_cross_examples() {
        let at = |h: Poly2| {
            let jet = DiffPoly::new(&h).jet([0.0, 0.0]);
            principal_cross(&shape_numerator_at(&jet, [0.0, 0.0], Ambient::Spherical), [0.0, 0.0])
        };
        let c = at(p(&[(2, 0, 1.0), (0, 2, -1.0)])).unwrap();
        assert!(c.contains_direction(0.0, 1e-15) && c.contains_direction(FRAC_PI_2, 1e-15));
        let c = at(p(&[(1, 1, 1.0)])).unwrap();
        assert!(line_distance(c.theta1, FRAC_PI_4) < 1e-15);
        assert!(line_distance(c.theta2, 3.0 * FRAC_PI_4) < 1e-15);
        assert!(matches!(
            at(p(&[(3, 0, 1.0), (1, 2, -3.0)])),
            Err(GeometryError::UmbilicPoint { .. })
        ));
    }

    #[test]
    fn det_numerator_nonpositive_on_saddles() {
        let h = p(&[(1, 1, 1.0), (3, 0, 0.3), (1, 2, -0.9)]);
        let sn = ShapeNumerator::new(&h, Ambient::Spherical);
        let d = DiffPoly::new(&h);
        for pt in crate::jet::Disk::centered(1.0).grid(15) {
            if d.jet(pt).hessian_det() <= 0.0 {
                assert!(mat_det(&sn.eval(pt)) <= 1e-12);
            }
        }
    }
}
