//! Factorizations of polynomial germs: lowest homogeneous part, perfect
//! powers of a linear form, and the `x_theta^n * eta` split along an umbilic
//! segment.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Coeff, Poly2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("function vanishes identically")]
    ZeroFunction,
    #[error("lowest homogeneous degree {0} is below 2 (normalize the 1-jet first)")]
    LowOrder(u32),
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("form has at least two distinct projective roots")]
    NotAPower,
    #[error("vanishing order {0} along the line is below 3: not an umbilic segment")]
    OrderTooLow(u32),
    #[error("rotation (cos, sin) is not a rational unit vector")]
    IrrationalRotation,
}

/// Relative tolerance for discarding rounding residue after a floating
/// rotation.
pub const ROTATION_REL_TOL: f64 = 1e-9;

/// Returns `(m, omega)` where `omega` collects the terms of minimal total
/// degree `m`.
pub fn lowest_homogeneous_part<C: Coeff>(f: &Poly2<C>) -> Result<(u32, Poly2<C>), AlgebraError> {
    let m = f.min_degree().ok_or(AlgebraError::ZeroFunction)?;
    if m < 2 {
        return Err(AlgebraError::LowOrder(m));
    }
    Ok((m, f.homogeneous_part(m)))
}

/// `omega = a * (alpha x + beta y)^n` with `(alpha, beta)` a unit vector whose
/// first nonzero component is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPower {
    pub a: f64,
    pub direction: [f64; 2],
    pub n: u32,
}

impl LinearPower {
    pub fn to_poly(&self) -> Poly2 {
        let l = Poly2::from_terms([(1, 0, self.direction[0]), (0, 1, self.direction[1])]);
        l.pow(self.n).scale(&self.a)
    }
}

/// Decides whether a homogeneous form is a multiple of the `n`-th power of a
/// single linear form.
///
/// With floating coefficients the comparison is made at relative tolerance
/// `1e-9`; exact coefficients are compared exactly.
pub fn linear_power_factor<C: Coeff>(omega: &Poly2<C>) -> Result<LinearPower, AlgebraError> {
    let n = omega.degree().ok_or(AlgebraError::ZeroFunction)?;
    if omega.min_degree() != Some(n) {
        return Err(AlgebraError::NotHomogeneous);
    }
    let tol = 1e-9 * omega.max_abs_coeff();
    let cx = omega.coeff(n, 0);
    let cy = omega.coeff(0, n);
    let nn = C::from_i64(n as i64);
    // Normalize on the dominant pure power for conditioning.
    let x_leading = cx.to_f64().abs() >= cy.to_f64().abs();
    let (lead, ratio) = if x_leading {
        if cx.negligible(tol) {
            return Err(AlgebraError::NotAPower);
        }
        (cx.clone(), omega.coeff(n - 1, 1) / (nn * cx.clone()))
    } else {
        if cy.negligible(tol) {
            return Err(AlgebraError::NotAPower);
        }
        (cy.clone(), omega.coeff(1, n - 1) / (nn * cy.clone()))
    };
    let form = if x_leading {
        Poly2::from_terms([(1, 0, C::one()), (0, 1, ratio.clone())])
    } else {
        Poly2::from_terms([(1, 0, ratio.clone()), (0, 1, C::one())])
    };
    let candidate = form.pow(n).scale(&lead);
    let diff = omega - &candidate;
    if diff.terms().iter().any(|(_, _, c)| !c.negligible(tol)) {
        return Err(AlgebraError::NotAPower);
    }
    let r = ratio.to_f64();
    let norm = (1.0 + r * r).sqrt();
    let mut direction = if x_leading { [1.0 / norm, r / norm] } else { [r / norm, 1.0 / norm] };
    let mut a = lead.to_f64() * norm.powi(n as i32);
    if direction[0] < 0.0 || (direction[0] == 0.0 && direction[1] < 0.0) {
        direction = [-direction[0], -direction[1]];
        if n % 2 == 1 {
            a = -a;
        }
    }
    if direction[0] == 0.0 {
        direction[0] = 0.0; // normalize -0.0
    }
    Ok(LinearPower { a, direction, n })
}

/// `f = x_theta^n * eta(x_theta, y_theta)` where
/// `x_theta = cos(theta) x + sin(theta) y` and `y_theta = -sin(theta) x + cos(theta) y`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentFactorization<C: Coeff = f64> {
    pub theta: f64,
    pub n: u32,
    /// Cofactor in rotated coordinates `(x_theta, y_theta)`.
    pub eta: Poly2<C>,
}

impl<C: Coeff> SegmentFactorization<C> {
    /// Unit normal of the segment line.
    pub fn normal(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    /// Unit tangent of the segment line.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.theta.sin(), self.theta.cos()]
    }

    /// Rebuilds `x_theta^n * eta` in rotated coordinates.
    pub fn rotated_product(&self) -> Poly2<C> {
        Poly2::from_terms(self.eta.terms().iter().map(|(i, j, c)| (i + self.n, *j, c.clone())))
    }
}

impl SegmentFactorization<f64> {
    /// Largest coefficient error between the rotated input and
    /// `x_theta^n * eta`.
    pub fn reconstruction_error(&self, f: &Poly2) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let g = f.rotated(&c, &s);
        (&g - &self.rotated_product()).max_abs_coeff()
    }

    /// `eta` evaluated at a point given in the original `(x, y)` coordinates.
    pub fn eta_at(&self, pt: [f64; 2]) -> f64 {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        self.eta.eval(c * pt[0] + s * pt[1], -s * pt[0] + c * pt[1])
    }
}

/// Splits off the largest power of `x_theta` dividing `f`.
pub fn segment_factorization(f: &Poly2, theta: f64) -> Result<SegmentFactorization, AlgebraError> {
    segment_factorization_tol(f, theta, ROTATION_REL_TOL)
}

/// As [`segment_factorization`] with an explicit relative tolerance for the
/// rotation residue.
pub fn segment_factorization_tol(
    f: &Poly2,
    theta: f64,
    rel_tol: f64,
) -> Result<SegmentFactorization, AlgebraError> {
    if f.is_zero() {
        return Err(AlgebraError::ZeroFunction);
    }
    let g = f.rotated(&theta.cos(), &theta.sin()).cleaned(rel_tol);
    let n = g.x_order().ok_or(AlgebraError::ZeroFunction)?;
    if n < 3 {
        return Err(AlgebraError::OrderTooLow(n));
    }
    let eta = g.divide_by_x_power(n).expect("order computed from the same terms");
    Ok(SegmentFactorization { theta, n, eta })
}

/// Exact variant: the rotation must be a rational unit vector.
pub fn segment_factorization_exact(
    f: &Poly2<BigRational>,
    cos: &BigRational,
    sin: &BigRational,
) -> Result<SegmentFactorization<BigRational>, AlgebraError> {
    let unit = cos.clone() * cos.clone() + sin.clone() * sin.clone();
    if unit != <BigRational as Coeff>::one() {
        return Err(AlgebraError::IrrationalRotation);
    }
    if f.is_zero() {
        return Err(AlgebraError::ZeroFunction);
    }
    let g = f.rotated(cos, sin);
    let n = g.x_order().ok_or(AlgebraError::ZeroFunction)?;
    if n < 3 {
        return Err(AlgebraError::OrderTooLow(n));
    }
    let eta = g.divide_by_x_power(n).expect("order computed from the same terms");
    let theta = sin.to_f64().atan2(cos.to_f64());
    Ok(SegmentFactorization { theta, n, eta })
}

/// Order of vanishing of `f` along the line `a x + b y = 0`, by repeated
/// exact division. Exact coefficients give a proof; floating ones use
/// `rel_tol`.
pub fn linear_vanishing_order<C: Coeff>(f: &Poly2<C>, a: &C, b: &C, rel_tol: f64) -> u32 {
    let mut n = 0;
    let mut g = f.clone();
    while !g.is_zero() {
        match g.divide_by_linear(a, b, rel_tol) {
            Some(q) => {
                g = q;
                n += 1;
            }
            None => break,
        }
    }
    n
}

// ---------------------------------------------------------------------------
// Univariate real roots, used to locate repeated linear factors of binary
// forms.

fn uni_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Rounding scale of evaluating `p` at `x`: the absolute-coefficient sum at
/// radius `max(|x|, 1)`. Measuring against the terms at `|x|` itself would
/// make an exact root at `0` look like a non-root.
fn uni_abs_eval(p: &[f64], x: f64) -> f64 {
    let ax = x.abs().max(1.0);
    p.iter().rev().fold(0.0, |acc, c| acc * ax + c.abs())
}

fn uni_deriv(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

fn uni_trim(p: &[f64]) -> Vec<f64> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut v = p.to_vec();
    while let Some(last) = v.last() {
        if last.abs() <= 1e-14 * scale {
            v.pop();
        } else {
            break;
        }
    }
    v
}

/// All real roots of `p` (ascending coefficients), found by isolating each
/// root between consecutive critical points and bisecting.
pub fn real_roots(p: &[f64]) -> Vec<f64> {
    let p = uni_trim(p);
    if p.len() <= 1 {
        return Vec::new();
    }
    if p.len() == 2 {
        return vec![-p[0] / p[1]];
    }
    let lead = *p.last().unwrap();
    let bound = 1.0 + p[..p.len() - 1].iter().fold(0.0f64, |m, c| m.max((c / lead).abs()));
    let mut crit: Vec<f64> = real_roots(&uni_deriv(&p))
        .into_iter()
        .filter(|c| c.abs() < bound)
        .collect();
    crit.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut knots = vec![-bound];
    knots.extend(crit.iter().cloned());
    knots.push(bound);

    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, fhi) = (uni_eval(&p, lo), uni_eval(&p, hi));
        if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = uni_eval(&p, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    // Tangential (even multiplicity) roots sit on critical points.
    for c in knots {
        if uni_eval(&p, c).abs() <= 1e-12 * uni_abs_eval(&p, c) {
            roots.push(c);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + a.abs()));
    roots
}

/// A real linear factor `cos(theta) x + sin(theta) y` of a binary form with
/// its multiplicity. `theta` lies in `(-pi/2, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFactor {
    pub theta: f64,
    pub multiplicity: u32,
}

/// Refines the normal angle of a `k`-fold linear factor of `omega` in angle
/// space, where it is well conditioned for every direction (the chart
/// `y = 1` is not for steep normals). In coordinates rotated by `theta` the
/// `u^(k-1)` coefficient has a simple zero at the factor.
fn polish_factor_angle(omega: &Poly2, theta: f64, k: u32) -> f64 {
    let m = match omega.degree() {
        Some(m) if k >= 1 && k <= m => m,
        _ => return theta,
    };
    let scale = omega.max_abs_coeff();
    let phi = |t: f64| omega.rotated(&t.cos(), &t.sin()).coeff(k - 1, m - k + 1) / scale;
    let (mut t0, mut t1) = (theta - 1e-6, theta);
    let (mut f0, mut f1) = (phi(t0), phi(t1));
    for _ in 0..20 {
        if f1 == 0.0 || f1 == f0 {
            break;
        }
        let t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
        if !t2.is_finite() || (t2 - theta).abs() > 1e-3 {
            return theta;
        }
        (t0, f0) = (t1, f1);
        t1 = t2;
        f1 = phi(t1);
        if (t1 - t0).abs() < 1e-15 {
            break;
        }
    }
    if f1.abs() <= phi(theta).abs() {
        t1
    } else {
        theta
    }
}

/// Real linear factors of the homogeneous form `omega` with multiplicity at
/// least `min_mult`.
///
/// A root of multiplicity `k` of the dehomogenized polynomial is a simple
/// root of its `(k-1)`-th derivative, so each candidate is located where it
/// is well conditioned and then confirmed on the lower derivatives.
pub fn repeated_linear_factors(omega: &Poly2, min_mult: u32) -> Vec<LinearFactor> {
    let m = match omega.degree() {
        Some(m) => m,
        None => return Vec::new(),
    };
    // p(u) = omega(u, 1); c[k] = coefficient of x^k y^(m-k).
    let c: Vec<f64> = (0..=m).map(|k| omega.coeff(k, m - k)).collect();
    let p = uni_trim(&c);
    let deg_p = p.len().saturating_sub(1) as u32;
    let mut out = Vec::new();
    // Multiplicity of the factor y (the root at infinity).
    let inf_mult = m - deg_p;
    if inf_mult >= min_mult.max(1) {
        out.push(LinearFactor { theta: std::f64::consts::FRAC_PI_2, multiplicity: inf_mult });
    }
    let mut derivs = vec![p.clone()];
    for _ in 0..deg_p {
        let next = uni_deriv(derivs.last().unwrap());
        derivs.push(next);
    }
    for k in (min_mult.max(1)..=deg_p).rev() {
        let q = &derivs[(k - 1) as usize];
        for r in real_roots(q) {
            let vanishes = (0..(k - 1) as usize)
                .all(|j| uni_eval(&derivs[j], r).abs() <= 1e-8 * uni_abs_eval(&derivs[j], r));
            if !vanishes {
                continue;
            }
            // Factor (x - r y) ~ normal (1, -r).
            let theta = polish_factor_angle(omega, (-r).atan2(1.0), k);
            // A k-fold factor also shows up, less accurately, among the
            // roots of lower derivatives; keep the highest multiplicity.
            let seen = out.iter().any(|f: &LinearFactor| {
                let d = (f.theta - theta).rem_euclid(std::f64::consts::PI);
                d.min(std::f64::consts::PI - d) <= 1e-4
            });
            if !seen {
                out.push(LinearFactor { theta, multiplicity: k });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_rational;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn p(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().cloned())
    }

    fn lin(a: f64, b: f64) -> Poly2 {
        p(&[(1, 0, a), (0, 1, b)])
    }

    #[test]
    fn lowest_part_examples() {
        let (m, w) = lowest_homogeneous_part(&p(&[(3, 0, 1.0), (5, 0, 1.0)])).unwrap();
        assert_eq!((m, w), (3, p(&[(3, 0, 1.0)])));

        let f = &lin(1.0, 2.0).pow(3) + &p(&[(0, 7, 1.0)]);
        let (m, w) = lowest_homogeneous_part(&f).unwrap();
        assert_eq!(m, 3);
        assert_eq!(w, lin(1.0, 2.0).pow(3));

        let s = p(&[(2, 0, 1.0), (0, 2, -1.0)]);
        assert_eq!(lowest_homogeneous_part(&s).unwrap(), (2, s.clone()));

        assert_eq!(lowest_homogeneous_part(&Poly2::<f64>::zero()), Err(AlgebraError::ZeroFunction));
        assert_eq!(
            lowest_homogeneous_part(&p(&[(1, 0, 1.0), (3, 0, 1.0)])),
            Err(AlgebraError::LowOrder(1))
        );
    }

    #[test]
    fn factor_through_the_chart_origin() {
        // x^3 (0.3 x + y)^2: the triple root of omega(u, 1) sits exactly at 0.
        let omega = &lin(1.0, 0.0).pow(3) * &lin(0.3, 1.0).pow(2);
        let f = repeated_linear_factors(&omega, 3);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].multiplicity, 3);
        assert!(f[0].theta.abs() < 1e-12);
    }

    #[test]
    fn linear_power_examples() {
        let r = linear_power_factor(&lin(1.0, 2.0).pow(3)).unwrap();
        let s5 = 5f64.sqrt();
        assert_eq!(r.n, 3);
        assert!((r.a - 5f64.powf(1.5)).abs() < 1e-12);
        assert!((r.direction[0] - 1.0 / s5).abs() < 1e-15);
        assert!((r.direction[1] - 2.0 / s5).abs() < 1e-15);

        assert_eq!(
            linear_power_factor(&p(&[(2, 0, 1.0), (0, 2, -1.0)])),
            Err(AlgebraError::NotAPower)
        );

        let r = linear_power_factor(&p(&[(0, 4, 4.0)])).unwrap();
        assert_eq!(r, LinearPower { a: 4.0, direction: [0.0, 1.0], n: 4 });
    }

    #[test]
    fn linear_power_sign_convention() {
        // -(x - 3y)^3 = (3y - x)^3 ... normalized direction has positive x part.
        let omega = lin(-1.0, 3.0).pow(3);
        let r = linear_power_factor(&omega).unwrap();
        assert!(r.direction[0] > 0.0);
        assert!((&r.to_poly() - &omega).max_abs_coeff() < 1e-12);
    }

    #[test]
    fn linear_power_exact_mode() {
        let omega = lin(2.0, 3.0).pow(4).to_exact();
        let r = linear_power_factor(&omega).unwrap();
        assert_eq!(r.n, 4);
        let almost = &omega + &Poly2::monomial(0, 4, parse_rational("1/1000000000000").unwrap());
        assert_eq!(linear_power_factor(&almost), Err(AlgebraError::NotAPower));
    }

    #[test]
    fn segment_examples() {
        let f = p(&[(3, 0, 1.0), (3, 1, 1.0)]);
        let s = segment_factorization(&f, 0.0).unwrap();
        assert_eq!(s.n, 3);
        assert_eq!(s.eta, p(&[(0, 0, 1.0), (0, 1, 1.0)]));

        let s = segment_factorization(&p(&[(4, 0, 1.0)]), 0.0).unwrap();
        assert_eq!((s.n, s.eta.clone()), (4, p(&[(0, 0, 1.0)])));

        // ((x + y)/sqrt2)^3 (2 - x), segment along x + y = 0.
        let xt = lin(1.0, 1.0).scale(&std::f64::consts::FRAC_1_SQRT_2);
        let f = &xt.pow(3) * &p(&[(0, 0, 2.0), (1, 0, -1.0)]);
        let s = segment_factorization(&f, FRAC_PI_4).unwrap();
        assert_eq!(s.n, 3);
        assert!((s.eta.eval(0.0, 0.0) - 2.0).abs() < 1e-14);
        assert!(s.reconstruction_error(&f) < 1e-12);

        assert_eq!(
            segment_factorization(&p(&[(2, 0, 1.0), (0, 2, -1.0)]), 0.0),
            Err(AlgebraError::OrderTooLow(0))
        );
        assert_eq!(
            segment_factorization(&p(&[(2, 0, 1.0), (3, 0, 1.0)]), 0.0),
            Err(AlgebraError::OrderTooLow(2))
        );
    }

    #[test]
    fn segment_exact_rotation() {
        // Normal (3/5, 4/5).
        let c = parse_rational("3/5").unwrap();
        let s = parse_rational("4/5").unwrap();
        let f = (&lin(0.6, 0.8).pow(3) * &p(&[(0, 0, 1.0), (0, 1, 1.0)])).to_exact();
        let exact_f = {
            let l = Poly2::from_terms([(1, 0, c.clone()), (0, 1, s.clone())]);
            &l.pow(3) * &Poly2::from_terms([(0, 0, parse_rational("1").unwrap()), (0, 1, parse_rational("1").unwrap())])
        };
        let sf = segment_factorization_exact(&exact_f, &c, &s).unwrap();
        assert_eq!(sf.n, 3);
        assert_eq!(sf.rotated_product(), exact_f.rotated(&c, &s));
        let bad = parse_rational("1/2").unwrap();
        assert_eq!(
            segment_factorization_exact(&f, &bad, &bad),
            Err(AlgebraError::IrrationalRotation)
        );
    }

    #[test]
    fn vanishing_order_along_line() {
        let f = &lin(1.0, -2.0).pow(4) * &p(&[(0, 0, 1.0), (1, 1, 3.0)]);
        assert_eq!(linear_vanishing_order(&f, &1.0, &-2.0, 1e-10), 4);
        assert_eq!(linear_vanishing_order(&f.to_exact(), &1.0f64.into_exact(), &(-2.0f64).into_exact(), 0.0), 4);
    }

    trait IntoExact {
        fn into_exact(self) -> BigRational;
    }
    impl IntoExact for f64 {
        fn into_exact(self) -> BigRational {
            BigRational::from_float(self).unwrap()
        }
    }

    #[test]
    fn roots_of_products() {
        // (u - 1)(u + 2)(u - 0.5)
        let q = [1.0, -2.5, 0.5, 1.0];
        let r = real_roots(&q);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-2.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
        let d = real_roots(&[1.0, -2.0, 1.0]);
        assert_eq!(d.len(), 1);
        assert!((d[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn repeated_factors_of_forms() {
        let f = repeated_linear_factors(&p(&[(3, 0, 1.0)]), 3);
        assert_eq!(f, vec![LinearFactor { theta: 0.0, multiplicity: 3 }]);

        let f = repeated_linear_factors(&p(&[(0, 4, 1.0)]), 3);
        assert_eq!(f, vec![LinearFactor { theta: FRAC_PI_2, multiplicity: 4 }]);

        // (x + y)^4 (x - 2y): one factor of multiplicity 4, the simple one is skipped.
        let w = &lin(1.0, 1.0).pow(4) * &lin(1.0, -2.0);
        let f = repeated_linear_factors(&w, 3);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].multiplicity, 4);
        assert!((f[0].theta - FRAC_PI_4).abs() < 1e-12);

        // x^3 y^3: two factors.
        let f = repeated_linear_factors(&p(&[(3, 3, 1.0)]), 3);
        assert_eq!(f.len(), 2);

        // Harmonic cubic has three simple factors only.
        assert!(repeated_linear_factors(&p(&[(3, 0, 1.0), (1, 2, -3.0)]), 3).is_empty());
    }
}
