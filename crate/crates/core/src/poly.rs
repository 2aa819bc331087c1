//! Bivariate polynomials over `f64` or exact rationals.
//!
//! Polynomials stand in for truncated analytic germs around the origin. Terms
//! are kept sorted by `(i, j)` (exponents of `x` and `y`) with zero
//! coefficients removed, so two equal polynomials always have identical term
//! lists.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

/// Coefficient field for [`Poly2`].
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// True when the coefficient may be discarded at absolute tolerance
    /// `tol`. Exact coefficients are negligible only when zero.
    fn negligible(&self, tol: f64) -> bool;
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn negligible(&self, tol: f64) -> bool {
        self.abs() <= tol
    }
}

impl Coeff for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn negligible(&self, _tol: f64) -> bool {
        Zero::is_zero(self)
    }
}

/// Parses `"num/den"` or `"num"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|e| format!("bad numerator in {s:?}: {e}"))?;
    let den = BigInt::from_str(den).map_err(|e| format!("bad denominator in {s:?}: {e}"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(BigRational::new(num, den))
}

/// Exact rational approximation of a finite double (exact binary expansion).
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    BigRational::from_float(v)
}

#[derive(Clone, PartialEq)]
pub struct Poly2<C: Coeff = f64> {
    terms: Vec<(u32, u32, C)>,
}

impl<C: Coeff> fmt::Debug for Poly2<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (i, j, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}*x^{i}*y^{j}")?;
        }
        Ok(())
    }
}

impl<C: Coeff> Default for Poly2<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> Poly2<C> {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: u32, j: u32, c: C) -> Self {
        Self::from_terms([(i, j, c)])
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, C::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, C::one())
    }

    /// Builds a polynomial, summing duplicate exponent pairs and dropping
    /// exact zeros.
    pub fn from_terms<I: IntoIterator<Item = (u32, u32, C)>>(terms: I) -> Self {
        let mut acc: BTreeMap<(u32, u32), C> = BTreeMap::new();
        for (i, j, c) in terms {
            match acc.remove(&(i, j)) {
                Some(prev) => {
                    acc.insert((i, j), prev + c);
                }
                None => {
                    acc.insert((i, j), c);
                }
            }
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((i, j), c)| (i, j, c))
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> &[(u32, u32, C)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.iter().map(|(i, j, _)| i + j).max()
    }

    /// Smallest total degree present; `None` for the zero polynomial.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.iter().map(|(i, j, _)| i + j).min()
    }

    pub fn coeff(&self, i: u32, j: u32) -> C {
        self.terms
            .binary_search_by(|(a, b, _)| (*a, *b).cmp(&(i, j)))
            .map(|k| self.terms[k].2.clone())
            .unwrap_or_else(|_| C::zero())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, _, c)| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, k: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(i, j, c)| (*i, *j, c.clone() * k.clone())))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(C::one());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn deriv_x(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(i, _, _)| *i > 0)
                .map(|(i, j, c)| (i - 1, *j, c.clone() * C::from_i64(*i as i64))),
        )
    }

    pub fn deriv_y(&self) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .filter(|(_, j, _)| *j > 0)
                .map(|(i, j, c)| (*i, j - 1, c.clone() * C::from_i64(*j as i64))),
        )
    }

    /// All terms of total degree exactly `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        Self {
            terms: self.terms.iter().filter(|(i, j, _)| i + j == d).cloned().collect(),
        }
    }

    /// Drops every term of total degree above `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(i, j, _)| i + j <= max_degree)
                .cloned()
                .collect(),
        }
    }

    /// Drops every term of total degree below `min_degree`.
    pub fn without_below(&self, min_degree: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(i, j, _)| i + j >= min_degree)
                .cloned()
                .collect(),
        }
    }

    /// Drops every term of total degree above `max_degree`.
    pub fn without_above(&self, max_degree: u32) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(i, j, _)| i + j <= max_degree)
                .cloned()
                .collect(),
        }
    }

    /// Removes coefficients negligible relative to the largest one.
    pub fn cleaned(&self, rel_tol: f64) -> Self {
        let tol = rel_tol * self.max_abs_coeff();
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, _, c)| !c.negligible(tol))
                .cloned()
                .collect(),
        }
    }

    pub fn eval_exact(&self, x: &C, y: &C) -> C {
        let mut acc = C::zero();
        for (i, j, c) in &self.terms {
            let mut t = c.clone();
            for _ in 0..*i {
                t = t * x.clone();
            }
            for _ in 0..*j {
                t = t * y.clone();
            }
            acc = acc + t;
        }
        acc
    }

    /// Evaluates at a floating-point point (coefficients converted to `f64`).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let deg = match self.degree() {
            Some(d) => d as usize,
            None => return 0.0,
        };
        let mut xp = [0.0f64; 48];
        let mut yp = [0.0f64; 48];
        if deg < xp.len() {
            xp[0] = 1.0;
            yp[0] = 1.0;
            for k in 1..=deg {
                xp[k] = xp[k - 1] * x;
                yp[k] = yp[k - 1] * y;
            }
            self.terms
                .iter()
                .map(|(i, j, c)| c.to_f64() * xp[*i as usize] * yp[*j as usize])
                .sum()
        } else {
            self.terms
                .iter()
                .map(|(i, j, c)| c.to_f64() * x.powi(*i as i32) * y.powi(*j as i32))
                .sum()
        }
    }

    /// `f(a11 u + a12 v, a21 u + a22 v)` expanded exactly in the coefficient
    /// field.
    pub fn compose_linear(&self, a11: &C, a12: &C, a21: &C, a22: &C) -> Self {
        let deg = self.degree().unwrap_or(0);
        let xs = Self::from_terms([(1, 0, a11.clone()), (0, 1, a12.clone())]);
        let ys = Self::from_terms([(1, 0, a21.clone()), (0, 1, a22.clone())]);
        let mut xpow = vec![Self::constant(C::one())];
        let mut ypow = vec![Self::constant(C::one())];
        for k in 1..=deg as usize {
            let nx = &xpow[k - 1] * &xs;
            let ny = &ypow[k - 1] * &ys;
            xpow.push(nx);
            ypow.push(ny);
        }
        let mut acc = Self::zero();
        for (i, j, c) in &self.terms {
            let t = (&xpow[*i as usize] * &ypow[*j as usize]).scale(c);
            acc = &acc + &t;
        }
        acc
    }

    /// Rotated polynomial `g(u, v) = f(c u - s v, s u + c v)`, so that
    /// `u = c x + s y` is the coordinate along the unit normal `(c, s)`.
    pub fn rotated(&self, cos: &C, sin: &C) -> Self {
        self.compose_linear(cos, &-sin.clone(), sin, cos)
    }

    /// Exact quotient by `x^k`, or `None` when some term has `x`-exponent
    /// below `k`.
    pub fn divide_by_x_power(&self, k: u32) -> Option<Self> {
        if self.terms.iter().any(|(i, _, _)| *i < k) {
            return None;
        }
        Some(Self {
            terms: self.terms.iter().map(|(i, j, c)| (i - k, *j, c.clone())).collect(),
        })
    }

    /// Largest power of `x` dividing the polynomial (`None` for zero).
    pub fn x_order(&self) -> Option<u32> {
        self.terms.iter().map(|(i, _, _)| *i).min()
    }

    /// Exact division by the linear form `a x + b y`, component by
    /// homogeneous component. Returns `None` if the remainder is not
    /// negligible at tolerance `rel_tol` (relative to the component size).
    pub fn divide_by_linear(&self, a: &C, b: &C, rel_tol: f64) -> Option<Self> {
        self.divide_by_linear_with(a, b, |comp| rel_tol * comp.max_abs_coeff())
    }

    /// As [`Poly2::divide_by_linear`], with one absolute remainder tolerance
    /// for all components.
    pub fn divide_by_linear_abs(&self, a: &C, b: &C, abs_tol: f64) -> Option<Self> {
        self.divide_by_linear_with(a, b, |_| abs_tol)
    }

    fn divide_by_linear_with(&self, a: &C, b: &C, tol_of: impl Fn(&Self) -> f64) -> Option<Self> {
        if a.is_zero() && b.is_zero() {
            return None;
        }
        let use_top = a.to_f64().abs() >= b.to_f64().abs();
        let mut quotient = Vec::new();
        let mut degrees: Vec<u32> = self.terms.iter().map(|(i, j, _)| i + j).collect();
        degrees.sort_unstable();
        degrees.dedup();
        for d in degrees {
            if d == 0 {
                return None;
            }
            let comp = self.homogeneous_part(d);
            let tol = tol_of(&comp);
            // c[k] is the coefficient of x^k y^(d-k).
            let c: Vec<C> = (0..=d).map(|k| comp.coeff(k, d - k)).collect();
            let mut q = vec![C::zero(); d as usize];
            let residual;
            if use_top {
                // a q[k-1] + b q[k] = c[k], solved from the top.
                q[d as usize - 1] = c[d as usize].clone() / a.clone();
                for k in (1..d as usize).rev() {
                    q[k - 1] = (c[k].clone() - b.clone() * q[k].clone()) / a.clone();
                }
                residual = c[0].clone() - b.clone() * q[0].clone();
            } else {
                q[0] = c[0].clone() / b.clone();
                for k in 1..d as usize {
                    q[k] = (c[k].clone() - a.clone() * q[k - 1].clone()) / b.clone();
                }
                residual = c[d as usize].clone() - a.clone() * q[d as usize - 1].clone();
            }
            if !residual.negligible(tol) {
                return None;
            }
            for (k, qk) in q.into_iter().enumerate() {
                quotient.push((k as u32, d - 1 - k as u32, qk));
            }
        }
        Some(Self::from_terms(quotient))
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly2<D> {
        Poly2::from_terms(self.terms.iter().map(|(i, j, c)| (*i, *j, f(c))))
    }

    pub fn to_f64(&self) -> Poly2<f64> {
        self.map_coeffs(|c| c.to_f64())
    }
}

impl Poly2<f64> {
    /// Exact rational image of every coefficient.
    pub fn to_exact(&self) -> Poly2<BigRational> {
        self.map_coeffs(|c| rational_from_f64(*c).unwrap_or_else(<BigRational as Coeff>::zero))
    }
}

impl<'a, C: Coeff> Add<&'a Poly2<C>> for &'a Poly2<C> {
    type Output = Poly2<C>;
    fn add(self, rhs: &'a Poly2<C>) -> Poly2<C> {
        // Both term lists are sorted: merge.
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut a, mut b) = (0, 0);
        while a < self.terms.len() && b < rhs.terms.len() {
            let (ia, ja, ca) = &self.terms[a];
            let (ib, jb, cb) = &rhs.terms[b];
            match (ia, ja).cmp(&(ib, jb)) {
                Ordering::Less => {
                    out.push((*ia, *ja, ca.clone()));
                    a += 1;
                }
                Ordering::Greater => {
                    out.push((*ib, *jb, cb.clone()));
                    b += 1;
                }
                Ordering::Equal => {
                    let s = ca.clone() + cb.clone();
                    if !s.is_zero() {
                        out.push((*ia, *ja, s));
                    }
                    a += 1;
                    b += 1;
                }
            }
        }
        out.extend(self.terms[a..].iter().cloned());
        out.extend(rhs.terms[b..].iter().cloned());
        Poly2 { terms: out }
    }
}

impl<'a, C: Coeff> Sub<&'a Poly2<C>> for &'a Poly2<C> {
    type Output = Poly2<C>;
    fn sub(self, rhs: &'a Poly2<C>) -> Poly2<C> {
        self + &(-rhs)
    }
}

impl<C: Coeff> Neg for &Poly2<C> {
    type Output = Poly2<C>;
    fn neg(self) -> Poly2<C> {
        Poly2 {
            terms: self.terms.iter().map(|(i, j, c)| (*i, *j, -c.clone())).collect(),
        }
    }
}

impl<'a, C: Coeff> Mul<&'a Poly2<C>> for &'a Poly2<C> {
    type Output = Poly2<C>;
    fn mul(self, rhs: &'a Poly2<C>) -> Poly2<C> {
        let mut acc: BTreeMap<(u32, u32), C> = BTreeMap::new();
        for (ia, ja, ca) in &self.terms {
            for (ib, jb, cb) in &rhs.terms {
                let key = (ia + ib, ja + jb);
                let prod = ca.clone() * cb.clone();
                match acc.remove(&key) {
                    Some(prev) => {
                        acc.insert(key, prev + prod);
                    }
                    None => {
                        acc.insert(key, prod);
                    }
                }
            }
        }
        Poly2 {
            terms: acc
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(|((i, j), c)| (i, j, c))
                .collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<C: Coeff> $tr<Poly2<C>> for Poly2<C> {
            type Output = Poly2<C>;
            fn $m(self, rhs: Poly2<C>) -> Poly2<C> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<C: Coeff> Neg for Poly2<C> {
    type Output = Poly2<C>;
    fn neg(self) -> Poly2<C> {
        -&self
    }
}

// Literal format: a list of `[i, j, c]` triples. Floating coefficients are
// JSON numbers; exact coefficients are strings "num/den".

impl Serialize for Poly2<f64> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.terms.len()))?;
        for (i, j, c) in &self.terms {
            seq.serialize_element(&(i, j, c))?;
        }
        seq.end()
    }
}

impl Serialize for Poly2<BigRational> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.terms.len()))?;
        for (i, j, c) in &self.terms {
            seq.serialize_element(&(i, j, format_rational(c)))?;
        }
        seq.end()
    }
}

pub fn format_rational(c: &BigRational) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// One literal coefficient as it appears in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffLiteral {
    Float(f64),
    Exact(String),
}

impl CoeffLiteral {
    pub fn to_f64(&self) -> Result<f64, String> {
        match self {
            CoeffLiteral::Float(v) => Ok(*v),
            CoeffLiteral::Exact(s) => parse_rational(s).map(|r| Coeff::to_f64(&r)),
        }
    }

    pub fn to_exact(&self) -> Result<BigRational, String> {
        match self {
            CoeffLiteral::Float(v) => {
                rational_from_f64(*v).ok_or_else(|| format!("non-finite coefficient {v}"))
            }
            CoeffLiteral::Exact(s) => parse_rational(s),
        }
    }
}

/// Parsed but not yet typed polynomial literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyLiteral(pub Vec<(u32, u32, CoeffLiteral)>);

impl PolyLiteral {
    pub fn to_f64(&self) -> Result<Poly2<f64>, String> {
        let terms = self
            .0
            .iter()
            .map(|(i, j, c)| c.to_f64().map(|c| (*i, *j, c)))
            .collect::<Result<Vec<_>, _>>()?;
        if terms.iter().any(|(_, _, c)| !c.is_finite()) {
            return Err("non-finite coefficient".into());
        }
        Ok(Poly2::from_terms(terms))
    }

    pub fn to_exact(&self) -> Result<Poly2<BigRational>, String> {
        let terms = self
            .0
            .iter()
            .map(|(i, j, c)| c.to_exact().map(|c| (*i, *j, c)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Poly2::from_terms(terms))
    }

    pub fn from_poly(p: &Poly2<f64>) -> Self {
        PolyLiteral(
            p.terms()
                .iter()
                .map(|(i, j, c)| (*i, *j, CoeffLiteral::Float(*c)))
                .collect(),
        )
    }
}

impl<'de> Deserialize<'de> for Poly2<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Poly2<f64>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a list of [i, j, c] triples")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut terms = Vec::new();
                while let Some((i, j, c)) = seq.next_element::<(u32, u32, CoeffLiteral)>()? {
                    terms.push((i, j, c.to_f64().map_err(de::Error::custom)?));
                }
                Ok(Poly2::from_terms(terms))
            }
        }
        d.deserialize_seq(V)
    }
}

impl<'de> Deserialize<'de> for Poly2<BigRational> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lit = PolyLiteral::deserialize(d)?;
        lit.to_exact().map_err(de::Error::custom)
    }
}

/// Sign of an exact rational: -1, 0 or 1.
pub fn rational_sign(r: &BigRational) -> i8 {
    if Zero::is_zero(r) {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}
