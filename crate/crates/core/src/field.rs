//! Line and cross fields of a saddle graph: the principal cross and its
//! homotopy to the Hessian cross, the directional-gradient field `grad h_nu`,
//! the field `Z`, their analytic extension across umbilic segments, and
//! branch continuation along paths.
//!
//! Along a segment `x_theta = 0` of vanishing order `n`, the Hessian, `B`,
//! `grad h_nu` and `Z` all carry the factor `x_theta^(n-2)`. Inside a band of
//! half-width `delta` around the segment the fields are evaluated from the
//! exact quotients, which is their analytic continuation across it.

use std::f64::consts::{FRAC_PI_4, PI};

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cross::{cross_from_matrix, line_delta, mat_adj, mat_mul, line_distance, reduce_line_angle, rayleigh, CrossSample, Mat2};
use crate::jet::{hessian_scale, DiffPoly, Disk, Jet2, Point2};
use crate::poly::{Coeff, Poly2};
use crate::spaceform::{metric_numerator, shape_numerator_at, shape_scale, Ambient};
use crate::umbilic::LocusReport;

/// Default band half-width relative to the region radius.
pub const BAND_REL_WIDTH: f64 = 1e-3;
/// Maximum number of bisection rounds per path interval.
pub const MAX_REFINEMENTS: u32 = 10;
/// Relative tolerance for floating division by a segment's linear form.
const DIVISION_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("all line-equation coefficients vanish at ({x}, {y})")]
    DegeneratePoint { x: f64, y: f64 },
    #[error("the origin is a singularity of the extended field")]
    OriginQuery,
    #[error("field nearly vanishes at ({x}, {y})")]
    NearZero { x: f64, y: f64 },
    #[error("angular step {step:.3} rad persists after {MAX_REFINEMENTS} refinements near ({x}, {y})")]
    CertificationFailure { x: f64, y: f64, step: f64 },
    #[error("no admissible direction among the scanned angles")]
    NoDirectionFound,
    #[error("field is not divisible by the linear form of the segment with normal angle {0}")]
    NotDivisible(f64),
    #[error("homotopy parameter {0} outside [0, 1]")]
    InvalidParameter(f64),
}

/// An umbilic segment `cos(theta) x + sin(theta) y = 0` of vanishing order
/// `n`, as seen by the field engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub theta: f64,
    pub n: u32,
}

impl Segment {
    pub fn coordinate(&self, pt: Point2) -> f64 {
        self.theta.cos() * pt[0] + self.theta.sin() * pt[1]
    }

    /// Angle of the segment's tangent line.
    pub fn tangent_angle(&self) -> f64 {
        reduce_line_angle(self.theta + 0.5 * PI)
    }
}

pub fn segments_of(locus: &LocusReport) -> Vec<Segment> {
    locus.segments().into_iter().map(|(theta, n)| Segment { theta, n }).collect()
}

/// Default band half-width for a region.
pub fn default_band(region: &Disk) -> f64 {
    BAND_REL_WIDTH * region.radius
}

/// Exact rational normal of a segment when `theta` is a multiple of `pi/2`
/// or has a small rational slope; used to divide exact polynomials.
fn exact_normal(theta: f64) -> Option<(BigRational, BigRational)> {
    let (c, s) = (theta.cos(), theta.sin());
    let to_r = |v: f64| -> Option<BigRational> {
        let r = crate::poly::rational_from_f64((v * 1e6).round() / 1e6)?;
        let back = Coeff::to_f64(&r);
        ((back - v).abs() < 1e-12).then_some(r)
    };
    if c.abs() >= s.abs() {
        Some((BigRational::from_integer(1.into()), to_r(s / c)?))
    } else {
        Some((to_r(c / s)?, BigRational::from_integer(1.into())))
    }
}

/// Divides `p` by `prod_j (a_j x + b_j y)^(k_j)` over the selected segments.
/// The remainder of each step must be negligible against `scale`.
fn divide_segments_f64(p: &Poly2, segs: &[Segment], mask: u32, scale: f64) -> Result<Poly2, FieldError> {
    let mut q = p.clone();
    for (j, s) in segs.iter().enumerate() {
        if mask & (1 << j) == 0 {
            continue;
        }
        let (a, b) = (s.theta.cos(), s.theta.sin());
        for _ in 0..s.n.saturating_sub(2) {
            q = q
                .divide_by_linear_abs(&a, &b, DIVISION_REL_TOL * scale)
                .ok_or(FieldError::NotDivisible(s.theta))?;
        }
    }
    Ok(q)
}

fn divide_segments_exact(p: &Poly2<BigRational>, segs: &[Segment], mask: u32) -> Result<Poly2, FieldError> {
    let mut q = p.clone();
    let mut scale = 1.0;
    for (j, s) in segs.iter().enumerate() {
        if mask & (1 << j) == 0 {
            continue;
        }
        let (a, b) = exact_normal(s.theta).ok_or(FieldError::NotDivisible(s.theta))?;
        // (a, b) is a positive multiple of the unit normal.
        let norm = Coeff::to_f64(&a).hypot(Coeff::to_f64(&b));
        for _ in 0..s.n.saturating_sub(2) {
            q = q.divide_by_linear(&a, &b, 0.0).ok_or(FieldError::NotDivisible(s.theta))?;
            scale *= norm;
        }
    }
    Ok(q.to_f64().scale(&scale))
}

/// Quotients of a tuple of polynomials for every nonempty subset of
/// segments (bitmask-indexed), so overlapping bands near the origin are
/// handled too.
#[derive(Clone, Debug)]
struct Quotients<const K: usize> {
    by_mask: Vec<Option<[Poly2; K]>>,
}

impl<const K: usize> Quotients<K> {
    fn build(
        segs: &[Segment],
        float: &[Poly2; K],
        exact: Option<&[Poly2<BigRational>; K]>,
    ) -> Result<Self, FieldError> {
        // Tuple entries are judged together: one may be tiny next to the
        // others, and then its own relative residue is meaningless.
        let scale = float.iter().fold(0.0f64, |m, p| m.max(p.max_abs_coeff()));
        let count = 1usize << segs.len().min(6);
        let mut by_mask = vec![None; count];
        for (mask, slot) in by_mask.iter_mut().enumerate().skip(1) {
            let mask = mask as u32;
            let mut out: Vec<Poly2> = Vec::with_capacity(K);
            for k in 0..K {
                let q = match exact {
                    Some(e) => divide_segments_exact(&e[k], segs, mask)
                        .or_else(|_| divide_segments_f64(&float[k], segs, mask, scale))?,
                    None => divide_segments_f64(&float[k], segs, mask, scale)?,
                };
                out.push(q);
            }
            *slot = Some(out.try_into().expect("length K"));
        }
        Ok(Self { by_mask })
    }

    fn eval(&self, mask: u32, pt: Point2) -> Option<[f64; K]> {
        let polys = self.by_mask.get(mask as usize)?.as_ref()?;
        Some(polys.each_ref().map(|p| p.eval(pt[0], pt[1])))
    }
}

/// Which segments' bands contain `pt`, and the sign of
/// `prod x_theta^(n-2)` over the remaining ones.
fn band_mask(segs: &[Segment], delta: f64, pt: Point2) -> (u32, f64) {
    let mut mask = 0;
    let mut sign = 1.0;
    for (j, s) in segs.iter().enumerate() {
        let u = s.coordinate(pt);
        if u.abs() < delta && j < 6 {
            mask |= 1 << j;
        } else if u < 0.0 && s.n % 2 == 1 {
            sign = -sign;
        }
    }
    (mask, sign)
}

fn is_origin(pt: Point2) -> bool {
    pt[0] == 0.0 && pt[1] == 0.0
}

/// Solves the line equation of `m`, treating coefficients that are
/// negligible relative to the matrix as a degenerate (umbilic) point.
pub fn matrix_cross(m: &Mat2, pt: Point2, extended: bool) -> Result<CrossSample, FieldError> {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let coeffs = [m[0][1].abs(), (m[0][0] - m[1][1]).abs(), m[1][0].abs()];
    let degenerate = FieldError::DegeneratePoint { x: pt[0], y: pt[1] };
    if !(scale > 0.0) || coeffs.iter().all(|c| *c <= 1e-13 * scale) {
        return Err(degenerate);
    }
    let mut c = cross_from_matrix(m).ok_or(degenerate)?;
    c.extended = extended;
    Ok(c)
}

/// Something that assigns a cross (or a line, doubled to an orthogonal
/// pair) to points of the plane.
pub trait LineSource {
    fn sample(&self, pt: Point2) -> Result<CrossSample, FieldError>;

    /// Whether `theta1`/`theta2` carry the `kappa_1`/`kappa_2` labels.
    fn labelled(&self) -> bool {
        false
    }
}

impl<F: Fn(Point2) -> Result<CrossSample, FieldError>> LineSource for F {
    fn sample(&self, pt: Point2) -> Result<CrossSample, FieldError> {
        self(pt)
    }
}

/// Hessian entries `[r, s, t]` of `h` in either coefficient type.
fn hessian_entries<C: Coeff>(h: &Poly2<C>) -> [Poly2<C>; 3] {
    let hx = h.deriv_x();
    let hy = h.deriv_y();
    [hx.deriv_x(), hx.deriv_y(), hy.deriv_y()]
}

/// The Hessian divided along every band subset. All extended quantities are
/// linear in the Hessian (`B = D^2 h adj(M)`, `Z`, `grad h_nu`), so only
/// these three low-degree polynomials are ever divided.
fn hessian_quotients(
    h: &Poly2,
    exact: Option<&Poly2<BigRational>>,
    segments: &[Segment],
) -> Result<Quotients<3>, FieldError> {
    if segments.is_empty() {
        return Ok(Quotients { by_mask: vec![None] });
    }
    let exact_entries = exact.map(hessian_entries);
    Quotients::build(segments, &hessian_entries(h), exact_entries.as_ref())
}

/// The cross field of `m(t) = (1 - t) B / mu + t D^2 h`: the principal cross
/// at `t = 0` and the Hessian cross at `t = 1`, extended across segments.
#[derive(Clone, Debug)]
pub struct CrossField {
    pub ambient: Ambient,
    pub t: f64,
    pub segments: Vec<Segment>,
    pub delta: f64,
    d: DiffPoly,
    quotients: Quotients<3>,
}

impl CrossField {
    pub fn new(h: &Poly2, ambient: Ambient, segments: &[Segment], delta: f64, t: f64) -> Result<Self, FieldError> {
        Self::build(h, None, ambient, segments, delta, t)
    }

    /// Uses exact rational division for segments with rational normals.
    pub fn new_exact(
        h: &Poly2<BigRational>,
        ambient: Ambient,
        segments: &[Segment],
        delta: f64,
        t: f64,
    ) -> Result<Self, FieldError> {
        Self::build(&h.to_f64(), Some(h), ambient, segments, delta, t)
    }

    pub fn principal(h: &Poly2, ambient: Ambient, segments: &[Segment], delta: f64) -> Result<Self, FieldError> {
        Self::new(h, ambient, segments, delta, 0.0)
    }

    fn build(
        h: &Poly2,
        exact: Option<&Poly2<BigRational>>,
        ambient: Ambient,
        segments: &[Segment],
        delta: f64,
        t: f64,
    ) -> Result<Self, FieldError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(FieldError::InvalidParameter(t));
        }
        let quotients = hessian_quotients(h, exact, segments)?;
        Ok(Self { ambient, t, segments: segments.to_vec(), delta, d: DiffPoly::new(h), quotients })
    }

    pub fn jet(&self, pt: Point2) -> Jet2 {
        self.d.jet(pt)
    }

    /// The homotopy matrix at `pt`, divided along the bands containing it.
    /// Returns the matrix and whether division took place.
    pub fn matrix(&self, pt: Point2) -> Result<(Mat2, bool), FieldError> {
        let jet = self.d.jet(pt);
        let (mask, _) = band_mask(&self.segments, self.delta, pt);
        let hs = if mask == 0 {
            jet.hessian()
        } else {
            if is_origin(pt) {
                return Err(FieldError::OriginQuery);
            }
            let [r, s, t] = self.quotients.eval(mask, pt).ok_or(FieldError::OriginQuery)?;
            [[r, s], [s, t]]
        };
        let mu = shape_scale(&jet, pt, self.ambient);
        let b = mat_mul(&hs, &mat_adj(&metric_numerator(&jet, pt, self.ambient)));
        let t = self.t;
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = (1.0 - t) * b[i][j] / mu + t * hs[i][j];
            }
        }
        Ok((m, mask != 0))
    }
}

impl LineSource for CrossField {
    fn sample(&self, pt: Point2) -> Result<CrossSample, FieldError> {
        let (m, extended) = self.matrix(pt)?;
        matrix_cross(&m, pt, extended)
    }

    fn labelled(&self) -> bool {
        true
    }
}

/// Principal cross of the (unextended) shape matrix at `pt`.
pub fn principal_cross_at(h: &Poly2, ambient: Ambient, pt: Point2) -> Result<CrossSample, FieldError> {
    let jet = DiffPoly::new(h).jet(pt);
    matrix_cross(&shape_numerator_at(&jet, pt, ambient), pt, false)
}

/// Cross of `m(t)` at `pt`, without extension.
pub fn homotopy_cross(h: &Poly2, ambient: Ambient, t: f64, pt: Point2) -> Result<CrossSample, FieldError> {
    CrossField::new(h, ambient, &[], 0.0, t)?.sample(pt)
}

/// Cross of the extended field: ordinary off the bands, from the divided
/// matrix inside them.
pub fn extended_cross(
    h: &Poly2,
    ambient: Ambient,
    locus: &LocusReport,
    t: f64,
    pt: Point2,
    delta: f64,
) -> Result<CrossSample, FieldError> {
    if is_origin(pt) {
        return Err(FieldError::OriginQuery);
    }
    CrossField::new(h, ambient, &segments_of(locus), delta, t)?.sample(pt)
}

/// `grad h_nu = (nu . (h_xx, h_xy), nu . (h_xy, h_yy))`.
pub fn grad_directional_jet(jet: &Jet2, nu: [f64; 2]) -> [f64; 2] {
    [nu[0] * jet.fxx + nu[1] * jet.fxy, nu[0] * jet.fxy + nu[1] * jet.fyy]
}

pub fn grad_directional(h: &Poly2, nu: [f64; 2], pt: Point2) -> [f64; 2] {
    grad_directional_jet(&DiffPoly::new(h).jet(pt), nu)
}

/// `Z = (-2 h_xy, h_xx - h_yy)`.
pub fn z_from_jet(jet: &Jet2) -> [f64; 2] {
    [-2.0 * jet.fxy, jet.fxx - jet.fyy]
}

pub fn z_field(h: &Poly2, pt: Point2) -> [f64; 2] {
    z_from_jet(&DiffPoly::new(h).jet(pt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorKind {
    GradNu { nu: [f64; 2] },
    Z,
}

/// `grad h_nu` or `Z`, extended across segments as the continuous field
/// `V / prod x_theta^(n-2)` (up to a positive factor).
#[derive(Clone, Debug)]
pub struct VectorField {
    pub kind: VectorKind,
    pub segments: Vec<Segment>,
    pub delta: f64,
    d: DiffPoly,
    quotients: Quotients<3>,
}

impl VectorKind {
    fn apply(&self, [r, s, t]: [f64; 3]) -> [f64; 2] {
        match *self {
            VectorKind::GradNu { nu } => [nu[0] * r + nu[1] * s, nu[0] * s + nu[1] * t],
            VectorKind::Z => [-2.0 * s, r - t],
        }
    }
}

impl VectorField {
    pub fn new(h: &Poly2, kind: VectorKind, segments: &[Segment], delta: f64) -> Result<Self, FieldError> {
        Self::build(h, None, kind, segments, delta)
    }

    pub fn new_exact(
        h: &Poly2<BigRational>,
        kind: VectorKind,
        segments: &[Segment],
        delta: f64,
    ) -> Result<Self, FieldError> {
        Self::build(&h.to_f64(), Some(h), kind, segments, delta)
    }

    fn build(
        h: &Poly2,
        exact: Option<&Poly2<BigRational>>,
        kind: VectorKind,
        segments: &[Segment],
        delta: f64,
    ) -> Result<Self, FieldError> {
        let quotients = hessian_quotients(h, exact, segments)?;
        Ok(Self { kind, segments: segments.to_vec(), delta, d: DiffPoly::new(h), quotients })
    }

    /// The unextended field.
    pub fn raw(&self, pt: Point2) -> [f64; 2] {
        let j = self.d.jet(pt);
        self.kind.apply([j.fxx, j.fxy, j.fyy])
    }

    /// The extended field and whether division took place.
    pub fn extended(&self, pt: Point2) -> Result<([f64; 2], bool), FieldError> {
        let (mask, sign) = band_mask(&self.segments, self.delta, pt);
        if mask == 0 {
            let v = self.raw(pt);
            return Ok(([sign * v[0], sign * v[1]], false));
        }
        if is_origin(pt) {
            return Err(FieldError::OriginQuery);
        }
        let v = self.kind.apply(self.quotients.eval(mask, pt).ok_or(FieldError::OriginQuery)?);
        Ok(([sign * v[0], sign * v[1]], true))
    }

    pub fn vector(&self, pt: Point2) -> Result<[f64; 2], FieldError> {
        self.extended(pt).map(|(v, _)| v)
    }
}

impl LineSource for VectorField {
    fn sample(&self, pt: Point2) -> Result<CrossSample, FieldError> {
        let (v, extended) = self.extended(pt)?;
        if v[0] == 0.0 && v[1] == 0.0 {
            return Err(FieldError::NearZero { x: pt[0], y: pt[1] });
        }
        let theta1 = reduce_line_angle(v[1].atan2(v[0]));
        Ok(CrossSample { theta1, theta2: reduce_line_angle(theta1 + 0.5 * PI), degenerate: false, extended })
    }
}

/// Number of scanned directions in [`admissible_direction`].
pub const DIRECTION_SCAN: usize = 64;

/// All scanned directions `nu` that are transverse to every segment and
/// keep `grad h_nu` away from zero at random points off the bands, in scan
/// order.
pub fn admissible_directions(h: &Poly2, locus: &LocusReport, region: &Disk) -> Vec<[f64; 2]> {
    admissible_directions_seeded(h, locus, region, DIRECTION_SEED)
}

/// Default seed of the random test points in [`admissible_directions`].
pub const DIRECTION_SEED: u64 = 0x5eed;

/// As [`admissible_directions`], with the random test points drawn from
/// `seed`.
pub fn admissible_directions_seeded(h: &Poly2, locus: &LocusReport, region: &Disk, seed: u64) -> Vec<[f64; 2]> {
    let d = DiffPoly::new(h);
    let scale = hessian_scale(&d, region, 41).max(f64::MIN_POSITIVE);
    let segs = segments_of(locus);
    let delta = default_band(region);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jets = Vec::with_capacity(512);
    while jets.len() < 512 {
        let r = region.radius * rng.gen::<f64>().sqrt();
        let a = rng.gen_range(0.0..2.0 * PI);
        let pt = [region.center[0] + r * a.cos(), region.center[1] + r * a.sin()];
        if segs.iter().any(|s| s.coordinate(pt).abs() < delta) {
            continue;
        }
        jets.push(d.jet(pt));
    }
    (0..DIRECTION_SCAN)
        .filter_map(|k| {
            let ang = PI * k as f64 / DIRECTION_SCAN as f64;
            let transverse = segs.iter().all(|s| line_distance(ang, s.tangent_angle()) > PI / 64.0);
            if !transverse {
                return None;
            }
            let nu = [ang.cos(), ang.sin()];
            // Relative to the Hessian at the same point: high-order saddles
            // have tiny Hessians near the origin without being degenerate.
            let nonzero = jets.iter().all(|j| {
                let g = grad_directional_jet(j, nu);
                let local = j.fxx.hypot(j.fxy).hypot(j.fxy.hypot(j.fyy));
                local <= 1e-14 * scale || g[0].hypot(g[1]) > 1e-8 * local
            });
            nonzero.then_some(nu)
        })
        .collect()
}

pub fn admissible_direction(h: &Poly2, locus: &LocusReport, region: &Disk) -> Result<[f64; 2], FieldError> {
    admissible_directions(h, locus, region).into_iter().next().ok_or(FieldError::NoDirectionFound)
}

/// A closed circle or an open polyline, parametrized by `s` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contour {
    Circle { center: Point2, radius: f64, phase: f64 },
    Polyline { points: Vec<Point2> },
}

impl Contour {
    pub fn circle(center: Point2, radius: f64) -> Self {
        Contour::Circle { center, radius, phase: 0.0 }
    }

    pub fn point(&self, s: f64) -> Point2 {
        match self {
            Contour::Circle { center, radius, phase } => {
                let a = phase + 2.0 * PI * s;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            Contour::Polyline { points } => {
                let segs = points.len().saturating_sub(1).max(1);
                let x = (s * segs as f64).clamp(0.0, segs as f64);
                let k = (x.floor() as usize).min(segs - 1);
                let f = x - k as f64;
                let (a, b) = (points[k], points[(k + 1).min(points.len() - 1)]);
                [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    L1,
    L2,
    Extended,
    /// Unlabelled line field.
    Line,
}

/// One continuously lifted branch of a cross field along a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineBranch {
    pub path: Vec<Point2>,
    /// Real lifts, not reduced mod pi.
    pub angles: Vec<f64>,
    pub labels: Vec<BranchLabel>,
    pub swaps: usize,
    pub max_step: f64,
}

impl LineBranch {
    pub fn total_turn(&self) -> f64 {
        self.angles.last().unwrap_or(&0.0) - self.angles.first().unwrap_or(&0.0)
    }
}

struct Continuation<'a, S: LineSource + ?Sized> {
    src: &'a S,
    contour: &'a Contour,
    branch: LineBranch,
    lift: f64,
}

impl<S: LineSource + ?Sized> Continuation<'_, S> {
    fn label(&self, sample: &CrossSample, which: usize) -> BranchLabel {
        if !self.src.labelled() {
            BranchLabel::Line
        } else if sample.extended {
            BranchLabel::Extended
        } else if which == 0 {
            BranchLabel::L1
        } else {
            BranchLabel::L2
        }
    }

    /// Advances the lift from parameter `a` to `b`, bisecting while the step
    /// is not certified.
    fn advance(&mut self, a: f64, b: f64, depth: u32) -> Result<(), FieldError> {
        let pt = self.contour.point(b);
        let sample = self.src.sample(pt)?;
        let deltas = sample.angles().map(|th| line_delta(self.lift, th));
        let which = if deltas[0].abs() <= deltas[1].abs() { 0 } else { 1 };
        let step = deltas[which].abs();
        let gap = line_distance(sample.theta1, sample.theta2);
        // Unambiguous iff the chosen line is much closer than the other one.
        let certified = step < FRAC_PI_4 && (gap == 0.0 || step < 0.5 * deltas[1 - which].abs());
        if !certified {
            if depth >= MAX_REFINEMENTS {
                return Err(FieldError::CertificationFailure { x: pt[0], y: pt[1], step });
            }
            let mid = 0.5 * (a + b);
            self.advance(a, mid, depth + 1)?;
            return self.advance(mid, b, depth + 1);
        }
        self.lift += deltas[which];
        self.branch.max_step = self.branch.max_step.max(step);
        self.branch.path.push(pt);
        self.branch.angles.push(self.lift);
        self.branch.labels.push(self.label(&sample, which));
        Ok(())
    }
}

/// Continues one branch of `src` along `contour` with `samples` initial
/// intervals, starting from the line nearest to `start_angle` (default: the
/// first line of the sample).
pub fn continue_branch<S: LineSource + ?Sized>(
    src: &S,
    contour: &Contour,
    samples: usize,
    start_angle: Option<f64>,
) -> Result<LineBranch, FieldError> {
    let p0 = contour.point(0.0);
    let s0 = src.sample(p0)?;
    let which = match start_angle {
        Some(a) if line_distance(a, s0.theta2) < line_distance(a, s0.theta1) => 1,
        _ => 0,
    };
    let lift = s0.angles()[which];
    let mut c = Continuation {
        src,
        contour,
        branch: LineBranch { path: vec![p0], angles: vec![lift], labels: vec![], swaps: 0, max_step: 0.0 },
        lift,
    };
    let first = c.label(&s0, which);
    c.branch.labels.push(first);
    let n = samples.max(4);
    for k in 0..n {
        c.advance(k as f64 / n as f64, (k + 1) as f64 / n as f64, 0)?;
    }
    let mut branch = c.branch;
    let mut last: Option<BranchLabel> = None;
    for l in &branch.labels {
        if matches!(l, BranchLabel::L1 | BranchLabel::L2) {
            if let Some(prev) = last {
                if prev != *l {
                    branch.swaps += 1;
                }
            }
            last = Some(*l);
        }
    }
    Ok(branch)
}

/// Eigenvalue ordering check used by tests and reports: `theta1` carries
/// the larger Rayleigh quotient of `m`.
pub fn is_kappa1_first(m: &Mat2, c: &CrossSample) -> bool {
    rayleigh(m, c.theta1) >= rayleigh(m, c.theta2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::umbilic::{umbilic_locus, DEFAULT_ZERO_TOL};
    use std::f64::consts::FRAC_PI_2;

    fn p(terms: &[(u32, u32, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().cloned())
    }

    fn monkey() -> Poly2 {
        p(&[(3, 0, 1.0), (1, 2, -3.0)])
    }

    fn xn1y(n: u32) -> Poly2 {
        p(&[(n, 0, 1.0), (n, 1, 1.0)])
    }

    #[test]
    fn grad_and_z_examples() {
        for pt in [[0.3, -0.7], [1.0, 2.0]] {
            let g = grad_directional(&monkey(), [1.0, 0.0], pt);
            assert!((g[0] - 6.0 * pt[0]).abs() < 1e-12 && (g[1] + 6.0 * pt[1]).abs() < 1e-12);
            assert_eq!(grad_directional(&p(&[(1, 1, 1.0)]), [1.0, 0.0], pt), [0.0, 1.0]);
            assert_eq!(grad_directional(&p(&[(3, 0, 1.0)]), [1.0, 0.0], pt), [6.0 * pt[0], 0.0]);
            assert_eq!(z_field(&p(&[(2, 0, 1.0), (0, 2, -1.0)]), pt), [0.0, 4.0]);
            let z = z_field(&monkey(), pt);
            assert!((z[0] - 12.0 * pt[1]).abs() < 1e-12 && (z[1] - 12.0 * pt[0]).abs() < 1e-12);
            assert_eq!(z_field(&p(&[(1, 1, 1.0)]), pt), [-2.0, 0.0]);
        }
    }

    #[test]
    fn homotopy_examples() {
        let h = p(&[(2, 0, 1.0), (1, 1, 3.0), (0, 2, -2.0), (3, 1, 1.0)]);
        let hess = cross_from_matrix(&[[2.0, 3.0], [3.0, -4.0]]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            for amb in [Ambient::Spherical, Ambient::Euclidean] {
                assert!(homotopy_cross(&h, amb, t, [0.0, 0.0]).unwrap().same_cross(&hess, 1e-12));
            }
        }
        let c = homotopy_cross(&p(&[(1, 1, 1.0)]), Ambient::Spherical, 1.0, [0.4, -1.3]).unwrap();
        assert!(c.contains_direction(FRAC_PI_4, 1e-14) && c.contains_direction(3.0 * FRAC_PI_4, 1e-14));
        assert!(matches!(
            homotopy_cross(&xn1y(3), Ambient::Spherical, 0.5, [0.0, 0.4]),
            Err(FieldError::DegeneratePoint { .. })
        ));
    }

    #[test]
    fn extended_cross_on_segment() {
        let h = xn1y(3);
        let region = Disk::centered(0.5);
        let locus = umbilic_locus(&h, &region, 41, DEFAULT_ZERO_TOL).unwrap();
        let delta = default_band(&region);
        let c = extended_cross(&h, Ambient::Spherical, &locus, 0.0, [0.0, 0.3], delta).unwrap();
        assert!(c.extended);
        assert!(c.contains_direction(0.0, 1e-12) && c.contains_direction(FRAC_PI_2, 1e-12));
        let a = extended_cross(&h, Ambient::Spherical, &locus, 0.0, [1e-6, 0.3], delta).unwrap();
        let b = extended_cross(&h, Ambient::Spherical, &locus, 0.0, [-1e-6, 0.3], delta).unwrap();
        assert!(a.same_cross(&b, 1e-4));
        assert_eq!(
            extended_cross(&h, Ambient::Spherical, &locus, 0.0, [0.0, 0.0], delta),
            Err(FieldError::OriginQuery)
        );
        let xy = p(&[(1, 1, 1.0)]);
        let locus = umbilic_locus(&xy, &region, 41, DEFAULT_ZERO_TOL).unwrap();
        let e = extended_cross(&xy, Ambient::Spherical, &locus, 0.0, [0.2, 0.1], delta).unwrap();
        assert!(e.same_cross(&principal_cross_at(&xy, Ambient::Spherical, [0.2, 0.1]).unwrap(), 0.0));
    }

    #[test]
    fn exact_and_float_extension_agree() {
        let h = xn1y(5);
        let segs = [Segment { theta: 0.0, n: 5 }];
        let f = CrossField::new(&h, Ambient::Spherical, &segs, 1e-3, 0.0).unwrap();
        let e = CrossField::new_exact(&h.to_exact(), Ambient::Spherical, &segs, 1e-3, 0.0).unwrap();
        for y in [-0.4, 0.1, 0.35] {
            let (a, b) = (f.sample([0.0, y]).unwrap(), e.sample([0.0, y]).unwrap());
            assert!(a.same_cross(&b, 1e-12));
        }
    }

    #[test]
    fn branch_swaps_follow_parity() {
        for n in [3u32, 4, 5] {
            let h = xn1y(n);
            let region = Disk::centered(0.5);
            let locus = umbilic_locus(&h, &region, 41, DEFAULT_ZERO_TOL).unwrap();
            let f = CrossField::principal(&h, Ambient::Spherical, &segments_of(&locus), default_band(&region))
                .unwrap();
            let b = continue_branch(&f, &Contour::circle([0.0, 0.0], 0.5), 512, None).unwrap();
            let expect = if n % 2 == 1 { 2 } else { 0 };
            assert_eq!(b.swaps, expect, "n = {n}");
            assert_eq!(b.labels.first(), b.labels.last());
            assert!(b.max_step < FRAC_PI_4);
        }
    }

    #[test]
    fn constant_cross_has_no_turning() {
        let f = CrossField::principal(&p(&[(1, 1, 1.0)]), Ambient::Euclidean, &[], 0.0).unwrap();
        let path = Contour::Polyline { points: vec![[0.1, 0.1], [0.5, -0.3], [-0.2, 0.4], [0.1, 0.1]] };
        let b = continue_branch(&f, &path, 64, None).unwrap();
        assert_eq!(b.swaps, 0);
        assert!(b.total_turn().abs() < 1e-12);
    }

    #[test]
    fn admissible_direction_examples() {
        let region = Disk::centered(0.5);
        for h in [p(&[(3, 0, 1.0)]), p(&[(2, 0, 1.0), (0, 2, -1.0)]), monkey()] {
            let locus = umbilic_locus(&h, &region, 41, DEFAULT_ZERO_TOL).unwrap();
            assert_eq!(admissible_direction(&h, &locus, &region).unwrap(), [1.0, 0.0]);
        }
    }

    #[test]
    fn z_is_obtuse_to_grad_hy_on_saddles() {
        let h = &monkey() + &p(&[(1, 1, 0.4), (2, 2, -0.3)]);
        let d = DiffPoly::new(&h);
        for pt in Disk::centered(0.3).grid(21) {
            let j = d.jet(pt);
            if j.hessian_det() > 0.0 {
                continue;
            }
            let z = z_from_jet(&j);
            let g = grad_directional_jet(&j, [0.0, 1.0]);
            let dot = z[0] * g[0] + z[1] * g[1];
            assert!(dot <= -(g[0] * g[0] + g[1] * g[1]) + 1e-12);
        }
    }
}
