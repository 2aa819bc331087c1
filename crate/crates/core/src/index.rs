//! Certified indices of vector and line fields at isolated singularities.
//!
//! An index is the total turning of the field along a positively oriented
//! circle divided by `2 pi`. The turning is accumulated by nearest-lift
//! tracking with adaptive bisection so every accepted step stays below
//! `pi/4`; the raw value is accepted only near a half-integer, only when it
//! survives doubling the sample count, and only when two consecutive radii
//! `r`, `r/2` agree.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cross::angle_delta;
use crate::field::{continue_branch, Contour, CrossField, FieldError, LineSource, Segment, VectorField, VectorKind};
use crate::jet::Point2;
use crate::poly::Poly2;
use crate::spaceform::Ambient;

/// An exact half-integer, stored as its numerator over 2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(pub i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub fn from_int(k: i64) -> Self {
        HalfInt(2 * k)
    }

    pub fn numerator(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn doubled(self) -> Self {
        HalfInt(2 * self.0)
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl std::iter::Sum for HalfInt {
    fn sum<I: Iterator<Item = HalfInt>>(iter: I) -> HalfInt {
        iter.fold(HalfInt::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.split_once('/') {
            Some((p, "2")) => p.trim().parse().map(HalfInt).map_err(|e| format!("bad index {s:?}: {e}")),
            Some(_) => Err(format!("index {s:?} must have denominator 2")),
            None => s.parse::<i64>().map(HalfInt::from_int).map_err(|e| format!("bad index {s:?}: {e}")),
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("field nearly vanishes on the circle of radius {radius} at ({x}, {y})")]
    NearZeroSample { x: f64, y: f64, radius: f64 },
    #[error("index did not stabilize after {halvings} radius halvings: {last}")]
    NoStabilization { halvings: u32, last: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSettings {
    /// Starting radius.
    pub r0: f64,
    /// Initial number of samples on each circle.
    pub samples: usize,
    pub max_halvings: u32,
    /// Allowed distance of the raw turning number from a half-integer.
    pub residual_tol: f64,
}

impl Default for IndexSettings {
    fn default() -> Self {
        Self { r0: 0.25, samples: 512, max_halvings: 8, residual_tol: 0.05 }
    }
}

impl IndexSettings {
    pub fn with_radius(r0: f64) -> Self {
        Self { r0, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub index: HalfInt,
    pub radius_used: f64,
    pub samples_used: usize,
    pub max_step: f64,
    pub certified: bool,
}

/// Result at one radius.
#[derive(Clone, Copy, Debug)]
struct Loop {
    turn: f64,
    samples: usize,
    max_step: f64,
}

/// Rounds a turning angle to an index; `half` allows half-integers.
pub fn round_turning(turn: f64, half: bool, residual_tol: f64) -> Option<HalfInt> {
    let raw = turn / (2.0 * PI);
    let p = if half { (2.0 * raw).round() as i64 } else { 2 * raw.round() as i64 };
    let residual = (raw - p as f64 / 2.0).abs();
    (residual < residual_tol).then_some(HalfInt(p))
}

fn vector_loop<F>(field: &F, center: Point2, r: f64, n: usize, phase: f64) -> Result<Loop, IndexError>
where
    F: Fn(Point2) -> Result<[f64; 2], FieldError>,
{
    let at = |s: f64| {
        let a = phase + 2.0 * PI * s;
        [center[0] + r * a.cos(), center[1] + r * a.sin()]
    };
    // Coarse pass for the magnitude scale.
    let mut vals = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let p = at(k as f64 / n as f64);
        vals.push((p, field(p)?));
    }
    let scale = vals.iter().map(|(_, v)| v[0].hypot(v[1])).fold(0.0, f64::max);
    let near_zero = |p: Point2, v: [f64; 2]| -> Result<(), IndexError> {
        if !(v[0].hypot(v[1]) > 1e-12 * scale) {
            return Err(IndexError::NearZeroSample { x: p[0], y: p[1], radius: r });
        }
        Ok(())
    };
    let mut turn = 0.0;
    let mut max_step: f64 = 0.0;
    let mut samples = 1;
    let mut prev = vals[0].1[1].atan2(vals[0].1[0]);
    near_zero(vals[0].0, vals[0].1)?;
    // Stack of (a, b, depth) intervals still to process, in path order.
    for k in 0..n {
        let mut stack = vec![(k as f64 / n as f64, (k + 1) as f64 / n as f64, 0u32, Some(vals[k + 1]))];
        while let Some((a, b, depth, known)) = stack.pop() {
            let (p, v) = match known {
                Some(pv) => pv,
                None => {
                    let p = at(b);
                    (p, field(p)?)
                }
            };
            near_zero(p, v)?;
            let ang = v[1].atan2(v[0]);
            let step = angle_delta(prev, ang);
            if step.abs() >= FRAC_PI_4 {
                if depth >= crate::field::MAX_REFINEMENTS {
                    return Err(FieldError::CertificationFailure { x: p[0], y: p[1], step: step.abs() }.into());
                }
                let mid = 0.5 * (a + b);
                stack.push((mid, b, depth + 1, Some((p, v))));
                stack.push((a, mid, depth + 1, None));
                continue;
            }
            turn += step;
            prev = ang;
            max_step = max_step.max(step.abs());
            samples += 1;
        }
    }
    Ok(Loop { turn, samples, max_step })
}

fn line_loop<S: LineSource + ?Sized>(
    src: &S,
    center: Point2,
    r: f64,
    n: usize,
    phase: f64,
    which: usize,
) -> Result<Loop, IndexError> {
    let contour = Contour::Circle { center, radius: r, phase };
    let start = match which {
        0 => None,
        _ => Some(src.sample(contour.point(0.0))?.theta2),
    };
    let b = continue_branch(src, &contour, n, start)?;
    Ok(Loop { turn: b.total_turn(), samples: b.angles.len(), max_step: b.max_step })
}

fn is_singular_sample(e: &IndexError) -> bool {
    matches!(
        e,
        IndexError::NearZeroSample { .. }
            | IndexError::Field(FieldError::NearZero { .. })
            | IndexError::Field(FieldError::DegeneratePoint { .. })
            | IndexError::Field(FieldError::OriginQuery)
    )
}

/// Sample-count doublings tried at one radius before giving up on it.
const MAX_SAMPLE_DOUBLINGS: u32 = 3;

/// One loop at radius `r` with `n` samples. A loop that hits a singular
/// sample is retried with the circle rotated by half, then a quarter, of a
/// sample step.
fn shifted_loop(
    one_loop: &impl Fn(f64, usize, f64) -> Result<Loop, IndexError>,
    r: f64,
    n: usize,
) -> Result<Loop, IndexError> {
    let mut attempt = Err(IndexError::NoStabilization { halvings: 0, last: String::new() });
    for shift in [0.0, 0.5, 0.25] {
        attempt = one_loop(r, n, shift * 2.0 * PI / n as f64);
        match &attempt {
            Err(e) if is_singular_sample(e) => continue,
            _ => break,
        }
    }
    attempt
}

/// Index at one radius, accepted only when `n` and `2n` samples agree. A
/// narrow sector where the field turns fast can hide between two samples
/// (the step then looks small modulo the field's symmetry); the doubled
/// loop samples inside it.
fn resolve_radius(
    settings: &IndexSettings,
    half: bool,
    one_loop: &impl Fn(f64, usize, f64) -> Result<Loop, IndexError>,
    r: f64,
) -> Result<(HalfInt, Loop), String> {
    let mut n = settings.samples.max(8);
    let mut prev: Option<HalfInt> = None;
    let mut last = String::new();
    for _ in 0..=MAX_SAMPLE_DOUBLINGS {
        match shifted_loop(one_loop, r, n) {
            Ok(l) => match round_turning(l.turn, half, settings.residual_tol) {
                Some(ix) if prev == Some(ix) => return Ok((ix, l)),
                Some(ix) => {
                    if prev.is_some() {
                        last = format!("index changed under sample doubling to {n} at r = {r}");
                    }
                    prev = Some(ix);
                }
                None => {
                    last = format!("turning {:.4} (x 2pi) is not a half-integer at r = {r}", l.turn / (2.0 * PI));
                    prev = None;
                }
            },
            Err(e) => return Err(format!("r = {r}: {e}")),
        }
        n *= 2;
    }
    Err(last)
}

/// Runs loops at radii `r0, r0/2, ...` until two consecutive radii give the
/// same rounded index.
fn stabilize(
    settings: &IndexSettings,
    half: bool,
    one_loop: impl Fn(f64, usize, f64) -> Result<Loop, IndexError>,
) -> Result<IndexReport, IndexError> {
    let mut prev: Option<HalfInt> = None;
    let mut last = String::from("no radius tried");
    let mut r = settings.r0;
    for _ in 0..=settings.max_halvings {
        match resolve_radius(settings, half, &one_loop, r) {
            Ok((ix, l)) => {
                if prev == Some(ix) {
                    return Ok(IndexReport {
                        index: ix,
                        radius_used: r,
                        samples_used: l.samples,
                        max_step: l.max_step,
                        certified: true,
                    });
                }
                prev = Some(ix);
            }
            Err(e) => {
                last = e;
                prev = None;
            }
        }
        r *= 0.5;
    }
    Err(IndexError::NoStabilization { halvings: settings.max_halvings, last })
}

/// Winding number of a vector field around `center`.
pub fn vector_index<F>(field: &F, center: Point2, settings: &IndexSettings) -> Result<IndexReport, IndexError>
where
    F: Fn(Point2) -> Result<[f64; 2], FieldError>,
{
    stabilize(settings, false, |r, n, phase| vector_loop(field, center, r, n, phase))
}

/// Half-integer index of a line or cross field around `center`, following
/// the branch through the first line of the starting sample.
pub fn line_index<S: LineSource + ?Sized>(
    src: &S,
    center: Point2,
    settings: &IndexSettings,
) -> Result<IndexReport, IndexError> {
    line_index_branch(src, center, settings, 0)
}

/// As [`line_index`], following the branch through line `which` (0 or 1).
pub fn line_index_branch<S: LineSource + ?Sized>(
    src: &S,
    center: Point2,
    settings: &IndexSettings,
    which: usize,
) -> Result<IndexReport, IndexError> {
    stabilize(settings, true, |r, n, phase| line_loop(src, center, r, n, phase, which))
}

/// Fixed-sample winding number without refinement or certification; a
/// brute-force cross-check for [`vector_index`].
pub fn brute_force_winding<F: Fn(Point2) -> [f64; 2]>(field: F, center: Point2, r: f64, n: usize) -> f64 {
    let mut turn = 0.0;
    let mut prev: Option<f64> = None;
    for k in 0..=n {
        let a = 2.0 * PI * k as f64 / n as f64;
        let v = field([center[0] + r * a.cos(), center[1] + r * a.sin()]);
        let ang = v[1].atan2(v[0]);
        if let Some(p) = prev {
            turn += angle_delta(p, ang);
        }
        prev = Some(ang);
    }
    turn / (2.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// Index of the line field of `Z`.
    pub z_index: IndexReport,
    /// Index of the Hessian cross.
    pub cross_index: IndexReport,
    pub holds: bool,
}

/// Checks `Ind(L_Z) = 2 Ind(F^1)` where `F^1` is the Hessian cross.
pub fn index_doubling_check(
    h: &Poly2,
    segments: &[Segment],
    delta: f64,
    center: Point2,
    settings: &IndexSettings,
) -> Result<DoublingReport, IndexError> {
    let z = VectorField::new(h, VectorKind::Z, segments, delta)?;
    let z_index = vector_index(&|p| z.vector(p), center, settings)?;
    let hess = CrossField::new(h, Ambient::Euclidean, segments, delta, 1.0)?;
    let cross_index = line_index(&hess, center, settings)?;
    Ok(DoublingReport { z_index, cross_index, holds: z_index.index == cross_index.index.doubled() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyEntry {
    pub t: f64,
    pub index: IndexReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub entries: Vec<HomotopyEntry>,
    pub constant: bool,
}

/// Index of the cross of `m(t)` for each `t`, and whether they agree.
pub fn homotopy_invariance_check(
    h: &Poly2,
    ambient: Ambient,
    segments: &[Segment],
    delta: f64,
    t_grid: &[f64],
    center: Point2,
    settings: &IndexSettings,
) -> Result<HomotopyReport, IndexError> {
    let mut entries = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let f = CrossField::new(h, ambient, segments, delta, t)?;
        entries.push(HomotopyEntry { t, index: line_index(&f, center, settings)? });
    }
    let constant = entries.windows(2).all(|w| w[0].index.index == w[1].index.index);
    Ok(HomotopyReport { entries, constant })
}

/// A singularity of a line field on a closed surface, located in a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub chart: String,
    pub center: Point2,
    pub index: HalfInt,
}

/// Exact sum of the indices.
pub fn poincare_hopf_sum(singularities: &[Singularity]) -> HalfInt {
    singularities.iter().map(|s| s.index).sum()
}
