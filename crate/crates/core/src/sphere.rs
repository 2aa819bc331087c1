//! A smooth, non-analytic saddle sphere in the round three-sphere.
//!
//! The sphere is glued from three pieces, all lifted from `R^3` by the
//! inverse gnomonic projection:
//!
//! * two caps, the great spheres `S1 = {x0 = x3}` and `S2 = {x0 = -x3}` minus
//!   the lifts of the unit disks in the planes `z = 1` and `z = -1`;
//! * an annulus of revolution joining the two unit circles.
//!
//! The annulus meridian leaves each circle along a flat join
//! `g(r) = 1 - A exp(-1/(1 - r))`. Every derivative of `g` vanishes at
//! `r = 1`, so the annulus meets the planar caps to infinite order. A flat
//! partition of unity hands the slope over to a catenary waist
//! `r = c cosh(z/a)`. Gauss curvature is sampled with the surface of
//! revolution formulas and certified `<= 0`. The extrinsic curvature of the
//! lifted surface is then checked in `S^3` chart by chart, rather than
//! assumed from the sign correspondence.
//!
//! The waist scale `a` is not free: it is fixed so that the blended slope
//! integrates from the join height at `rho2` down to exactly the catenary
//! height at `rho1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{Jet2, Point2};
use crate::spaceform::{extrinsic_curvature_sign, fundamental_forms_jet, gnomonic_inverse, Ambient, Point4};

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("invalid sphere parameter: {0}")]
    InvalidParameter(String),
    #[error("Gauss curvature {k:e} > 0 at radial {radial}, height {height}")]
    CurvatureViolation { k: f64, radial: f64, height: f64 },
    #[error("parameters admit no catenary waist matching the joins (a = {0})")]
    NoWaist(f64),
    #[error("writing atlas: {0}")]
    Io(#[from] std::io::Error),
    #[error("serializing atlas manifest: {0}")]
    Json(#[from] serde_json::Error),
}

/// Construction and certification parameters. The defaults come from a
/// coarse search (see [`coarse_parameter_search`]) and pass the full
/// certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereParams {
    /// Scale `A` of the flat join.
    pub flat_scale: f64,
    /// Waist radius `c` of the catenary.
    pub waist_radius: f64,
    /// Radial interval `[rho1, rho2]` where the join hands over to the
    /// waist.
    pub blend: [f64; 2],
    pub meridian_samples: usize,
    pub parallels: usize,
    /// Samples `(alpha, phi)` on each cap.
    pub cap_samples: [usize; 2],
    /// Highest derivative order checked across the joints.
    pub smoothness_order: u32,
    pub smoothness_step: f64,
    pub smoothness_tol: f64,
    /// Directions (parallels) along which joint smoothness is checked.
    pub joint_directions: usize,
    pub curvature_tol: f64,
    /// Samples of the meridian checked for self-intersection.
    pub embedding_samples: usize,
}

impl Default for SphereParams {
    fn default() -> Self {
        Self {
            flat_scale: 1.0,
            waist_radius: 0.5,
            blend: [0.75, 0.85],
            meridian_samples: 1000,
            parallels: 10,
            cap_samples: [40, 40],
            smoothness_order: 4,
            smoothness_step: 0.005,
            smoothness_tol: 1e-5,
            joint_directions: 8,
            curvature_tol: 1e-12,
            embedding_samples: 10_000,
        }
    }
}

impl SphereParams {
    pub fn validate(&self) -> Result<(), SphereError> {
        let bad = |m: &str| Err(SphereError::InvalidParameter(m.to_string()));
        let [r1, r2] = self.blend;
        if !(self.flat_scale > 0.0 && self.flat_scale.is_finite()) {
            return bad("flat_scale must be positive");
        }
        // g'' < 0 needs 1 - r < 1/2 on the whole join.
        if !(0.0 < self.waist_radius && self.waist_radius < r1 && 0.5 < r1 && r1 < r2 && r2 < 1.0) {
            return bad("need 0 < waist_radius < blend[0] < blend[1] < 1 and blend[0] > 1/2");
        }
        if self.meridian_samples < 8 || self.parallels < 1 || self.cap_samples.iter().any(|&n| n < 2) {
            return bad("sample counts too small");
        }
        if !(1..=6).contains(&self.smoothness_order) {
            return bad("smoothness_order must be in 1..=6");
        }
        let reach = self.smoothness_order as f64 * self.smoothness_step;
        if !(self.smoothness_step > 0.0 && 1.0 - reach > r2) {
            return bad("smoothness stencil must stay inside the pure join");
        }
        if self.joint_directions < 1 || self.embedding_samples < 8 {
            return bad("sample counts too small");
        }
        Ok(())
    }
}

/// `g(r) = 1 - A exp(-1/(1 - r))` for `r < 1` and `g = 1` beyond, with all
/// derivatives in closed form: `d^k/ds^k e^(-1/s) = P_k(1/s) e^(-1/s)` where
/// `P_0 = 1`, `P_(k+1)(u) = u^2 (P_k(u) - P_k'(u))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatJoin {
    pub scale: f64,
    /// Ascending coefficients of `P_k`.
    polys: Vec<Vec<f64>>,
}

/// `exp(-1/s)` underflows to zero below this `s`, where the polynomial
/// factors could otherwise overflow.
const FLAT_CUTOFF: f64 = 1.0 / 740.0;

impl FlatJoin {
    pub fn new(scale: f64, max_order: usize) -> Self {
        let mut polys = vec![vec![1.0]];
        for _ in 0..max_order {
            let p = polys.last().unwrap();
            // P - P'
            let mut q = p.clone();
            for (k, c) in p.iter().enumerate().skip(1) {
                q[k - 1] -= k as f64 * c;
            }
            let mut next = vec![0.0, 0.0];
            next.extend(q);
            polys.push(next);
        }
        Self { scale, polys }
    }

    pub fn max_order(&self) -> usize {
        self.polys.len() - 1
    }

    /// `g^(k)(r)`; `k = 0` is the value.
    pub fn derivative(&self, k: usize, r: f64) -> f64 {
        assert!(k <= self.max_order(), "order {k} beyond table");
        let s = 1.0 - r;
        if s <= FLAT_CUTOFF {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let u = 1.0 / s;
        let p = self.polys[k].iter().rev().fold(0.0, |acc, c| acc * u + c);
        let flat = -self.scale * p * (-u).exp();
        // g = 1 - A e^(-1/s) and d/dr = -d/ds.
        let signed = if k.is_multiple_of(2) { flat } else { -flat };
        if k == 0 {
            1.0 + signed
        } else {
            signed
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.derivative(0, r)
    }

    /// `1 - g(r) = A exp(-1/(1 - r))`, without the rounding of `g` near 1.
    pub fn offset(&self, r: f64) -> f64 {
        let s = 1.0 - r;
        if s <= 0.0 {
            0.0
        } else {
            self.scale * (-1.0 / s).exp()
        }
    }
}

/// The flat join `g` with scale `A` on `support`; `support[1]` must be the
/// joint radius 1.
pub fn flat_join_profile(scale: f64, support: [f64; 2]) -> Result<FlatJoin, SphereError> {
    if !(scale > 0.0) {
        return Err(SphereError::InvalidParameter("flat join scale must be positive".into()));
    }
    if !(support[0] < support[1] && support[1] == 1.0 && support[0] > 0.5) {
        return Err(SphereError::InvalidParameter("flat join support must be [r0, 1] with r0 > 1/2".into()));
    }
    Ok(FlatJoin::new(scale, 8))
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Flat step `w(t) = bump(t) / (bump(t) + bump(1 - t))` and `dw/dt`.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let (p, q) = (bump(t), bump(1.0 - t));
    let w = p / (p + q);
    let dw = p * q * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((p + q) * (p + q));
    (w, dw)
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for k in 1..n {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

const BLEND_PANELS: usize = 2000;

/// The meridian in the `(radial, height)` half-plane. The upper half is the
/// graph `height = G(radial)` on `[rho1, 1]` followed by the catenary
/// `radial = R(height)` down to the waist; the lower half is its mirror.
#[derive(Clone, Debug)]
pub struct Profile {
    pub params: SphereParams,
    pub join: FlatJoin,
    /// Catenary scale `a`.
    pub waist_scale: f64,
    /// Height where the catenary meets the blend, `a arccosh(rho1/c)`.
    pub waist_height: f64,
    /// Cumulative `int_rho1^node w g'` and `int_rho1^node w d arccosh(rho/c)`.
    cum_wg: Vec<f64>,
    cum_wa: Vec<f64>,
}

impl Profile {
    pub fn new(params: &SphereParams) -> Result<Self, SphereError> {
        params.validate()?;
        let join = FlatJoin::new(params.flat_scale, 8);
        let c = params.waist_radius;
        let [r1, r2] = params.blend;
        let dacosh = |r: f64| 1.0 / (r * r - c * c).sqrt();
        let w = |r: f64| smooth_step((r - r1) / (r2 - r1)).0;
        let h = (r2 - r1) / BLEND_PANELS as f64;
        let mut cum_wg = vec![0.0];
        let mut cum_wa = vec![0.0];
        for k in 0..BLEND_PANELS {
            let (lo, hi) = (r1 + k as f64 * h, r1 + (k + 1) as f64 * h);
            cum_wg.push(cum_wg[k] + simpson(|r| w(r) * join.derivative(1, r), lo, hi, 2));
            cum_wa.push(cum_wa[k] + simpson(|r| w(r) * dacosh(r), lo, hi, 2));
        }
        let acosh2 = (r2 / c).acosh();
        let a = (join.value(r2) - cum_wg[BLEND_PANELS]) / (acosh2 - cum_wa[BLEND_PANELS]);
        if !(a > 0.0 && a.is_finite()) {
            return Err(SphereError::NoWaist(a));
        }
        let waist_height = a * (r1 / c).acosh();
        Ok(Self { params: params.clone(), join, waist_scale: a, waist_height, cum_wg, cum_wa })
    }

    fn blend_weight(&self, r: f64) -> (f64, f64) {
        let [r1, r2] = self.params.blend;
        let (w, dw) = smooth_step((r - r1) / (r2 - r1));
        (w, dw / (r2 - r1))
    }

    /// Catenary height `zeta(r) = a arccosh(r/c)` and two derivatives.
    fn catenary_height(&self, r: f64) -> [f64; 3] {
        let (a, c) = (self.waist_scale, self.params.waist_radius);
        let d = r * r - c * c;
        [a * (r / c).acosh(), a / d.sqrt(), -a * r / (d * d.sqrt())]
    }

    /// `[G, G', G'']` on `[rho1, 1]` (upper joint chart).
    pub fn joint_height(&self, r: f64) -> [f64; 3] {
        let [r1, r2] = self.params.blend;
        let g = [self.join.value(r), self.join.derivative(1, r), self.join.derivative(2, r)];
        if r >= r2 {
            return g;
        }
        let z = self.catenary_height(r);
        let (w, dw) = self.blend_weight(r);
        // G = zeta + int_rho1^r w (g' - zeta'), from the cumulative tables
        // plus one Simpson panel for the remainder.
        let h = (r2 - r1) / BLEND_PANELS as f64;
        let k = (((r - r1) / h).floor().max(0.0) as usize).min(BLEND_PANELS - 1);
        let node = r1 + k as f64 * h;
        let a = self.waist_scale;
        let c = self.params.waist_radius;
        let rest = simpson(
            |t| self.blend_weight(t).0 * (self.join.derivative(1, t) - a / (t * t - c * c).sqrt()),
            node,
            r,
            2,
        );
        let value = z[0] + (self.cum_wg[k] - a * self.cum_wa[k]) + rest;
        [value, w * g[1] + (1.0 - w) * z[1], dw * (g[1] - z[1]) + w * g[2] + (1.0 - w) * z[2]]
    }

    /// `[R, R', R'']` of the waist `R(z) = c cosh(z/a)`.
    pub fn waist_radius(&self, z: f64) -> [f64; 3] {
        let (a, c) = (self.waist_scale, self.params.waist_radius);
        [c * (z / a).cosh(), c / a * (z / a).sinh(), c / (a * a) * (z / a).cosh()]
    }

    /// Gauss curvature of the surface of revolution at a meridian point.
    pub fn gauss_curvature(&self, m: &MeridianPoint) -> f64 {
        match m.piece {
            Piece::UpperJoint | Piece::LowerJoint => {
                let [_, d1, d2] = self.joint_height(m.radial);
                d1 * d2 / (m.radial * (1.0 + d1 * d1).powi(2))
            }
            Piece::Waist => {
                let [r, d1, d2] = self.waist_radius(m.height);
                -d2 / (r * (1.0 + d1 * d1).powi(2))
            }
        }
    }

    /// `n` points along the whole meridian from `(1, 1)` to `(1, -1)`: a
    /// quarter on each joint chart, half on the waist.
    pub fn meridian(&self, n: usize) -> Vec<MeridianPoint> {
        let r1 = self.params.blend[0];
        let nj = (n / 4).max(2);
        let nw = n.saturating_sub(2 * nj).max(2);
        let mut out = Vec::with_capacity(2 * nj + nw);
        for k in 0..nj {
            let r = 1.0 - (1.0 - r1) * k as f64 / nj as f64;
            out.push(MeridianPoint { piece: Piece::UpperJoint, radial: r, height: self.joint_height(r)[0] });
        }
        for k in 0..nw {
            let z = self.waist_height * (1.0 - 2.0 * k as f64 / (nw - 1) as f64);
            out.push(MeridianPoint { piece: Piece::Waist, radial: self.waist_radius(z)[0], height: z });
        }
        for k in (0..nj).rev() {
            let r = 1.0 - (1.0 - r1) * k as f64 / nj as f64;
            out.push(MeridianPoint { piece: Piece::LowerJoint, radial: r, height: -self.joint_height(r)[0] });
        }
        out
    }

    /// Largest `|g^(k)(1 - 1e-2)|`, `k = 1..=6`: the join is numerically flat
    /// well before the joint.
    pub fn join_flatness(&self) -> f64 {
        (1..=6).map(|k| self.join.derivative(k, 1.0 - 1e-2).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Piece {
    UpperJoint,
    Waist,
    LowerJoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeridianPoint {
    pub piece: Piece,
    pub radial: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureCertificate {
    pub samples: usize,
    pub max_curvature: f64,
    pub worst: MeridianPoint,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RevolutionAnnulus {
    pub profile: Profile,
    pub meridian: Vec<MeridianPoint>,
    pub parallels: usize,
}

impl RevolutionAnnulus {
    pub fn parallel_angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.parallels as f64
    }

    pub fn point(m: &MeridianPoint, phi: f64) -> [f64; 3] {
        [m.radial * phi.cos(), m.radial * phi.sin(), m.height]
    }
}

/// Builds the annulus and certifies `K <= tol` at every meridian/parallel
/// sample.
pub fn assemble_saddle_annulus(
    params: &SphereParams,
) -> Result<(RevolutionAnnulus, CurvatureCertificate), SphereError> {
    let profile = Profile::new(params)?;
    let meridian = profile.meridian(params.meridian_samples);
    let mut worst = (f64::NEG_INFINITY, meridian[0]);
    // K does not depend on the parallel, but every sample is evaluated so
    // the certificate covers exactly the exported points.
    for m in &meridian {
        let k = profile.gauss_curvature(m);
        for _ in 0..params.parallels {
            if !(k <= worst.0) {
                worst = (k, *m);
            }
        }
    }
    let cert = CurvatureCertificate {
        samples: meridian.len() * params.parallels,
        max_curvature: worst.0,
        worst: worst.1,
        tol: params.curvature_tol,
        pass: worst.0 <= params.curvature_tol,
    };
    if !cert.pass {
        return Err(SphereError::CurvatureViolation { k: worst.0, radial: worst.1.radial, height: worst.1.height });
    }
    Ok((RevolutionAnnulus { profile, meridian, parallels: params.parallels }, cert))
}

/// Coarse grid over waist radius and blend interval used to choose the
/// default parameters: returns every candidate with whether its curvature
/// certificate passes on a short meridian.
pub fn coarse_parameter_search() -> Vec<(SphereParams, bool)> {
    let mut out = Vec::new();
    for c in [0.3, 0.4, 0.5, 0.6] {
        for r1 in [0.7, 0.75, 0.8] {
            for width in [0.05, 0.1] {
                let params = SphereParams {
                    waist_radius: c,
                    blend: [r1, r1 + width],
                    meridian_samples: 200,
                    parallels: 1,
                    ..SphereParams::default()
                };
                let pass = assemble_saddle_annulus(&params).is_ok();
                out.push((params, pass));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapSample {
    pub point: Point4,
    /// Angle from the cap's center `(1, 0, 0, +-1)/sqrt 2` on its great
    /// sphere; `alpha > pi/2` lies in the hemisphere `x0 < 0`.
    pub alpha: f64,
    pub phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSample {
    pub point: Point4,
    pub meridian: MeridianPoint,
    pub phi: f64,
}

/// Both boundary circles, shared by the annulus and a cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointCircle {
    pub cap: u8,
    pub height: f64,
    pub points: Vec<Point4>,
}

#[derive(Clone, Debug)]
pub struct SphereAtlas {
    pub profile: Profile,
    pub cap1: Vec<CapSample>,
    pub cap2: Vec<CapSample>,
    pub annulus: Vec<AnnulusSample>,
    pub joints: Vec<JointCircle>,
}

/// Smallest `alpha` on a cap: the joint circle, chart radius 1.
fn cap_alpha0() -> f64 {
    (1.0 / 2f64.sqrt()).atan()
}

/// Cap samples on `S1` (`upper`) or `S2`. Each is the lift of a chart point
/// `(x, y, +-1)` with radius `sqrt 2 |tan alpha|`, taken antipodally beyond
/// the great circle at infinity (`alpha > pi/2`).
fn cap_samples(upper: bool, n_alpha: usize, n_phi: usize) -> Vec<CapSample> {
    let a0 = cap_alpha0();
    let z = if upper { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(n_alpha * n_phi);
    for i in 0..n_alpha {
        let alpha = a0 + (PI - a0) * i as f64 / (n_alpha - 1) as f64;
        if (alpha - FRAC_PI_2).abs() < 1e-9 {
            continue;
        }
        let radius = 2f64.sqrt() * alpha.tan().abs();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let p = gnomonic_inverse([radius * phi.cos(), radius * phi.sin(), z]);
            let point = if alpha > FRAC_PI_2 { Point4(p.0.map(|v| -v)) } else { p };
            out.push(CapSample { point, alpha, phi });
        }
    }
    out
}

/// Lifts the annulus samples and both caps to `S^3`.
pub fn lift_to_sphere(annulus: &RevolutionAnnulus, params: &SphereParams) -> SphereAtlas {
    let mut samples = Vec::with_capacity(annulus.meridian.len() * annulus.parallels);
    for m in &annulus.meridian {
        for j in 0..annulus.parallels {
            let phi = annulus.parallel_angle(j);
            samples.push(AnnulusSample { point: gnomonic_inverse(RevolutionAnnulus::point(m, phi)), meridian: *m, phi });
        }
    }
    let joints = [(1u8, 1.0), (2u8, -1.0)]
        .into_iter()
        .map(|(cap, height)| JointCircle {
            cap,
            height,
            points: (0..annulus.parallels)
                .map(|j| {
                    let phi = annulus.parallel_angle(j);
                    gnomonic_inverse([phi.cos(), phi.sin(), height])
                })
                .collect(),
        })
        .collect();
    let [na, np] = params.cap_samples;
    SphereAtlas {
        profile: annulus.profile.clone(),
        cap1: cap_samples(true, na, np),
        cap2: cap_samples(false, na, np),
        annulus: samples,
        joints,
    }
}

/// 2-jet of the annulus in a graph chart around `sample`, with the chart
/// point. Joint pieces are graphs `z = +-G(sqrt(x^2 + y^2))`; the waist,
/// rotated to `phi = 0`, is the graph `x = sqrt(R(z)^2 - y^2)` over `(y, z)`.
/// Rotations about the `z` axis and permutations of `(x, y, z)` fix `e0`
/// and lift to isometries of `S^3`, so these charts are equivalent to the
/// standard one.
pub fn annulus_chart(profile: &Profile, m: &MeridianPoint, phi: f64) -> (Jet2, Point2) {
    match m.piece {
        Piece::UpperJoint | Piece::LowerJoint => {
            let sign = if m.piece == Piece::UpperJoint { 1.0 } else { -1.0 };
            let r = m.radial;
            let [g, d1, d2] = profile.joint_height(r);
            let (x, y) = (r * phi.cos(), r * phi.sin());
            let (cx, cy) = (x / r, y / r);
            let jet = Jet2 {
                f: g,
                fx: d1 * cx,
                fy: d1 * cy,
                fxx: d2 * cx * cx + d1 * cy * cy / r,
                fxy: (d2 - d1 / r) * cx * cy,
                fyy: d2 * cy * cy + d1 * cx * cx / r,
            };
            let jet = Jet2 {
                f: sign * jet.f,
                fx: sign * jet.fx,
                fy: sign * jet.fy,
                fxx: sign * jet.fxx,
                fxy: sign * jet.fxy,
                fyy: sign * jet.fyy,
            };
            (jet, [x, y])
        }
        Piece::Waist => {
            let [r, d1, d2] = profile.waist_radius(m.height);
            (Jet2 { f: r, fx: 0.0, fy: d1, fxx: -1.0 / r, fxy: 0.0, fyy: d2 }, [0.0, m.height])
        }
    }
}

/// Sign of the extrinsic curvature of the lifted annulus at a sample.
pub fn annulus_sign(profile: &Profile, s: &AnnulusSample) -> i8 {
    let (jet, pt) = annulus_chart(profile, &s.meridian, s.phi);
    extrinsic_curvature_sign(&fundamental_forms_jet(&jet, pt, Ambient::Spherical))
}

/// `gnomonic_inverse(x, y, z + d) - gnomonic_inverse(x, y, z)` without
/// cancellation, for offsets far below the rounding unit of `z`.
fn lift_offset(x: f64, y: f64, z: f64, d: f64) -> [f64; 4] {
    let w = 1.0 + x * x + y * y + z * z;
    let w2 = w + d * (2.0 * z + d);
    let (sw, sw2) = (w.sqrt(), w2.sqrt());
    // 1/sqrt(w2) - 1/sqrt(w) = (w - w2) / (sw sw2 (sw + sw2))
    let dinv = -d * (2.0 * z + d) / (sw * sw2 * (sw + sw2));
    [dinv, x * dinv, y * dinv, z * dinv + d / sw2]
}

/// Largest one-sided finite-difference gap, over derivative orders
/// `1..=order`, between the lifted annulus and the lifted cap plane across
/// the joint circle at height `z`, along the meridian at angle `phi`. The
/// annulus is given by its height offset from the plane, `offset(r)`.
///
/// Both sides use the same backward stencil from the joint. The cap plane
/// continues analytically inside the circle, so matched stencils share their
/// truncation error, and the gap measures only the difference between the
/// two surfaces' derivatives at the joint.
pub fn joint_derivative_gap(offset: impl Fn(f64) -> f64, phi: f64, z: f64, order: u32, step: f64) -> Vec<f64> {
    let diff = |r: f64| lift_offset(r * phi.cos(), r * phi.sin(), z, offset(r));
    (1..=order)
        .map(|k| {
            let mut acc = [0.0; 4];
            let mut binom = 1.0;
            for j in 0..=k {
                if j > 0 {
                    binom = binom * (k - j + 1) as f64 / j as f64;
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let d = diff(1.0 - j as f64 * step);
                for (a, v) in acc.iter_mut().zip(d) {
                    *a += sign * binom * v;
                }
            }
            acc.iter().fold(0.0f64, |m, v| m.max(v.abs())) / step.powi(k as i32)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSmoothness {
    pub cap: u8,
    /// Largest gap per derivative order `1..=order`, over the checked
    /// directions.
    pub gaps: Vec<f64>,
}

/// Whether the meridian polyline through `n` samples is simple.
pub fn meridian_is_simple(profile: &Profile, n: usize) -> bool {
    let pts: Vec<[f64; 2]> = profile.meridian(n).iter().map(|m| [m.radial, m.height]).collect();
    let segs: Vec<([f64; 2], [f64; 2])> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    // Sort by lowest height so only segments with overlapping height ranges
    // are compared.
    let mut order: Vec<usize> = (0..segs.len()).collect();
    let lo = |s: &([f64; 2], [f64; 2])| s.0[1].min(s.1[1]);
    let hi = |s: &([f64; 2], [f64; 2])| s.0[1].max(s.1[1]);
    order.sort_by(|&a, &b| lo(&segs[a]).partial_cmp(&lo(&segs[b])).unwrap());
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if lo(&segs[j]) > hi(&segs[i]) {
                break;
            }
            if i.abs_diff(j) > 1 && segments_intersect(segs[i], segs[j]) {
                return false;
            }
        }
    }
    true
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(s: ([f64; 2], [f64; 2]), t: ([f64; 2], [f64; 2])) -> bool {
    let (d1, d2) = (orient(t.0, t.1, s.0), orient(t.0, t.1, s.1));
    let (d3, d4) = (orient(s.0, s.1, t.0), orient(s.0, s.1, t.1));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return true;
    }
    // Collinear pieces: overlap of the projections.
    if d1 == 0.0 && d2 == 0.0 {
        let axis = if (s.0[0] - s.1[0]).abs() >= (s.0[1] - s.1[1]).abs() { 0 } else { 1 };
        let (a0, a1) = (s.0[axis].min(s.1[axis]), s.0[axis].max(s.1[axis]));
        let (b0, b1) = (t.0[axis].min(t.1[axis]), t.0[axis].max(t.1[axis]));
        return a0.max(b0) <= a1.min(b1);
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub curvature: CurvatureCertificate,
    pub annulus_samples: usize,
    /// Largest extrinsic-curvature sign over lifted annulus samples.
    pub max_annulus_sign: i8,
    /// Sign at the waist circle and at the upper joint circle.
    pub waist_sign: i8,
    pub joint_sign: i8,
    pub cap_samples: usize,
    /// Largest `|e|, |f|, |g|` on the caps.
    pub cap_second_form: f64,
    /// Largest `|x0 -+ x3|` on the caps.
    pub cap_plane_error: f64,
    pub unit_norm_error: f64,
    pub joints: Vec<JointSmoothness>,
    pub join_flatness: f64,
    pub mirror_error: f64,
    pub meridian_simple: bool,
    pub saddle: bool,
    pub caps_geodesic: bool,
    pub smooth: bool,
    pub pass: bool,
}

/// Checks the lifted sphere: saddle signs on the annulus, totally geodesic
/// caps, joint smoothness to the configured order, mirror symmetry and an
/// embedded meridian.
pub fn verify_smooth_saddle_sphere(atlas: &SphereAtlas, curvature: &CurvatureCertificate) -> SphereReport {
    let profile = &atlas.profile;
    let params = &profile.params;
    let signs: Vec<i8> = atlas.annulus.iter().map(|s| annulus_sign(profile, s)).collect();
    let max_annulus_sign = signs.iter().copied().max().unwrap_or(0);
    let chart_sign = |m: MeridianPoint| {
        let (jet, pt) = annulus_chart(profile, &m, 0.0);
        extrinsic_curvature_sign(&fundamental_forms_jet(&jet, pt, Ambient::Spherical))
    };
    let waist_sign = chart_sign(MeridianPoint { piece: Piece::Waist, radial: params.waist_radius, height: 0.0 });
    let joint_sign = chart_sign(MeridianPoint { piece: Piece::UpperJoint, radial: 1.0, height: 1.0 });

    let mut cap_second_form: f64 = 0.0;
    let mut cap_plane_error: f64 = 0.0;
    for (caps, sign) in [(&atlas.cap1, 1.0), (&atlas.cap2, -1.0)] {
        // Each cap is the graph of the constant `+-1` in its chart.
        let jet = Jet2 { f: sign, fx: 0.0, fy: 0.0, fxx: 0.0, fxy: 0.0, fyy: 0.0 };
        for c in caps.iter() {
            let x = c.point.0;
            let p = if x[0] < 0.0 { x.map(|v| -v) } else { x };
            let forms = fundamental_forms_jet(&jet, [p[1] / p[0], p[2] / p[0]], Ambient::Spherical);
            cap_second_form = cap_second_form.max(forms.e.abs()).max(forms.f.abs()).max(forms.g.abs());
            cap_plane_error = cap_plane_error.max((x[0] - sign * x[3]).abs());
        }
    }
    let unit_norm_error = atlas
        .annulus
        .iter()
        .map(|s| s.point)
        .chain(atlas.cap1.iter().chain(&atlas.cap2).map(|c| c.point))
        .map(|p| (p.norm() - 1.0).abs())
        .fold(0.0, f64::max);

    let joints: Vec<JointSmoothness> = [(1u8, 1.0), (2u8, -1.0)]
        .into_iter()
        .map(|(cap, sign)| {
            let mut gaps = vec![0.0f64; params.smoothness_order as usize];
            for j in 0..params.joint_directions {
                let phi = 2.0 * PI * j as f64 / params.joint_directions as f64;
                // The stencil stays in the pure join, where `G - 1` is the
                // flat offset itself.
                let g = joint_derivative_gap(
                    |r| -sign * profile.join.offset(r),
                    phi,
                    sign,
                    params.smoothness_order,
                    params.smoothness_step,
                );
                for (a, b) in gaps.iter_mut().zip(g) {
                    *a = a.max(b);
                }
            }
            JointSmoothness { cap, gaps }
        })
        .collect();

    // (x0, x1, x2, x3) -> (x0, x1, x2, -x3) with the cap swap. Meridian
    // samples are laid out symmetrically, so sample i mirrors sample
    // len - 1 - i on the same parallel.
    let mirror = |p: &Point4| Point4([p.0[0], p.0[1], p.0[2], -p.0[3]]);
    let dist = |a: &Point4, b: &Point4| (0..4).map(|i| (a.0[i] - b.0[i]).abs()).fold(0.0, f64::max);
    let mut mirror_error: f64 = 0.0;
    for (a, b) in atlas.cap1.iter().zip(&atlas.cap2) {
        mirror_error = mirror_error.max(dist(&mirror(&a.point), &b.point));
    }
    let per = params.parallels;
    let rows = atlas.annulus.len() / per;
    for i in 0..rows {
        for j in 0..per {
            let a = &atlas.annulus[i * per + j];
            let b = &atlas.annulus[(rows - 1 - i) * per + j];
            mirror_error = mirror_error.max(dist(&mirror(&a.point), &b.point));
        }
    }

    let meridian_simple = meridian_is_simple(profile, params.embedding_samples);
    let saddle = curvature.pass && max_annulus_sign <= 0;
    let caps_geodesic = cap_second_form == 0.0 && cap_plane_error < 1e-12;
    let smooth = joints.iter().all(|j| j.gaps.iter().all(|g| *g < params.smoothness_tol));
    let pass = saddle && caps_geodesic && smooth && meridian_simple && unit_norm_error < 1e-13 && mirror_error < 1e-12;
    SphereReport {
        curvature: curvature.clone(),
        annulus_samples: atlas.annulus.len(),
        max_annulus_sign,
        waist_sign,
        joint_sign,
        cap_samples: atlas.cap1.len() + atlas.cap2.len(),
        cap_second_form,
        cap_plane_error,
        unit_norm_error,
        joints,
        join_flatness: profile.join_flatness(),
        mirror_error,
        meridian_simple,
        saddle,
        caps_geodesic,
        smooth,
        pass,
    }
}

/// Builds, lifts and verifies the sphere in one go.
pub fn build_sphere(params: &SphereParams) -> Result<(SphereAtlas, SphereReport), SphereError> {
    let (annulus, cert) = assemble_saddle_annulus(params)?;
    let atlas = lift_to_sphere(&annulus, params);
    let report = verify_smooth_saddle_sphere(&atlas, &cert);
    Ok((atlas, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasManifest {
    pub schema: String,
    pub params: SphereParams,
    pub waist_scale: f64,
    pub waist_height: f64,
    pub counts: AtlasCounts,
    pub samples_file: String,
    pub report: SphereReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasCounts {
    pub cap1: usize,
    pub cap2: usize,
    pub annulus: usize,
}

pub const ATLAS_SCHEMA: &str = "saddle-atlas/1";
pub const ATLAS_MANIFEST: &str = "atlas.json";
pub const ATLAS_SAMPLES: &str = "atlas_samples.csv";

/// Sample table with header `x0,x1,x2,x3,chart,ksign`.
pub fn atlas_csv(atlas: &SphereAtlas) -> String {
    let mut s = String::from("x0,x1,x2,x3,chart,ksign\n");
    let mut row = |p: &Point4, chart: &str, sign: i8| {
        let [a, b, c, d] = p.0;
        let _ = writeln!(s, "{a},{b},{c},{d},{chart},{sign}");
    };
    for c in &atlas.cap1 {
        row(&c.point, "cap1", 0);
    }
    for c in &atlas.cap2 {
        row(&c.point, "cap2", 0);
    }
    for a in &atlas.annulus {
        let chart = match a.meridian.piece {
            Piece::UpperJoint => "annulus-upper",
            Piece::Waist => "annulus-waist",
            Piece::LowerJoint => "annulus-lower",
        };
        row(&a.point, chart, annulus_sign(&atlas.profile, a));
    }
    s
}

/// Writes the manifest and sample table into `dir`; returns their paths.
pub fn write_atlas(atlas: &SphereAtlas, report: &SphereReport, dir: &Path) -> Result<[PathBuf; 2], SphereError> {
    std::fs::create_dir_all(dir)?;
    let manifest = AtlasManifest {
        schema: ATLAS_SCHEMA.to_string(),
        params: atlas.profile.params.clone(),
        waist_scale: atlas.profile.waist_scale,
        waist_height: atlas.profile.waist_height,
        counts: AtlasCounts { cap1: atlas.cap1.len(), cap2: atlas.cap2.len(), annulus: atlas.annulus.len() },
        samples_file: ATLAS_SAMPLES.to_string(),
        report: report.clone(),
    };
    let mpath = dir.join(ATLAS_MANIFEST);
    let spath = dir.join(ATLAS_SAMPLES);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    std::fs::write(&spath, atlas_csv(atlas))?;
    Ok([mpath, spath])
}
