//! Closed surfaces given by graph charts with closed-form jets, used as a
//! positive control for index sums: the triaxial ellipsoid.

use serde::{Deserialize, Serialize};

use crate::field::{matrix_cross, FieldError, LineSource};
use crate::index::{line_index, HalfInt, IndexError, IndexReport, IndexSettings, Singularity};
use crate::jet::{Jet2, Point2};
use crate::spaceform::{shape_numerator_at, Ambient};
use crate::CrossSample;

/// Upper (`z > 0`) or lower graph chart `z = +-c sqrt(1 - x^2/a^2 - y^2/b^2)`
/// of the ellipsoid with semi-axes `(a, b, c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidChart {
    pub axes: [f64; 3],
    pub upper: bool,
}

impl EllipsoidChart {
    pub fn name(&self) -> &'static str {
        if self.upper {
            "ellipsoid-upper"
        } else {
            "ellipsoid-lower"
        }
    }

    /// Closed-form 2-jet of the chart function, or `None` outside the
    /// projected ellipse.
    pub fn jet(&self, pt: Point2) -> Option<Jet2> {
        let [a, b, c] = self.axes;
        let [x, y] = pt;
        let s = 1.0 - x * x / (a * a) - y * y / (b * b);
        if !(s > 0.0) {
            return None;
        }
        let rs = s.sqrt();
        let s32 = s * rs;
        let (a2, b2) = (a * a, b * b);
        let sign = if self.upper { 1.0 } else { -1.0 };
        Some(Jet2 {
            f: sign * c * rs,
            fx: sign * (-c * x / (a2 * rs)),
            fy: sign * (-c * y / (b2 * rs)),
            fxx: sign * (-c / (a2 * rs) - c * x * x / (a2 * a2 * s32)),
            fxy: sign * (-c * x * y / (a2 * b2 * s32)),
            fyy: sign * (-c / (b2 * rs) - c * y * y / (b2 * b2 * s32)),
        })
    }

    /// Shape numerator of the Euclidean graph at `pt`.
    pub fn shape_matrix(&self, pt: Point2) -> Option<[[f64; 2]; 2]> {
        self.jet(pt).map(|j| shape_numerator_at(&j, pt, Ambient::Euclidean))
    }
}

impl LineSource for EllipsoidChart {
    fn sample(&self, pt: Point2) -> Result<CrossSample, FieldError> {
        let m = self.shape_matrix(pt).ok_or(FieldError::NearZero { x: pt[0], y: pt[1] })?;
        matrix_cross(&m, pt, false)
    }

    fn labelled(&self) -> bool {
        true
    }
}

/// The four umbilics of an ellipsoid with `a < b < c`, as chart points. They
/// lie in the plane of the longest and shortest axes (`y = 0`).
pub fn ellipsoid_umbilics(axes: [f64; 3]) -> Vec<(EllipsoidChart, Point2)> {
    let [a, b, c] = axes;
    let x = (a * a * (b * b - a * a) / (c * c - a * a)).sqrt();
    let mut out = Vec::new();
    for upper in [true, false] {
        let chart = EllipsoidChart { axes, upper };
        out.push((chart, [x, 0.0]));
        out.push((chart, [-x, 0.0]));
    }
    out
}

/// Normalized anisotropy `|k1 - k2| / (|k1| + |k2|)` of the shape matrix;
/// zero exactly at umbilics.
pub fn anisotropy(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let disc = (m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0];
    let spread = disc.max(0.0).sqrt();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let mag = if det >= 0.0 { tr.abs() } else { spread };
    if mag == 0.0 {
        0.0
    } else {
        spread / mag
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidIndexReport {
    pub singularities: Vec<Singularity>,
    pub reports: Vec<IndexReport>,
    pub sum: HalfInt,
}

/// Line index of the principal cross at each umbilic, and their sum.
pub fn ellipsoid_index_sum(axes: [f64; 3], settings: &IndexSettings) -> Result<EllipsoidIndexReport, IndexError> {
    let mut singularities = Vec::new();
    let mut reports = Vec::new();
    for (chart, center) in ellipsoid_umbilics(axes) {
        let r = line_index(&chart, center, settings)?;
        singularities.push(Singularity { chart: chart.name().to_string(), center, index: r.index });
        reports.push(r);
    }
    let sum = crate::index::poincare_hopf_sum(&singularities);
    Ok(EllipsoidIndexReport { singularities, reports, sum })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AXES: [f64; 3] = [1.0, 1.5, 2.0];

    #[test]
    fn jet_matches_finite_differences() {
        let ch = EllipsoidChart { axes: AXES, upper: false };
        let pt = [0.3, -0.4];
        let j = ch.jet(pt).unwrap();
        let f = |x: f64, y: f64| ch.jet([x, y]).unwrap().f;
        let e = 1e-4;
        assert!(((f(pt[0] + e, pt[1]) - f(pt[0] - e, pt[1])) / (2.0 * e) - j.fx).abs() < 1e-7);
        let fxy = (f(pt[0] + e, pt[1] + e) - f(pt[0] + e, pt[1] - e) - f(pt[0] - e, pt[1] + e)
            + f(pt[0] - e, pt[1] - e))
            / (4.0 * e * e);
        assert!((fxy - j.fxy).abs() < 1e-5);
        let fyy = (f(pt[0], pt[1] + e) - 2.0 * j.f + f(pt[0], pt[1] - e)) / (e * e);
        assert!((fyy - j.fyy).abs() < 1e-5);
    }

    #[test]
    fn umbilics_are_umbilic() {
        let us = ellipsoid_umbilics(AXES);
        assert!((us[0].1[0].powi(2) - 1.25 / 3.0).abs() < 1e-15);
        for (ch, p) in us {
            let z = ch.jet(p).unwrap().f;
            assert!((z * z - 7.0 / 3.0).abs() < 1e-12);
            assert!(anisotropy(&ch.shape_matrix(p).unwrap()) < 1e-7);
        }
    }

    #[test]
    fn no_other_umbilics_in_charts() {
        let us = ellipsoid_umbilics(AXES);
        for upper in [true, false] {
            let ch = EllipsoidChart { axes: AXES, upper };
            let n = 121;
            for i in 0..n {
                for k in 0..n {
                    let p = [-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.5 + 3.0 * k as f64 / (n - 1) as f64];
                    let Some(m) = ch.shape_matrix(p) else { continue };
                    let near = us.iter().any(|(_, u)| (u[0] - p[0]).hypot(u[1] - p[1]) < 0.1);
                    if !near {
                        assert!(anisotropy(&m) > 1e-3, "near-umbilic at {p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn index_sum_is_euler_characteristic() {
        let r = ellipsoid_index_sum(AXES, &IndexSettings::with_radius(0.05)).unwrap();
        assert!(r.singularities.iter().all(|s| s.index == HalfInt(1)));
        assert_eq!(r.sum, HalfInt::from_int(2));
    }
}
