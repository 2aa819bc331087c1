//! End-to-end analyses of one saddle polynomial at the origin, shared by the
//! CLI and the test suites.

use serde::{Deserialize, Serialize};

use crate::field::{
    admissible_directions, default_band, segments_of, CrossField, FieldError, Segment, VectorField, VectorKind,
};
use crate::index::{
    homotopy_invariance_check, index_doubling_check, line_index, line_index_branch, DoublingReport,
    HomotopyReport, IndexError, IndexReport, IndexSettings,
};
use crate::jet::Disk;
use crate::poly::Poly2;
use crate::spaceform::Ambient;
use crate::umbilic::LocusReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientIndex {
    pub nu: [f64; 2],
    /// Directions tried before `nu` whose index did not certify.
    pub rejected: usize,
    pub report: IndexReport,
}

/// Index at the origin of the extended line field of `grad h_nu`, for the
/// first admissible `nu` whose index certifies.
pub fn gradient_index(
    h: &Poly2,
    locus: &LocusReport,
    region: &Disk,
    settings: &IndexSettings,
) -> Result<GradientIndex, IndexError> {
    gradient_index_with(locus, region, settings, admissible_directions(h, locus, region), |kind, segs, delta| {
        VectorField::new(h, kind, segs, delta)
    })
}

/// As [`gradient_index`], trying `directions` in order and building the
/// field with `build` (float or exact division).
pub fn gradient_index_with(
    locus: &LocusReport,
    region: &Disk,
    settings: &IndexSettings,
    directions: Vec<[f64; 2]>,
    build: impl Fn(VectorKind, &[Segment], f64) -> Result<VectorField, FieldError>,
) -> Result<GradientIndex, IndexError> {
    let segs = segments_of(locus);
    let delta = default_band(region);
    let mut last: Option<IndexError> = None;
    for (rejected, nu) in directions.into_iter().enumerate() {
        let f = build(VectorKind::GradNu { nu }, &segs, delta)?;
        match line_index(&f, [0.0, 0.0], settings) {
            Ok(report) => return Ok(GradientIndex { nu, rejected, report }),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(IndexError::Field(FieldError::NoDirectionFound)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalIndices {
    pub first: IndexReport,
    pub second: IndexReport,
}

impl PrincipalIndices {
    pub fn agree(&self) -> bool {
        self.first.index == self.second.index
    }
}

/// Indices at the origin of both branches of the extended principal cross.
pub fn principal_indices(
    h: &Poly2,
    ambient: Ambient,
    locus: &LocusReport,
    region: &Disk,
    settings: &IndexSettings,
) -> Result<PrincipalIndices, IndexError> {
    let f = CrossField::principal(h, ambient, &segments_of(locus), default_band(region))?;
    Ok(PrincipalIndices {
        first: line_index_branch(&f, [0.0, 0.0], settings, 0)?,
        second: line_index_branch(&f, [0.0, 0.0], settings, 1)?,
    })
}

pub fn doubling_at_origin(
    h: &Poly2,
    locus: &LocusReport,
    region: &Disk,
    settings: &IndexSettings,
) -> Result<DoublingReport, IndexError> {
    index_doubling_check(h, &segments_of(locus), default_band(region), [0.0, 0.0], settings)
}

pub fn homotopy_at_origin(
    h: &Poly2,
    ambient: Ambient,
    locus: &LocusReport,
    region: &Disk,
    t_grid: &[f64],
    settings: &IndexSettings,
) -> Result<HomotopyReport, IndexError> {
    homotopy_invariance_check(h, ambient, &segments_of(locus), default_band(region), t_grid, [0.0, 0.0], settings)
}

/// Default settings for analyses on `region`: start at half its radius.
pub fn default_index_settings(region: &Disk) -> IndexSettings {
    IndexSettings::with_radius(0.5 * region.radius)
}
