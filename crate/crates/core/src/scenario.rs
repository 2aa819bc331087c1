//! Scenario files: a JSON description of one polynomial, its ambient space
//! and a list of analyses, run in order into a [`RunReport`].
//!
//! ```json
//! {
//!   "name": "monkey",
//!   "function": { "terms": [[3, 0, 1], [1, 2, -3]] },
//!   "analyses": [
//!     { "kind": "saddle" },
//!     { "kind": "index", "field": { "which": "grad-nu", "nu": [1, 0] }, "expect": "-1" },
//!     { "kind": "doubling" }
//!   ]
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{default_index_settings, gradient_index_with, GradientIndex};
use crate::field::{
    admissible_directions_seeded, default_band, segments_of, CrossField, FieldError, LineSource, Segment,
    VectorField, VectorKind, DIRECTION_SEED,
};
use crate::index::{
    line_index, vector_index, DoublingReport, HalfInt, HomotopyEntry, HomotopyReport, IndexError, IndexReport,
    IndexSettings,
};
use crate::jet::{hessian_scale, saddle_check, square_grid, DiffPoly, Disk, Point2, SaddleReport};
use crate::poly::{Poly2, PolyLiteral};
use crate::spaceform::Ambient;
use crate::sphere::{build_sphere, write_atlas, SphereParams, SphereReport};
use crate::surfaces::{ellipsoid_index_sum, EllipsoidIndexReport};
use crate::umbilic::{umbilic_locus, umbilic_locus_exact, LocusReport, DEFAULT_ZERO_TOL};

pub const REPORT_SCHEMA: &str = "saddle-report/1";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl ScenarioError {
    fn config(msg: impl Into<String>) -> Self {
        ScenarioError::Config(msg.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    #[serde(default = "euclidean")]
    pub ambient: Ambient,
    #[serde(default = "unit_disk")]
    pub region: Disk,
    #[serde(default)]
    pub seed: Option<u64>,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn euclidean() -> Ambient {
    Ambient::Euclidean
}

fn unit_disk() -> Disk {
    Disk::centered(0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    /// `[i, j, c]` triples; `c` is a number or a rational string like `"-2/3"`.
    pub terms: PolyLiteral,
    /// Exact rational factorization and division.
    #[serde(default)]
    pub exact: bool,
    /// Terms of total degree above this are dropped before any analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_degree: Option<u32>,
}

impl FunctionSpec {
    fn float(&self) -> Result<Poly2<f64>, ScenarioError> {
        let h = self.terms.to_f64().map_err(ScenarioError::config)?;
        Ok(match self.truncation_degree {
            Some(d) => h.without_above(d),
            None => h,
        })
    }

    fn rational(&self) -> Result<Poly2<BigRational>, ScenarioError> {
        let h = self.terms.to_exact().map_err(ScenarioError::config)?;
        Ok(match self.truncation_degree {
            Some(d) => h.without_above(d),
            None => h,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_report_file")]
    pub report: String,
}

fn default_report_file() -> String {
    REPORT_FILE.to_string()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, report: default_report_file() }
    }
}

/// Which field a grid or an index analysis looks at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "which", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldChoice {
    /// Principal cross, labelled `kappa_1` / `kappa_2`.
    Principal,
    /// Cross of `(1 - t) B / mu + t D^2 h`.
    Homotopy { t: f64 },
    Z,
    /// `grad h_nu`; without `nu`, the first admissible direction that
    /// certifies (index analyses) or the first admissible one (grids).
    GradNu {
        #[serde(default)]
        nu: Option<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Analysis {
    Saddle {
        #[serde(default = "default_grid")]
        grid: usize,
        /// Allowed `det D^2 h`, relative to the squared largest Hessian entry.
        #[serde(default)]
        tol: f64,
        #[serde(default = "yes")]
        expect_pass: bool,
    },
    Umbilic {
        #[serde(default = "default_grid")]
        grid: usize,
        #[serde(default = "default_zero_tol")]
        zero_tol: f64,
        #[serde(default)]
        expect_segments: Option<usize>,
    },
    FieldGrid {
        field: FieldChoice,
        #[serde(default = "default_grid_n")]
        n: usize,
        #[serde(default = "default_grid_file")]
        file: String,
    },
    Index {
        field: FieldChoice,
        #[serde(default)]
        settings: Option<IndexSettings>,
        #[serde(default)]
        expect: Option<HalfInt>,
    },
    Homotopy {
        #[serde(default = "default_t_grid")]
        t_grid: Vec<f64>,
        #[serde(default)]
        settings: Option<IndexSettings>,
    },
    Doubling {
        #[serde(default)]
        settings: Option<IndexSettings>,
    },
    SphereBuild {
        #[serde(default)]
        params: SphereParams,
        #[serde(default = "default_atlas_dir")]
        dir: String,
    },
    PhSum {
        #[serde(default = "default_axes")]
        axes: [f64; 3],
        #[serde(default)]
        settings: Option<IndexSettings>,
        #[serde(default = "euler_sphere")]
        expect: HalfInt,
    },
}

fn default_grid() -> usize {
    41
}
fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}
fn yes() -> bool {
    true
}
fn default_grid_n() -> usize {
    21
}
fn default_grid_file() -> String {
    "grid.csv".into()
}
fn default_t_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_atlas_dir() -> String {
    "atlas".into()
}
fn default_axes() -> [f64; 3] {
    [1.0, 1.5, 2.0]
}
fn euler_sphere() -> HalfInt {
    HalfInt::from_int(2)
}

impl Analysis {
    pub fn kind(&self) -> &'static str {
        match self {
            Analysis::Saddle { .. } => "saddle",
            Analysis::Umbilic { .. } => "umbilic",
            Analysis::FieldGrid { .. } => "field-grid",
            Analysis::Index { .. } => "index",
            Analysis::Homotopy { .. } => "homotopy",
            Analysis::Doubling { .. } => "doubling",
            Analysis::SphereBuild { .. } => "sphere-build",
            Analysis::PhSum { .. } => "ph-sum",
        }
    }

    fn needs_function(&self) -> bool {
        !matches!(self, Analysis::SphereBuild { .. } | Analysis::PhSum { .. })
    }
}

fn check_settings(s: &Option<IndexSettings>) -> Result<(), ScenarioError> {
    if let Some(s) = s {
        if !(s.r0 > 0.0 && s.r0.is_finite()) || s.samples < 8 || !(s.residual_tol > 0.0 && s.residual_tol < 0.25) {
            return Err(ScenarioError::config(format!("bad index settings {s:?}")));
        }
    }
    Ok(())
}

fn check_field(f: &FieldChoice) -> Result<(), ScenarioError> {
    match *f {
        FieldChoice::Homotopy { t } if !(0.0..=1.0).contains(&t) => {
            Err(ScenarioError::config(format!("homotopy parameter {t} outside [0, 1]")))
        }
        FieldChoice::GradNu { nu: Some(nu) } if !(nu[0].hypot(nu[1]) > 0.0) => {
            Err(ScenarioError::config("grad-nu direction must be non-zero"))
        }
        _ => Ok(()),
    }
}

fn plain_file_name(name: &str) -> Result<(), ScenarioError> {
    let p = Path::new(name);
    if name.is_empty() || p.components().count() != 1 || p.is_absolute() || name == ".." {
        return Err(ScenarioError::config(format!("output name {name:?} must be a plain file name")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.region.radius > 0.0 && self.region.radius.is_finite()) {
            return Err(ScenarioError::config("region radius must be positive"));
        }
        if self.analyses.is_empty() {
            return Err(ScenarioError::config("no analyses requested"));
        }
        if let Some(f) = &self.function {
            f.terms.to_f64().map_err(ScenarioError::config)?;
            if f.exact {
                f.terms.to_exact().map_err(ScenarioError::config)?;
            }
            if f.float()?.is_zero() {
                return Err(ScenarioError::config("the function has no terms left after truncation"));
            }
        }
        plain_file_name(&self.output.report)?;
        for a in &self.analyses {
            if a.needs_function() && self.function.is_none() {
                return Err(ScenarioError::config(format!("analysis {} needs a function", a.kind())));
            }
            match a {
                Analysis::Saddle { grid, tol, .. } | Analysis::Umbilic { grid, zero_tol: tol, .. } => {
                    if *grid < 2 || !(*tol >= 0.0) {
                        return Err(ScenarioError::config(format!("{}: grid >= 2 and tol >= 0 required", a.kind())));
                    }
                }
                Analysis::FieldGrid { field, n, file } => {
                    if *n < 2 {
                        return Err(ScenarioError::config("field-grid: n >= 2 required"));
                    }
                    check_field(field)?;
                    plain_file_name(file)?;
                }
                Analysis::Index { field, settings, .. } => {
                    check_field(field)?;
                    check_settings(settings)?;
                }
                Analysis::Homotopy { t_grid, settings } => {
                    if t_grid.is_empty() || t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                        return Err(ScenarioError::config("homotopy: t_grid must be non-empty within [0, 1]"));
                    }
                    check_settings(settings)?;
                }
                Analysis::Doubling { settings } => check_settings(settings)?,
                Analysis::SphereBuild { params, dir } => {
                    params.validate().map_err(|e| ScenarioError::config(e.to_string()))?;
                    plain_file_name(dir)?;
                }
                Analysis::PhSum { axes, settings, .. } => {
                    if !(0.0 < axes[0] && axes[0] < axes[1] && axes[1] < axes[2]) {
                        return Err(ScenarioError::config("ph-sum: axes must satisfy 0 < a < b < c"));
                    }
                    check_settings(settings)?;
                }
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied on top of a scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub exact: bool,
    pub seed: Option<u64>,
    /// Run only `field-grid` analyses.
    pub grids_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    /// An assertion did not hold.
    Fail,
    /// An index did not stabilize.
    Unstable,
    /// The analysis could not run.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub file: String,
    pub rows: usize,
    /// Row count per flag value.
    pub flags: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexOutcome {
    pub field: FieldChoice,
    /// The direction used for `grad-nu`.
    #[serde(default)]
    pub nu: Option<[f64; 2]>,
    pub report: IndexReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereOutcome {
    pub report: SphereReport,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnalysisResult {
    Saddle(SaddleReport),
    Umbilic(LocusReport),
    FieldGrid(GridSummary),
    Index(IndexOutcome),
    Homotopy(HomotopyReport),
    Doubling(DoublingReport),
    SphereBuild(SphereOutcome),
    PhSum(EllipsoidIndexReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub kind: String,
    pub status: Status,
    #[serde(default)]
    pub result: Option<AnalysisResult>,
    /// Why the analysis failed or could not run.
    #[serde(default)]
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub name: String,
    pub exact: bool,
    pub seed: u64,
    pub ambient: Ambient,
    pub region: Disk,
    pub outcomes: Vec<AnalysisOutcome>,
    pub pass: bool,
    /// Elapsed seconds; the only non-deterministic field.
    pub wall_time: f64,
}

impl RunReport {
    /// 0 when everything passed, 4 when an index did not stabilize, 2 for
    /// any other failure.
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else if self.outcomes.iter().any(|o| o.status == Status::Unstable) {
            4
        } else {
            2
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// The polynomial of a scenario in float and, in exact mode, rational form.
struct Subject {
    h: Poly2,
    exact: Option<Poly2<BigRational>>,
    locus: Option<Result<LocusReport, String>>,
}

impl Subject {
    fn locus(&mut self, region: &Disk) -> Result<&LocusReport, String> {
        if self.locus.is_none() {
            let r = match &self.exact {
                Some(e) => umbilic_locus_exact(e, region, default_grid(), DEFAULT_ZERO_TOL),
                None => umbilic_locus(&self.h, region, default_grid(), DEFAULT_ZERO_TOL),
            };
            self.locus = Some(r.map_err(|e| format!("umbilic locus: {e}")));
        }
        self.locus.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }

    fn cross(&self, ambient: Ambient, segs: &[Segment], delta: f64, t: f64) -> Result<CrossField, FieldError> {
        match &self.exact {
            Some(e) => CrossField::new_exact(e, ambient, segs, delta, t),
            None => CrossField::new(&self.h, ambient, segs, delta, t),
        }
    }

    fn vector(&self, kind: VectorKind, segs: &[Segment], delta: f64) -> Result<VectorField, FieldError> {
        match &self.exact {
            Some(e) => VectorField::new_exact(e, kind, segs, delta),
            None => VectorField::new(&self.h, kind, segs, delta),
        }
    }
}

fn outcome(kind: &str, status: Status, result: Option<AnalysisResult>, message: Option<String>) -> AnalysisOutcome {
    AnalysisOutcome { kind: kind.to_string(), status, result, message }
}

fn index_failure(kind: &str, e: IndexError) -> AnalysisOutcome {
    let status = match e {
        IndexError::NoStabilization { .. } => Status::Unstable,
        _ => Status::Error,
    };
    outcome(kind, status, None, Some(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ScenarioError::Io { path: parent.into(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| ScenarioError::Io { path: path.into(), source })
}

/// Runs every analysis of `scenario` in order, writes grids, atlases and the
/// JSON report under `opts.out_dir`, and returns the report.
///
/// Analysis failures are recorded in the report; only configuration and
/// output errors are returned as `Err`.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    scenario.validate()?;
    let start = Instant::now();
    let seed = opts.seed.or(scenario.seed).unwrap_or(DIRECTION_SEED);
    let exact = opts.exact || scenario.function.as_ref().is_some_and(|f| f.exact);
    let mut subject = match &scenario.function {
        Some(f) => Some(Subject {
            h: f.float()?,
            exact: if exact { Some(f.rational()?) } else { None },
            locus: None,
        }),
        None => None,
    };
    let region = scenario.region;
    let mut outcomes = Vec::new();
    for a in &scenario.analyses {
        if opts.grids_only && !matches!(a, Analysis::FieldGrid { .. }) {
            continue;
        }
        let o = match a {
            Analysis::SphereBuild { params, dir } => run_sphere(params, &opts.out_dir.join(dir), dir)?,
            Analysis::PhSum { axes, settings, expect } => {
                let settings = settings.unwrap_or_else(|| IndexSettings::with_radius(0.05));
                match ellipsoid_index_sum(*axes, &settings) {
                    Ok(r) => {
                        let ok = r.sum == *expect;
                        let msg = (!ok).then(|| format!("index sum {} != {}", r.sum, expect));
                        outcome("ph-sum", if ok { Status::Pass } else { Status::Fail }, Some(AnalysisResult::PhSum(r)), msg)
                    }
                    Err(e) => index_failure("ph-sum", e),
                }
            }
            _ => {
                let s = subject.as_mut().expect("validated: analysis has a function");
                run_on_function(a, s, scenario.ambient, &region, seed, &opts.out_dir)?
            }
        };
        outcomes.push(o);
    }
    let pass = !outcomes.is_empty() && outcomes.iter().all(|o| o.status == Status::Pass);
    let report = RunReport {
        schema: REPORT_SCHEMA.to_string(),
        name: scenario.name.clone(),
        exact,
        seed,
        ambient: scenario.ambient,
        region,
        outcomes,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
    };
    write_file(&opts.out_dir.join(&scenario.output.report), &report.to_json())?;
    Ok(report)
}

fn run_sphere(params: &SphereParams, dir: &Path, rel: &str) -> Result<AnalysisOutcome, ScenarioError> {
    let (atlas, report) = match build_sphere(params) {
        Ok(v) => v,
        Err(e) => return Ok(outcome("sphere-build", Status::Error, None, Some(e.to_string()))),
    };
    let files = write_atlas(&atlas, &report, dir).map_err(|e| ScenarioError::Io {
        path: dir.into(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let files = files
        .iter()
        .map(|p| format!("{rel}/{}", p.file_name().unwrap_or_default().to_string_lossy()))
        .collect();
    let status = if report.pass { Status::Pass } else { Status::Fail };
    let msg = (!report.pass).then(|| "sphere certificate failed".to_string());
    Ok(outcome("sphere-build", status, Some(AnalysisResult::SphereBuild(SphereOutcome { report, files })), msg))
}

fn run_on_function(
    a: &Analysis,
    s: &mut Subject,
    ambient: Ambient,
    region: &Disk,
    seed: u64,
    out_dir: &Path,
) -> Result<AnalysisOutcome, ScenarioError> {
    let kind = a.kind();
    let settings_or = |st: &Option<IndexSettings>| st.unwrap_or_else(|| default_index_settings(region));
    Ok(match a {
        Analysis::Saddle { grid, tol, expect_pass } => {
            let scale = hessian_scale(&DiffPoly::new(&s.h), region, *grid);
            let r = saddle_check(&s.h, region, *grid, tol * scale * scale);
            let ok = r.pass == *expect_pass;
            let msg = (!ok).then(|| format!("saddle check pass = {}, worst det {} at {:?}", r.pass, r.worst_value, r.worst_point));
            outcome(kind, if ok { Status::Pass } else { Status::Fail }, Some(AnalysisResult::Saddle(r)), msg)
        }
        Analysis::Umbilic { grid, zero_tol, expect_segments } => {
            let r = match &s.exact {
                Some(e) => umbilic_locus_exact(e, region, *grid, *zero_tol),
                None => umbilic_locus(&s.h, region, *grid, *zero_tol),
            };
            match r {
                Ok(r) => {
                    let count = r.segments().len();
                    let ok = expect_segments.is_none_or(|n| n == count);
                    let msg = (!ok).then(|| format!("{count} segments found, {} expected", expect_segments.unwrap()));
                    outcome(kind, if ok { Status::Pass } else { Status::Fail }, Some(AnalysisResult::Umbilic(r)), msg)
                }
                Err(e) => outcome(kind, Status::Fail, None, Some(e.to_string())),
            }
        }
        Analysis::FieldGrid { field, n, file } => {
            let locus = match s.locus(region) {
                Ok(l) => l.clone(),
                Err(e) => return Ok(outcome(kind, Status::Error, None, Some(e))),
            };
            let csv = match grid_csv_for(s, ambient, region, *n, field, &locus, seed) {
                Ok(c) => c,
                Err(e) => return Ok(outcome(kind, Status::Error, None, Some(e.to_string()))),
            };
            write_file(&out_dir.join(file), &csv)?;
            let mut flags = BTreeMap::new();
            for line in csv.lines().skip(1) {
                let flag = line.rsplit(',').next().unwrap_or_default();
                *flags.entry(flag.to_string()).or_insert(0) += 1;
            }
            let summary = GridSummary { file: file.clone(), rows: n * n, flags };
            outcome(kind, Status::Pass, Some(AnalysisResult::FieldGrid(summary)), None)
        }
        Analysis::Index { field, settings, expect } => {
            let settings = settings_or(settings);
            let locus = match s.locus(region) {
                Ok(l) => l.clone(),
                Err(e) => return Ok(outcome(kind, Status::Error, None, Some(e))),
            };
            let res = field_index(s, ambient, region, &locus, field, &settings, seed);
            match res {
                Ok((report, nu)) => {
                    let ok = expect.is_none_or(|e| e == report.index);
                    let msg = (!ok).then(|| format!("index {} != expected {}", report.index, expect.unwrap()));
                    let result = AnalysisResult::Index(IndexOutcome { field: *field, nu, report });
                    outcome(kind, if ok { Status::Pass } else { Status::Fail }, Some(result), msg)
                }
                Err(e) => index_failure(kind, e),
            }
        }
        Analysis::Homotopy { t_grid, settings } => {
            let settings = settings_or(settings);
            let segs = match s.locus(region) {
                Ok(l) => segments_of(l),
                Err(e) => return Ok(outcome(kind, Status::Error, None, Some(e))),
            };
            let delta = default_band(region);
            let mut entries = Vec::new();
            for &t in t_grid {
                let r = s
                    .cross(ambient, &segs, delta, t)
                    .map_err(IndexError::from)
                    .and_then(|f| line_index(&f, [0.0, 0.0], &settings));
                match r {
                    Ok(index) => entries.push(HomotopyEntry { t, index }),
                    Err(e) => return Ok(index_failure(kind, e)),
                }
            }
            let constant = entries.windows(2).all(|w| w[0].index.index == w[1].index.index);
            let msg = (!constant).then(|| "index varies along the homotopy".to_string());
            let status = if constant { Status::Pass } else { Status::Fail };
            outcome(kind, status, Some(AnalysisResult::Homotopy(HomotopyReport { entries, constant })), msg)
        }
        Analysis::Doubling { settings } => {
            let settings = settings_or(settings);
            let segs = match s.locus(region) {
                Ok(l) => segments_of(l),
                Err(e) => return Ok(outcome(kind, Status::Error, None, Some(e))),
            };
            match doubling(s, &segs, default_band(region), &settings) {
                Ok(r) => {
                    let msg = (!r.holds).then(|| {
                        format!("Z index {} != 2 x Hessian cross index {}", r.z_index.index, r.cross_index.index)
                    });
                    outcome(kind, if r.holds { Status::Pass } else { Status::Fail }, Some(AnalysisResult::Doubling(r)), msg)
                }
                Err(e) => index_failure(kind, e),
            }
        }
        Analysis::SphereBuild { .. } | Analysis::PhSum { .. } => unreachable!("handled without a function"),
    })
}

fn doubling(s: &Subject, segs: &[Segment], delta: f64, settings: &IndexSettings) -> Result<DoublingReport, IndexError> {
    let origin = [0.0, 0.0];
    let z = s.vector(VectorKind::Z, segs, delta)?;
    let z_index = vector_index(&|p| z.vector(p), origin, settings)?;
    let hess = s.cross(Ambient::Euclidean, segs, delta, 1.0)?;
    let cross_index = line_index(&hess, origin, settings)?;
    Ok(DoublingReport { z_index, cross_index, holds: z_index.index == cross_index.index.doubled() })
}

fn field_index(
    s: &Subject,
    ambient: Ambient,
    region: &Disk,
    locus: &LocusReport,
    field: &FieldChoice,
    settings: &IndexSettings,
    seed: u64,
) -> Result<(IndexReport, Option<[f64; 2]>), IndexError> {
    let segs = segments_of(locus);
    let delta = default_band(region);
    let origin = [0.0, 0.0];
    match *field {
        FieldChoice::Principal => Ok((line_index(&s.cross(ambient, &segs, delta, 0.0)?, origin, settings)?, None)),
        FieldChoice::Homotopy { t } => Ok((line_index(&s.cross(ambient, &segs, delta, t)?, origin, settings)?, None)),
        FieldChoice::Z => {
            let z = s.vector(VectorKind::Z, &segs, delta)?;
            Ok((vector_index(&|p| z.vector(p), origin, settings)?, None))
        }
        FieldChoice::GradNu { nu: Some(nu) } => {
            let f = s.vector(VectorKind::GradNu { nu }, &segs, delta)?;
            Ok((vector_index(&|p| f.vector(p), origin, settings)?, Some(nu)))
        }
        FieldChoice::GradNu { nu: None } => {
            let dirs = admissible_directions_seeded(&s.h, locus, region, seed);
            let GradientIndex { nu, report, .. } =
                gradient_index_with(locus, region, settings, dirs, |kind, segs, delta| s.vector(kind, segs, delta))?;
            Ok((report, Some(nu)))
        }
    }
}

fn grid_csv_for(
    s: &Subject,
    ambient: Ambient,
    region: &Disk,
    n: usize,
    field: &FieldChoice,
    locus: &LocusReport,
    seed: u64,
) -> Result<String, FieldError> {
    let segs = &segments_of(locus);
    let delta = default_band(region);
    let source: Box<dyn LineSource> = match *field {
        FieldChoice::Principal => Box::new(s.cross(ambient, segs, delta, 0.0)?),
        FieldChoice::Homotopy { t } => Box::new(s.cross(ambient, segs, delta, t)?),
        FieldChoice::Z => Box::new(s.vector(VectorKind::Z, segs, delta)?),
        FieldChoice::GradNu { nu } => {
            let nu = match nu {
                Some(nu) => nu,
                None => *admissible_directions_seeded(&s.h, locus, region, seed)
                    .first()
                    .ok_or(FieldError::NoDirectionFound)?,
            };
            Box::new(s.vector(VectorKind::GradNu { nu }, segs, delta)?)
        }
    };
    Ok(grid_csv(source.as_ref(), region.center, region.radius, n))
}

/// Short, comma-free flag for a failed sample.
fn error_flag(e: &FieldError) -> &'static str {
    match e {
        FieldError::OriginQuery => "origin",
        FieldError::DegeneratePoint { .. } => "degenerate",
        FieldError::NearZero { .. } => "near-zero",
        _ => "error",
    }
}

/// Samples `source` on the `n x n` grid over the square of half-width
/// `half` around `center`, one `x,y,theta1,theta2,flag` row per point in
/// row-major order (y outer, x inner), after a header line. Evaluation
/// errors are recorded in the flag column with `nan` angles.
pub fn grid_csv<S: LineSource + ?Sized>(source: &S, center: Point2, half: f64, n: usize) -> String {
    let mut out = String::from("x,y,theta1,theta2,flag\n");
    for p in square_grid(center, half, n) {
        match source.sample(p) {
            Ok(c) => {
                let flag = if c.extended { "extended" } else { "ok" };
                writeln!(out, "{},{},{},{},{flag}", p[0], p[1], c.theta1, c.theta2).unwrap();
            }
            Err(e) => writeln!(out, "{},{},nan,nan,{}", p[0], p[1], error_flag(&e)).unwrap(),
        }
    }
    out
}

/// The chosen field of `h` on the `n x n` grid over `region`'s bounding
/// square, as CSV (see [`grid_csv`]). Segments are found by
/// [`umbilic_locus`]; without a classification the field is not extended.
pub fn export_field_grid(
    h: &Poly2,
    ambient: Ambient,
    region: &Disk,
    n: usize,
    which: FieldChoice,
) -> Result<String, FieldError> {
    let subject = Subject { h: h.clone(), exact: None, locus: None };
    let locus = umbilic_locus(h, region, default_grid(), DEFAULT_ZERO_TOL).unwrap_or_default();
    grid_csv_for(&subject, ambient, region, n.max(2), &which, &locus, DIRECTION_SEED)
}
