//! Analysis runs and their JSON / CSV reports.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::config::{AnalysisConfig, Format, OutputSpec};
use crate::convexity::{
    ball_convexity_check, berger_from_estimates, classify_cut_point, condition_from_estimate, radii_estimate,
    sample_directions, AnalysisOptions, BallConvexityVerdict, BergerResult, ConditionReport, CutOutcome, Estimate, RadiiEstimate,
    RadiusName,
};
use crate::error::{Error, Result};
use crate::metric::Point;
use crate::models::{get_model, GroundTruth, ModelRecord};
use crate::suite::SuiteSummary;

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: &str = "1.0.0";

/// Top-level key left out of canonical comparisons.
pub const VOLATILE_KEY: &str = "run";

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunInfo {
    pub timestamp_unix: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub params: Value,
    pub dimension: usize,
    pub ground_truth: Option<GroundTruth>,
    pub provenance: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub chart: usize,
    pub coords: Vec<f64>,
    pub radii: RadiiEstimate,
    pub conditions: Vec<ConditionReport>,
    pub balls: Vec<BallConvexityVerdict>,
    pub cuts: Vec<CutOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub tool: ToolInfo,
    pub run: RunInfo,
    pub config: Option<AnalysisConfig>,
    pub model: Option<ModelInfo>,
    pub points: Vec<PointReport>,
    pub berger: Option<BergerResult>,
    pub suite: Option<SuiteSummary>,
    pub cut_locus: Option<CutLocus>,
}

/// Cut points along evenly spread directions from one base point.
#[derive(Clone, Debug, Serialize)]
pub struct CutLocus {
    pub base: Point,
    pub bound: f64,
    pub directions: Vec<Vec<f64>>,
    pub cuts: Vec<CutOutcome>,
}

impl CutLocus {
    /// One row per direction.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.base.coords.len();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["direction".to_string()];
        header.extend((1..=n).map(|i| format!("v{i}")));
        header.extend(["status", "distance"].map(String::from));
        header.extend((1..=n).map(|i| format!("y{i}")));
        header.extend(["chart", "classification", "n_segments", "jacobi_det"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for (k, (v, cut)) in self.directions.iter().zip(&self.cuts).enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(v.iter().map(|x| fmt_num(*x)));
            match cut {
                CutOutcome::Found(r) => {
                    row.extend(["found".to_string(), fmt_num(r.distance)]);
                    row.extend(r.point.coords.iter().map(|x| fmt_num(*x)));
                    let class = serde_json::to_value(r.classification).ok().and_then(|v| v.as_str().map(String::from));
                    row.extend([
                        r.point.chart.to_string(),
                        class.unwrap_or_default(),
                        r.n_segments.to_string(),
                        fmt_num(r.jacobi_det),
                    ]);
                }
                CutOutcome::ExceedsBound { bound } => {
                    row.extend(["exceeds_bound".to_string(), fmt_num(*bound)]);
                    row.extend(std::iter::repeat_n(String::new(), n + 4));
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

impl ReportDocument {
    pub(crate) fn empty() -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION.into(),
            tool: ToolInfo::default(),
            run: RunInfo { timestamp_unix: now_unix(), wall_time_s: 0.0 },
            config: None,
            model: None,
            points: Vec::new(),
            berger: None,
            suite: None,
            cut_locus: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the run timing removed; equal for equal inputs.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Value::Object(map) = &mut v {
            map.remove(VOLATILE_KEY);
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// One row per point: coordinates, then each radius with its
    /// half-width and status.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.points.first().map_or(0, |p| p.coords.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        for name in RADII {
            let key = radius_key(name);
            header.extend([key.to_string(), format!("{key}_hw"), format!("{key}_status")]);
        }
        let conds: Vec<String> = self
            .points
            .first()
            .map(|p| p.conditions.iter().map(|c| format!("condition_{:?}", c.condition)).collect())
            .unwrap_or_default();
        header.extend(conds.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for p in &self.points {
            let mut row: Vec<String> = p.coords.iter().map(|x| fmt_num(*x)).collect();
            for name in RADII {
                row.extend(estimate_cells(&p.radii.get(name)));
            }
            for c in &p.conditions {
                row.push(serde_json::to_value(c.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn write(&self, out: &OutputSpec) -> Result<()> {
        let text = match (out.format, &self.cut_locus) {
            (Format::Json, _) => self.to_json(),
            (Format::Csv, Some(cl)) => cl.to_csv()?,
            (Format::Csv, None) => self.to_csv()?,
        };
        write_file(&out.path, &text)
    }
}

const RADII: [RadiusName; 5] = [
    RadiusName::Injectivity,
    RadiusName::LocalConvexity,
    RadiusName::StrongLocalConvexity,
    RadiusName::Convexity,
    RadiusName::StrongConvexity,
];

fn radius_key(name: RadiusName) -> &'static str {
    match name {
        RadiusName::Injectivity => "i",
        RadiusName::LocalConvexity => "lc",
        RadiusName::StrongLocalConvexity => "slc",
        RadiusName::Convexity => "c",
        RadiusName::StrongConvexity => "sc",
    }
}

/// Value, half-width and status cells; an unbounded estimate reports the
/// bound as its value.
pub(crate) fn estimate_cells(e: &Estimate) -> [String; 3] {
    match e {
        Estimate::Finite { value, half_width } => [fmt_num(*value), fmt_num(*half_width), "finite".into()],
        Estimate::ExceedsBound { bound } => [fmt_num(*bound), String::new(), "exceeds_bound".into()],
    }
}

/// `1.5708±0.0010` or `exceeds_bound(10)`.
pub fn fmt_estimate(e: &Estimate) -> String {
    match e {
        Estimate::Finite { value, half_width } => format!("{value:.4}±{half_width:.4}"),
        Estimate::ExceedsBound { bound } => format!("exceeds_bound({bound})"),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Radii, requested conditions, balls and cut points at every configured
/// point, plus Berger's inequality over the points.
pub fn run_analyze(cfg: &AnalysisConfig) -> Result<ReportDocument> {
    let start = Instant::now();
    let (rec, points) = cfg.resolve()?;
    let m = &*rec.manifold;
    let opts = cfg.options();
    let mut reports = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let radii = radii_estimate(m, p, &opts)?;
        let conditions = cfg
            .conditions
            .iter()
            .map(|&which| condition_from_estimate(m, &radii, which, &cfg.probe_radii, &opts))
            .collect::<Result<_>>()?;
        let balls = cfg
            .balls
            .iter()
            .map(|&r| ball_convexity_check(m, p, r, opts.n_pairs, &opts))
            .collect::<Result<_>>()?;
        let cuts = if cfg.cut_directions > 0 {
            let bp = m.best_chart(p);
            sample_directions(m, &bp, cfg.cut_directions, opts.seed)?
                .iter()
                .map(|v| classify_cut_point(m, &bp, v, opts.bound, &opts))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        reports.push(PointReport {
            index,
            chart: p.chart,
            coords: p.coords.clone(),
            radii,
            conditions,
            balls,
            cuts,
        });
    }
    let estimates: Vec<RadiiEstimate> = reports.iter().map(|r| r.radii.clone()).collect();
    let berger = berger_from_estimates(&estimates)?;
    let mut doc = ReportDocument::empty();
    doc.config = Some(cfg.clone());
    doc.model = Some(model_info(&rec));
    doc.points = reports;
    doc.berger = Some(berger);
    doc.run.wall_time_s = start.elapsed().as_secs_f64();
    Ok(doc)
}

/// Classifies the first cut point along `n_dirs` directions from `coords`.
pub fn run_cutlocus(model: &str, params: &Value, coords: &[f64], n_dirs: usize, bound: f64, seed: u64) -> Result<ReportDocument> {
    let start = Instant::now();
    let rec = get_model(model, params)?;
    let m = &*rec.manifold;
    if coords.len() != m.dim() {
        return Err(Error::Config(format!("point has {} coordinates, expected {}", coords.len(), m.dim())));
    }
    if !(bound > 0.0 && bound.is_finite()) || n_dirs == 0 {
        return Err(Error::Config("bound and direction count must be positive".into()));
    }
    let p = m.best_chart(&m.point(coords)?);
    let opts = AnalysisOptions { bound, seed, ..AnalysisOptions::default() };
    let directions = sample_directions(m, &p, n_dirs, seed)?;
    let cuts = directions.iter().map(|v| classify_cut_point(m, &p, v, bound, &opts)).collect::<Result<_>>()?;
    let mut doc = ReportDocument::empty();
    doc.model = Some(model_info(&rec));
    doc.cut_locus = Some(CutLocus { base: p, bound, directions, cuts });
    doc.run.wall_time_s = start.elapsed().as_secs_f64();
    Ok(doc)
}

fn model_info(rec: &ModelRecord) -> ModelInfo {
    ModelInfo {
        name: rec.name.clone(),
        params: rec.params.clone(),
        dimension: rec.manifold.dim(),
        ground_truth: rec.ground_truth.clone(),
        provenance: rec.provenance.clone(),
    }
}

/// Writes `doc` to every configured output, or only to `out` when given.
pub fn write_outputs(doc: &ReportDocument, cfg: &AnalysisConfig, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => doc.write(&OutputSpec::from_path(path)),
        None => cfg.outputs.iter().try_for_each(|o| doc.write(o)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Budgets, PointsSpec};

    #[test]
    fn euclidean_report_round_trip() {
        let mut cfg = AnalysisConfig::for_model("euclidean");
        cfg.points = PointsSpec::List(vec![vec![0.0, 0.0], vec![1.0, -1.0]]);
        cfg.budgets = Budgets { n_dirs: 8, n_pairs: 6, ..Budgets::default() };
        let doc = run_analyze(&cfg).unwrap();
        assert_eq!(doc.points.len(), 2);
        let b = doc.berger.as_ref().unwrap();
        assert!(b.satisfied && b.unbounded);
        let csv = doc.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("x1,x2,i,i_hw,i_status,lc"));
        assert!(lines[1].contains("exceeds_bound"));
        let v: Value = serde_json::from_str(&doc.canonical_json()).unwrap();
        assert!(v.get(VOLATILE_KEY).is_none());
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }
}
