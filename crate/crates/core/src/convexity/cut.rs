use serde::Serialize;

use super::AnalysisOptions;
use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::geodesic::{self, GeodesicPath};
use crate::jacobi::{IndexFrame, Radius, EPS_E};
use crate::linalg;
use crate::metric::Point;
use crate::ode::Tolerances;
use crate::segments::SegmentSolver;

/// Slack in "some segment is shorter than the geodesic".
pub(crate) const SHORTCUT_SLACK: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutClass {
    Ordinary,
    Singular,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutPointRecord {
    pub base: Point,
    pub direction: Vec<f64>,
    pub distance: f64,
    pub point: Point,
    pub classification: CutClass,
    pub n_segments: usize,
    pub jacobi_det: f64,
    pub conjugate: Radius,
    pub shortcut: Radius,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CutOutcome {
    Found(CutPointRecord),
    ExceedsBound { bound: f64 },
}

impl CutOutcome {
    pub fn record(&self) -> Option<&CutPointRecord> {
        match self {
            CutOutcome::Found(r) => Some(r),
            CutOutcome::ExceedsBound { .. } => None,
        }
    }
}

/// First `t <= t_max` past which `path` (unit speed) stops minimizing,
/// bisected to `tol`. `None` if it still minimizes at `t_max`.
pub fn shortcut_radius(
    m: &Manifold,
    solver: &SegmentSolver,
    path: &GeodesicPath,
    t_max: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let shorter = |t: f64| -> Result<bool> {
        let q = path.point_at(m, t);
        solver.has_shorter(&q, t, SHORTCUT_SLACK)
    };
    let t_max = t_max.min(path.t1());
    if !(t_max > 0.0) || !shorter(t_max)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, t_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if shorter(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// The cut point of `p` along `v`: the earlier of the first conjugate point
/// and the first shortcut, classified by the number of minimizing segments
/// reaching it and the Jacobi determinant there.
pub fn classify_cut_point(
    m: &Manifold,
    p: &Point,
    v: &[f64],
    bound: f64,
    opts: &AnalysisOptions,
) -> Result<CutOutcome> {
    if !(bound > 0.0) {
        return Err(Error::OutOfRange { value: bound, lo: 0.0, hi: f64::INFINITY });
    }
    let p0 = p;
    let p = m.best_chart(p0);
    let v = m
        .push_vector(p0, v, p.chart)
        .ok_or_else(|| Error::InvalidInput("direction not representable".into()))?;
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let nv = linalg::norm(&g, &v);
    if !(nv > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let u: Vec<f64> = v.iter().map(|x| x / nv).collect();
    let frame = IndexFrame::new(m, &p, &u, bound)?;
    let conj = frame.conjugate(m, bound);
    let t_top = match conj {
        Radius::Finite(c) => c * (1.0 - 1e-6),
        Radius::ExceedsBound(_) => bound,
    };
    let solver = SegmentSolver::new(m, &p, 1.1 * t_top.min(bound), opts.segment_options())?;
    let path = geodesic::shoot(m, &p, &u, bound, Tolerances::default())?;
    let sc = shortcut_radius(m, &solver, &path, t_top, 1e-9)?;
    let shortcut = sc.map_or(Radius::ExceedsBound(t_top), Radius::Finite);
    let t_cut = match (sc, conj) {
        (Some(s), _) => s,
        (None, Radius::Finite(c)) => c,
        (None, Radius::ExceedsBound(_)) => return Ok(CutOutcome::ExceedsBound { bound }),
    };
    let q = path.point_at(m, t_cut);
    let set = solver.solve(&q)?;
    let det = frame.jacobi_det(m, t_cut);
    let n_segments = set.n_segments();
    let classification = if n_segments >= 2 {
        CutClass::Ordinary
    } else if det.abs() <= EPS_E {
        CutClass::Singular
    } else {
        CutClass::Undetermined
    };
    Ok(CutOutcome::Found(CutPointRecord {
        base: p,
        direction: u,
        distance: t_cut,
        point: q,
        classification,
        n_segments,
        jacobi_det: det,
        conjugate: conj,
        shortcut,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;
    use std::f64::consts::PI;

    #[test]
    fn torus_axis_cut_is_ordinary() {
        let rec = get_model("flat_torus", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        let out = classify_cut_point(m, &p, &[1.0, 0.0], 2.0, &AnalysisOptions::default()).unwrap();
        let r = out.record().unwrap();
        assert!((r.distance - 0.5).abs() < 1e-6, "{}", r.distance);
        assert_eq!(r.classification, CutClass::Ordinary);
        assert_eq!(r.n_segments, 2);
        assert!(r.jacobi_det.abs() >= 0.1);
    }

    #[test]
    fn sphere_antipode_is_ordinary_and_conjugate() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[1.1, 0.3]).unwrap();
        let out = classify_cut_point(m, &p, &[0.4, 1.0], 4.0, &AnalysisOptions::default()).unwrap();
        let r = out.record().unwrap();
        assert!((r.distance - PI).abs() < 1e-6, "{}", r.distance);
        assert_eq!(r.classification, CutClass::Ordinary);
        assert!(r.jacobi_det.abs() <= EPS_E, "{}", r.jacobi_det);
    }

    #[test]
    fn euclidean_has_no_cut_point() {
        let rec = get_model("euclidean", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        let out = classify_cut_point(m, &p, &[1.0, 2.0], 10.0, &AnalysisOptions::default()).unwrap();
        assert_eq!(out, CutOutcome::ExceedsBound { bound: 10.0 });
    }
}
