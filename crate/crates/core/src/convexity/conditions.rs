use serde::{Deserialize, Serialize};

use super::ball::ball_convexity_check;
use super::radii::radii_estimate;
use super::{
    scc_check, uniquely_geodesic_check, AnalysisOptions, BallConvexityVerdict, BallVerdict, Estimate,
    RadiiEstimate, SccVerdict, UniquelyGeodesic,
};
use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::metric::Point;

/// Separation required between radii, and the slack in Berger's inequality.
pub const TAU: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    HoldsUpToBound,
    Fails,
    /// Finite radii were found but no check produced a concrete witness.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionEvidence {
    Radii { estimate: Box<RadiiEstimate> },
    /// Uniqueness of segments in the closed ball of radius `radius`.
    UniquelyGeodesic { radius: f64, expected: bool, result: UniquelyGeodesic },
    /// `slc > c + tau`.
    SlcVsC { slc: Estimate, c: Estimate, separated: bool },
    /// A ball that is properly convex but not strongly convex.
    DistinguishingBall { verdict: Box<BallConvexityVerdict> },
    /// A strongly locally convex ball that is not convex.
    LocalOnlyBall { verdict: Box<BallConvexityVerdict>, scc: SccVerdict },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub point: Point,
    pub condition: Condition,
    pub status: ConditionStatus,
    pub evidence: Vec<ConditionEvidence>,
}

/// Evaluates condition A or B at `p`. `probe_radii` are extra ball radii
/// to test when searching for a distinguishing ball.
pub fn condition_check(
    m: &Manifold,
    p: &Point,
    which: Condition,
    probe_radii: &[f64],
    opts: &AnalysisOptions,
) -> Result<ConditionReport> {
    let est = radii_estimate(m, p, opts)?;
    condition_from_estimate(m, &est, which, probe_radii, opts)
}

/// As [`condition_check`], reusing radii already estimated at the point.
pub fn condition_from_estimate(
    m: &Manifold,
    est: &RadiiEstimate,
    which: Condition,
    probe_radii: &[f64],
    opts: &AnalysisOptions,
) -> Result<ConditionReport> {
    let p = est.point.clone();
    let mut evidence = vec![ConditionEvidence::Radii { estimate: Box::new(est.clone()) }];
    let unbounded = !est.c_g.is_finite()
        && !est.sc_g.is_finite()
        && (which == Condition::B || !est.slc_g.is_finite());
    if unbounded {
        return Ok(ConditionReport { point: p, condition: which, status: ConditionStatus::HoldsUpToBound, evidence });
    }
    let mut failed = false;
    let i_top = est.i_g.or_inf().min(est.bound);
    let mut probes: Vec<f64> = probe_radii.to_vec();

    if let Some(c) = est.c_g.value() {
        let c_hi = c + est.c_g.half_width();
        // the closed ball of radius c must be uniquely geodesic
        let ug = uniquely_geodesic_check(m, &p, c_hi, true, opts.n_pairs, opts)?;
        if let UniquelyGeodesic::Fails { distance, .. } = &ug {
            failed = true;
            probes.push(0.5 * distance);
        }
        evidence.push(ConditionEvidence::UniquelyGeodesic { radius: c_hi, expected: true, result: ug });
        // and a slightly larger one must not be
        let delta = TAU * est.bound;
        if c + delta < i_top {
            let ug = uniquely_geodesic_check(m, &p, c + delta, true, opts.n_pairs, opts)?;
            if ug.holds() {
                failed = true;
            }
            evidence.push(ConditionEvidence::UniquelyGeodesic { radius: c + delta, expected: false, result: ug });
        }
        let separated = est.slc_g.or_inf() > c + TAU;
        failed |= !separated;
        evidence.push(ConditionEvidence::SlcVsC { slc: est.slc_g, c: est.c_g, separated });
        let lo = (c - est.c_g.half_width()).max(0.0);
        probes.extend([lo, c_hi, 0.5 * (lo + c_hi)]);
    }

    // direct search for a ball that is properly but not strongly convex
    let mut seen: Vec<f64> = Vec::new();
    for r in probes {
        if !(r > 0.0 && r < i_top) || seen.iter().any(|s| (s - r).abs() < 1e-9) {
            continue;
        }
        seen.push(r);
        let v = ball_convexity_check(m, &p, r, opts.n_pairs, opts)?;
        if v.verdict == BallVerdict::ProperlyConvexOnly {
            failed = true;
            evidence.push(ConditionEvidence::DistinguishingBall { verdict: Box::new(v) });
            break;
        }
    }

    if which == Condition::A {
        if let (Some(c), Some(slc)) = (est.c_g.value(), est.slc_g.value().or(Some(est.bound))) {
            if slc > c + TAU {
                let r = 0.5 * (c + slc);
                if r < i_top {
                    let v = ball_convexity_check(m, &p, r, opts.n_pairs, opts)?;
                    let scc = match scc_check(m, &p, r, opts.dirs_for(m.dim()), opts.seed) {
                        Ok(s) => s,
                        Err(Error::RadiusBeyondInjectivity { .. }) => SccVerdict::Inconclusive {
                            direction: Vec::new(),
                            min_eig: f64::NAN,
                        },
                        Err(e) => return Err(e),
                    };
                    if v.verdict == BallVerdict::NotConvex && scc.holds() {
                        failed = true;
                        evidence.push(ConditionEvidence::LocalOnlyBall { verdict: Box::new(v), scc });
                    }
                }
            }
        }
    }

    let status = if failed { ConditionStatus::Fails } else { ConditionStatus::Inconclusive };
    Ok(ConditionReport { point: p, condition: which, status, evidence })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BergerResult {
    pub c_m: Estimate,
    pub i_m: Estimate,
    pub satisfied: bool,
    /// `i_M/2 - c_M`; absent when either side is unbounded.
    pub margin: Option<f64>,
    pub unbounded: bool,
}

/// Berger's inequality `c_M <= i_M / 2` over the radii at sample points.
pub fn berger_from_estimates(estimates: &[RadiiEstimate]) -> Result<BergerResult> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("need at least one sample point".into()));
    }
    let c_m = estimates.iter().map(|e| e.c_g).reduce(Estimate::min).unwrap();
    let i_m = estimates.iter().map(|e| e.i_g).reduce(Estimate::min).unwrap();
    Ok(match (c_m.value(), i_m.value()) {
        (Some(c), Some(i)) => {
            BergerResult { c_m, i_m, satisfied: c <= 0.5 * i + TAU, margin: Some(0.5 * i - c), unbounded: false }
        }
        (None, None) => BergerResult { c_m, i_m, satisfied: true, margin: None, unbounded: true },
        (Some(_), None) => BergerResult { c_m, i_m, satisfied: true, margin: None, unbounded: false },
        (None, Some(i)) => {
            let Estimate::ExceedsBound { bound } = c_m else { unreachable!() };
            BergerResult { c_m, i_m, satisfied: bound <= 0.5 * i + TAU, margin: None, unbounded: false }
        }
    })
}

pub fn berger_check(m: &Manifold, points: &[Point], opts: &AnalysisOptions) -> Result<BergerResult> {
    let est: Vec<RadiiEstimate> = points.iter().map(|p| radii_estimate(m, p, opts)).collect::<Result<_>>()?;
    berger_from_estimates(&est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;

    #[test]
    fn euclidean_conditions_hold_up_to_bound() {
        let rec = get_model("euclidean", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        let opts = AnalysisOptions { n_dirs: 16, n_pairs: 8, ..AnalysisOptions::default() };
        for which in [Condition::A, Condition::B] {
            let r = condition_check(m, &p, which, &[], &opts).unwrap();
            assert_eq!(r.status, ConditionStatus::HoldsUpToBound);
        }
        let b = berger_check(m, &[p], &opts).unwrap();
        assert!(b.satisfied && b.unbounded);
    }
}
