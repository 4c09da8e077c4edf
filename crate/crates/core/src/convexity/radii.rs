use serde::Serialize;

use super::ball::{ball_check_with, Center};
use super::cut::{shortcut_radius, SHORTCUT_SLACK};
use super::{infimum, sample_directions, AnalysisOptions, BallConvexityVerdict, Check, Estimate};
use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::geodesic;
use crate::jacobi::{IndexFrame, Radius};
use crate::metric::Point;
use crate::ode::Tolerances;
use crate::par;
use crate::segments::SegmentSolver;

/// Coarse pass of the shortcut search, as a fraction of the search range.
const COARSE: f64 = 1.0 / 32.0;
const FINE_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RadiusName {
    #[serde(rename = "i")]
    Injectivity,
    #[serde(rename = "lc")]
    LocalConvexity,
    #[serde(rename = "slc")]
    StrongLocalConvexity,
    #[serde(rename = "c")]
    Convexity,
    #[serde(rename = "sc")]
    StrongConvexity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusEvidence {
    /// First conjugate point along `direction`.
    Conjugate { direction: Vec<f64>, t: f64 },
    /// A shorter segment reaches the point at distance `t` along `direction`.
    Shortcut { direction: Vec<f64>, t: f64 },
    /// The index form along `direction` stops being positive at `t`.
    IndexForm { direction: Vec<f64>, t: f64 },
    /// The index-form radius exceeds the injectivity radius.
    CappedByInjectivity,
    /// The smallest ball found to fail.
    Ball { verdict: Box<BallConvexityVerdict> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusWitness {
    pub radius: RadiusName,
    pub evidence: RadiusEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiiEstimate {
    pub point: Point,
    pub bound: f64,
    pub i_g: Estimate,
    pub lc_g: Estimate,
    pub slc_g: Estimate,
    pub c_g: Estimate,
    pub sc_g: Estimate,
    pub witnesses: Vec<RadiusWitness>,
    /// The ball-check budget ran out before the brackets closed.
    pub partial: bool,
    pub ball_checks: usize,
}

/// Pointwise inequalities `a <= b` between the radii.
pub const LATTICE: [(RadiusName, RadiusName); 6] = [
    (RadiusName::StrongConvexity, RadiusName::Convexity),
    (RadiusName::StrongLocalConvexity, RadiusName::LocalConvexity),
    (RadiusName::Convexity, RadiusName::LocalConvexity),
    (RadiusName::StrongConvexity, RadiusName::StrongLocalConvexity),
    (RadiusName::LocalConvexity, RadiusName::Injectivity),
    (RadiusName::Convexity, RadiusName::Injectivity),
];

impl RadiiEstimate {
    /// Entries of [`LATTICE`] that fail beyond the combined half-widths.
    pub fn lattice_violations(&self) -> Vec<(RadiusName, RadiusName)> {
        LATTICE.iter().copied().filter(|&(a, b)| !self.get(a).le(&self.get(b))).collect()
    }

    pub fn get(&self, name: RadiusName) -> Estimate {
        match name {
            RadiusName::Injectivity => self.i_g,
            RadiusName::LocalConvexity => self.lc_g,
            RadiusName::StrongLocalConvexity => self.slc_g,
            RadiusName::Convexity => self.c_g,
            RadiusName::StrongConvexity => self.sc_g,
        }
    }
}

struct DirData {
    conj: Radius,
    scc: Radius,
    cc: Radius,
}

/// The five radii at `p`, each an interval estimate or "exceeds bound".
pub fn radii_estimate(m: &Manifold, p: &Point, opts: &AnalysisOptions) -> Result<RadiiEstimate> {
    let bound = opts.bound;
    if !(bound > 0.0) {
        return Err(Error::OutOfRange { value: bound, lo: 0.0, hi: f64::INFINITY });
    }
    let p = m.best_chart(p);
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let dirs = sample_directions(m, &p, opts.dirs_for(m.dim()), opts.seed)?;
    let data: Vec<DirData> = par::map(&dirs, |u| -> Result<DirData> {
        let f = IndexFrame::new(m, &p, u, bound)?;
        Ok(DirData { conj: f.conjugate(m, bound), scc: f.scc_breakdown(m, bound), cc: f.cc_breakdown(m, bound) })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut witnesses = Vec::new();

    // injectivity: first conjugate point, or an earlier shortcut
    let conj: Vec<f64> = data.iter().map(|d| d.conj.or_inf()).collect();
    let u_min = conj.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_top = if u_min.is_finite() { u_min * (1.0 - 1e-6) } else { bound };
    let solver = SegmentSolver::new(m, &p, 1.05 * t_top, opts.segment_options())?;
    let shortcuts = shortcut_scan(m, &p, &solver, &dirs, t_top)?;
    let i_dir: Vec<f64> = conj.iter().zip(&shortcuts).map(|(c, s)| s.unwrap_or(*c)).collect();
    let i = match infimum(&i_dir, &dirs, &g, FINE_TOL) {
        Some((k, v, hw)) if v < bound => {
            let direction = dirs[k].clone();
            witnesses.push(RadiusWitness {
                radius: RadiusName::Injectivity,
                evidence: match shortcuts[k] {
                    Some(t) => RadiusEvidence::Shortcut { direction, t },
                    None => RadiusEvidence::Conjugate { direction, t: v },
                },
            });
            Estimate::finite(v, hw)
        }
        _ => Estimate::ExceedsBound { bound },
    };

    // index-form radii, capped by i
    let mut breakdown = |name: RadiusName, vals: Vec<f64>| -> Estimate {
        let own = infimum(&vals, &dirs, &g, 1e-6).filter(|(_, v, _)| *v < bound);
        match own {
            Some((k, v, hw)) if v < i.or_inf() => {
                witnesses.push(RadiusWitness {
                    radius: name,
                    evidence: RadiusEvidence::IndexForm { direction: dirs[k].clone(), t: v },
                });
                Estimate::finite(v, hw)
            }
            _ if i.is_finite() => {
                witnesses.push(RadiusWitness { radius: name, evidence: RadiusEvidence::CappedByInjectivity });
                i
            }
            _ => Estimate::ExceedsBound { bound },
        }
    };
    let lc = breakdown(RadiusName::LocalConvexity, data.iter().map(|d| d.cc.or_inf()).collect());
    let slc = breakdown(RadiusName::StrongLocalConvexity, data.iter().map(|d| d.scc.or_inf()).collect());

    // ball radii: joint bisection of the proper and strong brackets; pairs
    // in a ball of radius r are up to 2r apart, so stay within bound / 2
    let ball_bound = 0.5 * bound;
    let hi0 = match i.value() {
        Some(v) => (0.98 * (v - i.half_width())).min(ball_bound),
        None => ball_bound,
    };
    let center = Center::new(m, &p, (2.2 * hi0).min(bound), opts)?;
    let check = |r: f64| ball_check_with(&center, r, opts.n_pairs, opts);
    let first = check(hi0)?;
    let mut checks = 1;
    let mut c_br = Bracket::new(hi0, first.proper);
    let mut s_br = Bracket::new(hi0, first.strong);
    let (mut c_fail, mut s_fail) = (None, None);
    if first.proper != Check::Pass {
        c_fail = Some(first.clone());
    }
    if first.strong != Check::Pass {
        s_fail = Some(first);
    }
    let tol = opts.radius_tol;
    while (c_br.open(tol) || s_br.open(tol)) && checks < opts.max_ball_checks {
        let r = if c_br.open(tol) { c_br.mid() } else { s_br.mid() };
        let v = check(r)?;
        checks += 1;
        if c_br.update(r, v.proper) {
            c_fail = Some(v.clone());
        }
        if s_br.update(r, v.strong) {
            s_fail = Some(v);
        }
    }
    let partial = c_br.open(tol) || s_br.open(tol);
    let mut ball = |name: RadiusName, br: &Bracket, fail: Option<BallConvexityVerdict>| -> Estimate {
        if !br.failed {
            if hi0 >= ball_bound {
                return Estimate::ExceedsBound { bound: ball_bound };
            }
            // passes just below i; the family ends between there and i
            let top = i.or_inf() + i.half_width();
            return Estimate::finite(0.5 * (br.lo + top), 0.5 * (top - br.lo));
        }
        if let Some(v) = fail {
            witnesses.push(RadiusWitness { radius: name, evidence: RadiusEvidence::Ball { verdict: Box::new(v) } });
        }
        Estimate::finite(br.mid(), 0.5 * (br.hi - br.lo))
    };
    let c = ball(RadiusName::Convexity, &c_br, c_fail);
    let sc = ball(RadiusName::StrongConvexity, &s_br, s_fail);

    Ok(RadiiEstimate { point: p, bound, i_g: i, lc_g: lc, slc_g: slc, c_g: c, sc_g: sc, witnesses, partial, ball_checks: checks })
}

/// Bracket `[lo, hi]` on a radius below which balls pass a check.
struct Bracket {
    lo: f64,
    hi: f64,
    failed: bool,
}

impl Bracket {
    fn new(hi: f64, at_hi: Check) -> Self {
        if at_hi == Check::Pass {
            Bracket { lo: hi, hi, failed: false }
        } else {
            Bracket { lo: 0.0, hi, failed: true }
        }
    }

    fn open(&self, tol: f64) -> bool {
        self.failed && self.hi - self.lo > tol
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Returns true when `r` becomes the new failing end.
    fn update(&mut self, r: f64, c: Check) -> bool {
        if !self.failed || r <= self.lo || r >= self.hi {
            return false;
        }
        if c == Check::Pass {
            self.lo = r;
            false
        } else {
            self.hi = r;
            true
        }
    }
}

/// Per-direction first shortcut below `t_top`: a coarse pass over all
/// directions, then refinement of those that could realize the minimum.
fn shortcut_scan(
    m: &Manifold,
    p: &Point,
    solver: &SegmentSolver,
    dirs: &[Vec<f64>],
    t_top: f64,
) -> Result<Vec<Option<f64>>> {
    let coarse_tol = COARSE * t_top;
    let coarse: Vec<Option<f64>> = par::map(dirs, |u| -> Result<Option<f64>> {
        let path = geodesic::shoot(m, p, u, t_top, Tolerances::default())?;
        shortcut_radius(m, solver, &path, t_top, coarse_tol)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let best = coarse.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Ok(coarse);
    }
    let idx: Vec<usize> = (0..dirs.len())
        .filter(|&k| coarse[k].is_some_and(|t| t <= best + 2.0 * coarse_tol))
        .collect();
    let fine: Vec<Result<Option<f64>>> = par::map(&idx, |&k| {
        let hi = coarse[k].unwrap();
        let path = geodesic::shoot(m, p, &dirs[k], hi, Tolerances::default())?;
        let shorter = |t: f64| -> Result<bool> { solver.has_shorter(&path.point_at(m, t), t, SHORTCUT_SLACK) };
        let (mut lo, mut hi) = ((hi - coarse_tol).max(0.0), hi);
        while hi - lo > FINE_TOL * t_top.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if shorter(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    });
    let mut out = coarse;
    for (k, r) in idx.into_iter().zip(fine) {
        out[k] = r?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;
    use std::f64::consts::PI;

    fn opts() -> AnalysisOptions {
        AnalysisOptions { n_dirs: 32, n_pairs: 12, ..AnalysisOptions::default() }
    }

    #[test]
    fn torus_radii() {
        let rec = get_model("flat_torus", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.1, 0.2]).unwrap();
        let e = radii_estimate(m, &p, &opts()).unwrap();
        let i = e.i_g.value().unwrap();
        assert!((i - 0.5).abs() < 1e-4, "{e:?}");
        assert!((e.lc_g.value().unwrap() - 0.5).abs() < 1e-4);
        assert!((e.c_g.value().unwrap() - 0.25).abs() <= e.c_g.half_width() + 2e-3, "{:?}", e.c_g);
        assert!((e.sc_g.value().unwrap() - 0.25).abs() <= e.sc_g.half_width() + 2e-3, "{:?}", e.sc_g);
    }

    #[test]
    fn sphere_radii() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[1.0, 0.5]).unwrap();
        let e = radii_estimate(m, &p, &opts()).unwrap();
        assert!((e.i_g.value().unwrap() - PI).abs() < 1e-4, "{e:?}");
        assert!((e.slc_g.value().unwrap() - PI / 2.0).abs() < 1e-4, "{:?}", e.slc_g);
        assert!((e.c_g.value().unwrap() - PI / 2.0).abs() <= e.c_g.half_width() + 2e-3, "{:?}", e.c_g);
        assert!((e.sc_g.value().unwrap() - PI / 2.0).abs() <= e.sc_g.half_width() + 2e-3, "{:?}", e.sc_g);
    }
}
