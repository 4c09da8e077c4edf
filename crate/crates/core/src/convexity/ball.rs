use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cut::SHORTCUT_SLACK;
use super::{half_directions, sample_directions, scaled, unit_gaussian, AnalysisOptions, TOL_C};
use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::geodesic::{exp_map, GeodesicPath};
use crate::jacobi::{golden_min, IndexFrame, EPS_E};
use crate::linalg;
use crate::metric::Point;
use crate::par;
use crate::segments::{minimizing_segments, SegmentSet, SegmentSolver};

/// Samples of `d(p, γ(t))` along a segment.
const PROFILE_SAMPLES: usize = 200;
/// Angle between the two directions of a tangent pair is twice this.
const TANGENT_HALF_ANGLE: f64 = 0.35;
/// Open-ball sample points sit at this fraction of the radius.
const INNER: f64 = 1.0 - 1e-4;
/// Half-angles of the pairs aimed at a concave spot of the boundary.
const GUIDED_HALF_ANGLES: [f64; 5] = [0.3, 0.15, 0.08, 0.04, 0.02];
/// Directions with the most negative index form that get guided pairs.
const GUIDED_DIRS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallVerdict {
    StronglyConvex,
    ProperlyConvexOnly,
    NotConvex,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessReason {
    SegmentEscapes,
    NonUniqueSegment,
    BoundaryTangency,
}

/// A pair of points violating (or nearly violating) convexity of a ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallWitness {
    pub x: Point,
    pub y: Point,
    /// Whether the pair was drawn from the closed ball (strong convexity).
    pub closure: bool,
    pub reason: WitnessReason,
    pub distance: f64,
    pub n_segments: usize,
    /// Segment parameter in `[0, 1]` of the offending point.
    pub t_star: Option<f64>,
    /// `d(p, γ(t*))`.
    pub center_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallConvexityVerdict {
    pub center: Point,
    pub radius: f64,
    pub verdict: BallVerdict,
    pub proper: Check,
    pub strong: Check,
    pub witness: Option<BallWitness>,
    pub pairs_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum UniquelyGeodesic {
    Holds { pairs_checked: usize },
    Fails { x: Point, y: Point, n_segments: usize, distance: f64 },
}

impl UniquelyGeodesic {
    pub fn holds(&self) -> bool {
        matches!(self, UniquelyGeodesic::Holds { .. })
    }
}

/// A sample pair with known preimages under `exp_p`.
#[derive(Clone, Debug)]
struct Pair {
    x: Point,
    wx: Vec<f64>,
    y: Point,
}

enum PairOutcome {
    Pass,
    Violation(BallWitness),
    Ambiguous(BallWitness),
}

/// Distances to a fixed center, by Newton continuation of `exp_p^{-1}` with
/// full two-point solves near the threshold.
pub(crate) struct Center<'a> {
    m: &'a Manifold,
    p: Point,
    solver: SegmentSolver<'a>,
    frames: Vec<IndexFrame>,
}

struct Profile {
    t: Vec<f64>,
    d: Vec<f64>,
    w: Vec<Vec<f64>>,
    /// Index of an exact sample above the stop level, if one was hit.
    stopped: Option<usize>,
}

impl<'a> Center<'a> {
    pub(crate) fn new(m: &'a Manifold, p: &Point, reach: f64, opts: &AnalysisOptions) -> Result<Self> {
        let p = m.best_chart(p);
        let reach = reach.min(opts.bound);
        let solver = SegmentSolver::new(m, &p, reach, opts.segment_options())?;
        let dirs = sample_directions(m, &p, opts.dirs_for(m.dim()), opts.seed)?;
        let frames = par::map(&dirs, |u| IndexFrame::new(m, &p, u, reach / 2.2 * 1.001))
            .into_iter()
            .collect::<Result<_>>()?;
        Ok(Center { m, p, solver, frames })
    }

    pub(crate) fn point(&self) -> &Point {
        &self.p
    }

    /// `d(p, q)` and a minimizing initial vector.
    fn exact(&self, q: &Point) -> Result<(f64, Vec<f64>)> {
        let set = self.solver.solve(q)?;
        let w = set.segments.first().map(|s| s.v0.clone()).unwrap_or_else(|| vec![0.0; q.coords.len()]);
        Ok((set.distance, w))
    }

    /// Tracked distance at `q` from the guess `w`, trusted only below `trust`.
    fn at(&self, q: &Point, guess: &[f64], trust: f64) -> Result<(f64, Vec<f64>, bool)> {
        if let Some((w, len)) = self.solver.refine(q, guess) {
            if len < trust {
                return Ok((len, w, false));
            }
        }
        let (d, w) = self.exact(q)?;
        Ok((d, w, true))
    }

    fn profile(&self, seg: &GeodesicPath, w0: &[f64], trust: f64, stop_above: f64) -> Result<Profile> {
        let m = self.m;
        let mut out = Profile { t: Vec::new(), d: Vec::new(), w: Vec::new(), stopped: None };
        for k in 0..PROFILE_SAMPLES {
            let t = seg.t1() * k as f64 / (PROFILE_SAMPLES - 1) as f64;
            let q = seg.point_at(m, t);
            let guess: Vec<f64> = match out.w.len() {
                0 => w0.to_vec(),
                1 => out.w[0].clone(),
                j => out.w[j - 1].iter().zip(&out.w[j - 2]).map(|(a, b)| 2.0 * a - b).collect(),
            };
            let (d, w, exact) = if k == 0 {
                let len = linalg::norm(&self.solver_metric(), w0);
                if len < trust {
                    (len, w0.to_vec(), false)
                } else {
                    let (d, w) = self.exact(&q)?;
                    (d, w, true)
                }
            } else {
                self.at(&q, &guess, trust)?
            };
            out.t.push(t);
            out.d.push(d);
            out.w.push(w);
            if exact && d > stop_above {
                out.stopped = Some(k);
                break;
            }
        }
        Ok(out)
    }

    fn solver_metric(&self) -> Vec<f64> {
        let n = self.p.coords.len();
        let mut g = vec![0.0; n * n];
        self.m.chart(self.p.chart).metric_into(&self.p.coords, &mut g);
        g
    }

    /// Refines a sampled local maximum of the profile at index `k`.
    fn refine_max(&self, seg: &GeodesicPath, prof: &Profile, k: usize) -> Result<(f64, f64)> {
        let last = prof.t.len() - 1;
        let (a, b) = (prof.t[k.saturating_sub(1)], prof.t[(k + 1).min(last)]);
        let w = prof.w[k].clone();
        let f = |t: f64| -> f64 {
            let q = seg.point_at(self.m, t);
            match self.solver.refine(&q, &w) {
                Some((_, len)) => -len,
                None => f64::INFINITY,
            }
        };
        let (t, v) = golden_min(f, a, b);
        if !v.is_finite() {
            return Ok((prof.t[k], prof.d[k]));
        }
        let (d, _) = self.exact(&seg.point_at(self.m, t))?;
        if d >= prof.d[k] {
            Ok((t, d))
        } else {
            Ok((prof.t[k], prof.d[k]))
        }
    }
}

fn witness(pair: &Pair, set: &SegmentSet, closure: bool, reason: WitnessReason, at: Option<(f64, f64)>) -> BallWitness {
    BallWitness {
        x: pair.x.clone(),
        y: pair.y.clone(),
        closure,
        reason,
        distance: set.distance,
        n_segments: set.n_segments(),
        t_star: at.map(|a| a.0),
        center_distance: at.map(|a| a.1),
    }
}

fn examine(center: &Center, pair: &Pair, r: f64, closure: bool, opts: &AnalysisOptions) -> Result<PairOutcome> {
    let m = center.m;
    let set = minimizing_segments(m, &pair.x, &pair.y, &opts.segment_options())?;
    if set.n_segments() >= 2 {
        return Ok(PairOutcome::Violation(witness(pair, &set, closure, WitnessReason::NonUniqueSegment, None)));
    }
    let Some(seg) = set.segments.first() else {
        return Ok(PairOutcome::Pass);
    };
    // tracked lengths bound d_p from above, so anything below this is inside
    let trust = r - TOL_C;
    let prof = center.profile(seg, &pair.wx, trust, r + TOL_C)?;
    if let Some(k) = prof.stopped {
        let at = Some((prof.t[k], prof.d[k]));
        return Ok(PairOutcome::Violation(witness(pair, &set, closure, WitnessReason::SegmentEscapes, at)));
    }
    let last = prof.d.len() - 1;
    // strong convexity only constrains the open segment
    let range = if closure { 1..last } else { 0..last + 1 };
    let Some(k) = range.clone().max_by(|&a, &b| prof.d[a].total_cmp(&prof.d[b])) else {
        return Ok(PairOutcome::Pass);
    };
    let mut best = (prof.t[k], prof.d[k]);
    if best.1 < trust {
        return Ok(PairOutcome::Pass);
    }
    let interior_peak = k > 0 && k < last && prof.d[k] >= prof.d[k - 1] && prof.d[k] >= prof.d[k + 1];
    if interior_peak {
        best = center.refine_max(seg, &prof, k)?;
    }
    if best.1 > r + TOL_C {
        return Ok(PairOutcome::Violation(witness(pair, &set, closure, WitnessReason::SegmentEscapes, Some(best))));
    }
    if best.1 < r - TOL_C {
        return Ok(PairOutcome::Pass);
    }
    let reason = if closure { WitnessReason::BoundaryTangency } else { WitnessReason::SegmentEscapes };
    if closure {
        // a stretch of the segment running along the boundary sphere
        let on: Vec<bool> = range.map(|j| (prof.d[j] - r).abs() <= TOL_C).collect();
        if on.windows(3).any(|w| w.iter().all(|&b| b)) {
            return Ok(PairOutcome::Violation(witness(pair, &set, closure, reason, Some(best))));
        }
    }
    Ok(PairOutcome::Ambiguous(witness(pair, &set, closure, reason, Some(best))))
}

/// Runs pairs in order, stopping at the first violation. Returns the
/// verdict, the first violation (or first ambiguous pair), and the number of
/// pairs up to and including the deciding one.
fn run_pairs(
    center: &Center,
    pairs: &[Pair],
    r: f64,
    closure: bool,
    opts: &AnalysisOptions,
) -> Result<(Check, Option<BallWitness>, usize)> {
    let mut ambiguous: Option<BallWitness> = None;
    let mut offset = 0;
    for chunk in pairs.chunks(par::width()) {
        let res = par::map(chunk, |pair| examine(center, pair, r, closure, opts));
        for (k, out) in res.into_iter().enumerate() {
            match out? {
                PairOutcome::Pass => {}
                PairOutcome::Violation(w) => return Ok((Check::Fail, Some(w), offset + k + 1)),
                PairOutcome::Ambiguous(w) => {
                    ambiguous.get_or_insert(w);
                }
            }
        }
        offset += chunk.len();
    }
    Ok(match ambiguous {
        Some(w) => (Check::Inconclusive, Some(w), pairs.len()),
        None => (Check::Pass, None, pairs.len()),
    })
}

fn make_pair(m: &Manifold, p: &Point, wx: Vec<f64>, wy: Vec<f64>) -> Result<Pair> {
    Ok(Pair { x: exp_map(m, p, &wx)?, y: exp_map(m, p, &wy)?, wx })
}

/// Pairs on the sphere of radius `s`: diametral pairs first, then pairs of
/// nearby points straddling a direction.
fn boundary_pairs(m: &Manifold, p: &Point, s: f64, n_pairs: usize, seed: u64) -> Result<Vec<Pair>> {
    let n_diam = (n_pairs / 2).max(1);
    let n_tan = (n_pairs / 4).max(1);
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let mut specs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for u in half_directions(m, p, n_diam, seed)? {
        specs.push((scaled(&u, s), scaled(&u, -s)));
    }
    for (k, u) in sample_directions(m, p, n_tan, seed ^ 0x7a9)?.iter().enumerate() {
        let perp = linalg::orthonormal_complement(&g, u);
        let w = &perp[k % perp.len()];
        let (c, sn) = (TANGENT_HALF_ANGLE.cos(), TANGENT_HALF_ANGLE.sin());
        let a: Vec<f64> = u.iter().zip(w).map(|(ui, wi)| s * (c * ui + sn * wi)).collect();
        let b: Vec<f64> = u.iter().zip(w).map(|(ui, wi)| s * (c * ui - sn * wi)).collect();
        specs.push((a, b));
    }
    let pairs = par::map(&specs, |(a, b)| make_pair(m, p, a.clone(), b.clone()));
    pairs.into_iter().collect()
}

/// Pairs just inside the sphere of radius `r`, straddling the directions
/// where the index form is most negative, along its softest eigenvector.
fn guided_pairs(center: &Center, r: f64) -> Result<Vec<Pair>> {
    let m = center.m;
    let frames: Vec<&IndexFrame> = center.frames.iter().filter(|f| f.t_end() >= r).collect();
    let lam = par::map(&frames, |f| f.lambda_hat(m, r));
    let mut order: Vec<usize> = (0..frames.len()).filter(|&k| lam[k] <= -EPS_E).collect();
    order.sort_by(|&a, &b| lam[a].total_cmp(&lam[b]));
    order.truncate(GUIDED_DIRS);
    let s = r * (1.0 - 1e-8);
    let mut specs = Vec::new();
    for k in order {
        let f = frames[k];
        let (mat, _) = f.raw_matrix(m, r);
        let c = linalg::sym_min_eigvec(&mat, f.basis.len());
        let w = super::combine(&f.basis, &c);
        let u = &f.direction;
        for a in GUIDED_HALF_ANGLES {
            let (ca, sa) = (a.cos(), a.sin());
            let x: Vec<f64> = u.iter().zip(&w).map(|(ui, wi)| s * (ca * ui + sa * wi)).collect();
            let y: Vec<f64> = u.iter().zip(&w).map(|(ui, wi)| s * (ca * ui - sa * wi)).collect();
            specs.push((x, y));
        }
    }
    let p = center.point();
    let pairs = par::map(&specs, |(a, b)| make_pair(m, p, a.clone(), b.clone()));
    pairs.into_iter().collect()
}

/// Seeded pairs spread through the ball of radius `s`.
fn interior_pairs(m: &Manifold, p: &Point, s: f64, count: usize, seed: u64) -> Result<Vec<Pair>> {
    let n = m.dim();
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let frame = linalg::orthonormal_frame(&g, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba11_5eed);
    let mut specs = Vec::new();
    for _ in 0..count {
        let mut pick = || {
            let c = unit_gaussian(&mut rng, n);
            let rad = s * rng.random::<f64>().powf(1.0 / n as f64);
            scaled(&super::combine(&frame, &c), rad)
        };
        let a = pick();
        let b = pick();
        specs.push((a, b));
    }
    let pairs = par::map(&specs, |(a, b)| make_pair(m, p, a.clone(), b.clone()));
    pairs.into_iter().collect()
}

/// Proper and strong convexity of the ball of radius `r` about `p`, judged
/// on `n_pairs` sampled pairs each.
pub fn ball_convexity_check(
    m: &Manifold,
    p: &Point,
    r: f64,
    n_pairs: usize,
    opts: &AnalysisOptions,
) -> Result<BallConvexityVerdict> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange { value: r, lo: 0.0, hi: f64::INFINITY });
    }
    let p = m.best_chart(p);
    let center = Center::new(m, &p, 2.2 * r, opts)?;
    ball_check_with(&center, r, n_pairs, opts)
}

pub(crate) fn ball_check_with(
    center: &Center,
    r: f64,
    n_pairs: usize,
    opts: &AnalysisOptions,
) -> Result<BallConvexityVerdict> {
    let m = center.m;
    let p = center.point().clone();
    let n_pairs = n_pairs.max(4);
    let guided = guided_pairs(center, r)?;
    let (g_check, gw, g_count) = run_pairs(center, &guided, r, false, opts)?;
    if g_check == Check::Fail {
        return Ok(BallConvexityVerdict {
            center: p,
            radius: r,
            verdict: BallVerdict::NotConvex,
            proper: Check::Fail,
            strong: Check::Fail,
            witness: gw,
            pairs_checked: g_count,
        });
    }
    let s = r * INNER;
    let mut open = boundary_pairs(m, &p, s, n_pairs - n_pairs / 4, opts.seed)?;
    open.extend(interior_pairs(m, &p, s, n_pairs / 4, opts.seed)?);
    let (proper, pw, checked) = run_pairs(center, &open, r, false, opts)?;
    let mut checked = checked + g_count;
    let mk = |verdict, strong, witness, checked| BallConvexityVerdict {
        center: p.clone(),
        radius: r,
        verdict,
        proper,
        strong,
        witness,
        pairs_checked: checked,
    };
    if proper == Check::Fail {
        // strong convexity implies proper convexity
        return Ok(mk(BallVerdict::NotConvex, Check::Fail, pw, checked));
    }
    let closed = boundary_pairs(m, &p, r, n_pairs - n_pairs / 4, opts.seed)?;
    let (strong, sw, c2) = run_pairs(center, &closed, r, true, opts)?;
    checked += c2;
    let strong = if strong == Check::Pass && proper == Check::Inconclusive { Check::Inconclusive } else { strong };
    Ok(match (proper, strong) {
        (Check::Pass, Check::Pass) => mk(BallVerdict::StronglyConvex, strong, None, checked),
        (Check::Pass, Check::Fail) => mk(BallVerdict::ProperlyConvexOnly, strong, sw, checked),
        _ => mk(BallVerdict::Inconclusive, strong, sw.or(pw), checked),
    })
}

/// Whether every sampled pair in the ball (closed or open) of radius `r`
/// is joined by a unique minimizing segment. Along each diametral line a
/// pair where the path through `p` stops minimizing is bisected down to the
/// tie between the two competing segments.
pub fn uniquely_geodesic_check(
    m: &Manifold,
    p: &Point,
    r: f64,
    closed: bool,
    n_pairs: usize,
    opts: &AnalysisOptions,
) -> Result<UniquelyGeodesic> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange { value: r, lo: 0.0, hi: f64::INFINITY });
    }
    let p = m.best_chart(p);
    let s_max = if closed { r } else { r * INNER };
    let n_pairs = n_pairs.max(2);
    let n_diam = (n_pairs / 2).max(1);
    let sopts = opts.segment_options();
    let dirs = half_directions(m, &p, n_diam, opts.seed)?;
    let solve_at = |u: &[f64], s: f64| -> Result<(Pair, SegmentSet)> {
        let pair = make_pair(m, &p, scaled(u, s), scaled(u, -s))?;
        let set = minimizing_segments(m, &pair.x, &pair.y, &sopts)?;
        Ok((pair, set))
    };
    let fails = |pair: &Pair, set: &SegmentSet| UniquelyGeodesic::Fails {
        x: pair.x.clone(),
        y: pair.y.clone(),
        n_segments: set.n_segments(),
        distance: set.distance,
    };
    let per_dir: Vec<Result<Option<UniquelyGeodesic>>> = par::map(&dirs, |u| {
        let (pair, set) = solve_at(u, s_max)?;
        if set.n_segments() >= 2 {
            return Ok(Some(fails(&pair, &set)));
        }
        if set.distance >= 2.0 * s_max - SHORTCUT_SLACK {
            return Ok(None);
        }
        let (mut lo, mut hi) = (0.0, s_max);
        while hi - lo > 1e-9 * s_max.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let (_, set) = solve_at(u, mid)?;
            if set.distance < 2.0 * mid - SHORTCUT_SLACK {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (pair, set) = solve_at(u, hi)?;
        Ok((set.n_segments() >= 2).then(|| fails(&pair, &set)))
    });
    for res in per_dir {
        if let Some(f) = res? {
            return Ok(f);
        }
    }
    let rest = n_pairs.saturating_sub(n_diam);
    let pairs = interior_pairs(m, &p, s_max, rest, opts.seed)?;
    let sets = par::map(&pairs, |pair| minimizing_segments(m, &pair.x, &pair.y, &sopts));
    for (pair, set) in pairs.iter().zip(sets) {
        let set = set?;
        if set.n_segments() >= 2 {
            return Ok(fails(pair, &set));
        }
    }
    Ok(UniquelyGeodesic::Holds { pairs_checked: n_diam + rest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;
    use std::f64::consts::PI;

    fn opts() -> AnalysisOptions {
        AnalysisOptions { n_pairs: 12, ..AnalysisOptions::default() }
    }

    #[test]
    fn sphere_small_ball_strongly_convex() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        let v = ball_convexity_check(m, &p, 1.0, 12, &opts()).unwrap();
        assert_eq!(v.verdict, BallVerdict::StronglyConvex, "{v:?}");
        assert!(v.witness.is_none());
    }

    #[test]
    fn sphere_hemisphere_properly_convex_only() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        let v = ball_convexity_check(m, &p, PI / 2.0, 12, &opts()).unwrap();
        assert_eq!(v.verdict, BallVerdict::ProperlyConvexOnly, "{v:?}");
        let w = v.witness.unwrap();
        assert_eq!(w.reason, WitnessReason::NonUniqueSegment);
        assert!(w.n_segments >= 2);
    }

    #[test]
    fn torus_ball_wraps() {
        let rec = get_model("flat_torus", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        let v = ball_convexity_check(m, &p, 0.3, 12, &opts()).unwrap();
        assert_eq!(v.verdict, BallVerdict::NotConvex, "{v:?}");
        let w = v.witness.unwrap();
        assert_eq!(w.reason, WitnessReason::SegmentEscapes);
        assert!((w.distance - 0.4 * 1.0).abs() < 0.02, "{}", w.distance);
    }

    #[test]
    fn torus_quarter_ball_not_uniquely_geodesic() {
        let rec = get_model("flat_torus", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        match uniquely_geodesic_check(m, &p, 0.25, true, 8, &opts()).unwrap() {
            UniquelyGeodesic::Fails { n_segments, distance, .. } => {
                assert_eq!(n_segments, 2);
                assert!((distance - 0.5).abs() < 1e-6);
            }
            h => panic!("{h:?}"),
        }
        let sphere = get_model("sphere", &json!({})).unwrap();
        let ms = &sphere.manifold;
        let q = ms.point(&[1.0, 0.4]).unwrap();
        assert!(uniquely_geodesic_check(ms, &q, 1.5, true, 8, &opts()).unwrap().holds());
    }
}
