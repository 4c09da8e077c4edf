//! Two-point problem: all minimizing geodesic segments between two points.
//!
//! A fan of rays from the base point (each carrying `n - 1` Jacobi fields)
//! proposes candidate initial vectors by linearizing the endpoint map near
//! local minima of the distance to the target along each ray. Candidates are
//! refined by Gauss–Newton on `w ↦ exp_p(w)`, with the differential supplied
//! by `n` Jacobi fields. The graph oracle contributes an extra start and a
//! cross-check on the final distance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::flow::{self, Trajectory};
use crate::geodesic::GeodesicPath;
use crate::linalg;
use crate::metric::Point;
use crate::ode::Tolerances;
use crate::oracle::Oracle;
use crate::par;

#[derive(Clone, Debug)]
pub struct SegmentOptions {
    pub bound: f64,
    pub n_starts: usize,
    pub cluster_angle: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        SegmentOptions { bound: 10.0, n_starts: 64, cluster_angle: 0.05, tol: 1e-6, seed: 0 }
    }
}

/// Minimizing segments from `p` to `q`.
#[derive(Clone, Debug)]
pub struct SegmentSet {
    pub p: Point,
    pub q: Point,
    pub distance: f64,
    /// Each segment is parameterized on `[0, 1]` with speed equal to its length.
    pub segments: Vec<GeodesicPath>,
    pub unique: bool,
    /// Number of direction clusters among the segments.
    pub n_clusters: usize,
    pub oracle_distance: Option<f64>,
}

impl SegmentSet {
    pub fn n_segments(&self) -> usize {
        self.n_clusters
    }

    /// Initial unit directions of the segments, in the chart of `p`.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.segments.iter().map(|s| s.unit_direction()).collect()
    }
}

const NEWTON_CONVERGED: f64 = 1e-10;
const NEWTON_ACCEPT: f64 = 1e-7;
const MAX_NEWTON: usize = 24;
const SAMPLES_PER_RAY: usize = 96;

struct Ray {
    u: Vec<f64>,
    perp: Vec<Vec<f64>>,
    traj: Trajectory,
    samples: Vec<(f64, Point)>,
}

#[derive(Clone, Debug)]
struct Candidate {
    pred_len: f64,
    w: Vec<f64>,
}

/// Answers repeated two-point queries from a fixed base point.
pub struct SegmentSolver<'a> {
    m: &'a Manifold,
    p: Point,
    g: Vec<f64>,
    rays: Vec<Ray>,
    ray_len: f64,
    spacing: f64,
    oracle: Oracle,
    opts: SegmentOptions,
}

/// Unit directions of the fan, as coefficients in an orthonormal frame.
fn fan_coefficients(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa11);
    if n == 2 {
        let offset: f64 = rng.random();
        (0..count)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + offset) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        (0..count)
            .map(|_| loop {
                let v: Vec<f64> = (0..n)
                    .map(|_| {
                        // Box–Muller
                        let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
                    })
                    .collect();
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r > 1e-6 {
                    break v.iter().map(|x| x / r).collect();
                }
            })
            .collect()
    }
}

fn combine(frame: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let n = frame[0].len();
    let mut v = vec![0.0; n];
    for (e, ck) in frame.iter().zip(c) {
        for i in 0..n {
            v[i] += ck * e[i];
        }
    }
    v
}

fn angle(g: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let c = linalg::inner(g, a, b) / (linalg::norm(g, a) * linalg::norm(g, b));
    c.clamp(-1.0, 1.0).acos()
}

impl<'a> SegmentSolver<'a> {
    /// Builds the fan of rays of length `ray_len` from `p`.
    pub fn new(m: &'a Manifold, p: &Point, ray_len: f64, opts: SegmentOptions) -> Result<Self> {
        Self::build(m, p, ray_len, opts, Oracle::with_source(m, p))
    }

    fn build(m: &'a Manifold, p: &Point, ray_len: f64, opts: SegmentOptions, oracle: Oracle) -> Result<Self> {
        let p = m.best_chart(p);
        let n = m.dim();
        let g = m.chart(p.chart).eval_metric(&p.coords)?;
        let frame = linalg::orthonormal_frame(&g, n);
        let ray_len = ray_len.max(1e-6);
        let coeffs = fan_coefficients(n, opts.n_starts.max(4), opts.seed);
        let spacing = if n == 2 {
            2.0 * PI / coeffs.len() as f64
        } else {
            (4.0 * PI / coeffs.len() as f64).sqrt() * (n as f64 - 1.0).sqrt()
        };
        let rays: Vec<Option<Ray>> = par::map(&coeffs, |c| {
            let u = combine(&frame, c);
            let perp = linalg::orthonormal_complement(&g, &u);
            let fields: Vec<(Vec<f64>, Vec<f64>)> =
                perp.iter().map(|e| (vec![0.0; n], e.clone())).collect();
            let traj = match flow::integrate(m, &p, &u, &fields, ray_len, Tolerances::default()) {
                Ok(t) => t,
                Err(Error::LeftDomain { partial, .. }) => partial.traj,
                Err(_) => return None,
            };
            let end = traj.t_end;
            let samples = (0..=SAMPLES_PER_RAY)
                .map(|i| {
                    let t = end * i as f64 / SAMPLES_PER_RAY as f64;
                    let (c, _, y) = traj.state_vec(t);
                    (t, Point::new(c, m.chart(c).wrapped(&y[..n])))
                })
                .collect();
            Some(Ray { u, perp, traj, samples })
        });
        Ok(SegmentSolver {
            m,
            p,
            g,
            rays: rays.into_iter().flatten().collect(),
            ray_len,
            spacing,
            oracle,
            opts,
        })
    }

    pub fn base(&self) -> &Point {
        &self.p
    }

    pub fn ray_len(&self) -> f64 {
        self.ray_len
    }

    /// Initial vector guesses from the fan.
    fn fan_candidates(&self, q: &Point) -> Vec<Candidate> {
        let m = self.m;
        let n = m.dim();
        let ds = self.ray_len / SAMPLES_PER_RAY as f64;
        let max_dalpha = if n == 2 { 2.5 * self.spacing } else { self.spacing.max(1.0) };
        let mut out = Vec::new();
        for ray in &self.rays {
            let f: Vec<f64> = ray.samples.iter().map(|(_, s)| m.proxy_distance(s, q)).collect();
            for i in 1..f.len() {
                let left = f[i - 1];
                let right = if i + 1 < f.len() { f[i + 1] } else { f64::INFINITY };
                if !(f[i] <= left && f[i] <= right) {
                    continue;
                }
                let t = ray.samples[i].0;
                let (c, _, y) = ray.traj.state_vec(t);
                let Some(qc) = m.express(q, c) else { continue };
                let mut delta = vec![0.0; n];
                m.chart(c).coord_diff(&y[..n], &qc, &mut delta);
                let mut a = DMatrix::zeros(n, n);
                for r in 0..n {
                    a[(r, 0)] = y[n + r];
                    for k in 0..n - 1 {
                        a[(r, k + 1)] = y[2 * n * (1 + k) + r];
                    }
                }
                let Some(sol) = linalg::lstsq(&a, &DVector::from_vec(delta), 1e-9) else {
                    continue;
                };
                let dalpha: f64 = sol.iter().skip(1).map(|v| v * v).sum::<f64>().sqrt();
                if dalpha > max_dalpha && f[i] > 1e-6 {
                    continue;
                }
                let s = t + sol[0];
                if !(s > 0.0) || s > self.opts.bound * 1.5 {
                    continue;
                }
                let mut u = ray.u.clone();
                for (k, e) in ray.perp.iter().enumerate() {
                    for j in 0..n {
                        u[j] += sol[k + 1] * e[j];
                    }
                }
                let nu = linalg::norm(&self.g, &u);
                let w: Vec<f64> = u.iter().map(|x| x * s / nu).collect();
                out.push(Candidate { pred_len: s, w });
                let _ = ds;
            }
        }
        out
    }

    /// Gauss–Newton on the endpoint map. Returns the converged initial vector
    /// and its trajectory.
    fn newton(&self, q: &Point, w0: &[f64]) -> Option<(Vec<f64>, Trajectory, f64)> {
        let m = self.m;
        let n = m.dim();
        let fields: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|k| {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                (vec![0.0; n], e)
            })
            .collect();
        let eval = |w: &[f64]| -> Option<(Trajectory, f64, DMatrix<f64>, DVector<f64>)> {
            let traj = flow::integrate(m, &self.p, w, &fields, 1.0, Tolerances::default()).ok()?;
            let (c, _, y) = traj.state_vec(1.0);
            let end = Point::new(c, m.chart(c).wrapped(&y[..n]));
            let res = m.proxy_distance(&end, q);
            let qc = m.express(q, c)?;
            let mut delta = vec![0.0; n];
            m.chart(c).coord_diff(&y[..n], &qc, &mut delta);
            let mut a = DMatrix::zeros(n, n);
            for r in 0..n {
                for k in 0..n {
                    a[(r, k)] = y[2 * n * (1 + k) + r];
                }
            }
            Some((traj, res, a, DVector::from_vec(delta)))
        };
        let mut w = w0.to_vec();
        let (mut traj, mut res, mut a, mut delta) = eval(&w)?;
        let mut lambda = 1.0;
        let mut step: Vec<f64> = Vec::new();
        let mut evals = 0;
        while res > NEWTON_CONVERGED && evals < 40 {
            if step.is_empty() || lambda == 1.0 {
                let sol = linalg::lstsq(&a, &delta, 1e-10)?;
                step = sol.iter().copied().collect();
                let len = linalg::norm(&self.g, &step);
                let cap = 0.5 * linalg::norm(&self.g, &w).max(0.5);
                if len > cap {
                    step.iter_mut().for_each(|v| *v *= cap / len);
                }
            }
            let trial = polar_step(&self.g, &w, &step, lambda);
            evals += 1;
            match eval(&trial) {
                Some((t2, r2, a2, d2)) if r2 < res => {
                    w = trial;
                    traj = t2;
                    res = r2;
                    a = a2;
                    delta = d2;
                    lambda = 1.0;
                }
                _ => {
                    lambda *= 0.5;
                    if lambda < 1.0 / 64.0 {
                        break;
                    }
                }
            }
        }
        (res <= NEWTON_ACCEPT).then_some((w, traj, res))
    }

    /// All minimizing segments from the base point to `q`, without the
    /// oracle cross-check.
    fn solve_raw(&self, q: &Point, oracle_hint: Option<(f64, Vec<f64>)>) -> Vec<(f64, Vec<f64>, Trajectory)> {
        let m = self.m;
        let n = m.dim();
        let mut cands = self.fan_candidates(q);
        if let Some(qc) = m.express(q, self.p.chart) {
            let mut d = vec![0.0; n];
            m.chart(self.p.chart).coord_diff(&self.p.coords, &qc, &mut d);
            let len = linalg::norm(&self.g, &d);
            // the chart direction, rescaled to the proxy distance
            let pd = m.proxy_distance(&self.p, q);
            if len > 0.0 && pd.is_finite() && pd < len {
                cands.push(Candidate { pred_len: pd, w: d.iter().map(|x| x * pd / len).collect() });
            }
            cands.push(Candidate { pred_len: len, w: d });
        }
        if let Some((dist, dir)) = oracle_hint {
            let nd = linalg::norm(&self.g, &dir);
            if nd > 0.0 {
                cands.push(Candidate { pred_len: dist, w: dir.iter().map(|x| x * dist / nd).collect() });
            }
        }
        cands.retain(|c| c.pred_len.is_finite() && c.w.iter().all(|x| x.is_finite()));
        cands.sort_by(|a, b| a.pred_len.total_cmp(&b.pred_len));
        // merge near-duplicates
        let mut uniq: Vec<Candidate> = Vec::new();
        for c in cands {
            let dup = uniq.iter().any(|u| {
                let d: Vec<f64> = u.w.iter().zip(&c.w).map(|(a, b)| a - b).collect();
                linalg::norm(&self.g, &d) < 1e-3 * c.pred_len.max(1e-3)
            });
            if !dup {
                uniq.push(c);
            }
        }
        let mut found = self.run_candidates(q, &uniq);
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found
    }

    /// Newton from candidates in order of predicted length, pruning those
    /// much longer than the best segment found so far.
    fn run_candidates(&self, q: &Point, uniq: &[Candidate]) -> Vec<(f64, Vec<f64>, Trajectory)> {
        let ds = self.ray_len / SAMPLES_PER_RAY as f64;
        let mut found: Vec<(f64, Vec<f64>, Trajectory)> = Vec::new();
        let mut best = f64::INFINITY;
        let mut tried = 0;
        // candidates are processed in batches so pruning by the best length
        // found so far stays deterministic under parallel evaluation
        let batch = 8;
        let mut idx = 0;
        while idx < uniq.len() && tried < MAX_NEWTON {
            let take: Vec<&Candidate> = uniq[idx..]
                .iter()
                .filter(|c| c.pred_len <= best * 1.1 + 2.0 * ds + self.opts.tol)
                .take(batch.min(MAX_NEWTON - tried))
                .collect();
            if take.is_empty() {
                break;
            }
            let last_ptr = take.last().map(|c| c.pred_len).unwrap_or(0.0);
            let results = par::map(&take, |c| self.newton(q, &c.w));
            tried += take.len();
            for (w, traj, _) in results.into_iter().flatten() {
                let len = linalg::norm(&self.g, &w);
                best = best.min(len);
                found.push((len, w, traj));
            }
            idx += uniq[idx..].iter().position(|c| c.pred_len > last_ptr).unwrap_or(uniq.len() - idx);
        }
        found
    }

    fn assemble(&self, q: &Point, found: Vec<(f64, Vec<f64>, Trajectory)>, oracle: Option<f64>) -> Option<SegmentSet> {
        let distance = found.first()?.0;
        let mut segs: Vec<(Vec<f64>, GeodesicPath)> = Vec::new();
        for (len, w, traj) in found {
            if len > distance + self.opts.tol {
                break;
            }
            // drop exact duplicates
            if segs.iter().any(|(u, _)| angle(&self.g, u, &w) < 1e-6) {
                continue;
            }
            segs.push((w.clone(), GeodesicPath::from_trajectory(traj, self.p.clone(), w, len)));
        }
        let mut reps: Vec<Vec<f64>> = Vec::new();
        for (w, _) in &segs {
            if !reps.iter().any(|r| angle(&self.g, r, w) < self.opts.cluster_angle) {
                reps.push(w.clone());
            }
        }
        Some(SegmentSet {
            p: self.p.clone(),
            q: q.clone(),
            distance,
            segments: segs.into_iter().map(|(_, s)| s).collect(),
            unique: reps.len() == 1,
            n_clusters: reps.len(),
            oracle_distance: oracle,
        })
    }

    /// Minimizing segments from the base point to `q`.
    pub fn solve(&self, q: &Point) -> Result<SegmentSet> {
        let m = self.m;
        if m.proxy_distance(&self.p, q) < 1e-14 {
            return Ok(SegmentSet {
                p: self.p.clone(),
                q: q.clone(),
                distance: 0.0,
                segments: Vec::new(),
                unique: true,
                n_clusters: 1,
                oracle_distance: Some(0.0),
            });
        }
        let est = self.oracle.estimate(m, &self.p, q);
        let hint = est.as_ref().map(|e| (e.distance, e.direction.clone()));
        let od = est.as_ref().map(|e| e.distance);
        let found = self.solve_raw(q, hint.clone());
        let set = self.assemble(q, found, od);
        let ok = |s: &SegmentSet| od.map_or(true, |o| s.distance <= o * 1.10 + 1e-9);
        match set {
            Some(s) if ok(&s) => Ok(s),
            first => {
                // retry with a denser fan reaching past the oracle distance
                let mut opts = self.opts.clone();
                opts.n_starts *= 2;
                opts.seed = opts.seed.wrapping_add(1);
                let len = od.map_or(self.ray_len, |o| (1.2 * o).max(self.ray_len));
                let solver = SegmentSolver::build(m, &self.p, len, opts, Oracle::for_manifold(m))?;
                let found = solver.solve_raw(q, hint);
                match solver.assemble(q, found, od) {
                    Some(s) if ok(&s) => Ok(s),
                    Some(s) => Err(Error::OracleMismatch { oracle: od.unwrap_or(f64::NAN), shooting: s.distance }),
                    None => match first {
                        Some(s) => Err(Error::OracleMismatch { oracle: od.unwrap_or(f64::NAN), shooting: s.distance }),
                        None => Err(Error::NoConvergence {
                            detail: format!("no shooting start reached the target (oracle distance {od:?})"),
                        }),
                    },
                }
            }
        }
    }

    /// Newton refinement of a single initial vector towards `q`: returns the
    /// converged vector and its length. Used to track `exp_p^{-1}` along
    /// curves from a nearby known solution.
    pub fn refine(&self, q: &Point, w0: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (w, _, _) = self.newton(q, w0)?;
        let len = linalg::norm(&self.g, &w);
        Some((w, len))
    }

    /// Whether some geodesic from the base point reaches `q` with length
    /// below `len - slack`.
    pub fn has_shorter(&self, q: &Point, len: f64, slack: f64) -> Result<bool> {
        Ok(self.solve(q)?.distance < len - slack)
    }
}

/// `w + lambda * step` with the radial and angular parts of the step applied
/// separately, so that sideways moves do not lengthen `w`.
fn polar_step(g: &[f64], w: &[f64], step: &[f64], lambda: f64) -> Vec<f64> {
    let r = linalg::norm(g, w);
    if r < 1e-12 {
        return w.iter().zip(step).map(|(a, b)| a + lambda * b).collect();
    }
    let dr = linalg::inner(g, w, step) / r;
    let turned: Vec<f64> = w.iter().zip(step).map(|(a, b)| a + lambda * (b - dr * a / r)).collect();
    let nt = linalg::norm(g, &turned);
    let len = (r + lambda * dr).max(0.1 * r);
    turned.iter().map(|x| x * len / nt).collect()
}

/// Minimizing segments between `p` and `q`.
pub fn minimizing_segments(m: &Manifold, p: &Point, q: &Point, opts: &SegmentOptions) -> Result<SegmentSet> {
    let oracle = Oracle::for_manifold(m);
    let pb = m.best_chart(p);
    let ray_len = match oracle.estimate(m, &pb, q) {
        Some(e) => (1.1 * e.distance + 0.05 * e.distance.max(0.1)).min(opts.bound),
        None => opts.bound,
    };
    let solver = SegmentSolver::build(m, p, ray_len, opts.clone(), oracle)?;
    solver.solve(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;

    #[test]
    fn torus_half_period_has_two_segments() {
        let rec = get_model("flat_torus", &json!({"periods": [1.0, 1.0]})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 0.0]).unwrap();
        let q = m.point(&[0.5, 0.0]).unwrap();
        let s = minimizing_segments(m, &p, &q, &SegmentOptions::default()).unwrap();
        assert!((s.distance - 0.5).abs() < 1e-9);
        assert!(!s.unique);
        assert_eq!(s.n_segments(), 2);
    }

    #[test]
    fn sphere_equator_pair_unique() {
        let rec = get_model("sphere", &json!({"R": 1.0})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        let q = m.point(&[PI / 2.0, 1.2]).unwrap();
        let s = minimizing_segments(m, &p, &q, &SegmentOptions::default()).unwrap();
        assert!((s.distance - 1.2).abs() < 1e-7, "{}", s.distance);
        assert!(s.unique);
    }

    #[test]
    fn sphere_antipodes_not_unique() {
        let rec = get_model("sphere", &json!({"R": 1.0})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        let q = m.point(&[PI / 2.0, PI]).unwrap();
        let s = minimizing_segments(m, &p, &q, &SegmentOptions::default()).unwrap();
        assert!((s.distance - PI).abs() < 1e-7, "{}", s.distance);
        assert!(s.n_segments() >= 2);
    }
}
