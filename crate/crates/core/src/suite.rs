//! The theorem-consistency suite: eleven numbered criteria over the built-in
//! models, sharing one cache of radii estimates.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::atlas::Manifold;
use crate::config::{AnalysisConfig, Budgets, ModelSpec, PointsSpec};
use crate::convexity::{
    ball_convexity_check, berger_from_estimates, classify_cut_point, condition_from_estimate, radii_estimate,
    sample_directions, scc_check, AnalysisOptions, BallVerdict, BergerResult, Condition, ConditionEvidence,
    ConditionReport, ConditionStatus, CutClass, CutOutcome, Estimate, RadiiEstimate, UniquelyGeodesic, TAU,
};
use crate::error::Result;
use crate::geodesic;
use crate::jacobi::{conjugate_radius, g_eval, scc_breakdown_radius, wronskian, Radius, EPS_E};
use crate::linalg;
use crate::metric::Point;
use crate::models::{get_model, sample_points, ModelRecord, MODEL_NAMES};
use crate::report::{fmt_estimate, run_analyze, ReportDocument};
use crate::segments::{minimizing_segments, SegmentSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionStatus {
    Pass,
    Fail,
    /// None of the models the criterion needs were selected.
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub status: CriterionStatus,
    pub measured: Vec<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let tag = match self.status {
            CriterionStatus::Pass => "PASS",
            CriterionStatus::Fail => "FAIL",
            CriterionStatus::Skipped => "SKIP",
        };
        format!("[{tag}] {:>2}. {}: {}", self.id, self.name, self.measured.join("; "))
    }
}

/// Radii and condition B at one sample point of a model.
#[derive(Clone, Debug, Serialize)]
pub struct ModelRow {
    pub model: String,
    pub point: Vec<f64>,
    pub i: String,
    pub lc: String,
    pub slc: String,
    pub c: String,
    pub sc: String,
    pub condition_b: ConditionStatus,
    pub berger: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub models: Vec<String>,
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub rows: Vec<ModelRow>,
    pub all_passed: bool,
}

/// Sample sizes and budgets per model.
struct Plan {
    points: usize,
    opts: AnalysisOptions,
}

fn plan(name: &str, seed: u64) -> Plan {
    let base = AnalysisOptions { seed, n_dirs: 32, n_pairs: 12, ..AnalysisOptions::default() };
    match name {
        "sphere" | "flat_torus" => Plan { points: 10, opts: base },
        "ellipsoid" => Plan { points: 20, opts: AnalysisOptions { n_dirs: 24, n_pairs: 8, radius_tol: 4e-3, ..base } },
        _ => Plan { points: 1, opts: AnalysisOptions { n_dirs: 16, n_pairs: 8, ..base } },
    }
}

struct Model {
    rec: ModelRecord,
    points: Vec<Point>,
    opts: AnalysisOptions,
    radii: BTreeMap<usize, RadiiEstimate>,
    condition_b: Option<ConditionReport>,
}

struct Suite {
    seed: u64,
    models: BTreeMap<String, Model>,
}

impl Suite {
    fn new(names: &[String], seed: u64) -> Result<Self> {
        let mut models = BTreeMap::new();
        for name in names {
            let rec = get_model(name, &Value::Null)?;
            let p = plan(name, seed);
            let points = sample_points(&rec, p.points, seed)?;
            models.insert(name.clone(), Model { rec, points, opts: p.opts, radii: BTreeMap::new(), condition_b: None });
        }
        Ok(Suite { seed, models })
    }

    fn has(&self, name: &str) -> bool {
        self.models.contains_key(name)
    }

    fn model(&self, name: &str) -> &Model {
        &self.models[name]
    }

    fn manifold(&self, name: &str) -> &Manifold {
        &self.models[name].rec.manifold
    }

    fn radii(&mut self, name: &str, k: usize) -> Result<RadiiEstimate> {
        let md = self.models.get_mut(name).expect("model selected");
        if let Some(e) = md.radii.get(&k) {
            return Ok(e.clone());
        }
        let e = radii_estimate(&md.rec.manifold, &md.points[k], &md.opts)?;
        md.radii.insert(k, e.clone());
        Ok(e)
    }

    fn all_radii(&mut self, name: &str, count: usize) -> Result<Vec<RadiiEstimate>> {
        let count = count.min(self.model(name).points.len());
        (0..count).map(|k| self.radii(name, k)).collect()
    }

    fn condition_b(&mut self, name: &str) -> Result<ConditionReport> {
        if let Some(r) = &self.model(name).condition_b {
            return Ok(r.clone());
        }
        let est = self.radii(name, 0)?;
        let md = self.model(name);
        let r = condition_from_estimate(&md.rec.manifold, &est, Condition::B, &[], &md.opts)?;
        self.models.get_mut(name).unwrap().condition_b = Some(r.clone());
        Ok(r)
    }
}

/// Collects measurements and the pass flag of one criterion.
struct Tally {
    ok: bool,
    ran: bool,
    measured: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { ok: true, ran: false, measured: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.ran = true;
        self.ok &= ok;
        self.measured.push(if ok { what } else { format!("{what} [x]") });
    }

    fn run(&mut self, f: impl FnOnce(&mut Tally) -> Result<()>) {
        if let Err(e) = f(self) {
            self.check(false, format!("error: {e}"));
        }
    }

    fn finish(self, id: u32, name: &str) -> CriterionResult {
        let status = match (self.ran, self.ok) {
            (false, _) => CriterionStatus::Skipped,
            (true, true) => CriterionStatus::Pass,
            (true, false) => CriterionStatus::Fail,
        };
        let measured = if self.ran { self.measured } else { vec!["no applicable model selected".into()] };
        CriterionResult { id, name: name.into(), status, measured }
    }
}

fn near(e: &Estimate, target: f64, tol: f64) -> bool {
    e.value().is_some_and(|v| (v - target).abs() <= tol)
}

fn unbounded(r: &Radius, bound: f64) -> bool {
    *r == Radius::ExceedsBound(bound)
}

/// A unit vector at `p` and a vector orthogonal to it, both seeded.
fn random_frame(m: &Manifold, p: &Point, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.dim();
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let frame = linalg::orthonormal_frame(&g, n);
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut v = combine(&frame, &gauss(rng));
    let nv = linalg::norm(&g, &v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = combine(&frame, &gauss(rng));
    let c = linalg::inner(&g, &w, &v);
    w.iter_mut().zip(&v).for_each(|(a, b)| *a -= c * b);
    let nw = linalg::norm(&g, &w);
    let scale = rng.random_range(0.5..2.0);
    w.iter_mut().for_each(|x| *x *= scale / nw);
    Ok((v, w))
}

fn combine(frame: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let n = frame[0].len();
    (0..n).map(|i| frame.iter().zip(c).map(|(e, ck)| ck * e[i]).sum()).collect()
}

fn c1_sphere_radii(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    if s.has("sphere") {
        t.run(|t| {
            for (k, e) in s.all_radii("sphere", 5)?.iter().enumerate() {
                let ok = near(&e.i_g, PI, 0.02)
                    && [e.lc_g, e.slc_g, e.c_g, e.sc_g].iter().all(|x| near(x, FRAC_PI_2, 0.02));
                t.check(
                    ok,
                    format!(
                        "p{k}: i={} lc={} slc={} c={} sc={}",
                        fmt_estimate(&e.i_g),
                        fmt_estimate(&e.lc_g),
                        fmt_estimate(&e.slc_g),
                        fmt_estimate(&e.c_g),
                        fmt_estimate(&e.sc_g)
                    ),
                );
            }
            Ok(())
        });
    }
    t.finish(1, "sphere radii")
}

fn c2_g_closed_forms(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    let forms: [(&str, fn(f64) -> f64); 3] = [
        ("sphere", |x| x.sin() * x.cos()),
        ("hyperbolic_halfplane", |x| x.sinh() * x.cosh()),
        ("euclidean", |x| x),
    ];
    for (name, f) in forms {
        if !s.has(name) {
            continue;
        }
        let m = s.manifold(name);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x6c05_ed);
        let res = (|| -> Result<f64> {
            let pts = sample_points(&s.model(name).rec, 50, s.seed ^ 0x6)?;
            let mut worst: f64 = 0.0;
            for p in &pts {
                let tt = rng.random_range(0.1..3.0);
                let (v, w) = random_frame(m, p, &mut rng)?;
                let g = m.chart(p.chart).eval_metric(&p.coords)?;
                let expect = f(tt) * linalg::inner(&g, &w, &w);
                worst = worst.max((g_eval(m, p, &v, &w, tt)? - expect).abs());
            }
            Ok(worst)
        })();
        match res {
            Ok(w) => t.check(w <= 1e-5, format!("{name}: max |G - f|w|^2| = {w:.2e} over 50")),
            Err(e) => t.check(false, format!("{name}: error: {e}")),
        }
    }
    t.finish(2, "G closed forms")
}

fn c3_breakdown_vs_conjugate(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    for name in ["sphere", "euclidean", "hyperbolic_halfplane", "flat_torus"] {
        if !s.has(name) {
            continue;
        }
        let m = s.manifold(name);
        let p = m.best_chart(&s.model(name).points[0]);
        let res = (|| -> Result<(bool, String)> {
            let dirs = sample_directions(m, &p, 32, s.seed)?;
            if name == "sphere" {
                let (mut es, mut ec): (f64, f64) = (0.0, 0.0);
                for v in &dirs {
                    es = es.max((scc_breakdown_radius(m, &p, v, 4.0)?.or_inf() - FRAC_PI_2).abs());
                    ec = ec.max((conjugate_radius(m, &p, v, 4.0)?.or_inf() - PI).abs());
                }
                Ok((es <= 1e-4 && ec <= 1e-4, format!("sphere: max |scc - pi/2| = {es:.1e}, max |conj - pi| = {ec:.1e}")))
            } else {
                let mut ok = true;
                for v in &dirs {
                    ok &= unbounded(&conjugate_radius(m, &p, v, 10.0)?, 10.0);
                    ok &= unbounded(&scc_breakdown_radius(m, &p, v, 10.0)?, 10.0);
                }
                Ok((ok, format!("{name}: scc and conjugate exceed_bound(10) on all 32 = {ok}")))
            }
        })();
        match res {
            Ok((ok, msg)) => t.check(ok, msg),
            Err(e) => t.check(false, format!("{name}: error: {e}")),
        }
    }
    t.finish(3, "s.c.c. breakdown vs conjugate")
}

fn berger_line(b: &BergerResult) -> String {
    format!("c_M={} i_M={} satisfied={}", fmt_estimate(&b.c_m), fmt_estimate(&b.i_m), b.satisfied)
}

fn c4_torus(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    if s.has("flat_torus") {
        t.run(|t| {
            let e = s.radii("flat_torus", 0)?;
            t.check(near(&e.i_g, 0.5, 0.01), format!("i={}", fmt_estimate(&e.i_g)));
            t.check(
                near(&e.c_g, 0.25, 0.01) && near(&e.sc_g, 0.25, 0.01),
                format!("c={} sc={}", fmt_estimate(&e.c_g), fmt_estimate(&e.sc_g)),
            );
            t.check(
                near(&e.lc_g, 0.5, 0.01) && near(&e.slc_g, 0.5, 0.01),
                format!("lc={} slc={}", fmt_estimate(&e.lc_g), fmt_estimate(&e.slc_g)),
            );
            let n = s.model("flat_torus").points.len();
            let b = berger_from_estimates(&s.all_radii("flat_torus", n)?)?;
            let eq = b.margin.is_some_and(|x| x.abs() <= 0.02);
            t.check(eq, format!("Berger equality: {}", berger_line(&b)));
            let cb = s.condition_b("flat_torus")?;
            let witness = cb.evidence.iter().find_map(|ev| match ev {
                ConditionEvidence::UniquelyGeodesic {
                    radius,
                    expected: true,
                    result: UniquelyGeodesic::Fails { n_segments, distance, .. },
                } => Some((*radius, *n_segments, *distance)),
                _ => None,
            });
            let ok = cb.status == ConditionStatus::Fails
                && witness.is_some_and(|(r, k, _)| k == 2 && r <= 0.25 + 0.01);
            let w = witness.map_or("none".into(), |(r, k, d)| {
                format!("closed ball r={r:.4}, pair at distance {d:.4} with {k} segments")
            });
            t.check(ok, format!("condition B {:?}; witness: {w}", cb.status));
            Ok(())
        });
    }
    t.finish(4, "flat torus")
}

fn c5_sphere_distinguishing(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    if s.has("sphere") {
        t.run(|t| {
            let md = s.model("sphere");
            let (m, p, opts) = (&*md.rec.manifold, md.points[0].clone(), md.opts.clone());
            let v = ball_convexity_check(m, &p, FRAC_PI_2, opts.n_pairs, &opts)?;
            let w = v.witness.as_ref();
            let ok = v.verdict == BallVerdict::ProperlyConvexOnly && w.is_some_and(|w| w.closure && w.n_segments >= 2);
            t.check(ok, format!("r=pi/2: {:?}, witness segments {:?}", v.verdict, w.map(|w| w.n_segments)));
            let v1 = ball_convexity_check(m, &p, 1.0, opts.n_pairs, &opts)?;
            t.check(v1.verdict == BallVerdict::StronglyConvex, format!("r=1: {:?}", v1.verdict));
            let cb = s.condition_b("sphere")?;
            t.check(cb.status == ConditionStatus::Fails, format!("condition B {:?}", cb.status));
            Ok(())
        });
    }
    t.finish(5, "sphere distinguishing ball")
}

fn c6_berger(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    for name in ["sphere", "flat_torus", "ellipsoid"] {
        if !s.has(name) {
            continue;
        }
        match s.all_radii(name, 10).and_then(|e| berger_from_estimates(&e)) {
            Ok(b) => {
                let eq = name == "ellipsoid" || b.margin.is_some_and(|x| x.abs() <= 0.02);
                t.check(b.satisfied && eq, format!("{name}: {}", berger_line(&b)));
            }
            Err(e) => t.check(false, format!("{name}: error: {e}")),
        }
    }
    t.finish(6, "Berger inequality")
}

fn c7_lattice(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    if s.has("ellipsoid") {
        t.run(|t| {
            let est = s.all_radii("ellipsoid", 20)?;
            let bad: Vec<String> = est
                .iter()
                .enumerate()
                .flat_map(|(k, e)| e.lattice_violations().into_iter().map(move |(a, b)| format!("p{k}: {a:?} > {b:?}")))
                .collect();
            t.check(bad.is_empty(), format!("{} points, violations: {}", est.len(), if bad.is_empty() { "none".into() } else { bad.join(", ") }));
            let min = |f: fn(&RadiiEstimate) -> Estimate| est.iter().map(f).reduce(Estimate::min).unwrap();
            let (lc, slc, c, sc) = (min(|e| e.lc_g), min(|e| e.slc_g), min(|e| e.c_g), min(|e| e.sc_g));
            let half = |e: Estimate| match e {
                Estimate::Finite { value, half_width } => Estimate::finite(0.5 * value, 0.5 * half_width),
                x => x,
            };
            let plus = |e: Estimate| match e {
                Estimate::Finite { value, half_width } => Estimate::finite(value + TAU, half_width),
                x => x,
            };
            t.check(
                half(lc).le(&plus(c)) && half(slc).le(&plus(sc)),
                format!(
                    "lc_M={} c_M={} slc_M={} sc_M={}",
                    fmt_estimate(&lc),
                    fmt_estimate(&c),
                    fmt_estimate(&slc),
                    fmt_estimate(&sc)
                ),
            );
            Ok(())
        });
    }
    t.finish(7, "radius lattice")
}

fn c8_wronskian(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    let names: Vec<String> = s.models.keys().cloned().collect();
    if !names.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x3_5ca1);
        let res = (|| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for k in 0..100 {
                let name = &names[k % names.len()];
                let md = s.model(name);
                let m = &*md.rec.manifold;
                let p = &sample_points(&md.rec, 1, s.seed.wrapping_add(k as u64))?[0];
                let (v, _) = random_frame(m, p, &mut rng)?;
                let (_, a) = random_frame(m, p, &mut rng)?;
                let (_, b) = random_frame(m, p, &mut rng)?;
                let tt = rng.random_range(0.1..3.0);
                worst = worst.max(wronskian(m, p, &v, &a, &b, tt)?.abs());
            }
            Ok(worst)
        })();
        match res {
            Ok(w) => t.check(w <= 1e-8, format!("max |<DJ,K> - <J,DK>| = {w:.2e} over 100")),
            Err(e) => t.check(false, format!("error: {e}")),
        }
    }
    t.finish(8, "Wronskian symmetry")
}

fn c9_cuts(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    let sqrt_half = 0.5f64.sqrt();
    if s.has("sphere") {
        t.run(|t| {
            let md = s.model("sphere");
            let m = &*md.rec.manifold;
            let p = m.best_chart(&md.points[0]);
            let v = sample_directions(m, &p, 1, s.seed)?.remove(0);
            let out = classify_cut_point(m, &p, &v, 4.0, &md.opts)?;
            let ok = out.record().is_some_and(|r| {
                r.classification == CutClass::Ordinary && r.n_segments >= 2 && r.jacobi_det.abs() <= EPS_E
            });
            t.check(ok, format!("sphere antipode: {}", cut_line(&out)));
            Ok(())
        });
    }
    if s.has("flat_torus") {
        t.run(|t| {
            let md = s.model("flat_torus");
            let m = &*md.rec.manifold;
            let p = md.points[0].clone();
            let out = classify_cut_point(m, &p, &[1.0, 0.0], 2.0, &md.opts)?;
            let ok = out.record().is_some_and(|r| {
                r.classification == CutClass::Ordinary
                    && r.n_segments == 2
                    && r.jacobi_det.abs() >= 0.1
                    && (r.distance - 0.5).abs() <= 1e-4
            });
            t.check(ok, format!("torus axis: {}", cut_line(&out)));
            let out = classify_cut_point(m, &p, &[1.0, 1.0], 2.0, &md.opts)?;
            let ok = out.record().is_some_and(|r| r.n_segments >= 2 && (r.distance - sqrt_half).abs() <= 1e-4);
            t.check(ok, format!("torus diagonal: {}", cut_line(&out)));
            Ok(())
        });
    }
    for name in ["euclidean", "hyperbolic_halfplane"] {
        if !s.has(name) {
            continue;
        }
        t.run(|t| {
            let md = s.model(name);
            let m = &*md.rec.manifold;
            let p = m.best_chart(&md.points[0]);
            let dirs = sample_directions(m, &p, 4, s.seed)?;
            let mut ok = true;
            for v in &dirs {
                ok &= classify_cut_point(m, &p, v, 10.0, &md.opts)? == CutOutcome::ExceedsBound { bound: 10.0 };
            }
            t.check(ok, format!("{name}: no cut point within 10 on {} directions = {ok}", dirs.len()));
            Ok(())
        });
    }
    t.finish(9, "cut classification")
}

fn cut_line(out: &CutOutcome) -> String {
    match out.record() {
        Some(r) => format!(
            "t={:.6} {:?} segments={} det={:.2e}",
            r.distance, r.classification, r.n_segments, r.jacobi_det
        ),
        None => "no cut point".into(),
    }
}

/// Ball radius used for the implication checks on each model.
fn lemma_radius(name: &str) -> f64 {
    match name {
        "sphere" => 1.2,
        "flat_torus" => 0.2,
        "ellipsoid" => 0.9,
        "hyperbolic_halfplane" => 2.0,
        _ => 3.0,
    }
}

fn c10_strictness_and_lemmas(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    if s.has("sphere") {
        t.run(|t| {
            let e = s.radii("sphere", 0)?;
            let ok = e.c_g.or_inf() < e.i_g.or_inf() - 0.5;
            t.check(ok, format!("sphere c={} < i-0.5 with i={}", fmt_estimate(&e.c_g), fmt_estimate(&e.i_g)));
            Ok(())
        });
    }
    if s.has("flat_torus") {
        t.run(|t| {
            let e = s.radii("flat_torus", 0)?;
            let ok = e.c_g.or_inf() < e.i_g.or_inf() - TAU;
            t.check(ok, format!("torus c={} < i-tau", fmt_estimate(&e.c_g)));
            Ok(())
        });
    }
    let names: Vec<String> = s.models.keys().cloned().collect();
    for name in names {
        let res = lemma_checks(s, &name);
        match res {
            Ok(msg) => t.check(msg.0, format!("{name}: {}", msg.1)),
            Err(e) => t.check(false, format!("{name}: error: {e}")),
        }
    }
    t.finish(10, "strictness and implications")
}

/// Strongly convex balls have s.c.c. spheres inside; s.c.c. up to `r` keeps
/// segments between points of a ball of radius below `r/2` inside it.
fn lemma_checks(s: &Suite, name: &str) -> Result<(bool, String)> {
    let md = s.model(name);
    let m = &*md.rec.manifold;
    let opts = &md.opts;
    let r = lemma_radius(name);
    let mut ok = true;
    let (mut implications, mut pairs) = (0, 0);
    let mut worst_margin = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x1e_a7);
    for p in md.points.iter().take(2) {
        let p = m.best_chart(p);
        let scc_all = |upto: f64| -> Result<bool> {
            for k in 0..20 {
                let sr = upto * (k as f64 + 0.5) / 20.0;
                if !scc_check(m, &p, sr, 32, opts.seed)?.holds() {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let v = ball_convexity_check(m, &p, r, opts.n_pairs, opts)?;
        let scc = scc_all(r)?;
        if v.verdict == BallVerdict::StronglyConvex {
            implications += 1;
            ok &= scc;
        }
        if !scc {
            continue;
        }
        let rp = 0.45 * r;
        let solver = SegmentSolver::new(m, &p, 1.2 * rp, opts.segment_options())?;
        let g = m.chart(p.chart).eval_metric(&p.coords)?;
        let frame = linalg::orthonormal_frame(&g, m.dim());
        for k in 0..6 {
            let mut pick = |on_sphere: bool| -> Result<Point> {
                let c: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let u = combine(&frame, &c);
                let nu = linalg::norm(&g, &u);
                let len = if on_sphere { rp } else { rp * rng.random::<f64>() };
                geodesic::exp_map(m, &p, &u.iter().map(|x| x * len / nu).collect::<Vec<_>>())
            };
            let x = pick(true)?;
            let y = pick(k % 2 == 0)?;
            let set = minimizing_segments(m, &x, &y, &opts.segment_options())?;
            pairs += 1;
            for seg in &set.segments {
                for j in 1..20 {
                    let q = seg.point_at(m, seg.t1() * j as f64 / 20.0);
                    let d = solver.solve(&q)?.distance;
                    worst_margin = worst_margin.min(rp - d);
                }
            }
        }
    }
    ok &= worst_margin >= -1e-6;
    Ok((
        ok,
        format!("{implications} strongly convex balls imply s.c.c.; {pairs} pairs in r'={:.3}, min margin {worst_margin:.2e}", 0.45 * r),
    ))
}

/// A small analysis config used for the determinism check.
pub fn determinism_config(model: &str, seed: u64) -> AnalysisConfig {
    AnalysisConfig {
        model: ModelSpec { name: model.into(), params: Value::Null },
        points: PointsSpec::Random { random: 2 },
        seed,
        budgets: Budgets { n_dirs: 8, n_pairs: 6, ..Budgets::default() },
        ..AnalysisConfig::for_model(model)
    }
}

fn c11_determinism(s: &mut Suite) -> CriterionResult {
    let mut t = Tally::new();
    let pick = if s.has("flat_torus") { Some("flat_torus".to_string()) } else { s.models.keys().next().cloned() };
    if let Some(name) = pick {
        let cfg = determinism_config(&name, s.seed);
        let res = (|| -> Result<bool> {
            let a = run_analyze(&cfg)?.canonical_json();
            let b = run_analyze(&cfg)?.canonical_json();
            Ok(a == b)
        })();
        match res {
            Ok(same) => t.check(same, format!("{name}: two runs canonical-identical = {same}")),
            Err(e) => t.check(false, format!("{name}: error: {e}")),
        }
    }
    t.finish(11, "determinism")
}

fn rows(s: &mut Suite) -> Result<Vec<ModelRow>> {
    let names: Vec<String> = s.models.keys().cloned().collect();
    let mut out = Vec::new();
    for name in names {
        let e = s.radii(&name, 0)?;
        let cb = s.condition_b(&name)?;
        let known: Vec<RadiiEstimate> = s.model(&name).radii.values().cloned().collect();
        let b = berger_from_estimates(&known)?;
        out.push(ModelRow {
            model: name.clone(),
            point: e.point.coords.clone(),
            i: fmt_estimate(&e.i_g),
            lc: fmt_estimate(&e.lc_g),
            slc: fmt_estimate(&e.slc_g),
            c: fmt_estimate(&e.c_g),
            sc: fmt_estimate(&e.sc_g),
            condition_b: cb.status,
            berger: berger_line(&b),
        });
    }
    Ok(out)
}

const CRITERIA: [fn(&mut Suite) -> CriterionResult; 11] = [
    c1_sphere_radii,
    c2_g_closed_forms,
    c3_breakdown_vs_conjugate,
    c4_torus,
    c5_sphere_distinguishing,
    c6_berger,
    c7_lattice,
    c8_wronskian,
    c9_cuts,
    c10_strictness_and_lemmas,
    c11_determinism,
];

/// Runs every criterion on the named models (all built-ins when empty),
/// calling `progress` after each one.
pub fn run_suite(models: &[String], seed: u64, mut progress: impl FnMut(&CriterionResult)) -> Result<SuiteSummary> {
    let mut names: Vec<String> = if models.is_empty() {
        MODEL_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        models.to_vec()
    };
    names.sort();
    names.dedup();
    let mut suite = Suite::new(&names, seed)?;
    let mut criteria = Vec::with_capacity(CRITERIA.len());
    for c in CRITERIA {
        let r = c(&mut suite);
        progress(&r);
        criteria.push(r);
    }
    let rows = rows(&mut suite)?;
    let all_passed = criteria.iter().all(|c| c.status != CriterionStatus::Fail);
    Ok(SuiteSummary { models: names, seed, criteria, rows, all_passed })
}

/// [`run_suite`] wrapped in a report document.
pub fn run_check_theorems(models: &[String], seed: u64, progress: impl FnMut(&CriterionResult)) -> Result<ReportDocument> {
    let start = Instant::now();
    let summary = run_suite(models, seed, progress)?;
    let mut doc = ReportDocument::empty();
    doc.suite = Some(summary);
    doc.run.wall_time_s = start.elapsed().as_secs_f64();
    Ok(doc)
}
