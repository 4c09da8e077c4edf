use std::f64::consts::PI;

use proptest::prelude::*;
use serde_json::{json, Value};

use convlab::convexity::{Estimate, RadiiEstimate, RadiusName, LATTICE};
use convlab::geodesic::{exp_map, shoot};
use convlab::jacobi::{conjugate_radius, g_eval, index_matrix, scc_breakdown_radius, wronskian};
use convlab::linalg;
use convlab::models::{get_model, sample_points, ModelRecord, MODEL_NAMES};
use convlab::ode::Tolerances;
use convlab::segments::{minimizing_segments, SegmentOptions};
use convlab::{Manifold, Point};

fn model(name: &str) -> ModelRecord {
    get_model(name, &Value::Null).unwrap()
}

fn point(rec: &ModelRecord, seed: u64) -> Point {
    sample_points(rec, 1, seed).unwrap().remove(0)
}

/// A g-unit vector at `p` along chart angle `a` (planar models).
fn unit(m: &Manifold, p: &Point, a: f64) -> Vec<f64> {
    let g = m.chart(p.chart).eval_metric(&p.coords).unwrap();
    let v = vec![a.cos(), a.sin()];
    let nv = linalg::norm(&g, &v);
    v.iter().map(|x| x / nv).collect()
}

/// A g-unit vector at `p` orthogonal to `v`.
fn normal(m: &Manifold, p: &Point, v: &[f64]) -> Vec<f64> {
    let g = m.chart(p.chart).eval_metric(&p.coords).unwrap();
    linalg::orthonormal_complement(&g, v).remove(0)
}

fn sphere_distance(m: &Manifold, a: &Point, b: &Point) -> f64 {
    let (x, y) = (m.embed(a).unwrap(), m.embed(b).unwrap());
    x.iter().zip(&y).map(|(u, v)| u * v).sum::<f64>().clamp(-1.0, 1.0).acos()
}

fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in -1..=1 {
        for j in -1..=1 {
            let dx = b[0] + i as f64 - a[0];
            let dy = b[1] + j as f64 - a[1];
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn metric_is_symmetric_positive_definite(k in 0usize..5, seed in any::<u64>()) {
        let rec = model(MODEL_NAMES[k]);
        let p = point(&rec, seed);
        let n = rec.manifold.dim();
        let g = rec.manifold.chart(p.chart).eval_metric(&p.coords).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g[i * n + j], g[j * n + i]);
            }
        }
        prop_assert!(linalg::sym_eigenvalues(&g, n)[0] > 0.0);
    }

    #[test]
    fn torus_metric_is_periodic(x in 0.0..1.0f64, y in 0.0..1.0f64, i in -3i32..3, j in -3i32..3) {
        let m = model("flat_torus").manifold;
        let c = m.chart(0);
        prop_assert_eq!(c.eval_metric(&[x, y]).unwrap(), c.eval_metric(&[x + i as f64, y + j as f64]).unwrap());
    }

    #[test]
    fn analytic_christoffels_match_finite_differences(k in 0usize..5, seed in any::<u64>()) {
        let rec = model(MODEL_NAMES[k]);
        let p = point(&rec, seed);
        let c = rec.manifold.chart(p.chart);
        prop_assume!(c.has_analytic_christoffel());
        let n = c.dim * c.dim * c.dim;
        let mut fd = vec![0.0; n];
        c.christoffel_fd(&p.coords, &mut fd).unwrap();
        let an = c.christoffel(&p.coords).unwrap();
        for (a, b) in an.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn constant_curvature_identity(hyper in any::<bool>(), seed in any::<u64>(), a in 0.0..(2.0 * PI), b in 0.0..(2.0 * PI)) {
        let (rec, k) = if hyper { (model("hyperbolic_halfplane"), -1.0) } else { (model("sphere"), 1.0) };
        let m = &rec.manifold;
        let p = point(&rec, seed);
        let c = m.chart(p.chart);
        let g = c.eval_metric(&p.coords).unwrap();
        let (u, w) = (unit(m, &p, a), unit(m, &p, b).iter().map(|x| 1.7 * x).collect::<Vec<_>>());
        let r = c.curvature_apply(&p.coords, &u, &w).unwrap();
        let (uu, wu) = (linalg::inner(&g, &u, &u), linalg::inner(&g, &w, &u));
        for i in 0..2 {
            let expect = k * (uu * w[i] - wu * u[i]);
            prop_assert!((r[i] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn geodesic_speed_is_conserved(k in 0usize..5, seed in any::<u64>(), a in 0.0..(2.0 * PI), t in 0.1..3.0f64) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, seed));
        let v: Vec<f64> = if m.dim() == 2 { unit(m, &p, a) } else { unit_nd(m, &p, seed) };
        let path = shoot(m, &p, &v, t, Tolerances::default()).unwrap();
        let s0 = path.speed_at(m, 0.0);
        for j in 1..=20 {
            let s = path.speed_at(m, t * j as f64 / 20.0);
            prop_assert!((s - s0).abs() / s0 <= 1e-7, "speed {} vs {}", s, s0);
        }
    }

    #[test]
    fn jacobi_index_matrix_is_symmetric(k in 0usize..5, seed in any::<u64>(), a in 0.0..(2.0 * PI), t in 0.1..2.5f64) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, seed));
        let v = if m.dim() == 2 { unit(m, &p, a) } else { unit_nd(m, &p, seed) };
        let im = index_matrix(m, &p, &v, t).unwrap();
        prop_assert!(im.asymmetry <= 1e-8, "asymmetry {}", im.asymmetry);
        prop_assert!(im.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn wronskian_vanishes(k in 0usize..5, seed in any::<u64>(), a in 0.0..(2.0 * PI), b in 0.0..(2.0 * PI), t in 0.1..3.0f64) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, seed));
        prop_assume!(m.dim() == 2);
        let v = unit(m, &p, a);
        let w1 = normal(m, &p, &v);
        let w2: Vec<f64> = w1.iter().map(|x| b.cos() * x).collect();
        prop_assert!(wronskian(m, &p, &v, &w1, &w2, t).unwrap().abs() <= 1e-8);
    }

    #[test]
    fn g_is_lipschitz_in_t(k in 0usize..5, seed in any::<u64>(), a in 0.0..(2.0 * PI), t in 0.1..2.0f64) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, seed));
        let v = if m.dim() == 2 { unit(m, &p, a) } else { unit_nd(m, &p, seed) };
        let w = normal(m, &p, &v);
        let d = 1e-4;
        let g0 = g_eval(m, &p, &v, &w, t).unwrap();
        let g1 = g_eval(m, &p, &v, &w, t + d).unwrap();
        // loose bound on |dG/dt| over these ranges
        prop_assert!((g1 - g0).abs() <= d * (50.0 + (2.0 * t).cosh()));
    }

    #[test]
    fn sphere_breakdown_precedes_conjugate(seed in any::<u64>(), a in 0.0..(2.0 * PI)) {
        let rec = model("sphere");
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, seed));
        let v = unit(m, &p, a);
        let s = scc_breakdown_radius(m, &p, &v, 4.0).unwrap().value().unwrap();
        let c = conjugate_radius(m, &p, &v, 4.0).unwrap().value().unwrap();
        prop_assert!(s < c);
        prop_assert!((s - PI / 2.0).abs() <= 1e-4 && (c - PI).abs() <= 1e-4);
    }

    #[test]
    fn estimate_order_is_consistent(a in 0.0..5.0f64, ha in 0.0..0.1f64, b in 0.0..5.0f64, hb in 0.0..0.1f64) {
        let (x, y) = (Estimate::finite(a, ha), Estimate::finite(b, hb));
        prop_assert!(x.le(&y) || y.le(&x));
        prop_assert_eq!(x.le(&y), a <= b + ha + hb);
        let unbounded = Estimate::ExceedsBound { bound: 10.0 };
        prop_assert!(x.le(&unbounded));
        prop_assert_eq!(x.min(y).value(), Some(a.min(b)));
    }
}

fn unit_nd(m: &Manifold, p: &Point, seed: u64) -> Vec<f64> {
    let g = m.chart(p.chart).eval_metric(&p.coords).unwrap();
    let n = m.dim();
    let v: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 7) as f64) - 3.0 + 0.5).collect();
    let nv = linalg::norm(&g, &v);
    v.iter().map(|x| x / nv).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn sphere_distance_matches_great_circle(s1 in any::<u64>(), s2 in any::<u64>()) {
        let rec = model("sphere");
        let m = &rec.manifold;
        let (a, b) = (point(&rec, s1), point(&rec, s2));
        let d = minimizing_segments(m, &a, &b, &SegmentOptions::default()).unwrap().distance;
        prop_assert!((d - sphere_distance(m, &a, &b)).abs() <= 1e-6);
    }

    #[test]
    fn torus_distance_matches_lattice(a in prop::array::uniform2(0.0..1.0f64), b in prop::array::uniform2(0.0..1.0f64)) {
        let m = model("flat_torus").manifold;
        let (p, q) = (m.point(&a).unwrap(), m.point(&b).unwrap());
        let set = minimizing_segments(&m, &p, &q, &SegmentOptions::default()).unwrap();
        prop_assert!((set.distance - torus_distance(&a, &b)).abs() <= 1e-9);
        for seg in &set.segments {
            let end = seg.end_point(&m);
            prop_assert!(torus_distance(&end.coords, &b) <= 1e-6);
        }
    }

    #[test]
    fn distance_is_symmetric_and_triangular(k in 0usize..5, s in any::<u64>()) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let pts = sample_points(&rec, 3, s).unwrap();
        let o = SegmentOptions::default();
        let d = |x: &Point, y: &Point| minimizing_segments(m, x, y, &o).unwrap().distance;
        let (pq, qp) = (d(&pts[0], &pts[1]), d(&pts[1], &pts[0]));
        prop_assert!((pq - qp).abs() <= 1e-6, "{} vs {}", pq, qp);
        prop_assert!(d(&pts[0], &pts[2]) <= pq + d(&pts[1], &pts[2]) + 1e-6);
    }

    #[test]
    fn exp_then_segment_recovers_short_lengths(k in 0usize..5, s in any::<u64>(), a in 0.0..(2.0 * PI), t in 0.05..0.2f64) {
        let rec = model(MODEL_NAMES[k]);
        let m = &rec.manifold;
        let p = m.best_chart(&point(&rec, s));
        let v: Vec<f64> = if m.dim() == 2 { unit(m, &p, a) } else { unit_nd(m, &p, s) };
        let q = exp_map(m, &p, &v.iter().map(|x| x * t).collect::<Vec<_>>()).unwrap();
        let set = minimizing_segments(m, &p, &q, &SegmentOptions::default()).unwrap();
        prop_assert!((set.distance - t).abs() <= 1e-6 && set.unique);
    }
}

#[test]
fn ground_truth_satisfies_lattice() {
    for name in MODEL_NAMES {
        let rec = model(name);
        let Some(gt) = &rec.ground_truth else { continue };
        let est = |v: Option<f64>| v.map_or(Estimate::ExceedsBound { bound: f64::MAX }, |x| Estimate::finite(x, 0.0));
        let p = rec.manifold.point(&sample_points(&rec, 1, 0).unwrap()[0].coords).unwrap();
        let e = RadiiEstimate {
            point: p,
            bound: f64::MAX,
            i_g: est(gt.i_g),
            lc_g: est(gt.lc_g),
            slc_g: est(gt.slc_g),
            c_g: est(gt.c_g),
            sc_g: est(gt.sc_g),
            witnesses: Vec::new(),
            partial: false,
            ball_checks: 0,
        };
        assert!(e.lattice_violations().is_empty(), "{name}");
        assert_eq!(LATTICE.len(), 6);
        assert!(LATTICE.contains(&(RadiusName::StrongConvexity, RadiusName::Convexity)));
    }
}

#[test]
fn round_ellipsoid_matches_sphere() {
    let ell = get_model("ellipsoid", &json!({"a": 1.0, "b": 1.0, "c": 1.0})).unwrap();
    let sph = model("sphere");
    let p = ell.manifold.point(&[1.0, 0.5]).unwrap();
    let q = sph.manifold.point(&[1.0, 0.5]).unwrap();
    let v = unit(&ell.manifold, &p, 0.3);
    let a = scc_breakdown_radius(&ell.manifold, &p, &v, 4.0).unwrap().value().unwrap();
    let b = scc_breakdown_radius(&sph.manifold, &q, &unit(&sph.manifold, &q, 0.3), 4.0).unwrap().value().unwrap();
    assert!((a - b).abs() <= 1e-6 && (a - PI / 2.0).abs() <= 1e-4);
}
