//! Built-in manifolds with analytic metric data and reference radii.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{ManifoldChart, Point};
use crate::oracle::{Axis, Grid};

pub const MODEL_NAMES: [&str; 5] =
    ["euclidean", "sphere", "hyperbolic_halfplane", "flat_torus", "ellipsoid"];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SectionalCurvature {
    Constant(f64),
    Variable,
}

/// Closed-form radii; `None` means infinite.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GroundTruth {
    pub i_g: Option<f64>,
    pub lc_g: Option<f64>,
    pub slc_g: Option<f64>,
    pub c_g: Option<f64>,
    pub sc_g: Option<f64>,
    pub sectional_curvature: SectionalCurvature,
}

#[derive(Clone, Debug)]
pub struct ModelRecord {
    pub name: String,
    pub params: Value,
    pub manifold: Arc<Manifold>,
    pub ground_truth: Option<GroundTruth>,
    pub provenance: String,
}

fn param_f64(params: &Map<String, Value>, keys: &[&str], default: f64) -> Result<f64> {
    for k in keys {
        if let Some(v) = params.get(*k) {
            return v
                .as_f64()
                .ok_or_else(|| Error::BadParams(format!("`{k}` must be a number")));
        }
    }
    Ok(default)
}

fn param_dim(params: &Map<String, Value>, default: usize) -> Result<usize> {
    match params.get("n").or_else(|| params.get("dimension")) {
        None => Ok(default),
        Some(v) => {
            let n = v
                .as_u64()
                .ok_or_else(|| Error::BadParams("`n` must be a positive integer".into()))?;
            if n < 2 {
                return Err(Error::BadParams(format!("dimension must be at least 2, got {n}")));
            }
            Ok(n as usize)
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadParams(format!("`{name}` must be positive and finite, got {v}")))
    }
}

/// Looks up a built-in model. `params` may be `null` or an object.
pub fn get_model(name: &str, params: &Value) -> Result<ModelRecord> {
    let empty = Map::new();
    let map = match params {
        Value::Null => &empty,
        Value::Object(m) => m,
        _ => return Err(Error::BadParams("model params must be an object".into())),
    };
    match name {
        "euclidean" => {
            let n = param_dim(map, 2)?;
            Ok(record(name, params, euclidean(n), inf_truth(0.0), "flat metric; geodesics are straight lines"))
        }
        "sphere" => {
            let n = param_dim(map, 2)?;
            if n > 3 {
                return Err(Error::BadParams("sphere supports n = 2 or 3".into()));
            }
            let r = positive("R", param_f64(map, &["R", "radius", "r"], 1.0)?)?;
            let truth = GroundTruth {
                i_g: Some(PI * r),
                lc_g: Some(0.5 * PI * r),
                slc_g: Some(0.5 * PI * r),
                c_g: Some(0.5 * PI * r),
                sc_g: Some(0.5 * PI * r),
                sectional_curvature: SectionalCurvature::Constant(1.0 / (r * r)),
            };
            Ok(record(
                name,
                params,
                embedded(Embedded { n, scale: vec![r; n + 1], round: true }),
                Some(truth),
                "constant curvature 1/R^2: conjugate points at distance pi R, Jacobi fields R sin(t/R)",
            ))
        }
        "hyperbolic_halfplane" => {
            let n = param_dim(map, 2)?;
            Ok(record(
                name,
                params,
                hyperbolic(n),
                inf_truth(-1.0),
                "upper half-space model, curvature -1, Cartan-Hadamard",
            ))
        }
        "flat_torus" => {
            let periods: Vec<f64> = match map.get("periods") {
                None => vec![1.0, 1.0],
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|v| {
                        v.as_f64()
                            .ok_or_else(|| Error::BadParams("periods must be numbers".into()))
                            .and_then(|p| positive("period", p))
                    })
                    .collect::<Result<_>>()?,
                Some(_) => return Err(Error::BadParams("`periods` must be an array".into())),
            };
            if periods.len() < 2 {
                return Err(Error::BadParams("flat_torus needs at least two periods".into()));
            }
            let lmin = periods.iter().cloned().fold(f64::INFINITY, f64::min);
            let truth = GroundTruth {
                i_g: Some(0.5 * lmin),
                lc_g: Some(0.5 * lmin),
                slc_g: Some(0.5 * lmin),
                c_g: Some(0.25 * lmin),
                sc_g: Some(0.25 * lmin),
                sectional_curvature: SectionalCurvature::Constant(0.0),
            };
            Ok(record(
                name,
                params,
                torus(&periods),
                Some(truth),
                "flat quotient by a rectangular lattice: cut locus at half the shortest period",
            ))
        }
        "ellipsoid" => {
            let (a, b, c) = match map.get("axes") {
                Some(Value::Array(v)) if v.len() == 3 => {
                    let f = |i: usize| {
                        v[i].as_f64().ok_or_else(|| Error::BadParams("axes must be numbers".into()))
                    };
                    (f(0)?, f(1)?, f(2)?)
                }
                Some(_) => return Err(Error::BadParams("`axes` must be [a, b, c]".into())),
                None => (
                    param_f64(map, &["a"], 1.0)?,
                    param_f64(map, &["b"], 1.0)?,
                    param_f64(map, &["c"], 1.3)?,
                ),
            };
            let (a, b, c) = (positive("a", a)?, positive("b", b)?, positive("c", c)?);
            Ok(record(
                name,
                params,
                embedded(Embedded { n: 2, scale: vec![a, b, c], round: false }),
                None,
                "triaxial ellipsoid, variable curvature; no closed-form radii",
            ))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Polar angles of sampled sphere and ellipsoid points stay this far from
/// the poles of the first chart.
const POLE_MARGIN: f64 = 0.35;

/// Seeded sample points spread over a model (a bounded window on the
/// noncompact ones).
pub fn sample_points(rec: &ModelRecord, count: usize, seed: u64) -> Result<Vec<Point>> {
    let m = &rec.manifold;
    let n = m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a3b_1e5);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x: Vec<f64> = match rec.name.as_str() {
            "euclidean" => (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            "hyperbolic_halfplane" => (0..n)
                .map(|i| {
                    let v = rng.random_range(-1.0..1.0);
                    if i + 1 == n {
                        f64::exp(v)
                    } else {
                        v
                    }
                })
                .collect(),
            "flat_torus" => m.chart(0).period.iter().map(|p| rng.random_range(0.0..p.unwrap_or(1.0))).collect(),
            _ => {
                let top = POLE_MARGIN.cos();
                (0..n)
                    .map(|i| {
                        if i + 1 == n {
                            rng.random_range(0.0..2.0 * PI)
                        } else {
                            rng.random_range(-top..top).acos()
                        }
                    })
                    .collect()
            }
        };
        out.push(m.point(&x)?);
    }
    Ok(out)
}

fn record(
    name: &str,
    params: &Value,
    m: Manifold,
    truth: Option<GroundTruth>,
    provenance: &str,
) -> ModelRecord {
    ModelRecord {
        name: name.to_string(),
        params: params.clone(),
        manifold: Arc::new(m),
        ground_truth: truth,
        provenance: provenance.to_string(),
    }
}

fn inf_truth(k: f64) -> Option<GroundTruth> {
    Some(GroundTruth {
        i_g: None,
        lc_g: None,
        slc_g: None,
        c_g: None,
        sc_g: None,
        sectional_curvature: SectionalCurvature::Constant(k),
    })
}

/// `R(w, u) u = K (<u,u> w - <w,u> u)` for the metric `g` at `x`.
fn constant_curvature(g: &[f64], k: f64, u: &[f64], w: &[f64], out: &mut [f64]) {
    let uu = linalg::inner(g, u, u);
    let wu = linalg::inner(g, w, u);
    for i in 0..out.len() {
        out[i] = k * (uu * w[i] - wu * u[i]);
    }
}

pub fn euclidean(n: usize) -> Manifold {
    let chart = ManifoldChart::new(
        format!("euclidean{n}"),
        vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        vec![None; n],
        Arc::new(move |_x: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            for i in 0..n {
                g[i * n + i] = 1.0;
            }
        }),
    )
    .with_christoffel(Arc::new(|_x: &[f64], out: &mut [f64]| out.fill(0.0)))
    .with_curvature(Arc::new(|_x: &[f64], _u: &[f64], _w: &[f64], out: &mut [f64]| out.fill(0.0)));
    Manifold::single(chart).with_proxy(Arc::new(|_m: &Manifold, a: &Point, b: &Point| {
        a.coords.iter().zip(&b.coords).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }))
}

pub fn hyperbolic(n: usize) -> Manifold {
    let mut domain = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
    domain[n - 1] = (0.0, f64::INFINITY);
    let metric = move |x: &[f64], g: &mut [f64]| {
        let s = 1.0 / (x[n - 1] * x[n - 1]);
        g.fill(0.0);
        for i in 0..n {
            g[i * n + i] = s;
        }
    };
    let chart = ManifoldChart::new(format!("halfspace{n}"), domain, vec![None; n], Arc::new(metric))
        .with_christoffel(Arc::new(move |x: &[f64], out: &mut [f64]| {
            let y = x[n - 1];
            let l = n - 1;
            out.fill(0.0);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                        let v = d(i, k) * d(j, l) + d(j, k) * d(i, l) - d(i, j) * d(k, l);
                        if v != 0.0 {
                            out[k * n * n + i * n + j] = -v / y;
                        }
                    }
                }
            }
        }))
        .with_curvature(Arc::new(move |x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]| {
            let mut g = vec![0.0; n * n];
            metric(x, &mut g);
            constant_curvature(&g, -1.0, u, w, out);
        }));
    Manifold::single(chart).with_proxy(Arc::new(|_m: &Manifold, a: &Point, b: &Point| {
        let n = a.coords.len();
        let e2: f64 = a.coords.iter().zip(&b.coords).map(|(x, y)| (x - y) * (x - y)).sum();
        2.0 * (e2.sqrt() / (2.0 * (a.coords[n - 1] * b.coords[n - 1]).sqrt())).asinh()
    }))
}

pub fn torus(periods: &[f64]) -> Manifold {
    let n = periods.len();
    let chart = ManifoldChart::new(
        format!("torus{n}"),
        periods.iter().map(|&p| (0.0, p)).collect(),
        periods.iter().map(|&p| Some(p)).collect(),
        Arc::new(move |_x: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            for i in 0..n {
                g[i * n + i] = 1.0;
            }
        }),
    )
    .with_christoffel(Arc::new(|_x: &[f64], out: &mut [f64]| out.fill(0.0)))
    .with_curvature(Arc::new(|_x: &[f64], _u: &[f64], _w: &[f64], out: &mut [f64]| out.fill(0.0)));
    let per = periods.to_vec();
    Manifold::single(chart)
        .with_proxy(Arc::new(move |_m: &Manifold, a: &Point, b: &Point| {
            let mut s = 0.0;
            for i in 0..per.len() {
                let mut d = b.coords[i] - a.coords[i];
                d -= per[i] * (d / per[i]).round();
                s += d * d;
            }
            s.sqrt()
        }))
        .with_global_grid(Arc::new(move |m: &Manifold| {
            let n = m.dim();
            let count = match n {
                2 => 64,
                3 => 20,
                _ => return None,
            };
            let per = m.chart(0).period.clone();
            let axes = per
                .iter()
                .map(|p| {
                    let p = p.unwrap();
                    Axis { lo: 0.0, step: p / count as f64, count, periodic: true, log: false }
                })
                .collect();
            Some(Grid::new(m, 0, axes, true))
        }))
}

/// `D P H(x)`: hyperspherical coordinates, permuted per chart, scaled per axis.
#[derive(Clone, Debug)]
struct Embedded {
    n: usize,
    scale: Vec<f64>,
    round: bool,
}

impl Embedded {
    /// Ambient slot of hyperspherical component `k` in chart `chart`.
    fn slot(&self, chart: usize, k: usize) -> usize {
        let n = self.n;
        if chart == 1 {
            k
        } else if k >= n - 1 {
            k - (n - 1)
        } else {
            k + 2
        }
    }

    /// Unit hyperspherical vector and its Jacobian `dH` ((n+1) x n).
    fn hyper(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|v| (v.sin(), v.cos())).unzip();
        let mut h = vec![0.0; n + 1];
        let mut dh = vec![0.0; (n + 1) * n];
        for k in 0..=n {
            let last = k == n;
            let nprod = if last { n - 1 } else { k };
            let tail = |deriv: bool| -> f64 {
                let a = if last { n - 1 } else { k };
                match (last, deriv) {
                    (false, false) => c[a],
                    (false, true) => -s[a],
                    (true, false) => s[a],
                    (true, true) => c[a],
                }
            };
            let prod: f64 = s[..nprod].iter().product();
            h[k] = prod * tail(false);
            for j in 0..nprod {
                let mut p = c[j];
                for (i, si) in s[..nprod].iter().enumerate() {
                    if i != j {
                        p *= si;
                    }
                }
                dh[k * n + j] = p * tail(false);
            }
            let a = if last { n - 1 } else { k };
            if a < n {
                dh[k * n + a] = prod * tail(true);
            }
        }
        (h, dh)
    }

    fn embed(&self, chart: usize, x: &[f64]) -> Vec<f64> {
        let (h, _) = self.hyper(x);
        let mut out = vec![0.0; self.n + 1];
        for k in 0..=self.n {
            let s = self.slot(chart, k);
            out[s] = self.scale[s] * h[k];
        }
        out
    }

    /// `dX/dx`, (n+1) x n row-major.
    fn jacobian(&self, chart: usize, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (_, dh) = self.hyper(x);
        let mut out = vec![0.0; (n + 1) * n];
        for k in 0..=n {
            let s = self.slot(chart, k);
            for j in 0..n {
                out[s * n + j] = self.scale[s] * dh[k * n + j];
            }
        }
        out
    }

    fn project(&self, chart: usize, xa: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut h = vec![0.0; n + 1];
        for k in 0..=n {
            let s = self.slot(chart, k);
            h[k] = xa[s] / self.scale[s];
        }
        let nrm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        h.iter_mut().for_each(|v| *v /= nrm);
        let mut x = vec![0.0; n];
        for k in 0..n - 1 {
            let rest = h[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            x[k] = rest.atan2(h[k]);
        }
        x[n - 1] = h[n].atan2(h[n - 1]).rem_euclid(2.0 * PI);
        x
    }

    fn margin(x: &[f64]) -> f64 {
        let p: f64 = x[..x.len() - 1].iter().map(|v| v.sin()).product();
        p.abs().min(1.0).asin()
    }

    fn metric(&self, chart: usize, x: &[f64], g: &mut [f64]) {
        let n = self.n;
        if self.round {
            let r = self.scale[0];
            g.fill(0.0);
            let mut prod = r * r;
            for k in 0..n {
                g[k * n + k] = prod;
                if k < n - 1 {
                    prod *= x[k].sin().powi(2);
                }
            }
        } else {
            let j = self.jacobian(chart, x);
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] = (0..=n).map(|r| j[r * n + a] * j[r * n + b]).sum();
                }
            }
        }
    }

    fn christoffel(&self, chart: usize, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.fill(0.0);
        if self.round {
            // diagonal metric with h_k = R prod_{i<k} sin x_i
            for k in 0..n {
                for j in 0..k {
                    let cot = x[j].cos() / x[j].sin();
                    out[k * n * n + k * n + j] = cot;
                    out[k * n * n + j * n + k] = cot;
                    let mut v = -x[j].sin() * x[j].cos();
                    for xi in &x[j + 1..k] {
                        v *= xi.sin().powi(2);
                    }
                    out[j * n * n + k * n + k] = v;
                }
            }
            return;
        }
        // Γ^k_ij = g^{kl} <X_l, X_ij>, with the second derivatives of H for n = 2
        let jac = self.jacobian(chart, x);
        let mut g = vec![0.0; 4];
        self.metric(chart, x, &mut g);
        let ginv = linalg::invert(&g, 2).expect("ellipsoid metric is nondegenerate off the poles");
        let (st, ct, sp, cp) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
        let d2h: [[f64; 3]; 3] = [
            [-ct, -st * cp, -st * sp],
            [0.0, -ct * sp, ct * cp],
            [0.0, -st * cp, -st * sp],
        ];
        let second = |pair: usize| -> [f64; 3] {
            let mut v = [0.0; 3];
            for k in 0..3 {
                let s = self.slot(chart, k);
                v[s] = self.scale[s] * d2h[pair][k];
            }
            v
        };
        let xs = [second(0), second(1), second(2)];
        let idx = |i: usize, j: usize| if i == j { if i == 0 { 0 } else { 2 } } else { 1 };
        for i in 0..2 {
            for j in 0..2 {
                let xij = &xs[idx(i, j)];
                let proj: Vec<f64> = (0..2)
                    .map(|l| (0..3).map(|r| jac[r * 2 + l] * xij[r]).sum())
                    .collect();
                for k in 0..2 {
                    out[k * 4 + i * 2 + j] = ginv[k * 2] * proj[0] + ginv[k * 2 + 1] * proj[1];
                }
            }
        }
    }

    fn gauss_curvature(&self, chart: usize, x: &[f64]) -> f64 {
        if self.round {
            return 1.0 / (self.scale[0] * self.scale[0]);
        }
        let p = self.embed(chart, x);
        let (a, b, c) = (self.scale[0], self.scale[1], self.scale[2]);
        let q = p[0] * p[0] / a.powi(4) + p[1] * p[1] / b.powi(4) + p[2] * p[2] / c.powi(4);
        1.0 / (a * a * b * b * c * c * q * q)
    }

    fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let xa = self.embed(from, x);
        let y = self.project(to, &xa);
        let jf = self.jacobian(from, x);
        let jt = self.jacobian(to, &y);
        let mut jtj = vec![0.0; n * n];
        let mut jtf = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                jtj[a * n + b] = (0..=n).map(|r| jt[r * n + a] * jt[r * n + b]).sum();
                jtf[a * n + b] = (0..=n).map(|r| jt[r * n + a] * jf[r * n + b]).sum();
            }
        }
        let inv = linalg::invert(&jtj, n)?;
        let mut jac = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                jac[a * n + b] = (0..n).map(|c| inv[a * n + c] * jtf[c * n + b]).sum();
            }
        }
        Some((y, jac))
    }
}

fn embedded(e: Embedded) -> Manifold {
    let n = e.n;
    let label = if e.round { "sphere" } else { "ellipsoid" };
    let mut domain = vec![(0.0, PI); n];
    domain[n - 1] = (0.0, 2.0 * PI);
    let mut period = vec![None; n];
    period[n - 1] = Some(2.0 * PI);
    let e = Arc::new(e);
    let charts = (0..2)
        .map(|chart| {
            let (em, ec, ek) = (e.clone(), e.clone(), e.clone());
            ManifoldChart::new(
                format!("{label}{n}/{}", if chart == 0 { "A" } else { "B" }),
                domain.clone(),
                period.clone(),
                Arc::new(move |x: &[f64], g: &mut [f64]| em.metric(chart, x, g)),
            )
            .with_christoffel(Arc::new(move |x: &[f64], out: &mut [f64]| ec.christoffel(chart, x, out)))
            .with_curvature(Arc::new(move |x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]| {
                let n = x.len();
                let mut g = vec![0.0; n * n];
                ek.metric(chart, x, &mut g);
                constant_curvature(&g, ek.gauss_curvature(chart, x), u, w, out);
            }))
            .with_margin(Arc::new(Embedded::margin))
        })
        .collect();
    let (et, ep, ee) = (e.clone(), e.clone(), e.clone());
    let round = e.round;
    let radius = e.scale[0];
    Manifold::atlas(
        format!("{label}{n}"),
        charts,
        Arc::new(move |from, to, x| et.transition(from, to, x)),
    )
    .with_proxy(Arc::new(move |_m: &Manifold, a: &Point, b: &Point| {
        let xa = ep.embed(a.chart, &a.coords);
        let xb = ep.embed(b.chart, &b.coords);
        let chord = xa.iter().zip(&xb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
        if round {
            2.0 * radius * (0.5 * chord / radius).min(1.0).asin()
        } else {
            chord
        }
    }))
    .with_embedding(Arc::new(move |p: &Point| ee.embed(p.chart, &p.coords)))
    .with_global_grid(Arc::new(|m: &Manifold| {
        if m.dim() != 2 {
            return None;
        }
        let dt = PI / 64.0;
        let axes = vec![
            Axis { lo: 0.5 * dt, step: dt, count: 64, periodic: false, log: false },
            Axis { lo: 0.0, step: 2.0 * PI / 128.0, count: 128, periodic: true, log: false },
        ];
        Some(Grid::new(m, 0, axes, true))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sphere_transition_roundtrip() {
        let m = get_model("sphere", &json!({"R": 1.0, "n": 2})).unwrap().manifold;
        let x = [1.0, 0.7];
        let (y, jac) = m.transition(0, 1, &x).unwrap();
        let (z, jac2) = m.transition(1, 0, &y).unwrap();
        assert!((z[0] - x[0]).abs() < 1e-12 && (z[1] - x[1]).abs() < 1e-12);
        let prod = linalg::to_dmatrix(&jac2, 2) * linalg::to_dmatrix(&jac, 2);
        assert!((prod - nalgebra::DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn ellipsoid_christoffel_matches_fd() {
        let m = get_model("ellipsoid", &json!({"a": 1.0, "b": 1.2, "c": 0.8})).unwrap().manifold;
        for chart in 0..2 {
            let c = m.chart(chart);
            let x = [1.1, 2.3];
            let a = c.christoffel(&x).unwrap();
            let mut f = vec![0.0; 8];
            c.christoffel_fd(&x, &mut f).unwrap();
            for i in 0..8 {
                assert!((a[i] - f[i]).abs() < 1e-6, "chart {chart} idx {i}: {} vs {}", a[i], f[i]);
            }
        }
    }

    #[test]
    fn sphere3_christoffel_matches_fd() {
        let m = get_model("sphere", &json!({"R": 1.5, "n": 3})).unwrap().manifold;
        let c = m.chart(0);
        let x = [1.1, 0.7, 2.0];
        let a = c.christoffel(&x).unwrap();
        let mut f = vec![0.0; 27];
        c.christoffel_fd(&x, &mut f).unwrap();
        for i in 0..27 {
            assert!((a[i] - f[i]).abs() < 1e-6, "idx {i}: {} vs {}", a[i], f[i]);
        }
    }

    #[test]
    fn unknown_and_bad() {
        assert!(matches!(get_model("sphereX", &Value::Null), Err(Error::UnknownModel(_))));
        assert!(matches!(get_model("sphere", &json!({"R": -1.0})), Err(Error::BadParams(_))));
        assert!(matches!(get_model("euclidean", &json!({"n": 1})), Err(Error::BadParams(_))));
    }
}
