//! Coarse graph distances: Dijkstra on a coordinate grid of one chart with
//! edge lengths measured by the metric at edge midpoints.
//!
//! Graph paths are genuine curves, so up to quadrature error the graph
//! distance is an upper bound for the Riemannian distance. It serves as an
//! initializer and a cross-check for shooting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::atlas::Manifold;
use crate::linalg;
use crate::metric::{ManifoldChart, Point};

#[derive(Clone, Debug)]
pub struct Axis {
    pub lo: f64,
    pub step: f64,
    pub count: usize,
    pub periodic: bool,
    /// Nodes are uniform in `ln x` rather than `x`.
    pub log: bool,
}

impl Axis {
    fn coord(&self, i: i64) -> f64 {
        let u = self.lo + i as f64 * self.step;
        if self.log {
            u.exp()
        } else {
            u
        }
    }

    fn frac_index(&self, x: f64) -> f64 {
        let u = if self.log { x.max(1e-300).ln() } else { x };
        (u - self.lo) / self.step
    }
}

pub struct Grid {
    pub chart: usize,
    pub axes: Vec<Axis>,
    chart_data: ManifoldChart,
    offsets: Vec<Vec<i64>>,
    n_nodes: usize,
    weights: Option<Vec<f64>>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn stencil(n: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if n == 2 {
        for i in -3i64..=3 {
            for j in -3i64..=3 {
                if (i, j) != (0, 0) && gcd(i, j) == 1 {
                    out.push(vec![i, j]);
                }
            }
        }
    } else {
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let v: Vec<i64> = (0..n)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect();
            if v.iter().any(|&d| d != 0) {
                out.push(v);
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Entry(f64, usize);
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Graph distance from a source, optionally for a single target.
#[derive(Clone, Debug)]
pub struct OracleEstimate {
    pub distance: f64,
    /// Coordinate direction of the first graph edge, in the chart of the
    /// source point passed in.
    pub direction: Vec<f64>,
}

/// Single-source shortest paths over the whole grid.
pub struct SourceField {
    source: Point,
    attach: Vec<(usize, f64, Vec<f64>)>,
    dist: Vec<f64>,
    first: Vec<u32>,
}

impl Grid {
    pub fn new(m: &Manifold, chart: usize, axes: Vec<Axis>, precompute: bool) -> Self {
        let n = axes.len();
        let n_nodes = axes.iter().map(|a| a.count).product();
        let mut g = Grid {
            chart,
            axes,
            chart_data: m.chart(chart).clone(),
            offsets: stencil(n),
            n_nodes,
            weights: None,
        };
        if precompute {
            let k = g.offsets.len();
            let mut w = vec![f64::INFINITY; n_nodes * k];
            for a in 0..n_nodes {
                for o in 0..k {
                    if let Some((_, wt)) = g.edge(a, o) {
                        w[a * k + o] = wt;
                    }
                }
            }
            g.weights = Some(w);
        }
        g
    }

    /// A grid spanning a box around `p` and `q` in the chart of `p`.
    pub fn window(m: &Manifold, p: &Point, q: &[f64]) -> Option<Self> {
        let c = m.chart(p.chart);
        let n = c.dim;
        let count = match n {
            2 => 48,
            3 => 14,
            _ => 8,
        };
        let mut d = vec![0.0; n];
        c.coord_diff(&p.coords, q, &mut d);
        let span = d.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-3);
        let mut axes = Vec::with_capacity(n);
        for i in 0..n {
            let (lo_d, hi_d) = c.domain[i];
            if let Some(per) = c.period[i] {
                axes.push(Axis { lo: lo_d, step: per / count as f64, count, periodic: true, log: false });
                continue;
            }
            let a = p.coords[i];
            let b = p.coords[i] + d[i];
            let log = lo_d == 0.0 && hi_d == f64::INFINITY;
            if log {
                let ymin = a.min(b);
                let ymax = a.max(b).max(span);
                let lo = ymin.ln() - 0.5;
                let hi = (2.0 * ymax).ln();
                axes.push(Axis { lo, step: (hi - lo) / (count - 1) as f64, count, periodic: false, log });
            } else {
                let pad = 0.25 * span;
                let mut lo = a.min(b) - pad;
                let mut hi = a.max(b) + pad;
                if lo_d.is_finite() {
                    lo = lo.max(lo_d + 1e-3 * (hi_d - lo_d).min(1.0));
                }
                if hi_d.is_finite() {
                    hi = hi.min(hi_d - 1e-3 * (hi_d - lo_d).min(1.0));
                }
                if !(hi > lo) {
                    return None;
                }
                axes.push(Axis { lo, step: (hi - lo) / (count - 1) as f64, count, periodic: false, log });
            }
        }
        Some(Grid::new(m, p.chart, axes, false))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn multi(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.axes.len()];
        for (i, a) in self.axes.iter().enumerate() {
            out[i] = (idx % a.count) as i64;
            idx /= a.count;
        }
        out
    }

    fn flat(&self, multi: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (i, a) in self.axes.iter().enumerate() {
            let c = a.count as i64;
            let mut k = multi[i];
            if a.periodic {
                k = k.rem_euclid(c);
            } else if k < 0 || k >= c {
                return None;
            }
            idx += k as usize * stride;
            stride *= a.count;
        }
        Some(idx)
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let m = self.multi(idx);
        self.axes.iter().zip(&m).map(|(a, &k)| a.coord(k)).collect()
    }

    fn length(&self, x: &[f64], d: &[f64]) -> f64 {
        let n = x.len();
        let mid: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + 0.5 * b).collect();
        let mut g = vec![0.0; n * n];
        self.chart_data.metric_into(&mid, &mut g);
        linalg::norm(&g, d)
    }

    /// Length of the straight chart segment by adaptive midpoint quadrature.
    fn segment_length(&self, x: &[f64], d: &[f64]) -> f64 {
        fn rec(grid: &Grid, x: &[f64], d: &[f64], whole: f64, depth: u32) -> f64 {
            let h: Vec<f64> = d.iter().map(|v| 0.5 * v).collect();
            let xm: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            let (l, r) = (grid.length(x, &h), grid.length(&xm, &h));
            if depth == 0 || (l + r - whole).abs() <= 1e-4 * (l + r) {
                return l + r;
            }
            rec(grid, x, &h, l, depth - 1) + rec(grid, &xm, &h, r, depth - 1)
        }
        let whole = self.length(x, d);
        rec(self, x, d, whole, 24)
    }

    fn edge(&self, a: usize, o: usize) -> Option<(usize, f64)> {
        let ma = self.multi(a);
        let off = &self.offsets[o];
        let mb: Vec<i64> = ma.iter().zip(off).map(|(x, y)| x + y).collect();
        let b = self.flat(&mb)?;
        let xa: Vec<f64> = self.axes.iter().zip(&ma).map(|(ax, &k)| ax.coord(k)).collect();
        let d: Vec<f64> = self
            .axes
            .iter()
            .enumerate()
            .map(|(i, ax)| ax.coord(mb[i]) - ax.coord(ma[i]))
            .collect();
        Some((b, self.length(&xa, &d)))
    }

    /// Nodes near `x` with the metric length of the straight chart segment.
    fn attach(&self, x: &[f64]) -> Vec<(usize, f64, Vec<f64>)> {
        let n = self.axes.len();
        let base: Vec<i64> =
            self.axes.iter().zip(x).map(|(a, &v)| a.frac_index(v).floor() as i64).collect();
        let mut out = Vec::new();
        let total = 4usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let multi: Vec<i64> = (0..n)
                .map(|i| {
                    let d = (c % 4) as i64 - 1;
                    c /= 4;
                    base[i] + d
                })
                .collect();
            if let Some(idx) = self.flat(&multi) {
                let node = self.node_coords(idx);
                let mut d = vec![0.0; n];
                self.chart_data.coord_diff(x, &node, &mut d);
                if !self.chart_data.in_domain(&node) {
                    continue;
                }
                let w = self.segment_length(x, &d);
                if w.is_finite() {
                    out.push((idx, w, d));
                }
            }
        }
        out
    }

    fn weight(&self, a: usize, o: usize) -> Option<(usize, f64)> {
        match &self.weights {
            Some(w) => {
                let wt = w[a * self.offsets.len() + o];
                if wt.is_finite() {
                    let ma = self.multi(a);
                    let mb: Vec<i64> =
                        ma.iter().zip(&self.offsets[o]).map(|(x, y)| x + y).collect();
                    self.flat(&mb).map(|b| (b, wt))
                } else {
                    None
                }
            }
            None => self.edge(a, o),
        }
    }

    fn dijkstra(
        &self,
        attach: &[(usize, f64, Vec<f64>)],
        target: Option<&[(usize, f64, Vec<f64>)]>,
    ) -> (Vec<f64>, Vec<u32>, Option<(f64, usize)>) {
        let mut dist = vec![f64::INFINITY; self.n_nodes];
        let mut first = vec![u32::MAX; self.n_nodes];
        let mut done = vec![false; self.n_nodes];
        let mut heap = BinaryHeap::new();
        for (k, (idx, w, _)) in attach.iter().enumerate() {
            if *w < dist[*idx] {
                dist[*idx] = *w;
                first[*idx] = k as u32;
                heap.push(Entry(*w, *idx));
            }
        }
        let mut tmap: Vec<(usize, f64)> = Vec::new();
        if let Some(t) = target {
            tmap = t.iter().map(|(i, w, _)| (*i, *w)).collect();
        }
        let mut best: Option<(f64, usize)> = None;
        while let Some(Entry(d, a)) = heap.pop() {
            if done[a] {
                continue;
            }
            if let Some((bd, _)) = best {
                if d >= bd {
                    break;
                }
            }
            done[a] = true;
            for (idx, w) in &tmap {
                if *idx == a && best.map_or(true, |(bd, _)| d + w < bd) {
                    best = Some((d + w, a));
                }
            }
            for o in 0..self.offsets.len() {
                if let Some((b, w)) = self.weight(a, o) {
                    let nd = d + w;
                    if nd < dist[b] {
                        dist[b] = nd;
                        first[b] = first[a];
                        heap.push(Entry(nd, b));
                    }
                }
            }
        }
        (dist, first, best)
    }

    /// Shortest graph path between two chart points of this grid's chart.
    pub fn query(&self, x: &[f64], y: &[f64]) -> Option<(f64, Vec<f64>)> {
        let sa = self.attach(x);
        let ta = self.attach(y);
        if sa.is_empty() || ta.is_empty() {
            return None;
        }
        // a straight chart segment is also a candidate path
        let n = x.len();
        let mut d = vec![0.0; n];
        self.chart_data.coord_diff(x, y, &mut d);
        let direct = self.segment_length(x, &d);
        let (_, first, best) = self.dijkstra(&sa, Some(&ta));
        let (bd, node) = best?;
        if direct <= bd && direct < 2.0 * self.max_step() {
            return Some((direct, d));
        }
        Some((bd, sa[first[node] as usize].2.clone()))
    }

    fn max_step(&self) -> f64 {
        let x = self.node_coords(self.n_nodes / 2);
        let mut s: f64 = 0.0;
        for i in 0..self.axes.len() {
            let mut d = vec![0.0; self.axes.len()];
            d[i] = self.axes[i].coord(1) - self.axes[i].coord(0);
            s = s.max(self.length(&x, &d));
        }
        s
    }

    pub fn field(&self, source: &Point, x: &[f64]) -> SourceField {
        let attach = self.attach(x);
        let (dist, first, _) = self.dijkstra(&attach, None);
        SourceField { source: source.clone(), attach, dist, first }
    }
}

impl SourceField {
    pub fn source(&self) -> &Point {
        &self.source
    }

    /// Graph distance to `y` (grid chart coordinates) and the first-edge
    /// direction in grid chart coordinates.
    fn query(&self, grid: &Grid, y: &[f64]) -> Option<(f64, Vec<f64>)> {
        let ta = grid.attach(y);
        let mut best: Option<(f64, usize)> = None;
        for (idx, w, _) in &ta {
            let d = self.dist[*idx] + w;
            if d.is_finite() && best.map_or(true, |(b, _)| d < b) {
                best = Some((d, *idx));
            }
        }
        let (d, node) = best?;
        let f = self.first[node];
        (f != u32::MAX).then(|| (d, self.attach[f as usize].2.clone()))
    }
}

/// Converts a direction from chart `from` at `x_from` into chart `p.chart`.
fn pull_direction(m: &Manifold, from: usize, x_from: &[f64], to: usize, v: &[f64]) -> Option<Vec<f64>> {
    let (_, jac) = m.transition(from, to, x_from)?;
    let n = v.len();
    Some((0..n).map(|r| (0..n).map(|c| jac[r * n + c] * v[c]).sum()).collect())
}

/// Graph oracle for pairs of points of a manifold, reusing a whole-manifold
/// grid when the model provides one.
pub enum Oracle {
    Global { grid: std::sync::Arc<Grid>, field: Option<SourceField> },
    Window,
}

impl Oracle {
    pub fn for_manifold(m: &Manifold) -> Self {
        match m.global_grid() {
            Some(grid) => Oracle::Global { grid, field: None },
            None => Oracle::Window,
        }
    }

    /// Precomputes single-source distances from `p` (only useful on global grids).
    pub fn with_source(m: &Manifold, p: &Point) -> Self {
        match m.global_grid() {
            Some(grid) => {
                let field = m.express(p, grid.chart).map(|x| grid.field(p, &x));
                Oracle::Global { grid, field }
            }
            None => Oracle::Window,
        }
    }

    pub fn estimate(&self, m: &Manifold, p: &Point, q: &Point) -> Option<OracleEstimate> {
        match self {
            Oracle::Global { grid, field } => {
                let xp = m.express(p, grid.chart)?;
                let xq = m.express(q, grid.chart)?;
                let (d, dir) = match field {
                    Some(f) if f.source() == p => f.query(grid, &xq)?,
                    _ => grid.query(&xp, &xq)?,
                };
                let direction = pull_direction(m, grid.chart, &xp, p.chart, &dir)?;
                Some(OracleEstimate { distance: d, direction })
            }
            Oracle::Window => {
                let xq = m.express(q, p.chart)?;
                let grid = Grid::window(m, p, &xq)?;
                let (d, dir) = grid.query(&p.coords, &xq)?;
                Some(OracleEstimate { distance: d, direction: dir })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;

    #[test]
    fn stencil_sizes() {
        assert_eq!(stencil(2).len(), 32);
        assert_eq!(stencil(3).len(), 26);
    }

    #[test]
    fn torus_graph_distance_close_to_lattice() {
        let rec = get_model("flat_torus", &json!({"periods": [1.0, 1.0]})).unwrap();
        let m = &rec.manifold;
        let o = Oracle::for_manifold(m);
        let p = m.point(&[0.1, 0.2]).unwrap();
        let q = m.point(&[0.8, 0.35]).unwrap();
        let est = o.estimate(m, &p, &q).unwrap();
        let exact = (0.3f64 * 0.3 + 0.15 * 0.15).sqrt();
        assert!(est.distance >= exact - 1e-9 && est.distance < exact * 1.02, "{}", est.distance);
        assert!(est.direction[0] < 0.0);
    }

    #[test]
    fn sphere_graph_distance_close_to_great_circle() {
        let rec = get_model("sphere", &json!({"R": 1.0})).unwrap();
        let m = &rec.manifold;
        let o = Oracle::for_manifold(m);
        let p = m.point(&[1.0, 0.3]).unwrap();
        let q = m.point(&[2.0, 2.5]).unwrap();
        let est = o.estimate(m, &p, &q).unwrap();
        let exact = m.proxy_distance(&p, &q);
        assert!(est.distance > exact * 0.99 && est.distance < exact * 1.03, "{} {}", est.distance, exact);
    }

    #[test]
    fn hyperbolic_window_distance() {
        let rec = get_model("hyperbolic_halfplane", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 1.0]).unwrap();
        let q = m.point(&[2.0, 0.5]).unwrap();
        let est = Oracle::Window.estimate(m, &p, &q).unwrap();
        let exact = m.proxy_distance(&p, &q);
        assert!(est.distance > exact * 0.99 && est.distance < exact * 1.05, "{} {}", est.distance, exact);
    }
}
