//! A manifold as a small atlas of charts with transition maps.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::metric::{ManifoldChart, Point};
use crate::oracle::Grid;

/// `(from, to, x)` returns the coordinates of `x` in chart `to` together with
/// the Jacobian `∂x_to/∂x_from` (row-major), or `None` if `x` is not covered.
pub type TransitionFn =
    Arc<dyn Fn(usize, usize, &[f64]) -> Option<(Vec<f64>, Vec<f64>)> + Send + Sync>;
/// A cheap, exact-on-the-diagonal distance-like function between points;
/// zero iff the points coincide.
pub type ProxyFn = Arc<dyn Fn(&Manifold, &Point, &Point) -> f64 + Send + Sync>;
pub type EmbedFn = Arc<dyn Fn(&Point) -> Vec<f64> + Send + Sync>;
pub type GridFn = Arc<dyn Fn(&Manifold) -> Option<Grid> + Send + Sync>;

/// Margin below which the integrator moves to a better chart.
pub const SWITCH_MARGIN: f64 = 0.2;

pub struct Manifold {
    pub name: String,
    pub charts: Vec<ManifoldChart>,
    transition: Option<TransitionFn>,
    proxy: Option<ProxyFn>,
    embedding: Option<EmbedFn>,
    global_grid: Option<GridFn>,
    grid_cache: OnceLock<Option<Arc<Grid>>>,
}

impl Clone for Manifold {
    fn clone(&self) -> Self {
        Manifold {
            name: self.name.clone(),
            charts: self.charts.clone(),
            transition: self.transition.clone(),
            proxy: self.proxy.clone(),
            embedding: self.embedding.clone(),
            global_grid: self.global_grid.clone(),
            grid_cache: OnceLock::new(),
        }
    }
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifold")
            .field("name", &self.name)
            .field("charts", &self.charts)
            .finish()
    }
}

impl Manifold {
    pub fn single(chart: ManifoldChart) -> Self {
        Manifold {
            name: chart.label.clone(),
            charts: vec![chart],
            transition: None,
            proxy: None,
            embedding: None,
            global_grid: None,
            grid_cache: OnceLock::new(),
        }
    }

    pub fn atlas(name: impl Into<String>, charts: Vec<ManifoldChart>, transition: TransitionFn) -> Self {
        Manifold {
            name: name.into(),
            charts,
            transition: Some(transition),
            proxy: None,
            embedding: None,
            global_grid: None,
            grid_cache: OnceLock::new(),
        }
    }

    pub fn with_proxy(mut self, proxy: ProxyFn) -> Self {
        self.proxy = Some(proxy);
        self
    }

    pub fn with_embedding(mut self, f: EmbedFn) -> Self {
        self.embedding = Some(f);
        self
    }

    /// Ambient coordinates for embedded models.
    pub fn embed(&self, p: &Point) -> Option<Vec<f64>> {
        self.embedding.as_ref().map(|f| f(p))
    }

    pub fn with_global_grid(mut self, f: GridFn) -> Self {
        self.global_grid = Some(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.charts[0].dim
    }

    pub fn chart(&self, i: usize) -> &ManifoldChart {
        &self.charts[i]
    }

    /// A validated point in chart 0.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        self.point_in(0, coords)
    }

    pub fn point_in(&self, chart: usize, coords: &[f64]) -> Result<Point> {
        let c = self.charts.get(chart).ok_or_else(|| {
            Error::InvalidInput(format!("chart index {chart} out of range"))
        })?;
        if coords.len() != c.dim {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                c.dim,
                coords.len()
            )));
        }
        c.eval_metric(coords)?;
        Ok(Point::new(chart, c.wrapped(coords)))
    }

    /// Coordinates of `x` (given in chart `from`) in chart `to`, with the
    /// Jacobian of the change of coordinates.
    pub fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if from == to {
            let n = x.len();
            let mut id = vec![0.0; n * n];
            for i in 0..n {
                id[i * n + i] = 1.0;
            }
            return Some((x.to_vec(), id));
        }
        let (y, jac) = (self.transition.as_ref()?)(from, to, x)?;
        self.charts[to].in_domain(&y).then_some((y, jac))
    }

    /// Expresses `p` in chart `to`.
    pub fn express(&self, p: &Point, to: usize) -> Option<Vec<f64>> {
        self.transition(p.chart, to, &p.coords).map(|(y, _)| y)
    }

    /// `v` at `p` (in `p`'s chart) expressed in chart `to`.
    pub fn push_vector(&self, p: &Point, v: &[f64], to: usize) -> Option<Vec<f64>> {
        let (_, jac) = self.transition(p.chart, to, &p.coords)?;
        let n = v.len();
        Some((0..n).map(|i| (0..n).map(|j| jac[i * n + j] * v[j]).sum()).collect())
    }

    /// The chart (and coordinates) with the largest margin at `p`.
    pub fn best_chart(&self, p: &Point) -> Point {
        let mut best = p.clone();
        let mut best_m = self.charts[p.chart].margin(&p.coords);
        if self.charts.len() == 1 || best_m >= 1.0 {
            return best;
        }
        for k in 0..self.charts.len() {
            if k == p.chart {
                continue;
            }
            if let Some(y) = self.express(p, k) {
                let m = self.charts[k].margin(&y);
                if m > best_m {
                    best_m = m;
                    best = Point::new(k, self.charts[k].wrapped(&y));
                }
            }
        }
        best
    }

    /// Distance-like comparison of two points (exact distance on several
    /// built-in models, a chord length on embedded surfaces).
    pub fn proxy_distance(&self, a: &Point, b: &Point) -> f64 {
        if let Some(f) = &self.proxy {
            return f(self, a, b);
        }
        let c = &self.charts[a.chart];
        let bb = if a.chart == b.chart {
            b.coords.clone()
        } else {
            match self.express(b, a.chart) {
                Some(y) => y,
                None => return f64::INFINITY,
            }
        };
        let mut d = vec![0.0; c.dim];
        c.coord_diff(&a.coords, &bb, &mut d);
        let mut g = vec![0.0; c.dim * c.dim];
        let mut mid = a.coords.clone();
        for i in 0..c.dim {
            mid[i] += 0.5 * d[i];
        }
        c.metric_into(&mid, &mut g);
        crate::linalg::norm(&g, &d)
    }

    /// The cached whole-manifold oracle grid, if this model has one.
    pub fn global_grid(&self) -> Option<Arc<Grid>> {
        self.grid_cache
            .get_or_init(|| self.global_grid.as_ref().and_then(|f| f(self)).map(Arc::new))
            .clone()
    }
}
