//! Geodesic paths, shooting and the exponential map.

use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::flow::{self, Trajectory};
use crate::linalg;
use crate::metric::Point;
use crate::ode::Tolerances;

/// A solution of the geodesic equation with dense output.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub traj: Trajectory,
    pub start: Point,
    pub v0: Vec<f64>,
    /// `|x'(t)|_g`, constant along the path.
    pub speed: f64,
    pub unit_speed: bool,
}

impl GeodesicPath {
    pub fn from_trajectory(traj: Trajectory, start: Point, v0: Vec<f64>, speed: f64) -> Self {
        GeodesicPath { traj, start, v0, speed, unit_speed: (speed - 1.0).abs() < 1e-12 }
    }

    pub fn t0(&self) -> f64 {
        0.0
    }

    pub fn t1(&self) -> f64 {
        self.traj.t_end
    }

    pub fn length(&self) -> f64 {
        self.speed * self.t1()
    }

    /// Position and velocity at `t`, in the chart used at that parameter.
    pub fn state(&self, t: f64) -> (usize, Vec<f64>, Vec<f64>) {
        let n = self.traj.n;
        let (c, _, y) = self.traj.state_vec(t);
        (c, y[..n].to_vec(), y[n..2 * n].to_vec())
    }

    /// Position at `t`, with periodic coordinates wrapped.
    pub fn point_at(&self, m: &Manifold, t: f64) -> Point {
        let (c, x, _) = self.state(t);
        Point::new(c, m.chart(c).wrapped(&x))
    }

    pub fn end_point(&self, m: &Manifold) -> Point {
        self.point_at(m, self.t1())
    }

    /// `|x'(t)|_g` evaluated from the dense output.
    pub fn speed_at(&self, m: &Manifold, t: f64) -> f64 {
        let (c, x, xd) = self.state(t);
        let n = x.len();
        let mut g = vec![0.0; n * n];
        m.chart(c).metric_into(&x, &mut g);
        linalg::norm(&g, &xd)
    }

    /// Initial velocity normalized to unit speed.
    pub fn unit_direction(&self) -> Vec<f64> {
        self.v0.iter().map(|c| c / self.speed).collect()
    }
}

pub fn speed_of(m: &Manifold, p: &Point, v: &[f64]) -> f64 {
    let n = v.len();
    let mut g = vec![0.0; n * n];
    m.chart(p.chart).metric_into(&p.coords, &mut g);
    linalg::norm(&g, v)
}

fn validate(m: &Manifold, p: &Point, v: &[f64]) -> Result<()> {
    let c = m.charts.get(p.chart).ok_or_else(|| Error::InvalidInput("bad chart index".into()))?;
    if v.len() != c.dim || p.coords.len() != c.dim {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    c.eval_metric(&p.coords)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite tangent vector".into()));
    }
    Ok(())
}

/// Solves the geodesic equation on `[0, t_end]` from `p` with `x'(0) = v`.
pub fn shoot(m: &Manifold, p: &Point, v: &[f64], t_end: f64, tol: Tolerances) -> Result<GeodesicPath> {
    validate(m, p, v)?;
    let speed = speed_of(m, p, v);
    if !(speed > 0.0) {
        return Err(Error::InvalidInput("zero initial velocity".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput(format!("integration length {t_end} must be positive")));
    }
    let traj = flow::integrate(m, p, v, &[], t_end, tol)?;
    Ok(GeodesicPath::from_trajectory(traj, p.clone(), v.to_vec(), speed))
}

/// `exp_p(v)`.
pub fn exp_map(m: &Manifold, p: &Point, v: &[f64]) -> Result<Point> {
    validate(m, p, v)?;
    let speed = speed_of(m, p, v);
    if speed == 0.0 {
        return Ok(p.clone());
    }
    let u: Vec<f64> = v.iter().map(|c| c / speed).collect();
    let path = shoot(m, p, &u, speed, Tolerances::default())?;
    Ok(path.end_point(m))
}
