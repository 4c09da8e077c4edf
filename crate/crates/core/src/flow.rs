//! Geodesic flow co-integrated with Jacobi fields, with chart changes.
//!
//! State layout for `m` fields in dimension `n`:
//! `[x (n), x' (n), J_1 (n), DJ_1 (n), .., J_m (n), DJ_m (n)]`, where `DJ` is
//! the covariant derivative along the geodesic, carried in chart components.

use crate::atlas::{Manifold, SWITCH_MARGIN};
use crate::error::{Error, Result};
use crate::geodesic::GeodesicPath;
use crate::linalg;
use crate::metric::{ManifoldChart, Point};
use crate::ode::{self, Dopri5, OdeSystem, Tolerances};

const MIN_MARGIN: f64 = 0.05;
const MAX_STEPS: usize = 200_000;

#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub t0: f64,
    pub h: f64,
    pub chart: usize,
    /// Product of the signs of the transition Jacobians met so far.
    pub orient: f64,
}

/// Dense output of one integration, possibly spanning several charts.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub n: usize,
    pub nfields: usize,
    pub steps: Vec<StepInfo>,
    coeffs: Vec<f64>,
    pub t_end: f64,
}

impl Trajectory {
    pub fn state_len(&self) -> usize {
        2 * self.n * (1 + self.nfields)
    }

    fn locate(&self, t: f64) -> usize {
        match self.steps.partition_point(|s| s.t0 <= t) {
            0 => 0,
            i => i - 1,
        }
    }

    /// Full state at `t` (clamped to the integrated interval), with the chart
    /// it is expressed in and the accumulated orientation sign.
    pub fn state_at(&self, t: f64, out: &mut [f64]) -> (usize, f64) {
        let m = self.state_len();
        if self.steps.is_empty() {
            out.copy_from_slice(&self.coeffs[..m]);
            return (0, 1.0);
        }
        let i = self.locate(t);
        let s = &self.steps[i];
        let theta = ((t - s.t0) / s.h).clamp(0.0, 1.0);
        ode::dense_eval(&self.coeffs[i * 5 * m..(i + 1) * 5 * m], theta, out);
        (s.chart, s.orient)
    }

    pub fn state_vec(&self, t: f64) -> (usize, f64, Vec<f64>) {
        let mut y = vec![0.0; self.state_len()];
        let (c, o) = self.state_at(t, &mut y);
        (c, o, y)
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

struct FlowSystem<'a> {
    chart: &'a ManifoldChart,
    n: usize,
    nfields: usize,
    gamma: Vec<f64>,
    riemann: Vec<f64>,
    curv: Vec<f64>,
}

impl<'a> FlowSystem<'a> {
    fn new(chart: &'a ManifoldChart, nfields: usize) -> Self {
        let n = chart.dim;
        FlowSystem {
            chart,
            n,
            nfields,
            gamma: vec![0.0; n * n * n],
            riemann: Vec::new(),
            curv: vec![0.0; n],
        }
    }
}

#[inline]
fn gamma_contract(gamma: &[f64], n: usize, u: &[f64], w: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    let base = k * n * n;
    for i in 0..n {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        for j in 0..n {
            s += gamma[base + i * n + j] * ui * w[j];
        }
    }
    s
}

impl OdeSystem for FlowSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.n * (1 + self.nfields)
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.n;
        let x = &y[..n];
        if !self.chart.in_domain(x) {
            return Err(Error::OutOfDomain { chart: self.chart.label.clone(), point: x.to_vec() });
        }
        self.chart.christoffel_into(x, &mut self.gamma)?;
        let xd = &y[n..2 * n];
        for k in 0..n {
            dy[k] = xd[k];
            dy[n + k] = -gamma_contract(&self.gamma, n, xd, xd, k);
        }
        if self.nfields > 0 && !self.chart.has_analytic_curvature() {
            self.riemann = self.chart.riemann_fd(x)?;
        }
        for f in 0..self.nfields {
            let off = 2 * n * (1 + f);
            let j = &y[off..off + n];
            let dj = &y[off + n..off + 2 * n];
            if !self.chart.curvature_analytic(x, xd, j, &mut self.curv) {
                ManifoldChart::apply_riemann(n, &self.riemann, xd, j, &mut self.curv);
            }
            for k in 0..n {
                dy[off + k] = dj[k] - gamma_contract(&self.gamma, n, xd, j, k);
                dy[off + n + k] = -self.curv[k] - gamma_contract(&self.gamma, n, xd, dj, k);
            }
        }
        Ok(())
    }
}

/// Re-expresses a full state in chart `to`; returns the orientation sign of
/// the change of coordinates.
fn transfer(m: &Manifold, from: usize, to: usize, y: &mut [f64]) -> Option<f64> {
    let n = m.dim();
    let (x_to, jac) = m.transition(from, to, &y[..n])?;
    let nvec = y.len() / n - 1;
    let mut tmp = vec![0.0; n];
    for b in 0..nvec {
        let v = &mut y[n * (b + 1)..n * (b + 2)];
        for r in 0..n {
            tmp[r] = (0..n).map(|c| jac[r * n + c] * v[c]).sum();
        }
        v.copy_from_slice(&tmp);
    }
    y[..n].copy_from_slice(&x_to);
    Some(linalg::det(&jac, n).signum())
}

/// Moves the state to the chart with the largest margin if the current one
/// is too close to its singular set.
fn maybe_switch(m: &Manifold, chart: &mut usize, orient: &mut f64, y: &mut [f64]) -> bool {
    let n = m.dim();
    let cur = m.chart(*chart).margin(&y[..n]);
    if cur >= SWITCH_MARGIN || m.charts.len() == 1 {
        return false;
    }
    let mut best = (*chart, cur);
    for k in 0..m.charts.len() {
        if k == *chart {
            continue;
        }
        if let Some((xk, _)) = m.transition(*chart, k, &y[..n]) {
            let mk = m.chart(k).margin(&xk);
            if mk > best.1 {
                best = (k, mk);
            }
        }
    }
    if best.0 == *chart {
        return false;
    }
    match transfer(m, *chart, best.0, y) {
        Some(s) => {
            *orient *= s;
            *chart = best.0;
            true
        }
        None => false,
    }
}

/// Integrates the geodesic with initial velocity `v` at `start`, together
/// with Jacobi fields given by their initial `(J, DJ)`, on `[0, t_end]`.
pub fn integrate(
    m: &Manifold,
    start: &Point,
    v: &[f64],
    fields: &[(Vec<f64>, Vec<f64>)],
    t_end: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    let n = m.dim();
    let nfields = fields.len();
    let len = 2 * n * (1 + nfields);
    let mut y = vec![0.0; len];
    y[..n].copy_from_slice(&start.coords);
    y[n..2 * n].copy_from_slice(v);
    for (f, (j, dj)) in fields.iter().enumerate() {
        let off = 2 * n * (1 + f);
        y[off..off + n].copy_from_slice(j);
        y[off + n..off + 2 * n].copy_from_slice(dj);
    }
    let mut chart = start.chart;
    let mut orient = 1.0;
    maybe_switch(m, &mut chart, &mut orient, &mut y);

    let mut traj = Trajectory { n, nfields, steps: Vec::new(), coeffs: Vec::new(), t_end: 0.0 };
    if t_end <= 0.0 || y[n..2 * n].iter().all(|&c| c == 0.0) && nfields == 0 {
        // constant state: store it as a zero-length polynomial
        traj.coeffs = y.clone();
        traj.coeffs.resize(5 * len, 0.0);
        traj.steps.push(StepInfo { t0: 0.0, h: t_end.max(1.0), chart, orient });
        traj.t_end = t_end.max(0.0);
        return Ok(traj);
    }

    let mut st = Dopri5::new(len);
    let mut buf = vec![0.0; 5 * len];
    let mut t = 0.0;
    let mut sys = FlowSystem::new(m.chart(chart), nfields);
    sys.rhs(0.0, &y, &mut st.k[0])?;
    let f0 = st.k[0].clone();
    let mut h = ode::initial_step(&mut sys, 0.0, &y, &f0, t_end, tol);
    let mut n_steps = 0usize;

    let speed = {
        let mut g = vec![0.0; n * n];
        m.chart(start.chart).metric_into(&start.coords, &mut g);
        linalg::norm(&g, v)
    };
    let left = |t: f64, traj: Trajectory| Error::LeftDomain {
        t,
        partial: Box::new(GeodesicPath::from_trajectory(traj, start.clone(), v.to_vec(), speed)),
    };

    while t < t_end {
        n_steps += 1;
        if n_steps > MAX_STEPS {
            return Err(Error::NonFiniteState { t });
        }
        if h < 1e-12 * (1.0 + t.abs()) {
            traj.t_end = t;
            return Err(left(t, traj));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let err = match st.try_step(&mut sys, t, &y, h, tol) {
            Ok(e) => e,
            Err(Error::NonFiniteState { .. }) | Err(Error::OutOfDomain { .. })
            | Err(Error::NotPositiveDefinite { .. }) | Err(Error::StencilOutsideDomain { .. }) => {
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        if err > 1.0 {
            h *= ode::step_factor(err, false);
            continue;
        }
        let chart_ref = m.chart(chart);
        if chart_ref.margin(&st.y_new[..n]) < MIN_MARGIN || !chart_ref.in_domain(&st.y_new[..n]) {
            h *= 0.5;
            continue;
        }
        st.dense_coeffs(&y, h, &mut buf);
        traj.steps.push(StepInfo { t0: t, h, chart, orient });
        traj.coeffs.extend_from_slice(&buf);
        y.copy_from_slice(&st.y_new);
        t = if last { t_end } else { t + h };
        h *= ode::step_factor(err, true);
        if maybe_switch(m, &mut chart, &mut orient, &mut y) {
            sys = FlowSystem::new(m.chart(chart), nfields);
            sys.rhs(t, &y, &mut st.k[0])?;
        } else {
            let k7 = std::mem::take(&mut st.k[6]);
            st.k[6] = std::mem::replace(&mut st.k[0], k7);
        }
    }
    traj.t_end = t_end;
    Ok(traj)
}
