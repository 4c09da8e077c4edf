//! Coordinate charts carrying a Riemannian metric, and the derived
//! Christoffel symbols and curvature operator.
//!
//! Christoffel arrays are laid out as `gamma[k * n * n + i * n + j] = Γ^k_ij`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub type MetricFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, u, w, out)` writes the components of `R(w, u) u`.
pub type CurvatureFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type MarginFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A coordinate chart `U ⊂ R^n` with metric components `g(x)`.
#[derive(Clone)]
pub struct ManifoldChart {
    pub label: String,
    pub dim: usize,
    /// Open interval per coordinate. For periodic coordinates the lower end
    /// is the origin of the fundamental domain `[lo, lo + period)`.
    pub domain: Vec<(f64, f64)>,
    pub period: Vec<Option<f64>>,
    metric: MetricFn,
    christoffel: Option<ChristoffelFn>,
    curvature: Option<CurvatureFn>,
    /// Distance-like measure of how far `x` is from the chart's singular set;
    /// used by the integrator to decide when to change charts.
    margin: Option<MarginFn>,
}

impl fmt::Debug for ManifoldChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldChart")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("period", &self.period)
            .field("analytic_christoffel", &self.christoffel.is_some())
            .field("analytic_curvature", &self.curvature.is_some())
            .finish()
    }
}

/// A point of a chart: `x` in coordinates of the chart with index `chart`
/// inside its manifold's atlas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        Point { chart, coords }
    }
}

/// A tangent vector given by chart components at a base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: Point,
    pub comps: Vec<f64>,
}

impl ManifoldChart {
    pub fn new(
        label: impl Into<String>,
        domain: Vec<(f64, f64)>,
        period: Vec<Option<f64>>,
        metric: MetricFn,
    ) -> Self {
        let dim = domain.len();
        assert_eq!(period.len(), dim, "period and domain lengths differ");
        ManifoldChart {
            label: label.into(),
            dim,
            domain,
            period,
            metric,
            christoffel: None,
            curvature: None,
            margin: None,
        }
    }

    pub fn with_christoffel(mut self, f: ChristoffelFn) -> Self {
        self.christoffel = Some(f);
        self
    }

    pub fn with_curvature(mut self, f: CurvatureFn) -> Self {
        self.curvature = Some(f);
        self
    }

    pub fn with_margin(mut self, f: MarginFn) -> Self {
        self.margin = Some(f);
        self
    }

    /// The same chart with analytic Christoffels and curvature removed, so
    /// every derived quantity goes through finite differences.
    pub fn finite_difference_only(&self) -> Self {
        let mut c = self.clone();
        c.christoffel = None;
        c.curvature = None;
        c
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.christoffel.is_some()
    }

    pub fn has_analytic_curvature(&self) -> bool {
        self.curvature.is_some()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        match &self.margin {
            Some(m) => m(x),
            None => f64::INFINITY,
        }
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.period[i].is_some()
    }

    /// Maps periodic coordinates into their fundamental domain.
    pub fn wrap(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            if let Some(p) = self.period[i] {
                let lo = self.domain[i].0;
                let mut w = lo + (*xi - lo).rem_euclid(p);
                if w >= lo + p {
                    w = lo;
                }
                *xi = w;
            }
        }
    }

    pub fn wrapped(&self, x: &[f64]) -> Vec<f64> {
        let mut w = x.to_vec();
        self.wrap(&mut w);
        w
    }

    /// Coordinate difference `b - a`, taking the nearest periodic image.
    pub fn coord_diff(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut d = b[i] - a[i];
            if let Some(p) = self.period[i] {
                d -= p * (d / p).round();
            }
            out[i] = d;
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().enumerate().all(|(i, &xi)| {
                xi.is_finite()
                    && (self.period[i].is_some()
                        || (xi > self.domain[i].0 && xi < self.domain[i].1))
            })
    }

    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { chart: self.label.clone(), point: x.to_vec() })
        }
    }

    /// Metric components without validation; the caller guarantees `x` is in
    /// the domain. Used in integrator hot loops.
    #[inline]
    pub fn metric_into(&self, x: &[f64], out: &mut [f64]) {
        (self.metric)(x, out);
    }

    /// `g(x)` after domain and positive-definiteness checks.
    pub fn eval_metric(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let n = self.dim;
        let xw = self.wrapped(x);
        let mut g = vec![0.0; n * n];
        (self.metric)(&xw, &mut g);
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (g[i * n + j] + g[j * n + i]);
                g[i * n + j] = s;
                g[j * n + i] = s;
            }
        }
        let min_eig = linalg::sym_eigenvalues(&g, n)[0];
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite {
                chart: self.label.clone(),
                point: x.to_vec(),
                min_eig,
            });
        }
        Ok(g)
    }

    fn fd_step(x: &[f64]) -> f64 {
        1e-4 * x.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }

    fn check_stencil(&self, x: &[f64], reach: f64) -> Result<()> {
        for i in 0..self.dim {
            if self.period[i].is_none()
                && !(x[i] - reach > self.domain[i].0 && x[i] + reach < self.domain[i].1)
            {
                return Err(Error::StencilOutsideDomain {
                    chart: self.label.clone(),
                    point: x.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Christoffel symbols from central differences of the metric.
    pub fn christoffel_fd(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_domain(x)?;
        let n = self.dim;
        let h = Self::fd_step(x);
        self.check_stencil(x, h)?;
        let mut g = vec![0.0; n * n];
        (self.metric)(x, &mut g);
        let ginv = linalg::invert(&g, n).ok_or_else(|| Error::NotPositiveDefinite {
            chart: self.label.clone(),
            point: x.to_vec(),
            min_eig: 0.0,
        })?;
        // dg[l][i][j] = ∂_l g_ij
        let mut dg = vec![0.0; n * n * n];
        let mut xp = x.to_vec();
        let mut gp = vec![0.0; n * n];
        let mut gm = vec![0.0; n * n];
        for l in 0..n {
            xp[l] = x[l] + h;
            (self.metric)(&xp, &mut gp);
            xp[l] = x[l] - h;
            (self.metric)(&xp, &mut gm);
            xp[l] = x[l];
            for a in 0..n * n {
                dg[l * n * n + a] = (gp[a] - gm[a]) / (2.0 * h);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[k * n + l]
                            * (dg[i * n * n + j * n + l] + dg[j * n * n + i * n + l]
                                - dg[l * n * n + i * n + j]);
                    }
                    out[k * n * n + i * n + j] = 0.5 * s;
                    out[k * n * n + j * n + i] = 0.5 * s;
                }
            }
        }
        Ok(())
    }

    /// Christoffel symbols without the domain check, for hot loops.
    #[inline]
    pub fn christoffel_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.christoffel {
            Some(f) => {
                f(x, out);
                Ok(())
            }
            None => self.christoffel_fd(x, out),
        }
    }

    /// `Γ^k_ij(x)`, symmetric in `i, j`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let n = self.dim;
        let xw = self.wrapped(x);
        let mut out = vec![0.0; n * n * n];
        self.christoffel_into(&xw, &mut out)?;
        for k in 0..n {
            for i in 0..n {
                for j in 0..i {
                    let s = 0.5 * (out[k * n * n + i * n + j] + out[k * n * n + j * n + i]);
                    out[k * n * n + i * n + j] = s;
                    out[k * n * n + j * n + i] = s;
                }
            }
        }
        Ok(out)
    }

    /// Riemann tensor `R^l_ijk` (layout `l*n³ + i*n² + j*n + k`) from central
    /// differences of the Christoffel symbols.
    pub fn riemann_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        let h = Self::fd_step(x);
        let reach = if self.christoffel.is_some() { h } else { 2.0 * h };
        self.check_stencil(x, reach)?;
        let n3 = n * n * n;
        let mut gam = vec![0.0; n3];
        self.christoffel_into(x, &mut gam)?;
        // dgam[i][l][j][k] = ∂_i Γ^l_jk
        let mut dgam = vec![0.0; n * n3];
        let mut xp = x.to_vec();
        let mut gp = vec![0.0; n3];
        let mut gm = vec![0.0; n3];
        for i in 0..n {
            xp[i] = x[i] + h;
            self.christoffel_into(&xp, &mut gp)?;
            xp[i] = x[i] - h;
            self.christoffel_into(&xp, &mut gm)?;
            xp[i] = x[i];
            for a in 0..n3 {
                dgam[i * n3 + a] = (gp[a] - gm[a]) / (2.0 * h);
            }
        }
        let g = |l: usize, j: usize, k: usize| gam[l * n * n + j * n + k];
        let dg = |i: usize, l: usize, j: usize, k: usize| dgam[i * n3 + l * n * n + j * n + k];
        let mut r = vec![0.0; n * n3];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = dg(i, l, j, k) - dg(j, l, i, k);
                        for m in 0..n {
                            s += g(l, i, m) * g(m, j, k) - g(l, j, m) * g(m, i, k);
                        }
                        r[l * n3 + i * n * n + j * n + k] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Applies a Riemann tensor from [`riemann_fd`](Self::riemann_fd):
    /// `out = R(w, u) u`.
    pub fn apply_riemann(n: usize, r: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) {
        let n3 = n * n * n;
        for l in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                if w[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    for k in 0..n {
                        s += r[l * n3 + i * n * n + j * n + k] * w[i] * u[j] * u[k];
                    }
                }
            }
            out[l] = s;
        }
    }

    /// `R(w, u) u` using the analytic curvature when present. Returns `false`
    /// when no analytic form exists (callers then use the finite-difference
    /// tensor).
    #[inline]
    pub fn curvature_analytic(&self, x: &[f64], u: &[f64], w: &[f64], out: &mut [f64]) -> bool {
        match &self.curvature {
            Some(f) => {
                f(x, u, w, out);
                true
            }
            None => false,
        }
    }

    /// The curvature term `R(w, u) u` of the Jacobi equation
    /// `D_t² J + R(J, γ') γ' = 0`.
    pub fn curvature_apply(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let xw = self.wrapped(x);
        let mut out = vec![0.0; self.dim];
        if !self.curvature_analytic(&xw, u, w, &mut out) {
            let r = self.riemann_fd(&xw)?;
            Self::apply_riemann(self.dim, &r, u, w, &mut out);
        }
        Ok(out)
    }

    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.eval_metric(x)?;
        Ok(linalg::inner(&g, u, v))
    }

    pub fn norm(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.eval_metric(x)?;
        Ok(linalg::norm(&g, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar() -> ManifoldChart {
        ManifoldChart::new(
            "polar",
            vec![(0.0, std::f64::consts::PI), (0.0, 2.0 * std::f64::consts::PI)],
            vec![None, Some(2.0 * std::f64::consts::PI)],
            Arc::new(|x: &[f64], g: &mut [f64]| {
                let s = x[0].sin();
                g.copy_from_slice(&[1.0, 0.0, 0.0, s * s]);
            }),
        )
    }

    #[test]
    fn fd_christoffel_polar() {
        let c = polar();
        let x = [std::f64::consts::FRAC_PI_3, 0.0];
        let gam = c.christoffel(&x).unwrap();
        // Γ^θ_φφ and Γ^φ_θφ
        assert!((gam[3] + 0.4330127018922193).abs() < 1e-7);
        assert!((gam[4 + 1] - 0.5773502691896257).abs() < 1e-7);
        assert_eq!(gam[4 + 1], gam[4 + 2]);
    }

    #[test]
    fn fd_curvature_polar_is_unit() {
        let c = polar();
        let x: [f64; 2] = [1.1, 0.4];
        let s = x[0].sin();
        let u = [1.0, 0.0];
        let w = [0.0, 1.0 / s];
        let r = c.curvature_apply(&x, &u, &w).unwrap();
        assert!((r[0] - w[0]).abs() < 1e-6 && (r[1] - w[1]).abs() < 1e-6);
    }

    #[test]
    fn out_of_domain_and_stencil() {
        let c = polar();
        assert!(matches!(c.eval_metric(&[-0.1, 0.0]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(
            c.christoffel(&[1e-5, 0.0]),
            Err(Error::StencilOutsideDomain { .. })
        ));
        // periodic coordinates are never out of domain
        assert!(c.eval_metric(&[1.0, 100.0]).is_ok());
    }

    #[test]
    fn degenerate_metric_rejected() {
        let c = ManifoldChart::new(
            "bad",
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            vec![None, None],
            Arc::new(|_: &[f64], g: &mut [f64]| g.copy_from_slice(&[1.0, 1.0, 1.0, 1.0])),
        );
        assert!(matches!(c.eval_metric(&[0.0, 0.0]), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn wrap_into_fundamental_domain() {
        let c = polar();
        let w = c.wrapped(&[1.0, -0.5]);
        assert!((w[1] - (2.0 * std::f64::consts::PI - 0.5)).abs() < 1e-15);
        let mut d = [0.0; 2];
        c.coord_diff(&[1.0, 6.2], &[1.0, 0.1], &mut d);
        assert!((d[1] - (0.1 + 2.0 * std::f64::consts::PI - 6.2)).abs() < 1e-12);
    }
}
