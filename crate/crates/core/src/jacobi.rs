//! p-Jacobi fields, the index form on them, and radii along a direction at
//! which the index form or the Jacobi fields degenerate.

use serde::{Deserialize, Serialize};

use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::flow::{self, Trajectory};
use crate::geodesic::{self, GeodesicPath};
use crate::linalg;
use crate::metric::Point;
use crate::ode::Tolerances;

/// Zero threshold for normalized index-form eigenvalues and Jacobi determinants.
pub const EPS_E: f64 = 1e-7;
/// Samples on `(0, bound]` used to bracket the first degeneracy.
pub const BRACKET_SAMPLES: usize = 200;
const BISECT_TOL: f64 = 1e-8;
/// Jacobi fields are integrated more tightly than plain geodesics: index-form
/// entries grow like `sinh²` on negatively curved models.
pub const JACOBI_TOL: Tolerances = Tolerances { atol: 1e-11, rtol: 1e-11 };

/// A radius along a direction: a finite value, or none found up to `bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    Finite(f64),
    ExceedsBound(f64),
}

impl Radius {
    pub fn value(&self) -> Option<f64> {
        match self {
            Radius::Finite(v) => Some(*v),
            Radius::ExceedsBound(_) => None,
        }
    }

    /// The value, or `+inf` when it exceeds the bound.
    pub fn or_inf(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Radius::Finite(_))
    }
}

/// A p-Jacobi field along a geodesic: `J(0) = 0`, `D_t J(0) = w0 ⊥ γ'(0)`.
#[derive(Clone, Debug)]
pub struct JacobiField {
    pub traj: Trajectory,
    pub start: Point,
    pub v0: Vec<f64>,
    pub w0: Vec<f64>,
}

/// Value of a Jacobi field and its covariant derivative at some `t`.
#[derive(Clone, Debug)]
pub struct JacobiState {
    pub chart: usize,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub j: Vec<f64>,
    pub dj: Vec<f64>,
    pub g: Vec<f64>,
}

impl JacobiField {
    pub fn t1(&self) -> f64 {
        self.traj.t_end
    }

    pub fn state(&self, m: &Manifold, t: f64) -> JacobiState {
        let n = self.traj.n;
        let (c, _, y) = self.traj.state_vec(t);
        let mut g = vec![0.0; n * n];
        m.chart(c).metric_into(&y[..n], &mut g);
        JacobiState {
            chart: c,
            x: y[..n].to_vec(),
            xdot: y[n..2 * n].to_vec(),
            j: y[2 * n..3 * n].to_vec(),
            dj: y[3 * n..4 * n].to_vec(),
            g,
        }
    }

    pub fn norm(&self, m: &Manifold, t: f64) -> f64 {
        let s = self.state(m, t);
        linalg::norm(&s.g, &s.j)
    }
}

fn check_orthogonal(m: &Manifold, p: &Point, v: &[f64], w: &[f64]) -> Result<()> {
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let inner = linalg::inner(&g, v, w);
    let scale = linalg::norm(&g, v) * linalg::norm(&g, w);
    if inner.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::NotOrthogonal { inner });
    }
    Ok(())
}

/// Jacobi field along `path` with `J(0) = 0` and `D_t J(0) = w0`.
pub fn propagate_jacobi(m: &Manifold, path: &GeodesicPath, w0: &[f64]) -> Result<JacobiField> {
    check_orthogonal(m, &path.start, &path.v0, w0)?;
    let n = m.dim();
    let traj = flow::integrate(
        m,
        &path.start,
        &path.v0,
        &[(vec![0.0; n], w0.to_vec())],
        path.t1(),
        JACOBI_TOL,
    )?;
    Ok(JacobiField { traj, start: path.start.clone(), v0: path.v0.clone(), w0: w0.to_vec() })
}

/// `I = <D_t J(r), J(r)>`.
pub fn index_form_value(m: &Manifold, field: &JacobiField, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= field.t1() * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange { value: r, lo: 0.0, hi: field.t1() });
    }
    let s = field.state(m, r);
    Ok(linalg::inner(&s.g, &s.dj, &s.j))
}

fn unit(m: &Manifold, p: &Point, v: &[f64]) -> Result<Vec<f64>> {
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let nv = linalg::norm(&g, v);
    if !(nv > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    Ok(v.iter().map(|c| c / nv).collect())
}

/// `G(t, v, w)`: the index form at radius `t` along the unit-speed geodesic
/// in direction `v`, on the Jacobi field with initial derivative `w`.
pub fn g_eval(m: &Manifold, p: &Point, v: &[f64], w: &[f64], t: f64) -> Result<f64> {
    let u = unit(m, p, v)?;
    let path = geodesic::shoot(m, p, &u, t, Tolerances::default())?;
    let field = propagate_jacobi(m, &path, w)?;
    index_form_value(m, &field, t)
}

/// The symmetric `(n-1) x (n-1)` index-form matrix at radius `t`.
#[derive(Clone, Debug, Serialize)]
pub struct IndexFormMatrix {
    pub base: Point,
    pub direction: Vec<f64>,
    pub t: f64,
    pub basis: Vec<Vec<f64>>,
    /// Row-major.
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Largest `|<DJ_k, J_l> - <J_k, DJ_l>|`, before symmetrization.
    pub asymmetry: f64,
}

/// Geodesic in direction `v` carrying the `n - 1` Jacobi fields of an
/// orthonormal frame of `v^⊥`.
#[derive(Clone, Debug)]
pub struct IndexFrame {
    pub base: Point,
    pub direction: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub traj: Trajectory,
}

impl IndexFrame {
    /// Integrates up to `t_end`; `v` is normalized.
    pub fn new(m: &Manifold, p: &Point, v: &[f64], t_end: f64) -> Result<Self> {
        let u = unit(m, p, v)?;
        let g = m.chart(p.chart).eval_metric(&p.coords)?;
        let basis = linalg::orthonormal_complement(&g, &u);
        let n = m.dim();
        let fields: Vec<(Vec<f64>, Vec<f64>)> =
            basis.iter().map(|e| (vec![0.0; n], e.clone())).collect();
        let traj = flow::integrate(m, p, &u, &fields, t_end, JACOBI_TOL)?;
        Ok(IndexFrame { base: p.clone(), direction: u, basis, traj })
    }

    pub fn t_end(&self) -> f64 {
        self.traj.t_end
    }

    fn unpack(&self, m: &Manifold, t: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.traj.n;
        let (c, orient, y) = self.traj.state_vec(t);
        let mut g = vec![0.0; n * n];
        m.chart(c).metric_into(&y[..n], &mut g);
        (y, g, orient)
    }

    /// Raw `M_kl = <DJ_k(t), J_l(t)>`, symmetrized, and the asymmetry.
    pub fn raw_matrix(&self, m: &Manifold, t: f64) -> (Vec<f64>, f64) {
        let n = self.traj.n;
        let k = n - 1;
        let (y, g, _) = self.unpack(m, t);
        let jf = |a: usize| &y[2 * n * (1 + a)..2 * n * (1 + a) + n];
        let dj = |a: usize| &y[2 * n * (1 + a) + n..2 * n * (2 + a)];
        let mut mat = vec![0.0; k * k];
        let mut asym: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let ab = linalg::inner(&g, dj(a), jf(b));
                let ba = linalg::inner(&g, jf(a), dj(b));
                asym = asym.max((ab - ba).abs());
                mat[a * k + b] = 0.5 * (ab + ba);
            }
        }
        (mat, asym)
    }

    pub fn matrix(&self, m: &Manifold, t: f64) -> IndexFormMatrix {
        let k = self.traj.n - 1;
        let (mat, asym) = self.raw_matrix(m, t);
        IndexFormMatrix {
            base: self.base.clone(),
            direction: self.direction.clone(),
            t,
            basis: self.basis.clone(),
            eigenvalues: linalg::sym_eigenvalues(&mat, k),
            matrix: mat,
            asymmetry: asym,
        }
    }

    /// Smallest eigenvalue of the index-form matrix, normalized by its
    /// average diagonal when that exceeds one.
    pub fn lambda_hat(&self, m: &Manifold, t: f64) -> f64 {
        let k = self.traj.n - 1;
        let (mat, _) = self.raw_matrix(m, t);
        let ev = linalg::sym_eigenvalues(&mat, k);
        let tr: f64 = (0..k).map(|i| mat[i * k + i]).sum();
        ev[0] / (tr.abs() / k as f64).max(1.0)
    }

    /// Oriented volume `det[J_1, .., J_{n-1}, γ']`, equal to the determinant
    /// of the Jacobi fields against a parallel orthonormal frame of `γ'^⊥`.
    pub fn jacobi_det(&self, m: &Manifold, t: f64) -> f64 {
        let n = self.traj.n;
        let (y, g, orient) = self.unpack(m, t);
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n - 1 {
                a[r * n + c] = y[2 * n * (1 + c) + r];
            }
            a[r * n + n - 1] = y[n + r];
        }
        linalg::det(&a, n) * linalg::det(&g, n).max(0.0).sqrt() * orient
    }

    /// Smallest singular value of the Jacobi fields (square root of the
    /// smallest eigenvalue of their Gram matrix).
    pub fn sigma_min(&self, m: &Manifold, t: f64) -> f64 {
        let n = self.traj.n;
        let k = n - 1;
        let (y, g, _) = self.unpack(m, t);
        let jf = |a: usize| &y[2 * n * (1 + a)..2 * n * (1 + a) + n];
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                gram[a * k + b] = linalg::inner(&g, jf(a), jf(b));
            }
        }
        linalg::sym_eigenvalues(&gram, k)[0].max(0.0).sqrt()
    }

    fn grid(&self, bound: f64) -> Vec<f64> {
        let b = bound.min(self.t_end());
        (1..=BRACKET_SAMPLES).map(|k| b * k as f64 / BRACKET_SAMPLES as f64).collect()
    }

    /// First `t` in `(0, bound]` where `pred(t)` holds, bracketed on the
    /// sample grid and bisected.
    fn first_true(&self, bound: f64, pred: impl Fn(f64) -> bool) -> Radius {
        let ts = self.grid(bound);
        let mut prev = 0.0;
        for &t in &ts {
            if pred(t) {
                let (mut lo, mut hi) = (prev, t);
                while hi - lo > BISECT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if pred(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Radius::Finite(hi);
            }
            prev = t;
        }
        Radius::ExceedsBound(bound)
    }

    /// First radius where the s.c.c. fails: normalized `λ_min <= ε`.
    pub fn scc_breakdown(&self, m: &Manifold, bound: f64) -> Radius {
        self.first_true(bound, |t| self.lambda_hat(m, t) <= EPS_E)
    }

    /// First radius where the c.c. fails: normalized `λ_min < -ε`.
    pub fn cc_breakdown(&self, m: &Manifold, bound: f64) -> Radius {
        self.first_true(bound, |t| self.lambda_hat(m, t) < -EPS_E)
    }

    /// First conjugate point: a sign change of the Jacobi determinant, or a
    /// touching zero of the smallest singular value (even multiplicity).
    pub fn conjugate(&self, m: &Manifold, bound: f64) -> Radius {
        let by_sign = self.first_true(bound, |t| self.jacobi_det(m, t) <= 0.0);
        let ts = self.grid(bound);
        let s: Vec<f64> = ts.iter().map(|&t| self.sigma_min(m, t)).collect();
        let limit = by_sign.or_inf();
        let mut best = by_sign;
        for i in 1..ts.len().saturating_sub(1) {
            if ts[i - 1] >= limit {
                break;
            }
            if s[i] < s[i - 1] && s[i] <= s[i + 1] {
                let (t, v) = golden_min(|t| self.sigma_min(m, t), ts[i - 1], ts[i + 1]);
                let scale = s[..i].iter().cloned().fold(1.0f64, f64::max);
                if v <= 1e-6 * scale && t < best.or_inf() {
                    best = Radius::Finite(t);
                }
                break;
            }
        }
        best
    }
}

/// Golden-section minimization on `[a, b]`; returns `(argmin, min)`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > BISECT_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

pub fn index_matrix(m: &Manifold, p: &Point, v: &[f64], t: f64) -> Result<IndexFormMatrix> {
    if !(t > 0.0) {
        return Err(Error::OutOfRange { value: t, lo: 0.0, hi: f64::INFINITY });
    }
    Ok(IndexFrame::new(m, p, v, t)?.matrix(m, t))
}

pub fn conjugate_radius(m: &Manifold, p: &Point, v: &[f64], bound: f64) -> Result<Radius> {
    Ok(IndexFrame::new(m, p, v, bound)?.conjugate(m, bound))
}

pub fn scc_breakdown_radius(m: &Manifold, p: &Point, v: &[f64], bound: f64) -> Result<Radius> {
    Ok(IndexFrame::new(m, p, v, bound)?.scc_breakdown(m, bound))
}

/// `<D_t J, K> - <J, D_t K>` at `t` for the Jacobi fields along the
/// geodesic with velocity `v` that vanish at 0 with derivatives `a` and `b`.
pub fn wronskian(m: &Manifold, p: &Point, v: &[f64], a: &[f64], b: &[f64], t: f64) -> Result<f64> {
    let n = m.dim();
    let fields = [(vec![0.0; n], a.to_vec()), (vec![0.0; n], b.to_vec())];
    let traj = flow::integrate(m, p, v, &fields, t, JACOBI_TOL)?;
    let (c, _, y) = traj.state_vec(t);
    let mut g = vec![0.0; n * n];
    m.chart(c).metric_into(&y[..n], &mut g);
    let (j, dj) = (&y[2 * n..3 * n], &y[3 * n..4 * n]);
    let (k, dk) = (&y[4 * n..5 * n], &y[5 * n..6 * n]);
    Ok(linalg::inner(&g, dj, k) - linalg::inner(&g, j, dk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;
    use std::f64::consts::PI;

    #[test]
    fn sphere_radii_along_equator() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        let f = IndexFrame::new(m, &p, &[0.3, 0.8], 4.0).unwrap();
        let scc = f.scc_breakdown(m, 4.0).value().unwrap();
        let conj = f.conjugate(m, 4.0).value().unwrap();
        assert!((scc - PI / 2.0).abs() < 1e-6, "{scc}");
        assert!((conj - PI).abs() < 1e-6, "{conj}");
    }

    #[test]
    fn sphere3_conjugate_even_multiplicity() {
        let rec = get_model("sphere", &json!({"n": 3})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[1.2, 1.0, 0.5]).unwrap();
        let f = IndexFrame::new(m, &p, &[0.3, 0.8, -0.2], 4.0).unwrap();
        let conj = f.conjugate(m, 4.0).value().unwrap();
        assert!((conj - PI).abs() < 1e-5, "{conj}");
    }

    #[test]
    fn hyperbolic_g_closed_form() {
        let rec = get_model("hyperbolic_halfplane", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.0, 1.0]).unwrap();
        let g = g_eval(m, &p, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((g - 1f64.sinh() * 1f64.cosh()).abs() < 1e-8, "{g}");
    }
}
