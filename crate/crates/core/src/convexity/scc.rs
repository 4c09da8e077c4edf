use serde::Serialize;

use super::{classify_eig, sample_directions, Check};
use crate::atlas::Manifold;
use crate::error::{Error, Result};
use crate::jacobi::IndexFrame;
use crate::metric::Point;
use crate::par;

/// Outcome of testing the strong convexity condition on a geodesic sphere.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SccVerdict {
    Holds { min_eig: f64 },
    Fails { direction: Vec<f64>, min_eig: f64 },
    Inconclusive { direction: Vec<f64>, min_eig: f64 },
}

impl SccVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, SccVerdict::Holds { .. })
    }

    pub fn min_eig(&self) -> f64 {
        match self {
            SccVerdict::Holds { min_eig }
            | SccVerdict::Fails { min_eig, .. }
            | SccVerdict::Inconclusive { min_eig, .. } => *min_eig,
        }
    }
}

/// Whether the sphere of radius `r` about `p` satisfies s.c.c., judged by
/// the smallest normalized index-form eigenvalue over `n_dirs` directions.
/// Fails with `RadiusBeyondInjectivity` when a sampled geodesic meets a
/// conjugate point before `r`.
pub fn scc_check(m: &Manifold, p: &Point, r: f64, n_dirs: usize, seed: u64) -> Result<SccVerdict> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange { value: r, lo: 0.0, hi: f64::INFINITY });
    }
    let p = m.best_chart(p);
    let dirs = sample_directions(m, &p, n_dirs.max(1), seed)?;
    let per_dir: Vec<Result<(f64, f64)>> = par::map(&dirs, |u| {
        let f = IndexFrame::new(m, &p, u, r)?;
        Ok((f.lambda_hat(m, r), f.conjugate(m, r).or_inf()))
    });
    let mut worst: Option<(usize, f64)> = None;
    let mut conj = f64::INFINITY;
    for (k, res) in per_dir.into_iter().enumerate() {
        let (lam, c) = res?;
        conj = conj.min(c);
        if worst.map_or(true, |(_, w)| lam < w) {
            worst = Some((k, lam));
        }
    }
    if conj < r {
        return Err(Error::RadiusBeyondInjectivity { radius: r, injectivity: conj });
    }
    let (k, lam) = worst.expect("at least one direction");
    Ok(match classify_eig(lam) {
        Check::Pass => SccVerdict::Holds { min_eig: lam },
        Check::Fail => SccVerdict::Fails { direction: dirs[k].clone(), min_eig: lam },
        Check::Inconclusive => SccVerdict::Inconclusive { direction: dirs[k].clone(), min_eig: lam },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::get_model;
    use serde_json::json;
    use std::f64::consts::PI;

    #[test]
    fn sphere_scc_holds_below_quarter_circle() {
        let rec = get_model("sphere", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[PI / 2.0, 0.0]).unwrap();
        assert!(scc_check(m, &p, 1.0, 128, 0).unwrap().holds());
        match scc_check(m, &p, 2.0, 128, 0).unwrap() {
            SccVerdict::Fails { min_eig, .. } => assert!((min_eig - (2f64.sin() * 2f64.cos())).abs() < 1e-6),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn euclidean_scc_always_holds() {
        let rec = get_model("euclidean", &json!({})).unwrap();
        let m = &rec.manifold;
        let p = m.point(&[0.3, -1.0]).unwrap();
        assert!(scc_check(m, &p, 7.5, 16, 0).unwrap().holds());
    }
}
