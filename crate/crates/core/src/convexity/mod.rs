//! Decision procedures for convexity of geodesic balls and the five radii
//! attached to a point.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atlas::Manifold;
use crate::error::Result;
use crate::jacobi::EPS_E;
use crate::linalg;
use crate::metric::Point;
use crate::segments::SegmentOptions;

mod ball;
mod conditions;
mod cut;
mod radii;
mod scc;

pub use ball::{
    ball_convexity_check, uniquely_geodesic_check, BallConvexityVerdict, BallVerdict, BallWitness,
    Check, UniquelyGeodesic, WitnessReason,
};
pub use conditions::{
    berger_check, berger_from_estimates, condition_check, condition_from_estimate, BergerResult, Condition, ConditionEvidence,
    ConditionReport, ConditionStatus, TAU,
};
pub use cut::{classify_cut_point, shortcut_radius, CutClass, CutOutcome, CutPointRecord};
pub use radii::{radii_estimate, RadiiEstimate, LATTICE, RadiusEvidence, RadiusName, RadiusWitness};
pub use scc::{scc_check, SccVerdict};

/// Containment tolerance for distances to the center of a ball.
pub const TOL_C: f64 = 1e-6;

/// Knobs shared by the estimators.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnalysisOptions {
    pub bound: f64,
    /// Directions per point; `0` picks 128 on surfaces and 256 otherwise.
    pub n_dirs: usize,
    pub n_pairs: usize,
    pub n_starts: usize,
    pub seed: u64,
    /// Cap on ball checks spent bisecting `c_g` and `sc_g`.
    pub max_ball_checks: usize,
    /// Bisection on radii stops at this bracket width.
    pub radius_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bound: 10.0,
            n_dirs: 0,
            n_pairs: 24,
            n_starts: 64,
            seed: 0,
            max_ball_checks: 40,
            radius_tol: 2e-3,
        }
    }
}

impl AnalysisOptions {
    pub fn dirs_for(&self, n: usize) -> usize {
        match self.n_dirs {
            0 if n == 2 => 128,
            0 => 256,
            k => k,
        }
    }

    pub fn segment_options(&self) -> SegmentOptions {
        SegmentOptions {
            bound: self.bound,
            n_starts: self.n_starts,
            seed: self.seed,
            ..SegmentOptions::default()
        }
    }
}

/// A radius estimate: a finite value with a half-width, or "nothing found
/// up to the bound".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Finite { value: f64, half_width: f64 },
    ExceedsBound { bound: f64 },
}

impl Estimate {
    pub fn finite(value: f64, half_width: f64) -> Self {
        Estimate::Finite { value, half_width }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Estimate::Finite { value, .. } => Some(*value),
            Estimate::ExceedsBound { .. } => None,
        }
    }

    pub fn half_width(&self) -> f64 {
        match self {
            Estimate::Finite { half_width, .. } => *half_width,
            Estimate::ExceedsBound { .. } => 0.0,
        }
    }

    pub fn or_inf(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Estimate::Finite { .. })
    }

    /// The smaller of two estimates.
    pub fn min(self, other: Estimate) -> Estimate {
        match (self, other) {
            (Estimate::ExceedsBound { .. }, o) => o,
            (s, Estimate::ExceedsBound { .. }) => s,
            (a, b) => {
                if b.or_inf() < a.or_inf() {
                    b
                } else {
                    a
                }
            }
        }
    }

    /// `self <= other` up to the combined half-widths.
    pub fn le(&self, other: &Estimate) -> bool {
        match (self, other) {
            (_, Estimate::ExceedsBound { .. }) => true,
            (Estimate::ExceedsBound { bound }, Estimate::Finite { value, half_width }) => {
                *bound <= value + half_width
            }
            (Estimate::Finite { value: a, half_width: ha }, Estimate::Finite { value: b, half_width: hb }) => {
                *a <= b + ha + hb
            }
        }
    }
}

/// `count` g-unit directions at `p`: evenly spaced angles on surfaces,
/// seeded uniform samples otherwise.
pub fn sample_directions(m: &Manifold, p: &Point, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let frame = linalg::orthonormal_frame(&g, n);
    let coeffs: Vec<Vec<f64>> = if n == 2 {
        (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1ec_7105);
        (0..count).map(|_| unit_gaussian(&mut rng, n)).collect()
    };
    Ok(coeffs.iter().map(|c| combine(&frame, c)).collect())
}

/// Directions spread over a half sphere (`v` and `-v` are not both listed).
pub(crate) fn half_directions(m: &Manifold, p: &Point, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    if n != 2 {
        return sample_directions(m, p, count, seed);
    }
    let g = m.chart(p.chart).eval_metric(&p.coords)?;
    let frame = linalg::orthonormal_frame(&g, n);
    Ok((0..count)
        .map(|k| {
            let a = PI * k as f64 / count as f64;
            combine(&frame, &[a.cos(), a.sin()])
        })
        .collect())
}

pub(crate) fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
            })
            .collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

pub(crate) fn combine(frame: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let n = frame[0].len();
    let mut v = vec![0.0; n];
    for (e, ck) in frame.iter().zip(c) {
        for i in 0..n {
            v[i] += ck * e[i];
        }
    }
    v
}

pub(crate) fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Infimum of per-direction values with a half-width from the spread
/// between the minimizing direction and its neighbours.
pub(crate) fn infimum(values: &[f64], dirs: &[Vec<f64>], g: &[f64], tol: f64) -> Option<(usize, f64, f64)> {
    let (k, &v) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let nbrs = neighbours(dirs, g, k, 2);
    let spread = nbrs
        .iter()
        .map(|&j| values[j])
        .filter(|x| x.is_finite())
        .map(|x| 0.5 * (x - v).abs())
        .fold(0.0, f64::max);
    Some((k, v, spread.max(tol)))
}

fn neighbours(dirs: &[Vec<f64>], g: &[f64], k: usize, count: usize) -> Vec<usize> {
    let mut idx: Vec<(f64, usize)> = dirs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(j, d)| (-linalg::inner(g, d, &dirs[k]), j))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx.into_iter().take(count).map(|(_, j)| j).collect()
}

/// Three-way threshold comparison with the inconclusive band `±EPS_E`.
pub(crate) fn classify_eig(min_eig: f64) -> Check {
    if min_eig > EPS_E {
        Check::Pass
    } else if min_eig <= -EPS_E {
        Check::Fail
    } else {
        Check::Inconclusive
    }
}
