//! Analysis configuration as read from JSON.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::convexity::{AnalysisOptions, Condition};
use crate::error::{Error, Result};
use crate::metric::Point;
use crate::models::{get_model, sample_points, ModelRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

/// Cell centers of a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsSpec {
    List(Vec<Vec<f64>>),
    Grid { grid: GridSpec },
    Random { random: usize },
}

impl Default for PointsSpec {
    fn default() -> Self {
        PointsSpec::Random { random: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// `0` picks the default for the dimension.
    pub n_dirs: usize,
    pub n_pairs: usize,
    pub n_starts: usize,
    pub max_ball_checks: usize,
    pub radius_tol: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        let d = AnalysisOptions::default();
        Budgets {
            n_dirs: d.n_dirs,
            n_pairs: d.n_pairs,
            n_starts: d.n_starts,
            max_ball_checks: d.max_ball_checks,
            radius_tol: d.radius_tol,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: Format,
}

impl OutputSpec {
    /// Format guessed from the file extension (JSON unless `.csv`).
    pub fn from_path(path: &Path) -> Self {
        let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        OutputSpec { path: path.to_path_buf(), format: if csv { Format::Csv } else { Format::Json } }
    }
}

fn default_bound() -> f64 {
    10.0
}

fn default_conditions() -> Vec<Condition> {
    vec![Condition::B]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub points: PointsSpec,
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    /// Extra ball radii tried when looking for a distinguishing ball.
    #[serde(default)]
    pub probe_radii: Vec<f64>,
    /// Ball radii checked at every point.
    #[serde(default)]
    pub balls: Vec<f64>,
    /// Evenly spread directions per point along which cut points are classified.
    #[serde(default)]
    pub cut_directions: usize,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
}

impl AnalysisConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        cfg.check_scalars()?;
        Ok(cfg)
    }

    /// A config for `model` with default settings.
    pub fn for_model(name: &str) -> Self {
        AnalysisConfig {
            model: ModelSpec { name: name.to_string(), params: Value::Null },
            points: PointsSpec::default(),
            bound: default_bound(),
            seed: 0,
            budgets: Budgets::default(),
            conditions: default_conditions(),
            probe_radii: Vec::new(),
            balls: Vec::new(),
            cut_directions: 0,
            outputs: Vec::new(),
        }
    }

    fn check_scalars(&self) -> Result<()> {
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::Config(format!("bound must be positive, got {}", self.bound)));
        }
        if self.budgets.n_pairs == 0 || self.budgets.n_starts == 0 {
            return Err(Error::Config("n_pairs and n_starts must be positive".into()));
        }
        if !(self.budgets.radius_tol > 0.0) {
            return Err(Error::Config("radius_tol must be positive".into()));
        }
        for r in self.probe_radii.iter().chain(&self.balls) {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("ball radii must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            bound: self.bound,
            n_dirs: self.budgets.n_dirs,
            n_pairs: self.budgets.n_pairs,
            n_starts: self.budgets.n_starts,
            seed: self.seed,
            max_ball_checks: self.budgets.max_ball_checks,
            radius_tol: self.budgets.radius_tol,
        }
    }

    /// The model and the analysis points, validated.
    pub fn resolve(&self) -> Result<(ModelRecord, Vec<Point>)> {
        self.check_scalars()?;
        let rec = get_model(&self.model.name, &self.model.params)?;
        let m = &rec.manifold;
        let n = m.dim();
        let coords: Vec<Vec<f64>> = match &self.points {
            PointsSpec::List(list) => list.clone(),
            PointsSpec::Grid { grid } => grid_points(grid, n)?,
            PointsSpec::Random { random } => {
                // a separate stream from the one the estimators use
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let s: u64 = rng.random();
                return Ok((rec.clone(), sample_points(&rec, *random, s)?));
            }
        };
        if coords.is_empty() {
            return Err(Error::Config("no points to analyze".into()));
        }
        let pts = coords
            .iter()
            .map(|x| {
                if x.len() != n {
                    return Err(Error::Config(format!("point {x:?} has {} coordinates, expected {n}", x.len())));
                }
                m.point(x)
            })
            .collect::<Result<_>>()?;
        Ok((rec, pts))
    }
}

fn grid_points(g: &GridSpec, n: usize) -> Result<Vec<Vec<f64>>> {
    if g.lo.len() != n || g.hi.len() != n || g.n.len() != n {
        return Err(Error::Config(format!("grid lo, hi and n must each have {n} entries")));
    }
    if g.n.iter().any(|&k| k == 0) {
        return Err(Error::Config("grid counts must be positive".into()));
    }
    let total: usize = g.n.iter().product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; n];
        // last coordinate varies fastest
        for i in (0..n).rev() {
            let k = rem % g.n[i];
            rem /= g.n[i];
            x[i] = g.lo[i] + (k as f64 + 0.5) * (g.hi[i] - g.lo[i]) / g.n[i] as f64;
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_uses_cell_centers() {
        let cfg = AnalysisConfig::from_json(
            r#"{"model": {"name": "flat_torus"}, "points": {"grid": {"lo": [0, 0], "hi": [1, 1], "n": [5, 5]}}}"#,
        )
        .unwrap();
        let (_, pts) = cfg.resolve().unwrap();
        assert_eq!(pts.len(), 25);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&pts[0].coords, &[0.1, 0.1]));
        assert!(close(&pts[1].coords, &[0.1, 0.3]));
        assert!(close(&pts[5].coords, &[0.3, 0.1]));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(AnalysisConfig::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(
            AnalysisConfig::from_json(r#"{"model": {"name": "sphere"}, "bound": -1}"#),
            Err(Error::Config(_))
        ));
        let cfg = AnalysisConfig::from_json(r#"{"model": {"name": "sphereX"}}"#).unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::UnknownModel(_))));
        let cfg = AnalysisConfig::from_json(r#"{"model": {"name": "sphere"}, "points": [[1.0]]}"#).unwrap();
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn random_points_are_seeded() {
        let mut cfg = AnalysisConfig::for_model("ellipsoid");
        cfg.points = PointsSpec::Random { random: 3 };
        let a = cfg.resolve().unwrap().1;
        let b = cfg.resolve().unwrap().1;
        assert_eq!(a, b);
        cfg.seed = 1;
        assert_ne!(a, cfg.resolve().unwrap().1);
    }
}
